//! End-to-end acceptance checks.
//!
//! Each check prints one `PASS`/`FAIL` line with the measured value next to its
//! threshold; the test fails if any line fails. Lines marked `INFO` are context
//! and never fail.

use std::time::{Duration, Instant};

use adiageo::dynamics::{self, PropagationOptions};
use adiageo::geodesic::{self, GeodesicOptions, HamiltonianMetric, QuadratureGeodesicOptions};
use adiageo::linalg::{self, op_norm, CMat};
use adiageo::metric::{self, MetricSample, PathQuadrature, TauQuadrature};
use adiageo::models::{
    ising_geodesic_closed_form, projective_gap, projective_geodesic, CustomModelDoc, DegenerateModel, DeutschJozsa,
    IsingCase, IsingChain, IsingLine, IsingMatrix, ModeSet, Oracle, Projective, ProjectiveLine, RandomModel,
    ShiftedModel,
};
use adiageo::scaling::{self, CriticalExponents, FitWindow};
use adiageo::schedule::{FnSchedule, PerturbedSchedule};
use adiageo::sweep::{self, Execution};
use adiageo::{diagonalize, HamiltonianModel, LinearSchedule, Path, Result, Schedule, SpectralOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, detail: impl Into<String>) {
        let detail = detail.into();
        println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((pass, format!("{id}: {detail}")));
    }

    fn info(&mut self, id: &str, detail: impl AsRef<str>) {
        println!("INFO {id}: {}", detail.as_ref());
    }

    /// Run a block that may error; an error becomes a failed line.
    fn guard(&mut self, id: &str, f: impl FnOnce(&mut Report) -> Result<()>) {
        if let Err(e) = f(self) {
            self.check(id, false, format!("error: {e}"));
        }
    }

    fn runtime(&mut self, id: &str, elapsed: Duration, limit_s: f64) {
        let t = elapsed.as_secs_f64();
        self.check(&format!("{id} runtime"), t < limit_s, format!("{t:.2} s (limit {limit_s} s)"));
    }
}

fn spectral() -> SpectralOptions {
    SpectralOptions::default()
}

fn dj2() -> DeutschJozsa {
    DeutschJozsa::new(Oracle::balanced(2, 0).unwrap(), 1.0).unwrap()
}

fn sup_on_knots(path: &Path, exact: impl Fn(f64) -> f64) -> f64 {
    path.s.iter().zip(&path.x).map(|(s, x)| (x[0] - exact(*s)).abs()).fold(0.0, f64::max)
}

fn ising_quadrature(m: usize, case: IsingCase) -> Result<Path> {
    let chain = IsingChain::new(m, ModeSet::EvenParity)?;
    let x_c = case.critical_point();
    let opts = QuadratureGeodesicOptions {
        breakpoints: if x_c > 0.0 && x_c < 1.0 { vec![x_c] } else { Vec::new() },
        ..Default::default()
    };
    Ok(geodesic::quadrature_geodesic_1d(move |x| chain.line_metric(case, x), 0.0, 1.0, &opts)?.path)
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    r.guard("1a", |r| {
        let model = dj2();
        let sol = geodesic::solve_geodesic(&HamiltonianMetric::new(&model), &[0.0], &[1.0], &GeodesicOptions::default())?;
        let err = sup_on_knots(&sol.path, |s| s);
        r.check("1a DJ geodesic x(s)=s", err < 1e-8, format!("sup error {err:.2e} (< 1e-8)"));
        Ok(())
    });
    r.guard("1b", |r| {
        for overlap in [0.125, 0.25, 0.5] {
            let model = ProjectiveLine(Projective::new(4, overlap, 0.0)?);
            let sol =
                geodesic::solve_geodesic(&HamiltonianMetric::new(&model), &[0.0], &[1.0], &GeodesicOptions::default())?;
            let err = sup_on_knots(&sol.path, |s| projective_geodesic(overlap, s));
            r.check(
                &format!("1b projective geodesic overlap={overlap}"),
                err < 1e-6,
                format!("sup error {err:.2e} (< 1e-6)"),
            );
        }
        Ok(())
    });
    r.guard("1c", |r| {
        let a = ising_geodesic_closed_form(IsingCase::I, 0.25);
        let b = ising_geodesic_closed_form(IsingCase::I, 0.5);
        let err = (a - (2f64.sqrt() - 1.0)).abs().max((b - 0.5).abs());
        r.check(
            "1c case (i) limit spot values x(1/4)=sqrt2-1, x(1/2)=1/2",
            err < 1e-14,
            format!("x(1/4)={a:.15}, x(1/2)={b:.15}"),
        );
        let cases = [IsingCase::I, IsingCase::II, IsingCase::III];
        let paths = sweep::map_slice(Execution::Parallel.effective(), &cases, |&c| ising_quadrature(100, c));
        for (case, path) in cases.iter().zip(paths) {
            let path = path?;
            let err = sup_on_knots(&path, |s| ising_geodesic_closed_form(*case, s));
            let spots = if *case == IsingCase::I {
                format!(
                    ", m=100 x(1/4)={:.6}, x(1/2)={:.6}",
                    path.position(0.25)[0],
                    path.position(0.5)[0]
                )
            } else {
                String::new()
            };
            r.check(
                &format!("1c Ising case ({}) m=100 quadrature vs limit", case.label()),
                err < 2e-3,
                format!("sup error {err:.3e} (< 2e-3){spots}"),
            );
        }
        Ok(())
    });
    r.runtime("1", start.elapsed(), 30.0);
}

fn criterion_2(r: &mut Report) {
    let start = Instant::now();
    let ms = [1usize, 4, 10, 30, 100];
    for case in [IsingCase::I, IsingCase::II, IsingCase::III] {
        r.guard(&format!("2 case ({})", case.label()), |r| {
            let paths = sweep::map_slice(Execution::Parallel.effective(), &ms, |&m| ising_quadrature(m, case));
            let limit = FnSchedule::scalar(move |s| ising_geodesic_closed_form(case, s), move |_| 0.0);
            let mut dists = Vec::new();
            for p in paths {
                dists.push(p?.sup_distance(&limit, 2000));
            }
            let monotone = dists.windows(2).all(|w| w[1] <= w[0]);
            let shown: Vec<String> = ms.iter().zip(&dists).map(|(m, d)| format!("m={m}: {d:.3e}")).collect();
            r.check(
                &format!("2 chain-size convergence case ({}) monotone in m", case.label()),
                monotone,
                shown.join(", "),
            );
            Ok(())
        });
    }
    r.runtime("2", start.elapsed(), 60.0);
}

fn criterion_3(r: &mut Report) {
    let start = Instant::now();
    let ising = CriticalExponents::ising();
    r.guard("3", |r| {
        let window = FitWindow::default();
        let fit = scaling::fit_power_law(&scaling::ising_geodesic_exponent_samples(window, 41), Some(window))?;
        r.check(
            "3 geodesic exponent chi",
            (fit.exponent - ising.chi()).abs() <= 0.02,
            format!("{:.4} (theory {}, window [{}, {}], +/- 0.02)", fit.exponent, ising.chi(), window.lo, window.hi),
        );
        let window = FitWindow::new(1e-4, 1e-2)?;
        let fit = scaling::fit_power_law(&scaling::ising_metric_divergence_samples(window, 41), Some(window))?;
        r.check(
            "3 metric divergence exponent nu*kappa",
            (fit.exponent - ising.nu_kappa()).abs() <= 0.05,
            format!(
                "{:.4} (theory {}, window [{}, {}], +/- 0.05)",
                fit.exponent,
                ising.nu_kappa(),
                window.lo,
                window.hi
            ),
        );
        let wide = FitWindow::default();
        let fit = scaling::fit_power_law(&scaling::ising_metric_divergence_samples(wide, 41), Some(wide))?;
        r.info(
            "3 metric divergence on [1e-3, 1e-1]",
            format!("{:.4}; the regular factor (1-x)^-2 of p(x) tilts the slope over the wider window", fit.exponent),
        );
        Ok(())
    });
    r.runtime("3", start.elapsed(), 10.0);
}

fn criterion_4(r: &mut Report) {
    r.guard("4", |r| {
        for n in [4usize, 16, 64] {
            let overlap = 1.0 / (n as f64).sqrt();
            let gap = projective_gap(overlap, 0.5, 0.5);
            r.check(
                &format!("4 Grover gap at (1/2,1/2), N={n}"),
                (gap - overlap).abs() <= 1e-12,
                format!("{gap:.16} vs 1/sqrt(N) = {overlap:.16}"),
            );
            let model = Projective::grover(n)?;
            let mut worst: f64 = 0.0;
            for i in 0..=10 {
                for j in 0..=10 {
                    let x = [i as f64 / 10.0, j as f64 / 10.0];
                    if x == [0.0, 0.0] {
                        continue;
                    }
                    let dense = diagonalize(&model, &x, &spectral())?;
                    worst = worst.max((dense.gap - projective_gap(overlap, x[0], x[1])).abs());
                }
            }
            r.check(
                &format!("4 Grover gap vs full diagonalization, N={n}"),
                worst <= 1e-10,
                format!("max deviation {worst:.2e} over a 11x11 grid (<= 1e-10)"),
            );
        }
        Ok(())
    });
}

fn slope_check<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(r: &mut Report, id: &str, model: &M, sched: &S) -> Result<()> {
    let times = [25.0, 50.0, 100.0, 200.0];
    let deltas = dynamics::adiabatic_error_sweep(model, sched, &times, &PropagationOptions::default(), Execution::Parallel.effective());
    let mut pts = Vec::new();
    for (t, d) in times.iter().zip(deltas) {
        pts.push((*t, d?));
    }
    let slope = scaling::log_log_slope(&pts)?;
    let shown: Vec<String> = pts.iter().map(|(t, d)| format!("T={t}: {d:.3e}")).collect();
    r.check(id, (-1.3..=-0.7).contains(&slope), format!("slope {slope:.4} in [-1.3, -0.7]; {}", shown.join(", ")));
    Ok(())
}

fn criterion_5(r: &mut Report) {
    let start = Instant::now();
    r.guard("5 grover", |r| {
        let model = ProjectiveLine(Projective::grover(4)?);
        slope_check(r, "5 delta(T) slope, Grover N=4 linear", &model, &LinearSchedule::new(vec![0.0], vec![1.0])?)
    });
    r.guard("5 ising", |r| {
        let model = IsingLine { chain: IsingMatrix::new(1)?, case: IsingCase::III };
        slope_check(r, "5 delta(T) slope, Ising m=1 (1,x) linear", &model, &LinearSchedule::new(vec![0.0], vec![1.0])?)
    });
    r.runtime("5", start.elapsed(), 300.0);
}

/// Worst values of every identity over one model, at random points and along a random segment.
#[derive(Default, Debug, Clone, Copy)]
struct IdentityStats {
    g_re_g: f64,
    bures: f64,
    integral: f64,
    commutator: f64,
    frobenius: f64,
    fidelity_violations: usize,
    intertwining: f64,
    omega1_excess: f64,
    shift: f64,
    metric_defect: f64,
}

impl IdentityStats {
    fn merge(self, o: IdentityStats) -> IdentityStats {
        IdentityStats {
            g_re_g: self.g_re_g.max(o.g_re_g),
            bures: self.bures.max(o.bures),
            integral: self.integral.max(o.integral),
            commutator: self.commutator.max(o.commutator),
            frobenius: self.frobenius.max(o.frobenius),
            fidelity_violations: self.fidelity_violations + o.fidelity_violations,
            intertwining: self.intertwining.max(o.intertwining),
            omega1_excess: self.omega1_excess.max(o.omega1_excess),
            shift: self.shift.max(o.shift),
            metric_defect: self.metric_defect.max(o.metric_defect),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn identity_stats(model: &dyn HamiltonianModel, x0: &[f64], x1: &[f64], seed: u64) -> Result<IdentityStats> {
    let opts = spectral();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = model.param_dim();
    let mut st = IdentityStats::default();
    let mut points = vec![x0.to_vec(), x1.to_vec()];
    for _ in 0..3 {
        let t: f64 = rng.gen_range(0.0..1.0);
        points.push(x0.iter().zip(x1).map(|(a, b)| a + t * (b - a)).collect());
    }
    for x in &points {
        let sample = MetricSample::compute(model, x, &opts, true, false)?;
        let big_g = sample.geometric.clone().unwrap();
        let g_proj = metric::metric_projector_form(model, x, &opts)?;
        st.g_re_g = st.g_re_g.max((big_g.map(|z| z.re) - &g_proj).amax());
        let bures = metric::bures_metric(model, x, &opts)?;
        st.bures = st.bures.max((bures - &sample.g * 8.0).amax());
        let g_int = metric::geometric_tensor_integral(model, x, TauQuadrature::Numeric { rel_tol: 1e-12 }, &opts)?;
        st.integral = st.integral.max(linalg::max_abs_entry(&(g_int - &big_g)));
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (lhs, rhs) = adiageo::ham::commutator_norm_identity_check(model, x, &v, &opts)?;
        st.commutator = st.commutator.max(rel(lhs, rhs));
        // Realness: the imaginary part of Tr[d_i P d_j P] must vanish.
        let dp: Vec<CMat> = (0..m).map(|i| adiageo::ham::projector_derivative(model, x, i, &opts)).collect::<Result<_>>()?;
        let mut imag: f64 = 0.0;
        for a in &dp {
            for b in &dp {
                imag = imag.max(linalg::trace_product(a, b).im.abs());
            }
        }
        st.metric_defect = st.metric_defect.max(sample.invariant_defect()).max(imag);
        let shifted = ShiftedModel::new(
            model,
            rng.gen_range(-3.0..3.0),
            (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let sh = MetricSample::compute(&shifted, x, &opts, true, false)?;
        st.shift = st
            .shift
            .max((sh.g - &sample.g).amax())
            .max(linalg::max_abs_entry(&(sh.geometric.unwrap() - &big_g)));
    }

    let sched = LinearSchedule::new(x0.to_vec(), x1.to_vec())?;
    let quad = PathQuadrature { rel_tol: 1e-10, execution: Execution::Sequential, ..Default::default() };
    let acc = metric::path_error_functional(model, &sched, &opts, &quad)?;
    st.frobenius = rel(acc.eps_total, acc.eps_frobenius);
    let shifted = ShiftedModel::new(model, 1.5, vec![0.7; m], vec![-0.4; m]);
    let acc_sh = metric::path_error_functional(&shifted, &sched, &opts, &quad)?;
    st.shift = st.shift.max((acc_sh.eps_total - acc.eps_total).abs());

    let t = rng.gen_range(2.0..20.0);
    let popts = PropagationOptions { record: 512, execution: Execution::Sequential, ..Default::default() };
    let result = dynamics::run(model, &sched, t, &popts)?;
    let n = model.dim() as f64;
    for (s, f) in result.s.iter().zip(result.fidelity()) {
        let lower = 1.0 - acc.eps_at(*s) / n.sqrt();
        if f < lower - 1e-9 || f > 1.0 + 1e-12 {
            st.fidelity_violations += 1;
        }
    }
    let v_ad = dynamics::propagate_adiabatic(model, &sched, t, &popts)?;
    st.intertwining = dynamics::intertwining_residual(model, &sched, &v_ad, &opts)?;
    let ladder = dynamics::dyson_ladder_from(model, &sched, &result, 1, &opts)?;
    for (o1, et) in ladder.norms[1].iter().zip(&ladder.eps_tilde) {
        st.omega1_excess = st.omega1_excess.max(o1 - et);
    }
    Ok(st)
}

fn criterion_6(r: &mut Report) {
    let start = Instant::now();
    r.guard("6", |r| {
        let stats = sweep::map_indexed(Execution::Parallel.effective(), 100, |k| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
            let dim = rng.gen_range(2..=6);
            let params = rng.gen_range(1..=3);
            let model = RandomModel::new(dim, params, 5000 + k as u64);
            let x0: Vec<f64> = (0..params).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x1: Vec<f64> = (0..params).map(|_| rng.gen_range(-1.0..1.0)).collect();
            identity_stats(&model, &x0, &x1, k as u64)
        });
        let doc: CustomModelDoc = serde_json::from_str(
            r#"{"name":"two-level","dim":2,"params":1,"terms":[
                {"coeff":1,"matrix":[[1,0],[0,-1]]},
                {"coeff":"x1","matrix":[[0,1],[1,0]]}]}"#,
        )?;
        let custom = doc.build()?;
        let builtins: Vec<(&str, Box<dyn HamiltonianModel>, Vec<f64>, Vec<f64>)> = vec![
            ("deutsch_jozsa n=2", Box::new(dj2()), vec![0.0], vec![1.0]),
            ("projective line N=4", Box::new(ProjectiveLine(Projective::grover(4)?)), vec![0.0], vec![1.0]),
            ("projective plane N=8", Box::new(Projective::new(8, 0.3, 0.4)?), vec![1.0, 0.1], vec![0.2, 1.0]),
            ("ising m=1 plane", Box::new(IsingMatrix::new(1)?), vec![1.0, 0.1], vec![0.4, 0.6]),
            ("ising m=1 case (i)", Box::new(IsingLine { chain: IsingMatrix::new(1)?, case: IsingCase::I }), vec![0.0], vec![0.6]),
            ("custom two-level", Box::new(custom), vec![-1.0], vec![1.0]),
        ];
        let mut total = IdentityStats::default();
        let mut count = 0;
        for s in stats {
            total = total.merge(s?);
            count += 1;
        }
        for (k, (name, model, x0, x1)) in builtins.iter().enumerate() {
            let s = identity_stats(model.as_ref(), x0, x1, 77 + k as u64)
                .map_err(|e| adiageo::Error::InvalidInput(format!("{name}: {e}")))?;
            total = total.merge(s);
            count += 1;
        }
        let scope = format!("{count} models");
        r.check("6 g = Re G", total.g_re_g <= 1e-9, format!("max {:.2e} (<= 1e-9), {scope}", total.g_re_g));
        r.check("6 Bures = 8 g", total.bures <= 1e-9, format!("max {:.2e} (<= 1e-9)", total.bures));
        r.check("6 integral G = spectral G", total.integral <= 1e-8, format!("max {:.2e} (<= 1e-8)", total.integral));
        r.check(
            "6 commutator-norm identity",
            total.commutator <= 1e-8,
            format!("max rel {:.2e} (<= 1e-8)", total.commutator),
        );
        r.check(
            "6 Frobenius vs metric eps quadrature",
            total.frobenius <= 1e-7,
            format!("max rel {:.2e} (<= 1e-7)", total.frobenius),
        );
        r.check(
            "6 fidelity bound 1 - eps/sqrt(N) <= f <= 1",
            total.fidelity_violations == 0,
            format!("{} violations", total.fidelity_violations),
        );
        r.check(
            "6 intertwining residual",
            total.intertwining < 1e-7,
            format!("max {:.2e} (< 1e-7)", total.intertwining),
        );
        r.check(
            "6 |Omega_1| <= eps~",
            total.omega1_excess <= 1e-12,
            format!("max excess {:.2e}", total.omega1_excess),
        );
        r.check("6 trace-shift invariance", total.shift <= 1e-10, format!("max {:.2e} (<= 1e-10)", total.shift));
        r.check(
            "6 metric symmetric, PSD, real",
            total.metric_defect <= 1e-10,
            format!("max defect {:.2e}", total.metric_defect),
        );

        // The eps sandwich on a model with a doubly degenerate ground space.
        let model = DegenerateModel::new(5, 2, 11);
        let sched = LinearSchedule::new(vec![-0.8, 0.3], vec![0.9, -0.6])?;
        let quad = PathQuadrature { rel_tol: 1e-10, ..Default::default() };
        let acc = metric::path_error_functional(&model, &sched, &spectral(), &quad)?;
        let (eps, et, g0) = (acc.eps_total, acc.eps_tilde_total, acc.g0 as f64);
        r.check(
            "6 eps~ <= eps (g0=2)",
            et <= eps * (1.0 + 1e-10),
            format!("eps~ = {et:.6}, eps = {eps:.6}"),
        );
        r.check(
            "6 eps <= sqrt(g0) eps~ (g0=2)",
            eps <= g0.sqrt() * et * (1.0 + 1e-10),
            format!("eps = {eps:.6}, sqrt(g0) eps~ = {:.6}", g0.sqrt() * et),
        );
        r.info(
            "6 sharp sandwich sqrt(2) eps~ <= eps <= sqrt(2 g0) eps~",
            format!(
                "{:.6} <= {eps:.6} <= {:.6}: {}",
                2f64.sqrt() * et,
                (2.0 * g0).sqrt() * et,
                if 2f64.sqrt() * et <= eps * (1.0 + 1e-10) && eps <= (2.0 * g0).sqrt() * et * (1.0 + 1e-10) {
                    "holds"
                } else {
                    "violated"
                }
            ),
        );
        Ok(())
    });
    r.runtime("6", start.elapsed(), 180.0);
}

fn criterion_7(r: &mut Report) {
    r.guard("7", |r| {
        let model = dj2();
        let sched = LinearSchedule::new(vec![0.0], vec![1.0])?;
        let hol = dynamics::wilczek_zee_holonomy(&model, &sched, 400, &spectral())?;
        let times = [1e2, 1e3, 1e4];
        let popts = PropagationOptions { record: 4, ..Default::default() };
        let runs = sweep::map_slice(Execution::Parallel.effective(), &times, |&t| dynamics::run(&model, &sched, t, &popts));
        let mut dev = Vec::new();
        let mut dev_ad: f64 = 0.0;
        for (t, res) in times.iter().zip(runs) {
            let res = res?;
            dev.push(op_norm(&(hol.ground_block(res.v.last().unwrap(), *t) - &hol.matrix)));
            dev_ad = dev_ad.max(op_norm(&(hol.ground_block(res.v_ad.last().unwrap(), *t) - &hol.matrix)));
        }
        let monotone = dev.windows(2).all(|w| w[1] < w[0]);
        let last = *dev.last().unwrap();
        r.check(
            "7 ground block of V approaches the holonomy",
            monotone && last < 1e-3,
            format!("T=1e2: {:.3e}, T=1e3: {:.3e}, T=1e4: {:.3e} (decreasing, final < 1e-3)", dev[0], dev[1], dev[2]),
        );
        r.check(
            "7 ground block of V_ad equals the holonomy",
            dev_ad < 1e-6,
            format!("max {dev_ad:.2e} over T (< 1e-6)"),
        );
        Ok(())
    });
}

/// Sign changes of `x'(s)` make a one-parameter perturbation backtrack.
fn backtracks<S: Schedule>(sched: &S) -> bool {
    (0..=2000).any(|k| sched.velocity(k as f64 / 2000.0)[0] < 0.0)
}

fn optimality<M: HamiltonianModel>(r: &mut Report, label: &str, model: &M, geodesic: Path, seed: u64) -> Result<()> {
    let opts = spectral();
    let quad = PathQuadrature { rel_tol: 1e-9, execution: Execution::Sequential, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturbed: Vec<PerturbedSchedule<Path>> =
        (0..50).map(|_| PerturbedSchedule::random(geodesic.clone(), 3, 0.02, 0.12, &mut rng)).collect();
    let eps_geo = metric::path_error_functional(model, &geodesic, &opts, &quad)?.eps_total;
    let exec = Execution::Parallel.effective();
    let eps_pert = sweep::map_slice(exec, &perturbed, |p| metric::path_error_functional(model, p, &opts, &quad).map(|a| a.eps_total));
    let mut min_pert = f64::INFINITY;
    let mut strict = 0;
    let mut not_larger = 0;
    let mut backtracking = 0;
    let mut backtracking_wins = 0;
    for (p, e) in perturbed.iter().zip(eps_pert) {
        let e = e?;
        min_pert = min_pert.min(e);
        strict += usize::from(eps_geo < e);
        not_larger += usize::from(eps_geo <= e * (1.0 + 1e-8));
        if backtracks(p) {
            backtracking += 1;
            backtracking_wins += usize::from(eps_geo < e);
        }
    }
    r.check(
        &format!("8 {label}: geodesic eps(1) strictly below all 50 perturbations"),
        strict == 50,
        format!("eps geodesic {eps_geo:.10}, smallest perturbed {min_pert:.10}, strictly smaller in {strict}/50"),
    );
    r.info(
        &format!("8 {label}: eps(1) split by monotonicity"),
        format!(
            "geodesic <= perturbed (rel 1e-8) in {not_larger}/50; {backtracking} perturbations backtrack, \
             geodesic strictly smaller in {backtracking_wins}/{backtracking} of those; \
             monotone ones are reparametrizations with the same eps"
        ),
    );

    let t = 100.0;
    // delta is compared between paths, not against a reference: 1e-7 on the propagators is ample.
    let popts = PropagationOptions { record: 8, tol: 1e-7, execution: Execution::Sequential, ..Default::default() };
    let delta_geo = dynamics::adiabatic_error(model, &geodesic, t, &popts)?;
    let deltas = sweep::map_slice(exec, &perturbed, |p| dynamics::adiabatic_error(model, p, t, &popts));
    let mut wins = 0;
    for d in deltas {
        wins += usize::from(delta_geo < d?);
    }
    r.check(
        &format!("8 {label}: geodesic delta at T=100 beats perturbations"),
        wins >= 40,
        format!("delta geodesic {delta_geo:.4e}, wins {wins}/50 (>= 40)"),
    );
    Ok(())
}

fn criterion_8(r: &mut Report) {
    let start = Instant::now();
    r.guard("8 grover", |r| {
        let model = ProjectiveLine(Projective::grover(4)?);
        let sol = geodesic::solve_geodesic(&HamiltonianMetric::new(&model), &[0.0], &[1.0], &GeodesicOptions::default())?;
        optimality(r, "Grover N=4", &model, sol.path, 8)
    });
    r.guard("8 ising", |r| {
        let model = IsingLine { chain: IsingMatrix::new(2)?, case: IsingCase::III };
        let sol = geodesic::solve_geodesic(&HamiltonianMetric::new(&model), &[0.0], &[1.0], &GeodesicOptions::default())?;
        optimality(r, "Ising m=2 (1,x)", &model, sol.path, 9)
    });
    r.info("8 runtime", format!("{:.2} s", start.elapsed().as_secs_f64()));
}

#[test]
fn acceptance() {
    let mut r = Report { lines: Vec::new() };
    // `ACCEPTANCE_ONLY=3,7` restricts the run to the listed criteria.
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let criteria: [(&str, fn(&mut Report)); 8] = [
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
    ];
    for (id, run) in criteria {
        if only.as_deref().is_none_or(|o| o.split(',').any(|x| x.trim() == id)) {
            run(&mut r);
        }
    }
    let failed: Vec<&String> = r.lines.iter().filter(|(p, _)| !p).map(|(_, l)| l).collect();
    println!("{} checks, {} failed", r.lines.len(), failed.len());
    assert!(failed.is_empty(), "failed checks:\n{}", failed.iter().map(|l| format!("  {l}")).collect::<Vec<_>>().join("\n"));
}
