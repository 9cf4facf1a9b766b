//! Metric tensor, geometric tensor, Bures and brachistochrone metrics, and the
//! path error functional.
//!
//! The primary formula for `g` is the resolvent form
//! `g_ij = Re Tr[P0 dH_i R^2 dH_j P0] / g0`, evaluated as an inner product of the
//! matrices `A_i = R dH_i P0`. Projector-derivative forms are kept alongside as
//! independent cross-checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ham::{check_point, diagonalize, HamiltonianModel, LocalSpectrum, SpectralOptions};
use crate::linalg::{self, CMat, RMat};
use crate::quad;
use crate::schedule::Schedule;
use crate::sweep::{self, Execution};

/// Metric data at a single control point.
#[derive(Debug, Clone)]
pub struct MetricSample {
    pub x: Vec<f64>,
    pub g: RMat,
    pub geometric: Option<CMat>,
    pub brachistochrone: Option<RMat>,
    pub g0: usize,
    pub gap: f64,
}

impl MetricSample {
    pub fn compute<M: HamiltonianModel + ?Sized>(
        model: &M,
        x: &[f64],
        opts: &SpectralOptions,
        with_geometric: bool,
        with_brachistochrone: bool,
    ) -> Result<Self> {
        let local = LocalSpectrum::new(model, x, opts)?;
        let geometric = geometric_from_local(&local);
        let g = geometric.map(|z| z.re);
        let brachistochrone = with_brachistochrone.then(|| brachistochrone_from_local(&local));
        Ok(MetricSample {
            x: x.to_vec(),
            g,
            geometric: with_geometric.then_some(geometric),
            brachistochrone,
            g0: local.g0(),
            gap: local.spectral.gap,
        })
    }

    /// Largest violation of symmetry, positivity, `g = Re G` and Hermiticity of `G`.
    pub fn invariant_defect(&self) -> f64 {
        let mut worst = linalg::symmetry_defect(&self.g).max((-linalg::min_eigenvalue_sym(&self.g)).max(0.0));
        if let Some(gt) = &self.geometric {
            worst = worst.max((gt.map(|z| z.re) - &self.g).amax());
            worst = worst.max(linalg::hermitian_defect(gt));
        }
        worst
    }
}

/// `A_i = R dH_i P0` for every parameter.
fn resolvent_images(local: &LocalSpectrum) -> Vec<CMat> {
    let rp = |dh: &CMat| &local.resolvent * dh * local.p0();
    local.partials.iter().map(rp).collect()
}

/// `G_ij = Tr[A_i^dagger A_j] / g0`.
pub fn geometric_from_local(local: &LocalSpectrum) -> CMat {
    let a = resolvent_images(local);
    let m = a.len();
    let g0 = local.g0() as f64;
    let mut g = CMat::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v: Complex64 = a[i].iter().zip(a[j].iter()).map(|(p, q)| p.conj() * q).sum::<Complex64>() / g0;
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

pub fn metric_from_local(local: &LocalSpectrum) -> RMat {
    geometric_from_local(local).map(|z| z.re)
}

/// Metric tensor (resolvent form).
pub fn metric_tensor<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], opts: &SpectralOptions) -> Result<RMat> {
    Ok(metric_from_local(&LocalSpectrum::new(model, x, opts)?))
}

/// Geometric tensor `G_ij = Tr[P0 dH_i R^2 dH_j P0] / g0`.
pub fn geometric_tensor<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], opts: &SpectralOptions) -> Result<CMat> {
    Ok(geometric_from_local(&LocalSpectrum::new(model, x, opts)?))
}

/// `g_ij = Tr[d_iP0 d_jP0] / (2 g0)` from the resolvent projector derivatives.
pub fn metric_projector_form<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], opts: &SpectralOptions) -> Result<RMat> {
    let local = LocalSpectrum::new(model, x, opts)?;
    let dp: Vec<CMat> = (0..model.param_dim()).map(|i| local.projector_derivative(i)).collect();
    let g0 = local.g0() as f64;
    let m = dp.len();
    Ok(RMat::from_fn(m, m, |i, j| linalg::re_trace_product(&dp[i], &dp[j]) / (2.0 * g0)))
}

/// `G_ij = Tr[P0 d_iP0 d_jP0 P0] / g0` from the resolvent projector derivatives.
pub fn geometric_projector_form<M: HamiltonianModel + ?Sized>(
    model: &M,
    x: &[f64],
    opts: &SpectralOptions,
) -> Result<CMat> {
    let local = LocalSpectrum::new(model, x, opts)?;
    let dp: Vec<CMat> = (0..model.param_dim()).map(|i| local.projector_derivative(i)).collect();
    let p = local.p0();
    let g0 = local.g0() as f64;
    let m = dp.len();
    Ok(CMat::from_fn(m, m, |i, j| (p * &dp[i] * &dp[j] * p).trace() / g0))
}

/// Metric from central differences of ground projectors: `Tr[D_iP D_jP] / (2 g0)`.
///
/// Gauge-free (projectors, not eigenvectors) and independent of the resolvent.
pub fn metric_finite_difference<M: HamiltonianModel + ?Sized>(
    model: &M,
    x: &[f64],
    h: f64,
    opts: &SpectralOptions,
) -> Result<RMat> {
    let m = model.param_dim();
    let g0 = diagonalize(model, x, opts)?.g0 as f64;
    let mut dp = Vec::with_capacity(m);
    for i in 0..m {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let pp = diagonalize(model, &xp, opts)?.p0;
        let pm = diagonalize(model, &xm, opts)?.p0;
        dp.push((pp - pm) * linalg::cr(0.5 / h));
    }
    Ok(RMat::from_fn(m, m, |i, j| linalg::re_trace_product(&dp[i], &dp[j]) / (2.0 * g0)))
}

/// Nondegenerate sum-over-states metric
/// `Re sum_{n>0} <0|dH_i|n><n|dH_j|0> / (E_n - E_0)^2`.
pub fn metric_nondegenerate<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], opts: &SpectralOptions) -> Result<RMat> {
    let spec = diagonalize(model, x, opts)?;
    if spec.g0 != 1 {
        return Err(Error::DegenerateGround(spec.g0));
    }
    if spec.gap <= opts.gap_floor {
        return Err(Error::GapCollapse { gap: spec.gap, floor: opts.gap_floor });
    }
    let m = model.param_dim();
    let v = &spec.eigenvectors;
    let elems: Vec<CMat> = (0..m).map(|i| v.adjoint() * model.partial(x, i) * v).collect();
    let n = spec.dim();
    Ok(RMat::from_fn(m, m, |i, j| {
        (1..n)
            .map(|k| {
                let w = (spec.eigenvalues[k] - spec.e0).powi(-2);
                (elems[i][(0, k)] * elems[j][(k, 0)]).re * w
            })
            .sum()
    }))
}

/// How the `tau` integral in the integral representation of `G` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TauQuadrature {
    /// `int_0^inf tau e^{-D tau} dtau = D^-2` per excited eigenpair.
    Analytic,
    /// Adaptive Gauss-Kronrod on `[0, 50/gap]` with a tail estimate beyond.
    Numeric { rel_tol: f64 },
}

/// Geometric tensor from its imaginary-time integral representation.
///
/// In the eigenbasis the integrand is
/// `tau sum_{a in ground, n excited} <a|dH_i|n><n|dH_j|a> e^{-(E_n - E0) tau}`;
/// ground-ground terms are the zero-frequency block removed by the subtraction.
pub fn geometric_tensor_integral<M: HamiltonianModel + ?Sized>(
    model: &M,
    x: &[f64],
    quadrature: TauQuadrature,
    opts: &SpectralOptions,
) -> Result<CMat> {
    let spec = diagonalize(model, x, opts)?;
    if spec.gap <= opts.gap_floor {
        return Err(Error::GapCollapse { gap: spec.gap, floor: opts.gap_floor });
    }
    let m = model.param_dim();
    let n = spec.dim();
    let g0 = spec.g0;
    let v = &spec.eigenvectors;
    let elems: Vec<CMat> = (0..m).map(|i| v.adjoint() * model.partial(x, i) * v).collect();
    // weights[(i, j)][k] = sum_a <a|dH_i|k><k|dH_j|a>
    let excited: Vec<usize> = (g0..n).collect();
    let rates: Vec<f64> = excited.iter().map(|&k| spec.eigenvalues[k] - spec.e0).collect();
    let mut weights = vec![vec![Complex64::new(0.0, 0.0); excited.len()]; m * m];
    for i in 0..m {
        for j in 0..m {
            for (idx, &k) in excited.iter().enumerate() {
                weights[i * m + j][idx] = (0..g0).map(|a| elems[i][(a, k)] * elems[j][(k, a)]).sum();
            }
        }
    }

    let values: Vec<Complex64> = match quadrature {
        TauQuadrature::Analytic => weights
            .iter()
            .map(|w| w.iter().zip(&rates).map(|(c, r)| c / (r * r)).sum())
            .collect(),
        TauQuadrature::Numeric { rel_tol } => {
            let tau_max = 50.0 / spec.gap;
            let scale: f64 = weights.iter().flatten().map(|c| c.norm()).sum::<f64>().max(1e-300);
            let tail: f64 = weights
                .iter()
                .map(|w| {
                    w.iter()
                        .zip(&rates)
                        .map(|(c, &r)| c.norm() * (-r * tau_max).exp() * (tau_max / r + 1.0 / (r * r)))
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            let norm = scale / (spec.gap * spec.gap);
            if tail > rel_tol * norm {
                return Err(Error::QuadratureNotConverged(tail));
            }
            let integrand = |tau: f64| -> Vec<f64> {
                let decay: Vec<f64> = rates.iter().map(|r| (-r * tau).exp()).collect();
                let mut out = Vec::with_capacity(2 * m * m);
                for w in &weights {
                    let s: Complex64 = w.iter().zip(&decay).map(|(c, d)| c * d).sum();
                    out.push(tau * s.re);
                    out.push(tau * s.im);
                }
                out
            };
            let raw = quad::integrate_vec(integrand, 0.0, tau_max, rel_tol * norm * 1e-3, rel_tol * 1e-3, 20_000)?;
            raw.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
        }
    };
    Ok(CMat::from_fn(m, m, |i, j| values[i * m + j] / g0 as f64))
}

/// Symmetric logarithmic derivative `L_i = 2 d_iP0` of `rho = P0/g0`.
pub fn symmetric_logarithmic_derivative<M: HamiltonianModel + ?Sized>(
    model: &M,
    x: &[f64],
    i: usize,
    opts: &SpectralOptions,
) -> Result<CMat> {
    let local = LocalSpectrum::new(model, x, opts)?;
    Ok(local.projector_derivative(i) * linalg::cr(2.0))
}

/// Bures metric `(4/g0) Tr[d_iP0 d_jP0]`, assembled from the SLDs `L = 2 dP0`.
///
/// Equals `8 g`.
pub fn bures_metric<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], opts: &SpectralOptions) -> Result<RMat> {
    let local = LocalSpectrum::new(model, x, opts)?;
    let sld: Vec<CMat> = (0..model.param_dim())
        .map(|i| local.projector_derivative(i) * linalg::cr(2.0))
        .collect();
    let g0 = local.g0() as f64;
    let m = sld.len();
    Ok(RMat::from_fn(m, m, |i, j| linalg::re_trace_product(&sld[i], &sld[j]) / g0))
}

fn brachistochrone_from_local(local: &LocalSpectrum) -> RMat {
    let m = local.partials.len();
    let d4 = local.spectral.gap.powi(4);
    RMat::from_fn(m, m, |i, j| linalg::re_trace_product(&local.partials[i], &local.partials[j]) / d4)
}

/// Brachistochrone metric `Tr[dH_i dH_j] / gap^4`.
pub fn brachistochrone_metric<M: HamiltonianModel + ?Sized>(
    model: &M,
    x: &[f64],
    opts: &SpectralOptions,
) -> Result<RMat> {
    Ok(brachistochrone_from_local(&LocalSpectrum::new(model, x, opts)?))
}

/// Trace-norm bounds on `g` and the brachistochrone metric at one point.
#[derive(Debug, Clone)]
pub struct MetricBounds {
    pub g: RMat,
    pub g_tilde: RMat,
    /// `||dH_i dH_j||_1 / gap^2`.
    pub bound_g: RMat,
    /// `||dH_i dH_j||_1 / gap^4`.
    pub bound_g_tilde: RMat,
}

impl MetricBounds {
    /// Number of entries where either bound is exceeded (beyond a relative slack).
    pub fn violations(&self, rel_slack: f64) -> usize {
        let m = self.g.nrows();
        let mut count = 0;
        for i in 0..m {
            for j in 0..m {
                if self.g[(i, j)].abs() > self.bound_g[(i, j)] * (1.0 + rel_slack) + 1e-300 {
                    count += 1;
                }
                if self.g_tilde[(i, j)].abs() > self.bound_g_tilde[(i, j)] * (1.0 + rel_slack) + 1e-300 {
                    count += 1;
                }
            }
        }
        count
    }
}

pub fn metric_bounds<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], opts: &SpectralOptions) -> Result<MetricBounds> {
    let local = LocalSpectrum::new(model, x, opts)?;
    let m = model.param_dim();
    let gap = local.spectral.gap;
    let mut norms = RMat::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            norms[(i, j)] = linalg::trace_norm(&(&local.partials[i] * &local.partials[j]));
        }
    }
    Ok(MetricBounds {
        g: metric_from_local(&local),
        g_tilde: brachistochrone_from_local(&local),
        bound_g: &norms / (gap * gap),
        bound_g_tilde: &norms / gap.powi(4),
    })
}

/// Ground-space fidelity `Tr[P P'] / g0`.
pub fn projector_fidelity(p: &CMat, q: &CMat) -> Result<f64> {
    let (r1, r2) = (projector_rank(p), projector_rank(q));
    if r1 != r2 {
        return Err(Error::RankMismatch(r1, r2));
    }
    Ok(linalg::re_trace_product(p, q) / r1.max(1) as f64)
}

fn projector_rank(p: &CMat) -> usize {
    p.trace().re.round().max(0.0) as usize
}

/// Grassmannian distance `||P - P'||_2 / sqrt(2 g0)`.
pub fn grassmannian_distance(p: &CMat, q: &CMat) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::InvalidInput("projectors act on different spaces".into()));
    }
    let (r1, r2) = (projector_rank(p), projector_rank(q));
    if r1 != r2 {
        return Err(Error::RankMismatch(r1, r2));
    }
    if r1 == 0 {
        return Err(Error::InvalidInput("rank-zero projector".into()));
    }
    Ok(linalg::frob_norm(&(p - q)) / (2.0 * r1 as f64).sqrt())
}

/// Options for path quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathQuadrature {
    /// Stop refining once successive Romberg estimates differ by less than this (relative).
    pub rel_tol: f64,
    pub min_level: u32,
    pub max_level: u32,
    pub execution: Execution,
}

impl Default for PathQuadrature {
    fn default() -> Self {
        PathQuadrature { rel_tol: 1e-8, min_level: 4, max_level: 14, execution: Execution::default() }
    }
}

/// The error functional along a schedule, evaluated three ways.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathErrorAccumulator {
    pub s: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xdot: Vec<Vec<f64>>,
    /// `sqrt(2 g0 g_ij x'^i x'^j)` at each sample.
    pub integrand: Vec<f64>,
    /// Running `eps(s)` from the metric integrand.
    pub eps: Vec<f64>,
    /// Running `eps~(s)` from the sup-norm integrand.
    pub eps_tilde: Vec<f64>,
    /// Romberg value of `eps(1)` from the metric integrand.
    pub eps_total: f64,
    /// Romberg value of `int ||[P', P0]||_2 ds` (Frobenius form).
    pub eps_frobenius: f64,
    /// Romberg value of `int ||[P', P0]|| ds` (sup-norm form).
    pub eps_tilde_total: f64,
    pub g0: usize,
    pub levels: u32,
}

impl PathErrorAccumulator {
    /// Running `eps` interpolated linearly at `s`.
    pub fn eps_at(&self, s: f64) -> f64 {
        interp(&self.s, &self.eps, s)
    }

    pub fn eps_tilde_at(&self, s: f64) -> f64 {
        interp(&self.s, &self.eps_tilde, s)
    }

    /// Path length `int sqrt(g x' x') ds = eps / sqrt(2 g0)`.
    pub fn length(&self) -> f64 {
        self.eps_total / (2.0 * self.g0 as f64).sqrt()
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => return ys[i],
        Err(i) => i.clamp(1, xs.len() - 1),
    };
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

#[derive(Debug, Clone, Copy)]
struct PathPoint {
    metric: f64,
    frobenius: f64,
    sup: f64,
    g0: usize,
}

fn path_point<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    s: f64,
    opts: &SpectralOptions,
) -> Result<PathPoint> {
    let x = schedule.position(s);
    let v = schedule.velocity(s);
    check_point(model, &x)?;
    let local = LocalSpectrum::new(model, &x, opts)?;
    let g = metric_from_local(&local);
    let g0 = local.g0();
    let mut quad = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            quad += g[(i, j)] * v[i] * v[j];
        }
    }
    let pdot = local.projector_velocity(&v);
    let comm = linalg::commutator(&pdot, local.p0());
    Ok(PathPoint {
        metric: (2.0 * g0 as f64 * quad.max(0.0)).sqrt(),
        frobenius: linalg::frob_norm(&comm),
        sup: linalg::op_norm(&comm),
        g0,
    })
}

/// Romberg extrapolation of trapezoid estimates on `2^k` intervals.
fn romberg(trapezoids: &[f64]) -> f64 {
    let mut row = trapezoids.to_vec();
    let mut factor = 4.0;
    while row.len() > 1 {
        row = row.windows(2).map(|w| w[1] + (w[1] - w[0]) / (factor - 1.0)).collect();
        factor *= 4.0;
    }
    row[0]
}

/// Running integral on a uniform grid with an even number of intervals, using
/// Simpson's rule on interval pairs and a three-point rule for the half steps.
fn cumulative_simpson(h: f64, f: &[f64]) -> Vec<f64> {
    let n = f.len() - 1;
    let mut out = vec![0.0; f.len()];
    let mut k = 0;
    while k + 2 <= n {
        let half = h / 12.0 * (5.0 * f[k] + 8.0 * f[k + 1] - f[k + 2]);
        let pair = h / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
        out[k + 1] = out[k] + half;
        out[k + 2] = out[k] + pair;
        k += 2;
    }
    if k < n {
        out[n] = out[k] + 0.5 * h * (f[k] + f[n]);
    }
    out
}

/// Error functional `eps(s) = int ||[P', P0]||_2 ds` along a schedule.
///
/// Computed both from the metric and directly from the Frobenius norm of the
/// commutator; the sup-norm variant `eps~` is accumulated on the same grid.
pub fn path_error_functional<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    opts: &SpectralOptions,
    quadrature: &PathQuadrature,
) -> Result<PathErrorAccumulator> {
    if schedule.param_dim() != model.param_dim() {
        return Err(Error::InvalidInput(format!(
            "schedule has {} parameters, model expects {}",
            schedule.param_dim(),
            model.param_dim()
        )));
    }
    let eval = |s: f64| path_point(model, schedule, s, opts);
    let exec = quadrature.execution;

    let n0 = 1usize << quadrature.min_level;
    let mut points: Vec<PathPoint> = sweep::map_indexed(exec, n0 + 1, |k| eval(k as f64 / n0 as f64))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut level = quadrature.min_level;
    let trap = |pts: &[PathPoint], pick: fn(&PathPoint) -> f64| -> f64 {
        let n = pts.len() - 1;
        let h = 1.0 / n as f64;
        h * (0.5 * pick(&pts[0]) + pts[1..n].iter().map(pick).sum::<f64>() + 0.5 * pick(&pts[n]))
    };
    let mut t_metric = vec![trap(&points, |p| p.metric)];
    let mut t_frob = vec![trap(&points, |p| p.frobenius)];
    let mut t_sup = vec![trap(&points, |p| p.sup)];
    let mut previous = f64::NAN;
    loop {
        let current = romberg(&t_metric);
        let converged = t_metric.len() >= 3 && (current - previous).abs() <= quadrature.rel_tol * current.abs().max(1e-14);
        if converged || level >= quadrature.max_level {
            if !converged && (current - previous).abs() > 1e3 * quadrature.rel_tol * current.abs().max(1e-14) {
                return Err(Error::NoConvergence {
                    iterations: level as usize,
                    residual: (current - previous).abs(),
                });
            }
            break;
        }
        previous = current;
        level += 1;
        let n = 1usize << level;
        let fresh: Vec<PathPoint> = sweep::map_indexed(exec, n / 2, |k| eval((2 * k + 1) as f64 / n as f64))
            .into_iter()
            .collect::<Result<_>>()?;
        let mut merged = Vec::with_capacity(n + 1);
        for (k, p) in points.iter().enumerate() {
            merged.push(*p);
            if k < fresh.len() {
                merged.push(fresh[k]);
            }
        }
        points = merged;
        t_metric.push(trap(&points, |p| p.metric));
        t_frob.push(trap(&points, |p| p.frobenius));
        t_sup.push(trap(&points, |p| p.sup));
    }

    let n = points.len() - 1;
    let h = 1.0 / n as f64;
    let s: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let integrand: Vec<f64> = points.iter().map(|p| p.metric).collect();
    let sup: Vec<f64> = points.iter().map(|p| p.sup).collect();
    let g0 = points.iter().map(|p| p.g0).max().unwrap_or(1);
    if points.iter().any(|p| p.g0 != g0) {
        return Err(Error::NumericalFailure("ground degeneracy changes along the path".into()));
    }
    Ok(PathErrorAccumulator {
        x: s.iter().map(|&t| schedule.position(t)).collect(),
        xdot: s.iter().map(|&t| schedule.velocity(t)).collect(),
        eps: cumulative_simpson(h, &integrand),
        eps_tilde: cumulative_simpson(h, &sup),
        eps_total: romberg(&t_metric),
        eps_frobenius: romberg(&t_frob),
        eps_tilde_total: romberg(&t_sup),
        integrand,
        s,
        g0,
        levels: level,
    })
}

/// `int_0^1 sqrt(g_ij x'^i x'^j) ds` along a schedule of a Hamiltonian model.
pub fn hamiltonian_path_length<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    opts: &SpectralOptions,
    quadrature: &PathQuadrature,
) -> Result<f64> {
    Ok(path_error_functional(model, schedule, opts, quadrature)?.length())
}
