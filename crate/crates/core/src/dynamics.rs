//! Exact time-dependent propagation along a schedule.
//!
//! With rescaled time `s = t/T` the actual propagator solves `i dV/ds = T H(s) V`
//! and the adiabatic propagator solves the same equation with
//! `H_ad = H + i[P0', P0]/T`, which maps the initial ground space exactly onto the
//! instantaneous one. Their mismatch `delta = sup_s ||V - V_ad||` is the adiabatic
//! error; the wave operator `Omega = V_ad^dagger V` and its Dyson iterates split it
//! into geometric and non-geometric parts.
//!
//! Both propagators use a fourth-order Magnus integrator (two Gauss nodes plus one
//! commutator) with exact exponentials, and the step count is doubled until two
//! successive resolutions agree.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ham::{check_point, diagonalize, HamiltonianModel, LocalSpectrum, SpectralOptions};
use crate::linalg::{self, CMat, I};
use crate::quad;
use crate::schedule::Schedule;
use crate::sweep::{self, Execution};

/// Frames whose smallest singular value after projection drops below this are
/// treated as having crossed a level.
const FRAME_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationOptions {
    /// Initial number of Magnus steps (rounded up to a multiple of `record`).
    pub steps: usize,
    /// Step-doubling tolerance on the final propagator (sup norm).
    pub tol: f64,
    pub max_steps: usize,
    /// Number of uniform intervals at which propagators are recorded.
    pub record: usize,
    pub spectral: SpectralOptions,
    pub execution: Execution,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            steps: 256,
            tol: 1e-9,
            max_steps: 1 << 22,
            record: 100,
            spectral: SpectralOptions::default(),
            execution: Execution::Sequential,
        }
    }
}

/// Propagator samples on a uniform `s` grid.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub s: Vec<f64>,
    pub unitaries: Vec<CMat>,
    /// Magnus steps of the accepted resolution.
    pub steps: usize,
    /// Sup-norm change of the final propagator under the last step doubling.
    pub error_estimate: f64,
}

impl Propagation {
    pub fn last(&self) -> &CMat {
        &self.unitaries[self.unitaries.len() - 1]
    }

    /// Largest `||U^dagger U - I||` over the samples.
    pub fn unitarity_defect(&self) -> f64 {
        self.unitaries.iter().map(linalg::unitarity_defect).fold(0.0, f64::max)
    }
}

fn magnus_step(h1: &CMat, h2: &CMat, big_t: f64, h: f64) -> Result<CMat> {
    // Omega = -i K with K = T h (H1 + H2)/2 + i (sqrt3/12) T^2 h^2 [H1, H2]
    let c = 3f64.sqrt() / 12.0 * big_t * big_t * h * h;
    let k = (h1 + h2) * linalg::cr(0.5 * big_t * h) + linalg::commutator(h1, h2) * (I * c);
    linalg::expm_i_hermitian(&linalg::hermitian_part(&k), 1.0)
}

fn cheap_unitarity_defect(u: &CMat) -> f64 {
    linalg::max_abs_entry(&(u.adjoint() * u - linalg::identity(u.ncols())))
}

/// Integrate `i dU/ds = T H(s) U` from `U(0) = I` with `steps` Magnus steps,
/// recording `record + 1` samples.
fn magnus_run<H>(ham: &H, dim: usize, big_t: f64, steps: usize, record: usize) -> Result<Vec<CMat>>
where
    H: Fn(f64) -> Result<CMat> + Sync,
{
    let h = 1.0 / steps as f64;
    let stride = steps / record;
    let (c1, c2) = (0.5 - 3f64.sqrt() / 6.0, 0.5 + 3f64.sqrt() / 6.0);
    let mut u = linalg::identity(dim);
    let mut out = Vec::with_capacity(record + 1);
    out.push(u.clone());
    for n in 0..steps {
        let s = n as f64 * h;
        let h1 = ham(s + c1 * h)?;
        let h2 = ham(s + c2 * h)?;
        u = magnus_step(&h1, &h2, big_t, h)? * u;
        if cheap_unitarity_defect(&u) > 1e-12 {
            u = linalg::polar_unitary(&u)?;
        }
        if (n + 1) % stride == 0 {
            out.push(u.clone());
        }
    }
    Ok(out)
}

/// Step-doubling driver shared by both propagators.
fn propagate_with<H>(ham: H, dim: usize, big_t: f64, opts: &PropagationOptions) -> Result<Propagation>
where
    H: Fn(f64) -> Result<CMat> + Sync + Send,
{
    if !(big_t > 0.0 && big_t.is_finite()) {
        return Err(Error::InvalidInput(format!("total time must be positive, got {big_t}")));
    }
    let record = opts.record.max(1);
    let mut steps = opts.steps.max(record).div_ceil(record) * record;
    let pair = sweep::map_indexed(opts.execution, 2, |k| magnus_run(&ham, dim, big_t, steps << k, record));
    let mut runs = pair.into_iter();
    let mut coarse = runs.next().unwrap()?;
    let mut fine = runs.next().unwrap()?;
    steps *= 2;
    loop {
        let estimate = linalg::op_norm(&(&fine[record] - &coarse[record]));
        if estimate <= opts.tol {
            let s = (0..=record).map(|k| k as f64 / record as f64).collect();
            return Ok(Propagation { s, unitaries: fine, steps, error_estimate: estimate });
        }
        if 2 * steps > opts.max_steps {
            return Err(Error::StepLimitExceeded { steps, estimate });
        }
        steps *= 2;
        coarse = fine;
        fine = magnus_run(&ham, dim, big_t, steps, record)?;
    }
}

/// Actual propagator `V(s)`.
pub fn propagate<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    big_t: f64,
    opts: &PropagationOptions,
) -> Result<Propagation> {
    check_schedule(model, schedule)?;
    propagate_with(|s| Ok(model.evaluate(&schedule.position(s))), model.dim(), big_t, opts)
}

/// `H_ad(s) = H + i[P0', P0]/T`, with `P0'` from the resolvent formula.
pub fn adiabatic_hamiltonian<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    s: f64,
    big_t: f64,
    opts: &SpectralOptions,
) -> Result<CMat> {
    let local = LocalSpectrum::new(model, &schedule.position(s), opts)?;
    let pdot = local.projector_velocity(&schedule.velocity(s));
    let correction = linalg::commutator(&pdot, local.p0()) * (I / big_t);
    Ok(&local.spectral.hamiltonian + correction)
}

/// Adiabatic propagator `V_ad(s)`.
pub fn propagate_adiabatic<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    big_t: f64,
    opts: &PropagationOptions,
) -> Result<Propagation> {
    check_schedule(model, schedule)?;
    propagate_with(
        |s| adiabatic_hamiltonian(model, schedule, s, big_t, &opts.spectral),
        model.dim(),
        big_t,
        opts,
    )
}

fn check_schedule<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(model: &M, schedule: &S) -> Result<()> {
    if schedule.param_dim() != model.param_dim() {
        return Err(Error::InvalidInput(format!(
            "schedule has {} parameters, model expects {}",
            schedule.param_dim(),
            model.param_dim()
        )));
    }
    check_point(model, &schedule.position(0.0))
}

/// `max_k ||V_ad(s_k) P0(0) V_ad(s_k)^dagger - P0(s_k)||`.
pub fn intertwining_residual<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    v_ad: &Propagation,
    opts: &SpectralOptions,
) -> Result<f64> {
    let p_start = diagonalize(model, &schedule.position(0.0), opts)?.p0;
    let mut worst: f64 = 0.0;
    for (s, u) in v_ad.s.iter().zip(&v_ad.unitaries) {
        let p = diagonalize(model, &schedule.position(*s), opts)?.p0;
        worst = worst.max(linalg::op_norm(&(u * &p_start * u.adjoint() - p)));
    }
    Ok(worst)
}

/// Both propagators at one total time, with the derived error measures.
#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub total_time: f64,
    pub s: Vec<f64>,
    pub v: Vec<CMat>,
    pub v_ad: Vec<CMat>,
    pub omega: Vec<CMat>,
    /// `sup_s ||V - V_ad||` (largest singular value).
    pub delta: f64,
    /// `sup_s ||V - V_ad||_2`, for diagnostics.
    pub delta_frobenius: f64,
    /// `||V(s) - V_ad(s)||` per sample.
    pub deviation: Vec<f64>,
    pub steps: usize,
    pub steps_adiabatic: usize,
    pub error_estimate: f64,
    pub holonomy: Option<CMat>,
}

impl PropagationResult {
    pub fn dim(&self) -> usize {
        self.v[0].nrows()
    }

    /// Operator fidelity `|Tr Omega(s)| / N` per sample.
    pub fn fidelity(&self) -> Vec<f64> {
        operator_fidelity(self)
    }
}

/// Propagate `V` and `V_ad` at total time `T` and compare them.
pub fn run<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    big_t: f64,
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    let v = propagate(model, schedule, big_t, opts)?;
    let v_ad = propagate_adiabatic(model, schedule, big_t, opts)?;
    let omega: Vec<CMat> = v_ad.unitaries.iter().zip(&v.unitaries).map(|(a, b)| a.adjoint() * b).collect();
    let deviation: Vec<f64> = v.unitaries.iter().zip(&v_ad.unitaries).map(|(a, b)| linalg::op_norm(&(a - b))).collect();
    let delta_frobenius = v
        .unitaries
        .iter()
        .zip(&v_ad.unitaries)
        .map(|(a, b)| linalg::frob_norm(&(a - b)))
        .fold(0.0, f64::max);
    Ok(PropagationResult {
        total_time: big_t,
        s: v.s.clone(),
        delta: deviation.iter().cloned().fold(0.0, f64::max),
        delta_frobenius,
        deviation,
        steps: v.steps,
        steps_adiabatic: v_ad.steps,
        error_estimate: v.error_estimate.max(v_ad.error_estimate),
        v: v.unitaries,
        v_ad: v_ad.unitaries,
        omega,
        holonomy: None,
    })
}

/// Adiabatic error `delta(T) = sup_s ||V(s) - V_ad(s)||`.
pub fn adiabatic_error<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    big_t: f64,
    opts: &PropagationOptions,
) -> Result<f64> {
    Ok(run(model, schedule, big_t, opts)?.delta)
}

/// `delta(T)` for several total times, in input order.
pub fn adiabatic_error_sweep<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    times: &[f64],
    opts: &PropagationOptions,
    exec: Execution,
) -> Vec<Result<f64>> {
    sweep::map_slice(exec, times, |&t| adiabatic_error(model, schedule, t, opts))
}

/// `|Tr Omega(s)| / N` per sample.
pub fn operator_fidelity(result: &PropagationResult) -> Vec<f64> {
    let n = result.dim() as f64;
    result.omega.iter().map(|w| w.trace().norm() / n).collect()
}

/// `sup_s ||V O V^dagger - V_ad O V_ad^dagger||`.
pub fn observable_deviation(result: &PropagationResult, observable: &CMat) -> Result<f64> {
    if observable.nrows() != result.dim() || observable.ncols() != result.dim() {
        return Err(Error::InvalidInput("observable dimension mismatch".into()));
    }
    Ok(result
        .v
        .iter()
        .zip(&result.v_ad)
        .map(|(v, va)| linalg::op_norm(&(v * observable * v.adjoint() - va * observable * va.adjoint())))
        .fold(0.0, f64::max))
}

/// Dyson iterates of the wave operator, `Omega_l(s) = -int_0^s K Omega_{l-1}`,
/// with kernel `K = V_ad^dagger [P0', P0] V_ad`.
#[derive(Debug, Clone)]
pub struct DysonLadder {
    pub s: Vec<f64>,
    /// `iterates[l][k] = Omega_l(s_k)`, `l = 0..=L`.
    pub iterates: Vec<Vec<CMat>>,
    /// `norms[l][k] = ||Omega_l(s_k)||`.
    pub norms: Vec<Vec<f64>>,
    /// Running `eps~(s) = int_0^s ||[P0', P0]||`, on the same quadrature as the iterates.
    pub eps_tilde: Vec<f64>,
    /// The exact wave operator from propagation.
    pub omega: Vec<CMat>,
    /// `remainders[l] = sup_s ||Omega - sum_{j <= l} Omega_j||`.
    pub remainders: Vec<f64>,
    pub total_time: f64,
}

impl DysonLadder {
    /// `sup_s ||Omega_1(s)||`, the first-order error component.
    pub fn delta1(&self) -> f64 {
        self.norms.get(1).map(|n| n.iter().cloned().fold(0.0, f64::max)).unwrap_or(0.0)
    }

    pub fn eps_tilde_total(&self) -> f64 {
        self.eps_tilde[self.eps_tilde.len() - 1]
    }
}

/// Cumulative trapezoid integral of matrices on a uniform grid.
fn cumulative_trapezoid(h: f64, f: &[CMat]) -> Vec<CMat> {
    let (r, c) = f[0].shape();
    let mut out = Vec::with_capacity(f.len());
    let mut acc = CMat::zeros(r, c);
    out.push(acc.clone());
    for k in 1..f.len() {
        acc += (&f[k - 1] + &f[k]) * linalg::cr(0.5 * h);
        out.push(acc.clone());
    }
    out
}

/// Wave-operator iterates up to depth `depth` on `mesh` uniform intervals.
pub fn dyson_ladder<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    big_t: f64,
    depth: usize,
    mesh: usize,
    opts: &PropagationOptions,
) -> Result<DysonLadder> {
    if depth > 4 {
        return Err(Error::InvalidInput(format!("Dyson depth {depth} exceeds 4")));
    }
    if mesh < 4 || mesh % 2 != 0 {
        return Err(Error::InvalidInput("Dyson mesh must be even and >= 4".into()));
    }
    let popts = PropagationOptions { record: mesh, ..*opts };
    let result = run(model, schedule, big_t, &popts)?;
    dyson_ladder_from(model, schedule, &result, depth, &opts.spectral)
}

/// Dyson iterates from an existing run; its recording grid is the quadrature mesh.
pub fn dyson_ladder_from<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    result: &PropagationResult,
    depth: usize,
    opts: &SpectralOptions,
) -> Result<DysonLadder> {
    let mesh = result.s.len() - 1;
    if depth > 4 {
        return Err(Error::InvalidInput(format!("Dyson depth {depth} exceeds 4")));
    }
    if mesh < 4 || mesh % 2 != 0 {
        return Err(Error::InvalidInput("Dyson mesh must be even and >= 4".into()));
    }
    let big_t = result.total_time;
    let h = 1.0 / mesh as f64;

    let mut kernel = Vec::with_capacity(mesh + 1);
    let mut comm_norm = Vec::with_capacity(mesh + 1);
    for (k, s) in result.s.iter().enumerate() {
        let local = LocalSpectrum::new(model, &schedule.position(*s), opts)?;
        let comm = linalg::commutator(&local.projector_velocity(&schedule.velocity(*s)), local.p0());
        comm_norm.push(linalg::op_norm(&comm));
        let va = &result.v_ad[k];
        kernel.push(va.adjoint() * comm * va);
    }
    let n = model.dim();
    let mut iterates = vec![vec![linalg::identity(n); mesh + 1]];
    for l in 1..=depth {
        let integrand: Vec<CMat> = kernel.iter().zip(&iterates[l - 1]).map(|(k, w)| -(k * w)).collect();
        iterates.push(cumulative_trapezoid(h, &integrand));
        if l == 1 {
            // compare against the same quadrature on every other node
            let coarse: Vec<CMat> = integrand.iter().step_by(2).cloned().collect();
            let half = cumulative_trapezoid(2.0 * h, &coarse);
            let fine_end = &iterates[1][mesh];
            let change = linalg::op_norm(&(fine_end - &half[half.len() - 1]));
            let scale = linalg::op_norm(fine_end);
            if change > 1e-2 * scale + 1e-12 {
                return Err(Error::MeshTooCoarse(change));
            }
        }
    }
    let eps_tilde = {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for k in 1..comm_norm.len() {
            acc += 0.5 * h * (comm_norm[k - 1] + comm_norm[k]);
            out.push(acc);
        }
        out
    };
    let norms: Vec<Vec<f64>> = iterates.iter().map(|it| it.iter().map(linalg::op_norm).collect()).collect();
    let mut remainders = Vec::with_capacity(depth + 1);
    let mut partial: Vec<CMat> = vec![CMat::zeros(n, n); mesh + 1];
    for it in &iterates {
        for (p, w) in partial.iter_mut().zip(it) {
            *p += w;
        }
        remainders.push(
            result
                .omega
                .iter()
                .zip(&partial)
                .map(|(o, p)| linalg::op_norm(&(o - p)))
                .fold(0.0, f64::max),
        );
    }
    Ok(DysonLadder {
        s: result.s.clone(),
        iterates,
        norms,
        eps_tilde,
        omega: result.omega.clone(),
        remainders,
        total_time: big_t,
    })
}

/// Parallel-transported ground frame and the resulting holonomy.
#[derive(Debug, Clone)]
pub struct Holonomy {
    /// `V^[0] = E1^dagger F(1)`, a `g0 x g0` unitary.
    pub matrix: CMat,
    /// Eigensolver frame at `s = 0` (the transport starts from it).
    pub frame_start: CMat,
    /// Eigensolver frame at `s = 1`.
    pub frame_end: CMat,
    /// Transported frame `F(1)`.
    pub transported: CMat,
    /// `int_0^1 E0(s) ds`, for quotienting the dynamical phase `exp(-i T int E0)`.
    pub energy_integral: f64,
}

impl Holonomy {
    /// The same holonomy expressed in other endpoint frames `E0 W0`, `E1 W1`.
    pub fn in_frames(&self, w0: &CMat, w1: &CMat) -> CMat {
        w1.adjoint() * &self.matrix * w0
    }

    /// Ground block `E1^dagger U E0` of a propagator, with the dynamical phase removed.
    pub fn ground_block(&self, u: &CMat, big_t: f64) -> CMat {
        let phase = nalgebra::Complex::from_polar(1.0, big_t * self.energy_integral);
        self.frame_end.adjoint() * u * &self.frame_start * phase
    }
}

fn reorthonormalize(f: &CMat, s: f64) -> Result<CMat> {
    let svd = SVD::try_new(f.clone(), true, true, 1e-15, 10_000)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let smallest = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if smallest < FRAME_FLOOR {
        return Err(Error::FrameDegeneration(s));
    }
    let u = svd.u.ok_or_else(|| Error::NumericalFailure("SVD lost U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::NumericalFailure("SVD lost V^T".into()))?;
    Ok(u * v_t)
}

/// Wilczek-Zee holonomy along a schedule.
///
/// The ground frame is transported with Kato's equation `dF/ds = [P0', P0] F`
/// (RK4 on `mesh` steps), projected onto the instantaneous ground space and
/// re-orthonormalized after every step. The result is gauge covariant: changing
/// the endpoint frames by unitaries `W0`, `W1` maps it to `W1^dagger V W0`.
pub fn wilczek_zee_holonomy<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    schedule: &S,
    mesh: usize,
    opts: &SpectralOptions,
) -> Result<Holonomy> {
    check_schedule(model, schedule)?;
    if mesh == 0 {
        return Err(Error::InvalidInput("holonomy mesh must be positive".into()));
    }
    let generator = |s: f64| -> Result<(CMat, CMat)> {
        let local = LocalSpectrum::new(model, &schedule.position(s), opts)?;
        let comm = linalg::commutator(&local.projector_velocity(&schedule.velocity(s)), local.p0());
        Ok((comm, local.spectral.p0))
    };
    let start = diagonalize(model, &schedule.position(0.0), opts)?;
    let frame_start = start.ground_frame();
    let h = 1.0 / mesh as f64;
    let mut f = frame_start.clone();
    let (mut k_here, _) = generator(0.0)?;
    for n in 0..mesh {
        let s = n as f64 * h;
        let (k_mid, _) = generator(s + 0.5 * h)?;
        let (k_next, p_next) = generator(s + h)?;
        let d1 = &k_here * &f;
        let d2 = &k_mid * (&f + &d1 * linalg::cr(0.5 * h));
        let d3 = &k_mid * (&f + &d2 * linalg::cr(0.5 * h));
        let d4 = &k_next * (&f + &d3 * linalg::cr(h));
        f += (d1 + (d2 + d3) * linalg::cr(2.0) + d4) * linalg::cr(h / 6.0);
        f = reorthonormalize(&(&p_next * f), s + h)?;
        k_here = k_next;
    }
    let end = diagonalize(model, &schedule.position(1.0), opts)?;
    if end.g0 != start.g0 {
        return Err(Error::RankMismatch(start.g0, end.g0));
    }
    let frame_end = end.ground_frame();
    let matrix = frame_end.adjoint() * &f;
    let energy_integral = quad::integrate(
        |s| diagonalize(model, &schedule.position(s), opts).map(|d| d.e0).unwrap_or(f64::NAN),
        0.0,
        1.0,
        1e-14,
        1e-13,
    )?;
    if !energy_integral.is_finite() {
        return Err(Error::NumericalFailure("ground energy undefined along the path".into()));
    }
    Ok(Holonomy { matrix, frame_start, frame_end, transported: f, energy_integral })
}

/// Parallel-transport generator `J = (i/T)(X - X^dagger)`,
/// `X = sum_n <0|H'|n>/(E_n - E_0) |0><n|`, for a nondegenerate ground state.
///
/// Satisfies `P0 J + J P0 = i[P0', P0]/T` and `<0|J|0> = 0`.
pub fn adiabatic_generator<M: HamiltonianModel + ?Sized>(
    model: &M,
    x: &[f64],
    velocity: &[f64],
    big_t: f64,
    opts: &SpectralOptions,
) -> Result<CMat> {
    if velocity.len() != model.param_dim() {
        return Err(Error::InvalidInput("velocity dimension mismatch".into()));
    }
    let local = LocalSpectrum::new(model, x, opts)?;
    let spec = &local.spectral;
    if spec.g0 != 1 {
        return Err(Error::DegenerateGround(spec.g0));
    }
    let hdot = local.hamiltonian_velocity(velocity);
    let v = &spec.eigenvectors;
    let elems = v.adjoint() * &hdot * v;
    let n = spec.dim();
    let ground = v.column(0);
    let mut x_op = CMat::zeros(n, n);
    for k in 1..n {
        let w = elems[(0, k)] / (spec.eigenvalues[k] - spec.e0);
        x_op += ground * v.column(k).adjoint() * w;
    }
    Ok((&x_op - x_op.adjoint()) * (I / big_t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ConstantModel, DeutschJozsa, Oracle, Projective, ProjectiveLine, RandomModel};
    use crate::schedule::LinearSchedule;
    use nalgebra::DVector;

    fn line() -> LinearSchedule {
        LinearSchedule::new(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn constant_hamiltonian_is_exact() {
        let z = CMat::from_diagonal(&DVector::from_vec(vec![linalg::cr(1.0), linalg::cr(-1.0)]));
        let m = ConstantModel::new(z, 1);
        let res = run(&m, &line(), 1.0, &PropagationOptions::default()).unwrap();
        let v = &res.v[res.v.len() - 1];
        assert!((v[(0, 0)] - nalgebra::Complex::from_polar(1.0, -1.0)).norm() < 1e-13);
        assert!((v[(1, 1)] - nalgebra::Complex::from_polar(1.0, 1.0)).norm() < 1e-13);
        assert!(res.delta < 1e-13);
        assert!(res.fidelity().iter().all(|f| (f - 1.0).abs() < 1e-13));
    }

    #[test]
    fn magnus_is_fourth_order() {
        let m = RandomModel::new(4, 1, 9);
        let sched = line();
        let ham = |s: f64| Ok(m.evaluate(&sched.position(s)));
        let reference = magnus_run(&ham, 4, 5.0, 4096, 1).unwrap();
        let e1 = linalg::op_norm(&(&magnus_run(&ham, 4, 5.0, 64, 1).unwrap()[1] - &reference[1]));
        let e2 = linalg::op_norm(&(&magnus_run(&ham, 4, 5.0, 128, 1).unwrap()[1] - &reference[1]));
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn adiabatic_propagator_intertwines() {
        let p = ProjectiveLine(Projective::new(4, 0.5, 0.0).unwrap());
        let opts = PropagationOptions::default();
        let vad = propagate_adiabatic(&p, &line(), 30.0, &opts).unwrap();
        assert!(vad.unitarity_defect() < 1e-8);
        assert!(intertwining_residual(&p, &line(), &vad, &opts.spectral).unwrap() < 1e-7);
    }

    #[test]
    fn generator_matches_commutator() {
        let m = RandomModel::new(5, 2, 17);
        let x = [0.2, 0.1];
        let v = [0.7, -0.4];
        let t = 20.0;
        let opts = SpectralOptions::default();
        let j = adiabatic_generator(&m, &x, &v, t, &opts).unwrap();
        let local = LocalSpectrum::new(&m, &x, &opts).unwrap();
        let expected = linalg::commutator(&local.projector_velocity(&v), local.p0()) * (I / t);
        let p = local.p0();
        assert!(linalg::max_abs_entry(&(p * &j + &j * p - &expected)) < 1e-12);
        let g = local.spectral.ground_frame();
        assert!((g.adjoint() * &j * &g)[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn holonomy_is_unitary_and_converged() {
        let dj = DeutschJozsa::new(Oracle::balanced(2, 3).unwrap(), 1.0).unwrap();
        let opts = SpectralOptions::default();
        let a = wilczek_zee_holonomy(&dj, &line(), 200, &opts).unwrap();
        let b = wilczek_zee_holonomy(&dj, &line(), 400, &opts).unwrap();
        assert!(linalg::unitarity_defect(&a.matrix) < 1e-8);
        assert!(linalg::op_norm(&(&a.matrix - &b.matrix)) < 1e-8);
    }
}
