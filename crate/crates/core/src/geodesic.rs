//! Geodesics of the control-manifold metric.
//!
//! The general solver treats `x'' + Gamma(x)[x', x'] = 0` with fixed endpoints as
//! a boundary-value problem: single shooting on the initial velocity with a damped
//! Newton iteration, falling back to finite-difference relaxation when shooting
//! diverges. One-dimensional problems also have a quadrature form: the arc-length
//! fraction `s(x) = int_x0^x sqrt(g) / int_x0^x1 sqrt(g)` is inverted directly,
//! which stays accurate through integrable metric singularities (critical points).
//!
//! Solvers work on any [`MetricField`], so analytic metrics (e.g. the Ising chain
//! at sizes far beyond exact diagonalization) and the generic Hamiltonian pipeline
//! share one code path.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ham::{diagonalize, HamiltonianModel, SpectralOptions};
use crate::linalg::RMat;
use crate::metric;
use crate::models::{IsingCase, IsingChain};
use crate::quad;
use crate::schedule::{Path, Schedule};
use crate::sweep::{self, Execution};

/// Condition number above which a metric is treated as singular.
pub const MAX_METRIC_CONDITION: f64 = 1e12;

/// A Riemannian metric on (a chart of) the control manifold.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;

    fn metric(&self, x: &[f64]) -> Result<RMat>;

    /// `d g / d x^k` by central differences with step `h`.
    fn metric_derivative(&self, x: &[f64], k: usize, h: f64) -> Result<RMat> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        Ok((self.metric(&xp)? - self.metric(&xm)?) / (2.0 * h))
    }
}

impl<T: MetricField + ?Sized> MetricField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric(&self, x: &[f64]) -> Result<RMat> {
        (**self).metric(x)
    }
    fn metric_derivative(&self, x: &[f64], k: usize, h: f64) -> Result<RMat> {
        (**self).metric_derivative(x, k, h)
    }
}

impl<T: MetricField + ?Sized> MetricField for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn metric(&self, x: &[f64]) -> Result<RMat> {
        (**self).metric(x)
    }
    fn metric_derivative(&self, x: &[f64], k: usize, h: f64) -> Result<RMat> {
        (**self).metric_derivative(x, k, h)
    }
}

/// The metric of a Hamiltonian family, computed from exact diagonalization.
#[derive(Debug, Clone)]
pub struct HamiltonianMetric<M> {
    pub model: M,
    pub opts: SpectralOptions,
}

impl<M: HamiltonianModel> HamiltonianMetric<M> {
    pub fn new(model: M) -> Self {
        HamiltonianMetric { model, opts: SpectralOptions::default() }
    }

    pub fn with_options(model: M, opts: SpectralOptions) -> Self {
        HamiltonianMetric { model, opts }
    }
}

impl<M: HamiltonianModel> MetricField for HamiltonianMetric<M> {
    fn dim(&self) -> usize {
        self.model.param_dim()
    }
    fn metric(&self, x: &[f64]) -> Result<RMat> {
        metric::metric_tensor(&self.model, x, &self.opts)
    }
}

/// Analytic two-parameter metric of the Ising chain.
///
/// The chain Hamiltonian is homogeneous of degree one in `x`, so this metric is
/// degenerate along the radial direction; use [`IsingLineMetric`] for geodesics.
#[derive(Debug, Clone)]
pub struct IsingPlaneMetric(pub IsingChain);

impl MetricField for IsingPlaneMetric {
    fn dim(&self) -> usize {
        2
    }
    fn metric(&self, x: &[f64]) -> Result<RMat> {
        self.0.metric(x)
    }
}

/// Analytic metric of the Ising chain pulled back to a one-parameter slice.
#[derive(Debug, Clone)]
pub struct IsingLineMetric {
    pub chain: IsingChain,
    pub case: IsingCase,
}

impl MetricField for IsingLineMetric {
    fn dim(&self) -> usize {
        1
    }
    fn metric(&self, x: &[f64]) -> Result<RMat> {
        Ok(RMat::from_element(1, 1, self.chain.line_metric(self.case, x[0])?))
    }
}

/// A one-dimensional metric given by a closure `x -> g(x)`.
pub struct ScalarMetric {
    f: Box<dyn Fn(f64) -> Result<f64> + Send + Sync>,
}

impl ScalarMetric {
    pub fn new(f: impl Fn(f64) -> Result<f64> + Send + Sync + 'static) -> Self {
        ScalarMetric { f: Box::new(f) }
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        (self.f)(x)
    }
}

impl std::fmt::Debug for ScalarMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ScalarMetric")
    }
}

impl MetricField for ScalarMetric {
    fn dim(&self) -> usize {
        1
    }
    fn metric(&self, x: &[f64]) -> Result<RMat> {
        Ok(RMat::from_element(1, 1, (self.f)(x[0])?))
    }
}

/// Christoffel symbols of the second kind at one point.
#[derive(Debug, Clone)]
pub struct ChristoffelField {
    pub x: Vec<f64>,
    dim: usize,
    /// `gamma[i * M * M + j * M + k] = Gamma^i_jk`.
    gamma: Vec<f64>,
    pub inverse_metric: RMat,
}

impl ChristoffelField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[(i * self.dim + j) * self.dim + k]
    }

    /// `Gamma^i_jk v^j w^k`.
    pub fn contract(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let m = self.dim;
        (0..m)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..m {
                    for k in 0..m {
                        acc += self.get(i, j, k) * v[j] * w[k];
                    }
                }
                acc
            })
            .collect()
    }

    /// Largest `|Gamma^i_jk - Gamma^i_kj|`.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }
}

/// Condition number of a symmetric metric; infinite if it is not positive definite.
pub fn metric_condition(g: &RMat) -> f64 {
    let eig = nalgebra::SymmetricEigen::new((g + g.transpose()) * 0.5);
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    if lo <= 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `Gamma^i_jk = (1/2) g^il (d_k g_lj + d_j g_lk - d_l g_jk)` with metric derivatives
/// by central differences.
pub fn christoffel<F: MetricField + ?Sized>(field: &F, x: &[f64], fd_step: f64) -> Result<ChristoffelField> {
    let m = field.dim();
    if x.len() != m {
        return Err(Error::InvalidInput(format!("point has {} coordinates, metric expects {m}", x.len())));
    }
    let g = field.metric(x)?;
    let cond = metric_condition(&g);
    if cond > MAX_METRIC_CONDITION {
        return Err(Error::SingularMetric(cond));
    }
    let ginv = g.clone().try_inverse().ok_or(Error::SingularMetric(f64::INFINITY))?;
    let dg: Vec<RMat> = (0..m)
        .map(|k| field.metric_derivative(x, k, fd_step * x[k].abs().max(1.0)))
        .collect::<Result<_>>()?;
    let mut lowered = vec![0.0; m * m * m];
    for l in 0..m {
        for j in 0..m {
            for k in j..m {
                let v = 0.5 * (dg[k][(l, j)] + dg[j][(l, k)] - dg[l][(j, k)]);
                lowered[(l * m + j) * m + k] = v;
                lowered[(l * m + k) * m + j] = v;
            }
        }
    }
    let mut gamma = vec![0.0; m * m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                gamma[(i * m + j) * m + k] = (0..m).map(|l| ginv[(i, l)] * lowered[(l * m + j) * m + k]).sum();
            }
        }
    }
    Ok(ChristoffelField { x: x.to_vec(), dim: m, gamma, inverse_metric: ginv })
}

/// Boundary-value method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeodesicMethod {
    /// Shooting, with relaxation as a fallback.
    Auto,
    Shooting,
    Relaxation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeodesicOptions {
    /// Number of mesh intervals on which the path is reported.
    pub mesh: usize,
    /// Bound on the Euler-Lagrange residual (and on the endpoint mismatch).
    pub shooting_tol: f64,
    pub max_iter: usize,
    /// Relative step for finite differences of the metric.
    pub fd_step: f64,
    pub method: GeodesicMethod,
    /// Initial RK4 substeps per mesh interval (doubled as needed).
    pub substeps: usize,
    pub max_substeps: usize,
    pub execution: Execution,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            mesh: 128,
            shooting_tol: 1e-8,
            max_iter: 50,
            fd_step: 1e-5,
            method: GeodesicMethod::Auto,
            substeps: 4,
            max_substeps: 256,
            execution: Execution::Sequential,
        }
    }
}

/// A solved geodesic and its diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicSolution {
    pub path: Path,
    /// Largest `|x'' + Gamma x' x'|` over the mesh, from finite differences of the trajectory.
    pub residual: f64,
    /// Largest coordinate mismatch at `s = 1` before snapping to the endpoint.
    pub boundary_error: f64,
    pub method: GeodesicMethod,
    pub iterations: usize,
    /// `sqrt(g x' x')` at each knot.
    pub speed: Vec<f64>,
    pub length: f64,
    pub straight_length: f64,
}

impl GeodesicSolution {
    /// `max |speed - mean| / mean`.
    pub fn speed_variation(&self) -> f64 {
        relative_spread(&self.speed)
    }
}

fn relative_spread(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    if mean == 0.0 {
        return 0.0;
    }
    v.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max) / mean
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn gap_to_critical(err: Error, s: f64) -> Error {
    match err {
        Error::GapCollapse { gap, .. } => Error::CriticalPointOnPath { s, gap },
        other => other,
    }
}

fn acceleration<F: MetricField + ?Sized>(field: &F, x: &[f64], v: &[f64], fd_step: f64) -> Result<Vec<f64>> {
    Ok(christoffel(field, x, fd_step)?.contract(v, v).into_iter().map(|a| -a).collect())
}

fn axpy(x: &[f64], h: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + h * b).collect()
}

/// Integrate the geodesic equation with RK4 on `intervals * substeps` uniform steps,
/// returning `(x, v)` at every step.
fn integrate_trajectory<F: MetricField + ?Sized>(
    field: &F,
    x0: &[f64],
    v0: &[f64],
    steps: usize,
    fd_step: f64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let h = 1.0 / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    out.push((x.clone(), v.clone()));
    for n in 0..steps {
        let s = n as f64 * h;
        let acc = |x: &[f64], v: &[f64], s: f64| acceleration(field, x, v, fd_step).map_err(|e| gap_to_critical(e, s));
        let a1 = acc(&x, &v, s)?;
        let (x2, v2) = (axpy(&x, 0.5 * h, &v), axpy(&v, 0.5 * h, &a1));
        let a2 = acc(&x2, &v2, s + 0.5 * h)?;
        let (x3, v3) = (axpy(&x, 0.5 * h, &v2), axpy(&v, 0.5 * h, &a2));
        let a3 = acc(&x3, &v3, s + 0.5 * h)?;
        let (x4, v4) = (axpy(&x, h, &v3), axpy(&v, h, &a3));
        let a4 = acc(&x4, &v4, s + h)?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            v[i] += h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        }
        if x.iter().chain(&v).any(|z| !z.is_finite()) {
            return Err(Error::NumericalFailure(format!("geodesic integration blew up at s = {s:.4}")));
        }
        out.push((x.clone(), v.clone()));
    }
    Ok(out)
}

struct Shooter<'a, F: ?Sized> {
    field: &'a F,
    x0: &'a [f64],
    x1: &'a [f64],
    opts: &'a GeodesicOptions,
}

impl<F: MetricField + ?Sized> Shooter<'_, F> {
    fn miss(&self, v0: &[f64], substeps: usize) -> Result<Vec<f64>> {
        let traj = integrate_trajectory(self.field, self.x0, v0, self.opts.mesh * substeps, self.opts.fd_step)?;
        let end = &traj[traj.len() - 1].0;
        Ok(end.iter().zip(self.x1).map(|(a, b)| a - b).collect())
    }

    fn jacobian(&self, v0: &[f64], substeps: usize) -> Result<DMatrix<f64>> {
        let m = v0.len();
        let scale = v0.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
        let h = 1e-6 * scale;
        let cols: Vec<Result<Vec<f64>>> = sweep::map_indexed(self.opts.execution, m, |j| {
            let mut vp = v0.to_vec();
            let mut vm = v0.to_vec();
            vp[j] += h;
            vm[j] -= h;
            let fp = self.miss(&vp, substeps)?;
            let fm = self.miss(&vm, substeps)?;
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        });
        let mut jac = DMatrix::zeros(m, m);
        for (j, col) in cols.into_iter().enumerate() {
            let col = col?;
            for i in 0..m {
                jac[(i, j)] = col[i];
            }
        }
        Ok(jac)
    }

    /// Damped Newton on `v0`; returns the converged velocity and iteration count.
    fn newton(&self, mut v0: Vec<f64>, substeps: usize, target: f64) -> Result<(Vec<f64>, usize)> {
        let mut f = self.miss(&v0, substeps)?;
        let mut norm = f.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        for iter in 0..self.opts.max_iter {
            if norm <= target {
                return Ok((v0, iter));
            }
            let jac = self.jacobian(&v0, substeps)?;
            let rhs = DVector::from_iterator(f.len(), f.iter().map(|v| -v));
            let step = jac
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::NumericalFailure("singular shooting Jacobian".into()))?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let trial: Vec<f64> = v0.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
                if let Ok(ft) = self.miss(&trial, substeps) {
                    let nt = ft.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
                    if nt < norm {
                        v0 = trial;
                        f = ft;
                        norm = nt;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(Error::NoConvergence { iterations: iter + 1, residual: norm });
            }
        }
        if norm <= target {
            Ok((v0, self.opts.max_iter))
        } else {
            Err(Error::NoConvergence { iterations: self.opts.max_iter, residual: norm })
        }
    }

    /// Newton with step-doubling control of the integration error.
    fn solve(&self, v0: Vec<f64>) -> Result<(Vec<f64>, usize, usize)> {
        let target = (0.01 * self.opts.shooting_tol).min(1e-10);
        let mut substeps = self.opts.substeps.max(1);
        let mut guess = v0;
        let mut total = 0;
        loop {
            let (v, iters) = self.newton(guess, substeps, target)?;
            total += iters;
            let fine = self.miss(&v, 2 * substeps)?;
            let drift = fine.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            if drift <= target.max(1e-12) {
                return Ok((v, total, substeps));
            }
            if 2 * substeps > self.opts.max_substeps {
                return Err(Error::NoConvergence { iterations: total, residual: drift });
            }
            substeps *= 2;
            guess = v;
        }
    }
}

/// Discretized Euler-Lagrange equations on a uniform mesh, solved by Newton with a
/// banded finite-difference Jacobian.
fn relax<F: MetricField + ?Sized>(
    field: &F,
    x0: &[f64],
    x1: &[f64],
    opts: &GeodesicOptions,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let m = x0.len();
    let n = opts.mesh.max(4);
    let h = 1.0 / n as f64;
    let mut nodes: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            let t = k as f64 * h;
            x0.iter().zip(x1).map(|(a, b)| a + t * (b - a)).collect()
        })
        .collect();
    let residual = |nodes: &[Vec<f64>], k: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = (0..m).map(|i| (nodes[k + 1][i] - nodes[k - 1][i]) / (2.0 * h)).collect();
        let gam = christoffel(field, &nodes[k], opts.fd_step).map_err(|e| gap_to_critical(e, k as f64 * h))?;
        let c = gam.contract(&v, &v);
        Ok((0..m)
            .map(|i| (nodes[k + 1][i] - 2.0 * nodes[k][i] + nodes[k - 1][i]) / (h * h) + c[i])
            .collect())
    };
    let all_residuals = |nodes: &[Vec<f64>]| -> Result<Vec<f64>> {
        let parts: Vec<Result<Vec<f64>>> = sweep::map_indexed(opts.execution, n - 1, |j| residual(nodes, j + 1));
        let mut out = Vec::with_capacity((n - 1) * m);
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    };
    let unknowns = (n - 1) * m;
    let mut r = all_residuals(&nodes)?;
    let mut norm = r.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let scale = norm.max(1.0);
    let target = 1e-9 * scale;
    for iter in 0..opts.max_iter {
        if norm <= target {
            return Ok((nodes, iter));
        }
        let mut jac = DMatrix::<f64>::zeros(unknowns, unknowns);
        for color in 0..3 {
            for c in 0..m {
                let mut pert = nodes.clone();
                let mut any = false;
                for k in (1..n).filter(|k| k % 3 == color) {
                    let d = opts.fd_step * pert[k][c].abs().max(1.0);
                    pert[k][c] += d;
                    any = true;
                }
                if !any {
                    continue;
                }
                let rp = all_residuals(&pert)?;
                // residual at node k depends on nodes k-1, k, k+1; exactly one is perturbed
                for k in 1..n {
                    for owner in [k - 1, k, k + 1] {
                        if owner >= 1 && owner < n && owner % 3 == color {
                            let d = opts.fd_step * nodes[owner][c].abs().max(1.0);
                            for i in 0..m {
                                let row = (k - 1) * m + i;
                                let col = (owner - 1) * m + c;
                                jac[(row, col)] = (rp[row] - r[row]) / d;
                            }
                        }
                    }
                }
            }
        }
        let rhs = DVector::from_iterator(unknowns, r.iter().map(|v| -v));
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NumericalFailure("singular relaxation Jacobian".into()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let mut trial = nodes.clone();
            for k in 1..n {
                for c in 0..m {
                    trial[k][c] += lambda * step[(k - 1) * m + c];
                }
            }
            if let Ok(rt) = all_residuals(&trial) {
                let nt = rt.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
                if nt < norm {
                    nodes = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    // stalling at the finite-difference noise floor is fine: shooting polishes the result
    if norm <= 1e-6 * scale {
        Ok((nodes, opts.max_iter))
    } else {
        Err(Error::NoConvergence { iterations: opts.max_iter, residual: norm })
    }
}

/// `int_0^1 sqrt(g(x) x' x') ds` along any schedule.
pub fn path_length<F: MetricField + ?Sized, S: Schedule + ?Sized>(field: &F, path: &S, rel_tol: f64) -> Result<f64> {
    let mut failure = None;
    let value = quad::integrate(
        |s| match speed_at(field, &path.position(s), &path.velocity(s)) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        1.0,
        1e-14,
        rel_tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

fn speed_at<F: MetricField + ?Sized>(field: &F, x: &[f64], v: &[f64]) -> Result<f64> {
    let g = field.metric(x)?;
    let mut q = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            q += g[(i, j)] * v[i] * v[j];
        }
    }
    Ok(q.max(0.0).sqrt())
}

/// Length of a Hamiltonian path, `eps(1) / sqrt(2 g0)`.
pub fn hamiltonian_path_length<M: HamiltonianModel + ?Sized, S: Schedule + ?Sized>(
    model: &M,
    path: &S,
    opts: &SpectralOptions,
) -> Result<f64> {
    metric::hamiltonian_path_length(model, path, opts, &metric::PathQuadrature::default())
}

/// Largest `|x'' + Gamma x' x'|` on the mesh knots of a fine trajectory, with `x''`
/// from five-point differences of the velocity samples.
fn euler_lagrange_residual<F: MetricField + ?Sized>(
    field: &F,
    traj: &[(Vec<f64>, Vec<f64>)],
    stride: usize,
    fd_step: f64,
) -> Result<f64> {
    let steps = traj.len() - 1;
    let h = 1.0 / steps as f64;
    let m = traj[0].0.len();
    let mut worst: f64 = 0.0;
    for knot in (0..=steps).step_by(stride) {
        // five-point stencil, shifted at the ends
        let base = knot.clamp(2, steps - 2);
        let off = knot as isize - base as isize;
        let w: [f64; 5] = match off {
            0 => [1.0, -8.0, 0.0, 8.0, -1.0].map(|c| c / 12.0),
            -1 => [-3.0, -10.0, 18.0, -6.0, 1.0].map(|c| c / 12.0),
            -2 => [-25.0, 48.0, -36.0, 16.0, -3.0].map(|c| c / 12.0),
            1 => [-1.0, 6.0, -18.0, 10.0, 3.0].map(|c| c / 12.0),
            _ => [3.0, -16.0, 36.0, -48.0, 25.0].map(|c| c / 12.0),
        };
        let (x, v) = &traj[knot];
        let gam = christoffel(field, x, fd_step)?;
        let c = gam.contract(v, v);
        for i in 0..m {
            let acc: f64 = (0..5).map(|j| w[j] * traj[base + j - 2].1[i]).sum::<f64>() / h;
            worst = worst.max((acc + c[i]).abs());
        }
    }
    Ok(worst)
}

/// Solve the geodesic boundary-value problem from `x0` to `x1`.
pub fn solve_geodesic<F: MetricField + ?Sized>(
    field: &F,
    x0: &[f64],
    x1: &[f64],
    opts: &GeodesicOptions,
) -> Result<GeodesicSolution> {
    let m = field.dim();
    if x0.len() != m || x1.len() != m {
        return Err(Error::InvalidInput(format!("endpoints must have {m} coordinates")));
    }
    if opts.mesh < 4 {
        return Err(Error::InvalidInput("geodesic mesh needs at least 4 intervals".into()));
    }
    if x0.iter().chain(x1).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite endpoint".into()));
    }
    let straight: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| b - a).collect();
    // the straight line must be admissible
    for k in 0..=opts.mesh {
        let s = k as f64 / opts.mesh as f64;
        let x = axpy(x0, s, &straight);
        christoffel(field, &x, opts.fd_step).map_err(|e| gap_to_critical(e, s))?;
    }

    let shooter = Shooter { field, x0, x1, opts };
    let attempt_shooting = |v0: Vec<f64>| shooter.solve(v0);
    let (v0, iterations, substeps, method) = match opts.method {
        GeodesicMethod::Shooting => {
            let (v, it, sub) = attempt_shooting(straight.clone())?;
            (v, it, sub, GeodesicMethod::Shooting)
        }
        GeodesicMethod::Relaxation => {
            let (v, it, sub) = relax_then_polish(field, x0, x1, opts, &shooter)?;
            (v, it, sub, GeodesicMethod::Relaxation)
        }
        GeodesicMethod::Auto => match attempt_shooting(straight.clone()) {
            Ok((v, it, sub)) => (v, it, sub, GeodesicMethod::Shooting),
            Err(Error::CriticalPointOnPath { s, gap }) => return Err(Error::CriticalPointOnPath { s, gap }),
            Err(_) => {
                let (v, it, sub) = relax_then_polish(field, x0, x1, opts, &shooter)?;
                (v, it, sub, GeodesicMethod::Relaxation)
            }
        },
    };

    let steps = opts.mesh * substeps;
    let traj = integrate_trajectory(field, x0, &v0, steps, opts.fd_step)?;
    let boundary_error = sup_diff(&traj[steps].0, x1);
    // independent verification on a 4x finer trajectory keeps stencil error out of the residual
    let fine = integrate_trajectory(field, x0, &v0, 4 * steps, opts.fd_step)?;
    let residual = euler_lagrange_residual(field, &fine, 4 * substeps, opts.fd_step)?
        .max(sup_diff(&fine[4 * steps].0, x1));

    let mut s = Vec::with_capacity(opts.mesh + 1);
    let mut xs = Vec::with_capacity(opts.mesh + 1);
    let mut vs = Vec::with_capacity(opts.mesh + 1);
    let mut speed = Vec::with_capacity(opts.mesh + 1);
    for k in 0..=opts.mesh {
        let (x, v) = &traj[k * substeps];
        s.push(k as f64 / opts.mesh as f64);
        xs.push(x.clone());
        vs.push(v.clone());
        speed.push(speed_at(field, x, v)?);
    }
    xs[opts.mesh] = x1.to_vec();
    let path = Path::new(s, xs, vs)?;
    let length = speed.iter().sum::<f64>() / speed.len() as f64;
    let straight_schedule = crate::schedule::LinearSchedule::new(x0.to_vec(), x1.to_vec())?;
    let straight_length = path_length(field, &straight_schedule, 1e-10)?;
    Ok(GeodesicSolution {
        path,
        residual,
        boundary_error,
        method,
        iterations,
        speed,
        length,
        straight_length,
    })
}

fn relax_then_polish<F: MetricField + ?Sized>(
    field: &F,
    x0: &[f64],
    x1: &[f64],
    opts: &GeodesicOptions,
    shooter: &Shooter<'_, F>,
) -> Result<(Vec<f64>, usize, usize)> {
    let (nodes, iters) = relax(field, x0, x1, opts)?;
    let h = 1.0 / (nodes.len() - 1) as f64;
    let v0: Vec<f64> = (0..x0.len())
        .map(|i| (-3.0 * nodes[0][i] + 4.0 * nodes[1][i] - nodes[2][i]) / (2.0 * h))
        .collect();
    let (v, it, sub) = shooter.solve(v0)?;
    Ok((v, iters + it, sub))
}

/// Options for [`quadrature_geodesic_1d`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureGeodesicOptions {
    /// Interior points where the metric may have an integrable singularity.
    pub breakpoints: Vec<f64>,
    /// Number of uniform `s` intervals in the returned path.
    pub samples: usize,
    /// Relative tolerance of each arc-length integral.
    pub rel_tol: f64,
    /// Absolute tolerance of the inversion `s -> x`.
    pub xtol: f64,
    /// Uniform subdivisions of every segment between breakpoints.
    pub subdivisions: usize,
}

impl Default for QuadratureGeodesicOptions {
    fn default() -> Self {
        QuadratureGeodesicOptions { breakpoints: Vec::new(), samples: 400, rel_tol: 1e-10, xtol: 1e-12, subdivisions: 16 }
    }
}

/// One-dimensional geodesic by inversion of the normalized arc length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureGeodesic {
    pub path: Path,
    /// `int_x0^x1 sqrt(g) dx`.
    pub length: f64,
    /// Arc-length fraction at each breakpoint.
    pub breakpoint_s: Vec<f64>,
}

struct ArcLength<'a> {
    sqrt_metric: &'a (dyn Fn(f64) -> Result<f64> + Sync),
    nodes: Vec<f64>,
    /// Whether each node is an endpoint or breakpoint where the metric may blow up.
    singular: Vec<bool>,
    cumulative: Vec<f64>,
    rel_tol: f64,
    /// Absolute floor for partial integrals once the total length is known.
    abs_tol: f64,
}

impl ArcLength<'_> {
    /// `int_a^b sqrt(g)`. At a flagged end the substitution `x = end -+ w u^2`
    /// turns an inverse-square-root singularity into a smooth integrand.
    fn segment(&self, a: f64, b: f64, singular_a: bool, singular_b: bool) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        if singular_a && singular_b {
            let mid = 0.5 * (a + b);
            return Ok(self.segment(a, mid, true, false)? + self.segment(mid, b, false, true)?);
        }
        let w = b - a;
        let mut failure = None;
        let ends = [if singular_a { a } else { f64::NAN }, if singular_b { b } else { f64::NAN }];
        let mut eval = |x: f64, jac: f64| match (self.sqrt_metric)(x) {
            Ok(v) if v.is_finite() => v * jac,
            // a node that rounded onto the singular end itself carries no weight
            Ok(_) if ends.contains(&x) => 0.0,
            Ok(v) => {
                failure.get_or_insert(Error::NonIntegrableSingularity(format!("metric is {v} at x = {x}")));
                0.0
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let tol = (1e-14 * w.abs()).max(self.abs_tol);
        let value = if singular_a {
            quad::integrate(|u| eval(a + w * u * u, 2.0 * w * u), 0.0, 1.0, tol, self.rel_tol)
        } else if singular_b {
            quad::integrate(|u| eval(b - w * u * u, 2.0 * w * u), 0.0, 1.0, tol, self.rel_tol)
        } else {
            quad::integrate(|x| eval(x, 1.0), a, b, tol, self.rel_tol)
        };
        let value = value.map_err(|e| match e {
            Error::QuadratureNotConverged(err) => {
                Error::NonIntegrableSingularity(format!("arc length on [{a}, {b}] did not converge (error {err:.3e})"))
            }
            other => other,
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }

    fn at(&self, y: f64) -> Result<f64> {
        let j = match self.nodes.binary_search_by(|v| v.total_cmp(&y)) {
            Ok(j) => return Ok(self.cumulative[j]),
            Err(j) => j.clamp(1, self.nodes.len() - 1) - 1,
        };
        let (a, b) = (self.nodes[j], self.nodes[j + 1]);
        if self.singular[j + 1] && !self.singular[j] {
            Ok(self.cumulative[j + 1] - self.segment(y, b, false, true)?)
        } else {
            Ok(self.cumulative[j] + self.segment(a, y, self.singular[j], false)?)
        }
    }
}

/// Geodesic of a one-dimensional metric `g(x)` from `x0` to `x1`.
///
/// `s(x) = int_x0^x sqrt(g) / L` is tabulated on a node set containing every
/// breakpoint, then inverted with Brent's method; velocities follow from the
/// constant-speed condition `sqrt(g) x' = L`.
pub fn quadrature_geodesic_1d<G>(metric_fn: G, x0: f64, x1: f64, opts: &QuadratureGeodesicOptions) -> Result<QuadratureGeodesic>
where
    G: Fn(f64) -> Result<f64> + Sync,
{
    if !(x0.is_finite() && x1.is_finite()) || x0 == x1 {
        return Err(Error::InvalidInput("quadrature geodesic needs distinct finite endpoints".into()));
    }
    let span = (x1 - x0).abs();
    let dir = (x1 - x0).signum();
    let to_x = |y: f64| x0 + dir * y;
    let sqrt_metric = |y: f64| -> Result<f64> {
        let g = metric_fn(to_x(y))?;
        if g < 0.0 {
            return Err(Error::InvalidInput(format!("negative metric {g} at x = {}", to_x(y))));
        }
        Ok(g.sqrt())
    };

    let mut breaks: Vec<f64> = opts
        .breakpoints
        .iter()
        .map(|&b| (b - x0) * dir)
        .filter(|&y| y > 0.0 && y < span)
        .collect();
    breaks.sort_by(f64::total_cmp);
    let mut edges = vec![0.0];
    edges.extend(breaks.iter().copied());
    edges.push(span);
    let mut nodes = vec![0.0];
    let mut singular = vec![true];
    let sub = opts.subdivisions.max(1);
    for w in edges.windows(2) {
        for k in 1..=sub {
            nodes.push(w[0] + (w[1] - w[0]) * k as f64 / sub as f64);
            singular.push(k == sub);
        }
    }
    let mut arc = ArcLength { sqrt_metric: &sqrt_metric, nodes, singular, cumulative: vec![0.0], rel_tol: opts.rel_tol, abs_tol: 0.0 };
    for j in 0..arc.nodes.len() - 1 {
        let piece = arc.segment(arc.nodes[j], arc.nodes[j + 1], arc.singular[j], arc.singular[j + 1])?;
        let last = arc.cumulative[j];
        arc.cumulative.push(last + piece);
    }
    let length = arc.cumulative[arc.cumulative.len() - 1];
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::NonIntegrableSingularity(format!("arc length {length}")));
    }
    // near a singular point `g(x)` itself is only known to relative precision
    // eps/|x - x_c|, so partial integrals are resolved to the total length's accuracy
    arc.abs_tol = opts.rel_tol * length;

    let n = opts.samples.max(2);
    let mut s = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    let mut vs = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 / n as f64;
        let target = t * length;
        let y = if k == 0 {
            0.0
        } else if k == n {
            span
        } else {
            let j = arc.cumulative.partition_point(|&c| c < target).clamp(1, arc.nodes.len() - 1);
            let (a, b) = (arc.nodes[j - 1], arc.nodes[j]);
            let mut failure = None;
            let root = quad::brent(
                |y| match arc.at(y) {
                    Ok(v) => v - target,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                a,
                b,
                opts.xtol,
                200,
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            root
        };
        let root_metric = sqrt_metric(y).unwrap_or(f64::INFINITY);
        let speed = if root_metric.is_finite() && root_metric > 0.0 { length / root_metric } else { 0.0 };
        s.push(t);
        xs.push(vec![to_x(y)]);
        vs.push(vec![dir * speed]);
    }
    let breakpoint_s = breaks
        .iter()
        .map(|&y| arc.at(y).map(|c| c / length))
        .collect::<Result<_>>()?;
    Ok(QuadratureGeodesic { path: Path::new(s, xs, vs)?, length, breakpoint_s })
}

/// A one-dimensional geodesic through a critical point, spliced from two
/// boundary-value solves and the quadrature solution inside a window around `s_c`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplicedGeodesic {
    pub path: Path,
    pub s_c: f64,
    pub eta: f64,
    /// Sup-distance between each boundary-value half and the quadrature path.
    pub mismatch: [f64; 2],
    pub residual: [f64; 2],
}

/// Geodesic across a single critical point `x_c` of a one-dimensional metric.
///
/// The quadrature form is authoritative: it fixes `s_c` and the path inside
/// `[s_c - eta, s_c + eta]`; the two outer pieces are solved as boundary-value
/// problems between the quadrature values at the window edges.
pub fn solve_geodesic_spliced<G>(
    metric_fn: G,
    x0: f64,
    x1: f64,
    x_c: f64,
    eta: f64,
    opts: &GeodesicOptions,
) -> Result<SplicedGeodesic>
where
    G: Fn(f64) -> Result<f64> + Send + Sync + Clone + 'static,
{
    let qopts = QuadratureGeodesicOptions { breakpoints: vec![x_c], ..Default::default() };
    let quadrature = quadrature_geodesic_1d(metric_fn.clone(), x0, x1, &qopts)?;
    let s_c = *quadrature
        .breakpoint_s
        .first()
        .ok_or_else(|| Error::InvalidInput("critical point is not between the endpoints".into()))?;
    if !(eta > 0.0 && s_c - eta > 0.0 && s_c + eta < 1.0) {
        return Err(Error::InvalidInput(format!("splice window {eta} does not fit around s_c = {s_c}")));
    }
    let field = ScalarMetric::new(metric_fn);
    let qpath = &quadrature.path;
    let pieces = [(0.0, s_c - eta), (s_c + eta, 1.0)];
    let mut solved = Vec::with_capacity(2);
    for &(sa, sb) in &pieces {
        let xa = qpath.position(sa);
        let xb = qpath.position(sb);
        let sol = solve_geodesic(&field, &xa, &xb, opts)?;
        let mismatch = (0..=200)
            .map(|k| {
                let t = k as f64 / 200.0;
                (sol.path.position(t)[0] - qpath.position(sa + (sb - sa) * t)[0]).abs()
            })
            .fold(0.0, f64::max);
        solved.push((sa, sb, sol, mismatch));
    }

    let mut s = Vec::new();
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    let push = |s: &mut Vec<f64>, xs: &mut Vec<Vec<f64>>, vs: &mut Vec<Vec<f64>>, t: f64, x: Vec<f64>, v: Vec<f64>| {
        if s.last().is_none_or(|&last| t > last + 1e-14) {
            s.push(t);
            xs.push(x);
            vs.push(v);
        }
    };
    let (sa, sb, first, _) = &solved[0];
    for k in 0..first.path.len() {
        let t = sa + (sb - sa) * first.path.s[k];
        let v = first.path.xdot[k].iter().map(|d| d / (sb - sa)).collect();
        push(&mut s, &mut xs, &mut vs, t, first.path.x[k].clone(), v);
    }
    for k in 0..qpath.len() {
        let t = qpath.s[k];
        if t > s_c - eta && t < s_c + eta {
            push(&mut s, &mut xs, &mut vs, t, qpath.x[k].clone(), qpath.xdot[k].clone());
        }
    }
    let (sa, sb, second, _) = &solved[1];
    for k in 0..second.path.len() {
        let t = sa + (sb - sa) * second.path.s[k];
        let v = second.path.xdot[k].iter().map(|d| d / (sb - sa)).collect();
        push(&mut s, &mut xs, &mut vs, t, second.path.x[k].clone(), v);
    }
    let last = s.len() - 1;
    s[last] = 1.0;
    Ok(SplicedGeodesic {
        path: Path::new(s, xs, vs)?,
        s_c,
        eta,
        mismatch: [solved[0].3, solved[1].3],
        residual: [solved[0].2.residual, solved[1].2.residual],
    })
}

/// Smallest gap along the straight line between two control points, on `samples + 1` points.
pub fn min_gap_on_segment<M: HamiltonianModel + ?Sized>(
    model: &M,
    x0: &[f64],
    x1: &[f64],
    samples: usize,
    opts: &SpectralOptions,
) -> Result<(f64, f64)> {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=samples {
        let s = k as f64 / samples as f64;
        let x: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| a + s * (b - a)).collect();
        let gap = diagonalize(model, &x, opts)?.gap;
        if gap < best.0 {
            best = (gap, s);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{dj_metric, ising_geodesic_closed_form, projective_geodesic, DeutschJozsa, ModeSet, Oracle, Projective, ProjectiveLine};
    use crate::schedule::FnSchedule;

    #[test]
    fn flat_metric_gives_straight_line() {
        let field = ScalarMetric::new(|_| Ok(2.5));
        let sol = solve_geodesic(&field, &[0.0], &[1.0], &GeodesicOptions::default()).unwrap();
        for (s, x) in sol.path.s.iter().zip(&sol.path.x) {
            assert!((x[0] - s).abs() < 1e-12);
        }
        let q = quadrature_geodesic_1d(|_| Ok(2.5), 0.0, 1.0, &QuadratureGeodesicOptions::default()).unwrap();
        assert!(q.path.sup_distance(&sol.path, 100) < 1e-10);
        let g = christoffel(&field, &[0.3], 1e-5).unwrap();
        assert_eq!(g.get(0, 0, 0), 0.0);
    }

    #[test]
    fn dj_geodesic_is_linear() {
        let model = DeutschJozsa::new(Oracle::balanced(2, 1).unwrap(), 1.0).unwrap();
        assert!((dj_metric(&model, 0.3) - std::f64::consts::PI.powi(2) / 4.0).abs() < 1e-12);
        let field = HamiltonianMetric::new(model);
        let sol = solve_geodesic(&field, &[0.0], &[1.0], &GeodesicOptions::default()).unwrap();
        for (s, x) in sol.path.s.iter().zip(&sol.path.x) {
            assert!((x[0] - s).abs() < 1e-8);
        }
    }

    #[test]
    fn projective_bvp_and_quadrature_match_closed_form() {
        let p = Projective::new(4, 0.5, 0.0).unwrap();
        let field = HamiltonianMetric::new(ProjectiveLine(p.clone()));
        let opts = GeodesicOptions::default();
        let sol = solve_geodesic(&field, &[0.0], &[1.0], &opts).unwrap();
        let exact = FnSchedule::scalar(move |s| projective_geodesic(0.5, s), |_| 0.0);
        assert!(sol.path.sup_distance(&exact, 200) < 1e-6);
        assert!(sol.residual < opts.shooting_tol);
        assert!(sol.speed_variation() < 1e-4);
        assert!(sol.length <= sol.straight_length + 1e-9);
        let q = quadrature_geodesic_1d(move |x| Ok(p.line_metric(x)), 0.0, 1.0, &QuadratureGeodesicOptions::default()).unwrap();
        assert!(q.path.sup_distance(&exact, 200) < 1e-8);
    }

    #[test]
    fn ising_limit_quadrature_matches_closed_forms() {
        let opts = QuadratureGeodesicOptions { breakpoints: vec![0.5], ..Default::default() };
        let q = quadrature_geodesic_1d(|x| Ok(crate::models::p_limit(x)), 0.0, 1.0, &opts).unwrap();
        assert!((q.breakpoint_s[0] - 0.5).abs() < 1e-10);
        let exact = FnSchedule::scalar(|s| ising_geodesic_closed_form(IsingCase::I, s), |_| 0.0);
        assert!(q.path.sup_distance(&exact, 400) < 1e-8);
        let q2 = quadrature_geodesic_1d(|x| Ok(crate::models::q_limit(x)), 0.0, 1.0, &QuadratureGeodesicOptions::default()).unwrap();
        let exact2 = FnSchedule::scalar(|s| ising_geodesic_closed_form(IsingCase::II, s), |_| 0.0);
        assert!(q2.path.sup_distance(&exact2, 400) < 1e-8);
    }

    #[test]
    fn ising_christoffel_matches_analytic_derivative() {
        let chain = IsingChain::new(10, ModeSet::default()).unwrap();
        let field = IsingLineMetric { chain: chain.clone(), case: IsingCase::I };
        for &x in &[0.1, 0.3, 0.7] {
            let g = christoffel(&field, &[x], 1e-5).unwrap();
            let exact = chain.line_metric_derivative(IsingCase::I, x).unwrap() / (2.0 * chain.p(x).unwrap());
            assert!((g.get(0, 0, 0) - exact).abs() < 1e-6 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn relaxation_agrees_with_shooting() {
        let chain = IsingChain::new(4, ModeSet::default()).unwrap();
        let field = IsingLineMetric { chain, case: IsingCase::II };
        let shoot = solve_geodesic(&field, &[0.0], &[1.0], &GeodesicOptions { method: GeodesicMethod::Shooting, ..Default::default() }).unwrap();
        let relax = solve_geodesic(&field, &[0.0], &[1.0], &GeodesicOptions { method: GeodesicMethod::Relaxation, ..Default::default() }).unwrap();
        assert!(shoot.path.sup_distance(&relax.path, 100) < 1e-8);
    }

    #[test]
    fn radial_degeneracy_is_rejected() {
        let chain = IsingChain::new(3, ModeSet::default()).unwrap();
        let field = IsingPlaneMetric(chain);
        assert!(matches!(christoffel(&field, &[0.6, 0.4], 1e-5), Err(Error::SingularMetric(_))));
    }
}
