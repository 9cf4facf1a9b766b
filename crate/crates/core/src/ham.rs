//! Parametrized Hamiltonian families, exact diagonalization and projector calculus.
//!
//! Every quantity that crosses a module boundary is expressed through the ground
//! projector `P0`, never through eigenvectors: eigenvector phases and the ordering
//! inside a degenerate cluster are arbitrary, while all geometric formulas are
//! invariant under those choices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat};

/// Default lower bound on the gap before resolvent-based operations refuse to run.
pub const DEFAULT_GAP_FLOOR: f64 = 1e-10;
/// Relative degeneracy tolerance, scaled by `max(1, ||H||)`.
pub const DEFAULT_DEGENERACY_REL_TOL: f64 = 1e-8;

/// A point on the control manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlPoint(Vec<f64>);

impl ControlPoint {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidInput("control point needs at least one coordinate".into()));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("control coordinate {i} is not finite")));
        }
        Ok(ControlPoint(x))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ControlPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for ControlPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Descriptive data attached to a model (name plus structural parameters).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl ModelMetadata {
    pub fn new(name: impl Into<String>) -> Self {
        ModelMetadata { name: name.into(), params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

/// A family `x -> H(x)` of Hermitian matrices on an `M`-dimensional control manifold.
///
/// Implementations must be pure: evaluation at a given point always returns the
/// same matrix, so models can be shared freely across worker threads.
pub trait HamiltonianModel: Send + Sync {
    fn metadata(&self) -> ModelMetadata;

    /// Hilbert-space dimension `N`.
    fn dim(&self) -> usize;

    /// Number of control parameters `M`.
    fn param_dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> CMat;

    /// `dH/dx_i`. Defaults to a central finite difference.
    fn partial(&self, x: &[f64], i: usize) -> CMat {
        central_difference(self, x, i, default_fd_step(x[i]))
    }

    /// Whether `partial` is exact rather than a finite difference.
    fn has_analytic_partials(&self) -> bool {
        false
    }

    fn name(&self) -> String {
        self.metadata().name
    }
}

impl<T: HamiltonianModel + ?Sized> HamiltonianModel for &T {
    fn metadata(&self) -> ModelMetadata {
        (**self).metadata()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn evaluate(&self, x: &[f64]) -> CMat {
        (**self).evaluate(x)
    }
    fn partial(&self, x: &[f64], i: usize) -> CMat {
        (**self).partial(x, i)
    }
    fn has_analytic_partials(&self) -> bool {
        (**self).has_analytic_partials()
    }
}

impl<T: HamiltonianModel + ?Sized> HamiltonianModel for Box<T> {
    fn metadata(&self) -> ModelMetadata {
        (**self).metadata()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn evaluate(&self, x: &[f64]) -> CMat {
        (**self).evaluate(x)
    }
    fn partial(&self, x: &[f64], i: usize) -> CMat {
        (**self).partial(x, i)
    }
    fn has_analytic_partials(&self) -> bool {
        (**self).has_analytic_partials()
    }
}

/// `1e-5 * max(1, |x_i|)`.
pub fn default_fd_step(xi: f64) -> f64 {
    1e-5 * xi.abs().max(1.0)
}

/// Central difference `(H(x + h e_i) - H(x - h e_i)) / 2h`.
pub fn central_difference<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], i: usize, h: f64) -> CMat {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (model.evaluate(&xp) - model.evaluate(&xm)) * cr(0.5 / h)
}

/// Tolerances used when splitting the spectrum into a ground cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralOptions {
    /// Absolute degeneracy tolerance; `None` means `1e-8 * max(1, ||H||)`.
    pub degeneracy_tol: Option<f64>,
    pub gap_floor: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { degeneracy_tol: None, gap_floor: DEFAULT_GAP_FLOOR }
    }
}

/// Eigen-decomposition at one control point, with the ground cluster split off.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub hamiltonian: CMat,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
    pub e0: f64,
    pub g0: usize,
    pub p0: CMat,
    /// `E_{g0} - E0`; infinite when the whole spectrum is one cluster.
    pub gap: f64,
}

impl SpectralData {
    pub fn from_matrix(h: CMat, opts: &SpectralOptions) -> Result<Self> {
        if !linalg::is_finite(&h) {
            return Err(Error::InvalidModel("Hamiltonian has non-finite entries".into()));
        }
        let n = h.nrows();
        if n == 0 || h.ncols() != n {
            return Err(Error::InvalidModel(format!("Hamiltonian must be square, got {}x{}", n, h.ncols())));
        }
        let (eigenvalues, eigenvectors) = linalg::eigh(&h)?;
        let scale = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = match opts.degeneracy_tol {
            Some(t) if t > 0.0 => t,
            Some(t) => return Err(Error::InvalidInput(format!("degeneracy_tol must be > 0, got {t}"))),
            None => DEFAULT_DEGENERACY_REL_TOL * scale.max(1.0),
        };
        let e0 = eigenvalues[0];
        let g0 = eigenvalues.iter().take_while(|&&e| e - e0 <= tol).count();
        let gap = if g0 < n { eigenvalues[g0] - e0 } else { f64::INFINITY };

        let ground = eigenvectors.columns(0, g0);
        let p0 = &ground * ground.adjoint();

        let spec = SpectralData { hamiltonian: h, eigenvalues, eigenvectors, e0, g0, p0, gap };
        let residual = spec.eigen_residual();
        if residual > 1e-9 * scale.max(1.0) {
            return Err(Error::NumericalFailure(format!("eigen residual {residual:.3e} too large")));
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `max_n ||H v_n - lambda_n v_n||`.
    pub fn eigen_residual(&self) -> f64 {
        let hv = &self.hamiltonian * &self.eigenvectors;
        let mut worst: f64 = 0.0;
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let r = hv.column(j) - self.eigenvectors.column(j) * cr(lambda);
            worst = worst.max(r.norm());
        }
        worst
    }

    /// `Q0 (H - E0)^-1 Q0` raised to `power` (1 or 2 in practice).
    pub fn reduced_resolvent_power(&self, power: i32, gap_floor: f64) -> Result<CMat> {
        if self.gap <= gap_floor {
            return Err(Error::GapCollapse { gap: self.gap, floor: gap_floor });
        }
        let n = self.dim();
        let mut r = CMat::zeros(n, n);
        for k in self.g0..n {
            let w = (self.eigenvalues[k] - self.e0).powi(-power);
            let v = self.eigenvectors.column(k);
            r += v * v.adjoint() * cr(w);
        }
        Ok(r)
    }

    pub fn reduced_resolvent(&self, gap_floor: f64) -> Result<CMat> {
        self.reduced_resolvent_power(1, gap_floor)
    }

    pub fn q0(&self) -> CMat {
        linalg::identity(self.dim()) - &self.p0
    }

    pub fn ground_frame(&self) -> CMat {
        self.eigenvectors.columns(0, self.g0).into_owned()
    }
}

/// Diagonalize `H(x)` and split off the ground cluster.
pub fn diagonalize<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], opts: &SpectralOptions) -> Result<SpectralData> {
    check_point(model, x)?;
    SpectralData::from_matrix(model.evaluate(x), opts)
}

pub(crate) fn check_point<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64]) -> Result<()> {
    if x.len() != model.param_dim() {
        return Err(Error::InvalidInput(format!(
            "model {} expects {} parameters, got {}",
            model.name(),
            model.param_dim(),
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("control point has non-finite entries".into()));
    }
    Ok(())
}

/// Spectral data at a point together with `dH/dx_i` and the reduced resolvent.
///
/// Everything downstream (projector derivatives, metrics, the adiabatic
/// Hamiltonian) is assembled from this bundle.
#[derive(Debug, Clone)]
pub struct LocalSpectrum {
    pub spectral: SpectralData,
    pub partials: Vec<CMat>,
    pub resolvent: CMat,
}

impl LocalSpectrum {
    pub fn new<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], opts: &SpectralOptions) -> Result<Self> {
        let spectral = diagonalize(model, x, opts)?;
        let resolvent = spectral.reduced_resolvent(opts.gap_floor)?;
        let partials = (0..model.param_dim()).map(|i| model.partial(x, i)).collect();
        Ok(LocalSpectrum { spectral, partials, resolvent })
    }

    pub fn p0(&self) -> &CMat {
        &self.spectral.p0
    }

    pub fn g0(&self) -> usize {
        self.spectral.g0
    }

    /// `dP0/dx_i = -(P0 dH R + R dH P0)`.
    pub fn projector_derivative(&self, i: usize) -> CMat {
        projector_derivative_from(&self.spectral.p0, &self.partials[i], &self.resolvent)
    }

    /// Directional derivative `sum_i v_i dH/dx_i`.
    pub fn hamiltonian_velocity(&self, velocity: &[f64]) -> CMat {
        let n = self.spectral.dim();
        let mut hdot = CMat::zeros(n, n);
        for (dh, &v) in self.partials.iter().zip(velocity) {
            if v != 0.0 {
                hdot += dh * cr(v);
            }
        }
        hdot
    }

    /// `dP0/ds` along `velocity`.
    pub fn projector_velocity(&self, velocity: &[f64]) -> CMat {
        let hdot = self.hamiltonian_velocity(velocity);
        projector_derivative_from(&self.spectral.p0, &hdot, &self.resolvent)
    }

    /// `dE0/dx_i = Tr[dH P0] / g0`.
    pub fn energy_derivative(&self, i: usize) -> f64 {
        linalg::re_trace_product(&self.partials[i], &self.spectral.p0) / self.spectral.g0 as f64
    }
}

fn projector_derivative_from(p0: &CMat, dh: &CMat, resolvent: &CMat) -> CMat {
    let a = p0 * dh * resolvent;
    let b = resolvent * dh * p0;
    -(a + b)
}

/// `Q0 [H - E0]^-1 Q0`.
pub fn reduced_resolvent(spec: &SpectralData, gap_floor: f64) -> Result<CMat> {
    spec.reduced_resolvent(gap_floor)
}

/// `dP0/dx_i` from the resolvent formula.
pub fn projector_derivative<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], i: usize, opts: &SpectralOptions) -> Result<CMat> {
    if i >= model.param_dim() {
        return Err(Error::InvalidInput(format!("parameter index {i} out of range")));
    }
    check_point(model, x)?;
    let spectral = diagonalize(model, x, opts)?;
    let r = spectral.reduced_resolvent(opts.gap_floor)?;
    Ok(projector_derivative_from(&spectral.p0, &model.partial(x, i), &r))
}

/// `dE0/dx_i = Tr[(dH/dx_i) P0] / g0`.
pub fn energy_derivative<M: HamiltonianModel + ?Sized>(model: &M, x: &[f64], i: usize, opts: &SpectralOptions) -> Result<f64> {
    if i >= model.param_dim() {
        return Err(Error::InvalidInput(format!("parameter index {i} out of range")));
    }
    let spectral = diagonalize(model, x, opts)?;
    let dh = model.partial(x, i);
    Ok(linalg::re_trace_product(&dh, &spectral.p0) / spectral.g0 as f64)
}

/// Both sides of `||[P0', P0]|| = sqrt(||P0 H' R^2 H' P0||)`, each computed independently.
pub fn commutator_norm_identity_check<M: HamiltonianModel + ?Sized>(
    model: &M,
    x: &[f64],
    velocity: &[f64],
    opts: &SpectralOptions,
) -> Result<(f64, f64)> {
    if velocity.len() != model.param_dim() {
        return Err(Error::InvalidInput("velocity dimension mismatch".into()));
    }
    let local = LocalSpectrum::new(model, x, opts)?;
    let pdot = local.projector_velocity(velocity);
    let lhs = linalg::op_norm(&linalg::commutator(&pdot, local.p0()));

    let hdot = local.hamiltonian_velocity(velocity);
    let r2 = local.spectral.reduced_resolvent_power(2, opts.gap_floor)?;
    let p = local.p0();
    let inner = p * &hdot * r2 * &hdot * p;
    let rhs = linalg::op_norm(&inner).sqrt();
    Ok((lhs, rhs))
}

/// Entrywise defect of `P0' = P0' P0 + P0 P0'`.
pub fn projector_product_defect(p0: &CMat, pdot: &CMat) -> f64 {
    linalg::max_abs_entry(&(pdot - (pdot * p0 + p0 * pdot)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ConstantModel, DiagonalModel, RandomModel};
    use nalgebra::DVector;

    fn diag(vals: &[f64]) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|&v| cr(v))))
    }

    #[test]
    fn diagonal_cluster_split() {
        let spec = SpectralData::from_matrix(diag(&[0.0, 0.0, 1.0]), &SpectralOptions {
            degeneracy_tol: Some(1e-8),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(spec.g0, 2);
        assert_eq!(spec.e0, 0.0);
        assert!((spec.gap - 1.0).abs() < 1e-14);
        let tr = spec.p0.trace().re;
        assert!((tr - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resolvent_of_diagonal_spectrum() {
        let spec = SpectralData::from_matrix(diag(&[0.0, 1.0, 2.0]), &SpectralOptions::default()).unwrap();
        let r = spec.reduced_resolvent(DEFAULT_GAP_FLOOR).unwrap();
        let expected = diag(&[0.0, 1.0, 0.5]);
        assert!(linalg::max_abs_entry(&(r - expected)) < 1e-14);
    }

    #[test]
    fn resolvent_rejects_collapsed_gap() {
        let spec = SpectralData::from_matrix(diag(&[0.0, 1e-12, 2.0]), &SpectralOptions {
            degeneracy_tol: Some(1e-14),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(spec.g0, 1);
        match spec.reduced_resolvent(DEFAULT_GAP_FLOOR) {
            Err(Error::GapCollapse { .. }) => {}
            other => panic!("expected GapCollapse, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_matrix_is_invalid_model() {
        let mut h = diag(&[0.0, 1.0]);
        h[(0, 1)] = cr(f64::NAN);
        assert!(matches!(
            SpectralData::from_matrix(h, &SpectralOptions::default()),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn resolvent_inverts_on_excited_space() {
        let model = RandomModel::new(6, 2, 42);
        let spec = diagonalize(&model, &[0.3, -0.2], &SpectralOptions::default()).unwrap();
        let r = spec.reduced_resolvent(DEFAULT_GAP_FLOOR).unwrap();
        let q = spec.q0();
        let shifted = &spec.hamiltonian - linalg::identity(6) * cr(spec.e0);
        // R (H - E0) Q0 = Q0
        assert!(linalg::max_abs_entry(&(&r * shifted * &q - &q)) < 1e-10);
        assert!(linalg::max_abs_entry(&(&r * &spec.p0)) < 1e-12);
        assert!(linalg::max_abs_entry(&(&spec.p0 * &r)) < 1e-12);
        assert!(linalg::op_norm(&r) <= 1.0 / spec.gap + 1e-12);
    }

    #[test]
    fn constant_family_has_zero_derivatives() {
        let model = ConstantModel::new(diag(&[0.0, 1.0, 3.0]), 2);
        let opts = SpectralOptions::default();
        let dp = projector_derivative(&model, &[0.1, 0.2], 0, &opts).unwrap();
        assert!(linalg::max_abs_entry(&dp) < 1e-14);
        assert_eq!(energy_derivative(&model, &[0.1, 0.2], 1, &opts).unwrap(), 0.0);
        let (l, r) = commutator_norm_identity_check(&model, &[0.1, 0.2], &[1.0, -1.0], &opts).unwrap();
        assert!(l.abs() < 1e-14 && r.abs() < 1e-14);
    }

    #[test]
    fn projector_derivative_is_offdiagonal() {
        let model = RandomModel::new(6, 2, 5);
        let opts = SpectralOptions::default();
        let local = LocalSpectrum::new(&model, &[0.2, 0.4], &opts).unwrap();
        for i in 0..2 {
            let dp = local.projector_derivative(i);
            assert!(linalg::hermitian_defect(&dp) < 1e-12);
            let ppp = local.p0() * &dp * local.p0();
            assert!(linalg::max_abs_entry(&ppp) < 1e-12);
            assert!(projector_product_defect(local.p0(), &dp) < 1e-9);
        }
    }

    #[test]
    fn diagonal_model_energy_derivative() {
        let model = DiagonalModel::new(vec![vec![0.0, 1.0, 2.0], vec![-1.0, 0.0, 0.0]]);
        let opts = SpectralOptions::default();
        // H = x0 diag(0,1,2) + x1 diag(-1,0,0): ground is level 0 with E0 = -x1.
        let d = energy_derivative(&model, &[1.0, 0.5], 1, &opts).unwrap();
        assert!((d + 1.0).abs() < 1e-14);
    }
}
