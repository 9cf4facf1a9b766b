//! Built-in Hamiltonian families and small generic wrappers.

mod custom;
mod dj;
mod ising;
mod projective;
mod random;

pub use custom::{AffineCoeff, AffineModel, AffineTerm, CustomModelDoc, CustomTermDoc};
pub use dj::{dj_metric, DeutschJozsa, Oracle};
pub use ising::{
    ising_geodesic_closed_form, p_limit, q_limit, IsingCase, IsingChain, IsingLine, IsingMatrix, ModeSet,
    MAX_FULL_MATRIX_M,
};
pub use projective::{projective_gap, projective_geodesic, Projective, ProjectiveLine};
pub use random::{DegenerateModel, RandomModel};

use nalgebra::DVector;

use crate::ham::{HamiltonianModel, ModelMetadata};
use crate::linalg::{cr, CMat};

/// Names accepted by the model registry.
pub const REGISTRY: &[(&str, &str)] = &[
    ("deutsch_jozsa", "unitary interpolation V(x) H0 V(x)^dagger with an n-qubit oracle (1 parameter)"),
    ("projective", "x1 P_a^perp + x2 P_b^perp with overlap |<a|b>| (2 parameters, or 1 on the line)"),
    ("ising", "periodic transverse-field Ising chain on 2m+1 sites (2 parameters, or 1 on a case slice)"),
    ("custom", "affine family loaded from a JSON document"),
];

/// `H(x) = H0` for every `x`.
#[derive(Debug, Clone)]
pub struct ConstantModel {
    h: CMat,
    params: usize,
}

impl ConstantModel {
    pub fn new(h: CMat, params: usize) -> Self {
        ConstantModel { h, params }
    }
}

impl HamiltonianModel for ConstantModel {
    fn metadata(&self) -> ModelMetadata {
        ModelMetadata::new("constant").with("dim", self.h.nrows())
    }
    fn dim(&self) -> usize {
        self.h.nrows()
    }
    fn param_dim(&self) -> usize {
        self.params
    }
    fn evaluate(&self, _x: &[f64]) -> CMat {
        self.h.clone()
    }
    fn partial(&self, _x: &[f64], _i: usize) -> CMat {
        CMat::zeros(self.h.nrows(), self.h.ncols())
    }
    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// `H(x) = sum_i x_i diag(d_i)`: commuting family with trivial eigenvectors.
#[derive(Debug, Clone)]
pub struct DiagonalModel {
    diagonals: Vec<Vec<f64>>,
}

impl DiagonalModel {
    pub fn new(diagonals: Vec<Vec<f64>>) -> Self {
        assert!(!diagonals.is_empty(), "need at least one diagonal");
        DiagonalModel { diagonals }
    }

    fn diag(&self, i: usize) -> CMat {
        let d = &self.diagonals[i];
        CMat::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|&v| cr(v))))
    }
}

impl HamiltonianModel for DiagonalModel {
    fn metadata(&self) -> ModelMetadata {
        ModelMetadata::new("diagonal")
    }
    fn dim(&self) -> usize {
        self.diagonals[0].len()
    }
    fn param_dim(&self) -> usize {
        self.diagonals.len()
    }
    fn evaluate(&self, x: &[f64]) -> CMat {
        let mut h = CMat::zeros(self.dim(), self.dim());
        for (i, &xi) in x.iter().enumerate() {
            h += self.diag(i) * cr(xi);
        }
        h
    }
    fn partial(&self, _x: &[f64], i: usize) -> CMat {
        self.diag(i)
    }
    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// `H(x) + c(x) I` with `c(x) = c0 + sum_i b_i x_i + sum_i a_i x_i^2`.
#[derive(Debug, Clone)]
pub struct ShiftedModel<M> {
    inner: M,
    constant: f64,
    linear: Vec<f64>,
    quadratic: Vec<f64>,
}

impl<M: HamiltonianModel> ShiftedModel<M> {
    pub fn new(inner: M, constant: f64, linear: Vec<f64>, quadratic: Vec<f64>) -> Self {
        assert_eq!(linear.len(), inner.param_dim());
        assert_eq!(quadratic.len(), inner.param_dim());
        ShiftedModel { inner, constant, linear, quadratic }
    }

    fn shift(&self, x: &[f64]) -> f64 {
        self.constant
            + x.iter()
                .zip(self.linear.iter().zip(&self.quadratic))
                .map(|(xi, (b, a))| b * xi + a * xi * xi)
                .sum::<f64>()
    }
}

impl<M: HamiltonianModel> HamiltonianModel for ShiftedModel<M> {
    fn metadata(&self) -> ModelMetadata {
        let mut meta = self.inner.metadata();
        meta.name = format!("{}+shift", meta.name);
        meta
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }
    fn evaluate(&self, x: &[f64]) -> CMat {
        let n = self.dim();
        self.inner.evaluate(x) + CMat::identity(n, n) * cr(self.shift(x))
    }
    fn partial(&self, x: &[f64], i: usize) -> CMat {
        let n = self.dim();
        let ds = self.linear[i] + 2.0 * self.quadratic[i] * x[i];
        self.inner.partial(x, i) + CMat::identity(n, n) * cr(ds)
    }
    fn has_analytic_partials(&self) -> bool {
        self.inner.has_analytic_partials()
    }
}
