//! Projective (Grover-type) Hamiltonian `H(x) = x1 P_a^perp + x2 P_b^perp`.
//!
//! Realized in the `{|a>, |a_1^perp>, ...}` basis, where `|b> = c|a> + e^{i phi} sqrt(1-c^2) |a_1^perp>`:
//! a 2x2 block plus `(x1 + x2)` on the remaining `N - 2` directions.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ham::{HamiltonianModel, ModelMetadata};
use crate::linalg::{cr, CMat};

#[derive(Debug, Clone, PartialEq)]
pub struct Projective {
    dim: usize,
    overlap: f64,
    phase: f64,
}

impl Projective {
    pub fn new(dim: usize, overlap: f64, phase: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidModel(format!("projective model needs N >= 2, got {dim}")));
        }
        if !(overlap > 0.0 && overlap < 1.0) {
            return Err(Error::InvalidModel(format!("overlap |<a|b>| must lie in (0,1), got {overlap}")));
        }
        if !phase.is_finite() {
            return Err(Error::InvalidModel("phase must be finite".into()));
        }
        Ok(Projective { dim, overlap, phase })
    }

    /// Grover search over `N` items: `|<a|b>| = 1/sqrt(N)`.
    pub fn grover(dim: usize) -> Result<Self> {
        Projective::new(dim, 1.0 / (dim as f64).sqrt(), 0.0)
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    fn alpha1(&self) -> Complex64 {
        Complex64::from_polar((1.0 - self.overlap * self.overlap).sqrt(), self.phase)
    }

    fn projector_perp_a(&self) -> CMat {
        let mut p = CMat::identity(self.dim, self.dim);
        p[(0, 0)] = cr(0.0);
        p
    }

    fn projector_perp_b(&self) -> CMat {
        let mut p = CMat::identity(self.dim, self.dim);
        let b = [cr(self.overlap), self.alpha1()];
        for i in 0..2 {
            for j in 0..2 {
                p[(i, j)] -= b[i] * b[j].conj();
            }
        }
        p
    }

    /// `Delta = sqrt(x1^2 + x2^2 + 2(2c^2 - 1) x1 x2)`.
    pub fn gap(&self, x: &[f64]) -> f64 {
        projective_gap(self.overlap, x[0], x[1])
    }

    /// Rotation angle `theta` with ground state `cos(theta)|a> + e^{i phi} sin(theta)|a_1^perp>`.
    pub fn theta(&self, x: &[f64]) -> f64 {
        let c = self.overlap;
        let s = (1.0 - c * c).sqrt();
        0.5 * (2.0 * x[1] * c * s).atan2(x[0] + x[1] * (2.0 * c * c - 1.0))
    }

    /// `(d theta/dx1, d theta/dx2)`.
    pub fn theta_gradient(&self, x: &[f64]) -> [f64; 2] {
        let c = self.overlap;
        let s = (1.0 - c * c).sqrt();
        let d2 = self.gap(x).powi(2);
        [-c * s * x[1] / d2, c * s * x[0] / d2]
    }

    /// Closed-form ground projector (padded rank-1 rotation of `|a>`).
    pub fn ground_projector(&self, x: &[f64]) -> CMat {
        let t = self.theta(x);
        let v = [cr(t.cos()), Complex64::from_polar(t.sin(), self.phase)];
        let mut p = CMat::zeros(self.dim, self.dim);
        for i in 0..2 {
            for j in 0..2 {
                p[(i, j)] = v[i] * v[j].conj();
            }
        }
        p
    }

    /// Metric of the one-parameter family `x = (1 - x, x)`: `c^2 (1 - c^2) / Delta^4`.
    pub fn line_metric(&self, x: f64) -> f64 {
        let c2 = self.overlap * self.overlap;
        c2 * (1.0 - c2) / self.gap(&[1.0 - x, x]).powi(4)
    }

    /// Closed-form geodesic of the one-parameter family.
    pub fn geodesic(&self, s: f64) -> f64 {
        projective_geodesic(self.overlap, s)
    }
}

pub fn projective_gap(overlap: f64, x1: f64, x2: f64) -> f64 {
    let r = x1 * x1 + x2 * x2 + 2.0 * (2.0 * overlap * overlap - 1.0) * x1 * x2;
    r.max(0.0).sqrt()
}

/// `x(s) = 1/2 - c/(2 sqrt(1-c^2)) tan[(1 - 2s) arccos c]`.
pub fn projective_geodesic(overlap: f64, s: f64) -> f64 {
    let c = overlap;
    0.5 - c / (2.0 * (1.0 - c * c).sqrt()) * ((1.0 - 2.0 * s) * c.acos()).tan()
}

impl HamiltonianModel for Projective {
    fn metadata(&self) -> ModelMetadata {
        ModelMetadata::new("projective")
            .with("dim", self.dim)
            .with("overlap", self.overlap)
            .with("phase", self.phase)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &[f64]) -> CMat {
        self.projector_perp_a() * cr(x[0]) + self.projector_perp_b() * cr(x[1])
    }

    fn partial(&self, _x: &[f64], i: usize) -> CMat {
        if i == 0 {
            self.projector_perp_a()
        } else {
            self.projector_perp_b()
        }
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// The one-parameter interpolation `x -> (1 - x, x)` of the projective model.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveLine(pub Projective);

impl HamiltonianModel for ProjectiveLine {
    fn metadata(&self) -> ModelMetadata {
        self.0.metadata().with("line", true)
    }
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn evaluate(&self, x: &[f64]) -> CMat {
        self.0.evaluate(&[1.0 - x[0], x[0]])
    }
    fn partial(&self, _x: &[f64], _i: usize) -> CMat {
        self.0.projector_perp_b() - self.0.projector_perp_a()
    }
    fn has_analytic_partials(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ham::{diagonalize, SpectralOptions};
    use crate::linalg;

    #[test]
    fn gap_examples() {
        let p = Projective::new(4, 0.5, 0.0).unwrap();
        assert!((p.gap(&[0.5, 0.5]) - 0.5).abs() < 1e-15);
        assert!((p.gap(&[1.0, 0.0]) - 1.0).abs() < 1e-15);
        let g = Projective::grover(16).unwrap();
        assert!((g.gap(&[0.5, 0.5]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn spectrum_matches_diagonalization() {
        let p = Projective::new(6, 0.3, 0.7).unwrap();
        let x = [0.4, 0.9];
        let spec = diagonalize(&p, &x, &SpectralOptions::default()).unwrap();
        assert!((spec.gap - p.gap(&x)).abs() < 1e-12);
        let emin = 0.5 * (x[0] + x[1] - p.gap(&x));
        assert!((spec.e0 - emin).abs() < 1e-12);
        assert!((spec.eigenvalues[5] - (x[0] + x[1])).abs() < 1e-12);
        assert!(linalg::max_abs_entry(&(spec.p0 - p.ground_projector(&x))) < 1e-12);
    }

    #[test]
    fn geodesic_spot_values() {
        assert!(projective_geodesic(0.3, 0.0).abs() < 1e-14);
        assert!((projective_geodesic(0.3, 1.0) - 1.0).abs() < 1e-14);
        assert!((projective_geodesic(0.3, 0.5) - 0.5).abs() < 1e-15);
        assert!((projective_geodesic(0.5, 0.25) - 1.0 / 3.0).abs() < 1e-14);
    }
}
