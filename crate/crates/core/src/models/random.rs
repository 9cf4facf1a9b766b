//! Seeded random test families: generic affine models and a model with a
//! two-fold degenerate ground space that rotates along the control manifold.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ham::{HamiltonianModel, ModelMetadata};
use crate::linalg::{self, cr, CMat, I};

/// `H(x) = A_0 + sum_i x_i A_i` with independent random Hermitian `A_i`.
#[derive(Debug, Clone)]
pub struct RandomModel {
    seed: u64,
    base: CMat,
    directions: Vec<CMat>,
}

impl RandomModel {
    pub fn new(dim: usize, params: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = linalg::random_hermitian(&mut rng, dim, 1.0);
        let directions = (0..params).map(|_| linalg::random_hermitian(&mut rng, dim, 1.0)).collect();
        RandomModel { seed, base, directions }
    }
}

impl HamiltonianModel for RandomModel {
    fn metadata(&self) -> ModelMetadata {
        ModelMetadata::new("random").with("seed", self.seed).with("dim", self.base.nrows())
    }

    fn dim(&self) -> usize {
        self.base.nrows()
    }

    fn param_dim(&self) -> usize {
        self.directions.len()
    }

    fn evaluate(&self, x: &[f64]) -> CMat {
        let mut h = self.base.clone();
        for (a, &xi) in self.directions.iter().zip(x) {
            h += a * cr(xi);
        }
        h
    }

    fn partial(&self, _x: &[f64], i: usize) -> CMat {
        self.directions[i].clone()
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// `H(x) = U(x) D U(x)^dagger` with `U(x) = exp(-i sum_i x_i K_i)` and a fixed
/// spectrum `D` whose lowest level is doubly degenerate.
///
/// The ground space has `g0 = 2` and gap `1` everywhere while its orientation
/// changes non-trivially, which exercises the non-Abelian code paths.
#[derive(Debug, Clone)]
pub struct DegenerateModel {
    seed: u64,
    spectrum: Vec<f64>,
    generators: Vec<CMat>,
}

impl DegenerateModel {
    pub fn new(dim: usize, params: usize, seed: u64) -> Self {
        assert!(dim >= 3, "degenerate model needs dim >= 3");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let generators = (0..params).map(|_| linalg::random_hermitian(&mut rng, dim, 0.5)).collect();
        let mut spectrum = vec![0.0, 0.0];
        spectrum.extend((1..dim - 1).map(|k| k as f64));
        DegenerateModel { seed, spectrum, generators }
    }

    fn generator(&self, x: &[f64]) -> CMat {
        let n = self.spectrum.len();
        let mut k = CMat::zeros(n, n);
        for (g, &xi) in self.generators.iter().zip(x) {
            k += g * cr(xi);
        }
        k
    }

    fn rotation(&self, x: &[f64]) -> CMat {
        linalg::expm_i_hermitian(&self.generator(x), 1.0).expect("eigendecomposition of a small Hermitian matrix")
    }

    fn diag(&self) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(self.spectrum.len(), self.spectrum.iter().map(|&e| cr(e))))
    }

    /// Exact `dU/dx_i` via divided differences in the eigenbasis of the generator.
    fn rotation_derivative(&self, x: &[f64], i: usize) -> (CMat, CMat) {
        let (vals, vecs) = linalg::eigh(&self.generator(x)).expect("eigendecomposition of a small Hermitian matrix");
        let n = vals.len();
        let a: Vec<num_complex::Complex64> = vals.iter().map(|&k| -I * k).collect();
        let da = vecs.adjoint() * (&self.generators[i] * (-I)) * &vecs;
        let mut m = CMat::zeros(n, n);
        for p in 0..n {
            for q in 0..n {
                let diff = a[p] - a[q];
                let factor = if diff.norm() < 1e-12 {
                    a[p].exp()
                } else {
                    (a[p].exp() - a[q].exp()) / diff
                };
                m[(p, q)] = da[(p, q)] * factor;
            }
        }
        let mut u_diag = CMat::zeros(n, n);
        for p in 0..n {
            u_diag[(p, p)] = a[p].exp();
        }
        (&vecs * u_diag * vecs.adjoint(), &vecs * m * vecs.adjoint())
    }
}

impl HamiltonianModel for DegenerateModel {
    fn metadata(&self) -> ModelMetadata {
        ModelMetadata::new("degenerate").with("seed", self.seed).with("dim", self.spectrum.len())
    }

    fn dim(&self) -> usize {
        self.spectrum.len()
    }

    fn param_dim(&self) -> usize {
        self.generators.len()
    }

    fn evaluate(&self, x: &[f64]) -> CMat {
        let u = self.rotation(x);
        &u * self.diag() * u.adjoint()
    }

    fn partial(&self, x: &[f64], i: usize) -> CMat {
        let (u, du) = self.rotation_derivative(x, i);
        let d = self.diag();
        let a = &du * &d * u.adjoint();
        &a + a.adjoint()
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}
