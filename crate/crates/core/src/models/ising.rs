//! Periodic transverse-field Ising chain `H = -sum_l (x1 sigma_z^l + x2 sigma_x^l sigma_x^{l+1})`
//! on `2m + 1` sites.
//!
//! Two representations are provided: the dense `2^(2m+1)` matrix (small `m`) and the
//! free-fermion mode angles `theta_l`, from which energy, metric and the one-parameter
//! metrics `p(x)`, `q(x)` follow for any `m`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ham::{HamiltonianModel, ModelMetadata};
use crate::linalg::{cr, CMat, RMat};

/// Largest half-chain index for which the dense matrix is built.
pub const MAX_FULL_MATRIX_M: usize = 5;

const MODE_FLOOR: f64 = 1e-14;

/// Which momentum set labels the fermion pairs.
///
/// The ground state of the periodic odd-length chain lives in the even-parity sector,
/// whose momenta are `pi (2l - 1)/(2m + 1)`; this reproduces exact diagonalization.
/// `OddParity` uses `2 pi l/(2m + 1)`, which is convenient for comparing against
/// curves drawn with that labelling but does not describe the true ground state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSet {
    #[default]
    EvenParity,
    OddParity,
}

/// One-parameter slices of the two-dimensional control manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsingCase {
    /// `(1 - x, x)`, critical at `x = 1/2`.
    I,
    /// `(x, 1)`, critical at `x = 1`.
    II,
    /// `(1, x)`, critical at `x = 1`.
    III,
}

impl IsingCase {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(IsingCase::I),
            "ii" | "2" => Ok(IsingCase::II),
            "iii" | "3" => Ok(IsingCase::III),
            _ => Err(Error::InvalidInput(format!("unknown Ising case '{s}' (use i, ii or iii)"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            IsingCase::I => "i",
            IsingCase::II => "ii",
            IsingCase::III => "iii",
        }
    }

    pub fn point(self, x: f64) -> [f64; 2] {
        match self {
            IsingCase::I => [1.0 - x, x],
            IsingCase::II => [x, 1.0],
            IsingCase::III => [1.0, x],
        }
    }

    pub fn tangent(self) -> [f64; 2] {
        match self {
            IsingCase::I => [-1.0, 1.0],
            IsingCase::II => [1.0, 0.0],
            IsingCase::III => [0.0, 1.0],
        }
    }

    /// Critical value of the slice parameter in the thermodynamic limit.
    pub fn critical_point(self) -> f64 {
        match self {
            IsingCase::I => 0.5,
            IsingCase::II | IsingCase::III => 1.0,
        }
    }
}

/// Analytic description of the chain at half-length `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingChain {
    m: usize,
    modes: ModeSet,
    momenta: Vec<f64>,
}

impl IsingChain {
    pub fn new(m: usize, modes: ModeSet) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidModel("Ising chain needs m >= 1".into()));
        }
        let n = (2 * m + 1) as f64;
        let momenta = (1..=m)
            .map(|l| match modes {
                ModeSet::EvenParity => PI * (2 * l - 1) as f64 / n,
                ModeSet::OddParity => 2.0 * PI * l as f64 / n,
            })
            .collect();
        Ok(IsingChain { m, modes, momenta })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sites(&self) -> usize {
        2 * self.m + 1
    }

    pub fn modes(&self) -> ModeSet {
        self.modes
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    fn mode_denominator(k: f64, x: &[f64]) -> (f64, f64, f64) {
        let u = x[0] - x[1] * k.cos();
        let v = x[1] * k.sin();
        (u, v, (u * u + v * v).sqrt())
    }

    /// Mode angle `theta_l` (1-based `l`), branch fixed by the sign of `cos 2 theta_l`.
    pub fn theta(&self, l: usize, x: &[f64]) -> Result<f64> {
        if l == 0 || l > self.m {
            return Err(Error::InvalidInput(format!("mode index {l} outside 1..={}", self.m)));
        }
        let (u, v, d) = Self::mode_denominator(self.momenta[l - 1], x);
        if d < MODE_FLOOR {
            return Err(Error::DegenerateMode { mode: l, denominator: d });
        }
        Ok(0.5 * v.atan2(u))
    }

    /// Gradients `(d theta_l/dx1, d theta_l/dx2)` for every mode.
    pub fn theta_gradients(&self, x: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.momenta
            .iter()
            .enumerate()
            .map(|(idx, &k)| {
                let (_, _, d) = Self::mode_denominator(k, x);
                if d < MODE_FLOOR {
                    return Err(Error::DegenerateMode { mode: idx + 1, denominator: d });
                }
                let d2 = d * d;
                let s = k.sin();
                Ok([-0.5 * x[1] * s / d2, 0.5 * x[0] * s / d2])
            })
            .collect()
    }

    /// `g_ij = sum_l d_i theta_l d_j theta_l`.
    pub fn metric(&self, x: &[f64]) -> Result<RMat> {
        let mut g = RMat::zeros(2, 2);
        for grad in self.theta_gradients(x)? {
            for i in 0..2 {
                for j in 0..2 {
                    g[(i, j)] += grad[i] * grad[j];
                }
            }
        }
        Ok(g)
    }

    /// Lowest energy of the parity sector labelled by the mode set.
    pub fn ground_energy(&self, x: &[f64]) -> f64 {
        let paired: f64 = self
            .momenta
            .iter()
            .map(|&k| 2.0 * Self::mode_denominator(k, x).2)
            .sum();
        match self.modes {
            // the unpaired k = pi mode is occupied in the even sector
            ModeSet::EvenParity => -paired - (x[0] + x[1]),
            // the unpaired k = 0 mode is occupied in the odd sector
            ModeSet::OddParity => -paired + (x[0] - x[1]),
        }
    }

    /// Gap of the full chain: the smaller of the odd-sector ground energy and the
    /// lowest even-sector excitation (two quasiparticles, counting the unpaired `k = pi` mode).
    pub fn spectral_gap(&self, x: &[f64]) -> f64 {
        let even = IsingChain::new(self.m, ModeSet::EvenParity).expect("m >= 1");
        let odd = IsingChain::new(self.m, ModeSet::OddParity).expect("m >= 1");
        let mut quanta: Vec<f64> = even
            .momenta
            .iter()
            .flat_map(|&k| {
                let e = 2.0 * Self::mode_denominator(k, x).2;
                [e, e]
            })
            .collect();
        quanta.push(2.0 * (x[0] + x[1]).abs());
        quanta.sort_by(f64::total_cmp);
        let pair = quanta[0] + quanta[1];
        pair.min(odd.ground_energy(x) - even.ground_energy(x))
    }

    /// Case (i) metric `p(x) = (1/4) sum sin^2 k / [1 - 2(1 + cos k) x (1 - x)]^2`.
    pub fn p(&self, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (idx, &k) in self.momenta.iter().enumerate() {
            let den = 1.0 - 2.0 * (1.0 + k.cos()) * x * (1.0 - x);
            if den.abs() < MODE_FLOOR {
                return Err(Error::DegenerateMode { mode: idx + 1, denominator: den });
            }
            acc += k.sin().powi(2) / (den * den);
        }
        Ok(0.25 * acc)
    }

    /// Cases (ii)/(iii) metric `q(x) = (1/4) sum sin^2 k / (1 - 2 x cos k + x^2)^2`.
    pub fn q(&self, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (idx, &k) in self.momenta.iter().enumerate() {
            let den = 1.0 - 2.0 * x * k.cos() + x * x;
            if den.abs() < MODE_FLOOR {
                return Err(Error::DegenerateMode { mode: idx + 1, denominator: den });
            }
            acc += k.sin().powi(2) / (den * den);
        }
        Ok(0.25 * acc)
    }

    /// Pulled-back metric on a one-parameter slice.
    pub fn line_metric(&self, case: IsingCase, x: f64) -> Result<f64> {
        match case {
            IsingCase::I => self.p(x),
            IsingCase::II | IsingCase::III => self.q(x),
        }
    }

    /// `d p/dx` (case i) or `d q/dx` (cases ii/iii), analytic.
    pub fn line_metric_derivative(&self, case: IsingCase, x: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (idx, &k) in self.momenta.iter().enumerate() {
            let (den, dden) = match case {
                IsingCase::I => {
                    let a = 2.0 * (1.0 + k.cos());
                    (1.0 - a * x * (1.0 - x), -a * (1.0 - 2.0 * x))
                }
                IsingCase::II | IsingCase::III => (1.0 - 2.0 * x * k.cos() + x * x, -2.0 * k.cos() + 2.0 * x),
            };
            if den.abs() < MODE_FLOOR {
                return Err(Error::DegenerateMode { mode: idx + 1, denominator: den });
            }
            acc += -2.0 * k.sin().powi(2) * dden / den.powi(3);
        }
        Ok(0.25 * acc)
    }

    /// Factor relating the finite sum to its thermodynamic integral:
    /// `sum_l f(k_l) ~ (2m + 1)/(2 pi) int_0^pi f`, times the `1/4` of `p`, `q`.
    pub fn thermodynamic_scale(&self) -> f64 {
        0.25 * self.sites() as f64 / (2.0 * PI)
    }

    /// Dense Hamiltonian family (only for `m <= MAX_FULL_MATRIX_M`).
    pub fn matrix_model(&self) -> Result<IsingMatrix> {
        IsingMatrix::new(self.m)
    }
}

/// `int_0^pi sin^2 k/[1 - 2(1 + cos k) x(1 - x)]^2 dk`.
pub fn p_limit(x: f64) -> f64 {
    if x < 0.5 {
        PI / (2.0 * (1.0 - x).powi(2) * (1.0 - 2.0 * x))
    } else {
        PI / (2.0 * x * x * (2.0 * x - 1.0))
    }
}

/// `int_0^pi sin^2 k/(1 - 2x cos k + x^2)^2 dk` for `0 <= x < 1`.
pub fn q_limit(x: f64) -> f64 {
    PI / (2.0 * (1.0 - x * x))
}

/// Thermodynamic-limit geodesics.
pub fn ising_geodesic_closed_form(case: IsingCase, s: f64) -> f64 {
    match case {
        IsingCase::I => {
            let t = (0.25 * PI * (1.0 - 2.0 * s)).tan().powi(2);
            if s <= 0.5 {
                0.5 * (1.0 - t)
            } else {
                0.5 * (1.0 + t)
            }
        }
        IsingCase::II | IsingCase::III => (0.5 * PI * s).sin(),
    }
}

/// The dense chain Hamiltonian with analytic partials.
#[derive(Debug, Clone)]
pub struct IsingMatrix {
    m: usize,
    field: CMat,
    coupling: CMat,
}

impl IsingMatrix {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m > MAX_FULL_MATRIX_M {
            return Err(Error::InvalidModel(format!(
                "dense Ising chain supports 1 <= m <= {MAX_FULL_MATRIX_M}, got {m}"
            )));
        }
        let sites = 2 * m + 1;
        let d = 1usize << sites;
        let mut field = CMat::zeros(d, d);
        let mut coupling = CMat::zeros(d, d);
        for b in 0..d {
            let up = (b.count_ones() as i64, sites as i64);
            // -sum_j sigma_z^j: |0> has eigenvalue +1
            field[(b, b)] = cr(-((up.1 - 2 * up.0) as f64));
            for j in 0..sites {
                let flip = (1usize << j) | (1usize << ((j + 1) % sites));
                coupling[(b ^ flip, b)] -= cr(1.0);
            }
        }
        Ok(IsingMatrix { m, field, coupling })
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

impl HamiltonianModel for IsingMatrix {
    fn metadata(&self) -> ModelMetadata {
        ModelMetadata::new("ising").with("m", self.m)
    }

    fn dim(&self) -> usize {
        self.field.nrows()
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &[f64]) -> CMat {
        &self.field * cr(x[0]) + &self.coupling * cr(x[1])
    }

    fn partial(&self, _x: &[f64], i: usize) -> CMat {
        if i == 0 {
            self.field.clone()
        } else {
            self.coupling.clone()
        }
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// A one-parameter slice of the dense chain.
#[derive(Debug, Clone)]
pub struct IsingLine {
    pub chain: IsingMatrix,
    pub case: IsingCase,
}

impl HamiltonianModel for IsingLine {
    fn metadata(&self) -> ModelMetadata {
        self.chain.metadata().with("case", self.case.label())
    }
    fn dim(&self) -> usize {
        self.chain.dim()
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn evaluate(&self, x: &[f64]) -> CMat {
        self.chain.evaluate(&self.case.point(x[0]))
    }
    fn partial(&self, _x: &[f64], _i: usize) -> CMat {
        let t = self.case.tangent();
        &self.chain.field * cr(t[0]) + &self.chain.coupling * cr(t[1])
    }
    fn has_analytic_partials(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ham::{diagonalize, SpectralOptions};
    use crate::metric::metric_tensor;

    #[test]
    fn polarized_limit() {
        let chain = IsingChain::new(3, ModeSet::EvenParity).unwrap();
        for l in 1..=3 {
            assert_eq!(chain.theta(l, &[1.0, 0.0]).unwrap(), 0.0);
        }
        let m = IsingMatrix::new(1).unwrap();
        let spec = diagonalize(&m, &[1.0, 0.0], &SpectralOptions::default()).unwrap();
        assert!((spec.e0 + 3.0).abs() < 1e-12);
        assert_eq!(spec.g0, 1);
        assert!((spec.gap - 2.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_gap_matches_dense_spectrum() {
        let opts = SpectralOptions::default();
        for m in 1..=2 {
            let chain = IsingChain::new(m, ModeSet::EvenParity).unwrap();
            let dense = chain.matrix_model().unwrap();
            for x in [[0.7, 0.3], [0.3, 0.8], [0.05, 1.0], [0.5, 0.5], [1.0, 0.2]] {
                let spec = diagonalize(&dense, &x, &opts).unwrap();
                assert!((spec.gap - chain.spectral_gap(&x)).abs() < 1e-9, "m={m} x={x:?} {} {}", spec.gap, chain.spectral_gap(&x));
            }
        }
    }

    #[test]
    fn theta_at_pure_coupling() {
        let chain = IsingChain::new(1, ModeSet::EvenParity).unwrap();
        let t = chain.theta(1, &[0.0, 1.0]).unwrap();
        assert!((t - PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn mode_energy_matches_dense_spectrum() {
        let opts = SpectralOptions::default();
        for m in 1..=2 {
            let chain = IsingChain::new(m, ModeSet::EvenParity).unwrap();
            let dense = chain.matrix_model().unwrap();
            for x in [[0.7, 0.3], [0.3, 0.8], [0.05, 1.0], [0.5, 0.5]] {
                let spec = diagonalize(&dense, &x, &opts).unwrap();
                assert!((spec.e0 - chain.ground_energy(&x)).abs() < 1e-9, "m={m} x={x:?}");
            }
        }
    }

    #[test]
    fn mode_metric_matches_dense_metric() {
        let opts = SpectralOptions::default();
        let chain = IsingChain::new(2, ModeSet::EvenParity).unwrap();
        let dense = chain.matrix_model().unwrap();
        let x = [0.7, 0.3];
        let analytic = chain.metric(&x).unwrap();
        let generic = metric_tensor(&dense, &x, &opts).unwrap();
        assert!((&analytic - &generic).amax() < 1e-7);
        // frozen values from an independent exact-diagonalization oracle
        assert!((analytic[(0, 0)] - 0.17511459).abs() < 1e-7);
        assert!((analytic[(0, 1)] + 0.40860072).abs() < 1e-7);
        assert!((analytic[(1, 1)] - 0.95340167).abs() < 1e-7);
    }

    #[test]
    fn p_and_q_spot_values() {
        let chain = IsingChain::new(1, ModeSet::EvenParity).unwrap();
        assert!((chain.p(0.0).unwrap() - 3.0 / 16.0).abs() < 1e-15);
        assert!((chain.q(0.0).unwrap() - 3.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn case_i_restriction_is_p() {
        let chain = IsingChain::new(10, ModeSet::EvenParity).unwrap();
        let x = 0.3;
        let g = chain.metric(&IsingCase::I.point(x)).unwrap();
        let t = IsingCase::I.tangent();
        let pulled = t[0] * t[0] * g[(0, 0)] + 2.0 * t[0] * t[1] * g[(0, 1)] + t[1] * t[1] * g[(1, 1)];
        assert!((pulled - chain.p(x).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn slice_derivative_matches_difference() {
        let chain = IsingChain::new(4, ModeSet::EvenParity).unwrap();
        for case in [IsingCase::I, IsingCase::II] {
            let h = 1e-6;
            let x = 0.3;
            let fd = (chain.line_metric(case, x + h).unwrap() - chain.line_metric(case, x - h).unwrap()) / (2.0 * h);
            let exact = chain.line_metric_derivative(case, x).unwrap();
            assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn closed_forms() {
        assert!((ising_geodesic_closed_form(IsingCase::I, 0.25) - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((ising_geodesic_closed_form(IsingCase::I, 0.5) - 0.5).abs() < 1e-15);
        assert!((ising_geodesic_closed_form(IsingCase::II, 1.0 / 3.0) - 0.5).abs() < 1e-15);
        assert!(ising_geodesic_closed_form(IsingCase::I, 0.0).abs() < 1e-15);
        assert!((ising_geodesic_closed_form(IsingCase::I, 1.0) - 1.0).abs() < 1e-15);
    }
}
