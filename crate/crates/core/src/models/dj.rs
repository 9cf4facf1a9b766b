//! Deutsch-Jozsa unitary-interpolation Hamiltonian `H(x) = V(x) H0 V(x)^dagger`.
//!
//! `V(x) = exp(i (pi/2) x G)` with the oracle phase `G|i> = (-1)^f(i) |i>` and
//! `H0 = h0 sum_k |->_k<-|`, whose ground state is `|+>^n`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ham::{HamiltonianModel, ModelMetadata};
use crate::linalg::{c, cr, CMat, I};

/// Oracle truth table, validated to be constant or balanced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Oracle {
    table: Vec<u8>,
}

impl Oracle {
    pub fn new(table: Vec<u8>) -> Result<Self> {
        let len = table.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidModel(format!("oracle table length {len} is not 2^n with n >= 1")));
        }
        if table.iter().any(|&b| b > 1) {
            return Err(Error::InvalidModel("oracle values must be 0 or 1".into()));
        }
        let ones: usize = table.iter().map(|&b| b as usize).sum();
        if ones != 0 && ones != len && ones != len / 2 {
            return Err(Error::InvalidModel(format!(
                "oracle is neither constant nor balanced ({ones} ones out of {len})"
            )));
        }
        Ok(Oracle { table })
    }

    pub fn constant(n: usize, value: u8) -> Result<Self> {
        Oracle::new(vec![value; 1 << n])
    }

    /// Balanced oracle: a seeded random half of the inputs map to 1.
    pub fn balanced(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("balanced oracle needs n >= 1".into()));
        }
        let len = 1usize << n;
        let mut table: Vec<u8> = (0..len).map(|i| u8::from(i >= len / 2)).collect();
        table.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Oracle::new(table)
    }

    /// Parse `constant:0`, `constant:1` or `balanced:<seed>`.
    pub fn parse(n: usize, spec: &str) -> Result<Self> {
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, "0"));
        match kind {
            "constant" => match arg {
                "0" => Oracle::constant(n, 0),
                "1" => Oracle::constant(n, 1),
                _ => Err(Error::InvalidInput(format!("constant oracle value must be 0 or 1, got {arg}"))),
            },
            "balanced" => {
                let seed = arg
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad oracle seed '{arg}'")))?;
                Oracle::balanced(n, seed)
            }
            _ => Err(Error::InvalidInput(format!("unknown oracle '{spec}' (use constant:<0|1> or balanced:<seed>)"))),
        }
    }

    pub fn n(&self) -> usize {
        self.table.len().trailing_zeros() as usize
    }

    pub fn table(&self) -> &[u8] {
        &self.table
    }

    pub fn is_balanced(&self) -> bool {
        let ones: usize = self.table.iter().map(|&b| b as usize).sum();
        ones * 2 == self.table.len()
    }

    /// `sum_i (-1)^f(i)`.
    pub fn signed_sum(&self) -> f64 {
        self.table.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).sum()
    }

    fn sign(&self, i: usize) -> f64 {
        if self.table[i] == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeutschJozsa {
    oracle: Oracle,
    h0: f64,
    base: CMat,
}

impl DeutschJozsa {
    pub fn new(oracle: Oracle, h0: f64) -> Result<Self> {
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(Error::InvalidModel(format!("energy scale h0 must be positive, got {h0}")));
        }
        let n = oracle.n();
        let base = initial_hamiltonian(n, h0);
        Ok(DeutschJozsa { oracle, h0, base })
    }

    pub fn oracle(&self) -> &Oracle {
        &self.oracle
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn qubits(&self) -> usize {
        self.oracle.n()
    }

    /// Diagonal of `V(x) = exp(i (pi/2) x G)`.
    fn phases(&self, x: f64) -> Vec<num_complex::Complex64> {
        (0..self.dim())
            .map(|i| num_complex::Complex64::from_polar(1.0, 0.5 * PI * x * self.oracle.sign(i)))
            .collect()
    }

    /// Closed-form ground projector.
    pub fn ground_projector(&self, x: f64) -> CMat {
        let d = self.dim();
        let ph = self.phases(x);
        CMat::from_fn(d, d, |i, j| ph[i] * ph[j].conj() / d as f64)
    }
}

/// `h0 sum_k |->_k<-|` on `n` qubits.
fn initial_hamiltonian(n: usize, h0: f64) -> CMat {
    let d = 1usize << n;
    let mut h = CMat::zeros(d, d);
    // |-><-| = (I - sigma_x)/2 on each qubit
    for k in 0..n {
        let bit = 1usize << k;
        for i in 0..d {
            h[(i, i)] += cr(0.5 * h0);
            h[(i, i ^ bit)] -= cr(0.5 * h0);
        }
    }
    h
}

/// `g = (pi^2/4) [1 - 4^-n (sum_i (-1)^f(i))^2]`, constant in `x`.
pub fn dj_metric(model: &DeutschJozsa, _x: f64) -> f64 {
    let d = model.dim() as f64;
    let s = model.oracle.signed_sum();
    0.25 * PI * PI * (1.0 - (s / d).powi(2))
}

impl HamiltonianModel for DeutschJozsa {
    fn metadata(&self) -> ModelMetadata {
        ModelMetadata::new("deutsch_jozsa")
            .with("n", self.qubits())
            .with("h0", self.h0)
            .with("balanced", self.oracle.is_balanced())
    }

    fn dim(&self) -> usize {
        1 << self.oracle.n()
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &[f64]) -> CMat {
        let ph = self.phases(x[0]);
        let d = self.dim();
        CMat::from_fn(d, d, |i, j| ph[i] * self.base[(i, j)] * ph[j].conj())
    }

    /// `dH/dx = i (pi/2) [G, H]`.
    fn partial(&self, x: &[f64], _i: usize) -> CMat {
        let h = self.evaluate(x);
        let d = self.dim();
        let k = I * c(0.5 * PI, 0.0);
        CMat::from_fn(d, d, |i, j| k * (self.oracle.sign(i) - self.oracle.sign(j)) * h[(i, j)])
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}
