//! Critical scaling: exponent algebra, log-log power-law fits and the local
//! form of optimal schedules next to a quantum critical point.
//!
//! Near a critical point `x_c` the metric diverges as `|x - x_c|^(nu kappa)` with
//! `kappa = alpha_i + alpha_j - 2z - d`. A geodesic then obeys, locally,
//! `X'' + nu kappa X'^2 / (2X) = 0` for `X = x - x_c`, whose solution is the power
//! law `X = A (s - s_c)^chi` with `chi = 2/(2 + nu kappa)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ising_geodesic_closed_form, p_limit, IsingCase, IsingChain, ModeSet};

/// Minimum number of points for a power-law fit.
pub const MIN_FIT_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalExponents {
    /// Correlation-length exponent.
    pub nu: f64,
    /// Dynamical exponent.
    pub z: f64,
    /// Spatial dimension.
    pub d: f64,
    pub alpha_i: f64,
    pub alpha_j: f64,
}

impl CriticalExponents {
    pub fn new(nu: f64, z: f64, d: f64, alpha_i: f64, alpha_j: f64) -> Result<Self> {
        if !(nu > 0.0 && z > 0.0 && d >= 1.0) {
            return Err(Error::InvalidInput(format!("need nu > 0, z > 0, d >= 1 (got {nu}, {z}, {d})")));
        }
        if !(alpha_i.is_finite() && alpha_j.is_finite()) {
            return Err(Error::InvalidInput("scaling dimensions must be finite".into()));
        }
        Ok(CriticalExponents { nu, z, d, alpha_i, alpha_j })
    }

    /// Exponents with both operators at the hyperscaling dimension `alpha = d + z - 1/nu`.
    pub fn hyperscaling(nu: f64, z: f64, d: f64) -> Result<Self> {
        let alpha = d + z - 1.0 / nu;
        Self::new(nu, z, d, alpha, alpha)
    }

    /// The transverse-field Ising chain: `nu = z = d = 1`.
    pub fn ising() -> Self {
        Self::hyperscaling(1.0, 1.0, 1.0).expect("valid exponents")
    }

    /// `kappa = alpha_i + alpha_j - 2z - d`.
    pub fn kappa(&self) -> f64 {
        self.alpha_i + self.alpha_j - 2.0 * self.z - self.d
    }

    /// Metric divergence exponent `nu kappa`.
    pub fn nu_kappa(&self) -> f64 {
        self.nu * self.kappa()
    }

    /// Geodesic exponent `chi = 2/(2 + nu kappa)`.
    pub fn chi(&self) -> f64 {
        2.0 / (2.0 + self.nu_kappa())
    }

    /// `2/(d nu)`, equal to [`chi`](Self::chi) under hyperscaling.
    pub fn chi_from_dimension(&self) -> f64 {
        2.0 / (self.d * self.nu)
    }

    /// Size exponent of the critical metric, `g ~ L^(d - kappa)`.
    pub fn size_exponent(&self) -> f64 {
        self.d - self.kappa()
    }
}

/// Range of the independent variable kept by a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { lo: 1e-3, hi: 1e-1 }
    }
}

impl FitWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("fit window [{lo}, {hi}] must satisfy 0 < lo < hi")));
        }
        Ok(FitWindow { lo, hi })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    /// `n` log-spaced points spanning the window.
    pub fn log_grid(&self, n: usize) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..n).map(|k| (a + (b - a) * k as f64 / (n.max(2) - 1) as f64).exp()).collect()
    }
}

/// Least-squares fit of `y = prefactor * t^exponent` on log-log axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Standard error of the exponent.
    pub stderr: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Ordinary least squares on `(ln t, ln y)` for the samples with `t` inside `window`.
pub fn fit_power_law(samples: &[(f64, f64)], window: Option<FitWindow>) -> Result<PowerLawFit> {
    let mut pts = Vec::with_capacity(samples.len());
    for (idx, &(t, y)) in samples.iter().enumerate() {
        if let Some(w) = window {
            if !w.contains(t) {
                continue;
            }
        }
        if !(t > 0.0 && y > 0.0) || !t.is_finite() || !y.is_finite() {
            return Err(Error::NonPositiveData(idx));
        }
        pts.push((t.ln(), y.ln()));
    }
    let n = pts.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples { got: n, need: MIN_FIT_SAMPLES });
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidInput("fit needs at least two distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok(PowerLawFit { exponent: slope, prefactor: intercept.exp(), stderr, r_squared, samples: n })
}

/// Least-squares slope of `ln y` against `ln t` (at least two points, no window).
pub fn log_log_slope(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { got: samples.len(), need: 2 });
    }
    let mut pts = Vec::with_capacity(samples.len());
    for (idx, &(t, y)) in samples.iter().enumerate() {
        if !(t > 0.0 && y > 0.0) {
            return Err(Error::NonPositiveData(idx));
        }
        pts.push((t.ln(), y.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidInput("slope needs at least two distinct abscissae".into()));
    }
    Ok(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Fit result next to its theoretical value, as written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub quantity: String,
    pub window: FitWindow,
    pub samples: usize,
    pub exponent: f64,
    pub prefactor: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub theoretical: Option<f64>,
    pub deviation: Option<f64>,
}

impl FitReport {
    pub fn new(quantity: impl Into<String>, window: FitWindow, fit: &PowerLawFit, theoretical: Option<f64>) -> Self {
        FitReport {
            quantity: quantity.into(),
            window,
            samples: fit.samples,
            exponent: fit.exponent,
            prefactor: fit.prefactor,
            stderr: fit.stderr,
            r_squared: fit.r_squared,
            theoretical,
            deviation: theoretical.map(|t| (fit.exponent - t).abs()),
        }
    }
}

/// Which side of the critical point a local schedule describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `s < s_c`: `x = x_c - A (s_c - s)^chi`.
    Approach,
    /// `s > s_c`: `x = x_c + A (s - s_c)^chi`.
    Departure,
}

/// Local power-law geodesic `x(s) = x_c +- A |s - s_c|^chi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalGeodesic {
    pub x_c: f64,
    pub s_c: f64,
    pub amplitude: f64,
    pub chi: f64,
    pub nu_kappa: f64,
    pub side: Side,
}

/// Local optimal schedule through a critical point with the given exponents.
pub fn critical_geodesic_local(exponents: &CriticalExponents, x_c: f64, s_c: f64, amplitude: f64, side: Side) -> CriticalGeodesic {
    CriticalGeodesic { x_c, s_c, amplitude, chi: exponents.chi(), nu_kappa: exponents.nu_kappa(), side }
}

impl CriticalGeodesic {
    fn sign_and_distance(&self, s: f64) -> (f64, f64) {
        match self.side {
            Side::Approach => (-1.0, (self.s_c - s).max(0.0)),
            Side::Departure => (1.0, (s - self.s_c).max(0.0)),
        }
    }

    pub fn position(&self, s: f64) -> f64 {
        let (sign, d) = self.sign_and_distance(s);
        self.x_c + sign * self.amplitude * d.powf(self.chi)
    }

    /// `dx/ds`.
    pub fn velocity(&self, s: f64) -> f64 {
        let (_, d) = self.sign_and_distance(s);
        // both branches: d/ds of +-A d^chi with dd/ds = -+1 gives +A chi d^(chi-1)
        self.amplitude * self.chi * d.powf(self.chi - 1.0)
    }

    /// `d^2x/ds^2`.
    pub fn acceleration(&self, s: f64) -> f64 {
        let (sign, d) = self.sign_and_distance(s);
        sign * self.amplitude * self.chi * (self.chi - 1.0) * d.powf(self.chi - 2.0)
    }

    /// `X'' + nu kappa X'^2/(2X)` with `X = x - x_c`, from the closed-form derivatives.
    pub fn ode_residual(&self, s: f64) -> f64 {
        let big_x = self.position(s) - self.x_c;
        let v = self.velocity(s);
        self.acceleration(s) + self.nu_kappa * v * v / (2.0 * big_x)
    }

    /// Least-squares amplitude with the exponent held fixed, from `(s, x)` samples on this side.
    pub fn fit_amplitude(mut self, samples: &[(f64, f64)]) -> Result<Self> {
        let mut acc = 0.0;
        let mut n = 0usize;
        for (idx, &(s, x)) in samples.iter().enumerate() {
            let (_, d) = self.sign_and_distance(s);
            let dx = (x - self.x_c).abs();
            if d <= 0.0 || dx <= 0.0 {
                return Err(Error::NonPositiveData(idx));
            }
            acc += dx.ln() - self.chi * d.ln();
            n += 1;
        }
        if n == 0 {
            return Err(Error::InsufficientSamples { got: 0, need: 1 });
        }
        self.amplitude = (acc / n as f64).exp();
        Ok(self)
    }
}

/// `(|x - 1/2|, p(x))` for the thermodynamic-limit case (i) metric, approaching from below.
pub fn ising_metric_divergence_samples(window: FitWindow, n: usize) -> Vec<(f64, f64)> {
    window.log_grid(n).into_iter().map(|t| (t, p_limit(0.5 - t))).collect()
}

/// `(|s - 1/2|, |x(s) - 1/2|)` on the thermodynamic-limit case (i) geodesic.
pub fn ising_geodesic_exponent_samples(window: FitWindow, n: usize) -> Vec<(f64, f64)> {
    window
        .log_grid(n)
        .into_iter()
        .map(|t| (t, (ising_geodesic_closed_form(IsingCase::I, 0.5 - t) - 0.5).abs()))
        .collect()
}

/// `(L, g(x_c)/L)` for chains of `L = 2m + 1` sites on the case (i) line.
pub fn ising_critical_metric_per_site(ms: &[usize]) -> Result<Vec<(f64, f64)>> {
    ms.iter()
        .map(|&m| {
            let chain = IsingChain::new(m, ModeSet::EvenParity)?;
            let sites = (2 * m + 1) as f64;
            Ok((sites, chain.line_metric(IsingCase::I, 0.5)? / sites))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ising_exponents() {
        let e = CriticalExponents::ising();
        assert_eq!(e.kappa(), -1.0);
        assert_eq!(e.chi(), 2.0);
        assert_eq!(e.chi_from_dimension(), 2.0);
        let flat = CriticalExponents::new(1.0, 1.0, 1.0, 1.5, 1.5).unwrap();
        assert_eq!(flat.kappa(), 0.0);
        assert_eq!(flat.chi(), 1.0);
    }

    #[test]
    fn chi_identity_on_dyadic_grid() {
        // dyadic exponents keep every intermediate exactly representable
        for nu in [0.25, 0.5, 1.0, 2.0, 4.0] {
            for z in [0.5, 1.0, 2.0, 3.0] {
                for d in [1.0, 2.0, 3.0, 4.0] {
                    let e = CriticalExponents::hyperscaling(nu, z, d).unwrap();
                    assert_eq!(e.chi(), e.chi_from_dimension(), "nu={nu} z={z} d={d}");
                }
            }
        }
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..=20).map(|k| (k as f64 * 0.1, 3.0 * (k as f64 * 0.1).powi(2))).collect();
        let fit = fit_power_law(&pts, None).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-11);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_planted_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(f64, f64)> = FitWindow::default()
            .log_grid(60)
            .into_iter()
            .map(|t| (t, 0.7 * t.powf(1.5) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0))))
            .collect();
        let fit = fit_power_law(&pts, Some(FitWindow::default())).unwrap();
        assert!((fit.exponent - 1.5).abs() < 0.05);
    }

    #[test]
    fn fit_errors() {
        let few = [(0.01, 1.0), (0.02, 2.0)];
        assert!(matches!(fit_power_law(&few, None), Err(Error::InsufficientSamples { got: 2, .. })));
        let bad = [(0.01, 1.0), (0.02, -2.0), (0.03, 1.0), (0.04, 1.0), (0.05, 1.0)];
        assert!(matches!(fit_power_law(&bad, None), Err(Error::NonPositiveData(1))));
    }

    #[test]
    fn local_geodesic_solves_its_ode() {
        let e = CriticalExponents::ising();
        for side in [Side::Approach, Side::Departure] {
            let g = critical_geodesic_local(&e, 0.5, 0.5, 1.2, side);
            for k in 1..20 {
                let s = match side {
                    Side::Approach => 0.5 - 0.01 * k as f64,
                    Side::Departure => 0.5 + 0.01 * k as f64,
                };
                assert!(g.ode_residual(s).abs() < 1e-10);
            }
        }
        let odd = CriticalExponents::new(0.5, 1.0, 3.0, 2.0, 1.0).unwrap();
        let g = critical_geodesic_local(&odd, 0.0, 0.0, 0.3, Side::Departure);
        assert!(g.ode_residual(0.05).abs() < 1e-10 * g.acceleration(0.05).abs().max(1.0));
    }

    #[test]
    fn ising_geodesic_exponent_is_two() {
        let w = FitWindow::default();
        let fit = fit_power_law(&ising_geodesic_exponent_samples(w, 41), Some(w)).unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.02, "{}", fit.exponent);
    }
}
