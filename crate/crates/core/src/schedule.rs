//! Control schedules `s -> x(s)` on `[0, 1]`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A smooth path through control space, parametrized by `s in [0, 1]`.
pub trait Schedule: Send + Sync {
    fn param_dim(&self) -> usize;
    fn position(&self, s: f64) -> Vec<f64>;
    fn velocity(&self, s: f64) -> Vec<f64>;
}

impl<T: Schedule + ?Sized> Schedule for &T {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn position(&self, s: f64) -> Vec<f64> {
        (**self).position(s)
    }
    fn velocity(&self, s: f64) -> Vec<f64> {
        (**self).velocity(s)
    }
}

impl<T: Schedule + ?Sized> Schedule for Box<T> {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn position(&self, s: f64) -> Vec<f64> {
        (**self).position(s)
    }
    fn velocity(&self, s: f64) -> Vec<f64> {
        (**self).velocity(s)
    }
}

/// Straight line `x0 + s (x1 - x0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
}

impl LinearSchedule {
    pub fn new(x0: Vec<f64>, x1: Vec<f64>) -> Result<Self> {
        if x0.len() != x1.len() || x0.is_empty() {
            return Err(Error::InvalidInput("endpoints must have equal, nonzero dimension".into()));
        }
        Ok(LinearSchedule { x0, x1 })
    }
}

impl Schedule for LinearSchedule {
    fn param_dim(&self) -> usize {
        self.x0.len()
    }
    fn position(&self, s: f64) -> Vec<f64> {
        self.x0.iter().zip(&self.x1).map(|(a, b)| a + s * (b - a)).collect()
    }
    fn velocity(&self, _s: f64) -> Vec<f64> {
        self.x0.iter().zip(&self.x1).map(|(a, b)| b - a).collect()
    }
}

type CurveFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// Schedule from closures; the velocity defaults to a central difference of the position.
#[derive(Clone)]
pub struct FnSchedule {
    dim: usize,
    position: Arc<CurveFn>,
    velocity: Option<Arc<CurveFn>>,
}

impl FnSchedule {
    pub fn new(dim: usize, position: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        FnSchedule { dim, position: Arc::new(position), velocity: None }
    }

    pub fn with_velocity(mut self, velocity: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.velocity = Some(Arc::new(velocity));
        self
    }

    /// One-parameter schedule from a scalar function and its derivative.
    pub fn scalar(
        x: impl Fn(f64) -> f64 + Send + Sync + 'static,
        xdot: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnSchedule::new(1, move |s| vec![x(s)]).with_velocity(move |s| vec![xdot(s)])
    }
}

impl std::fmt::Debug for FnSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnSchedule").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl Schedule for FnSchedule {
    fn param_dim(&self) -> usize {
        self.dim
    }
    fn position(&self, s: f64) -> Vec<f64> {
        (self.position)(s)
    }
    fn velocity(&self, s: f64) -> Vec<f64> {
        match &self.velocity {
            Some(v) => v(s),
            None => {
                let h = 1e-6;
                let (a, b) = ((s - h).max(0.0), (s + h).min(1.0));
                let xa = (self.position)(a);
                let xb = (self.position)(b);
                xa.iter().zip(&xb).map(|(p, q)| (q - p) / (b - a)).collect()
            }
        }
    }
}

/// `base(s) + sum_j a_j sin(j pi s)` per component: endpoint-preserving and smooth.
#[derive(Debug, Clone)]
pub struct PerturbedSchedule<S> {
    pub base: S,
    /// `amplitudes[c][j-1]` multiplies `sin(j pi s)` in component `c`.
    pub amplitudes: Vec<Vec<f64>>,
}

impl<S: Schedule> PerturbedSchedule<S> {
    pub fn new(base: S, amplitudes: Vec<Vec<f64>>) -> Result<Self> {
        if amplitudes.len() != base.param_dim() {
            return Err(Error::InvalidInput("one amplitude list per component required".into()));
        }
        Ok(PerturbedSchedule { base, amplitudes })
    }

    /// Random perturbation with `modes` sine modes per component; the largest
    /// amplitude magnitude is drawn from `[min_amp, max_amp]`.
    pub fn random<R: rand::Rng + ?Sized>(base: S, modes: usize, min_amp: f64, max_amp: f64, rng: &mut R) -> Self {
        let dim = base.param_dim();
        let mut amplitudes: Vec<Vec<f64>> =
            (0..dim).map(|_| (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let peak = amplitudes.iter().flatten().fold(0.0_f64, |m, a| m.max(a.abs())).max(1e-300);
        let target = rng.gen_range(min_amp..=max_amp);
        for a in amplitudes.iter_mut().flatten() {
            *a *= target / peak;
        }
        PerturbedSchedule { base, amplitudes }
    }
}

impl<S: Schedule> Schedule for PerturbedSchedule<S> {
    fn param_dim(&self) -> usize {
        self.base.param_dim()
    }
    fn position(&self, s: f64) -> Vec<f64> {
        let mut x = self.base.position(s);
        for (xc, amps) in x.iter_mut().zip(&self.amplitudes) {
            for (j, a) in amps.iter().enumerate() {
                *xc += a * ((j + 1) as f64 * PI * s).sin();
            }
        }
        x
    }
    fn velocity(&self, s: f64) -> Vec<f64> {
        let mut v = self.base.velocity(s);
        for (vc, amps) in v.iter_mut().zip(&self.amplitudes) {
            for (j, a) in amps.iter().enumerate() {
                let w = (j + 1) as f64 * PI;
                *vc += a * w * (w * s).cos();
            }
        }
        v
    }
}

/// Monotone reparametrization `s -> base(phi(s))` with `phi(0)=0`, `phi(1)=1`.
#[derive(Clone)]
pub struct Reparametrized<S> {
    pub base: S,
    phi: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
}

impl<S: Schedule> Reparametrized<S> {
    /// `phi` returns `(phi(s), phi'(s))`.
    pub fn new(base: S, phi: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        Reparametrized { base, phi: Arc::new(phi) }
    }
}

impl<S: Schedule> Schedule for Reparametrized<S> {
    fn param_dim(&self) -> usize {
        self.base.param_dim()
    }
    fn position(&self, s: f64) -> Vec<f64> {
        self.base.position((self.phi)(s).0)
    }
    fn velocity(&self, s: f64) -> Vec<f64> {
        let (t, dt) = (self.phi)(s);
        self.base.velocity(t).into_iter().map(|v| v * dt).collect()
    }
}

/// Discretized path: knots `(s_k, x(s_k), x'(s_k))`, cubic Hermite in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub s: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xdot: Vec<Vec<f64>>,
}

impl Path {
    pub fn new(s: Vec<f64>, x: Vec<Vec<f64>>, xdot: Vec<Vec<f64>>) -> Result<Self> {
        if s.len() < 2 || s.len() != x.len() || s.len() != xdot.len() {
            return Err(Error::InvalidInput("path needs >= 2 knots with matching positions and velocities".into()));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("path knots must be strictly increasing".into()));
        }
        if (s[0]).abs() > 1e-12 || (s[s.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("path must span s in [0, 1]".into()));
        }
        let m = x[0].len();
        if m == 0 || x.iter().chain(&xdot).any(|v| v.len() != m) {
            return Err(Error::InvalidInput("inconsistent path dimension".into()));
        }
        Ok(Path { s, x, xdot })
    }

    /// Sample a schedule on a uniform grid with `intervals + 1` knots.
    pub fn sample<S: Schedule + ?Sized>(schedule: &S, intervals: usize) -> Self {
        let n = intervals.max(1);
        let s: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let x = s.iter().map(|&t| schedule.position(t)).collect();
        let xdot = s.iter().map(|&t| schedule.velocity(t)).collect();
        Path { s, x, xdot }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn start(&self) -> &[f64] {
        &self.x[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.x[self.x.len() - 1]
    }

    fn locate(&self, s: f64) -> usize {
        let s = s.clamp(0.0, 1.0);
        match self.s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(self.s.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.s.len() - 2),
        }
    }

    fn hermite(&self, s: f64, derivative: bool) -> Vec<f64> {
        let k = self.locate(s);
        let (s0, s1) = (self.s[k], self.s[k + 1]);
        let h = s1 - s0;
        let t = ((s.clamp(0.0, 1.0)) - s0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let (h00, h10, h01, h11) = if derivative {
            (
                (6.0 * t2 - 6.0 * t) / h,
                3.0 * t2 - 4.0 * t + 1.0,
                (-6.0 * t2 + 6.0 * t) / h,
                3.0 * t2 - 2.0 * t,
            )
        } else {
            (
                2.0 * t3 - 3.0 * t2 + 1.0,
                (t3 - 2.0 * t2 + t) * h,
                -2.0 * t3 + 3.0 * t2,
                (t3 - t2) * h,
            )
        };
        (0..self.x[k].len())
            .map(|c| h00 * self.x[k][c] + h10 * self.xdot[k][c] + h01 * self.x[k + 1][c] + h11 * self.xdot[k + 1][c])
            .collect()
    }

    /// Largest distance (sup over knots of `other`'s sampling) to another schedule.
    pub fn sup_distance<S: Schedule + ?Sized>(&self, other: &S, samples: usize) -> f64 {
        (0..=samples)
            .map(|k| {
                let s = k as f64 / samples as f64;
                let a = self.position(s);
                let b = other.position(s);
                a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

impl Schedule for Path {
    fn param_dim(&self) -> usize {
        self.x[0].len()
    }
    fn position(&self, s: f64) -> Vec<f64> {
        self.hermite(s, false)
    }
    fn velocity(&self, s: f64) -> Vec<f64> {
        self.hermite(s, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hermite_reproduces_cubics() {
        let f = FnSchedule::scalar(|s| s * s * s - s, |s| 3.0 * s * s - 1.0);
        let p = Path::sample(&f, 4);
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            assert!((p.position(s)[0] - f.position(s)[0]).abs() < 1e-14);
            assert!((p.velocity(s)[0] - f.velocity(s)[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn perturbation_preserves_endpoints() {
        let base = LinearSchedule::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PerturbedSchedule::random(base, 3, 0.01, 0.05, &mut rng);
        assert!(p.position(0.0).iter().zip([0.0, 1.0]).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(p.position(1.0).iter().zip([1.0, 0.0]).all(|(a, b)| (a - b).abs() < 1e-14));
        let peak = p.amplitudes.iter().flatten().fold(0.0_f64, |m, a| m.max(a.abs()));
        assert!((0.01..=0.05).contains(&peak));
    }

    #[test]
    fn path_validation() {
        assert!(Path::new(vec![0.0, 0.5], vec![vec![0.0]; 2], vec![vec![0.0]; 2]).is_err());
        assert!(Path::new(vec![0.0, 1.0, 1.0], vec![vec![0.0]; 3], vec![vec![0.0]; 3]).is_err());
        assert!(Path::new(vec![0.0, 1.0], vec![vec![0.0]; 2], vec![vec![0.0]; 2]).is_ok());
    }
}
