//! One-dimensional quadrature and root finding.
//!
//! Adaptive Gauss-Kronrod (7/15) for smooth integrands, tanh-sinh for
//! integrands with integrable endpoint singularities, and Brent's method.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel for a vector-valued integrand; returns (value, error) per component.
fn gk15_vec<F: FnMut(f64) -> Vec<f64>>(f: &mut F, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let n = fc.len();
    let mut kron: Vec<f64> = fc.iter().map(|v| v * WGK[7]).collect();
    let mut gauss: Vec<f64> = fc.iter().map(|v| v * WG[3]).collect();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for k in 0..n {
            let s = f1[k] + f2[k];
            kron[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let val: Vec<f64> = kron.iter().map(|v| v * h).collect();
    let err: Vec<f64> = kron.iter().zip(&gauss).map(|(k, g)| ((k - g) * h).abs()).collect();
    (val, err)
}

/// Adaptive Gauss-Kronrod for vector-valued integrands.
///
/// Stops when the summed error estimate of every component is below
/// `max(abs_tol, rel_tol * |value|)`.
pub fn integrate_vec<F: FnMut(f64) -> Vec<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Vec<f64>> {
    let (v0, e0) = gk15_vec(&mut f, a, b);
    let mut panels = vec![(a, b, v0, e0)];
    loop {
        let n = panels[0].2.len();
        let mut total = vec![0.0; n];
        let mut err = vec![0.0; n];
        for (_, _, v, e) in &panels {
            for k in 0..n {
                total[k] += v[k];
                err[k] += e[k];
            }
        }
        let done = (0..n).all(|k| err[k] <= abs_tol.max(rel_tol * total[k].abs()));
        if done {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            let worst = err.iter().cloned().fold(0.0, f64::max);
            return Err(Error::QuadratureNotConverged(worst));
        }
        // bisect the panel with the largest error (max over components)
        let (idx, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.3.iter().cloned().fold(0.0, f64::max)))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        let (vl, el) = gk15_vec(&mut f, pa, mid);
        let (vr, er) = gk15_vec(&mut f, mid, pb);
        panels.push((pa, mid, vl, el));
        panels.push((mid, pb, vr, er));
    }
}

/// Adaptive Gauss-Kronrod for scalar integrands.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    integrate_vec(|x| vec![f(x)], a, b, abs_tol, rel_tol, 4000).map(|v| v[0])
}

/// Tanh-sinh quadrature on `[a, b]`.
///
/// The integrand is called as `f(x, da, db)` where `da = x - a` and `db = b - x` are
/// computed without cancellation, so singular factors like `(b - x)^(-1/2)` can be
/// evaluated accurately next to the endpoints. Endpoints themselves are never sampled.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    use std::f64::consts::FRAC_PI_2;
    if a == b {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let t_max = 4.0;
    let mut eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        // 1 - tanh(u) and 1 + tanh(u) without cancellation
        let e = (-2.0 * u.abs()).exp();
        let small = 2.0 * e / (1.0 + e);
        let (one_minus, one_plus) = if u >= 0.0 { (small, 2.0 - small) } else { (2.0 - small, small) };
        let da = half * one_plus;
        let db = half * one_minus;
        if da <= 0.0 || db <= 0.0 {
            return 0.0;
        }
        let x = if da < db { a + da } else { b - db };
        let w = FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        let v = f(x, da, db);
        if v.is_finite() {
            v * w
        } else {
            f64::NAN
        }
    };

    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > t_max {
            break;
        }
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h * half;
    for level in 0..12 {
        h *= 0.5;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = sum * h * half;
        if !next.is_finite() {
            return Err(Error::NonIntegrableSingularity("integrand is not finite inside the interval".into()));
        }
        let change = (next - estimate).abs();
        estimate = next;
        if level >= 2 && change <= rel_tol * estimate.abs().max(1e-300) {
            return Ok(estimate);
        }
    }
    Err(Error::NonIntegrableSingularity(format!(
        "tanh-sinh quadrature did not settle on [{a}, {b}] (last value {estimate:.6e})"
    )))
}

/// Brent's root finder on a bracketing interval.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidInput(format!("root not bracketed on [{a}, {b}]")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: fb.abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_kronrod_polynomial_and_exp() {
        let v = integrate(|x| x.powi(5), 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v - 64.0 / 6.0).abs() < 1e-12);
        let v = integrate(|t| t * (-3.0 * t).exp(), 0.0, 50.0, 1e-15, 1e-13).unwrap();
        assert!((v - 1.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // int_0^1 (1 - x)^(-1/2) dx = 2
        let v = tanh_sinh(|_, _, db| db.powf(-0.5), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
        // int_0^1 sqrt(1 - x^2) dx = pi/4
        let v = tanh_sinh(|x, _, _| (1.0 - x * x).sqrt(), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 10).is_err());
    }
}
