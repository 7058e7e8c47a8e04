//! Adaptive Gauss-Kronrod and fixed Gauss-Legendre quadrature.

use crate::error::{FouError, Result};
use serde::{Deserialize, Serialize};

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Integrands `s^e` with `e < -singularity_exponent_floor` are treated as
    /// singular at the origin and integrated after a smoothing substitution.
    pub singularity_exponent_floor: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-15,
            rel_tol: 1e-13,
            max_subdivisions: 400,
            singularity_exponent_floor: 1e-12,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.max_subdivisions >= 1
            && self.singularity_exponent_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(FouError::InvalidParameter(format!(
                "quadrature config must have positive tolerances and at least one subdivision: {self:?}"
            )))
        }
    }
}

// 15-point Kronrod nodes (non-negative half) with the embedded 7-point Gauss rule.
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

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let est = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (est, err)
}

struct Segment {
    a: f64,
    b: f64,
    est: f64,
    err: f64,
}

/// Globally adaptive integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (est, err) = gk15(&f, a, b);
    if !est.is_finite() {
        return Err(FouError::Quadrature(format!(
            "non-finite integrand value on [{a}, {b}]"
        )));
    }
    let mut segments = vec![Segment { a, b, est, err }];
    let mut total = est;
    let mut total_err = err;
    for _ in 0..cfg.max_subdivisions {
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        let (e1, r1) = gk15(&f, seg.a, mid);
        let (e2, r2) = gk15(&f, mid, seg.b);
        if !(e1.is_finite() && e2.is_finite()) {
            return Err(FouError::Quadrature(format!(
                "non-finite integrand value on [{}, {}]",
                seg.a, seg.b
            )));
        }
        total += e1 + e2 - seg.est;
        total_err += r1 + r2 - seg.err;
        segments.push(Segment { a: seg.a, b: mid, est: e1, err: r1 });
        segments.push(Segment { a: mid, b: seg.b, est: e2, err: r2 });
        // Re-sum occasionally so the running totals do not drift.
        if segments.len() % 64 == 0 {
            total = segments.iter().map(|s| s.est).sum();
            total_err = segments.iter().map(|s| s.err).sum();
        }
    }
    total_err = segments.iter().map(|s| s.err).sum();
    total = segments.iter().map(|s| s.est).sum();
    if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
        return Ok(total);
    }
    Err(FouError::Quadrature(format!(
        "error estimate {total_err:e} above tolerance after {} subdivisions on [{a}, {b}]",
        cfg.max_subdivisions
    )))
}

/// Integral over `[a, inf)` through the map `x = a + u / (1 - u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - u;
            let x = a + u / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        cfg,
    )
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential_integrals() {
        let cfg = QuadratureConfig::default();
        let v = integrate(|x| x * x, 0.0, 3.0, &cfg).unwrap();
        assert!((v - 9.0).abs() < 1e-13);
        let v = integrate(f64::exp, -1.0, 2.0, &cfg).unwrap();
        assert!((v - (2f64.exp() - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn singular_endpoint_converges() {
        let cfg = QuadratureConfig::default();
        // int_0^1 x^{-1/2} dx = 2
        let v = integrate(|x| x.powf(-0.5), 0.0, 1.0, &cfg).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn semi_infinite() {
        let cfg = QuadratureConfig::default();
        let v = integrate_to_infinity(|x| 1.0 / (1.0 + x * x), 0.0, &cfg).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn exhausted_subdivisions_is_an_error() {
        let cfg = QuadratureConfig {
            max_subdivisions: 1,
            ..Default::default()
        };
        let err = integrate(|x| (50.0 * x).sin() / x.sqrt(), 0.0, 10.0, &cfg).unwrap_err();
        assert!(matches!(err, FouError::Quadrature(_)));
    }

    #[test]
    fn gauss_legendre_is_exact_for_low_degree() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m - 2.0 / 31.0).abs() < 1e-14);
    }
}
