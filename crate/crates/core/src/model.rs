//! The FOU(p) parameter object and its second-order structure.

use crate::error::{FouError, Result};
use crate::quad::{gauss_legendre, QuadratureConfig};
use crate::special_fn::{f_h, f_h_jet, gamma, HurstParam};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One distinct rate with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Root {
    pub value: f64,
    pub mult: u32,
}

impl Root {
    pub fn new(value: f64, mult: u32) -> Self {
        Self { value, mult }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    lambdas: Vec<Root>,
    sigma: f64,
    hurst: f64,
}

/// FOU(p) with distinct rates `λ_1 < ... < λ_q`, multiplicities summing to
/// `p`, scale `σ` and Hurst exponent `H`. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct FouModel {
    lambdas: Vec<Root>,
    sigma: f64,
    hurst: HurstParam,
}

impl TryFrom<ModelDoc> for FouModel {
    type Error = FouError;
    fn try_from(d: ModelDoc) -> Result<Self> {
        FouModel::new(d.lambdas, d.sigma, d.hurst)
    }
}

impl From<FouModel> for ModelDoc {
    fn from(m: FouModel) -> Self {
        ModelDoc {
            lambdas: m.lambdas,
            sigma: m.sigma,
            hurst: m.hurst.value(),
        }
    }
}

impl FouModel {
    pub fn new(lambdas: Vec<Root>, sigma: f64, hurst: f64) -> Result<Self> {
        let hurst = HurstParam::new(hurst)?;
        if lambdas.is_empty() {
            return Err(FouError::InvalidParameter("at least one rate is required".into()));
        }
        for r in &lambdas {
            if !(r.value > 0.0 && r.value.is_finite()) || r.mult == 0 {
                return Err(FouError::InvalidParameter(format!(
                    "rates must be positive and finite with multiplicity >= 1, got {r:?}"
                )));
            }
        }
        if lambdas.windows(2).any(|w| !(w[0].value < w[1].value)) {
            return Err(FouError::InvalidParameter(
                "rates must be strictly ascending".into(),
            ));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FouError::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { lambdas, sigma, hurst })
    }

    /// Model with simple (multiplicity one) rates.
    pub fn distinct(values: &[f64], sigma: f64, hurst: f64) -> Result<Self> {
        Self::new(values.iter().map(|&v| Root::new(v, 1)).collect(), sigma, hurst)
    }

    /// Model with a single rate of multiplicity `mult`.
    pub fn repeated(value: f64, mult: u32, sigma: f64, hurst: f64) -> Result<Self> {
        Self::new(vec![Root::new(value, mult)], sigma, hurst)
    }

    pub fn roots(&self) -> &[Root] {
        &self.lambdas
    }

    pub fn lambda_values(&self) -> Vec<f64> {
        self.lambdas.iter().map(|r| r.value).collect()
    }

    pub fn multiplicities(&self) -> Vec<u32> {
        self.lambdas.iter().map(|r| r.mult).collect()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    /// Process order `p`.
    pub fn order(&self) -> u32 {
        self.lambdas.iter().map(|r| r.mult).sum()
    }

    /// Number of distinct rates `q`.
    pub fn distinct_count(&self) -> usize {
        self.lambdas.len()
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.lambdas.clone(), sigma, self.hurst.value())
    }

    pub fn with_hurst(&self, hurst: f64) -> Result<Self> {
        Self::new(self.lambdas.clone(), self.sigma, hurst)
    }

    /// Same multiplicities, new rate values.
    pub fn with_lambda_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.lambdas.len() {
            return Err(FouError::InvalidParameter(format!(
                "expected {} rates, got {}",
                self.lambdas.len(),
                values.len()
            )));
        }
        let roots = self
            .lambdas
            .iter()
            .zip(values)
            .map(|(r, &v)| Root::new(v, r.mult))
            .collect();
        Self::new(roots, self.sigma, self.hurst.value())
    }

    fn has_closed_form(&self) -> bool {
        let mults = self.multiplicities();
        mults.iter().all(|&m| m == 1)
            || matches!(mults.as_slice(), [2] | [3] | [2, 1] | [1, 2])
    }

    /// Autocovariance `E[X_0 X_t]`.
    pub fn acvf(&self, t: f64) -> Result<f64> {
        self.acvf_with(t, &QuadratureConfig::default())
    }

    pub fn acvf_with(&self, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
        if !t.is_finite() {
            return Err(FouError::Domain(format!("lag must be finite, got {t}")));
        }
        let t = t.abs();
        if self.has_closed_form() {
            self.closed_form_acvf(t, cfg)
        } else {
            let grid = self.acvf_via_spectrum(&[t], &SpectralGridConfig::default())?;
            Ok(grid.values[0])
        }
    }

    /// Autocovariances at many lags, evaluated in parallel.
    pub fn acvf_lags(&self, lags: &[f64]) -> Result<Vec<f64>> {
        if self.has_closed_form() {
            let cfg = QuadratureConfig::default();
            lags.par_iter().map(|&t| self.acvf_with(t, &cfg)).collect()
        } else {
            let abs: Vec<f64> = lags.iter().map(|t| t.abs()).collect();
            Ok(self.acvf_via_spectrum(&abs, &SpectralGridConfig::default())?.values)
        }
    }

    fn closed_form_acvf(&self, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
        let h = self.hurst;
        let hv = h.value();
        let pref = self.sigma * self.sigma * hv / 2.0;
        let p = self.order() as f64;
        match (self.lambdas.as_slice(), self.multiplicities().as_slice()) {
            (_, m) if m.iter().all(|&k| k == 1) => {
                let vals = self.lambda_values();
                let mut acc = 0.0;
                for (i, &li) in vals.iter().enumerate() {
                    let mut denom = 1.0;
                    for (j, &lj) in vals.iter().enumerate() {
                        if j != i {
                            denom *= li * li - lj * lj;
                        }
                    }
                    acc += li.powf(2.0 * p - 2.0 * hv - 2.0) / denom * f_h(h, li * t, cfg)?;
                }
                Ok(pref * acc)
            }
            ([r], [2]) => {
                let a = r.value;
                let j = f_h_jet(h, a * t, cfg)?;
                Ok(pref * a.powf(-2.0 * hv) * ((1.0 - hv) * j.value + 0.5 * j.x_d1))
            }
            ([r], [3]) => {
                let a = r.value;
                let j = f_h_jet(h, a * t, cfg)?;
                let bracket = (2.0 - hv) * (1.0 - hv) * j.value
                    + (7.0 - 4.0 * hv) / 4.0 * j.x_d1
                    + j.x2_d2 / 4.0;
                Ok(pref / 2.0 * a.powf(-2.0 * hv) * bracket)
            }
            ([r1, r2], [2, 1]) => self.double_single(r1.value, r2.value, t, cfg),
            ([r1, r2], [1, 2]) => self.double_single(r2.value, r1.value, t, cfg),
            _ => unreachable!("closed form requested for unsupported multiplicities"),
        }
    }

    /// `α` repeated twice, `β` simple.
    fn double_single(&self, a: f64, b: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
        let h = self.hurst;
        let hv = h.value();
        let pref = self.sigma * self.sigma * hv / 2.0;
        let ja = f_h_jet(h, a * t, cfg)?;
        let fb = f_h(h, b * t, cfg)?;
        let d = a * a - b * b;
        let num = b.powf(4.0 - 2.0 * hv) * fb - a.powf(4.0 - 2.0 * hv) * ja.value
            + ((2.0 - hv) * a.powf(2.0 - 2.0 * hv) * ja.value
                + a.powf(2.0 - 2.0 * hv) * ja.x_d1 / 2.0)
                * d;
        Ok(pref * num / (d * d))
    }

    /// Spectral density at frequency `x`.
    pub fn spectral_density(&self, x: f64) -> Result<f64> {
        let hv = self.hurst.value();
        let expo = 2.0 * self.order() as f64 - 1.0 - 2.0 * hv;
        if x == 0.0 && expo < 0.0 {
            return Err(FouError::Domain(
                "spectral density is infinite at 0 for p = 1, H > 1/2".into(),
            ));
        }
        let ax = x.abs();
        let mut denom = 1.0;
        for r in &self.lambdas {
            denom *= (r.value * r.value + ax * ax).powi(r.mult as i32);
        }
        Ok(self.spectral_constant() * ax.powf(expo) / denom)
    }

    /// `σ² Γ(2H+1) sin(Hπ) / (2π)`.
    pub fn spectral_constant(&self) -> f64 {
        let hv = self.hurst.value();
        self.sigma * self.sigma * gamma(2.0 * hv + 1.0) * (hv * PI).sin() / (2.0 * PI)
    }

    /// Autocovariances by Fourier inversion of the spectral density, with an
    /// analytic correction for the tail beyond the cutoff.
    pub fn acvf_via_spectrum(
        &self,
        lags: &[f64],
        grid: &SpectralGridConfig,
    ) -> Result<CovarianceGrid> {
        grid.validate()?;
        let inv = SpectralInverter::new(self, grid);
        let rough = inv.eval(0.0, f64::INFINITY)?.0;
        let variance = inv.eval(0.0, grid.rel_tol * rough)?;
        let values = lags
            .par_iter()
            .map(|&t| {
                if t < 0.0 || !t.is_finite() {
                    return Err(FouError::Domain(format!("lags must be finite and >= 0, got {t}")));
                }
                let tol = grid.rel_tol * variance.0;
                let (v, bound) = if t == 0.0 { variance } else { inv.eval(t, tol)? };
                if bound > tol {
                    return Err(FouError::TailBound { lag: t, bound, tolerance: tol });
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        if variance.1 > grid.rel_tol * variance.0 {
            return Err(FouError::TailBound {
                lag: 0.0,
                bound: variance.1,
                tolerance: grid.rel_tol * variance.0,
            });
        }
        CovarianceGrid::new(lags.to_vec(), values)
    }

    /// Variogram `E(X_t - X_0)^2`.
    pub fn variogram(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let cfg = QuadratureConfig::default();
        Ok((2.0 * (self.acvf_with(0.0, &cfg)? - self.acvf_with(t, &cfg)?)).max(0.0))
    }

    /// Partial-fraction coefficients of the composed operator: the kernel
    /// acting on `dy` is `Σ_i Σ_r c[i][r-1] u^{r-1} e^{-λ_i u} / (r-1)!`.
    ///
    /// For simple rates `c[i][0] = K_i`; for one repeated rate the row is the
    /// binomial expansion `C(p-1, r-1) (-λ)^{r-1}`.
    pub fn kernel_coefficients(&self) -> Vec<Vec<f64>> {
        let p = self.order() as usize;
        self.lambdas
            .iter()
            .enumerate()
            .map(|(i, ri)| {
                let m = ri.mult as usize;
                let s0 = -ri.value;
                // Taylor coefficients of s^{p-1} / prod_{j != i} (s + λ_j)^{p_j} at s0.
                let mut series: Vec<f64> = (0..m)
                    .map(|k| {
                        if k > p - 1 {
                            0.0
                        } else {
                            binom(p - 1, k) * s0.powi((p - 1 - k) as i32)
                        }
                    })
                    .collect();
                for (j, rj) in self.lambdas.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let d = rj.value - ri.value;
                    let q = rj.mult as usize;
                    let factor: Vec<f64> = (0..m)
                        .map(|k| {
                            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                            sign * binom(q + k - 1, k) * d.powi(-((q + k) as i32))
                        })
                        .collect();
                    series = mul_truncated(&series, &factor);
                }
                (1..=m).map(|r| series[m - r]).collect()
            })
            .collect()
    }
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

fn mul_truncated(a: &[f64], b: &[f64]) -> Vec<f64> {
    let m = a.len();
    (0..m)
        .map(|k| (0..=k).map(|i| a[i] * b[k - i]).sum())
        .collect()
}

/// `K_i = 1 / prod_{j != i} (1 - λ_j / λ_i)` for distinct rates.
pub fn k_coefficients(lambdas: &[f64]) -> Result<Vec<f64>> {
    if lambdas.is_empty() {
        return Err(FouError::InvalidParameter("no rates given".into()));
    }
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(FouError::InvalidParameter(
            "rates must be strictly ascending and pairwise distinct".into(),
        ));
    }
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            let prod: f64 = lambdas
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &lj)| 1.0 - lj / li)
                .product();
            1.0 / prod
        })
        .collect())
}

/// Replace every rate of multiplicity `m` by the simple rates
/// `λ, λ+ε, ..., λ+(m-1)ε`.
pub fn split_roots(model: &FouModel, eps: f64) -> Result<FouModel> {
    if !(eps > 0.0) {
        return Err(FouError::InvalidParameter(format!(
            "perturbation must be positive, got {eps}"
        )));
    }
    let mut values = Vec::new();
    for r in model.roots() {
        for k in 0..r.mult {
            values.push(r.value + k as f64 * eps);
        }
    }
    FouModel::distinct(&values, model.sigma(), model.hurst().value())
}

/// Largest absolute gap over `lags` between the repeated-rate closed form of
/// `collapse_to` and the simple-rate formula evaluated at rates split by `eps`.
pub fn repeated_root_limit_check(collapse_to: &FouModel, eps: f64, lags: &[f64]) -> Result<f64> {
    let base = split_roots(collapse_to, eps)?;
    let mut worst = 0.0f64;
    for &t in lags {
        let d = (base.acvf(t)? - collapse_to.acvf(t)?).abs();
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Autocovariance values on a lag grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceGrid {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
}

impl CovarianceGrid {
    pub fn new(lags: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if lags.len() != values.len() {
            return Err(FouError::InvalidParameter(
                "lags and values differ in length".into(),
            ));
        }
        if lags.iter().any(|&t| !(t >= 0.0)) {
            return Err(FouError::InvalidParameter("lags must be nonnegative".into()));
        }
        Ok(Self { lags, values })
    }

    pub fn from_model(model: &FouModel, lags: &[f64]) -> Result<Self> {
        Self::new(lags.to_vec(), model.acvf_lags(lags)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralRule {
    Trapezoid,
    GaussLegendre,
}

/// Settings for Fourier inversion. `nodes` is the number of points per
/// integration panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGridConfig {
    pub cutoff_frequency: f64,
    pub nodes: usize,
    pub rule: SpectralRule,
    /// Allowed tail-bound error relative to the variance.
    pub rel_tol: f64,
}

impl Default for SpectralGridConfig {
    fn default() -> Self {
        Self {
            cutoff_frequency: 200.0,
            nodes: 16,
            rule: SpectralRule::GaussLegendre,
            rel_tol: 1e-7,
        }
    }
}

impl SpectralGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 16 || !(self.cutoff_frequency > 0.0) || !(self.rel_tol > 0.0) {
            return Err(FouError::InvalidParameter(format!(
                "spectral grid needs nodes >= 16, positive cutoff and tolerance: {self:?}"
            )));
        }
        Ok(())
    }
}

struct SpectralInverter<'a> {
    model: &'a FouModel,
    cfg: SpectralGridConfig,
    c: f64,
    nu: f64,
    s: f64,
    lam_min: f64,
    lam_max: f64,
    rule: (Vec<f64>, Vec<f64>),
}

impl<'a> SpectralInverter<'a> {
    fn new(model: &'a FouModel, cfg: &SpectralGridConfig) -> Self {
        let vals = model.lambda_values();
        let rule = match cfg.rule {
            SpectralRule::GaussLegendre => gauss_legendre(cfg.nodes),
            SpectralRule::Trapezoid => {
                let n = cfg.nodes;
                let h = 2.0 / (n - 1) as f64;
                let nodes = (0..n).map(|i| -1.0 + i as f64 * h).collect();
                let weights = (0..n)
                    .map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h })
                    .collect();
                (nodes, weights)
            }
        };
        Self {
            model,
            cfg: *cfg,
            c: model.spectral_constant(),
            nu: 1.0 + 2.0 * model.hurst().value(),
            s: model.roots().iter().map(|r| r.mult as f64 * r.value * r.value).sum(),
            lam_min: vals[0],
            lam_max: vals[vals.len() - 1],
            rule,
        }
    }

    fn density(&self, x: f64) -> f64 {
        // x > 0 on every panel, so the density is finite.
        self.model.spectral_density(x).unwrap_or(0.0)
    }

    fn panel(&self, a: f64, b: f64, t: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let (nodes, weights) = &self.rule;
        let mut acc = 0.0;
        for (z, w) in nodes.iter().zip(weights) {
            let x = mid + half * z;
            acc += w * self.density(x) * (t * x).cos();
        }
        acc * half
    }

    /// Returns the estimate and a rigorous bound on the tail error. The
    /// cutoff is doubled (at most 20 times) until the bound is below `tol`.
    fn eval(&self, t: f64, tol: f64) -> Result<(f64, f64)> {
        let p = self.model.order() as f64;
        let hv = self.model.hurst().value();
        let mut cutoff = self.cfg.cutoff_frequency.max((2.0 * self.s).sqrt());
        if t > 0.0 {
            cutoff = cutoff.max(20.0 / t);
        }
        for _ in 0..20 {
            if self.tail_bound(t, cutoff) <= tol {
                break;
            }
            cutoff *= 2.0;
        }
        // Near zero the density is C x^{2p-1-2H} / prod λ^{2p_i}.
        let b0 = 1e-7 * self.lam_min;
        let lam_prod: f64 = self
            .model
            .roots()
            .iter()
            .map(|r| r.value.powi(2 * r.mult as i32))
            .product();
        let e = 2.0 * p - 2.0 * hv;
        let mut total = self.c * b0.powf(e) / (e * lam_prod);

        let max_width = if t > 0.0 { PI / (2.0 * t) } else { f64::INFINITY };
        let mut a = b0;
        let knee = 4.0 * self.lam_max;
        while a < cutoff {
            let mut width = if a < knee { 0.5 * a } else { 0.5 * knee.max(a * 0.25) };
            width = width.min(max_width);
            let b = (a + width).min(cutoff);
            total += self.panel(a, b, t);
            a = b;
        }
        total *= 2.0;

        let (c, nu, s, x) = (self.c, self.nu, self.s, cutoff);
        if t == 0.0 {
            total += 2.0 * c * (x.powf(1.0 - nu) / (nu - 1.0) - s * x.powf(-nu - 1.0) / (nu + 1.0));
        } else {
            let y = t * x;
            total += 2.0 * c * (t.powf(nu - 1.0) * j_tail(nu, y) - s * t.powf(nu + 1.0) * j_tail(nu + 2.0, y));
        }
        if !total.is_finite() {
            return Err(FouError::Quadrature(format!("spectral inversion produced {total} at lag {t}")));
        }
        Ok((total, self.tail_bound(t, x)))
    }

    fn tail_bound(&self, t: f64, x: f64) -> f64 {
        let (c, nu, s) = (self.c, self.nu, self.s);
        let mut bound = 3.0 * c * s * s * x.powf(-nu - 3.0) / (nu + 3.0);
        if t > 0.0 {
            let y = t * x;
            bound += 2.0 * c * (t.powf(nu - 1.0) * j_remainder(nu, y) + s * t.powf(nu + 1.0) * j_remainder(nu + 2.0, y));
        }
        bound
    }
}

/// Asymptotic expansion of `∫_Y^∞ y^{-μ} cos y dy` to four terms.
fn j_tail(mu: f64, y: f64) -> f64 {
    let (s, c) = y.sin_cos();
    -y.powf(-mu) * s + mu * y.powf(-mu - 1.0) * c + mu * (mu + 1.0) * y.powf(-mu - 2.0) * s
        - mu * (mu + 1.0) * (mu + 2.0) * y.powf(-mu - 3.0) * c
}

fn j_remainder(mu: f64, y: f64) -> f64 {
    2.0 * mu * (mu + 1.0) * (mu + 2.0) * (mu + 3.0) * y.powf(-mu - 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_to_infinity;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn k_coefficient_examples() {
        assert_eq!(k_coefficients(&[0.5]).unwrap(), vec![1.0]);
        let k = k_coefficients(&[0.3, 0.8]).unwrap();
        assert!(close(k[0], -0.6, 1e-14) && close(k[1], 1.6, 1e-14));
        assert!(k_coefficients(&[0.3, 0.3]).is_err());
    }

    #[test]
    fn kernel_coefficients_reduce_to_known_cases() {
        let m = FouModel::distinct(&[0.3, 0.8, 1.1], 1.0, 0.5).unwrap();
        let k = k_coefficients(&[0.3, 0.8, 1.1]).unwrap();
        for (row, ki) in m.kernel_coefficients().iter().zip(&k) {
            assert!(close(row[0], *ki, 1e-12));
        }
        let m = FouModel::repeated(0.8, 3, 1.0, 0.5).unwrap();
        let row = &m.kernel_coefficients()[0];
        assert!(close(row[0], 1.0, 1e-14));
        assert!(close(row[1], -1.6, 1e-14));
        assert!(close(row[2], 0.64, 1e-14));
    }

    #[test]
    fn brownian_closed_forms() {
        let m = FouModel::repeated(0.8, 2, 1.0, 0.5).unwrap();
        assert!(close(m.acvf(0.0).unwrap(), 0.3125, 1e-12));
        let want = 0.3125 * (-0.8f64).exp() * 0.2;
        assert!(close(m.acvf(1.0).unwrap(), want, 1e-12));
        let m = FouModel::distinct(&[0.3, 0.8], 1.0, 0.5).unwrap();
        assert!(close(m.acvf(0.0).unwrap(), 0.5 / 1.1, 1e-12));
        let m = FouModel::repeated(0.8, 3, 1.0, 0.5).unwrap();
        assert!(close(m.acvf(0.0).unwrap(), 3.0 / (16.0 * 0.8), 1e-12));
        let m = FouModel::distinct(&[0.8], 1.0, 0.5).unwrap();
        assert!(close(m.acvf(0.0).unwrap(), 0.625, 1e-12));
    }

    #[test]
    fn spectral_density_examples() {
        let m = FouModel::repeated(0.8, 2, 1.0, 0.5).unwrap();
        let want = 1.0 / (2.0 * PI * 1.64 * 1.64);
        assert!(close(m.spectral_density(1.0).unwrap(), want, 1e-15));
        assert_eq!(m.spectral_density(-1.3).unwrap(), m.spectral_density(1.3).unwrap());
        let total = 2.0
            * integrate_to_infinity(|x| m.spectral_density(x).unwrap(), 0.0, &QuadratureConfig::default())
                .unwrap();
        assert!(close(total, 0.3125, 1e-4));
        let long = FouModel::distinct(&[0.8], 1.0, 0.7).unwrap();
        assert!(long.spectral_density(0.0).is_err());
    }

    #[test]
    fn spectrum_matches_closed_forms() {
        let grid = SpectralGridConfig::default();
        for m in [
            FouModel::distinct(&[0.3, 0.8], 1.0, 0.5).unwrap(),
            FouModel::repeated(0.8, 3, 1.0, 0.7).unwrap(),
            FouModel::new(vec![Root::new(0.4, 2), Root::new(1.2, 1)], 1.3, 0.3).unwrap(),
        ] {
            let lags = [0.0, 0.5, 1.0, 2.0];
            let inv = m.acvf_via_spectrum(&lags, &grid).unwrap();
            for (t, v) in lags.iter().zip(&inv.values) {
                let c = m.acvf(*t).unwrap();
                assert!((v - c).abs() < 1e-6 * m.acvf(0.0).unwrap(), "{m:?} t={t}: {v} vs {c}");
            }
        }
    }

    #[test]
    fn cutoff_grows_until_the_tail_bound_holds() {
        let m = FouModel::distinct(&[0.3, 0.8], 1.0, 0.1).unwrap();
        let grid = SpectralGridConfig { cutoff_frequency: 1.0, rel_tol: 1e-14, ..Default::default() };
        let v = m.acvf_via_spectrum(&[0.0, 0.01], &grid).unwrap();
        assert!((v.values[0] / m.acvf(0.0).unwrap() - 1.0).abs() < 1e-9);
        let grid = SpectralGridConfig { rel_tol: 1e-300, ..grid };
        assert!(matches!(m.acvf_via_spectrum(&[0.0], &grid), Err(FouError::TailBound { .. })));
    }

    #[test]
    fn limit_check_and_zero_eps() {
        let target = FouModel::repeated(0.8, 2, 1.0, 0.7).unwrap();
        assert!(repeated_root_limit_check(&target, 1e-4, &[0.0, 1.0, 2.0]).unwrap() < 1e-3);
        assert!(repeated_root_limit_check(&target, 0.0, &[0.0]).is_err());
    }

    #[test]
    fn variogram_small_lag_law() {
        for h in [0.3, 0.7] {
            let m = FouModel::repeated(0.8, 2, 1.0, h).unwrap();
            let t1: f64 = 1e-4;
            let t2: f64 = 1e-2;
            let slope = (m.variogram(t2).unwrap() / m.variogram(t1).unwrap()).ln() / (t2 / t1).ln();
            assert!((slope - 2.0 * h).abs() < 0.05, "H={h}: slope {slope}");
        }
        let m = FouModel::repeated(0.8, 2, 1.0, 0.5).unwrap();
        assert_eq!(m.variogram(0.0).unwrap(), 0.0);
        assert!(m.variogram(0.01).unwrap() > 0.0);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let m = FouModel::new(vec![Root::new(0.3, 1), Root::new(0.8, 2)], 1.5, 0.7).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"lambdas":[{"value":0.3,"mult":1},{"value":0.8,"mult":2}],"sigma":1.5,"hurst":0.7}"#);
        let back: FouModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"lambdas":[{"value":0.8,"mult":1},{"value":0.3,"mult":1}],"sigma":1,"hurst":0.7}"#;
        assert!(serde_json::from_str::<FouModel>(bad).is_err());
        let bad = r#"{"lambdas":[{"value":0.8,"mult":1}],"sigma":1,"hurst":1.0}"#;
        assert!(serde_json::from_str::<FouModel>(bad).is_err());
    }
}
