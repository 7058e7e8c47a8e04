//! Two-stage estimation: filtered quadratic variations give `(Ĥ, σ̂)`, then a
//! weighted, discretized Whittle contrast gives `λ̂`.

use crate::error::{FouError, Result};
use crate::linalg::{invert, matmul};
use crate::model::FouModel;
use crate::optim::{halton, nelder_mead, NmOptions};
use crate::quad::{integrate_to_infinity, QuadratureConfig};
use crate::simulate::SamplePath;
use crate::special_fn::HurstParam;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A finite filter `a_0..a_k` of order `L`: it annihilates polynomials of
/// degree below `L` but not `i^L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterSpec {
    coefficients: Vec<f64>,
    order: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FilterDoc {
    Plain(Vec<f64>),
    Full { coefficients: Vec<f64>, order: usize },
}

impl<'de> Deserialize<'de> for FilterSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = FilterDoc::deserialize(d)?;
        let spec = match doc {
            FilterDoc::Plain(c) => FilterSpec::infer(c),
            FilterDoc::Full { coefficients, order } => FilterSpec::new(coefficients, order),
        };
        spec.map_err(serde::de::Error::custom)
    }
}

fn moment(c: &[f64], l: i32) -> (f64, f64) {
    let mut s = 0.0;
    let mut scale = 0.0;
    for (i, a) in c.iter().enumerate() {
        let p = if l == 0 { 1.0 } else { (i as f64).powi(l) };
        s += a * p;
        scale += (a * p).abs();
    }
    (s, scale)
}

impl FilterSpec {
    /// Validates the declared order against the moment conditions.
    pub fn new(coefficients: Vec<f64>, order: usize) -> Result<Self> {
        if coefficients.len() < 2 || order == 0 {
            return Err(FouError::InvalidFilter(
                "a filter needs at least two coefficients and order >= 1".into(),
            ));
        }
        for l in 0..order {
            let (s, scale) = moment(&coefficients, l as i32);
            if s.abs() > 1e-10 * scale.max(1e-300) {
                return Err(FouError::InvalidFilter(format!(
                    "moment {l} is {s:e}, not zero; declared order {order} is too high"
                )));
            }
        }
        let (s, scale) = moment(&coefficients, order as i32);
        if s.abs() <= 1e-10 * scale {
            return Err(FouError::InvalidFilter(format!(
                "moment {order} vanishes; the filter has order above {order}"
            )));
        }
        Ok(Self { coefficients, order })
    }

    /// Order taken as the first non-vanishing moment.
    pub fn infer(coefficients: Vec<f64>) -> Result<Self> {
        let n = coefficients.len();
        for l in 0..n {
            let (s, scale) = moment(&coefficients, l as i32);
            if s.abs() > 1e-10 * scale {
                if l == 0 {
                    return Err(FouError::InvalidFilter(
                        "coefficients must sum to zero".into(),
                    ));
                }
                return Self::new(coefficients, l);
            }
        }
        Err(FouError::InvalidFilter("all moments vanish".into()))
    }

    /// Daubechies filter of order 2 (four taps).
    pub fn daubechies2() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = [
            0.482_962_913_144_534_1,
            -0.836_516_303_737_807_7,
            0.224_143_868_042_013_4,
            0.129_409_522_551_260_3,
        ]
        .iter()
        .map(|v| v * s)
        .collect();
        Self::new(c, 2).expect("Daubechies filter has order 2")
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `k`, where the filter has `k + 1` taps.
    pub fn span(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `(a_0, 0, a_1, 0, ..., a_k)`.
    pub fn dilate(&self) -> Result<Self> {
        let mut c = vec![0.0; 2 * self.coefficients.len() - 1];
        for (i, a) in self.coefficients.iter().enumerate() {
            c[2 * i] = *a;
        }
        Self::new(c, self.order)
    }

    /// `Σ_i Σ_j a_i a_j |i - j|^{2H}`.
    pub fn correlation_sum(&self, h: f64) -> f64 {
        let a = &self.coefficients;
        let mut s = 0.0;
        for (i, ai) in a.iter().enumerate() {
            for (j, aj) in a.iter().enumerate() {
                if i != j {
                    s += ai * aj * (i.abs_diff(j) as f64).powf(2.0 * h);
                }
            }
        }
        s
    }
}

/// Mean squared filter output over the `n - k` windows inside the sample.
pub fn quadratic_variation(path: &SamplePath, filter: &FilterSpec) -> Result<f64> {
    let x = path.values();
    let k = filter.span();
    if x.len() <= k {
        return Err(FouError::InvalidParameter(format!(
            "filter with {} taps needs more than {k} observations, got {}",
            k + 1,
            x.len()
        )));
    }
    let a = filter.coefficients();
    let windows = x.len() - k;
    let sum: f64 = (0..windows)
        .map(|i| {
            let y: f64 = a.iter().enumerate().map(|(j, aj)| aj * x[i + j]).sum();
            y * y
        })
        .sum();
    Ok(sum / windows as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub h: f64,
    /// False when `h` falls outside `(0, 1)`.
    pub in_range: bool,
    pub v_a: f64,
    pub v_a2: f64,
}

/// `Ĥ = ½ log2(V_{a²} / V_a)`; not clamped.
pub fn estimate_h(path: &SamplePath, filter: &FilterSpec) -> Result<HurstEstimate> {
    if filter.order() < 2 {
        return Err(FouError::InvalidFilter(format!(
            "Hurst estimation needs a filter of order >= 2, got {}",
            filter.order()
        )));
    }
    let v_a = quadratic_variation(path, filter)?;
    let v_a2 = quadratic_variation(path, &filter.dilate()?)?;
    // Rounding floor for a filtered polynomial.
    let amp = path.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain: f64 = filter.coefficients().iter().map(|a| a.abs()).sum();
    let floor = (1e-12 * amp * gain).powi(2);
    if !(v_a > floor && v_a2 > floor) {
        return Err(FouError::DegenerateSample(format!(
            "zero quadratic variation (V_a = {v_a}, V_a2 = {v_a2})"
        )));
    }
    let h = 0.5 * (v_a2 / v_a).log2();
    Ok(HurstEstimate { h, in_range: h > 0.0 && h < 1.0, v_a, v_a2 })
}

/// `σ̂ = sqrt(-2 V_a / (Δ^{2Ĥ} Σ Σ a_i a_j |i-j|^{2Ĥ}))`.
pub fn estimate_sigma(path: &SamplePath, filter: &FilterSpec, h_hat: f64) -> Result<f64> {
    let denom = filter.correlation_sum(h_hat);
    if !(denom < 0.0) {
        return Err(FouError::InvalidFilter(format!(
            "Σ a_i a_j |i-j|^(2H) = {denom} must be negative"
        )));
    }
    let v = quadratic_variation(path, filter)?;
    Ok((-2.0 * v / (path.delta().powf(2.0 * h_hat) * denom)).sqrt())
}

/// `I(x) = (T/2π) |(1/n) Σ_j e^{ijTx/n} X_j|²`.
pub fn periodogram_discrete(path: &SamplePath, x: f64) -> f64 {
    let n = path.n();
    let theta = path.horizon() * x / n as f64;
    let (mut re, mut im) = (0.0, 0.0);
    // Rotation recurrence, re-anchored every 64 steps.
    let (ds, dc) = theta.sin_cos();
    let (mut s, mut c) = (0.0f64, 1.0f64);
    for (j, v) in path.values().iter().enumerate() {
        let jj = j + 1;
        if jj % 64 == 0 {
            let (s0, c0) = (jj as f64 * theta).sin_cos();
            s = s0;
            c = c0;
        } else {
            let c_new = c * dc - s * ds;
            s = s * dc + c * ds;
            c = c_new;
        }
        re += c * v;
        im += s * v;
    }
    let scale = 1.0 / n as f64;
    path.horizon() / (2.0 * PI) * ((re * scale).powi(2) + (im * scale).powi(2))
}

/// Periodogram at the nodes `x_i = iT/n`, `i = 1..m`.
pub fn periodogram_nodes(path: &SamplePath, m: usize) -> Vec<f64> {
    let step = path.horizon() / path.n() as f64;
    (1..=m)
        .into_par_iter()
        .map(|i| periodogram_discrete(path, i as f64 * step))
        .collect()
}

/// Weight `w(x) = |x|^a / (1 + |x|^b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub exp_a: f64,
    pub exp_b: f64,
}

impl WeightSpec {
    pub fn new(exp_a: f64, exp_b: f64) -> Result<Self> {
        if !(exp_a >= 0.0) || !(exp_b > 0.0) {
            return Err(FouError::InvalidParameter(format!(
                "weight exponents need a >= 0 and b > 0, got ({exp_a}, {exp_b})"
            )));
        }
        Ok(Self { exp_a, exp_b })
    }

    /// `(2p, 2p + 3)`, the default for fitting a model of order `p`.
    pub fn for_order(p: u32) -> Self {
        Self { exp_a: 2.0 * p as f64, exp_b: 2.0 * p as f64 + 3.0 }
    }

    /// `|x| / (1 + |x|^b)`, valid only for continuous-record asymptotics.
    pub fn continuous(exp_b: f64) -> Result<Self> {
        if !(exp_b > 2.0) {
            return Err(FouError::InvalidParameter(format!(
                "continuous-record weight needs b > 2, got {exp_b}"
            )));
        }
        Ok(Self { exp_a: 1.0, exp_b })
    }

    pub fn is_continuous_only(&self) -> bool {
        self.exp_a == 1.0 && self.exp_b > 2.0
    }

    /// Exponent conditions for discretely sampled fits of order `p`.
    pub fn check_for_order(&self, p: u32) -> Result<()> {
        let need = 2.0 * p as f64;
        if self.exp_a < need || self.exp_b < self.exp_a + 3.0 {
            return Err(FouError::InvalidParameter(format!(
                "weight (a={}, b={}) needs a >= {need} and b >= a + 3 for order {p}",
                self.exp_a, self.exp_b
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        ax.powf(self.exp_a) / (1.0 + ax.powf(self.exp_b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    NelderMead,
    GridRefine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WhittleConfig {
    /// `None` uses `(2p, 2p + 3)`.
    pub weight: Option<WeightSpec>,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub min_gap: f64,
    pub optimizer: OptimizerKind,
    /// Number of frequency nodes `iT/n` used, `None` for all `n`.
    pub freq_nodes: Option<usize>,
    pub multistart: usize,
}

impl Default for WhittleConfig {
    fn default() -> Self {
        Self {
            weight: None,
            lambda_lo: 0.01,
            lambda_hi: 1.5,
            min_gap: 0.01,
            optimizer: OptimizerKind::NelderMead,
            freq_nodes: None,
            multistart: 8,
        }
    }
}

impl WhittleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_gap > 0.0
            && self.lambda_lo >= self.min_gap
            && self.lambda_hi > self.lambda_lo
            && self.multistart >= 1
            && self.freq_nodes != Some(0);
        if !ok {
            return Err(FouError::InvalidParameter(format!(
                "Whittle config needs 0 < min_gap <= lo < hi and multistart >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    fn weight_for(&self, p: u32) -> Result<WeightSpec> {
        let w = self.weight.unwrap_or_else(|| WeightSpec::for_order(p));
        w.check_for_order(p)?;
        Ok(w)
    }
}

/// The contrast `U(λ)` for fixed data, `σ`, `H` and multiplicities, with the
/// periodogram cached.
pub struct WhittleObjective {
    step: f64,
    log_nodes: Vec<f64>,
    sq_nodes: Vec<f64>,
    pgram: Vec<f64>,
    weights: Vec<f64>,
    mults: Vec<u32>,
    log_c: f64,
    expo: f64,
}

impl WhittleObjective {
    pub fn new(
        path: &SamplePath,
        mults: &[u32],
        sigma: f64,
        hurst: f64,
        cfg: &WhittleConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let pgram = periodogram_nodes(path, cfg.freq_nodes.unwrap_or(path.n()));
        Self::from_periodogram(path.horizon(), path.n(), pgram, mults, sigma, hurst, cfg)
    }

    /// Builds the objective from periodogram values at `iT/n`, `i = 1..m`.
    pub fn from_periodogram(
        horizon: f64,
        n: usize,
        pgram: Vec<f64>,
        mults: &[u32],
        sigma: f64,
        hurst: f64,
        cfg: &WhittleConfig,
    ) -> Result<Self> {
        if mults.is_empty() || mults.contains(&0) {
            return Err(FouError::InvalidParameter("multiplicities must be >= 1".into()));
        }
        let p: u32 = mults.iter().sum();
        let weight = cfg.weight_for(p)?;
        // Any rate works here; only the constant and exponent are used.
        let proto = FouModel::new(
            mults.iter().enumerate().map(|(i, &m)| crate::model::Root::new(1.0 + i as f64, m)).collect(),
            sigma,
            hurst,
        )?;
        let step = horizon / n as f64;
        let nodes: Vec<f64> = (1..=pgram.len()).map(|i| i as f64 * step).collect();
        Ok(Self {
            step,
            log_nodes: nodes.iter().map(|x| x.ln()).collect(),
            sq_nodes: nodes.iter().map(|x| x * x).collect(),
            weights: nodes.iter().map(|&x| weight.eval(x)).collect(),
            pgram,
            mults: mults.to_vec(),
            log_c: proto.spectral_constant().ln(),
            expo: 2.0 * p as f64 - 1.0 - 2.0 * hurst,
        })
    }

    pub fn eval(&self, lambdas: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.pgram.len() {
            let x2 = self.sq_nodes[i];
            let mut log_f = self.log_c + self.expo * self.log_nodes[i];
            for (l, &m) in lambdas.iter().zip(&self.mults) {
                log_f -= m as f64 * (l * l + x2).ln();
            }
            total += (log_f + self.pgram[i] * (-log_f).exp()) * self.weights[i];
        }
        self.step * total / (2.0 * PI)
    }
}

/// `U_T^{(n)}` at the rates, scale and Hurst exponent of `model`.
pub fn whittle_contrast(path: &SamplePath, model: &FouModel, cfg: &WhittleConfig) -> Result<f64> {
    let obj = WhittleObjective::new(
        path,
        &model.multiplicities(),
        model.sigma(),
        model.hurst().value(),
        cfg,
    )?;
    Ok(obj.eval(&model.lambda_values()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub h_hat: f64,
    pub h_in_range: bool,
    pub sigma_hat: f64,
    pub lambda_hat: Vec<f64>,
    pub multiplicities: Vec<u32>,
    pub horizon: f64,
    pub contrast_value: f64,
    pub converged: bool,
    pub n_evals: usize,
    pub asymptotic_cov: Option<Vec<Vec<f64>>>,
}

impl FitReport {
    pub fn model(&self) -> Result<FouModel> {
        FouModel::new(
            self.lambda_hat
                .iter()
                .zip(&self.multiplicities)
                .map(|(&v, &m)| crate::model::Root::new(v, m))
                .collect(),
            self.sigma_hat,
            self.h_hat,
        )
    }
}

/// Box-and-gap parameterization `λ_1 = lo + g_0²`, `λ_{i+1} = λ_i + gap + g_i²`.
struct Chart {
    lo: f64,
    hi: f64,
    gap: f64,
}

impl Chart {
    fn to_lambda(&self, g: &[f64]) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(g.len());
        let mut cur = self.lo + g[0] * g[0];
        out.push(cur);
        for gi in &g[1..] {
            cur += self.gap + gi * gi;
            out.push(cur);
        }
        (cur <= self.hi).then_some(out)
    }

    fn to_g(&self, lam: &[f64]) -> Vec<f64> {
        let mut g = vec![(lam[0] - self.lo).max(0.0).sqrt()];
        for w in lam.windows(2) {
            g.push((w[1] - w[0] - self.gap).max(0.0).sqrt());
        }
        g
    }

    fn feasible(&self, lam: &[f64]) -> bool {
        lam[0] >= self.lo
            && lam[lam.len() - 1] <= self.hi
            && lam.windows(2).all(|w| w[1] - w[0] >= self.gap)
    }

    /// Coarse feasible lattice used to seed local searches.
    fn lattice(&self, q: usize) -> Vec<Vec<f64>> {
        match q {
            1 => (0..32)
                .map(|i| vec![self.lo + (self.hi - self.lo) * (i as f64 + 0.5) / 32.0])
                .collect(),
            2 => {
                let k = 16;
                let span = self.hi - self.lo - self.gap;
                let mut pts = Vec::new();
                for i in 0..k {
                    for j in i..k {
                        let a = self.lo + span * (i as f64 + 0.25) / k as f64;
                        let b = self.lo + self.gap + span * (j as f64 + 0.75) / k as f64;
                        pts.push(vec![a, b]);
                    }
                }
                pts
            }
            _ => (1..=64 * q)
                .map(|idx| {
                    let mut u = halton(idx, q);
                    u.sort_by(f64::total_cmp);
                    let span = self.hi - self.lo - (q - 1) as f64 * self.gap;
                    u.iter()
                        .enumerate()
                        .map(|(i, v)| self.lo + i as f64 * self.gap + span * v)
                        .collect()
                })
                .collect(),
        }
    }
}

/// Minimizes the contrast over the constrained box. `sigma` and `hurst` are
/// either estimates or known values.
pub fn fit_lambda(
    path: &SamplePath,
    mults: &[u32],
    sigma: f64,
    hurst: f64,
    cfg: &WhittleConfig,
) -> Result<FitReport> {
    let obj = WhittleObjective::new(path, mults, sigma, hurst, cfg)?;
    let mut report = minimize_contrast(&obj, mults.len(), cfg)?;
    report.h_hat = hurst;
    report.h_in_range = hurst > 0.0 && hurst < 1.0;
    report.sigma_hat = sigma;
    report.multiplicities = mults.to_vec();
    report.horizon = path.horizon();
    Ok(report)
}

fn minimize_contrast(obj: &WhittleObjective, q: usize, cfg: &WhittleConfig) -> Result<FitReport> {
    let chart = Chart { lo: cfg.lambda_lo, hi: cfg.lambda_hi, gap: cfg.min_gap };
    if cfg.lambda_lo + (q - 1) as f64 * cfg.min_gap > cfg.lambda_hi {
        return Err(FouError::InvalidParameter(format!(
            "box [{}, {}] cannot hold {q} rates separated by {}",
            cfg.lambda_lo, cfg.lambda_hi, cfg.min_gap
        )));
    }
    let mut lattice: Vec<(Vec<f64>, f64)> = chart
        .lattice(q)
        .into_par_iter()
        .map(|l| {
            let v = obj.eval(&l);
            (l, v)
        })
        .collect();
    let mut n_evals = lattice.len();
    lattice.sort_by(|a, b| a.1.total_cmp(&b.1));
    let starts: Vec<Vec<f64>> = lattice
        .iter()
        .filter(|(_, v)| v.is_finite())
        .take(cfg.multistart)
        .map(|(l, _)| l.clone())
        .collect();
    if starts.is_empty() {
        return Err(FouError::NoConvergence {
            best_lambda: lattice[0].0.clone(),
            best_value: lattice[0].1,
        });
    }

    let runs: Vec<(Vec<f64>, f64, usize, bool)> = match cfg.optimizer {
        OptimizerKind::NelderMead => starts
            .par_iter()
            .map(|start| {
                let opts = NmOptions {
                    initial_step: 0.25 * (chart.hi - chart.lo).sqrt() / q as f64,
                    max_evals: 1500 * q,
                    ..Default::default()
                };
                let r = nelder_mead(
                    |g| chart.to_lambda(g).map_or(f64::INFINITY, |l| obj.eval(&l)),
                    &chart.to_g(start),
                    &opts,
                );
                let lam = chart.to_lambda(&r.x).unwrap_or_else(|| start.clone());
                (lam, r.value, r.evals, r.converged)
            })
            .collect(),
        OptimizerKind::GridRefine => starts
            .par_iter()
            .map(|start| compass_search(obj, &chart, start))
            .collect(),
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut any_converged = false;
    for (lam, v, evals, conv) in &runs {
        n_evals += evals;
        any_converged |= conv;
        if best.as_ref().is_none_or(|b| *v < b.1) {
            best = Some((lam.clone(), *v));
        }
    }
    let (lambda_hat, contrast_value) = best.expect("at least one start");
    if !any_converged {
        return Err(FouError::NoConvergence { best_lambda: lambda_hat, best_value: contrast_value });
    }
    Ok(FitReport {
        h_hat: f64::NAN,
        h_in_range: true,
        sigma_hat: f64::NAN,
        lambda_hat,
        multiplicities: Vec::new(),
        horizon: 0.0,
        contrast_value,
        converged: true,
        n_evals,
        asymptotic_cov: None,
    })
}

/// Projected coordinate search with step halving.
fn compass_search(obj: &WhittleObjective, chart: &Chart, start: &[f64]) -> (Vec<f64>, f64, usize, bool) {
    let mut x = start.to_vec();
    let mut fx = obj.eval(&x);
    let mut evals = 1;
    let mut step = (chart.hi - chart.lo) / 32.0;
    while step > 1e-9 && evals < 20_000 {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [-1.0, 1.0] {
                let mut y = x.clone();
                y[i] = (y[i] + dir * step).clamp(chart.lo, chart.hi);
                if !chart.feasible(&y) {
                    continue;
                }
                let fy = obj.eval(&y);
                evals += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx, evals, step <= 1e-9)
}

/// How `σ` and `H` enter the λ fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nuisance {
    Estimate,
    Fixed(f64),
}

/// Full pipeline: `Ĥ`, then `σ̂`, then `λ̂`.
pub fn fit_pipeline(
    path: &SamplePath,
    mults: &[u32],
    filter: &FilterSpec,
    hurst: Nuisance,
    sigma: Nuisance,
    cfg: &WhittleConfig,
) -> Result<FitReport> {
    let h = match hurst {
        Nuisance::Estimate => {
            let est = estimate_h(path, filter)?;
            if !est.in_range {
                return Err(FouError::DegenerateSample(format!(
                    "estimated H = {} lies outside (0, 1); refusing to fit the rates",
                    est.h
                )));
            }
            est.h
        }
        Nuisance::Fixed(h) => HurstParam::new(h)?.value(),
    };
    let s = match sigma {
        Nuisance::Estimate => estimate_sigma(path, filter, h)?,
        Nuisance::Fixed(s) => s,
    };
    fit_lambda(path, mults, s, h, cfg)
}

/// Sandwich covariance `W1⁻¹ W2 W1⁻¹ / T` of the continuous-record estimator.
pub fn asymptotic_lambda_cov(model: &FouModel, weight: &WeightSpec, horizon: f64) -> Result<Vec<Vec<f64>>> {
    if !(horizon > 0.0) {
        return Err(FouError::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    let roots = model.roots();
    let q = roots.len();
    let cfg = QuadratureConfig { abs_tol: 1e-14, rel_tol: 1e-11, max_subdivisions: 2000, ..Default::default() };
    let grad = |x: f64, i: usize| -> f64 {
        let r = roots[i];
        -2.0 * r.mult as f64 * r.value / (r.value * r.value + x * x)
    };
    let mut w1 = vec![0.0; q * q];
    let mut w2 = vec![0.0; q * q];
    for i in 0..q {
        for j in i..q {
            // (1/4π) ∫_R = (1/2π) ∫_0^∞ for even integrands.
            let a = integrate_to_infinity(|x| weight.eval(x) * grad(x, i) * grad(x, j), 0.0, &cfg)? / (2.0 * PI);
            let b = integrate_to_infinity(|x| weight.eval(x).powi(2) * grad(x, i) * grad(x, j), 0.0, &cfg)?
                / (2.0 * PI);
            w1[i * q + j] = a;
            w1[j * q + i] = a;
            w2[i * q + j] = b;
            w2[j * q + i] = b;
        }
    }
    let inv = invert(&w1, q)?;
    let cov = matmul(&matmul(&inv, &w2, q), &inv, q);
    Ok((0..q)
        .map(|i| (0..q).map(|j| 0.5 * (cov[i * q + j] + cov[j * q + i]) / horizon).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(v: &[f64], t: f64) -> SamplePath {
        SamplePath::new(v.to_vec(), t).unwrap()
    }

    #[test]
    fn filter_validation_and_dilation() {
        let f = FilterSpec::new(vec![1.0, -2.0, 1.0], 2).unwrap();
        assert_eq!(f.dilate().unwrap().coefficients(), &[1.0, 0.0, -2.0, 0.0, 1.0]);
        assert_eq!(FilterSpec::infer(vec![1.0, -1.0]).unwrap().dilate().unwrap().coefficients(), &[1.0, 0.0, -1.0]);
        assert!(FilterSpec::new(vec![1.0, -2.0, 1.0], 3).is_err());
        assert!(FilterSpec::new(vec![1.0, -2.0, 1.0], 1).is_err());
        assert!(FilterSpec::infer(vec![1.0, 1.0]).is_err());
        let d = FilterSpec::daubechies2();
        assert_eq!(d.order(), 2);
        assert_eq!(d.dilate().unwrap().order(), 2);
    }

    #[test]
    fn filter_json_forms() {
        let f: FilterSpec = serde_json::from_str("[1, -2, 1]").unwrap();
        assert_eq!(f.order(), 2);
        let f: FilterSpec = serde_json::from_str(r#"{"coefficients":[1,-1],"order":1}"#).unwrap();
        assert_eq!(f.order(), 1);
        assert!(serde_json::from_str::<FilterSpec>(r#"{"coefficients":[1,-1],"order":2}"#).is_err());
    }

    #[test]
    fn quadratic_variation_examples() {
        let f = FilterSpec::new(vec![1.0, -2.0, 1.0], 2).unwrap();
        let p = path(&[1.0, 2.0, 4.0, 8.0], 4.0);
        // Windows give 1 and 2; mean of squares over the two windows.
        assert_eq!(quadratic_variation(&p, &f).unwrap(), 2.5);
        assert!(quadratic_variation(&p, &f.dilate().unwrap()).is_err());
        assert_eq!(quadratic_variation(&path(&[3.0; 10], 1.0), &f).unwrap(), 0.0);
    }

    #[test]
    fn sigma_hand_example() {
        // Filter (1,-1): ΣΣ = -2, so σ̂ = sqrt(V/Δ) with V = 0.01, Δ = 0.01.
        let f = FilterSpec::infer(vec![1.0, -1.0]).unwrap();
        assert_eq!(f.correlation_sum(0.5), -2.0);
        let v: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.0 } else { 0.1 }).collect();
        let p = path(&v, 1.0);
        let s = estimate_sigma(&p, &f, 0.5).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_h_needs_order_two_and_variation() {
        let f = FilterSpec::infer(vec![1.0, -1.0]).unwrap();
        let p = path(&[0.0, 1.0, 0.5, 2.0, 1.0, 0.0, 3.0, 1.0], 1.0);
        assert!(matches!(estimate_h(&p, &f), Err(FouError::InvalidFilter(_))));
        let d = FilterSpec::daubechies2();
        assert!(matches!(
            estimate_h(&path(&[1.0; 20], 1.0), &d),
            Err(FouError::DegenerateSample(_))
        ));
    }

    #[test]
    fn periodogram_examples() {
        let p = path(&[2.0; 7], 2.0 * PI);
        assert!((periodogram_discrete(&p, 0.0) - 4.0).abs() < 1e-12);
        let p = path(&[1.0, -1.0], 2.0);
        assert!((periodogram_discrete(&p, PI) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn periodogram_recurrence_matches_direct_sum() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 113) as f64 / 50.0 - 1.0).collect();
        let p = path(&v, 37.0);
        for &x in &[0.3, 5.0, 37.0] {
            let theta = 37.0 * x / 1000.0;
            let (mut re, mut im) = (0.0, 0.0);
            for (j, val) in v.iter().enumerate() {
                let (s, c) = ((j + 1) as f64 * theta).sin_cos();
                re += c * val / 1000.0;
                im += s * val / 1000.0;
            }
            let direct = 37.0 / (2.0 * PI) * (re * re + im * im);
            let got = periodogram_discrete(&p, x);
            let scale = 37.0 / (2.0 * PI) * (v.iter().map(|a| a.abs()).sum::<f64>() / 1000.0).powi(2);
            assert!((got - direct).abs() < 1e-12 * scale, "{got} vs {direct}");
        }
    }

    #[test]
    fn contrast_three_node_toy() {
        let pgram = vec![0.4, 0.1, 0.05];
        let cfg = WhittleConfig::default();
        let obj = WhittleObjective::from_periodogram(3.0, 3, pgram.clone(), &[1, 1], 1.0, 0.7, &cfg).unwrap();
        let model = FouModel::distinct(&[0.3, 0.8], 1.0, 0.7).unwrap();
        let w = WeightSpec::for_order(2);
        let mut want = 0.0;
        for (i, ii) in pgram.iter().enumerate() {
            let x = (i + 1) as f64;
            let f = model.spectral_density(x).unwrap();
            want += (f.ln() + ii / f) * w.eval(x);
        }
        want *= 1.0 / (2.0 * PI);
        assert!((obj.eval(&[0.3, 0.8]) - want).abs() < 1e-12);
    }

    #[test]
    fn weight_constraints() {
        assert!(WeightSpec::for_order(2).check_for_order(2).is_ok());
        assert!(WeightSpec::new(3.0, 7.0).unwrap().check_for_order(2).is_err());
        let c = WeightSpec::continuous(3.0).unwrap();
        assert!(c.is_continuous_only());
        assert!(c.check_for_order(1).is_err());
        assert!(WeightSpec::continuous(2.0).is_err());
    }

    #[test]
    fn sandwich_covariance_properties() {
        let m = FouModel::distinct(&[0.3, 0.8], 1.0, 0.7).unwrap();
        let w = WeightSpec::continuous(3.0).unwrap();
        let c1 = asymptotic_lambda_cov(&m, &w, 100.0).unwrap();
        let c2 = asymptotic_lambda_cov(&m, &w, 200.0).unwrap();
        assert!((c1[0][1] - c1[1][0]).abs() < 1e-10);
        for i in 0..2 {
            for j in 0..2 {
                assert!((c1[i][j] - 2.0 * c2[i][j]).abs() <= 1e-15 * c1[i][j].abs());
            }
        }
        let (a, b, d) = (c1[0][0], c1[0][1], c1[1][1]);
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        assert!(tr / 2.0 - disc >= -1e-10);
    }

    #[test]
    fn chart_roundtrip_and_lattice_feasible() {
        let c = Chart { lo: 0.01, hi: 1.5, gap: 0.01 };
        let lam = vec![0.2, 0.5, 0.9];
        let back = c.to_lambda(&c.to_g(&lam)).unwrap();
        for (a, b) in lam.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        for q in 1..=4 {
            for l in c.lattice(q) {
                assert!(c.feasible(&l), "{l:?}");
            }
        }
    }
}
