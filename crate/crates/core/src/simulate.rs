//! Seeded sampling of fractional Gaussian noise and FOU(p) paths.
//!
//! Two independent constructions are provided. The exact sampler draws a
//! stationary Gaussian vector with the model autocovariance by circulant
//! embedding (Cholesky as a fallback). The operator sampler discretizes the
//! moving-average representation driven by a simulated fBm path.

use crate::error::{FouError, Result};
use crate::linalg::{cholesky, toeplitz};
use crate::model::FouModel;
use crate::rng::{stream, FouRng};
use crate::special_fn::HurstParam;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Equispaced observations `X_{Δ}, ..., X_{nΔ}` on `[0, T]`, `Δ = T/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    values: Vec<f64>,
    horizon: f64,
}

impl SamplePath {
    pub fn new(values: Vec<f64>, horizon: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(FouError::InvalidParameter(format!(
                "a path needs at least 2 values, got {}",
                values.len()
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(FouError::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FouError::InvalidParameter(format!("value {i} is not finite")));
        }
        Ok(Self { values, horizon })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.horizon / self.values.len() as f64
    }

    /// Sampling time of value `i` (0-based), i.e. `(i+1)Δ`.
    pub fn time(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.delta()
    }

    /// Same values placed on a different horizon.
    pub fn rescaled(&self, horizon: f64) -> Result<Self> {
        Self::new(self.values.clone(), horizon)
    }

    /// First `k` values on the horizon `kΔ`, keeping the spacing.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        Self::new(self.values[..k].to_vec(), k as f64 * self.delta())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.time(i), v)?;
        }
        Ok(())
    }

    /// Reads the `t,x` format. The horizon is `nΔ` with `Δ` taken from the
    /// first time stamp.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| FouError::Parse(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line == "t,x") {
                continue;
            }
            let (t, x) = line
                .split_once(',')
                .ok_or_else(|| FouError::Parse(format!("line {}: expected t,x", lineno + 1)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| FouError::Parse(format!("line {}: {e}", lineno + 1)))
            };
            times.push(parse(t)?);
            values.push(parse(x)?);
        }
        let first = *times
            .first()
            .ok_or_else(|| FouError::Parse("empty path file".into()))?;
        let horizon = first * values.len() as f64;
        Self::new(values, horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    ExactGaussian,
    OperatorPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub method: SimMethod,
    /// Burn-in length for the operator sampler; `None` means `10/λ_1`.
    pub burn_in_m: Option<f64>,
    /// Operator-sampler substeps per observation spacing.
    pub inner_refinement: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            method: SimMethod::ExactGaussian,
            burn_in_m: None,
            inner_refinement: 4,
        }
    }
}

impl SimConfig {
    pub fn resolved_burn_in(&self, model: &FouModel) -> Result<f64> {
        let lam1 = model.roots()[0].value;
        let floor = 5.0 / lam1;
        let m = self.burn_in_m.unwrap_or(10.0 / lam1);
        if !(m >= floor) {
            return Err(FouError::InvalidParameter(format!(
                "burn-in {m} is below the floor 5/lambda_1 = {floor}"
            )));
        }
        Ok(m)
    }
}

/// fGn autocovariance `(σ²Δ^{2H}/2)(|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H})`.
pub fn fgn_acvf(hurst: HurstParam, sigma: f64, delta: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst.value();
    let k = k as f64;
    let core = (k + 1.0).powf(h2) + (k - 1.0).abs().powf(h2) - 2.0 * k.powf(h2);
    0.5 * sigma * sigma * delta.powf(h2) * core
}

enum Factor {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky(Vec<f64>),
}

/// Reusable exact sampler for a stationary Gaussian vector of length `n`.
pub struct ExactSampler {
    n: usize,
    factor: Factor,
}

const CHOLESKY_LIMIT: usize = 4096;

impl ExactSampler {
    /// `acvf(len)` must return the autocovariance at lags `0..len`.
    pub fn from_acvf<F>(n: usize, acvf: F) -> Result<Self>
    where
        F: Fn(usize) -> Result<Vec<f64>>,
    {
        if n < 2 {
            return Err(FouError::InvalidParameter(format!("need n >= 2, got {n}")));
        }
        let mut m = (2 * (n - 1)).next_power_of_two();
        let mut min_eig = 0.0;
        for _ in 0..3 {
            let row = acvf(m / 2 + 1)?;
            match circulant_eigenvalues(&row, m) {
                Ok(eig) => {
                    let fft = FftPlanner::new().plan_fft_forward(m);
                    let sqrt_eig = eig.iter().map(|&l| (l / m as f64).sqrt()).collect();
                    return Ok(Self { n, factor: Factor::Circulant { sqrt_eig, fft } });
                }
                Err(e) => min_eig = e,
            }
            m *= 2;
        }
        if n <= CHOLESKY_LIMIT {
            let mut l = toeplitz(&acvf(n)?);
            cholesky(&mut l, n)?;
            return Ok(Self { n, factor: Factor::Cholesky(l) });
        }
        Err(FouError::NegativeEmbedding { min_eigenvalue: min_eig })
    }

    pub fn for_model(model: &FouModel, n: usize, horizon: f64) -> Result<Self> {
        let delta = horizon / n as f64;
        Self::from_acvf(n, |len| {
            let lags: Vec<f64> = (0..len).map(|k| k as f64 * delta).collect();
            model.acvf_lags(&lags)
        })
    }

    pub fn for_fgn(hurst: HurstParam, sigma: f64, n: usize, delta: f64) -> Result<Self> {
        Self::from_acvf(n, |len| {
            Ok((0..len).map(|k| fgn_acvf(hurst, sigma, delta, k)).collect())
        })
    }

    pub fn uses_cholesky(&self) -> bool {
        matches!(self.factor, Factor::Cholesky(_))
    }

    pub fn sample(&self, rng: &mut FouRng) -> Vec<f64> {
        match &self.factor {
            Factor::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf.iter().take(self.n).map(|c| c.re).collect()
            }
            Factor::Cholesky(l) => {
                let z: Vec<f64> = (0..self.n).map(|_| StandardNormal.sample(rng)).collect();
                (0..self.n)
                    .map(|i| (0..=i).map(|k| l[i * self.n + k] * z[k]).sum())
                    .collect()
            }
        }
    }
}

/// Eigenvalues of the circulant with first row
/// `[c_0, ..., c_{m/2}, c_{m/2-1}, ..., c_1]`. Small negative values from
/// rounding are set to zero; anything larger returns the minimum as error.
fn circulant_eigenvalues(row: &[f64], m: usize) -> std::result::Result<Vec<f64>, f64> {
    let half = m / 2;
    let mut buf: Vec<Complex<f64>> = (0..m)
        .map(|k| {
            let lag = if k <= half { k } else { m - k };
            Complex::new(row[lag], 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let eig: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let max = eig.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * max {
        return Err(min);
    }
    Ok(eig.into_iter().map(|l| l.max(0.0)).collect())
}

/// `n` fGn increments `B_H(iΔ) - B_H((i-1)Δ)` scaled by `σ`.
pub fn sample_fgn(hurst: HurstParam, sigma: f64, n: usize, delta: f64, seed: u64) -> Result<Vec<f64>> {
    let sampler = ExactSampler::for_fgn(hurst, sigma, n, delta)?;
    Ok(sampler.sample(&mut stream(seed, 0)))
}

/// Exact stationary sample of `model` at `iT/n`, `i = 1..n`.
pub fn sample_fou_exact(model: &FouModel, n: usize, horizon: f64, seed: u64) -> Result<SamplePath> {
    let sampler = ExactSampler::for_model(model, n, horizon)?;
    SamplePath::new(sampler.sample(&mut stream(seed, 0)), horizon)
}

/// Approximate sample from the operator representation.
///
/// The driving fBm is simulated on `[-M, T]` at step `δ = Δ/r`. For each
/// distinct rate the integrals `I_h(t) = ∫ e^{-λ(t-s)} (t-s)^h/h! dy(s)`,
/// `h < p_i`, advance by the exact shift identity plus a new-increment term
/// that treats `y` as linear on each substep.
pub fn sample_fou_operator_path(
    model: &FouModel,
    n: usize,
    horizon: f64,
    cfg: &SimConfig,
    seed: u64,
) -> Result<SamplePath> {
    OperatorSampler::new(model, n, horizon, cfg)?.sample(&mut stream(seed, 0))
}

struct RootKernel {
    decay: f64,
    shift: Vec<f64>,
    weights: Vec<f64>,
    coef: Vec<f64>,
}

/// Reusable operator-path sampler (the fGn factorization is built once).
pub struct OperatorSampler {
    n: usize,
    horizon: f64,
    refinement: usize,
    burn_steps: usize,
    kernels: Vec<RootKernel>,
    noise: ExactSampler,
}

impl OperatorSampler {
    pub fn new(model: &FouModel, n: usize, horizon: f64, cfg: &SimConfig) -> Result<Self> {
        if cfg.inner_refinement == 0 {
            return Err(FouError::InvalidParameter("inner_refinement must be >= 1".into()));
        }
        if n < 2 {
            return Err(FouError::InvalidParameter(format!("need n >= 2, got {n}")));
        }
        let burn = cfg.resolved_burn_in(model)?;
        let r = cfg.inner_refinement;
        let step = horizon / n as f64 / r as f64;
        let burn_steps = (burn / step).ceil() as usize;
        let noise = ExactSampler::for_fgn(model.hurst(), model.sigma(), burn_steps + n * r, step)?;
        let kernels = model
            .roots()
            .iter()
            .zip(model.kernel_coefficients())
            .map(|(root, coef)| {
                let m = root.mult as usize;
                let lam = root.value;
                let mut shift = vec![1.0; m];
                for k in 1..m {
                    shift[k] = shift[k - 1] * step / k as f64;
                }
                RootKernel {
                    decay: (-lam * step).exp(),
                    shift,
                    weights: (0..m).map(|h| increment_weight(lam, step, h)).collect(),
                    coef,
                }
            })
            .collect();
        Ok(Self { n, horizon, refinement: r, burn_steps, kernels, noise })
    }

    /// Number of fGn substeps consumed per path (burn-in included).
    pub fn noise_len(&self) -> usize {
        self.burn_steps + self.n * self.refinement
    }

    pub fn sample(&self, rng: &mut FouRng) -> Result<SamplePath> {
        self.run(&self.noise.sample(rng))
    }

    /// Runs the recursion on given fGn increments; only the last
    /// `noise_len()` of them are used.
    pub fn run(&self, noise: &[f64]) -> Result<SamplePath> {
        let need = self.noise_len();
        if noise.len() < need {
            return Err(FouError::InvalidParameter(format!(
                "need {need} increments, got {}",
                noise.len()
            )));
        }
        let noise = &noise[noise.len() - need..];
        let mut integrals: Vec<Vec<f64>> =
            self.kernels.iter().map(|k| vec![0.0; k.coef.len()]).collect();
        let mut next = Vec::new();
        let mut out = Vec::with_capacity(self.n);
        for (k, dy) in noise.iter().enumerate() {
            for (kern, state) in self.kernels.iter().zip(integrals.iter_mut()) {
                let m = state.len();
                next.clear();
                for h in 0..m {
                    let mut acc = 0.0;
                    for j in 0..=h {
                        acc += kern.shift[j] * state[h - j];
                    }
                    next.push(kern.decay * acc + kern.weights[h] * dy);
                }
                state.copy_from_slice(&next);
            }
            let done = k + 1;
            if done > self.burn_steps && (done - self.burn_steps).is_multiple_of(self.refinement) {
                let x: f64 = self
                    .kernels
                    .iter()
                    .zip(&integrals)
                    .map(|(kern, st)| kern.coef.iter().zip(st).map(|(c, i)| c * i).sum::<f64>())
                    .sum();
                out.push(x);
            }
        }
        SamplePath::new(out, self.horizon)
    }
}

/// `(1/δ) ∫_0^δ e^{-λu} u^h / h! du`.
fn increment_weight(lam: f64, step: f64, h: usize) -> f64 {
    let x = lam * step;
    // Regularized lower incomplete gamma P(h+1, x).
    let p = if x < 1.0 {
        let mut term = (-x).exp();
        for k in 1..=h + 1 {
            term *= x / k as f64;
        }
        let mut sum = term;
        let mut k = h + 1;
        loop {
            k += 1;
            term *= x / k as f64;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=h {
            term *= x / k as f64;
            sum += term;
        }
        1.0 - (-x).exp() * sum
    };
    p / (step * lam.powi(h as i32 + 1))
}
