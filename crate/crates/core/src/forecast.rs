//! One-step Gaussian prediction, prediction-quality measures, likelihood/AIC
//! and the choice of the horizon `T` for an observed series.

use crate::error::{FouError, Result};
use crate::estimate::{fit_pipeline, FilterSpec, Nuisance, WhittleConfig};
use crate::model::FouModel;
use crate::simulate::SamplePath;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// One-step predictions and their variances from Durbin-Levinson.
#[derive(Debug, Clone, PartialEq)]
pub struct Innovations {
    /// `pred[k] = E[X_k | X_0..X_{k-1}]`.
    pub pred: Vec<f64>,
    /// Conditional variance of `X_k` given the past.
    pub var: Vec<f64>,
}

/// Durbin-Levinson recursion on autocovariances `gamma[0..n]` for data `x`.
pub fn durbin_levinson(gamma: &[f64], x: &[f64]) -> Result<Innovations> {
    let n = x.len();
    if gamma.len() < n {
        return Err(FouError::InvalidParameter(format!(
            "need {n} autocovariances, got {}",
            gamma.len()
        )));
    }
    let mut pred = vec![0.0; n];
    let mut var = vec![0.0; n];
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    let mut v = gamma[0];
    if !(v > 0.0) {
        return Err(FouError::NotPositiveDefinite { index: 0, value: v });
    }
    var[0] = v;
    for k in 1..n {
        // phi holds φ_{k-1,1..k-1}; build φ_{k,1..k}.
        let mut num = gamma[k];
        for (j, p) in phi.iter().enumerate() {
            num -= p * gamma[k - 1 - j];
        }
        let refl = num / v;
        prev.clear();
        prev.extend_from_slice(&phi);
        for j in 0..prev.len() {
            phi[j] = prev[j] - refl * prev[prev.len() - 1 - j];
        }
        phi.push(refl);
        v *= 1.0 - refl * refl;
        if !(v > 0.0) || !v.is_finite() {
            return Err(FouError::NotPositiveDefinite { index: k, value: v });
        }
        var[k] = v;
        pred[k] = phi.iter().enumerate().map(|(j, p)| p * x[k - 1 - j]).sum();
    }
    Ok(Innovations { pred, var })
}

fn model_gamma(model: &FouModel, n: usize, delta: f64) -> Result<Vec<f64>> {
    let lags: Vec<f64> = (0..n).map(|k| k as f64 * delta).collect();
    model.acvf_lags(&lags)
}

/// Predictions of the last `m` values of `history`, each from all earlier
/// values, with the model parameters held fixed.
pub fn predict_one_step(model: &FouModel, history: &SamplePath, m: usize) -> Result<Vec<f64>> {
    let n = history.n();
    if m == 0 || m >= n {
        return Err(FouError::InvalidParameter(format!(
            "holdout size {m} must lie in 1..{n}"
        )));
    }
    let gamma = model_gamma(model, n, history.delta())?;
    let inn = durbin_levinson(&gamma, history.values())?;
    Ok(inn.pred[n - m..].to_vec())
}

/// As [`predict_one_step`], but the model for target `k` comes from `refit`
/// applied to the observations before `k` (on the horizon `kΔ`).
pub fn predict_one_step_refit<F>(history: &SamplePath, m: usize, refit: F) -> Result<Vec<f64>>
where
    F: Fn(&SamplePath) -> Result<FouModel> + Sync,
{
    let n = history.n();
    if m == 0 || m >= n - 1 {
        return Err(FouError::InvalidParameter(format!(
            "holdout size {m} must lie in 1..{}",
            n - 1
        )));
    }
    (n - m..n)
        .into_par_iter()
        .map(|k| {
            let past = history.prefix(k)?;
            let model = refit(&past)?;
            let gamma = model_gamma(&model, k + 1, history.delta())?;
            let mut x = past.values().to_vec();
            x.push(0.0);
            Ok(durbin_levinson(&gamma, &x)?.pred[k])
        })
        .collect()
}

/// Held-out observations with their predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRun {
    observed: Vec<f64>,
    predicted: Vec<f64>,
}

impl PredictionRun {
    pub fn new(observed: Vec<f64>, predicted: Vec<f64>) -> Result<Self> {
        if observed.len() != predicted.len() || observed.len() < 2 {
            return Err(FouError::InvalidParameter(format!(
                "need equal lengths >= 2, got {} and {}",
                observed.len(),
                predicted.len()
            )));
        }
        Ok(Self { observed, predicted })
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    pub fn m(&self) -> usize {
        self.observed.len()
    }

    fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.observed.iter().zip(&self.predicted).map(|(o, p)| o - p)
    }

    /// `|X̂_i - X̄| + |X_i - X̄|` with `X̄` the observed-holdout mean.
    fn spreads(&self) -> impl Iterator<Item = f64> + '_ {
        let mean = self.observed.iter().sum::<f64>() / self.m() as f64;
        self.observed
            .iter()
            .zip(&self.predicted)
            .map(move |(o, p)| (p - mean).abs() + (o - mean).abs())
    }
}

pub fn rmse(run: &PredictionRun) -> f64 {
    (run.errors().map(|e| e * e).sum::<f64>() / run.m() as f64).sqrt()
}

pub fn mae(run: &PredictionRun) -> f64 {
    run.errors().map(f64::abs).sum::<f64>() / run.m() as f64
}

/// Willmott index. A zero denominator (constant, perfectly predicted holdout)
/// gives 1.
pub fn willmott_w2(run: &PredictionRun) -> f64 {
    let num: f64 = run.errors().map(|e| e * e).sum();
    let den: f64 = run.spreads().map(|s| s * s).sum();
    if den == 0.0 {
        return if num == 0.0 { 1.0 } else { f64::NEG_INFINITY };
    }
    1.0 - num / den
}

/// Willmott L¹ index.
pub fn willmott_w1(run: &PredictionRun) -> f64 {
    let num: f64 = run.errors().map(f64::abs).sum();
    let den: f64 = run.spreads().sum();
    if den == 0.0 {
        return if num == 0.0 { 1.0 } else { f64::NEG_INFINITY };
    }
    1.0 - num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub rmse: f64,
    pub mae: f64,
    pub w1: f64,
    pub w2: f64,
}

impl Scores {
    pub fn of(run: &PredictionRun) -> Self {
        Self { rmse: rmse(run), mae: mae(run), w1: willmott_w1(run), w2: willmott_w2(run) }
    }
}

/// Which nuisance parameters were estimated, for the AIC parameter count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatedParams {
    pub hurst: bool,
    pub sigma: bool,
}

/// Exact Gaussian log-likelihood (with the `2π` constant) and
/// `AIC = 2k - 2 loglik`, `k = q + [H estimated] + [σ estimated]`.
pub fn gaussian_loglik_aic(model: &FouModel, path: &SamplePath, est: EstimatedParams) -> Result<(f64, f64)> {
    let n = path.n();
    let gamma = model_gamma(model, n, path.delta())?;
    let ll = loglik_from_acvf(&gamma, path.values())?;
    let k = model.distinct_count() + est.hurst as usize + est.sigma as usize;
    Ok((ll, 2.0 * k as f64 - 2.0 * ll))
}

pub fn loglik_from_acvf(gamma: &[f64], x: &[f64]) -> Result<f64> {
    let inn = durbin_levinson(gamma, x)?;
    Ok(-0.5
        * x.iter()
            .zip(inn.pred.iter().zip(&inn.var))
            .map(|(xi, (p, v))| (2.0 * PI * v).ln() + (xi - p).powi(2) / v)
            .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Rmse,
    Mae,
    W1,
    W2,
}

impl Criterion {
    fn score(self, s: &Scores) -> f64 {
        match self {
            Criterion::Rmse => s.rmse,
            Criterion::Mae => s.mae,
            // Larger is better for the Willmott indices.
            Criterion::W1 => -s.w1,
            Criterion::W2 => -s.w2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TSelectionConfig {
    pub t_grid: Vec<f64>,
    pub criterion: Criterion,
    pub m_holdout: usize,
}

impl TSelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty()
            || self.t_grid.iter().any(|t| !(*t > 0.0))
            || self.t_grid.windows(2).any(|w| !(w[0] < w[1]))
            || self.m_holdout < 2
        {
            return Err(FouError::InvalidParameter(format!(
                "T grid must be nonempty, positive and ascending, holdout >= 2: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub scores: Option<Scores>,
    pub lambda_hat: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TSelection {
    pub best_t: f64,
    pub rows: Vec<TRow>,
}

impl TSelection {
    /// `T,rmse,mae,w1,w2`; failed rows have empty fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "T,rmse,mae,w1,w2")?;
        for r in &self.rows {
            match &r.scores {
                Some(s) => writeln!(w, "{},{},{},{},{}", r.t, s.rmse, s.mae, s.w1, s.w2)?,
                None => writeln!(w, "{},,,,", r.t)?,
            }
        }
        Ok(())
    }
}

/// Lowest score wins; ties keep the earlier (smaller) `T`.
pub fn pick_best(rows: &[TRow], criterion: Criterion) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for r in rows {
        if let Some(s) = &r.scores {
            let v = criterion.score(s);
            if v.is_nan() {
                continue;
            }
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((r.t, v));
            }
        }
    }
    best.map(|(t, _)| t)
}

/// Settings shared by every fit in a `T` search.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub mults: Vec<u32>,
    pub filter: FilterSpec,
    pub hurst: Nuisance,
    pub sigma: Nuisance,
    pub whittle: WhittleConfig,
}

impl FitSettings {
    pub fn fit(&self, path: &SamplePath) -> Result<FouModel> {
        fit_pipeline(path, &self.mults, &self.filter, self.hurst, self.sigma, &self.whittle)?.model()
    }
}

/// Scores the last `m` one-step predictions after fitting on `[0, T]`.
pub fn score_horizon(series: &[f64], horizon: f64, m: usize, fit: &FitSettings) -> Result<(Scores, FouModel)> {
    let path = SamplePath::new(series.to_vec(), horizon)?;
    let model = fit.fit(&path)?;
    let pred = predict_one_step(&model, &path, m)?;
    let run = PredictionRun::new(series[series.len() - m..].to_vec(), pred)?;
    Ok((Scores::of(&run), model))
}

/// Places the series on `[0, T]` for each `T` in the grid, fits on the whole
/// series and scores the last `m` one-step predictions.
pub fn select_t(series: &[f64], cfg: &TSelectionConfig, fit: &FitSettings) -> Result<TSelection> {
    cfg.validate()?;
    let rows: Vec<TRow> = cfg
        .t_grid
        .par_iter()
        .map(|&t| match score_horizon(series, t, cfg.m_holdout, fit) {
            Ok((s, model)) => TRow { t, scores: Some(s), lambda_hat: Some(model.lambda_values()), error: None },
            Err(e) => TRow { t, scores: None, lambda_hat: None, error: Some(e.to_string()) },
        })
        .collect();
    let best_t = pick_best(&rows, cfg.criterion).ok_or_else(|| {
        FouError::NoConvergence { best_lambda: Vec::new(), best_value: f64::NAN }
    })?;
    Ok(TSelection { best_t, rows })
}
