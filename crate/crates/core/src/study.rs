//! Seeded Monte Carlo studies of the estimators over a grid of `(T, n)`.

use crate::error::{FouError, Result};
use crate::estimate::{fit_pipeline, FilterSpec, Nuisance, WhittleConfig};
use crate::model::FouModel;
use crate::rng::stream;
use crate::simulate::{ExactSampler, SamplePath};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McStudyConfig {
    pub model: FouModel,
    #[serde(rename = "T_values", alias = "t_values", default)]
    pub t_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub m: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// When set, each `n` is paired with `T = n^(1-α)` and `T_values` is ignored.
    #[serde(default)]
    pub rate_exponent_alpha: Option<f64>,
    #[serde(default = "FilterSpec::daubechies2")]
    pub filter: FilterSpec,
    #[serde(default)]
    pub whittle: WhittleConfig,
}

impl McStudyConfig {
    pub fn new(model: FouModel, t_values: Vec<f64>, n_values: Vec<usize>, m: usize, master_seed: u64) -> Self {
        Self {
            model,
            t_values,
            n_values,
            m,
            master_seed,
            rate_exponent_alpha: None,
            filter: FilterSpec::daubechies2(),
            whittle: WhittleConfig::default(),
        }
    }

    /// Hard errors for invalid settings, warnings for legal but doubtful ones.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.m == 0 {
            return Err(FouError::InvalidParameter("replications m must be >= 1".into()));
        }
        if self.n_values.is_empty() || self.n_values.iter().any(|&n| n < 16) {
            return Err(FouError::InvalidParameter(format!(
                "n_values must be nonempty with every n >= 16: {:?}",
                self.n_values
            )));
        }
        match self.rate_exponent_alpha {
            Some(a) => {
                if !(a > 0.0 && a < 1.0) {
                    return Err(FouError::InvalidParameter(format!("rate exponent {a} must lie in (0, 1)")));
                }
                let h = self.model.hurst().value();
                if h > 0.5 && h < 5.0 / 6.0 {
                    let upper = (1.0 / (2.0 * (2.0 * h - 1.0))).min(1.0);
                    if !(a > 0.75 && a < upper) {
                        warnings.push(format!(
                            "rate exponent {a} is outside ({}, {upper}) required for H = {h}",
                            0.75
                        ));
                    }
                } else {
                    warnings.push(format!("no rate window is known for H = {h}; using alpha = {a} unchecked"));
                }
                if !self.t_values.is_empty() {
                    warnings.push("T_values is ignored when rate_exponent_alpha is set".into());
                }
            }
            None => {
                if self.t_values.is_empty() || self.t_values.iter().any(|t| !(*t > 0.0)) {
                    return Err(FouError::InvalidParameter(format!(
                        "T_values must be nonempty and positive: {:?}",
                        self.t_values
                    )));
                }
            }
        }
        if self.m == 1 {
            warnings.push("m = 1: standard deviations are not defined and are left empty".into());
        }
        self.whittle.validate()?;
        Ok(warnings)
    }

    /// The `(T, n)` cells in output order.
    pub fn cells(&self) -> Vec<(f64, usize)> {
        match self.rate_exponent_alpha {
            Some(a) => self.n_values.iter().map(|&n| ((n as f64).powf(1.0 - a), n)).collect(),
            None => self
                .t_values
                .iter()
                .flat_map(|&t| self.n_values.iter().map(move |&n| (t, n)))
                .collect(),
        }
    }
}

/// Sample mean and standard deviation (`n - 1` denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: Option<f64>,
}

impl Summary {
    pub fn of(x: &[f64]) -> Option<Self> {
        if x.is_empty() {
            return None;
        }
        let k = x.len() as f64;
        let mean = x.iter().sum::<f64>() / k;
        let sd = (x.len() > 1).then(|| (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt());
        Some(Self { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(rename = "T")]
    pub t: f64,
    pub n: usize,
    pub completed: usize,
    pub failed: usize,
    pub h: Option<Summary>,
    pub sigma: Option<Summary>,
    /// One entry per distinct rate.
    pub lambda: Vec<Option<Summary>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub rows: Vec<CellResult>,
    pub warnings: Vec<String>,
}

/// Estimates from one replicate: `(Ĥ, σ̂, λ̂)`.
pub type Replicate = (f64, f64, Vec<f64>);

fn replicate(cfg: &McStudyConfig, sampler: &ExactSampler, t: f64, cell: u64, rep: u64) -> Result<Replicate> {
    let mut rng = stream(cfg.master_seed, (cell << 32) | rep);
    let path = SamplePath::new(sampler.sample(&mut rng), t)?;
    let r = fit_pipeline(
        &path,
        &cfg.model.multiplicities(),
        &cfg.filter,
        Nuisance::Estimate,
        Nuisance::Estimate,
        &cfg.whittle,
    )?;
    Ok((r.h_hat, r.sigma_hat, r.lambda_hat))
}

/// Runs all cells. Replicate `r` of cell `c` draws from substream
/// `(c << 32) | r` of `master_seed`, so results do not depend on scheduling.
pub fn run_study(cfg: &McStudyConfig) -> Result<StudyResult> {
    let mut warnings = cfg.validate()?;
    let q = cfg.model.distinct_count();
    let mut rows = Vec::new();
    for (c, (t, n)) in cfg.cells().into_iter().enumerate() {
        let sampler = ExactSampler::for_model(&cfg.model, n, t)?;
        let reps: Vec<Result<Replicate>> = (0..cfg.m as u64)
            .into_par_iter()
            .map(|r| replicate(cfg, &sampler, t, c as u64, r))
            .collect();
        let ok: Vec<&Replicate> = reps.iter().filter_map(|r| r.as_ref().ok()).collect();
        let failed = reps.len() - ok.len();
        if let Some(Err(e)) = reps.iter().find(|r| r.is_err()) {
            warnings.push(format!("T = {t}, n = {n}: {failed} replicate(s) failed, first error: {e}"));
        }
        let col = |f: &dyn Fn(&Replicate) -> f64| Summary::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        rows.push(CellResult {
            t,
            n,
            completed: ok.len(),
            failed,
            h: col(&|r| r.0),
            sigma: col(&|r| r.1),
            lambda: (0..q).map(|i| col(&|r| r.2[i])).collect(),
        });
    }
    Ok(StudyResult { rows, warnings })
}

impl StudyResult {
    /// `T,n,completed,failed,H_mean,H_sd,sigma_mean,sigma_sd,lambda1_mean,lambda1_sd,...`
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let q = self.rows.first().map_or(0, |r| r.lambda.len());
        write!(w, "T,n,completed,failed,H_mean,H_sd,sigma_mean,sigma_sd")?;
        for i in 1..=q {
            write!(w, ",lambda{i}_mean,lambda{i}_sd")?;
        }
        writeln!(w)?;
        let cell = |s: &Option<Summary>| match s {
            Some(s) => format!("{},{}", s.mean, s.sd.map(|v| v.to_string()).unwrap_or_default()),
            None => ",".into(),
        };
        for r in &self.rows {
            write!(w, "{},{},{},{},{},{}", r.t, r.n, r.completed, r.failed, cell(&r.h), cell(&r.sigma))?;
            for l in &r.lambda {
                write!(w, ",{}", cell(l))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
