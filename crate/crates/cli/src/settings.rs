//! Per-command settings. Each is read from the `--config` JSON (if any) and
//! then overridden by explicit flags.

use crate::error::{CliError, CliResult};
use foukit::estimate::{FilterSpec, WhittleConfig};
use foukit::forecast::Criterion;
use foukit::series::{Preprocess, SeriesFormat};
use foukit::simulate::SimMethod;
use foukit::FouModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{what} {}: {e}", path.display())))
}

/// Reads a model from either a bare model document or a fit report.
pub fn read_model(path: &Path) -> CliResult<FouModel> {
    let value: serde_json::Value = read_json(path, "model")?;
    if value.get("lambda_hat").is_some() {
        let report: foukit::estimate::FitReport = serde_json::from_value(value)
            .map_err(|e| CliError::Data(format!("fit report {}: {e}", path.display())))?;
        return Ok(report.model()?);
    }
    serde_json::from_value(value).map_err(|e| CliError::Data(format!("model {}: {e}", path.display())))
}

/// `daubechies2` or a path to a JSON filter document.
pub fn read_filter(arg: &str) -> CliResult<FilterSpec> {
    if arg == "daubechies2" {
        return Ok(FilterSpec::daubechies2());
    }
    read_json(Path::new(arg), "filter")
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| CliError::Usage(format!("bad {what} entry {p:?}"))))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub model: Option<FouModel>,
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub seed: u64,
    pub method: SimMethod,
    pub burn_in_m: Option<f64>,
    pub inner_refinement: usize,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            model: None,
            n: 1000,
            horizon: None,
            seed: 0,
            method: SimMethod::ExactGaussian,
            burn_in_m: None,
            inner_refinement: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettingsDoc {
    pub series: Option<PathBuf>,
    pub format: Option<SeriesFormat>,
    pub preprocess: Preprocess,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    /// Multiplicities of the distinct rates, e.g. `[2]` or `[1, 1]`.
    pub structure: Vec<u32>,
    pub filter: FilterSpec,
    pub whittle: WhittleConfig,
    /// Fixed `σ`; `None` estimates it.
    pub sigma: Option<f64>,
    /// Fixed `H`; `None` estimates it.
    pub hurst: Option<f64>,
}

impl Default for FitSettingsDoc {
    fn default() -> Self {
        Self {
            series: None,
            format: None,
            preprocess: Preprocess::Demean,
            horizon: None,
            structure: vec![1],
            filter: FilterSpec::daubechies2(),
            whittle: WhittleConfig::default(),
            sigma: None,
            hurst: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSettings {
    /// Series, structure and fit settings, used for selection and refits.
    pub fit: FitSettingsDoc,
    pub model: Option<PathBuf>,
    pub m_holdout: usize,
    pub select_t: Option<Vec<f64>>,
    pub criterion: Criterion,
    pub refit: bool,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        Self {
            fit: FitSettingsDoc::default(),
            model: None,
            m_holdout: 10,
            select_t: None,
            criterion: Criterion::Rmse,
            refit: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcvfSettings {
    pub model: Option<FouModel>,
    pub lags: Option<Vec<f64>>,
    pub max_lag: Option<f64>,
    pub step: Option<f64>,
    /// Optional series for an empirical overlay column.
    pub series: Option<PathBuf>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSettings {
    pub model: Option<FouModel>,
    pub freqs: Option<Vec<f64>>,
    pub max_freq: Option<f64>,
    pub step: Option<f64>,
}
