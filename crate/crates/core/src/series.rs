//! Loading observed series from disk.
//!
//! Two layouts are accepted: one value per line, or `time,value` CSV with an
//! optional header. Lines starting with `#` are comments.

use crate::error::{FouError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesFormat {
    SingleColumn,
    TimeValueCsv,
}

/// Removal of a mean or a least-squares line before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocess {
    None,
    #[default]
    Demean,
    Detrend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFile {
    pub path: PathBuf,
    /// `None` detects the layout from the first data line.
    pub format: Option<SeriesFormat>,
    pub preprocess: Preprocess,
}

pub const MIN_LEN: usize = 8;

impl SeriesFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into(), format: None, preprocess: Preprocess::default() }
    }

    pub fn with_preprocess(mut self, p: Preprocess) -> Self {
        self.preprocess = p;
        self
    }

    /// Raw values as stored in the file.
    pub fn read_raw(&self) -> Result<Vec<f64>> {
        let text = std::fs::read_to_string(&self.path)
            .map_err(|e| FouError::Parse(format!("{}: {e}", self.path.display())))?;
        parse_series(&text, self.format).map_err(|e| match e {
            FouError::Parse(m) => FouError::Parse(format!("{}: {m}", self.path.display())),
            other => other,
        })
    }

    /// Values after the configured preprocessing.
    pub fn load(&self) -> Result<Vec<f64>> {
        Ok(apply(self.preprocess, &self.read_raw()?))
    }
}

pub fn parse_series(text: &str, format: Option<SeriesFormat>) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    let mut format = format;
    let mut first_data = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fmt = *format.get_or_insert(if line.contains(',') {
            SeriesFormat::TimeValueCsv
        } else {
            SeriesFormat::SingleColumn
        });
        let field = match fmt {
            SeriesFormat::SingleColumn => line,
            SeriesFormat::TimeValueCsv => {
                let mut parts = line.split(',');
                parts.next();
                parts.next().ok_or_else(|| {
                    FouError::Parse(format!("line {}: expected time,value", lineno + 1))
                })?
            }
        };
        match field.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(FouError::Parse(format!("line {}: non-finite value {v}", lineno + 1)))
            }
            // A non-numeric first line is a header.
            Err(_) if first_data => {}
            Err(e) => return Err(FouError::Parse(format!("line {}: {e}", lineno + 1))),
        }
        first_data = false;
    }
    if values.len() < MIN_LEN {
        return Err(FouError::Parse(format!(
            "need at least {MIN_LEN} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn apply(p: Preprocess, x: &[f64]) -> Vec<f64> {
    match p {
        Preprocess::None => x.to_vec(),
        Preprocess::Demean => demean(x),
        Preprocess::Detrend => detrend(x),
    }
}

pub fn demean(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

/// Residuals of the least-squares line on the index `0..n`.
pub fn detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let tbar = (n - 1.0) / 2.0;
    let xbar = x.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - tbar;
        sxy += dt * (v - xbar);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    x.iter()
        .enumerate()
        .map(|(i, v)| v - xbar - slope * (i as f64 - tbar))
        .collect()
}

/// Path to a bundled fixture.
pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_layouts() {
        let x = parse_series("# c\n1\n2\n3\n4\n5\n6\n7\n8\n", None).unwrap();
        assert_eq!(x.len(), 8);
        let y = parse_series("year,level\n1,1.5\n2,2.5\n3,3\n4,4\n5,5\n6,6\n7,7\n8,8\n", None).unwrap();
        assert_eq!(y[0], 1.5);
        assert!(parse_series("1\n2\n", None).is_err());
        assert!(parse_series("1\n2\nx\n4\n5\n6\n7\n8\n9\n", None).is_err());
    }

    #[test]
    fn detrend_removes_lines() {
        let x: Vec<f64> = (0..10).map(|i| 3.0 + 0.5 * i as f64).collect();
        assert!(detrend(&x).iter().all(|v| v.abs() < 1e-12));
        assert!(demean(&[1.0, 3.0]).iter().zip([-1.0, 1.0]).all(|(a, b)| *a == b));
    }

    #[test]
    fn fixtures_load() {
        let a = SeriesFile::new(fixture_path("series_a.txt")).read_raw().unwrap();
        assert_eq!(a.len(), 197);
        assert_eq!(a[0], 17.0);
        let h = SeriesFile::new(fixture_path("lake_huron.csv")).read_raw().unwrap();
        assert_eq!(h.len(), 98);
        assert_eq!(h[0], 580.38);
    }
}
