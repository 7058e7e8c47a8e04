use crate::error::{CliError, CliResult};
use crate::settings::*;
use crate::{
    AcvfArgs, Cli, Command, Common, CriterionArg, FitFlags, ForecastArgs, McStudyArgs, MethodArg,
    PreprocessArg, SimulateArgs, SpectrumArgs,
};
use foukit::estimate::{asymptotic_lambda_cov, fit_pipeline, FitReport, Nuisance, WeightSpec};
use foukit::forecast::{
    gaussian_loglik_aic, predict_one_step, predict_one_step_refit, select_t, Criterion,
    EstimatedParams, FitSettings, PredictionRun, Scores, TSelection, TSelectionConfig,
};
use foukit::series::{Preprocess, SeriesFile};
use foukit::simulate::{sample_fou_exact, sample_fou_operator_path, SamplePath, SimConfig, SimMethod};
use foukit::study::{run_study, McStudyConfig};
use foukit::{FouError, FouModel};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

pub fn run(cli: &Cli) -> CliResult<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate(a) => simulate(c, a),
        Command::Fit(a) => fit(c, &a.fit),
        Command::McStudy(a) => mc_study(c, a),
        Command::Forecast(a) => forecast(c, a),
        Command::Acvf(a) => acvf(c, a),
        Command::Spectrum(a) => spectrum(c, a),
    }
}

/// Prints the resolved settings to stderr.
fn echo<T: Serialize>(command: &str, resolved: &T) {
    let doc = serde_json::json!({ "command": command, "resolved": resolved });
    eprintln!("{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
}

/// Writes the whole output at once, so failures leave no partial file.
fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require<T>(v: Option<T>, what: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("missing {what}")))
}

fn simulate(c: &Common, a: &SimulateArgs) -> CliResult<()> {
    let mut s: SimulateSettings = load_config(c.config.as_deref())?;
    if let Some(p) = &a.model {
        s.model = Some(read_model(p)?);
    }
    s.n = a.n.unwrap_or(s.n);
    s.horizon = a.horizon.or(s.horizon);
    s.seed = c.seed.unwrap_or(s.seed);
    if let Some(m) = a.method {
        s.method = match m {
            MethodArg::Exact => SimMethod::ExactGaussian,
            MethodArg::Operator => SimMethod::OperatorPath,
        };
    }
    s.burn_in_m = a.burn_in.or(s.burn_in_m);
    s.inner_refinement = a.inner_refinement.unwrap_or(s.inner_refinement);
    echo("simulate", &s);

    let model = require(s.model.as_ref(), "--model")?;
    let horizon = require(s.horizon, "--horizon")?;
    let cfg = SimConfig { seed: s.seed, method: s.method, burn_in_m: s.burn_in_m, inner_refinement: s.inner_refinement };
    let path = match s.method {
        SimMethod::ExactGaussian => sample_fou_exact(model, s.n, horizon, s.seed)?,
        SimMethod::OperatorPath => sample_fou_operator_path(model, s.n, horizon, &cfg, s.seed)?,
    };
    let mut buf = Vec::new();
    path.write_csv(&mut buf)?;
    emit(c.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn apply_fit_flags(doc: &mut FitSettingsDoc, f: &FitFlags) -> CliResult<()> {
    if let Some(p) = &f.series {
        doc.series = Some(p.clone());
    }
    doc.horizon = f.horizon.or(doc.horizon);
    if let Some(s) = &f.structure {
        doc.structure = parse_list(s, "structure")?;
    }
    if let Some(name) = &f.filter {
        doc.filter = read_filter(name)?;
    }
    if let Some(p) = &f.whittle {
        doc.whittle = read_json(p, "Whittle settings")?;
    }
    if f.estimate_sigma {
        doc.sigma = None;
    }
    doc.sigma = f.sigma.or(doc.sigma);
    doc.hurst = f.hurst.or(doc.hurst);
    if let Some(p) = f.preprocess {
        doc.preprocess = match p {
            PreprocessArg::None => Preprocess::None,
            PreprocessArg::Demean => Preprocess::Demean,
            PreprocessArg::Detrend => Preprocess::Detrend,
        };
    }
    Ok(())
}

fn load_series(doc: &FitSettingsDoc) -> CliResult<Vec<f64>> {
    let path = require(doc.series.clone(), "--series")?;
    let file = SeriesFile { path, format: doc.format, preprocess: doc.preprocess };
    Ok(file.load()?)
}

fn fit_settings(doc: &FitSettingsDoc) -> FitSettings {
    FitSettings {
        mults: doc.structure.clone(),
        filter: doc.filter.clone(),
        hurst: doc.hurst.map_or(Nuisance::Estimate, Nuisance::Fixed),
        sigma: doc.sigma.map_or(Nuisance::Estimate, Nuisance::Fixed),
        whittle: doc.whittle.clone(),
    }
}

#[derive(Serialize)]
struct FitOutput {
    #[serde(flatten)]
    report: FitReport,
    loglik: Option<f64>,
    aic: Option<f64>,
}

fn fit(c: &Common, f: &FitFlags) -> CliResult<()> {
    let mut doc: FitSettingsDoc = load_config(c.config.as_deref())?;
    apply_fit_flags(&mut doc, f)?;
    echo("fit", &doc);
    let horizon = require(doc.horizon, "--horizon")?;
    let values = load_series(&doc)?;
    let path = SamplePath::new(values, horizon)?;
    let fs = fit_settings(&doc);
    let mut report = fit_pipeline(&path, &fs.mults, &fs.filter, fs.hurst, fs.sigma, &fs.whittle)?;
    let p: u32 = fs.mults.iter().sum();
    let weight = fs.whittle.weight.unwrap_or_else(|| WeightSpec::for_order(p));
    match asymptotic_lambda_cov(&report.model()?, &weight, horizon) {
        Ok(cov) => report.asymptotic_cov = Some(cov),
        Err(e) => eprintln!("warning: asymptotic covariance unavailable: {e}"),
    }
    let est = EstimatedParams { hurst: doc.hurst.is_none(), sigma: doc.sigma.is_none() };
    let (loglik, aic) = match gaussian_loglik_aic(&report.model()?, &path, est) {
        Ok((l, a)) => (Some(l), Some(a)),
        Err(e) => {
            eprintln!("warning: likelihood unavailable: {e}");
            (None, None)
        }
    };
    let out = FitOutput { report, loglik, aic };
    let text = serde_json::to_string_pretty(&out).map_err(|e| CliError::Data(e.to_string()))?;
    emit(c.out.as_deref(), &(text + "\n"))
}

fn mc_study(c: &Common, a: &McStudyArgs) -> CliResult<()> {
    let path = require(c.config.as_deref(), "--config with the study settings")?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: McStudyConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    cfg.master_seed = c.seed.unwrap_or(cfg.master_seed);
    cfg.m = a.replications.unwrap_or(cfg.m);
    echo("mc-study", &cfg);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let result = run_study(&cfg)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    emit(c.out.as_deref(), &String::from_utf8_lossy(&buf))
}

#[derive(Serialize)]
struct ForecastOutput {
    #[serde(rename = "T")]
    horizon: f64,
    m: usize,
    scores: Scores,
    model: Option<FouModel>,
    selection: Option<TSelection>,
}

fn forecast(c: &Common, a: &ForecastArgs) -> CliResult<()> {
    let mut s: ForecastSettings = load_config(c.config.as_deref())?;
    apply_fit_flags(&mut s.fit, &a.fit)?;
    if let Some(p) = &a.model {
        s.model = Some(p.clone());
    }
    s.m_holdout = a.m.unwrap_or(s.m_holdout);
    if let Some(g) = &a.select_t {
        s.select_t = Some(parse_list(g, "T grid")?);
    }
    if let Some(k) = a.criterion {
        s.criterion = match k {
            CriterionArg::Rmse => Criterion::Rmse,
            CriterionArg::Mae => Criterion::Mae,
            CriterionArg::W1 => Criterion::W1,
            CriterionArg::W2 => Criterion::W2,
        };
    }
    s.refit |= a.refit;
    echo("forecast", &s);

    let values = load_series(&s.fit)?;
    let m = s.m_holdout;
    let fs = fit_settings(&s.fit);
    let (horizon, selection) = match &s.select_t {
        Some(grid) => {
            let cfg = TSelectionConfig { t_grid: grid.clone(), criterion: s.criterion, m_holdout: m };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let sel = select_t(&values, &cfg, &fs)?;
            (sel.best_t, Some(sel))
        }
        None => (require(s.fit.horizon, "--horizon or --select-t")?, None),
    };
    let path = SamplePath::new(values.clone(), horizon)?;
    let (predicted, model) = if s.refit {
        (predict_one_step_refit(&path, m, |p| fs.fit(p))?, None)
    } else {
        let model = match (&s.model, selection.is_some()) {
            (Some(p), false) => read_model(p)?,
            (_, true) => fs.fit(&path)?,
            (None, false) => return Err(CliError::Usage("missing --model (or use --select-t / --refit)".into())),
        };
        (predict_one_step(&model, &path, m)?, Some(model))
    };
    let observed = values[values.len() - m..].to_vec();
    let run = PredictionRun::new(observed.clone(), predicted.clone())?;
    let scores = Scores::of(&run);

    if let (Some(table), Some(sel)) = (&a.table, &selection) {
        let text = if table.extension().is_some_and(|e| e == "json") {
            serde_json::to_string_pretty(sel).map_err(|e| CliError::Data(e.to_string()))? + "\n"
        } else {
            let mut buf = Vec::new();
            sel.write_csv(&mut buf)?;
            String::from_utf8_lossy(&buf).into_owned()
        };
        emit(Some(table), &text)?;
    }
    if let Some(out) = &c.out {
        let n = values.len();
        let mut csv = String::from("index,t,observed,predicted\n");
        for (j, (o, p)) in observed.iter().zip(&predicted).enumerate() {
            let i = n - m + j;
            let _ = writeln!(csv, "{i},{},{o},{p}", path.time(i));
        }
        emit(Some(out), &csv)?;
    }
    let out = ForecastOutput { horizon, m, scores, model, selection };
    println!("{}", serde_json::to_string_pretty(&out).map_err(|e| CliError::Data(e.to_string()))?);
    Ok(())
}

fn grid(list: &Option<Vec<f64>>, lo: f64, max: Option<f64>, step: Option<f64>, dmax: f64, dstep: f64) -> CliResult<Vec<f64>> {
    if let Some(l) = list {
        return Ok(l.clone());
    }
    let max = max.unwrap_or(dmax);
    let step = step.unwrap_or(dstep);
    if !(step > 0.0) || !(max >= lo) {
        return Err(CliError::Usage(format!("grid needs step > 0 and max >= {lo}")));
    }
    let k = ((max - lo) / step + 1e-9).floor() as usize;
    Ok((0..=k).map(|i| lo + i as f64 * step).collect())
}

fn acvf(c: &Common, a: &AcvfArgs) -> CliResult<()> {
    let mut s: AcvfSettings = load_config(c.config.as_deref())?;
    if let Some(p) = &a.model {
        s.model = Some(read_model(p)?);
    }
    if let Some(l) = &a.lags {
        s.lags = Some(parse_list(l, "lag")?);
    }
    s.max_lag = a.max_lag.or(s.max_lag);
    s.step = a.step.or(s.step);
    if let Some(p) = &a.series {
        s.series = Some(p.clone());
    }
    s.horizon = a.horizon.or(s.horizon);
    echo("acvf", &s);

    let model = require(s.model.as_ref(), "--model")?;
    let lags = grid(&s.lags, 0.0, s.max_lag, s.step, 10.0, 0.1)?;
    let values = model.acvf_lags(&lags)?;
    let empirical = match &s.series {
        Some(p) => {
            let x = SeriesFile::new(p.clone()).load()?;
            let horizon = require(s.horizon, "--horizon for the series")?;
            Some(empirical_acvf(&x, horizon / x.len() as f64, &lags))
        }
        None => None,
    };
    let mut csv = String::from(if empirical.is_some() { "t,acvf,empirical\n" } else { "t,acvf\n" });
    for (i, (t, v)) in lags.iter().zip(&values).enumerate() {
        let _ = write!(csv, "{t},{v}");
        if let Some(e) = &empirical {
            let _ = write!(csv, ",{}", e[i].map(|v| v.to_string()).unwrap_or_default());
        }
        csv.push('\n');
    }
    emit(c.out.as_deref(), &csv)
}

/// Sample autocovariance (divisor `n`) at lags that are multiples of `delta`.
fn empirical_acvf(x: &[f64], delta: f64, lags: &[f64]) -> Vec<Option<f64>> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    lags.iter()
        .map(|&t| {
            let k = (t.abs() / delta).round();
            if (k * delta - t.abs()).abs() > 1e-9 * delta.max(t.abs()) || k as usize >= n {
                return None;
            }
            let k = k as usize;
            Some((0..n - k).map(|i| (x[i] - mean) * (x[i + k] - mean)).sum::<f64>() / n as f64)
        })
        .collect()
}

fn spectrum(c: &Common, a: &SpectrumArgs) -> CliResult<()> {
    let mut s: SpectrumSettings = load_config(c.config.as_deref())?;
    if let Some(p) = &a.model {
        s.model = Some(read_model(p)?);
    }
    if let Some(l) = &a.freqs {
        s.freqs = Some(parse_list(l, "frequency")?);
    }
    s.max_freq = a.max_freq.or(s.max_freq);
    s.step = a.step.or(s.step);
    echo("spectrum", &s);

    let model = require(s.model.as_ref(), "--model")?;
    let max = s.max_freq.unwrap_or(10.0);
    let freqs = grid(&s.freqs, -max, Some(max), s.step, max, 0.05)?;
    let mut csv = String::from("x,density\n");
    for x in freqs {
        let d = match model.spectral_density(x) {
            Ok(v) => v,
            Err(FouError::Domain(_)) => f64::INFINITY,
            Err(e) => return Err(e.into()),
        };
        let _ = writeln!(csv, "{x},{d}");
    }
    emit(c.out.as_deref(), &csv)
}
