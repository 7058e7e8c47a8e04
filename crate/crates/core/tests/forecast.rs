use foukit::estimate::{FilterSpec, Nuisance, WhittleConfig};
use foukit::forecast::{
    gaussian_loglik_aic, predict_one_step, select_t, Criterion, EstimatedParams, FitSettings,
    TSelectionConfig,
};
use foukit::linalg::{cholesky, solve_lower, toeplitz};
use foukit::rng::stream;
use foukit::simulate::{sample_fou_exact, ExactSampler, SamplePath};
use foukit::FouModel;
use std::f64::consts::PI;

#[test]
fn loglik_matches_cholesky_form() {
    let model = FouModel::distinct(&[0.4, 1.3], 0.8, 0.65).unwrap();
    let path = sample_fou_exact(&model, 120, 24.0, 3).unwrap();
    let n = path.n();
    let lags: Vec<f64> = (0..n).map(|k| k as f64 * path.delta()).collect();
    let mut l = toeplitz(&model.acvf_lags(&lags).unwrap());
    cholesky(&mut l, n).unwrap();
    let z = solve_lower(&l, n, path.values());
    let logdet: f64 = (0..n).map(|i| 2.0 * l[i * n + i].ln()).sum();
    let want = -0.5 * (n as f64 * (2.0 * PI).ln() + logdet + z.iter().map(|v| v * v).sum::<f64>());
    let (ll, aic) = gaussian_loglik_aic(&model, &path, EstimatedParams { hurst: true, sigma: false }).unwrap();
    assert!((ll - want).abs() <= 1e-8 * want.abs(), "{ll} vs {want}");
    assert!((aic - (6.0 - 2.0 * ll)).abs() < 1e-9);
}

#[test]
fn prediction_error_is_below_the_variance() {
    let model = FouModel::repeated(0.7, 2, 1.0, 0.4).unwrap();
    let sampler = ExactSampler::for_model(&model, 40, 20.0).unwrap();
    let mut se = 0.0;
    let trials = 1000;
    for k in 0..trials {
        let x = sampler.sample(&mut stream(41, k));
        let path = SamplePath::new(x.clone(), 20.0).unwrap();
        let p = predict_one_step(&model, &path, 1).unwrap()[0];
        se += (x[39] - p).powi(2);
    }
    let mse = se / trials as f64;
    assert!(mse <= model.acvf(0.0).unwrap(), "{mse}");
}

#[test]
fn t_selection_table_and_ties() {
    // A short deterministic sawtooth; only the table shape and tie rule are checked.
    let series: Vec<f64> = (0..60).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1).collect();
    let fit = FitSettings {
        mults: vec![1],
        filter: FilterSpec::daubechies2(),
        hurst: Nuisance::Fixed(0.5),
        sigma: Nuisance::Fixed(1.0),
        whittle: WhittleConfig::default(),
    };
    let cfg = TSelectionConfig { t_grid: vec![5.0, 10.0, 20.0], criterion: Criterion::Rmse, m_holdout: 10 };
    let sel = select_t(&series, &cfg, &fit).unwrap();
    assert_eq!(sel.rows.len(), 3);
    assert!(sel.rows.iter().all(|r| r.scores.is_some()));
    let best = sel.rows.iter().map(|r| r.scores.unwrap().rmse).fold(f64::INFINITY, f64::min);
    let first_best = sel.rows.iter().find(|r| r.scores.unwrap().rmse == best).unwrap().t;
    assert_eq!(sel.best_t, first_best);
    let mut csv = Vec::new();
    sel.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("T,rmse,mae,w1,w2\n"));
    assert_eq!(text.lines().count(), 4);
    let bad = TSelectionConfig { t_grid: vec![10.0, 5.0], ..cfg };
    assert!(select_t(&series, &bad, &fit).is_err());
}
