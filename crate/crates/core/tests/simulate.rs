use foukit::rng::stream;
use foukit::simulate::{
    sample_fgn, sample_fou_exact, sample_fou_operator_path, ExactSampler, OperatorSampler,
    SimConfig, SimMethod,
};
use foukit::{FouModel, HurstParam};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn autocov(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
}

/// Mean and standard error over independent batch statistics.
fn mean_se(stats: &[f64]) -> (f64, f64) {
    let m = mean(stats);
    let k = stats.len() as f64;
    let var = stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}

#[test]
fn brownian_increments_are_white() {
    let x = sample_fgn(HurstParam::new(0.5).unwrap(), 2.0, 100_000, 0.01, 3).unwrap();
    let r1 = autocov(&x, 1) / autocov(&x, 0);
    assert!(r1.abs() < 0.01, "lag-1 correlation {r1}");
    let v = autocov(&x, 0);
    assert!((v - 0.04).abs() < 0.04 * 0.02, "variance {v}");
}

#[test]
fn fgn_variance_and_lag_one_covariance() {
    let h = HurstParam::new(0.7).unwrap();
    let x = sample_fgn(h, 1.0, 100_000, 1.0, 5).unwrap();
    assert!((autocov(&x, 0) - 1.0).abs() < 0.02);

    let sampler = ExactSampler::for_fgn(h, 1.0, 5_000, 1.0).unwrap();
    let stats: Vec<f64> = (0..20)
        .map(|k| autocov(&sampler.sample(&mut stream(9, k)), 1))
        .collect();
    let (m, se) = mean_se(&stats);
    let want = (2f64.powf(1.4) - 2.0) / 2.0;
    assert!((m - want).abs() < 3.0 * se, "lag-1 autocovariance {m} +- {se} vs {want}");
}

#[test]
fn exact_sampler_long_path_moments() {
    let model = FouModel::repeated(0.8, 2, 1.0, 0.5).unwrap();
    let path = sample_fou_exact(&model, 100_000, 1_000.0, 17).unwrap();
    let blocks: Vec<&[f64]> = path.values().chunks(5_000).collect();
    let vars: Vec<f64> = blocks.iter().map(|b| b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64).collect();
    let means: Vec<f64> = blocks.iter().map(|b| mean(b)).collect();
    let (v, se_v) = mean_se(&vars);
    assert!((v - 0.3125).abs() < 3.0 * se_v, "variance {v} +- {se_v}");
    let (m, se_m) = mean_se(&means);
    assert!(m.abs() < 3.0 * se_m, "mean {m} +- {se_m}");
}

#[test]
fn operator_path_recovers_classical_ou_variance() {
    let model = FouModel::distinct(&[0.8], 1.0, 0.5).unwrap();
    let cfg = SimConfig { method: SimMethod::OperatorPath, ..Default::default() };
    let path = sample_fou_operator_path(&model, 40_000, 20_000.0, &cfg, 1).unwrap();
    let v = path.values().iter().map(|v| v * v).sum::<f64>() / path.n() as f64;
    assert!((v / 0.625 - 1.0).abs() < 0.05, "variance {v}");
}

#[test]
fn operator_path_matches_model_acvf() {
    let model = FouModel::distinct(&[0.3, 0.8], 1.0, 0.7).unwrap();
    let cfg = SimConfig { method: SimMethod::OperatorPath, ..Default::default() };
    let sampler = OperatorSampler::new(&model, 2_000, 2_000.0, &cfg).unwrap();
    let paths: Vec<Vec<f64>> = (0..20)
        .map(|k| sampler.sample(&mut stream(23, k)).unwrap().into_values())
        .collect();
    for lag in 0..3 {
        // Products about the known zero mean, so no centring bias.
        let stats: Vec<f64> = paths
            .iter()
            .map(|x| (0..x.len() - lag).map(|i| x[i] * x[i + lag]).sum::<f64>() / (x.len() - lag) as f64)
            .collect();
        let (m, se) = mean_se(&stats);
        let want = model.acvf(lag as f64).unwrap();
        assert!((m - want).abs() < 3.0 * se, "lag {lag}: {m} +- {se} vs {want}");
    }
}

#[test]
fn operator_path_truncation_is_negligible() {
    let model = FouModel::repeated(0.8, 2, 1.0, 0.7).unwrap();
    let short = SimConfig { method: SimMethod::OperatorPath, burn_in_m: Some(12.5), ..Default::default() };
    let long = SimConfig { burn_in_m: Some(25.0), ..short };
    let s_short = OperatorSampler::new(&model, 4_000, 400.0, &short).unwrap();
    let s_long = OperatorSampler::new(&model, 4_000, 400.0, &long).unwrap();
    // Common random numbers: the short run uses the tail of the long run's noise.
    let noise = ExactSampler::for_fgn(model.hurst(), 1.0, s_long.noise_len(), 0.025)
        .unwrap()
        .sample(&mut stream(4, 0));
    let var = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let a = var(s_short.run(&noise).unwrap().values());
    let b = var(s_long.run(&noise).unwrap().values());
    assert!((a / b - 1.0).abs() < 0.005, "{a} vs {b}");
}

#[test]
fn marginals_are_gaussian() {
    let model = FouModel::distinct(&[0.3, 0.8], 1.0, 0.3).unwrap();
    let sampler = ExactSampler::for_model(&model, 16, 8.0).unwrap();
    let xs: Vec<f64> = (0..10_000).map(|k| sampler.sample(&mut stream(31, k))[8]).collect();
    let m = mean(&xs);
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    let skew = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / xs.len() as f64 / v.powf(1.5);
    let kurt = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / xs.len() as f64 / (v * v);
    let n = xs.len() as f64;
    assert!(skew.abs() < 4.0 * (6.0 / n).sqrt(), "skewness {skew}");
    assert!((kurt - 3.0).abs() < 4.0 * (24.0 / n).sqrt(), "kurtosis {kurt}");
}

fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn exact_and_operator_samplers_agree_in_distribution() {
    let models = [
        FouModel::distinct(&[0.8], 1.0, 0.5).unwrap(),
        FouModel::distinct(&[0.8], 1.0, 0.3).unwrap(),
        FouModel::repeated(0.8, 2, 1.0, 0.7).unwrap(),
        FouModel::distinct(&[0.3, 0.8], 1.0, 0.7).unwrap(),
        FouModel::repeated(0.6, 3, 1.5, 0.4).unwrap(),
    ];
    let reps = 5_000u64;
    let crit = 1.628 * (2.0 / reps as f64).sqrt();
    let cfg = SimConfig { method: SimMethod::OperatorPath, inner_refinement: 8, ..Default::default() };
    let mut passes = 0;
    for (idx, model) in models.iter().enumerate() {
        let exact = ExactSampler::for_model(model, 8, 4.0).unwrap();
        let op = OperatorSampler::new(model, 8, 4.0, &cfg).unwrap();
        let mut a: Vec<f64> = (0..reps).map(|k| exact.sample(&mut stream(100 + idx as u64, k))[4]).collect();
        let mut b: Vec<f64> = (0..reps)
            .map(|k| op.sample(&mut stream(200 + idx as u64, k)).unwrap().values()[4])
            .collect();
        let d = ks_statistic(&mut a, &mut b);
        if d < crit {
            passes += 1;
        }
    }
    assert!(passes >= 4, "only {passes} of 5 models passed");
}

#[test]
fn sampling_does_not_depend_on_thread_count() {
    let model = FouModel::distinct(&[0.3, 0.8, 1.4], 1.0, 0.6).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_fou_exact(&model, 2_000, 100.0, 8).unwrap())
    };
    assert_eq!(run(1), run(4));
}
