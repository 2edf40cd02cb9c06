use deep_hgp::inference::{predict, run_deep_hgp, run_hgp, InferenceConfig, RegressionData, SigmaMode};
use deep_hgp::kernels::{gp_conditional_with, DesignPoints, FeatureKernel, Lengthscales};
use deep_hgp::priors::{DeepArchitecture, LengthscalePrior};
use deep_hgp::RngStream;
use rand::Rng;
use rand_distr::StandardNormal;

fn toy_data(n: usize, d: usize, sigma0_sq: f64, seed: u64, f: impl Fn(&[f64]) -> f64) -> RegressionData {
    let mut rng = RngStream::new(seed, 99).rng();
    let x = DesignPoints::uniform(n, d, &mut rng);
    let y = x.iter().map(|p| f(p) + sigma0_sq.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
    RegressionData::new(x, y, Some(sigma0_sq)).unwrap()
}

/// Batch-means Monte Carlo standard error of the mean of a correlated series.
fn batch_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let k = means.len() as f64;
    let mu = means.iter().sum::<f64>() / k;
    (means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
}

fn conjugate_check(rho: f64) {
    let data = toy_data(20, 1, 0.1, 4, |x| (2.0 * x[0]).sin() * 0.8);
    let a = vec![1.5];
    let cfg = InferenceConfig {
        rho,
        iters: 20_000,
        burn_in: 1000,
        thin: 5,
        m_features: 128,
        seed: 17,
        clip: false,
        ..InferenceConfig::default()
    };
    let chain = run_hgp(&data, &LengthscalePrior::Deterministic { values: a.clone() }, &cfg).unwrap();
    let xt = DesignPoints::from_rows(1, &[vec![-0.9], vec![-0.4], vec![0.0], vec![0.5], vec![0.95]]).unwrap();
    let draws = predict(&chain, &xt).unwrap();
    let kernel = FeatureKernel { basis: chain.bases()[0][0].clone(), lengthscales: Lengthscales::new(a).unwrap() };
    let exact = gp_conditional_with(&kernel, &data.x, &data.y, 0.1 / rho, &xt).unwrap();
    for c in 0..xt.len() {
        let col: Vec<f64> = (0..draws.rows()).map(|r| draws[(r, c)]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let se = batch_se(&col, 20);
        assert!((mean - exact.mean[c]).abs() <= 3.0 * se, "rho={rho} point {c}: {mean} vs {} (se {se})", exact.mean[c]);
    }
}

#[test]
fn conjugate_oracle_untempered() {
    conjugate_check(1.0);
}

#[test]
fn conjugate_oracle_tempered() {
    conjugate_check(0.5);
}

#[test]
fn minimal_chain_length() {
    let data = toy_data(10, 2, 0.05, 1, |x| x[0] * 0.5);
    let cfg = InferenceConfig { iters: 7, burn_in: 2, thin: 5, m_features: 16, ..InferenceConfig::default() };
    let chain = run_hgp(&data, &LengthscalePrior::Horseshoe { tau: 1.0 }, &cfg).unwrap();
    assert_eq!(chain.len(), 1);
    assert_eq!(chain.loglik_trace.len(), 7);
}

#[test]
fn shallow_deep_model_matches_hgp() {
    let data = toy_data(15, 2, 0.05, 2, |x| x[1] * 0.5);
    let cfg = InferenceConfig { iters: 60, burn_in: 20, thin: 2, m_features: 32, seed: 5, ..InferenceConfig::default() };
    let a = run_hgp(&data, &LengthscalePrior::Horseshoe { tau: 0.8 }, &cfg).unwrap();
    let b = run_deep_hgp(&data, &DeepArchitecture::shallow(2, 0.8).unwrap(), &cfg).unwrap();
    assert_eq!(a.states, b.states);
    assert_eq!(a.loglik_trace, b.loglik_trace);
}

#[test]
fn chain_round_trips_through_disk() {
    let data = toy_data(12, 2, 0.05, 3, |x| x[0] * x[1]);
    let cfg = InferenceConfig {
        iters: 40,
        burn_in: 10,
        thin: 3,
        m_features: 24,
        seed: 9,
        rho: 0.5,
        sigma_mode: SigmaMode::GammaPrior { b: 0.5 },
        ..InferenceConfig::default()
    };
    let arch = DeepArchitecture::new(vec![2, 2, 1], vec![1.0, 1.0]).unwrap();
    let chain = run_deep_hgp(&data, &arch, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    chain.save(dir.path()).unwrap();
    let back = deep_hgp::inference::Chain::load(dir.path()).unwrap();
    assert_eq!(chain, back);
    let again = run_deep_hgp(&data, &arch, &cfg).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    again.save(dir2.path()).unwrap();
    for f in ["chain.csv", "weights.csv", "trace.csv", "chain.json"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(dir2.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn predictions_are_clipped_and_empty_input_ok() {
    let data = toy_data(15, 1, 0.01, 6, |x| if x[0] > 0.0 { 1.0 } else { -1.0 });
    let cfg = InferenceConfig { iters: 50, burn_in: 10, thin: 2, m_features: 32, ..InferenceConfig::default() };
    let arch = DeepArchitecture::new(vec![1, 2, 1], vec![3.0, 3.0]).unwrap();
    let chain = run_deep_hgp(&data, &arch, &cfg).unwrap();
    let grid = DesignPoints::grid(101, 1);
    let draws = predict(&chain, &grid).unwrap();
    assert!(draws.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    let empty = predict(&chain, &DesignPoints::empty(1)).unwrap();
    assert_eq!((empty.rows(), empty.cols()), (chain.len(), 0));
    assert!(predict(&chain, &DesignPoints::grid(3, 2)).is_err());
}

#[test]
fn tempering_is_noise_inflation() {
    let data = toy_data(15, 1, 0.1, 7, |x| 0.5 * x[0]);
    let prior = LengthscalePrior::Deterministic { values: vec![1.0] };
    let base = InferenceConfig { iters: 200, burn_in: 100, thin: 1, m_features: 32, seed: 3, ..InferenceConfig::default() };
    let tempered = run_hgp(&data, &prior, &InferenceConfig { rho: 0.5, ..base.clone() }).unwrap();
    let inflated_data = RegressionData::new(data.x.clone(), data.y.clone(), Some(0.2)).unwrap();
    let inflated = run_hgp(&inflated_data, &prior, &base).unwrap();
    let gap = tempered.loglik_trace[0] - inflated.loglik_trace[0];
    for (a, b) in tempered.loglik_trace.iter().zip(&inflated.loglik_trace) {
        assert!((a - b - gap).abs() < 1e-10);
    }
}

#[test]
fn gamma_mode_requires_matching_rho() {
    let data = toy_data(10, 1, 0.1, 8, |x| x[0] * 0.1);
    let cfg = InferenceConfig { rho: 0.7, sigma_mode: SigmaMode::GammaPrior { b: 0.5 }, iters: 10, burn_in: 5, ..InferenceConfig::default() };
    assert!(run_hgp(&data, &LengthscalePrior::Horseshoe { tau: 1.0 }, &cfg).is_err());
}

#[test]
fn deep_model_learns_composition() {
    let truth = |x: &[f64]| ((1.5 * x[0]).sin() * 1.2).clamp(-1.0, 1.0);
    let data = toy_data(80, 2, 0.05, 11, truth);
    let cfg = InferenceConfig { iters: 600, burn_in: 300, thin: 5, m_features: 64, seed: 21, ..InferenceConfig::default() };
    let arch = DeepArchitecture::new(vec![2, 1, 1], vec![1.0, 1.0]).unwrap();
    let chain = run_deep_hgp(&data, &arch, &cfg).unwrap();
    let mut rng = RngStream::new(11, 500).rng();
    let xt = DesignPoints::uniform(400, 2, &mut rng);
    let mean = chain.posterior_mean(&xt).unwrap();
    let post_loss: f64 = xt.iter().zip(&mean).map(|(x, m)| (truth(x) - m).powi(2)).sum::<f64>() / 400.0;
    // the prior mean of f is 0
    let prior_loss: f64 = xt.iter().map(|x| truth(x).powi(2)).sum::<f64>() / 400.0;
    assert!(post_loss < prior_loss, "{post_loss} vs {prior_loss}");
    let tr = &chain.loglik_trace;
    assert!(tr.iter().all(|v| v.is_finite()));
    let median = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    assert!(median(&tr[..50]) <= median(&tr[250..300]));
}
