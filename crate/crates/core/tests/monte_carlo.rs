//! Exact bias and variance against Monte Carlo moments of the estimator.

use metarisk::model::sample_environment;
use metarisk::risk::{exact_bias, exact_risk, exact_variance, mc_estimates};
use metarisk::{DesignKind, Environment, EnvironmentSpec, HyperPrior};
use nalgebra::DVector;

const DRAWS: usize = 100_000;

fn env(seed: u64) -> Environment {
    let prior = HyperPrior::new(vec![0.5, -1.0, 0.25], 0.2).unwrap();
    let spec = EnvironmentSpec {
        m: 4,
        n: 6,
        k: 4,
        noise_sq_source: 0.5,
        noise_sq_novel: 0.8,
        design: DesignKind::Gaussian,
        clip_to_unit_ball: false,
    };
    sample_environment(&prior, &spec, seed).unwrap()
}

#[test]
fn bias_and_variance_match_sample_moments() {
    let env = env(11);
    let theta = env.novel_task().theta().clone();
    let errs: Vec<DVector<f64>> = mc_estimates(&env, DRAWS, 5)
        .unwrap()
        .into_iter()
        .map(|e| e - &theta)
        .collect();
    let n = DRAWS as f64;
    let mean = errs.iter().fold(DVector::zeros(theta.len()), |a, e| a + e) / n;

    let bias = exact_bias(&env).unwrap();
    for j in 0..theta.len() {
        let var_j = errs.iter().map(|e| (e[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var_j / n).sqrt();
        assert!((mean[j] - bias[j]).abs() <= 4.0 * se, "component {j}: {} vs {}", mean[j], bias[j]);
    }

    let spread: Vec<f64> = errs.iter().map(|e| (e - &mean).norm_squared()).collect();
    let trace = spread.iter().sum::<f64>() / (n - 1.0);
    let sd = (spread.iter().map(|q| (q - trace).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let (vn, vs) = exact_variance(&env).unwrap();
    assert!((trace - (vn + vs)).abs() <= 4.0 * sd / n.sqrt(), "{trace} vs {}", vn + vs);

    let losses: Vec<f64> = errs.iter().map(|e| e.norm_squared()).collect();
    let lm = losses.iter().sum::<f64>() / n;
    let lsd = (losses.iter().map(|l| (l - lm).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let total = exact_risk(&env).unwrap().total;
    assert!((lm - total).abs() <= 4.0 * lsd / n.sqrt(), "{lm} vs {total}");
}
