//! Upper bounds against exact quantities on unit-ball environments, and the
//! KL closed form against a likelihood-ratio estimate.

use metarisk::fano::{gaussian_lr_kl, gaussian_lr_kl_monte_carlo};
use metarisk::matan::singular_extremes;
use metarisk::model::{bound_constants, sample_environment};
use metarisk::posterior::PosteriorPlan;
use metarisk::risk::{bias_upper_bound, exact_risk, smax_sigma_prime_bound, thm52_bound, variance_upper_bound};
use metarisk::{ConstantsMode, DesignKind, EnvironmentSpec, HyperPrior, SolvePath};

#[test]
fn upper_bounds_dominate_exact_risk() {
    for seed in 0..30u64 {
        let d = 2 + (seed as usize % 3);
        let prior = HyperPrior::new(vec![0.1; d], 0.05).unwrap();
        let spec = EnvironmentSpec {
            m: 1 + seed as usize % 6,
            n: d + seed as usize % 5,
            k: d + (seed as usize * 3) % 7,
            noise_sq_source: 0.3,
            noise_sq_novel: 0.2 + 0.1 * (seed % 4) as f64,
            design: DesignKind::Gaussian,
            clip_to_unit_ball: true,
        };
        let env = sample_environment(&prior, &spec, seed).unwrap();
        let c = bound_constants(&env, ConstantsMode::Exact).unwrap();
        let (m, n, k) = (spec.m, spec.n, spec.k);
        let risk = exact_risk(&env).unwrap();
        let var = risk.var_novel + risk.var_source;
        assert!(variance_upper_bound(&c, d, m, n, k).unwrap() >= var, "seed {seed}: variance");
        assert!(bias_upper_bound(&c, d, m, n, k).unwrap().value >= risk.bias_sq, "seed {seed}: bias");
        let plan = PosteriorPlan::new(&env, SolvePath::Canonical).unwrap();
        let smax = singular_extremes(plan.post_cov()).unwrap().s_max;
        assert!(smax_sigma_prime_bound(&c, m, n, k).unwrap().value >= smax, "seed {seed}: smax");
        assert!(thm52_bound(&c, d, m, n, k).unwrap().thm52_value >= risk.total, "seed {seed}: total");
    }
}

#[test]
fn kl_matches_log_likelihood_ratio() {
    let prior = HyperPrior::new(vec![0.0, 0.5, -0.5], 0.3).unwrap();
    let spec = EnvironmentSpec {
        m: 1,
        n: 6,
        k: 6,
        noise_sq_source: 0.7,
        noise_sq_novel: 0.7,
        design: DesignKind::Gaussian,
        clip_to_unit_ball: false,
    };
    let env = sample_environment(&prior, &spec, 4).unwrap();
    let (a, b) = (env.novel_task(), &env.source_tasks()[0]);
    let exact = gaussian_lr_kl(a, b, 0.7).unwrap();
    let (mean, se) = gaussian_lr_kl_monte_carlo(a, b, 0.7, 100_000, 9).unwrap();
    assert!((mean - exact).abs() <= 4.0 * se, "{mean} ± {se} vs {exact}");
}
