//! Frequentist risk of the MAP estimator and its upper bounds.
//!
//! Task parameters are fixed and expectations run over observation noise
//! only. Writing `F`, `G`, `Σ′`, `Σ_τ` as in [`crate::posterior`],
//! `Wᵢ = XᵢᵀCᵢ⁻¹Xᵢ` and `Vᵢ = Cᵢ⁻¹Xᵢ`:
//!
//! ```text
//! bias       = Σ′ G (E[μ_τ] − θ_{M+1}),   E[μ_τ] = Σ_τ Σᵢ Wᵢ θᵢ
//! var_novel  = Tr(Σ′ F Σ′)
//! var_source = Tr(Σ′ G Cov(μ_τ) G Σ′),    Cov(μ_τ) = Σ_τ (Σᵢ σᵢ² VᵢᵀVᵢ) Σ_τ
//! risk       = ‖bias‖² + var_novel + var_source
//! ```
//!
//! # Upper bounds
//!
//! All bounds are evaluated from a [`BoundConstants`] ledger. With
//!
//! ```text
//! C = k + Mn / (n(M + κ²)s₂²/α₂ + A)
//! ```
//!
//! the largest eigenvalue of `Σ′` is at most `σ_{M+1}² / (s₂² C)`. The
//! variance bound is `κ_{M+1}² σ_{M+1}² d C⁻² D / s₂²` where
//!
//! ```text
//! D  = k + M σ_{M+1}² D₁ D₂ h / γ₂²
//! D₁ = 1 / (2Mσ_θ² n s₁² / (c_max κ_τ) + 1/κ_τ²),   c_max = σ_θ² n γ₁² + σ²_src,max
//! D₂ = 1 / (n s₁² / α₁ + 1)
//! h  = n γ₁² / (σ_θ² n γ₁² + σ²_src,min)
//! ```
//!
//! For comparison the report also carries the textbook form
//! `D_stated = k + Mn / ((n/L₁ + A₁)(Mn/L₂ + A₂))`, which omits a factor
//! `γ₂²` in its source term and can fall below the true variance.
//!
//! The squared bias is at most `d C⁻² K_bias` with
//! `K_bias = 4κ⁴ (σ²_src,max/σ²_src,min)² α₂² / s₂⁴` when every parameter
//! lies in the unit ball.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matan::factor_spd_checked;
use crate::model::{sample_observations, BoundConstants, Environment};
use crate::posterior::{PosteriorPlan, SolvePath};
use crate::rng::{derive_seed, Purpose};

/// Exact bias/variance split of the risk, with an optional Monte Carlo
/// estimate alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub bias_sq: f64,
    pub var_novel: f64,
    pub var_source: f64,
    /// `bias_sq + var_novel + var_source`.
    pub total: f64,
    pub mc_mean: Option<f64>,
    pub mc_se: Option<f64>,
}

impl RiskReport {
    pub fn new(bias_sq: f64, var_novel: f64, var_source: f64) -> Self {
        RiskReport {
            bias_sq,
            var_novel,
            var_source,
            total: bias_sq + var_novel + var_source,
            mc_mean: None,
            mc_se: None,
        }
    }
}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn plan(env: &Environment) -> Result<PosteriorPlan> {
    PosteriorPlan::new(env, SolvePath::Canonical)
}

/// Expected source-data hyper-mean `E[μ_τ]`.
fn expected_tau_mean(env: &Environment, plan: &PosteriorPlan) -> DVector<f64> {
    let rhs = plan
        .sources()
        .iter()
        .zip(env.source_tasks())
        .fold(DVector::zeros(env.dim()), |acc, (s, t)| acc + &s.w * t.theta());
    plan.tau_cov() * rhs
}

fn bias_with(env: &Environment, plan: &PosteriorPlan) -> DVector<f64> {
    let gap = expected_tau_mean(env, plan) - env.novel_task().theta();
    plan.post_cov() * (plan.g() * gap)
}

fn variance_with(plan: &PosteriorPlan) -> (f64, f64) {
    let sp = plan.post_cov();
    let var_novel = (sp * plan.f() * sp).trace();
    let d = sp.nrows();
    let noise_gram = plan
        .sources()
        .iter()
        .fold(DMatrix::zeros(d, d), |acc, s| acc + s.v.tr_mul(&s.v) * s.noise_sq);
    let b = sp * plan.g() * plan.tau_cov();
    let var_source = (&b * noise_gram * b.transpose()).trace();
    (var_novel.max(0.0), var_source.max(0.0))
}

/// `E[θ̂] − θ_{M+1}`.
pub fn exact_bias(env: &Environment) -> Result<DVector<f64>> {
    Ok(bias_with(env, &plan(env)?))
}

/// `(var_novel, var_source)`.
pub fn exact_variance(env: &Environment) -> Result<(f64, f64)> {
    Ok(variance_with(&plan(env)?))
}

/// Exact risk with its bias/variance split.
pub fn exact_risk(env: &Environment) -> Result<RiskReport> {
    let p = plan(env)?;
    Ok(exact_risk_with_plan(env, &p))
}

/// [`exact_risk`] reusing an existing plan for `env`.
pub fn exact_risk_with_plan(env: &Environment, plan: &PosteriorPlan) -> RiskReport {
    let bias = bias_with(env, plan);
    let (var_novel, var_source) = variance_with(plan);
    RiskReport::new(bias.norm_squared(), var_novel, var_source)
}

/// Risk when `τ` is known exactly, the limit of infinitely many source
/// tasks. Needs no source data.
pub fn known_tau_risk(env: &Environment) -> Result<f64> {
    let d = env.dim();
    let st2 = env.prior().sigma_theta_sq();
    let novel = env.novel_task();
    let x = novel.design().as_dmatrix();
    let f = x.transpose() * x / novel.noise_sq();
    let prec = &f + DMatrix::identity(d, d) / st2;
    let sp = factor_spd_checked(&prec, "known-hyper-mean posterior precision")?.inverse();
    let bias = &sp * (env.prior().tau() - novel.theta()) / st2;
    Ok(bias.norm_squared() + (&sp * f * &sp).trace())
}

/// MAP estimates for `reps` independent observation draws. Draw `r` uses
/// the observation seed derived from `(seed, r)`.
pub fn mc_estimates(env: &Environment, reps: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let p = plan(env)?;
    Ok((0..reps)
        .into_par_iter()
        .map(|r| {
            let obs = sample_observations(env, derive_seed(seed, Purpose::MonteCarlo, r as u64));
            p.map_estimate(&obs)
        })
        .collect())
}

/// Monte Carlo mean and standard error of `‖θ̂ − θ_{M+1}‖²`.
///
/// The standard error is the sample standard deviation over `√reps`.
/// Results do not depend on the number of worker threads.
pub fn mc_risk(env: &Environment, reps: usize, seed: u64) -> Result<(f64, f64)> {
    if reps < 2 {
        return Err(Error::Invalid(format!("Monte Carlo needs at least 2 repetitions, got {reps}")));
    }
    let theta = env.novel_task().theta();
    let losses: Vec<f64> = mc_estimates(env, reps, seed)?
        .into_iter()
        .map(|est| (est - theta).norm_squared())
        .collect();
    let n = reps as f64;
    let mean = pairwise_sum(&losses) / n;
    let sq: Vec<f64> = losses.iter().map(|l| (l - mean) * (l - mean)).collect();
    let sd = (pairwise_sum(&sq) / (n - 1.0)).sqrt();
    Ok((mean, sd / n.sqrt()))
}

/// Exact risk averaged over `draws` redraws of every task parameter from
/// the prior, designs held fixed.
pub fn bayes_averaged_risk(env: &Environment, draws: usize, seed: u64, clip_to_unit_ball: bool) -> Result<RiskReport> {
    if draws == 0 {
        return Err(Error::Invalid("bayes-averaged risk needs at least one draw".into()));
    }
    let p = plan(env)?;
    let (var_novel, var_source) = variance_with(&p);
    let biases: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let redrawn = env.resample_parameters(derive_seed(seed, Purpose::ParameterDraws, i as u64), clip_to_unit_ball);
            bias_with(&redrawn, &p).norm_squared()
        })
        .collect();
    Ok(RiskReport::new(pairwise_sum(&biases) / draws as f64, var_novel, var_source))
}

fn counts(m: usize, n: usize, k: usize) -> Result<(f64, f64, f64)> {
    if m > 0 && n == 0 {
        return Err(Error::Domain("n must be positive when there are source tasks".into()));
    }
    if m == 0 && k == 0 {
        return Err(Error::Domain("no data: M = 0 and k = 0".into()));
    }
    Ok((m as f64, n as f64, k as f64))
}

/// `C = k + Mn / (n(M + κ²)s₂²/α₂ + A)`.
pub fn thm52_c(c: &BoundConstants, m: usize, n: usize, k: usize) -> Result<f64> {
    let (mf, nf, kf) = counts(m, n, k)?;
    if m == 0 {
        return Ok(kf);
    }
    Ok(kf + mf * nf / (nf * (mf + c.kappa * c.kappa) * c.s2 * c.s2 / c.alpha2 + c.a))
}

/// Bounds on the largest eigenvalue of `Σ′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmaxBound {
    /// The singular-value chain evaluated step by step.
    pub value: f64,
    /// `σ_{M+1}² / (s₂² C)`; algebraically equal to `value`.
    pub theorem_form: f64,
    /// `σ_{M+1}²/s₂² · [k + n/(Mn/L + A)]⁻¹`, for comparison only.
    pub lemma_statement_form: f64,
}

/// Upper bound on `s_max(Σ′)`. With no source tasks it is
/// `σ_{M+1}² / (k s₂²)`: under a flat hyper-prior the posterior reduces to
/// least squares.
pub fn smax_sigma_prime_bound(c: &BoundConstants, m: usize, n: usize, k: usize) -> Result<SmaxBound> {
    let (mf, nf, kf) = counts(m, n, k)?;
    let novel_term = kf * c.s2 * c.s2 / c.sigma_novel_sq;
    let value = if m == 0 {
        1.0 / novel_term
    } else {
        let c_max = c.sigma_theta_sq * nf * c.gamma1 * c.gamma1 + c.sigma_source_sq;
        let tau_max = c_max / (mf * nf * c.s1 * c.s1);
        1.0 / (novel_term + 1.0 / (c.sigma_theta_sq + tau_max))
    };
    let lead = c.sigma_novel_sq / (c.s2 * c.s2);
    let l_at_m = c.alpha2 / ((mf + c.kappa * c.kappa) * c.s2 * c.s2);
    Ok(SmaxBound {
        value,
        theorem_form: lead / thm52_c(c, m, n, k)?,
        lemma_statement_form: lead / (kf + nf / (mf * nf / l_at_m + c.a)),
    })
}

/// Source-task factors `(D₁, D₂, h)` of the variance bound.
pub fn source_factors(c: &BoundConstants, m: usize, n: usize) -> (f64, f64, f64) {
    let (mf, nf) = (m as f64, n as f64);
    let g1sq = c.gamma1 * c.gamma1;
    let c_max = c.sigma_theta_sq * nf * g1sq + c.sigma_source_sq;
    let d1 = 1.0 / (2.0 * mf * c.sigma_theta_sq * nf * c.s1 * c.s1 / (c_max * c.kappa_tau) + 1.0 / (c.kappa_tau * c.kappa_tau));
    let d2 = 1.0 / (nf * c.s1 * c.s1 / c.alpha1 + 1.0);
    let h = nf * g1sq / (c.sigma_theta_sq * nf * g1sq + c.sigma_source_sq_min);
    (d1, d2, h)
}

/// `D = k + M σ_{M+1}² D₁ D₂ h / γ₂²`.
pub fn thm52_d(c: &BoundConstants, m: usize, n: usize, k: usize) -> Result<f64> {
    let (mf, _, kf) = counts(m, n, k)?;
    if m == 0 {
        return Ok(kf);
    }
    let (d1, d2, h) = source_factors(c, m, n);
    Ok(kf + mf * c.sigma_novel_sq * d1 * d2 * h / (c.gamma2 * c.gamma2))
}

/// `k + Mn / ((n/L₁ + A₁)(Mn/L₂ + A₂))`, for comparison only.
pub fn thm52_d_as_stated(c: &BoundConstants, m: usize, n: usize, k: usize) -> Result<f64> {
    let (mf, nf, kf) = counts(m, n, k)?;
    Ok(kf + mf * nf / ((nf / c.l1 + c.a1) * (mf * nf / c.l2 + c.a2)))
}

/// Upper bound on `var_novel + var_source`.
pub fn variance_upper_bound(c: &BoundConstants, d: usize, m: usize, n: usize, k: usize) -> Result<f64> {
    let cc = thm52_c(c, m, n, k)?;
    let dd = thm52_d(c, m, n, k)?;
    Ok(c.kappa_novel * c.kappa_novel * c.sigma_novel_sq / (c.s2 * c.s2) * d as f64 * dd / (cc * cc))
}

/// Squared-bias bound split into shape and constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasBound {
    /// `d C⁻² · constant`.
    pub value: f64,
    /// `4κ⁴ (σ²_src,max/σ²_src,min)² α₂² / s₂⁴`.
    pub constant: f64,
}

/// Upper bound on `‖bias‖²`, valid when every task parameter lies in the
/// unit ball.
pub fn bias_upper_bound(c: &BoundConstants, d: usize, m: usize, n: usize, k: usize) -> Result<BiasBound> {
    let cc = thm52_c(c, m, n, k)?;
    let noise_ratio = c.sigma_source_sq / c.sigma_source_sq_min;
    let constant = 4.0 * c.kappa.powi(4) * noise_ratio * noise_ratio * c.alpha2 * c.alpha2 / c.s2.powi(4);
    Ok(BiasBound {
        value: d as f64 * constant / (cc * cc),
        constant,
    })
}

/// `d σ_{M+1}² / (k + 2α₂M/(M + κ²))`.
pub fn asymptotic_bound(alpha2: f64, m: usize, kappa: f64, k: usize, d: usize, sigma_novel_sq: f64) -> f64 {
    let mf = m as f64;
    d as f64 * sigma_novel_sq / (k as f64 + 2.0 * alpha2 * mf / (mf + kappa * kappa))
}

/// Every upper-bound quantity for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub variance_bound: f64,
    pub bias_bound: f64,
    pub bias_constant: f64,
    pub smax_sigma_prime_bound: f64,
    pub smax_theorem_form: f64,
    pub smax_lemma_statement_form: f64,
    pub d1: f64,
    pub d2: f64,
    pub thm52_c: f64,
    pub thm52_d: f64,
    pub thm52_d_as_stated: f64,
    /// `d σ_{M+1}² C⁻² D · proof_constant`; dominates
    /// `variance_bound + bias_bound` because `D ≥ k ≥ 1`.
    pub thm52_value: f64,
    /// `κ_{M+1}²/s₂² + K_bias/σ_{M+1}²`.
    pub proof_constant: f64,
    pub asymptotic_value: f64,
}

/// Combined risk upper bound. Requires `k ≥ 1`.
pub fn thm52_bound(c: &BoundConstants, d: usize, m: usize, n: usize, k: usize) -> Result<UpperBoundReport> {
    if k == 0 {
        return Err(Error::Domain("the combined bound needs k >= 1".into()));
    }
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let cc = thm52_c(c, m, n, k)?;
    let dd = thm52_d(c, m, n, k)?;
    let smax = smax_sigma_prime_bound(c, m, n, k)?;
    let bias = bias_upper_bound(c, d, m, n, k)?;
    let (d1, d2, _) = source_factors(c, m, n);
    let proof_constant = c.kappa_novel * c.kappa_novel / (c.s2 * c.s2) + bias.constant / c.sigma_novel_sq;
    Ok(UpperBoundReport {
        variance_bound: variance_upper_bound(c, d, m, n, k)?,
        bias_bound: bias.value,
        bias_constant: bias.constant,
        smax_sigma_prime_bound: smax.value,
        smax_theorem_form: smax.theorem_form,
        smax_lemma_statement_form: smax.lemma_statement_form,
        d1,
        d2,
        thm52_c: cc,
        thm52_d: dd,
        thm52_d_as_stated: thm52_d_as_stated(c, m, n, k)?,
        thm52_value: d as f64 * c.sigma_novel_sq * dd * proof_constant / (cc * cc),
        proof_constant,
        asymptotic_value: asymptotic_bound(c.alpha2, m, c.kappa, k, d, c.sigma_novel_sq),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matan::{approx_eq, Matrix};
    use crate::model::{
        bound_constants, sample_environment, ConstantsMode, DesignKind, EnvironmentSpec, HyperPrior,
        PrimitiveConstants, Task,
    };
    use proptest::prelude::*;

    fn gaussian_env(seed: u64, d: usize, m: usize, n: usize, k: usize) -> Environment {
        let prior = HyperPrior::new((0..d).map(|i| 0.2 * i as f64 - 0.3).collect(), 0.3).unwrap();
        let spec = EnvironmentSpec {
            m,
            n,
            k,
            noise_sq_source: 0.4,
            noise_sq_novel: 0.6,
            design: DesignKind::Gaussian,
            clip_to_unit_ball: false,
        };
        sample_environment(&prior, &spec, seed).unwrap()
    }

    // Square source designs keep σ_θ²XXᵀ + σ²I invertible as σ² → 0.
    fn shared_theta_env(noise: f64) -> Environment {
        let env = gaussian_env(3, 3, 4, 3, 5);
        let theta = DVector::from_vec(vec![0.3, -0.1, 0.5]);
        let retheta = |t: &Task| Task::new(t.design().clone(), theta.clone(), noise).unwrap();
        let sources = env.source_tasks().iter().map(retheta).collect();
        env.with_source_tasks(sources)
            .unwrap()
            .with_novel_task(retheta(env.novel_task()))
            .unwrap()
    }

    #[test]
    fn shared_parameters_have_no_bias() {
        let env = shared_theta_env(0.5);
        assert!(exact_bias(&env).unwrap().norm() <= 1e-10);
    }

    #[test]
    fn identical_noiseless_tasks_have_no_risk() {
        let env = shared_theta_env(1e-14);
        assert!(exact_risk(&env).unwrap().total <= 1e-10);
    }

    #[test]
    fn tiny_novel_noise_kills_bias() {
        let env = gaussian_env(4, 3, 3, 5, 6).with_novel_noise(1e-12).unwrap();
        assert!(exact_bias(&env).unwrap().norm() <= 1e-5);
    }

    #[test]
    fn noiseless_sources_have_no_source_variance() {
        let env = gaussian_env(5, 3, 3, 3, 6);
        let quiet: Vec<Task> = env
            .source_tasks()
            .iter()
            .map(|t| Task::new(t.design().clone(), t.theta().clone(), 1e-14).unwrap())
            .collect();
        let env = env.with_source_tasks(quiet).unwrap();
        assert!(exact_variance(&env).unwrap().1 <= 1e-12);
    }

    #[test]
    fn zero_novel_row_changes_nothing() {
        let env = gaussian_env(6, 3, 3, 5, 4);
        let x = env.novel_task().design();
        let mut rows = x.to_rows();
        rows.push(vec![0.0; 3]);
        let padded = Task::new(Matrix::from_rows(&rows).unwrap(), env.novel_task().theta().clone(), 0.6).unwrap();
        let env2 = env.with_novel_task(padded).unwrap();
        let (a, b) = (exact_variance(&env).unwrap(), exact_variance(&env2).unwrap());
        assert!(approx_eq(a.0, b.0, 1e-10, 1e-14) && approx_eq(a.1, b.1, 1e-10, 1e-14));
    }

    #[test]
    fn variance_scales_with_all_variances() {
        let env = gaussian_env(7, 3, 3, 5, 4);
        let a = exact_risk(&env).unwrap();
        let b = exact_risk(&env.with_scaled_variances(4.0).unwrap()).unwrap();
        assert!(approx_eq(b.var_novel, 4.0 * a.var_novel, 1e-8, 1e-14));
        assert!(approx_eq(b.var_source, 4.0 * a.var_source, 1e-8, 1e-14));
        assert!(approx_eq(b.bias_sq, a.bias_sq, 1e-8, 1e-14));
    }

    #[test]
    fn source_order_does_not_matter() {
        let env = gaussian_env(8, 3, 4, 5, 4);
        let mut rev = env.source_tasks().to_vec();
        rev.reverse();
        let (a, b) = (exact_risk(&env).unwrap(), exact_risk(&env.with_source_tasks(rev).unwrap()).unwrap());
        assert!(approx_eq(a.var_novel, b.var_novel, 1e-10, 1e-14));
        assert!(approx_eq(a.var_source, b.var_source, 1e-10, 1e-14));
        assert!(approx_eq(a.bias_sq, b.bias_sq, 1e-10, 1e-14));
    }

    #[test]
    fn mc_is_reproducible_and_needs_two_reps() {
        let env = gaussian_env(9, 2, 2, 4, 3);
        assert_eq!(mc_risk(&env, 100, 5).unwrap(), mc_risk(&env, 100, 5).unwrap());
        assert!(mc_risk(&env, 1, 5).is_err());
    }

    #[test]
    fn noiseless_mc_is_zero() {
        let env = shared_theta_env(1e-30);
        let (mean, se) = mc_risk(&env, 50, 1).unwrap();
        assert!(mean <= 1e-20 && se <= 1e-20, "{mean} {se}");
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!(approx_eq(pairwise_sum(&v), v.iter().sum(), 1e-12, 1e-12));
    }

    #[test]
    fn known_tau_floor_is_approached() {
        let env = gaussian_env(10, 2, 2000, 5, 4);
        let approx = exact_risk(&env).unwrap().total;
        let floor = known_tau_risk(&env).unwrap();
        assert!(floor > 0.0);
        // τ is estimated, not known, so only a loose comparison is possible.
        assert!(approx > 0.5 * floor && approx < 2.0 * floor, "{approx} {floor}");
    }

    #[test]
    fn asymptotic_hand_values() {
        assert!(approx_eq(asymptotic_bound(10.0, 50, 1.0, 5, 7, 1.0), 7.0 / (5.0 + 1000.0 / 51.0), 1e-12, 0.0));
        assert_eq!(asymptotic_bound(0.0, 50, 1.0, 5, 7, 1.0), 7.0 / 5.0);
        let far = asymptotic_bound(2.0, 1_000_000_000, 1.0, 3, 2, 1.0);
        assert!(approx_eq(far, 2.0 / (3.0 + 4.0), 1e-8, 0.0));
    }

    #[test]
    fn empty_source_reductions() {
        let c = BoundConstants::isotropic_unit(0);
        let r = thm52_bound(&c, 7, 0, 20, 9).unwrap();
        assert_eq!(r.thm52_c, 9.0);
        assert_eq!(r.thm52_d, 9.0);
        assert_eq!(r.thm52_d_as_stated, 9.0);
        assert!(approx_eq(r.smax_sigma_prime_bound, 1.0 / 9.0, 1e-15, 0.0));
        assert!(approx_eq(r.variance_bound, 7.0 / 9.0, 1e-15, 0.0));
    }

    #[test]
    fn isotropic_hand_values() {
        // Unit constants, M = n = k = 1:
        //   chain: 1/(1 + 1/(1 + (1 + 1)/1)) = 3/4
        //   C = 1 + 1/(1·2 + 1) = 4/3
        //   D₁ = 1/(2/2 + 1) = 1/2, D₂ = 1/2, h = 1/2, D = 1 + 1/8
        let c = BoundConstants::isotropic_unit(1);
        let s = smax_sigma_prime_bound(&c, 1, 1, 1).unwrap();
        assert!(approx_eq(s.value, 0.75, 1e-15, 0.0));
        assert!(approx_eq(s.theorem_form, 0.75, 1e-15, 0.0));
        assert!(approx_eq(thm52_d(&c, 1, 1, 1).unwrap(), 1.125, 1e-15, 0.0));
        let v = variance_upper_bound(&c, 1, 1, 1, 1).unwrap();
        assert!(approx_eq(v, 1.125 * 9.0 / 16.0, 1e-15, 0.0));
    }

    #[test]
    fn isotropic_thm52_spot_value() {
        // d = 7, M = 50, n = 20, k = 100 with unit constants:
        //   C = 100 + 1000/(20·51 + 1) = 100 + 1000/1021
        //   D₁ = 1/(2000/21 + 1), D₂ = 1/21, h = 20/21
        //   D = 100 + 50 · D₁ · D₂ · h
        //   value = 7 · D / C² · (1 + 4)
        let c = BoundConstants::isotropic_unit(50);
        let r = thm52_bound(&c, 7, 50, 20, 100).unwrap();
        let cc = 100.0 + 1000.0 / 1021.0;
        let d1 = 1.0 / (2000.0 / 21.0 + 1.0);
        let dd = 100.0 + 50.0 * d1 * (1.0 / 21.0) * (20.0 / 21.0);
        assert!(approx_eq(r.thm52_c, cc, 1e-14, 0.0));
        assert!(approx_eq(r.thm52_d, dd, 1e-14, 0.0));
        assert!(approx_eq(r.thm52_value, 7.0 * dd / (cc * cc) * 5.0, 1e-14, 0.0));
    }

    #[test]
    fn corrected_d_matches_factored_form() {
        // With a single source noise level, D = k + Mn/(P₁P₂) where
        // P₁ = n/L₁ + A₁ and P₂ = 2Mn/(κ²κ_τα₂) + (n + α₁/γ₁²)/(κ_τ²α₂).
        let p = PrimitiveConstants {
            s1: 0.7,
            s2: 0.4,
            gamma1: 1.3,
            gamma2: 0.9,
            sigma_theta_sq: 0.2,
            sigma_source_sq: 0.3,
            sigma_source_sq_min: 0.3,
            sigma_novel_sq: 0.8,
            kappa_tilde: 5.0,
            kappa_tau: 3.0,
            m: 6,
        };
        let c = BoundConstants::from_primitives(p, ConstantsMode::Exact).unwrap();
        let (m, n, k) = (6.0, 11.0, 4.0);
        let p1 = n / c.l1 + c.a1;
        let p2 = 2.0 * m * n / (c.kappa.powi(2) * c.kappa_tau * c.alpha2)
            + (n + c.alpha1 / c.gamma1.powi(2)) / (c.kappa_tau.powi(2) * c.alpha2);
        let d = thm52_d(&c, 6, 11, 4).unwrap();
        assert!(approx_eq(d, k + m * n / (p1 * p2), 1e-12, 0.0));
    }

    #[test]
    fn bounds_hold_on_a_unit_ball_environment() {
        let prior = HyperPrior::new(vec![0.2, -0.1, 0.3], 0.05).unwrap();
        let spec = EnvironmentSpec {
            m: 5,
            n: 10,
            k: 8,
            noise_sq_source: 0.2,
            noise_sq_novel: 0.3,
            design: DesignKind::Gaussian,
            clip_to_unit_ball: true,
        };
        let env = sample_environment(&prior, &spec, 13).unwrap();
        let c = bound_constants(&env, ConstantsMode::Exact).unwrap();
        let r = exact_risk(&env).unwrap();
        let ub = thm52_bound(&c, 3, 5, 10, 8).unwrap();
        assert!(ub.variance_bound >= r.var_novel + r.var_source);
        assert!(ub.bias_bound >= r.bias_sq);
        assert!(ub.thm52_value >= r.total);
        assert!(ub.thm52_value >= ub.variance_bound + ub.bias_bound);
    }

    #[test]
    fn bound_orders_in_k() {
        let c = BoundConstants::isotropic_unit(3);
        let v3 = variance_upper_bound(&c, 2, 3, 4, 1000).unwrap();
        let v6 = variance_upper_bound(&c, 2, 3, 4, 1_000_000).unwrap();
        assert!(approx_eq(v3 / v6, 1000.0, 1e-2, 0.0));
        let b3 = bias_upper_bound(&c, 2, 3, 4, 1000).unwrap().value;
        let b6 = bias_upper_bound(&c, 2, 3, 4, 1_000_000).unwrap().value;
        assert!(approx_eq(b3 / b6, 1e6, 1e-2, 0.0));
    }

    proptest! {
        #[test]
        fn smax_forms_agree(
            s1 in 0.1f64..2.0, r1 in 1.0f64..4.0, s2 in 0.1f64..2.0, r2 in 1.0f64..4.0,
            st in 0.05f64..3.0, sa in 0.05f64..3.0, sb in 0.05f64..3.0,
            m in 0usize..40, n in 1usize..60, k in 1usize..60,
        ) {
            let p = PrimitiveConstants {
                s1, s2, gamma1: s1 * r1, gamma2: s2 * r2,
                sigma_theta_sq: st, sigma_source_sq: sa, sigma_source_sq_min: sa,
                sigma_novel_sq: sb, kappa_tilde: 1.0, kappa_tau: 1.0, m,
            };
            let c = BoundConstants::from_primitives(p, ConstantsMode::WorstCase).unwrap();
            let s = smax_sigma_prime_bound(&c, m, n, k).unwrap();
            prop_assert!(approx_eq(s.value, s.theorem_form, 1e-10, 0.0));
        }

        #[test]
        fn thm52_non_increasing_in_k_past_prior_weight(m in 1usize..30, n in 1usize..30, k in 1usize..200) {
            // Dσ²/C² rises in k while k is below the prior pseudo-count
            // Mn/(n(M+κ²)s₂²/α₂ + A); beyond it the bound decreases.
            let c = BoundConstants::isotropic_unit(m);
            let a = thm52_c(&c, m, n, 0).unwrap();
            prop_assume!(k as f64 >= a);
            let v = thm52_bound(&c, 3, m, n, k).unwrap().thm52_value;
            let w = thm52_bound(&c, 3, m, n, k + 1).unwrap().thm52_value;
            prop_assert!(w <= v * (1.0 + 1e-12));
        }
    }
}
