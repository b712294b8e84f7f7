//! Empirical-Bayes posterior for the novel task.
//!
//! With `Cᵢ = σ_θ² XᵢXᵢᵀ + σᵢ² I`, the hyper-mean posterior under a flat
//! prior on `τ` is
//!
//! ```text
//! Σ_τ⁻¹ = Σᵢ Xᵢᵀ Cᵢ⁻¹ Xᵢ
//! μ_τ   = Σ_τ Σᵢ Xᵢᵀ Cᵢ⁻¹ yᵢ
//! ```
//!
//! and the novel-task posterior is
//!
//! ```text
//! Σ′₀ = σ_θ² I + Σ_τ,           G = Σ′₀⁻¹,   F = σ_{M+1}⁻² XᵀX
//! Σ′  = (F + G)⁻¹
//! μ′  = Σ′ (σ_{M+1}⁻² Xᵀ y + G μ_τ)
//! ```
//!
//! The posterior is Gaussian, so `μ′` is also the MAP estimate.
//!
//! Every matrix that depends only on the environment is factored once in a
//! [`PosteriorPlan`]; applying the plan to a set of observations costs a few
//! matrix-vector products.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matan::{factor_spd_checked, Cholesky};
use crate::model::{Environment, Observations};

/// Posterior of the hyper-mean `τ` given the source data.
#[derive(Debug, Clone, PartialEq)]
pub struct TauPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Posterior of the novel-task parameter given all data.
#[derive(Debug, Clone, PartialEq)]
pub struct NovelPosterior {
    /// `μ′`, the MAP estimate.
    pub mean: DVector<f64>,
    /// `Σ′`.
    pub cov: DMatrix<f64>,
    /// `Σ′₀ = σ_θ² I + Σ_τ`.
    pub cov0: DMatrix<f64>,
}

/// How `Xᵢᵀ Cᵢ⁻¹` is formed for each source task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolvePath {
    /// Factor the `nᵢ × nᵢ` matrix `Cᵢ`.
    #[default]
    Canonical,
    /// Factor the `d × d` matrix `σ_θ² XᵢᵀXᵢ + σᵢ² I` and use
    /// `Cᵢ⁻¹Xᵢ = Xᵢ(σ_θ² XᵢᵀXᵢ + σᵢ² I)⁻¹`. Valid for any rank.
    Woodbury,
}

/// Source-task map `Vᵢ = Cᵢ⁻¹ Xᵢ` and its Gram form `Wᵢ = Xᵢᵀ Cᵢ⁻¹ Xᵢ`.
#[derive(Debug, Clone)]
pub struct SourceMap {
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub noise_sq: f64,
}

fn source_map(
    design: &DMatrix<f64>,
    sigma_theta_sq: f64,
    noise_sq: f64,
    path: SolvePath,
    index: usize,
) -> Result<SourceMap> {
    let label = format!("source task {index} covariance");
    let v = match path {
        SolvePath::Canonical => {
            let n = design.nrows();
            let c = design * design.transpose() * sigma_theta_sq + DMatrix::identity(n, n) * noise_sq;
            factor_spd_checked(&c, &label)?.solve(design)
        }
        SolvePath::Woodbury => {
            let d = design.ncols();
            let b = design.transpose() * design * sigma_theta_sq + DMatrix::identity(d, d) * noise_sq;
            let chol = factor_spd_checked(&b, &label)?;
            chol.solve(&design.transpose()).transpose()
        }
    };
    let w = design.transpose() * &v;
    let w = (&w + w.transpose()) * 0.5;
    Ok(SourceMap { v, w, noise_sq })
}

/// `Σ_τ` for an environment.
pub fn tau_covariance(env: &Environment) -> Result<DMatrix<f64>> {
    Ok(PosteriorPlan::new(env, SolvePath::Canonical)?.tau_cov)
}

/// Factorizations of an environment's posterior, independent of the
/// observed responses.
#[derive(Debug, Clone)]
pub struct PosteriorPlan {
    sources: Vec<SourceMap>,
    tau_cov: DMatrix<f64>,
    cov0: DMatrix<f64>,
    g: DMatrix<f64>,
    f: DMatrix<f64>,
    post_cov: DMatrix<f64>,
    novel_design: DMatrix<f64>,
    novel_noise_sq: f64,
}

impl PosteriorPlan {
    pub fn new(env: &Environment, path: SolvePath) -> Result<Self> {
        if env.num_sources() == 0 {
            return Err(Error::NoSourceTasks);
        }
        let d = env.dim();
        let sigma_theta_sq = env.prior().sigma_theta_sq();
        let sources = env
            .source_tasks()
            .iter()
            .enumerate()
            .map(|(i, t)| source_map(t.design(), sigma_theta_sq, t.noise_sq(), path, i + 1))
            .collect::<Result<Vec<_>>>()?;
        let tau_prec = sources
            .iter()
            .fold(DMatrix::zeros(d, d), |acc, s| acc + &s.w);
        let tau_cov = factor_spd_checked(&tau_prec, "hyper-mean precision")?.inverse();
        let cov0 = &tau_cov + DMatrix::identity(d, d) * sigma_theta_sq;
        let g = factor_spd_checked(&cov0, "prior covariance of the novel task")?.inverse();
        let novel = env.novel_task();
        let x = novel.design().as_dmatrix();
        let f = x.transpose() * x / novel.noise_sq();
        let f = (&f + f.transpose()) * 0.5;
        let post_cov = factor_spd_checked(&(&f + &g), "novel-task posterior precision")?.inverse();
        Ok(PosteriorPlan {
            sources,
            tau_cov,
            cov0,
            g,
            f,
            post_cov,
            novel_design: x.clone(),
            novel_noise_sq: novel.noise_sq(),
        })
    }

    pub fn sources(&self) -> &[SourceMap] {
        &self.sources
    }

    /// `Σ_τ`.
    pub fn tau_cov(&self) -> &DMatrix<f64> {
        &self.tau_cov
    }

    /// `Σ′₀ = σ_θ² I + Σ_τ`.
    pub fn cov0(&self) -> &DMatrix<f64> {
        &self.cov0
    }

    /// `G = Σ′₀⁻¹`.
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `F = σ_{M+1}⁻² XᵀX`.
    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// `Σ′`.
    pub fn post_cov(&self) -> &DMatrix<f64> {
        &self.post_cov
    }

    /// `μ_τ` for the given source responses.
    pub fn tau_mean(&self, obs: &Observations) -> DVector<f64> {
        let d = self.tau_cov.nrows();
        let rhs = self
            .sources
            .iter()
            .zip(&obs.source)
            .fold(DVector::zeros(d), |acc, (s, y)| acc + s.v.tr_mul(y));
        &self.tau_cov * rhs
    }

    pub fn tau_posterior(&self, obs: &Observations) -> TauPosterior {
        TauPosterior {
            mean: self.tau_mean(obs),
            cov: self.tau_cov.clone(),
        }
    }

    pub fn novel_posterior(&self, obs: &Observations) -> NovelPosterior {
        let mu_tau = self.tau_mean(obs);
        let rhs = self.novel_design.tr_mul(&obs.novel) / self.novel_noise_sq + &self.g * mu_tau;
        NovelPosterior {
            mean: &self.post_cov * rhs,
            cov: self.post_cov.clone(),
            cov0: self.cov0.clone(),
        }
    }

    pub fn map_estimate(&self, obs: &Observations) -> DVector<f64> {
        self.novel_posterior(obs).mean
    }
}

/// Hyper-mean posterior from the source tasks.
pub fn tau_posterior(env: &Environment, obs: &Observations) -> Result<TauPosterior> {
    obs.validate(env)?;
    Ok(PosteriorPlan::new(env, SolvePath::Canonical)?.tau_posterior(obs))
}

/// Novel-task posterior from a hyper-mean posterior and the novel data.
pub fn novel_posterior(tp: &TauPosterior, env: &Environment, obs: &Observations) -> Result<NovelPosterior> {
    obs.validate(env)?;
    let d = env.dim();
    if tp.mean.len() != d || tp.cov.shape() != (d, d) {
        return Err(Error::Dimension(format!(
            "hyper-mean posterior has dimension {}, environment has {d}",
            tp.mean.len()
        )));
    }
    let cov0 = &tp.cov + DMatrix::identity(d, d) * env.prior().sigma_theta_sq();
    let cov0_chol = factor_spd_checked(&cov0, "prior covariance of the novel task")?;
    let novel = env.novel_task();
    let x = novel.design().as_dmatrix();
    let f = x.transpose() * x / novel.noise_sq();
    let g = cov0_chol.inverse();
    let prec: Cholesky = factor_spd_checked(&(f + &g), "novel-task posterior precision")?;
    let rhs = x.tr_mul(&obs.novel) / novel.noise_sq() + cov0_chol.solve_vec(&tp.mean);
    Ok(NovelPosterior {
        mean: prec.solve_vec(&rhs),
        cov: prec.inverse(),
        cov0,
    })
}

/// MAP estimate of the novel-task parameter.
pub fn map_estimate(env: &Environment, obs: &Observations) -> Result<DVector<f64>> {
    let tp = tau_posterior(env, obs)?;
    Ok(novel_posterior(&tp, env, obs)?.mean)
}
