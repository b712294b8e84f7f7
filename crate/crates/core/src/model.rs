//! Hierarchical linear-regression environments.
//!
//! Task parameters are drawn around a shared hyper-mean,
//! `θᵢ = τ + ξᵢ` with `ξᵢ ~ N(0, σ_θ² I)`, and each task observes
//! `yᵢ = Xᵢ θᵢ + εᵢ` with `εᵢ ~ N(0, σᵢ² I)`. There are `M` source tasks with
//! `n` rows each and one novel task with `k` rows.
//!
//! Generator layout (see [`crate::rng`]): task index 0 is the novel task and
//! source task `i` (1-based) uses index `i`. Parameters, designs and
//! observation noise each draw from their own purpose key, and design rows
//! are generated sequentially, so a design with more rows extends the one
//! with fewer rows under the same seed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matan::{singular_extremes, symmetric_eigenvalues, Matrix};
use crate::rng::{substream, Purpose};

/// Hyper-mean `τ` and prior variance `σ_θ²` of the task parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPrior {
    tau: DVector<f64>,
    sigma_theta_sq: f64,
}

impl HyperPrior {
    pub fn new(tau: Vec<f64>, sigma_theta_sq: f64) -> Result<Self> {
        if tau.is_empty() {
            return Err(Error::Dimension("hyper-mean must have at least one entry".into()));
        }
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("hyper-mean has a non-finite entry".into()));
        }
        positive("sigma_theta_sq", sigma_theta_sq)?;
        Ok(HyperPrior {
            tau: DVector::from_vec(tau),
            sigma_theta_sq,
        })
    }

    pub fn tau(&self) -> &DVector<f64> {
        &self.tau
    }

    pub fn sigma_theta_sq(&self) -> f64 {
        self.sigma_theta_sq
    }

    pub fn dim(&self) -> usize {
        self.tau.len()
    }
}

/// How design matrices are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignKind {
    /// Rows `[1, x, x², …, x^{d−1}]` with `x ~ U[x_low, x_high]`.
    Polynomial { x_low: f64, x_high: f64 },
    /// Independent standard normal entries.
    Gaussian,
}

impl DesignKind {
    fn validate(&self) -> Result<()> {
        if let DesignKind::Polynomial { x_low, x_high } = *self {
            if !(x_low.is_finite() && x_high.is_finite() && x_low <= x_high) {
                return Err(Error::Invalid(format!(
                    "polynomial design interval [{x_low}, {x_high}] is not a finite interval"
                )));
            }
        }
        Ok(())
    }
}

/// One linear regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    design: Matrix,
    theta: DVector<f64>,
    noise_sq: f64,
    design_kind: Option<DesignKind>,
}

impl Task {
    pub fn new(design: Matrix, theta: DVector<f64>, noise_sq: f64) -> Result<Self> {
        if design.cols() != theta.len() {
            return Err(Error::Dimension(format!(
                "design has {} columns but theta has {} entries",
                design.cols(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("theta has a non-finite entry".into()));
        }
        positive("noise_sq", noise_sq)?;
        Ok(Task {
            design,
            theta,
            noise_sq,
            design_kind: None,
        })
    }

    /// Records how the design was generated; used only for serialization.
    pub fn with_design_kind(mut self, kind: DesignKind) -> Self {
        self.design_kind = Some(kind);
        self
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn noise_sq(&self) -> f64 {
        self.noise_sq
    }

    pub fn design_kind(&self) -> Option<DesignKind> {
        self.design_kind
    }

    /// Number of rows `nᵢ`.
    pub fn rows(&self) -> usize {
        self.design.rows()
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// Hyper-prior, `M` source tasks and one novel task.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    prior: HyperPrior,
    source_tasks: Vec<Task>,
    novel_task: Task,
    seed: Option<u64>,
}

impl Environment {
    pub fn new(prior: HyperPrior, source_tasks: Vec<Task>, novel_task: Task) -> Result<Self> {
        let d = prior.dim();
        for (i, task) in source_tasks.iter().enumerate() {
            if task.dim() != d {
                return Err(Error::Dimension(format!(
                    "source task {} has dimension {}, prior has {d}",
                    i + 1,
                    task.dim()
                )));
            }
        }
        if novel_task.dim() != d {
            return Err(Error::Dimension(format!(
                "novel task has dimension {}, prior has {d}",
                novel_task.dim()
            )));
        }
        Ok(Environment {
            prior,
            source_tasks,
            novel_task,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn prior(&self) -> &HyperPrior {
        &self.prior
    }

    pub fn source_tasks(&self) -> &[Task] {
        &self.source_tasks
    }

    pub fn novel_task(&self) -> &Task {
        &self.novel_task
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    /// Number of source tasks `M`.
    pub fn num_sources(&self) -> usize {
        self.source_tasks.len()
    }

    /// Rows of the novel design, `k`.
    pub fn novel_rows(&self) -> usize {
        self.novel_task.rows()
    }

    /// Shared source row count `n`, if all source tasks agree.
    pub fn source_rows(&self) -> Option<usize> {
        let n = self.source_tasks.first()?.rows();
        self.source_tasks.iter().all(|t| t.rows() == n).then_some(n)
    }

    /// Same environment with a different novel-task noise variance.
    pub fn with_novel_noise(&self, noise_sq: f64) -> Result<Self> {
        positive("noise_sq", noise_sq)?;
        let mut env = self.clone();
        env.novel_task.noise_sq = noise_sq;
        Ok(env)
    }

    /// Same environment with every task's noise variance and `σ_θ²`
    /// multiplied by `factor`.
    pub fn with_scaled_variances(&self, factor: f64) -> Result<Self> {
        positive("factor", factor)?;
        let mut env = self.clone();
        env.prior.sigma_theta_sq *= factor;
        for t in env.source_tasks.iter_mut().chain(std::iter::once(&mut env.novel_task)) {
            t.noise_sq *= factor;
        }
        Ok(env)
    }

    /// Replaces the source task list.
    pub fn with_source_tasks(&self, source_tasks: Vec<Task>) -> Result<Self> {
        let env = Environment::new(self.prior.clone(), source_tasks, self.novel_task.clone())?;
        Ok(Environment { seed: self.seed, ..env })
    }

    /// Replaces the novel task.
    pub fn with_novel_task(&self, novel_task: Task) -> Result<Self> {
        let env = Environment::new(self.prior.clone(), self.source_tasks.clone(), novel_task)?;
        Ok(Environment { seed: self.seed, ..env })
    }

    /// Redraws every task parameter from the prior, keeping designs and
    /// noise levels.
    pub fn resample_parameters(&self, seed: u64, clip_to_unit_ball: bool) -> Self {
        let mut env = self.clone();
        env.novel_task.theta = draw_theta(&self.prior, seed, 0, clip_to_unit_ball);
        for (i, t) in env.source_tasks.iter_mut().enumerate() {
            t.theta = draw_theta(&self.prior, seed, i as u64 + 1, clip_to_unit_ball);
        }
        env.seed = Some(seed);
        env
    }

    /// JSON text of the environment. Designs are written explicitly, so the
    /// document reloads bit for bit.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&EnvironmentDoc::from(self))
            .map_err(|e| Error::Invalid(format!("serializing environment: {e}")))
    }

    /// Parses a JSON environment. A task may give `design_kind` instead of an
    /// explicit `design`; the design is then regenerated from `seed`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EnvironmentDoc = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("environment JSON: {e}")))?;
        doc.into_environment()
    }
}

/// Responses for every task of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub source: Vec<DVector<f64>>,
    pub novel: DVector<f64>,
}

impl Observations {
    /// Checks that response lengths match the environment's row counts.
    pub fn validate(&self, env: &Environment) -> Result<()> {
        if self.source.len() != env.num_sources() {
            return Err(Error::Dimension(format!(
                "{} source responses for {} source tasks",
                self.source.len(),
                env.num_sources()
            )));
        }
        for (i, (y, t)) in self.source.iter().zip(env.source_tasks()).enumerate() {
            if y.len() != t.rows() {
                return Err(Error::Dimension(format!(
                    "source task {} has {} rows but {} responses",
                    i + 1,
                    t.rows(),
                    y.len()
                )));
            }
        }
        if self.novel.len() != env.novel_rows() {
            return Err(Error::Dimension(format!(
                "novel task has {} rows but {} responses",
                env.novel_rows(),
                self.novel.len()
            )));
        }
        Ok(())
    }
}

/// Shape of a sampled environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub noise_sq_source: f64,
    pub noise_sq_novel: f64,
    pub design: DesignKind,
    #[serde(default)]
    pub clip_to_unit_ball: bool,
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m > 0 && self.n == 0 {
            return Err(Error::Invalid("n must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        positive("noise_sq_source", self.noise_sq_source)?;
        positive("noise_sq_novel", self.noise_sq_novel)?;
        self.design.validate()
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must be positive and finite, got {value}")))
    }
}

fn design_rows(kind: DesignKind, rows: usize, d: usize, seed: u64, index: u64) -> Matrix {
    let mut rng = substream(seed, Purpose::Design, index);
    let mut data = Vec::with_capacity(rows * d);
    for _ in 0..rows {
        match kind {
            DesignKind::Polynomial { x_low, x_high } => {
                let x = if x_low < x_high {
                    rng.random_range(x_low..x_high)
                } else {
                    x_low
                };
                let mut p = 1.0;
                for _ in 0..d {
                    data.push(p);
                    p *= x;
                }
            }
            DesignKind::Gaussian => {
                data.extend((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            }
        }
    }
    Matrix::new(DMatrix::from_row_slice(rows, d, &data)).expect("generated entries are finite")
}

/// Design matrix for task `index` (0 = novel, `i` = source task `i`).
pub fn task_design(kind: DesignKind, rows: usize, d: usize, seed: u64, index: u64) -> Result<Matrix> {
    kind.validate()?;
    if d == 0 {
        return Err(Error::Invalid("dimension must be at least 1".into()));
    }
    Ok(design_rows(kind, rows, d, seed, index))
}

/// `rows × d` polynomial design with `x ~ U[x_low, x_high]` per row.
/// A degenerate interval `x_low == x_high` fixes `x`.
pub fn polynomial_design(rows: usize, d: usize, x_low: f64, x_high: f64, seed: u64) -> Result<Matrix> {
    if rows == 0 {
        return Err(Error::Invalid("rows must be at least 1".into()));
    }
    task_design(DesignKind::Polynomial { x_low, x_high }, rows, d, seed, 0)
}

fn draw_theta(prior: &HyperPrior, seed: u64, index: u64, clip: bool) -> DVector<f64> {
    let mut rng = substream(seed, Purpose::Environment, index);
    let sd = prior.sigma_theta_sq.sqrt();
    let mut theta =
        DVector::from_fn(prior.dim(), |i, _| prior.tau[i] + sd * rng.sample::<f64, _>(StandardNormal));
    if clip {
        let norm = theta.norm();
        if norm > 1.0 {
            theta /= norm;
        }
    }
    theta
}

/// Samples task parameters and designs.
pub fn sample_environment(prior: &HyperPrior, spec: &EnvironmentSpec, seed: u64) -> Result<Environment> {
    spec.validate()?;
    let d = prior.dim();
    let make = |index: u64, rows: usize, noise_sq: f64| -> Result<Task> {
        let theta = draw_theta(prior, seed, index, spec.clip_to_unit_ball);
        let design = design_rows(spec.design, rows, d, seed, index);
        Ok(Task::new(design, theta, noise_sq)?.with_design_kind(spec.design))
    };
    let novel = make(0, spec.k, spec.noise_sq_novel)?;
    let sources = (1..=spec.m as u64)
        .map(|i| make(i, spec.n, spec.noise_sq_source))
        .collect::<Result<Vec<_>>>()?;
    Ok(Environment::new(prior.clone(), sources, novel)?.with_seed(seed))
}

fn noisy_response(task: &Task, seed: u64, index: u64) -> DVector<f64> {
    let mut rng = substream(seed, Purpose::Observations, index);
    let sd = task.noise_sq.sqrt();
    let mean = task.design.as_dmatrix() * &task.theta;
    DVector::from_fn(mean.len(), |i, _| mean[i] + sd * rng.sample::<f64, _>(StandardNormal))
}

/// Draws `yᵢ = Xᵢθᵢ + εᵢ` for every task.
pub fn sample_observations(env: &Environment, seed: u64) -> Observations {
    Observations {
        source: env
            .source_tasks
            .iter()
            .enumerate()
            .map(|(i, t)| noisy_response(t, seed, i as u64 + 1))
            .collect(),
        novel: noisy_response(&env.novel_task, seed, 0),
    }
}

/// How the two extra condition numbers of the constant ledger are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsMode {
    /// `κ̃` and `κ_τ` computed from the actual matrices.
    Exact,
    /// `κ̃ = κ²` and `κ_τ = κ⁴`.
    WorstCase,
}

/// Inputs from which the constant ledger is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveConstants {
    /// Smallest singular value of a source design over `√n`.
    pub s1: f64,
    /// Smallest singular value of the novel design over `√k`.
    pub s2: f64,
    /// Largest singular value of a source design over `√n`.
    pub gamma1: f64,
    /// Largest singular value of the novel design over `√k`.
    pub gamma2: f64,
    pub sigma_theta_sq: f64,
    /// Largest source noise variance.
    pub sigma_source_sq: f64,
    /// Smallest source noise variance.
    pub sigma_source_sq_min: f64,
    pub sigma_novel_sq: f64,
    /// Used only in exact mode.
    pub kappa_tilde: f64,
    /// Used only in exact mode.
    pub kappa_tau: f64,
    /// Number of source tasks at which `L` is evaluated.
    pub m: usize,
}

/// Design and noise constants that drive the upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub s1: f64,
    pub s2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub kappa: f64,
    pub kappa_novel: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Evaluated at `m`.
    pub l: f64,
    pub l1: f64,
    pub l2: f64,
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub kappa_tilde: f64,
    pub kappa_tau: f64,
    pub mode: ConstantsMode,
    pub sigma_theta_sq: f64,
    pub sigma_source_sq: f64,
    pub sigma_source_sq_min: f64,
    pub sigma_novel_sq: f64,
    pub m: usize,
}

impl BoundConstants {
    pub fn from_primitives(p: PrimitiveConstants, mode: ConstantsMode) -> Result<Self> {
        let named = [
            ("s1", p.s1),
            ("s2", p.s2),
            ("gamma1", p.gamma1),
            ("gamma2", p.gamma2),
            ("sigma_theta_sq", p.sigma_theta_sq),
            ("sigma_source_sq", p.sigma_source_sq),
            ("sigma_source_sq_min", p.sigma_source_sq_min),
            ("sigma_novel_sq", p.sigma_novel_sq),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if p.gamma1 < p.s1 || p.gamma2 < p.s2 {
            return Err(Error::Domain("largest singular value below smallest".into()));
        }
        if p.sigma_source_sq_min > p.sigma_source_sq {
            return Err(Error::Domain("sigma_source_sq_min exceeds sigma_source_sq".into()));
        }
        let kappa = p.gamma1 / p.s1;
        let kappa_novel = p.gamma2 / p.s2;
        let (kappa_tilde, kappa_tau) = match mode {
            ConstantsMode::Exact => (p.kappa_tilde, p.kappa_tau),
            ConstantsMode::WorstCase => (kappa * kappa, kappa.powi(4)),
        };
        for (name, v) in [("kappa_tilde", kappa_tilde), ("kappa_tau", kappa_tau)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be a finite condition number, got {v}")));
            }
        }
        let (s1, s2) = (p.s1, p.s2);
        let (s1sq, s2sq, kn2) = (s1 * s1, s2 * s2, kappa_novel * kappa_novel);
        let alpha1 = p.sigma_source_sq / p.sigma_theta_sq;
        let alpha2 = p.sigma_novel_sq / p.sigma_theta_sq;
        Ok(BoundConstants {
            s1,
            s2,
            gamma1: p.gamma1,
            gamma2: p.gamma2,
            kappa,
            kappa_novel,
            alpha1,
            alpha2,
            l: alpha2 / ((p.m as f64 + kappa * kappa) * s2sq),
            l1: alpha1 / (s1sq * s2sq * kn2),
            l2: kappa_tilde * kappa_tau * alpha2 / (2.0 * s2sq * kn2),
            a: s2sq * alpha1 / (s1sq * alpha2),
            a1: s2sq * kn2,
            a2: alpha1 * s2sq * kn2 / (kappa_tau * kappa_tau * s1sq * alpha2),
            kappa_tilde,
            kappa_tau,
            mode,
            sigma_theta_sq: p.sigma_theta_sq,
            sigma_source_sq: p.sigma_source_sq,
            sigma_source_sq_min: p.sigma_source_sq_min,
            sigma_novel_sq: p.sigma_novel_sq,
            m: p.m,
        })
    }

    /// Perfectly conditioned designs with every variance equal to one.
    pub fn isotropic_unit(m: usize) -> Self {
        BoundConstants::from_primitives(
            PrimitiveConstants {
                s1: 1.0,
                s2: 1.0,
                gamma1: 1.0,
                gamma2: 1.0,
                sigma_theta_sq: 1.0,
                sigma_source_sq: 1.0,
                sigma_source_sq_min: 1.0,
                sigma_novel_sq: 1.0,
                kappa_tilde: 1.0,
                kappa_tau: 1.0,
                m,
            },
            ConstantsMode::Exact,
        )
        .expect("unit constants are valid")
    }
}

/// Condition number of `σ_θ² X Xᵀ + σ² I` from the spectrum of `XᵀX`.
fn source_covariance_condition(design: &DMatrix<f64>, sigma_theta_sq: f64, noise_sq: f64) -> f64 {
    let ev = symmetric_eigenvalues(&(design.transpose() * design));
    let top = ev.last().copied().unwrap_or(0.0).max(0.0);
    // X Xᵀ is n×n; it has n − d zero eigenvalues when n > d.
    let bottom = if design.nrows() > design.ncols() {
        0.0
    } else {
        ev[ev.len() - design.nrows()].max(0.0)
    };
    (sigma_theta_sq * top + noise_sq) / (sigma_theta_sq * bottom + noise_sq)
}

fn scaled_extremes(task: &Task, label: &str) -> Result<(f64, f64)> {
    let rows = task.rows();
    if rows < task.dim() {
        return Err(Error::Singular(format!(
            "{label} design has {rows} rows for dimension {}",
            task.dim()
        )));
    }
    let ext = singular_extremes(task.design())?;
    let scale = (rows as f64).sqrt();
    if ext.s_min <= ext.s_max * f64::EPSILON * rows as f64 {
        return Err(Error::Singular(format!("{label} design is rank deficient")));
    }
    Ok((ext.s_min / scale, ext.s_max / scale))
}

/// Derives the constant ledger from an environment.
///
/// Source constants are the extremes over all source tasks. With no source
/// tasks they are set to one. Source tasks must share a row count.
pub fn bound_constants(env: &Environment, mode: ConstantsMode) -> Result<BoundConstants> {
    let (s2, gamma2) = scaled_extremes(env.novel_task(), "novel task")?;
    let sigma_theta_sq = env.prior().sigma_theta_sq();
    let mut p = PrimitiveConstants {
        s1: 1.0,
        s2,
        gamma1: 1.0,
        gamma2,
        sigma_theta_sq,
        sigma_source_sq: sigma_theta_sq,
        sigma_source_sq_min: sigma_theta_sq,
        sigma_novel_sq: env.novel_task().noise_sq(),
        kappa_tilde: 1.0,
        kappa_tau: 1.0,
        m: env.num_sources(),
    };
    if env.num_sources() > 0 {
        if env.source_rows().is_none() {
            return Err(Error::Invalid("source tasks must share a row count".into()));
        }
        let mut s1 = f64::INFINITY;
        let mut gamma1 = 0.0f64;
        let mut kappa_tilde = 1.0f64;
        let mut noise_max = 0.0f64;
        let mut noise_min = f64::INFINITY;
        for (i, t) in env.source_tasks().iter().enumerate() {
            let (lo, hi) = scaled_extremes(t, &format!("source task {}", i + 1))?;
            s1 = s1.min(lo);
            gamma1 = gamma1.max(hi);
            noise_max = noise_max.max(t.noise_sq());
            noise_min = noise_min.min(t.noise_sq());
            if mode == ConstantsMode::Exact {
                kappa_tilde = kappa_tilde.max(source_covariance_condition(
                    t.design(),
                    sigma_theta_sq,
                    t.noise_sq(),
                ));
            }
        }
        p.s1 = s1;
        p.gamma1 = gamma1;
        p.sigma_source_sq = noise_max;
        p.sigma_source_sq_min = noise_min;
        if mode == ConstantsMode::Exact {
            p.kappa_tilde = kappa_tilde;
            let tau_cov = crate::posterior::tau_covariance(env)?;
            let ev = symmetric_eigenvalues(&tau_cov);
            p.kappa_tau = (ev[ev.len() - 1] / ev[0]).max(1.0);
        }
    }
    BoundConstants::from_primitives(p, mode)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskDoc {
    n: usize,
    noise_sq: f64,
    theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    design: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    design_kind: Option<DesignKind>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NovelDoc {
    k: usize,
    noise_sq: f64,
    theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    design: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    design_kind: Option<DesignKind>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentDoc {
    d: usize,
    tau: Vec<f64>,
    sigma_theta_sq: f64,
    tasks: Vec<TaskDoc>,
    novel: NovelDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl From<&Environment> for EnvironmentDoc {
    fn from(env: &Environment) -> Self {
        EnvironmentDoc {
            d: env.dim(),
            tau: env.prior.tau.iter().copied().collect(),
            sigma_theta_sq: env.prior.sigma_theta_sq,
            tasks: env
                .source_tasks
                .iter()
                .map(|t| TaskDoc {
                    n: t.rows(),
                    noise_sq: t.noise_sq,
                    theta: t.theta.iter().copied().collect(),
                    design: Some(t.design.to_rows()),
                    design_kind: t.design_kind,
                })
                .collect(),
            novel: NovelDoc {
                k: env.novel_rows(),
                noise_sq: env.novel_task.noise_sq,
                theta: env.novel_task.theta.iter().copied().collect(),
                design: Some(env.novel_task.design.to_rows()),
                design_kind: env.novel_task.design_kind,
            },
            seed: env.seed,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn doc_task(
    label: &str,
    rows: usize,
    d: usize,
    noise_sq: f64,
    theta: Vec<f64>,
    design: Option<Vec<Vec<f64>>>,
    kind: Option<DesignKind>,
    seed: Option<u64>,
    index: u64,
) -> Result<Task> {
    let design = match (design, kind) {
        (Some(rows_data), _) => {
            let m = if rows_data.is_empty() {
                Matrix::zeros(0, d)
            } else {
                Matrix::from_rows(&rows_data)?
            };
            if m.rows() != rows || m.cols() != d {
                return Err(Error::Dimension(format!(
                    "{label}: design is {}x{}, expected {rows}x{d}",
                    m.rows(),
                    m.cols()
                )));
            }
            m
        }
        (None, Some(kind)) => {
            let seed = seed.ok_or_else(|| {
                Error::Invalid(format!("{label}: design_kind without an environment seed"))
            })?;
            task_design(kind, rows, d, seed, index)?
        }
        (None, None) => {
            return Err(Error::Invalid(format!("{label}: needs design or design_kind")));
        }
    };
    if theta.len() != d {
        return Err(Error::Dimension(format!(
            "{label}: theta has {} entries, expected {d}",
            theta.len()
        )));
    }
    let task = Task::new(design, DVector::from_vec(theta), noise_sq)?;
    Ok(match kind {
        Some(k) => task.with_design_kind(k),
        None => task,
    })
}

impl EnvironmentDoc {
    fn into_environment(self) -> Result<Environment> {
        if self.tau.len() != self.d {
            return Err(Error::Dimension(format!(
                "tau has {} entries but d = {}",
                self.tau.len(),
                self.d
            )));
        }
        let prior = HyperPrior::new(self.tau, self.sigma_theta_sq)?;
        let d = self.d;
        let seed = self.seed;
        let sources = self
            .tasks
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                doc_task(
                    &format!("task {}", i + 1),
                    t.n,
                    d,
                    t.noise_sq,
                    t.theta,
                    t.design,
                    t.design_kind,
                    seed,
                    i as u64 + 1,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let nv = self.novel;
        let novel = doc_task("novel", nv.k, d, nv.noise_sq, nv.theta, nv.design, nv.design_kind, seed, 0)?;
        let env = Environment::new(prior, sources, novel)?;
        Ok(match seed {
            Some(s) => env.with_seed(s),
            None => env,
        })
    }
}
