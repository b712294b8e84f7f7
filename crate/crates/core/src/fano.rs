//! Fano-type minimax lower bounds.
//!
//! A family of `J` distributions whose parameters are pairwise `2δ` apart
//! turns estimation into decoding a uniform index. Fano's inequality bounds
//! the decoding error by mutual information, and the local packing lemmas
//! bound the mutual information by averaged pairwise KL divergences:
//!
//! ```text
//! novel data (k samples):          I ≤ k/J² · ΣΣ KL
//! product source data (M×n):       I ≤ Mn/(J²(J−1)) · ΣΣ KL
//! leave-one-out mixture (n):       I ≤ n/((J−1)J²) · ΣΣ KL
//! ```
//!
//! Divergences and mutual informations are carried in nats and converted to
//! bits where they meet `log₂ J`. Every public value names its base.
//!
//! The small discrete oracle ([`exact_task_mi`], [`map_decoder_error`])
//! computes the quantities above by exhaustive enumeration so the lemmas can
//! be checked instance by instance.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Task;
use crate::rng::{substream, Purpose};

/// Default per-variable enumeration budget (outcomes).
pub const ENUMERATION_BUDGET: u128 = 1 << 16;

/// Loss `ψ(t) = t^p` applied to Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub exponent: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec { exponent: 2.0 }
    }
}

impl LossSpec {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::Domain(format!("loss exponent must be positive, got {exponent}")));
        }
        Ok(LossSpec { exponent })
    }

    pub fn psi(&self, t: f64) -> f64 {
        t.powf(self.exponent)
    }
}

/// Pairwise KL divergences in nats. Entries may be `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct KLMatrix {
    values: DMatrix<f64>,
}

impl KLMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let j = rows.len();
        if j < 2 {
            return Err(Error::Invalid(format!("KL matrix needs at least 2 rows, got {j}")));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != j {
                return Err(Error::Dimension(format!("KL matrix row {i} has {} entries, expected {j}", r.len())));
            }
            for (c, &v) in r.iter().enumerate() {
                if v.is_nan() || v < 0.0 {
                    return Err(Error::Invalid(format!("KL matrix entry ({i}, {c}) is {v}; divergences are nonnegative")));
                }
                if i == c && v != 0.0 {
                    return Err(Error::Invalid(format!("KL matrix diagonal entry {i} is {v}, expected 0")));
                }
            }
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(KLMatrix {
            values: DMatrix::from_row_slice(j, j, &flat),
        })
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// `Σᵢ Σⱼ KL(Pᵢ‖Pⱼ)` in nats.
    pub fn total(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.size() {
            for j in 0..self.size() {
                s += self.values[(i, j)];
            }
        }
        s
    }

    /// Largest off-diagonal entry, in nats.
    pub fn max_off_diagonal(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.size() {
            for j in 0..self.size() {
                if i != j {
                    m = m.max(self.values[(i, j)]);
                }
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.size();
        (0..n).all(|i| (0..n).all(|j| (self.values[(i, j)] - self.values[(j, i)]).abs() <= tol))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for KLMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        KLMatrix::new(rows)
    }
}

impl From<KLMatrix> for Vec<Vec<f64>> {
    fn from(kl: KLMatrix) -> Self {
        kl.to_rows()
    }
}

/// Inputs of the closed-form Fano bounds. `alpha_bits` bounds every pairwise
/// KL divergence, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoInput {
    pub loss: LossSpec,
    pub delta: f64,
    pub j: usize,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub alpha_bits: f64,
}

impl FanoInput {
    /// Takes `α` as the largest off-diagonal entry of `kl`.
    pub fn from_kl(loss: LossSpec, delta: f64, kl: &KLMatrix, m: usize, n: usize, k: usize) -> Self {
        FanoInput {
            loss,
            delta,
            j: kl.size(),
            m,
            n,
            k,
            alpha_bits: kl.max_off_diagonal() / LN_2,
        }
    }

    fn check(&self) -> Result<()> {
        if self.j < 2 {
            return Err(Error::Domain(format!("a packing needs J >= 2, got {}", self.j)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Domain(format!("delta must be nonnegative, got {}", self.delta)));
        }
        if self.alpha_bits.is_nan() || self.alpha_bits < 0.0 {
            return Err(Error::Domain(format!("alpha must be nonnegative, got {}", self.alpha_bits)));
        }
        Ok(())
    }

    fn psi(&self) -> f64 {
        self.loss.psi(self.delta)
    }

    fn log2_j(&self) -> f64 {
        (self.j as f64).log2()
    }
}

fn clamp_factor(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `count · alpha`, zero when `count` is zero even for infinite `alpha`.
fn info_bits(count: f64, alpha: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * alpha
    }
}

/// `ψ(δ) · max(0, 1 − (kα + 1)/log₂ J)`.
pub fn iid_bound(input: &FanoInput) -> Result<f64> {
    input.check()?;
    let info = info_bits(input.k as f64, input.alpha_bits) + 1.0;
    Ok(input.psi() * clamp_factor(1.0 - info / input.log2_j()))
}

/// `ψ(δ) · max(0, 1 − (1 + (Mn/(J−1) + k)α)/log₂ J)`. Requires `M + 1 ≤ J`.
pub fn meta_bound(input: &FanoInput) -> Result<f64> {
    input.check()?;
    if input.m + 1 > input.j {
        return Err(Error::Domain(format!("needs M + 1 <= J, got M = {}, J = {}", input.m, input.j)));
    }
    let mn = (input.m * input.n) as f64;
    let info = 1.0 + info_bits(mn / (input.j as f64 - 1.0) + input.k as f64, input.alpha_bits);
    Ok(input.psi() * clamp_factor(1.0 - info / input.log2_j()))
}

/// `ψ(δ) · max(0, (log₂(J − M) − kα − 1)/log₂ J)`. Requires `M + 1 < J`.
pub fn partial_env_bound(input: &FanoInput) -> Result<f64> {
    input.check()?;
    if input.m + 1 >= input.j {
        return Err(Error::Domain(format!("needs M + 1 < J, got M = {}, J = {}", input.m, input.j)));
    }
    let num = ((input.j - input.m) as f64).log2() - info_bits(input.k as f64, input.alpha_bits) - 1.0;
    Ok(input.psi() * clamp_factor(num / input.log2_j()))
}

/// `ψ(δ) · max(0, 1 − (I_W + I_Z + 1)/log₂ J)` with informations in bits.
pub fn general_fano_bound(loss: LossSpec, delta: f64, j: usize, mi_w_bits: f64, mi_z_bits: f64) -> Result<f64> {
    if mi_w_bits.is_nan() || mi_z_bits.is_nan() || mi_w_bits < 0.0 || mi_z_bits < 0.0 {
        return Err(Error::Domain(format!(
            "mutual informations must be nonnegative, got {mi_w_bits} and {mi_z_bits}"
        )));
    }
    let input = FanoInput {
        loss,
        delta,
        j,
        m: 0,
        n: 0,
        k: 0,
        alpha_bits: 0.0,
    };
    input.check()?;
    Ok(input.psi() * clamp_factor(1.0 - (mi_w_bits + mi_z_bits + 1.0) / input.log2_j()))
}

/// `k/J² · ΣΣ KL`, in bits.
pub fn mi_bound_local_packing(kl: &KLMatrix, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let j = kl.size() as f64;
    k as f64 / (j * j) * kl.total() / LN_2
}

/// `Mn/(J²(J−1)) · ΣΣ KL`, in bits. Requires `M + 1 ≤ J`.
pub fn mi_bound_product_packing(kl: &KLMatrix, m: usize, n: usize) -> Result<f64> {
    let j = kl.size();
    if m + 1 > j {
        return Err(Error::Domain(format!("needs M + 1 <= J, got M = {m}, J = {j}")));
    }
    if m * n == 0 {
        return Ok(0.0);
    }
    let jf = j as f64;
    Ok((m * n) as f64 / (jf * jf * (jf - 1.0)) * kl.total() / LN_2)
}

/// `n/((J−1)J²) · ΣΣ KL`, in bits, for the leave-one-out mixture with
/// `M = J − 1` source tasks.
pub fn mi_bound_mixture_packing(kl: &KLMatrix, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let jf = kl.size() as f64;
    n as f64 / ((jf - 1.0) * jf * jf) * kl.total() / LN_2
}

/// `‖Xᵢθᵢ − Xⱼθⱼ‖² / (2σ²)`, the KL divergence in nats between two Gaussian
/// linear models with a shared design size and noise level.
pub fn gaussian_lr_kl(task_i: &Task, task_j: &Task, shared_noise_sq: f64) -> Result<f64> {
    if task_i.rows() != task_j.rows() {
        return Err(Error::Dimension(format!(
            "KL needs equal row counts, got {} and {}",
            task_i.rows(),
            task_j.rows()
        )));
    }
    if !(shared_noise_sq > 0.0 && shared_noise_sq.is_finite()) {
        return Err(Error::Domain(format!("noise variance must be positive, got {shared_noise_sq}")));
    }
    let mi = task_i.design().as_dmatrix() * task_i.theta();
    let mj = task_j.design().as_dmatrix() * task_j.theta();
    Ok((mi - mj).norm_squared() / (2.0 * shared_noise_sq))
}

/// Pairwise [`gaussian_lr_kl`] over a list of tasks.
pub fn kl_matrix(tasks: &[Task], shared_noise_sq: f64) -> Result<KLMatrix> {
    if tasks.len() < 2 {
        return Err(Error::Invalid(format!("KL matrix needs at least 2 tasks, got {}", tasks.len())));
    }
    let rows = tasks
        .iter()
        .map(|a| {
            tasks
                .iter()
                .map(|b| {
                    if std::ptr::eq(a, b) {
                        Ok(0.0)
                    } else {
                        gaussian_lr_kl(a, b, shared_noise_sq)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    KLMatrix::new(rows)
}

/// KL divergence between two probability vectors, in nats.
pub fn discrete_kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            s += a * (a / b).ln();
        }
    }
    s.max(0.0)
}

/// How source data are drawn in the discrete oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Source task `j` draws `n` samples from `P_{π_j}`.
    Product,
    /// `n` samples from the mixture of every distribution except the novel
    /// one; requires `M = J − 1`.
    Mixture,
}

/// `J` distributions over a finite alphabet with the sample sizes of a
/// meta-learning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeta {
    pub dists: Vec<Vec<f64>>,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub scheme: Scheme,
}

impl DiscreteMeta {
    pub fn new(dists: Vec<Vec<f64>>, m: usize, n: usize, k: usize, scheme: Scheme) -> Result<Self> {
        let dm = DiscreteMeta { dists, m, n, k, scheme };
        dm.validate()?;
        Ok(dm)
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.dists.len();
        if j < 2 {
            return Err(Error::Invalid(format!("need at least 2 distributions, got {j}")));
        }
        let a = self.dists[0].len();
        if a == 0 {
            return Err(Error::Invalid("empty alphabet".into()));
        }
        for (i, p) in self.dists.iter().enumerate() {
            if p.len() != a {
                return Err(Error::Dimension(format!("distribution {i} has {} symbols, expected {a}", p.len())));
            }
            if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Invalid(format!("distribution {i} has a negative or non-finite entry")));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!("distribution {i} sums to {s}")));
            }
        }
        match self.scheme {
            Scheme::Product if self.m + 1 > j => Err(Error::Domain(format!(
                "product scheme needs M + 1 <= J, got M = {}, J = {j}",
                self.m
            ))),
            Scheme::Mixture if self.m + 1 != j => Err(Error::Domain(format!(
                "mixture scheme needs M = J - 1, got M = {}, J = {j}",
                self.m
            ))),
            _ => Ok(()),
        }
    }

    pub fn num_dists(&self) -> usize {
        self.dists.len()
    }

    pub fn alphabet(&self) -> usize {
        self.dists[0].len()
    }

    /// Pairwise discrete KL divergences, in nats.
    pub fn kl_matrix(&self) -> KLMatrix {
        let rows = self
            .dists
            .iter()
            .enumerate()
            .map(|(i, p)| {
                self.dists
                    .iter()
                    .enumerate()
                    .map(|(j, q)| if i == j { 0.0 } else { discrete_kl(p, q) })
                    .collect()
            })
            .collect();
        KLMatrix::new(rows).expect("discrete divergences are valid")
    }

    fn source_samples(&self) -> usize {
        match self.scheme {
            Scheme::Product => self.m * self.n,
            Scheme::Mixture => self.n,
        }
    }
}

fn outcome_count(alphabet: usize, samples: usize, budget: u128) -> Result<usize> {
    let mut count: u128 = 1;
    for _ in 0..samples {
        count = count.saturating_mul(alphabet as u128);
        if count > budget {
            let outcomes = (alphabet as u128).checked_pow(samples as u32).unwrap_or(u128::MAX);
            return Err(Error::Budget { outcomes, budget });
        }
    }
    Ok(count as usize)
}

/// Distribution of `reps` iid draws from `p`, flattened with the first draw
/// as the most significant digit.
fn iid_power(p: &[f64], reps: usize) -> Vec<f64> {
    let mut dist = vec![1.0];
    for _ in 0..reps {
        dist = kron(&dist, p);
    }
    dist
}

fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Finite joint distribution of an index `Y` (rows) and an observation
/// (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    probs: Vec<Vec<f64>>,
}

impl JointDistribution {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let cols = probs.first().map_or(0, Vec::len);
        if probs.is_empty() || cols == 0 {
            return Err(Error::Invalid("joint distribution is empty".into()));
        }
        if probs.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("joint distribution rows differ in length".into()));
        }
        if probs.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Invalid("joint distribution has a negative or non-finite entry".into()));
        }
        let total: f64 = probs.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("joint distribution sums to {total}")));
        }
        Ok(JointDistribution { probs })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    fn index_marginal(&self) -> Vec<f64> {
        self.probs.iter().map(|r| r.iter().sum()).collect()
    }

    fn outcome_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.probs[0].len()];
        for r in &self.probs {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        m
    }

    /// `I(Y; O)` in nats.
    pub fn mutual_information(&self) -> f64 {
        let py = self.index_marginal();
        let po = self.outcome_marginal();
        let mut s = 0.0;
        for (r, &y) in self.probs.iter().zip(&py) {
            for (&p, &o) in r.iter().zip(&po) {
                if p > 0.0 {
                    s += p * (p / (y * o)).ln();
                }
            }
        }
        s.max(0.0)
    }

    /// `H(Y | O)` in bits.
    pub fn conditional_entropy_bits(&self) -> f64 {
        let po = self.outcome_marginal();
        let mut h = 0.0;
        for r in &self.probs {
            for (&p, &o) in r.iter().zip(&po) {
                if p > 0.0 {
                    h -= p * (p / o).log2();
                }
            }
        }
        h.max(0.0)
    }

    /// Right-hand side of Fano's inequality, `(H(Y|O) − 1)/log₂ |Y|`.
    pub fn fano_lower_bound(&self) -> f64 {
        let j = self.probs.len();
        if j < 2 {
            return 0.0;
        }
        (self.conditional_entropy_bits() - 1.0) / (j as f64).log2()
    }
}

/// Error probability of the maximum-posterior decoder of `Y` from the
/// observation: `1 − Σ_o max_y p(y, o)`.
pub fn map_decoder_error(joint: &JointDistribution) -> f64 {
    let cols = joint.probs[0].len();
    let hit: f64 = (0..cols)
        .map(|c| joint.probs.iter().map(|r| r[c]).fold(0.0, f64::max))
        .sum();
    (1.0 - hit).max(0.0)
}

fn permutations(j: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..j).collect();
    heap_permute(j, &mut current, &mut out);
    out
}

fn heap_permute(size: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if size <= 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..size {
        heap_permute(size - 1, a, out);
        if size % 2 == 1 {
            a.swap(0, size - 1);
        } else {
            a.swap(i, size - 1);
        }
    }
}

/// Conditional distributions of the source data given the novel index.
fn source_rows(dm: &DiscreteMeta) -> Vec<Vec<f64>> {
    let j = dm.num_dists();
    match dm.scheme {
        Scheme::Product => {
            // Average over uniformly random orderings with π_{M+1} = y.
            let blocks: Vec<Vec<f64>> = dm.dists.iter().map(|p| iid_power(p, dm.n)).collect();
            let perms = permutations(j);
            let per_index = (perms.len() / j) as f64;
            let size = blocks[0].len().pow(dm.m as u32);
            let mut rows = vec![vec![0.0; size]; j];
            for pi in &perms {
                let y = pi[dm.m];
                let mut dist = vec![1.0];
                for &t in &pi[..dm.m] {
                    dist = kron(&dist, &blocks[t]);
                }
                for (acc, v) in rows[y].iter_mut().zip(&dist) {
                    *acc += v / per_index;
                }
            }
            rows
        }
        Scheme::Mixture => (0..j)
            .map(|y| {
                let a = dm.alphabet();
                let mix: Vec<f64> = (0..a)
                    .map(|s| {
                        dm.dists
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| *i != y)
                            .map(|(_, p)| p[s])
                            .sum::<f64>()
                            / (j as f64 - 1.0)
                    })
                    .collect();
                iid_power(&mix, dm.n)
            })
            .collect(),
    }
}

fn joint_from_rows(rows: Vec<Vec<f64>>) -> JointDistribution {
    let j = rows.len() as f64;
    JointDistribution {
        probs: rows.into_iter().map(|r| r.into_iter().map(|v| v / j).collect()).collect(),
    }
}

/// Joint distribution of the novel index and the source data.
pub fn source_joint(dm: &DiscreteMeta) -> Result<JointDistribution> {
    dm.validate()?;
    outcome_count(dm.alphabet(), dm.source_samples(), ENUMERATION_BUDGET)?;
    Ok(joint_from_rows(source_rows(dm)))
}

/// Joint distribution of the novel index and the novel data.
pub fn novel_joint(dm: &DiscreteMeta) -> Result<JointDistribution> {
    dm.validate()?;
    outcome_count(dm.alphabet(), dm.k, ENUMERATION_BUDGET)?;
    Ok(joint_from_rows(dm.dists.iter().map(|p| iid_power(p, dm.k)).collect()))
}

/// `(I(π_{M+1}; W), I(π_{M+1}; Z))` in bits by exhaustive enumeration.
pub fn exact_task_mi(dm: &DiscreteMeta) -> Result<(f64, f64)> {
    let w = source_joint(dm)?.mutual_information() / LN_2;
    let z = novel_joint(dm)?.mutual_information() / LN_2;
    Ok((w, z))
}

/// `I(π_{M+1}; (W, Z))` in bits. Source and novel data are independent
/// given the novel index, so the joint row is the outer product of the two
/// conditionals.
pub fn exact_joint_mi(dm: &DiscreteMeta) -> Result<f64> {
    dm.validate()?;
    outcome_count(dm.alphabet(), dm.source_samples() + dm.k, ENUMERATION_BUDGET)?;
    let src = source_rows(dm);
    let rows = src
        .into_iter()
        .zip(&dm.dists)
        .map(|(w, p)| kron(&w, &iid_power(p, dm.k)))
        .collect();
    Ok(joint_from_rows(rows).mutual_information() / LN_2)
}

/// A `2δ`-separated set of parameter vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingSet {
    pub centers: Vec<Vec<f64>>,
    pub delta: f64,
    pub pairwise_dist: Vec<Vec<f64>>,
}

impl PackingSet {
    pub fn size(&self) -> usize {
        self.centers.len()
    }

    /// Smallest off-diagonal distance; infinite for fewer than two centers.
    pub fn min_separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for (i, row) in self.pairwise_dist.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i != j {
                    m = m.min(v);
                }
            }
        }
        m
    }

    /// Recomputes the distance matrix and checks every pair is at least
    /// `2δ` apart (up to one part in 10¹²) and every center is in the unit
    /// ball.
    pub fn verify(&self) -> bool {
        let floor = 2.0 * self.delta * (1.0 - 1e-12);
        let in_ball = self.centers.iter().all(|c| norm(c) <= 1.0 + 1e-12);
        let separated = self.centers.iter().enumerate().all(|(i, a)| {
            self.centers[i + 1..].iter().all(|b| distance(a, b) >= floor)
        });
        in_ball && separated && self.min_separation() >= floor
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Greedy `½`-packing of the unit ball, scaled by `4δ`.
///
/// Uniform candidates from the unit ball are accepted when at least `½` from
/// every accepted point; the search stops after `budget` consecutive
/// rejections. Scaling by `4δ` gives pairwise distances of at least `2δ`
/// inside a ball of radius `4δ`, so `δ` must lie in `(0, ¼]`.
pub fn greedy_packing(d: usize, delta: f64, budget: usize, seed: u64) -> Result<PackingSet> {
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    if !(delta > 0.0 && delta <= 0.25) {
        return Err(Error::Domain(format!("delta must lie in (0, 1/4], got {delta}")));
    }
    if budget == 0 {
        return Err(Error::Domain("budget must be positive".into()));
    }
    let mut rng = substream(seed, Purpose::Packing, d as u64);
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    let mut misses = 0usize;
    while misses < budget {
        let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = norm(&dir);
        if len == 0.0 {
            continue;
        }
        let radius = rng.random::<f64>().powf(1.0 / d as f64);
        let cand: Vec<f64> = dir.iter().map(|x| x / len * radius).collect();
        if accepted.iter().all(|c| distance(c, &cand) >= 0.5) {
            accepted.push(cand);
            misses = 0;
        } else {
            misses += 1;
        }
    }
    let scale = 4.0 * delta;
    let centers: Vec<Vec<f64>> = accepted
        .into_iter()
        .map(|c| c.into_iter().map(|x| x * scale).collect())
        .collect();
    let pairwise_dist = centers
        .iter()
        .map(|a| centers.iter().map(|b| distance(a, b)).collect())
        .collect();
    Ok(PackingSet {
        centers,
        delta,
        pairwise_dist,
    })
}

/// `δ² = dσ² / (64γ²(2^{−d}Mn + k))`, the squared packing radius used for
/// linear regression.
pub fn lr_packing_delta_sq(d: usize, sigma_sq: f64, gamma: f64, m: usize, n: usize, k: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::Domain(format!(
            "the linear-regression lower bound assumes d > 2, got d = {d}"
        )));
    }
    if !(sigma_sq > 0.0 && sigma_sq.is_finite() && gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain("sigma_sq and gamma must be positive".into()));
    }
    let eff = (m * n) as f64 * 0.5f64.powi(d as i32) + k as f64;
    if eff <= 0.0 {
        return Err(Error::Domain("no data: M n = 0 and k = 0".into()));
    }
    Ok(d as f64 * sigma_sq / (64.0 * gamma * gamma * eff))
}

/// Minimax lower bound for meta linear regression with squared loss:
/// `δ² · min(¼, ½ − 1/d)`.
///
/// The Fano factor is `1 − (I + 1)/log₂ J ≥ ½ − 1/d` with `J ≥ 2^d`; it
/// reaches `¼` only from `d = 4`, so for `d = 3` the factor `1/6` is used.
pub fn lr_lower_bound(d: usize, sigma_sq: f64, gamma: f64, m: usize, n: usize, k: usize) -> Result<f64> {
    let delta_sq = lr_packing_delta_sq(d, sigma_sq, gamma, m, n, k)?;
    let factor = (0.5 - 1.0 / d as f64).min(0.25);
    Ok(delta_sq * factor)
}

/// Monte Carlo estimate of `KL(P_a‖P_b)` for two Gaussian linear models from
/// the mean log-likelihood ratio over `samples` draws of `y ~ P_a`. Returns
/// `(mean, standard error)` in nats.
pub fn gaussian_lr_kl_monte_carlo(
    task_a: &Task,
    task_b: &Task,
    shared_noise_sq: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if task_a.rows() != task_b.rows() {
        return Err(Error::Dimension("KL needs equal row counts".into()));
    }
    if samples < 2 {
        return Err(Error::Invalid("need at least 2 samples".into()));
    }
    let ma: DVector<f64> = task_a.design().as_dmatrix() * task_a.theta();
    let mb: DVector<f64> = task_b.design().as_dmatrix() * task_b.theta();
    let sd = shared_noise_sq.sqrt();
    let mut rng = substream(seed, Purpose::Observations, 0);
    let vals: Vec<f64> = (0..samples)
        .map(|_| {
            let mut s = 0.0;
            for r in 0..ma.len() {
                let y = ma[r] + sd * rng.sample::<f64, _>(StandardNormal);
                s += ((y - mb[r]).powi(2) - (y - ma[r]).powi(2)) / (2.0 * shared_noise_sq);
            }
            s
        })
        .collect();
    let n = samples as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
