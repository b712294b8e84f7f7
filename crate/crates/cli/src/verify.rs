//! Randomized verification suites for the matrix lemmas, the
//! mutual-information lemmas, Fano's inequality and the packing construction.
//!
//! Every suite records how many instances it checked, how many failed, the
//! worst slack (bound minus checked quantity; negative means violated) and
//! the failing instances in replayable form.

use metarisk::fano::{
    exact_joint_mi, exact_task_mi, general_fano_bound, greedy_packing, map_decoder_error, meta_bound,
    mi_bound_local_packing, mi_bound_mixture_packing, mi_bound_product_packing, novel_joint, source_joint,
    DiscreteMeta, FanoInput, KLMatrix, LossSpec, Scheme,
};
use metarisk::matan::{singular_extremes, von_neumann_bound};
use metarisk::rng::{substream, Purpose};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::VerifySection;

/// Relative slack allowed on singular-value and trace inequalities.
pub const MATRIX_RTOL: f64 = 1e-10;
/// Absolute slack, in bits, on mutual-information inequalities.
pub const MI_TOL_BITS: f64 = 1e-10;
/// Absolute slack on decoder error probabilities.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    pub worst_slack: Option<f64>,
    pub failures: Vec<Value>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport {
            name: name.into(),
            instances: 0,
            passed: 0,
            failed: 0,
            worst_slack: None,
            failures: Vec::new(),
        }
    }

    /// Records one check with slack `bound − value`; fails below `-tol`.
    fn check(&mut self, slack: f64, tol: f64, instance: impl FnOnce() -> Value) {
        self.instances += 1;
        self.worst_slack = Some(match self.worst_slack {
            Some(w) => w.min(slack),
            None => slack,
        });
        if slack >= -tol && !slack.is_nan() {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.failures.len() < 20 {
                self.failures.push(instance());
            }
        }
    }

    fn fail(&mut self, instance: Value) {
        self.instances += 1;
        self.failed += 1;
        self.failures.push(instance);
    }

    fn merge(&mut self, other: SuiteReport) {
        self.instances += other.instances;
        self.passed += other.passed;
        self.failed += other.failed;
        self.worst_slack = match (self.worst_slack, other.worst_slack) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        for f in other.failures {
            if self.failures.len() < 20 {
                self.failures.push(f);
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
    pub total_instances: usize,
    pub total_failures: usize,
}

impl VerifyReport {
    pub fn suite(&self, name: &str) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn passed(&self) -> bool {
        self.total_failures == 0
    }
}

fn gaussian_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
}

fn spd_matrix(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<f64> {
    let r = gaussian_matrix(rng, n, n);
    let a = &r * r.transpose() + DMatrix::identity(n, n) * 1e-3;
    (&a + a.transpose()) * 0.5
}

fn smax(a: &DMatrix<f64>) -> f64 {
    singular_extremes(a).map(|e| e.s_max).unwrap_or(f64::NAN)
}

fn smin(a: &DMatrix<f64>) -> f64 {
    singular_extremes(a).map(|e| e.s_min).unwrap_or(f64::NAN)
}

fn matrix_json(a: &DMatrix<f64>) -> Value {
    json!(a.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

/// Singular values of sums (general and positive-definite branches),
/// products, and the trace inequality, `pairs` random pairs each.
pub fn matrix_lemma_suites(pairs: usize, seed: u64) -> Vec<SuiteReport> {
    let per_pair: Vec<[SuiteReport; 3]> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, Purpose::MonteCarlo, 1_000_000 + i as u64);
            let n = rng.random_range(1..=6usize);
            let (a, b) = (gaussian_matrix(&mut rng, n, n), gaussian_matrix(&mut rng, n, n));
            let (pa, pb) = (spd_matrix(&mut rng, n), spd_matrix(&mut rng, n));
            let pair = || json!({"pair": i, "a": matrix_json(&a), "b": matrix_json(&b), "spd_a": matrix_json(&pa), "spd_b": matrix_json(&pb)});

            let mut sum = SuiteReport::new("matrix_sum");
            let rhs = smax(&a) + smax(&b);
            sum.check(rhs - smax(&(&a + &b)), MATRIX_RTOL * rhs, pair);
            let lhs = smin(&pa) + smin(&pb);
            sum.check(smin(&(&pa + &pb)) - lhs, MATRIX_RTOL * smax(&(&pa + &pb)), pair);

            let mut product = SuiteReport::new("matrix_product");
            let rhs = smax(&a) * smax(&b);
            product.check(rhs - smax(&(&a * &b)), MATRIX_RTOL * rhs, pair);
            let lhs = smin(&a) * smin(&b);
            product.check(smin(&(&a * &b)) - lhs, MATRIX_RTOL * rhs, pair);

            let mut trace = SuiteReport::new("matrix_trace");
            let vn = von_neumann_bound(&a, &b).unwrap_or(f64::NAN);
            let tr = (&a * &b).trace().abs();
            let outer = n as f64 * smax(&a) * smax(&b);
            trace.check(vn - tr, MATRIX_RTOL * outer, pair);
            trace.check(outer - vn, MATRIX_RTOL * outer, pair);
            [sum, product, trace]
        })
        .collect();
    let mut out = [
        SuiteReport::new("matrix_sum"),
        SuiteReport::new("matrix_product"),
        SuiteReport::new("matrix_trace"),
    ];
    for reports in per_pair {
        for (acc, r) in out.iter_mut().zip(reports) {
            acc.merge(r);
        }
    }
    out.into()
}

fn random_dist(rng: &mut ChaCha20Rng, alphabet: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..alphabet).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    if rng.random_bool(0.15) {
        let z = rng.random_range(0..alphabet);
        w[z] = 0.0;
        if w.iter().all(|v| *v == 0.0) {
            w[(z + 1) % alphabet] = 1.0;
        }
    }
    let s: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|v| v / s).collect();
    let drift: f64 = 1.0 - p.iter().sum::<f64>();
    let top = (0..alphabet).max_by(|&i, &j| p[i].total_cmp(&p[j])).unwrap_or(0);
    p[top] += drift;
    p
}

/// A random instance with `J ≤ 4`, alphabet `≤ 4`, `Mn ≤ 8`, `k ≤ 8`.
pub fn random_discrete_instance(seed: u64, index: u64) -> DiscreteMeta {
    let mut rng = substream(seed, Purpose::MonteCarlo, 2_000_000 + index);
    let j = rng.random_range(2..=4usize);
    let a = rng.random_range(2..=4usize);
    let dists = (0..j).map(|_| random_dist(&mut rng, a)).collect();
    let k = rng.random_range(0..=8usize);
    let (m, n, scheme) = if rng.random_bool(0.3) {
        let m = j - 1;
        (m, rng.random_range(1..=8 / m), Scheme::Mixture)
    } else {
        let m = rng.random_range(0..j);
        let n = rng.random_range(1..=8usize.checked_div(m).unwrap_or(8));
        (m, n, Scheme::Product)
    };
    DiscreteMeta::new(dists, m, n, k, scheme).expect("generated instance is valid")
}

/// Information-lemma and Fano suites over `instances` random discrete
/// problems.
pub fn information_suites(instances: usize, seed: u64) -> Vec<SuiteReport> {
    let names = [
        "mi_local_packing",
        "mi_product_packing",
        "mi_mixture_packing",
        "mi_subadditivity",
        "fano_decoder",
        "fano_general_vs_meta",
    ];
    let per: Vec<Vec<SuiteReport>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let dm = random_discrete_instance(seed, i as u64);
            let mut r: Vec<SuiteReport> = names.iter().map(|n| SuiteReport::new(n)).collect();
            let inst = || json!({"index": i, "instance": dm});
            let (iw, iz) = match exact_task_mi(&dm) {
                Ok(v) => v,
                Err(e) => {
                    r[0].fail(json!({"index": i, "instance": dm, "error": e.to_string()}));
                    return r;
                }
            };
            let kl = dm.kl_matrix();
            let local = mi_bound_local_packing(&kl, dm.k);
            r[0].check(local - iz, MI_TOL_BITS, inst);
            let source_bound = match dm.scheme {
                Scheme::Product => {
                    let b = mi_bound_product_packing(&kl, dm.m, dm.n).expect("M + 1 <= J by construction");
                    r[1].check(b - iw, MI_TOL_BITS, inst);
                    b
                }
                Scheme::Mixture => {
                    let b = mi_bound_mixture_packing(&kl, dm.n);
                    r[2].check(b - iw, MI_TOL_BITS, inst);
                    b
                }
            };
            if let Ok(joint) = exact_joint_mi(&dm) {
                r[3].check(iw + iz - joint, MI_TOL_BITS, inst);
            }
            for joint in [novel_joint(&dm), source_joint(&dm)].into_iter().flatten() {
                r[4].check(map_decoder_error(&joint) - joint.fano_lower_bound(), PROB_TOL, inst);
            }
            if dm.scheme == Scheme::Product {
                let loss = LossSpec::default();
                let input = FanoInput::from_kl(loss, 1.0, &kl, dm.m, dm.n, dm.k);
                let meta = meta_bound(&input).expect("M + 1 <= J by construction");
                let general = general_fano_bound(loss, 1.0, dm.num_dists(), source_bound, local)
                    .expect("lemma bounds are nonnegative");
                r[5].check(general - meta, 1e-12, inst);
            }
            r
        })
        .collect();
    let mut out: Vec<SuiteReport> = names.iter().map(|n| SuiteReport::new(n)).collect();
    for reports in per {
        for (acc, r) in out.iter_mut().zip(reports) {
            acc.merge(r);
        }
    }
    out
}

/// Greedy packings in each dimension: `J ≥ 2^d` and `2δ` separation.
pub fn packing_suite(dims: &[usize], delta: f64, budget: usize, seed: u64) -> SuiteReport {
    let mut s = SuiteReport::new("packing_separation");
    let results: Vec<_> = dims
        .par_iter()
        .map(|&d| (d, greedy_packing(d, delta, budget, seed)))
        .collect();
    for (d, res) in results {
        match res {
            Ok(p) => {
                let j = p.size();
                let ok = p.verify();
                let need = 1usize << d.min(62);
                let margin = if ok { j as f64 - need as f64 } else { f64::NEG_INFINITY };
                s.check(margin, 0.0, || {
                    json!({"d": d, "delta": delta, "budget": budget, "seed": seed, "size": j, "separated": ok})
                });
            }
            Err(e) => s.fail(json!({"d": d, "delta": delta, "error": e.to_string()})),
        }
    }
    s
}

/// Validates injected KL matrices; an invalid entry is a named failure.
pub fn kl_matrix_suite(matrices: &[Vec<Vec<f64>>]) -> SuiteReport {
    let mut s = SuiteReport::new("kl_matrix_validation");
    for (i, rows) in matrices.iter().enumerate() {
        match KLMatrix::new(rows.clone()) {
            Ok(kl) => {
                let loss = LossSpec::default();
                let lemma = mi_bound_local_packing(&kl, 1);
                let alpha = FanoInput::from_kl(loss, 1.0, &kl, 0, 0, 1).alpha_bits;
                s.check(alpha - lemma, MI_TOL_BITS, || json!({"kl_matrices": i, "matrix": rows}));
            }
            Err(e) => s.fail(json!({"kl_matrices": i, "matrix": rows, "error": format!("kl_matrices[{i}]: {e}")})),
        }
    }
    s
}

/// Runs every suite.
pub fn run_all(opts: &VerifySection, seed: u64) -> VerifyReport {
    let mut suites = matrix_lemma_suites(opts.matrix_pairs, seed);
    suites.extend(information_suites(opts.mi_instances, seed));
    suites.push(packing_suite(&opts.packing_dims, opts.packing_delta, opts.packing_budget, seed));
    if !opts.kl_matrices.is_empty() {
        suites.push(kl_matrix_suite(&opts.kl_matrices));
    }
    let total_instances = suites.iter().map(|s| s.instances).sum();
    let total_failures = suites.iter().map(|s| s.failed).sum();
    VerifyReport {
        seed,
        suites,
        total_instances,
        total_failures,
    }
}
