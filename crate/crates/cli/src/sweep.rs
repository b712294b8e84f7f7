//! Risk and bound sweeps over a grid.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use metarisk::fano::lr_lower_bound;
use metarisk::matan::singular_extremes;
use metarisk::model::{bound_constants, sample_environment};
use metarisk::posterior::PosteriorPlan;
use metarisk::risk::{asymptotic_bound, bayes_averaged_risk, exact_risk_with_plan, mc_risk, thm52_bound};
use metarisk::rng::{derive_seed, Purpose};
use metarisk::{Environment, Error};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Axis, ConfigEntry, RiskMode, SweepConfig};
use crate::CliError;

pub const CSV_HEADER: &str =
    "config_id,sweep_value,risk_exact,bias_sq,var_novel,var_source,risk_mc,risk_mc_se,upper_thm52,upper_asymptotic,lower_thm51";

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub config_id: String,
    pub sweep_value: f64,
    pub count_axis: bool,
    pub risk_exact: Option<f64>,
    pub bias_sq: Option<f64>,
    pub var_novel: Option<f64>,
    pub var_source: Option<f64>,
    pub risk_mc: Option<f64>,
    pub risk_mc_se: Option<f64>,
    pub upper_thm52: Option<f64>,
    pub upper_asymptotic: Option<f64>,
    pub lower_thm51: Option<f64>,
}

/// Shortest text that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

fn cell(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        let sweep = if self.count_axis {
            format!("{}", self.sweep_value as u64)
        } else {
            format_f64(self.sweep_value)
        };
        [
            self.config_id.clone(),
            sweep,
            cell(self.risk_exact),
            cell(self.bias_sq),
            cell(self.var_novel),
            cell(self.var_source),
            cell(self.risk_mc),
            cell(self.risk_mc_se),
            cell(self.upper_thm52),
            cell(self.upper_asymptotic),
            cell(self.lower_thm51),
        ]
        .join(",")
    }
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

/// Which column groups to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Columns {
    pub risk: bool,
    pub monte_carlo: bool,
    pub bounds: bool,
}

/// Sweep output: rows in config-then-grid order plus deduplicated warnings.
#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub warnings: Vec<String>,
}

fn numerical(context: &str, e: Error) -> CliError {
    if e.is_numerical() {
        CliError::numerical(format!("{context}: {e}"))
    } else {
        CliError::validation(format!("{context}: {e}"))
    }
}

/// Largest singular value of any design over the square root of its rows.
fn gamma_max(env: &Environment) -> Result<f64, Error> {
    let mut g = 0.0f64;
    for t in env.source_tasks().iter().chain(std::iter::once(env.novel_task())) {
        let s = singular_extremes(t.design())?.s_max / (t.rows() as f64).sqrt();
        g = g.max(s);
    }
    Ok(g)
}

fn evaluate_point(
    cfg: &SweepConfig,
    entry: &ConfigEntry,
    index: usize,
    value: f64,
    cols: Columns,
) -> Result<(ResultRow, Vec<String>), CliError> {
    let context = format!("config {} at {value}", entry.id);
    let p = cfg.point(entry, value)?;
    let prior = cfg.prior()?;
    let env = sample_environment(&prior, &cfg.spec_for(p), cfg.sweep.seed).map_err(|e| numerical(&context, e))?;
    let d = env.dim();
    let mut warnings = Vec::new();
    let mut row = ResultRow {
        config_id: entry.id.clone(),
        sweep_value: value,
        count_axis: cfg.axis_of(entry).is_count(),
        risk_exact: None,
        bias_sq: None,
        var_novel: None,
        var_source: None,
        risk_mc: None,
        risk_mc_se: None,
        upper_thm52: None,
        upper_asymptotic: None,
        lower_thm51: None,
    };

    if cols.risk {
        if p.m == 0 {
            warnings.push(format!("config {}: M = 0 leaves the hyper-mean unidentified; risk columns empty", entry.id));
        } else {
            let report = match cfg.sweep.risk_mode {
                RiskMode::Frequentist => {
                    let plan = PosteriorPlan::new(&env, cfg.sweep.solve_path).map_err(|e| numerical(&context, e))?;
                    exact_risk_with_plan(&env, &plan)
                }
                RiskMode::BayesAveraged => {
                    let seed = derive_seed(cfg.sweep.seed, Purpose::ParameterDraws, index as u64);
                    bayes_averaged_risk(&env, cfg.sweep.theta_draws, seed, cfg.environment.clip_to_unit_ball)
                        .map_err(|e| numerical(&context, e))?
                }
            };
            row.risk_exact = Some(report.total);
            row.bias_sq = Some(report.bias_sq);
            row.var_novel = Some(report.var_novel);
            row.var_source = Some(report.var_source);
            if cols.monte_carlo && cfg.sweep.reps > 0 {
                if cfg.sweep.risk_mode == RiskMode::BayesAveraged {
                    warnings.push("Monte Carlo columns are left empty in bayes_averaged mode".into());
                } else if cfg.sweep.reps < 2 {
                    warnings.push("reps = 1 is too few for a standard error; Monte Carlo columns empty".into());
                } else {
                    let seed = derive_seed(cfg.sweep.seed, Purpose::MonteCarlo, index as u64);
                    let (mean, se) = mc_risk(&env, cfg.sweep.reps, seed).map_err(|e| numerical(&context, e))?;
                    row.risk_mc = Some(mean);
                    row.risk_mc_se = Some(se);
                }
            }
        }
    }

    if cols.bounds {
        match bound_constants(&env, cfg.sweep.constants_mode) {
            Ok(c) => {
                match thm52_bound(&c, d, p.m, p.n, p.k) {
                    Ok(b) => row.upper_thm52 = Some(b.thm52_value),
                    Err(e) => warnings.push(format!("config {}: upper bound unavailable: {e}", entry.id)),
                }
                row.upper_asymptotic = Some(asymptotic_bound(c.alpha2, p.m, c.kappa, p.k, d, c.sigma_novel_sq));
            }
            Err(e) => warnings.push(format!("config {}: upper-bound constants unavailable: {e}", entry.id)),
        }
        if d <= 2 {
            warnings.push(format!("d = {d}: the linear-regression lower bound needs d > 2; lower_thm51 column empty"));
        } else {
            let gamma = gamma_max(&env).map_err(|e| numerical(&context, e))?;
            match lr_lower_bound(d, p.noise_sq_novel, gamma, p.m, p.n, p.k) {
                Ok(v) => row.lower_thm51 = Some(v),
                Err(e) => warnings.push(format!("config {}: lower bound unavailable: {e}", entry.id)),
            }
        }
    }
    Ok((row, warnings))
}

/// Evaluates every `(config, grid point)` pair in parallel and returns the
/// rows in config-then-grid order.
pub fn run(cfg: &SweepConfig, cols: Columns) -> Result<SweepResult, CliError> {
    cfg.validate()?;
    let jobs: Vec<(usize, &ConfigEntry, f64)> = cfg
        .configs
        .iter()
        .flat_map(|c| cfg.sweep.grid.iter().map(move |&v| (c, v)))
        .enumerate()
        .map(|(i, (c, v))| (i, c, v))
        .collect();
    let results: Vec<Result<(ResultRow, Vec<String>), CliError>> = jobs
        .par_iter()
        .map(|&(i, c, v)| evaluate_point(cfg, c, i, v, cols))
        .collect();
    let mut out = SweepResult::default();
    let mut seen = BTreeSet::new();
    for r in results {
        let (row, warns) = r?;
        out.rows.push(row);
        for w in warns {
            if seen.insert(w.clone()) {
                out.warnings.push(w);
            }
        }
    }
    Ok(out)
}

/// Rows of one config in grid order.
pub fn series<'a>(rows: &'a [ResultRow], id: &str) -> Vec<&'a ResultRow> {
    rows.iter().filter(|r| r.config_id == id).collect()
}

/// One-line-per-config digest for standard output.
pub fn summary(cfg: &SweepConfig, result: &SweepResult) -> String {
    let mut s = String::new();
    for c in &cfg.configs {
        let rows = series(&result.rows, &c.id);
        let risks: Vec<f64> = rows.iter().filter_map(|r| r.risk_exact).collect();
        let axis = match cfg.axis_of(c) {
            Axis::NovelNoiseSq => "novel_noise_sq",
            Axis::TotalDataAddTasks => "total_data_add_tasks",
            Axis::TotalDataAddK => "total_data_add_k",
            Axis::K => "k",
            Axis::N => "n",
            Axis::M => "M",
        };
        if risks.is_empty() {
            let _ = writeln!(s, "{}: {} points over {axis}", c.id, rows.len());
        } else {
            let lo = risks.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = risks.iter().copied().fold(0.0, f64::max);
            let _ = writeln!(
                s,
                "{}: {} points over {axis}, exact risk in [{}, {}]",
                c.id,
                rows.len(),
                format_f64(lo),
                format_f64(hi)
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        SweepConfig::parse(
            r#"
[environment]
tau = [0.2, -0.1, 0.3]
sigma_theta_sq = 0.1
noise_sq_source = 0.05
noise_sq_novel = 0.5

[sweep]
axis = "novel_noise_sq"
grid = [0.5]
reps = 0

[[configs]]
id = "x"
m = 3
n = 5
k = 4
"#,
        )
        .unwrap()
    }

    #[test]
    fn zero_reps_leaves_mc_empty() {
        let all = Columns { risk: true, monte_carlo: true, bounds: true };
        let r = run(&small(), all).unwrap();
        assert_eq!(r.rows.len(), 1);
        let row = &r.rows[0];
        assert!(row.risk_exact.is_some() && row.risk_mc.is_none() && row.risk_mc_se.is_none());
        let line = row.csv_line();
        assert_eq!(line.split(',').count(), 11);
        let total = row.bias_sq.unwrap() + row.var_novel.unwrap() + row.var_source.unwrap();
        assert_eq!(row.risk_exact.unwrap(), total);
    }

    #[test]
    fn formatting_round_trips() {
        for v in [0.1, 1e-300, 123456.789, 1.0 / 3.0, 2.0] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
