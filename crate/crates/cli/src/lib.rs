//! Command implementations behind the `metarisk` binary.
//!
//! Every command reads a TOML config (or a bundled preset), writes its
//! artifacts under an output directory, and reports through [`Outcome`].
//! Exit codes: 0 success, 1 validation error, 2 numerical failure, 3
//! verification-suite failure.

pub mod config;
pub mod sweep;
pub mod verify;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use metarisk::fano::greedy_packing;
use metarisk::model::{sample_environment, sample_observations};
use metarisk::rng::{derive_seed, Purpose};
use serde_json::json;

use crate::config::{load_aux, preset_text, SweepConfig, VerifySection};
use crate::sweep::{Columns, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Verification,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Numerical,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Numerical => 2,
            ErrorKind::Verification => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<metarisk::Error> for CliError {
    fn from(e: metarisk::Error) -> Self {
        if e.is_numerical() {
            CliError::numerical(e.to_string())
        } else {
            CliError::validation(e.to_string())
        }
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct CommonArgs {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
}

/// What a successful command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub stdout: String,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

fn config_text(args: &CommonArgs) -> Result<Option<String>, CliError> {
    match (&args.config, &args.preset) {
        (Some(_), Some(_)) => Err(CliError::validation("give either --config or --preset, not both")),
        (Some(p), None) => fs::read_to_string(p)
            .map(Some)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", p.display()))),
        (None, Some(name)) => Ok(Some(preset_text(name)?.to_string())),
        (None, None) => Ok(None),
    }
}

/// Loads a sweep config and applies the command-line overrides.
pub fn load_sweep(args: &CommonArgs) -> Result<SweepConfig, CliError> {
    let text = config_text(args)?.ok_or_else(|| CliError::validation("this command needs --config <path> or --preset <name>"))?;
    let mut cfg = SweepConfig::parse(&text)?;
    if let Some(s) = args.seed {
        cfg.sweep.seed = s;
    }
    if let Some(r) = args.reps {
        cfg.sweep.reps = r;
    }
    if let Some(o) = &args.out {
        cfg.sweep.outputs = o.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn out_dir(args: &CommonArgs, fallback: &str) -> PathBuf {
    args.out.clone().unwrap_or_else(|| PathBuf::from(fallback))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::validation(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    fs::write(path, contents).map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

fn sweep_outcome(cfg: &SweepConfig, result: SweepResult, file: &str) -> Result<Outcome, CliError> {
    let path = Path::new(&cfg.sweep.outputs).join(file);
    write_file(&path, &sweep::to_csv(&result.rows))?;
    let stdout = format!(
        "wrote {} rows to {}\n{}",
        result.rows.len(),
        path.display(),
        sweep::summary(cfg, &result)
    );
    Ok(Outcome {
        files: vec![path],
        stdout,
        warnings: result.warnings,
        exit_code: 0,
    })
}

/// Exact risk, Monte Carlo risk and bounds for every grid point.
pub fn cmd_risk_sweep(args: &CommonArgs) -> Result<Outcome, CliError> {
    let cfg = load_sweep(args)?;
    let cols = Columns {
        risk: true,
        monte_carlo: true,
        bounds: true,
    };
    let result = sweep::run(&cfg, cols)?;
    sweep_outcome(&cfg, result, "risk_sweep.csv")
}

/// Bounds beside the exact risk, without Monte Carlo. Also writes one JSON
/// record per lower-bound evaluation.
pub fn cmd_bounds(args: &CommonArgs) -> Result<Outcome, CliError> {
    let cfg = load_sweep(args)?;
    let cols = Columns {
        risk: true,
        monte_carlo: false,
        bounds: true,
    };
    let result = sweep::run(&cfg, cols)?;
    let mut records = String::new();
    let d = cfg.dim();
    for c in &cfg.configs {
        for (&v, row) in cfg.sweep.grid.iter().zip(sweep::series(&result.rows, &c.id)) {
            if let Some(value) = row.lower_thm51 {
                let p = cfg.point(c, v)?;
                let rec = json!({
                    "inputs": {"config_id": c.id, "sweep_value": v, "d": d, "sigma_sq": p.noise_sq_novel, "m": p.m, "n": p.n, "k": p.k},
                    "bound_name": "lr_lower_bound",
                    "value": value,
                    "base": "bits",
                });
                records.push_str(&rec.to_string());
                records.push('\n');
            }
        }
    }
    let mut out = sweep_outcome(&cfg, result, "bounds.csv")?;
    let path = Path::new(&cfg.sweep.outputs).join("bounds_records.jsonl");
    write_file(&path, &records)?;
    out.files.push(path);
    Ok(out)
}

/// Runs the verification suites and writes `verify.json`. Exit code 3 when
/// any check fails.
pub fn cmd_verify(args: &CommonArgs) -> Result<Outcome, CliError> {
    let opts = match config_text(args)? {
        Some(text) => load_aux(&text)?.verify.unwrap_or_default(),
        None => VerifySection::default(),
    };
    if opts.packing_dims.iter().any(|&d| d == 0 || d > 16) {
        return Err(CliError::validation("verify.packing_dims: dimensions must lie in 1..=16"));
    }
    let seed = args.seed.unwrap_or(0);
    let report = verify::run_all(&opts, seed);
    let path = out_dir(args, "out").join("verify.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&path, &text)?;
    let mut stdout = String::new();
    for s in &report.suites {
        let worst = s.worst_slack.map(sweep::format_f64).unwrap_or_else(|| "-".into());
        stdout.push_str(&format!(
            "{:<22} {:>6} checked {:>4} failed  worst slack {worst}\n",
            s.name, s.instances, s.failed
        ));
    }
    stdout.push_str(&format!("wrote {}\n", path.display()));
    Ok(Outcome {
        files: vec![path],
        stdout,
        warnings: Vec::new(),
        exit_code: if report.passed() { 0 } else { 3 },
    })
}

/// Parameters of the `packing` command given on the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct PackingArgs {
    pub d: Option<usize>,
    pub delta: Option<f64>,
    pub budget: Option<usize>,
}

/// Greedy packing of the unit ball, written to `packing.json`.
pub fn cmd_packing(args: &CommonArgs, p: PackingArgs) -> Result<Outcome, CliError> {
    let section = match config_text(args)? {
        Some(text) => load_aux(&text)?.packing,
        None => None,
    };
    let d = p.d.or(section.as_ref().map(|s| s.d)).ok_or_else(|| CliError::validation("packing: give --dim or a [packing] table"))?;
    let delta = p.delta.or(section.as_ref().map(|s| s.delta)).unwrap_or(0.25);
    let budget = p.budget.or(section.as_ref().map(|s| s.budget)).unwrap_or(100_000);
    let seed = args.seed.unwrap_or(0);
    let set = greedy_packing(d, delta, budget, seed)?;
    let path = out_dir(args, "out").join("packing.json");
    let doc = json!({
        "d": d,
        "seed": seed,
        "budget": budget,
        "size": set.size(),
        "min_separation": set.min_separation(),
        "separated": set.verify(),
        "packing": set,
    });
    write_file(&path, &serde_json::to_string_pretty(&doc).expect("packing serializes"))?;
    let mut warnings = Vec::new();
    if d <= 20 && set.size() < (1usize << d) {
        warnings.push(format!("packing has {} centers, fewer than 2^d = {}; raise the budget", set.size(), 1usize << d));
    }
    Ok(Outcome {
        files: vec![path.clone()],
        stdout: format!("J = {} centers in d = {d}, wrote {}\n", set.size(), path.display()),
        warnings,
        exit_code: 0,
    })
}

/// Samples the environment of the first config at the first grid point and
/// one set of observations.
pub fn cmd_env_sample(args: &CommonArgs) -> Result<Outcome, CliError> {
    let cfg = load_sweep(args)?;
    let entry = &cfg.configs[0];
    let p = cfg.point(entry, cfg.sweep.grid[0])?;
    let env = sample_environment(&cfg.prior()?, &cfg.spec_for(p), cfg.sweep.seed)?;
    let obs = sample_observations(&env, derive_seed(cfg.sweep.seed, Purpose::Observations, 0));
    let dir = PathBuf::from(&cfg.sweep.outputs);
    let env_path = dir.join("environment.json");
    let obs_path = dir.join("observations.json");
    write_file(&env_path, &env.to_json()?)?;
    let obs_doc = json!({
        "source": obs.source.iter().map(|y| y.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
        "novel": obs.novel.iter().copied().collect::<Vec<_>>(),
    });
    write_file(&obs_path, &serde_json::to_string_pretty(&obs_doc).expect("observations serialize"))?;
    Ok(Outcome {
        files: vec![env_path.clone(), obs_path],
        stdout: format!(
            "config {}: M = {}, n = {}, k = {}, wrote {}\n",
            entry.id,
            p.m,
            p.n,
            p.k,
            env_path.display()
        ),
        warnings: Vec::new(),
        exit_code: 0,
    })
}
