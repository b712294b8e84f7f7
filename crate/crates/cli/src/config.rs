//! Sweep configuration files.
//!
//! A config is a TOML document with an `[environment]` table, a `[sweep]`
//! table and one `[[configs]]` entry per `(M, n, k)` curve. Unknown keys are
//! rejected.

use std::path::Path;

use metarisk::{ConstantsMode, DesignKind, EnvironmentSpec, HyperPrior, SolvePath};
use serde::{Deserialize, Serialize};

use crate::CliError;

const FIG3A: &str = include_str!("../presets/fig3a.toml");
const FIG3B: &str = include_str!("../presets/fig3b.toml");

/// Names of the bundled presets.
pub const PRESETS: [&str; 2] = ["fig3a", "fig3b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignName {
    Polynomial,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    NovelNoiseSq,
    TotalDataAddTasks,
    TotalDataAddK,
    K,
    N,
    M,
}

impl Axis {
    pub fn is_count(self) -> bool {
        !matches!(self, Axis::NovelNoiseSq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMode {
    /// Task parameters fixed; expectation over observation noise.
    #[default]
    Frequentist,
    /// Exact risk additionally averaged over redraws of every parameter.
    BayesAveraged,
}

fn default_x_range() -> [f64; 2] {
    [-1.0, 1.0]
}

fn default_design() -> DesignName {
    DesignName::Polynomial
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    /// Dimension; implied by `tau` when that is given.
    #[serde(default)]
    pub d: Option<usize>,
    /// Hyper-mean; zeros of length `d` when absent.
    #[serde(default)]
    pub tau: Option<Vec<f64>>,
    pub sigma_theta_sq: f64,
    pub noise_sq_source: f64,
    pub noise_sq_novel: f64,
    #[serde(default = "default_design")]
    pub design: DesignName,
    #[serde(default = "default_x_range")]
    pub x_range: [f64; 2],
    #[serde(default)]
    pub clip_to_unit_ball: bool,
}

fn default_theta_draws() -> usize {
    100
}

fn default_outputs() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub risk_mode: RiskMode,
    #[serde(default = "default_theta_draws")]
    pub theta_draws: usize,
    #[serde(default = "default_outputs")]
    pub outputs: String,
    #[serde(default)]
    pub solve_path: SolvePath,
    #[serde(default = "default_constants_mode")]
    pub constants_mode: ConstantsMode,
}

fn default_constants_mode() -> ConstantsMode {
    ConstantsMode::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEntry {
    pub id: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// Overrides the sweep axis for this curve.
    #[serde(default)]
    pub axis: Option<Axis>,
}

fn default_matrix_pairs() -> usize {
    1000
}

fn default_mi_instances() -> usize {
    200
}

fn default_packing_dims() -> Vec<usize> {
    vec![1, 2, 3, 4]
}

fn default_packing_budget() -> usize {
    100_000
}

fn default_packing_delta() -> f64 {
    0.25
}

/// Sizes of the verification suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_matrix_pairs")]
    pub matrix_pairs: usize,
    #[serde(default = "default_mi_instances")]
    pub mi_instances: usize,
    #[serde(default = "default_packing_dims")]
    pub packing_dims: Vec<usize>,
    #[serde(default = "default_packing_budget")]
    pub packing_budget: usize,
    #[serde(default = "default_packing_delta")]
    pub packing_delta: f64,
    /// Extra KL matrices (nats) checked for validity and fed to the bound
    /// calculators.
    #[serde(default)]
    pub kl_matrices: Vec<Vec<Vec<f64>>>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            matrix_pairs: default_matrix_pairs(),
            mi_instances: default_mi_instances(),
            packing_dims: default_packing_dims(),
            packing_budget: default_packing_budget(),
            packing_delta: default_packing_delta(),
            kl_matrices: Vec::new(),
        }
    }
}

/// Parameters of the `packing` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackingSection {
    pub d: usize,
    #[serde(default = "default_packing_delta")]
    pub delta: f64,
    #[serde(default = "default_packing_budget")]
    pub budget: usize,
}

/// A full sweep definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub environment: EnvironmentSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub configs: Vec<ConfigEntry>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub packing: Option<PackingSection>,
}

/// Fields shared by every command that may be read without a sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxConfig {
    #[serde(default)]
    pub environment: Option<toml::Value>,
    #[serde(default)]
    pub sweep: Option<toml::Value>,
    #[serde(default)]
    pub configs: Option<toml::Value>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub packing: Option<PackingSection>,
}

/// Sizes of one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSizes {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub noise_sq_novel: f64,
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        Self::parse(preset_text(name)?)
    }

    pub fn dim(&self) -> usize {
        match (&self.environment.tau, self.environment.d) {
            (Some(t), _) => t.len(),
            (None, Some(d)) => d,
            (None, None) => 0,
        }
    }

    pub fn prior(&self) -> Result<HyperPrior, CliError> {
        let tau = self.environment.tau.clone().unwrap_or_else(|| vec![0.0; self.dim()]);
        HyperPrior::new(tau, self.environment.sigma_theta_sq).map_err(|e| CliError::validation(format!("environment: {e}")))
    }

    pub fn design(&self) -> DesignKind {
        match self.environment.design {
            DesignName::Polynomial => DesignKind::Polynomial {
                x_low: self.environment.x_range[0],
                x_high: self.environment.x_range[1],
            },
            DesignName::Gaussian => DesignKind::Gaussian,
        }
    }

    pub fn axis_of(&self, entry: &ConfigEntry) -> Axis {
        entry.axis.unwrap_or(self.sweep.axis)
    }

    /// Sizes and novel noise of config `entry` at grid value `value`.
    pub fn point(&self, entry: &ConfigEntry, value: f64) -> Result<PointSizes, CliError> {
        let mut p = PointSizes {
            m: entry.m,
            n: entry.n,
            k: entry.k,
            noise_sq_novel: self.environment.noise_sq_novel,
        };
        let count = value as usize;
        match self.axis_of(entry) {
            Axis::NovelNoiseSq => p.noise_sq_novel = value,
            Axis::K => p.k = count,
            Axis::N => p.n = count,
            Axis::M => p.m = count,
            Axis::TotalDataAddTasks => {
                if entry.n == 0 || count < entry.k || (count - entry.k) % entry.n != 0 {
                    return Err(CliError::validation(format!(
                        "configs.{}: total data {count} minus k = {} is not a multiple of n = {}",
                        entry.id, entry.k, entry.n
                    )));
                }
                p.m = (count - entry.k) / entry.n;
            }
            Axis::TotalDataAddK => {
                let mn = entry.m * entry.n;
                if count <= mn {
                    return Err(CliError::validation(format!(
                        "configs.{}: total data {count} leaves no novel samples after M n = {mn}",
                        entry.id
                    )));
                }
                p.k = count - mn;
            }
        }
        Ok(p)
    }

    pub fn spec_for(&self, p: PointSizes) -> EnvironmentSpec {
        EnvironmentSpec {
            m: p.m,
            n: p.n,
            k: p.k,
            noise_sq_source: self.environment.noise_sq_source,
            noise_sq_novel: p.noise_sq_novel,
            design: self.design(),
            clip_to_unit_ball: self.environment.clip_to_unit_ball,
        }
    }

    /// Checks every constraint that does not need sampling, collecting all
    /// offending keys.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut bad = Vec::new();
        let env = &self.environment;
        match (&env.tau, env.d) {
            (None, None) => bad.push("environment.d: give d or tau".to_string()),
            (Some(t), Some(d)) if t.len() != d => {
                bad.push(format!("environment.tau: length {} does not match d = {d}", t.len()))
            }
            _ => {}
        }
        if self.dim() == 0 && (env.tau.is_some() || env.d.is_some()) {
            bad.push("environment.d: must be at least 1".into());
        }
        for (key, v) in [
            ("environment.sigma_theta_sq", env.sigma_theta_sq),
            ("environment.noise_sq_source", env.noise_sq_source),
            ("environment.noise_sq_novel", env.noise_sq_novel),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{key}: must be positive and finite, got {v}"));
            }
        }
        if let Some(t) = &env.tau {
            if t.iter().any(|x| !x.is_finite()) {
                bad.push("environment.tau: entries must be finite".into());
            }
        }
        if !(env.x_range[0] <= env.x_range[1] && env.x_range.iter().all(|x| x.is_finite())) {
            bad.push(format!("environment.x_range: need low <= high, got {:?}", env.x_range));
        }
        let grid = &self.sweep.grid;
        if grid.is_empty() {
            bad.push("sweep.grid: must be nonempty".into());
        }
        if grid.iter().any(|v| !v.is_finite()) {
            bad.push("sweep.grid: values must be finite".into());
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            bad.push("sweep.grid: must be strictly increasing".into());
        }
        if self.sweep.risk_mode == RiskMode::BayesAveraged && self.sweep.theta_draws == 0 {
            bad.push("sweep.theta_draws: must be at least 1".into());
        }
        if self.configs.is_empty() {
            bad.push("configs: at least one [[configs]] entry is required".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for c in &self.configs {
            if c.id.is_empty() || c.id.contains([',', '"', '\n']) {
                bad.push(format!("configs.id: {:?} must be nonempty without commas or quotes", c.id));
            }
            if !ids.insert(c.id.clone()) {
                bad.push(format!("configs.id: duplicate id {:?}", c.id));
            }
            let axis = self.axis_of(c);
            if axis == Axis::NovelNoiseSq {
                if grid.iter().any(|v| *v <= 0.0) {
                    bad.push(format!("sweep.grid: novel noise values must be positive (configs.{})", c.id));
                }
            } else if grid.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                bad.push(format!("sweep.grid: {axis:?} values must be nonnegative integers (configs.{})", c.id));
            }
            if bad.is_empty() {
                for &v in grid {
                    match self.point(c, v) {
                        Ok(p) => {
                            if p.k == 0 {
                                bad.push(format!("configs.{}: k must be at least 1 (grid value {v})", c.id));
                            }
                            if p.m > 0 && p.n == 0 {
                                bad.push(format!("configs.{}: n must be at least 1 (grid value {v})", c.id));
                            }
                        }
                        Err(e) => bad.push(e.message),
                    }
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::validation(bad.join("\n")))
        }
    }
}

pub fn preset_text(name: &str) -> Result<&'static str, CliError> {
    match name {
        "fig3a" => Ok(FIG3A),
        "fig3b" => Ok(FIG3B),
        other => Err(CliError::validation(format!(
            "unknown preset {other:?}; available: {}",
            PRESETS.join(", ")
        ))),
    }
}

/// Reads only the `[verify]` and `[packing]` tables; the others may be
/// absent or incomplete.
pub fn load_aux(text: &str) -> Result<AuxConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[environment]
d = 3
sigma_theta_sq = 0.1
noise_sq_source = 0.05
noise_sq_novel = 1.0

[sweep]
axis = "k"
grid = [5, 10]

[[configs]]
id = "a"
m = 2
n = 4
k = 3
"#;

    #[test]
    fn presets_parse() {
        for p in PRESETS {
            SweepConfig::preset(p).unwrap();
        }
        assert!(SweepConfig::preset("fig9").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("noise_sq_novel = 1.0", "noise_sq_novel = 1.0\nnoise_novel = 2.0");
        let err = SweepConfig::parse(&text).unwrap_err();
        assert!(err.message.contains("noise_novel"), "{}", err.message);
    }

    #[test]
    fn validation_lists_every_offending_key() {
        let text = BASE
            .replace("grid = [5, 10]", "grid = [10, 5]")
            .replace("sigma_theta_sq = 0.1", "sigma_theta_sq = -1.0");
        let err = SweepConfig::parse(&text).unwrap_err();
        assert!(err.message.contains("sweep.grid") && err.message.contains("sigma_theta_sq"));
        let empty = BASE.replace("grid = [5, 10]", "grid = []");
        assert!(SweepConfig::parse(&empty).unwrap_err().message.contains("nonempty"));
    }

    #[test]
    fn total_data_axes() {
        let text = BASE.replace("axis = \"k\"", "axis = \"total_data_add_tasks\"").replace("grid = [5, 10]", "grid = [11, 19]");
        let cfg = SweepConfig::parse(&text).unwrap();
        assert_eq!(cfg.point(&cfg.configs[0], 19.0).unwrap().m, 4);
        let bad = text.replace("grid = [11, 19]", "grid = [11, 12]");
        assert!(SweepConfig::parse(&bad).is_err());
        let add_k = BASE.replace("axis = \"k\"", "axis = \"total_data_add_k\"").replace("grid = [5, 10]", "grid = [9, 20]");
        let cfg = SweepConfig::parse(&add_k).unwrap();
        assert_eq!(cfg.point(&cfg.configs[0], 20.0).unwrap().k, 12);
    }
}
