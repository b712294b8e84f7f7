use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use metarisk_cli::sweep::CSV_HEADER;

fn metarisk(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metarisk"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn small_config(tau: &str, grid: &str, reps: usize) -> String {
    format!(
        r#"
[environment]
tau = {tau}
sigma_theta_sq = 0.1
noise_sq_source = 0.05
noise_sq_novel = 0.5

[sweep]
axis = "novel_noise_sq"
grid = {grid}
reps = {reps}
seed = 3

[[configs]]
id = "a"
m = 4
n = 6
k = 5
"#
    )
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn col(name: &str) -> usize {
    CSV_HEADER.split(',').position(|c| c == name).unwrap()
}

#[test]
fn risk_sweep_writes_components_that_sum_to_the_total() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config("[0.2, -0.1, 0.3]", "[0.1, 1.0]", 50));
    let out = metarisk(&["risk-sweep", "--config", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&tmp.path().join("risk_sweep.csv"));
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r.len(), 11);
        let f = |c: &str| r[col(c)].parse::<f64>().unwrap();
        assert_eq!(f("risk_exact"), f("bias_sq") + f("var_novel") + f("var_source"));
        assert!(f("risk_mc_se") > 0.0);
        assert!(f("lower_thm51") > 0.0);
    }
}

#[test]
fn zero_reps_leaves_monte_carlo_columns_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config("[0.2, -0.1, 0.3]", "[1.0]", 50));
    let out = metarisk(&["risk-sweep", "--config", &cfg, "--reps", "0"], tmp.path());
    assert!(out.status.success());
    let rows = csv_rows(&tmp.path().join("risk_sweep.csv"));
    assert!(rows[0][col("risk_mc")].is_empty() && rows[0][col("risk_mc_se")].is_empty());
    assert!(!rows[0][col("risk_exact")].is_empty());
}

#[test]
fn low_dimension_leaves_lower_bound_empty_with_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config("[0.2, -0.1]", "[1.0]", 0));
    let out = metarisk(&["bounds", "--config", &cfg], tmp.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lower_thm51 column empty"));
    let rows = csv_rows(&tmp.path().join("bounds.csv"));
    assert!(rows[0][col("lower_thm51")].is_empty());
    assert!(rows[0][col("risk_mc")].is_empty());
    assert_eq!(fs::read_to_string(tmp.path().join("bounds_records.jsonl")).unwrap(), "");
}

#[test]
fn bounds_records_are_tagged_with_base() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config("[0.2, -0.1, 0.3]", "[0.5, 1.0]", 0));
    assert!(metarisk(&["bounds", "--config", &cfg], tmp.path()).status.success());
    let text = fs::read_to_string(tmp.path().join("bounds_records.jsonl")).unwrap();
    let recs: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 2);
    for r in recs {
        assert_eq!(r["bound_name"], "lr_lower_bound");
        assert_eq!(r["base"], "bits");
        assert!(r["value"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn empty_grid_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &small_config("[0.2, -0.1, 0.3]", "[]", 0));
    let out = metarisk(&["risk-sweep", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.grid"));
}

#[test]
fn unknown_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small_config("[0.2, -0.1, 0.3]", "[1.0]", 0).replace("reps = 0", "reps = 0\nrepz = 4");
    let cfg = write_config(tmp.path(), &text);
    let out = metarisk(&["risk-sweep", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("repz"));
}

#[test]
fn missing_config_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = metarisk(&["risk-sweep", "--preset", "fig9"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let out = metarisk(&["bounds"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_passes_on_defaults_with_small_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[verify]\nmatrix_pairs = 20\nmi_instances = 20\npacking_dims = [1, 2]\npacking_budget = 2000\n",
    );
    let out = metarisk(&["verify", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["total_failures"], 0);
}

#[test]
fn verify_reports_an_invalid_kl_matrix_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[verify]\nmatrix_pairs = 5\nmi_instances = 5\npacking_dims = [1]\npacking_budget = 500\nkl_matrices = [[[0.0, -0.5], [0.5, 0.0]]]\n",
    );
    let out = metarisk(&["verify", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let text = fs::read_to_string(tmp.path().join("verify.json")).unwrap();
    assert!(text.contains("kl_matrices[0]"), "{text}");
}

#[test]
fn packing_writes_a_separated_set() {
    let tmp = tempfile::tempdir().unwrap();
    let out = metarisk(&["packing", "--dim", "2", "--budget", "5000"], tmp.path());
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("packing.json")).unwrap()).unwrap();
    assert_eq!(doc["separated"], true);
    assert!(doc["size"].as_u64().unwrap() >= 4);
    let out = metarisk(&["packing", "--dim", "2", "--delta", "0.5"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn env_sample_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = metarisk(&["env", "sample", "--preset", "fig3a"], tmp.path());
    assert!(out.status.success());
    let text = fs::read_to_string(tmp.path().join("environment.json")).unwrap();
    let env = metarisk::Environment::from_json(&text).unwrap();
    assert_eq!(env.dim(), 7);
    assert_eq!(env.num_sources(), 10);
    assert!(tmp.path().join("observations.json").exists());
}
