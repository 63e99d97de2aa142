//! End-to-end checks of the CLI surface: flag behavior, report shapes, and
//! the exit-code contract, all on synthetic bundles.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_concordia")
}

fn run_ok(dir: &Path, args: &[&str]) {
    let status = Command::new(bin()).current_dir(dir).args(args).status().unwrap();
    assert!(status.success(), "command failed: {args:?}");
}

/// Rows of a meta-stamped CSV, header included, comment line skipped.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|c| c.trim_matches('"').to_string()).collect())
        .collect()
}

/// A positive-signal panel: three models tracking the outcome with
/// independent noise.
fn write_positive_bundle(dir: &Path) {
    std::fs::write(
        dir.join("sim.toml"),
        "seed = 5\nout_dir = \"bundle\"\n[simulate]\npreset = \"shared-bias\"\nk_raters = 3\nshared_bias_weight = 0.0\nsignal_weight = 1.2\nidiosyncratic_sd = 1.0\nn_units = 120\n",
    )
    .unwrap();
    run_ok(dir, &["--config", "sim.toml", "simulate"]);
}

#[test]
fn align_level_flag_changes_ci_columns() {
    let dir = tempfile::tempdir().unwrap();
    write_positive_bundle(dir.path());
    let base = "seed = 5\nlevel_label = \"unit\"\n[data]\nratings = \"bundle/ratings.csv\"\noutcomes = \"bundle/outcomes.csv\"\n[align]\nexpert_rater = \"model_01\"\noutcome = \"OUTCOME\"\n";
    std::fs::write(dir.path().join("cfg.toml"), base).unwrap();
    run_ok(dir.path(), &["--config", "cfg.toml", "align", "--out", "wide", "--level", "0.95"]);
    run_ok(dir.path(), &["--config", "cfg.toml", "align", "--out", "narrow", "--level", "0.5"]);

    let parse = |out: &str| -> (f64, f64) {
        let rows = csv_rows(&dir.path().join(out).join("align.csv"));
        let header = &rows[0];
        let lo = header.iter().position(|h| h == "outcome_ci_low").unwrap();
        let hi = header.iter().position(|h| h == "outcome_ci_high").unwrap();
        let row = &rows[1];
        (row[lo].parse().unwrap(), row[hi].parse().unwrap())
    };
    let (lo95, hi95) = parse("wide");
    let (lo50, hi50) = parse("narrow");
    assert!(
        hi95 - lo95 > hi50 - lo50,
        "95% interval [{lo95}, {hi95}] should be wider than 50% [{lo50}, {hi50}]"
    );
}

#[test]
fn robust_planted_positive_bundle_passes_seven_of_seven() {
    let dir = tempfile::tempdir().unwrap();
    write_positive_bundle(dir.path());

    // A baseline uncorrelated with the outcome: scrambled per-unit metadata.
    let mut prior = String::new();
    for u in 0..120usize {
        writeln!(prior, "u{:04} = {}.0", u, (u * 7919 + 13) % 101).unwrap();
    }
    let cfg = format!(
        "seed = 5\nlevel_label = \"unit\"\n[data]\nratings = \"bundle/ratings.csv\"\noutcomes = \"bundle/outcomes.csv\"\n[data.prior_outcome]\n{prior}\n[robust]\nraters = [\"model_01\"]\noutcome = \"OUTCOME\"\nbaseline_rater = \"baseline_prior_outcome\"\npermutations = 199\nbootstrap = 199\n"
    );
    std::fs::write(dir.path().join("cfg.toml"), cfg).unwrap();
    run_ok(dir.path(), &["--config", "cfg.toml", "robust", "--out", "reports"]);

    let rows = csv_rows(&dir.path().join("reports/robust.csv"));
    assert_eq!(rows[1][0], "model_01:SYNTH");
    let pass_rate = rows[1].last().unwrap();
    assert_eq!(pass_rate, "100 (7/7)", "row: {:?}", rows[1]);
}

#[test]
fn dcor_two_raters_one_task_gives_2x2_with_masking() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sim.toml"),
        "seed = 9\nout_dir = \"bundle\"\n[simulate]\npreset = \"shared-bias\"\nk_raters = 2\nshared_bias_weight = 0.4\nsignal_weight = 0.6\nn_units = 60\n",
    )
    .unwrap();
    run_ok(dir.path(), &["--config", "sim.toml", "simulate"]);
    std::fs::write(
        dir.path().join("cfg.toml"),
        "seed = 9\nlevel_label = \"unit\"\n[data]\nratings = \"bundle/ratings.csv\"\noutcomes = \"bundle/outcomes.csv\"\n[dcor]\npermutations = 99\n",
    )
    .unwrap();
    run_ok(dir.path(), &["--config", "cfg.toml", "dcor", "--out", "reports", "--alpha", "0.05"]);

    let rows = csv_rows(&dir.path().join("reports/dcor_matrix.csv"));
    assert_eq!(rows.len(), 3, "header plus two source rows");
    assert_eq!(rows[0].len(), 3);
    // Diagonal present; the matrix is 2x2 over the two model series.
    assert_eq!(rows[1][1], "1");
    assert_eq!(rows[2][2], "1");
    assert!(dir.path().join("reports/dcor_pvalues.csv").exists());
    assert!(dir.path().join("reports/dcor_summary.json").exists());
}

#[test]
fn simulate_bundle_feeds_every_command() {
    // A generated bundle is a complete input for the other commands.
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sim.toml"),
        "seed = 3\nout_dir = \"bundle\"\n[simulate]\npreset = \"crossed\"\nunits = 20\nitems = 2\nmodels = 3\nprompts = 2\n",
    )
    .unwrap();
    run_ok(dir.path(), &["--config", "sim.toml", "simulate"]);
    std::fs::write(
        dir.path().join("cfg.toml"),
        "seed = 3\nlevel_label = \"unit\"\n[data]\nratings = \"bundle/ratings.csv\"\noutcomes = \"bundle/outcomes.csv\"\n[decompose]\noutcome = \"OUTCOME\"\niterations = 400\nwarmup = 200\nallow_nonconverged = true\n[dcor]\npermutations = 49\n",
    )
    .unwrap();
    run_ok(dir.path(), &["--config", "cfg.toml", "decompose", "--out", "d"]);
    run_ok(dir.path(), &["--config", "cfg.toml", "dcor", "--out", "m"]);
    let comp = csv_rows(&dir.path().join("d/decompose_components.csv"));
    assert_eq!(comp[0][0], "term");
    assert_eq!(comp.last().unwrap()[0], "residual");
}

#[test]
fn missing_outcome_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_positive_bundle(dir.path());
    std::fs::write(
        dir.path().join("cfg.toml"),
        "seed = 5\nlevel_label = \"unit\"\n[data]\nratings = \"bundle/ratings.csv\"\noutcomes = \"missing.csv\"\n[align]\nexpert_rater = \"model_01\"\noutcome = \"OUTCOME\"\n",
    )
    .unwrap();
    let status = Command::new(bin())
        .current_dir(dir.path())
        .args(["--config", "cfg.toml", "align"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn validation_failure_writes_structured_report() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("ratings.csv"),
        "rater_id,rater_family,task_id,unit_id,prompt_id,score\nh1,human,T,u1,,9\nh1,human,T,u2,,3\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("outcomes.csv"), "unit_id,outcome_id,value,year\nu1,Y,0.5,\n").unwrap();
    std::fs::write(
        dir.path().join("cfg.toml"),
        "seed = 1\nlevel_label = \"unit\"\nout_dir = \"rep\"\n[data]\nratings = \"ratings.csv\"\noutcomes = \"outcomes.csv\"\n[data.bounds]\nT = [1.0, 7.0]\n[align]\nexpert_rater = \"h1\"\noutcome = \"Y\"\n",
    )
    .unwrap();
    let status = Command::new(bin())
        .current_dir(dir.path())
        .args(["--config", "cfg.toml", "align"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let report = std::fs::read_to_string(dir.path().join("rep/validation_report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["result"]["bounds_violations"][0]["row"], 1);
}

#[test]
fn align_permutations_and_sign_matrices() {
    let dir = tempfile::tempdir().unwrap();
    write_positive_bundle(dir.path());
    std::fs::write(
        dir.path().join("cfg.toml"),
        "seed = 5\nlevel_label = \"unit\"\n[data]\nratings = \"bundle/ratings.csv\"\noutcomes = \"bundle/outcomes.csv\"\n[align]\nexpert_rater = \"model_01\"\noutcome = \"OUTCOME\"\npermutations = 99\ndump_sign_matrices = true\n",
    )
    .unwrap();
    run_ok(dir.path(), &["--config", "cfg.toml", "align", "--out", "reports"]);
    let rows = csv_rows(&dir.path().join("reports/align.csv"));
    let p_col = rows[0].iter().position(|h| h == "p").unwrap();
    let p: f64 = rows[1][p_col].parse().unwrap();
    assert!(p <= 0.05, "strong planted signal should be significant: {p}");
    // One sign matrix per non-expert source.
    assert!(dir.path().join("reports/sign_model_02_base_SYNTH.csv").exists());
}
