use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_weighted-clt"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn weighted-clt")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("weighted-clt-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn workspace_file(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in [
        "rate",
        "concentration",
        "lemma2",
        "edgeworth",
        "discrepancy",
    ] {
        assert!(text.contains(sub), "help should list `{sub}`");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["rate", "--bogus-flag"]).status.code(), Some(1));
    // rate without a config is a usage error too
    assert_eq!(run(&["rate"]).status.code(), Some(1));
}

#[test]
fn edgeworth_prints_polynomial_csv() {
    let out = run(&[
        "edgeworth",
        "--dist",
        "builtin:skewed_three_point",
        "--r",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("nu,coeff"), "got: {text}");
    assert!(text.lines().count() > 2);
}

#[test]
fn edgeworth_reads_distribution_files() {
    let dist = workspace_file("dists/skewed_three_point.dist");
    let out = run(&["edgeworth", "--dist", &dist, "--r", "2"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn discrepancy_prints_json() {
    let out = run(&[
        "discrepancy",
        "--dist",
        "builtin:rademacher",
        "--theta",
        "equal:100",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"value\""));
    assert!(text.contains("enumeration_exact"));
}

#[test]
fn rate_writes_deterministic_reports() {
    let dir = scratch("rate");
    let config = dir.join("rate.cfg");
    let out_dir = dir.join("out");
    fs::write(
        &config,
        format!(
            "mode = rate\nk = 1\ndist = builtin:rademacher\nn_grid = 16,32,64\n\
             theta = both:3\nseed = 9\nout_dir = {}\nthreads = 1\n",
            out_dir.display()
        ),
    )
    .unwrap();
    let first = run(&["rate", "--config", config.to_str().unwrap()]);
    assert_eq!(first.status.code(), Some(0), "{first:?}");
    let rows1 = fs::read(out_dir.join("rows.csv")).unwrap();
    let json1 = fs::read(out_dir.join("report.json")).unwrap();
    let second = run(&["rate", "--config", config.to_str().unwrap()]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(rows1, fs::read(out_dir.join("rows.csv")).unwrap());
    assert_eq!(json1, fs::read(out_dir.join("report.json")).unwrap());
    let json = String::from_utf8(json1).unwrap();
    assert!(json.contains("\"schema_version\""));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn rate_honors_seed_override() {
    let dir = scratch("seed-override");
    let config = dir.join("rate.cfg");
    let out_dir = dir.join("out");
    fs::write(
        &config,
        format!(
            "mode = rate\nk = 1\ndist = builtin:rademacher\nn_grid = 12,14,16\n\
             theta = sampled:2\nseed = 9\nout_dir = {}\nthreads = 1\n",
            out_dir.display()
        ),
    )
    .unwrap();
    let base = run(&["rate", "--config", config.to_str().unwrap()]);
    assert_eq!(base.status.code(), Some(0));
    let rows1 = fs::read(out_dir.join("rows.csv")).unwrap();
    let over = run(&["rate", "--config", config.to_str().unwrap(), "--seed", "10"]);
    assert_eq!(over.status.code(), Some(0));
    assert_ne!(rows1, fs::read(out_dir.join("rows.csv")).unwrap());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn lemma2_suite_passes_and_writes_reports() {
    let dir = scratch("lemma2");
    let config = dir.join("lemma2.cfg");
    let out_dir = dir.join("out");
    fs::write(
        &config,
        format!(
            "mode = lemma2\nsuite_size = 24\nseed = 4\nout_dir = {}\nthreads = 1\n",
            out_dir.display()
        ),
    )
    .unwrap();
    let out = run(&["lemma2", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(out_dir.join("cases.csv").exists());
    assert!(out_dir.join("report.json").exists());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn concentration_runs_from_config() {
    let dir = scratch("conc");
    let config = dir.join("conc.cfg");
    let out_dir = dir.join("out");
    fs::write(
        &config,
        format!(
            "mode = concentration\ndist = builtin:skewed_three_point\nn_grid = 64\n\
             nu = 3\nsamples = 1000\nseed = 3\nout_dir = {}\nthreads = 1\n",
            out_dir.display()
        ),
    )
    .unwrap();
    let out = run(&["concentration", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = fs::read_to_string(out_dir.join("exceedance.csv")).unwrap();
    assert!(csv.starts_with("t,count_s1,p_hat_s1,count_s2,p_hat_s2"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn subcommand_must_match_config_mode() {
    let dir = scratch("mismatch");
    let config = dir.join("lemma2.cfg");
    fs::write(&config, "mode = lemma2\n").unwrap();
    let out = run(&["rate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    fs::remove_dir_all(&dir).ok();
}
