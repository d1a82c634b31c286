use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn sevpred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sevpred"))
        .args(args)
        .env_remove("SEVPRED_SEED")
        .output()
        .expect("binary runs")
}

fn stderr_lines(out: &Output) -> usize {
    String::from_utf8_lossy(&out.stderr).lines().count()
}

fn synth(dir: &Path, n: usize, seed: u64) -> String {
    let path = dir.join(format!("synth_{n}_{seed}.csv"));
    let out = sevpred(&["synth", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path.to_str().unwrap().to_string()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_writes_header_plus_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), 100, 3);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 101);
    let again = dir.path().join("again.csv");
    sevpred(&["synth", "--n", "100", "--seed", "3", "--out", again.to_str().unwrap()]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn synth_class_shares_at_reference_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), 15840, 11);
    let text = fs::read_to_string(path).unwrap();
    let mut counts = [0usize; 4];
    for line in text.lines().skip(1) {
        let severity: usize = line.rsplit(',').next().unwrap().parse().unwrap();
        counts[severity] += 1;
    }
    let target = [73.84, 20.88, 4.77, 0.51];
    for (c, t) in counts.iter().zip(target) {
        let pct = 100.0 * *c as f64 / 15840.0;
        assert!((pct - t).abs() <= 1.0, "{pct} vs {t}");
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let via_flag = synth(dir.path(), 50, 77);
    let via_env = dir.path().join("env.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_sevpred"))
        .args(["synth", "--n", "50", "--out", via_env.to_str().unwrap()])
        .env("SEVPRED_SEED", "77")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(via_flag).unwrap(), fs::read(via_env).unwrap());
}

#[test]
fn small_single_model_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 800, 4);
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), &format!("data = {data:?}\nmodels = [\"lr\"]\nseed = 3\nn_trees = 20\n"));
    let start = Instant::now();
    let out = sevpred(&["pipeline", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(start.elapsed().as_secs_f64() < 5.0);
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    assert!(report.lines().nth(1).unwrap().starts_with("Logistic Regression,"));
    for f in ["report.txt", "report.svg", "importance.csv", "loss_lr.csv", "config.toml"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("Accuracy"));

    for (format, needle) in [("text", "Precision"), ("csv", "model,accuracy"), ("svg", "<svg")] {
        let shown = sevpred(&["report", "--in", out_dir.to_str().unwrap(), "--format", format]);
        assert!(shown.status.success());
        assert!(String::from_utf8(shown.stdout).unwrap().contains(needle), "{format}");
    }
}

#[test]
fn seed_precedence_flag_over_file_over_env() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "seed = 5\nmodels = [\"nb\"]\nn_trees = 5\n[synth]\nn = 300\n");
    let resolved = |extra: &[&str], env: Option<&str>| -> String {
        let out_dir = dir.path().join("o");
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sevpred"));
        cmd.args(["pipeline", "--config", &config, "--out", out_dir.to_str().unwrap()]).args(extra);
        match env {
            Some(v) => cmd.env("SEVPRED_SEED", v),
            None => cmd.env_remove("SEVPRED_SEED"),
        };
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let written = fs::read_to_string(out_dir.join("config.toml")).unwrap();
        written.lines().find(|l| l.starts_with("seed =")).unwrap().to_string()
    };
    assert_eq!(resolved(&["--seed", "9"], Some("7")), "seed = 9");
    assert_eq!(resolved(&[], Some("7")), "seed = 5");
    let no_seed = write_config(dir.path(), "models = [\"nb\"]\nn_trees = 5\n[synth]\nn = 300\n");
    let out_dir = dir.path().join("p");
    let out = Command::new(env!("CARGO_BIN_EXE_sevpred"))
        .args(["pipeline", "--config", &no_seed, "--out", out_dir.to_str().unwrap()])
        .env("SEVPRED_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(fs::read_to_string(out_dir.join("config.toml")).unwrap().contains("seed = 7"));
}

#[test]
fn empty_model_list_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "models = []\n[synth]\nn = 100\n");
    let out = sevpred(&["pipeline", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_lines(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("model list is empty"));
}

#[test]
fn unknown_config_key_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "colour = \"red\"\n");
    let out = sevpred(&["pipeline", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_lines(&out), 1);
}

#[test]
fn malformed_data_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "not,a,header\n1,2,3\n").unwrap();
    let config = write_config(dir.path(), &format!("data = {:?}\n", data.to_str().unwrap()));
    let out = sevpred(&["pipeline", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_lines(&out), 1);

    let missing = sevpred(&["importance", "--data", "/nonexistent/file.csv"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn diverging_training_exits_with_numeric_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "models = [\"lr\"]\nn_trees = 5\n[synth]\nn = 400\nseed = 1\n[logistic]\nlearning_rate = 1e308\n",
    );
    let out = sevpred(&["pipeline", "--config", &config, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_lines(&out), 1);
}

#[test]
fn importance_prints_ranking_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 1000, 2);
    let out_dir = dir.path().join("imp");
    let out = sevpred(&[
        "importance",
        "--data",
        &data,
        "--seed",
        "1",
        "--n-trees",
        "20",
        "--force-drop",
        "traffic_control_type",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 15);
    let tct = table.lines().find(|l| l.starts_with("traffic_control_type")).unwrap();
    assert!(tct.ends_with("dropped"));
    assert!(out_dir.join("importance.csv").exists() && out_dir.join("importance.svg").exists());
}

#[test]
fn usage_errors_exit_with_config_code() {
    assert_eq!(sevpred(&["synth", "--n", "ten"]).status.code(), Some(1));
    assert_eq!(sevpred(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sevpred(&["--help"]).status.code(), Some(0));
}

#[test]
fn stats_prints_one_row_per_variable() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 500, 6);
    let out = sevpred(&["stats", "--data", &data]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Light Condition"));
}
