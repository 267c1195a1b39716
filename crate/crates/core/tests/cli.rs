use std::path::Path;
use std::process::{Command, Output};

use relay_outage::analytic::df_outage;
use relay_outage::cli::{num, ScenarioConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relay-outage"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|x| x.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_string).collect()
}

#[test]
fn zero_density_gives_zero_outage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "lambda = 0.0\npartitions = 8\n");
    let out = dir.path().join("o");
    assert!(run(&["outage", "--config", &cfg, "--out", out.to_str().unwrap()])
        .status
        .success());
    let r = rows(&out.join("outage.csv"));
    assert_eq!(r.len(), 5);
    for row in r {
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0, "{row:?}");
    }
}

#[test]
fn outage_passes_df_through() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "lambda = 1e-4\nk = 0.2\npartitions = 8\n");
    let out = dir.path().join("o");
    assert!(run(&["outage", "--config", &cfg, "--out", out.to_str().unwrap()])
        .status
        .success());
    let c = ScenarioConfig::load(Path::new(&cfg)).unwrap();
    let df = df_outage(
        &c.network().unwrap(),
        &c.geometry().unwrap(),
        &c.params().unwrap(),
        &c.quadrature(),
    )
    .unwrap()
    .value;
    let r = rows(&out.join("outage.csv"));
    assert_eq!(r[0][..3], ["df", "exact-analytic", num(df).as_str()]);
    assert_eq!(
        header(&out.join("outage.csv")),
        ["protocol", "kind", "value", "stderr", "w_c", "rho"]
    );
}

#[test]
fn with_mc_adds_monte_carlo_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "outage",
        "--partitions",
        "8",
        "--trials",
        "5000",
        "--with-mc",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let mc: Vec<_> = rows(&out.join("outage.csv"))
        .into_iter()
        .filter(|r| r[1] == "monte-carlo")
        .collect();
    assert_eq!(mc.len(), 4);
    assert!(mc.iter().all(|r| r[3].parse::<f64>().unwrap() > 0.0));
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("outage.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["trials"], 5000);
    assert!(meta["results"]["monte_carlo"]["window_radius"].as_f64().unwrap() > 0.0);
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "seed = 3\ntrials = 100\npartitions = 8\n");
    let out = dir.path().join("o");
    assert!(run(&[
        "outage",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("outage.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 4);
    assert_eq!(meta["config"]["trials"], 100);
}

#[test]
fn region_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "partitions = 8\nregion_x = [0.0, 10.0]\nregion_nx = 3\nregion_y = [0.0, 0.0]\nregion_ny = 1\n",
    );
    let out = dir.path().join("o");
    assert!(run(&["region", "--config", &cfg, "--out", out.to_str().unwrap()])
        .status
        .success());
    let path = out.join("region.csv");
    assert_eq!(
        header(&path),
        ["x", "y", "winner", "p_df", "p_cf_upper", "p_direct"]
    );
    let winners: Vec<String> = rows(&path).into_iter().map(|r| r[2].clone()).collect();
    // relay on the source, midway, on the destination
    assert_eq!(winners[0], "invalid");
    assert_eq!(winners[2], "invalid");
    assert!(["df", "cf", "direct"].contains(&winners[1].as_str()));
}

#[test]
fn sweep_columns_fixed_without_mc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "partitions = 8\nlambdas = [1e-4, 1e-3]\n");
    let out = dir.path().join("o");
    assert!(run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()])
        .status
        .success());
    let path = out.join("sweep.csv");
    assert_eq!(header(&path).len(), 16);
    let r = rows(&path);
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| row[8..].iter().all(String::is_empty)));
}

#[test]
fn validate_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "validate",
        "--partitions",
        "16",
        "--trials",
        "50000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out.join("validate.csv"));
    assert_eq!(r.len(), 20);
    assert!(r.iter().all(|row| row[6] == "true"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "lamda = 1e-4\n");
    let o = run(&["outage", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lamda"));

    let cfg = config(dir.path(), "threshold = -1.0\n");
    let o = run(&["outage", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`threshold`"));

    let o = run(&["outage", "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["outage", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let o = run(&["outage", "--partitions", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["outage", "--help"]).status.code(), Some(0));
}
