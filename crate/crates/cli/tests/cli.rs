use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fragsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fragsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const CONFIG: &str = r#"{
    "law": {"name": "uniform_binary"},
    "alpha": 0.0,
    "mode": "exact",
    "horizon": 3.0,
    "snapshot_times": [1.0, 2.0, 3.0],
    "seed": 11,
    "replicas": 8
}"#;

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn missing_config_has_its_own_code() {
    let o = fragsim(&["simulate", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn exact_mode_with_negative_alpha_is_a_precondition_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("\"alpha\": 0.0", "\"alpha\": -1.0"));
    let out = dir.path().join("out");
    let o = fragsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn unknown_law_and_bad_json_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("uniform_binary", "ternary_mystery"));
    let o = fragsim(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(5));
    let cfg = write_config(dir.path(), "{ not json");
    let o = fragsim(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn unwritable_output_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = fragsim(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(7));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = fragsim(&["simulate", "--config", &cfg, "--seed", "5", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{o:?}");
    }
    for name in ["trajectory.csv", "events.csv", "config.json"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name}");
        assert!(x.starts_with(b"# manifest sha256:"), "{name}");
    }
    let traj = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().nth(1), Some("replica,time,rank,log_size"));
    let replicas: std::collections::BTreeSet<&str> =
        traj.lines().skip(2).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(replicas.len(), 8);
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(manifest.split_once('\n').unwrap().1).unwrap();
    assert_eq!(json["seed"], 5);
    assert_eq!(json["configs"][0]["seed"], 5);
}

#[test]
fn verify_ac1_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let reports: Vec<Vec<u8>> = ["r1", "r2"]
        .iter()
        .map(|d| {
            let out = dir.path().join(d);
            let o = fragsim(&["verify", "--suite", "AC1", "--seed", "7", "--out", out.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{o:?}");
            fs::read(out.join("report.csv")).unwrap()
        })
        .collect();
    assert_eq!(reports[0], reports[1]);
    let text = String::from_utf8(reports[0].clone()).unwrap();
    assert!(text.lines().skip(2).all(|l| l.ends_with(",true")));
}

#[test]
fn verify_failure_sets_the_exit_code() {
    // four replicas are far too few for the 3-SE band to hold everywhere
    let o = fragsim(&["verify", "--suite", "AC3", "--replicas", "4", "--seed", "1"]);
    let text = stdout(&o);
    let failed = text.lines().any(|l| l.ends_with(",false"));
    assert_eq!(o.status.code(), Some(if failed { 1 } else { 0 }));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = fragsim(&["verify", "--suite", "AC99"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analytic_values() {
    let o = fragsim(&["analytic", "--law", "uniform_binary", "--kappa", "3"]);
    assert_eq!(stdout(&o).trim(), "0.5");
    let o = fragsim(&["analytic", "--law", "uniform_binary", "--pbar"]);
    assert_eq!(stdout(&o).trim(), "2.414213562373");
    let o = fragsim(&["analytic", "--law", "lossy_binary", "--malthusian"]);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.457).abs() < 1e-3, "{v}");
    let o = fragsim(&["analytic", "--law", "dirichlet", "--param", "k=3", "--kappa", "2", "--malthusian"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn analytic_domain_errors_surface() {
    let o = fragsim(&["analytic", "--law", "uniform_binary", "--kappa", "0"]);
    assert_eq!(o.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverges"));
}

#[test]
fn duality_writes_merges() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = fragsim(&["duality", "--replicas", "20", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(out.join("merges.csv")).unwrap();
    assert_eq!(text.lines().nth(1), Some("replica,coal_time,n_before,rank_i,rank_j"));
    for l in text.lines().skip(2) {
        let f: Vec<&str> = l.split(',').collect();
        let n: usize = f[2].parse().unwrap();
        let (i, j): (usize, usize) = (f[3].parse().unwrap(), f[4].parse().unwrap());
        assert!(i < j && j <= n && n >= 2);
    }
}
