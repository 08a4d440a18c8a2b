use std::path::Path;
use std::process::{Command, Output};

fn noisyvqe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisyvqe")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

const MEANFIELD: &str = r#"{"seed": 3, "models": ["tfim", "heisenberg", "theisenberg"], "sizes": [2]}"#;

#[test]
fn meanfield_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "mf.json", MEANFIELD);
    let out = dir.path().join("mf.csv");
    let res = noisyvqe(&["meanfield", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let csv = std::fs::read_to_string(&out).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("# command=meanfield config_sha256="));
    assert!(header.ends_with("seed=3"));
    let rows = data_lines(&csv);
    assert_eq!(rows[0], "model,n,e_mf,e0,theta,phi");
    assert_eq!(rows.len(), 4);
    let e_mf: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
    for (got, want) in e_mf.iter().zip([-2.0, -1.0, -1.5]) {
        assert!((got - want).abs() < 1e-3, "{got} vs {want}");
    }

    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("mf.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["command"], "meanfield");
    assert_eq!(meta["rows"], 3);
    assert!(meta["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"seed": 11, "models": ["tfim"], "n": 2, "depths": [1], "families": ["depolarizing", "damping"],
            "p_grid": [0.0, 0.05], "optimizer": {"restarts": 2, "max_iterations": 200}}"#,
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let res = noisyvqe(&["noise-sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read(dir.path().join("a.means.csv")).unwrap(), std::fs::read(dir.path().join("b.means.csv")).unwrap());

    let c = dir.path().join("c.csv");
    let res = noisyvqe(&["noise-sweep", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "12"]);
    assert!(res.status.success());
    let c_text = std::fs::read_to_string(&c).unwrap();
    assert!(c_text.lines().next().unwrap().ends_with("seed=12"));
    assert_ne!(data_lines(&c_text), data_lines(&std::fs::read_to_string(&a).unwrap()));
}

#[test]
fn stdout_when_no_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "mf.json", r#"{"seed": 1, "models": ["tfim"], "sizes": [2, 4]}"#);
    let res = noisyvqe(&["meanfield", "--config", &cfg]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.starts_with("# command=meanfield"));
    assert_eq!(data_lines(&text).len(), 3);
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing_seed = write(dir.path(), "a.json", r#"{"models": ["tfim"], "sizes": [2]}"#);
    let unknown_field = write(dir.path(), "b.json", r#"{"seed": 1, "models": ["tfim"], "sizes": [2], "extra": 1}"#);
    let bad_size = write(dir.path(), "c.json", r#"{"seed": 1, "models": ["tfim"], "sizes": [1]}"#);
    let bad_device = write(dir.path(), "d.json", r#"{"seed": 1, "rows": [{"model": "tfim", "device": "nowhere[0,1]"}]}"#);
    let not_json = write(dir.path(), "e.json", "seed = 1");
    for (cmd, cfg) in [
        ("meanfield", &missing_seed),
        ("meanfield", &unknown_field),
        ("meanfield", &bad_size),
        ("ibm-compare", &bad_device),
        ("meanfield", &not_json),
    ] {
        let res = noisyvqe(&[cmd, "--config", cfg]);
        assert_eq!(res.status.code(), Some(2), "{cmd} {cfg}: {}", String::from_utf8_lossy(&res.stderr));
        assert!(res.stdout.is_empty(), "no output before validation passes");
    }
    assert_eq!(noisyvqe(&["meanfield"]).status.code(), Some(2));
    assert_eq!(noisyvqe(&["meanfield", "--config", "/nonexistent/cfg.json"]).status.code(), Some(2));
}

#[test]
fn singular_confusion_matrix_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"seed": 5, "model": "tfim", "sampling": {"epochs": 2, "shots": 100,
            "confusion": {"flip_rates": [[0.5, 0.5], [0.01, 0.02]]}}}"#,
    );
    let res = noisyvqe(&["sampled-vqe", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn sampled_vqe_emits_trajectory_and_params() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"seed": 5, "model": "heisenberg", "noise": {"device": "valencia[0,1]"},
            "sampling": {"epochs": 15, "confusion": {"flip_rates": [[0.02, 0.03], [0.01, 0.04]]}}}"#,
    );
    let out = dir.path().join("run.csv");
    let res = noisyvqe(&["sampled-vqe", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(data_lines(&std::fs::read_to_string(&out).unwrap()).len(), 16);
    let params = std::fs::read_to_string(dir.path().join("run.params.csv")).unwrap();
    assert!(params.starts_with("# command=sampled-vqe"));
    assert_eq!(data_lines(&params).len(), 5);
}
