use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
  "d": 1, "L": 4.0, "N": 128, "T": 1.0, "dt": 0.0078125, "seed": 7,
  "drift": {"id": "constant", "c": [0.5]},
  "u0": {"id": "bump", "radius": 1.5},
  "phi_count": 6
}"#;

fn stlab(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_stlab"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn solve_writes_artifacts_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = stlab(tmp.path(), CONFIG, &["solve", "--snapshots", "16"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    for f in ["path.csv", "norms.csv", "manifest.csv", "u/u_t0.csv", "u/u_t16.csv", "v/v_t16.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert!(manifest.starts_with("seed,scheme,N,dt,p,drift_id,path_kind,n_level,config_hash,tolerance_version"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        assert_eq!(code(&stlab(dir, CONFIG, &["solve"])), 0);
        assert_eq!(code(&stlab(dir, CONFIG, &["hypotheses", "--samples", "1024"])), 0);
    }
    assert_eq!(tree(&a.path().join("out")), tree(&b.path().join("out")));
}

#[test]
fn seed_override_changes_the_path() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    stlab(a.path(), CONFIG, &["solve"]);
    stlab(b.path(), CONFIG, &["--seed", "8", "solve"]);
    let pa = fs::read(a.path().join("out/path.csv")).unwrap();
    let pb = fs::read(b.path().join("out/path.csv")).unwrap();
    assert_ne!(pa, pb);
}

#[test]
fn saved_run_verifies_and_corruption_fails() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&stlab(tmp.path(), CONFIG, &["solve", "--snapshots", "128"])), 0);
    let run = tmp.path().join("out").display().to_string();
    let o = stlab(tmp.path(), CONFIG, &["verify-weak", "--run-dir", &run]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    // Double one interior snapshot: the identity must no longer hold.
    let snap = tmp.path().join("out/u/u_t64.csv");
    let text = fs::read_to_string(&snap).unwrap();
    let corrupted: Vec<String> = text
        .lines()
        .map(|line| match line.rsplit_once(',') {
            Some((head, v)) if v.parse::<f64>().is_ok() => {
                format!("{head},{}", 2.0 * v.parse::<f64>().unwrap())
            }
            _ => line.to_string(),
        })
        .collect();
    fs::write(&snap, corrupted.join("\n") + "\n").unwrap();
    let o = stlab(tmp.path(), CONFIG, &["verify-weak", "--run-dir", &run]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn configuration_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = CONFIG.replace("\"phi_count\"", "\"bogus\": 1, \"phi_count\"");
    assert_eq!(code(&stlab(tmp.path(), &unknown, &["solve"])), 2);
    let bad_dt = CONFIG.replace("0.0078125", "0.3");
    assert_eq!(code(&stlab(tmp.path(), &bad_dt, &["solve"])), 2);
    assert_eq!(code(&stlab(tmp.path(), "{not json", &["solve"])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_stlab")).arg("solve").output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn runtime_errors_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere").display().to_string();
    let o = stlab(tmp.path(), CONFIG, &["verify-weak", "--run-dir", &missing]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failing_hypotheses_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let rough = CONFIG.replace(r#"{"id": "constant", "c": [0.5]}"#, r#"{"id": "power1d", "alpha": 0.25}"#)
        .replace("\"seed\": 7", "\"seed\": 7, \"p\": 2");
    let o = stlab(tmp.path(), &rough, &["hypotheses", "--samples", "2048"]);
    assert_eq!(code(&o), 1, "{}\n{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
}
