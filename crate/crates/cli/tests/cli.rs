use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/smoke.toml")
}

fn dgsp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgsp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn smoke(args: &[&str], out: &Path) -> Output {
    let cfg = smoke_config();
    let mut all = vec!["--config", cfg.to_str().unwrap()];
    all.extend_from_slice(args);
    dgsp(&all, out)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn manifest_hash(dir: &Path, file: &str) -> String {
    manifest(dir)["files"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["path"] == file)
        .unwrap_or_else(|| panic!("{file} missing from manifest"))["sha256"]
        .as_str()
        .unwrap()
        .to_string()
}

#[test]
fn table1_matches_and_manifest_hashes_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dgsp(&["table1"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("table1: match"));
    for f in manifest(tmp.path())["files"].as_array().unwrap() {
        let bytes = fs::read(tmp.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(
            f["sha256"].as_str().unwrap(),
            hex::encode(Sha256::digest(&bytes))
        );
    }
}

#[test]
fn resolved_config_is_printed_first() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dgsp(&["gen-world", "--seed", "11"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(
        s.starts_with("# dgsp gen-world: resolved configuration (world seed 11)"),
        "{s}"
    );
    assert!(s.contains("[train]") && s.contains("[world]") && s.contains("seed = 11"));
}

#[test]
fn world_seed_flag_changes_the_world() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    dgsp(&["gen-world", "--seed", "1"], a.path());
    dgsp(&["gen-world", "--seed", "2"], b.path());
    assert_ne!(
        manifest_hash(a.path(), "advertisers.csv"),
        manifest_hash(b.path(), "advertisers.csv")
    );
}

#[test]
fn missing_weights_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[train]\niterations = 2\neta = -1.0\n").unwrap();
    let o = dgsp(
        &["train", "--config", cfg.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("weights") && e.contains("eta"), "{e}");
}

#[test]
fn unknown_key_and_bad_usage_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[world]\nslotz = 2\n").unwrap();
    assert_eq!(
        dgsp(
            &["gen-world", "--config", cfg.to_str().unwrap()],
            tmp.path()
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        dgsp(&["no-such-command"], tmp.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        dgsp(&["gen-world", "--workers", "0"], tmp.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        smoke(
            &["evaluate", "--model", "/nonexistent/model.actor"],
            tmp.path()
        )
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn corrupt_checkpoint_is_a_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.actor");
    fs::write(&bad, b"not a model").unwrap();
    let o = smoke(
        &["audit", "--model", bad.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn training_is_reproducible_and_feeds_evaluate_and_audit() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    for d in [&a, &b] {
        let o = smoke(&["train"], d.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert!(
        start.elapsed().as_secs() < 120,
        "smoke training took {:?}",
        start.elapsed()
    );
    for f in ["train.csv", "model.actor", "model.critic"] {
        assert_eq!(
            manifest_hash(a.path(), f),
            manifest_hash(b.path(), f),
            "{f}"
        );
    }

    let model = format!("mine={}", a.path().join("model.actor").display());
    let ev = tempfile::tempdir().unwrap();
    let o = smoke(&["evaluate", "--model", &model], ev.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(ev.path().join("evaluation.csv")).unwrap();
    assert!(
        csv.lines().any(|l| l.starts_with("deep_gsp,mine,")),
        "{csv}"
    );
    assert_eq!(csv.lines().count(), 1 + 2 + 1 + 1);

    let (x, y) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&x, &y] {
        let o = smoke(&["audit", "--model", &model], d.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("Metrics Configuration"));
    }
    assert_eq!(
        manifest_hash(x.path(), "audit.csv"),
        manifest_hash(y.path(), "audit.csv")
    );
}

#[test]
fn sweeps_write_curves_and_reuse_cached_models() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let cache = cache.to_str().unwrap();
    let o = smoke(&["pareto", "--cache", cache], &tmp.path().join("p1"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = fs::read_to_string(tmp.path().join("p1/pareto_rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3, "{rows}");
    let points = fs::read_to_string(tmp.path().join("p1/pareto_points.csv")).unwrap();
    assert_eq!(points.lines().count(), 1 + 3 + 3 + 2);

    let o = smoke(&["pareto", "--cache", cache], &tmp.path().join("p2"));
    assert_eq!(stderr(&o).matches("cache hit").count(), 2, "{}", stderr(&o));
    assert_eq!(
        manifest_hash(&tmp.path().join("p1"), "pareto_rows.csv"),
        manifest_hash(&tmp.path().join("p2"), "pareto_rows.csv")
    );

    let o = smoke(&["transition", "--cache", cache], &tmp.path().join("t"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("t/transition.csv")).unwrap();
    assert!(
        csv.starts_with("epsilon,utility_pct,objective_pct\n0,"),
        "{csv}"
    );
}
