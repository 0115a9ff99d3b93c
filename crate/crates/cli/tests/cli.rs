use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lookdown(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lookdown"))
        .args(args)
        .current_dir(cwd)
        .env_remove("LOOKDOWN_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const MORAN: &str = r#"
[model]
preset = "moran"
n = 12
gamma = 1.0

[engine]
t_end = 1.0
snapshots = { every = 0.5 }
seed = 11
replicates = 3
"#;

fn simulate(tmp: &Path, config: &str, out: &str) -> Output {
    let cfg = write(tmp, "moran.toml", config);
    lookdown(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out], tmp)
}

#[test]
fn simulate_writes_a_run_directory() {
    let tmp = TempDir::new().unwrap();
    let o = simulate(tmp.path(), MORAN, "run");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("run");
    for f in ["manifest.json", "summary.tsv", "summary.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    for i in 0..3 {
        let rd = run.join(format!("rep_{i:05}"));
        for f in ["snapshot_000.tsv", "snapshot_001.tsv", "snapshot_002.tsv", "events.tsv", "lineage.tsv"] {
            assert!(rd.join(f).is_file(), "rep {i}: {f}");
        }
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["replicates"], 3);
}

#[test]
fn same_seed_same_bytes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&simulate(tmp.path(), MORAN, "a")), 0);
    assert_eq!(code(&simulate(tmp.path(), MORAN, "b")), 0);
    for i in 0..3 {
        for f in ["snapshot_002.tsv", "events.tsv", "lineage.tsv"] {
            let rel = format!("rep_{i:05}/{f}");
            assert_eq!(fs::read(tmp.path().join("a").join(&rel)).unwrap(), fs::read(tmp.path().join("b").join(&rel)).unwrap(), "{rel}");
        }
    }
    let cfg = tmp.path().join("moran.toml");
    let o = lookdown(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "c", "--seed", "12"], tmp.path());
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(tmp.path().join("a/rep_00000/events.tsv")).unwrap(), fs::read(tmp.path().join("c/rep_00000/events.tsv")).unwrap());
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = TempDir::new().unwrap();
    let bad = MORAN.replace("seed = 11", "seed = 11\nspeed = 3");
    let o = simulate(tmp.path(), &bad, "run");
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("speed") && err.contains("line 11"), "{err}");
    assert!(!tmp.path().join("run").exists());

    let o = simulate(tmp.path(), "[model]\npreset = \"moran\"\nn = 1\ngamma = 1.0\n", "run");
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("run").exists());

    let o = lookdown(&["simulate", "--config", "does-not-exist.toml"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn population_cap_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"
[model]
preset = "branching"
n0 = 200
r = 0.5
k = 2

[engine]
t_end = 2.0
particle_cap = 300
"#;
    let o = simulate(tmp.path(), cfg, "run");
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap"));
}

#[test]
fn output_directory_defaults() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "moran.toml", MORAN);
    let o = Command::new(env!("CARGO_BIN_EXE_lookdown"))
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("LOOKDOWN_OUT", tmp.path().join("elsewhere"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("elsewhere/moran/manifest.json").is_file());

    let o = lookdown(&["simulate", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("runs/moran/manifest.json").is_file());
}

#[test]
fn genealogy_of_a_run() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&simulate(tmp.path(), MORAN, "run")), 0);

    let o = lookdown(&["genealogy", "--run", "run", "-n", "1", "--out", "g1"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trees = fs::read_to_string(tmp.path().join("g1/trees.nwk")).unwrap();
    assert_eq!(trees.lines().count(), 3);
    assert!(trees.lines().all(|l| l.starts_with('p') && l.ends_with(';') && !l.contains('(')), "{trees}");

    let o = lookdown(&["genealogy", "--run", "run", "-n", "2"], tmp.path());
    assert_eq!(code(&o), 0);
    let g = tmp.path().join("run/genealogy");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(g.join("coalescence.json")).unwrap()).unwrap();
    assert_eq!(summary["n_trees"], 3);
    let pairs = fs::read_to_string(g.join("pair_times.tsv")).unwrap();
    assert_eq!(pairs.lines().next(), Some("pair_time"));

    let o = lookdown(&["genealogy", "--run", "run", "-n", "13"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds"));

    let o = lookdown(&["genealogy", "--run", "nowhere", "-n", "2"], tmp.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn genealogy_needs_a_lineage_log() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!("{MORAN}\n[outputs]\nlineage = false\n");
    assert_eq!(code(&simulate(tmp.path(), &cfg, "run")), 0);
    assert!(!tmp.path().join("run/rep_00000/lineage.tsv").exists());
    let o = lookdown(&["genealogy", "--run", "run", "-n", "2"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("lineage"));
}

#[test]
fn verify_passes_and_writes_reports() {
    let tmp = TempDir::new().unwrap();
    let o = lookdown(&["verify", "poisson-identities", "--out", "v"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("PASS\t")));
    assert!(!out.lines().any(|l| l.starts_with("FAIL\t")));
    assert!(tmp.path().join("v/reports.tsv").is_file());
    let reports: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("v/reports.json")).unwrap()).unwrap();
    assert!(reports.as_array().unwrap().iter().all(|r| r["pass"] == true));
}

#[test]
fn verify_mutant_fails_with_exit_1() {
    let tmp = TempDir::new().unwrap();
    let o = lookdown(&["verify", "uniformity", "--mutant", "--reps", "300", "--out", "v"], tmp.path());
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).lines().any(|l| l.starts_with("FAIL\t")));
}

#[test]
fn verify_usage_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&lookdown(&["verify", "nonsense"], tmp.path())), 2);
    assert_eq!(code(&lookdown(&["verify"], tmp.path())), 2);
    let cfg = write(tmp.path(), "v.toml", &format!("{MORAN}\n[verify]\nsuite = \"poisson-identities\"\nalpha = 2.0\n"));
    assert_eq!(code(&lookdown(&["verify", "--config", cfg.to_str().unwrap()], tmp.path())), 2);
}

#[test]
fn identities_command() {
    let tmp = TempDir::new().unwrap();
    let o = lookdown(&["identities", "--out", "id"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let tsv = fs::read_to_string(tmp.path().join("id/identities.tsv")).unwrap();
    assert_eq!(tsv.lines().next(), Some("identity\tspec\tmc\tanalytic\tstd_err\tpass"));
    assert_eq!(tsv.lines().count(), 1 + 3 * 5);
}
