use std::path::Path;
use wcgl::cli::{run, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE};

fn wcgl(args: &[&str]) -> i32 {
    run(std::iter::once("wcgl").chain(args.iter().copied()))
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(wcgl(&[]), EXIT_USAGE);
    assert_eq!(wcgl(&["run-everything"]), EXIT_USAGE);
    assert_eq!(wcgl(&["run-coupling"]), EXIT_USAGE, "missing --config");
    assert_eq!(wcgl(&["run-coupling", "--config", "/nonexistent/c.toml"]), EXIT_USAGE);
    assert_eq!(wcgl(&["verify", "--format", "xml"]), EXIT_USAGE);
    assert_eq!(wcgl(&["resume", "/nonexistent/x.ckpt"]), EXIT_USAGE);
}

#[test]
fn help_exits_zero() {
    assert_eq!(wcgl(&["--help"]), EXIT_OK);
    assert_eq!(wcgl(&["--version"]), EXIT_OK);
}

#[test]
fn config_for_another_experiment_is_refused() {
    let cfg = configs().join("coupling.toml");
    assert_eq!(wcgl(&["run-ergodicity", "--config", cfg.to_str().unwrap()]), EXIT_USAGE);
}

#[test]
fn invalid_config_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "experiment = \"coupling\"\nseed = 1\nhorizon = -1.0\ndt = 0.01\n[model]\nmu = 1.0\nnu = [1.0, 0.0]\ntau = [0.0, 0.0]\nm = 1\n[grid]\ncutoff = 8\n").unwrap();
    assert_eq!(wcgl(&["run-coupling", "--config", path.to_str().unwrap()]), EXIT_USAGE);
}

#[test]
fn verify_reports_are_byte_identical_and_resume_continues() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(wcgl(&["verify", "--seed", "5", "--out", a.to_str().unwrap()]), EXIT_OK);
    assert_eq!(wcgl(&["verify", "--seed", "5", "--out", b.to_str().unwrap(), "--threads", "2"]), EXIT_OK);
    let ra = std::fs::read(a.join("verify.json")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("verify.json")).unwrap());
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("verify.meta.json")).unwrap()).unwrap();
    assert!(meta.get("wall_clock_seconds").is_some());
    let rep: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(rep["schema_version"], 1);
    for c in rep["checks"].as_array().unwrap() {
        assert!(c["tolerance"].is_string() && c["sample_size"].is_u64(), "{c}");
    }

    assert_eq!(wcgl(&["verify", "--seed", "5", "--out", a.to_str().unwrap(), "--format", "csv"]), EXIT_OK);
    let csv = std::fs::read_to_string(a.join("verify_checks.csv")).unwrap();
    assert!(csv.starts_with("name,passed,value,tolerance,sample_size"), "{csv}");
}

#[test]
fn small_ergodicity_run_writes_resumable_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("erg");
    let cfg = dir.path().join("erg.toml");
    std::fs::write(
        &cfg,
        format!(
            "experiment = \"ergodicity\"\nseed = 9\nhorizon = 1.0\ndt = 0.01\noutput_dir = \"{}\"\n\
             observables = [\"l2_norm\"]\n[model]\nmu = 2.0\nnu = [1.0, 0.5]\ntau = [0.0, 0.0]\nm = 1\n\
             [grid]\ncutoff = 4\n[ergodicity]\nsample_every = 1\n[checkpoint]\nat = [0.5]\n",
            out.display()
        ),
    )
    .unwrap();
    let code = wcgl(&["run-ergodicity", "--config", cfg.to_str().unwrap()]);
    assert!(code == EXIT_OK || code == EXIT_CHECK_FAILED, "exit {code}");
    let mid = out.join("ergodicity_chain_a_t0.5.ckpt");
    let fin = out.join("ergodicity_chain_a_final.ckpt");
    let res = dir.path().join("res");
    assert_eq!(wcgl(&["resume", mid.to_str().unwrap(), "--out", res.to_str().unwrap()]), EXIT_OK);
    let resumed = wcgl::checkpoint::Checkpoint::load(&res.join("resume_final.ckpt")).unwrap();
    let direct = wcgl::checkpoint::Checkpoint::load(&fin).unwrap();
    assert_eq!(resumed.snapshot.primary().v, direct.snapshot.primary().v);
    assert_eq!(resumed.snapshot.primary().t.to_bits(), direct.snapshot.primary().t.to_bits());
}
