use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scenemocap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenemocap"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = scenemocap(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn make(dir: &Path, kind: &str) {
    ok(&[
        "make-scenario",
        "--kind",
        kind,
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
        "--set",
        "scenario.frames=6",
    ]);
}

fn optimize(scenario: &Path, out: &Path, threads: &str) -> Vec<u8> {
    ok(&[
        "optimize",
        "--seed",
        "11",
        "--threads",
        threads,
        "--out",
        out.to_str().unwrap(),
        "--set",
        &format!("scenario={}", scenario.display()),
        "--set",
        "stage.n_sam=80",
        "--set",
        "dump_ply=true",
    ]);
    fs::read(out.join("result.json")).unwrap()
}

#[test]
fn optimize_a_generated_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sc");
    make(&sc, "seat");
    for f in ["scenario.json", "scene.ply", "initial.json"] {
        assert!(sc.join(f).is_file(), "{f}");
    }
    let a = optimize(&sc.join("scenario.json"), &dir.path().join("a"), "2");
    let b = optimize(&sc.join("scenario.json"), &dir.path().join("b"), "2");
    let c = optimize(&sc.join("scenario.json"), &dir.path().join("c"), "1");
    assert_eq!(a, b);
    assert_eq!(a, c);

    let result: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(result["version"].as_str().unwrap().starts_with("1."));
    for key in ["phi0", "phi_opt", "phi_sam", "phi_sam_hat", "phi_ref", "scales"] {
        assert_eq!(result[key].as_array().unwrap().len(), 6, "{key}");
    }
    let plys = fs::read_dir(dir.path().join("a/ply")).unwrap().count();
    assert_eq!(plys, 6);
    let names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.iter().all(|n| !n.to_string_lossy().ends_with(".tmp")));
}

#[test]
fn optimize_from_separate_files() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sc");
    make(&sc, "floor");
    ok(&[
        "annotate",
        "--out",
        sc.to_str().unwrap(),
        "--set",
        &format!("scenario={}", sc.join("scenario.json").display()),
    ]);
    assert!(sc.join("contacts.json").is_file());

    // Detections in their own file, taken from the scenario.
    let scenario: serde_json::Value = serde_json::from_slice(&fs::read(sc.join("scenario.json")).unwrap()).unwrap();
    let obs = serde_json::json!({ "version": "1.0", "frames": scenario["obs"] });
    fs::write(sc.join("obs.json"), serde_json::to_vec(&obs).unwrap()).unwrap();
    let config = serde_json::json!({
        "scene": "scene.ply",
        "observations": "obs.json",
        "contacts": "contacts.json",
        "initial": "initial.json",
        "camera": scenario["cam"],
        "stage": { "sampling": false },
    });
    fs::write(sc.join("run.json"), serde_json::to_vec(&config).unwrap()).unwrap();
    let out = scenemocap(&[
        "optimize",
        "--config",
        sc.join("run.json").to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("r/result.json")).unwrap()).unwrap();
    assert_eq!(result["phi_sam"], result["phi_opt"]);
}

#[test]
fn malformed_scene_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.ply");
    fs::write(&scene, "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nend_header\n1\n").unwrap();
    let config = serde_json::json!({
        "scene": "scene.ply",
        "observations": "obs.json",
        "contacts": "contacts.json",
        "initial": "initial.json",
    });
    fs::write(dir.path().join("run.json"), serde_json::to_vec(&config).unwrap()).unwrap();
    fs::write(dir.path().join("obs.json"), "{}").unwrap();
    let out = scenemocap(&[
        "optimize",
        "--config",
        dir.path().join("run.json").to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        dir.path().join("r").to_str().unwrap(),
        "--set",
        "stage.sampling=false",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let missing = dir.path().join("nope.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["optimize", "--seed", "0", "--out", out],
        vec!["optimize", "--seed", "0", "--out", out, "--config", missing.to_str().unwrap()],
        vec!["bench", "--out", out, "--set", "stage.window=0"],
        vec!["bench", "--out", out, "--set", "stage.unknown=1"],
        vec!["ablate", "--out", out, "--suite", "nonsense"],
        vec!["make-scenario", "--seed", "1", "--out", out, "--kind", "cave"],
        vec!["make-scenario", "--seed", "1", "--out", out, "--threads", "0"],
        vec!["make-scenario", "--seed", "1", "--out", out, "--set", "scenario.frames=0"],
        vec!["annotate", "--out", out],
    ];
    for args in cases {
        let o = scenemocap(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn bench_and_ablate_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let sets = [
        "--set",
        "kinds=[\"floor\"]",
        "--set",
        "scenario.frames=5",
        "--set",
        "stage.n_sam=40",
        "--set",
        "sample_counts=[20]",
    ];
    let bench = dir.path().join("bench");
    let mut args = vec!["bench", "--seed", "2", "--threads", "2", "--out", bench.to_str().unwrap()];
    args.extend(sets);
    ok(&args);
    let csv = fs::read_to_string(bench.join("bench.csv")).unwrap();
    // Header plus one row per stage.
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("variant,scenario,seed,stage"));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(bench.join("bench_summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 3);

    let ablate = dir.path().join("ablate");
    let mut args = vec!["ablate", "--seed", "2", "--suite", "no_lsli", "--out", ablate.to_str().unwrap()];
    args.extend(sets);
    ok(&args);
    let csv = fs::read_to_string(ablate.join("no_lsli.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("full,") || l.starts_with("no_lsli,")), "{csv}");
}
