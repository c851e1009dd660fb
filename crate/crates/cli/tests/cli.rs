use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torsionlab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path, study: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("out").join(study).join("summary.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn triangle_crit_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["study", "triangle-crit", "--assert"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(dir.path(), "triangle_crit");
    let v = s["values"]["tau_plus_sigma_over_27"].as_f64().unwrap();
    assert!((v + 0.1235945).abs() < 1e-6, "{v}");
    assert_eq!(s["passed"], true);
    for f in ["table.csv", "plot.svg"] {
        assert!(dir.path().join("out/triangle_crit").join(f).is_file());
    }
}

#[test]
fn identical_runs_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "report", "--domain", "triangle", "--h", "0.1", "--levels", "2",
    ];
    for d in [&a, &b] {
        assert!(run(d.path(), &args).status.success());
    }
    for f in ["table.csv", "summary.json", "plot.svg"] {
        let x = std::fs::read(a.path().join("out/report").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out/report").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let g = summary(a.path(), "report")["values"]["G"].as_f64().unwrap();
    assert!((g - 1.46216).abs() < 5e-3, "{g}");
}

#[test]
fn thread_count_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let base = ["study", "cluster", "--h", "0.2"];
    let cfg = "version = 1\n[study]\ncluster_n = [1, 16]\ncluster_segments = 32\n";
    for (d, threads) in [(&a, "1"), (&b, "2")] {
        std::fs::write(d.path().join("run.toml"), cfg).unwrap();
        let mut args = base.to_vec();
        args.extend(["--config", "run.toml", "--threads", threads]);
        let out = run(d.path(), &args);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let x = std::fs::read(a.path().join("out/cluster/table.csv")).unwrap();
    let y = std::fs::read(b.path().join("out/cluster/table.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        run(d, &["report", "--domain", "hexagon"]).status.code(),
        Some(2)
    );
    assert_eq!(run(d, &["report"]).status.code(), Some(2));
    assert_eq!(run(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(d, &["report", "--domain", "disk", "--levels", "1"])
            .status
            .code(),
        Some(2)
    );
    std::fs::write(d.join("bad.toml"), "version = 1\nunknown_key = 3\n").unwrap();
    assert_eq!(
        run(d, &["--config", "bad.toml", "report", "--domain", "disk"])
            .status
            .code(),
        Some(2)
    );
    std::fs::write(d.join("broken.toml"), "h = [").unwrap();
    assert_eq!(
        run(d, &["--config", "broken.toml", "study", "triangle-crit"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(d, &["derivative", "--domain", "disk", "--field", "twist"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn failed_assertion_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("strict.toml"),
        "version = 1\n[tolerances]\ngreen_flux = 1e-300\n",
    )
    .unwrap();
    let args = [
        "--config",
        "strict.toml",
        "residual",
        "--domain",
        "disk:64",
        "--h",
        "0.2",
    ];
    assert_eq!(run(d, &args).status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.push("--assert");
    assert_eq!(run(d, &strict).status.code(), Some(1));
    assert!(d.join("out/residual/edges.csv").is_file());
    assert!(d.join("out/residual/boundary.svg").is_file());
}

#[test]
fn config_values_are_used_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.toml"),
        "version = 1\ndomain = \"square\"\nh = 0.1\nout = \"results\"\n",
    )
    .unwrap();
    assert!(run(d, &["--config", "run.toml", "report"]).status.success());
    let text = std::fs::read_to_string(d.join("results/report/summary.json")).unwrap();
    assert!(text.contains("\"square\""));
    assert!(run(
        d,
        &["--config", "run.toml", "--out", "other", "report", "--domain", "triangle"]
    )
    .status
    .success());
    let text = std::fs::read_to_string(d.join("other/report/summary.json")).unwrap();
    assert!(text.contains("\"triangle\""));
}

#[test]
fn derivative_translation_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "derivative",
            "--domain",
            "ellipse:2,1",
            "--field",
            "translate-x",
            "--h",
            "0.1",
            "--assert",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(dir.path(), "derivative");
    let gp = s["values"]["G_prime"].as_f64().unwrap();
    let g = s["values"]["G"].as_f64().unwrap();
    assert!(gp.abs() < 2e-3 * g, "{gp}");
}

#[test]
fn mesh_export_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(
        d,
        &[
            "mesh-export",
            "--domain",
            "ellipse:2,1:64",
            "--h",
            "0.2",
            "--assert"
        ]
    )
    .status
    .success());
    let text = std::fs::read_to_string(d.join("out/mesh/mesh.txt")).unwrap();
    let n: usize = text.lines().next().unwrap().trim().parse().unwrap();
    assert!(n > 50);
    let out = run(
        d,
        &["audit", "--domain", "square", "--h", "0.1", "--assert"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn optimize_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(
        d,
        &[
            "optimize",
            "--seed",
            "rect:3",
            "--max-iters",
            "2",
            "--h",
            "0.1",
            "--assert",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/optimize/trace.json")).unwrap())
            .unwrap();
    let its = trace["iterates"].as_array().unwrap();
    assert_eq!(its.len(), 3);
    assert!(its[2]["g"].as_f64().unwrap() > its[0]["g"].as_f64().unwrap());
    assert!(d.join("out/optimize/frames/iter_000.svg").is_file());
    assert!(d.join("out/optimize/final.txt").is_file());
}
