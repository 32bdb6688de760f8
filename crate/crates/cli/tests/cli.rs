use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn detsdv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detsdv")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn validate_exit_codes() {
    let wheelchair = fixtures().join("wheelchair/service.toml");
    let topo = fixtures().join("wheelchair/topology.toml");
    assert_eq!(code(&detsdv(&["validate", s(&wheelchair), s(&topo)])), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(&wheelchair).unwrap().replace("Replicas = 2", "Replicas = 0");
    std::fs::write(&bad, text).unwrap();
    let o = detsdv(&["validate", s(&bad)]);
    assert_eq!(code(&o), 2);
    let line: serde_json::Value = serde_json::from_slice(o.stdout.split(|&b| b == b'\n').next().unwrap()).unwrap();
    assert_eq!(line["code"], "INVARIANT");

    let o = detsdv(&["validate", "--service", s(&dir.path().join("missing.toml"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"code\":\"IO\""));
}

#[test]
fn plan_writes_artifacts_and_is_deterministic() {
    let svc = fixtures().join("wheelchair/service.toml");
    let topo = fixtures().join("wheelchair/topology.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [a.path(), b.path()] {
        let o = detsdv(&["plan", "--service", s(&svc), "--topology", s(&topo), "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["placement.json", "tsn_config.json", "interop.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn gpu_service_is_rejected_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let svc = dir.path().join("gpu.toml");
    let text = std::fs::read_to_string(fixtures().join("wheelchair/service.toml")).unwrap().replace("GPU = false", "GPU = true");
    std::fs::write(&svc, text).unwrap();
    let topo = fixtures().join("wheelchair/topology.toml");
    let out = dir.path().join("out");
    let o = detsdv(&["plan", "--service", s(&svc), "--topology", s(&topo), "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let admission = std::fs::read_to_string(out.join("admission.json")).unwrap();
    assert!(admission.contains("NO_FEASIBLE_NODE"));
    assert!(out.join("placement.json").exists());
}

#[test]
fn simulate_fixture_passes_and_repeats() {
    let sim = fixtures().join("scenarios/cam/sim.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [a.path(), b.path()] {
        let o = detsdv(&["simulate", "--sim", s(&sim), "--seed", "11", "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["metrics.json", "trace.ndjson", "verdicts.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }

    let text = detsdv(&["report", "--out", s(a.path()), "--format", "text"]);
    assert_eq!(code(&text), 0);
    let text = String::from_utf8(text.stdout).unwrap();
    assert!(text.starts_with("scenario Context aware maneuvering: PASS"));
    assert!(text.contains("processing") && text.contains("propagation"));
    let csv = detsdv(&["report", "--out", s(a.path()), "--format", "csv"]);
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 3);
    assert_eq!(code(&detsdv(&["report", "--out", s(a.path()), "--format", "xml"])), 2);
}

#[test]
fn failed_link_on_unreplicated_flow_fails_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cam = fixtures().join("scenarios/cam");
    let sim = dir.path().join("sim.toml");
    let text = std::fs::read_to_string(cam.join("sim.toml"))
        .unwrap()
        .replace("../../reference", s(&fixtures().join("reference")))
        .replace("\"service.toml\"", &format!("\"{}\"", s(&cam.join("service.toml"))))
        .replace("[scenario]", "[[failures]]\nlink = \"backbone\"\nfail_at_ms = 2000.0\n\n[scenario]");
    std::fs::write(&sim, text).unwrap();
    let o = detsdv(&["simulate", "--sim", s(&sim), "--out", s(&dir.path().join("out"))]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let v = std::fs::read_to_string(dir.path().join("out/verdicts.json")).unwrap();
    assert!(v.contains("\"binding_metric\": \"reliability\""));
}

#[test]
fn simulate_without_sim_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let svc = fixtures().join("wheelchair/service.toml");
    let topo = fixtures().join("wheelchair/topology.toml");
    let o = detsdv(&["simulate", "--service", s(&svc), "--topology", s(&topo), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
}
