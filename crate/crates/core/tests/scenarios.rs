use detsdv::pipeline::{plan, simulate};
use detsdv::report::{evaluate, ScenarioFixture, CONTEXT_AWARE_MANEUVERING, CROSS_TRAFFIC_LEFT_TURN_ASSIST, REMOTE_VEHICLE_HEALTH};
use std::path::Path;

fn fixture(name: &str) -> ScenarioFixture {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios").join(name);
    ScenarioFixture::load(&dir).unwrap()
}

fn run(name: &str) -> detsdv::report::Verdict {
    let f = fixture(name);
    let p = plan(&f.services, &f.topology, f.sim.sync_error_ns());
    assert!(p.all_admitted(), "{:?}", p.admission);
    let out = simulate(&f.topology, &p, &f.sim).unwrap();
    evaluate(&f, &out.metrics)
}

#[test]
fn fixture_files_carry_the_table_rows() {
    for (name, row) in [
        ("cam", CONTEXT_AWARE_MANEUVERING),
        ("ctlta", CROSS_TRAFFIC_LEFT_TURN_ASSIST),
        ("rvh", REMOTE_VEHICLE_HEALTH),
    ] {
        let f = fixture(name);
        assert_eq!(f.expected, row, "{name}");
        let size = f.services[0].flows[0].data_spec.data_size;
        assert!(size <= row.message_size_bytes.unwrap(), "{name}");
    }
}

#[test]
fn context_aware_maneuvering_passes() {
    let v = run("cam");
    assert!(v.pass, "{v:?}");
}

#[test]
fn cross_traffic_left_turn_assist_passes() {
    let v = run("ctlta");
    assert!(v.pass, "{v:?}");
}

#[test]
fn remote_vehicle_health_passes() {
    let v = run("rvh");
    assert!(v.pass, "{v:?}");
}
