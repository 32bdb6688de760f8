//! Scenario verdicts and report rendering.
//!
//! A scenario pairs descriptors, a topology and a sim config with expected
//! constraints taken from the use-case requirements table. Reliability is
//! checked at message level: a message counts once all its fragments arrive.

use crate::descriptors::{flow_key, parse_service_descriptor, parse_topology_descriptor, ServiceDescriptor, TopologyDescriptor};
use crate::netsim::{FrameOutcome, MetricsReport, SimConfig, Trace};
use crate::time::{ns_to_us, Nanos};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const REPORT_SCHEMA: &str = "v1";
/// Relative shortfall of the observed message rate still accepted.
pub const RATE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpectedConstraints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_latency_ms: Option<f64>,
    /// Fraction of messages that must be delivered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reliability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_size_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_hz: Option<f64>,
}

/// 100 bytes per message, 50 ms, 99%, continuous at 10 Hz.
pub const CONTEXT_AWARE_MANEUVERING: ExpectedConstraints = ExpectedConstraints {
    max_latency_ms: Some(50.0),
    reliability: Some(0.99),
    message_size_bytes: Some(100),
    rate_hz: Some(10.0),
};

/// 1000 bytes per message, 10 ms, 99.9%, discrete.
pub const CROSS_TRAFFIC_LEFT_TURN_ASSIST: ExpectedConstraints = ExpectedConstraints {
    max_latency_ms: Some(10.0),
    reliability: Some(0.999),
    message_size_bytes: Some(1000),
    rate_hz: None,
};

/// Under 1 KB, under 30 s, 99.99%, continuous without a stated rate.
pub const REMOTE_VEHICLE_HEALTH: ExpectedConstraints = ExpectedConstraints {
    max_latency_ms: Some(30_000.0),
    reliability: Some(0.9999),
    message_size_bytes: Some(1000),
    rate_hz: None,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("UNSUPPORTED_FORMAT: {0}")]
    UnsupportedFormat(String),
    #[error("INVALID_FIXTURE: {0}")]
    InvalidFixture(String),
}

impl ReportError {
    pub fn code(&self) -> &'static str {
        match self {
            ReportError::UnsupportedFormat(_) => "UNSUPPORTED_FORMAT",
            ReportError::InvalidFixture(_) => "INVALID_FIXTURE",
        }
    }
}

/// The `[scenario]` table of a sim config file. Paths are relative to the
/// sim config's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub topology: Option<String>,
    #[serde(default)]
    pub services: Vec<String>,
    #[serde(flatten)]
    pub expected: ExpectedConstraints,
}

#[derive(Deserialize)]
struct SimFile {
    #[serde(default)]
    scenario: Option<ScenarioSpec>,
}

pub fn parse_scenario(sim_toml: &str) -> Result<Option<ScenarioSpec>, ReportError> {
    let f: SimFile = toml::from_str(sim_toml).map_err(|e| ReportError::InvalidFixture(e.to_string()))?;
    Ok(f.scenario)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFixture {
    pub name: String,
    pub services: Vec<ServiceDescriptor>,
    pub topology: TopologyDescriptor,
    pub sim: SimConfig,
    pub expected: ExpectedConstraints,
    /// Flows checked against `expected`: those of the first service.
    pub flows: Vec<String>,
}

impl ScenarioFixture {
    /// Loads `sim.toml` from `dir` and the topology and services its
    /// `[scenario]` table names.
    pub fn load(dir: &Path) -> Result<ScenarioFixture, ReportError> {
        let bad = |what: &Path, e: &dyn std::fmt::Display| ReportError::InvalidFixture(format!("{}: {e}", what.display()));
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| bad(p, &e));
        let sim_path = dir.join("sim.toml");
        let sim_text = read(&sim_path)?;
        let sim = SimConfig::parse_toml(&sim_text).map_err(|e| bad(&sim_path, &e))?;
        let spec = parse_scenario(&sim_text)?.ok_or_else(|| bad(&sim_path, &"missing [scenario] table"))?;
        let topo_path = dir.join(spec.topology.as_deref().unwrap_or("topology.toml"));
        let topology = parse_topology_descriptor(&read(&topo_path)?).map_err(|e| bad(&topo_path, &e))?;
        let mut services = Vec::new();
        let names = if spec.services.is_empty() { vec!["service.toml".to_string()] } else { spec.services.clone() };
        for name in &names {
            let p = dir.join(name);
            services.push(parse_service_descriptor(&read(&p)?).map_err(|e| bad(&p, &e))?);
        }
        let flows = services[0].flows.iter().map(|f| flow_key(&services[0], f)).collect();
        Ok(ScenarioFixture {
            name: spec.name,
            services,
            topology,
            sim,
            expected: spec.expected,
            flows,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFailure {
    pub metric: String,
    pub expected: f64,
    pub observed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVerdict {
    pub flow: String,
    pub pass: bool,
    pub failures: Vec<ConstraintFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub scenario: String,
    pub pass: bool,
    pub flows: Vec<FlowVerdict>,
    /// Metric of the first failure, if any.
    pub binding_metric: Option<String>,
}

pub const NO_DELIVERIES: &str = "no deliveries";

fn check_flow(flow: &str, expected: &ExpectedConstraints, report: &MetricsReport) -> FlowVerdict {
    let mut failures = Vec::new();
    let m = report.flows.get(flow).filter(|m| m.delivered > 0);
    match m {
        None => failures.push(ConstraintFailure {
            metric: NO_DELIVERIES.into(),
            expected: 1.0,
            observed: Some(0.0),
        }),
        Some(m) => {
            if let Some(max) = expected.max_latency_ms {
                let observed = m.latency.as_ref().map(|l| l.max_us / 1_000.0);
                if observed.is_none_or(|o| o > max) {
                    failures.push(ConstraintFailure {
                        metric: "max_latency_ms".into(),
                        expected: max,
                        observed,
                    });
                }
            }
            if let Some(r) = expected.reliability {
                let observed = m.delivery_ratio;
                if observed.is_none_or(|o| o < r) {
                    failures.push(ConstraintFailure {
                        metric: "reliability".into(),
                        expected: r,
                        observed,
                    });
                }
            }
            if let Some(rate) = expected.rate_hz {
                let observed = m.inter_frame.as_ref().map(|i| 1e6 / i.mean_us);
                if observed.is_none_or(|o| o < rate * (1.0 - RATE_TOLERANCE)) {
                    failures.push(ConstraintFailure {
                        metric: "rate_hz".into(),
                        expected: rate,
                        observed,
                    });
                }
            }
        }
    }
    FlowVerdict {
        flow: flow.to_string(),
        pass: failures.is_empty(),
        failures,
    }
}

/// Checks each listed flow against its expectations.
pub fn evaluate_flows(scenario: &str, expectations: &[(String, ExpectedConstraints)], report: &MetricsReport) -> Verdict {
    let flows: Vec<FlowVerdict> = expectations.iter().map(|(f, e)| check_flow(f, e, report)).collect();
    let binding_metric = if flows.is_empty() {
        Some(NO_DELIVERIES.to_string())
    } else {
        flows.iter().flat_map(|f| &f.failures).map(|f| f.metric.clone()).next()
    };
    Verdict {
        scenario: scenario.to_string(),
        pass: binding_metric.is_none(),
        flows,
        binding_metric,
    }
}

pub fn evaluate(fixture: &ScenarioFixture, report: &MetricsReport) -> Verdict {
    let exp: Vec<_> = fixture.flows.iter().map(|f| (f.clone(), fixture.expected)).collect();
    evaluate_flows(&fixture.name, &exp, report)
}

/// Expectations read off the descriptors themselves: MaxLatency, full
/// delivery when Delivery is set, and the periodic rate.
pub fn descriptor_expectations(services: &[ServiceDescriptor]) -> Vec<(String, ExpectedConstraints)> {
    services
        .iter()
        .flat_map(|s| {
            s.flows.iter().map(move |f| {
                let t = &f.traffic_spec;
                (
                    flow_key(s, f),
                    ExpectedConstraints {
                        max_latency_ms: t.time.max_latency,
                        reliability: t.delivery.then_some(1.0),
                        message_size_bytes: Some(f.data_spec.data_size),
                        rate_hz: t.time.periodicity.map(|p| 1_000.0 / p),
                    },
                )
            })
        })
        .collect()
}

/// Slowest delivered message of a flow, split into the four per-hop delay
/// components summed along the path of its last accepted fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstFrame {
    pub message: u64,
    pub frame_id: u64,
    pub latency_us: f64,
    pub processing_us: f64,
    pub queuing_us: f64,
    pub transmission_us: f64,
    pub propagation_us: f64,
}

pub fn worst_frames(trace: &Trace) -> BTreeMap<String, WorstFrame> {
    let fragments: BTreeMap<&str, u32> = trace.flows().map(|f| (f.flow.as_str(), f.fragments)).collect();
    // flow -> message -> (created, fragment -> (at, frame_id))
    let mut accepted: BTreeMap<&str, BTreeMap<u64, (Nanos, BTreeMap<u32, (Nanos, u64)>)>> = BTreeMap::new();
    for r in trace.frames().filter(|r| r.outcome == FrameOutcome::Delivered) {
        let m = accepted.entry(&r.flow).or_default().entry(r.message).or_insert((r.created_ns, BTreeMap::new()));
        let e = m.1.entry(r.fragment).or_insert((r.at_ns, r.frame_id));
        if r.at_ns < e.0 {
            *e = (r.at_ns, r.frame_id);
        }
    }
    let mut worst: BTreeMap<String, (Nanos, u64, u64)> = BTreeMap::new();
    for (flow, msgs) in &accepted {
        let need = fragments.get(flow).copied().unwrap_or(1) as usize;
        for (&message, (created, frags)) in msgs {
            if frags.len() != need {
                continue;
            }
            let &(at, frame_id) = frags.values().max().expect("non-empty");
            let lat = at - created;
            let w = worst.entry(flow.to_string()).or_insert((lat, message, frame_id));
            if lat > w.0 {
                *w = (lat, message, frame_id);
            }
        }
    }
    let mut sums: BTreeMap<u64, [Nanos; 4]> = worst.values().map(|w| (w.2, [0; 4])).collect();
    for h in trace.hops() {
        if let Some(s) = sums.get_mut(&h.frame_id) {
            let parts = [h.processing_ns(), h.queuing_ns(), h.transmission_ns(), h.propagation_ns()];
            for (acc, p) in s.iter_mut().zip(parts) {
                *acc += p.unwrap_or(0);
            }
        }
    }
    worst
        .into_iter()
        .map(|(flow, (lat, message, frame_id))| {
            let s = sums[&frame_id];
            (
                flow,
                WorstFrame {
                    message,
                    frame_id,
                    latency_us: ns_to_us(lat),
                    processing_us: ns_to_us(s[0]),
                    queuing_us: ns_to_us(s[1]),
                    transmission_us: ns_to_us(s[2]),
                    propagation_us: ns_to_us(s[3]),
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub verdict: Verdict,
    pub metrics: MetricsReport,
    pub worst_frames: BTreeMap<String, WorstFrame>,
}

impl ScenarioReport {
    pub fn new(verdict: Verdict, metrics: MetricsReport, trace: &Trace) -> Self {
        ScenarioReport {
            verdict,
            metrics,
            worst_frames: worst_frames(trace),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, ReportError> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(ReportError::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    schema: &'static str,
    pass: bool,
    scenarios: Vec<&'a ScenarioReport>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.3}"))
}

fn render_text(reports: &[&ScenarioReport]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let mark = |p: bool| if p { "PASS" } else { "FAIL" };
    for r in reports {
        let v = &r.verdict;
        let _ = writeln!(out, "scenario {}: {}", v.scenario, mark(v.pass));
        if let Some(b) = &v.binding_metric {
            let _ = writeln!(out, "  binding metric: {b}");
        }
        for (flow, m) in &r.metrics.flows {
            let _ = write!(out, "  flow {flow}: delivered {}/{}", m.delivered, m.created);
            if let Some(l) = &m.latency {
                let _ = write!(
                    out,
                    ", latency min {:.3} mean {:.3} max {:.3} us, jitter {:.3} us",
                    l.min_us, l.mean_us, l.max_us, l.jitter_us
                );
            }
            let _ = writeln!(out, ", deadline misses {}", m.deadline_misses);
            if let Some(w) = r.worst_frames.get(flow) {
                let _ = writeln!(
                    out,
                    "    worst frame {} (message {}): {:.3} us = processing {:.3} + queuing {:.3} + transmission {:.3} + propagation {:.3}",
                    w.frame_id, w.message, w.latency_us, w.processing_us, w.queuing_us, w.transmission_us, w.propagation_us
                );
            }
            if let Some(fv) = v.flows.iter().find(|f| &f.flow == flow) {
                for f in &fv.failures {
                    let _ = writeln!(out, "    failed {}: expected {} observed {}", f.metric, f.expected, opt(f.observed));
                }
            }
        }
        for fv in v.flows.iter().filter(|f| !r.metrics.flows.contains_key(&f.flow)) {
            let _ = writeln!(out, "  flow {}: {}", fv.flow, mark(fv.pass));
        }
        for (port, p) in &r.metrics.ports {
            let _ = writeln!(
                out,
                "  port {port}: max queue {}, mean queue {:.3}, throughput {:.0} bit/s",
                p.max_queue_len, p.mean_queue_len, p.throughput_bps
            );
        }
    }
    out
}

fn render_csv(reports: &[&ScenarioReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "scenario",
        "flow",
        "pass",
        "created",
        "delivered",
        "dropped",
        "in_flight",
        "delivery_ratio",
        "deadline_misses",
        "latency_min_us",
        "latency_mean_us",
        "latency_max_us",
        "jitter_us",
        "rate_hz",
    ];
    w.write_record(header).expect("in-memory write");
    for r in reports {
        for (flow, m) in &r.metrics.flows {
            let pass = r.verdict.flows.iter().find(|f| &f.flow == flow).map_or(String::new(), |f| f.pass.to_string());
            let l = m.latency.as_ref();
            w.write_record([
                r.verdict.scenario.clone(),
                flow.clone(),
                pass,
                m.created.to_string(),
                m.delivered.to_string(),
                m.dropped.to_string(),
                m.in_flight.to_string(),
                opt(m.delivery_ratio),
                m.deadline_misses.to_string(),
                opt(l.map(|l| l.min_us)),
                opt(l.map(|l| l.mean_us)),
                opt(l.map(|l| l.max_us)),
                opt(l.map(|l| l.jitter_us)),
                format!("{:.3}", m.rate_hz),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Renders reports ordered by scenario name; flows are ordered by id.
pub fn render(reports: &[ScenarioReport], format: ReportFormat) -> String {
    let mut sorted: Vec<&ScenarioReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.verdict.scenario.cmp(&b.verdict.scenario));
    match format {
        ReportFormat::Json => {
            let doc = JsonDoc {
                schema: REPORT_SCHEMA,
                pass: sorted.iter().all(|r| r.verdict.pass),
                scenarios: sorted,
            };
            serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
        }
        ReportFormat::Text => render_text(&sorted),
        ReportFormat::Csv => render_csv(&sorted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{FlowMetrics, GlobalMetrics, InterFrameStats, LatencyStats};
    use proptest::prelude::*;

    fn metrics(max_us: f64, ratio: f64, gap_us: f64) -> MetricsReport {
        let f = FlowMetrics {
            created: 100,
            delivered: 99,
            dropped: 1,
            in_flight: 0,
            deadline_misses: 0,
            miss_rate: 0.0,
            delivery_ratio: Some(ratio),
            latency: Some(LatencyStats {
                min_us: 10.0,
                mean_us: 20.0,
                max_us,
                jitter_us: max_us - 10.0,
            }),
            inter_frame: Some(InterFrameStats {
                mean_us: gap_us,
                max_us: gap_us,
            }),
            period_offset_max_us: Some(0.0),
            duplicates_discarded: 0,
            rate_hz: 9.9,
        };
        MetricsReport {
            schema: "v1".into(),
            duration_ms: 10_000.0,
            flows: BTreeMap::from([("Cam/f".to_string(), f)]),
            ports: BTreeMap::new(),
            global: GlobalMetrics {
                frames_created: 100,
                delivered: 99,
                dropped: 1,
                in_flight_at_end: 0,
            },
        }
    }

    fn cam() -> Vec<(String, ExpectedConstraints)> {
        vec![("Cam/f".to_string(), CONTEXT_AWARE_MANEUVERING)]
    }

    #[test]
    fn table_rows_are_pinned() {
        let c = CONTEXT_AWARE_MANEUVERING;
        assert_eq!((c.max_latency_ms, c.reliability, c.message_size_bytes, c.rate_hz), (Some(50.0), Some(0.99), Some(100), Some(10.0)));
        let x = CROSS_TRAFFIC_LEFT_TURN_ASSIST;
        assert_eq!((x.max_latency_ms, x.reliability, x.message_size_bytes), (Some(10.0), Some(0.999), Some(1000)));
        let r = REMOTE_VEHICLE_HEALTH;
        assert_eq!((r.max_latency_ms, r.reliability), (Some(30_000.0), Some(0.9999)));
    }

    #[test]
    fn cam_passes_within_limits_and_fails_past_them() {
        assert!(evaluate_flows("cam", &cam(), &metrics(50_000.0, 0.99, 100_000.0)).pass);
        let late = evaluate_flows("cam", &cam(), &metrics(50_001.0, 0.99, 100_000.0));
        assert_eq!(late.binding_metric.as_deref(), Some("max_latency_ms"));
        let lossy = evaluate_flows("cam", &cam(), &metrics(1_000.0, 0.985, 100_000.0));
        assert_eq!(lossy.binding_metric.as_deref(), Some("reliability"));
        let slow = evaluate_flows("cam", &cam(), &metrics(1_000.0, 1.0, 125_000.0));
        assert_eq!(slow.binding_metric.as_deref(), Some("rate_hz"));
    }

    #[test]
    fn empty_report_fails_with_no_deliveries() {
        let mut m = metrics(1.0, 1.0, 100_000.0);
        m.flows.clear();
        let v = evaluate_flows("cam", &cam(), &m);
        assert!(!v.pass);
        assert_eq!(v.binding_metric.as_deref(), Some(NO_DELIVERIES));
        assert_eq!(evaluate_flows("none", &[], &m).binding_metric.as_deref(), Some(NO_DELIVERIES));
    }

    proptest! {
        #[test]
        fn improving_a_metric_never_flips_pass_to_fail(
            max_us in 1.0f64..100_000.0,
            ratio in 0.9f64..=1.0,
            gap in 50_000.0f64..150_000.0,
            better in 0.0f64..1.0,
        ) {
            let base = evaluate_flows("cam", &cam(), &metrics(max_us, ratio, gap));
            let improved = [
                metrics(max_us * better, ratio, gap),
                metrics(max_us, ratio + (1.0 - ratio) * better, gap),
                metrics(max_us, ratio, gap * better.max(0.01)),
            ];
            for m in improved {
                let v = evaluate_flows("cam", &cam(), &m);
                prop_assert!(!base.pass || v.pass);
            }
        }
    }

    fn sample() -> Vec<ScenarioReport> {
        let v = evaluate_flows("cam", &cam(), &metrics(40.0, 1.0, 100_000.0));
        let w = evaluate_flows("alpha", &cam(), &metrics(60_000.0, 1.0, 100_000.0));
        vec![
            ScenarioReport::new(v, metrics(40.0, 1.0, 100_000.0), &Trace::default()),
            ScenarioReport::new(w, metrics(60_000.0, 1.0, 100_000.0), &Trace::default()),
        ]
    }

    #[test]
    fn renderings_are_ordered_and_deterministic() {
        let r = sample();
        for f in [ReportFormat::Json, ReportFormat::Text, ReportFormat::Csv] {
            assert_eq!(render(&r, f), render(&r, f));
        }
        let json: serde_json::Value = serde_json::from_str(&render(&r, ReportFormat::Json)).unwrap();
        assert_eq!(json["schema"], "v1");
        assert_eq!(json["pass"], false);
        assert_eq!(json["scenarios"][0]["verdict"]["scenario"], "alpha");
        let csv = render(&r, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("alpha,Cam/f,false,"));
        let text = render(&r, ReportFormat::Text);
        assert!(text.starts_with("scenario alpha: FAIL"));
        assert_eq!("xml".parse::<ReportFormat>().unwrap_err().code(), "UNSUPPORTED_FORMAT");
    }

    #[test]
    fn scenario_table_parses_next_to_sim_keys() {
        let s = parse_scenario(
            r#"
            duration_ms = 10.0
            [scenario]
            name = "cam"
            topology = "../reference/topology.toml"
            max_latency_ms = 50.0
            reliability = 0.99
            "#,
        )
        .unwrap()
        .unwrap();
        assert_eq!(s.expected.max_latency_ms, Some(50.0));
        assert_eq!(s.expected.rate_hz, None);
        assert!(parse_scenario("duration_ms = 1.0").unwrap().is_none());
    }
}
