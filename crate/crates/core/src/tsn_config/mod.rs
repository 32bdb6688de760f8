//! Centralized TSN configuration: traffic classes, explicit routes, gate
//! control lists, credit-based shaper slopes, FRER pairs and analytic
//! worst-case latency bounds.

mod bounds;
mod cbs;
mod export;
mod frer;
mod gcl;
mod routing;

pub use bounds::{worst_case_bound, worst_case_bounds, BoundOutcome, HopBound, WorstCaseBound};
pub use cbs::{compute_cbs, stream_demand_bps, CbsParams, CBS_HEADROOM_DEN, CBS_HEADROOM_NUM};
pub use export::{TsnConfigExport, TSN_CONFIG_SCHEMA};
pub use frer::{derive_frer, FrerConfig, MIN_RECOVERY_WINDOW, SEQUENCE_SPACE};
pub use gcl::{
    synthesize_gcl, FlowSchedule, GateControlList, GateTimeline, GclEntry, GclSynthesis, ALL_QUEUES_OPEN,
    HYPERPERIOD_CAP_NS, IDLE_CYCLE_NS,
};
pub use routing::{disjoint_pair, route, shortest_path, FlowRoute};

use crate::descriptors::{FlowSpec, Guarantee};
use crate::network::Network;
use crate::time::{Nanos, NS_PER_MS};
use serde::{Deserialize, Serialize};

/// Minimum inter-arrival assumed for aperiodic flows, and the period of the
/// standing window reserved for aperiodic CONTROL flows.
pub const APERIODIC_INTERVAL_NS: Nanos = NS_PER_MS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrafficClass {
    Control,
    Stream,
    Service,
    BestEffort,
}

impl TrafficClass {
    pub const ALL: [TrafficClass; 4] = [
        TrafficClass::Control,
        TrafficClass::Stream,
        TrafficClass::Service,
        TrafficClass::BestEffort,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrafficClass::Control => "CONTROL",
            TrafficClass::Stream => "STREAM",
            TrafficClass::Service => "SERVICE",
            TrafficClass::BestEffort => "BEST_EFFORT",
        }
    }

    /// CONTROL and SERVICE flows get exclusive gate windows.
    pub fn is_scheduled(self) -> bool {
        matches!(self, TrafficClass::Control | TrafficClass::Service)
    }
}

/// Total classification of a flow. `domain` is the owning service's domain.
pub fn classify(flow: &FlowSpec, domain: &str) -> TrafficClass {
    let traffic = &flow.traffic_spec;
    let time = &traffic.time;
    if traffic.guarantee.level() == Guarantee::MAX || domain == "safety" {
        TrafficClass::Control
    } else if flow.data_spec.data_size >= 1500 || (!time.is_periodic() && traffic.guarantee.level() >= 1) {
        TrafficClass::Stream
    } else if time.is_periodic() && time.max_latency.is_some() {
        TrafficClass::Service
    } else {
        TrafficClass::BestEffort
    }
}

/// PCP / queue index for a class.
pub fn assign_priority(class: TrafficClass) -> u8 {
    match class {
        TrafficClass::Control => 7,
        TrafficClass::Stream => 5,
        TrafficClass::Service => 3,
        TrafficClass::BestEffort => 0,
    }
}

/// Network-level view of one flow after placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsnFlow {
    pub key: String,
    pub class: TrafficClass,
    pub priority: u8,
    pub data_size: u64,
    pub period_ns: Option<Nanos>,
    /// Release phase within the period.
    pub offset_ns: Nanos,
    pub max_latency_ns: Option<Nanos>,
    pub jitter_ns: Option<Nanos>,
    pub reliability: bool,
    pub delivery: bool,
    pub talker: String,
    pub listener: String,
}

impl TsnFlow {
    /// Period for periodic flows, minimum inter-arrival otherwise.
    pub fn interval_ns(&self) -> Nanos {
        self.period_ns.unwrap_or(APERIODIC_INTERVAL_NS)
    }

    pub fn is_local(&self) -> bool {
        self.talker == self.listener
    }

    /// Frames carry an 802.1Q tag whenever the PCP is non-zero.
    pub fn tagged(&self) -> bool {
        self.priority > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum TsnError {
    #[error("NO_PATH: no route from {from} to {to} for flow `{flow}`")]
    NoPath { flow: String, from: String, to: String },
    #[error("NO_DISJOINT_PATH: flow `{flow}` needs two disjoint paths from {from} to {to}")]
    NoDisjointPath { flow: String, from: String, to: String },
    #[error("INFEASIBLE_SCHEDULE: flow `{flow}` does not fit on port {port}: {reason}")]
    InfeasibleSchedule { flow: String, port: String, reason: String },
    #[error("OVERSUBSCRIBED: port {port} stream demand {demand_bps} bit/s exceeds cap {cap_bps} bit/s")]
    Oversubscribed { port: String, demand_bps: u64, cap_bps: u64 },
    #[error("UNSCHEDULED_FLOW: flow `{flow}` has no schedule")]
    UnscheduledFlow { flow: String },
}

impl TsnError {
    pub fn code(&self) -> &'static str {
        match self {
            TsnError::NoPath { .. } => "NO_PATH",
            TsnError::NoDisjointPath { .. } => "NO_DISJOINT_PATH",
            TsnError::InfeasibleSchedule { .. } => "INFEASIBLE_SCHEDULE",
            TsnError::Oversubscribed { .. } => "OVERSUBSCRIBED",
            TsnError::UnscheduledFlow { .. } => "UNSCHEDULED_FLOW",
        }
    }
}

/// Per-port configuration. `node` owns the egress port, `link` names it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortConfig {
    pub node: String,
    pub link: String,
    pub gcl: Option<GateControlList>,
    pub cbs: Vec<CbsParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowFailure {
    pub flow: String,
    pub code: String,
    pub message: String,
}

impl FlowFailure {
    pub fn new(flow: &str, err: &TsnError) -> Self {
        FlowFailure {
            flow: flow.to_string(),
            code: err.code().to_string(),
            message: err.to_string(),
        }
    }
}

/// Complete TSN configuration for the admitted flow set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TsnConfig {
    pub sync_error_ns: Nanos,
    pub ports: Vec<PortConfig>,
    pub routes: Vec<FlowRoute>,
    pub schedules: Vec<FlowSchedule>,
    pub frer: Vec<FrerConfig>,
    pub bounds: Vec<WorstCaseBound>,
    pub failures: Vec<FlowFailure>,
}

impl TsnConfig {
    pub fn port(&self, node: &str, link: &str) -> Option<&PortConfig> {
        self.ports.iter().find(|p| p.node == node && p.link == link)
    }

    pub fn route(&self, flow: &str) -> Option<&FlowRoute> {
        self.routes.iter().find(|r| r.flow == flow)
    }

    pub fn bound(&self, flow: &str) -> Option<&WorstCaseBound> {
        self.bounds.iter().find(|b| b.flow == flow)
    }

    pub fn frer_for(&self, flow: &str) -> Option<&FrerConfig> {
        self.frer.iter().find(|f| f.flow == flow)
    }

    pub fn export(&self) -> TsnConfigExport {
        TsnConfigExport::from_config(self)
    }
}

/// Synthesizes schedules, shaper slopes, FRER and bounds for `flows` along
/// their `routes`. Flows that cannot be configured are reported in
/// `failures` and left out of the remaining steps.
pub fn configure(net: &Network, flows: &[TsnFlow], routes: &[FlowRoute], sync_error_ns: Nanos) -> TsnConfig {
    let mut failures = Vec::new();
    let routed: Vec<&TsnFlow> = flows.iter().filter(|f| routes.iter().any(|r| r.flow == f.key)).collect();

    let scheduled: Vec<&TsnFlow> = routed.iter().copied().filter(|f| f.class.is_scheduled()).collect();
    let synthesis = synthesize_gcl(net, &scheduled, routes, sync_error_ns);
    for (flow, err) in &synthesis.failures {
        failures.push(FlowFailure::new(flow, err));
    }

    // Streams are admitted to shapers greedily in flow order.
    let mut stream_ports: std::collections::BTreeMap<usize, Vec<u64>> = Default::default();
    let mut cbs_by_port: std::collections::BTreeMap<usize, CbsParams> = Default::default();
    for f in routed.iter().filter(|f| f.class == TrafficClass::Stream) {
        let route = routes.iter().find(|r| r.flow == f.key).expect("routed");
        let ports = route_ports(net, route);
        let mut trial = stream_ports.clone();
        let mut trial_cbs = Vec::new();
        let mut failed = None;
        for &p in ports.iter().filter(|&&p| net.ports[p].tsn_capable) {
            let link = &net.links[net.ports[p].link];
            let demand = stream_demand_bps(f.data_size, f.interval_ns(), link.medium);
            let entry = trial.entry(p).or_default();
            entry.push(demand);
            match compute_cbs(&net.port_label(p), link.rate, entry) {
                Ok(Some(c)) => trial_cbs.push((p, c)),
                Ok(None) => {}
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        match failed {
            Some(e) => failures.push(FlowFailure::new(&f.key, &e)),
            None => {
                stream_ports = trial;
                cbs_by_port.extend(trial_cbs);
            }
        }
    }

    let failed: std::collections::BTreeSet<&str> = failures.iter().map(|f| f.flow.as_str()).collect();
    let active: Vec<&TsnFlow> = routed.into_iter().filter(|f| !failed.contains(f.key.as_str())).collect();
    let schedules: Vec<FlowSchedule> = synthesis
        .schedules
        .into_iter()
        .filter(|s| !failed.contains(s.flow.as_str()))
        .collect();

    let mut ports = Vec::new();
    let mut used_ports = std::collections::BTreeSet::new();
    for f in &active {
        let route = routes.iter().find(|r| r.flow == f.key).expect("routed");
        used_ports.extend(route_ports(net, route));
    }
    used_ports.extend(synthesis.gcls.keys().copied());
    for p in used_ports {
        let info = &net.ports[p];
        let gcl = if info.tsn_capable {
            Some(
                synthesis
                    .gcls
                    .get(&p)
                    .cloned()
                    .unwrap_or_else(GateControlList::always_open),
            )
        } else {
            None
        };
        ports.push(PortConfig {
            node: net.nodes[info.node].id.clone(),
            link: net.links[info.link].id.clone(),
            gcl,
            cbs: cbs_by_port.get(&p).cloned().into_iter().collect(),
        });
    }
    ports.sort_by(|a, b| (&a.node, &a.link).cmp(&(&b.node, &b.link)));

    let mut config = TsnConfig {
        sync_error_ns,
        ports,
        routes: routes
            .iter()
            .filter(|r| active.iter().any(|f| f.key == r.flow))
            .cloned()
            .collect(),
        schedules,
        frer: Vec::new(),
        bounds: Vec::new(),
        failures,
    };

    let owned: Vec<TsnFlow> = active.iter().map(|f| (*f).clone()).collect();
    let (bounds, bound_failures) = worst_case_bounds(net, &owned, &config);
    config.bounds = bounds;
    config.failures.extend(bound_failures);
    for f in &owned {
        let route = config.route(&f.key).expect("routed").clone();
        if route.paths.len() == 2 {
            let bound = config.bound(&f.key).and_then(|b| b.total_ns());
            if let Ok(frer) = derive_frer(f, &route, bound) {
                config.frer.push(frer);
            }
        }
    }
    config
}

/// Union of egress ports over all paths of a route.
pub(crate) fn route_ports(net: &Network, route: &FlowRoute) -> Vec<usize> {
    let mut out = Vec::new();
    for path in &route.paths {
        out.extend(route.path_ports(net, path).unwrap_or_default());
    }
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::{DataSpec, TrafficSpec, TrafficTimeSpec};
    use proptest::prelude::*;

    fn flow(guarantee: u8, size: u64, periodic: Option<f64>, latency: Option<f64>) -> FlowSpec {
        FlowSpec {
            id: "f".into(),
            node_specs: vec![],
            data_spec: DataSpec {
                data_format: "raw".into(),
                data_size: size,
            },
            traffic_spec: TrafficSpec {
                guarantee: Guarantee::new(guarantee).unwrap(),
                reliability: false,
                delivery: false,
                wired: true,
                time: TrafficTimeSpec {
                    max_latency: latency,
                    periodicity: periodic,
                    transmit_offset: 0.0,
                    jitter: None,
                },
            },
        }
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(&flow(4, 8096, Some(100.0), Some(50.0)), "safety"), TrafficClass::Control);
        assert_eq!(classify(&flow(0, 100, None, None), "infotainment"), TrafficClass::BestEffort);
        assert_eq!(classify(&flow(2, 100, Some(100.0), Some(50.0)), "comfort"), TrafficClass::Service);
        assert_eq!(classify(&flow(1, 1500, Some(10.0), None), "comfort"), TrafficClass::Stream);
        assert_eq!(classify(&flow(2, 200, None, Some(5.0)), "comfort"), TrafficClass::Stream);
    }

    #[test]
    fn priority_mapping() {
        assert_eq!(assign_priority(TrafficClass::Control), 7);
        assert_eq!(assign_priority(TrafficClass::Stream), 5);
        assert_eq!(assign_priority(TrafficClass::Service), 3);
        assert_eq!(assign_priority(TrafficClass::BestEffort), 0);
    }

    proptest! {
        #[test]
        fn classify_is_total_and_deterministic(
            g in 0u8..=4,
            size in 1u64..20_000,
            period in proptest::option::of(0.01f64..1000.0),
            latency in proptest::option::of(0.0f64..1000.0),
            safety in any::<bool>(),
        ) {
            let f = flow(g, size, period, latency);
            let domain = if safety { "safety" } else { "other" };
            let a = classify(&f, domain);
            prop_assert_eq!(a, classify(&f, domain));
            prop_assert!(TrafficClass::ALL.contains(&a));
            let p = assign_priority(a);
            prop_assert!(p <= 7);
            if g == 4 || safety {
                prop_assert_eq!(a, TrafficClass::Control);
            }
        }
    }
}
