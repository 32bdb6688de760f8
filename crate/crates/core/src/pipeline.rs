//! End-to-end planning: placement, flow endpoints, TSN configuration with
//! admission, interop profiles, and simulation of the admitted flows.

use crate::descriptors::{flow_key, FlowSpec, ServiceDescriptor, TopologyDescriptor};
use crate::interop::{flow_interop, FlowInterop};
use crate::netsim::{self, SimConfig, SimError, SimOutput};
use crate::network::Network;
use crate::orchestrator::{admit, initial_residual, place_into, AdmissionVerdict, LatencyEvidence, PlacementPlan};
use crate::time::{ms_to_ns, Nanos, NS_PER_US};
use crate::tsn_config::{assign_priority, classify, configure, route, FlowRoute, TsnConfig, TsnFlow};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Clock synchronization error assumed by the planner when none is given.
pub const DEFAULT_SYNC_ERROR_NS: Nanos = NS_PER_US;

/// Everything the planner decides for a set of services on one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentPlan {
    pub placement: PlacementPlan,
    /// Every placed flow with resolved endpoints, admitted or not.
    pub flows: Vec<TsnFlow>,
    /// Configuration of the admitted flows only.
    pub tsn: TsnConfig,
    pub interop: Vec<FlowInterop>,
    /// One verdict per flow of every service, in descriptor order.
    pub admission: Vec<AdmissionVerdict>,
}

#[derive(Serialize)]
struct AdmissionDoc<'a> {
    schema: &'static str,
    all_admitted: bool,
    verdicts: &'a [AdmissionVerdict],
}

#[derive(Serialize)]
struct InteropDoc<'a> {
    schema: &'static str,
    flows: &'a [FlowInterop],
}

impl DeploymentPlan {
    pub fn all_admitted(&self) -> bool {
        self.admission.iter().all(|v| v.admitted)
    }

    pub fn admitted_flows(&self) -> Vec<TsnFlow> {
        let ok: BTreeSet<&str> = self.admission.iter().filter(|v| v.admitted).map(|v| v.flow.as_str()).collect();
        self.flows.iter().filter(|f| ok.contains(f.key.as_str())).cloned().collect()
    }

    pub fn placement_json(&self) -> String {
        serde_json::to_string_pretty(&self.placement).expect("serializable") + "\n"
    }

    pub fn tsn_config_json(&self) -> String {
        self.tsn.export().to_json() + "\n"
    }

    pub fn interop_json(&self) -> String {
        let doc = InteropDoc {
            schema: "v1",
            flows: &self.interop,
        };
        serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
    }

    pub fn admission_json(&self) -> String {
        let doc = AdmissionDoc {
            schema: "v1",
            all_admitted: self.all_admitted(),
            verdicts: &self.admission,
        };
        serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
    }

    /// Artifact file names and contents, in a fixed order.
    pub fn artifacts(&self) -> Vec<(&'static str, String)> {
        vec![
            ("placement.json", self.placement_json()),
            ("tsn_config.json", self.tsn_config_json()),
            ("interop.json", self.interop_json()),
            ("admission.json", self.admission_json()),
        ]
    }
}

/// Resolves an endpoint name: a role of the flow (its replica 0), an ECU id,
/// or a device id (the ECU at `endpoint_a` of the device's bus).
fn resolve(name: &str, key: &str, flow: &FlowSpec, topo: &TopologyDescriptor, placement: &PlacementPlan) -> Option<String> {
    if flow.role(name).is_some() {
        return placement.ecu_of(key, name, 0).map(str::to_string);
    }
    if topo.ecu(name).is_some() {
        return Some(name.to_string());
    }
    let device = topo.device(name)?;
    let bus = topo.link(&device.bus)?;
    topo.ecu(&bus.endpoint_a).map(|e| e.id.clone())
}

/// Talker and listener ECUs of a placed flow.
pub fn endpoints(
    key: &str,
    flow: &FlowSpec,
    topo: &TopologyDescriptor,
    placement: &PlacementPlan,
) -> Result<(String, String), String> {
    if let Some(b) = topo.binding(key) {
        let talker = resolve(&b.talker, key, flow, topo, placement).ok_or_else(|| format!("cannot resolve talker `{}`", b.talker))?;
        let listener =
            resolve(&b.listener, key, flow, topo, placement).ok_or_else(|| format!("cannot resolve listener `{}`", b.listener))?;
        return Ok((talker, listener));
    }
    let first = flow.node_specs.first().ok_or("flow has no node roles")?;
    let talker = placement.ecu_of(key, &first.role, 0).ok_or("talker role is not placed")?;
    let listener = if flow.node_specs.len() >= 2 {
        let last = flow.node_specs.last().expect("non-empty");
        placement.ecu_of(key, &last.role, 0)
    } else if first.spec.replicas >= 2 {
        placement.ecu_of(key, &first.role, 1)
    } else {
        Some(talker)
    };
    let listener = listener.ok_or("listener role is not placed")?;
    Ok((talker.to_string(), listener.to_string()))
}

/// Network view of a flow between two placed ECUs.
pub fn tsn_flow(service: &ServiceDescriptor, flow: &FlowSpec, talker: String, listener: String) -> TsnFlow {
    let class = classify(flow, &service.metadata.domain);
    let traffic = &flow.traffic_spec;
    let time = &traffic.time;
    TsnFlow {
        key: flow_key(service, flow),
        class,
        priority: assign_priority(class),
        data_size: flow.data_spec.data_size,
        period_ns: time.periodicity.map(ms_to_ns),
        offset_ns: ms_to_ns(time.transmit_offset),
        max_latency_ns: time.max_latency.map(ms_to_ns),
        jitter_ns: time.jitter.map(ms_to_ns),
        reliability: traffic.reliability,
        delivery: traffic.delivery,
        talker,
        listener,
    }
}

fn rejected(flow: &str, code: &str, detail: String) -> AdmissionVerdict {
    AdmissionVerdict::rejected(flow.to_string(), code, detail)
}

/// Places the services in order, configures the network and admits flows
/// whose worst-case bounds meet their constraints. Rejected flows are
/// dropped and the rest reconfigured until every remaining flow is admitted.
pub fn plan(services: &[ServiceDescriptor], topo: &TopologyDescriptor, sync_error_ns: Nanos) -> DeploymentPlan {
    let net = Network::new(topo);
    let mut placement = PlacementPlan {
        residual: initial_residual(topo),
        ..Default::default()
    };
    let mut verdicts: BTreeMap<String, AdmissionVerdict> = BTreeMap::new();
    let mut flows = Vec::new();
    let mut interop = Vec::new();

    for service in services {
        for f in &service.flows {
            let key = flow_key(service, f);
            interop.push(flow_interop(&key, f, classify(f, &service.metadata.domain)));
        }
        if let Err(e) = place_into(service, topo, &mut placement) {
            log::info!("placement of {} failed: {e}", service.title);
            for f in &service.flows {
                let key = flow_key(service, f);
                verdicts.insert(key.clone(), rejected(&key, e.code(), e.to_string()));
            }
            continue;
        }
        for f in &service.flows {
            let key = flow_key(service, f);
            match endpoints(&key, f, topo, &placement) {
                Ok((talker, listener)) => flows.push(tsn_flow(service, f, talker, listener)),
                Err(msg) => {
                    verdicts.insert(key.clone(), rejected(&key, "UNRESOLVED_ENDPOINT", msg));
                }
            }
        }
    }

    let mut candidates: Vec<TsnFlow> = flows.clone();
    let tsn = loop {
        let mut evidence: BTreeMap<String, LatencyEvidence> = BTreeMap::new();
        let mut routes: Vec<FlowRoute> = Vec::new();
        for f in &candidates {
            match route(&net, f) {
                Ok(r) => routes.push(r),
                Err(e) => {
                    evidence.insert(
                        f.key.clone(),
                        LatencyEvidence::Failed {
                            code: e.code().to_string(),
                            message: e.to_string(),
                        },
                    );
                }
            }
        }
        let config = configure(&net, &candidates, &routes, sync_error_ns);
        for fail in &config.failures {
            evidence.entry(fail.flow.clone()).or_insert_with(|| LatencyEvidence::Failed {
                code: fail.code.clone(),
                message: fail.message.clone(),
            });
        }
        for b in &config.bounds {
            evidence.entry(b.flow.clone()).or_insert(LatencyEvidence::Bound {
                worst_case_ns: b.total_ns(),
                best_case_ns: b.best_case_ns,
            });
        }

        let live: BTreeSet<&str> = candidates.iter().map(|f| f.key.as_str()).collect();
        let mut round = Vec::new();
        for service in services {
            for v in admit(service, &placement, &evidence) {
                if live.contains(v.flow.as_str()) {
                    round.push(v);
                }
            }
        }
        let newly_rejected: BTreeSet<String> = round.iter().filter(|v| !v.admitted).map(|v| v.flow.clone()).collect();
        if newly_rejected.is_empty() {
            for v in round {
                verdicts.insert(v.flow.clone(), v);
            }
            break config;
        }
        for v in round.into_iter().filter(|v| !v.admitted) {
            log::info!("flow {} rejected: {:?}", v.flow, v.binding_constraint);
            verdicts.insert(v.flow.clone(), v);
        }
        candidates.retain(|f| !newly_rejected.contains(&f.key));
    };

    let admission = services
        .iter()
        .flat_map(|s| s.flows.iter().map(move |f| flow_key(s, f)))
        .filter_map(|k| verdicts.remove(&k))
        .collect();
    DeploymentPlan {
        placement,
        flows,
        tsn,
        interop,
        admission,
    }
}

/// Simulates the admitted flows of `plan`.
pub fn simulate(topo: &TopologyDescriptor, plan: &DeploymentPlan, sim: &SimConfig) -> Result<SimOutput, SimError> {
    netsim::run(topo, &plan.admitted_flows(), &plan.tsn, sim)
}
