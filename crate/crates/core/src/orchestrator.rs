//! ECU filtering, scoring and replica placement, plus latency admission.
//!
//! Score of an ECU for a NodeSpec is a criticality-weighted mean of per-field
//! satisfactions. Capacity fields use `residual / (residual + required)`, so an
//! exact fit scores 0.5 and abundant capacity approaches 1. A required GPU
//! contributes 1 when present and 0 when missing. Weights are 1.0 for MUST,
//! 0.5 for SHOULD and 0.25 for MAY.

use crate::descriptors::{
    flow_key, CriticalityLevel, EcuNode, NodeField, NodeSpec, ServiceDescriptor, TopologyDescriptor,
};
use crate::time::{ms_to_ns, ns_to_us, Nanos};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Capacity {
    pub cpu: u64,
    pub memory: u64,
    pub storage: u64,
}

impl Capacity {
    pub fn of(ecu: &EcuNode) -> Capacity {
        Capacity {
            cpu: ecu.cpu_cores.into(),
            memory: ecu.memory,
            storage: ecu.storage,
        }
    }

    fn field(&self, f: NodeField) -> u64 {
        match f {
            NodeField::Cpu => self.cpu,
            NodeField::Memory => self.memory,
            NodeField::Storage => self.storage,
            _ => 0,
        }
    }
}

pub type Residual = BTreeMap<String, Capacity>;

pub fn initial_residual(topo: &TopologyDescriptor) -> Residual {
    topo.ecus.iter().map(|e| (e.id.clone(), Capacity::of(e))).collect()
}

fn demand(spec: &NodeSpec) -> Capacity {
    Capacity {
        cpu: spec.cpu.into(),
        memory: spec.memory,
        storage: spec.storage,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: NodeField,
    pub required: u64,
    pub available: u64,
    pub criticality: CriticalityLevel,
    /// False when a SHOULD/MAY shortfall exceeds its slack.
    pub within_slack: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub ecu_id: String,
    pub feasible: bool,
    pub score: f64,
    pub violated: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum PlacementError {
    #[error("NO_FEASIBLE_NODE: no ECU satisfies role `{role}` of flow `{flow}`")]
    NoFeasibleNode { flow: String, role: String },
    #[error("CAPACITY_EXHAUSTED: role `{role}` of flow `{flow}` needs {needed} replicas, only {available} placeable")]
    CapacityExhausted {
        flow: String,
        role: String,
        needed: u32,
        available: u32,
    },
}

impl PlacementError {
    pub fn code(&self) -> &'static str {
        match self {
            PlacementError::NoFeasibleNode { .. } => "NO_FEASIBLE_NODE",
            PlacementError::CapacityExhausted { .. } => "CAPACITY_EXHAUSTED",
        }
    }
}

fn weight(level: CriticalityLevel) -> f64 {
    match level {
        CriticalityLevel::Must => 1.0,
        CriticalityLevel::Should => 0.5,
        CriticalityLevel::May => 0.25,
    }
}

const CAPACITY_FIELDS: [NodeField; 3] = [NodeField::Cpu, NodeField::Memory, NodeField::Storage];

/// Scores `ecu` for `spec` against the ECU's residual capacity.
pub fn score_node(spec: &NodeSpec, ecu: &EcuNode, residual: &Capacity) -> NodeScore {
    let need = demand(spec);
    let mut violated = Vec::new();
    let mut weighted = 0.0;
    let mut weights = 0.0;

    for field in CAPACITY_FIELDS {
        let required = need.field(field);
        let available = residual.field(field);
        let crit = spec.criticality_of(field);
        if available < required {
            let shortfall = 1.0 - available as f64 / required as f64;
            violated.push(Violation {
                field,
                required,
                available,
                criticality: crit.level,
                within_slack: crit.level != CriticalityLevel::Must && shortfall <= crit.slack,
            });
        }
        if required > 0 {
            let w = weight(crit.level);
            weighted += w * (available as f64 / (available as f64 + required as f64));
            weights += w;
        }
    }

    if spec.gpu {
        let crit = spec.criticality_of(NodeField::Gpu);
        if !ecu.gpu {
            violated.push(Violation {
                field: NodeField::Gpu,
                required: 1,
                available: 0,
                criticality: crit.level,
                within_slack: crit.level != CriticalityLevel::Must,
            });
        }
        let w = weight(crit.level);
        weighted += w * if ecu.gpu { 1.0 } else { 0.0 };
        weights += w;
    }

    let feasible = violated.iter().all(|v| v.within_slack);
    NodeScore {
        ecu_id: ecu.id.clone(),
        feasible,
        score: if weights > 0.0 { weighted / weights } else { 1.0 },
        violated,
    }
}

/// Ranking: higher score, then lower energy class, then ECU id.
fn rank(a: &(NodeScore, u32), b: &(NodeScore, u32)) -> Ordering {
    b.0.score
        .total_cmp(&a.0.score)
        .then(a.1.cmp(&b.1))
        .then_with(|| a.0.ecu_id.cmp(&b.0.ecu_id))
}

/// Feasible ECUs for `spec`, best first.
pub fn filter_feasible(
    spec: &NodeSpec,
    topo: &TopologyDescriptor,
    residual: &Residual,
) -> Result<Vec<NodeScore>, PlacementError> {
    let ranked = ranked_feasible(spec, topo, residual, &BTreeSet::new());
    if ranked.is_empty() {
        return Err(PlacementError::NoFeasibleNode {
            flow: String::new(),
            role: String::new(),
        });
    }
    Ok(ranked)
}

fn ranked_feasible(
    spec: &NodeSpec,
    topo: &TopologyDescriptor,
    residual: &Residual,
    exclude: &BTreeSet<String>,
) -> Vec<NodeScore> {
    let mut scored: Vec<(NodeScore, u32)> = topo
        .ecus
        .iter()
        .filter(|e| !exclude.contains(&e.id))
        .map(|e| {
            let r = residual.get(&e.id).copied().unwrap_or_default();
            (score_node(spec, e, &r), e.energy_class)
        })
        .filter(|(s, _)| s.feasible)
        .collect();
    scored.sort_by(rank);
    scored.into_iter().map(|(s, _)| s).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub flow: String,
    pub role: String,
    pub replica: u32,
    pub ecu: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlacementPlan {
    pub assignments: Vec<Assignment>,
    pub residual: Residual,
    pub warnings: Vec<String>,
}

impl PlacementPlan {
    /// ECU hosting `replica` of `role` in `flow`.
    pub fn ecu_of(&self, flow: &str, role: &str, replica: u32) -> Option<&str> {
        self.assignments
            .iter()
            .find(|a| a.flow == flow && a.role == role && a.replica == replica)
            .map(|a| a.ecu.as_str())
    }

    pub fn has_flow(&self, flow: &str) -> bool {
        self.assignments.iter().any(|a| a.flow == flow)
    }
}

fn allocate(residual: &mut Residual, ecu: &str, spec: &NodeSpec) {
    let need = demand(spec);
    let r = residual.get_mut(ecu).expect("ECU in residual map");
    r.cpu -= need.cpu.min(r.cpu);
    r.memory -= need.memory.min(r.memory);
    r.storage -= need.storage.min(r.storage);
}

/// Places every (flow, role) of `service` on a fresh topology.
pub fn place(service: &ServiceDescriptor, topo: &TopologyDescriptor) -> Result<PlacementPlan, PlacementError> {
    let mut plan = PlacementPlan {
        residual: initial_residual(topo),
        ..Default::default()
    };
    place_into(service, topo, &mut plan)?;
    Ok(plan)
}

/// Places `service` on top of an existing plan. On error `plan` is left unchanged.
pub fn place_into(
    service: &ServiceDescriptor,
    topo: &TopologyDescriptor,
    plan: &mut PlacementPlan,
) -> Result<(), PlacementError> {
    let mut work = plan.clone();
    for flow in &service.flows {
        let key = flow_key(service, flow);
        for role in &flow.node_specs {
            let spec = &role.spec;
            let err_ctx = |e: PlacementError| match e {
                PlacementError::NoFeasibleNode { .. } => PlacementError::NoFeasibleNode {
                    flow: key.clone(),
                    role: role.role.clone(),
                },
                other => other,
            };
            let ranked = filter_feasible(spec, topo, &work.residual).map_err(err_ctx)?;
            let distinct = ranked.len().min(spec.replicas as usize);
            if flow.traffic_spec.reliability && distinct < spec.replicas as usize {
                return Err(PlacementError::CapacityExhausted {
                    flow: key.clone(),
                    role: role.role.clone(),
                    needed: spec.replicas,
                    available: distinct as u32,
                });
            }
            let mut replica = 0u32;
            for chosen in ranked.iter().take(distinct) {
                allocate(&mut work.residual, &chosen.ecu_id, spec);
                work.assignments.push(Assignment {
                    flow: key.clone(),
                    role: role.role.clone(),
                    replica,
                    ecu: chosen.ecu_id.clone(),
                });
                replica += 1;
            }
            while replica < spec.replicas {
                let again = ranked_feasible(spec, topo, &work.residual, &BTreeSet::new());
                let Some(best) = again.first() else {
                    return Err(PlacementError::CapacityExhausted {
                        flow: key.clone(),
                        role: role.role.clone(),
                        needed: spec.replicas,
                        available: replica,
                    });
                };
                allocate(&mut work.residual, &best.ecu_id, spec);
                work.warnings.push(format!(
                    "{key} role {} replica {replica} co-located on {} (anti-affinity not satisfiable)",
                    role.role, best.ecu_id
                ));
                work.assignments.push(Assignment {
                    flow: key.clone(),
                    role: role.role.clone(),
                    replica,
                    ecu: best.ecu_id.clone(),
                });
                replica += 1;
            }
        }
    }
    *plan = work;
    Ok(())
}

/// Latency evidence for one flow, produced by the TSN configurator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LatencyEvidence {
    /// `worst_case_ns = None` means the analysis found no finite bound.
    Bound {
        worst_case_ns: Option<Nanos>,
        best_case_ns: Nanos,
    },
    /// Configuration failed for this flow (routing, scheduling, shaping).
    Failed { code: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionVerdict {
    pub flow: String,
    pub admitted: bool,
    /// Constraint that caused rejection (`MaxLatency`, `Jitter`, or an error code).
    pub binding_constraint: Option<String>,
    pub detail: Option<String>,
    pub bound_us: Option<f64>,
}

impl AdmissionVerdict {
    pub fn rejected(flow: String, constraint: &str, detail: String) -> Self {
        AdmissionVerdict {
            flow,
            admitted: false,
            binding_constraint: Some(constraint.to_string()),
            detail: Some(detail),
            bound_us: None,
        }
    }
}

/// Admits each flow of `service` whose worst-case bound meets its time constraints.
pub fn admit(
    service: &ServiceDescriptor,
    plan: &PlacementPlan,
    evidence: &BTreeMap<String, LatencyEvidence>,
) -> Vec<AdmissionVerdict> {
    service
        .flows
        .iter()
        .map(|flow| {
            let key = flow_key(service, flow);
            if !plan.has_flow(&key) {
                return AdmissionVerdict::rejected(key, "Placement", "flow has no placement".into());
            }
            let time = &flow.traffic_spec.time;
            match evidence.get(&key) {
                None => AdmissionVerdict::rejected(key, "UNSCHEDULED_FLOW", "no latency evidence".into()),
                Some(LatencyEvidence::Failed { code, message }) => {
                    AdmissionVerdict::rejected(key, code, message.clone())
                }
                Some(LatencyEvidence::Bound {
                    worst_case_ns,
                    best_case_ns,
                }) => {
                    let bound_us = worst_case_ns.map(ns_to_us);
                    let reject = |constraint: &str, detail: String| AdmissionVerdict {
                        bound_us,
                        ..AdmissionVerdict::rejected(key.clone(), constraint, detail)
                    };
                    if let Some(max) = time.max_latency {
                        match worst_case_ns {
                            None => return reject("MaxLatency", "worst-case latency is unbounded".into()),
                            Some(w) if *w > ms_to_ns(max) => {
                                return reject(
                                    "MaxLatency",
                                    format!("bound {:.3} ms exceeds {max} ms", *w as f64 / 1e6),
                                )
                            }
                            _ => {}
                        }
                    }
                    if let Some(j) = time.jitter {
                        match worst_case_ns {
                            None => return reject("Jitter", "worst-case jitter is unbounded".into()),
                            Some(w) if w.saturating_sub(*best_case_ns) > ms_to_ns(j) => {
                                return reject(
                                    "Jitter",
                                    format!(
                                        "jitter bound {:.3} ms exceeds {j} ms",
                                        w.saturating_sub(*best_case_ns) as f64 / 1e6
                                    ),
                                )
                            }
                            _ => {}
                        }
                    }
                    AdmissionVerdict {
                        flow: key,
                        admitted: true,
                        binding_constraint: None,
                        detail: None,
                        bound_us,
                    }
                }
            }
        })
        .collect()
}
