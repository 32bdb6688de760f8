//! JSON form of a TSN configuration, in microseconds.

use super::{FlowFailure, FlowRoute, FrerConfig, TsnConfig};
use crate::time::ns_to_us;
use serde::{Deserialize, Serialize};

pub const TSN_CONFIG_SCHEMA: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GclEntryExport {
    pub offset_us: f64,
    pub duration_us: f64,
    pub mask: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GclExport {
    pub cycle_us: f64,
    pub entries: Vec<GclEntryExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbsExport {
    pub queue: u8,
    pub idle_slope_bps: u64,
    pub send_slope_bps: i64,
}

/// `switch` names the bridge or end station owning the egress port, `port` the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortExport {
    pub switch: String,
    pub port: String,
    pub gcl: Option<GclExport>,
    pub cbs: Vec<CbsExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopExport {
    pub node: String,
    pub port: String,
    pub processing_us: f64,
    pub queuing_us: f64,
    pub transmission_us: f64,
    pub propagation_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundExport {
    pub flow: String,
    pub member: usize,
    /// `None` when no finite bound exists.
    pub total_us: Option<f64>,
    pub best_case_us: f64,
    pub per_hop: Vec<HopExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsnConfigExport {
    pub schema: String,
    pub sync_error_us: f64,
    pub ports: Vec<PortExport>,
    pub routes: Vec<FlowRoute>,
    pub frer: Vec<FrerConfig>,
    pub bounds: Vec<BoundExport>,
    pub failures: Vec<FlowFailure>,
}

impl TsnConfigExport {
    pub fn from_config(c: &TsnConfig) -> Self {
        TsnConfigExport {
            schema: TSN_CONFIG_SCHEMA.to_string(),
            sync_error_us: ns_to_us(c.sync_error_ns),
            ports: c
                .ports
                .iter()
                .map(|p| PortExport {
                    switch: p.node.clone(),
                    port: p.link.clone(),
                    gcl: p.gcl.as_ref().map(|g| GclExport {
                        cycle_us: ns_to_us(g.cycle_ns),
                        entries: g
                            .entries
                            .iter()
                            .map(|e| GclEntryExport {
                                offset_us: ns_to_us(e.offset_ns),
                                duration_us: ns_to_us(e.duration_ns),
                                mask: e.mask,
                            })
                            .collect(),
                    }),
                    cbs: p
                        .cbs
                        .iter()
                        .map(|c| CbsExport {
                            queue: c.queue,
                            idle_slope_bps: c.idle_slope,
                            send_slope_bps: c.send_slope,
                        })
                        .collect(),
                })
                .collect(),
            routes: c.routes.clone(),
            frer: c.frer.clone(),
            bounds: c
                .bounds
                .iter()
                .map(|b| BoundExport {
                    flow: b.flow.clone(),
                    member: b.member,
                    total_us: b.total_ns().map(ns_to_us),
                    best_case_us: ns_to_us(b.best_case_ns),
                    per_hop: b
                        .per_hop
                        .iter()
                        .map(|h| HopExport {
                            node: h.node.clone(),
                            port: h.port.clone(),
                            processing_us: ns_to_us(h.processing_ns),
                            queuing_us: ns_to_us(h.queuing_ns),
                            transmission_us: ns_to_us(h.transmission_ns),
                            propagation_us: ns_to_us(h.propagation_ns),
                        })
                        .collect(),
                })
                .collect(),
            failures: c.failures.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}
