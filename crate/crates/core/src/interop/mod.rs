//! Interoperability annotations: 5G QoS profiles, data-layer QoS, and the
//! CAN to Ethernet gateway record format.

mod gateway;

pub use gateway::{
    pack_all, pack_one_to_one, pack_periodic_snapshot, unpack, FlushTrigger, GatewayFrame,
    GatewayPayload, InteropError, CAN_ID_LIMIT, MAX_CAN_FRAME_BITS, RECORD_HEADER_BYTES,
};

use crate::descriptors::{FlowSpec, TrafficSpec, TrafficTimeSpec};
use crate::tsn_config::TrafficClass;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowConstraintVector {
    pub deadline: bool,
    pub jitter: bool,
    pub bandwidth: bool,
}

impl FlowConstraintVector {
    pub fn derive(traffic: &TrafficSpec, class: TrafficClass) -> Self {
        FlowConstraintVector {
            deadline: traffic.time.max_latency.is_some(),
            jitter: traffic.time.jitter.is_some(),
            bandwidth: class == TrafficClass::Stream || traffic.guarantee.level() == 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResourceType {
    Gbr,
    DcGbr,
    NonGbr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveQiProfile {
    pub resource_type: ResourceType,
    pub priority_level: i32,
    /// Milliseconds; `None` stands for an unbounded budget.
    pub delay_budget_ms: Option<f64>,
    pub per_target: f64,
}

pub const PER_DELIVERY: f64 = 1e-5;
pub const PER_DEFAULT: f64 = 1e-2;

pub fn resource_type(v: FlowConstraintVector) -> ResourceType {
    match (v.deadline, v.jitter, v.bandwidth) {
        (false, false, _) => ResourceType::NonGbr,
        (_, _, true) => ResourceType::DcGbr,
        (_, _, false) => ResourceType::Gbr,
    }
}

pub fn map_to_5qi(v: FlowConstraintVector, time: &TrafficTimeSpec, traffic: &TrafficSpec) -> FiveQiProfile {
    FiveQiProfile {
        resource_type: resource_type(v),
        priority_level: 10 - 2 * traffic.guarantee.level() as i32,
        delay_budget_ms: time.max_latency,
        per_target: if traffic.delivery { PER_DELIVERY } else { PER_DEFAULT },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DataReliability {
    Reliable,
    BestEffort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataLayerQosProfile {
    pub flow_id: String,
    pub reliability: DataReliability,
    pub deadline_ms: Option<f64>,
    pub latency_budget_ms: Option<f64>,
    pub history_depth: u32,
}

pub fn derive_data_layer_qos(flow_id: &str, flow: &FlowSpec) -> DataLayerQosProfile {
    let t = &flow.traffic_spec;
    DataLayerQosProfile {
        flow_id: flow_id.to_string(),
        reliability: if t.delivery {
            DataReliability::Reliable
        } else {
            DataReliability::BestEffort
        },
        deadline_ms: t.time.periodicity,
        latency_budget_ms: t.time.max_latency,
        history_depth: if t.time.is_periodic() { 1 } else { 16 },
    }
}

/// Interop annotations for one flow, as written to `interop.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowInterop {
    pub flow: String,
    pub class: TrafficClass,
    pub pcp: u8,
    pub constraints: FlowConstraintVector,
    pub five_qi: FiveQiProfile,
    pub data_layer: DataLayerQosProfile,
}

pub fn flow_interop(flow_id: &str, flow: &FlowSpec, class: TrafficClass) -> FlowInterop {
    let v = FlowConstraintVector::derive(&flow.traffic_spec, class);
    FlowInterop {
        flow: flow_id.to_string(),
        class,
        pcp: crate::tsn_config::assign_priority(class),
        constraints: v,
        five_qi: map_to_5qi(v, &flow.traffic_spec.time, &flow.traffic_spec),
        data_layer: derive_data_layer_qos(flow_id, flow),
    }
}
