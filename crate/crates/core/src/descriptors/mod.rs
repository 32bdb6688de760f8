//! Service and topology descriptors: parsing, validation, serialization.

mod error;
mod fields;
mod service;
mod topology;

pub use error::{DescriptorError, DescriptorErrorCode, Result};
pub use service::{
    parse_service_descriptor, serialize_service, validate_service, Criticality, CriticalityLevel,
    DataSpec, FlowSpec, Guarantee, NodeField, NodeRole, NodeSpec, ServiceDescriptor,
    ServiceMetadata, TrafficSpec, TrafficTimeSpec,
};
pub use topology::{
    parse_topology_descriptor, serialize_topology, validate_topology, Device, DeviceKind,
    EcuNode, FlowBinding, Link, Medium, SwitchNode, SwitchPort, TopologyDescriptor,
    CAN_MAX_PAYLOAD, QUEUES_PER_PORT,
};

/// Either kind of descriptor, for callers that handle both uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum Descriptor {
    Service(ServiceDescriptor),
    Topology(TopologyDescriptor),
}

/// Serializes either descriptor kind to its TOML form.
pub fn serialize(descriptor: &Descriptor) -> String {
    match descriptor {
        Descriptor::Service(s) => serialize_service(s),
        Descriptor::Topology(t) => serialize_topology(t),
    }
}

/// Parses bytes that may not be UTF-8; invalid encodings become `SYNTAX` errors.
pub fn parse_service_bytes(bytes: &[u8]) -> Result<ServiceDescriptor> {
    let text = std::str::from_utf8(bytes).map_err(|e| DescriptorError::syntax(format!("invalid UTF-8: {e}")))?;
    parse_service_descriptor(text)
}

pub fn parse_topology_bytes(bytes: &[u8]) -> Result<TopologyDescriptor> {
    let text = std::str::from_utf8(bytes).map_err(|e| DescriptorError::syntax(format!("invalid UTF-8: {e}")))?;
    parse_topology_descriptor(text)
}

/// Canonical `<service>/<flow>` key used across plans, traces and reports.
pub fn flow_key(service: &ServiceDescriptor, flow: &FlowSpec) -> String {
    format!("{}/{}", service.title, flow.id)
}
