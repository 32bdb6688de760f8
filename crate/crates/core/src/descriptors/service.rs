//! Service descriptors: what a vehicular service needs from compute nodes and the network.
//!
//! The on-disk format is TOML with the key names below. Every NodeSpec field may
//! carry an optional criticality entry under `NodeSpecs.<role>.Criticality`:
//!
//! ```toml
//! [Flows.Flow1.NodeSpecs.NodeA.Criticality]
//! Memory = { Level = "SHOULD", Slack = 0.25 }
//! GPU = "MAY"
//! ```
//!
//! Fields without an entry are `MUST`.

use super::error::{DescriptorError, Result};
use super::fields::{join, non_negative, parse_document, positive, Fields};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceDescriptor {
    pub title: String,
    pub metadata: ServiceMetadata,
    pub flows: Vec<FlowSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceMetadata {
    pub author: String,
    pub version: String,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: String,
    /// Node roles in declaration order.
    pub node_specs: Vec<NodeRole>,
    pub data_spec: DataSpec,
    pub traffic_spec: TrafficSpec,
}

impl FlowSpec {
    pub fn role(&self, name: &str) -> Option<&NodeSpec> {
        self.node_specs.iter().find(|r| r.role == name).map(|r| &r.spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRole {
    pub role: String,
    pub spec: NodeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub image: String,
    pub image_type: String,
    pub replicas: u32,
    pub cpu: u32,
    /// MiB.
    pub memory: u64,
    /// Bytes.
    pub storage: u64,
    pub gpu: bool,
    pub energy: u32,
    pub offloading: bool,
    /// Explicit criticality entries; absent fields are `MUST`.
    pub criticality: BTreeMap<NodeField, Criticality>,
}

impl NodeSpec {
    pub fn criticality_of(&self, field: NodeField) -> Criticality {
        self.criticality.get(&field).copied().unwrap_or_default()
    }
}

/// Names of the NodeSpec fields, as spelled in descriptor files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeField {
    Image,
    ImageType,
    Replicas,
    #[serde(rename = "CPU")]
    Cpu,
    Memory,
    Storage,
    #[serde(rename = "GPU")]
    Gpu,
    Energy,
    Offloading,
}

impl NodeField {
    pub const ALL: [NodeField; 9] = [
        NodeField::Image,
        NodeField::ImageType,
        NodeField::Replicas,
        NodeField::Cpu,
        NodeField::Memory,
        NodeField::Storage,
        NodeField::Gpu,
        NodeField::Energy,
        NodeField::Offloading,
    ];

    pub fn key(self) -> &'static str {
        match self {
            NodeField::Image => "Image",
            NodeField::ImageType => "ImageType",
            NodeField::Replicas => "Replicas",
            NodeField::Cpu => "CPU",
            NodeField::Memory => "Memory",
            NodeField::Storage => "Storage",
            NodeField::Gpu => "GPU",
            NodeField::Energy => "Energy",
            NodeField::Offloading => "Offloading",
        }
    }

    pub fn from_key(key: &str) -> Option<NodeField> {
        NodeField::ALL.into_iter().find(|f| f.key() == key)
    }
}

impl fmt::Display for NodeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CriticalityLevel {
    Must,
    Should,
    May,
}

impl CriticalityLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            CriticalityLevel::Must => "MUST",
            CriticalityLevel::Should => "SHOULD",
            CriticalityLevel::May => "MAY",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "MUST" => Some(CriticalityLevel::Must),
            "SHOULD" => Some(CriticalityLevel::Should),
            "MAY" => Some(CriticalityLevel::May),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criticality {
    pub level: CriticalityLevel,
    /// Allowed fractional shortfall; always 0 for `MUST`.
    pub slack: f64,
}

impl Default for Criticality {
    fn default() -> Self {
        Criticality::MUST
    }
}

impl Criticality {
    pub const MUST: Criticality = Criticality {
        level: CriticalityLevel::Must,
        slack: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSpec {
    pub data_format: String,
    /// Bytes per message.
    pub data_size: u64,
}

/// 0 best effort, 1 bounded bandwidth, 2 bounded latency, 3 latency+jitter,
/// 4 latency+jitter+zero loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Guarantee(u8);

impl Guarantee {
    pub const MAX: u8 = 4;

    pub fn new(level: u8) -> Option<Guarantee> {
        (level <= Self::MAX).then_some(Guarantee(level))
    }

    pub fn level(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    pub guarantee: Guarantee,
    pub reliability: bool,
    pub delivery: bool,
    pub wired: bool,
    pub time: TrafficTimeSpec,
}

/// All values in milliseconds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrafficTimeSpec {
    pub max_latency: Option<f64>,
    /// Absent means aperiodic / event-triggered.
    pub periodicity: Option<f64>,
    pub transmit_offset: f64,
    pub jitter: Option<f64>,
}

impl TrafficTimeSpec {
    pub fn is_periodic(&self) -> bool {
        self.periodicity.is_some()
    }
}

const TOP_KEYS: &[&str] = &["title", "ServiceMetadata", "Flows"];
const META_KEYS: &[&str] = &["Author", "Version", "Domain"];
const FLOW_KEYS: &[&str] = &["NodeSpecs", "DataSpecs", "TrafficSpecs"];
const NODE_KEYS: &[&str] = &[
    "Image",
    "ImageType",
    "Replicas",
    "CPU",
    "Memory",
    "Storage",
    "GPU",
    "Energy",
    "Offloading",
    "Criticality",
];
const DATA_KEYS: &[&str] = &["DataFormat", "DataSize"];
const TRAFFIC_KEYS: &[&str] = &["Guarantee", "Reliability", "Delivery", "Wired", "TrafficTimeSpecs"];
const TIME_KEYS: &[&str] = &["MaxLatency", "Periodicity", "TransmitOffset", "Jitter"];
const CRIT_KEYS: &[&str] = &["Level", "Slack"];

/// Parses and validates a service descriptor document.
pub fn parse_service_descriptor(text: &str) -> Result<ServiceDescriptor> {
    let doc = parse_document(text)?;
    let top = Fields::new(&doc, "", TOP_KEYS)?;

    let title = top.req_str("title")?;
    if title.trim().is_empty() {
        return Err(DescriptorError::invariant("title", "title must be non-empty"));
    }

    let meta_table = top.req_table("ServiceMetadata")?;
    let meta = Fields::new(meta_table, "ServiceMetadata", META_KEYS)?;
    let metadata = ServiceMetadata {
        author: meta.req_str("Author")?,
        version: meta.req_str("Version")?,
        domain: meta.req_str("Domain")?,
    };

    let flows_table = top.req_table("Flows")?;
    let flows_view = Fields::open(flows_table, "Flows");
    let mut flows = Vec::with_capacity(flows_table.len());
    for (id, value) in flows_table {
        let path = flows_view.path(id);
        let Value::Table(t) = value else {
            return Err(DescriptorError::schema(path, "flow must be a table"));
        };
        flows.push(parse_flow(id, t, &path)?);
    }
    if flows.is_empty() {
        return Err(DescriptorError::invariant("Flows", "at least one flow is required"));
    }

    Ok(ServiceDescriptor {
        title,
        metadata,
        flows,
    })
}

fn parse_flow(id: &str, t: &Table, path: &str) -> Result<FlowSpec> {
    let f = Fields::new(t, path, FLOW_KEYS)?;

    let nodes_table = f.req_table("NodeSpecs")?;
    let nodes_path = f.path("NodeSpecs");
    let mut node_specs = Vec::with_capacity(nodes_table.len());
    for (role, value) in nodes_table {
        let rpath = join(&nodes_path, role);
        let Value::Table(rt) = value else {
            return Err(DescriptorError::schema(rpath, "node role must be a table"));
        };
        node_specs.push(NodeRole {
            role: role.clone(),
            spec: parse_node_spec(rt, &rpath)?,
        });
    }
    if node_specs.is_empty() {
        return Err(DescriptorError::invariant(nodes_path, "at least one node role is required"));
    }

    let data_path = f.path("DataSpecs");
    let d = Fields::new(f.req_table("DataSpecs")?, data_path, DATA_KEYS)?;
    let data_spec = DataSpec {
        data_format: d.req_str("DataFormat")?,
        data_size: positive(&d.path("DataSize"), d.req_int("DataSize")?)?,
    };

    let traffic_path = f.path("TrafficSpecs");
    let tr = Fields::new(f.req_table("TrafficSpecs")?, traffic_path, TRAFFIC_KEYS)?;
    let g = tr.req_int("Guarantee")?;
    let guarantee = u8::try_from(g)
        .ok()
        .and_then(Guarantee::new)
        .ok_or_else(|| DescriptorError::invariant(tr.path("Guarantee"), format!("must be in 0..=4, got {g}")))?;
    let time = match tr.opt_table("TrafficTimeSpecs")? {
        Some(tt) => parse_time_spec(tt, &tr.path("TrafficTimeSpecs"))?,
        None => TrafficTimeSpec::default(),
    };
    let traffic_spec = TrafficSpec {
        guarantee,
        reliability: tr.opt_bool("Reliability")?.unwrap_or(false),
        delivery: tr.opt_bool("Delivery")?.unwrap_or(false),
        wired: tr.opt_bool("Wired")?.unwrap_or(true),
        time,
    };

    Ok(FlowSpec {
        id: id.to_string(),
        node_specs,
        data_spec,
        traffic_spec,
    })
}

fn parse_node_spec(t: &Table, path: &str) -> Result<NodeSpec> {
    let n = Fields::new(t, path, NODE_KEYS)?;
    let replicas = n.req_int("Replicas")?;
    if replicas < 1 {
        return Err(DescriptorError::invariant(n.path("Replicas"), format!("must be >= 1, got {replicas}")));
    }
    let cpu = n.req_int("CPU")?;
    if cpu < 1 {
        return Err(DescriptorError::invariant(n.path("CPU"), format!("must be >= 1, got {cpu}")));
    }
    let memory = positive(&n.path("Memory"), n.req_int("Memory")?)?;
    let storage = match n.opt_int("Storage")? {
        Some(v) => non_negative(&n.path("Storage"), v)?,
        None => 0,
    };
    let energy = match n.opt_int("Energy")? {
        Some(v) => {
            let v = non_negative(&n.path("Energy"), v)?;
            u32::try_from(v).map_err(|_| DescriptorError::invariant(n.path("Energy"), "out of range"))?
        }
        None => 0,
    };
    let criticality = match n.opt_table("Criticality")? {
        Some(ct) => parse_criticality(ct, &n.path("Criticality"))?,
        None => BTreeMap::new(),
    };

    Ok(NodeSpec {
        image: n.req_str("Image")?,
        image_type: n.opt_str("ImageType")?.unwrap_or_default(),
        replicas: u32::try_from(replicas)
            .map_err(|_| DescriptorError::invariant(n.path("Replicas"), "out of range"))?,
        cpu: u32::try_from(cpu).map_err(|_| DescriptorError::invariant(n.path("CPU"), "out of range"))?,
        memory,
        storage,
        gpu: n.opt_bool("GPU")?.unwrap_or(false),
        energy,
        offloading: n.opt_bool("Offloading")?.unwrap_or(false),
        criticality,
    })
}

fn parse_criticality(t: &Table, path: &str) -> Result<BTreeMap<NodeField, Criticality>> {
    let mut out = BTreeMap::new();
    for (key, value) in t {
        let kpath = join(path, key);
        let field = NodeField::from_key(key)
            .ok_or_else(|| DescriptorError::schema(&kpath, format!("unknown key `{key}`")))?;
        let (level_str, slack) = match value {
            Value::String(s) => (s.clone(), None),
            Value::Table(ct) => {
                let c = Fields::new(ct, kpath.clone(), CRIT_KEYS)?;
                (c.req_str("Level")?, c.opt_number("Slack")?)
            }
            _ => return Err(DescriptorError::schema(&kpath, "expected level string or {Level, Slack} table")),
        };
        let level = CriticalityLevel::parse(&level_str).ok_or_else(|| {
            DescriptorError::invariant(join(&kpath, "Level"), format!("unknown level `{level_str}`"))
        })?;
        let slack = slack.unwrap_or(0.0);
        if !(slack >= 0.0) || !slack.is_finite() {
            return Err(DescriptorError::invariant(join(&kpath, "Slack"), "slack must be a finite value >= 0"));
        }
        if level == CriticalityLevel::Must && slack != 0.0 {
            return Err(DescriptorError::invariant(join(&kpath, "Slack"), "MUST implies slack = 0"));
        }
        out.insert(field, Criticality { level, slack });
    }
    Ok(out)
}

fn parse_time_spec(t: &Table, path: &str) -> Result<TrafficTimeSpec> {
    let f = Fields::new(t, path, TIME_KEYS)?;
    let check = |key: &str, v: Option<f64>| -> Result<Option<f64>> {
        match v {
            Some(x) if !(x >= 0.0) || !x.is_finite() => Err(DescriptorError::invariant(
                f.path(key),
                format!("must be a finite value >= 0, got {x}"),
            )),
            other => Ok(other),
        }
    };
    let max_latency = check("MaxLatency", f.opt_number("MaxLatency")?)?;
    let periodicity = check("Periodicity", f.opt_number("Periodicity")?)?;
    if periodicity == Some(0.0) {
        return Err(DescriptorError::invariant(f.path("Periodicity"), "periodicity must be > 0"));
    }
    let transmit_offset = check("TransmitOffset", f.opt_number("TransmitOffset")?)?.unwrap_or(0.0);
    let jitter = check("Jitter", f.opt_number("Jitter")?)?;
    if let Some(p) = periodicity {
        if transmit_offset >= p {
            return Err(DescriptorError::invariant(
                f.path("TransmitOffset"),
                format!("transmit offset {transmit_offset} must be < periodicity {p}"),
            ));
        }
    }
    Ok(TrafficTimeSpec {
        max_latency,
        periodicity,
        transmit_offset,
        jitter,
    })
}

/// Checks the invariants that a hand-built descriptor might violate.
pub fn validate_service(d: &ServiceDescriptor) -> Result<()> {
    if d.title.trim().is_empty() {
        return Err(DescriptorError::invariant("title", "title must be non-empty"));
    }
    if d.flows.is_empty() {
        return Err(DescriptorError::invariant("Flows", "at least one flow is required"));
    }
    let mut ids = BTreeSet::new();
    for flow in &d.flows {
        if !ids.insert(flow.id.as_str()) {
            return Err(DescriptorError::invariant(join("Flows", &flow.id), "duplicate flow id"));
        }
        let mut roles = BTreeSet::new();
        for r in &flow.node_specs {
            if !roles.insert(r.role.as_str()) {
                return Err(DescriptorError::invariant(
                    format!("Flows.{}.NodeSpecs.{}", flow.id, r.role),
                    "duplicate node role",
                ));
            }
        }
    }
    // Re-parse is the authoritative check for value ranges.
    parse_service_descriptor(&serialize_service(d)).map(|_| ())
}

fn num(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::Integer(v as i64)
    } else {
        Value::Float(v)
    }
}

fn int(v: u64) -> Value {
    Value::Integer(i64::try_from(v).unwrap_or(i64::MAX))
}

/// Renders a descriptor back to TOML; `parse_service_descriptor` inverts it.
pub fn serialize_service(d: &ServiceDescriptor) -> String {
    let mut doc = Table::new();
    doc.insert("title".into(), Value::String(d.title.clone()));

    let mut meta = Table::new();
    meta.insert("Author".into(), Value::String(d.metadata.author.clone()));
    meta.insert("Version".into(), Value::String(d.metadata.version.clone()));
    meta.insert("Domain".into(), Value::String(d.metadata.domain.clone()));
    doc.insert("ServiceMetadata".into(), Value::Table(meta));

    let mut flows = Table::new();
    for flow in &d.flows {
        let mut ft = Table::new();
        let mut nodes = Table::new();
        for r in &flow.node_specs {
            let s = &r.spec;
            let mut nt = Table::new();
            nt.insert("Image".into(), Value::String(s.image.clone()));
            nt.insert("ImageType".into(), Value::String(s.image_type.clone()));
            nt.insert("Replicas".into(), int(s.replicas.into()));
            nt.insert("CPU".into(), int(s.cpu.into()));
            nt.insert("Memory".into(), int(s.memory));
            nt.insert("Storage".into(), int(s.storage));
            nt.insert("GPU".into(), Value::Boolean(s.gpu));
            nt.insert("Energy".into(), int(s.energy.into()));
            nt.insert("Offloading".into(), Value::Boolean(s.offloading));
            if !s.criticality.is_empty() {
                let mut ct = Table::new();
                for (field, c) in &s.criticality {
                    let mut e = Table::new();
                    e.insert("Level".into(), Value::String(c.level.as_str().into()));
                    e.insert("Slack".into(), Value::Float(c.slack));
                    ct.insert(field.key().into(), Value::Table(e));
                }
                nt.insert("Criticality".into(), Value::Table(ct));
            }
            nodes.insert(r.role.clone(), Value::Table(nt));
        }
        ft.insert("NodeSpecs".into(), Value::Table(nodes));

        let mut dt = Table::new();
        dt.insert("DataFormat".into(), Value::String(flow.data_spec.data_format.clone()));
        dt.insert("DataSize".into(), int(flow.data_spec.data_size));
        ft.insert("DataSpecs".into(), Value::Table(dt));

        let ts = &flow.traffic_spec;
        let mut tt = Table::new();
        tt.insert("Guarantee".into(), int(ts.guarantee.level().into()));
        tt.insert("Reliability".into(), Value::Boolean(ts.reliability));
        tt.insert("Delivery".into(), Value::Boolean(ts.delivery));
        tt.insert("Wired".into(), Value::Boolean(ts.wired));
        let mut time = Table::new();
        if let Some(v) = ts.time.max_latency {
            time.insert("MaxLatency".into(), num(v));
        }
        if let Some(v) = ts.time.periodicity {
            time.insert("Periodicity".into(), num(v));
        }
        time.insert("TransmitOffset".into(), num(ts.time.transmit_offset));
        if let Some(v) = ts.time.jitter {
            time.insert("Jitter".into(), num(v));
        }
        tt.insert("TrafficTimeSpecs".into(), Value::Table(time));
        ft.insert("TrafficSpecs".into(), Value::Table(tt));

        flows.insert(flow.id.clone(), Value::Table(ft));
    }
    doc.insert("Flows".into(), Value::Table(flows));

    toml::to_string(&doc).expect("descriptor tables serialize")
}
