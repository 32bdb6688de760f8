//! Topology descriptors: ECUs, switches, links, attached devices, and flow bindings.
//!
//! ```toml
//! [[ecus]]
//! id = "ecu1"
//! cpu_cores = 4
//! memory = 4096            # MiB
//! storage = 100000000000   # bytes
//! gpu = false
//! energy_class = 1
//! attached_devices = []
//!
//! [[switches]]
//! id = "sw1"
//! processing_delay = 5.0   # µs
//! ports = [{ port_id = "l1", queues = 8, tsn_capable = true }]
//!
//! [[links]]
//! id = "l1"
//! endpoint_a = "ecu1"
//! endpoint_b = "sw1"
//! rate = 1000000000        # bit/s
//! propagation_delay = 0.05 # µs
//! medium = "ETHERNET"
//!
//! [[devices]]
//! id = "ramp"
//! kind = "ACTUATOR"
//! bus = "can0"
//!
//! [[bindings]]
//! flow = "WheelchairDriver/Flow1"
//! talker = "NodeA"
//! listener = "ecu2"
//! ```
//!
//! A switch port is identified by the link it attaches to. Ports not listed
//! under a switch default to 8 TSN-capable queues. A device reaches the
//! network through `endpoint_a` of its bus link.

use super::error::{DescriptorError, DescriptorErrorCode, Result};
use super::fields::{index, parse_document, positive, Fields};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use toml::{Table, Value};

pub const QUEUES_PER_PORT: u8 = 8;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TopologyDescriptor {
    pub ecus: Vec<EcuNode>,
    pub switches: Vec<SwitchNode>,
    pub links: Vec<Link>,
    pub devices: Vec<Device>,
    pub bindings: Vec<FlowBinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcuNode {
    pub id: String,
    pub cpu_cores: u32,
    /// MiB.
    pub memory: u64,
    /// Bytes.
    pub storage: u64,
    pub gpu: bool,
    pub energy_class: u32,
    pub attached_devices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchNode {
    pub id: String,
    pub ports: Vec<SwitchPort>,
    /// µs.
    pub processing_delay: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchPort {
    /// Id of the link this port attaches to.
    pub port_id: String,
    pub queues: u8,
    pub tsn_capable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Medium {
    Ethernet,
    Can,
}

impl Medium {
    pub fn as_str(self) -> &'static str {
        match self {
            Medium::Ethernet => "ETHERNET",
            Medium::Can => "CAN",
        }
    }
}

/// Largest payload a CAN link carries per message, in bytes.
pub const CAN_MAX_PAYLOAD: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub endpoint_a: String,
    pub endpoint_b: String,
    /// bit/s.
    pub rate: u64,
    /// µs.
    pub propagation_delay: f64,
    pub medium: Medium,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DeviceKind {
    Sensor,
    Actuator,
}

impl DeviceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Sensor => "SENSOR",
            DeviceKind::Actuator => "ACTUATOR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Device {
    pub id: String,
    pub kind: DeviceKind,
    pub bus: String,
}

/// Pins a flow's talker and listener. Each endpoint names a node role of the
/// flow, an ECU id, or a device id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowBinding {
    /// `<service title>/<flow id>`.
    pub flow: String,
    pub talker: String,
    pub listener: String,
}

impl TopologyDescriptor {
    pub fn ecu(&self, id: &str) -> Option<&EcuNode> {
        self.ecus.iter().find(|e| e.id == id)
    }

    pub fn switch(&self, id: &str) -> Option<&SwitchNode> {
        self.switches.iter().find(|s| s.id == id)
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn device(&self, id: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn binding(&self, flow_key: &str) -> Option<&FlowBinding> {
        self.bindings.iter().find(|b| b.flow == flow_key)
    }

    pub fn is_node(&self, id: &str) -> bool {
        self.ecu(id).is_some() || self.switch(id).is_some()
    }

    /// Port configuration of `switch` toward `link`, defaulting to a TSN-capable 8-queue port.
    pub fn switch_port(&self, switch: &str, link: &str) -> SwitchPort {
        self.switch(switch)
            .and_then(|s| s.ports.iter().find(|p| p.port_id == link))
            .cloned()
            .unwrap_or_else(|| SwitchPort {
                port_id: link.to_string(),
                queues: QUEUES_PER_PORT,
                tsn_capable: true,
            })
    }
}

const TOP_KEYS: &[&str] = &["ecus", "switches", "links", "devices", "bindings"];
const ECU_KEYS: &[&str] = &[
    "id",
    "cpu_cores",
    "memory",
    "storage",
    "gpu",
    "energy_class",
    "attached_devices",
];
const SWITCH_KEYS: &[&str] = &["id", "ports", "processing_delay"];
const PORT_KEYS: &[&str] = &["port_id", "queues", "tsn_capable"];
const LINK_KEYS: &[&str] = &["id", "endpoint_a", "endpoint_b", "rate", "propagation_delay", "medium"];
const DEVICE_KEYS: &[&str] = &["id", "kind", "bus"];
const BINDING_KEYS: &[&str] = &["flow", "talker", "listener"];

pub fn parse_topology_descriptor(text: &str) -> Result<TopologyDescriptor> {
    let doc = parse_document(text)?;
    let top = Fields::new(&doc, "", TOP_KEYS)?;

    let mut topo = TopologyDescriptor::default();
    for (path, t) in top.table_array("ecus")? {
        topo.ecus.push(parse_ecu(t, &path)?);
    }
    for (path, t) in top.table_array("switches")? {
        topo.switches.push(parse_switch(t, &path)?);
    }
    for (path, t) in top.table_array("links")? {
        topo.links.push(parse_link(t, &path)?);
    }
    for (path, t) in top.table_array("devices")? {
        let f = Fields::new(t, path, DEVICE_KEYS)?;
        let kind = match f.req_str("kind")?.as_str() {
            "SENSOR" => DeviceKind::Sensor,
            "ACTUATOR" => DeviceKind::Actuator,
            other => return Err(DescriptorError::schema(f.path("kind"), format!("unknown device kind `{other}`"))),
        };
        topo.devices.push(Device {
            id: f.req_str("id")?,
            kind,
            bus: f.req_str("bus")?,
        });
    }
    for (path, t) in top.table_array("bindings")? {
        let f = Fields::new(t, path, BINDING_KEYS)?;
        topo.bindings.push(FlowBinding {
            flow: f.req_str("flow")?,
            talker: f.req_str("talker")?,
            listener: f.req_str("listener")?,
        });
    }

    validate_topology(&topo)?;
    Ok(topo)
}

fn parse_ecu(t: &Table, path: &str) -> Result<EcuNode> {
    let f = Fields::new(t, path, ECU_KEYS)?;
    let cpu = positive(&f.path("cpu_cores"), f.req_int("cpu_cores")?)?;
    Ok(EcuNode {
        id: f.req_str("id")?,
        cpu_cores: u32::try_from(cpu).map_err(|_| DescriptorError::invariant(f.path("cpu_cores"), "out of range"))?,
        memory: positive(&f.path("memory"), f.req_int("memory")?)?,
        storage: positive(&f.path("storage"), f.req_int("storage")?)?,
        gpu: f.opt_bool("gpu")?.unwrap_or(false),
        energy_class: match f.opt_int("energy_class")? {
            Some(v) => u32::try_from(v)
                .map_err(|_| DescriptorError::invariant(f.path("energy_class"), format!("must be >= 0, got {v}")))?,
            None => 0,
        },
        attached_devices: f.string_array("attached_devices")?,
    })
}

fn parse_switch(t: &Table, path: &str) -> Result<SwitchNode> {
    let f = Fields::new(t, path, SWITCH_KEYS)?;
    let processing_delay = f.opt_number("processing_delay")?.unwrap_or(0.0);
    if !(processing_delay >= 0.0) || !processing_delay.is_finite() {
        return Err(DescriptorError::invariant(f.path("processing_delay"), "must be a finite value >= 0"));
    }
    let mut ports = Vec::new();
    for (ppath, pt) in f.table_array("ports")? {
        let p = Fields::new(pt, ppath, PORT_KEYS)?;
        let queues = p.opt_int("queues")?.unwrap_or(QUEUES_PER_PORT as i64);
        if queues != QUEUES_PER_PORT as i64 {
            return Err(DescriptorError::invariant(p.path("queues"), format!("ports have exactly 8 queues, got {queues}")));
        }
        ports.push(SwitchPort {
            port_id: p.req_str("port_id")?,
            queues: QUEUES_PER_PORT,
            tsn_capable: p.opt_bool("tsn_capable")?.unwrap_or(true),
        });
    }
    Ok(SwitchNode {
        id: f.req_str("id")?,
        ports,
        processing_delay,
    })
}

fn parse_link(t: &Table, path: &str) -> Result<Link> {
    let f = Fields::new(t, path, LINK_KEYS)?;
    let propagation_delay = f.opt_number("propagation_delay")?.unwrap_or(0.0);
    if !(propagation_delay >= 0.0) || !propagation_delay.is_finite() {
        return Err(DescriptorError::invariant(f.path("propagation_delay"), "must be a finite value >= 0"));
    }
    let medium = match f.opt_str("medium")?.as_deref() {
        None | Some("ETHERNET") => Medium::Ethernet,
        Some("CAN") => Medium::Can,
        Some(other) => return Err(DescriptorError::schema(f.path("medium"), format!("unknown medium `{other}`"))),
    };
    Ok(Link {
        id: f.req_str("id")?,
        endpoint_a: f.req_str("endpoint_a")?,
        endpoint_b: f.req_str("endpoint_b")?,
        rate: positive(&f.path("rate"), f.req_int("rate")?)?,
        propagation_delay,
        medium,
    })
}

/// Checks cross-references, value invariants and connectivity.
pub fn validate_topology(topo: &TopologyDescriptor) -> Result<()> {
    let mut seen = BTreeSet::new();
    let ids = topo
        .ecus
        .iter()
        .enumerate()
        .map(|(i, e)| (index("ecus", i), &e.id))
        .chain(topo.switches.iter().enumerate().map(|(i, s)| (index("switches", i), &s.id)))
        .chain(topo.links.iter().enumerate().map(|(i, l)| (index("links", i), &l.id)))
        .chain(topo.devices.iter().enumerate().map(|(i, d)| (index("devices", i), &d.id)));
    for (path, id) in ids {
        if id.is_empty() {
            return Err(DescriptorError::invariant(format!("{path}.id"), "identifiers must be non-empty"));
        }
        if !seen.insert(id.as_str()) {
            return Err(DescriptorError::invariant(format!("{path}.id"), format!("duplicate identifier `{id}`")));
        }
    }

    for (i, e) in topo.ecus.iter().enumerate() {
        let path = index("ecus", i);
        if e.cpu_cores == 0 || e.memory == 0 || e.storage == 0 {
            return Err(DescriptorError::invariant(path, "ECU capacities must be > 0"));
        }
        for (j, dev) in e.attached_devices.iter().enumerate() {
            if topo.device(dev).is_none() {
                return Err(DescriptorError::schema(
                    index(&format!("{path}.attached_devices"), j),
                    format!("unknown device `{dev}`"),
                ));
            }
        }
    }

    for (i, l) in topo.links.iter().enumerate() {
        let path = index("links", i);
        for (key, end) in [("endpoint_a", &l.endpoint_a), ("endpoint_b", &l.endpoint_b)] {
            if !topo.is_node(end) {
                return Err(DescriptorError::schema(format!("{path}.{key}"), format!("unknown node `{end}`")));
            }
        }
        if l.endpoint_a == l.endpoint_b {
            return Err(DescriptorError::invariant(format!("{path}.endpoint_b"), "link endpoints must differ"));
        }
        if l.rate == 0 {
            return Err(DescriptorError::invariant(format!("{path}.rate"), "must be > 0"));
        }
        if !(l.propagation_delay >= 0.0) {
            return Err(DescriptorError::invariant(format!("{path}.propagation_delay"), "must be >= 0"));
        }
    }

    for (i, s) in topo.switches.iter().enumerate() {
        let path = index("switches", i);
        if !(s.processing_delay >= 0.0) {
            return Err(DescriptorError::invariant(format!("{path}.processing_delay"), "must be >= 0"));
        }
        let mut port_ids = BTreeSet::new();
        for (j, p) in s.ports.iter().enumerate() {
            let ppath = index(&format!("{path}.ports"), j);
            if p.queues != QUEUES_PER_PORT {
                return Err(DescriptorError::invariant(format!("{ppath}.queues"), "ports have exactly 8 queues"));
            }
            let attached = topo
                .link(&p.port_id)
                .is_some_and(|l| l.endpoint_a == s.id || l.endpoint_b == s.id);
            if !attached {
                return Err(DescriptorError::schema(
                    format!("{ppath}.port_id"),
                    format!("`{}` is not a link attached to switch `{}`", p.port_id, s.id),
                ));
            }
            if !port_ids.insert(p.port_id.as_str()) {
                return Err(DescriptorError::invariant(format!("{ppath}.port_id"), "duplicate port"));
            }
        }
    }

    for (i, d) in topo.devices.iter().enumerate() {
        if topo.link(&d.bus).is_none() {
            return Err(DescriptorError::schema(format!("{}.bus", index("devices", i)), format!("unknown link `{}`", d.bus)));
        }
    }

    let mut bound = BTreeSet::new();
    for (i, b) in topo.bindings.iter().enumerate() {
        if !bound.insert(b.flow.as_str()) {
            return Err(DescriptorError::invariant(format!("{}.flow", index("bindings", i)), "duplicate binding"));
        }
    }

    check_connected(topo)
}

fn check_connected(topo: &TopologyDescriptor) -> Result<()> {
    let nodes: Vec<&str> = topo
        .ecus
        .iter()
        .map(|e| e.id.as_str())
        .chain(topo.switches.iter().map(|s| s.id.as_str()))
        .collect();
    let Some(&start) = nodes.first() else {
        return Ok(());
    };
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for l in &topo.links {
        adj.entry(l.endpoint_a.as_str()).or_default().push(l.endpoint_b.as_str());
        adj.entry(l.endpoint_b.as_str()).or_default().push(l.endpoint_a.as_str());
    }
    let mut reached = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for &m in adj.get(n).into_iter().flatten() {
            if reached.insert(m) {
                queue.push_back(m);
            }
        }
    }
    let unreachable: Vec<&str> = nodes.into_iter().filter(|n| !reached.contains(n)).collect();
    if unreachable.is_empty() {
        Ok(())
    } else {
        Err(DescriptorError::new(
            DescriptorErrorCode::Disconnected,
            "links",
            format!("unreachable from `{start}`: {}", unreachable.join(", ")),
        ))
    }
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

fn s(v: &str) -> Value {
    Value::String(v.to_string())
}

pub fn serialize_topology(topo: &TopologyDescriptor) -> String {
    let mut doc = Table::new();
    let arr = |items: Vec<Table>| Value::Array(items.into_iter().map(Value::Table).collect());

    doc.insert(
        "ecus".into(),
        arr(topo
            .ecus
            .iter()
            .map(|e| {
                let mut t = Table::new();
                t.insert("id".into(), s(&e.id));
                t.insert("cpu_cores".into(), int(e.cpu_cores.into()));
                t.insert("memory".into(), int(e.memory));
                t.insert("storage".into(), int(e.storage));
                t.insert("gpu".into(), Value::Boolean(e.gpu));
                t.insert("energy_class".into(), int(e.energy_class.into()));
                t.insert(
                    "attached_devices".into(),
                    Value::Array(e.attached_devices.iter().map(|d| s(d)).collect()),
                );
                t
            })
            .collect()),
    );
    doc.insert(
        "switches".into(),
        arr(topo
            .switches
            .iter()
            .map(|sw| {
                let mut t = Table::new();
                t.insert("id".into(), s(&sw.id));
                t.insert("processing_delay".into(), num(sw.processing_delay));
                t.insert(
                    "ports".into(),
                    arr(sw
                        .ports
                        .iter()
                        .map(|p| {
                            let mut pt = Table::new();
                            pt.insert("port_id".into(), s(&p.port_id));
                            pt.insert("queues".into(), int(p.queues.into()));
                            pt.insert("tsn_capable".into(), Value::Boolean(p.tsn_capable));
                            pt
                        })
                        .collect()),
                );
                t
            })
            .collect()),
    );
    doc.insert(
        "links".into(),
        arr(topo
            .links
            .iter()
            .map(|l| {
                let mut t = Table::new();
                t.insert("id".into(), s(&l.id));
                t.insert("endpoint_a".into(), s(&l.endpoint_a));
                t.insert("endpoint_b".into(), s(&l.endpoint_b));
                t.insert("rate".into(), int(l.rate));
                t.insert("propagation_delay".into(), num(l.propagation_delay));
                t.insert("medium".into(), s(l.medium.as_str()));
                t
            })
            .collect()),
    );
    doc.insert(
        "devices".into(),
        arr(topo
            .devices
            .iter()
            .map(|d| {
                let mut t = Table::new();
                t.insert("id".into(), s(&d.id));
                t.insert("kind".into(), s(d.kind.as_str()));
                t.insert("bus".into(), s(&d.bus));
                t
            })
            .collect()),
    );
    doc.insert(
        "bindings".into(),
        arr(topo
            .bindings
            .iter()
            .map(|b| {
                let mut t = Table::new();
                t.insert("flow".into(), s(&b.flow));
                t.insert("talker".into(), s(&b.talker));
                t.insert("listener".into(), s(&b.listener));
                t
            })
            .collect()),
    );
    toml::to_string(&doc).expect("topology tables serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[ecus]]
id = "ecu1"
cpu_cores = 2
memory = 1024
storage = 1000000
[[ecus]]
id = "ecu2"
cpu_cores = 2
memory = 1024
storage = 1000000
[[switches]]
id = "sw1"
processing_delay = 2.5
[[links]]
id = "l1"
endpoint_a = "ecu1"
endpoint_b = "sw1"
rate = 100000000
propagation_delay = 0.1
[[links]]
id = "l2"
endpoint_a = "sw1"
endpoint_b = "ecu2"
rate = 100000000
"#;

    #[test]
    fn minimal_testbed_parses() {
        let t = parse_topology_descriptor(MINIMAL).unwrap();
        assert_eq!(t.ecus.len() + t.switches.len(), 3);
        assert_eq!(t.links.len(), 2);
        assert!(t.devices.is_empty());
        assert!(t.switch_port("sw1", "l1").tsn_capable);
        assert_eq!(t.links[0].medium, Medium::Ethernet);
    }

    #[test]
    fn dangling_link_endpoint_is_schema_error() {
        let text = MINIMAL.replace("endpoint_b = \"ecu2\"", "endpoint_b = \"ecu9\"");
        let err = parse_topology_descriptor(&text).unwrap_err();
        assert_eq!(err.code, DescriptorErrorCode::Schema);
        assert_eq!(err.key_path, "links[1].endpoint_b");
        assert!(err.message.contains("ecu9"));
    }

    #[test]
    fn disjoint_islands_are_disconnected() {
        let text = format!(
            "{MINIMAL}\n[[ecus]]\nid = \"ecu3\"\ncpu_cores = 1\nmemory = 1\nstorage = 1\n[[ecus]]\nid = \"ecu4\"\ncpu_cores = 1\nmemory = 1\nstorage = 1\n[[links]]\nid = \"l9\"\nendpoint_a = \"ecu3\"\nendpoint_b = \"ecu4\"\nrate = 1000\n"
        );
        let err = parse_topology_descriptor(&text).unwrap_err();
        assert_eq!(err.code, DescriptorErrorCode::Disconnected);
        assert!(err.message.contains("ecu3") && err.message.contains("ecu4"));
    }

    #[test]
    fn port_queue_count_must_be_eight() {
        let text = MINIMAL.replace(
            "processing_delay = 2.5",
            "processing_delay = 2.5\nports = [{ port_id = \"l1\", queues = 4 }]",
        );
        let err = parse_topology_descriptor(&text).unwrap_err();
        assert_eq!(err.code, DescriptorErrorCode::Invariant);
        assert_eq!(err.key_path, "switches[0].ports[0].queues");
    }

    #[test]
    fn invariant_violations() {
        let cases = [
            ("rate = 100000000\npropagation_delay = 0.1", "rate = 0\npropagation_delay = 0.1", "links[0].rate"),
            ("propagation_delay = 0.1", "propagation_delay = -1.0", "links[0].propagation_delay"),
            ("processing_delay = 2.5", "processing_delay = -2.5", "switches[0].processing_delay"),
            ("id = \"ecu1\"\ncpu_cores = 2", "id = \"ecu1\"\ncpu_cores = 0", "ecus[0].cpu_cores"),
            ("id = \"ecu2\"", "id = \"ecu1\"", "ecus[1].id"),
        ];
        for (from, to, path) in cases {
            assert!(MINIMAL.contains(from), "{from}");
            let err = parse_topology_descriptor(&MINIMAL.replacen(from, to, 1)).unwrap_err();
            assert_eq!(err.code, DescriptorErrorCode::Invariant, "{to}: {err}");
            assert_eq!(err.key_path, path, "{to}");
        }
    }

    #[test]
    fn device_bus_must_exist() {
        let text = format!("{MINIMAL}\n[[devices]]\nid = \"cam\"\nkind = \"SENSOR\"\nbus = \"can7\"\n");
        let err = parse_topology_descriptor(&text).unwrap_err();
        assert_eq!(err.code, DescriptorErrorCode::Schema);
        assert_eq!(err.key_path, "devices[0].bus");
    }

    #[test]
    fn empty_device_list_round_trips() {
        let t = parse_topology_descriptor(MINIMAL).unwrap();
        let again = parse_topology_descriptor(&serialize_topology(&t)).unwrap();
        assert_eq!(t, again);
        assert!(again.devices.is_empty());
    }
}
