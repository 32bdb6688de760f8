//! Indexed view of a topology: nodes, links and directed egress ports, plus
//! the framing arithmetic shared by the planner and the simulator.

use crate::descriptors::{Medium, TopologyDescriptor};
use crate::time::{serialization_ns, us_to_ns, Nanos};
use std::collections::BTreeMap;

/// Preamble + SFD + MAC header + FCS + inter-frame gap.
pub const FRAME_OVERHEAD_BYTES: u64 = 38;
/// 802.1Q tag, present on every frame with a non-zero PCP.
pub const PCP_TAG_BYTES: u64 = 4;
pub const MAX_FRAME_OVERHEAD_BYTES: u64 = FRAME_OVERHEAD_BYTES + PCP_TAG_BYTES;
pub const MTU_BYTES: u64 = 1500;
/// 64-byte minimum frame plus preamble, SFD and gap.
pub const MIN_WIRE_BYTES: u64 = 84;
/// Classic CAN frame without data bits or stuffing (44 + 64 = 108 bits at dlc 8).
pub const CAN_FRAME_OVERHEAD_BITS: u64 = 44;
pub const CAN_MAX_DLC: u64 = 8;

/// Payload sizes of the frames a message of `data_size` bytes is split into.
pub fn fragment_sizes(data_size: u64) -> Vec<u64> {
    let data_size = data_size.max(1);
    let full = data_size / MTU_BYTES;
    let rest = data_size % MTU_BYTES;
    let mut out = vec![MTU_BYTES; full as usize];
    if rest > 0 {
        out.push(rest);
    }
    out
}

/// Bits a single frame occupies on a link of `medium`.
pub fn frame_wire_bits(payload: u64, tagged: bool, medium: Medium) -> u64 {
    match medium {
        Medium::Ethernet => {
            let overhead = if tagged { MAX_FRAME_OVERHEAD_BYTES } else { FRAME_OVERHEAD_BYTES };
            (payload + overhead).max(MIN_WIRE_BYTES) * 8
        }
        Medium::Can => {
            let full = payload / CAN_MAX_DLC;
            let rest = payload % CAN_MAX_DLC;
            let mut bits = full * (CAN_FRAME_OVERHEAD_BITS + CAN_MAX_DLC * 8);
            if rest > 0 || payload == 0 {
                bits += CAN_FRAME_OVERHEAD_BITS + rest * 8;
            }
            bits
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Ecu,
    Switch,
}

#[derive(Debug, Clone)]
pub struct NodeInfo {
    pub id: String,
    pub kind: NodeKind,
    pub processing_ns: Nanos,
}

#[derive(Debug, Clone)]
pub struct LinkInfo {
    pub id: String,
    pub a: usize,
    pub b: usize,
    pub rate: u64,
    pub propagation_ns: Nanos,
    pub medium: Medium,
}

impl LinkInfo {
    pub fn other(&self, node: usize) -> usize {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Egress port: the transmitting side of one link direction.
#[derive(Debug, Clone)]
pub struct PortInfo {
    pub node: usize,
    pub link: usize,
    pub peer: usize,
    pub tsn_capable: bool,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<NodeInfo>,
    pub links: Vec<LinkInfo>,
    pub ports: Vec<PortInfo>,
    node_index: BTreeMap<String, usize>,
    link_index: BTreeMap<String, usize>,
    port_index: BTreeMap<(usize, usize), usize>,
    /// Per node: (link, neighbor), sorted by link id.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Network {
    /// Builds the index. The topology is assumed valid.
    pub fn new(topo: &TopologyDescriptor) -> Network {
        let mut nodes = Vec::new();
        for e in &topo.ecus {
            nodes.push(NodeInfo {
                id: e.id.clone(),
                kind: NodeKind::Ecu,
                processing_ns: 0,
            });
        }
        for s in &topo.switches {
            nodes.push(NodeInfo {
                id: s.id.clone(),
                kind: NodeKind::Switch,
                processing_ns: us_to_ns(s.processing_delay),
            });
        }
        let node_index: BTreeMap<String, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();

        let links: Vec<LinkInfo> = topo
            .links
            .iter()
            .map(|l| LinkInfo {
                id: l.id.clone(),
                a: node_index[&l.endpoint_a],
                b: node_index[&l.endpoint_b],
                rate: l.rate,
                propagation_ns: us_to_ns(l.propagation_delay),
                medium: l.medium,
            })
            .collect();
        let link_index: BTreeMap<String, usize> =
            links.iter().enumerate().map(|(i, l)| (l.id.clone(), i)).collect();

        let mut ports = Vec::new();
        let mut port_index = BTreeMap::new();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (li, l) in links.iter().enumerate() {
            for (from, to) in [(l.a, l.b), (l.b, l.a)] {
                let tsn_capable = match (nodes[from].kind, l.medium) {
                    (_, Medium::Can) => false,
                    (NodeKind::Ecu, _) => true,
                    (NodeKind::Switch, _) => topo.switch_port(&nodes[from].id, &l.id).tsn_capable,
                };
                port_index.insert((from, li), ports.len());
                ports.push(PortInfo {
                    node: from,
                    link: li,
                    peer: to,
                    tsn_capable,
                });
                adjacency[from].push((li, to));
            }
        }
        for adj in &mut adjacency {
            adj.sort_by(|x, y| links[x.0].id.cmp(&links[y.0].id));
        }

        Network {
            nodes,
            links,
            ports,
            node_index,
            link_index,
            port_index,
            adjacency,
        }
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn link(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn port(&self, node: usize, link: usize) -> Option<usize> {
        self.port_index.get(&(node, link)).copied()
    }

    pub fn port_by_ids(&self, node: &str, link: &str) -> Option<usize> {
        self.port(self.node(node)?, self.link(link)?)
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn port_label(&self, port: usize) -> String {
        let p = &self.ports[port];
        format!("{}:{}", self.nodes[p.node].id, self.links[p.link].id)
    }

    /// Egress ports traversed by a path given as link indices starting at `source`.
    pub fn path_ports(&self, source: usize, path: &[usize]) -> Option<Vec<usize>> {
        let mut at = source;
        let mut out = Vec::with_capacity(path.len());
        for &l in path {
            let link = &self.links[l];
            if link.a != at && link.b != at {
                return None;
            }
            out.push(self.port(at, l)?);
            at = link.other(at);
        }
        Some(out)
    }

    /// Time to serialize a message of `data_size` bytes (all fragments) on `link`.
    pub fn message_tx_ns(&self, link: usize, data_size: u64, tagged: bool) -> Nanos {
        let l = &self.links[link];
        fragment_sizes(data_size)
            .into_iter()
            .map(|p| serialization_ns(frame_wire_bits(p, tagged, l.medium), l.rate))
            .sum()
    }

    /// Time to serialize the first fragment of a message on `link`.
    pub fn first_fragment_tx_ns(&self, link: usize, data_size: u64, tagged: bool) -> Nanos {
        let l = &self.links[link];
        let first = fragment_sizes(data_size)[0];
        serialization_ns(frame_wire_bits(first, tagged, l.medium), l.rate)
    }

    /// Longest single-frame transmission on `link` (a full tagged MTU frame).
    pub fn max_frame_tx_ns(&self, link: usize) -> Nanos {
        let l = &self.links[link];
        let payload = match l.medium {
            Medium::Ethernet => MTU_BYTES,
            Medium::Can => crate::descriptors::CAN_MAX_PAYLOAD,
        };
        serialization_ns(frame_wire_bits(payload, true, l.medium), l.rate)
    }
}
