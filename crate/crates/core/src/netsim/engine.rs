use super::frer::{Recovery, VectorRecovery};
use super::metrics::compute_metrics;
use super::trace::{FlowRecord, FrameOutcome, FrameRecord, HopRecord, RunRecord, Trace, TraceRecord};
use super::{SimConfig, SimError, SimOutput};
use crate::descriptors::{Medium, TopologyDescriptor};
use crate::network::{fragment_sizes, frame_wire_bits, Network};
use crate::time::{ms_to_ns, serialization_ns, Nanos};
use crate::tsn_config::{GateControlList, GateTimeline, TsnConfig, TsnFlow, APERIODIC_INTERVAL_NS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

/// Timestamps of one frame at one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopLog {
    pub node: usize,
    pub port: usize,
    pub arrival: Nanos,
    pub queue_enter: Option<Nanos>,
    pub tx_start: Option<Nanos>,
    pub tx_end: Option<Nanos>,
    pub departure: Option<Nanos>,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub frame_id: u64,
    pub flow: usize,
    pub message: u64,
    pub fragment: u32,
    pub seq: u16,
    pub payload: u64,
    pub priority: u8,
    pub created_at: Nanos,
    pub hop_log: Vec<HopLog>,
    /// FRER member path index; 0 for unreplicated flows.
    pub frer_member: u32,
    settled: bool,
}

struct FlowRt {
    flow: TsnFlow,
    talker: usize,
    fragments: Vec<u64>,
    /// Egress ports per member path.
    members: Vec<Vec<usize>>,
    eliminator: Option<VectorRecovery>,
    next_seq: u16,
    next_message: u64,
    next_k: u64,
    rng: ChaCha8Rng,
}

struct Shaper {
    idle: i128,
    send: i128,
    /// bit·ns per second, so that slope × elapsed ns adds exactly.
    credit: i128,
    gate: Option<GateTimeline>,
}

struct PortRt {
    node: usize,
    peer: usize,
    link: usize,
    rate: u64,
    medium: Medium,
    propagation: Nanos,
    offset: i64,
    gcl: Option<GateControlList>,
    queues: [VecDeque<u64>; 8],
    busy: Option<(u8, u64)>,
    shapers: [Option<Shaper>; 8],
    last_update: Nanos,
}

impl PortRt {
    fn local(&self, t: Nanos) -> i64 {
        t as i64 + self.offset
    }

    fn update_credits(&mut self, t: Nanos) {
        let last = self.last_update;
        let (la, lb) = (self.local(last), self.local(t));
        for q in 0..8 {
            let transmitting = self.busy.map(|b| b.0) == Some(q as u8);
            let empty = self.queues[q].is_empty();
            let Some(s) = self.shapers[q].as_mut() else { continue };
            if transmitting {
                s.credit += s.send * (t - last) as i128;
                continue;
            }
            let open = s.gate.as_ref().map_or(t - last, |g| g.open_between(la, lb));
            let gain = s.idle * open as i128;
            if !empty {
                s.credit += gain;
            } else if s.credit < 0 {
                s.credit = (s.credit + gain).min(0);
            } else {
                s.credit = 0;
            }
        }
        self.last_update = t;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    TxEnd { port: usize },
    Arrive { frame: u64, node: usize },
    Release { flow: usize },
    Enqueue { frame: u64, port: usize },
    Wake { port: usize },
}

impl Kind {
    fn class(&self) -> u8 {
        match self {
            Kind::TxEnd { .. } => 0,
            Kind::Arrive { .. } => 1,
            Kind::Release { .. } => 2,
            Kind::Enqueue { .. } => 3,
            Kind::Wake { .. } => 4,
        }
    }
}

/// Ordered by (time, class, node, port, priority desc, frame, insertion).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: Nanos,
    class: u8,
    node: usize,
    port: usize,
    rprio: u8,
    frame: u64,
    counter: u64,
    kind: Kind,
}

pub struct Simulation {
    net: Network,
    sim: SimConfig,
    duration: Nanos,
    eps: Nanos,
    node_offsets: Vec<i64>,
    flows: Vec<FlowRt>,
    ports: Vec<PortRt>,
    /// Per link: (fail, restore) events.
    link_events: Vec<Vec<(Nanos, bool)>>,
}

fn mismatch(msg: String) -> SimError {
    SimError::ConfigMismatch(msg)
}

impl Simulation {
    pub fn new(topo: &TopologyDescriptor, flows: &[TsnFlow], config: &TsnConfig, sim: &SimConfig) -> Result<Self, SimError> {
        sim.validate()?;
        let net = Network::new(topo);
        let eps = sim.sync_error_ns();

        let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
        let mut node_offsets = vec![0i64; net.nodes.len()];
        let mut by_id: Vec<usize> = (0..net.nodes.len()).collect();
        by_id.sort_by(|&a, &b| net.nodes[a].id.cmp(&net.nodes[b].id));
        for n in by_id {
            node_offsets[n] = rng.random_range(-(eps as i64)..=eps as i64);
        }

        let mut ports: Vec<PortRt> = net
            .ports
            .iter()
            .map(|p| {
                let l = &net.links[p.link];
                PortRt {
                    node: p.node,
                    peer: p.peer,
                    link: p.link,
                    rate: l.rate,
                    medium: l.medium,
                    propagation: l.propagation_ns,
                    offset: node_offsets[p.node],
                    gcl: None,
                    queues: Default::default(),
                    busy: None,
                    shapers: Default::default(),
                    last_update: 0,
                }
            })
            .collect();
        for pc in &config.ports {
            let idx = net
                .port_by_ids(&pc.node, &pc.link)
                .ok_or_else(|| mismatch(format!("port {}:{} is not in the topology", pc.node, pc.link)))?;
            let port = &mut ports[idx];
            if let Some(g) = &pc.gcl {
                if !g.is_well_formed() {
                    return Err(mismatch(format!("gate control list of {}:{} does not tile its cycle", pc.node, pc.link)));
                }
                port.gcl = Some(g.clone());
            }
            for c in &pc.cbs {
                if c.queue > 7 || c.idle_slope == 0 {
                    return Err(mismatch(format!("bad shaper on {}:{}", pc.node, pc.link)));
                }
                port.shapers[c.queue as usize] = Some(Shaper {
                    idle: c.idle_slope as i128,
                    send: c.send_slope as i128,
                    credit: 0,
                    gate: port.gcl.as_ref().map(|g| GateTimeline::new(g, c.queue)),
                });
            }
        }

        let mut sorted: Vec<&TsnFlow> = flows.iter().collect();
        sorted.sort_by(|a, b| a.key.cmp(&b.key));
        let mut rt = Vec::new();
        for (i, f) in sorted.into_iter().enumerate() {
            let talker = net
                .node(&f.talker)
                .ok_or_else(|| mismatch(format!("flow {} talker {} is not in the topology", f.key, f.talker)))?;
            let listener = net
                .node(&f.listener)
                .ok_or_else(|| mismatch(format!("flow {} listener {} is not in the topology", f.key, f.listener)))?;
            let route = config
                .route(&f.key)
                .ok_or_else(|| mismatch(format!("flow {} has no route", f.key)))?;
            if route.source != f.talker || route.destination != f.listener {
                return Err(mismatch(format!("route of {} does not join its talker and listener", f.key)));
            }
            let mut members = Vec::new();
            for path in &route.paths {
                let ports = route
                    .path_ports(&net, path)
                    .ok_or_else(|| mismatch(format!("route of {} uses unknown or disconnected links", f.key)))?;
                let end = ports.last().map_or(talker, |&p| net.ports[p].peer);
                if end != listener {
                    return Err(mismatch(format!("route of {} does not end at {}", f.key, f.listener)));
                }
                members.push(ports);
            }
            let eliminator = match (members.len(), config.frer_for(&f.key)) {
                (0 | 1, _) => None,
                (2, Some(c)) => Some(VectorRecovery::new(c.recovery_window)),
                _ => return Err(mismatch(format!("flow {} has several paths but no FRER configuration", f.key))),
            };
            let offset = f.offset_ns % f.interval_ns();
            let off = node_offsets[talker];
            let next_k = match f.period_ns {
                Some(p) if off > offset as i64 => (off as u64 - offset).div_ceil(p),
                _ => 0,
            };
            let mut flow = f.clone();
            flow.offset_ns = offset;
            rt.push(FlowRt {
                flow,
                talker,
                fragments: fragment_sizes(f.data_size),
                members,
                eliminator,
                next_seq: 0,
                next_message: 0,
                next_k,
                rng: ChaCha8Rng::seed_from_u64(sim.seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1)),
            });
        }

        let mut s = Simulation {
            link_events: vec![Vec::new(); net.links.len()],
            net,
            sim: sim.clone(),
            duration: sim.duration_ns(),
            eps,
            node_offsets,
            flows: rt,
            ports,
        };
        for f in &sim.failures {
            s.inject_failure(&f.link, f.fail_at_ms)?;
            if let Some(r) = f.restore_at_ms {
                s.restore(&f.link, r)?;
            }
        }
        Ok(s)
    }

    /// Takes `link` down from `at_ms` on.
    pub fn inject_failure(&mut self, link: &str, at_ms: f64) -> Result<(), SimError> {
        let l = self.net.link(link).ok_or_else(|| SimError::UnknownLink(link.to_string()))?;
        self.link_events[l].push((ms_to_ns(at_ms), true));
        Ok(())
    }

    /// Brings `link` back up at `at_ms`.
    pub fn restore(&mut self, link: &str, at_ms: f64) -> Result<(), SimError> {
        let l = self.net.link(link).ok_or_else(|| SimError::UnknownLink(link.to_string()))?;
        self.link_events[l].push((ms_to_ns(at_ms), false));
        Ok(())
    }

    fn down_intervals(&self) -> Vec<Vec<(Nanos, Nanos)>> {
        self.link_events
            .iter()
            .map(|evs| {
                let mut evs = evs.clone();
                evs.sort_by_key(|&(t, fail)| (t, !fail));
                let mut out = Vec::new();
                let mut since = None;
                for (t, fail) in evs {
                    match (fail, since) {
                        (true, None) => since = Some(t),
                        (false, Some(s)) => {
                            out.push((s, t));
                            since = None;
                        }
                        _ => {}
                    }
                }
                if let Some(s) = since {
                    out.push((s, Nanos::MAX));
                }
                out
            })
            .collect()
    }

    pub fn run(self) -> SimOutput {
        let e = Engine {
            down: self.down_intervals(),
            s: self,
            frames: Vec::new(),
            heap: BinaryHeap::new(),
            counter: 0,
            pending_wakes: BTreeSet::new(),
            records: Vec::new(),
        };
        e.run()
    }
}

struct Engine {
    s: Simulation,
    down: Vec<Vec<(Nanos, Nanos)>>,
    frames: Vec<Frame>,
    heap: BinaryHeap<Reverse<Event>>,
    counter: u64,
    pending_wakes: BTreeSet<(Nanos, usize)>,
    records: Vec<TraceRecord>,
}

impl Engine {
    fn push(&mut self, time: Nanos, kind: Kind) {
        let (node, port, frame) = match kind {
            Kind::TxEnd { port } | Kind::Wake { port } => {
                (self.s.ports[port].node, port, self.s.ports[port].busy.map_or(0, |b| b.1))
            }
            Kind::Enqueue { frame, port } => (self.s.ports[port].node, port, frame),
            Kind::Arrive { frame, node } => (node, usize::MAX, frame),
            Kind::Release { flow } => (self.s.flows[flow].talker, usize::MAX, 0),
        };
        let rprio = match kind {
            Kind::Arrive { frame, .. } | Kind::Enqueue { frame, .. } => 7 - self.frames[frame as usize].priority,
            _ => 0,
        };
        self.counter += 1;
        self.heap.push(Reverse(Event {
            time,
            class: kind.class(),
            node,
            port,
            rprio,
            frame,
            counter: self.counter,
            kind,
        }));
    }

    fn wake(&mut self, port: usize, t: Nanos) {
        if self.pending_wakes.insert((t, port)) {
            self.push(t, Kind::Wake { port });
        }
    }

    fn link_down_during(&self, link: usize, a: Nanos, b: Nanos) -> bool {
        self.down[link].iter().any(|&(s, e)| s <= b && e > a)
    }

    fn settle(&mut self, id: u64, outcome: FrameOutcome, at: Nanos, reason: Option<&str>) {
        let f = &mut self.frames[id as usize];
        f.settled = true;
        let flow = &self.s.flows[f.flow].flow;
        self.records.push(TraceRecord::Frame(FrameRecord {
            frame_id: f.frame_id,
            flow: flow.key.clone(),
            message: f.message,
            fragment: f.fragment,
            seq: f.seq,
            member: f.frer_member,
            created_ns: f.created_at,
            outcome,
            at_ns: at,
            reason: reason.map(str::to_string),
        }));
    }

    fn hop_record(&self, id: u64) -> HopRecord {
        let f = &self.frames[id as usize];
        let h = f.hop_log.last().expect("frame has a hop");
        let p = &self.s.ports[h.port];
        let tagged = f.priority > 0;
        HopRecord {
            frame_id: f.frame_id,
            flow: self.s.flows[f.flow].flow.key.clone(),
            seq: f.seq,
            member: f.frer_member,
            node: self.s.net.nodes[h.node].id.clone(),
            port: self.s.net.links[p.link].id.clone(),
            wire_bits: frame_wire_bits(f.payload, tagged, p.medium),
            arrival_ns: h.arrival,
            queue_enter_ns: h.queue_enter,
            tx_start_ns: h.tx_start,
            tx_end_ns: h.tx_end,
            departure_ns: h.departure,
        }
    }

    fn run(mut self) -> SimOutput {
        let duration = self.s.duration;
        self.records.push(TraceRecord::Run(RunRecord {
            duration_ns: duration,
            seed: self.s.sim.seed,
            sync_error_ns: self.s.eps,
            clock_offsets_ns: self
                .s
                .net
                .nodes
                .iter()
                .zip(&self.s.node_offsets)
                .map(|(n, &o)| (n.id.clone(), o))
                .collect(),
        }));
        for f in &self.s.flows {
            self.records.push(TraceRecord::Flow(FlowRecord {
                flow: f.flow.key.clone(),
                priority: f.flow.priority,
                period_ns: f.flow.period_ns,
                max_latency_ns: f.flow.max_latency_ns,
                fragments: f.fragments.len() as u32,
                members: f.members.len().max(1) as u32,
            }));
        }
        for i in 0..self.s.flows.len() {
            if let Some(t) = self.next_release(i) {
                self.push(t, Kind::Release { flow: i });
            }
        }
        log::debug!("simulating {} flows for {} ns", self.s.flows.len(), duration);

        while let Some(Reverse(ev)) = self.heap.pop() {
            if ev.time >= duration {
                break;
            }
            let t = ev.time;
            match ev.kind {
                Kind::Release { flow } => self.release(flow, t),
                Kind::Enqueue { frame, port } => self.enqueue(frame, port, t),
                Kind::Wake { port } => {
                    self.pending_wakes.remove(&(t, port));
                    self.select(port, t);
                }
                Kind::TxEnd { port } => self.tx_end(port, t),
                Kind::Arrive { frame, node } => self.arrive(frame, node, t),
            }
        }

        for id in 0..self.frames.len() as u64 {
            if self.frames[id as usize].settled {
                continue;
            }
            let partial = self.frames[id as usize].hop_log.last().is_some_and(|h| h.tx_end.is_none());
            if partial {
                let r = self.hop_record(id);
                self.records.push(TraceRecord::Hop(r));
            }
            self.settle(id, FrameOutcome::InFlight, duration, None);
        }

        let trace = Trace { records: self.records };
        let metrics = compute_metrics(&trace);
        log::debug!("simulation done: {} frames", self.frames.len());
        SimOutput {
            trace,
            metrics,
            frames_created: self.frames.len() as u64,
        }
    }

    /// First release of a flow, or the next one of a periodic flow, in
    /// global time; `None` past the end of the run.
    fn next_release(&mut self, i: usize) -> Option<Nanos> {
        let duration = self.s.duration;
        let f = &mut self.s.flows[i];
        let t = match f.flow.period_ns {
            Some(p) => {
                let local = f.flow.offset_ns + f.next_k * p;
                f.next_k += 1;
                (local as i64 - self.s.node_offsets[f.talker]) as Nanos
            }
            None => f.rng.random_range(0..APERIODIC_INTERVAL_NS),
        };
        (t < duration).then_some(t)
    }

    fn release(&mut self, fi: usize, t: Nanos) {
        let (message, fragments, members, talker, priority) = {
            let f = &mut self.s.flows[fi];
            let m = f.next_message;
            f.next_message += 1;
            (m, f.fragments.clone(), f.members.clone(), f.talker, f.flow.priority)
        };
        for (k, &payload) in fragments.iter().enumerate() {
            let seq = self.s.flows[fi].next_seq;
            self.s.flows[fi].next_seq = seq.wrapping_add(1);
            for m in 0..members.len().max(1) {
                let id = self.frames.len() as u64;
                self.frames.push(Frame {
                    frame_id: id,
                    flow: fi,
                    message,
                    fragment: k as u32,
                    seq,
                    payload,
                    priority,
                    created_at: t,
                    hop_log: Vec::new(),
                    frer_member: m as u32,
                    settled: false,
                });
                if members.is_empty() {
                    self.settle(id, FrameOutcome::Delivered, t, None);
                    continue;
                }
                let port = members[m][0];
                self.frames[id as usize].hop_log.push(HopLog {
                    node: talker,
                    port,
                    arrival: t,
                    queue_enter: None,
                    tx_start: None,
                    tx_end: None,
                    departure: None,
                });
                let proc = self.s.net.nodes[talker].processing_ns;
                self.push(t + proc, Kind::Enqueue { frame: id, port });
            }
        }
        let next = match self.s.flows[fi].flow.period_ns {
            Some(_) => self.next_release(fi),
            None => {
                // Sporadic: at least the minimum inter-arrival apart.
                let f = &mut self.s.flows[fi];
                let gap = APERIODIC_INTERVAL_NS + f.rng.random_range(0..APERIODIC_INTERVAL_NS);
                Some(t + gap).filter(|&n| n < self.s.duration)
            }
        };
        if let Some(n) = next {
            self.push(n, Kind::Release { flow: fi });
        }
    }

    fn enqueue(&mut self, id: u64, port: usize, t: Nanos) {
        self.frames[id as usize].hop_log.last_mut().expect("hop").queue_enter = Some(t);
        let link = self.s.ports[port].link;
        if self.link_down_during(link, t, t) {
            self.settle(id, FrameOutcome::Dropped, t, Some("link_down"));
            return;
        }
        self.s.ports[port].update_credits(t);
        let q = self.frames[id as usize].priority as usize;
        if self.s.ports[port].queues[q].len() >= self.s.sim.queue_capacity {
            self.settle(id, FrameOutcome::Dropped, t, Some("queue_overflow"));
            return;
        }
        self.s.ports[port].queues[q].push_back(id);
        self.wake(port, t);
    }

    fn select(&mut self, port: usize, t: Nanos) {
        let p = &mut self.s.ports[port];
        p.update_credits(t);
        if p.busy.is_some() {
            return;
        }
        let local = p.local(t);
        let (mask, boundary) = match &p.gcl {
            Some(g) => {
                let (m, next) = g.state_at(local);
                (m, Some((next - p.offset) as Nanos))
            }
            None => (0xFF, None),
        };
        let mut retry: Option<Nanos> = None;
        let mut chosen = None;
        for q in (0..8).rev() {
            if p.queues[q].is_empty() {
                continue;
            }
            if mask & (1 << q) == 0 {
                retry = min_opt(retry, boundary);
                continue;
            }
            if let Some(s) = &p.shapers[q] {
                if s.credit < 0 {
                    let need = ((-s.credit) as u128).div_ceil(s.idle as u128) as Nanos;
                    retry = min_opt(retry, Some(t + need));
                    retry = min_opt(retry, boundary);
                    continue;
                }
            }
            chosen = Some(q);
            break;
        }
        match chosen {
            Some(q) => {
                let id = p.queues[q].pop_front().expect("non-empty");
                let f = &mut self.frames[id as usize];
                let bits = frame_wire_bits(f.payload, f.priority > 0, p.medium);
                let tx = serialization_ns(bits, p.rate);
                p.busy = Some((q as u8, id));
                f.hop_log.last_mut().expect("hop").tx_start = Some(t);
                self.push(t + tx, Kind::TxEnd { port });
            }
            None => {
                if let Some(r) = retry {
                    self.wake(port, r);
                }
            }
        }
    }

    fn tx_end(&mut self, port: usize, t: Nanos) {
        let p = &mut self.s.ports[port];
        p.update_credits(t);
        let (q, id) = p.busy.take().expect("transmitting");
        if let Some(s) = p.shapers[q as usize].as_mut() {
            if p.queues[q as usize].is_empty() && s.credit > 0 {
                s.credit = 0;
            }
        }
        let (prop, peer) = (p.propagation, p.peer);
        let h = self.frames[id as usize].hop_log.last_mut().expect("hop");
        h.tx_end = Some(t);
        h.departure = Some(t + prop);
        let r = self.hop_record(id);
        self.records.push(TraceRecord::Hop(r));
        self.push(t + prop, Kind::Arrive { frame: id, node: peer });
        self.wake(port, t);
    }

    fn arrive(&mut self, id: u64, node: usize, t: Nanos) {
        let f = &self.frames[id as usize];
        let last = f.hop_log.last().expect("hop");
        let link = self.s.ports[last.port].link;
        if self.link_down_during(link, last.tx_start.expect("sent"), t) {
            self.settle(id, FrameOutcome::Dropped, t, Some("link_failure"));
            return;
        }
        let fi = f.flow;
        let member = f.frer_member as usize;
        let hops_done = f.hop_log.len();
        let next_port = self.s.flows[fi].members[member].get(hops_done).copied();
        let Some(port) = next_port else {
            let seq = f.seq;
            let verdict = match self.s.flows[fi].eliminator.as_mut() {
                Some(e) => e.eliminate_duplicates(seq),
                None => Recovery::Accept,
            };
            match verdict {
                Recovery::Accept => self.settle(id, FrameOutcome::Delivered, t, None),
                Recovery::Duplicate => self.settle(id, FrameOutcome::Discarded, t, Some("duplicate")),
                Recovery::OutOfWindow => self.settle(id, FrameOutcome::Dropped, t, Some("out_of_window")),
            }
            return;
        };
        self.frames[id as usize].hop_log.push(HopLog {
            node,
            port,
            arrival: t,
            queue_enter: None,
            tx_start: None,
            tx_end: None,
            departure: None,
        });
        let proc = self.s.net.nodes[node].processing_ns;
        self.push(t + proc, Kind::Enqueue { frame: id, port });
    }
}

fn min_opt(a: Option<Nanos>, b: Option<Nanos>) -> Option<Nanos> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}
