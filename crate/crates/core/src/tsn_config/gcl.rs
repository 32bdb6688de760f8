//! No-wait gate schedule synthesis.
//!
//! Each scheduled flow gets one exclusive window per hop and period. Window
//! starts are chained: the window at hop h opens once the whole message can
//! have arrived from hop h-1, allowing for clock offsets of up to ε on either
//! side. Only the talker may delay the first window (the shift), so queuing
//! after the first hop is bounded by the clock error alone. A guard band of
//! one maximum frame precedes every window so the port is idle when it opens.
//!
//! Two kinds of reservations are checked per port, both modulo the periods:
//! occupancy (guard plus window) must never overlap, and frames of two flows
//! sharing a queue must never be queued at the same time, otherwise one
//! could take the other's window.

use super::{FlowRoute, TsnError, TsnFlow};
use crate::network::Network;
use crate::time::{Nanos, NS_PER_MS, NS_PER_S};
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const HYPERPERIOD_CAP_NS: Nanos = 10 * NS_PER_S;
/// Cycle of a port without scheduled windows.
pub const IDLE_CYCLE_NS: Nanos = NS_PER_MS;
pub const ALL_QUEUES_OPEN: u8 = 0xFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GclEntry {
    pub offset_ns: Nanos,
    pub duration_ns: Nanos,
    /// Bit i set = queue i open.
    pub mask: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateControlList {
    pub cycle_ns: Nanos,
    pub entries: Vec<GclEntry>,
}

impl GateControlList {
    pub fn always_open() -> Self {
        GateControlList {
            cycle_ns: IDLE_CYCLE_NS,
            entries: vec![GclEntry {
                offset_ns: 0,
                duration_ns: IDLE_CYCLE_NS,
                mask: ALL_QUEUES_OPEN,
            }],
        }
    }

    /// Gate mask at local time `t` and the local time of the next entry boundary.
    pub fn state_at(&self, t: i64) -> (u8, i64) {
        let cycle = self.cycle_ns as i64;
        let pos = t.rem_euclid(cycle);
        let idx = self
            .entries
            .partition_point(|e| e.offset_ns as i64 <= pos)
            .saturating_sub(1);
        let e = &self.entries[idx];
        let end = (e.offset_ns + e.duration_ns) as i64;
        (e.mask, t + (end - pos))
    }

    /// Structural invariants: entries tile the cycle in increasing order.
    pub fn is_well_formed(&self) -> bool {
        let mut at = 0;
        for e in &self.entries {
            if e.offset_ns != at || e.duration_ns == 0 {
                return false;
            }
            at += e.duration_ns;
        }
        at == self.cycle_ns && !self.entries.is_empty()
    }
}

/// Closed-gate intervals of one queue, with prefix sums for interval queries.
#[derive(Debug, Clone)]
pub struct GateTimeline {
    cycle: Nanos,
    /// Merged [start, end) intervals within one cycle.
    closed: Vec<(Nanos, Nanos)>,
    /// prefix[i] = closed time before closed[i].0.
    prefix: Vec<Nanos>,
    total: Nanos,
}

impl GateTimeline {
    pub fn new(gcl: &GateControlList, queue: u8) -> Self {
        let mut closed: Vec<(Nanos, Nanos)> = Vec::new();
        for e in &gcl.entries {
            if e.mask & (1 << queue) == 0 {
                let end = e.offset_ns + e.duration_ns;
                match closed.last_mut() {
                    Some(last) if last.1 == e.offset_ns => last.1 = end,
                    _ => closed.push((e.offset_ns, end)),
                }
            }
        }
        let mut prefix = Vec::with_capacity(closed.len());
        let mut total = 0;
        for &(s, e) in &closed {
            prefix.push(total);
            total += e - s;
        }
        GateTimeline {
            cycle: gcl.cycle_ns,
            closed,
            prefix,
            total,
        }
    }

    /// Closed time in [0, pos) for pos within one cycle.
    fn closed_before(&self, pos: Nanos) -> Nanos {
        let i = self.closed.partition_point(|&(s, _)| s < pos);
        if i == 0 {
            return 0;
        }
        let (s, e) = self.closed[i - 1];
        self.prefix[i - 1] + (pos.min(e) - s)
    }

    /// Closed time in the local interval [a, b).
    pub fn closed_between(&self, a: i64, b: i64) -> Nanos {
        if b <= a || self.total == 0 {
            return 0;
        }
        let upto = |t: i64| -> i128 {
            let c = self.cycle as i64;
            let k = t.div_euclid(c) as i128;
            k * self.total as i128 + self.closed_before(t.rem_euclid(c) as Nanos) as i128
        };
        (upto(b) - upto(a)) as Nanos
    }

    pub fn open_between(&self, a: i64, b: i64) -> Nanos {
        if b <= a {
            return 0;
        }
        (b - a) as Nanos - self.closed_between(a, b)
    }

    /// Largest closed time in any interval of length `len`.
    pub fn max_closed(&self, len: Nanos) -> Nanos {
        if self.total == 0 {
            return 0;
        }
        let full = len / self.cycle;
        let rest = len % self.cycle;
        let mut best = 0;
        if rest > 0 {
            // Extremes occur with a window edge on a closed-interval edge.
            for &(s, e) in &self.closed {
                for start in [s as i64, e as i64 - rest as i64] {
                    best = best.max(self.closed_between(start, start + rest as i64));
                }
            }
        }
        full * self.total + best
    }

    pub fn closed_per_cycle(&self) -> Nanos {
        self.total
    }

    pub fn cycle(&self) -> Nanos {
        self.cycle
    }
}

/// Timing of one flow member through its scheduled windows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSchedule {
    pub flow: String,
    pub member: usize,
    pub period_ns: Nanos,
    /// Delay from release to the first window.
    pub shift_ns: Nanos,
    /// Window opening per hop, in the local time of the hop's node.
    pub hop_starts_ns: Vec<Nanos>,
    pub windows_ns: Vec<Nanos>,
}

#[derive(Debug, Clone, Default)]
pub struct GclSynthesis {
    pub gcls: BTreeMap<usize, GateControlList>,
    pub schedules: Vec<FlowSchedule>,
    pub failures: Vec<(String, TsnError)>,
}

#[derive(Debug, Clone, Copy)]
struct Reservation {
    start: Nanos,
    len: Nanos,
    period: Nanos,
}

#[derive(Debug, Clone, Copy)]
struct Window {
    start: Nanos,
    len: Nanos,
    guard: Nanos,
    queue: u8,
    period: Nanos,
}

#[derive(Debug, Clone, Default)]
struct PortPlan {
    cycle: Nanos,
    occupancy: Vec<Reservation>,
    /// Presence intervals per queue.
    presence: BTreeMap<u8, Vec<Reservation>>,
    windows: Vec<Window>,
}

enum Clash {
    Clear,
    Shift(Nanos),
    Never,
}

/// Overlap of two periodic intervals, and the forward shift of `b` that clears it.
fn clash(a: &Reservation, b_start: i128, b_len: Nanos, b_period: Nanos) -> Clash {
    let g = a.period.gcd(&b_period) as i128;
    let (al, bl) = (a.len as i128, b_len as i128);
    if al + bl > g {
        return Clash::Never;
    }
    let delta = (b_start - a.start as i128).rem_euclid(g);
    if delta < al {
        Clash::Shift((al - delta) as Nanos)
    } else if delta > g - bl {
        Clash::Shift((g - delta + al) as Nanos)
    } else {
        Clash::Clear
    }
}

/// Per-hop timing constants of one member path.
struct Hop {
    port: usize,
    window: Nanos,
    guard: Nanos,
    first_frame: Nanos,
    propagation: Nanos,
    /// Processing delay at the node owning this hop's egress port.
    processing: Nanos,
}

fn hops(net: &Network, flow: &TsnFlow, ports: &[usize]) -> Vec<Hop> {
    ports
        .iter()
        .map(|&p| {
            let info = &net.ports[p];
            let link = &net.links[info.link];
            Hop {
                port: p,
                window: net.message_tx_ns(info.link, flow.data_size, true),
                guard: net.max_frame_tx_ns(info.link),
                first_frame: net.first_fragment_tx_ns(info.link, flow.data_size, true),
                propagation: link.propagation_ns,
                processing: net.nodes[info.node].processing_ns,
            }
        })
        .collect()
}

/// Window starts for shift 0: the chain of no-wait hop offsets.
pub(crate) fn chain_starts(net: &Network, flow: &TsnFlow, ports: &[usize], eps: Nanos) -> Vec<Nanos> {
    let hs = hops(net, flow, ports);
    let mut out = Vec::with_capacity(hs.len());
    let mut s = flow.offset_ns % flow.interval_ns();
    for (i, h) in hs.iter().enumerate() {
        if i > 0 {
            let prev = &hs[i - 1];
            s += prev.window + prev.propagation + h.processing + 2 * eps;
        }
        out.push(s);
    }
    out
}

fn schedule_member(
    net: &Network,
    flow: &TsnFlow,
    member: usize,
    ports: &[usize],
    plans: &mut BTreeMap<usize, PortPlan>,
    eps: Nanos,
) -> Result<FlowSchedule, TsnError> {
    let period = flow.interval_ns();
    let infeasible = |port: usize, reason: String| TsnError::InfeasibleSchedule {
        flow: flow.key.clone(),
        port: net.port_label(port),
        reason,
    };
    let hs = hops(net, flow, ports);
    for h in &hs {
        if !net.ports[h.port].tsn_capable {
            return Err(infeasible(h.port, "port is not TSN-capable".into()));
        }
        let cycle = plans.get(&h.port).map_or(period, |p| if p.cycle == 0 { period } else { p.cycle.lcm(&period) });
        if cycle > HYPERPERIOD_CAP_NS {
            return Err(infeasible(
                h.port,
                format!("hyperperiod {cycle} ns exceeds the 10 s cap; harmonize periods"),
            ));
        }
        if h.guard + h.window > period {
            return Err(infeasible(h.port, "window plus guard band exceeds the period".into()));
        }
    }
    let base = chain_starts(net, flow, ports, eps);
    let queue = flow.priority;

    // Presence of the message in the hop's queue, relative to the window start.
    let presence = |i: usize, starts: &[i128]| -> (i128, Nanos) {
        let h = &hs[i];
        if i == 0 {
            if flow.period_ns.is_none() {
                return (starts[0] - period as i128 + 1, period);
            }
            let release = (flow.offset_ns % period) as i128;
            return (release, (starts[0] - release) as Nanos + h.window);
        }
        let prev = &hs[i - 1];
        let earliest =
            starts[i - 1] + (prev.first_frame + prev.propagation + h.processing) as i128 - 2 * eps as i128;
        (earliest, (starts[i] - earliest) as Nanos + h.window)
    };

    let mut shift: Nanos = 0;
    let mut last_port = hs.first().map_or(0, |h| h.port);
    'search: while shift < period {
        let starts: Vec<i128> = base.iter().map(|&b| (b + shift) as i128).collect();
        for (i, h) in hs.iter().enumerate() {
            let Some(plan) = plans.get(&h.port) else { continue };
            let occ_start = starts[i] - h.guard as i128;
            let occ_len = h.guard + h.window;
            let (pres_start, pres_len) = presence(i, &starts);
            let checks = plan
                .occupancy
                .iter()
                .map(|r| clash(r, occ_start, occ_len, period))
                .chain(
                    plan.presence
                        .get(&queue)
                        .into_iter()
                        .flatten()
                        .map(|r| clash(r, pres_start, pres_len, period)),
                );
            for c in checks {
                match c {
                    Clash::Clear => {}
                    Clash::Shift(n) => {
                        last_port = h.port;
                        shift += n;
                        continue 'search;
                    }
                    Clash::Never => {
                        return Err(infeasible(h.port, "reservations can never be separated".into()));
                    }
                }
            }
        }
        // Commit.
        for (i, h) in hs.iter().enumerate() {
            let plan = plans.entry(h.port).or_default();
            plan.cycle = if plan.cycle == 0 { period } else { plan.cycle.lcm(&period) };
            let occ_start = (starts[i] - h.guard as i128).rem_euclid(period as i128) as Nanos;
            plan.occupancy.push(Reservation {
                start: occ_start,
                len: h.guard + h.window,
                period,
            });
            let (ps, pl) = presence(i, &starts);
            plan.presence.entry(queue).or_default().push(Reservation {
                start: ps.rem_euclid(period as i128) as Nanos,
                len: pl,
                period,
            });
            plan.windows.push(Window {
                start: (starts[i] as Nanos) % period,
                len: h.window,
                guard: h.guard,
                queue,
                period,
            });
        }
        return Ok(FlowSchedule {
            flow: flow.key.clone(),
            member,
            period_ns: period,
            shift_ns: shift,
            hop_starts_ns: starts.iter().map(|&s| s as Nanos).collect(),
            windows_ns: hs.iter().map(|h| h.window).collect(),
        });
    }
    Err(infeasible(last_port, "first-fit found no free offset within the period".into()))
}

fn build_gcl(plan: &PortPlan) -> GateControlList {
    let cycle = plan.cycle;
    let scheduled: u8 = plan.windows.iter().fold(0, |m, w| m | (1 << w.queue));
    let residual = ALL_QUEUES_OPEN & !scheduled;
    let mut closed: Vec<(Nanos, Nanos, u8)> = Vec::new();
    let mut push = |start: i128, len: Nanos, mask: u8| {
        if len == 0 {
            return;
        }
        let s = start.rem_euclid(cycle as i128) as Nanos;
        if s + len <= cycle {
            closed.push((s, s + len, mask));
        } else {
            closed.push((s, cycle, mask));
            closed.push((0, s + len - cycle, mask));
        }
    };
    for w in &plan.windows {
        for k in 0..cycle / w.period {
            let start = (w.start + k * w.period) as i128;
            push(start - w.guard as i128, w.guard, 0);
            push(start, w.len, 1 << w.queue);
        }
    }
    closed.sort_unstable();
    let mut entries = Vec::new();
    let mut at = 0;
    for (s, e, mask) in closed {
        debug_assert!(s >= at, "windows overlap");
        if s > at {
            entries.push(GclEntry {
                offset_ns: at,
                duration_ns: s - at,
                mask: residual,
            });
        }
        entries.push(GclEntry {
            offset_ns: s,
            duration_ns: e - s,
            mask,
        });
        at = e;
    }
    if at < cycle {
        entries.push(GclEntry {
            offset_ns: at,
            duration_ns: cycle - at,
            mask: residual,
        });
    }
    GateControlList { cycle_ns: cycle, entries }
}

fn class_rank(f: &TsnFlow) -> u8 {
    match f.class {
        super::TrafficClass::Control => 0,
        _ => 1,
    }
}

/// First-fit schedule for CONTROL and SERVICE flows. A flow that cannot be
/// placed is reported and leaves no reservations behind.
pub fn synthesize_gcl(net: &Network, flows: &[&TsnFlow], routes: &[FlowRoute], eps: Nanos) -> GclSynthesis {
    let mut order: Vec<&TsnFlow> = flows.iter().copied().filter(|f| f.class.is_scheduled()).collect();
    order.sort_by(|a, b| {
        (class_rank(a), a.interval_ns(), &a.key).cmp(&(class_rank(b), b.interval_ns(), &b.key))
    });
    let mut plans: BTreeMap<usize, PortPlan> = BTreeMap::new();
    let mut out = GclSynthesis::default();
    for flow in order {
        let Some(route) = routes.iter().find(|r| r.flow == flow.key) else {
            out.failures.push((flow.key.clone(), TsnError::UnscheduledFlow { flow: flow.key.clone() }));
            continue;
        };
        let mut trial = plans.clone();
        let mut schedules = Vec::new();
        let mut failure = None;
        for (m, path) in route.paths.iter().enumerate() {
            let ports = route.path_ports(net, path).unwrap_or_default();
            match schedule_member(net, flow, m, &ports, &mut trial, eps) {
                Ok(s) => schedules.push(s),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        match failure {
            Some(e) => out.failures.push((flow.key.clone(), e)),
            None => {
                plans = trial;
                out.schedules.extend(schedules);
            }
        }
    }
    for (port, plan) in &plans {
        out.gcls.insert(*port, build_gcl(plan));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{assign_priority, TrafficClass};
    use super::*;
    use crate::descriptors::{EcuNode, Link, Medium, TopologyDescriptor};
    use proptest::prelude::*;

    fn one_hop(rate: u64) -> Network {
        let e = |id: &str| EcuNode {
            id: id.into(),
            cpu_cores: 1,
            memory: 1,
            storage: 0,
            gpu: false,
            energy_class: 1,
            attached_devices: vec![],
        };
        Network::new(&TopologyDescriptor {
            ecus: vec![e("a"), e("b")],
            links: vec![Link {
                id: "l".into(),
                endpoint_a: "a".into(),
                endpoint_b: "b".into(),
                rate,
                propagation_delay: 0.0,
                medium: Medium::Ethernet,
            }],
            ..Default::default()
        })
    }

    fn flow(key: &str, class: TrafficClass, size: u64, period_ms: u64, offset: Nanos) -> TsnFlow {
        TsnFlow {
            key: key.into(),
            class,
            priority: assign_priority(class),
            data_size: size,
            period_ns: Some(period_ms * NS_PER_MS),
            offset_ns: offset,
            max_latency_ns: None,
            jitter_ns: None,
            reliability: false,
            delivery: false,
            talker: "a".into(),
            listener: "b".into(),
        }
    }

    fn route(key: &str) -> FlowRoute {
        FlowRoute {
            flow: key.into(),
            source: "a".into(),
            destination: "b".into(),
            paths: vec![vec!["l".into()]],
        }
    }

    fn windows(gcl: &GateControlList, queue: u8) -> Vec<&GclEntry> {
        gcl.entries.iter().filter(|e| e.mask == 1 << queue).collect()
    }

    #[test]
    fn single_flow_window_size() {
        let net = one_hop(100_000_000);
        let f = flow("s/f", TrafficClass::Service, 100, 100, 0);
        let out = synthesize_gcl(&net, &[&f], &[route("s/f")], 0);
        assert!(out.failures.is_empty());
        let gcl = &out.gcls[&net.port_by_ids("a", "l").unwrap()];
        assert!(gcl.is_well_formed());
        assert_eq!(gcl.cycle_ns, 100 * NS_PER_MS);
        let w = windows(gcl, 3);
        assert_eq!(w.len(), 1);
        // 100 B + 42 B tagged overhead at 100 Mbit/s.
        assert_eq!(w[0].duration_ns, 11_360);
        assert!(w[0].duration_ns >= 8_000);
        // Guard band of one full tagged frame, all gates closed.
        let guard: Vec<_> = gcl.entries.iter().filter(|e| e.mask == 0).collect();
        assert_eq!(guard.iter().map(|e| e.duration_ns).sum::<u64>(), 1542 * 80);
        assert_eq!(out.schedules[0].shift_ns, 0);
    }

    #[test]
    fn hyperperiod_of_two_and_five_ms() {
        let net = one_hop(1_000_000_000);
        let a = flow("s/a", TrafficClass::Control, 100, 2, 0);
        let b = flow("s/b", TrafficClass::Control, 100, 5, 200_000);
        let out = synthesize_gcl(&net, &[&a, &b], &[route("s/a"), route("s/b")], 0);
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        let gcl = &out.gcls[&net.port_by_ids("a", "l").unwrap()];
        assert_eq!(gcl.cycle_ns, 10 * NS_PER_MS);
        assert_eq!(windows(gcl, 7).len(), 7);
        assert!(gcl.is_well_formed());
    }

    #[test]
    fn hyperperiod_cap() {
        let net = one_hop(1_000_000_000);
        let a = flow("s/a", TrafficClass::Control, 100, 7001, 0);
        let b = flow("s/b", TrafficClass::Control, 100, 7919, 0);
        let out = synthesize_gcl(&net, &[&a, &b], &[route("s/a"), route("s/b")], 0);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].1.code(), "INFEASIBLE_SCHEDULE");
    }

    #[test]
    fn overfull_port_is_infeasible() {
        let net = one_hop(10_000_000);
        // Each window plus guard takes ~2.5 ms of a 4 ms period.
        let a = flow("s/a", TrafficClass::Control, 1500, 4, 0);
        let b = flow("s/b", TrafficClass::Service, 1500, 4, 0);
        let out = synthesize_gcl(&net, &[&a, &b], &[route("s/a"), route("s/b")], 0);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].0, "s/b");
        assert_eq!(out.schedules.len(), 1);
    }

    #[test]
    fn no_flows_no_gcl() {
        let net = one_hop(1_000_000_000);
        let out = synthesize_gcl(&net, &[], &[], 0);
        assert!(out.gcls.is_empty());
        let open = GateControlList::always_open();
        assert_eq!(open.entries.len(), 1);
        assert_eq!(open.entries[0].mask, 0xFF);
    }

    #[test]
    fn timeline_queries() {
        let gcl = GateControlList {
            cycle_ns: 100,
            entries: vec![
                GclEntry { offset_ns: 0, duration_ns: 10, mask: 0xFF },
                GclEntry { offset_ns: 10, duration_ns: 20, mask: 0x80 },
                GclEntry { offset_ns: 30, duration_ns: 60, mask: 0xFF },
                GclEntry { offset_ns: 90, duration_ns: 10, mask: 0 },
            ],
        };
        let t = GateTimeline::new(&gcl, 0);
        assert_eq!(t.closed_per_cycle(), 30);
        assert_eq!(t.closed_between(0, 100), 30);
        assert_eq!(t.closed_between(-10, 10), 10);
        assert_eq!(t.closed_between(95, 125), 5 + 15);
        assert_eq!(t.max_closed(20), 20);
        assert_eq!(t.max_closed(40), 30);
        assert_eq!(t.max_closed(250), 2 * 30 + 30);
        assert_eq!(gcl.state_at(15), (0x80, 30));
        assert_eq!(gcl.state_at(-5), (0, 0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn windows_never_overlap(specs in proptest::collection::vec((1u64..4, 50u64..1500, 0u64..5_000_000), 1..6)) {
            let net = one_hop(1_000_000_000);
            let periods = [1u64, 2, 4, 5];
            let flows: Vec<TsnFlow> = specs
                .iter()
                .enumerate()
                .map(|(i, &(p, size, off))| {
                    let class = if i % 2 == 0 { TrafficClass::Control } else { TrafficClass::Service };
                    flow(&format!("s/f{i}"), class, size, periods[p as usize], off)
                })
                .collect();
            let refs: Vec<&TsnFlow> = flows.iter().collect();
            let routes: Vec<FlowRoute> = flows.iter().map(|f| route(&f.key)).collect();
            let out = synthesize_gcl(&net, &refs, &routes, 500);
            for gcl in out.gcls.values() {
                prop_assert!(gcl.is_well_formed());
            }
            // Sweep all window instances of every schedule over the hyperperiod.
            let port = net.port_by_ids("a", "l").unwrap();
            if let Some(gcl) = out.gcls.get(&port) {
                let mut intervals = Vec::new();
                for s in &out.schedules {
                    let guard = net.max_frame_tx_ns(0);
                    for k in 0..gcl.cycle_ns / s.period_ns {
                        let start = (s.hop_starts_ns[0] + k * s.period_ns) % gcl.cycle_ns;
                        intervals.push((start as i64 - guard as i64, start as i64 + s.windows_ns[0] as i64));
                    }
                }
                intervals.sort();
                let c = gcl.cycle_ns as i64;
                for pair in intervals.windows(2) {
                    prop_assert!(pair[0].1 <= pair[1].0);
                }
                if let (Some(first), Some(last)) = (intervals.first(), intervals.last()) {
                    prop_assert!(last.1 <= first.0 + c);
                }
            }
        }

        #[test]
        fn shifting_phase_by_a_period_is_identity(off in 0u64..10_000_000, size in 50u64..1500) {
            let net = one_hop(100_000_000);
            let a = flow("s/a", TrafficClass::Control, size, 10, off);
            let mut b = a.clone();
            b.offset_ns += 10 * NS_PER_MS;
            let x = synthesize_gcl(&net, &[&a], &[route("s/a")], 0);
            let y = synthesize_gcl(&net, &[&b], &[route("s/a")], 0);
            prop_assert_eq!(x.gcls, y.gcls);
            prop_assert_eq!(x.schedules, y.schedules);
        }
    }
}
