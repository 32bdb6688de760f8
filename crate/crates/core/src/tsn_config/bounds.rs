//! Worst-case end-to-end latency bounds.
//!
//! Scheduled flows: the talker waits at most its shift (or one period when
//! aperiodic), every later hop at most 4ε, because window starts are chained
//! with a 2ε margin and clock offsets lie within ±ε.
//!
//! Priority-only flows: per hop, the level-q busy period L is the smallest
//! fixed point of
//!
//!   L = closed_q(L) + Σ_k ⌈(L + J_k) / T_k⌉ C_k + extra(L)
//!
//! where closed_q(L) is the largest gate-closed time for queue q in any
//! interval of length L, the sum runs over unscheduled traffic of priority
//! ≥ q on the port, and extra(L) is one lower-priority frame of blocking, or
//! for a CBS queue the credit recovery after every own frame plus the
//! lower-priority frame that may start during it. A message whose last frame
//! is enqueued at a hop leaves that hop within L. Release jitter J_k at each
//! hop is iterated holistically until it stops growing.

use super::gcl::GateTimeline;
use super::{FlowFailure, TsnConfig, TsnError, TsnFlow};
use crate::network::Network;
use crate::time::{Nanos, NS_PER_S};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::rc::Rc;

/// Busy periods beyond this are treated as unbounded.
const BUSY_PERIOD_LIMIT_NS: Nanos = 10 * NS_PER_S;
const MAX_FIXPOINT_STEPS: usize = 1_000_000;
const MAX_HOLISTIC_ROUNDS: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopBound {
    pub node: String,
    pub port: String,
    pub processing_ns: Nanos,
    pub queuing_ns: Nanos,
    pub transmission_ns: Nanos,
    pub propagation_ns: Nanos,
}

impl HopBound {
    pub fn total_ns(&self) -> Nanos {
        self.processing_ns + self.queuing_ns + self.transmission_ns + self.propagation_ns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundOutcome {
    Bounded,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorstCaseBound {
    pub flow: String,
    /// Member path the bound refers to (the slower one for replicated flows).
    pub member: usize,
    pub outcome: BoundOutcome,
    pub per_hop: Vec<HopBound>,
    /// Sum of the per-hop components; meaningful only when bounded.
    pub total_ns: Nanos,
    /// Lower bound on latency, for jitter admission.
    pub best_case_ns: Nanos,
}

impl WorstCaseBound {
    pub fn total_ns(&self) -> Option<Nanos> {
        (self.outcome == BoundOutcome::Bounded).then_some(self.total_ns)
    }
}

struct Member<'a> {
    flow: &'a TsnFlow,
    index: usize,
    ports: Vec<usize>,
}

struct Ctx<'a> {
    net: &'a Network,
    config: &'a TsnConfig,
    timelines: BTreeMap<(usize, u8), Option<Rc<GateTimeline>>>,
}

impl Ctx<'_> {
    fn timeline(&mut self, port: usize, queue: u8) -> Option<Rc<GateTimeline>> {
        let net = self.net;
        let config = self.config;
        self.timelines
            .entry((port, queue))
            .or_insert_with(|| {
                let info = &net.ports[port];
                config
                    .port(&net.nodes[info.node].id, &net.links[info.link].id)
                    .and_then(|c| c.gcl.as_ref())
                    .map(|g| Rc::new(GateTimeline::new(g, queue)))
            })
            .clone()
    }

    fn idle_slope(&self, port: usize, queue: u8) -> Option<u64> {
        let info = &self.net.ports[port];
        self.config
            .port(&self.net.nodes[info.node].id, &self.net.links[info.link].id)?
            .cbs
            .iter()
            .find(|c| c.queue == queue)
            .map(|c| c.idle_slope)
    }

    fn hop(&self, port: usize, processing: Nanos, queuing: Nanos, transmission: Nanos) -> HopBound {
        let info = &self.net.ports[port];
        HopBound {
            node: self.net.nodes[info.node].id.clone(),
            port: self.net.links[info.link].id.clone(),
            processing_ns: processing,
            queuing_ns: queuing,
            transmission_ns: transmission,
            propagation_ns: self.net.links[info.link].propagation_ns,
        }
    }
}

fn scheduled_bound(ctx: &Ctx, m: &Member, eps: Nanos) -> Result<WorstCaseBound, TsnError> {
    let sched = ctx
        .config
        .schedules
        .iter()
        .find(|s| s.flow == m.flow.key && s.member == m.index)
        .ok_or_else(|| TsnError::UnscheduledFlow { flow: m.flow.key.clone() })?;
    let aperiodic = m.flow.period_ns.is_none();
    let mut per_hop = Vec::new();
    let mut best = if aperiodic { 0 } else { sched.shift_ns };
    for (h, &p) in m.ports.iter().enumerate() {
        let processing = ctx.net.nodes[ctx.net.ports[p].node].processing_ns;
        let queuing = match (h, aperiodic) {
            (0, true) => sched.period_ns,
            (0, false) => sched.shift_ns,
            _ => 4 * eps,
        };
        let hop = ctx.hop(p, processing, queuing, sched.windows_ns[h]);
        best += hop.processing_ns + hop.transmission_ns + hop.propagation_ns;
        per_hop.push(hop);
    }
    Ok(WorstCaseBound {
        flow: m.flow.key.clone(),
        member: m.index,
        outcome: BoundOutcome::Bounded,
        total_ns: per_hop.iter().map(HopBound::total_ns).sum(),
        per_hop,
        best_case_ns: best,
    })
}

/// Interference term of one unscheduled member at one port.
#[derive(Clone, Copy)]
struct Load {
    interval: Nanos,
    jitter: Option<Nanos>,
    cost: Nanos,
    priority: u8,
    largest_frame: Nanos,
    member: usize,
}

fn busy_period(ctx: &mut Ctx, members: &[Member], port: usize, queue: u8, own_cost: Nanos, loads: &[Load]) -> Option<Nanos> {
    let rate = ctx.net.links[ctx.net.ports[port].link].rate;
    let blocking = loads
        .iter()
        .filter(|l| l.priority < queue)
        .map(|l| l.largest_frame)
        .max()
        .unwrap_or(0);
    let mut heavy: Vec<Load> = Vec::new();
    for l in loads.iter().filter(|l| l.priority >= queue) {
        l.jitter?;
        heavy.push(*l);
    }
    let cbs = ctx.idle_slope(port, queue);
    // Recovery time after each own-queue frame: c (R - I) / I.
    let recovery = |c: Nanos, idle: u64| -> Nanos {
        (c as u128 * (rate.saturating_sub(idle)) as u128).div_ceil(idle as u128) as Nanos
    };
    struct Own {
        interval: Nanos,
        jitter: Nanos,
        per_message: Nanos,
    }
    let mut own = Vec::new();
    let mut max_recovery = 0;
    if let Some(idle) = cbs {
        for l in heavy.iter().filter(|l| l.priority == queue) {
            let m = &members[l.member];
            let link = ctx.net.ports[port].link;
            let tagged = m.flow.tagged();
            let mut per_message = 0;
            for size in crate::network::fragment_sizes(m.flow.data_size) {
                let bits = crate::network::frame_wire_bits(size, tagged, ctx.net.links[link].medium);
                let c = crate::time::serialization_ns(bits, rate);
                max_recovery = max_recovery.max(recovery(c, idle));
                per_message += recovery(c, idle) + blocking;
            }
            own.push(Own {
                interval: l.interval,
                jitter: l.jitter.unwrap_or(0),
                per_message,
            });
        }
    }

    let timeline = ctx.timeline(port, queue);
    let utilization: f64 = heavy.iter().map(|l| l.cost as f64 / l.interval as f64).sum::<f64>()
        + own.iter().map(|o| o.per_message as f64 / o.interval as f64).sum::<f64>()
        + timeline
            .as_ref()
            .map_or(0.0, |t| t.closed_per_cycle() as f64 / t.cycle() as f64);
    if utilization >= 1.0 {
        return None;
    }

    let initial = if cbs.is_some() { blocking + max_recovery } else { blocking };
    let mut l = own_cost.max(1);
    for _ in 0..MAX_FIXPOINT_STEPS {
        let closed = timeline.as_ref().map_or(0, |t| t.max_closed(l));
        let work: Nanos = heavy
            .iter()
            .map(|x| (l + x.jitter.unwrap_or(0)).div_ceil(x.interval) * x.cost)
            .sum();
        let extra: Nanos = own.iter().map(|o| (l + o.jitter).div_ceil(o.interval) * o.per_message).sum();
        let next = closed + work + extra + initial;
        if next > BUSY_PERIOD_LIMIT_NS {
            return None;
        }
        if next <= l {
            return Some(l);
        }
        l = next;
    }
    None
}

/// Bounds for every flow in `flows` under `config`. Flows whose scheduled
/// members lack a schedule are reported as failures.
pub fn worst_case_bounds(net: &Network, flows: &[TsnFlow], config: &TsnConfig) -> (Vec<WorstCaseBound>, Vec<FlowFailure>) {
    let eps = config.sync_error_ns;
    let mut ctx = Ctx {
        net,
        config,
        timelines: BTreeMap::new(),
    };
    let mut members: Vec<Member> = Vec::new();
    for f in flows {
        let Some(route) = config.route(&f.key) else { continue };
        for (i, path) in route.paths.iter().enumerate() {
            members.push(Member {
                flow: f,
                index: i,
                ports: route.path_ports(net, path).unwrap_or_default(),
            });
        }
    }

    // Unscheduled members and where they sit.
    let dynamic: Vec<usize> = (0..members.len()).filter(|&i| !members[i].flow.class.is_scheduled()).collect();
    let mut at_port: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for &i in &dynamic {
        for (h, &p) in members[i].ports.iter().enumerate() {
            at_port.entry(p).or_default().push((i, h));
        }
    }
    let cost = |m: &Member, p: usize| net.message_tx_ns(net.ports[p].link, m.flow.data_size, m.flow.tagged());
    let first = |m: &Member, p: usize| net.first_fragment_tx_ns(net.ports[p].link, m.flow.data_size, m.flow.tagged());
    let processing = |p: usize| net.nodes[net.ports[p].node].processing_ns;

    // Earliest first-frame and latest last-frame enqueue per hop, from release.
    let mut earliest: BTreeMap<usize, Vec<Nanos>> = BTreeMap::new();
    let mut latest: BTreeMap<usize, Vec<Option<Nanos>>> = BTreeMap::new();
    for &i in &dynamic {
        let m = &members[i];
        let mut e = vec![0; m.ports.len()];
        for h in 1..m.ports.len() {
            let p = m.ports[h - 1];
            e[h] = e[h - 1] + first(m, p) + net.links[net.ports[p].link].propagation_ns + processing(m.ports[h]);
        }
        latest.insert(i, e.iter().map(|&x| Some(x)).collect());
        earliest.insert(i, e);
    }

    let mut busy: BTreeMap<usize, Vec<Option<Nanos>>> = BTreeMap::new();
    let mut converged = false;
    for _ in 0..MAX_HOLISTIC_ROUNDS {
        busy.clear();
        for &i in &dynamic {
            let m = &members[i];
            let mut ls = Vec::with_capacity(m.ports.len());
            for (h, &p) in m.ports.iter().enumerate() {
                let loads: Vec<Load> = at_port[&p]
                    .iter()
                    .map(|&(k, hk)| {
                        let mk = &members[k];
                        Load {
                            interval: mk.flow.interval_ns(),
                            jitter: latest[&k][hk].map(|lt| lt - earliest[&k][hk]),
                            cost: cost(mk, p),
                            priority: mk.flow.priority,
                            largest_frame: first(mk, p),
                            member: k,
                        }
                    })
                    .collect();
                let l = if latest[&i][h].is_none() {
                    None
                } else {
                    busy_period(&mut ctx, &members, p, m.flow.priority, cost(m, p), &loads)
                };
                ls.push(l);
            }
            busy.insert(i, ls);
        }
        let mut changed = false;
        for &i in &dynamic {
            let m = &members[i];
            let ls = &busy[&i];
            let mut next: Vec<Option<Nanos>> = vec![Some(0); m.ports.len()];
            for h in 1..m.ports.len() {
                let p = m.ports[h - 1];
                next[h] = match (next[h - 1], ls[h - 1]) {
                    (Some(a), Some(l)) => Some(a + l + net.links[net.ports[p].link].propagation_ns + processing(m.ports[h])),
                    _ => None,
                };
            }
            if next != latest[&i] {
                changed = true;
                latest.insert(i, next);
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }

    let mut per_member: Vec<Result<WorstCaseBound, TsnError>> = Vec::with_capacity(members.len());
    for (i, m) in members.iter().enumerate() {
        if m.flow.class.is_scheduled() {
            per_member.push(scheduled_bound(&ctx, m, eps));
            continue;
        }
        let ls = &busy[&i];
        let mut per_hop = Vec::new();
        let mut bounded = converged;
        let mut best = 0;
        for (h, &p) in m.ports.iter().enumerate() {
            let c = cost(m, p);
            let l = ls[h];
            bounded &= l.is_some();
            let l = l.unwrap_or(c);
            let hop = ctx.hop(p, processing(p), l.saturating_sub(c), c);
            best += hop.processing_ns + hop.propagation_ns;
            best += if h == 0 { c } else { last_frame(net, m, p) };
            per_hop.push(hop);
        }
        per_member.push(Ok(WorstCaseBound {
            flow: m.flow.key.clone(),
            member: m.index,
            outcome: if bounded { BoundOutcome::Bounded } else { BoundOutcome::Unbounded },
            total_ns: per_hop.iter().map(HopBound::total_ns).sum(),
            per_hop,
            best_case_ns: best,
        }));
    }

    let mut bounds = Vec::new();
    let mut failures = Vec::new();
    for f in flows {
        let Some(route) = config.route(&f.key) else { continue };
        if route.paths.is_empty() {
            bounds.push(WorstCaseBound {
                flow: f.key.clone(),
                member: 0,
                outcome: BoundOutcome::Bounded,
                per_hop: Vec::new(),
                total_ns: 0,
                best_case_ns: 0,
            });
            continue;
        }
        let mut worst: Option<WorstCaseBound> = None;
        let mut best_case = Nanos::MAX;
        let mut error = None;
        for (m, r) in members.iter().zip(&per_member) {
            if m.flow.key != f.key {
                continue;
            }
            match r {
                Err(e) => error = Some(e.clone()),
                Ok(b) => {
                    best_case = best_case.min(b.best_case_ns);
                    let worse = match &worst {
                        None => true,
                        Some(w) => match (w.total_ns(), b.total_ns()) {
                            (Some(a), Some(c)) => c > a,
                            (Some(_), None) => true,
                            _ => false,
                        },
                    };
                    if worse {
                        worst = Some(b.clone());
                    }
                }
            }
        }
        match (error, worst) {
            (Some(e), _) => failures.push(FlowFailure::new(&f.key, &e)),
            (None, Some(mut w)) => {
                w.best_case_ns = best_case;
                bounds.push(w);
            }
            (None, None) => {}
        }
    }
    (bounds, failures)
}

fn last_frame(net: &Network, m: &Member, p: usize) -> Nanos {
    let sizes = crate::network::fragment_sizes(m.flow.data_size);
    let link = &net.links[net.ports[p].link];
    let bits = crate::network::frame_wire_bits(*sizes.last().expect("non-empty"), m.flow.tagged(), link.medium);
    crate::time::serialization_ns(bits, link.rate)
}

/// Bound of one flow within the whole configured flow set.
pub fn worst_case_bound(net: &Network, flows: &[TsnFlow], config: &TsnConfig, flow: &str) -> Result<WorstCaseBound, TsnError> {
    let (bounds, _) = worst_case_bounds(net, flows, config);
    if let Some(b) = bounds.into_iter().find(|b| b.flow == flow) {
        return Ok(b);
    }
    Err(TsnError::UnscheduledFlow { flow: flow.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::{EcuNode, Link, Medium, SwitchNode, TopologyDescriptor};
    use crate::tsn_config::{assign_priority, configure, route, TrafficClass};

    fn ecu(id: &str) -> EcuNode {
        EcuNode {
            id: id.into(),
            cpu_cores: 1,
            memory: 1,
            storage: 1,
            gpu: false,
            energy_class: 1,
            attached_devices: vec![],
        }
    }

    fn line(switches: usize, rate: u64) -> TopologyDescriptor {
        let mut t = TopologyDescriptor {
            ecus: vec![ecu("a"), ecu("b")],
            ..Default::default()
        };
        let mut prev = "a".to_string();
        for i in 1..=switches + 1 {
            let next = if i == switches + 1 { "b".to_string() } else { format!("sw{i}") };
            if i <= switches {
                t.switches.push(SwitchNode {
                    id: next.clone(),
                    ports: vec![],
                    processing_delay: 5.0,
                });
            }
            t.links.push(Link {
                id: format!("l{i}"),
                endpoint_a: prev.clone(),
                endpoint_b: next.clone(),
                rate,
                propagation_delay: 0.05,
                medium: Medium::Ethernet,
            });
            prev = next;
        }
        t
    }

    fn flow(class: TrafficClass, size: u64, period: u64) -> TsnFlow {
        TsnFlow {
            key: "s/f".into(),
            class,
            priority: assign_priority(class),
            data_size: size,
            period_ns: Some(period),
            offset_ns: 0,
            max_latency_ns: None,
            jitter_ns: None,
            reliability: false,
            delivery: false,
            talker: "a".into(),
            listener: "b".into(),
        }
    }

    fn bound(topo: &TopologyDescriptor, f: TsnFlow, eps: Nanos) -> WorstCaseBound {
        let net = Network::new(topo);
        let flows = [f];
        let routes = vec![route(&net, &flows[0]).unwrap()];
        let config = configure(&net, &flows, &routes, eps);
        assert!(config.failures.is_empty(), "{:?}", config.failures);
        worst_case_bound(&net, &flows, &config, "s/f").unwrap()
    }

    #[test]
    fn full_frame_at_100_mbit_transmits_in_123_us() {
        let b = bound(&line(0, 100_000_000), flow(TrafficClass::BestEffort, 1500, 10_000_000), 0);
        // 1500 * 8 bits of payload take 120 µs at 100 Mbit/s; 38 bytes of
        // untagged overhead add 3.04 µs.
        assert_eq!(b.per_hop.len(), 1);
        assert_eq!(b.per_hop[0].transmission_ns, 120_000 + 3_040);
        assert_eq!(b.per_hop[0].propagation_ns, 50);
        assert_eq!(b.per_hop[0].queuing_ns, 0);
        assert_eq!(b.total_ns(), Some(123_090));
    }

    #[test]
    fn aligned_schedule_has_no_queuing_after_the_talker() {
        let b = bound(&line(3, 1_000_000_000), flow(TrafficClass::Control, 100, 1_000_000), 0);
        assert_eq!(b.per_hop.len(), 4);
        assert!(b.per_hop.iter().all(|h| h.queuing_ns == 0), "{:?}", b.per_hop);
        // 4 hops of a 1136-bit tagged frame at 1 Gbit/s, 4 x 50 ns of cable
        // and 3 switches of 5 µs.
        assert_eq!(b.total_ns(), Some(4 * 1_136 + 4 * 50 + 3 * 5_000));
        assert_eq!(b.best_case_ns, 4 * 1_136 + 4 * 50 + 3 * 5_000);
    }

    #[test]
    fn clock_error_adds_four_epsilon_per_later_hop() {
        let eps = 1_000;
        let tight = bound(&line(2, 1_000_000_000), flow(TrafficClass::Control, 100, 1_000_000), 0);
        let loose = bound(&line(2, 1_000_000_000), flow(TrafficClass::Control, 100, 1_000_000), eps);
        assert_eq!(loose.per_hop[0].queuing_ns, 0);
        assert!(loose.per_hop[1..].iter().all(|h| h.queuing_ns == 4 * eps));
        assert_eq!(loose.total_ns().unwrap() - tight.total_ns().unwrap(), 2 * 4 * eps);
    }
}
