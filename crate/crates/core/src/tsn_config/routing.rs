//! Explicit routes: hop-count shortest paths with lexicographic link-id
//! tie-breaking, and node/link-disjoint pairs for replicated flows.

use super::{TrafficClass, TsnError, TsnFlow};
use crate::descriptors::{Medium, CAN_MAX_PAYLOAD};
use crate::network::Network;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRoute {
    pub flow: String,
    pub source: String,
    pub destination: String,
    /// Link ids from source to destination. Empty for node-local flows,
    /// two entries for replicated flows.
    pub paths: Vec<Vec<String>>,
}

impl FlowRoute {
    pub fn path_links(&self, net: &Network, path: &[String]) -> Option<Vec<usize>> {
        path.iter().map(|l| net.link(l)).collect()
    }

    /// Egress ports along `path`.
    pub fn path_ports(&self, net: &Network, path: &[String]) -> Option<Vec<usize>> {
        let links = self.path_links(net, path)?;
        net.path_ports(net.node(&self.source)?, &links)
    }
}

fn compare_paths(net: &Network, a: &[usize], b: &[usize]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        let ia = a.iter().map(|&l| net.links[l].id.as_str());
        let ib = b.iter().map(|&l| net.links[l].id.as_str());
        ia.cmp(ib)
    })
}

/// Shortest path by hop count from `src` to `dst` over allowed links,
/// avoiding `blocked_nodes` as intermediate hops. Among equal-length paths the
/// one with the lexicographically smallest link-id sequence wins.
pub fn shortest_path(
    net: &Network,
    src: usize,
    dst: usize,
    link_ok: &dyn Fn(usize) -> bool,
    blocked_nodes: &BTreeSet<usize>,
) -> Option<Vec<usize>> {
    if src == dst {
        return Some(Vec::new());
    }
    // Distances to dst, then walk greedily from src.
    let mut dist = vec![usize::MAX; net.nodes.len()];
    dist[dst] = 0;
    let mut queue = VecDeque::from([dst]);
    while let Some(v) = queue.pop_front() {
        if v != dst && blocked_nodes.contains(&v) {
            continue;
        }
        for &(l, w) in net.neighbors(v) {
            if link_ok(l) && dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    if dist[src] == usize::MAX {
        return None;
    }
    let mut path = Vec::new();
    let mut at = src;
    while at != dst {
        let &(l, w) = net
            .neighbors(at)
            .iter()
            .find(|&&(l, w)| {
                link_ok(l) && dist[w] + 1 == dist[at] && (w == dst || !blocked_nodes.contains(&w))
            })
            .expect("distance labels are consistent");
        path.push(l);
        at = w;
    }
    Some(path)
}

struct Arc {
    to: usize,
    cap: i32,
    cost: i64,
    link: Option<usize>,
}

/// Two node- and link-disjoint paths of minimum total hop count, found with
/// successive shortest augmenting paths on the node-split graph.
pub fn disjoint_pair(net: &Network, src: usize, dst: usize, link_ok: &dyn Fn(usize) -> bool) -> Option<(Vec<usize>, Vec<usize>)> {
    if src == dst {
        return None;
    }
    let n = net.nodes.len() * 2;
    let mut arcs: Vec<Arc> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let add = |arcs: &mut Vec<Arc>, adj: &mut Vec<Vec<usize>>, from: usize, to: usize, cap: i32, cost: i64, link: Option<usize>| {
        adj[from].push(arcs.len());
        arcs.push(Arc { to, cap, cost, link });
        adj[to].push(arcs.len());
        arcs.push(Arc { to: from, cap: 0, cost: -cost, link });
    };
    for v in 0..net.nodes.len() {
        let cap = if v == src || v == dst { 2 } else { 1 };
        add(&mut arcs, &mut adj, 2 * v, 2 * v + 1, cap, 0, None);
    }
    for (li, l) in net.links.iter().enumerate() {
        if !link_ok(li) {
            continue;
        }
        add(&mut arcs, &mut adj, 2 * l.a + 1, 2 * l.b, 1, 1, Some(li));
        add(&mut arcs, &mut adj, 2 * l.b + 1, 2 * l.a, 1, 1, Some(li));
    }
    let (s, t) = (2 * src + 1, 2 * dst);
    for _ in 0..2 {
        // Bellman-Ford over the residual graph.
        let mut dist = vec![i64::MAX; n];
        let mut via = vec![usize::MAX; n];
        dist[s] = 0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u] == i64::MAX {
                    continue;
                }
                for &a in &adj[u] {
                    let arc = &arcs[a];
                    if arc.cap > 0 && dist[u] + arc.cost < dist[arc.to] {
                        dist[arc.to] = dist[u] + arc.cost;
                        via[arc.to] = a;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[t] == i64::MAX {
            return None;
        }
        let mut v = t;
        while v != s {
            let a = via[v];
            arcs[a].cap -= 1;
            arcs[a ^ 1].cap += 1;
            v = arcs[a ^ 1].to;
        }
    }
    // Forward arcs carrying flow have even index and a saturated capacity.
    let mut used: Vec<(usize, usize, usize)> = Vec::new();
    for (i, arc) in arcs.iter().enumerate().step_by(2) {
        if let Some(l) = arc.link {
            if arc.cap == 0 {
                let from = arcs[i + 1].to / 2;
                used.push((from, arc.to / 2, l));
            }
        }
    }
    // A link used in both directions cancels out.
    let cancelled: BTreeSet<usize> = used
        .iter()
        .filter(|(f, t, l)| used.iter().any(|(f2, t2, l2)| l2 == l && f2 == t && t2 == f))
        .map(|&(_, _, l)| l)
        .collect();
    used.retain(|(_, _, l)| !cancelled.contains(l));

    let mut paths = Vec::new();
    for _ in 0..2 {
        let mut path = Vec::new();
        let mut at = src;
        while at != dst {
            let pos = used.iter().position(|&(f, _, _)| f == at)?;
            let (_, to, l) = used.remove(pos);
            path.push(l);
            at = to;
        }
        paths.push(path);
    }
    paths.sort_by(|a, b| compare_paths(net, a, b));
    let second = paths.pop()?;
    let first = paths.pop()?;
    Some((first, second))
}

/// Links usable by `flow`: CAN buses only carry small, unscheduled messages.
fn link_filter<'a>(net: &'a Network, flow: &TsnFlow) -> impl Fn(usize) -> bool + 'a {
    let can_ok = flow.data_size <= CAN_MAX_PAYLOAD && !matches!(flow.class, TrafficClass::Control | TrafficClass::Service);
    move |l| net.links[l].medium == Medium::Ethernet || can_ok
}

/// Routes `flow` between its placed talker and listener ECUs.
pub fn route(net: &Network, flow: &TsnFlow) -> Result<FlowRoute, TsnError> {
    let no_path = || TsnError::NoPath {
        flow: flow.key.clone(),
        from: flow.talker.clone(),
        to: flow.listener.clone(),
    };
    let src = net.node(&flow.talker).ok_or_else(no_path)?;
    let dst = net.node(&flow.listener).ok_or_else(no_path)?;
    let names = |p: &[usize]| p.iter().map(|&l| net.links[l].id.clone()).collect::<Vec<_>>();
    let mut out = FlowRoute {
        flow: flow.key.clone(),
        source: flow.talker.clone(),
        destination: flow.listener.clone(),
        paths: Vec::new(),
    };
    if src == dst {
        return Ok(out);
    }
    let ok = link_filter(net, flow);
    let primary = shortest_path(net, src, dst, &ok, &BTreeSet::new()).ok_or_else(no_path)?;
    if !flow.reliability {
        out.paths.push(names(&primary));
        return Ok(out);
    }

    let used_links: BTreeSet<usize> = primary.iter().copied().collect();
    let mut inner = BTreeSet::new();
    let mut at = src;
    for &l in &primary {
        at = net.links[l].other(at);
        if at != dst {
            inner.insert(at);
        }
    }
    let avoid = |l: usize| ok(l) && !used_links.contains(&l);
    let pair = match shortest_path(net, src, dst, &avoid, &inner) {
        Some(second) => Some((primary, second)),
        // The shortest path can block every disjoint partner; fall back to
        // the jointly shortest pair.
        None => disjoint_pair(net, src, dst, &ok),
    };
    let (a, b) = pair.ok_or_else(|| TsnError::NoDisjointPath {
        flow: flow.key.clone(),
        from: flow.talker.clone(),
        to: flow.listener.clone(),
    })?;
    out.paths.push(names(&a));
    out.paths.push(names(&b));
    Ok(out)
}
