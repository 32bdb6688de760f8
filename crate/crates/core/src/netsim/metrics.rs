//! Metrics derived from a trace alone.
//!
//! Flow figures are message-level: a message counts as delivered once every
//! fragment has been accepted at the listener, and its latency runs from
//! release to the last accepted fragment. A message that is neither
//! delivered nor still in flight at the end counts as dropped. Port and
//! global figures count individual frame copies.

use super::trace::{FrameOutcome, Trace};
use crate::time::{ns_to_us, Nanos, NS_PER_S};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const METRICS_SCHEMA: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub min_us: f64,
    pub mean_us: f64,
    pub max_us: f64,
    pub jitter_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterFrameStats {
    pub mean_us: f64,
    pub max_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMetrics {
    pub created: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub deadline_misses: u64,
    /// Misses over delivered messages.
    pub miss_rate: f64,
    /// Delivered over settled (created minus in flight); `None` when nothing settled.
    pub delivery_ratio: Option<f64>,
    pub latency: Option<LatencyStats>,
    pub inter_frame: Option<InterFrameStats>,
    /// Largest |inter-arrival - period| over consecutive deliveries.
    pub period_offset_max_us: Option<f64>,
    pub duplicates_discarded: u64,
    /// Delivered messages per second of simulated time.
    pub rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortMetrics {
    pub max_queue_len: u64,
    /// Time-averaged number of waiting frames.
    pub mean_queue_len: f64,
    pub throughput_bps: f64,
    pub frames_transmitted: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    pub frames_created: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight_at_end: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub duration_ms: f64,
    pub flows: BTreeMap<String, FlowMetrics>,
    /// Keyed by `node:link` of the egress port.
    pub ports: BTreeMap<String, PortMetrics>,
    pub global: GlobalMetrics,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

#[derive(Default)]
struct Message {
    created: Nanos,
    /// First acceptance per fragment.
    accepted: BTreeMap<u32, Nanos>,
    in_flight: bool,
}

pub fn compute_metrics(trace: &Trace) -> MetricsReport {
    let duration = trace.run().map_or(0, |r| r.duration_ns);
    let mut global = GlobalMetrics {
        frames_created: 0,
        delivered: 0,
        dropped: 0,
        in_flight_at_end: 0,
    };

    let mut messages: BTreeMap<&str, BTreeMap<u64, Message>> = BTreeMap::new();
    let mut discarded: BTreeMap<&str, u64> = BTreeMap::new();
    for f in trace.flows() {
        messages.entry(&f.flow).or_default();
    }
    for r in trace.frames() {
        global.frames_created += 1;
        let m = messages.entry(&r.flow).or_default().entry(r.message).or_default();
        m.created = r.created_ns;
        match r.outcome {
            FrameOutcome::Delivered => {
                global.delivered += 1;
                let at = m.accepted.entry(r.fragment).or_insert(r.at_ns);
                *at = (*at).min(r.at_ns);
            }
            FrameOutcome::Dropped => global.dropped += 1,
            FrameOutcome::Discarded => {
                global.dropped += 1;
                *discarded.entry(&r.flow).or_default() += 1;
            }
            FrameOutcome::InFlight => {
                global.in_flight_at_end += 1;
                m.in_flight = true;
            }
        }
    }

    let mut flows = BTreeMap::new();
    for meta in trace.flows() {
        let msgs = &messages[meta.flow.as_str()];
        let fragments = meta.fragments as usize;
        let mut created = 0;
        let mut dropped = 0;
        let mut in_flight = 0;
        let mut done: Vec<(Nanos, Nanos)> = Vec::new();
        for m in msgs.values() {
            created += 1;
            if m.accepted.len() == fragments {
                let at = *m.accepted.values().max().expect("non-empty");
                done.push((at, at - m.created));
            } else if m.in_flight {
                in_flight += 1;
            } else {
                dropped += 1;
            }
        }
        done.sort_unstable();
        let delivered = done.len() as u64;
        let misses = match meta.max_latency_ns {
            Some(max) => done.iter().filter(|d| d.1 > max).count() as u64,
            None => 0,
        };
        let latency = (!done.is_empty()).then(|| {
            let min = done.iter().map(|d| d.1).min().expect("non-empty");
            let max = done.iter().map(|d| d.1).max().expect("non-empty");
            let sum: u128 = done.iter().map(|d| d.1 as u128).sum();
            LatencyStats {
                min_us: ns_to_us(min),
                mean_us: sum as f64 / done.len() as f64 / 1_000.0,
                max_us: ns_to_us(max),
                jitter_us: ns_to_us(max - min),
            }
        });
        let gaps: Vec<Nanos> = done.windows(2).map(|w| w[1].0 - w[0].0).collect();
        let inter_frame = (!gaps.is_empty()).then(|| InterFrameStats {
            mean_us: gaps.iter().map(|&g| g as f64).sum::<f64>() / gaps.len() as f64 / 1_000.0,
            max_us: ns_to_us(*gaps.iter().max().expect("non-empty")),
        });
        let period_offset = match meta.period_ns {
            Some(p) if !gaps.is_empty() => gaps.iter().map(|&g| g.abs_diff(p)).max().map(ns_to_us),
            _ => None,
        };
        let settled = created - in_flight;
        flows.insert(
            meta.flow.clone(),
            FlowMetrics {
                created,
                delivered,
                dropped,
                in_flight,
                deadline_misses: misses,
                miss_rate: if delivered == 0 { 0.0 } else { misses as f64 / delivered as f64 },
                delivery_ratio: (settled > 0).then(|| delivered as f64 / settled as f64),
                latency,
                inter_frame,
                period_offset_max_us: period_offset,
                duplicates_discarded: discarded.get(meta.flow.as_str()).copied().unwrap_or(0),
                rate_hz: if duration == 0 { 0.0 } else { delivered as f64 * NS_PER_S as f64 / duration as f64 },
            },
        );
    }

    // Waiting-frame count changes per port: +1 at queue entry, -1 at transmission start.
    let mut steps: BTreeMap<String, Vec<(Nanos, i8)>> = BTreeMap::new();
    let mut bits: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut seen_ports = BTreeSet::new();
    for h in trace.hops() {
        let key = format!("{}:{}", h.node, h.port);
        seen_ports.insert(key.clone());
        let s = steps.entry(key.clone()).or_default();
        if let Some(enter) = h.queue_enter_ns {
            s.push((enter, 1));
            s.push((h.tx_start_ns.unwrap_or(duration).max(enter), -1));
        }
        if let Some(end) = h.tx_end_ns {
            if end <= duration {
                let b = bits.entry(key).or_default();
                b.0 += h.wire_bits;
                b.1 += 1;
            }
        }
    }
    let mut ports = BTreeMap::new();
    for key in seen_ports {
        let mut s = steps.remove(&key).unwrap_or_default();
        // Entries before exits at equal times, as the simulator enqueues
        // before it selects.
        s.sort_by_key(|&(t, d)| (t, -d));
        let mut len: i64 = 0;
        let mut max = 0;
        let mut area: u128 = 0;
        let mut last = 0;
        for (t, d) in s {
            let t = t.min(duration);
            area += len as u128 * (t - last.min(t)) as u128;
            last = t;
            len += d as i64;
            max = max.max(len);
        }
        let (b, n) = bits.get(&key).copied().unwrap_or((0, 0));
        ports.insert(
            key,
            PortMetrics {
                max_queue_len: max as u64,
                mean_queue_len: if duration == 0 { 0.0 } else { area as f64 / duration as f64 },
                throughput_bps: if duration == 0 { 0.0 } else { b as f64 * NS_PER_S as f64 / duration as f64 },
                frames_transmitted: n,
            },
        );
    }

    MetricsReport {
        schema: METRICS_SCHEMA.to_string(),
        duration_ms: duration as f64 / 1e6,
        flows,
        ports,
        global,
    }
}

#[cfg(test)]
mod tests {
    use super::super::trace::*;
    use super::*;

    fn frame(id: u64, message: u64, created: Nanos, outcome: FrameOutcome, at: Nanos) -> TraceRecord {
        TraceRecord::Frame(FrameRecord {
            frame_id: id,
            flow: "s/f".into(),
            message,
            fragment: 0,
            seq: id as u16,
            member: 0,
            created_ns: created,
            outcome,
            at_ns: at,
            reason: None,
        })
    }

    fn trace(frames: Vec<TraceRecord>) -> Trace {
        let mut records = vec![
            TraceRecord::Run(RunRecord {
                duration_ns: 1_000_000,
                seed: 0,
                sync_error_ns: 0,
                clock_offsets_ns: BTreeMap::new(),
            }),
            TraceRecord::Flow(FlowRecord {
                flow: "s/f".into(),
                priority: 7,
                period_ns: Some(100_000),
                max_latency_ns: Some(50_000),
                fragments: 1,
                members: 1,
            }),
        ];
        records.extend(frames);
        Trace { records }
    }

    #[test]
    fn constant_latency_has_no_jitter() {
        let t = trace((0..5).map(|i| frame(i, i, i * 100_000, FrameOutcome::Delivered, i * 100_000 + 7_000)).collect());
        let m = compute_metrics(&t);
        let f = &m.flows["s/f"];
        assert_eq!(f.delivered, 5);
        assert_eq!(f.miss_rate, 0.0);
        let l = f.latency.as_ref().unwrap();
        assert_eq!((l.min_us, l.max_us, l.jitter_us), (7.0, 7.0, 0.0));
        assert_eq!(f.inter_frame.as_ref().unwrap().max_us, 100.0);
        assert_eq!(f.period_offset_max_us, Some(0.0));
        assert_eq!(f.rate_hz, 5_000.0);
    }

    #[test]
    fn misses_drops_and_conservation() {
        let t = trace(vec![
            frame(0, 0, 0, FrameOutcome::Delivered, 60_000),
            frame(1, 1, 100_000, FrameOutcome::Dropped, 100_500),
            frame(2, 2, 200_000, FrameOutcome::Delivered, 210_000),
            frame(3, 2, 200_000, FrameOutcome::Discarded, 211_000),
            frame(4, 3, 900_000, FrameOutcome::InFlight, 1_000_000),
        ]);
        let m = compute_metrics(&t);
        let f = &m.flows["s/f"];
        assert_eq!((f.created, f.delivered, f.dropped, f.in_flight), (4, 2, 1, 1));
        assert_eq!(f.deadline_misses, 1);
        assert_eq!(f.miss_rate, 0.5);
        assert_eq!(f.delivery_ratio, Some(2.0 / 3.0));
        assert_eq!(f.duplicates_discarded, 1);
        let g = &m.global;
        assert_eq!(g.frames_created, g.delivered + g.dropped + g.in_flight_at_end);
        assert_eq!((g.delivered, g.dropped, g.in_flight_at_end), (2, 2, 1));
    }

    #[test]
    fn empty_trace() {
        let m = compute_metrics(&trace(vec![]));
        let f = &m.flows["s/f"];
        assert_eq!(f.delivered, 0);
        assert!(f.latency.is_none());
        assert_eq!(f.delivery_ratio, None);
    }
}
