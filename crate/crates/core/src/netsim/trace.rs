//! Per-frame trace, exported as newline-delimited JSON.

use crate::time::Nanos;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TRACE_SCHEMA: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameOutcome {
    Delivered,
    /// Lost: queue overflow, failed link, or rejected by the eliminator window.
    Dropped,
    /// Redundant copy removed by the eliminator.
    Discarded,
    InFlight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub duration_ns: Nanos,
    pub seed: u64,
    pub sync_error_ns: Nanos,
    pub clock_offsets_ns: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub flow: String,
    pub priority: u8,
    pub period_ns: Option<Nanos>,
    pub max_latency_ns: Option<Nanos>,
    pub fragments: u32,
    pub members: u32,
}

/// One hop of one frame. Fields after the arrival are absent while the
/// frame was still at this hop when the run ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopRecord {
    pub frame_id: u64,
    pub flow: String,
    pub seq: u16,
    pub member: u32,
    pub node: String,
    pub port: String,
    pub wire_bits: u64,
    pub arrival_ns: Nanos,
    pub queue_enter_ns: Option<Nanos>,
    pub tx_start_ns: Option<Nanos>,
    pub tx_end_ns: Option<Nanos>,
    /// Arrival at the next node: tx_end plus propagation.
    pub departure_ns: Option<Nanos>,
}

impl HopRecord {
    pub fn processing_ns(&self) -> Option<Nanos> {
        Some(self.queue_enter_ns? - self.arrival_ns)
    }
    pub fn queuing_ns(&self) -> Option<Nanos> {
        Some(self.tx_start_ns? - self.queue_enter_ns?)
    }
    pub fn transmission_ns(&self) -> Option<Nanos> {
        Some(self.tx_end_ns? - self.tx_start_ns?)
    }
    pub fn propagation_ns(&self) -> Option<Nanos> {
        Some(self.departure_ns? - self.tx_end_ns?)
    }
}

/// Final fate of one frame copy; exactly one per frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub flow: String,
    pub message: u64,
    pub fragment: u32,
    pub seq: u16,
    pub member: u32,
    pub created_ns: Nanos,
    pub outcome: FrameOutcome,
    pub at_ns: Nanos,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Run(RunRecord),
    Flow(FlowRecord),
    Hop(HopRecord),
    Frame(FrameRecord),
}

#[derive(Serialize, Deserialize)]
struct Line {
    schema: String,
    #[serde(flatten)]
    record: TraceRecord,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

impl Trace {
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = Line {
                schema: TRACE_SCHEMA.to_string(),
                record: r.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn parse_ndjson(text: &str) -> Result<Trace, TraceParseError> {
        let mut records = Vec::new();
        for (i, l) in text.lines().enumerate() {
            if l.trim().is_empty() {
                continue;
            }
            let line: Line = serde_json::from_str(l).map_err(|e| TraceParseError {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.schema != TRACE_SCHEMA {
                return Err(TraceParseError {
                    line: i + 1,
                    message: format!("unsupported schema {}", line.schema),
                });
            }
            records.push(line.record);
        }
        Ok(Trace { records })
    }

    pub fn run(&self) -> Option<&RunRecord> {
        self.records.iter().find_map(|r| match r {
            TraceRecord::Run(x) => Some(x),
            _ => None,
        })
    }

    pub fn flows(&self) -> impl Iterator<Item = &FlowRecord> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Flow(x) => Some(x),
            _ => None,
        })
    }

    pub fn hops(&self) -> impl Iterator<Item = &HopRecord> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Hop(x) => Some(x),
            _ => None,
        })
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameRecord> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Frame(x) => Some(x),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndjson_round_trip() {
        let t = Trace {
            records: vec![
                TraceRecord::Run(RunRecord {
                    duration_ns: 10,
                    seed: 1,
                    sync_error_ns: 0,
                    clock_offsets_ns: BTreeMap::from([("a".to_string(), -3)]),
                }),
                TraceRecord::Hop(HopRecord {
                    frame_id: 0,
                    flow: "s/f".into(),
                    seq: 0,
                    member: 0,
                    node: "a".into(),
                    port: "l".into(),
                    wire_bits: 1104,
                    arrival_ns: 0,
                    queue_enter_ns: Some(0),
                    tx_start_ns: None,
                    tx_end_ns: None,
                    departure_ns: None,
                }),
            ],
        };
        let text = t.to_ndjson();
        assert!(text.lines().all(|l| l.starts_with(r#"{"schema":"v1","kind":"#)));
        assert_eq!(Trace::parse_ndjson(&text).unwrap(), t);
        assert_eq!(Trace::parse_ndjson("{}\n").unwrap_err().line, 1);
    }
}
