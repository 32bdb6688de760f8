//! Replication and elimination parameters for flows routed over two paths.

use super::{FlowRoute, TsnFlow};
use crate::network::fragment_sizes;
use crate::time::Nanos;
use serde::{Deserialize, Serialize};

pub const SEQUENCE_SPACE: u32 = 1 << 16;
pub const MIN_RECOVERY_WINDOW: u32 = 8;
/// Window used when a member path has no finite latency bound.
const UNBOUNDED_RECOVERY_WINDOW: u32 = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrerConfig {
    pub flow: String,
    pub replication_node: String,
    pub elimination_node: String,
    pub sequence_space: u32,
    /// In frames.
    pub recovery_window: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("flow `{0}` is not routed over two paths")]
pub struct NotReplicated(pub String);

/// Window of twice the frames a path can hold in flight, at least 8.
pub fn derive_frer(flow: &TsnFlow, route: &FlowRoute, longer_path_bound_ns: Option<Nanos>) -> Result<FrerConfig, NotReplicated> {
    if route.paths.len() != 2 {
        return Err(NotReplicated(flow.key.clone()));
    }
    let frames = fragment_sizes(flow.data_size).len() as u64;
    let window = match longer_path_bound_ns {
        Some(b) => {
            let messages = b.div_ceil(flow.interval_ns()).max(1);
            (2 * messages * frames).min(SEQUENCE_SPACE as u64 / 2) as u32
        }
        None => UNBOUNDED_RECOVERY_WINDOW,
    };
    Ok(FrerConfig {
        flow: flow.key.clone(),
        replication_node: route.source.clone(),
        elimination_node: route.destination.clone(),
        sequence_space: SEQUENCE_SPACE,
        recovery_window: window.max(MIN_RECOVERY_WINDOW),
    })
}

#[cfg(test)]
mod tests {
    use super::super::TrafficClass;
    use super::*;

    fn flow(size: u64, period: Nanos) -> TsnFlow {
        TsnFlow {
            key: "s/f".into(),
            class: TrafficClass::Control,
            priority: 7,
            data_size: size,
            period_ns: Some(period),
            offset_ns: 0,
            max_latency_ns: None,
            jitter_ns: None,
            reliability: true,
            delivery: true,
            talker: "a".into(),
            listener: "b".into(),
        }
    }

    fn route(n: usize) -> FlowRoute {
        FlowRoute {
            flow: "s/f".into(),
            source: "a".into(),
            destination: "b".into(),
            paths: vec![vec!["x".into()]; n],
        }
    }

    #[test]
    fn window_from_bound() {
        // bound 35 us, period 10 us -> 4 in flight -> 8.
        assert_eq!(derive_frer(&flow(100, 10_000), &route(2), Some(35_000)).unwrap().recovery_window, 8);
        // bound 95 us, period 10 us -> 10 in flight -> 20.
        assert_eq!(derive_frer(&flow(100, 10_000), &route(2), Some(95_000)).unwrap().recovery_window, 20);
        // Short bound still gets the minimum.
        assert_eq!(derive_frer(&flow(100, 1_000_000), &route(2), Some(20_000)).unwrap().recovery_window, 8);
    }

    #[test]
    fn single_path_is_rejected() {
        assert!(derive_frer(&flow(100, 10_000), &route(1), Some(1)).is_err());
    }

    #[test]
    fn endpoints() {
        let c = derive_frer(&flow(100, 10_000), &route(2), Some(1)).unwrap();
        assert_eq!((c.replication_node.as_str(), c.elimination_node.as_str()), ("a", "b"));
        assert_eq!(c.sequence_space, 65536);
    }
}
