//! Credit-based shaper slopes for the STREAM queue.

use super::{assign_priority, TrafficClass, TsnError};
use crate::descriptors::Medium;
use crate::network::{fragment_sizes, frame_wire_bits};
use crate::time::{Nanos, NS_PER_S};
use serde::{Deserialize, Serialize};

/// idle_slope = demand * 11 / 10.
pub const CBS_HEADROOM_NUM: u64 = 11;
pub const CBS_HEADROOM_DEN: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CbsParams {
    pub queue: u8,
    /// bit/s
    pub idle_slope: u64,
    /// bit/s, always negative.
    pub send_slope: i64,
}

impl CbsParams {
    pub fn new(queue: u8, idle_slope: u64, link_rate: u64) -> Self {
        CbsParams {
            queue,
            idle_slope,
            send_slope: idle_slope as i64 - link_rate as i64,
        }
    }
}

/// Wire demand in bit/s of one message of `data_size` bytes every `interval_ns`, rounded up.
pub fn stream_demand_bps(data_size: u64, interval_ns: Nanos, medium: Medium) -> u64 {
    let bits: u64 = fragment_sizes(data_size)
        .into_iter()
        .map(|p| frame_wire_bits(p, true, medium))
        .sum();
    ((bits as u128 * NS_PER_S as u128).div_ceil(interval_ns as u128)) as u64
}

/// Slopes for the STREAM queue of one port from its per-stream demands.
/// Returns `None` when the port carries no stream.
pub fn compute_cbs(port: &str, link_rate: u64, demands_bps: &[u64]) -> Result<Option<CbsParams>, TsnError> {
    if demands_bps.is_empty() {
        return Ok(None);
    }
    let demand: u64 = demands_bps.iter().sum();
    let idle = (demand as u128 * CBS_HEADROOM_NUM as u128).div_ceil(CBS_HEADROOM_DEN as u128) as u64;
    let cap = link_rate / 4 * 3 + (link_rate % 4) * 3 / 4;
    if idle > cap {
        return Err(TsnError::Oversubscribed {
            port: port.to_string(),
            demand_bps: idle,
            cap_bps: cap,
        });
    }
    Ok(Some(CbsParams::new(assign_priority(TrafficClass::Stream), idle, link_rate)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slopes_for_eight_megabit() {
        let c = compute_cbs("p", 100_000_000, &[8_000_000]).unwrap().unwrap();
        assert_eq!(c.idle_slope, 8_800_000);
        assert_eq!(c.send_slope, -91_200_000);
        assert_eq!(c.queue, 5);
    }

    #[test]
    fn no_streams_no_params() {
        assert_eq!(compute_cbs("p", 100_000_000, &[]).unwrap(), None);
    }

    #[test]
    fn oversubscription() {
        let e = compute_cbs("p", 100_000_000, &[80_000_000]).unwrap_err();
        assert_eq!(e.code(), "OVERSUBSCRIBED");
        // 1.1 x 68 = 74.8 fits under the 75 Mbit/s cap.
        assert!(compute_cbs("p", 100_000_000, &[68_000_000]).is_ok());
    }

    #[test]
    fn demand_counts_tagged_wire_bits() {
        // 1500 B payload + 42 B = 12336 bits every ms.
        assert_eq!(stream_demand_bps(1500, 1_000_000, Medium::Ethernet), 12_336_000);
    }
}
