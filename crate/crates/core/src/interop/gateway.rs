//! CAN to Ethernet gatewaying.
//!
//! Record layout, all integers big-endian:
//!
//! | bytes | field                    |
//! |-------|--------------------------|
//! | 4     | can_id (29 bits used)    |
//! | 1     | dlc (0..=8)              |
//! | dlc   | data                     |
//! | 8     | capture time, µs         |

use crate::network::{CAN_FRAME_OVERHEAD_BITS, MTU_BYTES};
use serde::{Deserialize, Serialize};

pub const CAN_ID_LIMIT: u32 = 1 << 29;
pub const RECORD_HEADER_BYTES: usize = 4 + 1 + 8;
pub const MAX_CAN_FRAME_BITS: u64 = 108;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum InteropError {
    #[error("MALFORMED_RECORD at offset {offset}: {reason}")]
    MalformedRecord { offset: usize, reason: String },
    #[error("invalid CAN frame: {0}")]
    InvalidFrame(String),
}

impl InteropError {
    pub fn code(&self) -> &'static str {
        match self {
            InteropError::MalformedRecord { .. } => "MALFORMED_RECORD",
            InteropError::InvalidFrame(_) => "INVALID_FRAME",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayFrame {
    pub can_id: u32,
    pub dlc: u8,
    pub payload: Vec<u8>,
    pub capture_time_us: u64,
}

impl GatewayFrame {
    pub fn new(can_id: u32, payload: Vec<u8>, capture_time_us: u64) -> Result<Self, InteropError> {
        if can_id >= CAN_ID_LIMIT {
            return Err(InteropError::InvalidFrame(format!("can_id {can_id:#x} exceeds 29 bits")));
        }
        if payload.len() > 8 {
            return Err(InteropError::InvalidFrame(format!("{} data bytes, at most 8", payload.len())));
        }
        Ok(GatewayFrame {
            can_id,
            dlc: payload.len() as u8,
            payload,
            capture_time_us,
        })
    }

    pub fn record_len(&self) -> usize {
        RECORD_HEADER_BYTES + self.dlc as usize
    }

    /// Modeled bus size of the frame, without bit stuffing.
    pub fn can_wire_bits(&self) -> u64 {
        CAN_FRAME_OVERHEAD_BITS + 8 * self.dlc as u64
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.can_id.to_be_bytes());
        out.push(self.dlc);
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.capture_time_us.to_be_bytes());
    }
}

/// One Ethernet payload and the time (µs) the gateway emits it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayPayload {
    pub emit_at_us: u64,
    pub bytes: Vec<u8>,
}

/// Greedy packing of `frames` into payloads of at most `max_payload` bytes.
fn pack_greedy(frames: &[GatewayFrame], max_payload: usize, emit_at_us: u64, out: &mut Vec<GatewayPayload>) {
    let mut buf = Vec::new();
    for f in frames {
        if !buf.is_empty() && buf.len() + f.record_len() > max_payload {
            out.push(GatewayPayload {
                emit_at_us,
                bytes: std::mem::take(&mut buf),
            });
        }
        f.encode_into(&mut buf);
    }
    if !buf.is_empty() {
        out.push(GatewayPayload { emit_at_us, bytes: buf });
    }
}

/// Every `period_us`, all frames captured in that window go out together.
pub fn pack_periodic_snapshot(frames: &[GatewayFrame], period_us: u64) -> Vec<GatewayPayload> {
    assert!(period_us > 0, "snapshot period must be positive");
    let mut out = Vec::new();
    let mut start = 0;
    while start < frames.len() {
        let window = frames[start].capture_time_us / period_us;
        let mut end = start + 1;
        while end < frames.len() && frames[end].capture_time_us / period_us == window {
            end += 1;
        }
        pack_greedy(&frames[start..end], MTU_BYTES as usize, (window + 1) * period_us, &mut out);
        start = end;
    }
    out
}

/// One record per payload, emitted at capture time.
pub fn pack_one_to_one(frame: &GatewayFrame) -> GatewayPayload {
    let mut bytes = Vec::with_capacity(frame.record_len());
    frame.encode_into(&mut bytes);
    GatewayPayload {
        emit_at_us: frame.capture_time_us,
        bytes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlushTrigger {
    /// Emit after this many records.
    Count(usize),
    /// Emit this long after the first buffered record was captured.
    TimeoutUs(u64),
}

/// Packs records until the next one would not fit or the trigger fires.
pub fn pack_all(frames: &[GatewayFrame], max_payload: usize, trigger: FlushTrigger) -> Vec<GatewayPayload> {
    let mut out = Vec::new();
    let mut buf: Vec<u8> = Vec::new();
    let mut count = 0usize;
    let mut first_at = 0u64;
    let mut last_at = 0u64;
    let flush = |buf: &mut Vec<u8>, count: &mut usize, at: u64, out: &mut Vec<GatewayPayload>| {
        if !buf.is_empty() {
            out.push(GatewayPayload {
                emit_at_us: at,
                bytes: std::mem::take(buf),
            });
        }
        *count = 0;
    };
    for f in frames {
        if count > 0 {
            if let FlushTrigger::TimeoutUs(t) = trigger {
                if f.capture_time_us >= first_at + t {
                    flush(&mut buf, &mut count, first_at + t, &mut out);
                }
            }
        }
        if count > 0 && buf.len() + f.record_len() > max_payload {
            flush(&mut buf, &mut count, f.capture_time_us, &mut out);
        }
        if count == 0 {
            first_at = f.capture_time_us;
        }
        f.encode_into(&mut buf);
        count += 1;
        last_at = f.capture_time_us;
        if let FlushTrigger::Count(n) = trigger {
            if count >= n {
                flush(&mut buf, &mut count, last_at, &mut out);
            }
        }
    }
    let at = match trigger {
        FlushTrigger::TimeoutUs(t) => first_at + t,
        FlushTrigger::Count(_) => last_at,
    };
    flush(&mut buf, &mut count, at, &mut out);
    out
}

/// Decodes every record of a payload, in order.
pub fn unpack(payload: &[u8]) -> Result<Vec<GatewayFrame>, InteropError> {
    let mut out = Vec::new();
    let mut at = 0;
    let malformed = |offset: usize, reason: String| InteropError::MalformedRecord { offset, reason };
    while at < payload.len() {
        let rest = &payload[at..];
        if rest.len() < 5 {
            return Err(malformed(at, format!("{} bytes left, record header needs 5", rest.len())));
        }
        let can_id = u32::from_be_bytes(rest[0..4].try_into().expect("4 bytes"));
        if can_id >= CAN_ID_LIMIT {
            return Err(malformed(at, format!("can_id {can_id:#x} exceeds 29 bits")));
        }
        let dlc = rest[4];
        if dlc > 8 {
            return Err(malformed(at, format!("dlc {dlc} exceeds 8")));
        }
        let len = RECORD_HEADER_BYTES + dlc as usize;
        if rest.len() < len {
            return Err(malformed(at, format!("record needs {len} bytes, {} left", rest.len())));
        }
        let data = rest[5..5 + dlc as usize].to_vec();
        let time = u64::from_be_bytes(rest[5 + dlc as usize..len].try_into().expect("8 bytes"));
        out.push(GatewayFrame {
            can_id,
            dlc,
            payload: data,
            capture_time_us: time,
        });
        at += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(id: u32, dlc: usize, t: u64) -> GatewayFrame {
        GatewayFrame::new(id, (0..dlc as u8).collect(), t).unwrap()
    }

    fn unpack_all(ps: &[GatewayPayload]) -> Vec<GatewayFrame> {
        ps.iter().flat_map(|p| unpack(&p.bytes).unwrap()).collect()
    }

    #[test]
    fn record_sizes() {
        assert_eq!(pack_one_to_one(&frame(1, 8, 0)).bytes.len(), 21);
        assert_eq!(pack_one_to_one(&frame(1, 0, 0)).bytes.len(), 13);
        assert_eq!(frame(1, 8, 0).can_wire_bits(), 108);
    }

    #[test]
    fn snapshot_windows() {
        let fs = vec![frame(1, 8, 100), frame(2, 4, 2000), frame(3, 0, 9999)];
        let out = pack_periodic_snapshot(&fs, 10_000);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].emit_at_us, 10_000);
        assert_eq!(unpack(&out[0].bytes).unwrap(), fs);
        assert!(pack_periodic_snapshot(&[], 10_000).is_empty());

        let many: Vec<_> = (0..80).map(|i| frame(i, 8, i as u64)).collect();
        let out = pack_periodic_snapshot(&many, 10_000);
        let counts: Vec<usize> = out.iter().map(|p| unpack(&p.bytes).unwrap().len()).collect();
        assert_eq!(counts, vec![71, 9]);
    }

    #[test]
    fn all_packing_fills_the_mtu() {
        let fs: Vec<_> = (0..71).map(|i| frame(i, 8, i as u64)).collect();
        let out = pack_all(&fs, 1500, FlushTrigger::TimeoutUs(1_000_000));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bytes.len(), 1491);

        let one = pack_all(&[frame(7, 3, 50)], 1500, FlushTrigger::TimeoutUs(200));
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].emit_at_us, 250);
        assert_eq!(unpack(&one[0].bytes).unwrap().len(), 1);
    }

    #[test]
    fn all_packing_beats_one_to_one_on_the_wire() {
        use crate::descriptors::Medium;
        use crate::network::frame_wire_bits;
        let per_frame_all = frame_wire_bits(71 * 21, false, Medium::Ethernet) as f64 / 71.0;
        let per_frame_one = frame_wire_bits(21, false, Medium::Ethernet) as f64;
        assert!(per_frame_all < per_frame_one);
    }

    #[test]
    fn malformed_input() {
        assert!(unpack(&[]).unwrap().is_empty());
        let mut bytes = pack_one_to_one(&frame(5, 8, 1)).bytes;
        bytes.extend_from_slice(&pack_one_to_one(&frame(6, 8, 2)).bytes);
        bytes.truncate(30);
        match unpack(&bytes).unwrap_err() {
            InteropError::MalformedRecord { offset, .. } => assert_eq!(offset, 21),
            e => panic!("unexpected {e}"),
        }
        let mut bad = pack_one_to_one(&frame(5, 1, 1)).bytes;
        bad[4] = 9;
        assert_eq!(unpack(&bad).unwrap_err().code(), "MALFORMED_RECORD");
    }

    fn frames_strategy() -> impl Strategy<Value = Vec<GatewayFrame>> {
        proptest::collection::vec(
            (0u32..CAN_ID_LIMIT, proptest::collection::vec(any::<u8>(), 0..=8), 0u64..5_000),
            0..120,
        )
        .prop_map(|v| {
            let mut t = 0;
            v.into_iter()
                .map(|(id, data, dt)| {
                    t += dt;
                    GatewayFrame::new(id, data, t).unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn strategies_are_invertible(fs in frames_strategy(), period in 1u64..20_000, n in 1usize..100) {
            let snap = pack_periodic_snapshot(&fs, period);
            prop_assert!(snap.iter().all(|p| p.bytes.len() <= 1500));
            prop_assert_eq!(unpack_all(&snap), fs.clone());

            let one: Vec<_> = fs.iter().map(pack_one_to_one).collect();
            prop_assert_eq!(unpack_all(&one), fs.clone());

            for trigger in [FlushTrigger::Count(n), FlushTrigger::TimeoutUs(period)] {
                let all = pack_all(&fs, 1500, trigger);
                prop_assert!(all.iter().all(|p| p.bytes.len() <= 1500));
                prop_assert_eq!(unpack_all(&all), fs.clone());
            }
            prop_assert!(fs.iter().all(|f| f.can_wire_bits() <= MAX_CAN_FRAME_BITS));
        }
    }
}
