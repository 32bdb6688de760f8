//! Integer nanosecond time base and unit conversions.

/// Nanoseconds. All planning and simulation arithmetic is done in this unit.
pub type Nanos = u64;

pub const NS_PER_US: u64 = 1_000;
pub const NS_PER_MS: u64 = 1_000_000;
pub const NS_PER_S: u64 = 1_000_000_000;

/// Milliseconds (descriptor unit) to nanoseconds, rounded to the nearest ns.
pub fn ms_to_ns(ms: f64) -> Nanos {
    (ms * NS_PER_MS as f64).round().max(0.0) as Nanos
}

/// Microseconds (topology unit) to nanoseconds, rounded to the nearest ns.
pub fn us_to_ns(us: f64) -> Nanos {
    (us * NS_PER_US as f64).round().max(0.0) as Nanos
}

pub fn ns_to_us(ns: Nanos) -> f64 {
    ns as f64 / NS_PER_US as f64
}

pub fn ns_to_ms(ns: Nanos) -> f64 {
    ns as f64 / NS_PER_MS as f64
}

/// Time to serialize `bits` at `rate` bit/s, rounded up to whole nanoseconds.
pub fn serialization_ns(bits: u64, rate: u64) -> Nanos {
    let num = bits as u128 * NS_PER_S as u128;
    num.div_ceil(rate as u128) as Nanos
}
