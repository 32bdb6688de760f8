//! Deterministic discrete-event simulation of a configured network.
//!
//! Frames are released by their talkers on local clocks, then at every hop
//! pass processing, an egress queue (gates, credit, strict priority, no
//! preemption), transmission and propagation. All times are integer
//! nanoseconds and ties are broken by a fixed key, so equal inputs give
//! byte-identical traces.

mod engine;
mod frer;
mod metrics;
mod trace;

pub use engine::{Frame, HopLog};
pub use frer::{Recovery, VectorRecovery};
pub use metrics::{
    compute_metrics, FlowMetrics, GlobalMetrics, InterFrameStats, LatencyStats, MetricsReport, PortMetrics,
    METRICS_SCHEMA,
};
pub use trace::{
    FlowRecord, FrameOutcome, FrameRecord, HopRecord, RunRecord, Trace, TraceParseError, TraceRecord, TRACE_SCHEMA,
};

use crate::descriptors::TopologyDescriptor;
use crate::time::{ms_to_ns, us_to_ns, Nanos};
use crate::tsn_config::{TsnConfig, TsnFlow};
use serde::{Deserialize, Serialize};

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;
pub const DEFAULT_SYNC_ERROR_US: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkFailure {
    pub link: String,
    pub fail_at_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restore_at_ms: Option<f64>,
}

fn default_sync_error_us() -> f64 {
    DEFAULT_SYNC_ERROR_US
}

fn default_queue_capacity() -> usize {
    DEFAULT_QUEUE_CAPACITY
}

/// Simulation parameters. In TOML the keys are those of the fields; other
/// top-level tables (such as `[scenario]`) are ignored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub duration_ms: f64,
    #[serde(default)]
    pub seed: u64,
    /// Largest clock offset of any node from global time.
    #[serde(default = "default_sync_error_us")]
    pub clock_sync_error_us: f64,
    /// Per-queue frame cap; an arriving frame beyond it is dropped.
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
    #[serde(default)]
    pub failures: Vec<LinkFailure>,
}

impl SimConfig {
    pub fn new(duration_ms: f64, seed: u64) -> Self {
        SimConfig {
            duration_ms,
            seed,
            clock_sync_error_us: DEFAULT_SYNC_ERROR_US,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            failures: Vec::new(),
        }
    }

    pub fn parse_toml(text: &str) -> Result<SimConfig, SimError> {
        let c: SimConfig = toml::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration_ms.is_finite() && self.duration_ms > 0.0) {
            return Err(SimError::InvalidConfig("duration_ms must be positive".into()));
        }
        if !(self.clock_sync_error_us.is_finite() && self.clock_sync_error_us >= 0.0) {
            return Err(SimError::InvalidConfig("clock_sync_error_us must be non-negative".into()));
        }
        if self.queue_capacity == 0 {
            return Err(SimError::InvalidConfig("queue_capacity must be at least 1".into()));
        }
        for f in &self.failures {
            let ok = f.fail_at_ms.is_finite()
                && f.fail_at_ms >= 0.0
                && f.restore_at_ms.is_none_or(|r| r.is_finite() && r >= f.fail_at_ms);
            if !ok {
                return Err(SimError::InvalidConfig(format!("bad failure window on link {}", f.link)));
            }
        }
        Ok(())
    }

    pub fn duration_ns(&self) -> Nanos {
        ms_to_ns(self.duration_ms)
    }

    pub fn sync_error_ns(&self) -> Nanos {
        us_to_ns(self.clock_sync_error_us)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("CONFIG_MISMATCH: {0}")]
    ConfigMismatch(String),
    #[error("UNKNOWN_LINK: {0}")]
    UnknownLink(String),
    #[error("INVALID_SIM_CONFIG: {0}")]
    InvalidConfig(String),
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::ConfigMismatch(_) => "CONFIG_MISMATCH",
            SimError::UnknownLink(_) => "UNKNOWN_LINK",
            SimError::InvalidConfig(_) => "INVALID_SIM_CONFIG",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: Trace,
    pub metrics: MetricsReport,
    /// Frame copies created by the talkers and replication points.
    pub frames_created: u64,
}

pub use engine::Simulation;

/// Builds a simulation, applies the configured link failures and runs it.
pub fn run(topo: &TopologyDescriptor, flows: &[TsnFlow], config: &TsnConfig, sim: &SimConfig) -> Result<SimOutput, SimError> {
    Ok(Simulation::new(topo, flows, config, sim)?.run())
}

#[cfg(test)]
mod tests;
