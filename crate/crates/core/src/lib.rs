//! Deterministic deployment planning for software-defined vehicles.
//!
//! The pipeline turns service descriptors and a topology into a deployment
//! plan (placement, TSN gate schedules, CBS slopes, FRER paths, 5QI and
//! data-layer profiles) and checks it in a discrete-event simulator:
//!
//! ```text
//! descriptors -> orchestrator -> tsn_config -> interop -> netsim -> report
//! ```

pub mod descriptors;
pub mod interop;
pub mod network;
pub mod netsim;
pub mod orchestrator;
pub mod pipeline;
pub mod report;
pub mod time;
pub mod tsn_config;
