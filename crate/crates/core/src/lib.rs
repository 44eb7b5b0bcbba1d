//! Deterministic, seedable round-based simulator for clustered
//! wireless-sensor-network routing.
//!
//! Four protocols run over one shared first-order radio energy model: a
//! dual-head, range-gated protocol with energy-triggered head rotation, and
//! three election-based baselines (periodic, reactive, and hybrid transmit
//! gating). Every run is a pure function of its scenario, and the metric
//! series it produces (lifetime, energy, traffic, delay) are emitted as CSV
//! by the experiment runner.

pub mod baselines;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod priya;
pub mod protocol;
pub mod radio;
pub mod topology;

pub use config::{emit_config, parse_config, parse_config_str, ExperimentSpec};
pub use engine::{
    run, tdma_slots, MetricsReport, ProtocolKind, RoundRecord, RunSummary, Scenario, SensingField,
};
pub use error::{Result, SimError};
pub use experiment::{run_experiment, ExperimentOutput};
pub use protocol::{Network, Protocol, RoundEvents};
pub use radio::{aggregate_cost, deduct, rx_cost, tx_cost, tx_delay, RadioParams};
pub use topology::{centroid, deploy, distance, partition, Cluster, Node, NodeId, Position};
