//! Trace-driven simulator of a secure NVM memory controller: split-counter
//! counter-mode encryption metadata, an 8-ary integrity tree with a vertical
//! persistent/non-persistent partition, configurable metadata-persistence
//! policies, crash injection with exhaustive boundary coverage, the recovery
//! procedures for every policy, and a closed-form recovery-time model.
//!
//! The cryptography is deliberately a deterministic toy (see `CRYPTO.md`):
//! the simulator studies persistence protocols, not cipher strength.

pub mod analytics;
pub mod config;
pub mod controller;
pub mod crypto;
pub mod devices;
pub mod error;
pub mod geometry;
pub mod merkle;
pub mod recovery;
pub mod workload;

pub use analytics::{analytic_recovery_time, LowestTier, PadLedger, RunStats};
pub use config::SimConfig;
pub use controller::{Controller, ControllerParams, PersistMode, PersistPolicy, Progress};
pub use error::SimError;
pub use geometry::{Address, Region, RegionMap};
pub use recovery::{recover, RecoveryOutcome, RecoveryReport};
pub use workload::{SyntheticSpec, TraceOp};
