//! The market environment: traffic generation and query distribution.

pub mod distributor;
pub mod traffic;

pub use distributor::{distribute, AllocationResult, DistributeError, DistributorKind};
pub use traffic::{generate_traffic, Schedule, ScheduleError, TrafficConfig};
