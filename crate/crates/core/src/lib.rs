//! Gaussian-bandit dynamic pricing and a seeded multi-agent query-market simulator.
//!
//! Sellers post per-query prices, a distributor splits each step's query
//! volume among those whose price fits the consumers' hidden budget, and
//! bandit sellers learn their price distribution from the revenue they see.

pub mod agents;
pub mod environment;
pub mod market;
pub mod policy;
pub mod rng;
pub mod scenario;
pub mod simulation;
