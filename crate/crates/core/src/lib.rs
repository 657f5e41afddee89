pub mod cli;
pub mod detection;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod montecarlo;
pub mod photon_stats;
pub mod sources;
