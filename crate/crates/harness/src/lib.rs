//! Experiment orchestration for `lfcs-core`: configuration, seeded runs,
//! sweeps, metric files, aggregation and the oracle battery.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod run;
pub mod sweep;

pub use config::{Algo, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use metrics::MetricsRow;
