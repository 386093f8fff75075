//! Pareto boundary characterization of multicell multi-antenna downlink
//! performance regions with single-stream receivers that treat interference
//! and transmitter distortion as noise.

pub mod error;
pub mod conic;
pub mod explicit;
pub mod implicit;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod region;
pub mod scenario;

pub use error::{Error, Result};
pub use explicit::{strategy1, strategy2, ExplicitParams};
pub use metrics::PerformanceMetric;
pub use scenario::{BeamformingStrategy, PowerConstraint, Scenario};
