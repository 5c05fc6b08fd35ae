//! Simulation and design of movable intelligent surfaces: two stacked static-phase
//! metasurfaces whose relative displacement selects among a finite set of beam patterns.

pub mod channel;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod rate;
pub mod design;
pub mod bcd;
pub mod benchmarks;
pub mod manifold;
pub mod scenario;
pub mod robustness;
pub mod experiment;
pub mod output;
pub mod oracle;

pub use error::{MisError, Result};
