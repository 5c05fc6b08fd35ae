//! Comparison schemes: grouped quantized search, particle swarm, the single-layer surface
//! and a per-user reconfigurable surface.

pub mod baselines;
pub mod pso;
pub mod qsearch;

use crate::channel::ChannelStats;
use crate::design::Design;
use crate::geometry::BeamPattern;
use crate::linalg::{argmax, CVector};
use crate::rate::{rate_matrix, Objective, RateReport};

pub use baselines::{dynamic_ris_baseline, single_layer_baseline, BaselineResult, SingleLayerSolver};
pub use pso::{pso_solve, wrap_angle, PsoConfig, PsoResult, PsoSwarm};
pub use qsearch::{quantized_search, QuantizedSearchConfig, QuantizedSearchResult};

/// Serve every user with its best pattern for fixed phases (lowest index on ties) and
/// aggregate. Throughput uses `T = K`.
pub fn greedy_assignment(stats: &ChannelStats, patterns: &[BeamPattern], theta: &CVector, phi: &CVector) -> (Vec<usize>, RateReport) {
    let r = rate_matrix(stats, patterns, theta, phi);
    let assignment: Vec<usize> = (0..r.nrows()).map(|k| argmax(r.row(k).iter().copied())).collect();
    let rates = assignment.iter().enumerate().map(|(k, &u)| r[(k, u)]).collect();
    (assignment, RateReport::from_rates(rates, stats.users() as f64))
}

/// Objective value of fixed phases under greedy pattern selection.
pub fn greedy_objective(stats: &ChannelStats, patterns: &[BeamPattern], theta: &CVector, phi: &CVector, objective: Objective) -> f64 {
    greedy_assignment(stats, patterns, theta, phi).1.objective(objective)
}

pub(crate) fn greedy_design(stats: &ChannelStats, patterns: &[BeamPattern], theta: CVector, phi: CVector) -> (Design, RateReport) {
    let (assignment, report) = greedy_assignment(stats, patterns, &theta, &phi);
    (Design::from_assignment(phi, theta, patterns, &assignment), report)
}
