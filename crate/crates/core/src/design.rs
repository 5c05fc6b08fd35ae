//! A complete static design: phase profiles of both layers plus the placement of MS2
//! used to serve each user.


use crate::channel::ChannelStats;
use crate::error::{MisError, Result};
use crate::geometry::BeamPattern;
use crate::linalg::{max_modulus_error, CVector};
use crate::rate::{ergodic_rate_mc, jensen_rate, statistical_snr, McEstimate, RateReport};

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub phi: CVector,
    pub theta: CVector,
    /// Placement of MS2 used while serving each user.
    pub user_patterns: Vec<BeamPattern>,
}

impl Design {
    /// Design for a fixed pattern set, assigning user `k` to `patterns[assignment[k]]`.
    pub fn from_assignment(phi: CVector, theta: CVector, patterns: &[BeamPattern], assignment: &[usize]) -> Self {
        Design {
            phi,
            theta,
            user_patterns: assignment.iter().map(|&u| patterns[u].clone()).collect(),
        }
    }

    /// Single-layer surface: no MS2, every user sees `phi`.
    pub fn single_layer(phi: CVector, users: usize) -> Self {
        let m = phi.len();
        Design {
            phi,
            theta: CVector::zeros(0),
            user_patterns: vec![BeamPattern::uncovered(m); users],
        }
    }

    pub fn validate(&self, stats: &ChannelStats) -> Result<()> {
        if self.user_patterns.len() != stats.users() {
            return Err(MisError::shape(format!(
                "{} user patterns for {} users",
                self.user_patterns.len(),
                stats.users()
            )));
        }
        if self.phi.len() != stats.m() {
            return Err(MisError::shape(format!("phi has {} entries, M = {}", self.phi.len(), stats.m())));
        }
        for p in &self.user_patterns {
            if p.m() != stats.m() || p.n() != self.theta.len() {
                return Err(MisError::shape("pattern does not match profile dimensions"));
            }
        }
        if max_modulus_error(&self.phi) > 1e-9 || max_modulus_error(&self.theta) > 1e-9 {
            return Err(MisError::Domain("design phases are not unit modulus".into()));
        }
        Ok(())
    }

    /// Effective phase vector seen by user `k`.
    pub fn effective(&self, k: usize) -> CVector {
        self.user_patterns[k].compose(&self.theta, &self.phi)
    }

    /// Mean SNR `v_k^H Ξ_k v_k` per user.
    pub fn snrs(&self, stats: &ChannelStats) -> Vec<f64> {
        (0..stats.users())
            .map(|k| statistical_snr(&self.effective(k), &stats.xi[k]))
            .collect()
    }

    /// Jensen-bound rates and objectives.
    pub fn report(&self, stats: &ChannelStats, time: f64) -> RateReport {
        let rates = (0..stats.users())
            .map(|k| jensen_rate(&self.effective(k), &stats.xi[k]))
            .collect();
        RateReport::from_rates(rates, time)
    }

    /// Monte Carlo ergodic rates; user `k` uses stream family `seed + k`.
    pub fn ergodic(&self, stats: &ChannelStats, trials: usize, seed: u64, time: f64) -> Result<(RateReport, Vec<McEstimate>)> {
        let est = (0..stats.users())
            .map(|k| ergodic_rate_mc(stats, k, &self.effective(k), trials, seed.wrapping_add(k as u64)))
            .collect::<Result<Vec<_>>>()?;
        let mut report = RateReport::from_rates(est.iter().map(|e| e.mean_rate).collect(), time);
        report.jensen_gap_bound = Some(est.iter().map(McEstimate::jensen_gap_bound).collect());
        Ok((report, est))
    }
}
