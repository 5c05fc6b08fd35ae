//! Particle swarm search over the concatenated phase angles of both layers.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{greedy_design, greedy_objective};
use crate::channel::ChannelStats;
use crate::design::Design;
use crate::error::{MisError, Result};
use crate::geometry::BeamPattern;
use crate::linalg::{cis, CVector};
use crate::rate::{Objective, RateReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoConfig {
    pub swarm: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-coordinate velocity bound.
    pub max_velocity: f64,
    pub objective: Objective,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            swarm: 50,
            iterations: 300,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            max_velocity: PI,
            objective: Objective::MinRate,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm < 2 || !(self.inertia > 0.0 && self.cognitive > 0.0 && self.social > 0.0 && self.max_velocity > 0.0) {
            return Err(MisError::config("pso: need swarm >= 2 and positive coefficients"));
        }
        Ok(())
    }
}

/// `mod(x + π, 2π) − π`, landing in `[−π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        return x;
    }
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= PI { w - 2.0 * PI } else { w }
}

pub struct PsoSwarm<'a> {
    stats: &'a ChannelStats,
    patterns: &'a [BeamPattern],
    cfg: PsoConfig,
    m: usize,
    rng: ChaCha8Rng,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub personal_best: Vec<Vec<f64>>,
    pub personal_value: Vec<f64>,
    pub global_best: Vec<f64>,
    pub global_value: f64,
    pub evaluations: usize,
}

impl<'a> PsoSwarm<'a> {
    /// Uniform random positions and zero velocities.
    pub fn new(stats: &'a ChannelStats, patterns: &'a [BeamPattern], cfg: &PsoConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if patterns.is_empty() {
            return Err(MisError::shape("no beam patterns"));
        }
        let m = stats.m();
        let dim = m + patterns[0].n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions: Vec<Vec<f64>> = (0..cfg.swarm)
            .map(|_| (0..dim).map(|_| wrap_angle(rng.random_range(-PI..PI))).collect())
            .collect();
        Ok(Self::from_positions(stats, patterns, cfg, rng, positions, vec![vec![0.0; dim]; cfg.swarm]))
    }

    /// Swarm with explicit initial state.
    pub fn from_state(
        stats: &'a ChannelStats,
        patterns: &'a [BeamPattern],
        cfg: &PsoConfig,
        seed: u64,
        positions: Vec<Vec<f64>>,
        velocities: Vec<Vec<f64>>,
    ) -> Result<Self> {
        cfg.validate()?;
        let dim = stats.m() + patterns.first().map_or(0, BeamPattern::n);
        if positions.len() != velocities.len() || positions.iter().chain(&velocities).any(|p| p.len() != dim) {
            return Err(MisError::shape("swarm state does not match the problem dimension"));
        }
        Ok(Self::from_positions(stats, patterns, cfg, ChaCha8Rng::seed_from_u64(seed), positions, velocities))
    }

    fn from_positions(
        stats: &'a ChannelStats,
        patterns: &'a [BeamPattern],
        cfg: &PsoConfig,
        rng: ChaCha8Rng,
        positions: Vec<Vec<f64>>,
        velocities: Vec<Vec<f64>>,
    ) -> Self {
        let mut s = PsoSwarm {
            stats,
            patterns,
            cfg: cfg.clone(),
            m: stats.m(),
            rng,
            personal_best: positions.clone(),
            personal_value: vec![f64::NEG_INFINITY; positions.len()],
            global_best: positions[0].clone(),
            global_value: f64::NEG_INFINITY,
            positions,
            velocities,
            evaluations: 0,
        };
        let values = s.evaluate();
        s.absorb(&values);
        s
    }

    fn split(&self, x: &[f64]) -> (CVector, CVector) {
        let phi = CVector::from_iterator(self.m, x[..self.m].iter().map(|&a| cis(a)));
        let theta = CVector::from_iterator(x.len() - self.m, x[self.m..].iter().map(|&a| cis(a)));
        (phi, theta)
    }

    fn evaluate(&mut self) -> Vec<f64> {
        self.evaluations += self.positions.len();
        self.positions
            .par_iter()
            .map(|x| {
                let (phi, theta) = self.split(x);
                greedy_objective(self.stats, self.patterns, &theta, &phi, self.cfg.objective)
            })
            .collect()
    }

    fn absorb(&mut self, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            if v > self.personal_value[i] {
                self.personal_value[i] = v;
                self.personal_best[i] = self.positions[i].clone();
            }
            // strict improvement keeps the lowest particle index on ties
            if v > self.global_value {
                self.global_value = v;
                self.global_best = self.positions[i].clone();
            }
        }
    }

    /// One velocity and position update of every particle followed by re-evaluation.
    pub fn step(&mut self) {
        let vmax = self.cfg.max_velocity;
        for i in 0..self.positions.len() {
            for d in 0..self.positions[i].len() {
                let r1: f64 = self.rng.random();
                let r2: f64 = self.rng.random();
                let x = self.positions[i][d];
                let v = self.cfg.inertia * self.velocities[i][d]
                    + self.cfg.cognitive * r1 * (self.personal_best[i][d] - x)
                    + self.cfg.social * r2 * (self.global_best[d] - x);
                let v = v.clamp(-vmax, vmax);
                self.velocities[i][d] = v;
                self.positions[i][d] = wrap_angle(x + v);
            }
        }
        let values = self.evaluate();
        self.absorb(&values);
    }
}

#[derive(Debug, Clone)]
pub struct PsoResult {
    pub design: Design,
    pub report: RateReport,
    pub objective: f64,
    /// Global best after initialization and after every iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

pub fn pso_solve(stats: &ChannelStats, patterns: &[BeamPattern], cfg: &PsoConfig, seed: u64) -> Result<PsoResult> {
    let mut swarm = PsoSwarm::new(stats, patterns, cfg, seed)?;
    let mut trace = vec![swarm.global_value];
    for _ in 0..cfg.iterations {
        swarm.step();
        trace.push(swarm.global_value);
    }
    let (phi, theta) = swarm.split(&swarm.global_best);
    let (design, report) = greedy_design(stats, patterns, theta, phi);
    Ok(PsoResult {
        objective: report.objective(cfg.objective),
        design,
        report,
        trace,
        evaluations: swarm.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{substream, Correlations, LinkBudget};
    use crate::linalg::random_phases;
    use proptest::prelude::*;

    fn stats(m: usize, seed: u64) -> ChannelStats {
        let mut rng = substream(seed, 0);
        let a = random_phases(&mut rng, m);
        let b = random_phases(&mut rng, 2);
        let h = vec![random_phases(&mut rng, m)];
        ChannelStats::from_parts(&a * b.transpose(), h, Correlations::identity(m, 2), &LinkBudget::uniform(1, 0.05, 3.0)).unwrap()
    }

    #[test]
    fn wrap_examples() {
        assert!((wrap_angle(PI + 0.5) - (-PI + 0.5)).abs() < 1e-12);
        assert_eq!(wrap_angle(-PI), -PI);
        assert_eq!(wrap_angle(PI), -PI);
    }

    proptest! {
        #[test]
        fn wrap_lands_in_half_open_interval(x in -1e3f64..1e3) {
            let w = wrap_angle(x);
            prop_assert!((-PI..PI).contains(&w));
            prop_assert!(((x - w) / (2.0 * PI)).round() * 2.0 * PI - (x - w) < 1e-9);
        }
    }

    #[test]
    fn stationary_swarm_keeps_global_best() {
        let s = stats(2, 1);
        let pats = vec![BeamPattern::uncovered(2)];
        let x = vec![0.3, -1.2];
        let mut swarm = PsoSwarm::from_state(&s, &pats, &PsoConfig::default(), 0, vec![x.clone(); 4], vec![vec![0.0; 2]; 4]).unwrap();
        let g0 = swarm.global_value;
        for _ in 0..5 {
            swarm.step();
            assert_eq!(swarm.global_value, g0);
            assert_eq!(swarm.positions[0], x);
        }
    }

    #[test]
    fn global_best_is_monotone_and_near_grid_optimum() {
        let pats = vec![BeamPattern::uncovered(2)];
        let cfg = PsoConfig {
            swarm: 20,
            iterations: 60,
            ..Default::default()
        };
        let mut ratios = Vec::new();
        for seed in 0..10 {
            let s = stats(2, 10 + seed);
            let r = pso_solve(&s, &pats, &cfg, seed).unwrap();
            assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
            let mut best: f64 = 0.0;
            for a in 0..128 {
                let v = CVector::from_vec(vec![cis(0.0), cis(2.0 * PI * a as f64 / 128.0)]);
                best = best.max(crate::rate::jensen_rate(&v, &s.xi[0]));
            }
            ratios.push(r.objective / best);
        }
        ratios.sort_by(f64::total_cmp);
        assert!(ratios[5] > 0.95, "{ratios:?}");
    }
}
