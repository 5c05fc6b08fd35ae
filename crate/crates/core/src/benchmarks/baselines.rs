//! Reference surfaces: one static layer without MS2, and a surface reconfigured for every
//! user.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bcd::{algorithm1, BcdConfig};
use crate::channel::ChannelStats;
use crate::design::Design;
use crate::error::{MisError, Result};
use crate::geometry::BeamPattern;
use crate::linalg::{random_phases, CMatrix, CVector, C64};
use crate::manifold::{rcg, rcg_solve_p5, ManifoldPoint, RcgConfig, SmoothObjective, Stochastic};
use crate::rate::{jensen_rate, Objective, RateReport};

#[derive(Debug, Clone, PartialEq)]
pub enum SingleLayerSolver {
    Bcd(BcdConfig),
    Rcg(RcgConfig),
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub design: Design,
    /// Rates with `T = K`.
    pub report: RateReport,
    pub objective: f64,
}

/// Phase-only design of MS1 alone (`v = φ`). The manifold solver handles the throughput
/// objective only.
pub fn single_layer_baseline(stats: &ChannelStats, solver: &SingleLayerSolver, objective: Objective, seed: u64) -> Result<BaselineResult> {
    let patterns = [BeamPattern::uncovered(stats.m())];
    let (phi, report) = match solver {
        SingleLayerSolver::Bcd(cfg) => {
            let cfg = BcdConfig { objective, ..cfg.clone() };
            let r = algorithm1(stats, &patterns, &cfg, seed)?;
            (r.design.phi, r.report)
        }
        SingleLayerSolver::Rcg(cfg) => {
            if objective != Objective::Throughput {
                return Err(MisError::config("the manifold solver maximizes throughput only"));
            }
            let r = rcg_solve_p5(stats, &patterns, cfg, seed)?;
            (r.design.phi, r.report)
        }
    };
    Ok(BaselineResult {
        objective: report.objective(objective),
        design: Design::single_layer(phi, stats.users()),
        report,
    })
}

/// `v^H Ξ v` on the circle manifold.
struct Quadratic<'a>(&'a CMatrix);

impl SmoothObjective for Quadratic<'_> {
    fn value(&self, p: &ManifoldPoint) -> f64 {
        p.phi.dotc(&(self.0 * &p.phi)).re
    }

    fn value_grad(&self, p: &ManifoldPoint) -> (f64, ManifoldPoint) {
        let z = self.0 * &p.phi;
        let mut g = p.zeros_like();
        g.phi = &z * C64::from(2.0);
        (p.phi.dotc(&z).re, g)
    }
}

fn principal_phases(xi: &CMatrix) -> CVector {
    let eig = xi.clone().symmetric_eigen();
    let top = crate::linalg::argmax(eig.eigenvalues.iter().copied());
    let u = eig.eigenvectors.column(top);
    CVector::from_fn(u.len(), |i, _| if u[i].norm() > 1e-300 { u[i] / u[i].norm() } else { C64::new(1.0, 0.0) })
}

#[derive(Debug, Clone)]
pub struct DynamicRisResult {
    /// Phase vector used for each user.
    pub phases: Vec<CVector>,
    /// Rates with `T = K`.
    pub report: RateReport,
}

/// Upper reference: every user gets its own unit-modulus profile over the `M` elements,
/// maximized by circle-manifold conjugate gradient from the principal-eigenvector phases
/// and `random_starts` random points.
pub fn dynamic_ris_baseline(stats: &ChannelStats, cfg: &RcgConfig, random_starts: usize, seed: u64) -> Result<DynamicRisResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phases = Vec::with_capacity(stats.users());
    for xi in &stats.xi {
        let obj = Quadratic(xi);
        let mut starts = vec![principal_phases(xi)];
        starts.extend((0..random_starts).map(|_| random_phases(&mut rng, stats.m())));
        let mut best: Option<(f64, CVector)> = None;
        for s in starts {
            let p0 = ManifoldPoint {
                phi: s,
                theta: CVector::zeros(0),
                blocks: Vec::<DMatrix<f64>>::new(),
            };
            let out = rcg(&obj, p0, Stochastic::Rows, cfg)?;
            if best.as_ref().is_none_or(|b| out.value > b.0) {
                best = Some((out.value, out.point.phi));
            }
        }
        phases.push(best.expect("at least one start").1);
    }
    let rates = phases.iter().zip(&stats.xi).map(|(v, xi)| jensen_rate(v, xi)).collect();
    Ok(DynamicRisResult {
        phases,
        report: RateReport::from_rates(rates, stats.users() as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{substream, Correlations, LinkBudget};
    use crate::rate::statistical_snr;

    fn los_stats(m: usize, k: usize, seed: u64) -> ChannelStats {
        let mut rng = substream(seed, 0);
        let a = random_phases(&mut rng, m);
        let b = random_phases(&mut rng, 3);
        let h = (0..k).map(|_| random_phases(&mut rng, m)).collect();
        ChannelStats::from_parts(&a * b.transpose(), h, Correlations::identity(m, 3), &LinkBudget::uniform(k, 0.05, f64::INFINITY)).unwrap()
    }

    #[test]
    fn rank_one_alignment_for_both_solvers() {
        // Ξ = c w w^H with |w_i| = 1: the optimum is c M²
        let s = los_stats(6, 1, 1);
        let c = 0.05 * 3.0;
        let opt = c * 36.0;
        let a = single_layer_baseline(&s, &SingleLayerSolver::Bcd(BcdConfig::default()), Objective::Throughput, 1).unwrap();
        let b = single_layer_baseline(&s, &SingleLayerSolver::Rcg(RcgConfig::default()), Objective::Throughput, 1).unwrap();
        for r in [&a, &b] {
            let snr = statistical_snr(&r.design.phi, &s.xi[0]);
            assert!((snr - opt).abs() < 1e-3 * opt, "{snr} vs {opt}");
        }
        assert!((a.objective - b.objective).abs() < 0.05 * b.objective);
        let d = dynamic_ris_baseline(&s, &RcgConfig::default(), 5, 2).unwrap();
        assert!((d.report.per_user[0] - (1.0 + opt).log2()).abs() < 1e-3);
    }

    #[test]
    fn identity_form_gives_m() {
        let mut s = los_stats(5, 2, 3);
        s.xi = vec![CMatrix::identity(5, 5); 2];
        let d = dynamic_ris_baseline(&s, &RcgConfig::default(), 2, 0).unwrap();
        for v in &d.phases {
            assert!((statistical_snr(v, &s.xi[0]) - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn manifold_solver_rejects_min_rate() {
        let s = los_stats(4, 2, 4);
        assert!(single_layer_baseline(&s, &SingleLayerSolver::Rcg(RcgConfig::default()), Objective::MinRate, 0).is_err());
    }
}
