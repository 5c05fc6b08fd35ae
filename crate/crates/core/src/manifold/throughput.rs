//! Total-throughput design over a fixed pattern set with a relaxed row-stochastic
//! schedule.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{rcg, ManifoldPoint, RcgConfig, RcgTraceRow, SmoothObjective, Stochastic};
use crate::channel::ChannelStats;
use crate::design::Design;
use crate::error::{MisError, Result};
use crate::geometry::BeamPattern;
use crate::linalg::{argmax, random_phases, real_embedding, CMatrix, CVector, C64};
use crate::rate::{rate_from_snr, snr_matrix, RateReport};

/// `f(φ, θ, X) = Σ_k Σ_u ξ_{k,u} log2(1 + v_u^H Ξ_k v_u)`.
///
/// With a simplex block in the point, `X` is that block; otherwise the fixed schedule is
/// used and no schedule gradient is produced.
pub struct PatternObjective<'a> {
    pub stats: &'a ChannelStats,
    pub patterns: &'a [BeamPattern],
    pub fixed: Option<DMatrix<f64>>,
    xi_real: Vec<DMatrix<f64>>,
}

impl<'a> PatternObjective<'a> {
    pub fn new(stats: &'a ChannelStats, patterns: &'a [BeamPattern]) -> Self {
        PatternObjective {
            stats,
            patterns,
            fixed: None,
            xi_real: stats.xi.iter().map(real_embedding).collect(),
        }
    }

    /// Every user `k` served by `patterns[k]` with weight one.
    pub fn per_user(stats: &'a ChannelStats, patterns: &'a [BeamPattern]) -> Self {
        PatternObjective {
            stats,
            patterns,
            fixed: Some(DMatrix::identity(patterns.len(), patterns.len())),
            xi_real: stats.xi.iter().map(real_embedding).collect(),
        }
    }

    fn schedule<'b>(&'b self, p: &'b ManifoldPoint) -> &'b DMatrix<f64> {
        p.blocks.first().or(self.fixed.as_ref()).expect("schedule block or fixed schedule")
    }

    fn eval(&self, p: &ManifoldPoint, want_grad: bool) -> (f64, Option<ManifoldPoint>) {
        let x = self.schedule(p);
        let with_blocks = want_grad && !p.blocks.is_empty();
        let mut g = want_grad.then(|| p.zeros_like());
        let m = p.phi.len();
        let bars: Vec<CVector> = self.patterns.iter().map(|pat| pat.overlay(&p.theta)).collect();
        // Effective phase vectors of all patterns as columns, stacked as [Re; Im], so that
        // each user needs a single real matrix product.
        let v = CMatrix::from_fn(m, self.patterns.len(), |i, u| p.phi[i] * bars[u][i]);
        let v_real = DMatrix::from_fn(2 * m, self.patterns.len(), |i, u| if i < m { v[(i, u)].re } else { v[(i - m, u)].im });
        let mut f = 0.0;
        for k in 0..x.nrows() {
            let used: Vec<usize> = (0..self.patterns.len()).filter(|&u| x[(k, u)] != 0.0 || with_blocks).collect();
            if used.is_empty() {
                continue;
            }
            let z_real = if used.len() == self.patterns.len() {
                &self.xi_real[k] * &v_real
            } else {
                &self.xi_real[k] * v_real.select_columns(&used)
            };
            for (c, &u) in used.iter().enumerate() {
                let zu = CVector::from_fn(m, |i, _| C64::new(z_real[(i, c)], z_real[(i + m, c)]));
                let snr = v.column(u).dotc(&zu).re.max(0.0);
                let r = rate_from_snr(snr);
                let w = x[(k, u)];
                f += w * r;
                let Some(g) = g.as_mut() else { continue };
                if with_blocks {
                    g.blocks[0][(k, u)] = r;
                }
                if w == 0.0 {
                    continue;
                }
                let scale = C64::from(2.0 * w / ((1.0 + snr) * LN_2));
                let bar = &bars[u];
                for i in 0..m {
                    g.phi[i] += bar[i].conj() * zu[i] * scale;
                }
                let pat = &self.patterns[u];
                for n in 0..pat.n() {
                    let t = pat.target(n);
                    g.theta[n] += p.phi[t].conj() * zu[t] * scale;
                }
            }
        }
        (f, g)
    }
}

impl SmoothObjective for PatternObjective<'_> {
    fn value(&self, p: &ManifoldPoint) -> f64 {
        self.eval(p, false).0
    }

    fn value_grad(&self, p: &ManifoldPoint) -> (f64, ManifoldPoint) {
        let (f, g) = self.eval(p, true);
        (f, g.expect("gradient requested"))
    }
}

#[derive(Debug, Clone)]
pub struct ThroughputResult {
    pub design: Design,
    /// Relaxed schedule at termination.
    pub relaxed: DMatrix<f64>,
    /// Relaxed objective `Σ ξ r` at termination.
    pub relaxed_value: f64,
    /// Sum of rates after thresholding `X` by per-user argmax, before any reassignment.
    pub thresholded_value: f64,
    /// `max_k (1 − max_u ξ_{k,u})`.
    pub tightness: f64,
    /// Rates with `T = K`, so `throughput` is the plain sum of rates.
    pub report: RateReport,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub trace: Vec<P5TraceRow>,
}

impl ThroughputResult {
    /// Relative change of the objective caused by thresholding.
    pub fn threshold_change(&self) -> f64 {
        (self.relaxed_value - self.thresholded_value).abs() / self.relaxed_value.abs().max(1e-300)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P5TraceRow {
    pub start: usize,
    #[serde(flatten)]
    pub row: RcgTraceRow,
}

/// Manifold design for total throughput. Each start draws random phases and a uniform
/// schedule; the final schedule is the per-user argmax of the relaxed one, after which
/// each user moves to the pattern with its highest rate under the final phases.
pub fn rcg_solve_p5(stats: &ChannelStats, patterns: &[BeamPattern], cfg: &RcgConfig, seed: u64) -> Result<ThroughputResult> {
    cfg.validate()?;
    if patterns.is_empty() {
        return Err(MisError::shape("no beam patterns"));
    }
    if patterns.iter().any(|p| p.m() != stats.m() || p.n() != patterns[0].n()) {
        return Err(MisError::shape("patterns do not match the channel dimension"));
    }
    let k = stats.users();
    let u = patterns.len();
    let n = patterns[0].n();
    let obj = PatternObjective::new(stats, patterns);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ThroughputResult> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    for start in 0..cfg.starts {
        let p0 = ManifoldPoint {
            phi: random_phases(&mut rng, stats.m()),
            theta: random_phases(&mut rng, n),
            blocks: vec![DMatrix::from_element(k, u, 1.0 / u as f64)],
        };
        let out = rcg(&obj, p0, Stochastic::Rows, cfg)?;
        iterations += out.iterations;
        trace.extend(out.trace.iter().cloned().map(|row| P5TraceRow { start, row }));
        let x = out.point.blocks[0].clone();
        let tightness = (0..k)
            .map(|i| 1.0 - x.row(i).iter().copied().fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let thr: Vec<usize> = (0..k).map(|i| argmax(x.row(i).iter().copied())).collect();
        let snr = snr_matrix(stats, patterns, &out.point.theta, &out.point.phi);
        let thresholded_value = (0..k).map(|i| rate_from_snr(snr[(i, thr[i])])).sum();
        let assignment: Vec<usize> = (0..k).map(|i| argmax(snr.row(i).iter().copied())).collect();
        let design = Design::from_assignment(out.point.phi.clone(), out.point.theta.clone(), patterns, &assignment);
        let report = design.report(stats, k as f64);
        let res = ThroughputResult {
            objective: report.throughput,
            design,
            relaxed: x,
            relaxed_value: out.value,
            thresholded_value,
            tightness,
            report,
            converged: out.converged,
            iterations: out.iterations,
            grad_norm: out.grad_norm,
            trace: Vec::new(),
        };
        if best.as_ref().is_none_or(|b| res.objective > b.objective) {
            best = Some(res);
        }
    }
    let mut res = best.expect("at least one start");
    res.iterations = iterations;
    res.trace = trace;
    Ok(res)
}

/// Re-optimize the phases of a design with every user's placement held fixed.
pub fn refine_phases(stats: &ChannelStats, design: &Design, cfg: &RcgConfig) -> Result<(Design, super::RcgOutcome)> {
    let obj = PatternObjective::per_user(stats, &design.user_patterns);
    let p0 = ManifoldPoint {
        phi: design.phi.clone(),
        theta: design.theta.clone(),
        blocks: vec![],
    };
    let out = rcg(&obj, p0, Stochastic::Rows, cfg)?;
    let refined = Design {
        phi: out.point.phi.clone(),
        theta: out.point.theta.clone(),
        user_patterns: design.user_patterns.clone(),
    };
    Ok((refined, out))
}
