//! Element-wise movable MS2: each MS2 element may sit over any MS1 element, with a
//! separate placement per user.
//!
//! The placement of user `k` is relaxed to a column-stochastic `M×N` matrix `S_k` and the
//! effective phase vector becomes `v_k = φ ⊙ (1 + S_k(θ − 1))`, which equals the discrete
//! composition whenever `S_k` is a feasible 0/1 placement.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::throughput::refine_phases;
use super::{rcg, simplex_retract, ManifoldPoint, RcgConfig, RcgTraceRow, SmoothObjective, Stochastic};
use crate::channel::ChannelStats;
use crate::design::Design;
use crate::error::{MisError, Result};
use crate::geometry::BeamPattern;
use crate::linalg::{random_phases, CMatrix, CVector, C64, ONE};
use crate::rate::{rate_from_snr, RateReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElementwiseConfig {
    pub rcg: RcgConfig,
    /// Weight of the binary-promoting `p` term.
    pub p_weight: f64,
    /// Weight of the row-overlap `q` penalty.
    pub q_weight: f64,
    /// Re-optimize phases after the placements are repaired.
    pub refine: bool,
    /// Mixing weight toward the uniform placement when starting from a block design.
    pub warm_mix: f64,
    /// Rounds of placement local search alternated with phase refinement; 0 disables.
    pub polish_rounds: usize,
}

impl Default for ElementwiseConfig {
    fn default() -> Self {
        ElementwiseConfig {
            rcg: RcgConfig::default(),
            p_weight: 1.0,
            q_weight: 1.0,
            refine: true,
            warm_mix: 0.05,
            polish_rounds: 20,
        }
    }
}

/// `p = Σ (1/N)(S_{mn} − ½)²` and `q = Σ_m (max{Σ_n S_{mn}, 1} − 1)²`, summed over users.
pub fn penalties_pq(stack: &[DMatrix<f64>]) -> (f64, f64) {
    let mut p = 0.0;
    let mut q = 0.0;
    for s in stack {
        let n = s.ncols() as f64;
        p += s.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>() / n;
        q += s.row_iter().map(|r| (r.sum().max(1.0) - 1.0).powi(2)).sum::<f64>();
    }
    (p, q)
}

/// Penalized sum of rates `Σ_k log2(1 + γ_k) + w_p Σ p − w_q Σ q`.
pub struct ElementwiseObjective<'a> {
    pub stats: &'a ChannelStats,
    pub p_weight: f64,
    pub q_weight: f64,
}

impl ElementwiseObjective<'_> {
    fn effective(p: &ManifoldPoint, k: usize) -> (CVector, CVector) {
        let tm1 = p.theta.map(|t| t - ONE);
        let w = (p.blocks[k].map(C64::from) * tm1).map(|z| z + ONE);
        (p.phi.component_mul(&w), w)
    }

    fn eval(&self, p: &ManifoldPoint, want_grad: bool) -> (f64, Option<ManifoldPoint>) {
        let (pen_p, pen_q) = penalties_pq(&p.blocks);
        let mut f = self.p_weight * pen_p - self.q_weight * pen_q;
        let mut g = want_grad.then(|| p.zeros_like());
        for k in 0..self.stats.users() {
            let (v, w) = Self::effective(p, k);
            let z = &self.stats.xi[k] * &v;
            let snr = v.dotc(&z).re.max(0.0);
            f += rate_from_snr(snr);
            let Some(g) = g.as_mut() else { continue };
            let c = 2.0 / ((1.0 + snr) * LN_2);
            let s = &p.blocks[k];
            // y = diag(φ*) Ξ v
            let y = CVector::from_fn(v.len(), |m, _| p.phi[m].conj() * z[m]);
            for m in 0..v.len() {
                g.phi[m] += w[m].conj() * z[m] * c;
            }
            let sy = s.transpose().map(C64::from) * &y;
            g.theta += sy * C64::from(c);
            let n = s.ncols() as f64;
            for mi in 0..s.nrows() {
                let over = s.row(mi).sum().max(1.0) - 1.0;
                for ni in 0..s.ncols() {
                    let rate = c * (y[mi].conj() * (p.theta[ni] - ONE)).re;
                    let pg = self.p_weight * 2.0 / n * (s[(mi, ni)] - 0.5);
                    let qg = -self.q_weight * 2.0 * over;
                    g.blocks[k][(mi, ni)] = rate + pg + qg;
                }
            }
        }
        (f, g)
    }
}

impl SmoothObjective for ElementwiseObjective<'_> {
    fn value(&self, p: &ManifoldPoint) -> f64 {
        self.eval(p, false).0
    }

    fn value_grad(&self, p: &ManifoldPoint) -> (f64, ManifoldPoint) {
        let (f, g) = self.eval(p, true);
        (f, g.expect("gradient requested"))
    }
}

/// Round a relaxed placement to a feasible one: entries are taken in decreasing order of
/// relaxed value and an MS2 element is placed when both it and the MS1 slot are free.
/// Ties go to the lower MS1 index, then the lower MS2 index.
pub fn repair_placement(s: &DMatrix<f64>) -> Result<BeamPattern> {
    let (m, n) = s.shape();
    if n > m {
        return Err(MisError::InvalidLayout {
            field: "ms2",
            reason: format!("{n} MS2 elements cannot be placed on {m} MS1 elements"),
        });
    }
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(m * n);
    for ni in 0..n {
        for mi in 0..m {
            entries.push((s[(mi, ni)], mi, ni));
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; m];
    let mut placed = 0;
    for (_, mi, ni) in entries {
        if map[ni] == usize::MAX && !used[mi] {
            map[ni] = mi;
            used[mi] = true;
            placed += 1;
            if placed == n {
                break;
            }
        }
    }
    BeamPattern::from_map(m, map)
}

/// Number of MS2 elements whose column argmax lost its slot during repair.
fn displaced(s: &DMatrix<f64>, pattern: &BeamPattern) -> usize {
    (0..s.ncols())
        .filter(|&ni| crate::linalg::argmax(s.column(ni).iter().copied()) != pattern.target(ni))
        .count()
}

/// Best-improvement local search over one user's placement with phases fixed. Moves are
/// relocating an MS2 element to a free MS1 slot and swapping two MS2 elements. Returns the
/// improved map and the number of moves applied.
pub fn improve_placement(xi: &CMatrix, phi: &CVector, theta: &CVector, map: &[usize]) -> (Vec<usize>, usize) {
    let m = phi.len();
    let mut map = map.to_vec();
    let mut cover: Vec<Option<usize>> = vec![None; m];
    for (n, &t) in map.iter().enumerate() {
        cover[t] = Some(n);
    }
    let mut v = CVector::from_fn(m, |i, _| match cover[i] {
        Some(n) => phi[i] * theta[n],
        None => phi[i],
    });
    let mut z = xi * &v;
    let mut moves = 0;
    // gain of replacing v_i by a and v_j by b
    let gain = |v: &CVector, z: &CVector, i: usize, a: C64, j: usize, b: C64| {
        let (di, dj) = (a - v[i], b - v[j]);
        2.0 * (di.conj() * z[i]).re
            + 2.0 * (dj.conj() * z[j]).re
            + di.norm_sqr() * xi[(i, i)].re
            + dj.norm_sqr() * xi[(j, j)].re
            + 2.0 * (di.conj() * xi[(i, j)] * dj).re
    };
    loop {
        let f = v.dotc(&z).re;
        let mut best = (1e-12 * f.abs().max(1e-300), None);
        for n in 0..map.len() {
            let i = map[n];
            for j in 0..m {
                match cover[j] {
                    None => {
                        let g = gain(&v, &z, i, phi[i], j, phi[j] * theta[n]);
                        if g > best.0 {
                            best = (g, Some((n, j, None)));
                        }
                    }
                    Some(n2) if n2 > n => {
                        let g = gain(&v, &z, i, phi[i] * theta[n2], j, phi[j] * theta[n]);
                        if g > best.0 {
                            best = (g, Some((n, j, Some(n2))));
                        }
                    }
                    _ => {}
                }
            }
        }
        let Some((n, j, other)) = best.1 else {
            return (map, moves);
        };
        let i = map[n];
        let (a, b) = match other {
            None => (phi[i], phi[j] * theta[n]),
            Some(n2) => (phi[i] * theta[n2], phi[j] * theta[n]),
        };
        let (di, dj) = (a - v[i], b - v[j]);
        z += xi.column(i) * di + xi.column(j) * dj;
        v[i] = a;
        v[j] = b;
        cover[i] = other;
        if let Some(n2) = other {
            map[n2] = i;
        }
        cover[j] = Some(n);
        map[n] = j;
        moves += 1;
    }
}

/// Alternate per-user placement local search with phase refinement until the sum of rates
/// stops improving.
fn polish(stats: &ChannelStats, design: Design, cfg: &ElementwiseConfig) -> Result<(Design, usize)> {
    let k = stats.users();
    let mut best = design;
    let mut value = best.report(stats, k as f64).throughput;
    let mut iterations = 0;
    for _ in 0..cfg.polish_rounds {
        let mut moved = 0;
        let mut patterns = Vec::with_capacity(k);
        for (u, p) in best.user_patterns.iter().enumerate() {
            let (map, moves) = improve_placement(&stats.xi[u], &best.phi, &best.theta, p.map());
            moved += moves;
            patterns.push(BeamPattern::from_map(stats.m(), map)?);
        }
        let placed = Design {
            user_patterns: patterns,
            ..best.clone()
        };
        let (refined, out) = refine_phases(stats, &placed, &cfg.rcg)?;
        iterations += out.iterations;
        let candidate = if refined.report(stats, k as f64).throughput >= placed.report(stats, k as f64).throughput {
            refined
        } else {
            placed
        };
        let new_value = candidate.report(stats, k as f64).throughput;
        if new_value <= value * (1.0 + 1e-10) {
            if new_value > value {
                best = candidate;
            }
            break;
        }
        best = candidate;
        value = new_value;
        if moved == 0 {
            break;
        }
    }
    Ok((best, iterations))
}

#[derive(Debug, Clone)]
pub struct ElementwiseResult {
    pub design: Design,
    /// Penalized relaxed objective at termination.
    pub relaxed_value: f64,
    /// Sum of rates right after repair, before phase refinement.
    pub repaired_value: f64,
    /// Rates with `T = K`.
    pub report: RateReport,
    pub objective: f64,
    /// MS2 elements moved away from their column argmax by the repair.
    pub displaced: usize,
    /// True when the (polished) warm-start design beat the repaired candidate.
    pub kept_warm: bool,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub trace: Vec<RcgTraceRow>,
}

/// Element-wise placement and phase design for total throughput.
///
/// `n` is the number of MS2 elements. With `warm`, the phases start from that design and
/// each `S_k` from its placement mixed slightly toward uniform; the warm design is also
/// a candidate for the returned solution, since it is feasible here.
pub fn rcg_solve_p7(stats: &ChannelStats, n: usize, cfg: &ElementwiseConfig, seed: u64, warm: Option<&Design>) -> Result<ElementwiseResult> {
    cfg.rcg.validate()?;
    let m = stats.m();
    let k = stats.users();
    if n == 0 || n > m {
        return Err(MisError::InvalidLayout {
            field: "ms2",
            reason: format!("element-wise design needs 0 < N <= M, got N = {n}, M = {m}"),
        });
    }
    if !(cfg.warm_mix > 0.0 && cfg.warm_mix <= 1.0) {
        return Err(MisError::config("elementwise: warm_mix must lie in (0, 1]"));
    }
    if let Some(w) = warm {
        w.validate(stats)?;
        if w.theta.len() != n {
            return Err(MisError::shape("warm design has a different MS2 size"));
        }
    }
    let obj = ElementwiseObjective {
        stats,
        p_weight: cfg.p_weight,
        q_weight: cfg.q_weight,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p0 = match warm {
        Some(w) => ManifoldPoint {
            phi: w.phi.clone(),
            theta: w.theta.clone(),
            blocks: w
                .user_patterns
                .iter()
                .map(|p| p.selection_matrix() * (1.0 - cfg.warm_mix) + DMatrix::from_element(m, n, cfg.warm_mix / m as f64))
                .collect(),
        },
        None => ManifoldPoint {
            phi: random_phases(&mut rng, m),
            theta: random_phases(&mut rng, n),
            blocks: (0..k)
                .map(|_| simplex_retract(&DMatrix::from_fn(m, n, |_, _| rng.random::<f64>()), Stochastic::Columns))
                .collect(),
        },
    };
    let out = rcg(&obj, p0, Stochastic::Columns, &cfg.rcg)?;
    let patterns = out.point.blocks.iter().map(repair_placement).collect::<Result<Vec<_>>>()?;
    let moved = out.point.blocks.iter().zip(&patterns).map(|(s, p)| displaced(s, p)).sum();
    let repaired = Design {
        phi: out.point.phi.clone(),
        theta: out.point.theta.clone(),
        user_patterns: patterns,
    };
    let repaired_value = repaired.report(stats, k as f64).throughput;
    let mut design = repaired;
    let mut iterations = out.iterations;
    if cfg.refine {
        let (refined, r) = refine_phases(stats, &design, &cfg.rcg)?;
        iterations += r.iterations;
        design = refined;
    }
    if cfg.polish_rounds > 0 {
        let (polished, it) = polish(stats, design, cfg)?;
        iterations += it;
        design = polished;
    }
    let mut report = design.report(stats, k as f64);
    let mut kept_warm = false;
    if let Some(w) = warm {
        // A block design is feasible here, so it is also polished and compared.
        let (w, it) = if cfg.polish_rounds > 0 { polish(stats, w.clone(), cfg)? } else { (w.clone(), 0) };
        iterations += it;
        let wr = w.report(stats, k as f64);
        if wr.throughput > report.throughput {
            design = w;
            report = wr;
            kept_warm = true;
        }
    }
    Ok(ElementwiseResult {
        objective: report.throughput,
        design,
        relaxed_value: out.value,
        repaired_value,
        report,
        displaced: moved,
        kept_warm,
        converged: out.converged,
        iterations,
        grad_norm: out.grad_norm,
        trace: out.trace,
    })
}
