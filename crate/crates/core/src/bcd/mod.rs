//! Penalty-based block coordinate descent with successive convex approximation for the
//! max-min rate design, with a per-user-slack variant for total throughput.

pub mod forms;
pub mod subsolver;

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelStats;
use crate::design::Design;
use crate::error::{MisError, Result};
use crate::geometry::BeamPattern;
use crate::linalg::{max_modulus_error, normalize_entries, random_phases, CVector, C64, ONE};
use crate::rate::{rate_from_snr, snr_matrix, statistical_snr, Objective, RateReport, Schedule};

pub use forms::{build_quadratic_forms, cross_identity_residual, QuadraticForms};
pub use subsolver::{max_min_affine_disk, solve_schedule_lp, AffinePiece, SubsolverConfig};

use subsolver::{max_sum_log_disk, WeightedLogPiece};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcdConfig {
    pub rho0: f64,
    pub zeta: f64,
    /// Inner loop stops when the relative objective increase falls below this.
    pub eps1: f64,
    /// Outer loop stops when the binary penalty falls below this.
    pub eps2: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub subsolver: SubsolverConfig,
    pub objective: Objective,
    /// Independent random initializations; the best final design is kept.
    pub starts: usize,
    /// After thresholding, move each user to its best pattern for the final phases.
    pub reassign: bool,
    /// Record the cross-form identity residual at every inner iteration.
    pub verify_forms: bool,
}

impl Default for BcdConfig {
    fn default() -> Self {
        BcdConfig {
            rho0: 1e-3,
            zeta: 5.0,
            eps1: 1e-4,
            eps2: 1e-6,
            max_inner: 100,
            max_outer: 15,
            subsolver: SubsolverConfig::default(),
            objective: Objective::MinRate,
            starts: 1,
            reassign: true,
            verify_forms: false,
        }
    }
}

impl BcdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 >= 0.0) || !(self.zeta >= 1.0) {
            return Err(MisError::config("bcd: need rho0 >= 0 and zeta >= 1"));
        }
        if !(self.eps1 > 0.0 && self.eps2 > 0.0) {
            return Err(MisError::config("bcd: thresholds must be positive"));
        }
        if self.max_inner == 0 || self.max_outer == 0 || self.starts == 0 {
            return Err(MisError::config("bcd: iteration caps and starts must be positive"));
        }
        if !(self.subsolver.tol > 0.0) || self.subsolver.max_iter == 0 {
            return Err(MisError::config("bcd: subsolver tolerance and cap must be positive"));
        }
        Ok(())
    }
}

/// Binary penalty `h(X) = Σ (ξ − ξ²)`.
pub fn penalty_h(x: &DMatrix<f64>) -> Result<f64> {
    let mut h = 0.0;
    for &v in x.iter() {
        if !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(MisError::Domain(format!("schedule entry {v} outside [0, 1]")));
        }
        let v = v.clamp(0.0, 1.0);
        h += v - v * v;
    }
    Ok(h)
}

/// Tangent lower bound of `ξ²` at `ξ^ℓ`: `2ξ^ℓ ξ − (ξ^ℓ)²`.
pub fn taylor_lb_scalar(xi: f64, xi_l: f64) -> f64 {
    -xi_l * xi_l + 2.0 * xi_l * xi
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcdTraceRow {
    pub start: usize,
    pub outer: usize,
    pub inner: usize,
    pub rho: f64,
    /// Common SNR level (max-min) or sum of per-user rates (throughput).
    pub mu: f64,
    pub h: f64,
    /// Penalized objective `μ − ρh` after the iteration.
    pub objective: f64,
    pub wall_ms: f64,
    /// Cross-form identity residual, when verification is enabled.
    pub form_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BcdResult {
    pub design: Design,
    /// Thresholded schedule before any reassignment.
    pub schedule: Schedule,
    /// Relaxed schedule at termination.
    pub relaxed: DMatrix<f64>,
    pub report: RateReport,
    /// Value of the configured objective for `design`.
    pub objective: f64,
    pub h_final: f64,
    pub converged: bool,
    pub iterations: usize,
    pub stalls: usize,
    /// Largest relative change of a user's mean SNR when the relaxed phases are projected
    /// to unit modulus.
    pub relaxation_change: f64,
    pub trace: Vec<BcdTraceRow>,
}

struct State {
    phi: CVector,
    theta: CVector,
    x: DMatrix<f64>,
}

/// Value of the relaxed problem for the current state: `min_k Σ_u ξ q` or `Σ_k Σ_u ξ r`.
fn level(q: &DMatrix<f64>, x: &DMatrix<f64>, objective: Objective) -> f64 {
    match objective {
        Objective::MinRate => (0..q.nrows())
            .map(|k| x.row(k).dot(&q.row(k)))
            .fold(f64::INFINITY, f64::min),
        Objective::Throughput => (0..q.nrows())
            .map(|k| x.row(k).dot(&q.row(k).map(rate_from_snr)))
            .sum(),
    }
}

/// Throughput-variant schedule step: each user maximizes `Σ_u ξ (r − ρ(1 − 2ξ^ℓ))`.
fn schedule_step_sum(q: &DMatrix<f64>, x_l: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let (k, u) = q.shape();
    let mut x = DMatrix::zeros(k, u);
    for i in 0..k {
        let best = crate::linalg::argmax((0..u).map(|j| rate_from_snr(q[(i, j)]) - rho * (1.0 - 2.0 * x_l[(i, j)])));
        x[(i, best)] = 1.0;
    }
    x
}

fn phi_step(
    stats: &ChannelStats,
    patterns: &[BeamPattern],
    st: &State,
    cfg: &BcdConfig,
    stalls: &mut usize,
) -> Result<CVector> {
    let (k, u) = st.x.shape();
    let b = forms::phi_forms(stats, patterns, &st.theta);
    match cfg.objective {
        Objective::MinRate => {
            let pieces: Vec<AffinePiece> = (0..k)
                .map(|i| {
                    let mut g = CVector::zeros(stats.m());
                    let mut c = 0.0;
                    for j in 0..u {
                        let w = st.x[(i, j)];
                        if w == 0.0 {
                            continue;
                        }
                        let bp = &b[i * u + j] * &st.phi;
                        c -= w * st.phi.dotc(&bp).re;
                        g.axpy(C64::from(w), &bp, ONE);
                    }
                    AffinePiece { g, c }
                })
                .collect();
            solve_pieces(&pieces, &st.phi, cfg, stalls)
        }
        Objective::Throughput => {
            let mut pieces = Vec::new();
            for i in 0..k {
                for j in 0..u {
                    let w = st.x[(i, j)];
                    if w == 0.0 {
                        continue;
                    }
                    let bp = &b[i * u + j] * &st.phi;
                    let c = -st.phi.dotc(&bp).re;
                    pieces.push(WeightedLogPiece {
                        weight: w,
                        piece: AffinePiece { g: bp, c },
                    });
                }
            }
            Ok(max_sum_log_disk(&pieces, &st.phi, &cfg.subsolver)?.0)
        }
    }
}

fn theta_step(
    stats: &ChannelStats,
    patterns: &[BeamPattern],
    st: &State,
    cfg: &BcdConfig,
    stalls: &mut usize,
) -> Result<CVector> {
    let (k, u) = st.x.shape();
    let tf = forms::theta_forms(stats, patterns, &st.phi);
    let piece = |i: usize, j: usize| {
        let f = &tf[i * u + j];
        let at = &f.a_mat * &st.theta;
        let c = f.a_scalar - st.theta.dotc(&at).re;
        AffinePiece { g: at + &f.a_vec, c }
    };
    match cfg.objective {
        Objective::MinRate => {
            let pieces: Vec<AffinePiece> = (0..k)
                .map(|i| {
                    let mut g = CVector::zeros(st.theta.len());
                    let mut c = 0.0;
                    for j in 0..u {
                        let w = st.x[(i, j)];
                        if w == 0.0 {
                            continue;
                        }
                        let p = piece(i, j);
                        g.axpy(C64::from(w), &p.g, ONE);
                        c += w * p.c;
                    }
                    AffinePiece { g, c }
                })
                .collect();
            solve_pieces(&pieces, &st.theta, cfg, stalls)
        }
        Objective::Throughput => {
            let mut pieces = Vec::new();
            for i in 0..k {
                for j in 0..u {
                    let w = st.x[(i, j)];
                    if w != 0.0 {
                        pieces.push(WeightedLogPiece { weight: w, piece: piece(i, j) });
                    }
                }
            }
            Ok(max_sum_log_disk(&pieces, &st.theta, &cfg.subsolver)?.0)
        }
    }
}

fn solve_pieces(pieces: &[AffinePiece], warm: &CVector, cfg: &BcdConfig, stalls: &mut usize) -> Result<CVector> {
    match max_min_affine_disk(pieces, warm, &cfg.subsolver) {
        Ok(sol) => Ok(sol.x),
        Err(MisError::Stalled { last, .. }) => {
            *stalls += 1;
            Ok(CVector::from_vec(last))
        }
        Err(e) => Err(e),
    }
}

/// Run the penalty BCD from one random start.
fn run_once(
    stats: &ChannelStats,
    patterns: &[BeamPattern],
    cfg: &BcdConfig,
    rng: &mut ChaCha8Rng,
    start: usize,
    clock: &Instant,
) -> Result<BcdResult> {
    let k = stats.users();
    let u = patterns.len();
    let n = patterns[0].n();
    let mut st = State {
        phi: random_phases(rng, stats.m()),
        theta: random_phases(rng, n),
        x: DMatrix::from_element(k, u, 1.0 / u as f64),
    };
    let mut rho = cfg.rho0;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut stalls = 0;
    let mut converged = false;
    let mut h = penalty_h(&st.x)?;

    for outer in 0..cfg.max_outer {
        rho *= cfg.zeta;
        let q = snr_matrix(stats, patterns, &st.theta, &st.phi);
        let mut prev = level(&q, &st.x, cfg.objective) - rho * h;
        let mut inner_done = false;
        for inner in 0..cfg.max_inner {
            let q = snr_matrix(stats, patterns, &st.theta, &st.phi);
            st.x = match cfg.objective {
                Objective::MinRate => solve_schedule_lp(&q, &st.x, rho)?.0,
                Objective::Throughput => schedule_step_sum(&q, &st.x, rho),
            };
            st.phi = phi_step(stats, patterns, &st, cfg, &mut stalls)?;
            if n > 0 {
                st.theta = theta_step(stats, patterns, &st, cfg, &mut stalls)?;
            }
            iterations += 1;
            let q = snr_matrix(stats, patterns, &st.theta, &st.phi);
            h = penalty_h(&st.x)?;
            let mu = level(&q, &st.x, cfg.objective);
            let obj = mu - rho * h;
            let form_residual = cfg.verify_forms.then(|| {
                let f = build_quadratic_forms(stats, patterns, &st.theta, &st.phi);
                cross_identity_residual(&f, stats, patterns, &st.theta, &st.phi)
            });
            trace.push(BcdTraceRow {
                start,
                outer,
                inner,
                rho,
                mu,
                h,
                objective: obj,
                wall_ms: clock.elapsed().as_secs_f64() * 1e3,
                form_residual,
            });
            let rel = (obj - prev) / prev.abs().max(1e-300);
            prev = obj;
            if rel < cfg.eps1 {
                inner_done = true;
                break;
            }
        }
        if h < cfg.eps2 {
            converged = inner_done;
            break;
        }
    }

    // thresholding and unit-modulus projection
    let snr_relaxed = snr_matrix(stats, patterns, &st.theta, &st.phi);
    let (phi, _) = normalize_entries(&st.phi, &st.phi, 1e-12);
    let (theta, _) = normalize_entries(&st.theta, &st.theta, 1e-12);
    let snr = snr_matrix(stats, patterns, &theta, &phi);
    let relaxation_change = snr_relaxed
        .iter()
        .zip(snr.iter())
        .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
        .fold(0.0, f64::max);
    let schedule = Schedule { x: st.x.clone() }.threshold();
    let mut assignment = schedule.assignment();
    if cfg.reassign {
        for (i, a) in assignment.iter_mut().enumerate() {
            let best = crate::linalg::argmax(snr.row(i).iter().copied());
            if snr[(i, best)] > snr[(i, *a)] {
                *a = best;
            }
        }
    }
    debug_assert!(max_modulus_error(&phi) < 1e-9);
    let design = Design::from_assignment(phi, theta, patterns, &assignment);
    let report = design.report(stats, 1.0);
    Ok(BcdResult {
        objective: report.objective(cfg.objective),
        design,
        schedule,
        relaxed: st.x,
        report,
        h_final: h,
        converged,
        iterations,
        stalls,
        relaxation_change,
        trace,
    })
}

/// Penalty BCD-SCA over a fixed pattern set. Reported throughput uses `T = K`, i.e. the
/// plain sum of per-user rates; callers rescale with their own time budget.
pub fn algorithm1(stats: &ChannelStats, patterns: &[BeamPattern], cfg: &BcdConfig, seed: u64) -> Result<BcdResult> {
    cfg.validate()?;
    if patterns.is_empty() {
        return Err(MisError::shape("no beam patterns"));
    }
    if patterns.iter().any(|p| p.m() != stats.m() || p.n() != patterns[0].n()) {
        return Err(MisError::shape("patterns do not match the channel dimension"));
    }
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<BcdResult> = None;
    for start in 0..cfg.starts {
        let mut res = run_once(stats, patterns, cfg, &mut rng, start, &clock)?;
        if let Some(b) = best.take() {
            let mut trace = b.trace.clone();
            trace.append(&mut res.trace);
            let iterations = b.iterations + res.iterations;
            let stalls = b.stalls + res.stalls;
            let mut keep = if res.objective > b.objective { res } else { b };
            keep.trace = trace;
            keep.iterations = iterations;
            keep.stalls = stalls;
            best = Some(keep);
        } else {
            best = Some(res);
        }
    }
    let mut res = best.expect("at least one start");
    // report throughput with T = K so that it equals the sum of rates
    res.report = res.design.report(stats, stats.users() as f64);
    res.objective = res.report.objective(cfg.objective);
    Ok(res)
}

/// Mean SNR of each user at the design's effective phases; convenience for callers that
/// compare relaxed and projected solutions.
pub fn user_snrs(stats: &ChannelStats, design: &Design) -> Vec<f64> {
    (0..stats.users())
        .map(|k| statistical_snr(&design.effective(k), &stats.xi[k]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{LinkGeometry, UserGeometry};
    use crate::geometry::{build_layout, enumerate_patterns, LayoutConfig};
    use crate::linalg::cis;
    use std::f64::consts::PI;

    fn scenario(cfg: LayoutConfig, k: usize, beta: f64) -> (ChannelStats, Vec<BeamPattern>) {
        let layout = build_layout(&cfg).unwrap();
        let users = (0..k)
            .map(|i| UserGeometry {
                azimuth: PI / 3.0 * i as f64 / (k.max(2) - 1) as f64,
                elevation: -PI / 4.0,
                distance: 20.0,
            })
            .collect();
        let geo = LinkGeometry {
            mis_azimuth: PI / 4.0,
            mis_elevation: PI / 6.0,
            bs_azimuth: PI / 3.0,
            bs_elevation: 0.0,
            users,
        };
        let stats = ChannelStats::from_geometry(&layout, &geo, &LinkBudget::uniform(k, 0.05, beta)).unwrap();
        (stats, enumerate_patterns(&layout))
    }

    use crate::channel::LinkBudget;

    /// Brute force over a phase grid of every element and every per-user pattern choice.
    fn grid_min_rate(stats: &ChannelStats, pats: &[BeamPattern], levels: usize) -> f64 {
        let m = stats.m();
        let n = pats[0].n();
        let total = m + n;
        let mut best = 0.0f64;
        let mut idx = vec![0usize; total];
        loop {
            let ph: Vec<C64> = idx.iter().map(|&b| cis(2.0 * PI * b as f64 / levels as f64)).collect();
            let phi = CVector::from_vec(ph[..m].to_vec());
            let theta = CVector::from_vec(ph[m..].to_vec());
            let q = snr_matrix(stats, pats, &theta, &phi);
            let v = (0..q.nrows())
                .map(|k| q.row(k).iter().copied().fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min);
            best = best.max(v);
            let mut pos = 0;
            loop {
                if pos == total {
                    return rate_from_snr(best);
                }
                idx[pos] += 1;
                if idx[pos] < levels {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn penalty_and_taylor_bound() {
        let x = DMatrix::from_row_slice(1, 2, &[0.25, 0.75]);
        assert!((penalty_h(&x).unwrap() - 0.375).abs() < 1e-15);
        assert!(penalty_h(&DMatrix::from_element(1, 1, 1.5)).is_err());
        for &(xi, xl) in &[(0.0, 0.3), (0.4, 0.4), (1.0, 0.9)] {
            assert!(taylor_lb_scalar(xi, xl) <= xi * xi + 1e-15);
        }
        assert_eq!(taylor_lb_scalar(0.4, 0.4), 0.16000000000000003);
    }

    #[test]
    fn matches_grid_oracle_on_tiny_surface() {
        let (stats, pats) = scenario(LayoutConfig::new(2, 2, 1, 1), 2, f64::INFINITY);
        // the landscape is multimodal at this size; a handful of restarts finds the top basin
        let res = algorithm1(&stats, &pats, &BcdConfig { starts: 16, ..Default::default() }, 3).unwrap();
        let grid = grid_min_rate(&stats, &pats, 8);
        assert!(res.report.min_rate >= grid, "bcd {} grid {grid}", res.report.min_rate);
        res.design.validate(&stats).unwrap();
    }

    #[test]
    fn schedule_ends_binary_and_inner_loop_is_monotone() {
        let (stats, pats) = scenario(LayoutConfig::new(4, 4, 2, 2), 3, 1.0);
        let cfg = BcdConfig {
            verify_forms: true,
            ..Default::default()
        };
        let res = algorithm1(&stats, &pats, &cfg, 11).unwrap();
        assert!(res.schedule.is_binary());
        assert!(res.h_final < 1e-3, "h = {}", res.h_final);
        for w in res.trace.windows(2) {
            if w[0].outer == w[1].outer {
                let tol = 1e-6 * w[0].objective.abs().max(1e-12);
                assert!(w[1].objective >= w[0].objective - tol, "{:?} -> {:?}", w[0], w[1]);
            }
            assert!(w[1].form_residual.unwrap() < 1e-9);
        }
        assert!(res.relaxation_change.is_finite());
    }

    #[test]
    fn full_overlap_reduces_to_single_pattern() {
        // MS2 as large as MS1: one pattern, every user sees θ ⊙ φ
        let (stats, pats) = scenario(LayoutConfig::new(2, 3, 2, 3), 2, 5.0);
        assert_eq!(pats.len(), 1);
        let res = algorithm1(&stats, &pats, &BcdConfig::default(), 1).unwrap();
        assert!(res.design.user_patterns.iter().all(|p| p.index == 1));
        assert!(res.report.min_rate > 0.0);
    }

    #[test]
    fn throughput_variant_runs_and_is_seeded() {
        let (stats, pats) = scenario(LayoutConfig::new(3, 3, 2, 2), 3, 2.0);
        let cfg = BcdConfig {
            objective: Objective::Throughput,
            ..Default::default()
        };
        let a = algorithm1(&stats, &pats, &cfg, 5).unwrap();
        let b = algorithm1(&stats, &pats, &cfg, 5).unwrap();
        assert_eq!(a.report, b.report);
        assert!((a.objective - a.report.per_user.iter().sum::<f64>()).abs() < 1e-9);
        for w in a.trace.windows(2) {
            if w[0].outer == w[1].outer {
                assert!(w[1].objective >= w[0].objective - 1e-6 * w[0].objective.abs());
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let (stats, pats) = scenario(LayoutConfig::new(2, 2, 1, 1), 1, 1.0);
        let cfg = BcdConfig { zeta: 0.5, ..Default::default() };
        assert!(matches!(algorithm1(&stats, &pats, &cfg, 0), Err(MisError::Config(_))));
    }
}
