//! Reference computations that the solvers are checked against: Monte Carlo estimates of
//! the mean-SNR identity, exhaustive search over quantized phases, finite-difference
//! gradients and the closed-form optimum of a rank-one form.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{db_to_linear, substream, ChannelStats, LinkBudget, LinkGeometry, UserGeometry};
use crate::error::{MisError, Result};
use crate::geometry::{build_layout, enumerate_patterns, BeamPattern, LayoutConfig, MisLayout};
use crate::linalg::{cis, project_simplex, quad_form, random_phases, CVector, C64};
use crate::manifold::{
    finite_difference_grad, relative_error, simplex_retract, ElementwiseObjective, ManifoldPoint, PatternObjective,
    SmoothObjective, Stochastic,
};
use crate::rate::{instantaneous_snr, monte_carlo, Objective};

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleCheck {
    fn new(name: impl Into<String>, value: f64, reference: f64, error: f64, tolerance: f64) -> Self {
        OracleCheck {
            name: name.into(),
            value,
            reference,
            error,
            tolerance,
            pass: error <= tolerance,
        }
    }
}

/// A random deployment: MS1 `rows×cols`, a 1×1 MS2, `l` BS antennas, `k` users at random
/// angles, Rician factor `kappa_db` on every link.
pub fn random_instance(rows: usize, cols: usize, l: usize, k: usize, kappa_db: f64, seed: u64) -> Result<(MisLayout, ChannelStats)> {
    let layout = build_layout(&LayoutConfig::new(rows, cols, 1, 1).with_bs_antennas(l))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut angle = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let geo = LinkGeometry {
        mis_azimuth: angle(-PI / 2.0, PI / 2.0),
        mis_elevation: angle(-PI / 3.0, PI / 3.0),
        bs_azimuth: angle(-PI / 2.0, PI / 2.0),
        bs_elevation: angle(-PI / 6.0, PI / 6.0),
        users: (0..k)
            .map(|_| UserGeometry {
                azimuth: angle(-PI / 2.0, PI / 2.0),
                elevation: angle(-PI / 3.0, PI / 3.0),
                distance: 20.0,
            })
            .collect(),
    };
    let stats = ChannelStats::from_geometry(&layout, &geo, &LinkBudget::uniform(k, 0.05, db_to_linear(kappa_db)))?;
    Ok((layout, stats))
}

/// `v^H Ξ_k v` against the sample mean of `ι‖G^H diag(h_k) v‖²` over `draws` realizations.
/// The error is relative.
pub fn xi_monte_carlo(stats: &ChannelStats, k: usize, v: &CVector, draws: usize, seed: u64, tolerance: f64) -> Result<OracleCheck> {
    let closed = quad_form(&stats.xi[k], v);
    let iota = stats.iota[k];
    let est = monte_carlo(draws, seed, |rng| {
        let g = stats.draw_g(rng);
        let h = stats.draw_h(k, rng);
        instantaneous_snr(iota, &g, &h, v)
    })?;
    let err = (est.mean_snr - closed).abs() / closed.abs().max(1e-300);
    Ok(OracleCheck::new(format!("xi-monte-carlo user {k}"), closed, est.mean_snr, err, tolerance))
}

/// Objective of quantized phases under per-user best-pattern selection, written out
/// directly from the pattern maps.
fn enumerated_value(stats: &ChannelStats, patterns: &[BeamPattern], phi: &[C64], theta: &[C64], objective: Objective) -> f64 {
    let rates: Vec<f64> = (0..stats.users())
        .map(|k| {
            patterns
                .iter()
                .map(|p| {
                    let v = CVector::from_fn(phi.len(), |m, _| match p.covering(m) {
                        Some(n) => phi[m] * theta[n],
                        None => phi[m],
                    });
                    (1.0 + quad_form(&stats.xi[k], &v).max(0.0)).log2()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    match objective {
        Objective::MinRate => rates.iter().copied().fold(f64::INFINITY, f64::min),
        Objective::Throughput => rates.iter().sum(),
    }
}

/// Exhaustive optimum over ungrouped `bits`-bit phases on both layers. Refuses more than
/// `2^24` combinations.
pub fn exhaustive_quantized(stats: &ChannelStats, patterns: &[BeamPattern], bits: u32, objective: Objective) -> Result<f64> {
    let m = stats.m();
    let n = patterns.first().ok_or_else(|| MisError::shape("no beam patterns"))?.n();
    let levels = 1usize << bits;
    let digits = m + n;
    if bits == 0 || (digits as u32) * bits > 24 {
        return Err(MisError::config(format!("exhaustive oracle too large: {digits} phases at {bits} bits")));
    }
    let alphabet: Vec<C64> = (0..levels)
        .map(|b| cis(2.0 * PI * b as f64 / (1u64 << bits) as f64))
        .collect();
    let mut idx = vec![0usize; digits];
    let mut best = f64::NEG_INFINITY;
    loop {
        let ph: Vec<C64> = idx.iter().map(|&b| alphabet[b]).collect();
        best = best.max(enumerated_value(stats, patterns, &ph[..m], &ph[m..], objective));
        // odometer increment
        let mut d = 0;
        while d < digits {
            idx[d] += 1;
            if idx[d] < levels {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == digits {
            return Ok(best);
        }
    }
}

/// Relative error of the block-pattern throughput gradient at a random point.
pub fn pattern_gradient_check(stats: &ChannelStats, patterns: &[BeamPattern], seed: u64, step: f64) -> f64 {
    let mut rng = substream(seed, 11);
    let rows: Vec<Vec<f64>> = (0..stats.users())
        .map(|_| project_simplex(&(0..patterns.len()).map(|_| rng.random::<f64>()).collect::<Vec<_>>()))
        .collect();
    let p = ManifoldPoint {
        phi: random_phases(&mut rng, stats.m()),
        theta: random_phases(&mut rng, patterns[0].n()),
        blocks: vec![DMatrix::from_fn(stats.users(), patterns.len(), |i, j| rows[i][j])],
    };
    let obj = PatternObjective::new(stats, patterns);
    let (_, g) = obj.value_grad(&p);
    relative_error(&g, &finite_difference_grad(|q| obj.value(q), &p, step))
}

/// Relative error of the element-wise (penalized) gradient at a random point.
pub fn elementwise_gradient_check(stats: &ChannelStats, n: usize, seed: u64, step: f64) -> f64 {
    let mut rng = substream(seed, 12);
    let m = stats.m();
    let p = ManifoldPoint {
        phi: random_phases(&mut rng, m),
        theta: random_phases(&mut rng, n),
        blocks: (0..stats.users())
            .map(|_| simplex_retract(&DMatrix::from_fn(m, n, |_, _| rng.random::<f64>()), Stochastic::Columns))
            .collect(),
    };
    let obj = ElementwiseObjective {
        stats,
        p_weight: 1.0,
        q_weight: 1.0,
    };
    let (_, g) = obj.value_grad(&p);
    relative_error(&g, &finite_difference_grad(|q| obj.value(q), &p, step))
}

/// `max_{|v_i| = 1} |a^H v|² = (Σ|a_i|)²`.
pub fn rank_one_max(a: &CVector) -> f64 {
    a.iter().map(|z| z.norm()).sum::<f64>().powi(2)
}

/// Run every oracle family on small seeded instances.
pub fn run_all(seed: u64) -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    for kappa in [0.0, 10.0] {
        let (_, stats) = random_instance(3, 3, 2, 1, kappa, seed)?;
        let v = random_phases(&mut substream(seed, 1), stats.m());
        let mut c = xi_monte_carlo(&stats, 0, &v, 100_000, seed, 0.02)?;
        c.name = format!("xi-monte-carlo kappa={kappa}dB");
        out.push(c);
    }
    out.extend(brute_force(seed)?);
    out.extend(gradients(seed)?);
    out.push(rank_one(seed)?);
    Ok(out)
}

/// Quantized search against the exhaustive oracle on a 2×2 / 1×1 surface with two users.
pub fn brute_force(seed: u64) -> Result<Vec<OracleCheck>> {
    let (layout, stats) = desk_pair(seed)?;
    let patterns = enumerate_patterns(&layout);
    let q = crate::benchmarks::quantized_search(&stats, &patterns, &Default::default(), seed)?;
    let oracle = exhaustive_quantized(&stats, &patterns, 2, Objective::MinRate)?;
    Ok(vec![OracleCheck::new(
        "quantized-search vs exhaustive",
        q.objective,
        oracle,
        (q.objective - oracle).abs(),
        0.0,
    )])
}

/// The 2×2 / 1×1, two-user instance used by the brute-force comparisons.
pub fn desk_pair(seed: u64) -> Result<(MisLayout, ChannelStats)> {
    let layout = build_layout(&LayoutConfig::new(2, 2, 1, 1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = (0..2)
        .map(|_| UserGeometry {
            azimuth: PI / 3.0 * rng.random::<f64>(),
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
    let stats = ChannelStats::from_geometry(&layout, &geo, &LinkBudget::uniform(2, 0.05, 10.0))?;
    Ok((layout, stats))
}

pub fn gradients(seed: u64) -> Result<Vec<OracleCheck>> {
    let layout = build_layout(&LayoutConfig::new(3, 3, 2, 2))?;
    let patterns = enumerate_patterns(&layout);
    let (_, stats) = random_instance(3, 3, 2, 3, 5.0, seed)?;
    let a = pattern_gradient_check(&stats, &patterns, seed, 1e-6);
    let b = elementwise_gradient_check(&stats, 4, seed, 1e-6);
    Ok(vec![
        OracleCheck::new("pattern gradient vs finite differences", a, 0.0, a, 1e-5),
        OracleCheck::new("element-wise gradient vs finite differences", b, 0.0, b, 1e-5),
    ])
}

/// Pure LoS, single user: the dynamic surface reaches the rank-one optimum.
pub fn rank_one(seed: u64) -> Result<OracleCheck> {
    let (_, stats) = random_instance(3, 3, 2, 1, f64::INFINITY, seed)?;
    let eig = stats.xi[0].clone().symmetric_eigen();
    let top = crate::linalg::argmax(eig.eigenvalues.iter().copied());
    let a = eig.eigenvectors.column(top) * C64::from(eig.eigenvalues[top].max(0.0).sqrt());
    let reference = rank_one_max(&a.into_owned());
    let dynamic = crate::benchmarks::dynamic_ris_baseline(&stats, &Default::default(), 0, seed)?;
    let snr = 2f64.powf(dynamic.report.per_user[0]) - 1.0;
    Ok(OracleCheck::new(
        "dynamic surface vs rank-one optimum",
        snr,
        reference,
        (snr - reference).abs() / reference,
        1e-3,
    ))
}
