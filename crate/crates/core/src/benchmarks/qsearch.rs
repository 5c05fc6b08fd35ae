//! Search over grouped, quantized phase profiles.

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
pub struct QuantizedSearchConfig {
    pub bits_phi: u32,
    pub bits_theta: u32,
    /// Consecutive elements (row-major) sharing one quantized phase.
    pub group_phi: usize,
    pub group_theta: usize,
    /// Enumerate when the number of combinations is at most this, otherwise sample this many.
    pub c_max: u64,
    pub objective: Objective,
}

impl Default for QuantizedSearchConfig {
    fn default() -> Self {
        QuantizedSearchConfig {
            bits_phi: 2,
            bits_theta: 2,
            group_phi: 1,
            group_theta: 1,
            c_max: 10_000,
            objective: Objective::MinRate,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuantizedSearchResult {
    pub design: Design,
    pub report: RateReport,
    pub objective: f64,
    /// Candidates evaluated.
    pub evaluated: u64,
    /// Whether every combination was enumerated.
    pub exhaustive: bool,
}

struct Codebook {
    /// Quantization levels (as exponents) of each group, φ groups first.
    radix: Vec<u64>,
    groups_phi: usize,
}

impl Codebook {
    fn combinations(&self) -> Option<u64> {
        self.radix.iter().try_fold(1u64, |acc, &r| acc.checked_mul(r))
    }

    fn decode(&self, mut idx: u64) -> Vec<u64> {
        self.radix
            .iter()
            .map(|&r| {
                let d = idx % r;
                idx /= r;
                d
            })
            .collect()
    }
}

fn expand(digits: &[u64], len: usize, group: usize, bits: u32) -> CVector {
    let levels = (1u64 << bits) as f64;
    CVector::from_fn(len, |i, _| cis(2.0 * std::f64::consts::PI * digits[i / group] as f64 / levels))
}

/// Best grouped quantized profile with greedy per-user pattern selection.
///
/// Candidates are the mixed-radix indices `0..C` when `C ≤ C_max`, otherwise `C_max`
/// uniform draws from `seed`. Ties go to the earliest candidate.
pub fn quantized_search(stats: &ChannelStats, patterns: &[BeamPattern], cfg: &QuantizedSearchConfig, seed: u64) -> Result<QuantizedSearchResult> {
    if cfg.bits_phi == 0 || cfg.bits_theta == 0 || cfg.bits_phi > 16 || cfg.bits_theta > 16 {
        return Err(MisError::config("quantized search: bit depths must lie in 1..=16"));
    }
    if cfg.group_phi == 0 || cfg.group_theta == 0 || cfg.c_max == 0 {
        return Err(MisError::config("quantized search: group sizes and c_max must be positive"));
    }
    if patterns.is_empty() {
        return Err(MisError::shape("no beam patterns"));
    }
    let m = stats.m();
    let n = patterns[0].n();
    let groups_phi = m.div_ceil(cfg.group_phi);
    let groups_theta = n.div_ceil(cfg.group_theta);
    let mut radix = vec![1u64 << cfg.bits_phi; groups_phi];
    radix.extend(std::iter::repeat_n(1u64 << cfg.bits_theta, groups_theta));
    let book = Codebook { radix, groups_phi };
    let total = book.combinations();
    let exhaustive = total.is_some_and(|c| c <= cfg.c_max);
    let candidates: Vec<u64> = if exhaustive {
        (0..total.unwrap_or(0)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let upper = total.unwrap_or(u64::MAX);
        (0..cfg.c_max).map(|_| rng.random_range(0..upper)).collect()
    };
    let profile = |idx: u64| {
        let d = book.decode(idx);
        let phi = expand(&d[..book.groups_phi], m, cfg.group_phi, cfg.bits_phi);
        let theta = expand(&d[book.groups_phi..], n, cfg.group_theta, cfg.bits_theta);
        (phi, theta)
    };
    let best = candidates
        .par_iter()
        .enumerate()
        .map(|(i, &idx)| {
            let (phi, theta) = profile(idx);
            (greedy_objective(stats, patterns, &theta, &phi, cfg.objective), i)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let (phi, theta) = profile(candidates[best.1]);
    let (design, report) = greedy_design(stats, patterns, theta, phi);
    Ok(QuantizedSearchResult {
        objective: report.objective(cfg.objective),
        design,
        report,
        evaluated: candidates.len() as u64,
        exhaustive,
    })
}
