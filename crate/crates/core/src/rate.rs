//! SNRs, achievable rates and the two design objectives.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{substream, ChannelStats};
use crate::error::{MisError, Result};
use crate::geometry::BeamPattern;
use crate::linalg::{argmax, quad_form, CMatrix, CVector, C64};

/// Default total communication time in seconds.
pub const DEFAULT_TIME: f64 = 100.0;

/// Which aggregate of the per-user rates a solver maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    MinRate,
    Throughput,
}

/// Effective cascade `G^H diag(h) v`.
pub fn cascade(g: &CMatrix, h: &CVector, v: &CVector) -> CVector {
    g.adjoint() * h.component_mul(v)
}

/// Maximum-ratio transmit beamformer of power `power`.
pub fn mrt_beamformer(g: &CMatrix, h: &CVector, v: &CVector, power: f64) -> Result<CVector> {
    let c = cascade(g, h, v);
    let norm = c.norm();
    if !(norm > 0.0) {
        return Err(MisError::DegenerateChannel);
    }
    Ok(c * C64::from(power.sqrt() / norm))
}

/// Instantaneous SNR `ι‖G^H diag(h) v‖²` reached by MRT.
pub fn instantaneous_snr(iota: f64, g: &CMatrix, h: &CVector, v: &CVector) -> f64 {
    iota * cascade(g, h, v).norm_squared()
}

/// Mean SNR `v^H Ξ v`.
pub fn statistical_snr(v: &CVector, xi: &CMatrix) -> f64 {
    quad_form(xi, v).max(0.0)
}

pub fn rate_from_snr(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// Jensen upper bound `log2(1 + v^H Ξ v)` on the ergodic rate.
pub fn jensen_rate(v: &CVector, xi: &CMatrix) -> f64 {
    rate_from_snr(statistical_snr(v, xi))
}

/// Monte Carlo estimate of an ergodic rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean_rate: f64,
    pub std_err: f64,
    pub mean_snr: f64,
    pub var_snr: f64,
    pub trials: usize,
}

impl McEstimate {
    /// `Var(γ)/(2 ln 2)`: upper bound on the Jensen gap using `ess inf γ ≥ 0`.
    pub fn jensen_gap_bound(&self) -> f64 {
        self.var_snr / (2.0 * std::f64::consts::LN_2)
    }
}

/// Trials per independent random stream.
pub const MC_CHUNK: usize = 512;

/// Running mean and centered second moment (Welford), mergeable across chunks.
#[derive(Default, Clone, Copy)]
struct Running {
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, n: f64, x: f64) {
        let d = x - self.mean;
        self.mean += d / n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, na: f64, o: Running, nb: f64) -> Running {
        let n = na + nb;
        if n == 0.0 {
            return self;
        }
        let d = o.mean - self.mean;
        Running {
            mean: self.mean + d * nb / n,
            m2: self.m2 + o.m2 + d * d * na * nb / n,
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: usize,
    rate: Running,
    snr: Running,
}

impl Moments {
    fn push(&mut self, snr: f64) {
        self.n += 1;
        let n = self.n as f64;
        self.rate.push(n, rate_from_snr(snr));
        self.snr.push(n, snr);
    }

    fn merge(self, o: Moments) -> Moments {
        let (na, nb) = (self.n as f64, o.n as f64);
        Moments {
            n: self.n + o.n,
            rate: self.rate.merge(na, o.rate, nb),
            snr: self.snr.merge(na, o.snr, nb),
        }
    }

    fn estimate(&self) -> McEstimate {
        let n = self.n as f64;
        let denom = if self.n > 1 { n - 1.0 } else { 1.0 };
        McEstimate {
            mean_rate: self.rate.mean,
            std_err: (self.rate.m2.max(0.0) / denom / n).sqrt(),
            mean_snr: self.snr.mean,
            var_snr: self.snr.m2.max(0.0) / denom,
            trials: self.n,
        }
    }
}

/// Monte Carlo estimate over `trials` i.i.d. SNR samples produced by `sample`, which
/// receives a dedicated generator per chunk. Chunks run in parallel and merge in order,
/// so the result depends only on `seed`.
pub fn monte_carlo<F>(trials: usize, seed: u64, sample: F) -> Result<McEstimate>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    if trials == 0 {
        return Err(MisError::config("Monte Carlo needs at least one trial"));
    }
    let chunks = trials.div_ceil(MC_CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let n = MC_CHUNK.min(trials - c * MC_CHUNK);
            let mut m = Moments::default();
            for _ in 0..n {
                m.push(sample(&mut rng));
            }
            m
        })
        .collect();
    Ok(parts.into_iter().fold(Moments::default(), Moments::merge).estimate())
}

/// Ergodic rate of user `k` with effective phase vector `v` under MRT.
pub fn ergodic_rate_mc(stats: &ChannelStats, k: usize, v: &CVector, trials: usize, seed: u64) -> Result<McEstimate> {
    if v.len() != stats.m() {
        return Err(MisError::shape(format!("v has {} entries, M = {}", v.len(), stats.m())));
    }
    let iota = stats.iota[k];
    monte_carlo(trials, seed, |rng| {
        let g = stats.draw_g(rng);
        let h = stats.draw_h(k, rng);
        instantaneous_snr(iota, &g, &h, v)
    })
}

/// Beam-pattern schedule `X` (K×U), row-stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub x: DMatrix<f64>,
}

impl Schedule {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        for k in 0..x.nrows() {
            let row = x.row(k);
            if row.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
                return Err(MisError::Domain(format!("schedule row {k} has entries outside [0, 1]")));
            }
            if (row.sum() - 1.0).abs() > 1e-9 {
                return Err(MisError::Domain(format!("schedule row {k} sums to {}", row.sum())));
            }
        }
        Ok(Schedule { x })
    }

    pub fn uniform(k: usize, u: usize) -> Self {
        Schedule {
            x: DMatrix::from_element(k, u, 1.0 / u as f64),
        }
    }

    /// Binary schedule assigning user `k` to pattern `assignment[k]`.
    pub fn from_assignment(assignment: &[usize], u: usize) -> Self {
        let mut x = DMatrix::zeros(assignment.len(), u);
        for (k, &a) in assignment.iter().enumerate() {
            x[(k, a)] = 1.0;
        }
        Schedule { x }
    }

    /// Per-user argmax, ties to the lowest pattern index.
    pub fn assignment(&self) -> Vec<usize> {
        (0..self.x.nrows())
            .map(|k| argmax(self.x.row(k).iter().copied()))
            .collect()
    }

    pub fn threshold(&self) -> Schedule {
        Schedule::from_assignment(&self.assignment(), self.x.ncols())
    }

    pub fn is_binary(&self) -> bool {
        self.x.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// `(η, throughput)` = `(min_k Σ_u ξ r, (T/K) Σ_k Σ_u ξ r)`.
pub fn objectives(schedule: &Schedule, rates: &DMatrix<f64>, time: f64) -> Result<(f64, f64)> {
    if schedule.x.shape() != rates.shape() {
        return Err(MisError::shape(format!(
            "schedule is {:?} but rates are {:?}",
            schedule.x.shape(),
            rates.shape()
        )));
    }
    let per_user: Vec<f64> = (0..rates.nrows())
        .map(|k| schedule.x.row(k).dot(&rates.row(k)))
        .collect();
    Ok(aggregate(&per_user, time))
}

/// `(min, (T/K) Σ)` of per-user rates.
pub fn aggregate(per_user: &[f64], time: f64) -> (f64, f64) {
    let min = per_user.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = per_user.iter().sum();
    (min, time / per_user.len() as f64 * sum)
}

/// `γ_{k,u} = v_u^H Ξ_k v_u` for every user and pattern.
pub fn snr_matrix(stats: &ChannelStats, patterns: &[BeamPattern], theta: &CVector, phi: &CVector) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(stats.users(), patterns.len());
    for (u, p) in patterns.iter().enumerate() {
        let v = p.compose(theta, phi);
        for k in 0..stats.users() {
            out[(k, u)] = statistical_snr(&v, &stats.xi[k]);
        }
    }
    out
}

/// Jensen rates `log2(1 + γ_{k,u})`.
pub fn rate_matrix(stats: &ChannelStats, patterns: &[BeamPattern], theta: &CVector, phi: &CVector) -> DMatrix<f64> {
    snr_matrix(stats, patterns, theta, phi).map(rate_from_snr)
}

/// Per-user rates, their minimum and the total throughput of a design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub per_user: Vec<f64>,
    pub min_rate: f64,
    pub throughput: f64,
    /// Upper bound on each user's Jensen gap, when Monte Carlo statistics are known.
    pub jensen_gap_bound: Option<Vec<f64>>,
}

impl RateReport {
    pub fn from_rates(per_user: Vec<f64>, time: f64) -> Self {
        let (min_rate, throughput) = aggregate(&per_user, time);
        RateReport {
            per_user,
            min_rate,
            throughput,
            jensen_gap_bound: None,
        }
    }

    pub fn objective(&self, objective: Objective) -> f64 {
        match objective {
            Objective::MinRate => self.min_rate,
            Objective::Throughput => self.throughput,
        }
    }
}
