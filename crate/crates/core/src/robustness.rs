//! Error injection against a frozen design: user location drift, MIS–user CSI mismatch
//! and per-element phase errors.
//!
//! Every magnitude of a grid reuses the same random draws (common random numbers), and the
//! nominal value is computed by the same code path at magnitude zero, so a zero-magnitude
//! error degrades by exactly zero.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{nlos_weight, substream, ChannelStats, LinkGeometry, UserGeometry};
use crate::design::Design;
use crate::error::{MisError, Result};
use crate::linalg::{cis, complex_normal_vector, CVector, C64};
use crate::rate::{cascade, rate_from_snr, RateReport};
use crate::scenario::{Instance, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorFamily {
    /// Gaussian user drift, `σ_pos` in meters per axis.
    LocationGaussian,
    /// User drift uniform in a ball of radius `ε_pos` meters.
    LocationBounded,
    /// `h_true = √(1−ρ) h + √ρ e` with `e` drawn from the scattered MIS–user covariance.
    CsiMix,
    /// `h_true = h + Δh`, `Δh` uniform in the ball `‖Δh‖ ≤ ε_h ‖h‖`.
    CsiBounded,
    /// Gaussian offsets on MS2 phases, `σ_θ` in degrees.
    PhaseGaussian,
    /// Offsets uniform in `[−Δ, Δ]` degrees on both layers.
    PhaseBounded,
}

impl ErrorFamily {
    pub fn name(self) -> &'static str {
        match self {
            ErrorFamily::LocationGaussian => "location-gaussian",
            ErrorFamily::LocationBounded => "location-bounded",
            ErrorFamily::CsiMix => "csi-mix",
            ErrorFamily::CsiBounded => "csi-bounded",
            ErrorFamily::PhaseGaussian => "phase-gaussian",
            ErrorFamily::PhaseBounded => "phase-bounded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSpec {
    pub family: ErrorFamily,
    pub magnitudes: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_trials() -> usize {
    500
}

impl RobustnessSpec {
    pub fn new(family: ErrorFamily, magnitudes: Vec<f64>, trials: usize) -> Self {
        RobustnessSpec {
            family,
            magnitudes,
            trials,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.magnitudes.is_empty() || self.magnitudes.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(MisError::config("robustness.magnitudes must be nonempty, finite and nonnegative"));
        }
        if self.trials == 0 {
            return Err(MisError::config("robustness.trials must be positive"));
        }
        if self.family == ErrorFamily::CsiMix && self.magnitudes.iter().any(|&r| r > 1.0) {
            return Err(MisError::config("csi-mix ρ must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Mean performance of the frozen design at one error magnitude.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessPoint {
    pub magnitude: f64,
    pub min_rate: f64,
    pub throughput: f64,
    /// `1 − throughput / nominal throughput`.
    pub degradation: f64,
}

/// Degradation curve of `design` on `instance` (built from `scenario` with `seed`).
pub fn degradation_curve(
    scenario: &Scenario,
    instance: &Instance,
    design: &Design,
    spec: &RobustnessSpec,
    seed: u64,
) -> Result<Vec<RobustnessPoint>> {
    spec.validate()?;
    design.validate(&instance.stats)?;
    let time = instance.time;
    let eval = |mag: f64| -> Result<(f64, f64)> {
        let per_trial: Vec<RateReport> = (0..spec.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = substream(seed ^ 0x0b05_7e55, t as u64);
                trial(scenario, instance, design, spec.family, mag, &mut rng, time)
            })
            .collect::<Result<_>>()?;
        let n = per_trial.len() as f64;
        let min_rate = per_trial.iter().map(|r| r.min_rate).sum::<f64>() / n;
        let throughput = per_trial.iter().map(|r| r.throughput).sum::<f64>() / n;
        Ok((min_rate, throughput))
    };
    let (_, nominal) = eval(0.0)?;
    spec.magnitudes
        .iter()
        .map(|&mag| {
            let (min_rate, throughput) = eval(mag)?;
            Ok(RobustnessPoint {
                magnitude: mag,
                min_rate,
                throughput,
                degradation: 1.0 - throughput / nominal,
            })
        })
        .collect()
}

fn trial<R: Rng + ?Sized>(
    scenario: &Scenario,
    inst: &Instance,
    design: &Design,
    family: ErrorFamily,
    mag: f64,
    rng: &mut R,
    time: f64,
) -> Result<RateReport> {
    match family {
        ErrorFamily::LocationGaussian | ErrorFamily::LocationBounded => {
            let nominal = scenario.channel.link_geometry(inst.seed);
            let users = nominal
                .users
                .iter()
                .map(|u| {
                    let d = match family {
                        ErrorFamily::LocationGaussian => gaussian3(rng),
                        _ => uniform_ball3(rng),
                    };
                    let p = u.position();
                    UserGeometry::from_position([p[0] + mag * d[0], p[1] + mag * d[1], p[2] + mag * d[2]])
                })
                .collect();
            // Path loss stays at the nominal distances.
            let budget = scenario.channel.budget(&nominal.users);
            let geo = LinkGeometry { users, ..nominal };
            let stats = scenario.stats_with(&inst.layout, &geo, &budget)?;
            Ok(design.report(&stats, time))
        }
        ErrorFamily::CsiMix | ErrorFamily::CsiBounded => Ok(csi_trial(&inst.stats, design, family, mag, rng, time)),
        ErrorFamily::PhaseGaussian | ErrorFamily::PhaseBounded => {
            let rad = mag.to_radians();
            let mut d = design.clone();
            if family == ErrorFamily::PhaseBounded {
                d.phi = jitter(&d.phi, |r| rad * (2.0 * r.random::<f64>() - 1.0), rng);
                d.theta = jitter(&d.theta, |r| rad * (2.0 * r.random::<f64>() - 1.0), rng);
            } else {
                d.theta = jitter(&d.theta, |r| rad * r.sample::<f64, _>(StandardNormal), rng);
            }
            Ok(d.report(&inst.stats, time))
        }
    }
}

/// Rates when the BS beamforms with MRT on the estimated cascade while the true MIS–user
/// channel differs: `γ = ι |c_true^H c_est|² / ‖c_est‖²`.
fn csi_trial<R: Rng + ?Sized>(
    stats: &ChannelStats,
    design: &Design,
    family: ErrorFamily,
    mag: f64,
    rng: &mut R,
    time: f64,
) -> RateReport {
    let g = stats.draw_g(rng);
    let rates = (0..stats.users())
        .map(|k| {
            let h = stats.draw_h(k, rng);
            let h_true = match family {
                ErrorFamily::CsiMix => {
                    let e = stats.corr.sqrt_mt().map(C64::from) * complex_normal_vector(rng, stats.m());
                    let e = e * C64::from((stats.alpha2[k] * nlos_weight(stats.beta2[k])).sqrt());
                    &h * C64::from((1.0 - mag).sqrt()) + e * C64::from(mag.sqrt())
                }
                _ => {
                    let dir = complex_normal_vector(rng, stats.m());
                    let dir = &dir / C64::from(dir.norm());
                    // Uniform radius in a ball of real dimension 2M.
                    let r = rng.random::<f64>().powf(1.0 / (2 * stats.m()) as f64);
                    &h + dir * C64::from(mag * r * h.norm())
                }
            };
            let v = design.effective(k);
            let c_est = cascade(&g, &h, &v);
            let c_true = cascade(&g, &h_true, &v);
            let snr = stats.iota[k] * c_true.dotc(&c_est).norm_sqr() / c_est.norm_squared();
            rate_from_snr(snr)
        })
        .collect();
    RateReport::from_rates(rates, time)
}

fn jitter<R: Rng + ?Sized>(x: &CVector, mut draw: impl FnMut(&mut R) -> f64, rng: &mut R) -> CVector {
    x.map(|xi| xi * cis(draw(rng)))
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

fn uniform_ball3<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let d = gaussian3(rng);
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(f64::MIN_POSITIVE);
    let r = rng.random::<f64>().cbrt() / n;
    [d[0] * r, d[1] * r, d[2] * r]
}
