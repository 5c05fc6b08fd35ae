//! Scenario configuration: layout, link budget, user placement, solver settings, sweep
//! axis, seeds and output options. Loaded from TOML; every field has a default.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bcd::BcdConfig;
use crate::benchmarks::{PsoConfig, QuantizedSearchConfig};
use crate::channel::{
    db_to_linear, dbm_to_watts, los_components, ChannelStats, Correlations, LinkBudget, LinkGeometry, UserGeometry,
};
use crate::error::{MisError, Result};
use crate::geometry::{build_layout, enumerate_patterns, BeamPattern, LayoutConfig, MisLayout};
use crate::manifold::{ElementwiseConfig, RcgConfig};
use crate::rate::{Objective, DEFAULT_TIME};
use crate::robustness::RobustnessSpec;

/// Log-distance path loss `α = (d / d0)^(−exponent)` on the MIS–user links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLoss {
    pub exponent: f64,
    pub reference_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub users: usize,
    /// Elevation shared by auto-placed users.
    pub user_elevation: f64,
    /// Azimuth range `[min, max]` of auto-placed users.
    pub azimuth_range: [f64; 2],
    pub user_distance: f64,
    /// Draw azimuths uniformly from the range (per seed) instead of spacing them evenly.
    pub random_placement: bool,
    /// Explicit user geometry; overrides auto-placement and `users`.
    pub user_list: Option<Vec<UserGeometry>>,
    pub mis_azimuth: f64,
    pub mis_elevation: f64,
    pub bs_azimuth: f64,
    pub bs_elevation: f64,
    /// Rician factor of every MIS–user link in dB.
    pub kappa_db: f64,
    /// Rician factor of the BS–MIS link in dB; `kappa_db` when omitted.
    pub kappa_bs_db: Option<f64>,
    /// Combined path loss and noise reference SNR at 0 dBW.
    pub gamma_ref: f64,
    pub power_dbm: f64,
    /// Total communication time in seconds.
    pub time: f64,
    /// Sinc spatial correlation; identity when false.
    pub correlated: bool,
    pub path_loss: Option<PathLoss>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            users: 4,
            user_elevation: -FRAC_PI_4,
            azimuth_range: [0.0, FRAC_PI_3],
            user_distance: 20.0,
            random_placement: false,
            user_list: None,
            mis_azimuth: FRAC_PI_4,
            mis_elevation: PI / 6.0,
            bs_azimuth: FRAC_PI_3,
            bs_elevation: 0.0,
            kappa_db: 10.0,
            kappa_bs_db: None,
            gamma_ref: 0.05,
            power_dbm: 30.0,
            time: DEFAULT_TIME,
            correlated: true,
            path_loss: None,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.user_list.as_ref().map_or(self.users, Vec::len);
        if k == 0 {
            return Err(MisError::config("channel.users must be positive"));
        }
        if !(self.gamma_ref > 0.0) || !self.power_dbm.is_finite() || !(self.time > 0.0) {
            return Err(MisError::config("channel: gamma_ref and time must be positive, power finite"));
        }
        if !(self.user_distance > 0.0) || self.azimuth_range[0] > self.azimuth_range[1] {
            return Err(MisError::config("channel: bad user distance or azimuth range"));
        }
        if !self.kappa_db.is_finite() || self.kappa_bs_db.is_some_and(|k| !k.is_finite()) {
            return Err(MisError::config("channel: kappa must be finite (dB)"));
        }
        if let Some(p) = self.path_loss {
            if !(p.exponent >= 0.0 && p.reference_distance > 0.0) {
                return Err(MisError::config("channel.path_loss: need exponent >= 0 and positive reference"));
            }
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.user_list.as_ref().map_or(self.users, Vec::len)
    }

    /// User geometry for a seed (the seed matters only with random placement).
    pub fn user_geometry(&self, seed: u64) -> Vec<UserGeometry> {
        if let Some(list) = &self.user_list {
            return list.clone();
        }
        let [lo, hi] = self.azimuth_range;
        let k = self.users;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d9e0);
        (0..k)
            .map(|i| {
                let azimuth = if self.random_placement {
                    lo + (hi - lo) * rng.random::<f64>()
                } else if k == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (k - 1) as f64
                };
                UserGeometry {
                    azimuth,
                    elevation: self.user_elevation,
                    distance: self.user_distance,
                }
            })
            .collect()
    }

    pub fn link_geometry(&self, seed: u64) -> LinkGeometry {
        LinkGeometry {
            mis_azimuth: self.mis_azimuth,
            mis_elevation: self.mis_elevation,
            bs_azimuth: self.bs_azimuth,
            bs_elevation: self.bs_elevation,
            users: self.user_geometry(seed),
        }
    }

    /// Link budget for the given users: `ι = γ_ref · P`, unit BS–MIS path loss.
    pub fn budget(&self, users: &[UserGeometry]) -> LinkBudget {
        let k = users.len();
        let beta2 = db_to_linear(self.kappa_db);
        let beta1 = db_to_linear(self.kappa_bs_db.unwrap_or(self.kappa_db));
        let alpha2 = users
            .iter()
            .map(|u| match self.path_loss {
                Some(p) => (u.distance / p.reference_distance).powf(-p.exponent),
                None => 1.0,
            })
            .collect();
        LinkBudget {
            alpha1: 1.0,
            beta1,
            alpha2,
            beta2: vec![beta2; k],
            iota: vec![self.gamma_ref * dbm_to_watts(self.power_dbm); k],
        }
    }
}

/// One of the compared schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Penalty block coordinate descent over block patterns.
    Bcd,
    /// Riemannian conjugate gradient over block patterns (throughput).
    Rcg,
    /// Element-wise MS2 placement (throughput), warm-started from the block design.
    RcgElementwise,
    Pso,
    Qsearch,
    /// MS1 alone.
    Single,
    /// Per-user reconfigurable surface.
    Dynamic,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bcd => "bcd",
            Scheme::Rcg => "rcg",
            Scheme::RcgElementwise => "rcg-elementwise",
            Scheme::Pso => "pso",
            Scheme::Qsearch => "qsearch",
            Scheme::Single => "single",
            Scheme::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfigs {
    pub bcd: BcdConfig,
    pub rcg: RcgConfig,
    pub elementwise: ElementwiseConfig,
    pub pso: PsoConfig,
    pub qsearch: QuantizedSearchConfig,
    /// Random restarts of the per-user surface besides the eigenvector start.
    pub dynamic_starts: usize,
}

impl Default for SolverConfigs {
    fn default() -> Self {
        SolverConfigs {
            bcd: BcdConfig::default(),
            rcg: RcgConfig::default(),
            elementwise: ElementwiseConfig::default(),
            pso: PsoConfig::default(),
            qsearch: QuantizedSearchConfig::default(),
            dynamic_starts: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    PowerDbm,
    Users,
    Ms1Cols,
    KappaDb,
    /// MS1 rows handed to MS2 at a fixed element total (see [`Scenario::at`]).
    Allocation,
    /// Side of a square MS2.
    Ms2Size,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PowerDbm => "power-dbm",
            SweepAxis::Users => "users",
            SweepAxis::Ms1Cols => "ms1-cols",
            SweepAxis::KappaDb => "kappa-db",
            SweepAxis::Allocation => "allocation",
            SweepAxis::Ms2Size => "ms2-size",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Record per-solve wall time; off by default so that reruns are byte-identical.
    pub record_wall_time: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("results"),
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub layout: LayoutConfig,
    pub channel: ChannelConfig,
    /// Objective of every solver that supports both; overrides the per-solver setting.
    pub objective: Objective,
    pub schemes: Vec<Scheme>,
    pub solvers: SolverConfigs,
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
    /// Monte Carlo trials for ergodic rates reported next to the Jensen values; 0 disables.
    pub ergodic_trials: usize,
    pub output: OutputConfig,
    pub robustness: Option<RobustnessSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            layout: LayoutConfig::default(),
            channel: ChannelConfig::default(),
            objective: Objective::MinRate,
            schemes: vec![Scheme::Bcd, Scheme::Single],
            solvers: SolverConfigs::default(),
            sweep: Sweep {
                axis: SweepAxis::PowerDbm,
                values: vec![30.0],
            },
            seeds: vec![0],
            ergodic_trials: 0,
            output: OutputConfig::default(),
            robustness: None,
        }
    }
}

/// Everything a solver needs for one sweep point.
#[derive(Debug, Clone)]
pub struct Instance {
    pub layout: MisLayout,
    pub stats: ChannelStats,
    /// Block patterns; a single uncovered pattern when there is no MS2.
    pub patterns: Vec<BeamPattern>,
    /// MS2 element count (0 for a single-layer surface).
    pub n: usize,
    pub time: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| MisError::config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| MisError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_toml_str(&text)
    }

    /// Fully resolved configuration as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| MisError::config(e.to_string()))
    }

    /// Check every sweep point and solver setting without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(MisError::config("seeds must not be empty"));
        }
        if self.schemes.is_empty() {
            return Err(MisError::config("schemes must not be empty"));
        }
        if self.sweep.values.is_empty() {
            return Err(MisError::config("sweep.values must not be empty"));
        }
        self.channel.validate()?;
        self.solvers.bcd.validate()?;
        self.solvers.rcg.validate()?;
        self.solvers.elementwise.rcg.validate()?;
        self.solvers.pso.validate()?;
        if let Some(r) = &self.robustness {
            r.validate()?;
        }
        for &v in &self.sweep.values {
            let s = self.at(v)?;
            s.channel.validate()?;
            let (layout, _) = s.layout_for()?;
            build_layout(&layout)?;
        }
        Ok(())
    }

    /// The scenario with the sweep axis set to `value`.
    ///
    /// The allocation axis moves `value` rows of the base MS1 (`R×C`) into MS2: MS1 becomes
    /// `(R − value)×C` and MS2 `(R/2)×(2·value·C/R)`, keeping `M + N = R·C`.
    pub fn at(&self, value: f64) -> Result<Scenario> {
        let mut s = self.clone();
        let as_count = |v: f64, what: &str| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v < 1e6 {
                Ok(v as usize)
            } else {
                Err(MisError::config(format!("{what} sweep needs nonnegative integers, got {v}")))
            }
        };
        match self.sweep.axis {
            SweepAxis::PowerDbm => s.channel.power_dbm = value,
            SweepAxis::KappaDb => s.channel.kappa_db = value,
            SweepAxis::Users => {
                s.channel.users = as_count(value, "users")?;
                s.channel.user_list = None;
            }
            SweepAxis::Ms1Cols => s.layout.ms1_cols = as_count(value, "ms1-cols")?,
            SweepAxis::Ms2Size => {
                let n = as_count(value, "ms2-size")?;
                s.layout.ms2_rows = n;
                s.layout.ms2_cols = n;
            }
            SweepAxis::Allocation => {
                let r = as_count(value, "allocation")?;
                let (rows, cols) = (self.layout.ms1_rows, self.layout.ms1_cols);
                if rows % 2 != 0 || r > rows / 2 || (2 * r * cols) % rows != 0 {
                    return Err(MisError::config(format!(
                        "allocation {r} does not tile a {rows}x{cols} MS1 into an MS2 of {} rows",
                        rows / 2
                    )));
                }
                s.layout.ms1_rows = rows - r;
                s.layout.ms2_rows = rows / 2;
                s.layout.ms2_cols = 2 * r * cols / rows;
            }
        }
        Ok(s)
    }

    /// Layout to build and whether MS2 is present.
    fn layout_for(&self) -> Result<(LayoutConfig, bool)> {
        let mut l = self.layout.clone();
        let has_ms2 = l.ms2_rows > 0 && l.ms2_cols > 0;
        if !has_ms2 {
            l.ms2_rows = 1;
            l.ms2_cols = 1;
        }
        Ok((l, has_ms2))
    }

    /// Statistics for explicit link geometry and budget, honoring the correlation switch.
    pub fn stats_with(&self, layout: &MisLayout, geo: &LinkGeometry, budget: &LinkBudget) -> Result<ChannelStats> {
        if self.channel.correlated {
            ChannelStats::from_geometry(layout, geo, budget)
        } else {
            let (g, h) = los_components(layout, geo)?;
            ChannelStats::from_parts(g, h, Correlations::identity(layout.m(), layout.bs_positions.len()), budget)
        }
    }

    /// Build layout, statistics and patterns for one seed.
    pub fn instance(&self, seed: u64) -> Result<Instance> {
        let (cfg, has_ms2) = self.layout_for()?;
        let layout = build_layout(&cfg)?;
        let geo = self.channel.link_geometry(seed);
        let budget = self.channel.budget(&geo.users);
        let stats = self.stats_with(&layout, &geo, &budget)?;
        let (patterns, n) = if has_ms2 {
            (enumerate_patterns(&layout), layout.n())
        } else {
            (vec![BeamPattern::uncovered(layout.m())], 0)
        };
        Ok(Instance {
            layout,
            stats,
            patterns,
            n,
            time: self.channel.time,
            seed,
        })
    }
}
