//! Spatially correlated Rician channel statistics, realizations, and the closed-form
//! SNR covariance `Ξ_k` with `E{ι‖G^H diag(h_k) v‖²} = v^H Ξ_k v`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MisError, Result};
use crate::geometry::{MisLayout, Position};
use crate::linalg::{
    cis, clip_psd_unit_diagonal, complex_normal_matrix, complex_normal_vector, psd_sqrt, CMatrix,
    CVector, C64,
};

/// Independent random stream `stream` of the generator family keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Unit propagation direction for azimuth `az` and elevation `el`.
pub fn direction(az: f64, el: f64) -> [f64; 3] {
    [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
}

/// Far-field array response `exp(j 2π/λ ⟨p, k(az, el)⟩)` for each position `p`.
pub fn steering_vector(positions: &[Position], az: f64, el: f64, wavelength: f64) -> Result<CVector> {
    if positions.is_empty() {
        return Err(MisError::shape("steering vector needs at least one position"));
    }
    if !(wavelength > 0.0) {
        return Err(MisError::Domain(format!("wavelength must be positive, got {wavelength}")));
    }
    let k = direction(az, el);
    let scale = std::f64::consts::TAU / wavelength;
    Ok(CVector::from_iterator(
        positions.len(),
        positions
            .iter()
            .map(|p| cis(scale * (p[0] * k[0] + p[1] * k[1] + p[2] * k[2]))),
    ))
}

/// Normalized sinc, `sin(πx)/(πx)`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Isotropic-scattering correlation `[S]_{ij} = sinc(2‖p_i − p_j‖/λ)`.
pub fn correlation_matrix(positions: &[Position], wavelength: f64) -> DMatrix<f64> {
    let n = positions.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        let (a, b) = (positions[i], positions[j]);
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        sinc(2.0 * d / wavelength)
    })
}

/// Weight of the LoS part in a Rician mixture, `β/(β+1)`; one for `β = ∞`.
pub fn los_weight(beta: f64) -> f64 {
    if beta.is_infinite() {
        1.0
    } else {
        beta / (beta + 1.0)
    }
}

/// Weight of the scattered part in a Rician mixture, `1/(β+1)`.
pub fn nlos_weight(beta: f64) -> f64 {
    if beta.is_infinite() {
        0.0
    } else {
        1.0 / (beta + 1.0)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Angles of one user as seen from the MIS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserGeometry {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
}

impl UserGeometry {
    /// Cartesian position relative to the MIS origin.
    pub fn position(&self) -> [f64; 3] {
        let k = direction(self.azimuth, self.elevation);
        [self.distance * k[0], self.distance * k[1], self.distance * k[2]]
    }

    /// Geometry of a point given in MIS-centered Cartesian coordinates.
    pub fn from_position(p: [f64; 3]) -> Self {
        let d = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let elevation = if d > 0.0 { (p[2] / d).clamp(-1.0, 1.0).asin() } else { 0.0 };
        UserGeometry {
            azimuth: p[1].atan2(p[0]),
            elevation,
            distance: d,
        }
    }
}

/// Directions of the BS–MIS link and of every MIS–user link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub mis_azimuth: f64,
    pub mis_elevation: f64,
    pub bs_azimuth: f64,
    pub bs_elevation: f64,
    pub users: Vec<UserGeometry>,
}

/// Large-scale coefficients of one user's cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkScalars {
    pub iota: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl LinkScalars {
    fn validate(&self) -> Result<()> {
        let named = [
            ("iota", self.iota),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ];
        for (name, v) in named {
            if v.is_nan() || v < 0.0 {
                return Err(MisError::InvalidStats(format!("{name} must be nonnegative, got {v}")));
            }
        }
        for (name, v) in &named[..3] {
            if !v.is_finite() {
                return Err(MisError::InvalidStats(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// PSD-clipped correlation matrices with their square roots.
#[derive(Debug, Clone)]
pub struct Correlations {
    /// MIS receive side (M×M), multiplies the BS–MIS channel on the MIS side.
    pub s_mr: DMatrix<f64>,
    /// MIS transmit side (M×M), MIS–user channels.
    pub s_mt: DMatrix<f64>,
    /// BS side (L×L).
    pub s_b: DMatrix<f64>,
    sqrt_mr: DMatrix<f64>,
    sqrt_mt: DMatrix<f64>,
    sqrt_b: DMatrix<f64>,
}

impl Correlations {
    pub fn new(s_mr: DMatrix<f64>, s_mt: DMatrix<f64>, s_b: DMatrix<f64>) -> Result<Self> {
        if !s_mr.is_square() || !s_mt.is_square() || !s_b.is_square() || s_mr.nrows() != s_mt.nrows() {
            return Err(MisError::shape("correlation matrices must be square with matching MIS size"));
        }
        let s_mr = clip_psd_unit_diagonal(&s_mr);
        let s_mt = clip_psd_unit_diagonal(&s_mt);
        let s_b = clip_psd_unit_diagonal(&s_b);
        let sqrt_mr = psd_sqrt(&s_mr);
        let sqrt_mt = psd_sqrt(&s_mt);
        let sqrt_b = psd_sqrt(&s_b);
        for (name, r) in [("s_mr", &sqrt_mr), ("s_mt", &sqrt_mt), ("s_b", &sqrt_b)] {
            if r.iter().any(|x| !x.is_finite()) {
                return Err(MisError::Numeric(format!("square root of {name} is not finite")));
            }
        }
        Ok(Correlations {
            s_mr,
            s_mt,
            s_b,
            sqrt_mr,
            sqrt_mt,
            sqrt_b,
        })
    }

    /// Identity correlations (i.i.d. scattering).
    pub fn identity(m: usize, l: usize) -> Self {
        Correlations::new(DMatrix::identity(m, m), DMatrix::identity(m, m), DMatrix::identity(l, l))
            .expect("identity is a valid correlation")
    }

    /// Correlations implied by the element positions of a layout.
    pub fn from_layout(layout: &MisLayout) -> Result<Self> {
        Correlations::new(
            correlation_matrix(&layout.ms1_positions, layout.wavelength),
            correlation_matrix(layout.mis_transmit_positions(), layout.wavelength),
            correlation_matrix(&layout.bs_positions, layout.wavelength),
        )
    }

    pub fn sqrt_mt(&self) -> &DMatrix<f64> {
        &self.sqrt_mt
    }
}

/// Closed-form SNR covariance `Ξ` of one user.
pub fn xi_matrix(link: &LinkScalars, g_bar: &CMatrix, h_bar: &CVector, corr: &Correlations) -> Result<CMatrix> {
    link.validate()?;
    let m = h_bar.len();
    if g_bar.nrows() != m || corr.s_mr.nrows() != m || corr.s_b.nrows() != g_bar.ncols() {
        return Err(MisError::shape(format!(
            "G_bar is {}x{}, h_bar has {} entries, S_mr is {}x{}, S_b is {}x{}",
            g_bar.nrows(),
            g_bar.ncols(),
            m,
            corr.s_mr.nrows(),
            corr.s_mr.ncols(),
            corr.s_b.nrows(),
            corr.s_b.ncols()
        )));
    }
    let scale = link.iota * link.alpha1 * link.alpha2;
    let (w1l, w1n) = (los_weight(link.beta1), nlos_weight(link.beta1));
    let (w2l, w2n) = (los_weight(link.beta2), nlos_weight(link.beta2));
    let ggh = g_bar * g_bar.adjoint();
    let tr_b = corr.s_b.trace();
    let xi = CMatrix::from_fn(m, m, |i, j| {
        let los_pair = h_bar[i].conj() * h_bar[j];
        let s_mt_t = corr.s_mt[(j, i)];
        let s_mr = corr.s_mr[(i, j)];
        let g = ggh[(i, j)];
        let v = w2l * w1l * los_pair * g
            + C64::from(w2n * w1l * s_mt_t) * g
            + C64::from(w2l * w1n * tr_b * s_mr) * los_pair
            + C64::from(w2n * w1n * tr_b * s_mt_t * s_mr);
        v * scale
    });
    // symmetrize away rounding so downstream quadratic forms are exactly real
    Ok((&xi + xi.adjoint()) * C64::from(0.5))
}

/// Channel statistics for all users of a deployment.
#[derive(Debug, Clone)]
pub struct ChannelStats {
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: Vec<f64>,
    pub beta2: Vec<f64>,
    pub iota: Vec<f64>,
    pub g_bar: CMatrix,
    pub h_bar: Vec<CVector>,
    pub corr: Correlations,
    pub xi: Vec<CMatrix>,
}

/// Per-link inputs from which [`ChannelStats`] are assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: Vec<f64>,
    pub beta2: Vec<f64>,
    pub iota: Vec<f64>,
}

impl LinkBudget {
    /// Same budget for `k` users: unit path loss, reference SNR `iota`, Rician factor
    /// `beta` (linear) on every link.
    pub fn uniform(k: usize, iota: f64, beta: f64) -> Self {
        LinkBudget {
            alpha1: 1.0,
            beta1: beta,
            alpha2: vec![1.0; k],
            beta2: vec![beta; k],
            iota: vec![iota; k],
        }
    }

    fn scalars(&self, k: usize) -> LinkScalars {
        LinkScalars {
            iota: self.iota[k],
            alpha1: self.alpha1,
            alpha2: self.alpha2[k],
            beta1: self.beta1,
            beta2: self.beta2[k],
        }
    }
}

impl ChannelStats {
    /// Assemble statistics from LoS components, correlations and link budget.
    pub fn from_parts(g_bar: CMatrix, h_bar: Vec<CVector>, corr: Correlations, budget: &LinkBudget) -> Result<Self> {
        let k = h_bar.len();
        if budget.alpha2.len() != k || budget.beta2.len() != k || budget.iota.len() != k {
            return Err(MisError::shape(format!(
                "{k} users but budget lists {}/{}/{} entries",
                budget.alpha2.len(),
                budget.beta2.len(),
                budget.iota.len()
            )));
        }
        let xi = (0..k)
            .map(|i| xi_matrix(&budget.scalars(i), &g_bar, &h_bar[i], &corr))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelStats {
            alpha1: budget.alpha1,
            beta1: budget.beta1,
            alpha2: budget.alpha2.clone(),
            beta2: budget.beta2.clone(),
            iota: budget.iota.clone(),
            g_bar,
            h_bar,
            corr,
            xi,
        })
    }

    /// Statistics for a layout and link geometry, with sinc correlations.
    pub fn from_geometry(layout: &MisLayout, geo: &LinkGeometry, budget: &LinkBudget) -> Result<Self> {
        let (g_bar, h_bar) = los_components(layout, geo)?;
        ChannelStats::from_parts(g_bar, h_bar, Correlations::from_layout(layout)?, budget)
    }

    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            alpha1: self.alpha1,
            beta1: self.beta1,
            alpha2: self.alpha2.clone(),
            beta2: self.beta2.clone(),
            iota: self.iota.clone(),
        }
    }

    pub fn users(&self) -> usize {
        self.h_bar.len()
    }

    pub fn m(&self) -> usize {
        self.g_bar.nrows()
    }

    pub fn l(&self) -> usize {
        self.g_bar.ncols()
    }

    pub fn link(&self, k: usize) -> LinkScalars {
        LinkScalars {
            iota: self.iota[k],
            alpha1: self.alpha1,
            alpha2: self.alpha2[k],
            beta1: self.beta1,
            beta2: self.beta2[k],
        }
    }

    /// Draw the BS–MIS channel `G`.
    pub fn draw_g<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let (m, l) = (self.m(), self.l());
        let sigma = complex_normal_matrix(rng, m, l);
        let nlos = self.corr.sqrt_mr.map(C64::from) * sigma * self.corr.sqrt_b.map(C64::from);
        let a = self.alpha1.sqrt();
        let wl = C64::from(a * los_weight(self.beta1).sqrt());
        let wn = C64::from(a * nlos_weight(self.beta1).sqrt());
        &self.g_bar * wl + nlos * wn
    }

    /// Draw the MIS–user channel `h_k`.
    pub fn draw_h<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> CVector {
        let z = complex_normal_vector(rng, self.m());
        let nlos = self.corr.sqrt_mt.map(C64::from) * z;
        let a = self.alpha2[k].sqrt();
        let wl = C64::from(a * los_weight(self.beta2[k]).sqrt());
        let wn = C64::from(a * nlos_weight(self.beta2[k]).sqrt());
        &self.h_bar[k] * wl + nlos * wn
    }

    /// Draw one joint realization of all channels from an explicit generator.
    pub fn draw_with<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let g = self.draw_g(rng);
        let h = (0..self.users()).map(|k| self.draw_h(k, rng)).collect();
        ChannelRealization { g, h }
    }

    /// Draw one joint realization from stream `stream` of `seed`.
    pub fn draw_channel(&self, seed: u64, stream: u64) -> ChannelRealization {
        self.draw_with(&mut substream(seed, stream))
    }
}

/// One joint draw of the BS–MIS matrix and all MIS–user vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g: CMatrix,
    pub h: Vec<CVector>,
}

/// LoS components `Ḡ = a_MIS a_BS^T` and `h̄_k = a_MIS(ϑ_k, ψ_k)`.
pub fn los_components(layout: &MisLayout, geo: &LinkGeometry) -> Result<(CMatrix, Vec<CVector>)> {
    let a_mis = steering_vector(&layout.ms1_positions, geo.mis_azimuth, geo.mis_elevation, layout.wavelength)?;
    let a_bs = steering_vector(&layout.bs_positions, geo.bs_azimuth, geo.bs_elevation, layout.wavelength)?;
    let g_bar = &a_mis * a_bs.transpose();
    let h_bar = geo
        .users
        .iter()
        .map(|u| {
            if !(u.azimuth.is_finite() && u.elevation.is_finite()) || u.elevation.abs() > std::f64::consts::FRAC_PI_2 {
                return Err(MisError::Domain(format!(
                    "user angles ({}, {}) out of range",
                    u.azimuth, u.elevation
                )));
            }
            steering_vector(layout.mis_transmit_positions(), u.azimuth, u.elevation, layout.wavelength)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((g_bar, h_bar))
}
