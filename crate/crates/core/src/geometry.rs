//! Element layouts of the two stacked surfaces and the BS array, plus the beam
//! patterns produced by sliding the secondary surface (MS2) over the primary one (MS1).
//!
//! Conventions: MS1 lies in the x–y plane at `z = 0` with its first element at the
//! origin; the row index grows along `+x` and the column index along `+y`. Element
//! indices are row-major, `m = m_r * M_c + m_c` (zero-based here).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MisError, Result};
use crate::linalg::{CVector, ONE};

pub type Position = [f64; 3];

fn default_wavelength() -> f64 {
    0.1
}

fn default_spacing() -> f64 {
    0.05
}

fn default_bs_antennas() -> usize {
    4
}

fn default_ms_dim() -> usize {
    4
}

/// Dimensions of the MIS and the BS array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub ms1_rows: usize,
    pub ms1_cols: usize,
    #[serde(default = "default_ms_dim")]
    pub ms2_rows: usize,
    #[serde(default = "default_ms_dim")]
    pub ms2_cols: usize,
    #[serde(default = "default_bs_antennas")]
    pub bs_antennas: usize,
    /// MIS element pitch in meters.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    /// Carrier wavelength in meters.
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    /// BS antenna pitch in meters; half a wavelength when omitted.
    #[serde(default)]
    pub bs_spacing: Option<f64>,
}

impl LayoutConfig {
    pub fn new(ms1_rows: usize, ms1_cols: usize, ms2_rows: usize, ms2_cols: usize) -> Self {
        LayoutConfig {
            ms1_rows,
            ms1_cols,
            ms2_rows,
            ms2_cols,
            bs_antennas: default_bs_antennas(),
            spacing: default_spacing(),
            wavelength: default_wavelength(),
            bs_spacing: None,
        }
    }

    pub fn with_bs_antennas(mut self, l: usize) -> Self {
        self.bs_antennas = l;
        self
    }
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig::new(6, 6, 4, 4)
    }
}

/// Positions of every radiating element of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct MisLayout {
    pub ms1_rows: usize,
    pub ms1_cols: usize,
    pub ms2_rows: usize,
    pub ms2_cols: usize,
    pub bs_antennas: usize,
    pub spacing: f64,
    pub wavelength: f64,
    pub ms1_positions: Vec<Position>,
    pub ms2_rel_positions: Vec<Position>,
    pub bs_positions: Vec<Position>,
}

impl MisLayout {
    /// Number of MS1 elements `M`.
    pub fn m(&self) -> usize {
        self.ms1_rows * self.ms1_cols
    }

    /// Number of MS2 elements `N`.
    pub fn n(&self) -> usize {
        self.ms2_rows * self.ms2_cols
    }

    /// Number of shift positions along rows and columns, `(U_r, U_c)`.
    pub fn pattern_grid(&self) -> (usize, usize) {
        (
            self.ms1_rows - self.ms2_rows + 1,
            self.ms1_cols - self.ms2_cols + 1,
        )
    }

    pub fn pattern_count(&self) -> usize {
        let (ur, uc) = self.pattern_grid();
        ur * uc
    }

    /// Positions radiating towards the users: MS2 sits on the MS1 grid with a
    /// common pitch, so the transmit aperture coincides with the MS1 sites.
    pub fn mis_transmit_positions(&self) -> &[Position] {
        &self.ms1_positions
    }
}

fn grid(rows: usize, cols: usize, pitch: f64) -> Vec<Position> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push([r as f64 * pitch, c as f64 * pitch, 0.0]);
        }
    }
    out
}

fn positive(value: usize, field: &'static str) -> Result<()> {
    if value == 0 {
        return Err(MisError::InvalidLayout {
            field,
            reason: "must be positive".into(),
        });
    }
    Ok(())
}

/// Build element positions for MS1, MS2 (relative to its own origin) and the BS.
pub fn build_layout(cfg: &LayoutConfig) -> Result<MisLayout> {
    positive(cfg.ms1_rows, "ms1_rows")?;
    positive(cfg.ms1_cols, "ms1_cols")?;
    positive(cfg.ms2_rows, "ms2_rows")?;
    positive(cfg.ms2_cols, "ms2_cols")?;
    positive(cfg.bs_antennas, "bs_antennas")?;
    if cfg.ms2_rows > cfg.ms1_rows {
        return Err(MisError::InvalidLayout {
            field: "ms2_rows",
            reason: format!("{} exceeds ms1_rows {}", cfg.ms2_rows, cfg.ms1_rows),
        });
    }
    if cfg.ms2_cols > cfg.ms1_cols {
        return Err(MisError::InvalidLayout {
            field: "ms2_cols",
            reason: format!("{} exceeds ms1_cols {}", cfg.ms2_cols, cfg.ms1_cols),
        });
    }
    if !(cfg.spacing > 0.0 && cfg.spacing.is_finite()) {
        return Err(MisError::InvalidLayout {
            field: "spacing",
            reason: format!("must be positive, got {}", cfg.spacing),
        });
    }
    if !(cfg.wavelength > 0.0 && cfg.wavelength.is_finite()) {
        return Err(MisError::InvalidLayout {
            field: "wavelength",
            reason: format!("must be positive, got {}", cfg.wavelength),
        });
    }
    let bs_pitch = cfg.bs_spacing.unwrap_or(cfg.wavelength / 2.0);
    if !(bs_pitch > 0.0 && bs_pitch.is_finite()) {
        return Err(MisError::InvalidLayout {
            field: "bs_spacing",
            reason: format!("must be positive, got {bs_pitch}"),
        });
    }
    Ok(MisLayout {
        ms1_rows: cfg.ms1_rows,
        ms1_cols: cfg.ms1_cols,
        ms2_rows: cfg.ms2_rows,
        ms2_cols: cfg.ms2_cols,
        bs_antennas: cfg.bs_antennas,
        spacing: cfg.spacing,
        wavelength: cfg.wavelength,
        ms1_positions: grid(cfg.ms1_rows, cfg.ms1_cols, cfg.spacing),
        ms2_rel_positions: grid(cfg.ms2_rows, cfg.ms2_cols, cfg.spacing),
        bs_positions: grid(cfg.bs_antennas, 1, bs_pitch),
    })
}

/// One overlap configuration of MS2 on MS1.
///
/// The binary selection matrix `S` (M×N) is stored as an index map from MS2
/// element `n` to the MS1 element it covers; the padding vector `e` marks the
/// uncovered MS1 elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeamPattern {
    /// One-based pattern index `u`; zero for free-form (element-wise) placements.
    pub index: usize,
    /// One-based displacement `(u_r, u_c)`; `(0, 0)` for free-form placements.
    pub offset: (usize, usize),
    m: usize,
    map: Vec<usize>,
    cover: Vec<Option<usize>>,
}

impl BeamPattern {
    /// Free-form placement from an MS2→MS1 index map. Each MS1 element may be
    /// covered at most once.
    pub fn from_map(m: usize, map: Vec<usize>) -> Result<Self> {
        let mut cover = vec![None; m];
        for (n, &target) in map.iter().enumerate() {
            if target >= m {
                return Err(MisError::shape(format!(
                    "MS2 element {n} mapped to MS1 element {target} >= M = {m}"
                )));
            }
            if cover[target].is_some() {
                return Err(MisError::shape(format!(
                    "MS1 element {target} covered twice"
                )));
            }
            cover[target] = Some(n);
        }
        Ok(BeamPattern {
            index: 0,
            offset: (0, 0),
            m,
            map,
            cover,
        })
    }

    /// Pattern with no MS2 at all (`N = 0`, `e = 1`): the single-layer surface.
    pub fn uncovered(m: usize) -> Self {
        BeamPattern {
            index: 1,
            offset: (1, 1),
            m,
            map: Vec::new(),
            cover: vec![None; m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.map.len()
    }

    /// MS1 element covered by MS2 element `n`.
    pub fn target(&self, n: usize) -> usize {
        self.map[n]
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// MS2 element covering MS1 element `m`, if any.
    pub fn covering(&self, m: usize) -> Option<usize> {
        self.cover[m]
    }

    /// Dense M×N selection matrix.
    pub fn selection_matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.m, self.n());
        for (n, &m) in self.map.iter().enumerate() {
            s[(m, n)] = 1.0;
        }
        s
    }

    /// Padding vector `e_m = 1 - Σ_n S_{m,n}`.
    pub fn padding(&self) -> Vec<f64> {
        self.cover
            .iter()
            .map(|c| if c.is_some() { 0.0 } else { 1.0 })
            .collect()
    }

    /// `S θ + e` without any modulus check (relaxed iterates are allowed).
    pub fn overlay(&self, theta: &CVector) -> CVector {
        CVector::from_fn(self.m, |m, _| match self.cover[m] {
            Some(n) => theta[n],
            None => ONE,
        })
    }

    /// `(S θ + e) ⊙ φ` without any modulus check.
    pub fn compose(&self, theta: &CVector, phi: &CVector) -> CVector {
        CVector::from_fn(self.m, |m, _| match self.cover[m] {
            Some(n) => theta[n] * phi[m],
            None => phi[m],
        })
    }
}

/// All block displacements of MS2 over MS1, ordered by `u = (u_r - 1) U_c + u_c`.
pub fn enumerate_patterns(layout: &MisLayout) -> Vec<BeamPattern> {
    let (ur_count, uc_count) = layout.pattern_grid();
    let m = layout.m();
    let mut out = Vec::with_capacity(ur_count * uc_count);
    for ur in 0..ur_count {
        for uc in 0..uc_count {
            let mut map = Vec::with_capacity(layout.n());
            for nr in 0..layout.ms2_rows {
                for nc in 0..layout.ms2_cols {
                    map.push((ur + nr) * layout.ms1_cols + (uc + nc));
                }
            }
            let mut p = BeamPattern::from_map(m, map).expect("block placement is injective");
            p.index = ur * uc_count + uc + 1;
            p.offset = (ur + 1, uc + 1);
            out.push(p);
        }
    }
    out
}

/// Effective phase vector `v_u = (S_u θ + e_u) ⊙ φ` for unit-modulus profiles.
pub fn effective_phase(pattern: &BeamPattern, theta: &CVector, phi: &CVector) -> Result<CVector> {
    if phi.len() != pattern.m() || theta.len() != pattern.n() {
        return Err(MisError::shape(format!(
            "pattern is {}x{}, got phi of length {} and theta of length {}",
            pattern.m(),
            pattern.n(),
            phi.len(),
            theta.len()
        )));
    }
    let tol = 1e-9;
    if let Some(bad) = phi.iter().position(|z| (z.norm() - 1.0).abs() > tol) {
        return Err(MisError::Domain(format!("|phi[{bad}]| != 1")));
    }
    if let Some(bad) = theta.iter().position(|z| (z.norm() - 1.0).abs() > tol) {
        return Err(MisError::Domain(format!("|theta[{bad}]| != 1")));
    }
    Ok(pattern.compose(theta, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cis, C64};
    use proptest::prelude::*;

    #[test]
    fn degenerate_one_by_one_layout() {
        let cfg = LayoutConfig {
            spacing: 0.05,
            ..LayoutConfig::new(1, 1, 1, 1)
        };
        let l = build_layout(&cfg).unwrap();
        assert_eq!(l.ms1_positions, vec![[0.0, 0.0, 0.0]]);
        assert_eq!(l.ms2_rel_positions, vec![[0.0, 0.0, 0.0]]);
    }

    #[test]
    fn two_by_two_grid_positions() {
        let l = build_layout(&LayoutConfig::new(2, 2, 1, 1)).unwrap();
        assert_eq!(
            l.ms1_positions,
            vec![
                [0.0, 0.0, 0.0],
                [0.0, 0.05, 0.0],
                [0.05, 0.0, 0.0],
                [0.05, 0.05, 0.0]
            ]
        );
    }

    #[test]
    fn default_experiment_sizes() {
        let l = build_layout(&LayoutConfig::new(6, 6, 4, 4)).unwrap();
        assert_eq!((l.m(), l.n()), (36, 16));
    }

    #[test]
    fn invalid_layout_names_field() {
        let err = build_layout(&LayoutConfig::new(2, 2, 3, 1)).unwrap_err();
        assert!(matches!(err, MisError::InvalidLayout { field: "ms2_rows", .. }));
        let err = build_layout(&LayoutConfig::new(2, 0, 1, 1)).unwrap_err();
        assert!(matches!(err, MisError::InvalidLayout { field: "ms1_cols", .. }));
        let cfg = LayoutConfig {
            wavelength: -1.0,
            ..LayoutConfig::new(2, 2, 1, 1)
        };
        let err = build_layout(&cfg).unwrap_err();
        assert!(matches!(err, MisError::InvalidLayout { field: "wavelength", .. }));
    }

    #[test]
    fn full_overlap_is_identity() {
        let l = build_layout(&LayoutConfig::new(2, 2, 2, 2)).unwrap();
        let p = enumerate_patterns(&l);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].selection_matrix(), DMatrix::identity(4, 4));
        assert_eq!(p[0].padding(), vec![0.0; 4]);
    }

    #[test]
    fn corner_placement_of_single_element() {
        let l = build_layout(&LayoutConfig::new(2, 2, 1, 1)).unwrap();
        let p = enumerate_patterns(&l);
        assert_eq!(p.len(), 4);
        assert_eq!(p[0].offset, (1, 1));
        assert_eq!(p[0].target(0), 0);
        assert_eq!(p[0].padding(), vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn five_by_five_over_three_by_three() {
        let l = build_layout(&LayoutConfig::new(5, 5, 3, 3)).unwrap();
        assert_eq!(enumerate_patterns(&l).len(), 9);
    }

    #[test]
    fn effective_phase_examples() {
        let l = build_layout(&LayoutConfig::new(2, 2, 1, 1)).unwrap();
        let p = &enumerate_patterns(&l)[0];
        let ones4 = CVector::from_element(4, C64::new(1.0, 0.0));
        let v = effective_phase(p, &CVector::from_element(1, cis(std::f64::consts::FRAC_PI_2)), &ones4).unwrap();
        assert!((v[0] - cis(std::f64::consts::FRAC_PI_2)).norm() < 1e-15);
        for i in 1..4 {
            assert_eq!(v[i], C64::new(1.0, 0.0));
        }
        let v = effective_phase(p, &CVector::from_element(1, C64::new(1.0, 0.0)), &ones4).unwrap();
        assert_eq!(v, ones4);
        assert!(effective_phase(p, &CVector::from_element(2, C64::new(1.0, 0.0)), &ones4).is_err());
        assert!(effective_phase(p, &CVector::from_element(1, C64::new(0.5, 0.0)), &ones4).is_err());
    }

    #[test]
    fn full_overlap_composes_entrywise() {
        let l = build_layout(&LayoutConfig::new(2, 2, 2, 2)).unwrap();
        let p = &enumerate_patterns(&l)[0];
        let theta = CVector::from_fn(4, |i, _| cis(0.3 * i as f64));
        let phi = CVector::from_fn(4, |i, _| cis(-0.7 * i as f64 + 0.1));
        let v = effective_phase(p, &theta, &phi).unwrap();
        for i in 0..4 {
            assert!((v[i] - theta[i] * phi[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn one_column_shift_moves_block_by_one_column() {
        let l = build_layout(&LayoutConfig::new(4, 5, 2, 2)).unwrap();
        let pats = enumerate_patterns(&l);
        let (_, uc) = l.pattern_grid();
        for p in pats.windows(2) {
            if p[0].offset.0 != p[1].offset.0 {
                continue;
            }
            assert_eq!(p[1].index, p[0].index + 1);
            for n in 0..p[0].n() {
                assert_eq!(p[1].target(n), p[0].target(n) + 1);
            }
        }
        assert_eq!(uc, 4);
    }

    /// Independent count of every contiguous placement by scanning the MS1 grid.
    fn brute_force_count(mr: usize, mc: usize, nr: usize, nc: usize) -> usize {
        let mut count = 0;
        for r0 in 0..mr {
            for c0 in 0..mc {
                if (0..nr).all(|i| r0 + i < mr) && (0..nc).all(|j| c0 + j < mc) {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn pattern_count_matches_brute_force() {
        for mr in 1..=6 {
            for mc in 1..=6 {
                for nr in 1..=mr {
                    for nc in 1..=mc {
                        let l = build_layout(&LayoutConfig::new(mr, mc, nr, nc)).unwrap();
                        assert_eq!(enumerate_patterns(&l).len(), brute_force_count(mr, mc, nr, nc));
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn selection_invariants(mr in 1usize..7, mc in 1usize..7, nr_seed in 0usize..7, nc_seed in 0usize..7) {
            let nr = 1 + nr_seed % mr;
            let nc = 1 + nc_seed % mc;
            let l = build_layout(&LayoutConfig::new(mr, mc, nr, nc)).unwrap();
            for p in enumerate_patterns(&l) {
                let s = p.selection_matrix();
                prop_assert_eq!(s.transpose() * &s, DMatrix::identity(l.n(), l.n()));
                let sst = &s * s.transpose();
                let e = p.padding();
                for m in 0..l.m() {
                    prop_assert_eq!(sst[(m, m)] + e[m], 1.0);
                }
                // the covered block is contiguous at the stated offset
                let (ur, uc) = p.offset;
                for n in 0..l.n() {
                    let (r, c) = (n / nc, n % nc);
                    prop_assert_eq!(p.target(n), (ur - 1 + r) * mc + (uc - 1 + c));
                }
            }
        }

        #[test]
        fn effective_phase_is_unit_modulus(phases in proptest::collection::vec(0.0f64..6.3, 13)) {
            let l = build_layout(&LayoutConfig::new(3, 3, 2, 2)).unwrap();
            let phi = CVector::from_fn(9, |i, _| cis(phases[i]));
            let theta = CVector::from_fn(4, |i, _| cis(phases[9 + i]));
            for p in enumerate_patterns(&l) {
                let v = effective_phase(&p, &theta, &phi).unwrap();
                for z in v.iter() {
                    prop_assert!((z.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
