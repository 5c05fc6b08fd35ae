//! Quadratic forms of the mean SNR in each phase block.
//!
//! With `v_u = (S_u θ + e_u) ⊙ φ`,
//! `v_u^H Ξ_k v_u = θ^H A θ + 2 Re{θ^H a} + a_s = φ^H B φ`.

use crate::channel::ChannelStats;
use crate::geometry::BeamPattern;
use crate::linalg::{CMatrix, CVector, C64};

/// Forms in `θ` for fixed `φ`, one entry per `(k, u)` in row-major order.
#[derive(Debug, Clone)]
pub struct ThetaForm {
    pub a_mat: CMatrix,
    pub a_vec: CVector,
    pub a_scalar: f64,
}

impl ThetaForm {
    pub fn eval(&self, theta: &CVector) -> f64 {
        theta.dotc(&(&self.a_mat * theta)).re + 2.0 * theta.dotc(&self.a_vec).re + self.a_scalar
    }
}

/// All four families of forms for a set of patterns.
#[derive(Debug, Clone)]
pub struct QuadraticForms {
    pub users: usize,
    pub patterns: usize,
    pub theta_forms: Vec<ThetaForm>,
    pub b: Vec<CMatrix>,
}

impl QuadraticForms {
    pub fn theta_form(&self, k: usize, u: usize) -> &ThetaForm {
        &self.theta_forms[k * self.patterns + u]
    }

    pub fn b(&self, k: usize, u: usize) -> &CMatrix {
        &self.b[k * self.patterns + u]
    }
}

/// `A = S^H diag(φ*) Ξ diag(φ) S`, `a = S^H diag(φ*) Ξ diag(φ) e`, `a_s = e^H diag(φ*) Ξ diag(φ) e`.
pub fn theta_form(xi: &CMatrix, pattern: &BeamPattern, phi: &CVector) -> ThetaForm {
    let n = pattern.n();
    let m = pattern.m();
    let uncovered: Vec<usize> = (0..m).filter(|&i| pattern.covering(i).is_none()).collect();
    let a_mat = CMatrix::from_fn(n, n, |i, j| {
        let (mi, mj) = (pattern.target(i), pattern.target(j));
        phi[mi].conj() * xi[(mi, mj)] * phi[mj]
    });
    let a_vec = CVector::from_fn(n, |i, _| {
        let mi = pattern.target(i);
        let mut acc = C64::new(0.0, 0.0);
        for &j in &uncovered {
            acc += xi[(mi, j)] * phi[j];
        }
        phi[mi].conj() * acc
    });
    let mut a_scalar = C64::new(0.0, 0.0);
    for &i in &uncovered {
        for &j in &uncovered {
            a_scalar += phi[i].conj() * xi[(i, j)] * phi[j];
        }
    }
    ThetaForm {
        a_mat,
        a_vec,
        a_scalar: a_scalar.re,
    }
}

/// `B = diag(θ̄*) Ξ diag(θ̄)` with `θ̄ = S θ + e`.
pub fn phi_form(xi: &CMatrix, pattern: &BeamPattern, theta: &CVector) -> CMatrix {
    let bar = pattern.overlay(theta);
    CMatrix::from_fn(xi.nrows(), xi.ncols(), |i, j| bar[i].conj() * xi[(i, j)] * bar[j])
}

pub fn theta_forms(stats: &ChannelStats, patterns: &[BeamPattern], phi: &CVector) -> Vec<ThetaForm> {
    let mut out = Vec::with_capacity(stats.users() * patterns.len());
    for xi in &stats.xi {
        for p in patterns {
            out.push(theta_form(xi, p, phi));
        }
    }
    out
}

pub fn phi_forms(stats: &ChannelStats, patterns: &[BeamPattern], theta: &CVector) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(stats.users() * patterns.len());
    for xi in &stats.xi {
        for p in patterns {
            out.push(phi_form(xi, p, theta));
        }
    }
    out
}

pub fn build_quadratic_forms(stats: &ChannelStats, patterns: &[BeamPattern], theta: &CVector, phi: &CVector) -> QuadraticForms {
    QuadraticForms {
        users: stats.users(),
        patterns: patterns.len(),
        theta_forms: theta_forms(stats, patterns, phi),
        b: phi_forms(stats, patterns, theta),
    }
}

/// Largest relative violation of `θ^H A θ + 2Re{θ^H a} + a_s = φ^H B φ = v^H Ξ v`.
pub fn cross_identity_residual(
    forms: &QuadraticForms,
    stats: &ChannelStats,
    patterns: &[BeamPattern],
    theta: &CVector,
    phi: &CVector,
) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..forms.users {
        for (u, p) in patterns.iter().enumerate() {
            let direct = crate::linalg::quad_form(&stats.xi[k], &p.compose(theta, phi));
            let via_theta = forms.theta_form(k, u).eval(theta);
            let via_phi = crate::linalg::quad_form(forms.b(k, u), phi);
            let scale = direct.abs().max(1e-300);
            worst = worst
                .max((via_theta - direct).abs() / scale)
                .max((via_phi - direct).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{substream, Correlations, LinkBudget};
    use crate::geometry::{build_layout, enumerate_patterns, LayoutConfig};
    use crate::linalg::{min_eigenvalue_hermitian, random_phases};

    fn stats(m: usize, k: usize, seed: u64) -> ChannelStats {
        let mut rng = substream(seed, 0);
        let a = random_phases(&mut rng, m);
        let b = random_phases(&mut rng, 2);
        let h = (0..k).map(|_| random_phases(&mut rng, m)).collect();
        ChannelStats::from_parts(&a * b.transpose(), h, Correlations::identity(m, 2), &LinkBudget::uniform(k, 0.3, 2.0)).unwrap()
    }

    #[test]
    fn cross_identity_holds_for_random_profiles() {
        let layout = build_layout(&LayoutConfig::new(3, 4, 2, 2)).unwrap();
        let pats = enumerate_patterns(&layout);
        let s = stats(12, 3, 1);
        let mut rng = substream(2, 0);
        for _ in 0..10 {
            let phi = random_phases(&mut rng, 12);
            let theta = random_phases(&mut rng, 4);
            let f = build_quadratic_forms(&s, &pats, &theta, &phi);
            assert!(cross_identity_residual(&f, &s, &pats, &theta, &phi) < 1e-10);
            for t in &f.theta_forms {
                assert!(min_eigenvalue_hermitian(&t.a_mat) > -1e-9);
            }
            for b in &f.b {
                assert!(min_eigenvalue_hermitian(b) > -1e-9);
            }
        }
    }

    #[test]
    fn ones_profile_matches_direct_evaluation() {
        let layout = build_layout(&LayoutConfig::new(2, 3, 1, 2)).unwrap();
        let pats = enumerate_patterns(&layout);
        let s = stats(6, 2, 3);
        let phi = CVector::from_element(6, C64::new(1.0, 0.0));
        let theta = CVector::from_element(2, C64::new(1.0, 0.0));
        let f = build_quadratic_forms(&s, &pats, &theta, &phi);
        for k in 0..2 {
            let direct = crate::linalg::quad_form(&s.xi[k], &phi);
            for u in 0..pats.len() {
                assert!((crate::linalg::quad_form(f.b(k, u), &phi) - direct).abs() < 1e-10 * direct);
            }
        }
    }

    #[test]
    fn full_overlap_has_no_padding_terms() {
        let layout = build_layout(&LayoutConfig::new(2, 2, 2, 2)).unwrap();
        let pats = enumerate_patterns(&layout);
        let s = stats(4, 1, 4);
        let phi = random_phases(&mut substream(5, 0), 4);
        let t = theta_form(&s.xi[0], &pats[0], &phi);
        assert_eq!(t.a_vec.norm(), 0.0);
        assert_eq!(t.a_scalar, 0.0);
    }

    #[test]
    fn single_element_ms2_gives_scalar_form() {
        let layout = build_layout(&LayoutConfig::new(2, 2, 1, 1)).unwrap();
        let pats = enumerate_patterns(&layout);
        let s = stats(4, 1, 6);
        let phi = random_phases(&mut substream(7, 0), 4);
        let t = theta_form(&s.xi[0], &pats[2], &phi);
        assert_eq!(t.a_mat.shape(), (1, 1));
    }
}
