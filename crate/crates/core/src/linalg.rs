//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `e^{j angle}`.
#[inline]
pub fn cis(angle: f64) -> C64 {
    C64::from_polar(1.0, angle)
}

/// Unit-modulus vector with phases drawn uniformly from `[0, 2π)`.
pub fn random_phases<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| cis(rng.random::<f64>() * std::f64::consts::TAU))
}

/// Vector of i.i.d. `CN(0, 1)` entries.
pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| complex_normal(rng))
}

/// Matrix of i.i.d. `CN(0, 1)` entries.
pub fn complex_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Real `2n×2n` matrix `[[Re A, −Im A], [Im A, Re A]]`, which acts on stacked
/// `[Re x; Im x]` as `A` acts on `x`. Products with it go through the real GEMM kernel.
pub fn real_embedding(a: &CMatrix) -> DMatrix<f64> {
    let (r, c) = a.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = a[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Real part of `v^H A v`.
#[inline]
pub fn quad_form(a: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(a * v)).re
}

/// Entrywise `x / |x|`; entries with modulus below `floor` fall back to `fallback[i]`.
pub fn normalize_entries(x: &CVector, fallback: &CVector, floor: f64) -> (CVector, usize) {
    let mut fallbacks = 0;
    let out = CVector::from_fn(x.len(), |i, _| {
        let r = x[i].norm();
        if r > floor {
            x[i] / r
        } else {
            fallbacks += 1;
            let f = fallback[i];
            let fr = f.norm();
            if fr > 0.0 {
                f / fr
            } else {
                ONE
            }
        }
    });
    (out, fallbacks)
}

/// Clamp every entry into the closed unit disk.
pub fn clip_to_disk(x: &mut CVector) {
    for z in x.iter_mut() {
        let r = z.norm();
        if r > 1.0 {
            *z /= r;
        }
    }
}

/// Maximum deviation of `|x_i|` from one.
pub fn max_modulus_error(x: &CVector) -> f64 {
    x.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
}

/// Symmetric eigen-decomposition with negative eigenvalues clipped to zero.
fn clipped_eigen(s: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|l| l.max(0.0));
    (eig.eigenvectors, vals)
}

/// Clip a real symmetric matrix to the PSD cone and rescale it back to unit diagonal.
pub fn clip_psd_unit_diagonal(s: &DMatrix<f64>) -> DMatrix<f64> {
    let (vecs, vals) = clipped_eigen(s);
    let clipped = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
    let d = clipped.diagonal().map(|x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 });
    let n = s.nrows();
    let mut out = DMatrix::from_fn(n, n, |i, j| clipped[(i, j)] * d[i] * d[j]);
    for i in 0..n {
        out[(i, i)] = 1.0;
        for j in 0..i {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    out
}

/// Symmetric PSD square root (negative eigenvalues clipped).
pub fn psd_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    let (vecs, vals) = clipped_eigen(s);
    let root = vals.map(f64::sqrt);
    &vecs * DMatrix::from_diagonal(&root) * vecs.transpose()
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(s: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new((s + s.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of the Hermitian part of a complex matrix.
pub fn min_eigenvalue_hermitian(a: &CMatrix) -> f64 {
    let h = (a + a.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Euclidean projection of `y` onto the probability simplex (sort-based).
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (i as f64 + 1.0);
        if s - t > 0.0 {
            tau = t;
        }
    }
    (0..n).map(|i| (y[i] - tau).max(0.0)).collect()
}

/// Simplex projection followed by flooring at `floor` and renormalization, so every
/// entry stays strictly positive.
pub fn project_simplex_positive(y: &[f64], floor: f64) -> Vec<f64> {
    let mut p = project_simplex(y);
    for x in p.iter_mut() {
        if *x < floor {
            *x = floor;
        }
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}
