//! Convex subproblem solvers used inside the block coordinate loop.
//!
//! * The schedule step is a linear program whose structure (one simplex per user and a
//!   single coupling level `μ`) lets it be solved exactly by scanning the breakpoints of
//!   a concave piecewise-linear function of `μ`.
//! * The phase steps maximize the minimum of affine functions `2Re{g_k^H x} + c_k` over
//!   the product of unit disks, solved with a small log-barrier interior-point method.
//! * The throughput variant maximizes a concave sum of logs of affine functions over the
//!   disks by projected gradient ascent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MisError, Result};
use crate::linalg::{clip_to_disk, CVector, C64, ONE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsolverConfig {
    /// Relative duality gap (max-min) or relative improvement (sum-log) at which to stop.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SubsolverConfig {
    fn default() -> Self {
        SubsolverConfig {
            tol: 1e-7,
            max_iter: 3000,
        }
    }
}

/// `f(x) = 2 Re{g^H x} + c`.
#[derive(Debug, Clone)]
pub struct AffinePiece {
    pub g: CVector,
    pub c: f64,
}

impl AffinePiece {
    pub fn eval(&self, x: &CVector) -> f64 {
        2.0 * self.g.dotc(x).re + self.c
    }
}

#[derive(Debug, Clone)]
pub struct MaxMinSolution {
    pub x: CVector,
    /// `min_k f_k(x)` at the returned point.
    pub value: f64,
    /// Best dual bound found.
    pub bound: f64,
    pub iterations: usize,
}

fn min_value(pieces: &[AffinePiece], x: &CVector) -> f64 {
    pieces.iter().map(|p| p.eval(x)).fold(f64::INFINITY, f64::min)
}

/// Disk-constrained maximizer of `Re{s^H x}`, falling back to `warm` where `s` vanishes.
fn phase_of(s: &CVector, warm: &CVector) -> CVector {
    let scale = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
    CVector::from_fn(s.len(), |i, _| {
        let r = s[i].norm();
        if r > 1e-14 * scale && r > 0.0 {
            s[i] / r
        } else {
            warm[i]
        }
    })
}

/// Barrier objective `-τt - Σ log s_k - Σ log(1 - |x_i|²)` for the epigraph form, or
/// `None` outside the domain. `y = [Re x; Im x; t]`.
fn barrier(pieces: &[AffinePiece], y: &[f64], tau: f64) -> Option<f64> {
    let n = (y.len() - 1) / 2;
    let t = y[2 * n];
    let mut acc = -tau * t;
    for p in pieces {
        let s = affine_real(p, y) - t;
        if !(s > 0.0) {
            return None;
        }
        acc -= s.ln();
    }
    for i in 0..n {
        let d = 1.0 - y[i] * y[i] - y[n + i] * y[n + i];
        if !(d > 0.0) {
            return None;
        }
        acc -= d.ln();
    }
    Some(acc)
}

fn affine_real(p: &AffinePiece, y: &[f64]) -> f64 {
    let n = p.g.len();
    let mut v = p.c;
    for i in 0..n {
        v += 2.0 * (p.g[i].re * y[i] + p.g[i].im * y[n + i]);
    }
    v
}

fn to_complex(y: &[f64], n: usize) -> CVector {
    CVector::from_fn(n, |i, _| C64::new(y[i], y[n + i]))
}

/// Maximize `min_k f_k(x)` subject to `|x_i| ≤ 1`.
///
/// Solved in epigraph form with a log-barrier interior-point method; the duality gap after
/// each centering stage is at most `(K + n)/τ`. The returned point is never worse than
/// `warm` (projected onto the disks). When the Newton budget runs out first, the best
/// point found so far is carried inside [`MisError::Stalled`].
pub fn max_min_affine_disk(pieces: &[AffinePiece], warm: &CVector, cfg: &SubsolverConfig) -> Result<MaxMinSolution> {
    if pieces.is_empty() {
        return Err(MisError::shape("max-min subproblem needs at least one piece"));
    }
    let n = warm.len();
    if pieces.iter().any(|p| p.g.len() != n) {
        return Err(MisError::shape("affine pieces do not match the variable length"));
    }
    if pieces.iter().any(|p| !p.c.is_finite() || p.g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(MisError::Numeric("non-finite coefficients in max-min subproblem".into()));
    }
    let mut warm = warm.clone();
    clip_to_disk(&mut warm);
    let mut best_x = warm.clone();
    let mut best = min_value(pieces, &best_x);

    let k = pieces.len();
    if k == 1 || n == 0 {
        let x = if n == 0 { warm.clone() } else { phase_of(&pieces[0].g, &warm) };
        let v = min_value(pieces, &x);
        if v > best {
            best = v;
            best_x = x;
        }
        let bound = if k == 1 {
            pieces[0].c + 2.0 * pieces[0].g.iter().map(|z| z.norm()).sum::<f64>()
        } else {
            best
        };
        return Ok(MaxMinSolution {
            x: best_x,
            value: best,
            bound,
            iterations: 1,
        });
    }

    // work with pieces scaled to unit size so the barrier parameters are dimensionless
    let scale = pieces
        .iter()
        .map(|p| p.c.abs() + 2.0 * p.g.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-300);
    let scaled: Vec<AffinePiece> = pieces
        .iter()
        .map(|p| AffinePiece {
            g: p.g.unscale(scale),
            c: p.c / scale,
        })
        .collect();

    let dim = 2 * n + 1;
    let mut y = vec![0.0; dim];
    for i in 0..n {
        let z = warm[i] * 0.99;
        y[i] = z.re;
        y[n + i] = z.im;
    }
    y[2 * n] = min_value(&scaled, &to_complex(&y, n)) - 1.0;
    let m_constraints = (k + n) as f64;
    let mut tau = m_constraints;
    let mut newton_steps = 0;
    let mut gap = m_constraints / tau;

    loop {
        // centering
        loop {
            if newton_steps >= cfg.max_iter {
                let x = to_complex(&y, n);
                let v = min_value(pieces, &x);
                if v > best {
                    best_x = x;
                }
                return Err(MisError::Stalled {
                    iterations: newton_steps,
                    gap: gap * scale,
                    last: best_x.iter().copied().collect(),
                });
            }
            let t = y[2 * n];
            let mut grad = DVector::<f64>::zeros(dim);
            let mut hess = DMatrix::<f64>::zeros(dim, dim);
            grad[2 * n] = -tau;
            let mut row = DVector::<f64>::zeros(dim);
            for p in &scaled {
                let s = affine_real(p, &y) - t;
                for i in 0..n {
                    row[i] = 2.0 * p.g[i].re;
                    row[n + i] = 2.0 * p.g[i].im;
                }
                row[2 * n] = -1.0;
                grad.axpy(-1.0 / s, &row, 1.0);
                hess.ger(1.0 / (s * s), &row, &row, 1.0);
            }
            for i in 0..n {
                let (a, b) = (y[i], y[n + i]);
                let d = 1.0 - a * a - b * b;
                grad[i] += 2.0 * a / d;
                grad[n + i] += 2.0 * b / d;
                let h0 = 2.0 / d;
                let c = 4.0 / (d * d);
                hess[(i, i)] += h0 + c * a * a;
                hess[(n + i, n + i)] += h0 + c * b * b;
                hess[(i, n + i)] += c * a * b;
                hess[(n + i, i)] += c * a * b;
            }
            let Some(chol) = hess.clone().cholesky() else {
                return Err(MisError::Numeric("barrier Hessian is not positive definite".into()));
            };
            let step = chol.solve(&(-&grad));
            let decrement = -grad.dot(&step);
            newton_steps += 1;
            if decrement / 2.0 <= 1e-10 {
                break;
            }
            let f0 = barrier(&scaled, &y, tau).expect("iterate stays interior");
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
                if let Some(f1) = barrier(&scaled, &trial, tau) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        y = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        gap = m_constraints / tau;
        if gap <= cfg.tol {
            break;
        }
        tau *= 10.0;
    }

    let x = to_complex(&y, n);
    let v = min_value(pieces, &x);
    if v > best {
        best = v;
        best_x = x;
    }
    Ok(MaxMinSolution {
        x: best_x,
        value: best,
        bound: best.max(v + gap * scale),
        iterations: newton_steps,
    })
}

/// One affine SNR surrogate `F(x) = 2Re{g^H x} + c` with its weight in the sum of rates.
#[derive(Debug, Clone)]
pub struct WeightedLogPiece {
    pub weight: f64,
    pub piece: AffinePiece,
}

fn sum_log(pieces: &[WeightedLogPiece], x: &CVector) -> f64 {
    let mut acc = 0.0;
    for p in pieces {
        if p.weight == 0.0 {
            continue;
        }
        let f = p.piece.eval(x);
        if f <= -1.0 {
            return f64::NEG_INFINITY;
        }
        acc += p.weight * (1.0 + f).log2();
    }
    acc
}

/// Maximize `Σ w log2(1 + F(x))` over `|x_i| ≤ 1` by projected gradient ascent.
pub fn max_sum_log_disk(pieces: &[WeightedLogPiece], warm: &CVector, cfg: &SubsolverConfig) -> Result<(CVector, f64)> {
    let mut x = warm.clone();
    clip_to_disk(&mut x);
    let mut val = sum_log(pieces, &x);
    if !val.is_finite() {
        return Err(MisError::Numeric("sum-log surrogate undefined at the starting point".into()));
    }
    let mut step = f64::NAN;
    for _ in 0..cfg.max_iter {
        let mut grad = CVector::zeros(x.len());
        for p in pieces {
            if p.weight == 0.0 {
                continue;
            }
            let f = p.piece.eval(&x);
            grad.axpy(C64::from(2.0 * p.weight / ((1.0 + f) * std::f64::consts::LN_2)), &p.piece.g, ONE);
        }
        let gnorm = grad.norm();
        if gnorm == 0.0 {
            break;
        }
        if step.is_nan() {
            step = 1.0 / gnorm;
        }
        let mut improved = false;
        for _ in 0..60 {
            let mut next = &x + &grad * C64::from(step);
            clip_to_disk(&mut next);
            let nv = sum_log(pieces, &next);
            let lin = grad.dotc(&(&next - &x)).re;
            if nv.is_finite() && nv >= val + 1e-4 * lin && lin > 0.0 {
                let rel = (nv - val) / val.abs().max(1e-300);
                x = next;
                val = nv;
                improved = true;
                step *= 2.0;
                if rel < cfg.tol {
                    return Ok((x, val));
                }
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((x, val))
}

/// Per-user choice in the schedule step.
#[derive(Debug, Clone, Copy)]
enum Choice {
    Vertex(usize),
    Mix { hi: usize, lo: usize, t: f64 },
}

/// Cheapest point of the simplex with `q·ξ ≥ μ`, ties to vertices, larger slack, lower index.
fn min_cost_at(q: &[f64], w: &[f64], mu: f64) -> Option<(f64, Choice)> {
    let tie = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    let mut best: Option<(f64, Choice, f64)> = None;
    for u in 0..q.len() {
        if q[u] >= mu {
            let better = match best {
                None => true,
                Some((c, _, slack)) => w[u] < c && !tie(w[u], c) || tie(w[u], c) && q[u] - mu > slack,
            };
            if better {
                best = Some((w[u], Choice::Vertex(u), q[u] - mu));
            }
        }
    }
    for hi in 0..q.len() {
        if q[hi] <= mu {
            continue;
        }
        for lo in 0..q.len() {
            if q[lo] >= mu || w[lo] >= w[hi] {
                continue;
            }
            let t = (mu - q[lo]) / (q[hi] - q[lo]);
            let cost = t * w[hi] + (1.0 - t) * w[lo];
            let better = match best {
                None => true,
                Some((c, _, _)) => cost < c && !tie(cost, c),
            };
            if better {
                best = Some((cost, Choice::Mix { hi, lo, t }, 0.0));
            }
        }
    }
    best.map(|(c, ch, _)| (c, ch))
}

/// Exact solution of the relaxed schedule step
/// `max μ − ρ Σ (1 − 2ξ^ℓ) ξ` s.t. `Σ_u ξ_{k,u} q_{k,u} ≥ μ`, rows of `X` on the simplex.
/// Returns the new schedule and the attained level `μ`.
pub fn solve_schedule_lp(q: &DMatrix<f64>, x_l: &DMatrix<f64>, rho: f64) -> Result<(DMatrix<f64>, f64)> {
    if q.shape() != x_l.shape() {
        return Err(MisError::shape("SNR and schedule matrices differ in shape"));
    }
    if q.iter().any(|v| v.is_nan()) {
        return Err(MisError::Numeric("NaN in SNR matrix".into()));
    }
    let (k, u) = q.shape();
    let rows_q: Vec<Vec<f64>> = (0..k).map(|i| q.row(i).iter().copied().collect()).collect();
    let rows_w: Vec<Vec<f64>> = (0..k)
        .map(|i| x_l.row(i).iter().map(|&x| rho * (1.0 - 2.0 * x)).collect())
        .collect();
    let mu_max = rows_q
        .iter()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);
    let mut candidates: Vec<f64> = q.iter().copied().filter(|&v| v <= mu_max).collect();
    candidates.sort_by(|a, b| b.partial_cmp(a).unwrap());
    candidates.dedup();

    let mut best: Option<(f64, f64, Vec<Choice>)> = None;
    for &mu in &candidates {
        let mut total = 0.0;
        let mut choices = Vec::with_capacity(k);
        let mut feasible = true;
        for i in 0..k {
            match min_cost_at(&rows_q[i], &rows_w[i], mu) {
                Some((c, ch)) => {
                    total += c;
                    choices.push(ch);
                }
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }
        let j = mu - total;
        // candidates are scanned from large to small, so ties keep the larger level
        if best.as_ref().is_none_or(|(bj, _, _)| j > *bj + 1e-12 * (1.0 + bj.abs())) {
            best = Some((j, mu, choices));
        }
    }
    let (_, mu, choices) = best.ok_or_else(|| MisError::Numeric("schedule step has no feasible level".into()))?;
    let mut x = DMatrix::zeros(k, u);
    for (i, ch) in choices.into_iter().enumerate() {
        match ch {
            Choice::Vertex(a) => x[(i, a)] = 1.0,
            Choice::Mix { hi, lo, t } => {
                x[(i, hi)] = t;
                x[(i, lo)] = 1.0 - t;
            }
        }
    }
    Ok((x, mu))
}
