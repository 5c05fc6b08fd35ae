//! Riemannian conjugate gradient on products of complex circles and probability
//! simplices.
//!
//! Everything here maximizes. Complex gradients follow the `∂/∂Re + j ∂/∂Im` convention, so
//! the first-order change of `f` along `δ` is `Re⟨g, δ⟩`.

pub mod elementwise;
pub mod throughput;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MisError, Result};
use crate::linalg::{project_simplex, CVector, C64};

pub use elementwise::{penalties_pq, rcg_solve_p7, ElementwiseConfig, ElementwiseObjective, ElementwiseResult};
pub use throughput::{rcg_solve_p5, PatternObjective, ThroughputResult};

/// Strict positivity floor for simplex coordinates after retraction.
pub const SIMPLEX_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RcgConfig {
    /// Stop when the combined stationarity measure falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    pub shrink: f64,
    /// Sufficient-increase coefficient of the Armijo test.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Independent random initializations; the best final design is kept.
    pub starts: usize,
}

impl Default for RcgConfig {
    fn default() -> Self {
        RcgConfig {
            grad_tol: 1e-4,
            max_iter: 2000,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            max_backtracks: 30,
            starts: 1,
        }
    }
}

impl RcgConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grad_tol > 0.0
            && self.max_iter > 0
            && self.initial_step > 0.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.starts > 0;
        if ok {
            Ok(())
        } else {
            Err(MisError::config("rcg: invalid line-search or stopping parameters"))
        }
    }
}

/// Which index of a simplex block sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stochastic {
    /// Each row lies on a simplex (schedules).
    Rows,
    /// Each column lies on a simplex (element placements).
    Columns,
}

/// A point of `circle^M × circle^N × (simplex blocks)`, also used for tangent vectors and
/// Euclidean gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    pub phi: CVector,
    pub theta: CVector,
    pub blocks: Vec<DMatrix<f64>>,
}

impl ManifoldPoint {
    pub fn zeros_like(&self) -> Self {
        ManifoldPoint {
            phi: CVector::zeros(self.phi.len()),
            theta: CVector::zeros(self.theta.len()),
            blocks: self.blocks.iter().map(|b| DMatrix::zeros(b.nrows(), b.ncols())).collect(),
        }
    }

    /// Real inner product `Re⟨a, b⟩` over every component.
    pub fn inner(&self, o: &ManifoldPoint) -> f64 {
        self.phi.dotc(&o.phi).re
            + self.theta.dotc(&o.theta).re
            + self.blocks.iter().zip(&o.blocks).map(|(a, b)| a.dot(b)).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    fn axpy(&self, a: f64, o: &ManifoldPoint) -> ManifoldPoint {
        ManifoldPoint {
            phi: &self.phi + &o.phi * C64::from(a),
            theta: &self.theta + &o.theta * C64::from(a),
            blocks: self.blocks.iter().zip(&o.blocks).map(|(x, y)| x + y * a).collect(),
        }
    }

    fn sub(&self, o: &ManifoldPoint) -> ManifoldPoint {
        self.axpy(-1.0, o)
    }
}

/// Tangent projection on the circle manifold: `g − Re(g ⊙ x*) ⊙ x`.
pub fn circle_tangent(x: &CVector, g: &CVector) -> CVector {
    CVector::from_fn(x.len(), |i, _| g[i] - x[i] * (g[i] * x[i].conj()).re)
}

/// Remove the mean of every row or column so that the stochastic sums are preserved.
pub fn simplex_tangent(g: &DMatrix<f64>, orient: Stochastic) -> DMatrix<f64> {
    let mut out = g.clone();
    match orient {
        Stochastic::Rows => {
            for mut r in out.row_iter_mut() {
                let mean = r.mean();
                r.add_scalar_mut(-mean);
            }
        }
        Stochastic::Columns => {
            for mut c in out.column_iter_mut() {
                let mean = c.mean();
                c.add_scalar_mut(-mean);
            }
        }
    }
    out
}

/// Euclidean projection of every row or column onto the simplex, floored and renormalized
/// so that all entries stay strictly positive.
pub fn simplex_retract(y: &DMatrix<f64>, orient: Stochastic) -> DMatrix<f64> {
    let fix = |v: Vec<f64>| {
        let mut p = project_simplex(&v);
        for e in &mut p {
            *e = e.max(SIMPLEX_FLOOR);
        }
        let s: f64 = p.iter().sum();
        p.into_iter().map(|e| e / s).collect::<Vec<_>>()
    };
    let mut out = y.clone();
    match orient {
        Stochastic::Rows => {
            for i in 0..y.nrows() {
                let p = fix(y.row(i).iter().copied().collect());
                for (j, v) in p.into_iter().enumerate() {
                    out[(i, j)] = v;
                }
            }
        }
        Stochastic::Columns => {
            for j in 0..y.ncols() {
                let p = fix(y.column(j).iter().copied().collect());
                for (i, v) in p.into_iter().enumerate() {
                    out[(i, j)] = v;
                }
            }
        }
    }
    out
}

/// Plain simplex projection of rows or columns, without flooring.
fn simplex_project(y: &DMatrix<f64>, orient: Stochastic) -> DMatrix<f64> {
    let mut out = y.clone();
    match orient {
        Stochastic::Rows => {
            for i in 0..y.nrows() {
                for (j, v) in project_simplex(&y.row(i).iter().copied().collect::<Vec<_>>()).into_iter().enumerate() {
                    out[(i, j)] = v;
                }
            }
        }
        Stochastic::Columns => {
            for j in 0..y.ncols() {
                for (i, v) in project_simplex(&y.column(j).iter().copied().collect::<Vec<_>>()).into_iter().enumerate() {
                    out[(i, j)] = v;
                }
            }
        }
    }
    out
}

/// Entrywise unit-modulus retraction of `x + step·d`. Entries that collapse to zero keep
/// their previous value; the count of such fallbacks is returned.
pub fn circle_retract(x: &CVector, d: &CVector, step: f64) -> (CVector, usize) {
    let mut flagged = 0;
    let out = CVector::from_fn(x.len(), |i, _| {
        let y = x[i] + d[i] * step;
        let r = y.norm();
        if r > 1e-300 && r.is_finite() {
            y / r
        } else {
            flagged += 1;
            x[i]
        }
    });
    (out, flagged)
}

/// Riemannian gradient (projection of the Euclidean one onto the tangent space).
pub fn riemannian_grad(p: &ManifoldPoint, g: &ManifoldPoint, orient: Stochastic) -> ManifoldPoint {
    ManifoldPoint {
        phi: circle_tangent(&p.phi, &g.phi),
        theta: circle_tangent(&p.theta, &g.theta),
        blocks: g.blocks.iter().map(|b| simplex_tangent(b, orient)).collect(),
    }
}

/// Retraction of `p + step·d` onto the product manifold.
pub fn retract(p: &ManifoldPoint, d: &ManifoldPoint, step: f64, orient: Stochastic) -> (ManifoldPoint, usize) {
    let (phi, f1) = circle_retract(&p.phi, &d.phi, step);
    let (theta, f2) = circle_retract(&p.theta, &d.theta, step);
    let blocks = p
        .blocks
        .iter()
        .zip(&d.blocks)
        .map(|(b, db)| simplex_retract(&(b + db * step), orient))
        .collect();
    (ManifoldPoint { phi, theta, blocks }, f1 + f2)
}

/// Transport of a tangent vector to the tangent space at `p`.
fn transport(p: &ManifoldPoint, v: &ManifoldPoint) -> ManifoldPoint {
    ManifoldPoint {
        phi: circle_tangent(&p.phi, &v.phi),
        theta: circle_tangent(&p.theta, &v.theta),
        blocks: v.blocks.clone(),
    }
}

/// Combined first-order stationarity: Riemannian gradient norm on the circles plus the
/// projected-gradient mapping `‖X − Π(X + ∇X)‖` on the simplices. The latter vanishes at
/// boundary optima, where the tangent projection alone does not.
pub fn stationarity(p: &ManifoldPoint, g: &ManifoldPoint, orient: Stochastic) -> f64 {
    let circ = circle_tangent(&p.phi, &g.phi).norm_squared() + circle_tangent(&p.theta, &g.theta).norm_squared();
    let simp: f64 = p
        .blocks
        .iter()
        .zip(&g.blocks)
        .map(|(x, gx)| (x - simplex_project(&(x + gx), orient)).norm_squared())
        .sum();
    (circ + simp).sqrt()
}

/// A smooth objective on the product manifold.
pub trait SmoothObjective {
    fn value(&self, p: &ManifoldPoint) -> f64;
    /// Value and Euclidean gradient.
    fn value_grad(&self, p: &ManifoldPoint) -> (f64, ManifoldPoint);
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcgTraceRow {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone)]
pub struct RcgOutcome {
    pub point: ManifoldPoint,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Circle entries that fell back to their previous value during retraction.
    pub retraction_fallbacks: usize,
    pub trace: Vec<RcgTraceRow>,
}

/// Polak–Ribière (PR+) conjugate gradient ascent with Armijo backtracking from an adaptive
/// initial step.
///
/// A step is accepted when `f(x⁺) ≥ f(x)` and `f(x⁺) ≥ f(x) + c·⟨∇f, x⁺ − x⟩`, measured on
/// the actual retracted displacement. When a conjugate direction fails the line search the
/// iteration restarts along the gradient; when that fails too the point is returned as is.
pub fn rcg<O: SmoothObjective>(obj: &O, start: ManifoldPoint, orient: Stochastic, cfg: &RcgConfig) -> Result<RcgOutcome> {
    cfg.validate()?;
    let mut x = start;
    let (mut f, mut g) = obj.value_grad(&x);
    if !f.is_finite() {
        return Err(MisError::Numeric("objective is not finite at the starting point".into()));
    }
    let mut rg = riemannian_grad(&x, &g, orient);
    let mut dir = rg.clone();
    let mut trace = Vec::new();
    let mut fallbacks = 0;
    let mut grad_norm = stationarity(&x, &g, orient);
    let mut converged = grad_norm < cfg.grad_tol;
    let mut it = 0;
    // Initial trial step: doubles after a step accepted without backtracking, otherwise
    // carries the last accepted step.
    let mut trial = cfg.initial_step;
    let max_step = cfg.initial_step * 1e4;
    while !converged && it < cfg.max_iter {
        it += 1;
        if rg.inner(&dir) <= 0.0 {
            dir = rg.clone();
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let mut step = if attempt == 0 { trial } else { cfg.initial_step };
            for bt in 0..=cfg.max_backtracks {
                let (cand, flagged) = retract(&x, &dir, step, orient);
                // The gradient costs little beyond the value, and is reused when accepted.
                let (fc, gc) = obj.value_grad(&cand);
                let decrease = g.inner(&cand.sub(&x));
                if fc.is_finite() && fc >= f && fc >= f + cfg.armijo * decrease {
                    accepted = Some((cand, fc, gc, step, bt, flagged));
                    break;
                }
                step *= cfg.shrink;
            }
            if accepted.is_some() || attempt == 1 || dir == rg {
                break;
            }
            dir = rg.clone();
        }
        let Some((cand, fc, g_new, step, bt, flagged)) = accepted else {
            break;
        };
        fallbacks += flagged;
        trial = if bt == 0 { (2.0 * step).min(max_step) } else { step };
        let rg_new = riemannian_grad(&cand, &g_new, orient);
        let rg_old = transport(&cand, &rg);
        let denom = rg.inner(&rg);
        let beta = if denom > 0.0 {
            (rg_new.inner(&rg_new.sub(&rg_old)) / denom).max(0.0)
        } else {
            0.0
        };
        dir = rg_new.axpy(beta, &transport(&cand, &dir));
        x = cand;
        f = fc;
        g = g_new;
        rg = rg_new;
        grad_norm = stationarity(&x, &g, orient);
        trace.push(RcgTraceRow {
            iteration: it,
            value: f,
            grad_norm,
            step,
            backtracks: bt,
        });
        converged = grad_norm < cfg.grad_tol;
    }
    Ok(RcgOutcome {
        point: x,
        value: f,
        grad_norm,
        iterations: it,
        converged,
        retraction_fallbacks: fallbacks,
        trace,
    })
}

/// Central finite-difference Euclidean gradient of `f`, in the same convention as the
/// analytic gradients. Intended for tests and diagnostics.
pub fn finite_difference_grad<F: Fn(&ManifoldPoint) -> f64>(f: F, p: &ManifoldPoint, h: f64) -> ManifoldPoint {
    let mut g = p.zeros_like();
    let mut q = p.clone();
    let re = C64::new(h, 0.0);
    let im = C64::new(0.0, h);
    for i in 0..p.phi.len() {
        for (delta, part) in [(re, 0), (im, 1)] {
            q.phi[i] = p.phi[i] + delta;
            let up = f(&q);
            q.phi[i] = p.phi[i] - delta;
            let dn = f(&q);
            q.phi[i] = p.phi[i];
            let d = (up - dn) / (2.0 * h);
            if part == 0 {
                g.phi[i].re = d;
            } else {
                g.phi[i].im = d;
            }
        }
    }
    for i in 0..p.theta.len() {
        for (delta, part) in [(re, 0), (im, 1)] {
            q.theta[i] = p.theta[i] + delta;
            let up = f(&q);
            q.theta[i] = p.theta[i] - delta;
            let dn = f(&q);
            q.theta[i] = p.theta[i];
            let d = (up - dn) / (2.0 * h);
            if part == 0 {
                g.theta[i].re = d;
            } else {
                g.theta[i].im = d;
            }
        }
    }
    for b in 0..p.blocks.len() {
        for idx in 0..p.blocks[b].len() {
            let v = p.blocks[b][idx];
            q.blocks[b][idx] = v + h;
            let up = f(&q);
            q.blocks[b][idx] = v - h;
            let dn = f(&q);
            q.blocks[b][idx] = v;
            g.blocks[b][idx] = (up - dn) / (2.0 * h);
        }
    }
    g
}

/// Relative error `‖a − b‖ / ‖b‖`.
pub fn relative_error(a: &ManifoldPoint, b: &ManifoldPoint) -> f64 {
    a.sub(b).norm() / b.norm().max(1e-300)
}
