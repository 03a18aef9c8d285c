//! Weighted-Dirac barycenter solver and its derivative engine.
//!
//! The energy is B(x) = 1/2 sum_i w_i d(x, z_i)^2. Under the support-diameter
//! guard min{pi/(4b), InjRad/2, 1/(3 max{a,b})} the Hessian
//!
//!   Q = sum_i w_i ( grad d (x) grad d + d * Hess d )
//!
//! is a small perturbation of the identity (|Q - I| <= 2 max{a^2,b^2} diam^2,
//! min-eig >= 3/4, |Q^-1| <= 4/3), so a Riemannian Newton iteration with an
//! Armijo backtracking line search converges fast and certifiably.

mod derivatives;

pub use derivatives::{
    d_bar_d_metric, d_bar_d_point, d_bar_d_weight, d_bar_total, transport_comparison_map,
    DbarTotal, MetricFamily, ScaledMetric, ScaledOperator, TangentMap,
};

use crate::manifold::{
    distance, exp_map, grad_distance, hessian_distance, log_map, Isometry, GeomError, Model,
    Point, SymOperator, Tangent,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaryError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("atoms live on different models")]
    ModelMismatch,
    #[error("weights sum to {sum}, expected 1")]
    BadWeights { sum: f64 },
    #[error("support diameter {diam:.6} exceeds the guard radius {guard:.6}")]
    GuardViolated { diam: f64, guard: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { residual: f64, iterations: usize },
}

/// A finite weighted sum of Dirac measures on one model.
#[derive(Debug, Clone)]
pub struct WeightedDirac {
    pub atoms: Vec<(f64, Point)>,
}

impl WeightedDirac {
    /// Weights must lie in [0,1] and sum to 1 within 1e-12.
    pub fn new(atoms: Vec<(f64, Point)>) -> Result<WeightedDirac, BaryError> {
        if atoms.is_empty() {
            return Err(BaryError::EmptyMeasure);
        }
        let model = atoms[0].1.model.clone();
        if atoms.iter().any(|(_, z)| z.model != model) {
            return Err(BaryError::ModelMismatch);
        }
        let sum: f64 = atoms.iter().map(|(w, _)| *w).sum();
        if (sum - 1.0).abs() > 1e-12 || atoms.iter().any(|(w, _)| *w < 0.0 || *w > 1.0) {
            return Err(BaryError::BadWeights { sum });
        }
        Ok(WeightedDirac { atoms })
    }

    pub fn model(&self) -> &Model {
        &self.atoms[0].1.model
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.atoms.len() {
            for j in (i + 1)..self.atoms.len() {
                d = d.max(distance(&self.atoms[i].1, &self.atoms[j].1).unwrap());
            }
        }
        d
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BarycenterResult {
    #[serde(skip)]
    pub point: Point,
    pub gradient_residual: f64,
    pub hessian_min_eigenvalue: f64,
    pub iterations: usize,
}

/// B(x) = 1/2 sum w_i d(x, z_i)^2.
pub fn energy(mu: &WeightedDirac, x: &Point) -> Result<f64, BaryError> {
    if x.model != *mu.model() {
        return Err(BaryError::ModelMismatch);
    }
    let mut e = 0.0;
    for (w, z) in &mu.atoms {
        let d = distance(x, z)?;
        e += 0.5 * w * d * d;
    }
    Ok(e)
}

/// grad B(x) = sum w_i d grad d = - sum w_i log_x(z_i); extends smoothly
/// through x = z_i.
pub fn gradient(mu: &WeightedDirac, x: &Point) -> Result<Tangent, BaryError> {
    if x.model != *mu.model() {
        return Err(BaryError::ModelMismatch);
    }
    let mut g = Tangent::zero(x.clone());
    for (w, z) in &mu.atoms {
        let l = log_map(x, z)?;
        g = g.add(&l.scale(-w));
    }
    // kill the off-tangent roundoff drift accumulated by the sum
    Ok(crate::manifold::project_tangent(x, &g.vector))
}

/// The Hessian Q of the energy at x, as a symmetric operator on T_x.
///
/// Atoms at distance < 1e-9 from x contribute the identity (the continuous
/// limit of grad (x) grad + d Hess).
pub fn hessian_q(mu: &WeightedDirac, x: &Point) -> Result<SymOperator, BaryError> {
    let b = x.model.curv_upper_b();
    // flat fast path: every atom contributes exactly the identity
    if x.model.curv_lower_a() == 0.0 && b == 0.0 {
        let mut op = SymOperator::identity(x);
        let total: f64 = mu.atoms.iter().map(|(w, _)| *w).sum();
        op.matrix *= total;
        return Ok(op);
    }
    let radius = if b > 0.0 { std::f64::consts::FRAC_PI_2 / b } else { f64::INFINITY };
    let mut op = SymOperator::identity(x);
    let dim = op.basis.len();
    let mut m = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for (w, z) in &mu.atoms {
        let d = distance(x, z)?;
        if d >= radius {
            return Err(GeomError::ComparisonRadiusExceeded { dist: d, radius }.into());
        }
        if d < 1e-9 {
            // the atom sits at the evaluation point up to chart resolution;
            // its exact contribution is w I + O(curv d^2)
            for k in 0..dim {
                m[(k, k)] += w;
            }
            continue;
        }
        let g = grad_distance(x, z)?;
        let gf = op.to_frame(&g);
        let h = hessian_distance(x, z)?;
        m += (&gf * gf.transpose() + &h.matrix * d) * *w;
    }
    op.matrix = (&m + m.transpose()) * 0.5;
    Ok(op)
}

/// Solves for the barycenter of `mu` under the support-diameter guard.
pub fn solve(mu: &WeightedDirac) -> Result<BarycenterResult, BaryError> {
    let guard = mu.model().barycenter_guard_radius();
    let diam = mu.diameter();
    if diam >= guard {
        return Err(BaryError::GuardViolated { diam, guard });
    }
    solve_relaxed(mu, 1e-10, 200)
}

/// Newton iteration without the weight-normalization invariant; used by the
/// finite-difference oracles, which perturb a single weight.
pub fn solve_relaxed(
    mu: &WeightedDirac,
    tol: f64,
    max_iter: usize,
) -> Result<BarycenterResult, BaryError> {
    // initialize at the atom of largest weight
    let mut x = mu
        .atoms
        .iter()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .unwrap()
        .1
        .clone();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let g = gradient(mu, &x)?;
        residual = g.norm();
        if residual < tol {
            let q = hessian_q(mu, &x)?;
            return Ok(BarycenterResult {
                point: x,
                gradient_residual: residual,
                hessian_min_eigenvalue: q.min_eigenvalue(),
                iterations,
            });
        }
        iterations += 1;
        let q = hessian_q(mu, &x)?;
        let newton_ok = q.min_eigenvalue() >= 0.25;
        let dir = if newton_ok { q.solve(&g).scale(-1.0) } else { g.scale(-1.0) };
        if newton_ok && residual < 1e-6 {
            // endgame: energy differences are below f64 resolution here, so
            // the line search cannot certify descent; plain Newton contracts
            x = exp_map(&x, &dir)?;
            continue;
        }
        // Armijo backtracking on the energy
        let e0 = energy(mu, &x)?;
        let slope = g.inner(&dir);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = exp_map(&x, &dir.scale(t))?;
            let e1 = energy(mu, &cand)?;
            if e1 <= e0 + 1e-4 * t * slope {
                x = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(BaryError::NonConvergence { residual, iterations })
}

/// d(f(bar(mu)), bar(f_* mu)) for an isometry f of the model.
pub fn affine_equivariance_check(mu: &WeightedDirac, f: &Isometry) -> Result<f64, BaryError> {
    let bar = solve(mu)?;
    let pushed = WeightedDirac::new(
        mu.atoms.iter().map(|(w, z)| (*w, f.apply(z))).collect(),
    )?;
    let bar_pushed = solve(&pushed)?;
    Ok(distance(&f.apply(&bar.point), &bar_pushed.point)?)
}

#[cfg(test)]
mod tests;
