//! Sectional-curvature sampling by the circumference defect.
//!
//! For a geodesic circle of radius rho in the plane spanned by an orthonormal
//! pair (u, v), C(rho) = 2 pi rho (1 - K rho^2 / 6 + O(rho^4)); two radii and
//! one Richardson step cancel the rho^4 term.

use super::ops::{distance, exp_map};
use super::{GeomError, Point, Tangent};

fn circumference(p: &Point, u: &Tangent, v: &Tangent, rho: f64, segments: usize) -> f64 {
    let mut pts = Vec::with_capacity(segments + 1);
    for i in 0..=segments {
        let theta = 2.0 * std::f64::consts::PI * (i as f64) / (segments as f64);
        let dir = u.scale(rho * theta.cos()).add(&v.scale(rho * theta.sin()));
        pts.push(exp_map(p, &dir).expect("circle point"));
    }
    let mut c = 0.0;
    for w in pts.windows(2) {
        c += distance(&w[0], &w[1]).expect("chord");
    }
    c
}

/// Sectional curvature of the 2-plane span{u, v} at p. `u`, `v` must be
/// orthonormal tangents at p.
pub fn sectional_curvature(p: &Point, u: &Tangent, v: &Tangent) -> Result<f64, GeomError> {
    let segments = 1024;
    let estimate = |rho: f64| {
        let c = circumference(p, u, v, rho, segments);
        let two_pi = 2.0 * std::f64::consts::PI;
        // chord-sum underestimates the circle length; correct to O(h^4)
        let h = two_pi / segments as f64;
        let c = c / (1.0 - h * h / 24.0);
        6.0 * (two_pi * rho - c) / (std::f64::consts::PI * rho * rho * rho) / 2.0
    };
    let rho = 0.05_f64.min(0.2 * p.model.convexity_radius());
    let k1 = estimate(rho);
    let k2 = estimate(rho / 2.0);
    Ok((4.0 * k2 - k1) / 3.0)
}
