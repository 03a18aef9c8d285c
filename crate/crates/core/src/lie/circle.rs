//! The PSL_2(R) action on the circle at infinity of the hyperboloid, with
//! exact derivatives, and the boundary Radon-Nikodym cocycle.
//!
//! Boundary points carry the angle coordinate: theta corresponds to the null
//! ray through (cos theta, sin theta, 1).

use super::{GroupElement, GroupKind, LieError};
use nalgebra::DMatrix;

/// The 3x3 matrix of g acting on the hyperboloid chart, from the congruence
/// action P -> g P g^T on symmetric 2x2 matrices under the identification
/// (a, b; b, c) <-> (x, y, z) = ((a-c)/2, b, (a+c)/2). Both signs of g give
/// the same image, so this factors through PSL_2(R).
pub fn psl2_to_so21(g: &DMatrix<f64>) -> DMatrix<f64> {
    let act = |sx: f64, sy: f64, sz: f64| -> (f64, f64, f64) {
        // symmetric matrix with (x, y, z) = (sx, sy, sz)
        let a = sz + sx;
        let b = sy;
        let c = sz - sx;
        let s = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let t = g * s * g.transpose();
        (0.5 * (t[(0, 0)] - t[(1, 1)]), t[(0, 1)], 0.5 * (t[(0, 0)] + t[(1, 1)]))
    };
    let e1 = act(1.0, 0.0, 0.0);
    let e2 = act(0.0, 1.0, 0.0);
    let e3 = act(0.0, 0.0, 1.0);
    DMatrix::from_row_slice(
        3,
        3,
        &[e1.0, e2.0, e3.0, e1.1, e2.1, e3.1, e1.2, e2.2, e3.2],
    )
}

/// Boundary angle map of a PSL_2(R) element (given as a 2x2 matrix of
/// determinant 1) through the half-angle double cover: the angle theta
/// corresponds to the projective line through u = (cos theta/2, sin theta/2),
/// and f(theta) = 2 arg(g u). This form stays accurate even at strongly
/// contracted points, where the null-vector route loses the square of the
/// contraction rate.
pub fn boundary_angle_map(g: &DMatrix<f64>, theta: f64) -> f64 {
    let h = 0.5 * theta;
    let u = [h.cos(), h.sin()];
    let w = [
        g[(0, 0)] * u[0] + g[(0, 1)] * u[1],
        g[(1, 0)] * u[0] + g[(1, 1)] * u[1],
    ];
    (2.0 * w[1].atan2(w[0])).rem_euclid(2.0 * std::f64::consts::PI)
}

/// Exact derivative of the boundary angle map: f'(theta) = 1 / |g u|^2 for
/// det g = 1.
pub fn boundary_derivative(g: &DMatrix<f64>, theta: f64) -> f64 {
    let h = 0.5 * theta;
    let u = [h.cos(), h.sin()];
    let w = [
        g[(0, 0)] * u[0] + g[(0, 1)] * u[1],
        g[(1, 0)] * u[0] + g[(1, 1)] * u[1],
    ];
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    det / (w[0] * w[0] + w[1] * w[1])
}

/// The Radon-Nikodym cocycle c(g, x) with respect to the angle-coordinate
/// round measure: the Jacobian of the boundary action at x. For the product
/// group it is the product of the factor cocycles at the factor angles, and
/// it satisfies c(gh, x) = c(g, h x) c(h, x).
pub fn cocycle(g: &GroupElement, angles: &[f64]) -> Result<f64, LieError> {
    match &g.kind {
        GroupKind::Psl2Pair => {
            if angles.len() != 2 {
                return Err(LieError::Unsupported);
            }
            Ok(boundary_derivative(&g.mats[0], angles[0])
                * boundary_derivative(&g.mats[1], angles[1]))
        }
        GroupKind::SlN(2) => {
            if angles.len() != 1 {
                return Err(LieError::Unsupported);
            }
            Ok(boundary_derivative(&g.mats[0], angles[0]))
        }
        _ => Err(LieError::Unsupported),
    }
}
