//! The chamber deformation of the product-group boundary action: points of a
//! Weyl chamber move by the dilation D_{c(g, C)^alpha} in a fixed chamber
//! chart, while every chamber face stays pointwise fixed.
//!
//! Chart: tau(theta) = ln tan(theta), sending the chamber [0, pi/2] to
//! [-inf, +inf] with the center pi/4 at 0; D_delta is multiplication by
//! delta. The deformed action is
//!   kappa_g^alpha (xi, eta, theta) =
//!     (g1 xi, g2 eta, tau^-1( c(g, (xi, eta))^alpha tau(theta) )).

use crate::lie::circle::boundary_angle_map;
use crate::lie::{cocycle, GroupElement, GroupKind, LieError};
use serde::Serialize;

/// A point of the chamber bundle over the product boundary: the face pair
/// and the interior Tits angle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChamberCoordinate {
    pub xi: f64,
    pub eta: f64,
    /// in [0, pi/2]; 0 and pi/2 are the chamber faces
    pub theta: f64,
}

impl ChamberCoordinate {
    pub fn new(xi: f64, eta: f64, theta: f64) -> ChamberCoordinate {
        assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&theta));
        ChamberCoordinate {
            xi: xi.rem_euclid(2.0 * std::f64::consts::PI),
            eta: eta.rem_euclid(2.0 * std::f64::consts::PI),
            theta,
        }
    }

    pub fn center(xi: f64, eta: f64) -> ChamberCoordinate {
        ChamberCoordinate::new(xi, eta, std::f64::consts::FRAC_PI_4)
    }

    pub fn dist(&self, other: &ChamberCoordinate) -> f64 {
        let d1 = crate::lie::flags::circle_distance(self.xi, other.xi);
        let d2 = crate::lie::flags::circle_distance(self.eta, other.eta);
        let d3 = (self.theta - other.theta).abs();
        d1.max(d2).max(d3)
    }
}

pub fn tau(theta: f64) -> f64 {
    (theta.tan()).ln()
}

pub fn tau_inv(t: f64) -> f64 {
    t.exp().atan()
}

/// kappa_g^alpha applied to a chamber coordinate.
pub fn kappa_apply(
    g: &GroupElement,
    alpha: f64,
    p: &ChamberCoordinate,
) -> Result<ChamberCoordinate, LieError> {
    if g.kind != GroupKind::Psl2Pair {
        return Err(LieError::Unsupported);
    }
    assert!(alpha >= 0.0, "alpha must be nonnegative");
    let xi2 = boundary_angle_map(&g.mats[0], p.xi);
    let eta2 = boundary_angle_map(&g.mats[1], p.eta);
    // chamber faces are fixed exactly, for every g and alpha
    if p.theta == 0.0 || p.theta == std::f64::consts::FRAC_PI_2 {
        return Ok(ChamberCoordinate { xi: xi2, eta: eta2, theta: p.theta });
    }
    let c = cocycle(g, &[p.xi, p.eta])?;
    let factor = c.powf(alpha);
    let theta2 = if factor == 1.0 { p.theta } else { tau_inv(factor * tau(p.theta)) };
    Ok(ChamberCoordinate { xi: xi2, eta: eta2, theta: theta2 })
}

/// A finitely generated chamber action: the alpha-deformation of a list of
/// labeled group elements.
#[derive(Debug, Clone)]
pub struct ChamberAction {
    pub alpha: f64,
    pub generators: Vec<(String, GroupElement)>,
}

impl ChamberAction {
    pub fn apply(&self, label: &str, p: &ChamberCoordinate) -> Result<ChamberCoordinate, LieError> {
        let g = self
            .generators
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, g)| g)
            .ok_or(LieError::Unsupported)?;
        kappa_apply(g, self.alpha, p)
    }
}

/// Builds the alpha-deformed action for a standard generator list (two
/// hyperbolic pairs and a pair of rotations).
pub fn build_rho_alpha(alpha: f64) -> ChamberAction {
    use nalgebra::DMatrix;
    assert!(alpha >= 0.0);
    let t = 0.7f64;
    let hyp = DMatrix::from_row_slice(2, 2, &[t.exp(), 0.0, 0.0, (-t).exp()]);
    let unip = DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.0, 1.0]);
    let rot = |phi: f64| {
        DMatrix::from_row_slice(2, 2, &[
            (phi / 2.0).cos(),
            -(phi / 2.0).sin(),
            (phi / 2.0).sin(),
            (phi / 2.0).cos(),
        ])
    };
    let id = DMatrix::<f64>::identity(2, 2);
    let generators = vec![
        (
            "a".to_string(),
            GroupElement::psl2_pair(hyp.clone(), rot(0.9)).unwrap(),
        ),
        (
            "b".to_string(),
            GroupElement::psl2_pair(unip.clone(), hyp.clone()).unwrap(),
        ),
        ("c".to_string(), GroupElement::psl2_pair(rot(1.7), unip).unwrap()),
        ("d".to_string(), GroupElement::psl2_pair(hyp, id).unwrap()),
    ];
    ChamberAction { alpha, generators }
}

#[derive(Debug, Clone, Serialize)]
pub struct CollapseTrace {
    pub cocycle_value: f64,
    pub thetas: Vec<f64>,
    pub limit: f64,
    pub monotone_after: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CollapseError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("gamma does not stabilize the chamber (moves faces by {0:.3e})")]
    NotStabilizing(f64),
    #[error("cocycle value 1 at the chamber; no contraction")]
    TrivialCocycle,
}

/// Iterates kappa_gamma^alpha on the chamber interior and traces theta_n.
/// For c(gamma, C) < 1 the trace converges to the chamber center; for c > 1
/// to a face. At alpha = 0 the trace is constant.
pub fn chamber_collapse_witness(
    alpha: f64,
    gamma: &GroupElement,
    chamber: (f64, f64),
    theta0: f64,
    iterations: usize,
) -> Result<CollapseTrace, CollapseError> {
    let p0 = ChamberCoordinate::new(chamber.0, chamber.1, theta0);
    let once = kappa_apply(gamma, alpha, &p0)?;
    let face_move = crate::lie::flags::circle_distance(once.xi, p0.xi)
        .max(crate::lie::flags::circle_distance(once.eta, p0.eta));
    if face_move > 1e-9 {
        return Err(CollapseError::NotStabilizing(face_move));
    }
    let c = cocycle(gamma, &[p0.xi, p0.eta])?;
    if alpha > 0.0 && (c - 1.0).abs() < 1e-12 {
        return Err(CollapseError::TrivialCocycle);
    }
    let mut thetas = Vec::with_capacity(iterations + 1);
    let mut p = p0;
    thetas.push(p.theta);
    for _ in 0..iterations {
        p = kappa_apply(gamma, alpha, &p)?;
        thetas.push(p.theta);
    }
    let limit = if alpha == 0.0 {
        theta0
    } else if c.powf(alpha) < 1.0 {
        std::f64::consts::FRAC_PI_4
    } else if tau(theta0) >= 0.0 {
        std::f64::consts::FRAC_PI_2
    } else {
        0.0
    };
    // first index after which |theta_n - limit| is non-increasing
    let mut monotone_after = 0;
    for k in 1..thetas.len() {
        if (thetas[k] - limit).abs() > (thetas[k - 1] - limit).abs() + 1e-15 {
            monotone_after = k;
        }
    }
    Ok(CollapseTrace { cocycle_value: c, thetas, limit, monotone_after })
}
