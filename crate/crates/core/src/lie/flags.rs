//! Canonical representatives of points of G/Q: partial flags for SL(n, R)
//! stored as adapted orthonormal bases, and boundary angles for the product
//! group.

use super::circle::boundary_angle_map;
use super::{GroupElement, GroupKind, LieError, ParabolicData};
use nalgebra::DMatrix;

/// A point of G/Q.
///
/// For SL(n): the partial flag spanned by the leading column blocks of an
/// orthogonal matrix, with the block sizes of the parabolic. Equality is
/// subspace equality stage by stage, not equality of representatives.
///
/// For the product group: one boundary angle per factor carrying a proper
/// parabolic (None for full-group factors, whose flag variety is a point).
#[derive(Debug, Clone)]
pub enum BoundaryPoint {
    Flag { parabolic: ParabolicData, basis: DMatrix<f64> },
    Angles { parabolic: ParabolicData, angles: Vec<Option<f64>> },
}

impl BoundaryPoint {
    /// The base flag: spans of the leading coordinate blocks (the identity
    /// coset e Q).
    pub fn base(parabolic: &ParabolicData) -> BoundaryPoint {
        match &parabolic.kind {
            GroupKind::SlN(n) => BoundaryPoint::Flag {
                parabolic: parabolic.clone(),
                basis: DMatrix::identity(*n, *n),
            },
            GroupKind::Psl2Pair => {
                let angles = (0..2)
                    .map(|j| if parabolic.theta.contains(&j) { Some(0.0) } else { None })
                    .collect();
                BoundaryPoint::Angles { parabolic: parabolic.clone(), angles }
            }
        }
    }

    pub fn parabolic(&self) -> &ParabolicData {
        match self {
            BoundaryPoint::Flag { parabolic, .. } => parabolic,
            BoundaryPoint::Angles { parabolic, .. } => parabolic,
        }
    }

    /// Orthonormality defect of the representative.
    pub fn defect(&self) -> f64 {
        match self {
            BoundaryPoint::Flag { basis, .. } => {
                let n = basis.nrows();
                (basis.transpose() * basis - DMatrix::<f64>::identity(n, n)).norm()
            }
            BoundaryPoint::Angles { .. } => 0.0,
        }
    }
}

/// The left action of g on G/Q in canonical form: for flags, QR of g * basis
/// with positive diagonal (so the leading blocks keep spanning the image
/// flag); for angles, the boundary Moebius action per factor.
pub fn flag_action(g: &GroupElement, xi: &BoundaryPoint) -> Result<BoundaryPoint, LieError> {
    match xi {
        BoundaryPoint::Flag { parabolic, basis } => {
            if g.kind != parabolic.kind {
                return Err(LieError::KindMismatch);
            }
            let m = &g.mats[0] * basis;
            let n = m.nrows();
            let qr = m.qr();
            let mut q = qr.q();
            let r = qr.r();
            for i in 0..n {
                if r[(i, i)] < 0.0 {
                    q.column_mut(i).neg_mut();
                }
            }
            Ok(BoundaryPoint::Flag { parabolic: parabolic.clone(), basis: q })
        }
        BoundaryPoint::Angles { parabolic, angles } => {
            if g.kind != parabolic.kind {
                return Err(LieError::KindMismatch);
            }
            let out = angles
                .iter()
                .enumerate()
                .map(|(j, a)| a.map(|theta| boundary_angle_map(&g.mats[j], theta)))
                .collect();
            Ok(BoundaryPoint::Angles { parabolic: parabolic.clone(), angles: out })
        }
    }
}

/// Distance between boundary points of the same type: the maximum principal
/// angle over the flag stages, or the maximum circle distance over factors.
pub fn flag_distance(a: &BoundaryPoint, b: &BoundaryPoint) -> Result<f64, LieError> {
    match (a, b) {
        (
            BoundaryPoint::Flag { parabolic: pa, basis: ba },
            BoundaryPoint::Flag { parabolic: pb, basis: bb },
        ) => {
            if pa != pb {
                return Err(LieError::KindMismatch);
            }
            let mut d: f64 = 0.0;
            let mut dim = 0;
            let blocks = &pa.blocks;
            for b_size in &blocks[..blocks.len() - 1] {
                dim += b_size;
                // largest principal angle between the leading spans via
                // |P_a - P_b|_2 = sin(theta_max), stable near zero
                let va = ba.columns(0, dim).into_owned();
                let vb = bb.columns(0, dim).into_owned();
                let proj_diff = &va * va.transpose() - &vb * vb.transpose();
                let s = proj_diff.svd(false, false).singular_values.amax();
                d = d.max(s.clamp(-1.0, 1.0).asin());
            }
            Ok(d)
        }
        (
            BoundaryPoint::Angles { parabolic: pa, angles: aa },
            BoundaryPoint::Angles { parabolic: pb, angles: ab },
        ) => {
            if pa != pb {
                return Err(LieError::KindMismatch);
            }
            let mut d: f64 = 0.0;
            for (x, y) in aa.iter().zip(ab) {
                match (x, y) {
                    (Some(x), Some(y)) => d = d.max(circle_distance(*x, *y)),
                    (None, None) => {}
                    _ => return Err(LieError::KindMismatch),
                }
            }
            Ok(d)
        }
        _ => Err(LieError::KindMismatch),
    }
}

pub fn circle_distance(a: f64, b: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let d = (a - b).rem_euclid(two_pi);
    d.min(two_pi - d)
}
