//! The Weyl chamber Q-face bundle G/M_Q for SL(3, R) and PSL_2(R) x PSL_2(R):
//! canonical cosets, the trivialization Phi, the chamber flow, center-stable
//! and center-unstable leaf labels, parallel sets and the retraction.
//!
//! The bundle projects to the symmetric space X = G/K, realized as SPD(n)
//! with the trace metric for SL(n) and as H^2 x H^2 (curvature -1 factors)
//! for the product group; fibers are copies of K/M_Q = G/Q.

mod parallel;

pub use parallel::{busemann, parallel_set_sample, retraction, ParallelSetSample};

use crate::lie::{
    flag_action, flag_distance, generalized_iwasawa, BoundaryPoint, GroupElement, GroupKind,
    LieError, ParabolicData,
};
use crate::manifold::{mat_from, mat_to, Model, Point};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChamberError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("element is not in A'_Q (defect {0:.3e})")]
    NotInFlow(f64),
    #[error("parabolic data mismatch")]
    ParabolicMismatch,
}

/// A point of G/M_Q: a group representative considered modulo M_Q.
#[derive(Debug, Clone)]
pub struct ChamberBundlePoint {
    pub representative: GroupElement,
    pub parabolic: ParabolicData,
}

impl ChamberBundlePoint {
    pub fn new(representative: GroupElement, parabolic: ParabolicData) -> ChamberBundlePoint {
        assert_eq!(representative.kind, parabolic.kind);
        ChamberBundlePoint { representative, parabolic }
    }

    pub fn base(parabolic: &ParabolicData) -> ChamberBundlePoint {
        ChamberBundlePoint::new(GroupElement::identity(&parabolic.kind), parabolic.clone())
    }

    /// Left translation by g.
    pub fn translate(&self, g: &GroupElement) -> ChamberBundlePoint {
        ChamberBundlePoint::new(g.mul(&self.representative), self.parabolic.clone())
    }

    /// Coset distance: Frobenius distance of g1^-1 g2 to the nearest element
    /// of M_Q (per-block orthogonal Procrustes with the determinant fixed).
    pub fn coset_defect(&self, other: &ChamberBundlePoint) -> f64 {
        let h = self.representative.inverse().mul(&other.representative);
        let mut defect: f64 = 0.0;
        for (mat, blocks) in h.mats.iter().zip(self.parabolic.factor_blocks()) {
            let m = nearest_m_q(mat, &blocks);
            defect = defect.max((mat - m).norm());
        }
        defect
    }
}

/// Nearest element of the block-orthogonal group (det +1 overall) to `mat`.
fn nearest_m_q(mat: &DMatrix<f64>, blocks: &[usize]) -> DMatrix<f64> {
    let n = mat.nrows();
    let mut m = DMatrix::<f64>::zeros(n, n);
    // per-block polar factors, tracking the cheapest det flip
    let mut s = 0;
    let mut flip_cost = f64::INFINITY;
    let mut flip_block = 0usize;
    let mut starts = Vec::new();
    for &b in blocks {
        starts.push(s);
        let blk = mat.view((s, s), (b, b)).into_owned();
        let svd = blk.svd(true, true);
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let polar = &u * &vt;
        m.view_mut((s, s), (b, b)).copy_from(&polar);
        let smin = svd.singular_values.min();
        if 2.0 * smin < flip_cost {
            flip_cost = 2.0 * smin;
            flip_block = starts.len() - 1;
        }
        s += b;
    }
    if m.determinant() < 0.0 {
        // flip the reflection in the cheapest block
        let s = starts[flip_block];
        let b = blocks[flip_block];
        let blk = mat.view((s, s), (b, b)).into_owned();
        let svd = blk.svd(true, true);
        let mut u = svd.u.unwrap();
        u.column_mut(b - 1).neg_mut();
        let polar = u * svd.v_t.unwrap();
        m.view_mut((s, s), (b, b)).copy_from(&polar);
    }
    m
}

/// The symmetric-space model attached to a group kind.
pub fn symmetric_space_model(kind: &GroupKind) -> Model {
    match kind {
        GroupKind::SlN(n) => Model::Spd { n: *n },
        GroupKind::Psl2Pair => Model::h2xh2(),
    }
}

/// SPD(2) det-1 matrix -> hyperboloid chart (x, y, z) = ((a-c)/2, b, (a+c)/2).
pub fn spd2_to_hyperboloid(p: &DMatrix<f64>) -> [f64; 3] {
    [0.5 * (p[(0, 0)] - p[(1, 1)]), p[(0, 1)], 0.5 * (p[(0, 0)] + p[(1, 1)])]
}

pub fn hyperboloid_to_spd2(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[x[2] + x[0], x[1], x[1], x[2] - x[0]])
}

/// p_Q(g M_Q) = g K as a point of the symmetric-space model.
pub fn project(v: &ChamberBundlePoint) -> Point {
    let model = symmetric_space_model(&v.representative.kind);
    match &v.representative.kind {
        GroupKind::SlN(_) => {
            let g = &v.representative.mats[0];
            let p = (g * g.transpose()).symmetric_part();
            Point::raw(model, mat_to(&p))
        }
        GroupKind::Psl2Pair => {
            let mut coords = Vec::with_capacity(6);
            for g in &v.representative.mats {
                let p = (g * g.transpose()).symmetric_part();
                coords.extend_from_slice(&spd2_to_hyperboloid(&p));
            }
            Point::raw(model, nalgebra::DVector::from_vec(coords))
        }
    }
}

/// The center-stable leaf label: the boundary component of Phi, equal to the
/// flag g . xi_0.
pub fn cs_label(v: &ChamberBundlePoint) -> Result<BoundaryPoint, ChamberError> {
    Ok(flag_action(&v.representative, &BoundaryPoint::base(&v.parabolic))?)
}

/// The center-unstable leaf label: g . xi_0^* with xi_0^* the opposite base
/// face (spans of the trailing coordinate blocks; antipodal angles for the
/// product group).
pub fn cu_label(v: &ChamberBundlePoint) -> Result<BoundaryPoint, ChamberError> {
    Ok(flag_action(&v.representative, &opposite_base(&v.parabolic))?)
}

/// The opposite base face at the origin.
pub fn opposite_base(parabolic: &ParabolicData) -> BoundaryPoint {
    match &parabolic.kind {
        GroupKind::SlN(n) => {
            // reversal permutation: trailing blocks become leading
            let mut basis = DMatrix::<f64>::zeros(*n, *n);
            for i in 0..*n {
                basis[(i, n - 1 - i)] = 1.0;
            }
            BoundaryPoint::Flag { parabolic: parabolic.opposite(), basis }
        }
        GroupKind::Psl2Pair => {
            let angles = (0..2)
                .map(|j| {
                    if parabolic.theta.contains(&j) {
                        Some(std::f64::consts::PI)
                    } else {
                        None
                    }
                })
                .collect();
            BoundaryPoint::Angles { parabolic: parabolic.clone(), angles }
        }
    }
}

/// The trivialization Phi(g M_Q) = (g K, flag(g)).
pub fn trivialize(v: &ChamberBundlePoint) -> Result<(Point, BoundaryPoint), ChamberError> {
    Ok((project(v), cs_label(v)?))
}

/// Inverse of the trivialization: from the base point and the flag label,
/// reconstruct the coset k_xi U D^{1/2} M_Q where k_xi^T P k_xi = U D U^T.
pub fn trivialize_inverse(
    x: &Point,
    xi: &BoundaryPoint,
) -> Result<ChamberBundlePoint, ChamberError> {
    let parabolic = xi.parabolic().clone();
    match (&parabolic.kind, xi) {
        (GroupKind::SlN(n), BoundaryPoint::Flag { basis, .. }) => {
            let p = mat_from(&x.coords, *n);
            let p_conj = (basis.transpose() * &p * basis).symmetric_part();
            let (u, d) = block_udut(&p_conj, &parabolic.blocks);
            let mut a = DMatrix::<f64>::zeros(*n, *n);
            let mut s = 0;
            for &b in &parabolic.blocks {
                let blk = d.view((s, s), (b, b)).into_owned().symmetric_part();
                let (sq, _) = crate::manifold::spd_sqrt_and_inv_sqrt(&blk);
                a.view_mut((s, s), (b, b)).copy_from(&sq);
                s += b;
            }
            let g = basis * u * a;
            let rep = GroupElement { kind: parabolic.kind.clone(), mats: vec![g] };
            Ok(ChamberBundlePoint::new(rep, parabolic))
        }
        (GroupKind::Psl2Pair, BoundaryPoint::Angles { angles, .. }) => {
            let mut mats = Vec::with_capacity(2);
            for (j, angle) in angles.iter().enumerate() {
                let p = hyperboloid_to_spd2(&[
                    x.coords[3 * j],
                    x.coords[3 * j + 1],
                    x.coords[3 * j + 2],
                ]);
                match angle {
                    None => {
                        // full-group factor: fiber is a point; take the SPD
                        // square root as the representative
                        let (sq, _) = crate::manifold::spd_sqrt_and_inv_sqrt(&p.symmetric_part());
                        mats.push(sq);
                    }
                    Some(theta) => {
                        // rotation sending angle 0 to theta (half angle in
                        // PSL_2), then the same UDU^T construction in 2x2
                        let k = DMatrix::from_row_slice(
                            2,
                            2,
                            &[
                                (theta / 2.0).cos(),
                                -(theta / 2.0).sin(),
                                (theta / 2.0).sin(),
                                (theta / 2.0).cos(),
                            ],
                        );
                        let p_conj = (k.transpose() * &p * &k).symmetric_part();
                        let (u, d) = block_udut(&p_conj, &[1, 1]);
                        let mut a = DMatrix::<f64>::zeros(2, 2);
                        a[(0, 0)] = d[(0, 0)].sqrt();
                        a[(1, 1)] = d[(1, 1)].sqrt();
                        mats.push(&k * u * a);
                    }
                }
            }
            let rep = GroupElement { kind: parabolic.kind.clone(), mats };
            Ok(ChamberBundlePoint::new(rep, parabolic))
        }
        _ => Err(ChamberError::ParabolicMismatch),
    }
}

/// M = U D U^T with U block-unit-upper and D block-diagonal SPD, eliminating
/// from the bottom-right block upward.
fn block_udut(m: &DMatrix<f64>, blocks: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let starts: Vec<usize> = blocks
        .iter()
        .scan(0usize, |acc, b| {
            let s = *acc;
            *acc += b;
            Some(s)
        })
        .collect();
    let mut u = DMatrix::<f64>::identity(n, n);
    let mut d = DMatrix::<f64>::zeros(n, n);
    let mut rest = m.clone();
    for bi in (0..blocks.len()).rev() {
        let (s, b) = (starts[bi], blocks[bi]);
        let d_blk = rest.view((s, s), (b, b)).into_owned();
        d.view_mut((s, s), (b, b)).copy_from(&d_blk);
        let d_inv = d_blk.clone().try_inverse().expect("trailing block SPD");
        for bj in 0..bi {
            let (s2, b2) = (starts[bj], blocks[bj]);
            let u_blk = rest.view((s2, s), (b2, b)).into_owned() * &d_inv;
            u.view_mut((s2, s), (b2, b)).copy_from(&u_blk);
        }
        let mut next = rest.clone();
        for bj in 0..bi {
            let (s2, b2) = (starts[bj], blocks[bj]);
            for bk in 0..bi {
                let (s3, b3) = (starts[bk], blocks[bk]);
                let u_j = u.view((s2, s), (b2, b)).into_owned();
                let u_k = u.view((s3, s), (b3, b)).into_owned();
                let upd = u_j * &d_blk * u_k.transpose();
                let cur = rest.view((s2, s3), (b2, b3)).into_owned();
                next.view_mut((s2, s3), (b2, b3)).copy_from(&(cur - upd));
            }
        }
        rest = next;
    }
    (u, d)
}

/// The Weyl chamber flow v |-> g a M_Q for a in A'_Q.
pub fn chamber_flow(
    v: &ChamberBundlePoint,
    a: &GroupElement,
) -> Result<ChamberBundlePoint, ChamberError> {
    let defect = v.parabolic.a_prime_defect(a);
    if defect > 1e-9 {
        return Err(ChamberError::NotInFlow(defect));
    }
    Ok(ChamberBundlePoint::new(v.representative.mul(a), v.parabolic.clone()))
}

/// One-parameter chamber flow a(t) = exp(t H) for the canonical direction of
/// A'_Q (block-constant exponents, unit speed in the exponent vector).
pub fn flow_element(parabolic: &ParabolicData, t: f64) -> GroupElement {
    let mats = parabolic
        .factor_blocks()
        .iter()
        .zip(parabolic.kind.factor_dims())
        .map(|(blocks, n)| {
            let mut exps = vec![0.0f64; blocks.len()];
            if blocks.len() > 1 {
                // decreasing block-constant exponents summing (weighted) to 0
                for (i, e) in exps.iter_mut().enumerate() {
                    *e = (blocks.len() - 1) as f64 / 2.0 - i as f64;
                }
                let total: f64 = blocks.iter().zip(&exps).map(|(b, e)| *b as f64 * e).sum();
                let w = n as f64;
                exps.iter_mut().for_each(|e| *e -= total / w);
                let norm: f64 = blocks
                    .iter()
                    .zip(&exps)
                    .map(|(b, e)| *b as f64 * e * e)
                    .sum::<f64>()
                    .sqrt();
                exps.iter_mut().for_each(|e| *e /= norm);
            }
            let mut m = DMatrix::<f64>::zeros(n, n);
            let mut s = 0;
            for (b, e) in blocks.iter().zip(&exps) {
                for i in s..s + b {
                    m[(i, i)] = (t * e).exp();
                }
                s += b;
            }
            m
        })
        .collect();
    GroupElement { kind: parabolic.kind.clone(), mats }
}

/// Which leaf family a membership query refers to. Center-unstable leaves are
/// labeled by faces of the opposite type (for the product group the types
/// coincide, so the choice cannot be inferred from the label alone).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    CenterStable,
    CenterUnstable,
}

/// Membership report of v in the center-stable leaf W^cs(xi) or the
/// center-unstable leaf W^cu(xi) = W^cs-of-the-opposite-face.
pub fn leaf_membership(
    v: &ChamberBundlePoint,
    xi: &BoundaryPoint,
    kind: LeafKind,
) -> Result<(bool, f64), ChamberError> {
    let (label, want) = match kind {
        LeafKind::CenterStable => (cs_label(v)?, v.parabolic.clone()),
        LeafKind::CenterUnstable => (cu_label(v)?, v.parabolic.opposite()),
    };
    if *xi.parabolic() != want {
        return Err(ChamberError::ParabolicMismatch);
    }
    let defect = flag_distance(&label, xi)?;
    Ok((defect < 1e-9, defect))
}

/// Fiber distance between two points of the same fiber, through the normal
/// homogeneous metric on K/M_Q: min over m in M_Q of |Log(k_u^T k_v m)|_F.
pub fn fiber_distance(
    u: &ChamberBundlePoint,
    v: &ChamberBundlePoint,
) -> Result<f64, ChamberError> {
    let ku = fiber_coordinate(u)?;
    let kv = fiber_coordinate(v)?;
    let mut total = 0.0;
    for ((mu, mv), blocks) in ku.mats.iter().zip(&kv.mats).zip(u.parabolic.factor_blocks()) {
        let rel = mu.transpose() * mv;
        let d = k_mod_m_distance(&rel, &blocks);
        total += d * d;
    }
    Ok(total.sqrt())
}

/// The K-component of the reverse Iwasawa decomposition g = n a k, i.e. the
/// fiber coordinate of the bundle point over its base.
pub fn fiber_coordinate(v: &ChamberBundlePoint) -> Result<GroupElement, ChamberError> {
    // g = n a k  <=>  g^-1 = k^-1 a^-1 n^-1 (KAN of the inverse)
    let (k_inv, _, _) = generalized_iwasawa(&v.representative.inverse(), &v.parabolic)?;
    Ok(k_inv.inverse())
}

/// d_{K/M_Q}(e M, rel M) for the normal metric: minimize the rotation norm
/// over the compact M_Q (components x circle parameters, golden refinement).
fn k_mod_m_distance(rel: &DMatrix<f64>, blocks: &[usize]) -> f64 {
    let n = rel.nrows();
    if blocks.len() == 1 {
        // M = SO(n) or the full block: distance zero within numerical defect
        if blocks[0] == n {
            return 0.0;
        }
    }
    // enumerate M_Q elements: block rotations; blocks of size 1 give +-1,
    // blocks of size 2 a circle (plus reflection handled by the det pairing)
    let two_blocks: Vec<usize> = blocks.iter().cloned().collect();
    let apply = |phi: f64, signs: &[f64]| -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut s = 0;
        let mut si = 0;
        for &b in &two_blocks {
            match b {
                1 => {
                    m[(s, s)] = signs[si];
                    si += 1;
                }
                2 => {
                    m[(s, s)] = phi.cos() * signs[si];
                    m[(s, s + 1)] = -phi.sin();
                    m[(s + 1, s)] = phi.sin() * signs[si];
                    m[(s + 1, s + 1)] = phi.cos();
                    si += 1;
                }
                _ => {
                    // larger orthogonal blocks are not needed for the two
                    // implemented groups
                    for i in s..s + b {
                        m[(i, i)] = 1.0;
                    }
                    si += 1;
                }
            }
            s += b;
        }
        m
    };
    let nsigns = blocks.len();
    let mut best = f64::INFINITY;
    for mask in 0..(1usize << nsigns) {
        let signs: Vec<f64> = (0..nsigns)
            .map(|i| if mask & (1 << i) != 0 { -1.0 } else { 1.0 })
            .collect();
        let cost = |phi: f64| -> f64 {
            let m = apply(phi, &signs);
            let prod = rel * &m;
            if prod.determinant() < 0.0 || (prod.transpose() * &prod
                - DMatrix::<f64>::identity(n, n))
            .norm()
                > 1e-6
            {
                return f64::INFINITY;
            }
            so_log_norm(&prod)
        };
        if two_blocks.iter().any(|b| *b == 2) {
            // coarse scan + golden refinement over the circle factor
            let coarse = 64;
            let mut best_phi = 0.0;
            let mut best_v = f64::INFINITY;
            for i in 0..coarse {
                let phi = 2.0 * std::f64::consts::PI * i as f64 / coarse as f64;
                let v = cost(phi);
                if v < best_v {
                    best_v = v;
                    best_phi = phi;
                }
            }
            let (mut lo, mut hi) = (
                best_phi - 2.0 * std::f64::consts::PI / coarse as f64,
                best_phi + 2.0 * std::f64::consts::PI / coarse as f64,
            );
            for _ in 0..60 {
                let m1 = lo + (hi - lo) * 0.381966;
                let m2 = hi - (hi - lo) * 0.381966;
                if cost(m1) <= cost(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            best = best.min(cost(0.5 * (lo + hi)));
        } else {
            best = best.min(cost(0.0));
        }
    }
    best
}

/// Frobenius norm of the principal logarithm of a rotation matrix (n <= 4).
fn so_log_norm(r: &DMatrix<f64>) -> f64 {
    let n = r.nrows();
    match n {
        2 => {
            let theta = r[(1, 0)].atan2(r[(0, 0)]);
            2.0_f64.sqrt() * theta.abs()
        }
        3 => {
            let anti = (r - r.transpose()) * 0.5;
            let s = (anti[(2, 1)].powi(2) + anti[(0, 2)].powi(2) + anti[(1, 0)].powi(2)).sqrt();
            let c = (r.trace() - 1.0) * 0.5;
            let theta = s.atan2(c);
            2.0_f64.sqrt() * theta.abs()
        }
        _ => {
            // complex Schur-free fallback: scaled symmetric log of the
            // skew part via the Cayley-like series is unnecessary here;
            // use the eigenvalue angles of the rotation
            let m = r.clone();
            let schur = m.schur();
            let eig = schur.complex_eigenvalues();
            let mut acc = 0.0;
            for e in eig.iter() {
                let ang = e.im.atan2(e.re);
                acc += ang * ang;
            }
            acc.sqrt()
        }
    }
}

/// The Lie-algebra side of the metric on G/M_Q: at e M_Q the fiber tangent is
/// k (minus) m and the horizontal section tangent is p (symmetric matrices);
/// these are orthogonal for <U, V> = tr(U^T V).
pub fn section_fiber_inner_product(
    parabolic: &ParabolicData,
    fiber_dir: &[DMatrix<f64>],
    section_dir: &[DMatrix<f64>],
) -> f64 {
    let _ = parabolic;
    fiber_dir
        .iter()
        .zip(section_dir)
        .map(|(a, b)| (a.transpose() * b).trace())
        .sum()
}

#[cfg(test)]
mod tests;
