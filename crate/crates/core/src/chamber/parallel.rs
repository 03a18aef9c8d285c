//! Parallel sets F(gamma) = A_Q . o and the leafwise retraction of the
//! symmetric space onto them.

use super::{project, symmetric_space_model, ChamberBundlePoint, ChamberError};
use crate::lie::{generalized_iwasawa, GroupElement, GroupKind, ParabolicData};
use crate::manifold::{mat_from, Point};
use nalgebra::DMatrix;

/// Busemann function of the boundary angle xi on the curvature -1
/// hyperboloid, normalized to vanish at (0,0,1): B(x) = ln(-<x, n_xi>).
pub fn busemann(x: &[f64], xi: f64) -> f64 {
    let n = [xi.cos(), xi.sin(), 1.0];
    (-(x[0] * n[0] + x[1] * n[1] - x[2] * n[2])).ln()
}

/// A group element whose coset is the given symmetric-space point (the SPD
/// square root per factor).
pub fn point_representative(x: &Point) -> GroupElement {
    match x.model {
        crate::manifold::Model::Spd { n } => {
            let p = mat_from(&x.coords, n).symmetric_part();
            let (sq, _) = crate::manifold::spd_sqrt_and_inv_sqrt(&p);
            GroupElement { kind: GroupKind::SlN(n), mats: vec![sq] }
        }
        _ => {
            let mut mats = Vec::with_capacity(2);
            for j in 0..2 {
                let p = super::hyperboloid_to_spd2(&[
                    x.coords[3 * j],
                    x.coords[3 * j + 1],
                    x.coords[3 * j + 2],
                ]);
                let (sq, _) = crate::manifold::spd_sqrt_and_inv_sqrt(&p.symmetric_part());
                mats.push(sq);
            }
            GroupElement { kind: GroupKind::Psl2Pair, mats }
        }
    }
}

/// The retraction of X onto the parallel set F(gamma_{o X}) = A_Q . o: strip
/// the N_Q part of the reverse Iwasawa decomposition, retr(n a K) = a K.
pub fn retraction(x: &Point, q: &ParabolicData) -> Result<Point, ChamberError> {
    let g = point_representative(x);
    // g = n a k  from the KAN of g^-1
    let (k1, a1, _n1) = generalized_iwasawa(&g.inverse(), q)?;
    let _ = k1;
    let a = a1.inverse();
    Ok(project(&ChamberBundlePoint::new(a, q.clone())))
}

/// Samples of the parallel set A_Q . o on a grid of Lie-algebra directions.
pub struct ParallelSetSample {
    pub points: Vec<Point>,
    pub retraction_fixed_defect: f64,
}

/// Samples A_Q . o over a grid of the abelian-part parameters with the given
/// extent, and reports the worst defect of `retraction` on the samples
/// (the retraction must fix its image pointwise).
pub fn parallel_set_sample(
    q: &ParabolicData,
    per_axis: usize,
    extent: f64,
) -> Result<ParallelSetSample, ChamberError> {
    assert!(per_axis >= 2, "grid must not be empty");
    let dirs = a_q_basis(q);
    let dim = dirs.len();
    let mut points = Vec::new();
    let mut index = vec![0usize; dim];
    loop {
        // map the grid index to exponents in [-extent, extent]
        let exps: Vec<f64> = index
            .iter()
            .map(|i| extent * (2.0 * (*i as f64) / ((per_axis - 1) as f64) - 1.0))
            .collect();
        let g = a_q_exp(q, &dirs, &exps);
        points.push(project(&ChamberBundlePoint::new(g, q.clone())));
        // advance the multi-index
        let mut k = 0;
        loop {
            if k == dim {
                break;
            }
            index[k] += 1;
            if index[k] < per_axis {
                break;
            }
            index[k] = 0;
            k += 1;
        }
        if k == dim {
            break;
        }
    }
    let mut fixed_defect: f64 = 0.0;
    let model = symmetric_space_model(&q.kind);
    let _ = model;
    for p in &points {
        let r = retraction(p, q)?;
        fixed_defect = fixed_defect.max(crate::manifold::distance(p, &r).unwrap());
    }
    Ok(ParallelSetSample { points, retraction_fixed_defect: fixed_defect })
}

/// Orthonormal basis of the Lie algebra of A_Q (block-diagonal symmetric,
/// traceless per factor); each generator is a per-factor list, nonzero in a
/// single factor.
fn a_q_basis(q: &ParabolicData) -> Vec<Vec<DMatrix<f64>>> {
    let dims = q.kind.factor_dims();
    let fblocks = q.factor_blocks();
    let mut dirs = Vec::new();
    for (fi, (n, blocks)) in dims.iter().zip(&fblocks).enumerate() {
        // symmetric block-diagonal traceless basis for this factor
        let mut local: Vec<DMatrix<f64>> = Vec::new();
        let starts: Vec<usize> = blocks
            .iter()
            .scan(0usize, |acc, b| {
                let s = *acc;
                *acc += b;
                Some(s)
            })
            .collect();
        for (&s, &b) in starts.iter().zip(blocks) {
            for i in 0..b {
                for j in i..b {
                    let mut m = DMatrix::<f64>::zeros(*n, *n);
                    if i == j {
                        m[(s + i, s + i)] = 1.0;
                    } else {
                        m[(s + i, s + j)] = std::f64::consts::FRAC_1_SQRT_2;
                        m[(s + j, s + i)] = std::f64::consts::FRAC_1_SQRT_2;
                    }
                    local.push(m);
                }
            }
        }
        // project out the trace direction and orthonormalize within the factor
        let mut basis: Vec<DMatrix<f64>> = Vec::new();
        for mut m in local {
            let tr = m.trace() / *n as f64;
            for i in 0..*n {
                m[(i, i)] -= tr;
            }
            for b in &basis {
                let c = (b.transpose() * &m).trace();
                m -= b * c;
            }
            let norm = m.norm();
            if norm > 1e-9 {
                let m = m / norm;
                basis.push(m.clone());
                let mut v: Vec<DMatrix<f64>> =
                    dims.iter().map(|d| DMatrix::zeros(*d, *d)).collect();
                v[fi] = m;
                dirs.push(v);
            }
        }
    }
    dirs
}

/// exp of a linear combination of A_Q directions.
fn a_q_exp(
    q: &ParabolicData,
    dirs: &[Vec<DMatrix<f64>>],
    exps: &[f64],
) -> GroupElement {
    let dims = q.kind.factor_dims();
    let mats = dims
        .iter()
        .enumerate()
        .map(|(fi, n)| {
            let mut acc = DMatrix::<f64>::zeros(*n, *n);
            for (d, e) in dirs.iter().zip(exps) {
                acc += &d[fi] * *e;
            }
            crate::manifold::spd_exp(&acc.symmetric_part())
        })
        .collect();
    GroupElement { kind: q.kind.clone(), mats }
}
