//! Affine isometries of the model manifolds.
//!
//! These are the maps available for pushing measures forward: linear Minkowski
//! maps on the hyperboloid, congruences P -> G P G^T on SPD(n), orthogonal
//! maps on spheres, rigid motions of flat space, and products of these.

use super::{mat_from, mat_to, Model, Point};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub enum Isometry {
    /// x -> R x + t.
    Euclidean { rot: DMatrix<f64>, trans: DVector<f64> },
    /// x -> R x for R orthogonal.
    Sphere { rot: DMatrix<f64> },
    /// x -> M x for M in SO(2,1)^+ acting on the hyperboloid chart.
    Hyperbolic { mat: DMatrix<f64> },
    /// P -> G P G^T for G in SL(n, R).
    SpdCongruence { g: DMatrix<f64> },
    Product { factors: Vec<Isometry> },
    Identity,
}

impl Isometry {
    pub fn apply(&self, p: &Point) -> Point {
        match (self, &p.model) {
            (Isometry::Identity, _) => p.clone(),
            (Isometry::Euclidean { rot, trans }, _) => {
                Point::raw(p.model.clone(), rot * &p.coords + trans)
            }
            (Isometry::Sphere { rot }, _) => Point::raw(p.model.clone(), rot * &p.coords),
            (Isometry::Hyperbolic { mat }, _) => Point::raw(p.model.clone(), mat * &p.coords),
            (Isometry::SpdCongruence { g }, Model::Spd { n }) => {
                let pm = mat_from(&p.coords, *n);
                Point::raw(p.model.clone(), mat_to(&(g * pm * g.transpose())))
            }
            (Isometry::Product { factors }, Model::Product { factors: mf }) => {
                let mut out = DVector::zeros(p.model.ambient_dim());
                let mut off = 0;
                for (iso, f) in factors.iter().zip(mf.iter()) {
                    let k = f.ambient_dim();
                    let pf = Point::raw(f.clone(), p.coords.rows(off, k).into_owned());
                    out.rows_mut(off, k).copy_from(&iso.apply(&pf).coords);
                    off += k;
                }
                Point::raw(p.model.clone(), out)
            }
            _ => panic!("isometry applied to an incompatible model"),
        }
    }
}
