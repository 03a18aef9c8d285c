//! Seeded random points and tangents; used by the randomized suites.

use super::ops::{exp_unchecked, project_tangent};
use super::{Model, Point, Tangent};
use nalgebra::DVector;
use rand::Rng;

/// A canonical base point of the model.
pub fn base_point(model: &Model) -> Point {
    match model {
        Model::Euclidean { dim } => Point::raw(model.clone(), DVector::zeros(*dim)),
        Model::Sphere { dim, radius } => {
            let mut c = DVector::zeros(dim + 1);
            c[0] = *radius;
            Point::raw(model.clone(), c)
        }
        Model::Hyperbolic { a } => {
            Point::raw(model.clone(), DVector::from_vec(vec![0.0, 0.0, 1.0 / a]))
        }
        Model::Spd { n } => {
            let mut c = DVector::zeros(n * n);
            for i in 0..*n {
                c[i * n + i] = 1.0;
            }
            Point::raw(model.clone(), c)
        }
        Model::Product { factors } => {
            let mut c = DVector::zeros(model.ambient_dim());
            let mut off = 0;
            for f in factors {
                let k = f.ambient_dim();
                c.rows_mut(off, k).copy_from(&base_point(f).coords);
                off += k;
            }
            Point::raw(model.clone(), c)
        }
    }
}

/// Random unit tangent at `p`.
pub fn random_unit_tangent<R: Rng>(p: &Point, rng: &mut R) -> Tangent {
    loop {
        let amb = DVector::from_iterator(
            p.model.ambient_dim(),
            (0..p.model.ambient_dim()).map(|_| rng.gen_range(-1.0..1.0)),
        );
        let t = project_tangent(p, &amb);
        let n = t.norm();
        if n > 1e-3 {
            return t.scale(1.0 / n);
        }
    }
}

/// Random tangent with norm uniform in (0, max_norm].
pub fn random_tangent<R: Rng>(p: &Point, max_norm: f64, rng: &mut R) -> Tangent {
    let r: f64 = rng.gen_range(1e-3..1.0);
    random_unit_tangent(p, rng).scale(r * max_norm)
}

/// Random point within geodesic distance `radius` of `center`.
pub fn random_point_near<R: Rng>(center: &Point, radius: f64, rng: &mut R) -> Point {
    let v = random_tangent(center, radius, rng);
    exp_unchecked(center, &v.vector)
}

/// Random point in a moderate ball around the model base point.
pub fn random_point<R: Rng>(model: &Model, rng: &mut R) -> Point {
    let spread = match model {
        Model::Sphere { dim, radius } if *dim >= 2 => 0.6 * radius,
        _ => 1.0,
    };
    random_point_near(&base_point(model), spread, rng)
}
