//! Exponential / logarithm / distance / transport and distance derivatives.

use super::spd::{spd_exp, spd_log, spd_sqrt_and_inv_sqrt, sym_basis};
use super::{mat_from, mat_to, GeomError, Model, Point, SymOperator, Tangent};
use crate::FD_STEP;
use nalgebra::{DMatrix, DVector};

/// Riemannian inner product of two ambient-chart vectors at `p`.
pub fn inner(p: &Point, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    match &p.model {
        Model::Euclidean { .. } | Model::Sphere { .. } => u.dot(v),
        Model::Hyperbolic { .. } => u[0] * v[0] + u[1] * v[1] - u[2] * v[2],
        Model::Spd { n } => {
            let pm = mat_from(&p.coords, *n);
            let pinv = pm.try_inverse().expect("SPD point is invertible");
            let um = mat_from(u, *n);
            let vm = mat_from(v, *n);
            (&pinv * um * &pinv * vm).trace()
        }
        Model::Product { factors } => {
            let mut off = 0;
            let mut acc = 0.0;
            for f in factors {
                let k = f.ambient_dim();
                let pf = Point::raw(f.clone(), p.coords.rows(off, k).into_owned());
                acc += inner(&pf, &u.rows(off, k).into_owned(), &v.rows(off, k).into_owned());
                off += k;
            }
            acc
        }
    }
}

/// Orthonormal basis of the tangent space at `p`, as ambient vectors.
pub fn tangent_basis(p: &Point) -> Vec<DVector<f64>> {
    match &p.model {
        Model::Euclidean { dim } => (0..*dim)
            .map(|i| {
                let mut e = DVector::zeros(*dim);
                e[i] = 1.0;
                e
            })
            .collect(),
        Model::Sphere { dim, .. } => {
            // Gram-Schmidt the ambient axes against the radial direction.
            let k = dim + 1;
            let radial = &p.coords / p.coords.norm();
            let mut basis: Vec<DVector<f64>> = Vec::new();
            for i in 0..k {
                let mut e = DVector::zeros(k);
                e[i] = 1.0;
                e -= &radial * radial.dot(&e);
                for b in &basis {
                    e -= b * b.dot(&e);
                }
                let n = e.norm();
                if n > 1e-8 {
                    basis.push(e / n);
                }
                if basis.len() == *dim {
                    break;
                }
            }
            basis
        }
        Model::Hyperbolic { .. } => {
            let mink = |u: &DVector<f64>, v: &DVector<f64>| {
                u[0] * v[0] + u[1] * v[1] - u[2] * v[2]
            };
            let q = mink(&p.coords, &p.coords);
            let mut basis: Vec<DVector<f64>> = Vec::new();
            for i in 0..3 {
                let mut e: DVector<f64> = DVector::zeros(3);
                e[i] = 1.0;
                // project out the (timelike) position direction
                e -= &p.coords * (mink(&p.coords, &e) / q);
                for b in &basis {
                    e -= b * mink(b, &e);
                }
                let n = mink(&e, &e);
                if n > 1e-16 {
                    basis.push(e / n.sqrt());
                }
                if basis.len() == 2 {
                    break;
                }
            }
            basis
        }
        Model::Spd { n } => {
            // Push the orthonormal symmetric basis at I forward by the
            // isometry S |-> P^{1/2} S P^{1/2}.
            let pm = mat_from(&p.coords, *n);
            let (sq, _) = spd_sqrt_and_inv_sqrt(&pm);
            sym_basis(*n).into_iter().map(|e| mat_to(&(&sq * e * &sq))).collect()
        }
        Model::Product { factors } => {
            let total = p.model.ambient_dim();
            let mut basis = Vec::new();
            let mut off = 0;
            for f in factors {
                let k = f.ambient_dim();
                let pf = Point::raw(f.clone(), p.coords.rows(off, k).into_owned());
                for b in tangent_basis(&pf) {
                    let mut e = DVector::zeros(total);
                    e.rows_mut(off, k).copy_from(&b);
                    basis.push(e);
                }
                off += k;
            }
            basis
        }
    }
}

/// Geodesic distance.
pub fn distance(p: &Point, q: &Point) -> Result<f64, GeomError> {
    if !p.same_model(q) {
        return Err(GeomError::ModelMismatch);
    }
    Ok(dist_unchecked(p, q))
}

fn dist_unchecked(p: &Point, q: &Point) -> f64 {
    match &p.model {
        Model::Euclidean { .. } => (&p.coords - &q.coords).norm(),
        Model::Sphere { radius, .. } => {
            // chord-based forms keep full precision at both ends
            if p.coords.dot(&q.coords) >= 0.0 {
                let chord = (&p.coords - &q.coords).norm();
                2.0 * radius * (chord / (2.0 * radius)).clamp(-1.0, 1.0).asin()
            } else {
                let anti = (&p.coords + &q.coords).norm();
                radius
                    * (std::f64::consts::PI
                        - 2.0 * (anti / (2.0 * radius)).clamp(-1.0, 1.0).asin())
            }
        }
        Model::Hyperbolic { a } => {
            // cosh(a d) - 1 = a^2 <p-q, p-q>_M / 2, computed without
            // cancellation from the difference vector
            let dx = p.coords[0] - q.coords[0];
            let dy = p.coords[1] - q.coords[1];
            let dz = p.coords[2] - q.coords[2];
            let u = (a * a * (dx * dx + dy * dy - dz * dz) * 0.5).max(0.0);
            (u * (u + 2.0)).sqrt().asinh() / a
        }
        Model::Spd { n } => {
            let pm = mat_from(&p.coords, *n);
            let qm = mat_from(&q.coords, *n);
            let (_, isq) = spd_sqrt_and_inv_sqrt(&pm);
            let w = &isq * qm * &isq;
            spd_log(&w).norm()
        }
        Model::Product { factors } => {
            let mut off = 0;
            let mut acc = 0.0;
            for (i, f) in factors.iter().enumerate() {
                let _ = i;
                let k = f.ambient_dim();
                let d = dist_unchecked(
                    &Point::raw(f.clone(), p.coords.rows(off, k).into_owned()),
                    &Point::raw(f.clone(), q.coords.rows(off, k).into_owned()),
                );
                acc += d * d;
                off += k;
            }
            acc.sqrt()
        }
    }
}

/// Geodesic exponential: gamma(1) for gamma(0)=p, gamma'(0)=v.
pub fn exp_map(p: &Point, v: &Tangent) -> Result<Point, GeomError> {
    if !p.same_model(&v.base) || (&p.coords - &v.base.coords).norm() > 1e-9 {
        return Err(GeomError::BaseMismatch);
    }
    Ok(exp_unchecked(p, &v.vector))
}

pub(crate) fn exp_unchecked(p: &Point, v: &DVector<f64>) -> Point {
    match &p.model {
        Model::Euclidean { .. } => Point::raw(p.model.clone(), &p.coords + v),
        Model::Sphere { radius, .. } => {
            let n = v.norm();
            if n < 1e-300 {
                return p.clone();
            }
            let theta = n / radius;
            Point::raw(p.model.clone(), &p.coords * theta.cos() + v * (theta.sin() * radius / n))
        }
        Model::Hyperbolic { a } => {
            let n2 = v[0] * v[0] + v[1] * v[1] - v[2] * v[2];
            let n = n2.max(0.0).sqrt();
            if n < 1e-300 {
                return p.clone();
            }
            let t = a * n;
            Point::raw(p.model.clone(), &p.coords * t.cosh() + v * (t.sinh() / (a * n)))
        }
        Model::Spd { n } => {
            let pm = mat_from(&p.coords, *n);
            let vm = mat_from(v, *n);
            let (sq, isq) = spd_sqrt_and_inv_sqrt(&pm);
            let inner = &isq * vm * &isq;
            let e = spd_exp(&inner.symmetric_part());
            Point::raw(p.model.clone(), mat_to(&(&sq * e * &sq)))
        }
        Model::Product { factors } => {
            let mut out = DVector::zeros(p.model.ambient_dim());
            let mut off = 0;
            for f in factors {
                let k = f.ambient_dim();
                let pf = Point::raw(f.clone(), p.coords.rows(off, k).into_owned());
                let q = exp_unchecked(&pf, &v.rows(off, k).into_owned());
                out.rows_mut(off, k).copy_from(&q.coords);
                off += k;
            }
            Point::raw(p.model.clone(), out)
        }
    }
}

/// Inverse of `exp_map`; requires d(p,q) below the injectivity radius.
pub fn log_map(p: &Point, q: &Point) -> Result<Tangent, GeomError> {
    if !p.same_model(q) {
        return Err(GeomError::ModelMismatch);
    }
    let d = dist_unchecked(p, q);
    if d >= p.model.injectivity_radius() - 1e-9 {
        return Err(GeomError::BeyondInjectivityRadius { dist: d });
    }
    Ok(Tangent::raw(p.clone(), log_unchecked(p, q)))
}

pub(crate) fn log_unchecked(p: &Point, q: &Point) -> DVector<f64> {
    match &p.model {
        Model::Euclidean { .. } => &q.coords - &p.coords,
        Model::Sphere { radius, .. } => {
            let r2 = radius * radius;
            let theta = dist_unchecked(p, q) / radius;
            if theta < 1e-300 {
                return DVector::zeros(p.coords.len());
            }
            // w = q - c p written as (q - p) + p chord^2/(2 r^2) to keep the
            // direction accurate at small separations
            let chord2 = (&q.coords - &p.coords).norm_squared();
            let w = (&q.coords - &p.coords) + &p.coords * (chord2 / (2.0 * r2));
            let wn = w.norm();
            if wn < 1e-300 {
                return DVector::zeros(p.coords.len());
            }
            w * (radius * theta / wn)
        }
        Model::Hyperbolic { a } => {
            let d = dist_unchecked(p, q);
            if d < 1e-300 {
                return DVector::zeros(3);
            }
            // w = q + a^2 <p,q> p, rewritten through the difference vector:
            // a^2 <p,q> + 1 = -a^2 <p-q,p-q>_M / 2 exactly on the chart
            let diff = &q.coords - &p.coords;
            let qq = (diff[0] * diff[0] + diff[1] * diff[1] - diff[2] * diff[2]).max(0.0);
            let w = diff - &p.coords * (a * a * qq * 0.5);
            let wn = (w[0] * w[0] + w[1] * w[1] - w[2] * w[2]).max(0.0).sqrt();
            if wn < 1e-300 {
                return DVector::zeros(3);
            }
            w * (d / wn)
        }
        Model::Spd { n } => {
            let pm = mat_from(&p.coords, *n);
            let qm = mat_from(&q.coords, *n);
            let (sq, isq) = spd_sqrt_and_inv_sqrt(&pm);
            let w = (&isq * qm * &isq).symmetric_part();
            let l = spd_log(&w);
            mat_to(&(&sq * l * &sq))
        }
        Model::Product { factors } => {
            let mut out = DVector::zeros(p.model.ambient_dim());
            let mut off = 0;
            for f in factors {
                let k = f.ambient_dim();
                let pf = Point::raw(f.clone(), p.coords.rows(off, k).into_owned());
                let qf = Point::raw(f.clone(), q.coords.rows(off, k).into_owned());
                out.rows_mut(off, k).copy_from(&log_unchecked(&pf, &qf));
                off += k;
            }
            out
        }
    }
}

/// Parallel transport of `v` (based at p) along the unique minimizing
/// geodesic from p to q.
pub fn parallel_transport(p: &Point, q: &Point, v: &Tangent) -> Result<Tangent, GeomError> {
    if !p.same_model(q) {
        return Err(GeomError::ModelMismatch);
    }
    if (&p.coords - &v.base.coords).norm() > 1e-9 {
        return Err(GeomError::BaseMismatch);
    }
    let d = dist_unchecked(p, q);
    if d >= p.model.injectivity_radius() - 1e-9 {
        return Err(GeomError::BeyondInjectivityRadius { dist: d });
    }
    Ok(Tangent::raw(q.clone(), transport_unchecked(p, q, &v.vector)))
}

pub(crate) fn transport_unchecked(p: &Point, q: &Point, v: &DVector<f64>) -> DVector<f64> {
    match &p.model {
        Model::Euclidean { .. } => v.clone(),
        Model::Sphere { .. } | Model::Hyperbolic { .. } => {
            // Rotate the component along the geodesic direction; the part
            // orthogonal to the geodesic 2-plane is constant in the chart.
            let d = dist_unchecked(p, q);
            if d < 1e-300 {
                return v.clone();
            }
            let u1 = log_unchecked(p, q) / d; // unit initial direction at p
            let u2 = log_unchecked(q, p) / d; // unit direction back at q
            let c = inner(p, v, &u1);
            // arrival velocity of the unit-speed geodesic = -u2
            let arrival = -u2;
            v - &u1 * c + arrival * c
        }
        Model::Spd { n } => {
            // E = (Q P^{-1})^{1/2} realized as P^{1/2} expm(L/2) P^{-1/2};
            // transport is V |-> E V E^T, exact for the affine metric.
            let pm = mat_from(&p.coords, *n);
            let qm = mat_from(&q.coords, *n);
            let (sq, isq) = spd_sqrt_and_inv_sqrt(&pm);
            let w = (&isq * qm * &isq).symmetric_part();
            let half = spd_exp(&(spd_log(&w) * 0.5));
            let e = &sq * half * &isq;
            let vm = mat_from(v, *n);
            mat_to(&(&e * vm * e.transpose()).symmetric_part())
        }
        Model::Product { factors } => {
            let mut out = DVector::zeros(p.model.ambient_dim());
            let mut off = 0;
            for f in factors {
                let k = f.ambient_dim();
                let pf = Point::raw(f.clone(), p.coords.rows(off, k).into_owned());
                let qf = Point::raw(f.clone(), q.coords.rows(off, k).into_owned());
                out.rows_mut(off, k).copy_from(&transport_unchecked(
                    &pf,
                    &qf,
                    &v.rows(off, k).into_owned(),
                ));
                off += k;
            }
            out
        }
    }
}

/// Orthogonal projection of an ambient chart vector onto the tangent space.
pub fn project_tangent(p: &Point, ambient: &DVector<f64>) -> Tangent {
    match &p.model {
        Model::Euclidean { .. } => Tangent::raw(p.clone(), ambient.clone()),
        Model::Sphere { radius, .. } => {
            let r2 = radius * radius;
            Tangent::raw(p.clone(), ambient - &p.coords * (p.coords.dot(ambient) / r2))
        }
        Model::Hyperbolic { a } => {
            let m = p.coords[0] * ambient[0] + p.coords[1] * ambient[1]
                - p.coords[2] * ambient[2];
            Tangent::raw(p.clone(), ambient + &p.coords * (a * a * m))
        }
        Model::Spd { n } => {
            let vm = mat_from(ambient, *n).symmetric_part();
            Tangent::raw(p.clone(), mat_to(&vm))
        }
        Model::Product { factors } => {
            let mut out = DVector::zeros(p.model.ambient_dim());
            let mut off = 0;
            for f in factors {
                let k = f.ambient_dim();
                let pf = Point::raw(f.clone(), p.coords.rows(off, k).into_owned());
                let t = project_tangent(&pf, &ambient.rows(off, k).into_owned());
                out.rows_mut(off, k).copy_from(&t.vector);
                off += k;
            }
            Tangent::raw(p.clone(), out)
        }
    }
}

/// Gradient of x |-> d(x, z) at x; unit norm, radially away from z.
pub fn grad_distance(x: &Point, z: &Point) -> Result<Tangent, GeomError> {
    if !x.same_model(z) {
        return Err(GeomError::ModelMismatch);
    }
    let d = dist_unchecked(x, z);
    if d < 1e-12 {
        return Err(GeomError::DegenerateInput("grad_distance at x = z"));
    }
    if d >= x.model.injectivity_radius() - 1e-9 {
        return Err(GeomError::BeyondInjectivityRadius { dist: d });
    }
    Ok(Tangent::raw(x.clone(), log_unchecked(x, z) * (-1.0 / d)))
}

/// Hessian of x |-> d(x, z) at x as a symmetric operator.
///
/// Constant-curvature models use the closed form c(t) (I - grad (x) grad)
/// with c = 1/t, b cot(b t) or a coth(a t); products assemble factor data
/// through Hess d = [sum_j (d_j H_j + g_j (x) g_j) - G (x) G] / d; SPD falls
/// back to central differences of `grad_distance` with transport.
///
/// Vanishes radially; on the radial complement its eigenvalues lie in
/// [b cot(b t), a coth(a t)], t = d(x,z).
pub fn hessian_distance(x: &Point, z: &Point) -> Result<SymOperator, GeomError> {
    let d = dist_unchecked(x, z);
    let b = x.model.curv_upper_b();
    if b > 0.0 && d >= std::f64::consts::FRAC_PI_2 / b {
        return Err(GeomError::ComparisonRadiusExceeded {
            dist: d,
            radius: std::f64::consts::FRAC_PI_2 / b,
        });
    }
    if d < 1e-12 {
        return Err(GeomError::DegenerateInput("hessian_distance at x = z"));
    }
    let basis = tangent_basis(x);
    let dim = basis.len();
    let matrix = match &x.model {
        Model::Euclidean { .. } | Model::Sphere { .. } | Model::Hyperbolic { .. } => {
            let c = match &x.model {
                Model::Euclidean { .. } => 1.0 / d,
                Model::Sphere { radius, .. } => {
                    let b = 1.0 / radius;
                    b / (b * d).tan()
                }
                Model::Hyperbolic { a } => a / (a * d).tanh(),
                _ => unreachable!(),
            };
            let g = grad_distance(x, z)?;
            let gf = DVector::from_iterator(dim, basis.iter().map(|e| inner(x, &g.vector, e)));
            (DMatrix::identity(dim, dim) - &gf * gf.transpose()) * c
        }
        Model::Spd { .. } => {
            let h = FD_STEP;
            let mut m = DMatrix::zeros(dim, dim);
            for (i, e) in basis.iter().enumerate() {
                let xp = exp_unchecked(x, &(e * h));
                let xm = exp_unchecked(x, &(e * (-h)));
                let gp = grad_distance(&xp, z)?;
                let gm = grad_distance(&xm, z)?;
                let gp_at_x = transport_unchecked(&xp, x, &gp.vector);
                let gm_at_x = transport_unchecked(&xm, x, &gm.vector);
                let de = (gp_at_x - gm_at_x) / (2.0 * h);
                for (j, f) in basis.iter().enumerate() {
                    m[(i, j)] = inner(x, &de, f);
                }
            }
            (&m + m.transpose()) * 0.5
        }
        Model::Product { factors } => {
            // sum of per-factor (d_j H_j + g_j (x) g_j) blocks minus G (x) G,
            // divided by d; a factor with d_j -> 0 contributes the identity.
            let mut m = DMatrix::zeros(dim, dim);
            let mut g_total = DVector::zeros(dim);
            let mut frame_off = 0;
            let mut coord_off = 0;
            for f in factors {
                let fd_dim = f.dim();
                let k = f.ambient_dim();
                let xf = Point::raw(f.clone(), x.coords.rows(coord_off, k).into_owned());
                let zf = Point::raw(f.clone(), z.coords.rows(coord_off, k).into_owned());
                let dj = dist_unchecked(&xf, &zf);
                if dj < 1e-7 {
                    for t in 0..fd_dim {
                        m[(frame_off + t, frame_off + t)] += 1.0;
                    }
                } else {
                    let hj = hessian_distance(&xf, &zf)?;
                    let gj = grad_distance(&xf, &zf)?;
                    let gjf = DVector::from_iterator(
                        fd_dim,
                        hj.basis.iter().map(|e| inner(&xf, &gj.vector, e)),
                    );
                    let block = &hj.matrix * dj + &gjf * gjf.transpose();
                    for r in 0..fd_dim {
                        for c in 0..fd_dim {
                            m[(frame_off + r, frame_off + c)] += block[(r, c)];
                        }
                        g_total[frame_off + r] = gjf[r] * (dj / d);
                    }
                }
                frame_off += fd_dim;
                coord_off += k;
            }
            (m - &g_total * g_total.transpose()) / d
        }
    };
    Ok(SymOperator { base: x.clone(), basis, matrix })
}

/// Mixed second derivative D_z grad_x d(x, z) as a linear map
/// T_z -> T_x, by central differences of `grad_distance` in z.
/// Rows index the z-frame, columns the x-frame.
pub fn mixed_hessian_distance(
    x: &Point,
    z: &Point,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>, DMatrix<f64>), GeomError> {
    let basis_z = tangent_basis(z);
    let basis_x = tangent_basis(x);
    let h = FD_STEP;
    let mut m = DMatrix::zeros(basis_z.len(), basis_x.len());
    for (i, f) in basis_z.iter().enumerate() {
        let zp = exp_unchecked(z, &(f * h));
        let zm = exp_unchecked(z, &(f * (-h)));
        let gp = grad_distance(x, &zp)?;
        let gm = grad_distance(x, &zm)?;
        let de = (gp.vector - gm.vector) / (2.0 * h);
        for (j, e) in basis_x.iter().enumerate() {
            m[(i, j)] = inner(x, &de, e);
        }
    }
    Ok((basis_z, basis_x, m))
}
