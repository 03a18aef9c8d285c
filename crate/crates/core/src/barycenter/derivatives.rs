//! Derivatives of the barycenter in the weights, the atom positions, and the
//! Riemannian metric, with the quantitative closeness certificate
//!
//!   | D_s bar - Q^-1 sum_i w_i ||(D_s z_i) |  <=  32 max{a^2,b^2} L(s) r(s).
//!
//! Metric variation is instantiated as per-factor scale paths on the model
//! constants (sphere radius, hyperbolic curvature scale): g_s multiplies each
//! factor metric by c_j(s)^2 on a fixed chart. Such families are homotheties
//! factor-wise, so the two terms of the metric-derivative formula cancel; the
//! cancellation is exercised numerically rather than assumed.

use super::{hessian_q, solve_relaxed, BaryError, BarycenterResult, WeightedDirac};
use crate::manifold::{
    distance, exp_map, grad_distance, log_map, mixed_hessian_distance, parallel_transport,
    tangent_basis, Model, Point, Tangent,
};
use crate::FD_STEP;
use nalgebra::{DMatrix, DVector};

/// A linear map between tangent spaces, in orthonormal frames of source and
/// target. `matrix[(j, i)]` is the j-th target coordinate of the image of the
/// i-th source frame vector.
#[derive(Debug, Clone)]
pub struct TangentMap {
    pub from: Point,
    pub to: Point,
    pub from_basis: Vec<DVector<f64>>,
    pub to_basis: Vec<DVector<f64>>,
    pub matrix: DMatrix<f64>,
}

impl TangentMap {
    pub fn apply(&self, v: &Tangent) -> Tangent {
        let coords = DVector::from_iterator(
            self.from_basis.len(),
            self.from_basis
                .iter()
                .map(|e| crate::manifold::inner(&self.from, &v.vector, e)),
        );
        let out = &self.matrix * coords;
        let mut vec = DVector::zeros(self.to.model.ambient_dim());
        for (c, e) in out.iter().zip(self.to_basis.iter()) {
            vec += e * *c;
        }
        Tangent::new(self.to.clone(), vec).expect("tangent map output")
    }

    pub fn operator_norm(&self) -> f64 {
        self.matrix.clone().svd(false, false).singular_values.amax()
    }
}

/// D_{w_i} bar = -Q^-1 ( d(bar, z_i) grad_x d(x, z_i) ) = Q^-1 log_bar(z_i).
///
/// The derivative is the unconstrained one: perturbing w_i alone, without
/// renormalizing the other weights.
pub fn d_bar_d_weight(
    mu: &WeightedDirac,
    i: usize,
    bar: &BarycenterResult,
) -> Result<Tangent, BaryError> {
    let q = hessian_q(mu, &bar.point)?;
    let l = log_map(&bar.point, &mu.atoms[i].1)?;
    Ok(q.solve(&l))
}

/// D_{z_i} bar = -Q^-1 ( w_i ( D_z d (x) grad_x d + d D_z grad_x d ) ),
/// as a linear map T_{z_i} -> T_bar; the mixed second derivative comes from
/// central differences of grad_distance.
pub fn d_bar_d_point(
    mu: &WeightedDirac,
    i: usize,
    bar: &BarycenterResult,
) -> Result<TangentMap, BaryError> {
    let x = &bar.point;
    let (w, z) = (&mu.atoms[i].0, &mu.atoms[i].1);
    let q = hessian_q(mu, x)?;
    let d = distance(x, z)?;
    let from_basis = tangent_basis(z);
    let to_basis = q.basis.clone();
    let dim_from = from_basis.len();
    let dim_to = to_basis.len();
    let mut m = DMatrix::zeros(dim_to, dim_from);
    if d < 1e-7 {
        // limit: D_z bar = w_i Q^-1 || with || -> identity as z -> x
        for (i_col, f) in from_basis.iter().enumerate() {
            let img = q.solve(&Tangent::raw(x.clone(), f.clone())).scale(*w);
            for (j, e) in to_basis.iter().enumerate() {
                m[(j, i_col)] = crate::manifold::inner(x, &img.vector, e);
            }
        }
        return Ok(TangentMap { from: z.clone(), to: x.clone(), from_basis, to_basis, matrix: m });
    }
    let gx = grad_distance(x, z)?;
    let gz = grad_distance(z, x)?;
    let (mixed_basis_z, mixed_basis_x, mixed) = mixed_hessian_distance(x, z)?;
    for (i_col, f) in from_basis.iter().enumerate() {
        // D_z d in direction f
        let dzd = crate::manifold::inner(z, &gz.vector, f);
        // mixed term: rebuild the vector at x for input direction f
        let mut mix = DVector::zeros(x.model.ambient_dim());
        for (r, fz) in mixed_basis_z.iter().enumerate() {
            let c = crate::manifold::inner(z, f, fz);
            for (j, ex) in mixed_basis_x.iter().enumerate() {
                mix += ex * (c * mixed[(r, j)]);
            }
        }
        let inner_vec = (&gx.vector * dzd + mix * d) * *w;
        let img = q.solve(&Tangent::raw(x.clone(), inner_vec)).scale(-1.0);
        for (j, e) in to_basis.iter().enumerate() {
            m[(j, i_col)] = crate::manifold::inner(x, &img.vector, e);
        }
    }
    Ok(TangentMap { from: z.clone(), to: x.clone(), from_basis, to_basis, matrix: m })
}

/// The transport comparison map Q^-1 o (w_i ||_{z_i}^{bar}) of the closeness
/// claim, in the same frames as `d_bar_d_point`.
pub fn transport_comparison_map(
    mu: &WeightedDirac,
    i: usize,
    bar: &BarycenterResult,
) -> Result<TangentMap, BaryError> {
    let x = &bar.point;
    let (w, z) = (&mu.atoms[i].0, &mu.atoms[i].1);
    let q = hessian_q(mu, x)?;
    let from_basis = tangent_basis(z);
    let to_basis = q.basis.clone();
    let mut m = DMatrix::zeros(to_basis.len(), from_basis.len());
    for (i_col, f) in from_basis.iter().enumerate() {
        let moved = parallel_transport(z, x, &Tangent::raw(z.clone(), f.clone()))?;
        let img = q.solve(&moved).scale(*w);
        for (j, e) in to_basis.iter().enumerate() {
            m[(j, i_col)] = crate::manifold::inner(x, &img.vector, e);
        }
    }
    Ok(TangentMap { from: z.clone(), to: x.clone(), from_basis, to_basis, matrix: m })
}

// ---------------------------------------------------------------------------
// Scaled metrics and metric families
// ---------------------------------------------------------------------------

/// The metric on the fixed chart of `base` whose factor j is multiplied by
/// scales[j]^2. Geodesics, parallel transport and the exponential map agree
/// with the base metric; distances, gradients and curvature bounds rescale.
#[derive(Debug, Clone)]
pub struct ScaledMetric {
    pub base: Model,
    pub scales: Vec<f64>,
}

impl ScaledMetric {
    pub fn new(base: Model, scales: Vec<f64>) -> ScaledMetric {
        assert_eq!(scales.len(), n_factors(&base), "one scale per factor");
        assert!(scales.iter().all(|c| *c > 0.0));
        ScaledMetric { base, scales }
    }

    pub fn unit(base: Model) -> ScaledMetric {
        let n = n_factors(&base);
        ScaledMetric { base, scales: vec![1.0; n] }
    }

    fn factor_views(&self) -> Vec<(usize, usize, Model)> {
        match &self.base {
            Model::Product { factors } => {
                let mut out = Vec::new();
                let mut off = 0;
                for f in factors {
                    out.push((off, f.ambient_dim(), f.clone()));
                    off += f.ambient_dim();
                }
                out
            }
            m => vec![(0, m.ambient_dim(), m.clone())],
        }
    }

    pub fn dist(&self, x: &Point, y: &Point) -> f64 {
        let mut acc = 0.0;
        for ((off, len, f), c) in self.factor_views().into_iter().zip(&self.scales) {
            let xf = Point::raw(f.clone(), x.coords.rows(off, len).into_owned());
            let yf = Point::raw(f.clone(), y.coords.rows(off, len).into_owned());
            let d = distance(&xf, &yf).expect("factor distance");
            acc += c * c * d * d;
        }
        acc.sqrt()
    }

    pub fn inner(&self, x: &Point, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for ((off, len, f), c) in self.factor_views().into_iter().zip(&self.scales) {
            let xf = Point::raw(f.clone(), x.coords.rows(off, len).into_owned());
            acc += c
                * c
                * crate::manifold::inner(
                    &xf,
                    &u.rows(off, len).into_owned(),
                    &v.rows(off, len).into_owned(),
                );
        }
        acc
    }

    pub fn norm(&self, x: &Point, u: &DVector<f64>) -> f64 {
        self.inner(x, u, u).sqrt()
    }

    /// Gradient of x |-> d_s(x, z), as an ambient chart vector at x; unit for
    /// the scaled metric.
    pub fn grad(&self, x: &Point, z: &Point) -> DVector<f64> {
        let ds = self.dist(x, z);
        let mut out = DVector::zeros(x.model.ambient_dim());
        for ((off, len, f), _c) in self.factor_views().into_iter().zip(&self.scales) {
            let xf = Point::raw(f.clone(), x.coords.rows(off, len).into_owned());
            let zf = Point::raw(f.clone(), z.coords.rows(off, len).into_owned());
            let df = distance(&xf, &zf).expect("factor distance");
            if df < 1e-7 {
                continue;
            }
            let gf = grad_distance(&xf, &zf).expect("factor gradient");
            out.rows_mut(off, len).copy_from(&(&gf.vector * (df / ds)));
        }
        out
    }

    /// Orthonormal frame of T_x for the scaled metric.
    pub fn frame(&self, x: &Point) -> Vec<DVector<f64>> {
        let mut frame = Vec::new();
        let total = x.model.ambient_dim();
        for ((off, len, f), c) in self.factor_views().into_iter().zip(&self.scales) {
            let xf = Point::raw(f.clone(), x.coords.rows(off, len).into_owned());
            for b in tangent_basis(&xf) {
                let mut e = DVector::zeros(total);
                e.rows_mut(off, len).copy_from(&(&b / *c));
                frame.push(e);
            }
        }
        frame
    }

    /// Curvature bounds (a, b) of the scaled metric.
    pub fn curvature_bounds(&self) -> (f64, f64) {
        let mut a: f64 = 0.0;
        let mut b: f64 = 0.0;
        for ((_, _, f), c) in self.factor_views().into_iter().zip(&self.scales) {
            a = a.max(f.curv_lower_a() / c);
            b = b.max(f.curv_upper_b() / c);
        }
        (a, b)
    }

    /// The Hessian Q of the scaled-metric energy at x, in the scaled frame.
    /// Geodesics and parallel transport coincide with the base metric, so the
    /// second-derivative finite differences use the base exp / transport.
    pub fn hessian_q(&self, mu: &WeightedDirac, x: &Point) -> Result<ScaledOperator, BaryError> {
        let frame = self.frame(x);
        let dim = frame.len();
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        let h = FD_STEP;
        for (wi, z) in &mu.atoms {
            let ds = self.dist(x, z);
            if ds < 1e-7 {
                for k in 0..dim {
                    m[(k, k)] += wi;
                }
                continue;
            }
            let g = self.grad(x, z);
            let gf = DVector::from_iterator(dim, frame.iter().map(|e| self.inner(x, &g, e)));
            let mut hess = DMatrix::<f64>::zeros(dim, dim);
            for (i, e) in frame.iter().enumerate() {
                let xp = exp_map(x, &Tangent::raw(x.clone(), e * h))?;
                let xm = exp_map(x, &Tangent::raw(x.clone(), e * (-h)))?;
                let gp = self.grad(&xp, z);
                let gm = self.grad(&xm, z);
                let gp_x = parallel_transport(&xp, x, &Tangent::raw(xp.clone(), gp))?;
                let gm_x = parallel_transport(&xm, x, &Tangent::raw(xm.clone(), gm))?;
                let de = (&gp_x.vector - &gm_x.vector) / (2.0 * h);
                for (j, f) in frame.iter().enumerate() {
                    hess[(i, j)] = self.inner(x, &de, f);
                }
            }
            m += (&gf * gf.transpose() + (&hess + hess.transpose()) * (0.5 * ds)) * *wi;
        }
        Ok(ScaledOperator {
            base: x.clone(),
            frame,
            matrix: (&m + m.transpose()) * 0.5,
            metric: self.clone(),
        })
    }
}

/// Symmetric operator expressed in a frame orthonormal for a scaled metric.
#[derive(Debug, Clone)]
pub struct ScaledOperator {
    pub base: Point,
    pub frame: Vec<DVector<f64>>,
    pub matrix: DMatrix<f64>,
    metric: ScaledMetric,
}

impl ScaledOperator {
    fn to_frame(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.frame.len(),
            self.frame.iter().map(|e| self.metric.inner(&self.base, v, e)),
        )
    }

    fn from_frame(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.base.model.ambient_dim());
        for (c, e) in x.iter().zip(self.frame.iter()) {
            v += e * *c;
        }
        v
    }

    pub fn solve(&self, t: &Tangent) -> Tangent {
        let x = self
            .matrix
            .clone()
            .lu()
            .solve(&self.to_frame(&t.vector))
            .expect("scaled operator is singular");
        Tangent::raw(self.base.clone(), self.from_frame(&x))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.clone().symmetric_eigen().eigenvalues.min()
    }
}

fn n_factors(model: &Model) -> usize {
    match model {
        Model::Product { factors } => factors.len(),
        _ => 1,
    }
}

/// A one-parameter C^1 family: metric scales, weights and atom positions all
/// depend on s in (-eps0, eps0). The parameter is scalar; a multi-parameter
/// family is probed one direction at a time.
pub struct MetricFamily {
    pub base: Model,
    pub scales: Box<dyn Fn(f64) -> Vec<f64>>,
    pub weights: Box<dyn Fn(f64) -> Vec<f64>>,
    pub points: Box<dyn Fn(f64) -> Vec<Point>>,
    pub eps0: f64,
}

impl MetricFamily {
    pub fn metric_at(&self, s: f64) -> ScaledMetric {
        ScaledMetric::new(self.base.clone(), (self.scales)(s))
    }

    pub fn measure_at(&self, s: f64) -> Result<WeightedDirac, BaryError> {
        let w = (self.weights)(s);
        let z = (self.points)(s);
        WeightedDirac::new(w.into_iter().zip(z).collect())
    }

    /// Support diameter r(s), measured in the scaled metric.
    pub fn support_radius(&self, s: f64) -> Result<f64, BaryError> {
        let metric = self.metric_at(s);
        let mu = self.measure_at(s)?;
        let mut r: f64 = 0.0;
        for i in 0..mu.atoms.len() {
            for j in (i + 1)..mu.atoms.len() {
                r = r.max(metric.dist(&mu.atoms[i].1, &mu.atoms[j].1));
            }
        }
        Ok(r)
    }

    /// Checks the Assumptions-B guard at s.
    pub fn check_guard(&self, s: f64) -> Result<(), BaryError> {
        let metric = self.metric_at(s);
        let (a, b) = metric.curvature_bounds();
        let cmin = metric.scales.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut guard = 0.5 * self.base.injectivity_radius() * cmin;
        if b > 0.0 {
            guard = guard.min(std::f64::consts::FRAC_PI_4 / b);
        }
        let m = a.max(b);
        if m > 0.0 {
            guard = guard.min(1.0 / (3.0 * m));
        }
        let r = self.support_radius(s)?;
        if r >= guard {
            return Err(BaryError::GuardViolated { diam: r, guard });
        }
        Ok(())
    }

    /// Central-difference derivative of an atom path at s, as a tangent at
    /// z_i(s).
    pub fn point_path_derivative(&self, i: usize, s: f64) -> Result<Tangent, BaryError> {
        let h = self.fd_step();
        let z0 = (self.points)(s)[i].clone();
        let zp = (self.points)(s + h)[i].clone();
        let zm = (self.points)(s - h)[i].clone();
        let lp = log_map(&z0, &zp)?;
        let lm = log_map(&z0, &zm)?;
        Ok(lp.add(&lm.scale(-1.0)).scale(1.0 / (2.0 * h)))
    }

    pub fn weight_path_derivative(&self, i: usize, s: f64) -> f64 {
        let h = self.fd_step();
        ((self.weights)(s + h)[i] - (self.weights)(s - h)[i]) / (2.0 * h)
    }

    fn fd_step(&self) -> f64 {
        (self.eps0 * 0.05).min(FD_STEP.sqrt() * 1e-1).max(1e-6)
    }

    /// An implementable surrogate for the C^{1,2} norm of the scale family:
    /// max_j |2 c_j'(s) / c_j(s)| times a curvature-dependent factor covering
    /// the first two coordinate derivatives of the metric components in
    /// normal coordinates. Any upper bound keeps the certificate sound.
    pub fn metric_c12_norm(&self, s: f64) -> f64 {
        let h = self.fd_step();
        let c0 = (self.scales)(s);
        let cp = (self.scales)(s + h);
        let cm = (self.scales)(s - h);
        let metric = self.metric_at(s);
        let (a, b) = metric.curvature_bounds();
        let curv = a.max(b);
        let mut out: f64 = 0.0;
        for j in 0..c0.len() {
            let deriv = (cp[j] - cm[j]) / (2.0 * h);
            out = out.max((2.0 * deriv / c0[j]).abs());
        }
        out * (1.0 + curv * curv).max(1.0)
    }
}

/// Derivative of s -> bar_s(mu) with the atoms frozen at their s0 positions,
/// via -Q^-1( sum w_i ( D_s d (x) grad^{s0} d + d D_s grad^s d ) ) with the
/// D_s terms from central differences across the family.
pub fn d_bar_d_metric(family: &MetricFamily, s0: f64) -> Result<Tangent, BaryError> {
    family.check_guard(s0)?;
    let mu = family.measure_at(s0)?;
    let bar = solve_relaxed(&mu, 1e-10, 200)?;
    let x0 = &bar.point;
    let metric0 = family.metric_at(s0);
    let q = metric0.hessian_q(&mu, x0)?;
    let h = family.fd_step();
    let metric_p = family.metric_at(s0 + h);
    let metric_m = family.metric_at(s0 - h);
    let mut rhs = DVector::zeros(x0.model.ambient_dim());
    for (w, z) in &mu.atoms {
        let d0 = metric0.dist(x0, z);
        if d0 < 1e-9 {
            continue;
        }
        let ds_d = (metric_p.dist(x0, z) - metric_m.dist(x0, z)) / (2.0 * h);
        let g0 = metric0.grad(x0, z);
        let ds_grad = (metric_p.grad(x0, z) - metric_m.grad(x0, z)) / (2.0 * h);
        rhs += (g0 * ds_d + ds_grad * d0) * *w;
    }
    let sol = q.solve(&Tangent::raw(x0.clone(), rhs)).scale(-1.0);
    Ok(sol)
}

/// Full derivative of s -> bar_s(mu(s)) together with the transport-term
/// certificate of the closeness bound.
#[derive(Debug, Clone)]
pub struct DbarTotal {
    /// D_s bar, as a chart tangent vector at bar_{s0}(mu(s0)).
    pub derivative: Tangent,
    /// Q^-1 sum_i w_i ||(D_s z_i), the transport main term.
    pub transport_term: Tangent,
    /// |derivative - transport_term| in the s0 metric.
    pub deviation: f64,
    /// 32 max{a^2,b^2} L(s0) r(s0).
    pub bound: f64,
    pub l_const: f64,
    pub support_radius: f64,
}

pub fn d_bar_total(family: &MetricFamily, s0: f64) -> Result<DbarTotal, BaryError> {
    family.check_guard(s0)?;
    let mu = family.measure_at(s0)?;
    let bar = solve_relaxed(&mu, 1e-10, 200)?;
    let x0 = bar.point.clone();
    let metric0 = family.metric_at(s0);
    let q = metric0.hessian_q(&mu, &x0)?;

    // metric part (atoms frozen)
    let metric_part = d_bar_d_metric(family, s0)?;

    // measure part: weights and positions
    let mut measure_part = DVector::zeros(x0.model.ambient_dim());
    let mut transport_term = DVector::zeros(x0.model.ambient_dim());
    let mut l_const: f64 = 0.0;
    let mut weight_deriv_sum = 0.0;
    for i in 0..mu.atoms.len() {
        let (_, z) = &mu.atoms[i];
        let wdot = family.weight_path_derivative(i, s0);
        weight_deriv_sum += wdot.abs();
        // D_w bar * w'
        let lg = log_map(&x0, z)?;
        measure_part += &q.solve(&lg).vector * wdot;
        // D_z bar ( z' )
        let zdot = family.point_path_derivative(i, s0)?;
        l_const = l_const.max(metric0.norm(z, &zdot.vector));
        let dmap = d_bar_d_point_scaled(&metric0, &mu, i, &x0, &q)?;
        measure_part += dmap.apply(&zdot).vector;
        // transport main term
        let moved = parallel_transport(z, &x0, &zdot)?;
        transport_term += &q.solve(&moved.scale(mu.atoms[i].0)).vector;
    }
    l_const = l_const.max(weight_deriv_sum) + family.metric_c12_norm(s0);

    let derivative = Tangent::raw(x0.clone(), &metric_part.vector + measure_part);
    let transport = Tangent::raw(x0.clone(), transport_term);
    let deviation = metric0.norm(&x0, &(&derivative.vector - &transport.vector));
    let (a, b) = family_curvature_sup(family);
    let r = family.support_radius(s0)?;
    let bound = 32.0 * (a * a).max(b * b) * l_const * r;
    Ok(DbarTotal {
        derivative,
        transport_term: transport,
        deviation,
        bound,
        l_const,
        support_radius: r,
    })
}

/// Fixed curvature constants (a, b) valid across the whole family, sampled
/// over the parameter interval.
fn family_curvature_sup(family: &MetricFamily) -> (f64, f64) {
    let mut a: f64 = 0.0;
    let mut b: f64 = 0.0;
    for k in -4..=4 {
        let s = family.eps0 * 0.9 * (k as f64) / 4.0;
        let (as_, bs) = family.metric_at(s).curvature_bounds();
        a = a.max(as_);
        b = b.max(bs);
    }
    (a, b)
}

/// d_bar_d_point for a scaled metric, sharing the precomputed Q.
fn d_bar_d_point_scaled(
    metric: &ScaledMetric,
    mu: &WeightedDirac,
    i: usize,
    x0: &Point,
    q: &ScaledOperator,
) -> Result<TangentMap, BaryError> {
    let (w, z) = (&mu.atoms[i].0, &mu.atoms[i].1);
    let from_basis = tangent_basis(z);
    let to_basis = q.frame.clone();
    let d = metric.dist(x0, z);
    let mut m = DMatrix::zeros(to_basis.len(), from_basis.len());
    if d < 1e-7 {
        for (col, f) in from_basis.iter().enumerate() {
            let img = q.solve(&Tangent::raw(x0.clone(), f.clone())).scale(*w);
            for (row, e) in to_basis.iter().enumerate() {
                m[(row, col)] = metric.inner(x0, &img.vector, e);
            }
        }
        return Ok(TangentMap {
            from: z.clone(),
            to: x0.clone(),
            from_basis,
            to_basis,
            matrix: m,
        });
    }
    let gx = metric.grad(x0, z);
    let h = FD_STEP;
    for (col, f) in from_basis.iter().enumerate() {
        let zp = exp_map(z, &Tangent::raw(z.clone(), f * h))?;
        let zm = exp_map(z, &Tangent::raw(z.clone(), f * (-h)))?;
        // D_z d_s in direction f
        let dzd = (metric.dist(x0, &zp) - metric.dist(x0, &zm)) / (2.0 * h);
        // D_z grad_x d_s in direction f (vectors at x0, same chart)
        let mix = (metric.grad(x0, &zp) - metric.grad(x0, &zm)) / (2.0 * h);
        let inner_vec = (&gx * dzd + mix * d) * *w;
        let img = q.solve(&Tangent::raw(x0.clone(), inner_vec)).scale(-1.0);
        for (row, e) in to_basis.iter().enumerate() {
            m[(row, col)] = metric.inner(x0, &img.vector, e);
        }
    }
    Ok(TangentMap { from: z.clone(), to: x0.clone(), from_basis, to_basis, matrix: m })
}

