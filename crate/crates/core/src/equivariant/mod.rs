//! The desk-scale equivariant suspension map over a genus-2 hyperbolic
//! surface: a perturbation rho of the boundary action rho_0 of the octagon
//! lattice gets an equivariant map f-tilde into the unit tangent bundle,
//! built from fiberwise circle barycenters of the translated-atom recipe
//!   xi_j = rho_0(gamma_j) rho(gamma_j^-1) xi
//! weighted by a smooth partition of unity subordinate to a ball cover of
//! the fundamental octagon.

mod lattice;

pub use lattice::FuchsianLattice;

use crate::barycenter::{self, WeightedDirac};
use crate::boundary::{CircleMap, FiniteAction};
use crate::lie::circle::boundary_angle_map;
use crate::manifold::{tangent_basis, Model, Point, Tangent};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EquivariantError {
    #[error("chart radius {0} exceeds half the octagon in-radius")]
    ChartRadiusTooLarge(f64),
    #[error("perturbed action labels do not match the lattice generators")]
    LabelMismatch,
    #[error(
        "fiber atom diameter {diam:.4} exceeds the circle barycenter guard at x = {x:?}, xi = {xi:.4}"
    )]
    AtomGuard { diam: f64, x: [f64; 3], xi: f64 },
    #[error("point cannot be reduced to the fundamental domain")]
    ReductionFailed,
    #[error(transparent)]
    Barycenter(#[from] barycenter::BaryError),
}

/// A point of the suspension T^1 H^2: a base point on the hyperboloid and a
/// unit tangent vector at it.
#[derive(Debug, Clone)]
pub struct SuspensionPoint {
    pub base: Point,
    pub fiber: Tangent,
}

impl SuspensionPoint {
    /// Fiber angle in the deterministic orthonormal frame at the base.
    pub fn fiber_angle(&self) -> f64 {
        let frame = tangent_basis(&self.base);
        let c = crate::manifold::inner(&self.base, &self.fiber.vector, &frame[0]);
        let s = crate::manifold::inner(&self.base, &self.fiber.vector, &frame[1]);
        s.atan2(c).rem_euclid(2.0 * std::f64::consts::PI)
    }

    /// Radial projection to the boundary circle: the endpoint angle of the
    /// geodesic ray with this initial velocity.
    pub fn boundary_angle(&self) -> f64 {
        let n = &self.base.coords + &self.fiber.vector;
        n[1].atan2(n[0]).rem_euclid(2.0 * std::f64::consts::PI)
    }
}

/// The unit vector at `base` pointing to the boundary angle xi.
pub fn vector_toward(base: &Point, xi: f64) -> Tangent {
    let n = DVector::from_vec(vec![xi.cos(), xi.sin(), 1.0]);
    let pairing = base.coords[0] * n[0] + base.coords[1] * n[1] - base.coords[2] * n[2];
    let alpha = -1.0 / pairing;
    Tangent::raw(base.clone(), n * alpha - &base.coords)
}

/// Partition of unity data: ball centers in the closed octagon, the chart
/// radius, and the finite set of group elements whose translated balls can
/// meet the domain.
pub struct Partition {
    pub centers: Vec<Point>,
    pub radius: f64,
    /// elements of S_W: (word in generator labels, SO(2,1) matrix, PSL2
    /// matrices of the element and its inverse)
    pub translates: Vec<TranslateData>,
    pub cover_multiplicity: usize,
}

pub struct TranslateData {
    pub word: Vec<(usize, bool)>,
    pub so21: DMatrix<f64>,
    pub psl2: DMatrix<f64>,
    base_image: Point,
}

/// Smooth bump exp(1 - 1/(1 - s^2)) on s in [0, 1).
fn bump(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Builds the ball cover of the closed fundamental octagon and the finite
/// translate bookkeeping.
pub fn build_partition(
    lattice: &FuchsianLattice,
    chart_radius: f64,
) -> Result<Partition, EquivariantError> {
    if chart_radius >= 0.5 * lattice.in_radius() {
        return Err(EquivariantError::ChartRadiusTooLarge(chart_radius));
    }
    let model = Model::h2();
    let circumradius = lattice.circumradius();
    // hyperbolic polar grid of centers covering the closed octagon
    let spacing = 0.55 * chart_radius;
    let mut centers = vec![Point::raw(model.clone(), DVector::from_vec(vec![0.0, 0.0, 1.0]))];
    let mut r = spacing;
    while r < circumradius + 0.3 * chart_radius {
        let count = ((2.0 * std::f64::consts::PI * r.sinh() / spacing).ceil() as usize).max(6);
        for k in 0..count {
            let phi = 2.0 * std::f64::consts::PI * (k as f64) / (count as f64);
            let p = Point::raw(
                model.clone(),
                DVector::from_vec(vec![r.sinh() * phi.cos(), r.sinh() * phi.sin(), r.cosh()]),
            );
            // keep centers whose ball meets the closed octagon
            if lattice.distance_to_domain(&p) <= chart_radius * 0.98 {
                centers.push(p);
            }
        }
        r += spacing;
    }
    let translates = lattice.group_ball(2.0 * circumradius + chart_radius + 0.3);
    let translates = translates
        .into_iter()
        .map(|(word, so21, psl2)| {
            let base_image = apply_so21(&so21, &centers[0]);
            let _ = &base_image;
            TranslateData {
                word,
                base_image: apply_so21(&so21, &Point::raw(model.clone(), DVector::from_vec(vec![0.0, 0.0, 1.0]))),
                so21,
                psl2,
            }
        })
        .collect();
    let mut partition =
        Partition { centers, radius: chart_radius, translates, cover_multiplicity: 0 };
    // measure the covering multiplicity on a sample of the domain
    let mut multiplicity = 0usize;
    for p in lattice.domain_samples(2000) {
        multiplicity = multiplicity.max(partition.active_terms(&p).len());
    }
    partition.cover_multiplicity = multiplicity;
    Ok(partition)
}

pub fn apply_so21(m: &DMatrix<f64>, p: &Point) -> Point {
    Point::raw(p.model.clone(), m * &p.coords)
}

impl Partition {
    /// All (translate index, center index, unnormalized weight) triples
    /// active at x.
    pub fn active_terms(&self, x: &Point) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        let reach = self.radius + 1e-9;
        for (ti, t) in self.translates.iter().enumerate() {
            // quick reject: the whole octagon translate is too far
            if hyper_dist(&t.base_image, x) > reach + 2.6 {
                continue;
            }
            for (ci, c) in self.centers.iter().enumerate() {
                let tc = apply_so21(&t.so21, c);
                let d = hyper_dist(&tc, x);
                if d < self.radius {
                    let w = bump(d / self.radius);
                    if w > 0.0 {
                        out.push((ti, ci, w));
                    }
                }
            }
        }
        out
    }

    /// Normalized weights; the denominator must be positive on the domain.
    pub fn weights(&self, x: &Point) -> Vec<(usize, usize, f64)> {
        let mut terms = self.active_terms(x);
        let total: f64 = terms.iter().map(|(_, _, w)| *w).sum();
        assert!(total > 1e-12, "partition does not cover the point");
        for t in &mut terms {
            t.2 /= total;
        }
        terms
    }
}

fn hyper_dist(p: &Point, q: &Point) -> f64 {
    crate::manifold::distance(p, q).expect("same model")
}

/// The equivariant suspension map.
pub struct FTilde<'a> {
    pub lattice: &'a FuchsianLattice,
    pub partition: &'a Partition,
    pub rho: &'a FiniteAction,
    /// circle coordinates are angles / 2 pi inside `rho`
    pub guard: f64,
}

/// Builds f-tilde for a perturbed action with generator labels a, b, c, d
/// matching the lattice.
pub fn build_f_tilde<'a>(
    lattice: &'a FuchsianLattice,
    partition: &'a Partition,
    rho: &'a FiniteAction,
) -> Result<FTilde<'a>, EquivariantError> {
    if rho.labels() != lattice.base_labels() {
        return Err(EquivariantError::LabelMismatch);
    }
    Ok(FTilde { lattice, partition, rho, guard: std::f64::consts::FRAC_PI_2 })
}

impl<'a> FTilde<'a> {
    /// Applies the perturbed action of a word (in lattice letters) to a
    /// boundary angle.
    fn rho_word(&self, word: &[(usize, bool)], xi: f64) -> f64 {
        let x01 = xi / (2.0 * std::f64::consts::PI);
        let y = self.rho.apply_word(word, x01);
        y * 2.0 * std::f64::consts::PI
    }

    fn rho0_word(&self, word: &[(usize, bool)], xi: f64) -> f64 {
        let g = self.lattice.word_psl2(word);
        boundary_angle_map(&g, xi)
    }

    /// Evaluates f-tilde at a base point and boundary angle.
    pub fn eval(&self, x: &Point, xi: f64) -> Result<SuspensionPoint, EquivariantError> {
        // reduce to the fundamental domain: y = delta x in D
        let (delta_word, delta_so21, y) = self.lattice.reduce(x)?;
        let xi_reduced = self.rho_word(&delta_word, xi);
        let out = self.eval_in_domain(&y, xi_reduced)?;
        // translate back by rho_0-hat(delta^-1)
        let inv = delta_so21.clone().try_inverse().expect("so21");
        let base = apply_so21(&inv, &out.base);
        let fiber = Tangent::raw(base.clone(), &inv * &out.fiber.vector);
        Ok(SuspensionPoint { base, fiber })
    }

    /// The direct formula, valid on a neighborhood of the closed octagon.
    fn eval_in_domain(&self, y: &Point, xi: f64) -> Result<SuspensionPoint, EquivariantError> {
        let terms = self.partition.weights(y);
        let frame = tangent_basis(y);
        let circle = Model::circle();
        let mut atoms: Vec<(f64, Point)> = Vec::with_capacity(terms.len());
        let mut angles: Vec<f64> = Vec::with_capacity(terms.len());
        for (ti, _ci, w) in &terms {
            let t = &self.partition.translates[*ti];
            // xi_j = rho_0(gamma_j) rho(gamma_j^-1) xi
            let inv_word = invert_word(&t.word);
            let moved = self.rho_word(&inv_word, xi);
            let xi_j = self.rho0_word(&t.word, moved);
            let v = vector_toward(y, xi_j);
            let phi = {
                let c = crate::manifold::inner(y, &v.vector, &frame[0]);
                let s = crate::manifold::inner(y, &v.vector, &frame[1]);
                s.atan2(c)
            };
            angles.push(phi);
            atoms.push((
                *w,
                Point::raw(circle.clone(), DVector::from_vec(vec![phi.cos(), phi.sin()])),
            ));
        }
        // guard: circle diameter of the atom set
        let mut diam: f64 = 0.0;
        for i in 0..angles.len() {
            for j in (i + 1)..angles.len() {
                let d = (angles[i] - angles[j]).rem_euclid(2.0 * std::f64::consts::PI);
                diam = diam.max(d.min(2.0 * std::f64::consts::PI - d));
            }
        }
        if diam >= self.guard {
            return Err(EquivariantError::AtomGuard {
                diam,
                x: [y.coords[0], y.coords[1], y.coords[2]],
                xi,
            });
        }
        let mu = WeightedDirac::new(normalize_weights(atoms))?;
        let bar = barycenter::solve(&mu)?;
        let phi = bar.point.coords[1].atan2(bar.point.coords[0]);
        let v = Tangent::raw(y.clone(), &frame[0] * phi.cos() + &frame[1] * phi.sin());
        Ok(SuspensionPoint { base: y.clone(), fiber: v })
    }

    /// Largest fiber-atom diameter over sampled (x, xi); the displacement
    /// sup of the composed words is reported alongside.
    pub fn atom_diameter_report(&self, samples: usize) -> (f64, f64) {
        let mut max_diam: f64 = 0.0;
        let mut max_disp: f64 = 0.0;
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..samples {
            let y = self.lattice.random_domain_point(next(), next());
            let xi = 2.0 * std::f64::consts::PI * next();
            let terms = self.partition.weights(&y);
            let mut angles = Vec::new();
            for (ti, _, _) in &terms {
                let t = &self.partition.translates[*ti];
                let inv_word = invert_word(&t.word);
                let moved = self.rho_word(&inv_word, xi);
                let xi_j = self.rho0_word(&t.word, moved);
                angles.push(xi_j);
                let d = (xi_j - xi).rem_euclid(2.0 * std::f64::consts::PI);
                max_disp = max_disp.max(d.min(2.0 * std::f64::consts::PI - d));
            }
            for i in 0..angles.len() {
                for j in (i + 1)..angles.len() {
                    let d = (angles[i] - angles[j]).rem_euclid(2.0 * std::f64::consts::PI);
                    max_diam = max_diam.max(d.min(2.0 * std::f64::consts::PI - d));
                }
            }
        }
        (max_diam, max_disp)
    }
}

pub fn invert_word(word: &[(usize, bool)]) -> Vec<(usize, bool)> {
    word.iter().rev().map(|(i, inv)| (*i, !*inv)).collect()
}

fn normalize_weights(mut atoms: Vec<(f64, Point)>) -> Vec<(f64, Point)> {
    let total: f64 = atoms.iter().map(|(w, _)| *w).sum();
    for a in &mut atoms {
        a.0 /= total;
    }
    // exact unit sum for the constructor invariant; adjust the largest
    // weight so the correction cannot push a tiny weight negative
    let imax = atoms
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    atoms.swap(0, imax);
    let tail: f64 = atoms[1..].iter().map(|(w, _)| *w).sum();
    atoms[0].0 = 1.0 - tail;
    atoms
}

/// sup over a grid in B_R(x) of the fiber distance between f-tilde(y, xi)
/// and the center-stable section pi_y^-1(eta), eta = pi_x(f-tilde(x, xi)).
pub fn leaf_proximity_report(
    ft: &FTilde,
    x: &Point,
    xi: f64,
    radius: f64,
    grid: usize,
) -> Result<f64, EquivariantError> {
    let at_x = ft.eval(x, xi)?;
    let eta = at_x.boundary_angle();
    let frame = tangent_basis(x);
    let mut sup: f64 = 0.0;
    for i in 0..grid.max(1) {
        for j in 0..grid.max(1) {
            let (rr, phi) = (
                radius * ((i as f64 + 0.5) / grid as f64),
                2.0 * std::f64::consts::PI * (j as f64) / grid as f64,
            );
            let dir = &frame[0] * (rr * phi.cos()) + &frame[1] * (rr * phi.sin());
            let y = crate::manifold::exp_map(x, &Tangent::raw(x.clone(), dir))
                .expect("exp on H2");
            let fy = ft.eval(&y, xi)?;
            let section = vector_toward(&y, eta);
            let d = fiber_angle_distance(&fy.fiber, &section);
            sup = sup.max(d);
        }
    }
    Ok(sup)
}

fn fiber_angle_distance(u: &Tangent, v: &Tangent) -> f64 {
    // chord form: full precision near zero, unlike acos of the inner product
    let diff = Tangent::raw(u.base.clone(), &u.vector - &v.vector);
    2.0 * (0.5 * diff.norm()).clamp(-1.0, 1.0).asin()
}

/// Grassmannian tilt between the tangent of y -> f-tilde(y, xi) and the
/// tangent of the center-stable section through the same point, at x.
/// Returns (tilt, per-sample budget) where the budget combines the measured
/// weight-gradient term and the leaf-field variation over the atom spread.
pub fn tangent_tilt_report(
    ft: &FTilde,
    x: &Point,
    xi: f64,
) -> Result<(f64, f64), EquivariantError> {
    let at_x = ft.eval(x, xi)?;
    let eta = at_x.boundary_angle();
    let frame = tangent_basis(x);
    let h = 1e-3;

    // graph tangent: central differences of y -> f-tilde(y, xi) in R^6
    let mut graph = Vec::new();
    for e in frame.iter().take(2) {
        let yp = crate::manifold::exp_map(x, &Tangent::raw(x.clone(), e * h)).unwrap();
        let ym = crate::manifold::exp_map(x, &Tangent::raw(x.clone(), e * (-h))).unwrap();
        let fp = ft.eval(&yp, xi)?;
        let fm = ft.eval(&ym, xi)?;
        let du = (&yp.coords - &ym.coords) / (2.0 * h);
        let dv = (&fp.fiber.vector - &fm.fiber.vector) / (2.0 * h);
        graph.push(stack6(&du, &dv));
    }

    // leaf tangent: closed form of the Busemann section v_eta(y)
    let n = DVector::from_vec(vec![eta.cos(), eta.sin(), 1.0]);
    let pairing = |p: &DVector<f64>, q: &DVector<f64>| p[0] * q[0] + p[1] * q[1] - p[2] * q[2];
    let yn = pairing(&x.coords, &n);
    let mut leaf = Vec::new();
    for e in frame.iter().take(2) {
        let dalpha = pairing(e, &n) / (yn * yn);
        let dv = &n * dalpha - e;
        leaf.push(stack6(e, &dv));
    }

    let tilt = grassmann_angle(&graph, &leaf, &x.coords);

    // budget: measured weight-gradient term + leaf-field variation
    let terms = ft.partition.weights(x);
    let mut grad_term = 0.0;
    let mut max_atom_angle: f64 = 0.0;
    for (k, (ti, ci, w0)) in terms.iter().enumerate() {
        let _ = (k, w0);
        // displacement of this atom from the barycenter's boundary point
        let t = &ft.partition.translates[*ti];
        let inv_word = invert_word(&t.word);
        let moved = ft.rho_word(&inv_word, xi);
        let xi_j = ft.rho0_word(&t.word, moved);
        let datom = {
            let d = (xi_j - eta).rem_euclid(2.0 * std::f64::consts::PI);
            d.min(2.0 * std::f64::consts::PI - d)
        };
        max_atom_angle = max_atom_angle.max(datom);
        // numeric gradient of the normalized weight in the base point
        let mut gnorm2 = 0.0;
        for e in frame.iter().take(2) {
            let yp = crate::manifold::exp_map(x, &Tangent::raw(x.clone(), e * h)).unwrap();
            let ym = crate::manifold::exp_map(x, &Tangent::raw(x.clone(), e * (-h))).unwrap();
            let wp = weight_of(ft, &yp, *ti, *ci);
            let wm = weight_of(ft, &ym, *ti, *ci);
            let g = (wp - wm) / (2.0 * h);
            gnorm2 += g * g;
        }
        grad_term += gnorm2.sqrt() * datom;
    }
    // leaf-field variation: |D_y v_xi' - D_y v_eta| over the atom spread is
    // bounded by the field's angular Lipschitz constant at x
    let k_leaf = leaf_field_lipschitz(x, eta, max_atom_angle.max(1e-6));
    let budget = grad_term + k_leaf * max_atom_angle;
    Ok((tilt, budget))
}

fn weight_of(ft: &FTilde, y: &Point, ti: usize, ci: usize) -> f64 {
    let terms = ft.partition.active_terms(y);
    let total: f64 = terms.iter().map(|(_, _, w)| *w).sum();
    terms
        .iter()
        .find(|(a, b, _)| *a == ti && *b == ci)
        .map(|(_, _, w)| w / total)
        .unwrap_or(0.0)
}

/// Angular Lipschitz modulus of xi -> D_y v_xi at x over an angle spread.
fn leaf_field_lipschitz(x: &Point, eta: f64, spread: f64) -> f64 {
    let frame = tangent_basis(x);
    let d_section = |angle: f64| -> Vec<DVector<f64>> {
        let n = DVector::from_vec(vec![angle.cos(), angle.sin(), 1.0]);
        let yn = x.coords[0] * n[0] + x.coords[1] * n[1] - x.coords[2] * n[2];
        frame
            .iter()
            .take(2)
            .map(|e| {
                let dalpha = (e[0] * n[0] + e[1] * n[1] - e[2] * n[2]) / (yn * yn);
                &n * dalpha - e
            })
            .collect()
    };
    let a = d_section(eta + spread);
    let b = d_section(eta - spread);
    let mut diff: f64 = 0.0;
    for (u, v) in a.iter().zip(&b) {
        diff = diff.max((u - v).norm());
    }
    diff / (2.0 * spread)
}

fn stack6(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(6);
    v.rows_mut(0, 3).copy_from(a);
    v.rows_mut(3, 3).copy_from(b);
    v
}

/// Largest principal angle between two 2-planes of R^6 under the Sasaki
/// product (Minkowski on each slot, positive on the physical subspaces).
fn grassmann_angle(a: &[DVector<f64>], b: &[DVector<f64>], _base: &DVector<f64>) -> f64 {
    let ip = |u: &DVector<f64>, v: &DVector<f64>| {
        u[0] * v[0] + u[1] * v[1] - u[2] * v[2] + u[3] * v[3] + u[4] * v[4] - u[5] * v[5]
    };
    let orth = |vecs: &[DVector<f64>]| -> Vec<DVector<f64>> {
        let mut out: Vec<DVector<f64>> = Vec::new();
        for v in vecs {
            let mut w = v.clone();
            for u in &out {
                w -= u * ip(u, &w);
            }
            let n = ip(&w, &w).max(0.0).sqrt();
            if n > 1e-12 {
                out.push(w / n);
            }
        }
        out
    };
    let ba = orth(a);
    let bb = orth(b);
    let mut gram = DMatrix::<f64>::zeros(ba.len(), bb.len());
    for (i, u) in ba.iter().enumerate() {
        for (j, v) in bb.iter().enumerate() {
            gram[(i, j)] = ip(u, v);
        }
    }
    let svals = gram.svd(false, false).singular_values;
    let cmin = svals.iter().cloned().fold(f64::INFINITY, f64::min).clamp(-1.0, 1.0);
    cmin.acos()
}

/// Builds the perturbed action h^-1 rho_0 h for a trigonometric displacement
/// of the given amplitude (in circle [0,1) units).
pub fn conjugated_perturbation(
    lattice: &FuchsianLattice,
    amplitude: f64,
    phase: f64,
) -> FiniteAction {
    let h = CircleMap::Trig {
        terms: vec![(amplitude, 1, phase), (0.4 * amplitude, 2, 1.7 * phase + 0.3)],
        inverse: false,
    };
    lattice.boundary_action().conjugated(&h)
}

/// sup-distance between the two maps over sampled (x, xi), measured in the
/// fiber angle.
pub fn f_tilde_distance(
    a: &FTilde,
    b: &FTilde,
    samples: usize,
) -> Result<f64, EquivariantError> {
    let mut sup: f64 = 0.0;
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..samples {
        let x = a.lattice.random_domain_point(next(), next());
        let xi = 2.0 * std::f64::consts::PI * next();
        let fa = a.eval(&x, xi)?;
        let fb = b.eval(&x, xi)?;
        sup = sup.max(fiber_angle_distance(&fa.fiber, &fb.fiber));
    }
    Ok(sup)
}
