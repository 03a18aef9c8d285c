//! Charted model Riemannian manifolds.
//!
//! Five model families are supported: flat space, round spheres, the
//! hyperbolic plane in the hyperboloid chart, SPD(n) with the affine-invariant
//! metric, and finite products of these. Each model carries explicit curvature
//! bounds `[-a^2, b^2]` and closed-form exp / log / distance / parallel
//! transport. First and second derivatives of the distance function are
//! exposed as tangent-space operators; the mixed second derivative is realized
//! by central differences of the gradient.

mod curvature;
mod isometry;
mod ops;
pub mod sampling;
mod spd;

pub use curvature::sectional_curvature;
pub use isometry::Isometry;
pub use spd::{spd_exp, spd_log, spd_sqrt_and_inv_sqrt, sym_basis};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Constraint tolerance for chart coordinates.
pub const CHART_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("points live on different models")]
    ModelMismatch,
    #[error("tangent vector is based at a different point")]
    BaseMismatch,
    #[error("chart constraint violated by {defect:.3e}: {what}")]
    ConstraintViolation { what: &'static str, defect: f64 },
    #[error("geodesic between the points is not unique (d = {dist:.6})")]
    BeyondInjectivityRadius { dist: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("comparison radius exceeded: d = {dist:.6} >= {radius:.6}")]
    ComparisonRadiusExceeded { dist: f64, radius: f64 },
}

/// A model Riemannian manifold with explicit curvature bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    /// Flat R^k.
    Euclidean { dim: usize },
    /// Round sphere S^k of the given radius, embedded in R^{k+1}.
    Sphere { dim: usize, radius: f64 },
    /// Hyperbolic plane of curvature -a^2 in the hyperboloid chart
    /// { x1^2 + x2^2 - x3^2 = -1/a^2, x3 > 0 } of Minkowski R^{2,1}.
    Hyperbolic { a: f64 },
    /// Symmetric positive-definite n x n matrices with the affine-invariant
    /// metric <U,V>_P = tr(P^-1 U P^-1 V); chart is the full matrix, row-major.
    Spd { n: usize },
    /// Riemannian product; chart coordinates are concatenated.
    Product { factors: Vec<Model> },
}

impl Model {
    /// Standard curvature -1 hyperbolic plane.
    pub fn h2() -> Model {
        Model::Hyperbolic { a: 1.0 }
    }

    /// H^2 x H^2, both factors of curvature -1.
    pub fn h2xh2() -> Model {
        Model::Product { factors: vec![Model::h2(), Model::h2()] }
    }

    /// Unit round circle (the fiber model of T^1 H^2).
    pub fn circle() -> Model {
        Model::Sphere { dim: 1, radius: 1.0 }
    }

    /// Length of the chart coordinate vector.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Model::Euclidean { dim } => *dim,
            Model::Sphere { dim, .. } => dim + 1,
            Model::Hyperbolic { .. } => 3,
            Model::Spd { n } => n * n,
            Model::Product { factors } => factors.iter().map(|f| f.ambient_dim()).sum(),
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            Model::Euclidean { dim } => *dim,
            Model::Sphere { dim, .. } => *dim,
            Model::Hyperbolic { .. } => 2,
            Model::Spd { n } => n * (n + 1) / 2,
            Model::Product { factors } => factors.iter().map(|f| f.dim()).sum(),
        }
    }

    /// Lower curvature bound parameter a, so that kappa >= -a^2.
    ///
    /// For SPD(n), n <= 3, the affine-invariant metric has sectional
    /// curvatures in [-1/2, 0]; sampling (see `sectional_curvature` tests)
    /// shows the bound is attained, so a = sqrt(1/2).
    pub fn curv_lower_a(&self) -> f64 {
        match self {
            Model::Euclidean { .. } => 0.0,
            Model::Sphere { .. } => 0.0,
            Model::Hyperbolic { a } => *a,
            Model::Spd { .. } => std::f64::consts::FRAC_1_SQRT_2,
            Model::Product { factors } => {
                factors.iter().map(|f| f.curv_lower_a()).fold(0.0, f64::max)
            }
        }
    }

    /// Upper curvature bound parameter b, so that kappa <= b^2.
    pub fn curv_upper_b(&self) -> f64 {
        match self {
            Model::Euclidean { .. } => 0.0,
            // S^1 carries no 2-planes; it is flat for comparison purposes.
            Model::Sphere { dim, .. } if *dim < 2 => 0.0,
            Model::Sphere { radius, .. } => 1.0 / radius,
            Model::Hyperbolic { .. } => 0.0,
            Model::Spd { .. } => 0.0,
            Model::Product { factors } => {
                factors.iter().map(|f| f.curv_upper_b()).fold(0.0, f64::max)
            }
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self {
            Model::Euclidean { .. } => f64::INFINITY,
            Model::Sphere { radius, .. } => std::f64::consts::PI * radius,
            Model::Hyperbolic { .. } => f64::INFINITY,
            Model::Spd { .. } => f64::INFINITY,
            Model::Product { factors } => factors
                .iter()
                .map(|f| f.injectivity_radius())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Convexity radius floor min{ pi/(2b), injectivity/2 }.
    pub fn convexity_radius(&self) -> f64 {
        let b = self.curv_upper_b();
        let half_inj = 0.5 * self.injectivity_radius();
        if b == 0.0 {
            half_inj
        } else {
            (std::f64::consts::FRAC_PI_2 / b).min(half_inj)
        }
    }

    /// The strictest barycenter support radius used throughout:
    /// min{ pi/(4b), injectivity/2, 1/(3 max{a,b}) }.
    pub fn barycenter_guard_radius(&self) -> f64 {
        let a = self.curv_lower_a();
        let b = self.curv_upper_b();
        let mut r = 0.5 * self.injectivity_radius();
        if b > 0.0 {
            r = r.min(std::f64::consts::FRAC_PI_4 / b);
        }
        let m = a.max(b);
        if m > 0.0 {
            r = r.min(1.0 / (3.0 * m));
        }
        r
    }

    /// Checks the chart constraint, returning the defect.
    pub fn point_defect(&self, coords: &DVector<f64>) -> f64 {
        match self {
            Model::Euclidean { .. } => 0.0,
            Model::Sphere { radius, .. } => (coords.norm() - radius).abs(),
            Model::Hyperbolic { a } => {
                let q = coords[0] * coords[0] + coords[1] * coords[1] - coords[2] * coords[2];
                let mut d = (q + 1.0 / (a * a)).abs();
                if coords[2] <= 0.0 {
                    d += 1.0;
                }
                d
            }
            Model::Spd { n } => {
                let m = mat_from(coords, *n);
                let sym_defect = (&m - m.transpose()).norm();
                let eig = m.clone().symmetric_eigen().eigenvalues;
                let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
                sym_defect + (-min_eig).max(0.0)
            }
            Model::Product { factors } => {
                let mut off = 0;
                let mut d: f64 = 0.0;
                for f in factors {
                    let k = f.ambient_dim();
                    d = d.max(f.point_defect(&coords.rows(off, k).into_owned()));
                    off += k;
                }
                d
            }
        }
    }

    /// Checks the tangent constraint at `p`, returning the defect.
    pub fn tangent_defect(&self, p: &DVector<f64>, v: &DVector<f64>) -> f64 {
        match self {
            Model::Euclidean { .. } => 0.0,
            Model::Sphere { .. } => p.dot(v).abs() / p.norm(),
            Model::Hyperbolic { .. } => (p[0] * v[0] + p[1] * v[1] - p[2] * v[2]).abs(),
            Model::Spd { n } => {
                let m = mat_from(v, *n);
                (&m - m.transpose()).norm()
            }
            Model::Product { factors } => {
                let mut off = 0;
                let mut d: f64 = 0.0;
                for f in factors {
                    let k = f.ambient_dim();
                    d = d.max(f.tangent_defect(
                        &p.rows(off, k).into_owned(),
                        &v.rows(off, k).into_owned(),
                    ));
                    off += k;
                }
                d
            }
        }
    }
}

/// A point on a model manifold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Point {
    pub model: Model,
    pub coords: DVector<f64>,
}

impl Point {
    pub fn new(model: Model, coords: DVector<f64>) -> Result<Point, GeomError> {
        let defect = model.point_defect(&coords);
        if defect > CHART_TOL * 10.0 {
            return Err(GeomError::ConstraintViolation { what: "point chart", defect });
        }
        Ok(Point { model, coords })
    }

    /// Constructs without checking; for internal use where the constraint
    /// holds by closed form.
    pub(crate) fn raw(model: Model, coords: DVector<f64>) -> Point {
        Point { model, coords }
    }

    pub fn same_model(&self, other: &Point) -> bool {
        self.model == other.model
    }

    /// Factor ranges of a product chart.
    pub fn factor(&self, i: usize) -> Point {
        match &self.model {
            Model::Product { factors } => {
                let off: usize = factors[..i].iter().map(|f| f.ambient_dim()).sum();
                let k = factors[i].ambient_dim();
                Point::raw(factors[i].clone(), self.coords.rows(off, k).into_owned())
            }
            _ => panic!("factor() on a non-product model"),
        }
    }
}

/// A tangent vector with explicit base point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tangent {
    pub base: Point,
    pub vector: DVector<f64>,
}

impl Tangent {
    pub fn new(base: Point, vector: DVector<f64>) -> Result<Tangent, GeomError> {
        let defect = base.model.tangent_defect(&base.coords, &vector);
        if defect > CHART_TOL * 10.0 {
            return Err(GeomError::ConstraintViolation { what: "tangent space", defect });
        }
        Ok(Tangent { base, vector })
    }

    pub(crate) fn raw(base: Point, vector: DVector<f64>) -> Tangent {
        Tangent { base, vector }
    }

    pub fn zero(base: Point) -> Tangent {
        let n = base.model.ambient_dim();
        Tangent { base, vector: DVector::zeros(n) }
    }

    pub fn scale(&self, s: f64) -> Tangent {
        Tangent { base: self.base.clone(), vector: &self.vector * s }
    }

    pub fn add(&self, other: &Tangent) -> Tangent {
        Tangent { base: self.base.clone(), vector: &self.vector + &other.vector }
    }

    pub fn norm(&self) -> f64 {
        // the Lorentzian ambient form can dip below zero at roundoff level
        ops::inner(&self.base, &self.vector, &self.vector).max(0.0).sqrt()
    }

    pub fn inner(&self, other: &Tangent) -> f64 {
        ops::inner(&self.base, &self.vector, &other.vector)
    }
}

/// A symmetric operator on the tangent space at `base`, expressed in the
/// orthonormal frame `basis`.
#[derive(Debug, Clone)]
pub struct SymOperator {
    pub base: Point,
    pub basis: Vec<DVector<f64>>,
    pub matrix: DMatrix<f64>,
}

impl SymOperator {
    pub fn identity(base: &Point) -> SymOperator {
        let basis = ops::tangent_basis(base);
        let d = basis.len();
        SymOperator { base: base.clone(), basis, matrix: DMatrix::identity(d, d) }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> =
            self.matrix.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Operator norm of `self - I`.
    pub fn distance_to_identity(&self) -> f64 {
        let d = self.matrix.nrows();
        let m = &self.matrix - DMatrix::<f64>::identity(d, d);
        m.symmetric_eigen().eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max)
    }

    /// Operator norm of the inverse (reciprocal of the smallest |eigenvalue|).
    pub fn inverse_norm(&self) -> f64 {
        1.0 / self.eigenvalues().iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min)
    }

    /// Coordinates of a tangent vector in the frame.
    pub fn to_frame(&self, t: &Tangent) -> DVector<f64> {
        DVector::from_iterator(
            self.basis.len(),
            self.basis.iter().map(|e| ops::inner(&self.base, &t.vector, e)),
        )
    }

    pub fn from_frame(&self, x: &DVector<f64>) -> Tangent {
        let mut v = DVector::zeros(self.base.model.ambient_dim());
        for (c, e) in x.iter().zip(self.basis.iter()) {
            v += e * *c;
        }
        Tangent::raw(self.base.clone(), v)
    }

    pub fn apply(&self, t: &Tangent) -> Tangent {
        self.from_frame(&(&self.matrix * self.to_frame(t)))
    }

    pub fn solve(&self, t: &Tangent) -> Tangent {
        let x = self
            .matrix
            .clone()
            .lu()
            .solve(&self.to_frame(t))
            .expect("symmetric operator is singular");
        self.from_frame(&x)
    }
}

pub(crate) fn mat_from(coords: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, coords.as_slice())
}

pub(crate) fn mat_to(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows() * m.ncols(), m.transpose().iter().cloned())
}

pub use ops::{
    distance, exp_map, grad_distance, hessian_distance, inner, log_map, mixed_hessian_distance,
    parallel_transport, project_tangent, tangent_basis,
};
