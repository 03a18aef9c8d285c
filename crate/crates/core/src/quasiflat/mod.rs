//! Numerical coarse geometry in H^2 x H^2: biLipschitz flats, flat fitting
//! through ideal endpoints, windowed Hausdorff shadowing, and coarse
//! intersections along a shared singular geodesic.

use crate::manifold::{distance, Model, Point};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuasiflatError {
    #[error("sampled window is degenerate (all images in a small ball)")]
    DegenerateSample,
    #[error("flats do not come within {0} of each other")]
    DisjointAtScale(f64),
}

/// A complete geodesic of H^2, by its ideal endpoint angles; the unit-speed
/// parameterization has t = 0 at the point closest to the chart center.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeodesicH2 {
    pub alpha: f64,
    pub beta: f64,
}

impl GeodesicH2 {
    pub fn new(alpha: f64, beta: f64) -> GeodesicH2 {
        GeodesicH2 {
            alpha: alpha.rem_euclid(2.0 * std::f64::consts::PI),
            beta: beta.rem_euclid(2.0 * std::f64::consts::PI),
        }
    }

    fn nulls(&self) -> (DVector<f64>, DVector<f64>, f64) {
        let na = DVector::from_vec(vec![self.alpha.cos(), self.alpha.sin(), 1.0]);
        let nb = DVector::from_vec(vec![self.beta.cos(), self.beta.sin(), 1.0]);
        // <na, nb>_M = cos(alpha - beta) - 1 <= 0
        let ip = na[0] * nb[0] + na[1] * nb[1] - na[2] * nb[2];
        (na, nb, ip)
    }

    /// Hyperboloid point at arclength t (toward alpha as t -> +inf).
    pub fn point_at(&self, t: f64) -> DVector<f64> {
        let (na, nb, ip) = self.nulls();
        let scale = (-2.0 * ip).sqrt();
        (na * t.exp() + nb * (-t).exp()) / scale
    }

    /// Unit-speed velocity at parameter t.
    pub fn velocity_at(&self, t: f64) -> DVector<f64> {
        let (na, nb, ip) = self.nulls();
        let scale = (-2.0 * ip).sqrt();
        (na * t.exp() - nb * (-t).exp()) / scale
    }

    /// Unit normal at parameter t (Minkowski cross of position and velocity).
    pub fn normal_at(&self, t: f64) -> DVector<f64> {
        let p = self.point_at(t);
        let v = self.velocity_at(t);
        DVector::from_vec(vec![
            p[1] * v[2] - p[2] * v[1],
            p[2] * v[0] - p[0] * v[2],
            -(p[0] * v[1] - p[1] * v[0]),
        ])
    }

    /// Distance from a hyperboloid point to the geodesic:
    /// sinh d = |<p, u>| / |u| for the spacelike pole u.
    pub fn distance_to(&self, p: &DVector<f64>) -> f64 {
        let (na, nb, _) = self.nulls();
        let u = DVector::from_vec(vec![
            na[1] * nb[2] - na[2] * nb[1],
            na[2] * nb[0] - na[0] * nb[2],
            -(na[0] * nb[1] - na[1] * nb[0]),
        ]);
        let uu = (u[0] * u[0] + u[1] * u[1] - u[2] * u[2]).max(1e-300);
        let pu = p[0] * u[0] + p[1] * u[1] - p[2] * u[2];
        (pu / uu.sqrt()).abs().asinh()
    }

    /// Foot parameter of the orthogonal projection of p.
    pub fn project_parameter(&self, p: &DVector<f64>) -> f64 {
        let (na, nb, _) = self.nulls();
        let pa = -(p[0] * na[0] + p[1] * na[1] - p[2] * na[2]);
        let pb = -(p[0] * nb[0] + p[1] * nb[1] - p[2] * nb[2]);
        (0.5 * (pb / pa).ln()).clamp(-1e6, 1e6)
    }
}

/// A genuine flat: the product of two geodesics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProductFlat {
    pub l1: GeodesicH2,
    pub l2: GeodesicH2,
}

impl ProductFlat {
    pub fn point_at(&self, s: f64, t: f64) -> Point {
        let a = self.l1.point_at(s);
        let b = self.l2.point_at(t);
        Point::raw(
            Model::h2xh2(),
            DVector::from_vec(vec![a[0], a[1], a[2], b[0], b[1], b[2]]),
        )
    }

    /// Distance from a product point to the (infinite) flat.
    pub fn distance_to(&self, p: &Point) -> f64 {
        let p1 = p.coords.rows(0, 3).into_owned();
        let p2 = p.coords.rows(3, 3).into_owned();
        let d1 = self.l1.distance_to(&p1);
        let d2 = self.l2.distance_to(&p2);
        (d1 * d1 + d2 * d2).sqrt()
    }
}

/// A sampled quasi-flat: a parameter grid, its images, and the measured
/// biLipschitz constant over adjacent grid pairs.
pub struct SampledFlat {
    pub params: Vec<(f64, f64)>,
    pub images: Vec<Point>,
    pub grid: usize,
    pub window: f64,
    pub bilipschitz_estimate: f64,
}

/// A product-of-perturbed-geodesics embedding of R^2: the first factor is
/// displaced off its geodesic by a transverse sine wave whose slope is
/// calibrated to the requested L; deterministic per seed.
pub fn make_bilipschitz_flat(l: f64, seed: u64, window: f64, grid: usize) -> SampledFlat {
    assert!(l >= 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a1 = rng.gen_range(0.0..6.28);
    let l1 = GeodesicH2::new(a1, a1 + rng.gen_range(2.0..4.0));
    let a2 = rng.gen_range(0.0..6.28);
    let l2 = GeodesicH2::new(a2, a2 + rng.gen_range(2.0..4.0));
    let omega = rng.gen_range(1.6..2.4);
    let phase = rng.gen_range(0.0..6.28);
    let amplitude = (l * l - 1.0).sqrt() / omega;

    let mut params = Vec::with_capacity(grid * grid);
    let mut images = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let s = window * (2.0 * i as f64 / (grid - 1) as f64 - 1.0);
            let t = window * (2.0 * j as f64 / (grid - 1) as f64 - 1.0);
            params.push((s, t));
            // offset the first factor along its normal by amplitude sin(w t)
            let offset = amplitude * (omega * t + phase).sin();
            let base = l1.point_at(s);
            let normal = l1.normal_at(s);
            let p1 = &base * offset.cosh() + normal * offset.sinh();
            let p2 = l2.point_at(t);
            images.push(Point::raw(
                Model::h2xh2(),
                DVector::from_vec(vec![p1[0], p1[1], p1[2], p2[0], p2[1], p2[2]]),
            ));
        }
    }
    let mut flat = SampledFlat {
        params,
        images,
        grid,
        window,
        bilipschitz_estimate: 1.0,
    };
    flat.bilipschitz_estimate = flat.measure_bilipschitz();
    flat
}

impl SampledFlat {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.grid + j
    }

    /// max over adjacent grid pairs of the two-sided dilation.
    pub fn measure_bilipschitz(&self) -> f64 {
        let mut worst: f64 = 1.0;
        for i in 0..self.grid {
            for j in 0..self.grid {
                for (di, dj) in [(0usize, 1usize), (1, 0)] {
                    let (i2, j2) = (i + di, j + dj);
                    if i2 >= self.grid || j2 >= self.grid {
                        continue;
                    }
                    let a = self.idx(i, j);
                    let b = self.idx(i2, j2);
                    let dp = {
                        let (s1, t1) = self.params[a];
                        let (s2, t2) = self.params[b];
                        ((s1 - s2).powi(2) + (t1 - t2).powi(2)).sqrt()
                    };
                    let dx = distance(&self.images[a], &self.images[b]).unwrap();
                    worst = worst.max(dx / dp).max(dp / dx);
                }
            }
        }
        worst
    }

    /// The flat-characterization defect: sup over sampled pairs of
    /// | d_X(F(p), F(q)) - |p - q| |, over the half-window pair set. Beyond
    /// chart radius ~5 the hyperboloid coordinates (~e^10 at the window edge)
    /// no longer carry the transverse geodesic coordinate to 1e-9.
    pub fn isometry_defect(&self) -> f64 {
        let step = (self.grid / 16).max(1);
        let half = 0.5 * self.window;
        let mut worst: f64 = 0.0;
        let mut picks = Vec::new();
        for i in (0..self.grid).step_by(step) {
            for j in (0..self.grid).step_by(step) {
                let idx = self.idx(i, j);
                let (s, t) = self.params[idx];
                if s.abs() <= half && t.abs() <= half {
                    picks.push(idx);
                }
            }
        }
        for (k, &a) in picks.iter().enumerate() {
            for &b in picks.iter().skip(k + 1) {
                let dp = {
                    let (s1, t1) = self.params[a];
                    let (s2, t2) = self.params[b];
                    ((s1 - s2).powi(2) + (t1 - t2).powi(2)).sqrt()
                };
                let dx = distance(&self.images[a], &self.images[b]).unwrap();
                worst = worst.max((dx - dp).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlatFit {
    pub flat: ProductFlat,
    /// sup over samples of the distance to the fitted flat
    pub hausdorff_sample_to_flat: f64,
    /// sup over the fitted window grid of the distance to the sample set
    pub hausdorff_flat_to_sample: f64,
    pub window: f64,
    pub grid: usize,
}

impl FlatFit {
    pub fn hausdorff(&self) -> f64 {
        self.hausdorff_sample_to_flat.max(self.hausdorff_flat_to_sample)
    }
}

/// Fits a genuine flat to a sampled quasi-flat: ideal endpoints from the
/// far-window samples, then coordinate descent on the four endpoint angles
/// against the one-sided sampled Hausdorff distance.
pub fn fit_flat(q: &SampledFlat) -> Result<FlatFit, QuasiflatError> {
    let n = q.grid;
    // spread check
    let d00 = &q.images[0];
    let spread = q
        .images
        .iter()
        .map(|p| distance(p, d00).unwrap())
        .fold(0.0f64, f64::max);
    if spread < 1.0 {
        return Err(QuasiflatError::DegenerateSample);
    }
    // first factor endpoints from s = +-max rows; second factor from t edges
    let ang = |points: Vec<&Point>, factor: usize| -> f64 {
        let mut x = 0.0;
        let mut y = 0.0;
        for p in points {
            let c = p.coords.rows(3 * factor, 3);
            let norm = (c[0] * c[0] + c[1] * c[1]).sqrt();
            x += c[0] / norm;
            y += c[1] / norm;
        }
        y.atan2(x)
    };
    let row = |i: usize| -> Vec<&Point> { (0..n).map(|j| &q.images[i * n + j]).collect() };
    let col = |j: usize| -> Vec<&Point> { (0..n).map(|i| &q.images[i * n + j]).collect() };
    let mut alpha1 = ang(row(n - 1), 0);
    let mut beta1 = ang(row(0), 0);
    let mut alpha2 = ang(col(n - 1), 1);
    let mut beta2 = ang(col(0), 1);

    let one_sided = |a1: f64, b1: f64, a2: f64, b2: f64| -> f64 {
        let flat = ProductFlat { l1: GeodesicH2::new(a1, b1), l2: GeodesicH2::new(a2, b2) };
        q.images.iter().map(|p| flat.distance_to(p)).fold(0.0f64, f64::max)
    };
    // coordinate descent with golden refinement per angle
    for _sweep in 0..3 {
        for k in 0..4 {
            let eval = |v: f64| match k {
                0 => one_sided(v, beta1, alpha2, beta2),
                1 => one_sided(alpha1, v, alpha2, beta2),
                2 => one_sided(alpha1, beta1, v, beta2),
                _ => one_sided(alpha1, beta1, alpha2, v),
            };
            let center = match k {
                0 => alpha1,
                1 => beta1,
                2 => alpha2,
                _ => beta2,
            };
            let (mut lo, mut hi) = (center - 0.05, center + 0.05);
            for _ in 0..40 {
                let m1 = lo + 0.381966 * (hi - lo);
                let m2 = hi - 0.381966 * (hi - lo);
                if eval(m1) <= eval(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let v = 0.5 * (lo + hi);
            match k {
                0 => alpha1 = v,
                1 => beta1 = v,
                2 => alpha2 = v,
                _ => beta2 = v,
            }
        }
    }
    let flat = ProductFlat {
        l1: GeodesicH2::new(alpha1, beta1),
        l2: GeodesicH2::new(alpha2, beta2),
    };
    let sample_to_flat = q.images.iter().map(|p| flat.distance_to(p)).fold(0.0f64, f64::max);

    // reverse side: fitted window grid against the full sample set, with
    // the sample-grid resolution subtracted (the discrete cloud cannot be
    // closer to a surface than half its own mesh)
    let mesh = q.window * 2.0 / (q.grid - 1) as f64;
    let resolution = 0.75 * mesh * q.bilipschitz_estimate;
    let mut flat_to_sample: f64 = 0.0;
    let m = 24;
    for i in 0..=m {
        for j in 0..=m {
            let s = q.window * (2.0 * i as f64 / m as f64 - 1.0);
            let t = q.window * (2.0 * j as f64 / m as f64 - 1.0);
            let fp = flat.point_at(s, t);
            let dmin = q
                .images
                .iter()
                .map(|p| distance(&fp, p).unwrap())
                .fold(f64::INFINITY, f64::min);
            flat_to_sample = flat_to_sample.max((dmin - resolution).max(0.0));
        }
    }
    Ok(FlatFit {
        flat,
        hausdorff_sample_to_flat: sample_to_flat,
        hausdorff_flat_to_sample: flat_to_sample,
        window: q.window,
        grid: q.grid,
    })
}

/// A singular geodesic l x {point}: the model of the coarse intersection of
/// two flats sharing their first factor.
#[derive(Debug, Clone, Serialize)]
pub struct SingularGeodesic {
    pub line: GeodesicH2,
    pub point2: [f64; 3],
}

impl SingularGeodesic {
    pub fn distance_to(&self, p: &Point) -> f64 {
        let p1 = p.coords.rows(0, 3).into_owned();
        let p2 = p.coords.rows(3, 3).into_owned();
        let d1 = self.line.distance_to(&p1);
        let d2 = {
            let dx = p2[0] - self.point2[0];
            let dy = p2[1] - self.point2[1];
            let dz = p2[2] - self.point2[2];
            let u = ((dx * dx + dy * dy - dz * dz) * 0.5).max(0.0);
            (u * (u + 2.0)).sqrt().asinh()
        };
        (d1 * d1 + d2 * d2).sqrt()
    }

    /// Windowed Hausdorff distance to another singular geodesic, comparing
    /// arclength-matched parameterizations.
    pub fn window_distance(&self, other: &SingularGeodesic, window: f64, steps: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..=steps {
            let t = window * (2.0 * k as f64 / steps as f64 - 1.0);
            let a = self.line.point_at(t);
            let p = Point::raw(
                Model::h2xh2(),
                DVector::from_vec(vec![a[0], a[1], a[2], self.point2[0], self.point2[1], self.point2[2]]),
            );
            worst = worst.max(other.distance_to(&p));
        }
        worst
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoarseIntersectionReport {
    pub radius: f64,
    pub degenerate: bool,
    pub fitted: Option<SingularGeodesic>,
    /// windowed Hausdorff distance of the fit to the true shared singular
    /// geodesic, when one is supplied
    pub distance_to_reference: Option<f64>,
    /// sup over intersection samples of the distance to the reference,
    /// against the 3R containment bound
    pub sample_containment_sup: f64,
}

/// Samples the R-tube intersection of two flats sharing their first-factor
/// geodesic and fits a singular geodesic to it.
pub fn coarse_intersection_probe(
    f1: &ProductFlat,
    f2: &ProductFlat,
    radius: f64,
    window: f64,
    reference: Option<&SingularGeodesic>,
) -> Result<CoarseIntersectionReport, QuasiflatError> {
    // degenerate case: the two flats coincide
    let same = (f1.l1.alpha - f2.l1.alpha).abs() < 1e-12
        && (f1.l1.beta - f2.l1.beta).abs() < 1e-12
        && (f1.l2.alpha - f2.l2.alpha).abs() < 1e-12
        && (f1.l2.beta - f2.l2.beta).abs() < 1e-12;
    if same {
        return Ok(CoarseIntersectionReport {
            radius,
            degenerate: true,
            fitted: None,
            distance_to_reference: None,
            sample_containment_sup: 0.0,
        });
    }
    // collect tube-intersection samples from both flats
    let mut samples: Vec<Point> = Vec::new();
    let n = 60;
    for (host, guest) in [(f1, f2), (f2, f1)] {
        for i in 0..=n {
            for j in 0..=n {
                let s = window * (2.0 * i as f64 / n as f64 - 1.0);
                let t = 3.0 * radius * (2.0 * j as f64 / n as f64 - 1.0);
                let p = host.point_at(s, host_param_offset(host, guest) + t);
                if guest.distance_to(&p) <= radius {
                    samples.push(p);
                }
            }
        }
    }
    if samples.is_empty() {
        return Err(QuasiflatError::DisjointAtScale(radius));
    }
    // fit: first-factor line from far samples, second-factor point from the
    // barycenter of the factor-2 components
    let mut xplus = (0.0, 0.0);
    let mut xminus = (0.0, 0.0);
    let mut tmin = f64::INFINITY;
    let mut tmax = f64::NEG_INFINITY;
    for p in &samples {
        let p1 = p.coords.rows(0, 3).into_owned();
        let t = f1.l1.project_parameter(&p1);
        tmin = tmin.min(t);
        tmax = tmax.max(t);
    }
    for p in &samples {
        let p1 = p.coords.rows(0, 3).into_owned();
        let t = f1.l1.project_parameter(&p1);
        let norm = (p1[0] * p1[0] + p1[1] * p1[1]).sqrt().max(1e-12);
        if t > tmax - 0.2 * (tmax - tmin) {
            xplus = (xplus.0 + p1[0] / norm, xplus.1 + p1[1] / norm);
        }
        if t < tmin + 0.2 * (tmax - tmin) {
            xminus = (xminus.0 + p1[0] / norm, xminus.1 + p1[1] / norm);
        }
    }
    let alpha = xplus.1.atan2(xplus.0);
    let beta = xminus.1.atan2(xminus.0);
    // factor-2 center: Karcher mean of the factor-2 components
    let h2 = Model::h2();
    let atoms: Vec<(f64, Point)> = samples
        .iter()
        .step_by((samples.len() / 64).max(1))
        .map(|p| (1.0, Point::raw(h2.clone(), p.coords.rows(3, 3).into_owned())))
        .collect();
    let w = 1.0 / atoms.len() as f64;
    let atoms: Vec<(f64, Point)> = atoms.into_iter().map(|(_, p)| (w, p)).collect();
    let atoms = exact_unit_weights(atoms);
    let mu = crate::barycenter::WeightedDirac::new(atoms).map_err(|_| {
        QuasiflatError::DegenerateSample
    })?;
    let center = crate::barycenter::solve_relaxed(&mu, 1e-9, 200)
        .map_err(|_| QuasiflatError::DegenerateSample)?
        .point;
    // refine to the Chebyshev center of the factor-2 sample lens: the mean
    // drifts with the lens shape, the minimax center sits at the crossing
    let center = chebyshev_center_h2(&center, &mu);
    let fitted = SingularGeodesic {
        line: GeodesicH2::new(alpha, beta),
        point2: [center.coords[0], center.coords[1], center.coords[2]],
    };
    let (dref, containment) = if let Some(r) = reference {
        let d = fitted.window_distance(r, window, 80);
        let sup = samples.iter().map(|p| r.distance_to(p)).fold(0.0f64, f64::max);
        (Some(d), sup)
    } else {
        (None, 0.0)
    };
    Ok(CoarseIntersectionReport {
        radius,
        degenerate: false,
        fitted: Some(fitted),
        distance_to_reference: dref,
        sample_containment_sup: containment,
    })
}

/// The parameter of the host's second factor nearest to the guest's second
/// factor (the crossing region).
fn host_param_offset(host: &ProductFlat, guest: &ProductFlat) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for k in -400..=400 {
        let t = k as f64 * 0.05;
        let p = host.l2.point_at(t);
        let d = guest.l2.distance_to(&p);
        if d < best.0 {
            best = (d, t);
        }
    }
    best.1
}

fn exact_unit_weights(mut atoms: Vec<(f64, Point)>) -> Vec<(f64, Point)> {
    let tail: f64 = atoms[1..].iter().map(|(w, _)| *w).sum();
    atoms[0].0 = 1.0 - tail;
    atoms
}

/// Pattern-search minimization of the maximum distance to the atom set.
fn chebyshev_center_h2(start: &Point, mu: &crate::barycenter::WeightedDirac) -> Point {
    let cost = |p: &Point| -> f64 {
        mu.atoms
            .iter()
            .map(|(_, z)| distance(p, z).unwrap())
            .fold(0.0f64, f64::max)
    };
    let mut x = start.clone();
    let mut best = cost(&x);
    let basis = crate::manifold::tangent_basis(&x);
    let mut step = 0.5;
    for _ in 0..60 {
        let mut improved = false;
        let frame = if step < 0.49 { crate::manifold::tangent_basis(&x) } else { basis.clone() };
        for e in &frame {
            for sign in [1.0, -1.0] {
                let cand = crate::manifold::exp_map(
                    &x,
                    &crate::manifold::Tangent::raw(x.clone(), e * (sign * step)),
                )
                .unwrap();
                let c = cost(&cand);
                if c < best {
                    best = c;
                    x = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-4 {
                break;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests;
