use super::*;
use crate::manifold::sampling::*;
use crate::manifold::{exp_map, log_map, tangent_basis, Isometry, Model, Point, Tangent};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_measure<R: Rng>(
    model: &Model,
    n: usize,
    radius: f64,
    rng: &mut R,
) -> (WeightedDirac, Point) {
    let center = random_point(model, rng);
    let atoms: Vec<Point> =
        (0..n).map(|_| random_point_near(&center, radius, rng)).collect();
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    // renormalize exactly
    let tail: f64 = w[1..].iter().sum();
    w[0] = 1.0 - tail;
    (WeightedDirac::new(w.into_iter().zip(atoms).collect()).unwrap(), center)
}

#[test]
fn energy_trivial_cases() {
    let model = Model::h2();
    let p = base_point(&model);
    let mu = WeightedDirac::new(vec![(1.0, p.clone())]).unwrap();
    assert_eq!(energy(&mu, &p).unwrap(), 0.0);

    let line = Model::Euclidean { dim: 1 };
    let z0 = Point::new(line.clone(), DVector::from_vec(vec![0.0])).unwrap();
    let z1 = Point::new(line.clone(), DVector::from_vec(vec![2.0])).unwrap();
    let mu = WeightedDirac::new(vec![(0.5, z0), (0.5, z1)]).unwrap();
    let x = Point::new(line, DVector::from_vec(vec![1.0])).unwrap();
    assert!((energy(&mu, &x).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn energy_matches_kahan_resummation() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let model = Model::h2();
    let (mu, center) = random_measure(&model, 12, 0.3, &mut rng);
    let x = random_point_near(&center, 0.2, &mut rng);
    let e = energy(&mu, &x).unwrap();
    // Kahan-compensated summation in reverse order as an independent oracle
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for (w, z) in mu.atoms.iter().rev() {
        let d = crate::manifold::distance(&x, z).unwrap();
        let term = 0.5 * w * d * d;
        let y = term - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    assert!((e - sum).abs() <= 1e-14 * sum.max(1.0));
}

#[test]
fn gradient_flat_identity_and_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let model = Model::Euclidean { dim: 3 };
    let (mu, center) = random_measure(&model, 5, 0.5, &mut rng);
    let x = random_point_near(&center, 0.4, &mut rng);
    let g = gradient(&mu, &x).unwrap();
    let mean: DVector<f64> = mu
        .atoms
        .iter()
        .map(|(w, z)| &z.coords * *w)
        .fold(DVector::zeros(3), |a, b| a + b);
    assert!((&g.vector - (&x.coords - mean)).norm() < 1e-12);

    // finite differences of the energy across models
    for model in [Model::h2(), Model::Sphere { dim: 2, radius: 1.0 }, Model::Spd { n: 2 }] {
        let (mu, center) = random_measure(&model, 4, 0.25, &mut rng);
        let x = random_point_near(&center, 0.2, &mut rng);
        let g = gradient(&mu, &x).unwrap();
        let w = random_unit_tangent(&x, &mut rng);
        let h = 1e-5;
        let ep = energy(&mu, &exp_map(&x, &w.scale(h)).unwrap()).unwrap();
        let em = energy(&mu, &exp_map(&x, &w.scale(-h)).unwrap()).unwrap();
        let fd = (ep - em) / (2.0 * h);
        let dir = g.inner(&w);
        assert!((fd - dir).abs() / dir.abs().max(1e-3) < 1e-6, "{model:?}");
    }
}

#[test]
fn gradient_vanishes_at_barycenter() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (mu, _) = random_measure(&Model::h2(), 5, 0.3, &mut rng);
    let bar = solve(&mu).unwrap();
    assert!(gradient(&mu, &bar.point).unwrap().norm() < 1e-10);
}

#[test]
fn hessian_q_flat_is_identity_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let model = Model::Euclidean { dim: 3 };
    let (mu, center) = random_measure(&model, 5, 0.8, &mut rng);
    let q = hessian_q(&mu, &center).unwrap();
    assert!(q.distance_to_identity() < 1e-9);
}

#[test]
fn hessian_q_matches_gradient_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for model in [Model::h2(), Model::Sphere { dim: 2, radius: 1.0 }, Model::Spd { n: 2 }] {
        let (mu, center) = random_measure(&model, 4, 0.25, &mut rng);
        let x = random_point_near(&center, 0.15, &mut rng);
        let q = hessian_q(&mu, &x).unwrap();
        let u = random_unit_tangent(&x, &mut rng);
        let h = 1e-5;
        let xp = exp_map(&x, &u.scale(h)).unwrap();
        let xm = exp_map(&x, &u.scale(-h)).unwrap();
        let gp = gradient(&mu, &xp).unwrap();
        let gm = gradient(&mu, &xm).unwrap();
        let gp_x = crate::manifold::parallel_transport(&xp, &x, &gp).unwrap();
        let gm_x = crate::manifold::parallel_transport(&xm, &x, &gm).unwrap();
        let fd = gp_x.add(&gm_x.scale(-1.0)).scale(1.0 / (2.0 * h));
        let qu = q.apply(&u);
        let rel = fd.add(&qu.scale(-1.0)).norm() / qu.norm().max(1e-3);
        assert!(rel < 1e-5, "{model:?}: rel {rel}");
    }
}

/// |Q - I| <= 2 max{a^2,b^2} diam^2 at the barycenter, and under the
/// 1/(3 max{a,b}) guard min-eig(Q) >= 3/4 and |Q^-1| <= 4/3.
#[test]
fn q_identity_bound_and_positivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for model in
        [Model::h2(), Model::Sphere { dim: 2, radius: 1.0 }, Model::Spd { n: 2 }, Model::h2xh2()]
    {
        let a = model.curv_lower_a();
        let b = model.curv_upper_b();
        let coeff = 2.0 * (a * a).max(b * b);
        for _ in 0..20 {
            let r = rng.gen_range(0.01..model.barycenter_guard_radius() * 0.99);
            let (mu, _) = random_measure(&model, 4, r / 2.0, &mut rng);
            let diam = mu.diameter();
            let bar = solve(&mu).unwrap();
            let q = hessian_q(&mu, &bar.point).unwrap();
            assert!(
                q.distance_to_identity() <= coeff * diam * diam + 1e-6,
                "{model:?}: |Q-I| = {} vs {}",
                q.distance_to_identity(),
                coeff * diam * diam
            );
            assert!(q.min_eigenvalue() >= 0.75 - 1e-9, "{model:?}");
            assert!(q.inverse_norm() <= 4.0 / 3.0 + 1e-9, "{model:?}");
        }
    }
}

#[test]
fn solve_trivial_and_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let model = Model::h2();
    let z = random_point(&model, &mut rng);
    let mu = WeightedDirac::new(vec![(1.0, z.clone())]).unwrap();
    let bar = solve(&mu).unwrap();
    assert!(crate::manifold::distance(&bar.point, &z).unwrap() < 1e-12);

    // two equal weights symmetric about the geodesic midpoint
    let p = random_point(&model, &mut rng);
    let v = random_tangent(&p, 0.15, &mut rng);
    let z1 = exp_map(&p, &v).unwrap();
    let z2 = exp_map(&p, &v.scale(-1.0)).unwrap();
    let mu = WeightedDirac::new(vec![(0.5, z1), (0.5, z2)]).unwrap();
    let bar = solve(&mu).unwrap();
    assert!(crate::manifold::distance(&bar.point, &p).unwrap() < 1e-9);
}

/// Brute-force oracle: grid search over a geodesic ball, two refinement
/// levels, for an S^2 triangle with weights (0.2, 0.3, 0.5).
#[test]
fn solve_sphere_triangle_matches_grid_search() {
    let model = Model::Sphere { dim: 2, radius: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let c = random_point(&model, &mut rng);
    let atoms: Vec<Point> =
        (0..3).map(|_| random_point_near(&c, 0.1, &mut rng)).collect();
    let mu = WeightedDirac::new(vec![
        (0.2, atoms[0].clone()),
        (0.3, atoms[1].clone()),
        (0.5, atoms[2].clone()),
    ])
    .unwrap();
    assert!(mu.diameter() <= 0.2 + 1e-12);
    let bar = solve(&mu).unwrap();

    // oracle: energy minimization on successively finer polar grids
    let basis = tangent_basis(&c);
    let mut best = c.clone();
    let mut best_e = energy(&mu, &best).unwrap();
    let mut center = c.clone();
    let mut span = 0.25;
    for _level in 0..8 {
        let n = 24;
        for i in -n..=n {
            for j in -n..=n {
                let v = &basis[0] * (span * i as f64 / n as f64)
                    + &basis[1] * (span * j as f64 / n as f64);
                let v = crate::manifold::project_tangent(&center, &v);
                let cand = exp_map(&center, &v).unwrap();
                let e = energy(&mu, &cand).unwrap();
                if e < best_e {
                    best_e = e;
                    best = cand;
                }
            }
        }
        center = best.clone();
        span /= 8.0;
    }
    let d = crate::manifold::distance(&bar.point, &best).unwrap();
    assert!(d < 1e-6, "solver vs grid oracle: {d}");
}

#[test]
fn solve_guard_violation_errors() {
    let model = Model::Sphere { dim: 2, radius: 1.0 };
    let p = base_point(&model);
    let q = exp_map(
        &p,
        &Tangent::new(p.clone(), DVector::from_vec(vec![0.0, 1.0, 0.0])).unwrap(),
    )
    .unwrap();
    let mu = WeightedDirac::new(vec![(0.5, p), (0.5, q)]).unwrap();
    assert!(matches!(solve(&mu), Err(BaryError::GuardViolated { .. })));
}

/// Remark-style containment: supp in B_eps(x) implies bar in B_{2 eps}(x).
#[test]
fn barycenter_containment_two_eps() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    for model in [Model::h2(), Model::Spd { n: 2 }, Model::h2xh2()] {
        for _ in 0..30 {
            let x = random_point(&model, &mut rng);
            let eps = rng.gen_range(0.02..0.15);
            let n = rng.gen_range(2..6);
            let atoms: Vec<Point> =
                (0..n).map(|_| random_point_near(&x, eps, &mut rng)).collect();
            let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|t| *t /= s);
            let tail: f64 = w[1..].iter().sum();
            w[0] = 1.0 - tail;
            let mu = WeightedDirac::new(w.into_iter().zip(atoms).collect()).unwrap();
            let bar = solve(&mu).unwrap();
            let d = crate::manifold::distance(&bar.point, &x).unwrap();
            assert!(d <= 2.0 * eps + 1e-9, "{model:?}: {d} vs {}", 2.0 * eps);
        }
    }
}

/// Newton iterates decrease the energy monotonically after the first
/// accepted step (checked by instrumenting a manual run).
#[test]
fn newton_energy_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for model in [Model::h2(), Model::Sphere { dim: 2, radius: 1.0 }] {
        let (mu, _) = random_measure(&model, 5, 0.15, &mut rng);
        let mut x = mu.atoms[0].1.clone();
        let mut last = energy(&mu, &x).unwrap();
        for _ in 0..30 {
            let g = gradient(&mu, &x).unwrap();
            if g.norm() < 1e-12 {
                break;
            }
            let q = hessian_q(&mu, &x).unwrap();
            let dir =
                if q.min_eigenvalue() >= 0.25 { q.solve(&g).scale(-1.0) } else { g.scale(-1.0) };
            let mut t = 1.0;
            loop {
                let cand = exp_map(&x, &dir.scale(t)).unwrap();
                let e = energy(&mu, &cand).unwrap();
                if e <= last + 1e-4 * t * g.inner(&dir) {
                    assert!(e <= last + 1e-15, "energy increased: {e} > {last}");
                    last = e;
                    x = cand;
                    break;
                }
                t *= 0.5;
                assert!(t > 1e-12);
            }
        }
    }
}

fn fd_step_tangent(bar0: &Point, barp: &Point, barm: &Point, h: f64) -> Tangent {
    let lp = log_map(bar0, barp).unwrap();
    let lm = log_map(bar0, barm).unwrap();
    lp.add(&lm.scale(-1.0)).scale(1.0 / (2.0 * h))
}

#[test]
fn d_bar_d_weight_flat_and_resolve_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    // flat: D_w bar = z_i - bar
    let model = Model::Euclidean { dim: 2 };
    let (mu, _) = random_measure(&model, 4, 0.5, &mut rng);
    let bar = solve(&mu).unwrap();
    let t = d_bar_d_weight(&mu, 2, &bar).unwrap();
    let expect = &mu.atoms[2].1.coords - &bar.point.coords;
    assert!((&t.vector - expect).norm() < 1e-9);

    // re-solve oracle on curved models
    for model in [Model::h2(), Model::Sphere { dim: 2, radius: 1.0 }, Model::Spd { n: 2 }] {
        let (mu, _) = random_measure(&model, 4, 0.12, &mut rng);
        let bar = solve(&mu).unwrap();
        let i = 1;
        let t = d_bar_d_weight(&mu, i, &bar).unwrap();
        let h = 1e-5;
        let perturb = |delta: f64| {
            let mut atoms = mu.atoms.clone();
            atoms[i].0 += delta;
            let m = WeightedDirac { atoms };
            solve_relaxed(&m, 1e-12, 300).unwrap().point
        };
        let fd = fd_step_tangent(&bar.point, &perturb(h), &perturb(-h), h);
        let rel = fd.add(&t.scale(-1.0)).norm() / t.norm().max(1e-4);
        assert!(rel < 1e-4, "{model:?}: rel {rel}");
    }
}

#[test]
fn d_bar_d_point_flat_and_resolve_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    // flat: D_z bar = w_i I
    let model = Model::Euclidean { dim: 2 };
    let (mu, _) = random_measure(&model, 4, 0.5, &mut rng);
    let bar = solve(&mu).unwrap();
    let map = d_bar_d_point(&mu, 1, &bar).unwrap();
    let want = DMatrix::<f64>::identity(2, 2) * mu.atoms[1].0;
    assert!((&map.matrix - want).norm() < 1e-7);

    for model in [Model::h2(), Model::Spd { n: 2 }] {
        let (mu, _) = random_measure(&model, 4, 0.12, &mut rng);
        let bar = solve(&mu).unwrap();
        let i = 0;
        let map = d_bar_d_point(&mu, i, &bar).unwrap();
        let u = random_unit_tangent(&mu.atoms[i].1, &mut rng);
        let got = map.apply(&u);
        let h = 1e-5;
        let perturb = |delta: f64| {
            let mut atoms = mu.atoms.clone();
            atoms[i].1 = exp_map(&atoms[i].1, &u.scale(delta)).unwrap();
            let m = WeightedDirac { atoms };
            solve_relaxed(&m, 1e-12, 300).unwrap().point
        };
        let fd = fd_step_tangent(&bar.point, &perturb(h), &perturb(-h), h);
        let rel = fd.add(&got.scale(-1.0)).norm() / got.norm().max(1e-4);
        assert!(rel < 1e-4, "{model:?}: rel {rel}");
    }
}

/// | D_z bar - Q^-1 o w_i || | <= 16 w_i max{a^2,b^2} diam^2 on random H^2
/// instances.
#[test]
fn d_bar_d_point_transport_closeness() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let model = Model::h2();
    for _ in 0..25 {
        let r = rng.gen_range(0.02..0.3);
        let (mu, _) = random_measure(&model, 4, r / 2.0, &mut rng);
        let diam = mu.diameter();
        let bar = solve(&mu).unwrap();
        for i in 0..mu.atoms.len() {
            let dmap = d_bar_d_point(&mu, i, &bar).unwrap();
            let cmp = transport_comparison_map(&mu, i, &bar).unwrap();
            let diff = (&dmap.matrix - &cmp.matrix).svd(false, false).singular_values.amax();
            let bound = 16.0 * mu.atoms[i].0 * diam * diam;
            assert!(diff <= bound + 1e-6, "diff {diff} vs bound {bound} (diam {diam})");
        }
    }
}

fn const_scale_family(
    model: &Model,
    mu: &WeightedDirac,
    eps0: f64,
) -> MetricFamily {
    let w: Vec<f64> = mu.atoms.iter().map(|(w, _)| *w).collect();
    let z: Vec<Point> = mu.atoms.iter().map(|(_, z)| z.clone()).collect();
    let nf = match model {
        Model::Product { factors } => factors.len(),
        _ => 1,
    };
    MetricFamily {
        base: model.clone(),
        scales: Box::new(move |_s| vec![1.0; nf]),
        weights: Box::new(move |_s| w.clone()),
        points: Box::new(move |_s| z.clone()),
        eps0,
    }
}

#[test]
fn d_bar_d_metric_constant_family_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let model = Model::h2();
    let (mu, _) = random_measure(&model, 4, 0.1, &mut rng);
    let fam = const_scale_family(&model, &mu, 0.5);
    let d = d_bar_d_metric(&fam, 0.0).unwrap();
    assert!(d.norm() < 1e-8, "{}", d.norm());
}

/// Scale families are homotheties: the two terms of the metric-derivative
/// formula cancel, and the re-solve finite difference is zero too.
#[test]
fn d_bar_d_metric_scale_family_cancels_and_matches_resolve() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for model in [Model::h2(), Model::Sphere { dim: 2, radius: 1.0 }] {
        let (mu, _) = random_measure(&model, 4, 0.1, &mut rng);
        let w: Vec<f64> = mu.atoms.iter().map(|(w, _)| *w).collect();
        let z: Vec<Point> = mu.atoms.iter().map(|(_, z)| z.clone()).collect();
        let fam = MetricFamily {
            base: model.clone(),
            scales: Box::new(|s| vec![1.0 + 0.4 * s]),
            weights: Box::new(move |_s| w.clone()),
            points: Box::new(move |_s| z.clone()),
            eps0: 0.5,
        };
        let d = d_bar_d_metric(&fam, 0.0).unwrap();
        // individual terms are O(0.4 * diam) but the sum cancels
        assert!(d.norm() < 1e-6, "{model:?}: |formula| = {}", d.norm());

        // re-solve finite difference across s: the barycenter does not move
        let h = 1e-4;
        let bar0 = solve_relaxed(&fam.measure_at(0.0).unwrap(), 1e-12, 300).unwrap();
        let barp = solve_relaxed(&fam.measure_at(h).unwrap(), 1e-12, 300).unwrap();
        let fd = crate::manifold::distance(&bar0.point, &barp.point).unwrap() / h;
        assert!(fd < 1e-6, "{model:?}: re-solve moved at rate {fd}");
    }
}

#[test]
fn d_bar_d_metric_symmetric_two_atoms_on_sphere() {
    // sphere-radius family, symmetric two-atom configuration: midpoint static
    let model = Model::Sphere { dim: 2, radius: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let p = random_point(&model, &mut rng);
    let v = random_tangent(&p, 0.12, &mut rng);
    let z1 = exp_map(&p, &v).unwrap();
    let z2 = exp_map(&p, &v.scale(-1.0)).unwrap();
    let fam = MetricFamily {
        base: model,
        scales: Box::new(|s| vec![(1.0 + s).max(0.1)]),
        weights: Box::new(|_s| vec![0.5, 0.5]),
        points: Box::new(move |_s| vec![z1.clone(), z2.clone()]),
        eps0: 0.4,
    };
    let d = d_bar_d_metric(&fam, 0.0).unwrap();
    assert!(d.norm() < 1e-6);
}

#[test]
fn d_bar_total_flat_straight_lines_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let model = Model::Euclidean { dim: 2 };
    let (mu, _) = random_measure(&model, 4, 0.5, &mut rng);
    let w: Vec<f64> = mu.atoms.iter().map(|(w, _)| *w).collect();
    let z0: Vec<DVector<f64>> = mu.atoms.iter().map(|(_, z)| z.coords.clone()).collect();
    let vels: Vec<DVector<f64>> = (0..4)
        .map(|_| DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]))
        .collect();
    let model2 = model.clone();
    let z0c = z0.clone();
    let velsc = vels.clone();
    let fam = MetricFamily {
        base: model.clone(),
        scales: Box::new(|_s| vec![1.0]),
        weights: Box::new(move |_s| w.clone()),
        points: Box::new(move |s| {
            z0c.iter()
                .zip(&velsc)
                .map(|(z, v)| Point::raw(model2.clone(), z + v * s))
                .collect()
        }),
        eps0: 0.3,
    };
    let total = d_bar_total(&fam, 0.0).unwrap();
    let expect: DVector<f64> = mu
        .atoms
        .iter()
        .zip(&vels)
        .map(|((w, _), v)| v * *w)
        .fold(DVector::zeros(2), |a, b| a + b);
    assert!((&total.derivative.vector - expect).norm() < 1e-8);
    // flat bound is zero; the deviation is pure finite-difference noise
    assert!(total.deviation <= total.bound + 1e-7);
}

#[test]
fn d_bar_total_matches_resolve_fd_and_certificate() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for model in [Model::h2(), Model::Spd { n: 2 }, Model::h2xh2()] {
        for _ in 0..6 {
            let (mu, _) = random_measure(&model, 4, 0.08, &mut rng);
            let fam = moving_family(&model, &mu, &mut rng);
            let total = d_bar_total(&fam, 0.0).unwrap();

            // re-solve finite difference
            let h = 1e-4;
            let bar0 = solve_relaxed(&fam.measure_at(0.0).unwrap(), 1e-12, 300).unwrap();
            let barp = solve_relaxed(&fam.measure_at(h).unwrap(), 1e-12, 300).unwrap();
            let barm = solve_relaxed(&fam.measure_at(-h).unwrap(), 1e-12, 300).unwrap();
            let fd = fd_step_tangent(&bar0.point, &barp.point, &barm.point, h);
            let rel = fd.add(&total.derivative.scale(-1.0)).norm()
                / total.derivative.norm().max(1e-3);
            assert!(rel < 1e-4, "{model:?}: rel {rel}");

            // the transport-term certificate
            assert!(
                total.deviation <= total.bound + 1e-8,
                "{model:?}: deviation {} vs bound {}",
                total.deviation,
                total.bound
            );
        }
    }
}

/// A family with moving atoms and weights on a fixed metric.
fn moving_family<R: Rng>(model: &Model, mu: &WeightedDirac, rng: &mut R) -> MetricFamily {
    let n = mu.atoms.len();
    let w0: Vec<f64> = mu.atoms.iter().map(|(w, _)| *w).collect();
    let mut wdot: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mean: f64 = wdot.iter().sum::<f64>() / n as f64;
    wdot.iter_mut().for_each(|x| *x -= mean); // keep sum = 1
    let z0: Vec<Point> = mu.atoms.iter().map(|(_, z)| z.clone()).collect();
    let vels: Vec<Tangent> = z0.iter().map(|z| random_tangent(z, 0.8, rng)).collect();
    let nf = match model {
        Model::Product { factors } => factors.len(),
        _ => 1,
    };
    MetricFamily {
        base: model.clone(),
        scales: Box::new(move |_s| vec![1.0; nf]),
        weights: Box::new(move |s| w0.iter().zip(&wdot).map(|(w, d)| w + d * s).collect()),
        points: Box::new(move |s| {
            z0.iter()
                .zip(&vels)
                .map(|(z, v)| exp_map(z, &v.scale(s)).unwrap())
                .collect()
        }),
        eps0: 0.05,
    }
}

/// Graph-tilt trend: atoms riding a common (non-Killing) vector-field flow;
/// the angle between the barycenter-graph tangent and the field direction at
/// the barycenter tends to zero with the support radius.
#[test]
fn graph_tilt_decreases_with_support_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(38);
    let model = Model::h2();
    let center = random_point(&model, &mut rng);
    let far = random_point_near(&center, 1.5, &mut rng);
    let dirs: Vec<Tangent> =
        (0..4).map(|_| random_unit_tangent(&center, &mut rng)).collect();
    let weights = vec![0.1, 0.2, 0.3, 0.4];

    // non-Killing field: V(x) = log_x(far) scaled by distance to far
    let field = move |x: &Point| -> Tangent {
        let l = log_map(x, &far).unwrap();
        l.scale(0.3 * l.norm())
    };

    let mut tilts = Vec::new();
    for &r in &[0.2, 0.1, 0.05, 0.025] {
        let atoms: Vec<Point> = dirs
            .iter()
            .map(|u| exp_map(&center, &u.scale(r / 2.0)).unwrap())
            .collect();
        let w = weights.clone();
        let atoms_c = atoms.clone();
        let fieldc = field.clone();
        let fam = MetricFamily {
            base: model.clone(),
            scales: Box::new(|_s| vec![1.0]),
            weights: Box::new(move |_s| w.clone()),
            points: Box::new(move |s| {
                atoms_c
                    .iter()
                    .map(|z| exp_map(z, &fieldc(z).scale(s)).unwrap())
                    .collect()
            }),
            eps0: 0.05,
        };
        let total = d_bar_total(&fam, 0.0).unwrap();
        let bar = total.derivative.base.clone();
        let leaf_dir = field(&bar);
        // angle between the lines (1, D bar) and (1, V(bar)) in R x T_bar
        let g11 = 1.0 + total.derivative.inner(&total.derivative);
        let g22 = 1.0 + leaf_dir.inner(&leaf_dir);
        let g12 = 1.0 + total.derivative.inner(&leaf_dir);
        let cos = (g12 / (g11 * g22).sqrt()).clamp(-1.0, 1.0);
        tilts.push(cos.acos());
    }
    for k in 1..tilts.len() {
        assert!(
            tilts[k] <= tilts[k - 1] * 1.05 + 1e-9,
            "tilt not decreasing: {tilts:?}"
        );
    }
    assert!(tilts[3] < tilts[0].max(1e-12), "no overall decrease: {tilts:?}");
    assert!(tilts[3] < 0.02, "final tilt too large: {tilts:?}");
}

#[test]
fn affine_equivariance_identity_h2_spd() {
    let mut rng = ChaCha8Rng::seed_from_u64(39);
    let model = Model::h2();
    let (mu, _) = random_measure(&model, 4, 0.15, &mut rng);
    assert!(affine_equivariance_check(&mu, &Isometry::Identity).unwrap() < 1e-12);

    // random SO(2,1)^+ isometry: rotation * boost * rotation
    let rot = |t: f64| {
        DMatrix::from_row_slice(
            3,
            3,
            &[t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0],
        )
    };
    let boost = |l: f64| {
        DMatrix::from_row_slice(
            3,
            3,
            &[l.cosh(), 0.0, l.sinh(), 0.0, 1.0, 0.0, l.sinh(), 0.0, l.cosh()],
        )
    };
    for _ in 0..5 {
        let m = rot(rng.gen_range(0.0..6.28))
            * boost(rng.gen_range(-1.0..1.0))
            * rot(rng.gen_range(0.0..6.28));
        let (mu, _) = random_measure(&model, 4, 0.12, &mut rng);
        let res = affine_equivariance_check(&mu, &Isometry::Hyperbolic { mat: m }).unwrap();
        assert!(res < 1e-8, "H2 residual {res}");
    }

    // SPD(2): conjugation by g in SL(2, R)
    let model = Model::Spd { n: 2 };
    for _ in 0..5 {
        let mut g = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0f64..1.0));
        let mut det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        if det.abs() < 0.2 {
            g[(0, 0)] += 1.0;
            det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        }
        let scale = det.abs().sqrt();
        g /= scale;
        if det < 0.0 {
            g.column_mut(0).neg_mut();
        }
        let (mu, _) = random_measure(&model, 4, 0.12, &mut rng);
        let res = affine_equivariance_check(&mu, &Isometry::SpdCongruence { g }).unwrap();
        assert!(res < 1e-8, "SPD residual {res}");
    }
}

#[test]
fn weighted_dirac_validation() {
    let model = Model::h2();
    let p = base_point(&model);
    assert!(matches!(WeightedDirac::new(vec![]), Err(BaryError::EmptyMeasure)));
    assert!(matches!(
        WeightedDirac::new(vec![(0.7, p.clone())]),
        Err(BaryError::BadWeights { .. })
    ));
    let q = base_point(&Model::Spd { n: 2 });
    assert!(matches!(
        WeightedDirac::new(vec![(0.5, p), (0.5, q)]),
        Err(BaryError::ModelMismatch)
    ));
}
