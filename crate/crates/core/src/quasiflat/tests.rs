use super::*;

#[test]
fn geodesic_parameterization_is_unit_speed_and_asymptotic() {
    let g = GeodesicH2::new(0.3, 2.6);
    for &t in &[-3.0, -0.5, 0.0, 1.0, 4.0] {
        let p = g.point_at(t);
        // on the hyperboloid
        assert!((p[0] * p[0] + p[1] * p[1] - p[2] * p[2] + 1.0).abs() < 1e-12);
        // unit speed against the chart distance
        let q = g.point_at(t + 0.5);
        let pq = Point::raw(Model::h2(), p.clone());
        let qq = Point::raw(Model::h2(), q.clone());
        assert!((distance(&pq, &qq).unwrap() - 0.5).abs() < 1e-10);
        // distance to the geodesic vanishes on it
        assert!(g.distance_to(&p) < 1e-9);
        // projection recovers the parameter
        assert!((g.project_parameter(&p) - t).abs() < 1e-9);
    }
    // asymptotics: the far point's direction angle converges to alpha
    let p = g.point_at(18.0);
    let ang = p[1].atan2(p[0]).rem_euclid(2.0 * std::f64::consts::PI);
    assert!((ang - 0.3).abs() < 1e-7);
}

#[test]
fn exact_flat_is_isometric_and_fits_itself() {
    let q = make_bilipschitz_flat(1.0, 7, 10.0, 100);
    assert!(q.bilipschitz_estimate <= 1.001, "L-hat = {}", q.bilipschitz_estimate);
    assert!(q.isometry_defect() < 1e-9, "exact flats embed isometrically");
    let fit = fit_flat(&q).unwrap();
    assert!(fit.hausdorff() <= 0.01, "fit distance {} at L = 1", fit.hausdorff());
}

#[test]
fn bilipschitz_estimate_tracks_l_and_monotone() {
    let q = make_bilipschitz_flat(1.05, 7, 10.0, 100);
    assert!(q.bilipschitz_estimate <= 1.06, "L-hat = {}", q.bilipschitz_estimate);
    assert!(q.bilipschitz_estimate > 1.02, "perturbation visible");
    // the perturbed flat is no longer isometric
    assert!(q.isometry_defect() > 1e-3);

    let mut last = 1.0;
    for &l in &[1.01, 1.02, 1.05] {
        let q = make_bilipschitz_flat(l, 7, 10.0, 60);
        assert!(q.bilipschitz_estimate >= last - 1e-9, "monotone in the amplitude");
        last = q.bilipschitz_estimate;
    }
}

#[test]
fn fit_distance_monotone_in_l_and_regression_bound() {
    let mut dists = Vec::new();
    for &l in &[1.0, 1.01, 1.02, 1.05] {
        let q = make_bilipschitz_flat(l, 11, 10.0, 100);
        let fit = fit_flat(&q).unwrap();
        dists.push(fit.hausdorff());
    }
    assert!(dists[0] <= 0.01, "exact flat fit {}", dists[0]);
    for k in 1..dists.len() {
        assert!(
            dists[k] >= dists[k - 1] - 5e-3,
            "shadowing distance not monotone: {dists:?}"
        );
    }
    // recorded regression baseline: the L = 1.02 fit stays within 0.2
    assert!(dists[2] <= 0.2, "L = 1.02 baseline: {}", dists[2]);
}

#[test]
fn degenerate_sample_rejected() {
    let mut q = make_bilipschitz_flat(1.0, 3, 10.0, 24);
    let p0 = q.images[0].clone();
    for p in q.images.iter_mut() {
        *p = p0.clone();
    }
    assert!(matches!(fit_flat(&q), Err(QuasiflatError::DegenerateSample)));
}

fn shared_factor_flats() -> (ProductFlat, ProductFlat, ProductFlat, SingularGeodesic) {
    let l1 = GeodesicH2::new(0.4, 3.1);
    // three second-factor geodesics through a common point (the chart
    // center lies on any geodesic with antipodal endpoints)
    let m2a = GeodesicH2::new(0.0, std::f64::consts::PI);
    let m2b = GeodesicH2::new(1.0, 1.0 + std::f64::consts::PI);
    let m2c = GeodesicH2::new(2.2, 2.2 + std::f64::consts::PI);
    let f1 = ProductFlat { l1, l2: m2a };
    let f2 = ProductFlat { l1, l2: m2b };
    let f3 = ProductFlat { l1, l2: m2c };
    let shared = SingularGeodesic { line: l1, point2: [0.0, 0.0, 1.0] };
    (f1, f2, f3, shared)
}

#[test]
fn coarse_intersection_recovers_the_shared_singular_geodesic() {
    let (f1, f2, _f3, shared) = shared_factor_flats();
    for &r in &[2.0, 4.0, 8.0] {
        let rep = coarse_intersection_probe(&f1, &f2, r, 8.0, Some(&shared)).unwrap();
        assert!(!rep.degenerate);
        // the lemma's containment: N_R(F1) cap N_R(F2) inside N_{3R}(F*)
        assert!(
            rep.sample_containment_sup <= 3.0 * r,
            "containment {} vs 3R = {}",
            rep.sample_containment_sup,
            3.0 * r
        );
        let d = rep.distance_to_reference.unwrap();
        assert!(d <= 3.0 * r, "fitted geodesic distance {d} vs 3R bound");
    }

    // stability across R within a factor of two (floored at the sampling
    // resolution scale 0.05 R)
    let d: Vec<f64> = [2.0, 4.0, 8.0]
        .iter()
        .map(|r| {
            coarse_intersection_probe(&f1, &f2, *r, 8.0, Some(&shared))
                .unwrap()
                .distance_to_reference
                .unwrap()
                .max(0.05 * r)
        })
        .collect();
    for k in 1..d.len() {
        assert!(
            d[k] / d[k - 1] <= 2.0 + 1e-9 && d[k - 1] / d[k] <= 2.0 + 1e-9,
            "unstable across R: {d:?}"
        );
    }
    // and uniformly bounded far below the trivial 3R budget
    assert!(d.iter().all(|v| *v <= 0.5), "not uniformly bounded: {d:?}");
}

#[test]
fn degenerate_equal_flats_flagged() {
    let (f1, _, _, _) = shared_factor_flats();
    let rep = coarse_intersection_probe(&f1, &f1.clone(), 2.0, 8.0, None).unwrap();
    assert!(rep.degenerate);
}

#[test]
fn three_flats_give_parallel_intersections() {
    let (f1, f2, f3, shared) = shared_factor_flats();
    let r = 3.0;
    let s12 = coarse_intersection_probe(&f1, &f2, r, 8.0, Some(&shared))
        .unwrap()
        .fitted
        .unwrap();
    let s13 = coarse_intersection_probe(&f1, &f3, r, 8.0, Some(&shared))
        .unwrap()
        .fitted
        .unwrap();
    // parallelism: bounded windowed Hausdorff distance after matching
    // parameterizations
    let d = s12.window_distance(&s13, 8.0, 100);
    assert!(d < 2.0, "intersections not parallel: {d}");
}

#[test]
fn disjoint_flats_error_at_small_scale() {
    let l1 = GeodesicH2::new(0.4, 3.1);
    let f1 = ProductFlat { l1, l2: GeodesicH2::new(0.0, std::f64::consts::PI) };
    // second factor far away: a geodesic with both endpoints in a small arc
    let far = ProductFlat { l1, l2: GeodesicH2::new(0.01, 0.02) };
    assert!(matches!(
        coarse_intersection_probe(&f1, &far, 0.5, 8.0, None),
        Err(QuasiflatError::DisjointAtScale(_))
    ));
}
