use super::sampling::*;
use super::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn reconstruct(k: &GroupElement, a: &GroupElement, n: &GroupElement) -> GroupElement {
    k.mul(a).mul(n)
}

#[test]
fn iwasawa_fixes_orthogonal_and_triangular() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    // orthogonal input: (g, I, I)
    let g = GroupElement::sl(random_rotation(3, &mut rng)).unwrap();
    let (k, a, n) = iwasawa(&g).unwrap();
    assert!(k.dist(&g) < 1e-12);
    assert!(a.dist_to_identity() < 1e-12);
    assert!(n.dist_to_identity() < 1e-12);

    // unit upper triangular with positive diagonal: k = I, a n read off
    let t = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, -0.5, 0.0, 1.0, 0.3, 0.0, 0.0, 0.5]);
    let g = GroupElement::sl(t.clone()).unwrap();
    let (k, a, n) = iwasawa(&g).unwrap();
    assert!(k.dist_to_identity() < 1e-10);
    for i in 0..3 {
        assert!((a.mats[0][(i, i)] - t[(i, i)]).abs() < 1e-10);
    }
    assert!(reconstruct(&k, &a, &n).dist(&g) < 1e-12);
}

/// Independent modified-Gram-Schmidt oracle for the KAN components.
fn gram_schmidt_kan(g: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = g.nrows();
    let mut q = g.clone();
    let mut r = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let proj = q.column(i).dot(&q.column(j));
            r[(i, j)] = proj;
            let qi = q.column(i).into_owned();
            let mut col = q.column_mut(j);
            col -= qi * proj;
        }
        let norm = q.column(j).norm();
        r[(j, j)] = norm;
        let mut col = q.column_mut(j);
        col /= norm;
    }
    let a = DMatrix::from_diagonal(&r.diagonal());
    let a_inv = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        r.diagonal().iter().map(|d| 1.0 / d),
    ));
    (q, a, a_inv * r)
}

#[test]
fn iwasawa_matches_gram_schmidt_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..50 {
        let g = random_element(&GroupKind::SlN(3), &mut rng);
        let (k, a, n) = iwasawa(&g).unwrap();
        let (qk, qa, qn) = gram_schmidt_kan(&g.mats[0]);
        assert!((&k.mats[0] - qk).norm() < 1e-10);
        assert!((&a.mats[0] - qa).norm() < 1e-10);
        assert!((&n.mats[0] - qn).norm() < 1e-10);
    }
}

#[test]
fn iwasawa_reconstruction_over_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for kind in [GroupKind::SlN(2), GroupKind::SlN(3), GroupKind::SlN(4), GroupKind::Psl2Pair] {
        for _ in 0..100 {
            let g = random_element(&kind, &mut rng);
            let (k, a, n) = iwasawa(&g).unwrap();
            assert!(k.is_orthogonal(1e-11));
            assert!(reconstruct(&k, &a, &n).dist(&g) < 1e-12, "{kind:?}");
            // uniqueness in effect: a is positive diagonal, n unit upper
            let minimal = match kind {
                GroupKind::SlN(nn) => ParabolicData::sl_minimal(nn),
                GroupKind::Psl2Pair => ParabolicData::psl2_pair(&[0, 1]),
            };
            assert!(minimal.a_prime_defect(&a) < 1e-10);
            assert!(minimal.n_defect(&n) < 1e-10);
        }
    }
}

#[test]
fn generalized_iwasawa_reduces_and_matches_block_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    // g in K: (g, I, I)
    let q_minus = ParabolicData::sl(3, &[2]);
    let g = GroupElement::sl(random_rotation(3, &mut rng)).unwrap();
    let (k, a, n) = generalized_iwasawa(&g, &q_minus).unwrap();
    assert!(k.dist(&g) < 1e-12);
    assert!(a.dist_to_identity() < 1e-12 && n.dist_to_identity() < 1e-12);

    // theta = all simple roots reduces to the minimal-parabolic KAN
    let minimal = ParabolicData::sl_minimal(3);
    for _ in 0..20 {
        let g = random_element(&GroupKind::SlN(3), &mut rng);
        let (k1, a1, n1) = generalized_iwasawa(&g, &minimal).unwrap();
        let (k2, a2, n2) = iwasawa(&g).unwrap();
        assert!(k1.dist(&k2) < 1e-11 && a1.dist(&a2) < 1e-11 && n1.dist(&n2) < 1e-11);
    }

    // block shapes of the Q_- data: a_Q block-diagonal SPD with blocks (2,1),
    // n_Q = [[1,0,*],[0,1,*],[0,0,1]]
    for _ in 0..50 {
        let g = random_element(&GroupKind::SlN(3), &mut rng);
        let (k, a, n) = generalized_iwasawa(&g, &q_minus).unwrap();
        assert!(reconstruct(&k, &a, &n).dist(&g) < 1e-11);
        assert!(q_minus.a_defect(&a) < 1e-10, "a_Q block SPD shape");
        assert!(q_minus.n_defect(&n) < 1e-10, "n_Q unipotent shape");
        let nm = &n.mats[0];
        assert!(
            (nm[(0, 0)] - 1.0).abs() < 1e-12
                && (nm[(1, 1)] - 1.0).abs() < 1e-12
                && (nm[(2, 2)] - 1.0).abs() < 1e-12
                && nm[(0, 1)].abs() < 1e-12
                && nm[(1, 0)].abs() < 1e-12
                && nm[(2, 0)].abs() < 1e-12
                && nm[(2, 1)].abs() < 1e-12
        );
    }

    // product group: example parabolic (full x proper)
    let qp = ParabolicData::psl2_pair_example();
    for _ in 0..30 {
        let g = random_element(&GroupKind::Psl2Pair, &mut rng);
        let (k, a, n) = generalized_iwasawa(&g, &qp).unwrap();
        let recon = reconstruct(&k, &a, &n);
        assert!(recon.dist(&g) < 1e-11);
        assert!(k.is_orthogonal(1e-10));
        // first factor: polar part is full SPD, n = I
        assert!((&n.mats[0] - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        assert!(qp.a_defect(&a) < 1e-10);
    }
}

#[test]
fn cartan_cases_and_singular_value_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let id = GroupElement::identity(&GroupKind::SlN(3));
    let c = cartan(&id).unwrap();
    assert!(c.h[0].amax() < 1e-12);
    assert!(c.reconstruct().dist(&id) < 1e-12);

    let g = GroupElement::sl(DMatrix::from_row_slice(
        2,
        2,
        &[1.0_f64.exp(), 0.0, 0.0, (-1.0_f64).exp()],
    ))
    .unwrap();
    let c = cartan(&g).unwrap();
    assert!((c.h[0][0] - 1.0).abs() < 1e-12 && (c.h[0][1] + 1.0).abs() < 1e-12);

    for _ in 0..50 {
        let g = random_element(&GroupKind::SlN(2), &mut rng);
        let c = cartan(&g).unwrap();
        assert!(c.reconstruct().dist(&g) < 1e-10);
        assert!(c.k1.is_orthogonal(1e-10) && c.k2.is_orthogonal(1e-10));
        assert!(c.h[0][0] >= c.h[0][1] - 1e-14);
        // oracle: singular values = sqrt eigenvalues of g^T g (closed form 2x2)
        let m = g.mats[0].transpose() * &g.mats[0];
        let tr = m.trace();
        let det = m.determinant();
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        let l1 = 0.5 * (tr + disc);
        let l2 = 0.5 * (tr - disc);
        assert!((c.h[0][0] - 0.5 * l1.ln()).abs() < 1e-9);
        assert!((c.h[0][1] - 0.5 * l2.max(1e-300).ln()).abs() < 1e-9);
    }
}

/// Q = M A N = N' A' M' round-trip; the reordered a' is M_Q-conjugate to a,
/// so its spectrum matches (and a' = a exactly for the minimal parabolic).
#[test]
fn q_decomposition_reorder_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for q in [ParabolicData::sl(3, &[2]), ParabolicData::sl_minimal(3)] {
        let minimal = q.blocks.iter().all(|b| *b == 1);
        for _ in 0..30 {
            let m = random_m_q(&q, &mut rng);
            let qa = {
                // A_Q element
                let g = random_q(&q, &mut rng);
                q.q_factor(&g).unwrap().1
            };
            let n = random_n_q(&q, &mut rng);
            let elt = m.mul(&qa).mul(&n);
            assert!(q.p_defect(&elt) < 1e-10);

            // reorder: m a n = (m a m^-1)(m n m^-1) m = a' n' m
            let m_inv = m.inverse();
            let a_p = m.mul(&qa).mul(&m_inv);
            let n_p = m.mul(&n).mul(&m_inv);
            assert!(q.a_defect(&a_p) < 1e-9, "conjugated a stays in A_Q");
            assert!(q.n_defect(&n_p) < 1e-9, "conjugated n stays in N_Q");
            let recon = a_p.mul(&n_p).mul(&m);
            assert!(recon.dist(&elt) < 1e-10);

            // spectrum of a' equals spectrum of a
            let mut s1: Vec<f64> =
                qa.mats[0].clone().symmetric_part().symmetric_eigen().eigenvalues.iter().cloned().collect();
            let mut s2: Vec<f64> =
                a_p.mats[0].clone().symmetric_part().symmetric_eigen().eigenvalues.iter().cloned().collect();
            s1.sort_by(|a, b| a.partial_cmp(b).unwrap());
            s2.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (x, y) in s1.iter().zip(&s2) {
                assert!((x - y).abs() < 1e-9);
            }
            if minimal {
                assert!(a_p.dist(&qa) < 1e-10, "minimal parabolic: a' = a");
            }
        }
    }
}

#[test]
fn m_q_commutes_with_a_prime_q() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    for q in [
        ParabolicData::sl(3, &[2]),
        ParabolicData::sl(3, &[1]),
        ParabolicData::sl_minimal(3),
        ParabolicData::psl2_pair_example(),
    ] {
        for _ in 0..20 {
            let m = random_m_q(&q, &mut rng);
            let a = random_a_prime_q(&q, &mut rng);
            let comm = m.mul(&a).mul(&m.inverse()).mul(&a.inverse());
            assert!(comm.dist_to_identity() < 1e-12, "{q:?}");
        }
    }
}

#[test]
fn flag_action_identity_projective_and_homomorphism() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let q_plus = ParabolicData::sl(3, &[1]); // flags = lines in R^3
    let base = BoundaryPoint::base(&q_plus);

    let e = GroupElement::identity(&GroupKind::SlN(3));
    assert!(flag_distance(&flag_action(&e, &base).unwrap(), &base).unwrap() < 1e-12);

    // on P(R^3): g . [v] = [g v] renormalized
    for _ in 0..20 {
        let g = random_element(&GroupKind::SlN(3), &mut rng);
        let xi = random_flag(&q_plus, &mut rng);
        let out = flag_action(&g, &xi).unwrap();
        if let (BoundaryPoint::Flag { basis: bi, .. }, BoundaryPoint::Flag { basis: bo, .. }) =
            (&xi, &out)
        {
            let v = bi.column(0).into_owned();
            let gv = (&g.mats[0] * v).normalize();
            let w = bo.column(0).into_owned();
            assert!((gv.dot(&w).abs() - 1.0).abs() < 1e-10);
        }
    }

    // homomorphism: rho(gh) xi = rho(g) rho(h) xi
    for q in [ParabolicData::sl(3, &[1]), ParabolicData::sl(3, &[2]), ParabolicData::sl_minimal(3)]
    {
        for _ in 0..34 {
            let g = random_element(&GroupKind::SlN(3), &mut rng);
            let h = random_element(&GroupKind::SlN(3), &mut rng);
            let xi = random_flag(&q, &mut rng);
            let lhs = flag_action(&g.mul(&h), &xi).unwrap();
            let rhs = flag_action(&g, &flag_action(&h, &xi).unwrap()).unwrap();
            assert!(flag_distance(&lhs, &rhs).unwrap() < 1e-10);
        }
    }
}

fn random_flag<R: Rng>(q: &ParabolicData, rng: &mut R) -> BoundaryPoint {
    let g = random_element(&q.kind, rng);
    flag_action(&g, &BoundaryPoint::base(q)).unwrap()
}

#[test]
fn cocycle_identity_and_fixed_point_jacobian() {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let e = GroupElement::identity(&GroupKind::Psl2Pair);
    assert!((cocycle(&e, &[0.3, 1.2]).unwrap() - 1.0).abs() < 1e-14);

    // cocycle identity c(gh, x) = c(g, h x) c(h, x)
    for _ in 0..200 {
        let g = random_element(&GroupKind::Psl2Pair, &mut rng);
        let h = random_element(&GroupKind::Psl2Pair, &mut rng);
        let x = [rng.gen_range(0.0..6.28), rng.gen_range(0.0..6.28)];
        let hx = [
            boundary_angle_map(&h.mats[0], x[0]),
            boundary_angle_map(&h.mats[1], x[1]),
        ];
        let lhs = cocycle(&g.mul(&h), &x).unwrap();
        let rhs = cocycle(&g, &hx).unwrap() * cocycle(&h, &x).unwrap();
        assert!((lhs - rhs).abs() / rhs.abs() < 1e-9, "lhs {lhs} rhs {rhs}");
    }

    // diag(e^t, e^-t) at its repelling fixed point: value > 1 and equal to the
    // finite-difference Jacobian of the boundary map
    let t = 1.0f64;
    let g2 = DMatrix::from_row_slice(2, 2, &[t.exp(), 0.0, 0.0, (-t).exp()]);
    // fixed points of the angle map: solve numerically by scanning
    let mut fixed = Vec::new();
    let n = 4096;
    for i in 0..n {
        let a0 = 2.0 * std::f64::consts::PI * (i as f64) / n as f64;
        let a1 = 2.0 * std::f64::consts::PI * ((i + 1) as f64) / n as f64;
        let f0 = wrapped_displacement(&g2, a0);
        let f1 = wrapped_displacement(&g2, a1);
        if f0 == 0.0 || f0 * f1 < 0.0 {
            // bisect
            let (mut lo, mut hi) = (a0, a1);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if wrapped_displacement(&g2, lo) * wrapped_displacement(&g2, mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            fixed.push(0.5 * (lo + hi));
        }
    }
    assert_eq!(fixed.len(), 2, "hyperbolic element has two fixed points");
    let g = GroupElement::psl2_pair(g2.clone(), DMatrix::identity(2, 2)).unwrap();
    let mut saw_repelling = false;
    for phi in fixed {
        let c = cocycle(&g, &[phi, 0.0]).unwrap();
        let h = 1e-6;
        let fd = (boundary_angle_map(&g2, phi + h)
            - boundary_angle_map(&g2, phi - h))
        .rem_euclid(2.0 * std::f64::consts::PI)
            / (2.0 * h);
        assert!((c - fd).abs() / fd < 1e-6, "cocycle {c} vs fd {fd}");
        if c > 1.0 {
            saw_repelling = true;
            // multiplier at the repelling fixed point is e^{2t}
            assert!((c - (2.0 * t).exp()).abs() < 1e-9);
        }
    }
    assert!(saw_repelling);
}

fn wrapped_displacement(g: &DMatrix<f64>, theta: f64) -> f64 {
    let f = boundary_angle_map(g, theta);
    let mut d = f - theta;
    while d > std::f64::consts::PI {
        d -= 2.0 * std::f64::consts::PI;
    }
    while d < -std::f64::consts::PI {
        d += 2.0 * std::f64::consts::PI;
    }
    d
}

#[test]
fn psl_canonicalization_and_validation() {
    let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -0.5, -1.0]);
    let g = GroupElement::psl2_pair(m.clone(), DMatrix::identity(2, 2)).unwrap();
    assert!(g.mats[0][(0, 0)] > 0.0, "sign fixed eagerly");

    let bad = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
    assert!(matches!(GroupElement::sl(bad), Err(LieError::NotUnimodular(_))));
}

#[test]
fn opposite_parabolic_swaps_block_order() {
    let q = ParabolicData::sl(3, &[2]);
    let op = q.opposite();
    assert_eq!(op.blocks, vec![1, 2]);
    assert_eq!(op.theta, vec![1]);
    assert_eq!(q.opposite().opposite(), q);
}
