//! The genus-2 octagon lattice in PSL_2(R): side-pairing translations of the
//! regular hyperbolic octagon with vertex angle pi/4, their boundary action,
//! and reduction to the Dirichlet fundamental domain.
//!
//! The four generators are translations of length 2 arccosh(1 + sqrt 2) along
//! the axes through opposite side midpoints (axis angles k pi/4); opposite
//! sides are identified and the boundary word of the octagon gives the
//! relator a b' c d' a' b c' d (checked numerically at construction).

use super::EquivariantError;
use crate::boundary::{CircleMap, FiniteAction};
use crate::lie::circle::psl2_to_so21;
use crate::manifold::{Model, Point};
use nalgebra::{DMatrix, DVector};

pub struct FuchsianLattice {
    labels: Vec<String>,
    psl2: Vec<DMatrix<f64>>,
    so21: Vec<DMatrix<f64>>,
    so21_inv: Vec<DMatrix<f64>>,
    relator: Vec<(usize, bool)>,
    apothem: f64,
    circumradius: f64,
    /// o-images of the eight Dirichlet neighbors
    neighbor_images: Vec<DVector<f64>>,
}

fn psl2_rotation(phi: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[(phi / 2.0).cos(), -(phi / 2.0).sin(), (phi / 2.0).sin(), (phi / 2.0).cos()],
    )
}

fn psl2_translation(l: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[(l / 2.0).exp(), 0.0, 0.0, (-l / 2.0).exp()])
}

impl FuchsianLattice {
    pub fn genus2() -> FuchsianLattice {
        let apothem = (1.0 + 2.0_f64.sqrt()).acosh();
        let l = 2.0 * apothem;
        let circumradius = (3.0 + 2.0 * 2.0_f64.sqrt()).acosh();
        let labels: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let psl2: Vec<DMatrix<f64>> = (0..4)
            .map(|j| {
                let phi = j as f64 * std::f64::consts::FRAC_PI_4;
                let r = psl2_rotation(phi);
                &r * psl2_translation(l) * r.transpose()
            })
            .collect();
        let so21: Vec<DMatrix<f64>> = psl2.iter().map(psl2_to_so21).collect();
        let so21_inv: Vec<DMatrix<f64>> =
            so21.iter().map(|m| m.clone().try_inverse().unwrap()).collect();
        // relator of the opposite-side pairing, verified in the constructor
        let relator: Vec<(usize, bool)> = vec![
            (0, false),
            (1, true),
            (2, false),
            (3, true),
            (0, true),
            (1, false),
            (2, true),
            (3, false),
        ];
        let o = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let mut neighbor_images = Vec::with_capacity(8);
        for m in so21.iter().chain(so21_inv.iter()) {
            neighbor_images.push(m * &o);
        }
        let lattice = FuchsianLattice {
            labels,
            psl2,
            so21,
            so21_inv,
            relator,
            apothem,
            circumradius,
            neighbor_images,
        };
        let defect = lattice.relator_defect();
        assert!(defect < 1e-9, "octagon relator defect {defect}");
        let pairing = lattice.side_pairing_defect();
        assert!(pairing < 1e-8, "side pairing defect {pairing}");
        lattice
    }

    pub fn base_labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    /// The eight side pairings (generators and inverses) with their labels.
    pub fn side_pairings(&self) -> Vec<(String, DMatrix<f64>)> {
        let mut out = Vec::with_capacity(8);
        for (j, l) in self.labels.iter().enumerate() {
            out.push((l.clone(), self.psl2[j].clone()));
        }
        for (j, l) in self.labels.iter().enumerate() {
            out.push((
                l.to_uppercase(),
                self.psl2[j].clone().try_inverse().unwrap(),
            ));
        }
        out
    }

    pub fn relator(&self) -> &[(usize, bool)] {
        &self.relator
    }

    pub fn relator_defect(&self) -> f64 {
        let m = self.word_so21(&self.relator);
        (&m - DMatrix::<f64>::identity(3, 3)).norm()
    }

    /// Each generator must map the midpoint of its paired side to the
    /// opposite side's midpoint.
    pub fn side_pairing_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        for j in 0..4 {
            let phi = j as f64 * std::f64::consts::FRAC_PI_4;
            let mid = |angle: f64| {
                DVector::from_vec(vec![
                    self.apothem.sinh() * angle.cos(),
                    self.apothem.sinh() * angle.sin(),
                    self.apothem.cosh(),
                ])
            };
            let from = mid(phi + std::f64::consts::PI);
            let to = mid(phi);
            defect = defect.max((&self.so21[j] * from - to).norm());
        }
        defect
    }

    pub fn in_radius(&self) -> f64 {
        self.apothem
    }

    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    pub fn word_psl2(&self, word: &[(usize, bool)]) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::identity(2, 2);
        for (i, inv) in word {
            let g = if *inv {
                self.psl2[*i].clone().try_inverse().unwrap()
            } else {
                self.psl2[*i].clone()
            };
            m *= g;
        }
        m
    }

    pub fn word_so21(&self, word: &[(usize, bool)]) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::identity(3, 3);
        for (i, inv) in word {
            let g = if *inv { &self.so21_inv[*i] } else { &self.so21[*i] };
            m *= g;
        }
        m
    }

    /// The boundary action of the generators on the circle [0, 1), carrying
    /// the octagon relator as its consistency relation.
    pub fn boundary_action(&self) -> FiniteAction {
        let gens = self
            .labels
            .iter()
            .zip(&self.psl2)
            .map(|(l, m)| (l.clone(), CircleMap::Mobius { mat: m.clone() }))
            .collect();
        let relation = self
            .relator
            .iter()
            .map(|(i, inv)| (self.labels[*i].clone(), *inv))
            .collect();
        FiniteAction::new(gens, vec![relation]).expect("octagon relator holds")
    }

    /// Dirichlet margin: <= 0 exactly on the fundamental octagon.
    pub fn domain_margin(&self, x: &Point) -> f64 {
        let d0 = acosh_dist(&x.coords, &DVector::from_vec(vec![0.0, 0.0, 1.0]));
        let mut dmin = f64::INFINITY;
        for img in &self.neighbor_images {
            dmin = dmin.min(acosh_dist(&x.coords, img));
        }
        d0 - dmin
    }

    pub fn distance_to_domain(&self, x: &Point) -> f64 {
        self.domain_margin(x).max(0.0) * 0.5
    }

    /// Reduces x into the closed fundamental domain: returns (word, matrix)
    /// of delta with delta x in D and the reduced point.
    pub fn reduce(&self, x: &Point) -> Result<(Vec<(usize, bool)>, DMatrix<f64>, Point), EquivariantError> {
        let o = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let mut word: Vec<(usize, bool)> = Vec::new();
        let mut mat = DMatrix::<f64>::identity(3, 3);
        let mut y = x.coords.clone();
        for _ in 0..400 {
            let d0 = acosh_dist(&y, &o);
            // best reducing letter
            let mut best: Option<(usize, bool, f64)> = None;
            for j in 0..4 {
                for inv in [false, true] {
                    let m = if inv { &self.so21_inv[j] } else { &self.so21[j] };
                    let d = acosh_dist(&(m * &y), &o);
                    if best.is_none() || d < best.unwrap().2 {
                        best = Some((j, inv, d));
                    }
                }
            }
            let (j, inv, d) = best.unwrap();
            if d >= d0 - 1e-12 {
                // no strict improvement: inside the closed Dirichlet domain.
                // delta = l_k ... l_1 as a word (leftmost letter acts last)
                word.reverse();
                return Ok((word, mat, Point::raw(Model::h2(), y)));
            }
            let m = if inv { &self.so21_inv[j] } else { &self.so21[j] };
            y = m * &y;
            renormalize_hyperboloid(&mut y);
            mat = m * mat;
            word.push((j, inv));
        }
        Err(EquivariantError::ReductionFailed)
    }

    /// Low-discrepancy samples of the closed fundamental domain.
    pub fn domain_samples(&self, n: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(n);
        let golden = 0.6180339887498949_f64;
        let mut k = 0usize;
        while out.len() < n && k < 40 * n {
            k += 1;
            let u = (k as f64 * golden).fract();
            let v = (k as f64 * 0.7548776662466927).fract();
            let p = self.random_domain_point(u, v);
            out.push(p);
        }
        out
    }

    /// Deterministic domain point from two uniforms: polar candidate pulled
    /// radially inward until it lies in the octagon.
    pub fn random_domain_point(&self, u: f64, v: f64) -> Point {
        let phi = 2.0 * std::f64::consts::PI * u;
        let mut r = self.circumradius * v.sqrt();
        for _ in 0..60 {
            let p = Point::raw(
                Model::h2(),
                DVector::from_vec(vec![r.sinh() * phi.cos(), r.sinh() * phi.sin(), r.cosh()]),
            );
            if self.domain_margin(&p) <= 0.0 {
                return p;
            }
            r *= 0.93;
        }
        Point::raw(Model::h2(), DVector::from_vec(vec![0.0, 0.0, 1.0]))
    }

    /// All group elements with d(o, gamma o) below the threshold, found by
    /// breadth-first words up to length 4 (enough to close up around the
    /// octagon's vertices at desk scale) with matrix deduplication.
    pub fn group_ball(
        &self,
        threshold: f64,
    ) -> Vec<(Vec<(usize, bool)>, DMatrix<f64>, DMatrix<f64>)> {
        let o = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let mut seen: Vec<DMatrix<f64>> = Vec::new();
        let mut out: Vec<(Vec<(usize, bool)>, DMatrix<f64>, DMatrix<f64>)> = Vec::new();
        let mut frontier: Vec<(Vec<(usize, bool)>, DMatrix<f64>)> =
            vec![(vec![], DMatrix::identity(3, 3))];
        let push = |seen: &mut Vec<DMatrix<f64>>,
                    out: &mut Vec<(Vec<(usize, bool)>, DMatrix<f64>, DMatrix<f64>)>,
                    word: &[(usize, bool)],
                    m: &DMatrix<f64>,
                    this: &FuchsianLattice| {
            if seen.iter().any(|s| (s - m).norm() < 1e-7) {
                return false;
            }
            seen.push(m.clone());
            out.push((word.to_vec(), m.clone(), this.word_psl2(word)));
            true
        };
        push(&mut seen, &mut out, &[], &DMatrix::identity(3, 3), self);
        for _len in 1..=4 {
            let mut next = Vec::new();
            for (word, m) in &frontier {
                for j in 0..4 {
                    for inv in [false, true] {
                        if let Some((lj, linv)) = word.last() {
                            if *lj == j && *linv != inv {
                                continue;
                            }
                        }
                        let g = if inv { &self.so21_inv[j] } else { &self.so21[j] };
                        let m2 = m * g;
                        let mut w2 = word.clone();
                        w2.push((j, inv));
                        if acosh_dist(&(&m2 * &o), &o) <= threshold {
                            push(&mut seen, &mut out, &w2, &m2, self);
                        }
                        next.push((w2, m2));
                    }
                }
            }
            frontier = next;
        }
        out
    }
}

fn acosh_dist(p: &DVector<f64>, q: &DVector<f64>) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    let u = ((dx * dx + dy * dy - dz * dz) * 0.5).max(0.0);
    (u * (u + 2.0)).sqrt().asinh()
}

fn renormalize_hyperboloid(y: &mut DVector<f64>) {
    // project back onto x^2 + y^2 - z^2 = -1 after accumulated products
    let q = y[2] * y[2] - y[0] * y[0] - y[1] * y[1];
    if q > 0.0 {
        let s = 1.0 / q.sqrt();
        *y *= s;
    }
}
