//! Dynamics on boundary circles: finitely generated actions by closed-form
//! homeomorphisms, uniform-expansion certificates, semi-conjugacy residuals
//! and probes, the Denjoy blow-up, and the chamber deformation rho_alpha.
//!
//! The circle is parameterized by [0, 1); Moebius maps are the boundary
//! actions of PSL_2(R) in the angle coordinate, rescaled by 2 pi.

pub mod denjoy;
pub mod expansion;
pub mod rho_alpha;

pub use denjoy::{denjoy_blowup, rotation_number, DenjoyBlowup};
pub use expansion::{
    find_expansion_certificate, verify_certificate, CertificateSearch, CoverItem,
    ExpansionCertificate,
};
pub use rho_alpha::{
    chamber_collapse_witness, kappa_apply, ChamberAction, ChamberCoordinate, CollapseTrace,
};

use crate::lie::circle::{boundary_angle_map, boundary_derivative};
use nalgebra::DMatrix;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("generator labels of the two actions differ")]
    LabelMismatch,
    #[error("relation `{word}` fails by {defect:.3e}")]
    RelationDefect { word: String, defect: f64 },
    #[error("unknown generator label `{0}`")]
    UnknownLabel(String),
    #[error("{0}")]
    Construction(String),
}

pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// A circle homeomorphism in closed form.
#[derive(Debug, Clone)]
pub enum CircleMap {
    Identity,
    /// x + omega mod 1.
    Rotation { omega: f64 },
    /// Boundary action of a PSL_2(R) element in the scaled angle coordinate.
    Mobius { mat: DMatrix<f64> },
    /// x + sum_i a_i sin(2 pi (k_i x + phi_i)); `inverse` solves the monotone
    /// equation instead. Requires sum |a_i k_i| < 1/(2 pi) for injectivity.
    Trig { terms: Vec<(f64, usize, f64)>, inverse: bool },
    Compose { first: Box<CircleMap>, then: Box<CircleMap> },
    /// Generator power of a Denjoy blow-up.
    Denjoy { action: Arc<DenjoyBlowup>, power: i64 },
}

impl CircleMap {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            CircleMap::Identity => x.rem_euclid(1.0),
            CircleMap::Rotation { omega } => (x + omega).rem_euclid(1.0),
            CircleMap::Mobius { mat } => {
                boundary_angle_map(mat, 2.0 * std::f64::consts::PI * x)
                    / (2.0 * std::f64::consts::PI)
            }
            CircleMap::Trig { terms, inverse: false } => trig_forward(terms, x).rem_euclid(1.0),
            CircleMap::Trig { terms, inverse: true } => trig_inverse(terms, x),
            CircleMap::Compose { first, then } => then.apply(first.apply(x)),
            CircleMap::Denjoy { action, power } => action.generator_power(*power, x),
        }
    }

    /// Derivative of the lifted map; Denjoy maps return the a.e. derivative
    /// through a central difference.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            CircleMap::Identity | CircleMap::Rotation { .. } => 1.0,
            CircleMap::Mobius { mat } => {
                boundary_derivative(mat, 2.0 * std::f64::consts::PI * x)
            }
            CircleMap::Trig { terms, inverse: false } => trig_derivative(terms, x),
            CircleMap::Trig { terms, inverse: true } => {
                1.0 / trig_derivative(terms, trig_inverse(terms, x))
            }
            CircleMap::Compose { first, then } => {
                then.derivative(first.apply(x)) * first.derivative(x)
            }
            CircleMap::Denjoy { .. } => {
                let h = 1e-8;
                lift_delta(self, x, h) / (2.0 * h)
            }
        }
    }

    pub fn inverse(&self) -> CircleMap {
        match self {
            CircleMap::Identity => CircleMap::Identity,
            CircleMap::Rotation { omega } => CircleMap::Rotation { omega: -omega },
            CircleMap::Mobius { mat } => CircleMap::Mobius {
                mat: mat.clone().try_inverse().expect("unimodular"),
            },
            CircleMap::Trig { terms, inverse } => {
                CircleMap::Trig { terms: terms.clone(), inverse: !inverse }
            }
            CircleMap::Compose { first, then } => CircleMap::Compose {
                first: Box::new(then.inverse()),
                then: Box::new(first.inverse()),
            },
            CircleMap::Denjoy { action, power } => {
                CircleMap::Denjoy { action: action.clone(), power: -power }
            }
        }
    }

    /// h^-1 . self . h.
    pub fn conjugate_by(&self, h: &CircleMap) -> CircleMap {
        CircleMap::Compose {
            first: Box::new(CircleMap::Compose {
                first: Box::new(h.clone()),
                then: Box::new(self.clone()),
            }),
            then: Box::new(h.inverse()),
        }
    }
}

fn trig_forward(terms: &[(f64, usize, f64)], x: f64) -> f64 {
    let mut y = x;
    for (a, k, phi) in terms {
        y += a * (2.0 * std::f64::consts::PI * ((*k as f64) * x + phi)).sin();
    }
    y
}

fn trig_derivative(terms: &[(f64, usize, f64)], x: f64) -> f64 {
    let mut d = 1.0;
    for (a, k, phi) in terms {
        d += a
            * 2.0
            * std::f64::consts::PI
            * (*k as f64)
            * (2.0 * std::f64::consts::PI * ((*k as f64) * x + phi)).cos();
    }
    d
}

/// Monotone inversion of the lifted trig displacement by bisection plus
/// Newton polishing.
fn trig_inverse(terms: &[(f64, usize, f64)], y: f64) -> f64 {
    let spread: f64 = terms.iter().map(|(a, _, _)| a.abs()).sum();
    let (mut lo, mut hi) = (y - spread - 1e-9, y + spread + 1e-9);
    for _ in 0..70 {
        let mid = 0.5 * (lo + hi);
        if trig_forward(terms, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..4 {
        let f = trig_forward(terms, x) - y;
        let d = trig_derivative(terms, x);
        x -= f / d;
    }
    x.rem_euclid(1.0)
}

/// Displacement of the lift over [x - h, x + h], unwrapped.
fn lift_delta(map: &CircleMap, x: f64, h: f64) -> f64 {
    let a = map.apply((x - h).rem_euclid(1.0));
    let b = map.apply((x + h).rem_euclid(1.0));
    let mut d = b - a;
    while d > 0.5 {
        d -= 1.0;
    }
    while d < -0.5 {
        d += 1.0;
    }
    d
}

/// A word in the generators: (label index, inverse?).
pub type Word = Vec<(usize, bool)>;

/// A finitely generated action on the circle with generator labels and a
/// list of relator words (each must evaluate to the identity).
#[derive(Debug, Clone)]
pub struct FiniteAction {
    pub generators: Vec<(String, CircleMap)>,
    pub relations: Vec<Vec<(String, bool)>>,
}

impl FiniteAction {
    /// Validates each relation on a 10^4-point grid to sup-distance 1e-8.
    pub fn new(
        generators: Vec<(String, CircleMap)>,
        relations: Vec<Vec<(String, bool)>>,
    ) -> Result<FiniteAction, BoundaryError> {
        let action = FiniteAction { generators, relations };
        for rel in &action.relations {
            let defect = action.relation_defect(rel)?;
            if defect > 1e-8 {
                return Err(BoundaryError::RelationDefect {
                    word: format_word(rel),
                    defect,
                });
            }
        }
        Ok(action)
    }

    pub fn relation_defect(&self, rel: &[(String, bool)]) -> Result<f64, BoundaryError> {
        let n = 10_000;
        let mut defect: f64 = 0.0;
        for i in 0..n {
            let x = i as f64 / n as f64;
            let y = self.apply_labeled_word(rel, x)?;
            defect = defect.max(circle_dist(x, y));
        }
        Ok(defect)
    }

    pub fn index_of(&self, label: &str) -> Result<usize, BoundaryError> {
        self.generators
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| BoundaryError::UnknownLabel(label.to_string()))
    }

    pub fn apply_gen(&self, idx: usize, inverse: bool, x: f64) -> f64 {
        if inverse {
            self.generators[idx].1.inverse().apply(x)
        } else {
            self.generators[idx].1.apply(x)
        }
    }

    pub fn apply_word(&self, word: &[(usize, bool)], x: f64) -> f64 {
        // leftmost letter acts last
        let mut y = x;
        for (idx, inv) in word.iter().rev() {
            y = self.apply_gen(*idx, *inv, y);
        }
        y
    }

    pub fn apply_labeled_word(
        &self,
        word: &[(String, bool)],
        x: f64,
    ) -> Result<f64, BoundaryError> {
        let mut y = x;
        for (label, inv) in word.iter().rev() {
            let idx = self.index_of(label)?;
            y = self.apply_gen(idx, *inv, y);
        }
        Ok(y)
    }

    /// The composite map of a word, leftmost letter acting last.
    pub fn word_map(&self, word: &[(usize, bool)]) -> CircleMap {
        let mut map = CircleMap::Identity;
        for (idx, inv) in word.iter().rev() {
            let g = if *inv {
                self.generators[*idx].1.inverse()
            } else {
                self.generators[*idx].1.clone()
            };
            map = CircleMap::Compose { first: Box::new(map), then: Box::new(g) };
        }
        map
    }

    pub fn labels(&self) -> Vec<String> {
        self.generators.iter().map(|(l, _)| l.clone()).collect()
    }

    /// The action conjugated generatorwise by h.
    pub fn conjugated(&self, h: &CircleMap) -> FiniteAction {
        FiniteAction {
            generators: self
                .generators
                .iter()
                .map(|(l, g)| (l.clone(), g.conjugate_by(h)))
                .collect(),
            relations: self.relations.clone(),
        }
    }
}

pub fn format_word(word: &[(String, bool)]) -> String {
    word.iter()
        .map(|(l, inv)| if *inv { format!("{l}'") } else { l.clone() })
        .collect::<Vec<_>>()
        .join(" ")
}

/// sup over generators and samples of d(rho_0(s)(phi x), phi(rho(s) x)).
pub fn semiconjugacy_residual(
    rho: &FiniteAction,
    rho0: &FiniteAction,
    phi: &dyn Fn(f64) -> f64,
    samples: usize,
) -> Result<f64, BoundaryError> {
    if rho.labels() != rho0.labels() {
        return Err(BoundaryError::LabelMismatch);
    }
    let mut worst: f64 = 0.0;
    for (idx, _) in rho.generators.iter().enumerate() {
        for i in 0..samples {
            let x = i as f64 / samples as f64;
            let lhs = rho0.apply_gen(idx, false, phi(x));
            let rhs = phi(rho.apply_gen(idx, false, x));
            worst = worst.max(circle_dist(lhs, rhs));
        }
    }
    Ok(worst)
}

/// Report of the semi-conjugacy uniqueness probe.
#[derive(Debug, Clone, serde::Serialize)]
pub struct UniquenessReport {
    pub residual_phi1: f64,
    pub residual_phi2: f64,
    pub sup_distance: f64,
    pub lebesgue_number: f64,
    pub preconditions_met: bool,
    /// Some(true) when the probe certifies phi1 = phi2 within 1e-6.
    pub verdict: Option<bool>,
}

/// Checks the hypotheses of the uniqueness lemma for two candidate
/// semi-conjugacies and reports their sup-distance; when the hypotheses hold
/// the lemma forces equality.
pub fn uniqueness_probe(
    rho: &FiniteAction,
    rho0: &FiniteAction,
    phi1: &dyn Fn(f64) -> f64,
    phi2: &dyn Fn(f64) -> f64,
    certificate: &ExpansionCertificate,
    tol: f64,
) -> Result<UniquenessReport, BoundaryError> {
    let r1 = semiconjugacy_residual(rho, rho0, phi1, 4000)?;
    let r2 = semiconjugacy_residual(rho, rho0, phi2, 4000)?;
    let n = 20_000;
    let mut sup: f64 = 0.0;
    for i in 0..n {
        let x = i as f64 / n as f64;
        sup = sup.max(circle_dist(phi1(x), phi2(x)));
    }
    let leb = certificate.lebesgue_number();
    let pre = r1 < tol && r2 < tol && sup < leb;
    let verdict = if pre { Some(sup < 1e-6) } else { None };
    Ok(UniquenessReport {
        residual_phi1: r1,
        residual_phi2: r2,
        sup_distance: sup,
        lebesgue_number: leb,
        preconditions_met: pre,
        verdict,
    })
}

/// Report of the conjugacy upgrade probe.
#[derive(Debug, Clone, serde::Serialize)]
pub struct UpgradeReport {
    pub residual: f64,
    /// inf over certificate arcs of the difference-quotient expansion of the
    /// perturbed witnesses.
    pub perturbed_expansion: f64,
    pub preconditions_met: bool,
    pub injectivity_witnessed: bool,
    /// pairs (x, y, d(phi x, phi y)) with x far apart but images collapsed.
    pub collapse_witnesses: Vec<(f64, f64, f64)>,
}

/// Samples pairs at dyadic scales and looks for non-injectivity of phi;
/// under the preconditions (small residual, perturbed witnesses still
/// expanding) the upgrade proposition forces injectivity.
pub fn conjugacy_upgrade_probe(
    rho: &FiniteAction,
    rho0: &FiniteAction,
    phi: &dyn Fn(f64) -> f64,
    certificate: &ExpansionCertificate,
    tol: f64,
) -> Result<UpgradeReport, BoundaryError> {
    let residual = semiconjugacy_residual(rho, rho0, phi, 4000)?;
    // perturbed witnesses must still expand on their arcs
    let lambda_prime = 0.5 * (1.0 + certificate.lambda);
    let mut worst_expansion = f64::INFINITY;
    for item in &certificate.cover {
        let word: Word = item
            .word
            .iter()
            .map(|(l, inv)| Ok((rho.index_of(l)?, *inv)))
            .collect::<Result<_, BoundaryError>>()?;
        let (a, b) = item.arc;
        let len = (b - a).rem_euclid(1.0);
        let n = 400;
        let h = len / n as f64;
        for i in 0..n {
            let x = (a + i as f64 * h).rem_euclid(1.0);
            let y = (x + h).rem_euclid(1.0);
            let fx = rho.apply_word(&word, x);
            let fy = rho.apply_word(&word, y);
            let q = circle_dist(fx, fy) / circle_dist(x, y).max(1e-15);
            worst_expansion = worst_expansion.min(q);
        }
    }
    let pre = residual < tol && worst_expansion >= lambda_prime;

    // dyadic-scale injectivity sampling
    let eps = certificate.lebesgue_number().max(1e-4);
    let mut witnesses = Vec::new();
    let mut delta = eps;
    let mut rng_state = 0x9e3779b97f4a7c15u64;
    let mut next = || {
        rng_state ^= rng_state << 13;
        rng_state ^= rng_state >> 7;
        rng_state ^= rng_state << 17;
        (rng_state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _scale in 0..24 {
        for _ in 0..220 {
            let x = next();
            let y = (x + delta).rem_euclid(1.0);
            if circle_dist(phi(x), phi(y)) < 1e-9 && circle_dist(x, y) > 1e-7 {
                witnesses.push((x, y, circle_dist(phi(x), phi(y))));
                if witnesses.len() > 16 {
                    break;
                }
            }
        }
        delta /= lambda_prime;
        if delta < 1e-7 {
            break;
        }
    }
    Ok(UpgradeReport {
        residual,
        perturbed_expansion: worst_expansion,
        preconditions_met: pre,
        injectivity_witnessed: witnesses.is_empty(),
        collapse_witnesses: witnesses,
    })
}
