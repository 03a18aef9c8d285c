//! The Denjoy blow-up on the circle: a countable orbit of a single generator
//! is replaced by inserted intervals, the action is extended affinely across
//! them, and the collapsing map semi-conjugates the result back to the base.
//!
//! The insertion is realized by measure: interval n occupies
//! [Psi(x_n), Psi(x_n) + r_n) where Psi adds the radii of all orbit points
//! below. Indices with |n| <= depth are tabulated; deeper intervals are below
//! the working tolerance and collapse to points.

use super::{BoundaryError, CircleMap, FiniteAction};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug)]
pub struct DenjoyBlowup {
    base: CircleMap,
    pub seed: f64,
    pub depth: i64,
    /// circumference before renormalization: 1 + sum of inserted radii
    pub total_length: f64,
    positions: Vec<f64>,
    radii: Vec<f64>,
    orbit_index: Vec<i64>,
    starts: Vec<f64>,
    prefix: Vec<f64>,
    by_index: BTreeMap<i64, usize>,
}

enum Location {
    Interval { slot: usize, offset: f64 },
    Continuum { x: f64 },
}

impl DenjoyBlowup {
    /// Psi(x): base-circle coordinate to blown-up coordinate (left end).
    fn psi(&self, x: f64) -> f64 {
        let k = self.positions.partition_point(|p| *p < x);
        x + if k == 0 { 0.0 } else { self.prefix[k - 1] + self.radii[k - 1] }
    }

    fn locate(&self, u: f64) -> Location {
        let k = self.starts.partition_point(|s| *s <= u);
        if k == 0 {
            return Location::Continuum { x: u };
        }
        let i = k - 1;
        let off = u - self.starts[i];
        if off < self.radii[i] {
            Location::Interval { slot: i, offset: off }
        } else {
            Location::Continuum { x: u - self.prefix[i] - self.radii[i] }
        }
    }

    /// The collapsing map phi on the renormalized circle [0, 1).
    pub fn collapse(&self, x01: f64) -> f64 {
        let u = x01.rem_euclid(1.0) * self.total_length;
        match self.locate(u) {
            Location::Interval { slot, .. } => self.positions[slot],
            Location::Continuum { x } => x.rem_euclid(1.0),
        }
    }

    fn base_power(&self, k: i64, x: f64) -> f64 {
        let mut y = x;
        if k >= 0 {
            for _ in 0..k {
                y = self.base.apply(y);
            }
        } else {
            let inv = self.base.inverse();
            for _ in 0..(-k) {
                y = inv.apply(y);
            }
        }
        y
    }

    /// The blown-up action of the k-th power of the generator, on [0, 1).
    pub fn generator_power(&self, k: i64, x01: f64) -> f64 {
        let u = x01.rem_euclid(1.0) * self.total_length;
        let out = match self.locate(u) {
            Location::Interval { slot, offset } => {
                let n = self.orbit_index[slot];
                match self.by_index.get(&(n + k)) {
                    Some(&j) => {
                        self.starts[j] + offset * self.radii[j] / self.radii[slot]
                    }
                    None => {
                        // beyond the table: the target interval is below the
                        // working resolution and collapses to its point
                        let y = self.base_power(k, self.positions[slot]);
                        self.psi(y)
                    }
                }
            }
            Location::Continuum { x } => self.psi(self.base_power(k, x)),
        };
        (out / self.total_length).rem_euclid(1.0)
    }

    /// Index and bounds of a tabulated inserted interval, renormalized.
    pub fn interval(&self, n: i64) -> Option<(f64, f64)> {
        self.by_index.get(&n).map(|&slot| {
            (
                self.starts[slot] / self.total_length,
                (self.starts[slot] + self.radii[slot]) / self.total_length,
            )
        })
    }

    pub fn interval_count(&self) -> usize {
        self.positions.len()
    }
}

/// Builds the blow-up of the cyclic action generated by `base` along the
/// orbit of `seed`, inserting an interval of length `schedule(n)` at the
/// n-th orbit point for |n| <= depth.
///
/// Returns the blow-up together with a `FiniteAction` carrying the generator
/// `g` and its square `gg` (with the relation g g = gg exercising the
/// construction's consistency).
pub fn denjoy_blowup(
    base: CircleMap,
    seed: f64,
    schedule: &dyn Fn(i64) -> f64,
    depth: i64,
) -> Result<(Arc<DenjoyBlowup>, FiniteAction), BoundaryError> {
    assert!(depth >= 0);
    // orbit table
    let mut entries: Vec<(f64, f64, i64)> = Vec::with_capacity(2 * depth as usize + 1);
    let mut x = seed.rem_euclid(1.0);
    for n in 0..=depth {
        let r = schedule(n);
        if r < 0.0 {
            return Err(BoundaryError::Construction("negative radius".into()));
        }
        if r > 0.0 {
            entries.push((x, r, n));
        }
        x = base.apply(x);
    }
    let inv = base.inverse();
    let mut x = seed.rem_euclid(1.0);
    for n in 1..=depth {
        x = inv.apply(x);
        let r = schedule(-n);
        if r < 0.0 {
            return Err(BoundaryError::Construction("negative radius".into()));
        }
        if r > 0.0 {
            entries.push((x, r, -n));
        }
    }
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in entries.windows(2) {
        if (w[1].0 - w[0].0).abs() < 1e-13 {
            return Err(BoundaryError::Construction(format!(
                "orbit points {} and {} coincide at the requested depth",
                w[0].2, w[1].2
            )));
        }
    }
    let positions: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let radii: Vec<f64> = entries.iter().map(|e| e.1).collect();
    let orbit_index: Vec<i64> = entries.iter().map(|e| e.2).collect();
    let mut prefix = Vec::with_capacity(radii.len());
    let mut acc = 0.0;
    for r in &radii {
        prefix.push(acc);
        acc += r;
    }
    let starts: Vec<f64> =
        positions.iter().zip(&prefix).map(|(p, q)| p + q).collect();
    let by_index: BTreeMap<i64, usize> =
        orbit_index.iter().enumerate().map(|(slot, n)| (*n, slot)).collect();
    let blowup = Arc::new(DenjoyBlowup {
        base,
        seed,
        depth,
        total_length: 1.0 + acc,
        positions,
        radii,
        orbit_index,
        starts,
        prefix,
        by_index,
    });
    let action = FiniteAction::new(
        vec![
            ("g".to_string(), CircleMap::Denjoy { action: blowup.clone(), power: 1 }),
            ("gg".to_string(), CircleMap::Denjoy { action: blowup.clone(), power: 2 }),
        ],
        vec![vec![
            ("g".to_string(), false),
            ("g".to_string(), false),
            ("gg".to_string(), true),
        ]],
    )?;
    Ok((blowup, action))
}

/// Birkhoff rotation-number estimate over `iterations` steps.
pub fn rotation_number(map: &CircleMap, x0: f64, iterations: usize) -> f64 {
    let mut x = x0.rem_euclid(1.0);
    let mut acc = 0.0;
    for _ in 0..iterations {
        let y = map.apply(x);
        acc += (y - x).rem_euclid(1.0);
        x = y;
    }
    acc / iterations as f64
}
