//! Uniform-expansion certificates: for each point of the circle, an open arc
//! and a word whose action expands distances by at least lambda on it.

use super::{circle_dist, BoundaryError, FiniteAction, Word};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CoverItem {
    /// Arc (a, b) running counterclockwise from a to b (length b - a mod 1).
    pub arc: (f64, f64),
    pub word: Vec<(String, bool)>,
    /// inf of the derivative over the arc at search resolution.
    pub expansion: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionCertificate {
    pub lambda: f64,
    pub cover: Vec<CoverItem>,
}

impl ExpansionCertificate {
    /// The Lebesgue number of the cover: the largest r such that every
    /// r-ball lies inside some arc (0 when the arcs do not cover).
    pub fn lebesgue_number(&self) -> f64 {
        let n = 4096;
        let mut worst = f64::INFINITY;
        for i in 0..n {
            let x = i as f64 / n as f64;
            let mut depth: f64 = 0.0;
            for item in &self.cover {
                let (a, b) = item.arc;
                let len = (b - a).rem_euclid(1.0);
                let pos = (x - a).rem_euclid(1.0);
                if pos < len {
                    depth = depth.max(pos.min(len - pos));
                }
            }
            worst = worst.min(depth);
        }
        worst
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum CertificateSearch {
    Found(ExpansionCertificate),
    /// No certificate within the word-length cap; reports the best uniform
    /// expansion constant achievable with the searched words.
    Failed { best_lambda: f64, word_length_cap: usize },
}

/// Breadth-first greedy search for a (lambda, cover) expansion certificate
/// using words up to the given length. Arcs are found on a grid of
/// `resolution` points and shrunk by one cell before being claimed.
pub fn find_expansion_certificate(
    action: &FiniteAction,
    lambda: f64,
    word_length_cap: usize,
    resolution: usize,
) -> Result<CertificateSearch, BoundaryError> {
    let n = resolution;
    let mut covered = vec![false; n];
    let mut cover: Vec<CoverItem> = Vec::new();
    // per-point best expansion over all searched words, for the failure report
    let mut best_point = vec![0.0f64; n];

    let gens = action.generators.len();
    let mut frontier: Vec<Word> = vec![vec![]];
    for _len in 1..=word_length_cap {
        let mut next_frontier = Vec::new();
        for w in &frontier {
            for gi in 0..gens {
                for inv in [false, true] {
                    if let Some((last, last_inv)) = w.last() {
                        if *last == gi && *last_inv != inv {
                            continue; // no immediate backtracking
                        }
                    }
                    let mut w2 = w.clone();
                    w2.push((gi, inv));
                    next_frontier.push(w2);
                }
            }
        }
        for word in &next_frontier {
            if covered.iter().all(|c| *c) {
                break;
            }
            let map = action.word_map(word);
            let derivs: Vec<f64> =
                (0..n).map(|i| map.derivative(i as f64 / n as f64).abs()).collect();
            for (bp, d) in best_point.iter_mut().zip(&derivs) {
                *bp = bp.max(*d);
            }
            // maximal circular runs where the derivative clears lambda with
            // a small margin; each claimed arc is shrunk by one grid cell
            let margin = lambda * 1.02;
            let ok: Vec<bool> = derivs.iter().map(|d| *d >= margin).collect();
            let labeled: Vec<(String, bool)> = word
                .iter()
                .map(|(gi, inv)| (action.generators[*gi].0.clone(), *inv))
                .collect();
            if ok.iter().all(|b| *b) {
                let inf = derivs.iter().cloned().fold(f64::INFINITY, f64::min);
                cover.push(CoverItem {
                    arc: (0.0, 1.0 - 0.5 / n as f64),
                    word: labeled,
                    expansion: inf,
                });
                covered.iter_mut().for_each(|c| *c = true);
                continue;
            }
            for start in 0..n {
                let prev = (start + n - 1) % n;
                if !(ok[start] && !ok[prev]) {
                    continue;
                }
                let mut run = 1;
                while run < n && ok[(start + run) % n] {
                    run += 1;
                }
                if run < 4 {
                    continue;
                }
                let cells: Vec<usize> =
                    (1..run - 1).map(|k| (start + k) % n).collect();
                if cells.iter().all(|k| covered[*k]) {
                    continue;
                }
                let a = (start + 1) as f64 / n as f64;
                let b = (start + run - 1) as f64 / n as f64; // may exceed 1: wraps
                let inf = (0..run)
                    .map(|k| derivs[(start + k) % n])
                    .fold(f64::INFINITY, f64::min);
                cover.push(CoverItem {
                    arc: (a.rem_euclid(1.0), b.rem_euclid(1.0)),
                    word: labeled.clone(),
                    expansion: inf,
                });
                for k in cells {
                    covered[k] = true;
                }
            }
        }
        if covered.iter().all(|c| *c) {
            return Ok(CertificateSearch::Found(ExpansionCertificate { lambda, cover }));
        }
        frontier = next_frontier;
    }
    let best_lambda = best_point.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CertificateSearch::Failed { best_lambda, word_length_cap })
}

/// Independent re-verification: the inf of the derivative over each arc on a
/// 10x finer grid must clear lambda, and the cover must have positive
/// Lebesgue number.
pub fn verify_certificate(
    action: &FiniteAction,
    cert: &ExpansionCertificate,
    resolution: usize,
) -> Result<bool, BoundaryError> {
    for item in &cert.cover {
        let word: Word = item
            .word
            .iter()
            .map(|(l, inv)| Ok((action.index_of(l)?, *inv)))
            .collect::<Result<_, BoundaryError>>()?;
        let map = action.word_map(&word);
        let (a, b) = item.arc;
        let len = (b - a).rem_euclid(1.0);
        let n = resolution * 10;
        let steps = ((len * n as f64).ceil() as usize).max(10);
        for i in 0..=steps {
            let x = (a + len * i as f64 / steps as f64).rem_euclid(1.0);
            if map.derivative(x).abs() < cert.lambda {
                return Ok(false);
            }
        }
        // the derivative must actually expand distances on the arc
        let mid = (a + 0.5 * len).rem_euclid(1.0);
        let h = (len / steps as f64).min(1e-4);
        let q = circle_dist(map.apply((mid + h).rem_euclid(1.0)), map.apply(mid)) / h;
        if q < cert.lambda * 0.5 {
            return Ok(false);
        }
    }
    Ok(cert.lebesgue_number() > 0.0)
}
