//! Matrix-group structure theory for SL(n, R), n <= 4, and PSL_2(R) x
//! PSL_2(R): Iwasawa and Cartan decompositions, parabolic subgroup data with
//! membership tests, flag boundaries and the boundary Radon-Nikodym cocycle.

pub mod circle;
pub mod flags;

pub use circle::{boundary_angle_map, boundary_derivative, cocycle, psl2_to_so21};
pub use flags::{flag_action, flag_distance, BoundaryPoint};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LieError {
    #[error("matrix is not in the group (det defect {0:.3e})")]
    NotUnimodular(f64),
    #[error("group kinds differ")]
    KindMismatch,
    #[error("element is not in the required subgroup (defect {0:.3e})")]
    NotInSubgroup(f64),
    #[error("unsupported group for this operation")]
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    SlN(usize),
    Psl2Pair,
}

impl GroupKind {
    pub fn factor_dims(&self) -> Vec<usize> {
        match self {
            GroupKind::SlN(n) => vec![*n],
            GroupKind::Psl2Pair => vec![2, 2],
        }
    }
}

/// A real unimodular matrix, or a pair of 2x2 unimodular matrices with the
/// projective sign fixed (first nonzero entry positive).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupElement {
    pub kind: GroupKind,
    pub mats: Vec<DMatrix<f64>>,
}

impl GroupElement {
    pub fn sl(mat: DMatrix<f64>) -> Result<GroupElement, LieError> {
        let n = mat.nrows();
        let det = mat.determinant();
        if (det - 1.0).abs() > 1e-10 {
            return Err(LieError::NotUnimodular((det - 1.0).abs()));
        }
        let mat = &mat / det.powf(1.0 / n as f64);
        Ok(GroupElement { kind: GroupKind::SlN(n), mats: vec![mat] })
    }

    /// PSL_2(R) x PSL_2(R); each factor may be given up to sign.
    pub fn psl2_pair(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<GroupElement, LieError> {
        let mut mats = Vec::with_capacity(2);
        for m in [a, b] {
            let det = m.determinant();
            if (det - 1.0).abs() > 1e-10 {
                return Err(LieError::NotUnimodular((det - 1.0).abs()));
            }
            mats.push(psl2_canonical(&(&m / det.sqrt())));
        }
        Ok(GroupElement { kind: GroupKind::Psl2Pair, mats })
    }

    pub fn identity(kind: &GroupKind) -> GroupElement {
        let mats = kind.factor_dims().iter().map(|n| DMatrix::identity(*n, *n)).collect();
        GroupElement { kind: kind.clone(), mats }
    }

    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        assert_eq!(self.kind, other.kind);
        let mats = self
            .mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| canonical_for(&self.kind, a * b))
            .collect();
        GroupElement { kind: self.kind.clone(), mats }
    }

    pub fn inverse(&self) -> GroupElement {
        let mats = self
            .mats
            .iter()
            .map(|m| canonical_for(&self.kind, m.clone().try_inverse().expect("unimodular")))
            .collect();
        GroupElement { kind: self.kind.clone(), mats }
    }

    pub fn dist(&self, other: &GroupElement) -> f64 {
        self.mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_orthogonal(&self, tol: f64) -> bool {
        self.mats.iter().all(|m| {
            let n = m.nrows();
            (m.transpose() * m - DMatrix::<f64>::identity(n, n)).norm() < tol
        })
    }

    /// Frobenius distance to the identity, maximized over factors.
    pub fn dist_to_identity(&self) -> f64 {
        self.mats
            .iter()
            .map(|m| {
                let n = m.nrows();
                (m - DMatrix::<f64>::identity(n, n)).norm()
            })
            .fold(0.0, f64::max)
    }
}

fn canonical_for(kind: &GroupKind, m: DMatrix<f64>) -> DMatrix<f64> {
    match kind {
        GroupKind::SlN(_) => m,
        GroupKind::Psl2Pair => psl2_canonical(&m),
    }
}

/// Fixes the projective sign: the first nonzero entry (row-major) positive.
pub fn psl2_canonical(m: &DMatrix<f64>) -> DMatrix<f64> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v.abs() > 1e-14 {
                return if v < 0.0 { -m.clone() } else { m.clone() };
            }
        }
    }
    m.clone()
}

/// A parabolic subgroup P_Theta together with its derived block structure and
/// the subgroups M_Q, A_Q, A'_Q, N_Q, Z_Q.
///
/// For SL(n), `theta` is the set of break positions in {1, .., n-1}: P_Theta
/// consists of the matrices vanishing below the diagonal in those coordinates,
/// so `theta` = all of {1..n-1} is the minimal parabolic and `theta` = {}
/// gives the whole group. For the product group, `theta` lists the factors
/// carrying the proper parabolic P_* (upper triangular).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParabolicData {
    pub kind: GroupKind,
    pub theta: Vec<usize>,
    pub blocks: Vec<usize>,
}

impl ParabolicData {
    pub fn sl(n: usize, theta: &[usize]) -> ParabolicData {
        let mut t: Vec<usize> = theta.to_vec();
        t.sort_unstable();
        t.dedup();
        assert!(t.iter().all(|i| *i >= 1 && *i < n), "breaks lie in 1..n");
        let mut blocks = Vec::new();
        let mut prev = 0usize;
        for &b in &t {
            blocks.push(b - prev);
            prev = b;
        }
        blocks.push(n - prev);
        ParabolicData { kind: GroupKind::SlN(n), theta: t, blocks }
    }

    /// Minimal parabolic of SL(n).
    pub fn sl_minimal(n: usize) -> ParabolicData {
        ParabolicData::sl(n, &(1..n).collect::<Vec<_>>())
    }

    /// For PSL2 x PSL2: the factors in `theta` carry the proper parabolic.
    pub fn psl2_pair(theta: &[usize]) -> ParabolicData {
        let mut t: Vec<usize> = theta.to_vec();
        t.sort_unstable();
        t.dedup();
        assert!(t.iter().all(|i| *i < 2));
        ParabolicData { kind: GroupKind::Psl2Pair, theta: t, blocks: vec![] }
    }

    /// The example parabolic of the product group: full first factor, proper
    /// parabolic in the second.
    pub fn psl2_pair_example() -> ParabolicData {
        ParabolicData::psl2_pair(&[1])
    }

    /// Block partitions per factor (SL(n): one entry; products: one per
    /// factor, the full-group factor getting the single block [2]).
    pub fn factor_blocks(&self) -> Vec<Vec<usize>> {
        match &self.kind {
            GroupKind::SlN(_) => vec![self.blocks.clone()],
            GroupKind::Psl2Pair => (0..2)
                .map(|j| if self.theta.contains(&j) { vec![1, 1] } else { vec![2] })
                .collect(),
        }
    }

    /// The opposite parabolic's data (types swap under the longest Weyl
    /// element: block sizes reverse; for the product, theta is unchanged).
    pub fn opposite(&self) -> ParabolicData {
        match &self.kind {
            GroupKind::SlN(n) => {
                let mut blocks = self.blocks.clone();
                blocks.reverse();
                let mut theta = Vec::new();
                let mut acc = 0;
                for b in &blocks[..blocks.len() - 1] {
                    acc += b;
                    theta.push(acc);
                }
                ParabolicData { kind: GroupKind::SlN(*n), theta, blocks }
            }
            GroupKind::Psl2Pair => self.clone(),
        }
    }

    // -- membership defects (0 = member) ----------------------------------

    /// Defect from P_Theta: mass below the block diagonal.
    pub fn p_defect(&self, g: &GroupElement) -> f64 {
        self.block_defect(g, |r_blk, c_blk| r_blk <= c_blk)
    }

    /// Defect from Z_Q (block diagonal).
    pub fn z_defect(&self, g: &GroupElement) -> f64 {
        self.block_defect(g, |r_blk, c_blk| r_blk == c_blk)
    }

    /// Defect from M_Q = K intersect Z_Q.
    pub fn m_defect(&self, g: &GroupElement) -> f64 {
        let mut d = self.z_defect(g);
        for m in &g.mats {
            let n = m.nrows();
            d = d.max((m.transpose() * m - DMatrix::<f64>::identity(n, n)).norm());
        }
        d
    }

    /// Defect from A_Q (block diagonal, symmetric positive definite, det 1).
    pub fn a_defect(&self, g: &GroupElement) -> f64 {
        let mut d = self.z_defect(g);
        for m in &g.mats {
            d = d.max((m - m.transpose()).norm());
            let eig = m.clone().symmetric_part().symmetric_eigen().eigenvalues;
            d = d.max((-eig.min()).max(0.0));
        }
        d
    }

    /// Defect from A'_Q: diagonal, constant on blocks, positive.
    pub fn a_prime_defect(&self, g: &GroupElement) -> f64 {
        let mut d: f64 = 0.0;
        for (m, blocks) in g.mats.iter().zip(self.factor_blocks()) {
            let n = m.nrows();
            let mut off_diag = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off_diag += m[(i, j)] * m[(i, j)];
                    }
                }
            }
            d = d.max(off_diag.sqrt());
            let mut start = 0;
            for b in blocks {
                for i in start..start + b {
                    d = d.max((m[(i, i)] - m[(start, start)]).abs());
                    d = d.max((-m[(i, i)]).max(0.0));
                }
                start += b;
            }
        }
        d
    }

    /// Defect from N_Q: identity diagonal blocks, zero below.
    pub fn n_defect(&self, g: &GroupElement) -> f64 {
        let mut d = self.p_defect(g);
        for (m, blocks) in g.mats.iter().zip(self.factor_blocks()) {
            let mut start = 0;
            for b in blocks {
                let mut blk = m.view((start, start), (b, b)).into_owned();
                for i in 0..b {
                    blk[(i, i)] -= 1.0;
                }
                d = d.max(blk.norm());
                start += b;
            }
        }
        d
    }

    fn block_defect(
        &self,
        g: &GroupElement,
        keep: impl Fn(usize, usize) -> bool,
    ) -> f64 {
        let mut d: f64 = 0.0;
        for (m, blocks) in g.mats.iter().zip(self.factor_blocks()) {
            let index_block = |i: usize| -> usize {
                let mut acc = 0;
                for (bi, b) in blocks.iter().enumerate() {
                    acc += b;
                    if i < acc {
                        return bi;
                    }
                }
                unreachable!()
            };
            let n = m.nrows();
            let mut mass = 0.0;
            for r in 0..n {
                for c in 0..n {
                    if !keep(index_block(r), index_block(c)) {
                        mass += m[(r, c)] * m[(r, c)];
                    }
                }
            }
            d = d.max(mass.sqrt());
        }
        d
    }

    /// Factors q in Q = P_Theta as m a n with m in M_Q, a in A_Q, n in N_Q
    /// (polar decomposition of the diagonal blocks).
    pub fn q_factor(
        &self,
        q: &GroupElement,
    ) -> Result<(GroupElement, GroupElement, GroupElement), LieError> {
        let defect = self.p_defect(q);
        if defect > 1e-9 {
            return Err(LieError::NotInSubgroup(defect));
        }
        let mut ms = Vec::new();
        let mut aas = Vec::new();
        let mut ns = Vec::new();
        for (mat, blocks) in q.mats.iter().zip(self.factor_blocks()) {
            let n = mat.nrows();
            let mut m_f = DMatrix::<f64>::zeros(n, n);
            let mut a_f = DMatrix::<f64>::zeros(n, n);
            let mut start = 0;
            for b in blocks {
                let blk = mat.view((start, start), (b, b)).into_owned();
                // polar: blk = m_blk * p_blk with m orthogonal, p SPD
                let sq = (blk.transpose() * &blk).symmetric_part();
                let (p, p_inv) = crate::manifold::spd_sqrt_and_inv_sqrt(&sq);
                let m_blk = &blk * &p_inv;
                m_f.view_mut((start, start), (b, b)).copy_from(&m_blk);
                a_f.view_mut((start, start), (b, b)).copy_from(&p);
                start += b;
            }
            let n_f = (&m_f * &a_f).try_inverse().expect("ma invertible") * mat;
            ms.push(m_f);
            aas.push(a_f);
            ns.push(n_f);
        }
        Ok((
            GroupElement { kind: q.kind.clone(), mats: ms },
            GroupElement { kind: q.kind.clone(), mats: aas },
            GroupElement { kind: q.kind.clone(), mats: ns },
        ))
    }
}

/// Minimal-parabolic Iwasawa decomposition g = k a n with k orthogonal, a
/// positive diagonal of determinant one, n unit upper triangular; computed by
/// columnwise Gram-Schmidt (QR), so upper-triangular positive-diagonal inputs
/// are fixed points.
pub fn iwasawa(
    g: &GroupElement,
) -> Result<(GroupElement, GroupElement, GroupElement), LieError> {
    let minimal = match &g.kind {
        GroupKind::SlN(n) => ParabolicData::sl_minimal(*n),
        GroupKind::Psl2Pair => ParabolicData::psl2_pair(&[0, 1]),
    };
    generalized_iwasawa(g, &minimal)
}

/// Generalized Iwasawa decomposition g = k a_Q n_Q via the block UDU
/// factorization of g^T g = U^T D U (U block-unit-upper, D block-diagonal
/// SPD), giving a_Q = D^{1/2}, n_Q = U, k = g n_Q^{-1} a_Q^{-1}.
pub fn generalized_iwasawa(
    g: &GroupElement,
    q: &ParabolicData,
) -> Result<(GroupElement, GroupElement, GroupElement), LieError> {
    if g.kind != q.kind {
        return Err(LieError::KindMismatch);
    }
    let mut ks = Vec::new();
    let mut aas = Vec::new();
    let mut ns = Vec::new();
    for (mat, blocks) in g.mats.iter().zip(q.factor_blocks()) {
        let m = (mat.transpose() * mat).symmetric_part();
        let (u, d) = block_udu(&m, &blocks);
        let (a, a_inv) = block_sqrt(&d, &blocks);
        let u_inv = unit_upper_inverse(&u, &blocks);
        let k = mat * &u_inv * &a_inv;
        ks.push(k);
        aas.push(a);
        ns.push(u);
    }
    Ok((
        GroupElement { kind: g.kind.clone(), mats: ks },
        GroupElement { kind: g.kind.clone(), mats: aas },
        GroupElement { kind: g.kind.clone(), mats: ns },
    ))
}

/// M = U^T D U with U block-unit-upper-triangular and D block-diagonal SPD.
fn block_udu(m: &DMatrix<f64>, blocks: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let starts: Vec<usize> = blocks
        .iter()
        .scan(0usize, |acc, b| {
            let s = *acc;
            *acc += b;
            Some(s)
        })
        .collect();
    let mut u = DMatrix::<f64>::identity(n, n);
    let mut d = DMatrix::<f64>::zeros(n, n);
    let mut rest = m.clone();
    for (bi, (&s, &b)) in starts.iter().zip(blocks).enumerate() {
        let d_blk = rest.view((s, s), (b, b)).into_owned();
        d.view_mut((s, s), (b, b)).copy_from(&d_blk);
        let d_inv = d_blk.clone().try_inverse().expect("leading block SPD");
        // row of U to the right of the diagonal
        for (bj, (&s2, &b2)) in starts.iter().zip(blocks).enumerate() {
            if bj <= bi {
                continue;
            }
            let u_blk = &d_inv * rest.view((s, s2), (b, b2)).into_owned();
            u.view_mut((s, s2), (b, b2)).copy_from(&u_blk);
        }
        // Schur update of the trailing principal submatrix
        let mut next = rest.clone();
        for (bj, (&s2, &b2)) in starts.iter().zip(blocks).enumerate() {
            if bj <= bi {
                continue;
            }
            for (bk, (&s3, &b3)) in starts.iter().zip(blocks).enumerate() {
                if bk <= bi {
                    continue;
                }
                let u_j = u.view((s, s2), (b, b2)).into_owned();
                let u_k = u.view((s, s3), (b, b3)).into_owned();
                let upd = u_j.transpose() * &d_blk * u_k;
                let cur = rest.view((s2, s3), (b2, b3)).into_owned();
                next.view_mut((s2, s3), (b2, b3)).copy_from(&(cur - upd));
            }
        }
        rest = next;
    }
    (u, d)
}

fn block_sqrt(d: &DMatrix<f64>, blocks: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = d.nrows();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut a_inv = DMatrix::<f64>::zeros(n, n);
    let mut s = 0;
    for &b in blocks {
        let blk = d.view((s, s), (b, b)).into_owned().symmetric_part();
        let (sq, isq) = crate::manifold::spd_sqrt_and_inv_sqrt(&blk);
        a.view_mut((s, s), (b, b)).copy_from(&sq);
        a_inv.view_mut((s, s), (b, b)).copy_from(&isq);
        s += b;
    }
    (a, a_inv)
}

fn unit_upper_inverse(u: &DMatrix<f64>, _blocks: &[usize]) -> DMatrix<f64> {
    u.clone().try_inverse().expect("unit upper triangular")
}

/// Cartan (KAK) decomposition g = k1 exp(H) k2 via the SVD; H is the vector
/// of log singular values in decreasing order, per factor.
pub struct CartanDecomposition {
    pub k1: GroupElement,
    pub h: Vec<DVector<f64>>,
    pub k2: GroupElement,
}

impl CartanDecomposition {
    pub fn reconstruct(&self) -> GroupElement {
        let mats = self
            .k1
            .mats
            .iter()
            .zip(&self.h)
            .zip(&self.k2.mats)
            .map(|((k1, h), k2)| {
                let n = k1.nrows();
                let e = DMatrix::from_diagonal(&DVector::from_iterator(
                    n,
                    h.iter().map(|t| t.exp()),
                ));
                canonical_for(&self.k1.kind, k1 * e * k2)
            })
            .collect();
        GroupElement { kind: self.k1.kind.clone(), mats }
    }
}

pub fn cartan(g: &GroupElement) -> Result<CartanDecomposition, LieError> {
    let mut k1s = Vec::new();
    let mut hs = Vec::new();
    let mut k2s = Vec::new();
    for mat in &g.mats {
        let n = mat.nrows();
        // eigen route: with k1 := g V S^-1 the reconstruction k1 S V^T = g
        // holds up to the orthonormality defect of V alone
        let se = (mat.transpose() * mat).symmetric_part().symmetric_eigen();
        let mut sv: Vec<(f64, usize)> =
            se.eigenvalues.iter().cloned().zip(0..n).collect();
        sv.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut v = DMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, sv[c].1)]);
        if v.determinant() < 0.0 {
            v.column_mut(n - 1).neg_mut();
        }
        let sigma: Vec<f64> = sv.iter().map(|(l, _)| l.max(1e-300).sqrt()).collect();
        let mut k1 = mat * &v;
        for c in 0..n {
            let mut col = k1.column_mut(c);
            col /= sigma[c];
        }
        if k1.determinant() < 0.0 {
            // det g = +1 forces matching reflections in k1 and v
            k1.column_mut(n - 1).neg_mut();
            v.column_mut(n - 1).neg_mut();
        }
        let h = DVector::from_iterator(n, sigma.iter().map(|s| s.ln()));
        k1s.push(k1);
        hs.push(h);
        k2s.push(v.transpose());
    }
    Ok(CartanDecomposition {
        k1: GroupElement { kind: g.kind.clone(), mats: k1s },
        h: hs,
        k2: GroupElement { kind: g.kind.clone(), mats: k2s },
    })
}

pub mod sampling {
    //! Seeded random group elements.

    use super::*;
    use rand::Rng;

    pub fn random_rotation<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
        loop {
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0f64..1.0));
            let qr = m.qr();
            let mut q = qr.q();
            let r = qr.r();
            for i in 0..n {
                if r[(i, i)] < 0.0 {
                    q.column_mut(i).neg_mut();
                }
            }
            if q.determinant() < 0.0 {
                q.column_mut(n - 1).neg_mut();
            }
            if q.determinant() > 0.5 {
                return q;
            }
        }
    }

    /// Well-conditioned random element of SL(n, R).
    pub fn random_sl_mat<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
        loop {
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0f64..1.0));
            let det = m.determinant();
            if det.abs() < 0.15 {
                continue;
            }
            let scaled = &m / det.abs().powf(1.0 / n as f64);
            if det > 0.0 {
                return scaled;
            }
            // flip one column to land in SL rather than det = -1
            let mut s = scaled;
            s.column_mut(0).neg_mut();
            return s;
        }
    }

    pub fn random_element<R: Rng>(kind: &GroupKind, rng: &mut R) -> GroupElement {
        match kind {
            GroupKind::SlN(n) => GroupElement::sl(random_sl_mat(*n, rng)).unwrap(),
            GroupKind::Psl2Pair => GroupElement::psl2_pair(
                random_sl_mat(2, rng),
                random_sl_mat(2, rng),
            )
            .unwrap(),
        }
    }

    /// Random element of M_Q (block-diagonal orthogonal, overall det 1 per
    /// factor).
    pub fn random_m_q<R: Rng>(q: &ParabolicData, rng: &mut R) -> GroupElement {
        let mats = q
            .factor_blocks()
            .iter()
            .zip(q.kind.factor_dims())
            .map(|(blocks, n)| loop {
                let mut m = DMatrix::<f64>::zeros(n, n);
                let mut s = 0;
                for &b in blocks {
                    let mut blk = random_rotation(b, rng);
                    if b >= 1 && rng.gen_bool(0.5) {
                        // allow the non-identity component when available
                        blk.row_mut(0).neg_mut();
                    }
                    m.view_mut((s, s), (b, b)).copy_from(&blk);
                    s += b;
                }
                if (m.determinant() - 1.0).abs() < 1e-8 {
                    return m;
                }
            })
            .collect();
        let g = GroupElement { kind: q.kind.clone(), mats };
        match q.kind {
            GroupKind::Psl2Pair => {
                GroupElement { kind: q.kind.clone(), mats: g.mats.iter().map(psl2_canonical).collect() }
            }
            _ => g,
        }
    }

    /// Random element of A'_Q (diagonal, block-constant, positive, det 1).
    pub fn random_a_prime_q<R: Rng>(q: &ParabolicData, rng: &mut R) -> GroupElement {
        let mats = q
            .factor_blocks()
            .iter()
            .zip(q.kind.factor_dims())
            .map(|(blocks, n)| {
                let mut exps: Vec<f64> = blocks
                    .iter()
                    .map(|_| rng.gen_range(-0.8f64..0.8))
                    .collect();
                // enforce det 1: weighted sum of block exponents is zero
                let total: f64 = blocks
                    .iter()
                    .zip(&exps)
                    .map(|(b, e)| *b as f64 * e)
                    .sum();
                let w = n as f64;
                exps.iter_mut().for_each(|e| *e -= total / w);
                let mut m = DMatrix::<f64>::zeros(n, n);
                let mut s = 0;
                for (b, e) in blocks.iter().zip(&exps) {
                    for i in s..s + b {
                        m[(i, i)] = e.exp();
                    }
                    s += b;
                }
                m
            })
            .collect();
        GroupElement { kind: q.kind.clone(), mats }
    }

    /// Random element of N_Q.
    pub fn random_n_q<R: Rng>(q: &ParabolicData, rng: &mut R) -> GroupElement {
        let mats = q
            .factor_blocks()
            .iter()
            .zip(q.kind.factor_dims())
            .map(|(blocks, n)| {
                let mut m = DMatrix::<f64>::identity(n, n);
                let starts: Vec<usize> = blocks
                    .iter()
                    .scan(0usize, |acc, b| {
                        let s = *acc;
                        *acc += b;
                        Some(s)
                    })
                    .collect();
                for (bi, (&si, &bsi)) in starts.iter().zip(blocks).enumerate() {
                    for (bj, (&sj, &bsj)) in starts.iter().zip(blocks).enumerate() {
                        if bj > bi {
                            for r in si..si + bsi {
                                for c in sj..sj + bsj {
                                    m[(r, c)] = rng.gen_range(-0.8f64..0.8);
                                }
                            }
                        }
                    }
                }
                m
            })
            .collect();
        GroupElement { kind: q.kind.clone(), mats }
    }

    /// Random element of Q sampled as m a n.
    pub fn random_q<R: Rng>(q: &ParabolicData, rng: &mut R) -> GroupElement {
        let m = random_m_q(q, rng);
        // a in A_Q: block-diagonal SPD with det 1 per factor
        let mats = q
            .factor_blocks()
            .iter()
            .zip(q.kind.factor_dims())
            .map(|(blocks, n)| {
                let mut a = DMatrix::<f64>::zeros(n, n);
                let mut s = 0;
                for &b in blocks {
                    let r = DMatrix::from_fn(b, b, |_, _| rng.gen_range(-0.6f64..0.6));
                    let blk = crate::manifold::spd_exp(&r.symmetric_part());
                    a.view_mut((s, s), (b, b)).copy_from(&blk);
                    s += b;
                }
                let det = a.determinant();
                &a / det.powf(1.0 / n as f64)
            })
            .collect();
        let a = GroupElement { kind: q.kind.clone(), mats };
        let n = random_n_q(q, rng);
        m.mul(&a).mul(&n)
    }
}

#[cfg(test)]
mod tests;
