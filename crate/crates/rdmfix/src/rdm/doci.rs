//! Seniority-zero (doubly-occupied) density matrices: the pair matrix, the
//! exchange matrix, the reformulated positivity conditions, and the
//! embedding into the spin-orbital representation.

use nalgebra::{DMatrix, DVector};

use super::{ConditionKind, ConditionMatrix, Spin2Rdm};
use crate::error::{RdmError, Result};
use crate::rdm::spin::pair_index;

/// Two-particle density matrix of a seniority-zero state: an `L x L` pair
/// matrix `Pi` and an `L x L` exchange matrix `D` with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Doci2Rdm {
    l: usize,
    n: usize,
    pi: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl Doci2Rdm {
    pub fn new(l: usize, n: usize, pi: DMatrix<f64>, d: DMatrix<f64>) -> Result<Doci2Rdm> {
        if l == 0 {
            return Err(RdmError::Domain("need at least one spatial orbital".into()));
        }
        if n < 2 || n % 2 != 0 || n > 2 * l {
            return Err(RdmError::Domain(format!(
                "electron count {n} invalid for {l} spatial orbitals"
            )));
        }
        for (name, m) in [("pair", &pi), ("exchange", &d)] {
            if m.nrows() != l || m.ncols() != l {
                return Err(RdmError::DimensionMismatch(format!(
                    "{name} matrix must be {l}x{l}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        for a in 0..l {
            if d[(a, a)] != 0.0 {
                return Err(RdmError::Domain(format!(
                    "exchange matrix diagonal entry ({a},{a}) must be zero"
                )));
            }
        }
        Ok(Doci2Rdm { l, n, pi, d })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Electron pair count `N/2`.
    pub fn np(&self) -> usize {
        self.n / 2
    }

    pub fn pair_matrix(&self) -> &DMatrix<f64> {
        &self.pi
    }

    pub fn exchange_matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// Orbital occupations read off the pair matrix diagonal.
    pub fn occupations(&self) -> DVector<f64> {
        self.pi.diagonal()
    }

    /// `Tr Pi`, with target `N/2`.
    pub fn pair_trace(&self) -> f64 {
        self.pi.trace()
    }

    /// `sum_ab D_ab`, with target `(N/2)(N/2 - 1)`.
    pub fn exchange_sum(&self) -> f64 {
        self.d.iter().sum()
    }

    pub fn pair_trace_target(&self) -> f64 {
        self.np() as f64
    }

    pub fn exchange_sum_target(&self) -> f64 {
        let np = self.np() as f64;
        np * (np - 1.0)
    }

    /// Residual of the two orbital-occupation expressions: the pair-matrix
    /// diagonal against the exchange row sums scaled by `1/(N/2 - 1)`.
    /// `None` for a single pair, where the exchange matrix is identically
    /// zero and the second expression degenerates.
    pub fn occupation_consistency(&self) -> Option<f64> {
        if self.np() < 2 {
            return None;
        }
        let scale = 1.0 / (self.np() as f64 - 1.0);
        let mut sq = 0.0;
        for a in 0..self.l {
            let row: f64 = (0..self.l).map(|b| self.d[(a, b)]).sum();
            let diff = self.pi[(a, a)] - scale * row;
            sq += diff * diff;
        }
        Some(sq.sqrt())
    }

    /// Replaces both matrices, keeping the sizes.
    pub(crate) fn with_parts(&self, pi: DMatrix<f64>, d: DMatrix<f64>) -> Result<Doci2Rdm> {
        Doci2Rdm::new(self.l, self.n, pi, d)
    }
}

/// All reformulated positivity-condition matrices of a seniority-zero
/// density matrix: the hole-pair matrix, the hole-exchange matrix (an
/// entrywise condition, diagonal ignored), the particle-hole pair matrix,
/// and the `L(L-1)/2` particle-hole `2x2` blocks for `a < b`.
pub fn doci_conditions(r: &Doci2Rdm) -> Vec<ConditionMatrix> {
    let l = r.l;
    let pi = &r.pi;
    let d = &r.d;

    let q_pi = DMatrix::from_fn(l, l, |a, b| {
        if a == b {
            1.0 - 2.0 * pi[(a, a)] + pi[(a, b)]
        } else {
            pi[(a, b)]
        }
    });
    let q_d = DMatrix::from_fn(l, l, |a, b| {
        if a == b {
            0.0
        } else {
            d[(a, b)] + 1.0 - pi[(a, a)] - pi[(b, b)]
        }
    });
    let g_pi = DMatrix::from_fn(l, l, |a, b| {
        if a == b {
            pi[(a, a)]
        } else {
            d[(a, b)]
        }
    });

    let mut out = vec![
        ConditionMatrix::new(ConditionKind::QPi, q_pi, l, r.n),
        ConditionMatrix::new(ConditionKind::QD, q_d, l, r.n),
        ConditionMatrix::new(ConditionKind::GPi, g_pi, l, r.n),
    ];
    for b in 1..l {
        for a in 0..b {
            let block = DMatrix::from_row_slice(
                2,
                2,
                &[
                    pi[(a, a)] - d[(a, b)],
                    pi[(a, b)],
                    pi[(a, b)],
                    pi[(b, b)] - d[(a, b)],
                ],
            );
            out.push(ConditionMatrix::new(
                ConditionKind::G2x2 { a, b },
                block,
                l,
                r.n,
            ));
        }
    }
    out
}

/// Inverts one condition map back onto the density matrix. `context`
/// supplies the parts the condition does not determine (and, for the `2x2`
/// blocks, the reference diagonal used to split the blocks into pair and
/// exchange contributions).
pub fn doci_invert(c: &ConditionMatrix, context: &Doci2Rdm) -> Result<Doci2Rdm> {
    let l = context.l;
    if c.l != l || c.n != context.n {
        return Err(RdmError::DimensionMismatch(format!(
            "condition matrix built for L={}, N={} but context has L={l}, N={}",
            c.l, c.n, context.n
        )));
    }
    match c.kind {
        ConditionKind::QPi => {
            let pi = DMatrix::from_fn(l, l, |a, b| {
                if a == b {
                    1.0 - c.matrix[(a, a)]
                } else {
                    c.matrix[(a, b)]
                }
            });
            context.with_parts(pi, context.d.clone())
        }
        ConditionKind::QD => {
            let pi = &context.pi;
            let d = DMatrix::from_fn(l, l, |a, b| {
                if a == b {
                    0.0
                } else {
                    c.matrix[(a, b)] - 1.0 + pi[(a, a)] + pi[(b, b)]
                }
            });
            context.with_parts(pi.clone(), d)
        }
        ConditionKind::GPi => {
            let mut pi = context.pi.clone();
            let mut d = context.d.clone();
            for a in 0..l {
                pi[(a, a)] = c.matrix[(a, a)];
                for b in 0..l {
                    if a != b {
                        d[(a, b)] = c.matrix[(a, b)];
                    }
                }
            }
            context.with_parts(pi, d)
        }
        _ => Err(RdmError::Domain(format!(
            "no single-matrix inverse for condition {}; 2x2 blocks are \
             reconciled through reconcile_g2x2",
            c.kind.name()
        ))),
    }
}

/// Reconciles the full family of projected `2x2` particle-hole blocks into
/// one density matrix. Each block constrains four unknowns with three
/// entries, so:
/// the exchange entry takes the mean of its two diagonal-derived proposals
/// (computed against the snapshot diagonal), the off-diagonal pair entry is
/// read off directly, and each pair-diagonal entry takes the mean of its
/// `L - 1` per-block proposals.
pub fn reconcile_g2x2(blocks: &[ConditionMatrix], snapshot: &Doci2Rdm) -> Result<Doci2Rdm> {
    let l = snapshot.l;
    let expected = l * (l - 1) / 2;
    if blocks.len() != expected {
        return Err(RdmError::DimensionMismatch(format!(
            "expected {expected} blocks for L={l}, got {}",
            blocks.len()
        )));
    }
    let mut pi = snapshot.pi.clone();
    let mut d = snapshot.d.clone();
    let mut diag_sum = vec![0.0; l];
    for c in blocks {
        let (a, b) = match c.kind {
            ConditionKind::G2x2 { a, b } => (a, b),
            _ => {
                return Err(RdmError::Domain(format!(
                    "expected a 2x2 block, got {}",
                    c.kind.name()
                )))
            }
        };
        let m = &c.matrix;
        let d_new = 0.5
            * ((snapshot.pi[(a, a)] - m[(0, 0)]) + (snapshot.pi[(b, b)] - m[(1, 1)]));
        d[(a, b)] = d_new;
        d[(b, a)] = d_new;
        let p_off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
        pi[(a, b)] = p_off;
        pi[(b, a)] = p_off;
        diag_sum[a] += m[(0, 0)] + d_new;
        diag_sum[b] += m[(1, 1)] + d_new;
    }
    if l > 1 {
        for a in 0..l {
            pi[(a, a)] = diag_sum[a] / (l - 1) as f64;
        }
    }
    snapshot.with_parts(pi, d)
}

/// Seniority-zero energy `E = sum_ab (Kpi_ab Pi_ab + Kd_ab D_ab)`. The
/// exchange-coupling diagonal is ignored since the exchange matrix has a
/// zero diagonal by convention.
pub fn doci_energy(r: &Doci2Rdm, k_pi: &DMatrix<f64>, k_d: &DMatrix<f64>) -> Result<f64> {
    let l = r.l;
    for (name, m) in [("pair", k_pi), ("exchange", k_d)] {
        if m.nrows() != l || m.ncols() != l {
            return Err(RdmError::DimensionMismatch(format!(
                "{name} coupling must be {l}x{l}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let mut e = 0.0;
    for a in 0..l {
        for b in 0..l {
            e += k_pi[(a, b)] * r.pi[(a, b)];
            if a != b {
                e += k_d[(a, b)] * r.d[(a, b)];
            }
        }
    }
    Ok(e)
}

/// Expands a seniority-zero density matrix into the spin-orbital
/// representation: the pair matrix fills the doubly-occupied block and the
/// exchange matrix fills the four same-level-pair diagonal entries per
/// orbital pair.
pub fn embed_to_spin(r: &Doci2Rdm) -> Spin2Rdm {
    let l = r.l;
    let mut g = Spin2Rdm::zeros(l, r.n).expect("sizes validated at construction");
    let up = |a: usize| 2 * a;
    let dn = |a: usize| 2 * a + 1;
    {
        let m = g.packed_mut();
        for a in 0..l {
            let pa = pair_index(up(a), dn(a));
            for b in 0..l {
                let pb = pair_index(up(b), dn(b));
                m[(pa, pb)] = r.pi[(a, b)];
            }
        }
        for b in 1..l {
            for a in 0..b {
                let v = r.d[(a, b)];
                for p in [
                    pair_index(up(a), up(b)),
                    pair_index(up(a), dn(b)),
                    pair_index(dn(a), up(b)),
                    pair_index(dn(a), dn(b)),
                ] {
                    m[(p, p)] = v;
                }
            }
        }
    }
    g
}

/// Contracts a spin-orbital density matrix back onto its seniority-zero
/// blocks: the doubly-occupied block becomes the pair matrix and the four
/// same-level-pair diagonal entries are averaged into the exchange matrix.
pub fn extract_doci(g2: &Spin2Rdm) -> Result<Doci2Rdm> {
    let l = g2.l();
    let up = |a: usize| 2 * a;
    let dn = |a: usize| 2 * a + 1;
    let pi = DMatrix::from_fn(l, l, |a, b| g2.get(up(a), dn(a), up(b), dn(b)));
    let mut d = DMatrix::zeros(l, l);
    for b in 1..l {
        for a in 0..b {
            let v = 0.25
                * (g2.get(up(a), up(b), up(a), up(b))
                    + g2.get(up(a), dn(b), up(a), dn(b))
                    + g2.get(dn(a), up(b), dn(a), up(b))
                    + g2.get(dn(a), dn(b), dn(a), dn(b)));
            d[(a, b)] = v;
            d[(b, a)] = v;
        }
    }
    Doci2Rdm::new(l, g2.n(), pi, d)
}

/// Total magnitude of the entries a seniority-zero state forbids: every
/// canonical packed entry not of the doubly-occupied or same-level-pair
/// diagonal type, counted once.
pub fn off_seniority_sum(g2: &Spin2Rdm) -> f64 {
    let l = g2.l();
    let m = 2 * l;
    let level = |alpha: usize| alpha / 2;
    let packed = g2.packed();
    let mut s = 0.0;
    for b in 1..m {
        for a in 0..b {
            let p = pair_index(a, b);
            for dd in 1..m {
                for c in 0..dd {
                    let q = pair_index(c, dd);
                    if q > p {
                        continue;
                    }
                    let pair_block = level(a) == level(b) && level(c) == level(dd);
                    let exchange_entry = p == q && level(a) != level(b);
                    if !(pair_block || exchange_entry) {
                        s += packed[(p, q)].abs();
                    }
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdm::{contract_one_rdm, g_from_p, q_from_p};
    use crate::specproj::{Spectrum, SymMatrix};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_pair_ground() -> Doci2Rdm {
        // one pair sitting in the first of two orbitals
        let pi = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let d = DMatrix::zeros(2, 2);
        Doci2Rdm::new(2, 2, pi, d).unwrap()
    }

    fn random_exact(rng: &mut ChaCha8Rng, l: usize, np: usize) -> Doci2Rdm {
        let basis = crate::pairing::DociBasis::new(l, np).unwrap();
        let mut ci: Vec<f64> = (0..basis.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm: f64 = ci.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut ci {
            *v /= norm;
        }
        crate::pairing::doci_rdms_from_ci(&basis, &ci)
    }

    #[test]
    fn rejects_nonzero_exchange_diagonal() {
        let pi = DMatrix::identity(2, 2);
        let mut d = DMatrix::zeros(2, 2);
        d[(1, 1)] = 0.1;
        assert!(Doci2Rdm::new(2, 4, pi, d).is_err());
    }

    #[test]
    fn conditions_of_single_pair() {
        let r = single_pair_ground();
        let conds = doci_conditions(&r);
        let q_pi = &conds[0];
        assert_eq!(q_pi.kind, ConditionKind::QPi);
        assert_eq!(q_pi.matrix, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        let g_pi = &conds[2];
        assert_eq!(g_pi.kind, ConditionKind::GPi);
        assert_eq!(g_pi.matrix, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let block = &conds[3];
        assert_eq!(block.kind, ConditionKind::G2x2 { a: 0, b: 1 });
        assert_eq!(block.matrix, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn condition_traces_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for (l, np) in [(3, 1), (4, 2), (5, 3)] {
            let r = random_exact(&mut rng, l, np);
            let conds = doci_conditions(&r);
            for c in &conds {
                if let Some(err) = c.trace_error() {
                    assert!(err <= 1e-12, "{} trace error {err}", c.kind.name());
                }
            }
            assert!((conds[0].full_trace() - (l as f64 - np as f64)).abs() <= 1e-12);
        }
    }

    #[test]
    fn exact_states_satisfy_all_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for (l, np) in [(4, 2), (5, 2)] {
            let r = random_exact(&mut rng, l, np);
            let pi_spec =
                Spectrum::of(&SymMatrix::symmetrize(r.pair_matrix()).unwrap()).unwrap();
            assert!(pi_spec.min_eigenvalue() >= -1e-10);
            for c in doci_conditions(&r) {
                match c.kind {
                    ConditionKind::QD => {
                        for a in 0..l {
                            for b in 0..l {
                                if a != b {
                                    assert!(c.matrix[(a, b)] >= -1e-10);
                                }
                            }
                        }
                    }
                    _ => {
                        let spec =
                            Spectrum::of(&SymMatrix::symmetrize(&c.matrix).unwrap()).unwrap();
                        assert!(
                            spec.min_eigenvalue() >= -1e-10,
                            "{} has eigenvalue {}",
                            c.kind.name(),
                            spec.min_eigenvalue()
                        );
                    }
                }
            }
            for a in 0..l {
                for b in 0..l {
                    if a != b {
                        assert!(r.exchange_matrix()[(a, b)] >= -1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let r = random_exact(&mut rng, 4, 2);
        let conds = doci_conditions(&r);
        for c in &conds[..3] {
            let back = doci_invert(c, &r).unwrap();
            assert!((back.pair_matrix() - r.pair_matrix()).norm() <= 1e-12);
            assert!((back.exchange_matrix() - r.exchange_matrix()).norm() <= 1e-12);
        }
        let blocks: Vec<ConditionMatrix> = conds[3..].to_vec();
        let back = reconcile_g2x2(&blocks, &r).unwrap();
        assert!((back.pair_matrix() - r.pair_matrix()).norm() <= 1e-12);
        assert!((back.exchange_matrix() - r.exchange_matrix()).norm() <= 1e-12);
    }

    #[test]
    fn hole_pair_inverse_example() {
        let r = single_pair_ground();
        let q = ConditionMatrix::new(
            ConditionKind::QPi,
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            2,
            2,
        );
        let back = doci_invert(&q, &r).unwrap();
        assert_eq!(
            back.pair_matrix(),
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
        );
    }

    #[test]
    fn perturbed_blocks_reconcile_to_perturbation_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let r = random_exact(&mut rng, 4, 2);
        let scale = 1e-3;
        let mut blocks: Vec<ConditionMatrix> = doci_conditions(&r)[3..].to_vec();
        for c in &mut blocks {
            let e = rng.gen_range(-scale..scale);
            let f = rng.gen_range(-scale..scale);
            let h = rng.gen_range(-scale..scale);
            c.matrix[(0, 0)] += e;
            c.matrix[(1, 1)] += f;
            c.matrix[(0, 1)] += h;
            c.matrix[(1, 0)] += h;
        }
        let back = reconcile_g2x2(&blocks, &r).unwrap();
        let rebuilt = doci_conditions(&back);
        for (orig, new) in blocks.iter().zip(rebuilt[3..].iter()) {
            assert!(
                (&orig.matrix - &new.matrix).norm() <= 4.0 * scale,
                "reconciled block deviates beyond perturbation scale"
            );
        }
    }

    #[test]
    fn embedding_round_trips_and_matches_block_spectra() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let r = random_exact(&mut rng, 4, 2);
        let g2 = embed_to_spin(&r);
        assert!((g2.full_trace() - g2.full_trace_target()).abs() <= 1e-12);
        let back = extract_doci(&g2).unwrap();
        assert!((back.pair_matrix() - r.pair_matrix()).norm() <= 1e-14);
        assert!((back.exchange_matrix() - r.exchange_matrix()).norm() <= 1e-14);
        assert!(off_seniority_sum(&g2) == 0.0);

        // the full-basis condition spectra contain the block spectra
        let rho = contract_one_rdm(&g2).unwrap();
        let q_full = q_from_p(&g2, &rho).unwrap();
        let g_full = g_from_p(&g2, &rho).unwrap();
        for c in [q_full, g_full] {
            let spec = Spectrum::of(&SymMatrix::symmetrize(&c.matrix).unwrap()).unwrap();
            assert!(spec.min_eigenvalue() >= -1e-10, "{}", c.kind.name());
        }
        let conds = doci_conditions(&r);
        for c in &conds {
            if c.kind == ConditionKind::QD {
                continue;
            }
            let spec = Spectrum::of(&SymMatrix::symmetrize(&c.matrix).unwrap()).unwrap();
            assert!(spec.min_eigenvalue() >= -1e-10, "{}", c.kind.name());
        }
    }

    #[test]
    fn energy_of_single_pair() {
        // two levels at 1 and 2, no coupling: a doubly occupied lowest level
        let r = single_pair_ground();
        let k_pi = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let k_d = DMatrix::zeros(2, 2);
        assert_eq!(doci_energy(&r, &k_pi, &k_d).unwrap(), 2.0);
    }

    #[test]
    fn occupation_consistency_detects_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        let r = random_exact(&mut rng, 4, 2);
        assert!(r.occupation_consistency().unwrap() <= 1e-12);
        let mut d = r.exchange_matrix().clone();
        d[(0, 1)] += 0.2;
        d[(1, 0)] += 0.2;
        let bad = Doci2Rdm::new(r.l(), r.n(), r.pair_matrix().clone(), d).unwrap();
        assert!(bad.occupation_consistency().unwrap() > 0.1);
    }

    #[test]
    fn single_pair_has_no_consistency_check() {
        let r = single_pair_ground();
        assert!(r.occupation_consistency().is_none());
    }
}
