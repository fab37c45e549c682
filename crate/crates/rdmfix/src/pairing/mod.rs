//! Richardson pairing-model testbed: exact seniority-zero diagonalization,
//! a pair-coupled-cluster solver with response density matrices, and the
//! model energy functional.

mod pccd;

pub use pccd::{
    pccd_solve, pccd_solve_general, response_doci_rdms, PccdOptions, PccdState, ResponseRdms,
    DEFAULT_FD_STEP,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{RdmError, Result};
use crate::rdm::Doci2Rdm;

/// Largest seniority-zero basis the dense solver accepts.
pub const DENSE_BASIS_LIMIT: usize = 100_000;

/// Pairing Hamiltonian over `L` levels with `Np` pairs: single-particle
/// energies plus an all-to-all pair-hopping interaction of strength `g`
/// (attractive for `g < 0`, repulsive for `g > 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PairingModel {
    levels: usize,
    pairs: usize,
    eps: Vec<f64>,
    g: f64,
}

impl PairingModel {
    pub fn new(eps: Vec<f64>, pairs: usize, g: f64) -> Result<PairingModel> {
        if pairs == 0 || pairs > eps.len() {
            return Err(RdmError::Domain(format!(
                "pair count {pairs} invalid for {} levels",
                eps.len()
            )));
        }
        if eps.iter().any(|e| !e.is_finite()) || !g.is_finite() {
            return Err(RdmError::Domain("model parameters must be finite".into()));
        }
        Ok(PairingModel {
            levels: eps.len(),
            pairs,
            eps,
            g,
        })
    }

    /// Equally spaced levels `eps_p = p * spacing`, `p = 1..=levels`.
    pub fn picket_fence(levels: usize, pairs: usize, spacing: f64, g: f64) -> Result<PairingModel> {
        let eps = (1..=levels).map(|p| p as f64 * spacing).collect();
        PairingModel::new(eps, pairs, g)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn electrons(&self) -> usize {
        2 * self.pairs
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn with_g(&self, g: f64) -> PairingModel {
        PairingModel { g, ..self.clone() }
    }

    /// Pair-coupling matrix of the energy functional: `g` everywhere plus
    /// `2 eps_a` on the diagonal.
    pub fn pair_coupling(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.levels, self.levels, |a, b| {
            self.g + if a == b { 2.0 * self.eps[a] } else { 0.0 }
        })
    }

    /// Exchange-coupling matrix of the energy functional; the pairing
    /// Hamiltonian has none.
    pub fn exchange_coupling(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.levels, self.levels)
    }
}

/// All ways of placing `Np` pairs on `L` levels, as bitmasks in increasing
/// numeric order.
#[derive(Debug, Clone)]
pub struct DociBasis {
    levels: usize,
    masks: Vec<u64>,
}

impl DociBasis {
    pub fn new(levels: usize, pairs: usize) -> Result<DociBasis> {
        if levels > 63 {
            return Err(RdmError::Domain(format!(
                "level count {levels} exceeds the bitmask width"
            )));
        }
        if pairs == 0 || pairs > levels {
            return Err(RdmError::Domain(format!(
                "pair count {pairs} invalid for {levels} levels"
            )));
        }
        let dim = binomial(levels, pairs);
        if dim > DENSE_BASIS_LIMIT {
            return Err(RdmError::BasisTooLarge {
                dim,
                limit: DENSE_BASIS_LIMIT,
            });
        }
        let mut masks = Vec::with_capacity(dim);
        let mut mask = (1u64 << pairs) - 1;
        let top = 1u64 << levels;
        while mask < top {
            masks.push(mask);
            // Gosper's hack: next subset with the same popcount
            let c = mask & mask.wrapping_neg();
            let r = mask + c;
            mask = (((r ^ mask) >> 2) / c) | r;
        }
        debug_assert_eq!(masks.len(), dim);
        Ok(DociBasis { levels, masks })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    pub fn mask(&self, i: usize) -> u64 {
        self.masks[i]
    }

    /// Index of a configuration; masks are stored sorted.
    pub fn index_of(&self, mask: u64) -> Option<usize> {
        self.masks.binary_search(&mask).ok()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut out = 1usize;
    for i in 0..k {
        out = out * (n - i) / (i + 1);
    }
    out
}

/// Dense pairing Hamiltonian on the seniority-zero basis: diagonal
/// `2 sum_{p in K} eps_p + g Np`, off-diagonal `g` between configurations
/// one pair hop apart.
pub fn build_hamiltonian(m: &PairingModel) -> Result<(DociBasis, DMatrix<f64>)> {
    let basis = DociBasis::new(m.levels, m.pairs)?;
    let h = build_hamiltonian_on(&basis, m.eps(), m.g(), None)?;
    Ok((basis, h))
}

/// Hamiltonian builder shared with the perturbed solves of the response
/// machinery: `pair_probe` adds `eta` on the symmetrized hop between levels
/// `a` and `b` (the occupancy for `a == b`), `density_probe` adds
/// `eta * n_a n_b`.
pub(crate) fn build_hamiltonian_on(
    basis: &DociBasis,
    eps: &[f64],
    g: f64,
    probe: Option<&Probe>,
) -> Result<DMatrix<f64>> {
    let dim = basis.dim();
    let levels = basis.levels();
    if eps.len() != levels {
        return Err(RdmError::DimensionMismatch(format!(
            "{} single-particle energies for {} levels",
            eps.len(),
            levels
        )));
    }
    let np = basis.mask(0).count_ones() as f64;
    let mut h = DMatrix::zeros(dim, dim);
    for (k, &mask) in basis.masks.iter().enumerate() {
        let mut diag = g * np;
        for p in 0..levels {
            if mask & (1 << p) != 0 {
                diag += 2.0 * eps[p];
            }
        }
        if let Some(probe) = probe {
            diag += probe.diagonal(mask);
        }
        h[(k, k)] = diag;
        for q in 0..levels {
            if mask & (1 << q) == 0 {
                continue;
            }
            for p in 0..levels {
                if p == q || mask & (1 << p) != 0 {
                    continue;
                }
                let hopped = (mask & !(1 << q)) | (1 << p);
                let j = basis
                    .index_of(hopped)
                    .expect("hop preserves the pair count");
                let mut v = g;
                if let Some(probe) = probe {
                    v += probe.hop(p, q);
                }
                h[(k, j)] = v;
            }
        }
    }
    Ok(h)
}

/// One-parameter Hamiltonian perturbation used for response derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Probe {
    /// `eta * (S+_a S_b + S+_b S_a)` for `a != b`, `eta * n_a` for `a == b`.
    PairCoupling { a: usize, b: usize, eta: f64 },
    /// `eta * n_a n_b`, `a != b`.
    DensityDensity { a: usize, b: usize, eta: f64 },
}

impl Probe {
    fn diagonal(&self, mask: u64) -> f64 {
        match *self {
            Probe::PairCoupling { a, b, eta } if a == b => {
                if mask & (1 << a) != 0 {
                    eta
                } else {
                    0.0
                }
            }
            Probe::PairCoupling { .. } => 0.0,
            Probe::DensityDensity { a, b, eta } => {
                if mask & (1 << a) != 0 && mask & (1 << b) != 0 {
                    eta
                } else {
                    0.0
                }
            }
        }
    }

    fn hop(&self, p: usize, q: usize) -> f64 {
        match *self {
            Probe::PairCoupling { a, b, eta } if a != b => {
                if (p, q) == (a, b) || (p, q) == (b, a) {
                    eta
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }
}

/// Exact ground state of the pairing model.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub ci: DVector<f64>,
    pub basis: DociBasis,
}

/// Lowest eigenpair of the dense seniority-zero Hamiltonian. The CI vector
/// is normalized with its first nonzero component positive.
pub fn exact_ground(m: &PairingModel) -> Result<GroundState> {
    let (basis, h) = build_hamiltonian(m)?;
    let dim = basis.dim();
    let eig = h
        .try_symmetric_eigen(f64::EPSILON, 100 * dim.max(10))
        .ok_or(RdmError::EigenFailure { dim })?;
    let mut lowest = 0;
    for i in 1..dim {
        if eig.eigenvalues[i] < eig.eigenvalues[lowest] {
            lowest = i;
        }
    }
    let mut ci = DVector::from(eig.eigenvectors.column(lowest).clone_owned());
    ci /= ci.norm();
    let scale = ci.amax();
    if let Some(first) = ci.iter().find(|v| v.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            ci = -ci;
        }
    }
    Ok(GroundState {
        energy: eig.eigenvalues[lowest],
        ci,
        basis,
    })
}

/// Pair and exchange density matrices of an arbitrary normalized CI vector
/// on a seniority-zero basis.
pub fn doci_rdms_from_ci(basis: &DociBasis, ci: &[f64]) -> Doci2Rdm {
    let l = basis.levels();
    assert_eq!(ci.len(), basis.dim(), "CI vector length must match basis");
    let np = basis.mask(0).count_ones() as usize;
    let mut pi = DMatrix::zeros(l, l);
    let mut d = DMatrix::zeros(l, l);
    for (k, &mask) in basis.masks.iter().enumerate() {
        let w = ci[k] * ci[k];
        for b in 0..l {
            if mask & (1 << b) == 0 {
                continue;
            }
            pi[(b, b)] += w;
            for a in 0..l {
                if a == b {
                    continue;
                }
                if mask & (1 << a) != 0 {
                    d[(a, b)] += w;
                } else {
                    // pair hop b -> a connects to another configuration
                    let hopped = (mask & !(1 << b)) | (1 << a);
                    let j = basis.index_of(hopped).expect("hop preserves pair count");
                    pi[(a, b)] += ci[j] * ci[k];
                }
            }
        }
    }
    Doci2Rdm::new(l, 2 * np, pi, d).expect("construction preserves the invariants")
}

/// Density matrices of the exact ground state.
pub fn exact_doci_rdms(m: &PairingModel) -> Result<Doci2Rdm> {
    let ground = exact_ground(m)?;
    Ok(doci_rdms_from_ci(&ground.basis, ground.ci.as_slice()))
}

/// Pairing-model energy as a linear functional of the pair matrix:
/// `E = 2 sum_a eps_a Pi_aa + g sum_ab Pi_ab`. The model has no exchange
/// coupling, so the exchange matrix does not contribute.
pub fn pairing_energy_from_rdm(m: &PairingModel, r: &Doci2Rdm) -> Result<f64> {
    if r.l() != m.levels {
        return Err(RdmError::DimensionMismatch(format!(
            "density matrix has {} orbitals but the model has {} levels",
            r.l(),
            m.levels
        )));
    }
    let pi = r.pair_matrix();
    let mut e = 0.0;
    for a in 0..m.levels {
        e += 2.0 * m.eps[a] * pi[(a, a)];
        for b in 0..m.levels {
            e += m.g * pi[(a, b)];
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basis_counts_and_order() {
        let b = DociBasis::new(12, 6).unwrap();
        assert_eq!(b.dim(), 924);
        for w in b.masks.windows(2) {
            assert!(w[0] < w[1]);
        }
        for i in 0..b.dim() {
            assert_eq!(b.mask(i).count_ones(), 6);
            assert_eq!(b.index_of(b.mask(i)), Some(i));
        }
    }

    #[test]
    fn basis_guard() {
        assert!(matches!(
            DociBasis::new(40, 20),
            Err(RdmError::BasisTooLarge { .. })
        ));
    }

    #[test]
    fn two_level_hamiltonian_by_hand() {
        // configurations {1}, {2}: diagonals 2e_p + g, hop g
        let m = PairingModel::new(vec![1.0, 2.0], 1, -0.3).unwrap();
        let (_, h) = build_hamiltonian(&m).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[2.0 - 0.3, -0.3, -0.3, 4.0 - 0.3]);
        assert!((h - expect).norm() <= 1e-15);
    }

    #[test]
    fn zero_coupling_hamiltonian_is_diagonal() {
        let m = PairingModel::picket_fence(5, 2, 1.0, 0.0).unwrap();
        let (basis, h) = build_hamiltonian(&m).unwrap();
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                if i != j {
                    assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_is_symmetric() {
        let m = PairingModel::picket_fence(6, 3, 1.0, -0.4).unwrap();
        let (_, h) = build_hamiltonian(&m).unwrap();
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn two_level_ground_energy_closed_form() {
        // lowest eigenvalue of [[1.5, -0.5], [-0.5, 3.5]]
        let m = PairingModel::new(vec![1.0, 2.0], 1, -0.5).unwrap();
        let gs = exact_ground(&m).unwrap();
        let expect = 2.5 - 1.25f64.sqrt();
        assert!((gs.energy - expect).abs() <= 1e-12);
        assert!(gs.ci[0] > 0.0);
    }

    #[test]
    fn filled_sea_at_zero_coupling() {
        let m = PairingModel::picket_fence(12, 6, 1.0, 0.0).unwrap();
        let gs = exact_ground(&m).unwrap();
        assert!((gs.energy - 42.0).abs() <= 1e-10);
    }

    #[test]
    fn zero_coupling_rdms_are_occupations() {
        let m = PairingModel::picket_fence(5, 2, 1.0, 0.0).unwrap();
        let r = exact_doci_rdms(&m).unwrap();
        for a in 0..5 {
            let occ = if a < 2 { 1.0 } else { 0.0 };
            assert!((r.pair_matrix()[(a, a)] - occ).abs() <= 1e-12);
            for b in 0..5 {
                if a != b {
                    let both = if a < 2 && b < 2 { 1.0 } else { 0.0 };
                    assert!((r.exchange_matrix()[(a, b)] - both).abs() <= 1e-12);
                    assert!((r.pair_matrix()[(a, b)]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn rdm_traces_at_any_coupling() {
        for g in [-1.0, -0.2, 0.3, 1.0] {
            let m = PairingModel::picket_fence(6, 3, 1.0, g).unwrap();
            let r = exact_doci_rdms(&m).unwrap();
            assert!((r.pair_trace() - 3.0).abs() <= 1e-12);
            assert!((r.exchange_sum() - 6.0).abs() <= 1e-12);
            assert!(r.occupation_consistency().unwrap() <= 1e-12);
        }
    }

    #[test]
    fn two_level_rdm_by_hand() {
        let m = PairingModel::new(vec![1.0, 2.0], 1, -0.5).unwrap();
        let gs = exact_ground(&m).unwrap();
        let (v1, v2) = (gs.ci[0], gs.ci[1]);
        let r = exact_doci_rdms(&m).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[v1 * v1, v1 * v2, v1 * v2, v2 * v2]);
        assert!((r.pair_matrix() - expect).norm() <= 1e-12);
        assert!(r.exchange_matrix().norm() == 0.0);
    }

    #[test]
    fn eigenstate_energy_matches_functional() {
        for g in [-0.5, 0.0, 0.4] {
            let m = PairingModel::picket_fence(6, 3, 1.0, g).unwrap();
            let gs = exact_ground(&m).unwrap();
            let r = exact_doci_rdms(&m).unwrap();
            let e = pairing_energy_from_rdm(&m, &r).unwrap();
            assert!((e - gs.energy).abs() <= 1e-10, "g={g}: {e} vs {}", gs.energy);
        }
    }

    #[test]
    fn functional_agrees_with_doci_energy_on_random_rdms() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let m = PairingModel::picket_fence(5, 2, 1.0, -0.3).unwrap();
        let basis = DociBasis::new(5, 2).unwrap();
        for _ in 0..10 {
            let mut ci: Vec<f64> = (0..basis.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm: f64 = ci.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut ci {
                *v /= norm;
            }
            let r = doci_rdms_from_ci(&basis, &ci);
            let via_functional = pairing_energy_from_rdm(&m, &r).unwrap();
            let via_couplings =
                crate::rdm::doci_energy(&r, &m.pair_coupling(), &m.exchange_coupling()).unwrap();
            assert!((via_functional - via_couplings).abs() <= 1e-12);
        }
    }

    #[test]
    fn ground_state_is_variational_minimum_over_eigenstates() {
        let m = PairingModel::picket_fence(5, 2, 1.0, -0.6).unwrap();
        let (basis, h) = build_hamiltonian(&m).unwrap();
        let eig = h.clone().symmetric_eigen();
        let gs = exact_ground(&m).unwrap();
        for k in 0..basis.dim() {
            let col: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
            let r = doci_rdms_from_ci(&basis, &col);
            let e = pairing_energy_from_rdm(&m, &r).unwrap();
            assert!(e >= gs.energy - 1e-10);
        }
    }
}
