//! Spin-orbital density matrices and the particle-particle, hole-hole and
//! particle-hole maps between them.
//!
//! Spin orbitals are indexed `2a` (up) and `2a + 1` (down) for spatial
//! orbital `a`, so the two members of a pairing level stay adjacent. The
//! two-particle matrix is stored on the antisymmetric ordered-pair basis
//! `(alpha < beta)`; the element accessor expands the antisymmetry signs.

use nalgebra::DMatrix;

use super::{ConditionKind, ConditionMatrix};
use crate::error::{RdmError, Result};

/// Packed index of the ordered pair `(a, b)` with `a < b`.
#[inline]
pub fn pair_index(a: usize, b: usize) -> usize {
    debug_assert!(a < b);
    b * (b - 1) / 2 + a
}

/// Inverse of [`pair_index`].
pub fn pair_decode(p: usize) -> (usize, usize) {
    let mut b = 1;
    while (b + 1) * b / 2 <= p {
        b += 1;
    }
    (p - b * (b - 1) / 2, b)
}

/// Number of ordered pairs over `m` single-particle states.
#[inline]
pub fn pair_count(m: usize) -> usize {
    m * (m - 1) / 2
}

/// One-particle reduced density matrix over `2L` spin orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct OneRdm {
    mat: DMatrix<f64>,
}

impl OneRdm {
    pub fn new(mat: DMatrix<f64>) -> Result<OneRdm> {
        if mat.nrows() != mat.ncols() {
            return Err(RdmError::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        Ok(OneRdm { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }
}

/// Two-particle reduced density matrix over `2L` spin orbitals, stored on
/// the antisymmetric ordered-pair basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spin2Rdm {
    l: usize,
    n: usize,
    mat: DMatrix<f64>,
}

impl Spin2Rdm {
    pub fn zeros(l: usize, n: usize) -> Result<Spin2Rdm> {
        check_sizes(l, n)?;
        let k = pair_count(2 * l);
        Ok(Spin2Rdm {
            l,
            n,
            mat: DMatrix::zeros(k, k),
        })
    }

    /// Wraps a packed pair-basis matrix.
    pub fn from_packed(l: usize, n: usize, mat: DMatrix<f64>) -> Result<Spin2Rdm> {
        check_sizes(l, n)?;
        let k = pair_count(2 * l);
        if mat.nrows() != k || mat.ncols() != k {
            return Err(RdmError::DimensionMismatch(format!(
                "packed two-particle matrix must be {k}x{k} for L={l}, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Spin2Rdm { l, n, mat })
    }

    /// Spatial orbital count.
    pub fn l(&self) -> usize {
        self.l
    }

    /// Electron count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_spin_orbitals(&self) -> usize {
        2 * self.l
    }

    pub fn pair_dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn packed(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn packed_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.mat
    }

    /// Element accessor expanding the antisymmetry signs; zero whenever an
    /// index repeats within a pair.
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        if a == b || c == d {
            return 0.0;
        }
        let (p, sp) = if a < b {
            (pair_index(a, b), 1.0)
        } else {
            (pair_index(b, a), -1.0)
        };
        let (q, sq) = if c < d {
            (pair_index(c, d), 1.0)
        } else {
            (pair_index(d, c), -1.0)
        };
        sp * sq * self.mat[(p, q)]
    }

    /// Trace summed over all ordered index pairs; twice the packed trace.
    pub fn full_trace(&self) -> f64 {
        2.0 * self.mat.trace()
    }

    /// Target for [`Self::full_trace`].
    pub fn full_trace_target(&self) -> f64 {
        (self.n * (self.n - 1)) as f64
    }
}

fn check_sizes(l: usize, n: usize) -> Result<()> {
    if l == 0 {
        return Err(RdmError::Domain("need at least one spatial orbital".into()));
    }
    if n < 2 {
        return Err(RdmError::Domain(format!(
            "electron count {n} below 2; contraction divides by N-1"
        )));
    }
    if n % 2 != 0 {
        return Err(RdmError::Domain(format!("electron count {n} must be even")));
    }
    if n > 2 * l {
        return Err(RdmError::Domain(format!(
            "electron count {n} exceeds {} spin orbitals",
            2 * l
        )));
    }
    Ok(())
}

/// One-particle matrix from the two-particle matrix by contraction.
pub fn contract_one_rdm(g2: &Spin2Rdm) -> Result<OneRdm> {
    let m = g2.num_spin_orbitals();
    let denom = (g2.n - 1) as f64;
    let mut rho = DMatrix::zeros(m, m);
    for alpha in 0..m {
        for gamma in 0..=alpha {
            let mut s = 0.0;
            for beta in 0..m {
                s += g2.get(alpha, beta, gamma, beta);
            }
            rho[(alpha, gamma)] = s / denom;
            rho[(gamma, alpha)] = rho[(alpha, gamma)];
        }
    }
    OneRdm::new(rho)
}

fn check_rho(g2: &Spin2Rdm, rho: &OneRdm) -> Result<()> {
    if rho.dim() != g2.num_spin_orbitals() {
        return Err(RdmError::DimensionMismatch(format!(
            "one-particle matrix is {}x{} but there are {} spin orbitals",
            rho.dim(),
            rho.dim(),
            g2.num_spin_orbitals()
        )));
    }
    let contracted = contract_one_rdm(g2)?;
    let diff = (contracted.matrix() - rho.matrix()).norm();
    if diff > 1e-8 {
        log::warn!(
            "supplied one-particle matrix deviates from the contraction by {diff:.3e}; \
             condition matrices will be built from the supplied one"
        );
    }
    Ok(())
}

#[inline]
fn kron(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Hole-hole matrix obtained from the two-particle and one-particle matrices
/// by anticommuting all operators, on the antisymmetric pair basis.
pub fn q_from_p(g2: &Spin2Rdm, rho: &OneRdm) -> Result<ConditionMatrix> {
    check_rho(g2, rho)?;
    let m = g2.num_spin_orbitals();
    let k = pair_count(m);
    let r = rho.matrix();
    let mut q = DMatrix::zeros(k, k);
    for b in 1..m {
        for a in 0..b {
            let p = pair_index(a, b);
            for d in 1..m {
                for c in 0..d {
                    let s = pair_index(c, d);
                    if s > p {
                        continue;
                    }
                    let v = g2.mat[(p, s)] + kron(p, s) - kron(b, d) * r[(a, c)]
                        + kron(a, d) * r[(b, c)]
                        + kron(b, c) * r[(a, d)]
                        - kron(a, c) * r[(b, d)];
                    q[(p, s)] = v;
                    q[(s, p)] = v;
                }
            }
        }
    }
    Ok(ConditionMatrix::new(ConditionKind::Q, q, g2.l, g2.n))
}

/// Particle-hole matrix on the full composite `(2L)^2` basis; it is
/// symmetric under exchange of the index pairs but not antisymmetric within
/// a pair, so no packing applies.
pub fn g_from_p(g2: &Spin2Rdm, rho: &OneRdm) -> Result<ConditionMatrix> {
    check_rho(g2, rho)?;
    let m = g2.num_spin_orbitals();
    let r = rho.matrix();
    let mut g = DMatrix::zeros(m * m, m * m);
    for alpha in 0..m {
        for beta in 0..m {
            let row = alpha * m + beta;
            for gamma in 0..m {
                for delta in 0..m {
                    let col = gamma * m + delta;
                    if col > row {
                        continue;
                    }
                    let v = kron(beta, delta) * r[(alpha, gamma)]
                        - g2.get(alpha, delta, gamma, beta);
                    g[(row, col)] = v;
                    g[(col, row)] = v;
                }
            }
        }
    }
    Ok(ConditionMatrix::new(ConditionKind::G, g, g2.l, g2.n))
}

/// Inverts the hole-hole map: recovers the one-particle matrix from the
/// contraction identity `sum_beta Q(a,b,c,b) = (2L-N-1)(delta_ac - rho_ac)`,
/// then the two-particle matrix term by term.
///
/// When `2L - N - 1 = 0` the identity degenerates; `fallback_rho` (the most
/// recent particle-side contraction) is used instead.
pub fn p_from_q(
    q: &ConditionMatrix,
    fallback_rho: Option<&OneRdm>,
) -> Result<(Spin2Rdm, OneRdm)> {
    if q.kind != ConditionKind::Q {
        return Err(RdmError::Domain(format!(
            "expected a hole-hole matrix, got {}",
            q.kind.name()
        )));
    }
    let (l, n) = (q.l, q.n);
    let m = 2 * l;
    let k = pair_count(m);
    if q.matrix.nrows() != k || q.matrix.ncols() != k {
        return Err(RdmError::DimensionMismatch(format!(
            "hole-hole matrix must be {k}x{k} for L={l}"
        )));
    }
    let qv = |a: usize, b: usize, c: usize, d: usize| -> f64 {
        if a == b || c == d {
            return 0.0;
        }
        let (p, sp) = if a < b {
            (pair_index(a, b), 1.0)
        } else {
            (pair_index(b, a), -1.0)
        };
        let (s, ss) = if c < d {
            (pair_index(c, d), 1.0)
        } else {
            (pair_index(d, c), -1.0)
        };
        sp * ss * q.matrix[(p, s)]
    };

    let denom = m as f64 - n as f64 - 1.0;
    let rho = if denom == 0.0 {
        match fallback_rho {
            Some(r) => r.clone(),
            None => {
                return Err(RdmError::Domain(
                    "hole-hole contraction degenerates at N = 2L - 1 and no fallback \
                     one-particle matrix was supplied"
                        .into(),
                ))
            }
        }
    } else {
        let mut r = DMatrix::zeros(m, m);
        for alpha in 0..m {
            for gamma in 0..=alpha {
                let mut s = 0.0;
                for beta in 0..m {
                    s += qv(alpha, beta, gamma, beta);
                }
                let v = kron(alpha, gamma) - s / denom;
                r[(alpha, gamma)] = v;
                r[(gamma, alpha)] = v;
            }
        }
        OneRdm::new(r)?
    };

    let r = rho.matrix();
    let mut gm = DMatrix::zeros(k, k);
    for b in 1..m {
        for a in 0..b {
            let p = pair_index(a, b);
            for d in 1..m {
                for c in 0..d {
                    let s = pair_index(c, d);
                    if s > p {
                        continue;
                    }
                    let v = q.matrix[(p, s)] - kron(p, s) + kron(b, d) * r[(a, c)]
                        - kron(a, d) * r[(b, c)]
                        - kron(b, c) * r[(a, d)]
                        + kron(a, c) * r[(b, d)];
                    gm[(p, s)] = v;
                    gm[(s, p)] = v;
                }
            }
        }
    }
    Ok((Spin2Rdm::from_packed(l, n, gm)?, rho))
}

/// Inverts the particle-hole map. The one-particle matrix comes from the
/// contraction identity `sum_beta G(a,b,c,b) = (2L-N+1) rho_ac`; the
/// recovered two-particle matrix is re-antisymmetrized by averaging the four
/// sign-related entries, since a projected particle-hole matrix need not
/// map back onto an exactly antisymmetric object.
pub fn p_from_g(g: &ConditionMatrix) -> Result<(Spin2Rdm, OneRdm)> {
    if g.kind != ConditionKind::G {
        return Err(RdmError::Domain(format!(
            "expected a particle-hole matrix, got {}",
            g.kind.name()
        )));
    }
    let (l, n) = (g.l, g.n);
    let m = 2 * l;
    if g.matrix.nrows() != m * m || g.matrix.ncols() != m * m {
        return Err(RdmError::DimensionMismatch(format!(
            "particle-hole matrix must be {0}x{0} for L={l}",
            m * m
        )));
    }
    let gv = |a: usize, b: usize, c: usize, d: usize| g.matrix[(a * m + b, c * m + d)];

    let denom = m as f64 - n as f64 + 1.0;
    let mut r = DMatrix::zeros(m, m);
    for alpha in 0..m {
        for gamma in 0..=alpha {
            // the (gamma, alpha) contraction is identical by composite symmetry
            let mut s = 0.0;
            for beta in 0..m {
                s += gv(alpha, beta, gamma, beta);
            }
            r[(alpha, gamma)] = s / denom;
            r[(gamma, alpha)] = r[(alpha, gamma)];
        }
    }
    let rho = OneRdm::new(r)?;
    let r = rho.matrix();

    let k = pair_count(m);
    let gamma_raw = |a: usize, b: usize, c: usize, d: usize| -> f64 {
        kron(b, d) * r[(a, c)] - gv(a, d, c, b)
    };
    let mut gm = DMatrix::zeros(k, k);
    for b in 1..m {
        for a in 0..b {
            let p = pair_index(a, b);
            for d in 1..m {
                for c in 0..d {
                    let s = pair_index(c, d);
                    if s > p {
                        continue;
                    }
                    let v = 0.25
                        * (gamma_raw(a, b, c, d) - gamma_raw(b, a, c, d) - gamma_raw(a, b, d, c)
                            + gamma_raw(b, a, d, c));
                    gm[(p, s)] = v;
                    gm[(s, p)] = v;
                }
            }
        }
    }
    // pair-exchange symmetry can drift if the input lost composite symmetry
    let gm = crate::specproj::SymMatrix::symmetrize(&gm)?.into_matrix();
    Ok((Spin2Rdm::from_packed(l, n, gm)?, rho))
}

/// Energy `E = 1/2 sum Gamma_abcd K_abcd` for a reduced Hamiltonian given on
/// the full composite `(2L)^2` basis, `K[(a,b),(c,d)] = K_abcd`.
pub fn energy(g2: &Spin2Rdm, k: &DMatrix<f64>) -> Result<f64> {
    let m = g2.num_spin_orbitals();
    if k.nrows() != m * m || k.ncols() != m * m {
        return Err(RdmError::DimensionMismatch(format!(
            "reduced Hamiltonian must be {0}x{0} for L={1}",
            m * m,
            g2.l
        )));
    }
    let mut e = 0.0;
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            for c in 0..m {
                for d in 0..m {
                    if c == d {
                        continue;
                    }
                    e += g2.get(a, b, c, d) * k[(a * m + b, c * m + d)];
                }
            }
        }
    }
    Ok(0.5 * e)
}
