//! Density-matrix containers, positivity-condition maps and their inverses,
//! validation, and energy evaluation, in the general spin-orbital and in the
//! seniority-zero representations.

mod doci;
mod spin;
mod validate;

pub use doci::{
    doci_conditions, doci_energy, doci_invert, embed_to_spin, extract_doci, off_seniority_sum,
    reconcile_g2x2, Doci2Rdm,
};
pub use spin::{
    contract_one_rdm, energy, g_from_p, p_from_g, p_from_q, pair_count, pair_decode, pair_index,
    q_from_p, OneRdm, Spin2Rdm,
};
pub use validate::{validate_doci, validate_spin, ValidationReport};

use nalgebra::DMatrix;

/// Which positivity condition a matrix encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionKind {
    /// Particle-particle matrix (the 2-RDM itself), antisymmetric pair basis.
    P,
    /// Hole-hole matrix, antisymmetric pair basis.
    Q,
    /// Particle-hole matrix, full composite single-index basis.
    G,
    /// Seniority-zero block of the hole-hole matrix.
    QPi,
    /// Diagonal (exchange) block of the hole-hole matrix, entrywise condition.
    QD,
    /// Seniority-diagonal block of the particle-hole matrix.
    GPi,
    /// One 2x2 particle-hole block for the orbital pair `(a, b)`, `a < b`.
    G2x2 { a: usize, b: usize },
}

impl ConditionKind {
    pub fn name(&self) -> String {
        match self {
            ConditionKind::P => "P".into(),
            ConditionKind::Q => "Q".into(),
            ConditionKind::G => "G".into(),
            ConditionKind::QPi => "Q_pi".into(),
            ConditionKind::QD => "Q_d".into(),
            ConditionKind::GPi => "G_pi".into(),
            ConditionKind::G2x2 { a, b } => format!("G_2x2({a},{b})"),
        }
    }
}

/// A condition matrix together with its normalization target.
///
/// Trace targets are stated in the convention where index pairs run over all
/// ordered tuples; for matrices stored on the antisymmetric pair basis the
/// stored matrix trace is half of that. For [`ConditionKind::QD`] the
/// "trace" is the sum of the off-diagonal entries.
#[derive(Debug, Clone)]
pub struct ConditionMatrix {
    pub kind: ConditionKind,
    pub matrix: DMatrix<f64>,
    pub trace_target: Option<f64>,
    /// Spatial orbital count of the parent density matrix.
    pub l: usize,
    /// Electron count of the parent density matrix.
    pub n: usize,
}

impl ConditionMatrix {
    pub(crate) fn trace_target_for(kind: &ConditionKind, l: usize, n: usize) -> Option<f64> {
        let lf = l as f64;
        let nf = n as f64;
        let holes = 2.0 * lf - nf;
        match kind {
            ConditionKind::P => Some(nf * (nf - 1.0)),
            ConditionKind::Q => Some(holes * (holes - 1.0)),
            ConditionKind::G => Some(nf * (holes + 1.0)),
            ConditionKind::QPi => Some(lf - nf / 2.0),
            ConditionKind::QD => Some((lf - nf / 2.0) * (lf - nf / 2.0 - 1.0)),
            ConditionKind::GPi => Some(nf / 2.0),
            ConditionKind::G2x2 { .. } => None,
        }
    }

    pub(crate) fn new(kind: ConditionKind, matrix: DMatrix<f64>, l: usize, n: usize) -> Self {
        let trace_target = Self::trace_target_for(&kind, l, n);
        ConditionMatrix {
            kind,
            matrix,
            trace_target,
            l,
            n,
        }
    }

    /// Trace in the full ordered-tuple convention, comparable to
    /// [`Self::trace_target`].
    pub fn full_trace(&self) -> f64 {
        match self.kind {
            ConditionKind::P | ConditionKind::Q => 2.0 * self.matrix.trace(),
            ConditionKind::QD => {
                let mut s = 0.0;
                for a in 0..self.matrix.nrows() {
                    for b in 0..self.matrix.ncols() {
                        if a != b {
                            s += self.matrix[(a, b)];
                        }
                    }
                }
                s
            }
            _ => self.matrix.trace(),
        }
    }

    /// What the stored matrix trace must equal for PSD projection.
    pub fn packed_trace_target(&self) -> Option<f64> {
        let t = self.trace_target?;
        match self.kind {
            ConditionKind::P | ConditionKind::Q => Some(t / 2.0),
            ConditionKind::QD => None,
            _ => Some(t),
        }
    }

    pub fn trace_error(&self) -> Option<f64> {
        self.trace_target.map(|t| (self.full_trace() - t).abs())
    }
}
