//! Diagnostic checks of a density matrix against every condition this crate
//! enforces. Validation never fails a matrix; it reports the numbers and
//! lets the caller pick thresholds.

use super::{
    contract_one_rdm, doci_conditions, g_from_p, q_from_p, ConditionKind, Doci2Rdm, Spin2Rdm,
};
use crate::error::Result;
use crate::specproj::{Spectrum, SymMatrix};

/// Violation summary for either representation. Entries that only exist in
/// the seniority-zero representation are `None` for spin-orbital input.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Error of the two-particle trace against its target (pair-matrix
    /// trace for seniority-zero input).
    pub trace_error: f64,
    /// Error of the exchange-matrix entry sum against its target.
    pub exchange_sum_error: Option<f64>,
    /// Smallest eigenvalue of the two-particle matrix (pair matrix).
    pub min_eig_p: f64,
    /// Smallest eigenvalue of the hole-hole matrix (its pair block).
    pub min_eig_q: f64,
    /// Smallest eigenvalue of the particle-hole matrix (its pair block).
    pub min_eig_g: f64,
    /// Smallest eigenvalue over the 2x2 particle-hole blocks.
    pub min_g2x2: Option<f64>,
    /// Smallest off-diagonal exchange entry.
    pub min_exchange_entry: Option<f64>,
    /// Smallest off-diagonal hole-exchange entry.
    pub min_hole_exchange_entry: Option<f64>,
    /// Largest two-particle eigenvalue in the ordered-tuple convention.
    pub max_pair_eig: f64,
    /// Upper bound on the above for an even electron count.
    pub pair_eig_bound: f64,
    /// Range of the one-particle eigenvalues (orbital occupations).
    pub one_rdm_min: f64,
    pub one_rdm_max: f64,
    /// Residual between the two occupation expressions; `None` outside the
    /// seniority-zero representation or for a single pair.
    pub occupation_consistency: Option<f64>,
}

impl ValidationReport {
    /// Names of the conditions violated beyond `tol`.
    pub fn violations(&self, tol: f64) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.trace_error > tol {
            out.push("trace");
        }
        if self.exchange_sum_error.is_some_and(|e| e > tol) {
            out.push("exchange sum");
        }
        if self.min_eig_p < -tol {
            out.push("P");
        }
        if self.min_eig_q < -tol {
            out.push("Q");
        }
        if self.min_eig_g < -tol {
            out.push("G");
        }
        if self.min_g2x2.is_some_and(|e| e < -tol) {
            out.push("G 2x2");
        }
        if self.min_exchange_entry.is_some_and(|e| e < -tol) {
            out.push("D >= 0");
        }
        if self.min_hole_exchange_entry.is_some_and(|e| e < -tol) {
            out.push("Q_d >= 0");
        }
        if self.max_pair_eig > self.pair_eig_bound + tol {
            out.push("pair eigenvalue bound");
        }
        if self.one_rdm_min < -tol || self.one_rdm_max > 1.0 + tol {
            out.push("occupation range");
        }
        out
    }

    /// Largest violation across all conditions; zero when everything holds.
    pub fn max_violation(&self) -> f64 {
        let mut worst = self.trace_error;
        let mut push = |v: f64| {
            if v > worst {
                worst = v;
            }
        };
        if let Some(e) = self.exchange_sum_error {
            push(e);
        }
        push(-self.min_eig_p);
        push(-self.min_eig_q);
        push(-self.min_eig_g);
        if let Some(e) = self.min_g2x2 {
            push(-e);
        }
        if let Some(e) = self.min_exchange_entry {
            push(-e);
        }
        if let Some(e) = self.min_hole_exchange_entry {
            push(-e);
        }
        push(self.max_pair_eig - self.pair_eig_bound);
        push(-self.one_rdm_min);
        push(self.one_rdm_max - 1.0);
        worst.max(0.0)
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("trace error            {:.3e}", self.trace_error),
            format!("min eigenvalue P       {:+.3e}", self.min_eig_p),
            format!("min eigenvalue Q       {:+.3e}", self.min_eig_q),
            format!("min eigenvalue G       {:+.3e}", self.min_eig_g),
            format!(
                "max pair eigenvalue    {:.6} (bound {})",
                self.max_pair_eig, self.pair_eig_bound
            ),
            format!(
                "occupation range       [{:.6}, {:.6}]",
                self.one_rdm_min, self.one_rdm_max
            ),
        ];
        if let Some(e) = self.exchange_sum_error {
            lines.push(format!("exchange sum error     {e:.3e}"));
        }
        if let Some(e) = self.min_g2x2 {
            lines.push(format!("min eigenvalue G 2x2   {e:+.3e}"));
        }
        if let Some(e) = self.min_exchange_entry {
            lines.push(format!("min entry D            {e:+.3e}"));
        }
        if let Some(e) = self.min_hole_exchange_entry {
            lines.push(format!("min entry Q_d          {e:+.3e}"));
        }
        if let Some(e) = self.occupation_consistency {
            lines.push(format!("occupation consistency {e:.3e}"));
        }
        lines
    }
}

/// Checks a spin-orbital two-particle matrix: trace, the three positivity
/// conditions, the two-particle eigenvalue bound and the occupation range.
pub fn validate_spin(g2: &Spin2Rdm) -> Result<ValidationReport> {
    let rho = contract_one_rdm(g2)?;
    let q = q_from_p(g2, &rho)?;
    let g = g_from_p(g2, &rho)?;

    let p_spec = Spectrum::of(&SymMatrix::symmetrize(g2.packed())?)?;
    let q_spec = Spectrum::of(&SymMatrix::symmetrize(&q.matrix)?)?;
    let g_spec = Spectrum::of(&SymMatrix::symmetrize(&g.matrix)?)?;
    let rho_spec = Spectrum::of(&SymMatrix::symmetrize(rho.matrix())?)?;

    Ok(ValidationReport {
        trace_error: (g2.full_trace() - g2.full_trace_target()).abs(),
        exchange_sum_error: None,
        min_eig_p: p_spec.min_eigenvalue(),
        min_eig_q: q_spec.min_eigenvalue(),
        min_eig_g: g_spec.min_eigenvalue(),
        min_g2x2: None,
        min_exchange_entry: None,
        min_hole_exchange_entry: None,
        // antisymmetric-sector eigenvalues double on the packed basis
        max_pair_eig: 2.0 * p_spec.max_eigenvalue(),
        pair_eig_bound: g2.n() as f64,
        one_rdm_min: rho_spec.min_eigenvalue(),
        one_rdm_max: rho_spec.max_eigenvalue(),
        occupation_consistency: None,
    })
}

/// Checks a seniority-zero density matrix against the reformulated
/// conditions, including the entrywise exchange conditions and the
/// consistency of the two occupation expressions.
pub fn validate_doci(r: &Doci2Rdm) -> Result<ValidationReport> {
    let l = r.l();
    let pi_spec = Spectrum::of(&SymMatrix::symmetrize(r.pair_matrix())?)?;

    let mut min_eig_q = f64::INFINITY;
    let mut min_eig_g = f64::INFINITY;
    let mut min_g2x2 = f64::INFINITY;
    let mut min_qd = f64::INFINITY;
    for c in doci_conditions(r) {
        match c.kind {
            ConditionKind::QPi => {
                min_eig_q = Spectrum::of(&SymMatrix::symmetrize(&c.matrix)?)?.min_eigenvalue();
            }
            ConditionKind::GPi => {
                min_eig_g = Spectrum::of(&SymMatrix::symmetrize(&c.matrix)?)?.min_eigenvalue();
            }
            ConditionKind::QD => {
                for a in 0..l {
                    for b in 0..l {
                        if a != b {
                            min_qd = min_qd.min(c.matrix[(a, b)]);
                        }
                    }
                }
            }
            ConditionKind::G2x2 { .. } => {
                let spec = Spectrum::of(&SymMatrix::symmetrize(&c.matrix)?)?;
                min_g2x2 = min_g2x2.min(spec.min_eigenvalue());
            }
            _ => {}
        }
    }
    let mut min_d = f64::INFINITY;
    for a in 0..l {
        for b in 0..l {
            if a != b {
                min_d = min_d.min(r.exchange_matrix()[(a, b)]);
            }
        }
    }
    if l == 1 {
        min_d = 0.0;
        min_qd = 0.0;
        min_g2x2 = 0.0;
    }

    let occ = r.occupations();
    Ok(ValidationReport {
        trace_error: (r.pair_trace() - r.pair_trace_target()).abs(),
        exchange_sum_error: Some((r.exchange_sum() - r.exchange_sum_target()).abs()),
        min_eig_p: pi_spec.min_eigenvalue(),
        min_eig_q,
        min_eig_g,
        min_g2x2: Some(min_g2x2),
        min_exchange_entry: Some(min_d),
        min_hole_exchange_entry: Some(min_qd),
        max_pair_eig: 2.0 * pi_spec.max_eigenvalue(),
        pair_eig_bound: r.n() as f64,
        one_rdm_min: occ.min(),
        one_rdm_max: occ.max(),
        occupation_consistency: r.occupation_consistency(),
    })
}
