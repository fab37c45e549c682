//! Iterative restoration of approximate N-representability: sequentially
//! symmetrize, normalize and project each positivity-condition matrix back
//! onto the PSD cone, mapping the repaired matrix onto the density matrix
//! after every step, and sweep until every condition holds.

use nalgebra::DMatrix;

use crate::error::{RdmError, Result};
use crate::rdm::{
    contract_one_rdm, doci_conditions, doci_invert, g_from_p, p_from_g, p_from_q, q_from_p,
    reconcile_g2x2, validate_doci, ConditionKind, ConditionMatrix, Doci2Rdm, Spin2Rdm,
};
use crate::specproj::{project_psd_trace, ProjectionStrategy, Spectrum, SymMatrix};

/// One stage of a sweep: the particle-particle, hole-hole or particle-hole
/// family of conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionStep {
    P,
    Q,
    G,
}

/// Parses an order string like "PQG" into a permutation of the three steps.
pub fn parse_order(s: &str) -> Result<[ConditionStep; 3]> {
    let steps: Vec<ConditionStep> = s
        .chars()
        .map(|c| match c.to_ascii_uppercase() {
            'P' => Ok(ConditionStep::P),
            'Q' => Ok(ConditionStep::Q),
            'G' => Ok(ConditionStep::G),
            other => Err(RdmError::Domain(format!("unknown condition '{other}'"))),
        })
        .collect::<Result<_>>()?;
    let order: [ConditionStep; 3] = steps
        .try_into()
        .map_err(|_| RdmError::Domain(format!("order '{s}' must name all of P, Q, G once")))?;
    for step in [ConditionStep::P, ConditionStep::Q, ConditionStep::G] {
        if !order.contains(&step) {
            return Err(RdmError::Domain(format!(
                "order '{s}' must name all of P, Q, G once"
            )));
        }
    }
    Ok(order)
}

#[derive(Debug, Clone)]
pub struct FixConfig {
    /// Largest acceptable trace (or entry-sum) error at convergence.
    pub tol_trace: f64,
    /// Most negative acceptable eigenvalue or entry at convergence; also the
    /// inter-sweep change threshold of the seniority-zero loop.
    pub tol_eig: f64,
    pub max_sweeps: usize,
    pub order: [ConditionStep; 3],
    pub strategy: ProjectionStrategy,
    /// Rescale the exchange rows toward the pair-matrix occupations after
    /// every seniority-zero sweep.
    pub enforce_rho_consistency: bool,
    /// Apply the 2x2 particle-hole projections one pair at a time instead of
    /// all at once from a snapshot.
    pub sequential_g2x2: bool,
}

impl Default for FixConfig {
    fn default() -> Self {
        FixConfig {
            tol_trace: 1e-10,
            tol_eig: 1e-8,
            max_sweeps: 500,
            order: [ConditionStep::P, ConditionStep::Q, ConditionStep::G],
            strategy: ProjectionStrategy::Bisection,
            enforce_rho_consistency: false,
            sequential_g2x2: false,
        }
    }
}

/// Per-condition numbers recorded at the end of a sweep.
#[derive(Debug, Clone)]
pub struct ConditionDiag {
    pub name: String,
    pub trace_error: Option<f64>,
    /// Most negative eigenvalue (or entry, for entrywise conditions).
    pub min_value: f64,
}

#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub sweep: usize,
    pub conditions: Vec<ConditionDiag>,
    /// Frobenius distance to the previous sweep's iterate.
    pub frobenius_change: f64,
}

impl SweepRecord {
    pub fn max_trace_error(&self) -> f64 {
        self.conditions
            .iter()
            .filter_map(|c| c.trace_error)
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.conditions
            .iter()
            .map(|c| c.min_value)
            .fold(f64::INFINITY, f64::min)
    }

    /// Scalar badness used to pick the best iterate when a run never
    /// converges.
    fn score(&self) -> f64 {
        self.max_trace_error().max(-self.min_value()).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct FixReport {
    pub sweeps_used: usize,
    pub records: Vec<SweepRecord>,
    pub converged: bool,
    /// Cost between the input and the returned iterate.
    pub final_cost: f64,
}

/// Mean squared deviation over every ordered four-index tuple, matching the
/// element convention of the spin-orbital representation.
pub fn cost_regular(a: &Spin2Rdm, b: &Spin2Rdm) -> Result<f64> {
    if a.l() != b.l() || a.n() != b.n() {
        return Err(RdmError::DimensionMismatch(format!(
            "cost between L={},N={} and L={},N={}",
            a.l(),
            a.n(),
            b.l(),
            b.n()
        )));
    }
    let m = a.num_spin_orbitals();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let d = a.get(i, j, k, l) - b.get(i, j, k, l);
                    s += d * d;
                }
            }
        }
    }
    Ok(s / (m as f64).powi(4))
}

/// Mean squared deviation over both seniority-zero blocks.
pub fn cost_doci(a: &Doci2Rdm, b: &Doci2Rdm) -> Result<f64> {
    if a.l() != b.l() || a.n() != b.n() {
        return Err(RdmError::DimensionMismatch(format!(
            "cost between L={},N={} and L={},N={}",
            a.l(),
            a.n(),
            b.l(),
            b.n()
        )));
    }
    let l = a.l() as f64;
    let dp = (a.pair_matrix() - b.pair_matrix()).norm_squared();
    let dd = (a.exchange_matrix() - b.exchange_matrix()).norm_squared();
    Ok((dp + dd) / (2.0 * l * l))
}

/// Absolute sum of the negative eigenvalues of the stored condition
/// matrices.
pub fn violation_measure_spin(g2: &Spin2Rdm) -> Result<f64> {
    let rho = contract_one_rdm(g2)?;
    let q = q_from_p(g2, &rho)?;
    let g = g_from_p(g2, &rho)?;
    let mut total = 0.0;
    for m in [g2.packed(), &q.matrix, &g.matrix] {
        let spec = Spectrum::of(&SymMatrix::symmetrize(m)?)?;
        total += spec
            .eigenvalues()
            .iter()
            .map(|&l| (-l).max(0.0))
            .sum::<f64>();
    }
    Ok(total)
}

/// Absolute sum of the negative eigenvalues over the seniority-zero
/// condition set, counting the entrywise exchange conditions through their
/// negative entries.
pub fn violation_measure_doci(r: &Doci2Rdm) -> Result<f64> {
    let mut total = 0.0;
    let spec = Spectrum::of(&SymMatrix::symmetrize(r.pair_matrix())?)?;
    total += spec.eigenvalues().iter().map(|&l| (-l).max(0.0)).sum::<f64>();
    for a in 0..r.l() {
        for b in 0..r.l() {
            if a != b {
                total += (-r.exchange_matrix()[(a, b)]).max(0.0);
            }
        }
    }
    for c in doci_conditions(r) {
        match c.kind {
            ConditionKind::QD => {
                for a in 0..r.l() {
                    for b in 0..r.l() {
                        if a != b {
                            total += (-c.matrix[(a, b)]).max(0.0);
                        }
                    }
                }
            }
            _ => {
                let spec = Spectrum::of(&SymMatrix::symmetrize(&c.matrix)?)?;
                total += spec.eigenvalues().iter().map(|&l| (-l).max(0.0)).sum::<f64>();
            }
        }
    }
    Ok(total)
}

fn project_packed(
    mat: &DMatrix<f64>,
    trace: Option<f64>,
    strategy: ProjectionStrategy,
) -> Result<DMatrix<f64>> {
    Ok(project_psd_trace(&SymMatrix::symmetrize(mat)?, trace, strategy)?.into_matrix())
}

/// Restores a spin-orbital two-particle matrix: per sweep, each condition
/// family is rebuilt, projected onto the PSD cone at its trace target and
/// mapped back, until every trace error is below `tol_trace` and every
/// condition eigenvalue above `-tol_eig`. A run that exhausts `max_sweeps`
/// returns its best iterate with `converged = false`.
pub fn fix_regular(g2_in: &Spin2Rdm, cfg: &FixConfig) -> Result<(Spin2Rdm, FixReport)> {
    let (l, n) = (g2_in.l(), g2_in.n());
    let trace_target = g2_in.full_trace_target();
    if (g2_in.full_trace() - trace_target).abs() > 0.1 * trace_target {
        return Err(RdmError::Domain(format!(
            "input trace {} deviates more than 10% from {}",
            g2_in.full_trace(),
            trace_target
        )));
    }

    let mut current = g2_in.clone();
    let mut records: Vec<SweepRecord> = Vec::new();
    let mut best: Option<(f64, Spin2Rdm)> = None;
    let mut converged = false;
    let mut sweeps_used = 0;

    for sweep in 1..=cfg.max_sweeps {
        sweeps_used = sweep;
        let previous = current.packed().clone();

        for step in cfg.order {
            match step {
                ConditionStep::P => {
                    let projected = project_packed(
                        current.packed(),
                        Some(trace_target / 2.0),
                        cfg.strategy,
                    )?;
                    current = Spin2Rdm::from_packed(l, n, projected)?;
                }
                ConditionStep::Q => {
                    let rho = contract_one_rdm(&current)?;
                    let mut q = q_from_p(&current, &rho)?;
                    q.matrix =
                        project_packed(&q.matrix, q.packed_trace_target(), cfg.strategy)?;
                    let (g2, _) = p_from_q(&q, Some(&rho))?;
                    current = g2;
                }
                ConditionStep::G => {
                    let rho = contract_one_rdm(&current)?;
                    let mut g = g_from_p(&current, &rho)?;
                    g.matrix =
                        project_packed(&g.matrix, g.packed_trace_target(), cfg.strategy)?;
                    let (g2, _) = p_from_g(&g)?;
                    current = g2;
                }
            }
        }

        let record = regular_diagnostics(&current, sweep, &previous)?;
        let score = record.score();
        let trace_ok = record.max_trace_error() <= cfg.tol_trace;
        let eig_ok = record.min_value() >= -cfg.tol_eig;
        records.push(record);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, current.clone()));
        }
        if trace_ok && eig_ok {
            converged = true;
            break;
        }
    }

    let result = if converged {
        current
    } else {
        best.map(|(_, g2)| g2).unwrap_or(current)
    };
    let final_cost = cost_regular(g2_in, &result)?;
    Ok((
        result,
        FixReport {
            sweeps_used,
            records,
            converged,
            final_cost,
        },
    ))
}

fn regular_diagnostics(g2: &Spin2Rdm, sweep: usize, previous: &DMatrix<f64>) -> Result<SweepRecord> {
    let rho = contract_one_rdm(g2)?;
    let q = q_from_p(g2, &rho)?;
    let g = g_from_p(g2, &rho)?;
    let min_eig = |m: &DMatrix<f64>| -> Result<f64> {
        Ok(Spectrum::of(&SymMatrix::symmetrize(m)?)?.min_eigenvalue())
    };
    let conditions = vec![
        ConditionDiag {
            name: "P".into(),
            trace_error: Some((g2.full_trace() - g2.full_trace_target()).abs()),
            min_value: min_eig(g2.packed())?,
        },
        ConditionDiag {
            name: "Q".into(),
            trace_error: q.trace_error(),
            min_value: min_eig(&q.matrix)?,
        },
        ConditionDiag {
            name: "G".into(),
            trace_error: g.trace_error(),
            min_value: min_eig(&g.matrix)?,
        },
    ];
    Ok(SweepRecord {
        sweep,
        conditions,
        frobenius_change: (g2.packed() - previous).norm(),
    })
}

/// Clamps the off-diagonal exchange entries at zero, then shifts them
/// uniformly to restore the entry sum, alternating to a fixed point.
fn clamp_shift_exchange(d: &mut DMatrix<f64>, target: f64) {
    let l = d.nrows();
    if l < 2 {
        return;
    }
    let slots = (l * (l - 1)) as f64;
    let tol = 1e-12 * target.max(1.0);
    for _ in 0..crate::specproj::MAX_ALTERNATIONS {
        let mut sum = 0.0;
        for a in 0..l {
            for b in 0..l {
                if a != b {
                    if d[(a, b)] < 0.0 {
                        d[(a, b)] = 0.0;
                    }
                    sum += d[(a, b)];
                }
            }
        }
        if (sum - target).abs() <= tol {
            return;
        }
        let shift = (target - sum) / slots;
        for a in 0..l {
            for b in 0..l {
                if a != b {
                    d[(a, b)] += shift;
                }
            }
        }
    }
    for a in 0..l {
        for b in 0..l {
            if a != b && d[(a, b)] < 0.0 {
                d[(a, b)] = 0.0;
            }
        }
    }
}

/// Restores a seniority-zero density matrix: per sweep the pair matrix, the
/// exchange matrix and the reformulated hole and particle-hole conditions
/// are each repaired and mapped back; convergence requires both a small
/// inter-sweep change and every condition holding within tolerance.
pub fn fix_doci(r_in: &Doci2Rdm, cfg: &FixConfig) -> Result<(Doci2Rdm, FixReport)> {
    let np = r_in.np() as f64;
    let pair_target = np;
    let exchange_target = np * (np - 1.0);

    let mut current = r_in.clone();
    let mut records: Vec<SweepRecord> = Vec::new();
    let mut best: Option<(f64, Doci2Rdm)> = None;
    let mut converged = false;
    let mut sweeps_used = 0;

    for sweep in 1..=cfg.max_sweeps {
        sweeps_used = sweep;
        let prev_pi = current.pair_matrix().clone();
        let prev_d = current.exchange_matrix().clone();

        for step in cfg.order {
            match step {
                ConditionStep::P => {
                    let pi = project_packed(current.pair_matrix(), Some(pair_target), cfg.strategy)?;
                    let mut d = current.exchange_matrix().clone();
                    clamp_shift_exchange(&mut d, exchange_target);
                    current = Doci2Rdm::new(current.l(), current.n(), pi, d)?;
                }
                ConditionStep::Q => {
                    let conds = doci_conditions(&current);
                    let mut q_pi = conds
                        .iter()
                        .find(|c| c.kind == ConditionKind::QPi)
                        .expect("emitted above")
                        .clone();
                    q_pi.matrix =
                        project_packed(&q_pi.matrix, q_pi.packed_trace_target(), cfg.strategy)?;
                    current = doci_invert(&q_pi, &current)?;

                    let conds = doci_conditions(&current);
                    let mut q_d = conds
                        .iter()
                        .find(|c| c.kind == ConditionKind::QD)
                        .expect("emitted above")
                        .clone();
                    for a in 0..current.l() {
                        for b in 0..current.l() {
                            if a != b && q_d.matrix[(a, b)] < 0.0 {
                                q_d.matrix[(a, b)] = 0.0;
                            }
                        }
                    }
                    current = doci_invert(&q_d, &current)?;
                }
                ConditionStep::G => {
                    let conds = doci_conditions(&current);
                    let mut g_pi = conds
                        .iter()
                        .find(|c| c.kind == ConditionKind::GPi)
                        .expect("emitted above")
                        .clone();
                    g_pi.matrix =
                        project_packed(&g_pi.matrix, g_pi.packed_trace_target(), cfg.strategy)?;
                    current = doci_invert(&g_pi, &current)?;

                    current = fix_g2x2(&current, cfg)?;
                }
            }
        }

        if cfg.enforce_rho_consistency {
            current = enforce_consistency(&current)?;
        }

        let change = ((current.pair_matrix() - &prev_pi).norm_squared()
            + (current.exchange_matrix() - &prev_d).norm_squared())
        .sqrt();
        let record = doci_diagnostics(&current, sweep, change)?;
        let score = record.score();
        let feasible = record.max_trace_error() <= cfg.tol_trace
            && record.min_value() >= -cfg.tol_eig;
        records.push(record);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, current.clone()));
        }
        if feasible && change <= cfg.tol_eig {
            converged = true;
            break;
        }
    }

    let result = if converged {
        current
    } else {
        best.map(|(_, r)| r).unwrap_or(current)
    };
    let final_cost = cost_doci(r_in, &result)?;
    Ok((
        result,
        FixReport {
            sweeps_used,
            records,
            converged,
            final_cost,
        },
    ))
}

fn fix_g2x2(r: &Doci2Rdm, cfg: &FixConfig) -> Result<Doci2Rdm> {
    let l = r.l();
    if l < 2 {
        return Ok(r.clone());
    }
    if cfg.sequential_g2x2 {
        let mut pi = r.pair_matrix().clone();
        let mut d = r.exchange_matrix().clone();
        for b in 1..l {
            for a in 0..b {
                let block = DMatrix::from_row_slice(
                    2,
                    2,
                    &[pi[(a, a)] - d[(a, b)], pi[(a, b)], pi[(a, b)], pi[(b, b)] - d[(a, b)]],
                );
                let m = project_packed(&block, None, cfg.strategy)?;
                let d_new = 0.5 * ((pi[(a, a)] - m[(0, 0)]) + (pi[(b, b)] - m[(1, 1)]));
                d[(a, b)] = d_new;
                d[(b, a)] = d_new;
                pi[(a, b)] = m[(0, 1)];
                pi[(b, a)] = m[(0, 1)];
                pi[(a, a)] = m[(0, 0)] + d_new;
                pi[(b, b)] = m[(1, 1)] + d_new;
            }
        }
        return Doci2Rdm::new(l, r.n(), pi, d);
    }
    // project every block from one snapshot, then reconcile the proposals
    let mut blocks: Vec<ConditionMatrix> = doci_conditions(r)
        .into_iter()
        .filter(|c| matches!(c.kind, ConditionKind::G2x2 { .. }))
        .collect();
    for c in &mut blocks {
        c.matrix = project_packed(&c.matrix, None, cfg.strategy)?;
    }
    reconcile_g2x2(&blocks, r)
}

/// Pushes the exchange rows toward the occupations read off the pair-matrix
/// diagonal, spreading each row's defect over its off-diagonal entries.
fn enforce_consistency(r: &Doci2Rdm) -> Result<Doci2Rdm> {
    let l = r.l();
    let np = r.np() as f64;
    if r.np() < 2 || l < 2 {
        return Ok(r.clone());
    }
    let pi = r.pair_matrix();
    let mut d = r.exchange_matrix().clone();
    let spread = (l - 1) as f64;
    let mut delta = vec![0.0; l];
    for a in 0..l {
        let row: f64 = (0..l).map(|b| d[(a, b)]).sum();
        delta[a] = (pi[(a, a)] * (np - 1.0) - row) / spread;
    }
    for a in 0..l {
        for b in 0..l {
            if a != b {
                d[(a, b)] += 0.5 * (delta[a] + delta[b]);
            }
        }
    }
    Doci2Rdm::new(l, r.n(), pi.clone(), d)
}

fn doci_diagnostics(r: &Doci2Rdm, sweep: usize, change: f64) -> Result<SweepRecord> {
    let rep = validate_doci(r)?;
    let conditions = vec![
        ConditionDiag {
            name: "Pi".into(),
            trace_error: Some(rep.trace_error),
            min_value: rep.min_eig_p,
        },
        ConditionDiag {
            name: "D".into(),
            trace_error: rep.exchange_sum_error,
            min_value: rep.min_exchange_entry.unwrap_or(0.0),
        },
        ConditionDiag {
            name: "Q_pi".into(),
            trace_error: None,
            min_value: rep.min_eig_q,
        },
        ConditionDiag {
            name: "Q_d".into(),
            trace_error: None,
            min_value: rep.min_hole_exchange_entry.unwrap_or(0.0),
        },
        ConditionDiag {
            name: "G_pi".into(),
            trace_error: None,
            min_value: rep.min_eig_g,
        },
        ConditionDiag {
            name: "G_2x2".into(),
            trace_error: None,
            min_value: rep.min_g2x2.unwrap_or(0.0),
        },
    ];
    Ok(SweepRecord {
        sweep,
        conditions,
        frobenius_change: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::{exact_doci_rdms, pairing_energy_from_rdm, pccd_solve, PairingModel};
    use crate::rdm::{embed_to_spin, off_seniority_sum, validate_spin};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exact(l: usize, np: usize, g: f64) -> Doci2Rdm {
        let m = PairingModel::picket_fence(l, np, 1.0, g).unwrap();
        exact_doci_rdms(&m).unwrap()
    }

    #[test]
    fn order_parsing() {
        assert!(parse_order("PQG").is_ok());
        assert!(parse_order("gqp").is_ok());
        assert!(parse_order("PPG").is_err());
        assert!(parse_order("PQ").is_err());
        assert!(parse_order("PQGX").is_err());
    }

    #[test]
    fn cost_examples() {
        let r = exact(3, 1, -0.2);
        assert_eq!(cost_doci(&r, &r).unwrap(), 0.0);
        let mut pi = r.pair_matrix().clone();
        pi[(0, 1)] += 1e-3;
        let other = Doci2Rdm::new(r.l(), r.n(), pi, r.exchange_matrix().clone()).unwrap();
        let expect = 1e-6 / (2.0 * 9.0);
        assert!((cost_doci(&r, &other).unwrap() - expect).abs() <= 1e-18);
        assert_eq!(
            cost_doci(&r, &other).unwrap(),
            cost_doci(&other, &r).unwrap()
        );
    }

    #[test]
    fn regular_cost_matches_packed_shortcut() {
        // every canonical packed entry appears in four sign-squared tuples
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let a = exact(3, 2, -0.3);
        let b = exact(3, 2, -0.1);
        let (ga, gb) = (embed_to_spin(&a), embed_to_spin(&b));
        let cost = cost_regular(&ga, &gb).unwrap();
        let m: f64 = 2.0 * 3.0;
        let shortcut = 4.0 * (ga.packed() - gb.packed()).norm_squared() / m.powi(4);
        assert!((cost - shortcut).abs() <= 1e-15, "{cost} vs {shortcut}");
        let _ = &mut rng;
    }

    #[test]
    fn violation_measure_counts_injected_defects() {
        let r = exact(4, 2, -0.3);
        assert!(violation_measure_doci(&r).unwrap() <= 1e-9);

        // push one pair eigenvalue to exactly -0.1
        let spec = Spectrum::of(&SymMatrix::symmetrize(r.pair_matrix()).unwrap()).unwrap();
        let mut vals: Vec<f64> = spec.eigenvalues().iter().cloned().collect();
        let k = vals.len() - 1;
        let before = vals[k];
        vals[k] = -0.1;
        let pi = spec.rebuild_with(&vals).into_matrix();
        let bad = Doci2Rdm::new(r.l(), r.n(), pi, r.exchange_matrix().clone()).unwrap();
        let v1 = violation_measure_doci(&bad).unwrap();
        assert!(v1 >= 0.1, "measure {v1}");

        // a second eigenvalue at -0.2 adds exactly 0.2 to the pair term
        let mut vals2: Vec<f64> = spec.eigenvalues().iter().cloned().collect();
        vals2[k] = -0.1;
        vals2[k - 1] = -0.2;
        let pi2 = spec.rebuild_with(&vals2).into_matrix();
        let bad2 = Doci2Rdm::new(r.l(), r.n(), pi2, r.exchange_matrix().clone()).unwrap();
        let v2 = violation_measure_doci(&bad2).unwrap();
        let pair_only_increase = 0.2 + vals2[k - 1].signum() * 0.0 - 0.0;
        assert!(
            v2 - v1 >= pair_only_increase - 0.05,
            "increase {} too small",
            v2 - v1
        );
        let _ = before;
    }

    #[test]
    fn exchange_clamp_shift_reaches_fixed_point() {
        let mut d = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.6, -0.2, 0.6, 0.0, 0.8, -0.2, 0.8, 0.0],
        );
        clamp_shift_exchange(&mut d, 2.0);
        let sum: f64 = d.iter().sum();
        assert!((sum - 2.0).abs() <= 1e-11);
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert!(d[(a, b)] >= -1e-12);
                }
                assert_eq!(d[(a, a)], 0.0);
            }
        }
    }

    #[test]
    fn exact_input_passes_doci_fixer_in_one_sweep() {
        let r = exact(6, 3, -0.25);
        let (fixed, report) = fix_doci(&r, &FixConfig::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.sweeps_used, 1);
        assert!(report.final_cost <= 1e-12);
        assert!(cost_doci(&r, &fixed).unwrap() <= 1e-12);
    }

    #[test]
    fn exact_input_passes_regular_fixer_in_one_sweep() {
        let r = exact(4, 2, -0.25);
        let g2 = embed_to_spin(&r);
        let (fixed, report) = fix_regular(&g2, &FixConfig::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.sweeps_used, 1);
        assert!((fixed.packed() - g2.packed()).norm() <= 1e-9);
    }

    #[test]
    fn hand_projected_two_level_case() {
        let pi = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.0]);
        let d = DMatrix::zeros(2, 2);
        let r = Doci2Rdm::new(2, 2, pi, d).unwrap();
        let (fixed, report) = fix_doci(&r, &FixConfig::default()).unwrap();
        assert!(report.converged, "records: {:?}", report.records.last());
        let rep = validate_doci(&fixed).unwrap();
        assert!(rep.max_violation() <= 1e-8);
        assert!((fixed.pair_trace() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn noisy_doci_input_is_restored() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let r = exact(6, 3, -0.2);
        let scale = 1e-3;
        let mut pi = r.pair_matrix().clone();
        let mut d = r.exchange_matrix().clone();
        for a in 0..6 {
            for b in a..6 {
                let e = rng.gen_range(-scale..scale);
                pi[(a, b)] += e;
                if a != b {
                    pi[(b, a)] += e;
                    let f = rng.gen_range(-scale..scale);
                    d[(a, b)] += f;
                    d[(b, a)] += f;
                }
            }
        }
        let noisy = Doci2Rdm::new(6, 6, pi, d).unwrap();
        let (fixed, report) = fix_doci(&noisy, &FixConfig::default()).unwrap();
        assert!(report.converged, "not converged: {:?}", report.records.last());
        let rep = validate_doci(&fixed).unwrap();
        assert!(rep.max_violation() <= 1e-8, "violation {}", rep.max_violation());
        assert!(report.final_cost <= 10.0 * scale * scale);
    }

    #[test]
    fn noisy_spin_input_is_restored_and_stays_seniority_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        let r = exact(3, 1, -0.3);
        let scale = 1e-3;
        let mut pi = r.pair_matrix().clone();
        let mut d = r.exchange_matrix().clone();
        for a in 0..3 {
            for b in a..3 {
                let e = rng.gen_range(-scale..scale);
                pi[(a, b)] += e;
                if a != b {
                    pi[(b, a)] += e;
                    let f = rng.gen_range(0.0..scale);
                    d[(a, b)] += f;
                    d[(b, a)] += f;
                }
            }
        }
        let noisy = embed_to_spin(&Doci2Rdm::new(3, 2, pi, d).unwrap());
        let (fixed, report) = fix_regular(&noisy, &FixConfig::default()).unwrap();
        assert!(report.converged, "records: {:?}", report.records.last());
        let rep = validate_spin(&fixed).unwrap();
        assert!(rep.max_violation() <= 1e-8, "violation {}", rep.max_violation());
        assert!(rep.trace_error <= 1e-10);
        assert!(off_seniority_sum(&fixed) <= 1e-6);
        assert!(report.final_cost <= 10.0 * scale * scale);
    }

    #[test]
    fn fixing_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        let r = exact(5, 2, -0.35);
        let mut pi = r.pair_matrix().clone();
        for a in 0..5 {
            for b in a..5 {
                let e = rng.gen_range(-1e-2..1e-2);
                pi[(a, b)] += e;
                if a != b {
                    pi[(b, a)] += e;
                }
            }
        }
        let noisy = Doci2Rdm::new(5, 4, pi, r.exchange_matrix().clone()).unwrap();
        let cfg = FixConfig::default();
        let (once, rep1) = fix_doci(&noisy, &cfg).unwrap();
        assert!(rep1.converged);
        let (twice, rep2) = fix_doci(&once, &cfg).unwrap();
        assert!(rep2.converged);
        let change = ((once.pair_matrix() - twice.pair_matrix()).norm_squared()
            + (once.exchange_matrix() - twice.exchange_matrix()).norm_squared())
        .sqrt();
        assert!(change <= cfg.tol_eig, "second fix moved by {change}");
    }

    #[test]
    fn cost_triangle_inequality_against_exact() {
        let m = PairingModel::picket_fence(6, 3, 1.0, -0.3).unwrap();
        let exact_r = exact_doci_rdms(&m).unwrap();
        let base = pccd_solve(&m, None);
        let resp = crate::pairing::response_doci_rdms(&m, &base, 1e-4).unwrap();
        let (fixed, _) = fix_doci(&resp.rdm, &FixConfig::default()).unwrap();
        let d = |a: &Doci2Rdm, b: &Doci2Rdm| cost_doci(a, b).unwrap().sqrt();
        assert!(
            d(&resp.rdm, &fixed) <= d(&resp.rdm, &exact_r) + d(&exact_r, &fixed) + 1e-12
        );
    }

    #[test]
    fn all_orderings_agree_on_the_testbed() {
        let m = PairingModel::picket_fence(6, 3, 1.0, -0.3).unwrap();
        let base = pccd_solve(&m, None);
        let resp = crate::pairing::response_doci_rdms(&m, &base, 1e-4).unwrap();
        let mut costs = Vec::new();
        for order in ["PQG", "PGQ", "QPG", "QGP", "GPQ", "GQP"] {
            let cfg = FixConfig {
                order: parse_order(order).unwrap(),
                ..FixConfig::default()
            };
            let (_, report) = fix_doci(&resp.rdm, &cfg).unwrap();
            assert!(report.converged, "order {order} did not converge");
            costs.push(report.final_cost);
        }
        let (lo, hi) = costs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
                (lo.min(c), hi.max(c))
            });
        assert!(hi - lo <= 1e-4, "ordering spread {}", hi - lo);
    }

    #[test]
    fn sequential_blocks_also_converge() {
        let m = PairingModel::picket_fence(6, 3, 1.0, -0.4).unwrap();
        let base = pccd_solve(&m, None);
        let resp = crate::pairing::response_doci_rdms(&m, &base, 1e-4).unwrap();
        let cfg = FixConfig {
            sequential_g2x2: true,
            ..FixConfig::default()
        };
        let (fixed, report) = fix_doci(&resp.rdm, &cfg).unwrap();
        assert!(report.converged);
        assert!(validate_doci(&fixed).unwrap().max_violation() <= 1e-8);
    }

    #[test]
    fn consistency_enforcement_shrinks_residual() {
        let m = PairingModel::picket_fence(6, 3, 1.0, -0.45).unwrap();
        let base = pccd_solve(&m, None);
        let resp = crate::pairing::response_doci_rdms(&m, &base, 1e-4).unwrap();
        let plain = fix_doci(&resp.rdm, &FixConfig::default()).unwrap().0;
        let cfg = FixConfig {
            enforce_rho_consistency: true,
            ..FixConfig::default()
        };
        let (enforced, _) = fix_doci(&resp.rdm, &cfg).unwrap();
        let res_plain = plain.occupation_consistency().unwrap();
        let res_enforced = enforced.occupation_consistency().unwrap();
        assert!(
            res_enforced <= res_plain + 1e-12,
            "enforced {res_enforced} vs plain {res_plain}"
        );
    }

    #[test]
    fn fixed_response_energy_behaves_on_the_testbed() {
        let m = PairingModel::picket_fence(12, 6, 1.0, -0.5).unwrap();
        let base = pccd_solve(&m, None);
        let resp = crate::pairing::response_doci_rdms(&m, &base, 1e-4).unwrap();
        let (fixed, report) = fix_doci(&resp.rdm, &FixConfig::default()).unwrap();
        assert!(report.converged, "fixer did not converge at g=-0.5");
        let e_exact = crate::pairing::exact_ground(&m).unwrap().energy;
        let e_fixed = pairing_energy_from_rdm(&m, &fixed).unwrap();
        assert!(
            e_fixed >= e_exact - 1e-8,
            "fixed energy {e_fixed} fell below exact {e_exact}"
        );
    }

    #[test]
    fn rejects_wildly_wrong_trace() {
        let r = exact(3, 1, -0.2);
        let g2 = embed_to_spin(&r);
        let bad = Spin2Rdm::from_packed(3, 2, g2.packed() * 3.0).unwrap();
        assert!(matches!(
            fix_regular(&bad, &FixConfig::default()),
            Err(RdmError::Domain(_))
        ));
    }
}
