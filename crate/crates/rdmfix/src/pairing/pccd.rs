//! Pair-coupled-cluster solver for the pairing model, and response density
//! matrices obtained by differentiating its projected-equation energy with
//! respect to the Hamiltonian couplings.
//!
//! The geminal ansatz excites whole pairs from the reference occupation into
//! the virtual levels. Projecting the Schroedinger equation on the reference
//! and its pair-excited determinants closes in the amplitudes `c[i][a]`
//! because the Hamiltonian only ever moves one pair:
//!
//! ```text
//! R[i][a] = W[a][i]
//!         + (2(eps_a - eps_i) + W[a][a] - W[i][i] + dV[i][a]) c[i][a]
//!         + sum_{b != a} W[a][b] c[i][b] + sum_{j != i} W[i][j] c[j][a]
//!         - c[i][a] (rowW_i + colW_a) + W[i][a] c[i][a]^2
//!         + sum_{j != i, b != a} W[j][b] c[i][b] c[j][a]
//! ```
//!
//! with `rowW_i = sum_b W[i][b] c[i][b]`, `colW_a = sum_j W[j][a] c[j][a]`,
//! and `dV[i][a]` the occupancy-coupling change of swapping level `i` for
//! `a`. The energy is `E_ref + sum_{i,a} W[i][a] c[i][a]`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{PairingModel, Probe};
use crate::error::{RdmError, Result};
use crate::rdm::Doci2Rdm;

/// Default finite-difference step for response derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Solver controls for the damped Newton iteration.
#[derive(Debug, Clone, Copy)]
pub struct PccdOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub max_backtracks: usize,
}

impl Default for PccdOptions {
    fn default() -> Self {
        PccdOptions {
            tol: 1e-12,
            max_iter: 200,
            damping: 0.5,
            max_backtracks: 40,
        }
    }
}

/// Converged (or best-effort) solution of the projected equations.
#[derive(Debug, Clone)]
pub struct PccdState {
    /// Reference occupation: the `Np` lowest levels.
    pub occupied: Vec<usize>,
    /// The remaining levels.
    pub virtuals: Vec<usize>,
    /// Amplitudes `c[i][a]`, row `i` over `occupied`, column `a` over
    /// `virtuals`.
    pub amplitudes: DMatrix<f64>,
    pub energy: f64,
    pub converged: bool,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Internal description of one general pair Hamiltonian:
/// `H = sum_p 2 eps_p n_p + sum_pq W_pq hop(p,q) + sum_{a<b} V_ab n_a n_b`.
struct PairSystem<'a> {
    eps: &'a [f64],
    w: &'a DMatrix<f64>,
    v: &'a DMatrix<f64>,
    occupied: Vec<usize>,
    virtuals: Vec<usize>,
}

impl<'a> PairSystem<'a> {
    fn new(eps: &'a [f64], pairs: usize, w: &'a DMatrix<f64>, v: &'a DMatrix<f64>) -> Self {
        let mut order: Vec<usize> = (0..eps.len()).collect();
        order.sort_by(|&i, &j| eps[i].total_cmp(&eps[j]));
        let occupied = {
            let mut occ = order[..pairs].to_vec();
            occ.sort_unstable();
            occ
        };
        let virtuals: Vec<usize> = (0..eps.len()).filter(|p| !occupied.contains(p)).collect();
        PairSystem {
            eps,
            w,
            v,
            occupied,
            virtuals,
        }
    }

    fn reference_energy(&self) -> f64 {
        let mut e = 0.0;
        for (k, &i) in self.occupied.iter().enumerate() {
            e += 2.0 * self.eps[i] + self.w[(i, i)];
            for &j in &self.occupied[k + 1..] {
                e += self.v[(i, j)];
            }
        }
        e
    }

    fn energy(&self, c: &DMatrix<f64>) -> f64 {
        let mut e = self.reference_energy();
        for (ii, &i) in self.occupied.iter().enumerate() {
            for (aa, &a) in self.virtuals.iter().enumerate() {
                e += self.w[(i, a)] * c[(ii, aa)];
            }
        }
        e
    }

    fn residual(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        let no = self.occupied.len();
        let nv = self.virtuals.len();
        let w = self.w;
        let row_w: Vec<f64> = (0..no)
            .map(|ii| {
                let i = self.occupied[ii];
                (0..nv).map(|bb| w[(i, self.virtuals[bb])] * c[(ii, bb)]).sum()
            })
            .collect();
        let col_w: Vec<f64> = (0..nv)
            .map(|aa| {
                let a = self.virtuals[aa];
                (0..no).map(|jj| w[(self.occupied[jj], a)] * c[(jj, aa)]).sum()
            })
            .collect();

        let mut r = DMatrix::zeros(no, nv);
        for (ii, &i) in self.occupied.iter().enumerate() {
            for (aa, &a) in self.virtuals.iter().enumerate() {
                let cia = c[(ii, aa)];
                let mut dv = 0.0;
                for &q in &self.occupied {
                    if q != i {
                        dv += self.v[(a, q)] - self.v[(i, q)];
                    }
                }
                let delta = 2.0 * (self.eps[a] - self.eps[i]) + w[(a, a)] - w[(i, i)] + dv;
                let mut val = w[(a, i)] + delta * cia - cia * (row_w[ii] + col_w[aa])
                    + w[(i, a)] * cia * cia;
                for (bb, &b) in self.virtuals.iter().enumerate() {
                    if bb != aa {
                        val += w[(a, b)] * c[(ii, bb)];
                    }
                }
                for (jj, &j) in self.occupied.iter().enumerate() {
                    if jj != ii {
                        val += w[(i, j)] * c[(jj, aa)];
                    }
                }
                // paired double excitations reached by one hop
                let mut t2 = 0.0;
                for (jj, &j) in self.occupied.iter().enumerate() {
                    if jj == ii {
                        continue;
                    }
                    for (bb, &b) in self.virtuals.iter().enumerate() {
                        if bb == aa {
                            continue;
                        }
                        t2 += w[(j, b)] * c[(ii, bb)] * c[(jj, aa)];
                    }
                }
                r[(ii, aa)] = val + t2;
            }
        }
        r
    }

    fn jacobian(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        let no = self.occupied.len();
        let nv = self.virtuals.len();
        let w = self.w;
        let row_w: Vec<f64> = (0..no)
            .map(|ii| {
                let i = self.occupied[ii];
                (0..nv).map(|bb| w[(i, self.virtuals[bb])] * c[(ii, bb)]).sum()
            })
            .collect();
        let col_w: Vec<f64> = (0..nv)
            .map(|aa| {
                let a = self.virtuals[aa];
                (0..no).map(|jj| w[(self.occupied[jj], a)] * c[(jj, aa)]).sum()
            })
            .collect();

        let dim = no * nv;
        let mut jac = DMatrix::zeros(dim, dim);
        for (ii, &i) in self.occupied.iter().enumerate() {
            for (aa, &a) in self.virtuals.iter().enumerate() {
                let row = ii * nv + aa;
                let cia = c[(ii, aa)];
                let mut dv = 0.0;
                for &q in &self.occupied {
                    if q != i {
                        dv += self.v[(a, q)] - self.v[(i, q)];
                    }
                }
                let delta = 2.0 * (self.eps[a] - self.eps[i]) + w[(a, a)] - w[(i, i)] + dv;
                for (jj, &j) in self.occupied.iter().enumerate() {
                    for (bb, &b) in self.virtuals.iter().enumerate() {
                        let col = jj * nv + bb;
                        let mut val = 0.0;
                        if ii == jj && aa == bb {
                            // the quadratic terms cancel against the rowW and
                            // colW cross derivatives through c[i][a] itself
                            val += delta - row_w[ii] - col_w[aa];
                        } else if ii == jj {
                            val += w[(a, b)] - cia * w[(i, b)];
                            for (kk, &k) in self.occupied.iter().enumerate() {
                                if kk != ii {
                                    val += w[(k, b)] * c[(kk, aa)];
                                }
                            }
                        } else if aa == bb {
                            val += w[(i, j)] - cia * w[(j, a)];
                            for (dd, &d) in self.virtuals.iter().enumerate() {
                                if dd != aa {
                                    val += w[(j, d)] * c[(ii, dd)];
                                }
                            }
                        }
                        jac[(row, col)] = val;
                    }
                }
            }
        }
        jac
    }
}

fn newton_solve(system: &PairSystem, guess: Option<&DMatrix<f64>>, opts: &PccdOptions) -> PccdState {
    let no = system.occupied.len();
    let nv = system.virtuals.len();
    let mut c = match guess {
        Some(g) => {
            assert_eq!(
                (g.nrows(), g.ncols()),
                (no, nv),
                "amplitude guess must be occupied x virtual"
            );
            g.clone()
        }
        None => DMatrix::zeros(no, nv),
    };

    let mut converged = false;
    let mut iterations = 0;
    let mut residual_norm = system.residual(&c).norm();
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let r = system.residual(&c);
        residual_norm = r.norm();
        if residual_norm <= opts.tol {
            converged = true;
            break;
        }
        let jac = system.jacobian(&c);
        let rhs = DMatrix::from_fn(no * nv, 1, |k, _| -r[(k / nv, k % nv)]);
        let step = match jac.lu().solve(&rhs) {
            Some(s) => s,
            None => break,
        };
        let apply = |c: &DMatrix<f64>, lambda: f64| {
            DMatrix::from_fn(no, nv, |i, a| c[(i, a)] + lambda * step[(i * nv + a, 0)])
        };
        let mut lambda = 1.0;
        let mut candidate = apply(&c, lambda);
        let mut backtracks = 0;
        while system.residual(&candidate).norm() > residual_norm
            && backtracks < opts.max_backtracks
        {
            lambda *= opts.damping;
            candidate = apply(&c, lambda);
            backtracks += 1;
        }
        c = candidate;
    }
    if !converged {
        residual_norm = system.residual(&c).norm();
        converged = residual_norm <= opts.tol;
    }
    PccdState {
        occupied: system.occupied.clone(),
        virtuals: system.virtuals.clone(),
        energy: system.energy(&c),
        amplitudes: c,
        converged,
        residual_norm,
        iterations,
    }
}

/// Solves the projected equations for a general pair Hamiltonian given by
/// single-particle energies, a symmetric hop-coupling matrix `w` and a
/// symmetric occupancy-coupling matrix `v` (upper triangle used).
pub fn pccd_solve_general(
    eps: &[f64],
    pairs: usize,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    guess: Option<&DMatrix<f64>>,
    opts: &PccdOptions,
) -> Result<PccdState> {
    let l = eps.len();
    if pairs == 0 || pairs > l {
        return Err(RdmError::Domain(format!(
            "pair count {pairs} invalid for {l} levels"
        )));
    }
    for (name, m) in [("hop", w), ("occupancy", v)] {
        if m.nrows() != l || m.ncols() != l {
            return Err(RdmError::DimensionMismatch(format!(
                "{name}-coupling matrix must be {l}x{l}"
            )));
        }
    }
    let system = PairSystem::new(eps, pairs, w, v);
    Ok(newton_solve(&system, guess, opts))
}

/// Solves the projected equations for the pairing model, starting from the
/// reference (zero amplitudes) unless a guess is given.
pub fn pccd_solve(m: &PairingModel, guess: Option<&DMatrix<f64>>) -> PccdState {
    let l = m.levels();
    let w = DMatrix::from_element(l, l, m.g());
    let v = DMatrix::zeros(l, l);
    pccd_solve_general(m.eps(), m.pairs(), &w, &v, guess, &PccdOptions::default())
        .expect("model invariants guarantee consistent sizes")
}

/// Response density matrices and the convergence status of the solves
/// behind them.
#[derive(Debug, Clone)]
pub struct ResponseRdms {
    pub rdm: Doci2Rdm,
    /// True when the base solve and every perturbed solve converged.
    pub all_converged: bool,
}

/// Response density matrices of the projected-equation energy: each entry is
/// a central finite difference of the energy under a perturbation of the
/// matching Hamiltonian coupling, re-solving the equations warm-started from
/// the unperturbed amplitudes.
pub fn response_doci_rdms(m: &PairingModel, base: &PccdState, h: f64) -> Result<ResponseRdms> {
    if !(h.is_finite() && h > 0.0) {
        return Err(RdmError::Domain(format!("finite-difference step {h} invalid")));
    }
    let l = m.levels();
    let mut tasks: Vec<Probe> = Vec::new();
    for a in 0..l {
        for b in a..l {
            for eta in [h, -h] {
                tasks.push(Probe::PairCoupling { a, b, eta });
            }
        }
    }
    for a in 0..l {
        for b in a + 1..l {
            for eta in [h, -h] {
                tasks.push(Probe::DensityDensity { a, b, eta });
            }
        }
    }

    let results: Vec<(f64, bool)> = tasks
        .par_iter()
        .map(|probe| {
            let mut w = DMatrix::from_element(l, l, m.g());
            let mut v = DMatrix::zeros(l, l);
            match *probe {
                Probe::PairCoupling { a, b, eta } => {
                    w[(a, b)] += eta;
                    if a != b {
                        w[(b, a)] += eta;
                    }
                }
                Probe::DensityDensity { a, b, eta } => {
                    v[(a, b)] += eta;
                    v[(b, a)] += eta;
                }
            }
            let state = pccd_solve_general(
                m.eps(),
                m.pairs(),
                &w,
                &v,
                Some(&base.amplitudes),
                &PccdOptions::default(),
            )
            .expect("perturbed system keeps the base dimensions");
            (state.energy, state.converged)
        })
        .collect();

    let mut pi = DMatrix::zeros(l, l);
    let mut d = DMatrix::zeros(l, l);
    let mut all_converged = base.converged;
    let mut idx = 0;
    for a in 0..l {
        for b in a..l {
            let (e_plus, ok_plus) = results[idx];
            let (e_minus, ok_minus) = results[idx + 1];
            idx += 2;
            all_converged &= ok_plus && ok_minus;
            let de = (e_plus - e_minus) / (2.0 * h);
            // the symmetric probe drives both (a,b) and (b,a) couplings
            let value = if a == b { de } else { 0.5 * de };
            pi[(a, b)] = value;
            pi[(b, a)] = value;
        }
    }
    for a in 0..l {
        for b in a + 1..l {
            let (e_plus, ok_plus) = results[idx];
            let (e_minus, ok_minus) = results[idx + 1];
            idx += 2;
            all_converged &= ok_plus && ok_minus;
            let de = (e_plus - e_minus) / (2.0 * h);
            d[(a, b)] = de;
            d[(b, a)] = de;
        }
    }

    let rdm = Doci2Rdm::new(l, m.electrons(), pi, d)?;
    Ok(ResponseRdms { rdm, all_converged })
}
