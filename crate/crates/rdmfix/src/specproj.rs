//! Nearest-symmetric-PSD projection, with and without a fixed-trace
//! constraint.
//!
//! The unconstrained problem is solved by clipping negative eigenvalues of
//! the symmetric part. With a trace constraint `Tr B = T` the minimizer is
//! obtained by shifting the whole spectrum down by a constant `sigma0` and
//! clipping, where `sigma0` solves `f(sigma) = T` for the piecewise-linear
//! function `f(sigma) = sum_i max(lambda_i - sigma, 0)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{RdmError, Result};

/// Relative tolerance on `|f(sigma) - T|` for the bisection root search.
pub const ROOT_TOL: f64 = 1e-12;
/// Absolute bracket width at which bisection stops regardless of residual.
pub const BRACKET_TOL: f64 = 1e-14;
/// Cap on clip/shift alternations for [`ProjectionStrategy::ZeroAndShift`].
pub const MAX_ALTERNATIONS: usize = 500;

/// A real square matrix that is symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    mat: DMatrix<f64>,
}

impl SymMatrix {
    /// Symmetric part `(M + M^T)/2` of a square matrix.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<SymMatrix> {
        if m.nrows() != m.ncols() {
            return Err(RdmError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let mut sym = m.clone();
        for i in 0..m.nrows() {
            for j in 0..i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                sym[(i, j)] = v;
                sym[(j, i)] = v;
            }
        }
        Ok(SymMatrix { mat: sym })
    }

    /// Wraps a matrix that is already exactly symmetric.
    pub fn from_symmetric(m: DMatrix<f64>) -> Result<SymMatrix> {
        if m.nrows() != m.ncols() {
            return Err(RdmError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        for i in 0..m.nrows() {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(RdmError::Domain(format!(
                        "matrix entry ({i},{j}) differs from its transpose"
                    )));
                }
            }
        }
        Ok(SymMatrix { mat: m })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn of(m: &SymMatrix) -> Result<Spectrum> {
        let dim = m.dim();
        let eig = m
            .mat
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 100 * dim.max(10))
            .ok_or(RdmError::EigenFailure { dim })?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigenvalues = DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors =
            DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
        Ok(Spectrum {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, column `k` matching eigenvalue `k`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Rebuilds `U diag(vals) U^T` with the stored eigenvectors.
    pub fn rebuild_with(&self, vals: &[f64]) -> SymMatrix {
        assert_eq!(vals.len(), self.eigenvalues.len());
        let n = vals.len();
        let mut out = DMatrix::zeros(n, n);
        for (k, &v) in vals.iter().enumerate() {
            if v != 0.0 {
                let col = self.eigenvectors.column(k);
                // out += v * col * col^T, filling only the lower triangle
                for i in 0..n {
                    let ci = v * col[i];
                    for j in 0..=i {
                        out[(i, j)] += ci * col[j];
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out[(j, i)] = out[(i, j)];
            }
        }
        SymMatrix { mat: out }
    }
}

/// `f(sigma) = sum_i max(lambda_i - sigma, 0)`: the trace the spectrum would
/// have after shifting down by `sigma` and clipping. Continuous, piecewise
/// linear and nonincreasing in `sigma`.
pub fn shifted_positive_trace(eigenvalues: &[f64], sigma: f64) -> f64 {
    eigenvalues.iter().map(|&l| (l - sigma).max(0.0)).sum()
}

/// Outcome of solving `f(sigma) = T`.
#[derive(Debug, Clone)]
pub struct ShiftResult {
    /// The shift applied to the whole spectrum.
    pub sigma0: f64,
    /// `max(lambda_i - sigma0, 0)`, in the input's eigenvalue order.
    pub shifted_eigenvalues: Vec<f64>,
    /// Bisection iterations used.
    pub iterations: usize,
}

/// Solves `f(sigma) = T` by bisection on `[lambda_min - T, lambda_max]`.
///
/// `f` is nonincreasing with `f(lambda_max) = 0` and
/// `f(lambda_min - T) >= T`, so the bracket always contains a root. For
/// `T = 0` the root is not unique and the smallest feasible shift
/// `sigma0 = lambda_max` is returned.
pub fn shift_root(eigenvalues: &[f64], target_trace: f64) -> Result<ShiftResult> {
    if eigenvalues.is_empty() {
        return Err(RdmError::Domain("empty eigenvalue set".into()));
    }
    if target_trace < 0.0 {
        return Err(RdmError::Domain(format!(
            "trace target {target_trace} is negative"
        )));
    }
    let lmax = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if target_trace == 0.0 {
        return Ok(ShiftResult {
            sigma0: lmax,
            shifted_eigenvalues: vec![0.0; eigenvalues.len()],
            iterations: 0,
        });
    }

    let tol = ROOT_TOL * target_trace.max(1.0);
    let mut lo = lmin - target_trace;
    let mut hi = lmax;
    let mut sigma;
    let mut iterations = 0;
    loop {
        sigma = 0.5 * (lo + hi);
        let f = shifted_positive_trace(eigenvalues, sigma);
        iterations += 1;
        if (f - target_trace).abs() <= tol || hi - lo <= BRACKET_TOL {
            break;
        }
        if f > target_trace {
            lo = sigma;
        } else {
            hi = sigma;
        }
    }
    let shifted_eigenvalues = eigenvalues.iter().map(|&l| (l - sigma).max(0.0)).collect();
    Ok(ShiftResult {
        sigma0: sigma,
        shifted_eigenvalues,
        iterations,
    })
}

/// How the trace-constrained projection repairs the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionStrategy {
    /// Shift by the root of `f(sigma) = T` found by bisection.
    #[default]
    Bisection,
    /// Alternate clipping negatives to zero with a uniform shift restoring
    /// the trace, until both hold.
    ZeroAndShift,
}

impl std::str::FromStr for ProjectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bisection" => Ok(ProjectionStrategy::Bisection),
            "zero-and-shift" | "zero_and_shift" => Ok(ProjectionStrategy::ZeroAndShift),
            other => Err(format!("unknown projection strategy '{other}'")),
        }
    }
}

fn zero_and_shift(eigenvalues: &[f64], target_trace: f64) -> Vec<f64> {
    let n = eigenvalues.len() as f64;
    let tol = ROOT_TOL * target_trace.max(1.0);
    let mut vals: Vec<f64> = eigenvalues.to_vec();
    for _ in 0..MAX_ALTERNATIONS {
        for v in &mut vals {
            *v = v.max(0.0);
        }
        let trace: f64 = vals.iter().sum();
        if (trace - target_trace).abs() <= tol {
            return vals;
        }
        let shift = (target_trace - trace) / n;
        for v in &mut vals {
            *v += shift;
        }
    }
    for v in &mut vals {
        *v = v.max(0.0);
    }
    vals
}

/// Nearest symmetric PSD matrix in the Frobenius norm, optionally with a
/// fixed trace.
///
/// Without a trace target this clips negative eigenvalues. With a target the
/// eigenvalues are shifted and clipped; the eigenvectors of the input are
/// kept either way. `T = 0` forces the zero matrix, the only PSD matrix with
/// zero trace.
pub fn project_psd_trace(
    m: &SymMatrix,
    trace: Option<f64>,
    strategy: ProjectionStrategy,
) -> Result<SymMatrix> {
    if let Some(t) = trace {
        if t < 0.0 {
            return Err(RdmError::Domain(format!("trace target {t} is negative")));
        }
        if t == 0.0 {
            return Ok(SymMatrix {
                mat: DMatrix::zeros(m.dim(), m.dim()),
            });
        }
    }
    let spectrum = Spectrum::of(m)?;
    let eigs: Vec<f64> = spectrum.eigenvalues().iter().cloned().collect();
    let repaired = match trace {
        None => eigs.iter().map(|&l| l.max(0.0)).collect::<Vec<_>>(),
        Some(t) => match strategy {
            ProjectionStrategy::Bisection => shift_root(&eigs, t)?.shifted_eigenvalues,
            ProjectionStrategy::ZeroAndShift => zero_and_shift(&eigs, t),
        },
    };
    Ok(spectrum.rebuild_with(&repaired))
}
