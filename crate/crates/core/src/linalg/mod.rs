//! Dense small-matrix numerics used throughout the crate.
//!
//! Everything here operates on [`Matrix`] (a column-major `nalgebra` dense
//! matrix). The dimensions that show up in controller synthesis are tiny
//! (at most a few dozen), so the routines favour transparency over speed:
//! Sylvester equations are solved through their Kronecker form and spectra
//! are computed with a balanced Hessenberg QR iteration.

mod eigen;
mod poly;
mod sylvester;

pub use eigen::{eigenvalues, is_hurwitz, spectral_abscissa};
pub use poly::{companion_pair, minimal_polynomial, PolyCoeffs};
pub use sylvester::{solve_lyapunov, solve_sylvester};

use nalgebra::DMatrix;
use thiserror::Error;

/// Dense real matrix.
pub type Matrix = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("spectra overlap: minimum eigenvalue gap {gap:.3e} is below {tol:.1e}")]
    SpectraOverlap { gap: f64, tol: f64 },
    #[error("linear system is singular (pivot ratio {ratio:.3e})")]
    Singular { ratio: f64 },
    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotHurwitz { abscissa: f64 },
    #[error("QR iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Numerical thresholds used by the solvers.
///
/// The defaults are the values used everywhere in the crate; callers that
/// need something looser or tighter construct their own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Minimum eigenvalue separation before a Sylvester equation is rejected.
    pub spectral_gap: f64,
    /// Pivot ratio below which the Kronecker system counts as singular.
    pub singular_pivot: f64,
    /// Largest real part a Lyapunov input may have.
    pub hurwitz: f64,
    /// Relative singular value threshold for the Krylov rank test.
    pub krylov_rank: f64,
    /// Relative singular value threshold for controllability rank tests.
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            spectral_gap: 1e-8,
            singular_pivot: 1e-14,
            hurwitz: 1e-9,
            krylov_rank: 1e-9,
            rank: 1e-10,
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Largest singular value. Zero for empty matrices.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    let min = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Numerical rank with singular values measured relative to the largest one.
pub fn rank(m: &Matrix, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |a, &s| a.max(s));
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Controllability matrix `[B, AB, …, A^{n-1}B]`.
pub fn controllability_matrix(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    out
}

/// Whether `(a, b)` is controllable according to a relative rank test.
pub fn is_controllable(a: &Matrix, b: &Matrix, rel_tol: f64) -> bool {
    rank(&controllability_matrix(a, b), rel_tol) == a.nrows()
}

/// Builds a matrix from row slices; every row must have the same length.
pub fn from_rows(rows: &[&[f64]]) -> Matrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    Matrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub(crate) fn check_square(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}
