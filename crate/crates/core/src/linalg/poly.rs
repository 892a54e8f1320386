use nalgebra::DVector;
use num_complex::Complex64;

use super::{check_square, eigenvalues, Matrix, Result, Tolerances};

/// Monic real polynomial `λ^d + c_{d-1}λ^{d-1} + … + c_0`.
///
/// Only the non-leading coefficients are stored, in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    coeffs: Vec<f64>,
}

impl PolyCoeffs {
    /// `lower` holds `c_0 … c_{d-1}`; its length is the degree.
    ///
    /// # Panics
    /// If `lower` is empty or contains non-finite values.
    pub fn monic(lower: Vec<f64>) -> Self {
        assert!(!lower.is_empty(), "monic polynomial needs degree >= 1");
        assert!(lower.iter().all(|c| c.is_finite()), "non-finite coefficient");
        Self { coeffs: lower }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Non-leading coefficients in ascending degree.
    pub fn lower(&self) -> &[f64] {
        &self.coeffs
    }

    /// All coefficients in ascending degree, including the leading 1.
    pub fn full(&self) -> Vec<f64> {
        let mut v = self.coeffs.clone();
        v.push(1.0);
        v
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.full()
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Evaluates the polynomial at a square matrix (Horner form).
    pub fn eval_matrix(&self, s: &Matrix) -> Matrix {
        let n = s.nrows();
        self.full()
            .iter()
            .rev()
            .fold(Matrix::zeros(n, n), |acc, &c| acc * s + Matrix::identity(n, n) * c)
    }

    pub fn roots(&self) -> Result<Vec<Complex64>> {
        eigenvalues(&companion_pair(self).0)
    }

    /// All roots strictly in the open left half plane.
    pub fn is_hurwitz(&self) -> Result<bool> {
        Ok(self.roots()?.iter().all(|z| z.re < 0.0))
    }
}

/// Companion form `(Φ, Ψ)`: ones on the superdiagonal, `−c_0 … −c_{l-1}` on
/// the bottom row, and `Ψ = [1 0 ⋯ 0]`. `(Φ, Ψ)` is observable and the
/// characteristic polynomial of `Φ` is `p`.
pub fn companion_pair(p: &PolyCoeffs) -> (Matrix, Matrix) {
    let l = p.degree();
    let mut phi = Matrix::zeros(l, l);
    for i in 0..l.saturating_sub(1) {
        phi[(i, i + 1)] = 1.0;
    }
    for (j, c) in p.lower().iter().enumerate() {
        phi[(l - 1, j)] = -c;
    }
    let mut psi = Matrix::zeros(1, l);
    psi[(0, 0)] = 1.0;
    (phi, psi)
}

/// Minimal polynomial of `s`.
///
/// Works on the scaled matrix `s/‖s‖` and grows the Krylov sequence
/// `vec(I), vec(S), vec(S²), …` until the next power lies (numerically) in
/// the span of the previous ones; the least-squares combination gives the
/// coefficients, which are then rescaled back.
pub fn minimal_polynomial(s: &Matrix, tol: &Tolerances) -> Result<PolyCoeffs> {
    check_square(s, "S")?;
    let q = s.nrows();
    let scale = s.norm();
    if q == 0 || scale == 0.0 {
        return Ok(PolyCoeffs::monic(vec![0.0]));
    }
    let scaled = s / scale;
    let mut krylov: Vec<DVector<f64>> = Vec::with_capacity(q + 1);
    let mut power = Matrix::identity(q, q);
    krylov.push(DVector::from_column_slice(power.as_slice()));

    for degree in 1..=q {
        power = &power * &scaled;
        let next = DVector::from_column_slice(power.as_slice());
        let basis = Matrix::from_columns(&krylov);
        let dependent = if degree == q {
            // Cayley–Hamilton: degree q always closes the sequence.
            true
        } else {
            let mut stacked = basis.clone().insert_column(degree, 0.0);
            stacked.set_column(degree, &next);
            let sv = stacked.singular_values();
            let max = sv.max();
            sv.min() <= tol.krylov_rank * max
        };
        if dependent {
            let svd = basis.svd(true, true);
            let beta = svd
                .solve(&(-&next), 1e-14)
                .expect("SVD with both factors always solves");
            let lower = beta
                .iter()
                .enumerate()
                .map(|(i, b)| b * scale.powi((degree - i) as i32))
                .collect();
            return Ok(PolyCoeffs::monic(lower));
        }
        krylov.push(next);
    }
    unreachable!("loop returns at degree q")
}
