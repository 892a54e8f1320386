use super::{check_square, eigenvalues, spectral_abscissa, LinalgError, Matrix, Result, Tolerances};

/// Solves `X·B − A·X = C` for `X`.
///
/// `A` is n×n, `B` is m×m and `C` is n×m. The unknown is vectorized
/// column-wise and the nm×nm system `(Bᵀ ⊗ Iₙ − Iₘ ⊗ A)·vec(X) = vec(C)`
/// is solved directly with a fully pivoted LU factorization.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    check_square(a, "A")?;
    check_square(b, "B")?;
    let n = a.nrows();
    let m = b.nrows();
    if c.nrows() != n || c.ncols() != m {
        return Err(LinalgError::DimensionMismatch(format!(
            "C must be {n}x{m}, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if n == 0 || m == 0 {
        return Ok(Matrix::zeros(n, m));
    }

    let eig_a = eigenvalues(a)?;
    let eig_b = eigenvalues(b)?;
    let gap = eig_a
        .iter()
        .flat_map(|x| eig_b.iter().map(move |y| (x - y).norm()))
        .fold(f64::INFINITY, f64::min);
    if gap < tol.spectral_gap {
        return Err(LinalgError::SpectraOverlap {
            gap,
            tol: tol.spectral_gap,
        });
    }

    let kron_system =
        b.transpose().kronecker(&Matrix::identity(n, n)) - Matrix::identity(m, m).kronecker(a);
    let lu = kron_system.full_piv_lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let ratio = if hi == 0.0 { 0.0 } else { lo / hi };
    if ratio < tol.singular_pivot {
        return Err(LinalgError::Singular { ratio });
    }
    let rhs = nalgebra::DVector::from_column_slice(c.as_slice());
    let x = lu.solve(&rhs).ok_or(LinalgError::Singular { ratio })?;
    Ok(Matrix::from_column_slice(n, m, x.as_slice()))
}

/// Solves `MᵀP + PM = −I` for a Hurwitz `M`; the result is symmetric
/// positive definite.
pub fn solve_lyapunov(m: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    check_square(m, "M")?;
    let n = m.nrows();
    let abscissa = spectral_abscissa(m)?;
    if n > 0 && abscissa >= -tol.hurwitz {
        return Err(LinalgError::NotHurwitz { abscissa });
    }
    // P·M − (−Mᵀ)·P = −I
    let p = solve_sylvester(&(-m.transpose()), m, &(-Matrix::identity(n, n)), tol)?;
    Ok((&p + p.transpose()) * 0.5)
}
