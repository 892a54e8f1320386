use num_complex::Complex64;

use super::{check_square, LinalgError, Matrix, Result};

const RADIX: f64 = 2.0;
/// Sweep budget per row, shared across the whole reduction. Clusters of
/// defective eigenvalues can need a few hundred sweeps on their own.
const SWEEPS_PER_ROW: usize = 30;

/// Eigenvalues of a real square matrix, with multiplicity.
///
/// The matrix is balanced, reduced to upper Hessenberg form by stabilized
/// elementary similarity transforms, and then deflated with Francis
/// double-shift QR sweeps. Complex eigenvalues come in conjugate pairs.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    check_square(m, "eigenvalue input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = Dense::from_matrix(m);
    a.balance();
    a.reduce_to_hessenberg();
    a.hessenberg_qr()
}

/// Largest real part over the spectrum (`-inf` for an empty matrix).
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re)))
}

/// True iff every eigenvalue has real part below `-margin`.
pub fn is_hurwitz(m: &Matrix, margin: f64) -> Result<bool> {
    Ok(spectral_abscissa(m)? < -margin)
}

/// Row-major scratch copy used by the in-place reductions.
struct Dense {
    n: usize,
    data: Vec<f64>,
}

impl Dense {
    fn from_matrix(m: &Matrix) -> Self {
        let n = m.nrows();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = m[(i, j)];
            }
        }
        Self { n, data }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }

    /// Diagonal similarity scaling by powers of two so that row and column
    /// norms are comparable.
    fn balance(&mut self) {
        let n = self.n;
        let sqrdx = RADIX * RADIX;
        let mut done = false;
        while !done {
            done = true;
            for i in 0..n {
                let mut r = 0.0;
                let mut c = 0.0;
                for j in 0..n {
                    if j != i {
                        c += self.at(j, i).abs();
                        r += self.at(i, j).abs();
                    }
                }
                if c == 0.0 || r == 0.0 {
                    continue;
                }
                let s = c + r;
                let mut f = 1.0;
                let mut g = r / RADIX;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        *self.at_mut(i, j) *= g;
                    }
                    for j in 0..n {
                        *self.at_mut(j, i) *= f;
                    }
                }
            }
        }
    }

    /// Gaussian elimination with partial pivoting into upper Hessenberg form.
    fn reduce_to_hessenberg(&mut self) {
        let n = self.n;
        for m in 1..n.saturating_sub(1) {
            let mut x = 0.0_f64;
            let mut pivot = m;
            for j in m..n {
                if self.at(j, m - 1).abs() > x.abs() {
                    x = self.at(j, m - 1);
                    pivot = j;
                }
            }
            if pivot != m {
                for j in (m - 1)..n {
                    self.data.swap(pivot * n + j, m * n + j);
                }
                for i in 0..n {
                    self.data.swap(i * n + pivot, i * n + m);
                }
            }
            if x != 0.0 {
                for i in (m + 1)..n {
                    let mut y = self.at(i, m - 1);
                    if y != 0.0 {
                        y /= x;
                        *self.at_mut(i, m - 1) = y;
                        for j in m..n {
                            let v = self.at(m, j);
                            *self.at_mut(i, j) -= y * v;
                        }
                        for j in 0..n {
                            let v = self.at(j, i);
                            *self.at_mut(j, m) += y * v;
                        }
                    }
                }
            }
        }
        // The multipliers left below the subdiagonal are not part of H.
        for i in 2..n {
            for j in 0..(i - 1) {
                *self.at_mut(i, j) = 0.0;
            }
        }
    }

    /// Francis double-shift QR on an upper Hessenberg matrix.
    fn hessenberg_qr(mut self) -> Result<Vec<Complex64>> {
        let n = self.n as isize;
        let eps = f64::EPSILON;
        let mut wr = vec![Complex64::new(0.0, 0.0); self.n];
        let a = |s: &Self, i: isize, j: isize| s.at(i as usize, j as usize);

        let mut anorm = 0.0;
        for i in 0..n {
            for j in (i - 1).max(0)..n {
                anorm += a(&self, i, j).abs();
            }
        }

        let budget = SWEEPS_PER_ROW * self.n.max(10);
        let mut sweeps = 0usize;
        let mut nn = n - 1;
        let mut t = 0.0;
        while nn >= 0 {
            let mut its = 0usize;
            let mut l;
            loop {
                l = nn;
                while l > 0 {
                    let mut s = a(&self, l - 1, l - 1).abs() + a(&self, l, l).abs();
                    if s == 0.0 {
                        s = anorm;
                    }
                    if a(&self, l, l - 1).abs() <= eps * s {
                        *self.at_mut(l as usize, (l - 1) as usize) = 0.0;
                        break;
                    }
                    l -= 1;
                }
                let mut x = a(&self, nn, nn);
                if l == nn {
                    wr[nn as usize] = Complex64::new(x + t, 0.0);
                    nn -= 1;
                } else {
                    let mut y = a(&self, nn - 1, nn - 1);
                    let mut w = a(&self, nn, nn - 1) * a(&self, nn - 1, nn);
                    if l == nn - 1 {
                        let p = 0.5 * (y - x);
                        let q = p * p + w;
                        let z = q.abs().sqrt();
                        x += t;
                        if q >= 0.0 {
                            let z = p + z.copysign(p);
                            let mut lo = x + z;
                            let hi = x + z;
                            if z != 0.0 {
                                lo = x - w / z;
                            }
                            wr[(nn - 1) as usize] = Complex64::new(hi, 0.0);
                            wr[nn as usize] = Complex64::new(lo, 0.0);
                        } else {
                            wr[nn as usize] = Complex64::new(x + p, -z);
                            wr[(nn - 1) as usize] = Complex64::new(x + p, z);
                        }
                        nn -= 2;
                    } else {
                        if sweeps >= budget {
                            return Err(LinalgError::NoConvergence { iterations: budget });
                        }
                        if its > 0 && its % 10 == 0 {
                            // Exceptional shift.
                            t += x;
                            for i in 0..=nn {
                                *self.at_mut(i as usize, i as usize) -= x;
                            }
                            let s = a(&self, nn, nn - 1).abs() + a(&self, nn - 1, nn - 2).abs();
                            x = 0.75 * s;
                            y = x;
                            w = -0.4375 * s * s;
                        }
                        its += 1;
                        sweeps += 1;
                        self.double_shift_sweep(l, nn, x, y, w, eps);
                    }
                }
                if l + 1 >= nn {
                    break;
                }
            }
        }
        Ok(wr)
    }

    fn double_shift_sweep(&mut self, l: isize, nn: isize, x: f64, y: f64, w: f64, eps: f64) {
        let a = |s: &Self, i: isize, j: isize| s.at(i as usize, j as usize);
        let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
        let mut m = nn - 2;
        while m >= l {
            let z = a(self, m, m);
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / a(self, m + 1, m) + a(self, m, m + 1);
            q = a(self, m + 1, m + 1) - z - rr - ss;
            r = a(self, m + 2, m + 1);
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = a(self, m, m - 1).abs() * (q.abs() + r.abs());
            let v = p.abs() * (a(self, m - 1, m - 1).abs() + z.abs() + a(self, m + 1, m + 1).abs());
            if u <= eps * v {
                break;
            }
            m -= 1;
        }
        for i in m..(nn - 1) {
            *self.at_mut((i + 2) as usize, i as usize) = 0.0;
            if i != m {
                *self.at_mut((i + 2) as usize, (i - 1) as usize) = 0.0;
            }
        }
        let mut xk = 0.0;
        for k in m..nn {
            if k != m {
                p = a(self, k, k - 1);
                q = a(self, k + 1, k - 1);
                r = 0.0;
                if k + 1 != nn {
                    r = a(self, k + 2, k - 1);
                }
                xk = p.abs() + q.abs() + r.abs();
                if xk != 0.0 {
                    p /= xk;
                    q /= xk;
                    r /= xk;
                }
            }
            let s = (p * p + q * q + r * r).sqrt().copysign(p);
            if s == 0.0 {
                continue;
            }
            if k == m {
                if l != m {
                    let v = a(self, k, k - 1);
                    *self.at_mut(k as usize, (k - 1) as usize) = -v;
                }
            } else {
                *self.at_mut(k as usize, (k - 1) as usize) = -s * xk;
            }
            p += s;
            let xs = p / s;
            let ys = q / s;
            let zs = r / s;
            q /= p;
            r /= p;
            for j in k..=nn {
                let mut pp = a(self, k, j) + q * a(self, k + 1, j);
                if k + 1 != nn {
                    pp += r * a(self, k + 2, j);
                    *self.at_mut((k + 2) as usize, j as usize) -= pp * zs;
                }
                *self.at_mut((k + 1) as usize, j as usize) -= pp * ys;
                *self.at_mut(k as usize, j as usize) -= pp * xs;
            }
            let mmin = nn.min(k + 3);
            for i in l..=mmin {
                let mut pp = xs * a(self, i, k) + ys * a(self, i, k + 1);
                if k + 1 != nn {
                    pp += zs * a(self, i, k + 2);
                    *self.at_mut(i as usize, (k + 2) as usize) -= pp * r;
                }
                *self.at_mut(i as usize, (k + 1) as usize) -= pp * q;
                *self.at_mut(i as usize, k as usize) -= pp;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn triple_root_companion() {
        let m = from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[-8.0, -12.0, -6.0]]);
        let eigs = eigenvalues(&m).unwrap();
        assert_eq!(eigs.len(), 3);
        // A triple root is only recoverable to about cbrt(eps).
        for z in eigs {
            assert!((z - Complex64::new(-2.0, 0.0)).norm() < 1e-4, "{z}");
        }
        assert!(is_hurwitz(&m, 0.0).unwrap());
    }

    #[test]
    fn identity_and_rotation() {
        let eye = Matrix::identity(3, 3);
        for z in eigenvalues(&eye).unwrap() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
        assert!(!is_hurwitz(&eye, 0.0).unwrap());

        let rot = from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let eigs = sorted(eigenvalues(&rot).unwrap());
        assert!((eigs[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((eigs[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn matches_nalgebra_schur_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 4, 7, 12, 25, 40] {
            let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let mine = sorted(eigenvalues(&m).unwrap());
            let reference = sorted(m.complex_eigenvalues().iter().copied().collect());
            for (a, b) in mine.iter().zip(&reference) {
                assert!((a - b).norm() < 1e-8 * (1.0 + b.norm()), "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn clustered_jordan_blocks_converge() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 36;
        let centers = [-28.0, -5.6, -3.4, -28.0, -5.6, -3.4];
        let mut j = Matrix::zeros(n, n);
        for (b, c) in centers.iter().enumerate() {
            for k in 0..6 {
                j[(6 * b + k, 6 * b + k)] = *c;
                if k + 1 < 6 {
                    j[(6 * b + k, 6 * b + k + 1)] = 1.0;
                }
            }
        }
        let p = Matrix::identity(n, n) + Matrix::from_fn(n, n, |_, _| rng.random_range(-0.1..0.1));
        let m = &p * j * p.try_inverse().unwrap();
        let abscissa = spectral_abscissa(&m).unwrap();
        assert!((abscissa + 3.4).abs() < 0.05, "{abscissa}");
    }

    #[test]
    fn empty_matrix_is_vacuously_hurwitz() {
        assert!(eigenvalues(&Matrix::zeros(0, 0)).unwrap().is_empty());
        assert!(is_hurwitz(&Matrix::zeros(0, 0), 0.0).unwrap());
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(
            eigenvalues(&Matrix::zeros(2, 3)),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }
}
