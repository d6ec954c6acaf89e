//! Small dense complex linear algebra.
//!
//! Everything here targets matrices of at most 16×16: one-sided Jacobi SVD,
//! Cholesky-based log-determinant and inverse, and a diagonality measure.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// # Panics
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must equal rows*cols");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diag(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// The first `n` columns.
    pub fn leading_cols(&self, n: usize) -> Self {
        assert!(n <= self.cols);
        Self::from_fn(self.rows, n, |r, c| self[(r, c)])
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for r in 0..self.rows {
            for c in 0..=r {
                if (self[(r, c)] - self[(c, r)].conj()).norm() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    fn check_product(&self, rhs: &Self) {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in product");
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.check_product(rhs);
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs[(k, c)];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }
}

/// Thin singular value decomposition `A = U·diag(sigma)·Vᴴ`.
///
/// For an `m×n` input, `U` is `m×r`, `V` is `n×r` with `r = min(m, n)`.
/// Singular values are sorted descending; equal values keep their original
/// column order. Values below [`RANK_TOL`]·σ_max are set to exactly zero and
/// the matching columns of `U` are completed to an orthonormal set.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    /// Number of nonzero singular values after truncation.
    pub fn rank(&self) -> usize {
        self.sigma.iter().filter(|&&s| s > 0.0).count()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let s = ComplexMatrix::from_real_diag(&self.sigma);
        &(&self.u * &s) * &self.v.adjoint()
    }
}

pub fn svd(a: &ComplexMatrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("svd input has non-finite entries".into()));
    }
    if a.rows() < a.cols() {
        let t = svd_tall(&a.adjoint());
        return Ok(Svd { u: t.v, sigma: t.sigma, v: t.u });
    }
    Ok(svd_tall(a))
}

// One-sided Jacobi on the columns of a tall (rows >= cols) matrix.
fn svd_tall(a: &ComplexMatrix) -> Svd {
    let m = a.rows();
    let n = a.cols();
    // column-major working copies
    let mut w: Vec<Vec<Complex64>> = (0..n).map(|c| a.column(c)).collect();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|c| (0..n).map(|r| Complex64::new(if r == c { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = w[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = w[p].iter().zip(&w[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let phase = (gamma / g).conj();
                for (cols, len) in [(&mut w, m), (&mut v, n)] {
                    for r in 0..len {
                        let xp = cols[p][r];
                        let xq = cols[q][r] * phase;
                        cols[p][r] = xp * c - xq * s;
                        cols[q][r] = xp * s + xq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w.iter().map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let smax = norms.iter().cloned().fold(0.0, f64::max);
    let mut sigma = Vec::with_capacity(n);
    let mut u = ComplexMatrix::zeros(m, n);
    let mut vm = ComplexMatrix::zeros(n, n);
    let mut filled = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        let keep = s > RANK_TOL * smax && s > 0.0;
        sigma.push(if keep { s } else { 0.0 });
        for r in 0..n {
            vm[(r, dst)] = v[src][r];
        }
        if keep {
            for r in 0..m {
                u[(r, dst)] = w[src][r] / s;
            }
        }
        filled.push(keep);
    }
    complete_orthonormal(&mut u, &filled);
    Svd { u, sigma, v: vm }
}

// Fills the columns not marked in `filled` so that all columns are orthonormal.
fn complete_orthonormal(u: &mut ComplexMatrix, filled: &[bool]) {
    let m = u.rows();
    let mut basis: Vec<Vec<Complex64>> =
        (0..u.cols()).filter(|&c| filled[c]).map(|c| u.column(c)).collect();
    let mut candidate = 0usize;
    for c in 0..u.cols() {
        if filled[c] {
            continue;
        }
        loop {
            assert!(candidate < m, "cannot complete orthonormal basis");
            let mut x = vec![Complex64::new(0.0, 0.0); m];
            x[candidate] = Complex64::new(1.0, 0.0);
            candidate += 1;
            for _ in 0..2 {
                for b in &basis {
                    let proj: Complex64 = b.iter().zip(&x).map(|(bi, xi)| bi.conj() * xi).sum();
                    for (xi, bi) in x.iter_mut().zip(b) {
                        *xi -= proj * bi;
                    }
                }
            }
            let nrm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nrm > 1e-6 {
                for (r, xi) in x.iter().enumerate() {
                    u[(r, c)] = xi / nrm;
                }
                basis.push(x.iter().map(|z| z / nrm).collect());
                break;
            }
        }
    }
}

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::InvalidInput("cholesky needs a square matrix".into()));
    }
    let n = a.rows();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::Domain(format!("matrix is not positive definite (pivot {j} = {d:e})")));
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// log₂ det A for Hermitian positive definite A.
pub fn logdet_hpd(a: &ComplexMatrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * (0..l.rows()).map(|i| l[(i, i)].re.log2()).sum::<f64>())
}

/// Solves `A·X = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let l = cholesky(a)?;
    let n = a.rows();
    if b.rows() != n {
        return Err(Error::InvalidInput("right-hand side has wrong row count".into()));
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

pub fn inverse_hpd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve_hpd(a, &ComplexMatrix::identity(a.rows()))
}

/// ‖A − diag(A)‖_F / max(‖A‖_F, ε).
pub fn offdiag_ratio(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::InvalidInput("offdiag_ratio needs a square matrix".into()));
    }
    let mut off = 0.0;
    for r in 0..a.rows() {
        for c in 0..a.cols() {
            if r != c {
                off += a[(r, c)].norm_sqr();
            }
        }
    }
    Ok(off.sqrt() / a.frobenius().max(f64::EPSILON))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_svd() {
        let s = svd(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(s.sigma, vec![1.0, 1.0, 1.0]);
        assert_eq!(s.u, ComplexMatrix::identity(3));
        assert_eq!(s.v, ComplexMatrix::identity(3));
    }

    #[test]
    fn zero_matrix_has_zero_singular_values() {
        let s = svd(&ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(s.sigma, vec![0.0, 0.0]);
        let g = &s.u.adjoint() * &s.u;
        assert!((&g - &ComplexMatrix::identity(2)).frobenius() < 1e-14);
    }

    #[test]
    fn wide_matrix_reconstructs() {
        let a = ComplexMatrix::from_vec(2, 3, vec![c(1., 2.), c(0., -1.), c(3., 0.), c(-2., 1.), c(0.5, 0.5), c(1., 1.)]);
        let s = svd(&a).unwrap();
        assert_eq!(s.u.rows(), 2);
        assert_eq!(s.v.rows(), 3);
        assert!((&s.reconstruct() - &a).frobenius() < 1e-12);
    }

    #[test]
    fn nonfinite_rejected() {
        let a = ComplexMatrix::from_vec(1, 1, vec![c(f64::NAN, 0.0)]);
        assert!(matches!(svd(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn logdet_small_cases() {
        assert_eq!(logdet_hpd(&ComplexMatrix::identity(4)).unwrap(), 0.0);
        assert!((logdet_hpd(&ComplexMatrix::from_real_diag(&[2.0, 2.0])).unwrap() - 2.0).abs() < 1e-15);
        let bad = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
        assert!(matches!(logdet_hpd(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn offdiag_examples() {
        assert_eq!(offdiag_ratio(&ComplexMatrix::from_real_diag(&[1.0, 2.0, 3.0])).unwrap(), 0.0);
        let ones = ComplexMatrix::from_vec(2, 2, vec![c(1., 0.); 4]);
        assert!((offdiag_ratio(&ones).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(offdiag_ratio(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn hpd_inverse() {
        let a = ComplexMatrix::from_vec(2, 2, vec![c(4., 0.), c(1., 1.), c(1., -1.), c(3., 0.)]);
        let inv = inverse_hpd(&a).unwrap();
        let p = &a * &inv;
        assert!((&p - &ComplexMatrix::identity(2)).frobenius() < 1e-14);
    }
}
