//! Small dense complex linear algebra.
//!
//! Everything here works on matrices of dimension 1..=8: channel matrices,
//! per-subcarrier covariances, precoders and spatial filters. The only
//! decomposition is a cyclic Jacobi eigensolver for Hermitian matrices, which
//! also backs the Hermitian pseudo-inverse.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{contract, Result};

/// Largest dimension accepted by [`hermitian_eig`].
pub const MAX_EIG_DIM: usize = 8;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_THRESHOLD: f64 = 1e-13;
const HERMITIAN_REL_TOL: f64 = 1e-10;

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(contract(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(contract("matrix entries must be finite"));
        }
        Ok(Self {
            rows,
            cols,
            data: entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from a closure over `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn column_vector(v: &[Complex64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// `v·w*` for column vectors `v`, `w`.
    pub fn outer(v: &[Complex64], w: &[Complex64]) -> Self {
        Self::from_fn(v.len(), w.len(), |r, c| v[r] * w[c].conj())
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

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn set_column(&mut self, c: usize, v: &[Complex64]) {
        for (r, &z) in v.iter().enumerate() {
            self[(r, c)] = z;
        }
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn elementwise_conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(contract(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs[(k, c)];
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(contract(format!(
                "cannot multiply {}x{} matrix by length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self.mul_vec_unchecked(v))
    }

    pub(crate) fn mul_vec_unchecked(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(contract("matrix sum needs equal shapes"));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.add(&rhs.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Adds `v·v*` in place.
    pub fn add_outer(&mut self, v: &[Complex64]) {
        debug_assert!(self.rows == v.len() && self.cols == v.len());
        for r in 0..self.rows {
            for c in 0..self.cols {
                self.data[r * self.cols + c] += v[r] * v[c].conj();
            }
        }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hermitian within `rel_tol · max|A|` (absolute when `A = 0`).
    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.rows).all(|r| {
            (r..self.cols).all(|c| (self[(r, c)] - self[(c, r)].conj()).norm() <= rel_tol * scale)
        })
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

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(r) {
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

pub fn conj_transpose(a: &ComplexMatrix) -> ComplexMatrix {
    a.conj_transpose()
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.matmul(b)
}

pub fn elementwise_conj(a: &ComplexMatrix) -> ComplexMatrix {
    a.elementwise_conj()
}

/// `v* w`.
pub fn inner(v: &[Complex64], w: &[Complex64]) -> Complex64 {
    v.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigenvalues in ascending order; column `j` of `eigenvectors` pairs with
/// `eigenvalues[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn eigenvector(&self, j: usize) -> Vec<Complex64> {
        self.eigenvectors.column(j)
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Each eigenvector is scaled so that its largest-magnitude entry (lowest row
/// index on ties) is real and positive, which makes the output a pure function
/// of the input.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<EigenDecomposition> {
    if !a.is_square() {
        return Err(contract(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    if n > MAX_EIG_DIM {
        return Err(contract(format!(
            "eigendecomposition limited to dimension {MAX_EIG_DIM}, got {n}"
        )));
    }
    if !a.is_hermitian(HERMITIAN_REL_TOL) {
        return Err(contract("eigendecomposition needs a Hermitian matrix"));
    }

    // Work on the exactly Hermitian part.
    let mut m = ComplexMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(a[(r, r)].re, 0.0)
        } else {
            (a[(r, c)] + a[(c, r)].conj()) * 0.5
        }
    });
    let mut v = ComplexMatrix::identity(n);
    let threshold = JACOBI_REL_THRESHOLD * a.frobenius_norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&m) <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let eigenvalues = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        normalize_phase(&mut col);
        eigenvectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(m: &ComplexMatrix) -> f64 {
    let n = m.rows;
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += m[(r, c)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One Jacobi step zeroing `m[p][q]`: `m ← U* m U`, `v ← v U`.
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let n = m.rows;
    let phase = apq / r;
    let theta = (m[(q, q)].re - m[(p, p)].re) / (2.0 * r);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // U restricted to (p, q): [[c, s], [-s·e^{-iφ}, c·e^{-iφ}]].
    let upp = Complex64::new(c, 0.0);
    let upq = Complex64::new(s, 0.0);
    let uqp = -phase.conj() * s;
    let uqq = phase.conj() * c;

    for i in 0..n {
        let aip = m[(i, p)];
        let aiq = m[(i, q)];
        m[(i, p)] = aip * upp + aiq * uqp;
        m[(i, q)] = aip * upq + aiq * uqq;
    }
    for j in 0..n {
        let apj = m[(p, j)];
        let aqj = m[(q, j)];
        m[(p, j)] = upp.conj() * apj + uqp.conj() * aqj;
        m[(q, j)] = upq.conj() * apj + uqq.conj() * aqj;
    }
    m[(p, q)] = Complex64::new(0.0, 0.0);
    m[(q, p)] = Complex64::new(0.0, 0.0);
    m[(p, p)].im = 0.0;
    m[(q, q)].im = 0.0;

    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * upp + viq * uqp;
        v[(i, q)] = vip * upq + viq * uqq;
    }
}

/// Rotates `v` so its largest-magnitude entry is real and positive.
pub(crate) fn normalize_phase(v: &mut [Complex64]) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let rot = v[best].conj() / best_mag;
    for z in v.iter_mut() {
        *z *= rot;
    }
    v[best] = Complex64::new(v[best].norm(), 0.0);
}

/// Default relative cutoff for [`pinv_hermitian`].
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Moore–Penrose pseudo-inverse of a Hermitian PSD matrix.
///
/// Eigenvalues below `rel_tol · λ_max` are treated as zero.
pub fn pinv_hermitian(a: &ComplexMatrix, rel_tol: f64) -> Result<ComplexMatrix> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(contract(format!("pseudo-inverse tolerance {rel_tol} outside (0, 1)")));
    }
    let eig = hermitian_eig(a)?;
    let n = a.rows;
    let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let mut out = ComplexMatrix::zeros(n, n);
    if lambda_max <= 0.0 {
        return Ok(out);
    }
    let cutoff = rel_tol * lambda_max;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= cutoff {
            continue;
        }
        let u = eig.eigenvector(j);
        let inv = 1.0 / lambda;
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] += u[r] * u[c].conj() * inv;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_eig_is_identity_basis() {
        let a = ComplexMatrix::from_real_diag(&[2.0, 5.0]);
        let eig = hermitian_eig(&a).unwrap();
        assert_eq!(eig.eigenvalues, vec![2.0, 5.0]);
        assert_eq!(eig.eigenvectors, ComplexMatrix::identity(2));
    }

    #[test]
    fn two_by_two_with_imaginary_coupling() {
        // det(λI - A) = λ² - 2λ
        let a = ComplexMatrix::new(2, 2, vec![c(1., 0.), c(0., 1.), c(0., -1.), c(1., 0.)]).unwrap();
        let eig = hermitian_eig(&a).unwrap();
        assert!(eig.eigenvalues[0].abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(hermitian_eig(&ComplexMatrix::zeros(2, 3)).is_err());
        assert!(hermitian_eig(&ComplexMatrix::zeros(9, 9)).is_err());
        let skew = ComplexMatrix::new(2, 2, vec![c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]).unwrap();
        assert!(hermitian_eig(&skew).is_err());
    }

    #[test]
    fn zero_matrix_decomposes() {
        let eig = hermitian_eig(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert_eq!(eig.eigenvalues, vec![0.0; 3]);
        assert_eq!(eig.eigenvectors, ComplexMatrix::identity(3));
    }

    #[test]
    fn phase_convention() {
        let a = ComplexMatrix::new(2, 2, vec![c(2., 0.), c(0., 1.), c(0., -1.), c(2., 0.)]).unwrap();
        let eig = hermitian_eig(&a).unwrap();
        for j in 0..2 {
            let v = eig.eigenvector(j);
            let (idx, _) = v
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
            assert_eq!(v[idx].im, 0.0);
            assert!(v[idx].re > 0.0);
        }
    }

    #[test]
    fn pinv_simple_cases() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(pinv_hermitian(&i2, DEFAULT_PINV_TOL).unwrap(), i2);
        let d = ComplexMatrix::from_real_diag(&[4.0, 0.0]);
        let p = pinv_hermitian(&d, DEFAULT_PINV_TOL).unwrap();
        assert_eq!(p, ComplexMatrix::from_real_diag(&[0.25, 0.0]));
        assert!(pinv_hermitian(&d, 0.0).is_err());
        assert!(pinv_hermitian(&d, 1.0).is_err());
    }

    #[test]
    fn plumbing_operators() {
        let a = ComplexMatrix::new(1, 1, vec![c(0., 1.)]).unwrap();
        assert_eq!(conj_transpose(&a)[(0, 0)], c(0., -1.));
        let b = ComplexMatrix::new(2, 3, (0..6).map(|i| c(i as f64, -(i as f64))).collect()).unwrap();
        assert_eq!(matmul(&ComplexMatrix::identity(2), &b).unwrap(), b);
        assert_eq!(elementwise_conj(&elementwise_conj(&b)), b);
        assert!(matmul(&b, &b).is_err());
        assert!(b.mul_vec(&[c(1., 0.)]).is_err());
    }

    #[test]
    fn construction_validates() {
        assert!(ComplexMatrix::new(2, 2, vec![c(0., 0.); 3]).is_err());
        assert!(ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.)]).is_err());
        assert!(ComplexMatrix::new(1, 1, vec![c(0., f64::INFINITY)]).is_err());
    }
}
