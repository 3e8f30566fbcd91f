//! Small dense complex matrices and a cyclic Jacobi eigensolver for
//! Hermitian matrices.
//!
//! Dimensions in this crate are bounded by the antenna count (a few dozen),
//! so everything is stored row-major in a flat `Vec` and the routines favor
//! accuracy over blocking or vectorization.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use thiserror::Error;

/// Absolute tolerance for `a[i][j] == conj(a[j][i])`.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Largest imaginary part tolerated on a Hermitian diagonal.
pub const DIAG_IMAG_TOL: f64 = 1e-12;
/// Eigenvalues with magnitude at or below this fraction of the largest are
/// set to exactly zero.
pub const EIG_CLAMP_REL: f64 = 1e-12;
/// Maximum number of Jacobi sweeps.
pub const MAX_SWEEPS: usize = 100;
/// Sweeps stop once the off-diagonal norm drops below this fraction of its
/// initial value.
pub const OFF_DIAG_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix must be non-empty (got {rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given equal-length vectors.
    pub fn from_columns(columns: &[&[Complex64]]) -> Result<Self, LinalgError> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(LinalgError::DimensionMismatch(
                "columns have different lengths".into(),
            ));
        }
        Ok(Self::from_fn(rows, cols, |i, j| columns[j][i]))
    }

    /// Builds a real-valued matrix from nested rows. Panics on ragged input.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        Self::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Keeps the first `count` columns.
    pub fn leading_columns(&self, count: usize) -> CMatrix {
        CMatrix::from_fn(self.rows, count, |i, j| self[(i, j)])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^H * rhs` without materializing the adjoint.
    pub fn adjoint_mul(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        if self.rows != rhs.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot form A^H B for {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(CMatrix::from_fn(self.cols, rhs.cols, |i, j| {
            (0..self.rows)
                .map(|k| self[(k, i)].conj() * rhs[(k, j)])
                .sum()
        }))
    }

    pub fn sub(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(LinalgError::DimensionMismatch("shape mismatch in subtraction".into()));
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Sum of squared magnitudes of all entries.
pub fn frobenius_norm_sq(matrix: &CMatrix) -> f64 {
    matrix.data.iter().map(|z| z.norm_sqr()).sum()
}

/// A square matrix verified to be Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self, LinalgError> {
        if matrix.rows != matrix.cols {
            return Err(LinalgError::NotSquare {
                rows: matrix.rows,
                cols: matrix.cols,
            });
        }
        if matrix.rows == 0 {
            return Err(LinalgError::Empty { rows: 0, cols: 0 });
        }
        if !matrix.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = matrix.rows;
        let mut asymmetry: f64 = 0.0;
        for i in 0..n {
            if matrix[(i, i)].im.abs() > DIAG_IMAG_TOL {
                return Err(LinalgError::NotHermitian {
                    asymmetry: matrix[(i, i)].im.abs(),
                });
            }
            for j in i + 1..n {
                asymmetry = asymmetry.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
            }
        }
        if asymmetry > HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian { asymmetry });
        }
        Ok(Self(matrix))
    }

    /// Wraps a matrix the caller has constructed to be exactly Hermitian.
    pub(crate) fn from_exact(matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.rows, matrix.cols);
        Self(matrix)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }
}

/// `H^H H` for an `M x K` matrix, returned as a `K x K` Hermitian matrix.
pub fn gram(matrix: &CMatrix) -> Result<HermitianMatrix, LinalgError> {
    if matrix.rows == 0 || matrix.cols == 0 {
        return Err(LinalgError::Empty {
            rows: matrix.rows,
            cols: matrix.cols,
        });
    }
    if !matrix.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let k = matrix.cols;
    let mut out = CMatrix::zeros(k, k);
    for i in 0..k {
        let diag: f64 = (0..matrix.rows).map(|r| matrix[(r, i)].norm_sqr()).sum();
        out[(i, i)] = Complex64::new(diag, 0.0);
        for j in i + 1..k {
            let v: Complex64 = (0..matrix.rows)
                .map(|r| matrix[(r, i)].conj() * matrix[(r, j)])
                .sum();
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    Ok(HermitianMatrix(out))
}

/// Eigendecomposition of a Hermitian matrix.
///
/// `values` are sorted non-increasing and `basis` column `j` is the
/// eigenvector paired with `values[j]`. Each column's global phase is fixed
/// so that its largest-magnitude component (lowest index on ties) is real
/// and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    values: Vec<f64>,
    basis: CMatrix,
}

impl EigenSpectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Values floored at zero, for ratios of PSD spectra.
    pub fn nonnegative_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.max(0.0)).collect()
    }

    /// Number of strictly positive eigenvalues after clamping.
    pub fn rank(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// `U diag(values) U^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        CMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| self.basis[(i, k)] * self.values[k] * self.basis[(j, k)].conj())
                .sum()
        })
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
pub fn eigh(matrix: &HermitianMatrix) -> Result<EigenSpectrum, LinalgError> {
    let n = matrix.dim();
    let mut a = matrix.0.clone();
    for i in 0..n {
        a[(i, i)].im = 0.0;
    }
    let mut u = CMatrix::identity(n);

    let total = frobenius_norm_sq(&a).sqrt();
    let off0 = off_diagonal_norm(&a);
    let tol = (OFF_DIAG_REL_TOL * off0).max(f64::EPSILON * total * n as f64);

    let mut off = off0;
    let mut sweeps = 0;
    while off > tol {
        if sweeps == MAX_SWEEPS {
            return Err(LinalgError::NoConvergence {
                sweeps,
                residual: off,
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut u, p, q);
            }
        }
        sweeps += 1;
        off = off_diagonal_norm(&a);
    }

    let raw: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps index order on exact ties.
    order.sort_by(|&x, &y| raw[y].total_cmp(&raw[x]));

    let scale = raw.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let values: Vec<f64> = order
        .iter()
        .map(|&k| {
            let v = raw[k];
            if v.abs() <= EIG_CLAMP_REL * scale {
                0.0
            } else {
                v
            }
        })
        .collect();

    let mut basis = CMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    for j in 0..n {
        normalize_phase(&mut basis, j);
    }
    Ok(EigenSpectrum { values, basis })
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.rows;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Annihilates `a[p][q]` with a unitary rotation in the (p, q) plane and
/// accumulates it into `u`.
fn rotate(a: &mut CMatrix, u: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let n = a.rows;

    // Phase factor making the pivot real, then a real symmetric rotation.
    let e = apq / g;
    let zeta = (aqq - app) / (2.0 * g);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let ec = e.conj();

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - ec * akq * s;
        a[(k, q)] = akp * s + ec * akq * c;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - e * aqk * s;
        a[(q, k)] = apk * s + e * aqk * c;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;

    for k in 0..n {
        let ukp = u[(k, p)];
        let ukq = u[(k, q)];
        u[(k, p)] = ukp * c - ec * ukq * s;
        u[(k, q)] = ukp * s + ec * ukq * c;
    }
}

fn normalize_phase(basis: &mut CMatrix, j: usize) {
    let n = basis.rows;
    let mut best = 0;
    let mut best_mag = -1.0;
    for i in 0..n {
        let mag = basis[(i, j)].norm();
        if mag > best_mag {
            best_mag = mag;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let phase = basis[(best, j)] / best_mag;
    let rot = phase.conj();
    for i in 0..n {
        basis[(i, j)] *= rot;
    }
    basis[(best, j)] = Complex64::new(basis[(best, j)].norm(), 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        })
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
        let a = random_matrix(rng, n, n);
        let h = CMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
        let mut h = h;
        for i in 0..n {
            h[(i, i)].im = 0.0;
        }
        HermitianMatrix::new(h).unwrap()
    }

    #[test]
    fn gram_examples() {
        let i2 = CMatrix::identity(2);
        assert_eq!(gram(&i2).unwrap().matrix(), &i2);

        let h = CMatrix::from_row_major(3, 1, vec![c(1.0, 1.0), c(0.0, 2.0), c(-1.0, 0.0)]);
        let g = gram(&h).unwrap();
        assert_eq!(g.dim(), 1);
        assert!((g.matrix()[(0, 0)].re - 7.0).abs() < 1e-15);

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let m = CMatrix::from_real_rows(&[&[1.0, r], &[0.0, r]]);
        let g = gram(&m).unwrap();
        assert!((g.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((g.matrix()[(0, 1)].re - r).abs() < 1e-15);
        assert!((g.matrix()[(1, 0)].re - r).abs() < 1e-15);
        assert!((g.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gram_rejects_non_finite() {
        let m = CMatrix::from_row_major(1, 1, vec![c(f64::INFINITY, 0.0)]);
        assert_eq!(gram(&m), Err(LinalgError::NonFinite));
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_norm_sq(&CMatrix::identity(5)), 5.0);
        assert_eq!(frobenius_norm_sq(&CMatrix::zeros(3, 4)), 0.0);
        let m = CMatrix::from_row_major(2, 2, vec![c(1.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(frobenius_norm_sq(&m), 6.0);
    }

    #[test]
    fn hermitian_validation() {
        let bad = CMatrix::from_row_major(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(matches!(HermitianMatrix::new(bad), Err(LinalgError::NotHermitian { .. })));
        let bad_diag = CMatrix::from_row_major(1, 1, vec![c(1.0, 1e-6)]);
        assert!(HermitianMatrix::new(bad_diag).is_err());
        assert!(matches!(
            HermitianMatrix::new(CMatrix::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn eigh_diagonal_sorts_descending() {
        let d = CMatrix::from_real_rows(&[&[3.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0]]);
        let s = eigh(&HermitianMatrix::new(d).unwrap()).unwrap();
        assert_eq!(s.values(), &[3.0, 2.0, 1.0]);
        let expected = CMatrix::from_real_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        assert_eq!(s.basis(), &expected);
    }

    #[test]
    fn eigh_two_by_two_symmetric() {
        let m = CMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let s = eigh(&HermitianMatrix::new(m).unwrap()).unwrap();
        assert!((s.values()[0] - 3.0).abs() < 1e-14);
        assert!((s.values()[1] - 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let u0 = s.basis().column(0);
        let u1 = s.basis().column(1);
        // Phase convention picks the first component on magnitude ties.
        assert!((u0[0] - c(r, 0.0)).norm() < 1e-14 && (u0[1] - c(r, 0.0)).norm() < 1e-14);
        assert!((u1[0] - c(r, 0.0)).norm() < 1e-14 && (u1[1] - c(-r, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn eigh_complex_two_by_two() {
        // [[1, i], [-i, 1]] has eigenvalues 2 and 0.
        let m = CMatrix::from_row_major(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)]);
        let s = eigh(&HermitianMatrix::new(m.clone()).unwrap()).unwrap();
        assert!((s.values()[0] - 2.0).abs() < 1e-14);
        assert_eq!(s.values()[1], 0.0);
        assert!(frobenius_norm_sq(&s.reconstruct().sub(&m).unwrap()) < 1e-28);
    }

    #[test]
    fn eigh_random_reconstruction_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 5, 8, 17, 32] {
            let h = random_hermitian(&mut rng, n);
            let s = eigh(&h).unwrap();
            let resid = frobenius_norm_sq(&s.reconstruct().sub(h.matrix()).unwrap()).sqrt();
            let scale = 1.0 + s.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(resid < 1e-8 * scale, "n={n} resid={resid}");
            let uhu = s.basis().adjoint_mul(s.basis()).unwrap();
            let err = frobenius_norm_sq(&uhu.sub(&CMatrix::identity(n)).unwrap()).sqrt();
            assert!(err < 1e-8);
            assert!(s.values().windows(2).all(|w| w[0] >= w[1]));
            let trace_err = (h.trace() - s.values().iter().sum::<f64>()).abs();
            assert!(trace_err <= 1e-9 * (1.0 + h.trace().abs()));
            for j in 0..n {
                let col = s.basis().column(j);
                let (idx, _) = col
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
                assert_eq!(col[idx].im, 0.0);
                assert!(col[idx].re >= 0.0);
            }
        }
    }

    #[test]
    fn gram_eigenvalues_match_closed_form_three_by_three() {
        // Eigenvalues of a 3x3 Hermitian matrix from the trigonometric
        // solution of its characteristic cubic.
        fn cubic_eigs(m: &CMatrix) -> [f64; 3] {
            let a = m[(0, 0)].re;
            let b = m[(1, 1)].re;
            let cc = m[(2, 2)].re;
            let d = m[(0, 1)];
            let e = m[(1, 2)];
            let f = m[(0, 2)];
            let tr = a + b + cc;
            let c2 = a * b + a * cc + b * cc - d.norm_sqr() - e.norm_sqr() - f.norm_sqr();
            let det = a * b * cc + 2.0 * (d * e * f.conj()).re
                - a * e.norm_sqr()
                - b * f.norm_sqr()
                - cc * d.norm_sqr();
            let q = tr / 3.0;
            let p = ((tr * tr - 3.0 * c2) / 9.0).max(0.0);
            let r = (2.0 * tr.powi(3) - 9.0 * tr * c2 + 27.0 * det) / 54.0;
            let sp = p.sqrt();
            let phi = if sp == 0.0 { 0.0 } else { (r / (sp * sp * sp)).clamp(-1.0, 1.0).acos() / 3.0 };
            let tau = 2.0 * std::f64::consts::PI / 3.0;
            let mut v = [
                q + 2.0 * sp * phi.cos(),
                q + 2.0 * sp * (phi - tau).cos(),
                q + 2.0 * sp * (phi + tau).cos(),
            ];
            v.sort_by(|x, y| y.total_cmp(x));
            v
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = random_matrix(&mut rng, 4, 3);
            let g = gram(&a).unwrap();
            let s = eigh(&g).unwrap();
            let oracle = cubic_eigs(g.matrix());
            for (x, y) in s.values().iter().zip(oracle) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn tiny_eigenvalues_clamp_to_zero() {
        let h = CMatrix::from_row_major(2, 1, vec![c(1.0, 0.5), c(-0.3, 2.0)]);
        let outer = CMatrix::from_fn(2, 2, |i, j| h[(i, 0)] * h[(j, 0)].conj());
        let s = eigh(&HermitianMatrix::new(outer).unwrap()).unwrap();
        assert_eq!(s.values()[1], 0.0);
        assert_eq!(s.rank(), 1);
    }

    #[test]
    fn eigh_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(&mut rng, 12);
        assert_eq!(eigh(&h).unwrap(), eigh(&h).unwrap());
    }
}
