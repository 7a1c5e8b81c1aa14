//! Dense complex Hermitian linear algebra.
//!
//! Matrices here are tiny (d ≤ 8 in every solver path), so everything is a
//! flat row-major `Vec<Complex64>` and the eigensolver is cyclic Jacobi.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Relative tolerance on `‖M − M†‖_max / max(1, ‖M‖_max)` accepted by [`HermitianMatrix::try_new`].
pub const TAU_HERM: f64 = 1e-8;
/// Relative reconstruction tolerance of the eigensolver.
pub const TAU_RECON: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("matrix is not Hermitian: asymmetry {asymmetry:.3e} exceeds tolerance {tolerance:.1e}")]
    NonHermitianInput { asymmetry: f64, tolerance: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("expected {expected} entries for a square matrix, got {got}")]
    BadShape { expected: usize, got: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

pub type Result<T> = std::result::Result<T, MatError>;

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(MatError::BadShape {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds from nested rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(MatError::BadShape {
                    expected: dim * dim,
                    got: rows.iter().map(Vec::len).sum(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// `|v⟩⟨v|`
    pub fn outer(v: &[Complex64]) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.data.chunks(self.dim).map(<[_]>::to_vec).collect()
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let n = self.dim;
        assert_eq!(n, rhs.dim, "matmul dimension mismatch");
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise `|M_ij − conj(M_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let g = self.adjoint().matmul(self);
        (&g - &Self::identity(self.dim)).max_abs() <= tol
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for row in self.data.chunks(self.dim) {
            let cells: Vec<String> = row
                .iter()
                .map(|z| format!("{:+.5}{:+.5}i", z.re, z.im))
                .collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// A complex matrix known to equal its conjugate transpose.
///
/// Every constructor symmetrizes via `(M + M†)/2`, so rounding drift in
/// products such as `W·A·W` never accumulates.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Validates `m` against [`TAU_HERM`] and symmetrizes.
    pub fn try_new(m: ComplexMatrix) -> Result<Self> {
        let asymmetry = m.hermitian_defect();
        let tolerance = TAU_HERM * m.max_abs().max(1.0);
        if asymmetry > tolerance {
            return Err(MatError::NonHermitianInput {
                asymmetry,
                tolerance,
            });
        }
        Ok(Self::symmetrize(m))
    }

    /// Projects onto the Hermitian subspace without validation.
    pub fn symmetrize(mut m: ComplexMatrix) -> Self {
        let n = m.dim;
        for i in 0..n {
            m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                m[(i, j)] = avg;
                m[(j, i)] = avg.conj();
            }
        }
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(ComplexMatrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim))
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_real_diag(diag))
    }

    /// Rank-one projector `|v⟩⟨v|`.
    pub fn projector(v: &[Complex64]) -> Self {
        Self::symmetrize(ComplexMatrix::outer(v))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn axpy(&mut self, s: f64, other: &Self) {
        self.0.axpy(s, &other.0);
    }

    /// `B·self·B` for Hermitian `B`; the result is Hermitian.
    pub fn congruence(&self, b: &HermitianMatrix) -> Self {
        Self::symmetrize(b.0.matmul(&self.0).matmul(&b.0))
    }

    /// `T·self·T†` for an arbitrary `T`.
    pub fn transform(&self, t: &ComplexMatrix) -> Self {
        Self::symmetrize(t.matmul(&self.0).matmul(&t.adjoint()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    pub fn eig(&self) -> EigenDecomposition {
        jacobi_eigen(&self.0)
    }

    /// Eigenvalues in ascending order, without accumulating eigenvectors.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut a = self.0.clone();
        jacobi_sweeps(&mut a, None);
        let mut vals: Vec<f64> = (0..self.dim()).map(|i| a[(i, i)].re).collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Mutable access for callers that keep the matrix Hermitian themselves.
    pub(crate) fn as_matrix_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.0
    }

    /// Applies `f` to the spectrum: `V·diag(f(λ))·V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        let e = self.eig();
        let mapped: Vec<f64> = e.eigenvalues.iter().map(|&l| f(l)).collect();
        e.rebuild_with(&mapped)
    }

    /// Cholesky factor `L` with `self = L·L†`.
    pub fn cholesky(&self) -> Result<ComplexMatrix> {
        let n = self.dim();
        let a = &self.0;
        let mut l = ComplexMatrix::zeros(n);
        for j in 0..n {
            let mut diag = a[(j, j)].re;
            for k in 0..j {
                diag -= l[(j, k)].norm_sqr();
            }
            if !(diag > 0.0) {
                return Err(MatError::NotPositiveDefinite);
            }
            let ljj = diag.sqrt();
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
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        self.scale(-1.0)
    }
}

impl Index<(usize, usize)> for HermitianMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian")?;
        self.0.fmt(f)
    }
}

impl TryFrom<ComplexMatrix> for HermitianMatrix {
    type Error = MatError;
    fn try_from(m: ComplexMatrix) -> Result<Self> {
        Self::try_new(m)
    }
}

/// Ascending eigenvalues with eigenvectors stored as the columns of a unitary.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> HermitianMatrix {
        self.rebuild_with(&self.eigenvalues)
    }

    /// `V·diag(values)·V†`
    pub fn rebuild_with(&self, values: &[f64]) -> HermitianMatrix {
        let v = &self.eigenvectors;
        let n = v.dim();
        let mut out = ComplexMatrix::zeros(n);
        for (k, &lam) in values.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * lam;
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        HermitianMatrix::symmetrize(out)
    }
}

/// Cyclic complex Jacobi. Each rotation first removes the phase of the
/// pivot `a_pq` and then applies the real symmetric Jacobi rotation.
/// Diagonalizes `a` in place, accumulating rotations into `v` when given.
fn jacobi_sweeps(a: &mut ComplexMatrix, mut v: Option<&mut ComplexMatrix>) {
    let n = a.dim();
    let scale = a.frobenius_norm();
    if n < 2 || scale == 0.0 {
        return;
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(a, v.as_deref_mut(), p, q);
            }
        }
    }
}

fn jacobi_eigen(m: &ComplexMatrix) -> EigenDecomposition {
    let n = m.dim();
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(n);
    jacobi_sweeps(&mut a, Some(&mut v));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, new_col)] = v[(i, old_col)];
        }
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

fn rotate(a: &mut ComplexMatrix, v: Option<&mut ComplexMatrix>, p: usize, q: usize) {
    let n = a.dim();
    let m = a.as_mut_slice();
    let apq = m[p * n + q];
    let mag = apq.norm_sqr().sqrt();
    if mag == 0.0 {
        return;
    }
    let app = m[p * n + p].re;
    let aqq = m[q * n + q].re;
    let zero = Complex64::new(0.0, 0.0);
    if mag < 1e-300 || mag <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        m[p * n + q] = zero;
        m[q * n + p] = zero;
        return;
    }
    let phase = apq / mag;
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // J = [[c, s], [-s·e^{-iφ}, c·e^{-iφ}]] on the (p, q) plane. The result
    // stays Hermitian, so rows p and q are the conjugates of the new columns.
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = m[k * n + p];
        let akq = m[k * n + q];
        let new_p = akp * c + akq * jqp;
        let new_q = akp * s + akq * jqq;
        m[k * n + p] = new_p;
        m[k * n + q] = new_q;
        m[p * n + k] = new_p.conj();
        m[q * n + k] = new_q.conj();
    }
    m[p * n + q] = zero;
    m[q * n + p] = zero;
    m[p * n + p] = Complex64::new(app - t * mag, 0.0);
    m[q * n + q] = Complex64::new(aqq + t * mag, 0.0);
    let Some(v) = v else { return };
    let vs = v.as_mut_slice();
    for k in 0..n {
        let vkp = vs[k * n + p];
        let vkq = vs[k * n + q];
        vs[k * n + p] = vkp * c + vkq * jqp;
        vs[k * n + q] = vkp * s + vkq * jqq;
    }
}

/// Eigendecomposition of a general square matrix that is expected to be Hermitian.
pub fn eig(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    Ok(HermitianMatrix::try_new(m.clone())?.eig())
}

/// Sum of absolute eigenvalues (equal to the sum of singular values for Hermitian input).
pub fn nuclear_norm(m: &HermitianMatrix) -> f64 {
    m.eig().eigenvalues.iter().map(|l| l.abs()).sum()
}

pub fn is_psd(m: &HermitianMatrix, tol: f64) -> bool {
    m.min_eigenvalue() >= -tol
}

/// Frobenius-nearest positive semidefinite matrix.
pub fn psd_project(m: &HermitianMatrix) -> HermitianMatrix {
    m.map_spectrum(|l| l.max(0.0))
}

/// `Re trace(A·B)`
pub fn frob_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(MatError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(trace_product(a.as_matrix(), b.as_matrix()))
}

/// `Re trace(A·B)` without dimension checks; hot path of the SDP solver.
pub(crate) fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let (ad, bd) = (a.as_slice(), b.as_slice());
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = ad[i * n + j];
            let y = bd[j * n + i];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// Closest unitary to `m` in Frobenius norm: `m·(m†m)^{-1/2}`.
pub fn polar_unitary(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let gram = HermitianMatrix::symmetrize(m.adjoint().matmul(m));
    let e = gram.eig();
    if e.eigenvalues[0] <= 1e-14 * e.eigenvalues.last().copied().unwrap_or(1.0).max(1e-300) {
        return Err(MatError::NotPositiveDefinite);
    }
    let inv_sqrt = e.rebuild_with(
        &e.eigenvalues
            .iter()
            .map(|l| 1.0 / l.sqrt())
            .collect::<Vec<_>>(),
    );
    Ok(m.matmul(inv_sqrt.as_matrix()))
}
