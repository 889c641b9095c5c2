//! Dense complex matrices and Hermitian spectral computations.
//!
//! Everything operator-valued in the crate bottoms out here. The eigensolver
//! is a cyclic complex Jacobi method: slow compared to Householder/QR, but
//! short, deterministic and accurate to working precision for the sizes we
//! use (n ≤ ~1000).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

/// Relative tolerance for the Hermiticity check on `HermitianOp` construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Sweep budget for the Jacobi iteration.
pub const MAX_SWEEPS: usize = 30;
/// Off-diagonal Frobenius stopping threshold, relative to ‖A‖_F.
pub const OFF_DIAG_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("context mismatch: {left} vs {right}")]
    ContextMismatch { left: String, right: String },
    #[error("matrix is not Hermitian: deviation {deviation:e} exceeds {tolerance:e}")]
    NonHermitian { deviation: f64, tolerance: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("non-finite entry produced at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix({}x{})", self.rows, self.cols)?;
        if self.rows * self.cols <= 36 {
            for i in 0..self.rows {
                write!(f, "\n  ")?;
                for j in 0..self.cols {
                    let z = self[(i, j)];
                    write!(f, "{:>10.4}{:+.4}i ", z.re, z.im)?;
                }
            }
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// First error position if some entry is NaN or infinite.
    pub fn check_finite(&self) -> Result<(), LinalgError> {
        match self.data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            None => Ok(()),
            Some(p) => Err(LinalgError::NonFinite {
                row: p / self.cols.max(1),
                col: p % self.cols.max(1),
            }),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    fn same_shape(&self, other: &Self) -> Result<(), LinalgError> {
        if self.shape() != other.shape() {
            return Err(LinalgError::DimensionMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: C64, other: &Self) -> Result<Self, LinalgError> {
        self.same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(n, p);
        for i in 0..n {
            let out_row = &mut out.data[i * p..(i + 1) * p];
            for k in 0..m {
                let a = self.data[i * m + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                left: self.shape(),
                right: (v.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn trace(&self) -> Result<C64, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self, LinalgError> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// Leading `n × n` block.
    pub fn leading_block(&self, n: usize) -> Self {
        let n_r = n.min(self.rows);
        let n_c = n.min(self.cols);
        Self::from_fn(n_r, n_c, |i, j| self[(i, j)])
    }

    /// max |A_ij − conj(A_ji)|.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.rows;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// A*A, assembled from the upper triangle so it is exactly Hermitian.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let adj = self.adjoint();
        let mut g = Self::zeros(n, n);
        for i in 0..n {
            let ai = adj.row(i);
            for j in i..n {
                let aj = adj.row(j);
                let s: C64 = ai.iter().zip(aj).map(|(x, y)| x * y.conj()).sum();
                g[(i, j)] = s;
                g[(j, i)] = s.conj();
            }
            g[(i, i)] = C64::new(g[(i, i)].re, 0.0);
        }
        g
    }

    /// Spectral norm of an arbitrary matrix, as sqrt(λ_max(A*A)).
    pub fn spectral_norm(&self) -> Result<f64, LinalgError> {
        if self.data.is_empty() {
            return Ok(0.0);
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return Ok(0.0);
        }
        // Scaling first keeps the Gram matrix away from under/overflow.
        let g = self.scale_real(1.0 / scale).gram();
        let ev = jacobi(&g, false)?.0;
        Ok(scale * ev.last().copied().unwrap_or(0.0).max(0.0).sqrt())
    }
}

/// Identifier of the quantization space an operator came from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextTag(Arc<str>);

impl ContextTag {
    pub fn new(s: impl AsRef<str>) -> Self {
        Self(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContextTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A Hermitian matrix tagged with its ħ and originating space.
#[derive(Clone, Debug)]
pub struct HermitianOp {
    matrix: ComplexMatrix,
    hbar: f64,
    context: ContextTag,
}

impl HermitianOp {
    /// Validates shape, finiteness and Hermiticity. Nothing is symmetrized.
    pub fn new(matrix: ComplexMatrix, hbar: f64, context: ContextTag) -> Result<Self, LinalgError> {
        let scale = matrix.max_abs();
        Self::validated(matrix, scale, hbar, context)
    }

    /// Hermiticity is judged against `scale`: for a difference of nearly
    /// equal operators that is the operands' size, not the result's.
    fn validated(matrix: ComplexMatrix, scale: f64, hbar: f64, context: ContextTag) -> Result<Self, LinalgError> {
        if !matrix.is_square() {
            return Err(LinalgError::NotSquare {
                rows: matrix.rows,
                cols: matrix.cols,
            });
        }
        matrix.check_finite()?;
        let deviation = matrix.hermitian_deviation();
        let tolerance = HERMITIAN_TOL * scale;
        if deviation > tolerance {
            return Err(LinalgError::NonHermitian {
                deviation,
                tolerance,
            });
        }
        Ok(Self {
            matrix,
            hbar,
            context,
        })
    }

    /// Convenience for tests and scratch work: ħ = 1, anonymous context.
    pub fn untagged(matrix: ComplexMatrix) -> Result<Self, LinalgError> {
        Self::new(matrix, 1.0, ContextTag::new("untagged"))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn context(&self) -> &ContextTag {
        &self.context
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    fn compatible(&self, other: &Self) -> Result<(), LinalgError> {
        if self.context != other.context {
            return Err(LinalgError::ContextMismatch {
                left: self.context.to_string(),
                right: other.context.to_string(),
            });
        }
        self.matrix.same_shape(&other.matrix)
    }

    /// Same context, new matrix (re-validated at the larger of the two scales,
    /// since the new matrix is derived from this one).
    pub fn with_matrix(&self, matrix: ComplexMatrix) -> Result<Self, LinalgError> {
        let scale = self.matrix.max_abs().max(matrix.max_abs());
        Self::validated(matrix, scale, self.hbar, self.context.clone())
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.compatible(other)?;
        let scale = self.matrix.max_abs() + other.matrix.max_abs();
        Self::validated(self.matrix.add(&other.matrix)?, scale, self.hbar, self.context.clone())
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.compatible(other)?;
        let scale = self.matrix.max_abs() + other.matrix.max_abs();
        Self::validated(self.matrix.sub(&other.matrix)?, scale, self.hbar, self.context.clone())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scale_real(s),
            hbar: self.hbar,
            context: self.context.clone(),
        }
    }

    /// A² is Hermitian; computed as A*A so the result is exactly so.
    pub fn square(&self) -> Self {
        Self {
            matrix: self.matrix.gram(),
            hbar: self.hbar,
            context: self.context.clone(),
        }
    }

    /// Trace of a Hermitian operator. The imaginary part is checked, not dropped.
    pub fn trace(&self) -> f64 {
        let t = self.matrix.trace().expect("square by construction");
        debug_assert!(t.im.abs() <= 1e-12 * (1.0 + t.re.abs()) * self.dim() as f64);
        t.re
    }

    /// Restriction to the leading `n × n` block.
    pub fn leading_block(&self, n: usize) -> Self {
        Self {
            matrix: self.matrix.leading_block(n),
            hbar: self.hbar,
            context: self.context.clone(),
        }
    }
}

/// Eigenvalues (ascending) and column-orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn eigenvector(&self, idx: usize) -> Vec<C64> {
        self.eigenvectors.column(idx)
    }

    /// V diag(λ) V*.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            for i in 0..n {
                let a = v[(i, k)] * lam;
                for j in 0..n {
                    out[(i, j)] += a * v[(j, k)].conj();
                }
            }
        }
        out
    }
}

pub fn eig_hermitian(a: &HermitianOp) -> Result<Spectrum, LinalgError> {
    let (eigenvalues, vecs) = jacobi(a.matrix(), true)?;
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: vecs.expect("vectors requested"),
    })
}

/// Eigenvalues only; roughly half the work of `eig_hermitian`.
pub fn eigvals_hermitian(a: &HermitianOp) -> Result<Vec<f64>, LinalgError> {
    Ok(jacobi(a.matrix(), false)?.0)
}

pub fn op_norm(a: &HermitianOp) -> Result<f64, LinalgError> {
    if a.matrix().max_abs() == 0.0 {
        return Ok(0.0);
    }
    let ev = eigvals_hermitian(a)?;
    Ok(ev.first().map_or(0.0, |l| l.abs()).max(ev.last().map_or(0.0, |l| l.abs())))
}

pub fn min_eigenvalue(a: &HermitianOp) -> Result<f64, LinalgError> {
    Ok(eigvals_hermitian(a)?.first().copied().unwrap_or(0.0))
}

pub fn is_psd(a: &HermitianOp, tol: f64) -> Result<bool, LinalgError> {
    Ok(min_eigenvalue(a)? >= -tol)
}

pub fn commutator(a: &HermitianOp, b: &HermitianOp) -> Result<ComplexMatrix, LinalgError> {
    a.compatible(b)?;
    a.matrix().commutator(b.matrix())
}

/// Sign convention for `hermitized_commutator`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommutatorSign {
    /// i[A, B]
    PlusI,
    /// −i[A, B]
    MinusI,
}

pub fn hermitized_commutator(
    a: &HermitianOp,
    b: &HermitianOp,
    sign: CommutatorSign,
) -> Result<HermitianOp, LinalgError> {
    let c = commutator(a, b)?;
    let factor = match sign {
        CommutatorSign::PlusI => C64::new(0.0, 1.0),
        CommutatorSign::MinusI => C64::new(0.0, -1.0),
    };
    a.with_matrix(c.scale(factor))
}

/// Cyclic complex Jacobi. Works on a column-major copy so that the column
/// updates (the hot loop) are contiguous; rows are then restored from
/// Hermitian symmetry.
fn jacobi(
    a: &ComplexMatrix,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<ComplexMatrix>), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    // w[j*n + i] = A[i][j]
    let mut w: Vec<C64> = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            w[j * n + i] = a[(i, j)];
        }
    }
    for i in 0..n {
        w[i * n + i].im = 0.0;
    }
    let mut v: Vec<C64> = if want_vectors {
        let mut v = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            v[i * n + i] = C64::new(1.0, 0.0);
        }
        v
    } else {
        Vec::new()
    };

    let total = a.frobenius();
    let threshold = OFF_DIAG_TOL * total;
    let off_norm = |w: &[C64]| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    s += w[j * n + i].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = n <= 1 || total == 0.0;
    let mut sweeps = 0;
    while !converged {
        if off_norm(&w) <= threshold {
            converged = true;
            break;
        }
        if sweeps == MAX_SWEEPS {
            break;
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = w[q * n + p];
                let b = apq.norm();
                if b == 0.0 {
                    continue;
                }
                let app = w[p * n + p].re;
                let aqq = w[q * n + q].re;
                let phase = apq / b; // e^{iφ}
                let theta = (aqq - app) / (2.0 * b);
                let t = if theta.is_finite() {
                    let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                } else {
                    0.0
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let em = phase.conj(); // e^{−iφ}
                // U restricted to (p, q): [[c, s], [−s e^{−iφ}, c e^{−iφ}]].
                let u_qp = -em * s;
                let u_qq = em * c;
                rotate_columns(&mut w, n, p, q, c, s, u_qp, u_qq);
                if want_vectors {
                    rotate_columns(&mut v, n, p, q, c, s, u_qp, u_qq);
                }
                // Rows p, q follow from Hermitian symmetry of U*AU.
                for j in 0..n {
                    if j != p && j != q {
                        w[j * n + p] = w[p * n + j].conj();
                        w[j * n + q] = w[q * n + j].conj();
                    }
                }
                w[p * n + p] = C64::new(app - t * b, 0.0);
                w[q * n + q] = C64::new(aqq + t * b, 0.0);
                w[q * n + p] = C64::new(0.0, 0.0);
                w[p * n + q] = C64::new(0.0, 0.0);
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            sweeps,
            off_norm: off_norm(&w),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| w[i * n + i].re).collect();
    order.sort_by(|&x, &y| diag[x].total_cmp(&diag[y]).then(x.cmp(&y)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = want_vectors.then(|| {
        ComplexMatrix::from_fn(n, n, |i, k| v[order[k] * n + i])
    });
    if let Some(vm) = &vectors {
        vm.check_finite()?;
    }
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(LinalgError::NonFinite { row: 0, col: 0 });
    }
    Ok((eigenvalues, vectors))
}

/// Replace columns p, q of the column-major matrix `m` by M·U on those columns.
#[allow(clippy::too_many_arguments)]
#[inline]
fn rotate_columns(m: &mut [C64], n: usize, p: usize, q: usize, c: f64, s: f64, u_qp: C64, u_qq: C64) {
    let (lo, hi) = m.split_at_mut(q * n);
    let col_p = &mut lo[p * n..p * n + n];
    let col_q = &mut hi[..n];
    for (xp, xq) in col_p.iter_mut().zip(col_q.iter_mut()) {
        let a = *xp;
        let b = *xq;
        *xp = a * c + b * u_qp;
        *xq = a * s + b * u_qq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub(crate) fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn diagonal_input_sorted() {
        let a = HermitianOp::untagged(ComplexMatrix::from_real_diag(&[3.0, -1.0])).unwrap();
        let s = eig_hermitian(&a).unwrap();
        assert_eq!(s.eigenvalues, vec![-1.0, 3.0]);
        assert_eq!(s.eigenvectors[(1, 0)], c(1.0, 0.0));
        assert_eq!(s.eigenvectors[(0, 1)], c(1.0, 0.0));
    }

    #[test]
    fn swap_matrix() {
        let m = ComplexMatrix::from_row_major(2, 2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let s = eig_hermitian(&HermitianOp::untagged(m).unwrap()).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_two_by_two_phase() {
        // [[1, 2i], [−2i, 1]] has eigenvalues −1, 3.
        let m = ComplexMatrix::from_row_major(2, 2, vec![c(1., 0.), c(0., 2.), c(0., -2.), c(1., 0.)]);
        let s = eig_hermitian(&HermitianOp::untagged(m.clone()).unwrap()).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 3.0).abs() < 1e-14);
        let err = s.reconstruct().sub(&m).unwrap().frobenius();
        assert!(err < 1e-14, "{err}");
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_major(2, 2, vec![c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(
            HermitianOp::untagged(m),
            Err(LinalgError::NonHermitian { .. })
        ));
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        for (n, seed) in [(1, 1), (5, 2), (17, 3), (64, 4)] {
            let m = random_hermitian(n, seed);
            let s = eig_hermitian(&HermitianOp::untagged(m.clone()).unwrap()).unwrap();
            let recon = s.reconstruct().sub(&m).unwrap().frobenius();
            assert!(recon <= 1e-10 * (1.0 + m.frobenius()), "n={n}: {recon}");
            let vtv = s.eigenvectors.adjoint().matmul(&s.eigenvectors).unwrap();
            let orth = vtv.sub(&ComplexMatrix::identity(n)).unwrap().max_abs();
            assert!(orth < 1e-10, "n={n}: {orth}");
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_spectrum() {
        // Identity plus a rank-one update: eigenvalue 1 with multiplicity n−1.
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<C64> = (0..n).map(|_| c(rng.gen(), rng.gen())).collect();
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            d + u[i] * u[j].conj()
        });
        let s = eig_hermitian(&HermitianOp::untagged(m.clone()).unwrap()).unwrap();
        let unorm2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        for l in &s.eigenvalues[..n - 1] {
            assert!((l - 1.0).abs() < 1e-12);
        }
        assert!((s.eigenvalues[n - 1] - 1.0 - unorm2).abs() < 1e-12);
    }

    #[test]
    fn op_norm_basics() {
        let a = HermitianOp::untagged(ComplexMatrix::from_real_diag(&[1.0, -2.0])).unwrap();
        assert_eq!(op_norm(&a).unwrap(), 2.0);
        let z = HermitianOp::untagged(ComplexMatrix::zeros(3, 3)).unwrap();
        assert_eq!(op_norm(&z).unwrap(), 0.0);
    }

    #[test]
    fn commutator_hand_computation() {
        let a = HermitianOp::untagged(ComplexMatrix::from_real_diag(&[1.0, 2.0])).unwrap();
        let b = HermitianOp::untagged(ComplexMatrix::from_row_major(
            2,
            2,
            vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
        ))
        .unwrap();
        let comm = commutator(&a, &b).unwrap();
        let expected =
            ComplexMatrix::from_row_major(2, 2, vec![c(0., 0.), c(-1., 0.), c(1., 0.), c(0., 0.)]);
        assert_eq!(comm, expected);
        assert_eq!(commutator(&a, &a).unwrap().max_abs(), 0.0);
        let h = hermitized_commutator(&a, &b, CommutatorSign::PlusI).unwrap();
        assert_eq!(h.matrix()[(0, 1)], c(0.0, -1.0));
    }

    #[test]
    fn context_and_dimension_checks() {
        let a = HermitianOp::new(ComplexMatrix::identity(2), 0.5, ContextTag::new("a")).unwrap();
        let b = HermitianOp::new(ComplexMatrix::identity(2), 0.5, ContextTag::new("b")).unwrap();
        assert!(matches!(commutator(&a, &b), Err(LinalgError::ContextMismatch { .. })));
        let c3 = HermitianOp::new(ComplexMatrix::identity(3), 0.5, ContextTag::new("a")).unwrap();
        assert!(matches!(commutator(&a, &c3), Err(LinalgError::DimensionMismatch { .. })));
    }

    #[test]
    fn psd_and_min_eig() {
        let id = HermitianOp::untagged(ComplexMatrix::identity(4)).unwrap();
        assert!((min_eigenvalue(&id).unwrap() - 1.0).abs() < 1e-15);
        let d = HermitianOp::untagged(ComplexMatrix::from_real_diag(&[0.0, 5.0])).unwrap();
        assert!(is_psd(&d, 0.0).unwrap());
        let neg = HermitianOp::untagged(ComplexMatrix::from_real_diag(&[-1e-3, 5.0])).unwrap();
        assert!(!is_psd(&neg, 1e-6).unwrap());
    }

    #[test]
    fn trace_frobenius() {
        assert_eq!(ComplexMatrix::identity(7).trace().unwrap(), c(7.0, 0.0));
        assert_eq!(ComplexMatrix::from_real_diag(&[3.0, 4.0]).frobenius(), 5.0);
        let a = random_hermitian(9, 11);
        let b = random_hermitian(9, 12);
        let ab = a.matmul(&b).unwrap().trace().unwrap();
        let ba = b.matmul(&a).unwrap().trace().unwrap();
        assert!((ab - ba).norm() < 1e-10);
    }

    #[test]
    fn spectral_norm_of_rectangular() {
        // Singular values of [[3, 0], [4, 0], [0, 1]] are 5 and 1.
        let m = ComplexMatrix::from_row_major(
            3,
            2,
            vec![c(3., 0.), c(0., 0.), c(4., 0.), c(0., 0.), c(0., 0.), c(0., 1.)],
        );
        assert!((m.spectral_norm().unwrap() - 5.0).abs() < 1e-13);
    }
}
