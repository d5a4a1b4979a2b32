//! Dense complex matrices of dimension 2, 4 or 8.
//!
//! Storage is a fixed 64-entry row-major array so matrices are `Copy` and
//! never touch the heap. Qubit A is the most significant bit of a basis
//! index: `|s_A s_B s_C>` sits at `4*s_A + 2*s_B + s_C`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const MAX_DIM: usize = 8;

/// Hermiticity tolerance applied to inputs (scaled by the largest entry
/// when that exceeds one).
pub const HERMITIAN_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: [C64; MAX_DIM * MAX_DIM],
}

fn check_dim(dim: usize) -> Result<()> {
    match dim {
        2 | 4 | 8 => Ok(()),
        d => Err(Error::InvalidDimension(d)),
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::zeros_unchecked(dim))
    }

    pub(crate) fn zeros_unchecked(dim: usize) -> Self {
        debug_assert!(dim >= 1 && dim <= MAX_DIM);
        Self {
            dim,
            data: [ZERO; MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        Ok(m)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        Ok(m)
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be a
    /// supported dimension squared.
    pub fn from_row_major(entries: &[C64]) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} entries do not form a square matrix",
                entries.len()
            )));
        }
        Self::from_fn(dim, |i, j| entries[i * dim + j])
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Ok(m)
    }

    /// `|v><v|` for a state vector of dimension 2, 4 or 8.
    pub fn projector(v: &[C64]) -> Result<Self> {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros_unchecked(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros_unchecked(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self[(j, i)];
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for z in out.entries_mut() {
            *z *= s;
        }
        out
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        let mut out = *self;
        for z in out.entries_mut() {
            *z *= s;
        }
        out
    }

    pub fn entries(&self) -> &[C64] {
        &self.data[..self.dim * self.dim]
    }

    pub fn entries_mut(&mut self) -> &mut [C64] {
        let n = self.dim * self.dim;
        &mut self.data[..n]
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    /// Keeps the diagonal and zeroes every off-diagonal entry.
    pub fn diagonal_part(&self) -> Self {
        let mut out = Self::zeros_unchecked(self.dim);
        for i in 0..self.dim {
            out[(i, i)] = self[(i, i)];
        }
        out
    }

    /// `max |m[i][j] - conj(m[j][i])|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in max_abs_diff");
        self.entries()
            .iter()
            .zip(other.entries())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol
    }

    /// `(m + m^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            out[(i, i)] = C64::new(self[(i, i)].re, 0.0);
            for j in (i + 1)..self.dim {
                let z = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                out[(i, j)] = z;
                out[(j, i)] = z.conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matmul");
        let n = self.dim;
        let mut out = Self::zeros_unchecked(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// `<u| m |v>`.
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> C64 {
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                row += self.data[i * n + j] * v[j];
            }
            acc += u[i].conj() * row;
        }
        acc
    }

    /// `Re <v| m |v>`, the expectation of a Hermitian matrix.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        self.sandwich(v, v).re
    }

    /// `Re Tr(self * other)` without forming the product.
    pub fn trace_product_re(&self, other: &Self) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.data[i * n + j] * other.data[j * n + i]).re;
            }
        }
        acc
    }

    /// Multiplies entry `(i, j)` by `f(i, j)`.
    pub fn hadamard_with(&self, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] *= f(i, j);
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.dim && j < self.dim);
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.dim && j < self.dim);
        &mut self.data[i * self.dim + j]
    }
}

impl Add for ComplexMatrix {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in add");
        for (a, b) in self.entries_mut().iter_mut().zip(rhs.entries()) {
            *a += b;
        }
        self
    }
}

impl Sub for ComplexMatrix {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sub");
        for (a, b) in self.entries_mut().iter_mut().zip(rhs.entries()) {
            *a -= b;
        }
        self
    }
}

impl Mul for ComplexMatrix {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.matmul(&rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Eigenvalues in ascending order with the matching unitary of column
/// eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.dim()).map(|i| self.eigenvectors[(i, k)]).collect()
    }

    /// `V diag(f(lambda)) V^dagger`.
    pub fn map_eigenvalues(&self, mut f: impl FnMut(f64) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = ComplexMatrix::zeros_unchecked(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += v[(i, k)] * v[(j, k)].conj() * fl[k];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc.conj();
            }
            out[(i, i)].im = 0.0;
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_eigenvalues(|l| l)
    }

    /// `V^dagger m V`: `m` expressed in this eigenbasis.
    pub fn to_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let v = &self.eigenvectors;
        v.adjoint().matmul(&m.matmul(v))
    }

    /// `V m V^dagger`: inverse of [`to_eigenbasis`](Self::to_eigenbasis).
    pub fn from_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let v = &self.eigenvectors;
        v.matmul(&m.matmul(&v.adjoint()))
    }
}

fn hermitian_tolerance(m: &ComplexMatrix) -> f64 {
    HERMITIAN_TOL * m.max_abs().max(1.0)
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    check_dim(m.dim())?;
    let asym = m.max_asymmetry();
    if asym > hermitian_tolerance(m) {
        return Err(Error::NotHermitian {
            max_asymmetry: asym,
        });
    }
    Ok(jacobi_eigh(&m.hermitian_part()))
}

/// Jacobi sweep on an already-Hermitian matrix of any dimension up to 8.
pub(crate) fn jacobi_eigh(m: &ComplexMatrix) -> EigenDecomposition {
    let n = m.dim();
    let mut a = *m;
    let mut v = ComplexMatrix::zeros_unchecked(n);
    for i in 0..n {
        v[(i, i)] = ONE;
    }
    let scale = a.frobenius_norm();
    if n > 1 && scale > 0.0 {
        let threshold = (f64::EPSILON * scale) * (f64::EPSILON * scale) * 1e-2;
        for _sweep in 0..64 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off <= threshold {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag == 0.0 {
                        continue;
                    }
                    let phase = apq / mag;
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = (aqq - app) / (2.0 * mag);
                    let t = if theta == 0.0 {
                        1.0
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // J = diag(1, conj(phase)) . [[c, s], [-s, c]] on (p, q)
                    let jpp = C64::new(c, 0.0);
                    let jpq = C64::new(s, 0.0);
                    let jqp = phase.conj() * (-s);
                    let jqq = phase.conj() * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * jpp + akq * jqp;
                        a[(k, q)] = akp * jpq + akq * jqq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                    }
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                    a[(p, p)].im = 0.0;
                    a[(q, q)].im = 0.0;
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * jpp + vkq * jqp;
                        v[(k, q)] = vkp * jpq + vkq * jqq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut vectors = ComplexMatrix::zeros_unchecked(n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, col)] = v[(i, k)];
        }
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    }
}

/// Natural logarithm of a Hermitian positive-definite matrix.
pub fn matrix_log(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(m)?;
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l <= 0.0) {
        return Err(Error::NonPositiveEigenvalue { eigenvalue: bad });
    }
    Ok(eig.map_eigenvalues(f64::ln))
}

/// Exponential of a Hermitian matrix.
pub fn matrix_exp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(eig_hermitian(m)?.map_eigenvalues(f64::exp))
}

/// Kronecker product `a (x) b`; `a` is the more significant factor.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (da, db) = (a.dim(), b.dim());
    let d = da * db;
    if d > MAX_DIM {
        return Err(Error::DimensionMismatch(format!(
            "kron of {da}x{da} and {db}x{db} exceeds {MAX_DIM}"
        )));
    }
    ComplexMatrix::from_fn(d, |i, j| a[(i / db, j / db)] * b[(i % db, j % db)])
}

/// Tensor product of two state vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// One of the three qubits of the tripartite register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Qubit {
    A,
    B,
    C,
}

impl Qubit {
    pub const ALL: [Qubit; 3] = [Qubit::A, Qubit::B, Qubit::C];

    /// Bit position inside a 3-bit basis index (A is bit 2).
    pub fn bit(self) -> usize {
        match self {
            Qubit::A => 2,
            Qubit::B => 1,
            Qubit::C => 0,
        }
    }
}

/// Reduced state of a three-qubit matrix on the qubits in `keep`. The
/// kept qubits retain their relative A, B, C significance.
pub fn partial_trace(m: &ComplexMatrix, keep: &[Qubit]) -> Result<ComplexMatrix> {
    if m.dim() != 8 {
        return Err(Error::DimensionMismatch(format!(
            "partial_trace expects an 8x8 matrix, got {}x{}",
            m.dim(),
            m.dim()
        )));
    }
    let mut kept: Vec<Qubit> = keep.to_vec();
    kept.sort();
    kept.dedup();
    if kept.is_empty() || kept.len() == 3 {
        return Err(Error::InvalidKeepSet);
    }
    let traced: Vec<Qubit> = Qubit::ALL
        .iter()
        .copied()
        .filter(|q| !kept.contains(q))
        .collect();
    let kd = 1usize << kept.len();
    let td = 1usize << traced.len();
    let compose = |k: usize, t: usize| -> usize {
        let mut idx = 0;
        for (pos, q) in kept.iter().enumerate() {
            let bit = (k >> (kept.len() - 1 - pos)) & 1;
            idx |= bit << q.bit();
        }
        for (pos, q) in traced.iter().enumerate() {
            let bit = (t >> (traced.len() - 1 - pos)) & 1;
            idx |= bit << q.bit();
        }
        idx
    };
    let mut out = ComplexMatrix::zeros_unchecked(kd);
    for i in 0..kd {
        for j in 0..kd {
            let mut acc = ZERO;
            for t in 0..td {
                acc += m[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Traces out the right factor of a `dl x dr` bipartite matrix.
pub fn trace_right(m: &ComplexMatrix, dl: usize, dr: usize) -> Result<ComplexMatrix> {
    check_factors(m, &[dl, dr])?;
    let mut out = ComplexMatrix::zeros_unchecked(dl);
    for a in 0..dl {
        for a2 in 0..dl {
            out[(a, a2)] = (0..dr).map(|b| m[(a * dr + b, a2 * dr + b)]).sum();
        }
    }
    Ok(out)
}

/// Traces out the left factor of a `dl x dr` bipartite matrix.
pub fn trace_left(m: &ComplexMatrix, dl: usize, dr: usize) -> Result<ComplexMatrix> {
    check_factors(m, &[dl, dr])?;
    let mut out = ComplexMatrix::zeros_unchecked(dr);
    for b in 0..dr {
        for b2 in 0..dr {
            out[(b, b2)] = (0..dl).map(|a| m[(a * dr + b, a * dr + b2)]).sum();
        }
    }
    Ok(out)
}

fn check_factors(m: &ComplexMatrix, dims: &[usize]) -> Result<()> {
    let product: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) || product != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "factor dimensions {dims:?} do not multiply to {}",
            m.dim()
        )));
    }
    Ok(())
}

/// Transposes factor `subsystem` of a matrix on `dims[0] (x) dims[1] (x) ...`.
pub fn partial_transpose(
    m: &ComplexMatrix,
    subsystem: usize,
    dims: &[usize],
) -> Result<ComplexMatrix> {
    check_factors(m, dims)?;
    if subsystem >= dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "subsystem {subsystem} out of range for {} factors",
            dims.len()
        )));
    }
    let stride: usize = dims[subsystem + 1..].iter().product();
    let d = dims[subsystem];
    let digit = |idx: usize| (idx / stride) % d;
    let n = m.dim();
    let mut out = ComplexMatrix::zeros_unchecked(n);
    for i in 0..n {
        for j in 0..n {
            let (di, dj) = (digit(i), digit(j));
            let i2 = i - di * stride + dj * stride;
            let j2 = j - dj * stride + di * stride;
            out[(i2, j2)] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Relabels qubits: the qubit in slot `k` of the output is qubit
/// `source[k]` of the input.
pub fn permute_qubits(m: &ComplexMatrix, source: [Qubit; 3]) -> Result<ComplexMatrix> {
    if m.dim() != 8 {
        return Err(Error::DimensionMismatch(
            "permute_qubits expects an 8x8 matrix".into(),
        ));
    }
    let mut seen = source.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "{source:?} is not a permutation of A, B, C"
        )));
    }
    let map = |out_idx: usize| -> usize {
        let mut idx = 0;
        for (slot, q) in Qubit::ALL.iter().enumerate() {
            let bit = (out_idx >> q.bit()) & 1;
            idx |= bit << source[slot].bit();
        }
        idx
    };
    ComplexMatrix::from_fn(8, |i, j| m[(map(i), map(j))])
}

/// Pauli matrices and single-qubit helpers.
pub mod pauli {
    use super::*;

    pub fn identity() -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&[1.0, 1.0]).expect("2x2")
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_row_major(&[ZERO, ONE, ONE, ZERO]).expect("2x2")
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&[1.0, -1.0]).expect("2x2")
    }

    /// `sigma_z` acting on one qubit of the three-qubit register.
    pub fn z_on(q: Qubit) -> ComplexMatrix {
        let mut factors = [identity(), identity(), identity()];
        factors[2 - q.bit()] = z();
        let ab = kron(&factors[0], &factors[1]).expect("4x4");
        kron(&ab, &factors[2]).expect("8x8")
    }
}
