//! Dense complex vectors and matrices, plus the generator matrices every
//! waveform in the crate is built from: the forward cyclic shift `Π_N`, the
//! digital frequency shift `Δ_N^k` and the unitary DFT.
//!
//! Storage is row-major. Shapes are fixed at construction; entries may be
//! mutated but nothing can resize a matrix or vector.

use crate::error::{Error, Result};
use crate::scalar::{cis, Real};
use num_complex::Complex;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

/// Absolute tolerance used by every approximate equality check.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Tolerance(f64);

impl Tolerance {
    /// Exact algebraic identities (single products of generator matrices).
    pub const EXACT: Tolerance = Tolerance(1e-10);
    /// Chained products and transform round trips.
    pub const CHAINED: Tolerance = Tolerance(1e-9);

    pub fn new(abs_eps: f64) -> Result<Self> {
        if abs_eps > 0.0 && abs_eps.is_finite() {
            Ok(Tolerance(abs_eps))
        } else {
            Err(Error::Domain(format!("tolerance must be positive, got {abs_eps}")))
        }
    }

    pub fn abs_eps(self) -> f64 {
        self.0
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::EXACT
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CVec<T: Real> {
    data: Vec<Complex<T>>,
}

impl<T: Real> CVec<T> {
    pub fn zeros(n: usize) -> Self {
        CVec { data: vec![Complex::new(T::zero(), T::zero()); n] }
    }

    pub fn from_vec(data: Vec<Complex<T>>) -> Self {
        CVec { data }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> Complex<T>) -> Self {
        CVec { data: (0..n).map(f).collect() }
    }

    /// Unit vector `e_i`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.data[i] = Complex::new(T::one(), T::zero());
        v
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex<T>> {
        self.data.iter()
    }

    pub fn norm_sqr(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, a: Complex<T>) -> Self {
        CVec { data: self.data.iter().map(|z| *z * a).collect() }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "length mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm().to_f64_lossy())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: Tolerance) -> bool {
        self.len() == other.len() && self.max_abs_diff(other) <= tol.abs_eps()
    }
}

impl<T: Real> Index<usize> for CVec<T> {
    type Output = Complex<T>;
    fn index(&self, i: usize) -> &Complex<T> {
        &self.data[i]
    }
}

impl<T: Real> IndexMut<usize> for CVec<T> {
    fn index_mut(&mut self, i: usize) -> &mut Complex<T> {
        &mut self.data[i]
    }
}

impl<T: Real> Add for &CVec<T> {
    type Output = CVec<T>;
    fn add(self, rhs: &CVec<T>) -> CVec<T> {
        assert_eq!(self.len(), rhs.len(), "length mismatch");
        CVec { data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect() }
    }
}

impl<T: Real> Sub for &CVec<T> {
    type Output = CVec<T>;
    fn sub(self, rhs: &CVec<T>) -> CVec<T> {
        assert_eq!(self.len(), rhs.len(), "length mismatch");
        CVec { data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CMat<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, found: data.len() });
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn from_diag(diag: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
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

    pub fn row(&self, r: usize) -> &[Complex<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn column(&self, c: usize) -> CVec<T> {
        CVec::from_fn(self.rows, |r| self[(r, c)])
    }

    pub fn adjoint(&self) -> Self {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, a: Complex<T>) -> Self {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| *z * a).collect() }
    }

    pub fn mul_vec(&self, x: &CVec<T>) -> CVec<T> {
        assert_eq!(self.cols, x.len(), "matrix-vector shape mismatch");
        CVec::from_fn(self.rows, |r| {
            self.row(r)
                .iter()
                .zip(x.iter())
                .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * *b)
        })
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let orow = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for (k, a) in self.row(r).iter().enumerate() {
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for (o, b) in orow.iter_mut().zip(rhs.row(k)) {
                    *o += *a * *b;
                }
            }
        }
        out
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        CMat::from_fn(self.rows * rhs.rows, self.cols * rhs.cols, |r, c| {
            self[(r / rhs.rows, c / rhs.cols)] * rhs[(r % rhs.rows, c % rhs.cols)]
        })
    }

    /// Stack matrices with equal column count on top of each other.
    pub fn vstack(blocks: &[CMat<T>]) -> Result<Self> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for b in blocks {
            if b.cols != cols {
                return Err(Error::Dimension { expected: cols, found: b.cols });
            }
            rows += b.rows;
            data.extend_from_slice(&b.data);
        }
        Ok(CMat { rows, cols, data })
    }

    /// Keep only the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        CMat::from_fn(self.rows, cols.len(), |r, c| self[(r, cols[c])])
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm().to_f64_lossy())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: Tolerance) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols) && self.max_abs_diff(other) <= tol.abs_eps()
    }

    /// `self · selfᴴ = I` within `tol`.
    pub fn is_unitary(&self, tol: Tolerance) -> bool {
        self.is_square() && self.matmul(&self.adjoint()).approx_eq(&CMat::identity(self.rows), tol)
    }

    /// Number of entries with magnitude above `eps`.
    pub fn count_nonzero(&self, eps: f64) -> usize {
        self.data.iter().filter(|z| z.norm().to_f64_lossy() > eps).count()
    }

    pub fn row_nonzeros(&self, r: usize, eps: f64) -> Vec<usize> {
        self.row(r)
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm().to_f64_lossy() > eps)
            .map(|(c, _)| c)
            .collect()
    }

    pub fn map<U: Real>(&self, f: impl Fn(Complex<T>) -> Complex<U>) -> CMat<U> {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| f(*z)).collect() }
    }
}

impl<T: Real> Index<(usize, usize)> for CMat<T> {
    type Output = Complex<T>;
    fn index(&self, (r, c): (usize, usize)) -> &Complex<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for CMat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Real> Mul for &CMat<T> {
    type Output = CMat<T>;
    fn mul(self, rhs: &CMat<T>) -> CMat<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> Mul<&CVec<T>> for &CMat<T> {
    type Output = CVec<T>;
    fn mul(self, rhs: &CVec<T>) -> CVec<T> {
        self.mul_vec(rhs)
    }
}

impl<T: Real> Add for &CMat<T> {
    type Output = CMat<T>;
    fn add(self, rhs: &CMat<T>) -> CMat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<T: Real> Sub for &CMat<T> {
    type Output = CMat<T>;
    fn sub(self, rhs: &CMat<T>) -> CMat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::Domain("matrix size N must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `Π_N^p`: maps `e_n` to `e_{(n+p) mod N}`. Any integer `p` is accepted.
pub fn forward_cyclic_shift<T: Real>(n: usize, p: i64) -> Result<CMat<T>> {
    check_size(n)?;
    let p = crate::scalar::wrap(p, n);
    let mut m = CMat::zeros(n, n);
    for c in 0..n {
        m[((c + p) % n, c)] = Complex::new(T::one(), T::zero());
    }
    Ok(m)
}

/// `Δ_N^k = diag(e^{j2πkn/N})`; `k` may be fractional.
pub fn doppler_shift<T: Real>(n: usize, k: f64) -> Result<CMat<T>> {
    check_size(n)?;
    let diag: Vec<Complex<T>> = (0..n).map(|i| doppler_phase(n, k, i)).collect();
    Ok(CMat::from_diag(&diag))
}

/// Diagonal entry `n` of `Δ_N^k`.
pub fn doppler_phase<T: Real>(n: usize, k: f64, idx: usize) -> Complex<T> {
    if k.fract() == 0.0 {
        cis(crate::scalar::ratio_turns(k as i64, idx as i64, n as i64))
    } else {
        cis(k * idx as f64 / n as f64)
    }
}

/// Unitary DFT with entries `e^{-j2πmn/N}/√N`.
pub fn dft_matrix<T: Real>(n: usize) -> Result<CMat<T>> {
    check_size(n)?;
    let scale = T::from_f64_lossy(1.0 / (n as f64).sqrt());
    Ok(CMat::from_fn(n, n, |m, k| {
        cis::<T>(-crate::scalar::ratio_turns(m as i64, k as i64, n as i64)) * scale
    }))
}
