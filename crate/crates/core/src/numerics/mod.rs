//! Small dense complex linear algebra and seeded sampling.
//!
//! Everything here targets the tiny dimensions of a downlink with a handful
//! of antennas (at most 8 per side), so all routines are direct and dense.

mod linalg;
mod sampling;

pub use linalg::{
    cholesky, cholesky_solve, generalized_rayleigh_max, hermitian_largest_eigenpair,
    HERMITIAN_TOL,
};
pub use sampling::{complex_gaussian, sample_complex_gaussian, stream_id, SeedSpec};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A complex column vector of dimension at least one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CVec(Vec<C64>);

impl CVec {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDimension(0));
        }
        if let Some(pos) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(CVec(entries))
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "vector dimension must be positive");
        CVec(vec![C64::new(0.0, 0.0); dim])
    }

    /// Canonical basis vector `e_index` (zero-based).
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = C64::new(1.0, 0.0);
        v
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<C64>) -> Self {
        debug_assert!(!entries.is_empty());
        CVec(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn norm1(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, factor: C64) -> CVec {
        CVec(self.0.iter().map(|z| z * factor).collect())
    }

    pub fn scale_real(&self, factor: f64) -> CVec {
        CVec(self.0.iter().map(|z| z * factor).collect())
    }

    /// Unit-norm copy, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<CVec> {
        let n = self.norm2();
        if n == 0.0 {
            None
        } else {
            Some(self.scale_real(1.0 / n))
        }
    }

    pub fn sub(&self, other: &CVec) -> Result<CVec> {
        check_dims(self.dim(), other.dim())?;
        Ok(CVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// Rotates the vector so its largest-magnitude entry is real and positive.
    pub fn phase_normalized(&self) -> CVec {
        let mut best = 0;
        for (i, z) in self.0.iter().enumerate() {
            if z.norm() > self.0[best].norm() + 1e-12 {
                best = i;
            }
        }
        let pivot = self.0[best];
        if pivot.norm() == 0.0 {
            return self.clone();
        }
        self.scale(pivot.conj() / pivot.norm())
    }
}

impl std::ops::Index<usize> for CVec {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

/// Dense complex matrix in row-major layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::EmptyDimension(rows));
        }
        if cols == 0 {
            return Err(Error::EmptyDimension(cols));
        }
        check_dims(rows * cols, data.len())?;
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn from_rows(rows: &[CVec]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDimension(0))?;
        let cols = first.dim();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dims(cols, r.dim())?;
            data.extend_from_slice(r.as_slice());
        }
        Ok(CMat { rows: rows.len(), cols, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<CVec> = rows.iter().map(|r| CVec::from_real(r)).collect::<Result<_>>()?;
        Self::from_rows(&rows)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1);
        CMat { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = C64::new(v, 0.0);
        }
        m
    }

    /// Rank-one outer product `a b^H`.
    pub fn outer(a: &CVec, b: &CVec) -> Self {
        let (rows, cols) = (a.dim(), b.dim());
        let mut data = Vec::with_capacity(rows * cols);
        for x in a.as_slice() {
            for y in b.as_slice() {
                data.push(x * y.conj());
            }
        }
        CMat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> CVec {
        CVec(self.data[i * self.cols..(i + 1) * self.cols].to_vec())
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &CVec) -> Result<CVec> {
        check_dims(self.cols, x.dim())?;
        Ok(CVec(self.mul_slice(x.as_slice())))
    }

    pub(crate) fn mul_slice(&self, x: &[C64]) -> Vec<C64> {
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `self^H u`.
    pub fn adjoint_mul_vec(&self, u: &CVec) -> Result<CVec> {
        check_dims(self.rows, u.dim())?;
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for i in 0..self.rows {
            let ui = u[i];
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.get(i, j).conj() * ui;
            }
        }
        Ok(CVec(out))
    }

    pub fn mul(&self, other: &CMat) -> Result<CMat> {
        check_dims(self.cols, other.rows)?;
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &CMat) -> Result<CMat> {
        check_dims(self.rows, other.rows)?;
        check_dims(self.cols, other.cols)?;
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale_real(&self, factor: f64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * factor).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Largest entry-wise modulus of `self - self^H`; infinite for non-square input.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `(A + A^H) / 2`.
    pub fn symmetrized(&self) -> CMat {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, (self.get(i, j) + self.get(j, i).conj()) * 0.5);
            }
        }
        out
    }
}

/// `a^H b`, conjugating the first argument.
pub fn inner(a: &CVec, b: &CVec) -> Result<C64> {
    check_dims(a.dim(), b.dim())?;
    Ok(inner_slice(a.as_slice(), b.as_slice()))
}

/// `|<a, b>|^2`.
pub fn gain(a: &CVec, b: &CVec) -> Result<f64> {
    inner(a, b).map(|z| z.norm_sqr())
}

#[inline]
pub(crate) fn inner_slice(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub(crate) fn gain_slice(a: &[C64], b: &[C64]) -> f64 {
    inner_slice(a, b).norm_sqr()
}

fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn real_norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn real_norm_inf(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn real_norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
