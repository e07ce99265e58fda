//! Small dense linear algebra kernels: a row-major square matrix, power
//! iteration for the top singular value, cyclic Jacobi for symmetric
//! spectra, and Gaussian elimination with partial pivoting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense square matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows, rejecting ragged or non-square input.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n.max(1)).take(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    /// `M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        self.rows().map(|row| dot(row, x)).collect()
    }

    /// `Mᵀ x` without materializing the transpose.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut out = vec![0.0; self.n];
        for (row, &xi) in self.rows().zip(x) {
            if xi != 0.0 {
                for (o, &m) in out.iter_mut().zip(row) {
                    *o += m * xi;
                }
            }
        }
        out
    }

    /// `c0·I + c1·(M + Mᵀ)`, used for Hessians and welfare systems.
    pub fn shifted_symmetric_part(&self, c0: f64, c1: f64) -> Self {
        Self::from_fn(self.n, |i, j| {
            let diag = if i == j { c0 } else { 0.0 };
            diag + c1 * (self[(i, j)] + self[(j, i)])
        })
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 100_000;

/// Largest singular value by power iteration on `MᵀM`.
///
/// Starts from the normalized all-ones vector. If that start lies in the
/// null space, one restart is made from the column of largest norm with the
/// ones direction projected out; a second zero quotient means `M = 0`.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    let n = m.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut restarted = false;
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITERS {
        let w = m.mul_vec(&v);
        let rq = dot(&w, &w);
        if rq == 0.0 {
            if restarted {
                return Ok(0.0);
            }
            restarted = true;
            v = orthogonal_restart(m, &v);
            if norm2(&v) == 0.0 {
                return Ok(0.0);
            }
            prev = f64::NAN;
            continue;
        }
        let y = m.tr_mul_vec(&w);
        let ny = norm2(&y);
        if (rq - prev).abs() <= POWER_TOL * rq {
            return Ok(rq.sqrt());
        }
        prev = rq;
        v = y.into_iter().map(|x| x / ny).collect();
    }
    Err(Error::numeric(
        "power iteration did not converge",
        prev.max(0.0).sqrt(),
    ))
}

fn orthogonal_restart(m: &Matrix, previous: &[f64]) -> Vec<f64> {
    let n = m.dim();
    let col_norm = |j: usize| (0..n).map(|i| m[(i, j)] * m[(i, j)]).sum::<f64>();
    let best = (0..n)
        .max_by(|&a, &b| col_norm(a).total_cmp(&col_norm(b)))
        .unwrap_or(0);
    let mut v = vec![0.0; n];
    v[best] = 1.0;
    let proj = dot(&v, previous);
    for (vi, pi) in v.iter_mut().zip(previous) {
        *vi -= proj * pi;
    }
    let nv = norm2(&v);
    if nv > 0.0 {
        v.iter_mut().for_each(|x| *x /= nv);
    }
    v
}

/// Spectrum of a symmetric matrix, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSpectrum {
    pub values: Vec<f64>,
    pub sweeps: usize,
}

impl SymmetricSpectrum {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Largest eigenvalue magnitude, i.e. the spectral norm of the matrix.
    pub fn abs_max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigs(m: &Matrix) -> Result<SymmetricSpectrum> {
    let n = m.dim();
    let scale = m.frobenius_norm();
    if !m.is_symmetric(SYMMETRY_TOL * scale.max(1.0)) {
        return Err(Error::Precondition("matrix is not symmetric".into()));
    }
    let mut a = m.clone();
    let off = |a: &Matrix| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) > JACOBI_TOL * scale {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::numeric("Jacobi sweeps exhausted", off(&a)));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut values: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    values.sort_by(f64::total_cmp);
    Ok(SymmetricSpectrum { values, sweeps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub x: Vec<f64>,
    /// `‖A x − b‖∞` evaluated against the original system.
    pub residual_inf: f64,
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<LinearSolution> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::invalid(format!(
            "right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale = a.inf_norm().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[(r, col)].abs().total_cmp(&m[(s, col)].abs()))
            .unwrap_or(col);
        if m[(pivot, col)].abs() <= 1e-14 * scale {
            return Err(Error::numeric(
                format!("singular matrix at column {}", col + 1),
                m[(pivot, col)],
            ));
        }
        if pivot != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(pivot, k)];
                m[(pivot, k)] = tmp;
            }
            rhs.swap(col, pivot);
        }
        let d = m[(col, col)];
        for r in col + 1..n {
            let f = m[(r, col)] / d;
            if f == 0.0 {
                continue;
            }
            m[(r, col)] = 0.0;
            for k in col + 1..n {
                m[(r, k)] -= f * m[(col, k)];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| m[(r, k)] * x[k]).sum();
        x[r] = (rhs[r] - tail) / m[(r, r)];
    }
    let ax = a.mul_vec(&x);
    let residual_inf = ax
        .iter()
        .zip(b)
        .fold(0.0, |acc: f64, (l, r)| acc.max((l - r).abs()));
    Ok(LinearSolution { x, residual_inf })
}
