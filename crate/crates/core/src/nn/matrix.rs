use std::ops::{Index, IndexMut};

use rand::Rng;

use crate::nn::NnError;
use crate::scalar::Scalar;

/// Inputs at most this dense (and at least this large) skip the dense kernel.
const SPARSE_DENSITY: f64 = 0.25;
const SPARSE_MIN_LEN: usize = 4096;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::ShapeMismatch(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, NnError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NnError::ShapeMismatch("ragged rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn row_vector(v: Vec<T>) -> Self {
        Self { rows: 1, cols: v.len(), data: v }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Entries drawn uniformly from `[-limit, limit]`.
    pub fn uniform<R: Rng>(rows: usize, cols: usize, limit: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| T::from_f64_lossy(rng.gen_range(-limit..=limit))).collect();
        Self { rows, cols, data }
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self, NnError> {
        if self.cols != other.rows {
            return Err(shape_err("matmul", self, other));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        T::gemm(
            self.rows,
            self.cols,
            other.cols,
            T::one(),
            &self.data,
            self.cols as isize,
            1,
            &other.data,
            other.cols as isize,
            1,
            T::zero(),
            &mut out.data,
            other.cols as isize,
            1,
        );
        Ok(out)
    }

    /// Fraction of non-zero entries.
    pub fn density(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().filter(|x| !x.is_zero()).count() as f64 / self.data.len() as f64
    }

    fn mostly_zero(&self) -> bool {
        self.data.len() >= SPARSE_MIN_LEN && self.density() <= SPARSE_DENSITY
    }

    /// `self * otherᵀ`.
    pub fn matmul_t(&self, other: &Self) -> Result<Self, NnError> {
        if self.cols != other.cols {
            return Err(shape_err("matmul_t", self, other));
        }
        if self.mostly_zero() {
            // hashed text features: walk the non-zeros against rows of otherᵀ
            let ot = other.transpose();
            let mut out = Self::zeros(self.rows, other.rows);
            for (x, y) in self.data.chunks(self.cols.max(1)).zip(out.data.chunks_mut(other.rows.max(1))) {
                for (k, &v) in x.iter().enumerate() {
                    if !v.is_zero() {
                        y.iter_mut().zip(ot.row(k)).for_each(|(o, &w)| *o += v * w);
                    }
                }
            }
            return Ok(out);
        }
        let mut out = Self::zeros(self.rows, other.rows);
        T::gemm(
            self.rows,
            self.cols,
            other.rows,
            T::one(),
            &self.data,
            self.cols as isize,
            1,
            &other.data,
            1,
            other.cols as isize,
            T::zero(),
            &mut out.data,
            other.rows as isize,
            1,
        );
        Ok(out)
    }

    /// `acc += selfᵀ * other`.
    pub fn t_matmul_acc(&self, other: &Self, acc: &mut Self) -> Result<(), NnError> {
        if self.rows != other.rows || acc.rows != self.cols || acc.cols != other.cols {
            return Err(shape_err("t_matmul_acc", self, other));
        }
        if other.mostly_zero() {
            let mut acc_t = Self::zeros(other.cols, self.cols);
            for (g, x) in self.data.chunks(self.cols.max(1)).zip(other.data.chunks(other.cols.max(1))) {
                for (k, &v) in x.iter().enumerate() {
                    if !v.is_zero() {
                        acc_t.row_mut(k).iter_mut().zip(g).for_each(|(o, &u)| *o += v * u);
                    }
                }
            }
            for i in 0..acc.rows {
                for j in 0..acc.cols {
                    acc.data[i * acc.cols + j] += acc_t.data[j * acc_t.cols + i];
                }
            }
            return Ok(());
        }
        T::gemm(
            self.cols,
            self.rows,
            other.cols,
            T::one(),
            &self.data,
            1,
            self.cols as isize,
            &other.data,
            other.cols as isize,
            1,
            T::one(),
            &mut acc.data,
            acc.cols as isize,
            1,
        );
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<(), NnError> {
        if self.shape() != other.shape() {
            return Err(shape_err("add_assign", self, other));
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, &b)| *a += b);
        Ok(())
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// Adds `bias` to every row.
    pub fn add_row(&mut self, bias: &[T]) -> Result<(), NnError> {
        if bias.len() != self.cols {
            return Err(NnError::ShapeMismatch(format!("bias of {} for {} columns", bias.len(), self.cols)));
        }
        for r in self.data.chunks_mut(self.cols.max(1)) {
            r.iter_mut().zip(bias).for_each(|(a, &b)| *a += b);
        }
        Ok(())
    }

    /// Column sums accumulated into `acc`.
    pub fn col_sums_acc(&self, acc: &mut [T]) {
        for r in self.data.chunks(self.cols.max(1)) {
            acc.iter_mut().zip(r).for_each(|(a, &b)| *a += b);
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

fn shape_err<T: Scalar>(op: &str, a: &Matrix<T>, b: &Matrix<T>) -> NnError {
    NnError::ShapeMismatch(format!("{op}: {}x{} vs {}x{}", a.rows, a.cols, b.rows, b.cols))
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}
