use std::fmt;

use rand::Rng;

use crate::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor2D[{}x{}]", self.rows, self.cols)?;
        if self.data.len() <= 32 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2D {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor2D {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Tensor2D { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Tensor2D {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor2D::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Entries drawn uniformly from `[-bound, bound)`.
    pub fn uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, bound: f64) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Tensor2D { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2D {
        Tensor2D {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor2D) -> Result<()> {
        self.check_same(other, "add")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor2D) -> Result<Tensor2D> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Elementwise product summed: `Σ a ⊙ b`.
    pub fn dot(&self, other: &Tensor2D) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Tensor2D {
        let mut t = Tensor2D::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub(crate) fn check_same(&self, other: &Tensor2D, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Tensor2D) -> Result<Tensor2D> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "matmul {:?} · {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Tensor2D::zeros(self.rows, other.cols);
        matmul_into(
            &self.data,
            &other.data,
            &mut out.data,
            self.rows,
            self.cols,
            other.cols,
        );
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Tensor2D) -> Result<Tensor2D> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "t_matmul {:?}ᵀ · {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (m, a, b) = (self.rows, self.cols, other.cols);
        let mut out = Tensor2D::zeros(a, b);
        for r in 0..m {
            let lhs = &self.data[r * a..(r + 1) * a];
            let rhs = &other.data[r * b..(r + 1) * b];
            for (i, &l) in lhs.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * b..(i + 1) * b];
                for (d, &x) in dst.iter_mut().zip(rhs) {
                    *d += l * x;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Tensor2D) -> Result<Tensor2D> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "matmul_t {:?} · {:?}ᵀ",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Tensor2D::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// Rows `start..start + count` as a new tensor.
    pub fn row_block(&self, start: usize, count: usize) -> Tensor2D {
        Tensor2D {
            rows: count,
            cols: self.cols,
            data: self.data[start * self.cols..(start + count) * self.cols].to_vec(),
        }
    }

    /// Side-by-side concatenation.
    pub fn concat_cols(parts: &[&Tensor2D]) -> Result<Tensor2D> {
        let rows = parts.first().map_or(0, |t| t.rows);
        if parts.iter().any(|t| t.rows != rows) {
            return Err(Error::ShapeMismatch(
                "concat_cols: row counts differ".into(),
            ));
        }
        let cols = parts.iter().map(|t| t.cols).sum();
        let mut out = Tensor2D::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for t in parts {
                out.data[r * cols + offset..r * cols + offset + t.cols].copy_from_slice(t.row(r));
                offset += t.cols;
            }
        }
        Ok(out)
    }

    /// Inverse of [`Tensor2D::concat_cols`] for parts of equal width.
    pub fn split_cols(&self, parts: usize) -> Vec<Tensor2D> {
        let width = self.cols / parts;
        (0..parts)
            .map(|p| {
                let mut t = Tensor2D::zeros(self.rows, width);
                for r in 0..self.rows {
                    t.row_mut(r)
                        .copy_from_slice(&self.row(r)[p * width..(p + 1) * width]);
                }
                t
            })
            .collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += a[m×k] · b[k×n]`, i-k-j order so the inner loop is contiguous.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let dst = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (d, &bv) in dst.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *d += av * bv;
            }
        }
    }
}
