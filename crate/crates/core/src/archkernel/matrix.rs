//! Dense row-major matrices over f64.
//!
//! Small and dependency-free on purpose: the architecture kernel needs
//! multiply, transpose, row concatenation/slicing, and nothing more. Every
//! constructor rejects non-finite entries, so numerical blowups surface at
//! the operation that produced them.

use super::KernelError;
use crate::metrics::emb1;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Wrap row-major data. Both dimensions must be at least 1 and every
    /// entry finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, KernelError> {
        if rows == 0 || cols == 0 {
            return Err(KernelError::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(KernelError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite {
                row: i / cols,
                col: i % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, KernelError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(KernelError::Dimension(
                "rows have unequal lengths".to_string(),
            ));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self, KernelError> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self, KernelError> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    /// Uniform entries in [-1, 1).
    pub fn random(rows: usize, cols: usize, rng: &mut SplitMix64) -> Result<Self, KernelError> {
        let data = (0..rows * cols).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        assert!(row < self.rows, "row out of bounds");
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, KernelError> {
        if self.cols != other.rows {
            return Err(KernelError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Matrix::new(self.rows, other.cols, data)
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, KernelError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(KernelError::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix::new(self.rows, self.cols, data)
    }

    /// Stack matrices vertically; all must share a column count.
    pub fn concat_rows(parts: &[&Matrix]) -> Result<Matrix, KernelError> {
        let Some(first) = parts.first() else {
            return Err(KernelError::EmptyMatrix);
        };
        let cols = first.cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for part in parts {
            if part.cols != cols {
                return Err(KernelError::Dimension(format!(
                    "cannot stack {} columns onto {} columns",
                    part.cols, cols
                )));
            }
            data.extend_from_slice(&part.data);
            rows += part.rows;
        }
        Matrix::new(rows, cols, data)
    }

    /// Copy out rows `range.start..range.end`.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Matrix, KernelError> {
        if range.start >= range.end || range.end > self.rows {
            return Err(KernelError::Dimension(format!(
                "row slice {}..{} out of bounds for {} rows",
                range.start, range.end, self.rows
            )));
        }
        let data = self.data[range.start * self.cols..range.end * self.cols].to_vec();
        Matrix::new(range.end - range.start, self.cols, data)
    }

    /// Horizontal concatenation; all must share a row count.
    pub fn concat_cols(parts: &[&Matrix]) -> Result<Matrix, KernelError> {
        let Some(first) = parts.first() else {
            return Err(KernelError::EmptyMatrix);
        };
        let rows = first.rows;
        for part in parts {
            if part.rows != rows {
                return Err(KernelError::Dimension(format!(
                    "cannot join {} rows beside {} rows",
                    part.rows, rows
                )));
            }
        }
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for part in parts {
                data.extend_from_slice(part.row(r));
            }
        }
        Matrix::new(rows, cols, data)
    }

    /// Decode from the EMB1 fixture layout (frames = rows, dim = cols).
    pub fn from_emb1(bytes: &[u8]) -> Result<Matrix, KernelError> {
        let (rows, cols, data) = emb1::decode_raw(bytes)?;
        Matrix::new(rows, cols, data)
    }

    /// Encode in the EMB1 fixture layout; entries are narrowed to f32.
    pub fn to_emb1(&self) -> Vec<u8> {
        emb1::encode_raw(self.rows, self.cols, &self.data)
    }
}
