use super::{norm, Matrix, NormKind};
use crate::error::{Error, Result};
use crate::par::{map_indexed_init, Execution};

/// Compressed sparse row matrix.
///
/// Lowered convolution and pooling layers are mostly zeros, and so are the
/// partial products of a few of them; the bound engines keep them in this
/// form and only densify small matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { rows: m.rows(), cols: m.cols(), indptr, indices, values }
    }

    /// Builds from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch(format!("matrix must be nonempty, got {rows}x{cols}")));
        }
        if let Some(&(r, c, _)) = entries.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return Err(Error::ShapeMismatch(format!("entry ({r},{c}) outside {rows}x{cols}")));
        }
        if entries.iter().any(|e| !e.2.is_finite()) {
            return Err(Error::NonFinite);
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; rows + 1];
        let mut indices: Vec<usize> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            indices.push(c);
            values.push(v);
            indptr[r + 1] = indices.len();
        }
        for r in 0..rows {
            indptr[r + 1] = indptr[r + 1].max(indptr[r]);
        }
        Ok(CsrMatrix { rows, cols, indptr, indices, values })
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m.set(i, j, v);
            }
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

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero entries `(col, value)` of row `i`, in column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn abs(&self) -> CsrMatrix {
        CsrMatrix { values: self.values.iter().map(|v| v.abs()).collect(), ..self.clone() }
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        CsrMatrix { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        CsrMatrix { rows: self.cols, cols: self.rows, indptr: counts, indices, values }
    }

    /// `self · other`, rows computed independently (Gustavson).
    pub fn matmul(&self, other: &CsrMatrix, exec: Execution) -> Result<CsrMatrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let n = other.cols;
        let rows: Vec<(Vec<usize>, Vec<f64>)> = map_indexed_init(
            exec,
            self.rows,
            || (vec![0.0; n], vec![false; n]),
            |(acc, seen), i| {
                let mut touched = Vec::new();
                for (k, a) in self.row(i) {
                    for (j, b) in other.row(k) {
                        if !seen[j] {
                            seen[j] = true;
                            touched.push(j);
                        }
                        acc[j] += a * b;
                    }
                }
                touched.sort_unstable();
                let mut idx = Vec::with_capacity(touched.len());
                let mut val = Vec::with_capacity(touched.len());
                for j in touched {
                    if acc[j] != 0.0 {
                        idx.push(j);
                        val.push(acc[j]);
                    }
                    acc[j] = 0.0;
                    seen[j] = false;
                }
                (idx, val)
            },
        );
        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0);
        let total: usize = rows.iter().map(|r| r.0.len()).sum();
        let mut indices = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        for (idx, val) in rows {
            indices.extend(idx);
            values.extend(val);
            indptr.push(indices.len());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(CsrMatrix { rows: self.rows, cols: n, indptr, indices, values })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `|self| · x`.
    pub fn abs_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).map(|(j, v)| v.abs() * x[j]).sum()).collect()
    }

    /// `uᵀ · |self|`, returned as a vector of length `cols`.
    pub fn abs_vecmat(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += ui * v.abs();
            }
        }
        out
    }

    pub fn norm(&self, p: NormKind) -> Result<f64> {
        match p {
            NormKind::Linf => Ok((0..self.rows)
                .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)),
            NormKind::L1 => Ok(self.abs_vecmat(&vec![1.0; self.rows]).into_iter().fold(0.0, f64::max)),
            NormKind::L2 => norm(&self.to_dense(), NormKind::L2),
        }
    }
}
