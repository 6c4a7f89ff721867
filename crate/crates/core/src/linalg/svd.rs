use super::Matrix;
use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;

/// `m = u · diag(sigma) · vt`, with `diag(sigma)` padded to `m`'s shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub vt: Matrix,
}

impl SvdFactors {
    /// The rectangular Σ with the shape of the decomposed matrix.
    pub fn sigma_matrix(&self) -> Matrix {
        let (r, c) = (self.u.rows(), self.vt.rows());
        Matrix::from_fn(r, c, |i, j| if i == j { self.sigma[i] } else { 0.0 })
    }

    pub fn reconstruct(&self) -> Result<Matrix> {
        self.u.matmul(&self.sigma_matrix())?.matmul(&self.vt)
    }
}

/// Singular value decomposition by one-sided Jacobi rotations.
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m.rows() >= m.cols() {
        let (u, sigma, v) = jacobi_tall(m)?;
        Ok(SvdFactors { u, sigma, vt: v.transpose() })
    } else {
        let (u, sigma, v) = jacobi_tall(&m.transpose())?;
        Ok(SvdFactors { u: v, sigma, vt: u.transpose() })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Requires rows >= cols. Returns (U full, sigma, V).
fn jacobi_tall(a: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { what: "jacobi svd", iterations: MAX_SWEEPS });
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let smax = norms[order[0]];
    let cutoff = smax * 1e-13 * m as f64;

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut ucols: Vec<Option<Vec<f64>>> = order
        .iter()
        .map(|&j| {
            let s = norms[j];
            (s > cutoff && s > 0.0).then(|| cols[j].iter().map(|x| x / s).collect())
        })
        .collect();
    ucols.resize(m, None);
    complete_basis(&mut ucols, m);

    let u = Matrix::from_fn(m, m, |i, k| ucols[k].as_ref().unwrap()[i]);
    let vm = Matrix::from_fn(n, n, |i, k| v[order[k]][i]);
    Ok((u, sigma, vm))
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

// Fills the missing columns with unit vectors orthogonal to the present ones.
fn complete_basis(cols: &mut [Option<Vec<f64>>], m: usize) {
    let mut next = 0;
    for k in 0..cols.len() {
        if cols[k].is_some() {
            continue;
        }
        while next < m {
            let mut x = vec![0.0; m];
            x[next] = 1.0;
            next += 1;
            for _ in 0..2 {
                for c in cols.iter().flatten() {
                    let p = dot(c, &x);
                    x.iter_mut().zip(c).for_each(|(xi, ci)| *xi -= p * ci);
                }
            }
            let nx = dot(&x, &x).sqrt();
            if nx > 1e-6 {
                x.iter_mut().for_each(|xi| *xi /= nx);
                cols[k] = Some(x);
                break;
            }
        }
    }
}
