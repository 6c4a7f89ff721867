//! Maximum of `‖L·diag(d)·R‖` over all 0/1 vectors `d`.
//!
//! The product is linear in `d`, so walking the corners in Gray-code order
//! changes it by one rank-1 term per step. The high bits are fixed per
//! block and each block restarts from a freshly built product, which keeps
//! rounding drift bounded and gives independent work items.

use crate::error::Result;
use crate::linalg::{norm, Matrix, NormKind};
use crate::par::{map_indexed, Execution};

const INNER_BITS: usize = 12;

fn fast_norm(data: &[f64], rows: usize, cols: usize, p: NormKind) -> Result<f64> {
    Ok(match p {
        NormKind::Linf => data.chunks(cols).map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max),
        NormKind::L1 => {
            let mut sums = vec![0.0; cols];
            for r in data.chunks(cols) {
                sums.iter_mut().zip(r).for_each(|(s, v)| *s += v.abs());
            }
            sums.into_iter().fold(0.0, f64::max)
        }
        NormKind::L2 => norm(&Matrix::new(rows, cols, data.to_vec())?, p)?,
    })
}

fn add_outer(acc: &mut [f64], l: &Matrix, r: &Matrix, k: usize, sign: f64) {
    let cols = r.cols();
    let rk = r.row(k);
    for i in 0..l.rows() {
        let a = sign * l.get(i, k);
        if a == 0.0 {
            continue;
        }
        for (o, &b) in acc[i * cols..(i + 1) * cols].iter_mut().zip(rk) {
            *o += a * b;
        }
    }
}

/// `max_d ‖L·diag(d)·R‖` over `d ∈ {0,1}^w`, `w = L.cols() = R.rows()`.
pub fn corner_max(l: &Matrix, r: &Matrix, p: NormKind, exec: Execution) -> Result<f64> {
    let w = l.cols();
    debug_assert_eq!(w, r.rows());
    let inner = w.min(INNER_BITS);
    let outer = w - inner;
    let (rows, cols) = (l.rows(), r.cols());
    let results = map_indexed(exec, 1usize << outer, |hi| -> Result<f64> {
        let mut acc = vec![0.0; rows * cols];
        for b in 0..outer {
            if hi >> b & 1 == 1 {
                add_outer(&mut acc, l, r, inner + b, 1.0);
            }
        }
        let mut best = fast_norm(&acc, rows, cols, p)?;
        let mut gray = 0usize;
        for i in 1..1usize << inner {
            let bit = i.trailing_zeros() as usize;
            gray ^= 1 << bit;
            let sign = if gray >> bit & 1 == 1 { 1.0 } else { -1.0 };
            add_outer(&mut acc, l, r, bit, sign);
            best = best.max(fast_norm(&acc, rows, cols, p)?);
        }
        Ok(best)
    });
    results.into_iter().try_fold(0.0, |m, v| Ok(f64::max(m, v?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn naive(l: &Matrix, r: &Matrix, p: NormKind) -> f64 {
        let w = l.cols();
        (0..1usize << w)
            .map(|m| {
                let d: Vec<f64> = (0..w).map(|k| (m >> k & 1) as f64).collect();
                norm(&l.matmul(&Matrix::from_diag(&d)).unwrap().matmul(r).unwrap(), p).unwrap()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn matches_naive_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for w in [1, 3, 7, 13] {
            let l = Matrix::from_fn(3, w, |_, _| StandardNormal.sample(&mut rng));
            let r = Matrix::from_fn(w, 4, |_, _| StandardNormal.sample(&mut rng));
            for p in [NormKind::L1, NormKind::Linf, NormKind::L2] {
                let fast = corner_max(&l, &r, p, Execution::Parallel).unwrap();
                let slow = naive(&l, &r, p);
                assert!((fast - slow).abs() <= 1e-9 * slow, "w={w} {p}: {fast} vs {slow}");
            }
        }
    }
}
