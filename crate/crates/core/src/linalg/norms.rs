use super::Matrix;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// The induced operator norms supported by the bound engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        }
    }

    /// True for the norms in which `‖A‖ = ‖|A|‖` holds.
    pub fn is_abs_invariant(self) -> bool {
        matches!(self, NormKind::L1 | NormKind::Linf)
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "1" => Ok(NormKind::L1),
            "l2" | "2" => Ok(NormKind::L2),
            "linf" | "inf" | "l_inf" => Ok(NormKind::Linf),
            other => Err(Error::Parse(format!("unknown norm `{other}` (expected l1, l2 or linf)"))),
        }
    }
}

/// Induced norm of `m`.
pub fn norm(m: &Matrix, p: NormKind) -> Result<f64> {
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(match p {
        NormKind::L1 => max_col_sum(m),
        NormKind::Linf => max_row_sum(m),
        NormKind::L2 => spectral_norm(m)?,
    })
}

pub fn abs_matrix(m: &Matrix) -> Matrix {
    m.abs()
}

fn max_row_sum(m: &Matrix) -> f64 {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn max_col_sum(m: &Matrix) -> f64 {
    let mut sums = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (s, v) in sums.iter_mut().zip(m.row(i)) {
            *s += v.abs();
        }
    }
    sums.into_iter().fold(0.0, f64::max)
}

// Power iteration on the smaller Gram matrix. The all-ones start is
// followed by a second fixed start so that a Gram matrix whose top
// eigenvector is orthogonal to 𝟙 is still handled.
fn spectral_norm(m: &Matrix) -> Result<f64> {
    let g = if m.rows() >= m.cols() {
        m.transpose().matmul(m)?
    } else {
        m.matmul(&m.transpose())?
    };
    let n = g.rows();
    let ones = vec![1.0; n];
    let alt: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).cos() + 1.5).collect();
    let a = top_eigenvalue(&g, ones)?;
    let b = top_eigenvalue(&g, alt)?;
    Ok(a.max(b).max(0.0).sqrt())
}

fn top_eigenvalue(g: &Matrix, mut v: Vec<f64>) -> Result<f64> {
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = g.matvec(&v)?;
        let next: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if wn == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|x| x / wn).collect();
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::NoConvergence { what: "power iteration", iterations: POWER_MAX_ITER })
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counterexample() -> Matrix {
        Matrix::from_rows(&[[1.0, 1.0], [-1.0, 1.0]]).unwrap()
    }

    #[test]
    fn counterexample_norms() {
        let a = counterexample();
        assert!((norm(&a, NormKind::L2).unwrap() - 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(norm(&a, NormKind::L1).unwrap(), 2.0);
        assert_eq!(norm(&a, NormKind::Linf).unwrap(), 2.0);
        assert!((norm(&abs_matrix(&a), NormKind::L2).unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(abs_matrix(&a), Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap());
    }

    #[test]
    fn identity_has_unit_norm() {
        let i = Matrix::identity(5);
        for p in [NormKind::L1, NormKind::L2, NormKind::Linf] {
            assert!((norm(&i, p).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn abs_of_small_cases() {
        let z = Matrix::zeros(2, 3);
        assert_eq!(abs_matrix(&z), z);
        assert_eq!(abs_matrix(&Matrix::from_rows(&[[-3.0]]).unwrap()).data(), &[3.0]);
    }

    #[test]
    fn top_vector_orthogonal_to_ones() {
        // The Gram matrix has 𝟙 in its kernel.
        let a = Matrix::from_rows(&[[1.0, -1.0], [1.0, -1.0]]).unwrap();
        assert!((norm(&a, NormKind::L2).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn wide_and_tall_agree() {
        let a = Matrix::from_rows(&[[3.0, 0.0, 1.0], [0.0, -2.0, 0.5]]).unwrap();
        let n1 = norm(&a, NormKind::L2).unwrap();
        let n2 = norm(&a.transpose(), NormKind::L2).unwrap();
        assert!((n1 - n2).abs() < 1e-9 * n1);
    }

    #[test]
    fn parses_norm_names() {
        assert_eq!("linf".parse::<NormKind>().unwrap(), NormKind::Linf);
        assert_eq!("L1".parse::<NormKind>().unwrap(), NormKind::L1);
        assert!("l3".parse::<NormKind>().is_err());
    }
}
