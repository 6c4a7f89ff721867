use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};
use crate::netmodel::{argmax_in, pool_windows, Pool2d, Shape};

/// Direction of a pairwise max stage. A row stage pairs horizontally
/// adjacent entries (same image row), a column stage vertically adjacent ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageAxis {
    Row,
    Col,
}

/// One pairwise max stage: output `r` is `max(x[pairs[r].0], x[pairs[r].1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxStage {
    pub axis: StageAxis,
    pub m_plus: CsrMatrix,
    pub m_minus: CsrMatrix,
    pub pairs: Vec<(usize, usize)>,
}

impl MaxStage {
    fn new(axis: StageAxis, in_dim: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let plus = pairs.iter().enumerate().flat_map(|(r, &(a, b))| [(r, a, 1.0), (r, b, 1.0)]).collect();
        let minus = pairs.iter().enumerate().flat_map(|(r, &(a, b))| [(r, a, 1.0), (r, b, -1.0)]).collect();
        Ok(MaxStage {
            axis,
            m_plus: CsrMatrix::from_triplets(pairs.len(), in_dim, plus)?,
            m_minus: CsrMatrix::from_triplets(pairs.len(), in_dim, minus)?,
            pairs,
        })
    }

    /// Diagonal of `Z` for input `x`: +1 when the first entry of the pair wins (ties included).
    pub fn signs_at(&self, x: &[f64]) -> Vec<f64> {
        self.pairs.iter().map(|&(a, b)| if x[a] >= x[b] { 1.0 } else { -1.0 }).collect()
    }

    /// `½M⁺ + ½·diag(signs)·M⁻`.
    pub fn with_signs(&self, signs: &[f64]) -> CsrMatrix {
        let entries = self
            .pairs
            .iter()
            .zip(signs)
            .enumerate()
            .flat_map(|(r, (&(a, b), &z))| [(r, a, 0.5 + 0.5 * z), (r, b, 0.5 - 0.5 * z)])
            .filter(|e| e.2 != 0.0)
            .collect();
        CsrMatrix::from_triplets(self.pairs.len(), self.m_plus.cols(), entries).expect("indices in range")
    }

    pub fn selector_at(&self, x: &[f64]) -> CsrMatrix {
        self.with_signs(&self.signs_at(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPoolExplicitBlock {
    pub stages: Vec<MaxStage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPoolImplicitBlock {
    pub ones: CsrMatrix,
    pub window_size: usize,
    pub windows: Vec<Vec<usize>>,
}

impl MaxPoolImplicitBlock {
    /// Window position of each output's argmax (first index on ties).
    pub fn argmax_at(&self, x: &[f64]) -> Vec<usize> {
        self.windows.iter().map(|w| argmax_in(x, w)).collect()
    }

    /// One-hot rows `½𝟙 + ½Z_M` for the given argmax choices.
    pub fn with_choices(&self, choices: &[usize]) -> CsrMatrix {
        let entries = self.windows.iter().zip(choices).enumerate().map(|(r, (w, &k))| (r, w[k], 1.0)).collect();
        CsrMatrix::from_triplets(self.windows.len(), self.ones.cols(), entries).expect("indices in range")
    }

    pub fn selector_at(&self, x: &[f64]) -> CsrMatrix {
        self.with_choices(&self.argmax_at(x))
    }

    fn zm_sparse(&self, x: &[f64]) -> CsrMatrix {
        let entries = self
            .windows
            .iter()
            .enumerate()
            .flat_map(|(r, w)| {
                let k = argmax_in(x, w);
                w.iter().enumerate().map(move |(j, &i)| (r, i, if j == k { 1.0 } else { -1.0 }))
            })
            .collect();
        CsrMatrix::from_triplets(self.windows.len(), self.ones.cols(), entries).expect("indices in range")
    }
}

/// `Z_M` at `x`: +1 at each window's argmax, −1 elsewhere in the window.
pub fn zm_at(block: &MaxPoolImplicitBlock, x: &[f64]) -> Result<Matrix> {
    if x.len() != block.ones.cols() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} values, pool expects {}",
            x.len(),
            block.ones.cols()
        )));
    }
    Ok(block.zm_sparse(x).to_dense())
}

pub fn lower_maxpool_implicit(p: &Pool2d, input: Shape) -> Result<MaxPoolImplicitBlock> {
    let windows = pool_windows(p, input)?;
    let entries = windows
        .iter()
        .enumerate()
        .flat_map(|(r, w)| w.iter().map(move |&i| (r, i, 1.0)))
        .collect();
    Ok(MaxPoolImplicitBlock {
        ones: CsrMatrix::from_triplets(windows.len(), input.len(), entries)?,
        window_size: p.pool.0 * p.pool.1,
        windows,
    })
}

// Positions whose partial maxima are needed at each level, from the final
// strided positions back to level 0: level k covers k+1 consecutive inputs.
fn needed_levels(window: usize, stride: usize, outputs: usize) -> Vec<Vec<usize>> {
    let mut levels = vec![(0..outputs).map(|o| o * stride).collect::<Vec<_>>()];
    for _ in 1..window {
        let prev = levels.last().unwrap();
        let mut next: Vec<usize> = prev.iter().flat_map(|&p| [p, p + 1]).collect();
        next.sort_unstable();
        next.dedup();
        levels.push(next);
    }
    levels.reverse();
    levels
}

/// Splits a max-pool into `pw−1` row stages followed by `ph−1` column
/// stages of stride-1 pairwise maxima, evaluated only where needed.
pub fn lower_maxpool_explicit(p: &Pool2d, input: Shape) -> Result<MaxPoolExplicitBlock> {
    let (h, w, c) = match input {
        Shape::Image { h, w, c } => (h, w, c),
        Shape::Flat(_) => return Err(Error::ShapeMismatch("maxpool2d needs an image input".into())),
    };
    let (oh, ow) = p.output(h, w)?;
    let ((ph, pw), (sh, sw)) = (p.pool, p.stride);
    let cols = needed_levels(pw, sw, ow);
    let rows = needed_levels(ph, sh, oh);

    // Current state: values at (ys × xs × channels), row-major.
    let mut ys: Vec<usize> = (0..h).collect();
    let mut xs: Vec<usize> = (0..w).collect();
    let index = |ys: &[usize], xs: &[usize], y: usize, x: usize, ch: usize| -> usize {
        let yi = ys.binary_search(&y).expect("needed row present");
        let xi = xs.binary_search(&x).expect("needed column present");
        (yi * xs.len() + xi) * c + ch
    };
    let mut stages = Vec::new();
    for level in cols.iter().skip(1) {
        let new_ys = rows[0].clone();
        let mut pairs = Vec::with_capacity(new_ys.len() * level.len() * c);
        for &y in &new_ys {
            for &x in level {
                for ch in 0..c {
                    pairs.push((index(&ys, &xs, y, x, ch), index(&ys, &xs, y, x + 1, ch)));
                }
            }
        }
        stages.push(MaxStage::new(StageAxis::Row, ys.len() * xs.len() * c, pairs)?);
        ys = new_ys;
        xs = level.clone();
    }
    for level in rows.iter().skip(1) {
        let new_xs = cols.last().unwrap().clone();
        let mut pairs = Vec::with_capacity(level.len() * new_xs.len() * c);
        for &y in level {
            for &x in &new_xs {
                for ch in 0..c {
                    pairs.push((index(&ys, &xs, y, x, ch), index(&ys, &xs, y + 1, x, ch)));
                }
            }
        }
        stages.push(MaxStage::new(StageAxis::Col, ys.len() * xs.len() * c, pairs)?);
        ys = level.clone();
        xs = new_xs;
    }
    Ok(MaxPoolExplicitBlock { stages })
}

#[cfg(test)]
mod tests {
    use super::*;

    const S33: Shape = Shape::Image { h: 3, w: 3, c: 1 };

    #[test]
    fn stride_one_stages_match_reference_matrices() {
        let b = lower_maxpool_explicit(&Pool2d { pool: (2, 2), stride: (1, 1) }, S33).unwrap();
        assert_eq!(b.stages.len(), 2);
        let row_plus = Matrix::from_rows(&[
            [1., 1., 0., 0., 0., 0., 0., 0., 0.],
            [0., 1., 1., 0., 0., 0., 0., 0., 0.],
            [0., 0., 0., 1., 1., 0., 0., 0., 0.],
            [0., 0., 0., 0., 1., 1., 0., 0., 0.],
            [0., 0., 0., 0., 0., 0., 1., 1., 0.],
            [0., 0., 0., 0., 0., 0., 0., 1., 1.],
        ])
        .unwrap();
        let row_minus = Matrix::from_rows(&[
            [1., -1., 0., 0., 0., 0., 0., 0., 0.],
            [0., 1., -1., 0., 0., 0., 0., 0., 0.],
            [0., 0., 0., 1., -1., 0., 0., 0., 0.],
            [0., 0., 0., 0., 1., -1., 0., 0., 0.],
            [0., 0., 0., 0., 0., 0., 1., -1., 0.],
            [0., 0., 0., 0., 0., 0., 0., 1., -1.],
        ])
        .unwrap();
        let col_plus = Matrix::from_rows(&[
            [1., 0., 1., 0., 0., 0.],
            [0., 1., 0., 1., 0., 0.],
            [0., 0., 1., 0., 1., 0.],
            [0., 0., 0., 1., 0., 1.],
        ])
        .unwrap();
        let col_minus = Matrix::from_rows(&[
            [1., 0., -1., 0., 0., 0.],
            [0., 1., 0., -1., 0., 0.],
            [0., 0., 1., 0., -1., 0.],
            [0., 0., 0., 1., 0., -1.],
        ])
        .unwrap();
        assert_eq!(b.stages[0].axis, StageAxis::Row);
        assert_eq!(b.stages[0].m_plus.to_dense(), row_plus);
        assert_eq!(b.stages[0].m_minus.to_dense(), row_minus);
        assert_eq!(b.stages[1].axis, StageAxis::Col);
        assert_eq!(b.stages[1].m_plus.to_dense(), col_plus);
        assert_eq!(b.stages[1].m_minus.to_dense(), col_minus);
    }

    #[test]
    fn vertical_pair_pool_is_one_column_stage() {
        let b = lower_maxpool_explicit(&Pool2d { pool: (2, 1), stride: (1, 1) }, S33).unwrap();
        assert_eq!(b.stages.len(), 1);
        assert_eq!(b.stages[0].axis, StageAxis::Col);
    }

    #[test]
    fn implicit_ones_pattern() {
        let b = lower_maxpool_implicit(&Pool2d { pool: (2, 2), stride: (1, 1) }, S33).unwrap();
        let expected = Matrix::from_rows(&[
            [1., 1., 0., 1., 1., 0., 0., 0., 0.],
            [0., 1., 1., 0., 1., 1., 0., 0., 0.],
            [0., 0., 0., 1., 1., 0., 1., 1., 0.],
            [0., 0., 0., 0., 1., 1., 0., 1., 1.],
        ])
        .unwrap();
        assert_eq!(b.ones.to_dense(), expected);
        assert_eq!(b.window_size, 4);
        let id = lower_maxpool_implicit(&Pool2d { pool: (1, 1), stride: (1, 1) }, S33).unwrap();
        assert_eq!(id.ones.to_dense(), Matrix::identity(9));
    }

    #[test]
    fn zm_on_increasing_input_marks_last_position() {
        let b = lower_maxpool_implicit(&Pool2d { pool: (2, 2), stride: (1, 1) }, S33).unwrap();
        let x: Vec<f64> = (0..9).map(f64::from).collect();
        let z = zm_at(&b, &x).unwrap();
        for (r, w) in b.windows.iter().enumerate() {
            let last = *w.last().unwrap();
            assert_eq!(z.get(r, last), 1.0);
            assert!(w[..3].iter().all(|&i| z.get(r, i) == -1.0));
        }
        assert_eq!(z.abs(), b.ones.to_dense());
        assert!(zm_at(&b, &[0.0; 4]).is_err());
    }

    #[test]
    fn displayed_zm_reproduced() {
        // Window argmaxes at flat positions 0, 4, 7 and 7.
        let b = lower_maxpool_implicit(&Pool2d { pool: (2, 2), stride: (1, 1) }, S33).unwrap();
        let x = [9.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 6.0, 0.0];
        let z = zm_at(&b, &x).unwrap();
        let expected = Matrix::from_rows(&[
            [1., -1., 0., -1., -1., 0., 0., 0., 0.],
            [0., -1., -1., 0., 1., -1., 0., 0., 0.],
            [0., 0., 0., -1., -1., 0., -1., 1., 0.],
            [0., 0., 0., 0., -1., -1., 0., 1., -1.],
        ])
        .unwrap();
        assert_eq!(z, expected);
    }

    #[test]
    fn stage_norm_identities() {
        use crate::linalg::NormKind;
        let shape = Shape::Image { h: 6, w: 9, c: 2 };
        for pool in [(2, 2), (3, 2), (2, 3), (3, 3)] {
            for stride in [(1, 1), (pool.0, pool.1)] {
                let p = Pool2d { pool, stride };
                if p.output(6, 9).is_err() {
                    continue;
                }
                let b = lower_maxpool_explicit(&p, shape).unwrap();
                assert_eq!(b.stages.len(), pool.0 - 1 + pool.1 - 1);
                for s in &b.stages {
                    for n in [NormKind::L1, NormKind::Linf] {
                        assert_eq!(s.m_plus.norm(n).unwrap(), s.m_minus.norm(n).unwrap());
                    }
                    assert_eq!(s.m_plus.abs(), s.m_minus.abs());
                }
            }
        }
    }
}
