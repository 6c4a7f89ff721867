//! Split chains and the subset sums behind K1 and K4.
//!
//! A network is viewed as layers `L_0 … L_m` separated by boundaries. Every
//! boundary where the gradient picks up an input-dependent factor (a ReLU
//! diagonal, the ±1 diagonal of a max stage, or the `Z_M` matrix of an
//! implicit max-pool) is a split. Expanding each such factor as a sum of two
//! halves gives one term per subset of active splits; between two active
//! splits the gradient reduces to a chunk product of the fixed matrices.

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, NormKind};
use crate::lowering::{LoweredPlan, PlanBlock};
use crate::par::{map_indexed, Execution};

/// Decisions at the first `BLOCK_LEVELS` splits are fixed per work item.
/// The constant does not depend on the thread count, so sums are
/// reproducible across machines.
const BLOCK_LEVELS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LayerRole {
    Linear,
    /// Pairwise max stage, possibly with a preceding linear map absorbed.
    Stage { minus: CsrMatrix },
    /// Implicit max-pool; `plus` is the 𝟙 pattern.
    Pool { windows: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ChainLayer {
    pub plus: CsrMatrix,
    pub role: LayerRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Boundary {
    /// Plain composition, not a split.
    Compose,
    Relu,
    Stage,
    Pool,
}

/// Layers and the boundaries between them; `boundaries[k-1]` sits between
/// layer `k-1` and layer `k`.
#[derive(Debug, Clone)]
pub struct SplitChain {
    pub(crate) layers: Vec<ChainLayer>,
    pub(crate) boundaries: Vec<Boundary>,
    pub(crate) input_dim: usize,
}

impl SplitChain {
    /// Dense network given by its weights with a ReLU after every layer but the last.
    pub fn from_weights(weights: &[crate::linalg::Matrix]) -> Self {
        let layers: Vec<ChainLayer> = weights
            .iter()
            .map(|w| ChainLayer { plus: CsrMatrix::from_dense(w), role: LayerRole::Linear })
            .collect();
        let boundaries = vec![Boundary::Relu; layers.len() - 1];
        SplitChain { input_dim: weights[0].cols(), layers, boundaries }
    }

    pub fn from_plan(plan: &LoweredPlan) -> Result<Self> {
        let mut b = Builder { layers: Vec::new(), boundaries: Vec::new(), pending: None, dim: plan.input_dim };
        for block in &plan.blocks {
            match block {
                PlanBlock::Linear(l) => b.linear(l.matrix.clone())?,
                PlanBlock::Relu { .. } => b.split(Boundary::Relu),
                PlanBlock::MaxPoolExplicit(m) => {
                    for s in &m.stages {
                        b.stage(s.m_plus.clone(), s.m_minus.clone())?;
                    }
                }
                PlanBlock::MaxPoolImplicit(m) => b.pool(m.ones.clone(), m.windows.clone()),
            }
        }
        Ok(b.finish())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().plus.rows()
    }

    /// Boundary positions (1-based) that are splits.
    pub fn splits(&self) -> Vec<usize> {
        (1..=self.boundaries.len()).filter(|&k| self.boundaries[k - 1] != Boundary::Compose).collect()
    }

    /// Number of splits, the exponent in the `2^-m` normalization.
    pub fn depth(&self) -> usize {
        self.splits().len()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }
}

struct Builder {
    layers: Vec<ChainLayer>,
    boundaries: Vec<Boundary>,
    pending: Option<Boundary>,
    dim: usize,
}

impl Builder {
    fn push(&mut self, layer: ChainLayer) {
        if !self.layers.is_empty() {
            self.boundaries.push(self.pending.take().unwrap_or(Boundary::Compose));
        }
        self.pending = None;
        self.dim = layer.plus.rows();
        self.layers.push(layer);
    }

    fn identity(&mut self) {
        self.push(ChainLayer { plus: CsrMatrix::identity(self.dim), role: LayerRole::Linear });
    }

    fn linear(&mut self, m: CsrMatrix) -> Result<()> {
        if self.pending.is_none() {
            if let Some(last) = self.layers.last_mut() {
                if last.role == LayerRole::Linear {
                    last.plus = m.matmul(&last.plus, Execution::default())?;
                    self.dim = last.plus.rows();
                    return Ok(());
                }
            }
        }
        self.push(ChainLayer { plus: m, role: LayerRole::Linear });
        Ok(())
    }

    fn split(&mut self, kind: Boundary) {
        if self.layers.is_empty() || self.pending.is_some() {
            self.identity();
        }
        self.pending = Some(kind);
    }

    fn stage(&mut self, plus: CsrMatrix, minus: CsrMatrix) -> Result<()> {
        if self.pending.is_none() {
            if let Some(last) = self.layers.last_mut() {
                if last.role == LayerRole::Linear {
                    let exec = Execution::default();
                    let (p, q) = (plus.matmul(&last.plus, exec)?, minus.matmul(&last.plus, exec)?);
                    *last = ChainLayer { plus: p, role: LayerRole::Stage { minus: q } };
                    self.dim = last.plus.rows();
                    self.pending = Some(Boundary::Stage);
                    return Ok(());
                }
            }
        }
        self.push(ChainLayer { plus, role: LayerRole::Stage { minus } });
        self.pending = Some(Boundary::Stage);
        Ok(())
    }

    fn pool(&mut self, ones: CsrMatrix, windows: Vec<Vec<usize>>) {
        self.push(ChainLayer { plus: ones, role: LayerRole::Pool { windows } });
        self.pending = Some(Boundary::Pool);
    }

    fn finish(mut self) -> SplitChain {
        if self.layers.is_empty() || self.pending.is_some() {
            self.identity();
        }
        let input_dim = self.layers[0].plus.cols();
        SplitChain { layers: self.layers, boundaries: self.boundaries, input_dim }
    }
}

/// Chunk products between consecutive active splits.
///
/// Nodes are numbered `0` (network input), `1..=S` (the splits in order)
/// and `S+1` (network output). `chunk(to, from)` is the product of the
/// layers strictly between the two nodes, with the `W⁻` or skip rule
/// applied at `to`; `None` stands for an identity.
pub struct PartialProducts {
    pos: Vec<usize>,
    chunks: Vec<Vec<Option<CsrMatrix>>>,
    /// 𝟙 pattern at pool splits, for the `R` factor.
    r_ones: Vec<Option<CsrMatrix>>,
    input_dim: usize,
    output_dim: usize,
}

impl PartialProducts {
    pub fn new(chain: &SplitChain, exec: Execution) -> Result<Self> {
        let splits = chain.splits();
        let m = chain.layers.len() - 1;
        let mut pos = vec![0];
        pos.extend(&splits);
        pos.push(m + 1);
        let n = pos.len();
        let kinds: Vec<Boundary> = (0..n)
            .map(|i| if i == 0 || i == n - 1 { Boundary::Compose } else { chain.boundaries[pos[i] - 1] })
            .collect();
        let r_ones = (0..n)
            .map(|i| (kinds[i] == Boundary::Pool).then(|| chain.layers[pos[i] - 1].plus.clone()))
            .collect();

        let rows: Vec<Result<Vec<Option<CsrMatrix>>>> = map_indexed(exec, n - 1, |from| {
            let start = pos[from];
            // prefix[k] = L⁺_{start+k-1} … L⁺_start, prefix[0] = identity.
            let mut prefix: Vec<Option<CsrMatrix>> = vec![None];
            let mut out = Vec::with_capacity(n);
            for to in from + 1..n {
                let t = pos[to];
                while prefix.len() <= t - start {
                    let layer = &chain.layers[start + prefix.len() - 1].plus;
                    let next = match prefix.last().unwrap() {
                        None => layer.clone(),
                        Some(p) => layer.matmul(p, Execution::Sequential)?,
                    };
                    prefix.push(Some(next));
                }
                let below = &prefix[t - 1 - start];
                let chunk = match kinds[to] {
                    Boundary::Stage => {
                        let LayerRole::Stage { minus } = &chain.layers[t - 1].role else {
                            return Err(Error::InvariantViolation("stage split after a non-stage layer".into()));
                        };
                        Some(match below {
                            None => minus.clone(),
                            Some(p) => minus.matmul(p, Execution::Sequential)?,
                        })
                    }
                    Boundary::Pool => below.clone(),
                    _ => prefix[t - start].clone(),
                };
                out.push(chunk);
            }
            Ok(out)
        });
        let chunks = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(PartialProducts {
            pos,
            chunks,
            r_ones,
            input_dim: chain.input_dim,
            output_dim: chain.output_dim(),
        })
    }

    /// Number of nodes, `S + 2`.
    pub fn node_count(&self) -> usize {
        self.pos.len()
    }

    /// Layer boundary index of node `i`.
    pub fn position(&self, i: usize) -> usize {
        self.pos[i]
    }

    pub fn chunk(&self, to: usize, from: usize) -> Option<&CsrMatrix> {
        assert!(from < to);
        self.chunks[from][to - from - 1].as_ref()
    }

    fn chunk_norm(&self, to: usize, from: usize, p: NormKind) -> Result<f64> {
        self.chunk(to, from).map_or(Ok(1.0), |c| c.norm(p))
    }

    fn r_norm(&self, node: usize, p: NormKind) -> Result<f64> {
        self.r_ones[node].as_ref().map_or(Ok(1.0), |r| r.norm(p))
    }

    fn abs_apply(&self, to: usize, from: usize, v: &[f64]) -> Vec<f64> {
        self.chunk(to, from).map_or_else(|| v.to_vec(), |c| c.abs_matvec(v))
    }

    fn abs_apply_left(&self, from: usize, to: usize, u: &[f64]) -> Vec<f64> {
        self.chunk(from, to).map_or_else(|| u.to_vec(), |c| c.abs_vecmat(u))
    }

    fn r_apply(&self, node: usize, v: Vec<f64>) -> Vec<f64> {
        self.r_ones[node].as_ref().map_or(v.clone(), |r| r.abs_matvec(&v))
    }

    fn r_apply_left(&self, node: usize, u: Vec<f64>) -> Vec<f64> {
        self.r_ones[node].as_ref().map_or(u.clone(), |r| r.abs_vecmat(&u))
    }
}

/// A walk over the active splits in one direction, accumulating a state.
trait Walk: Sync {
    type State: Send;
    fn init(&self) -> Self::State;
    fn step(&self, st: &Self::State, from: usize, to: usize) -> Self::State;
    fn finish(&self, st: &Self::State, from: usize) -> f64;
}

struct Enumerator<'a, W: Walk> {
    walk: &'a W,
    order: Vec<usize>,
}

impl<W: Walk> Enumerator<'_, W> {
    fn rec(&self, level: usize, last: usize, st: &W::State) -> f64 {
        if level == self.order.len() {
            return self.walk.finish(st, last);
        }
        let node = self.order[level];
        let skip = self.rec(level + 1, last, st);
        let next = self.walk.step(st, last, node);
        skip + self.rec(level + 1, node, &next)
    }

    fn run(&self, start: usize, exec: Execution) -> f64 {
        let k = self.order.len().min(BLOCK_LEVELS);
        let blocks = map_indexed(exec, 1usize << k, |b| {
            let mut last = start;
            let mut st = self.walk.init();
            for level in 0..k {
                if b >> (k - 1 - level) & 1 == 1 {
                    let node = self.order[level];
                    st = self.walk.step(&st, last, node);
                    last = node;
                }
            }
            self.rec(k, last, &st)
        });
        blocks.into_iter().sum()
    }
}

struct NormProducts<'a> {
    pp: &'a PartialProducts,
    chunk: Vec<Vec<f64>>,
    r: Vec<f64>,
}

impl Walk for NormProducts<'_> {
    type State = f64;
    fn init(&self) -> f64 {
        1.0
    }
    fn step(&self, st: &f64, from: usize, to: usize) -> f64 {
        st * self.chunk[from][to - from - 1] * self.r[to]
    }
    fn finish(&self, st: &f64, from: usize) -> f64 {
        let end = self.pp.node_count() - 1;
        st * self.chunk[from][end - from - 1]
    }
}

struct AbsRight<'a>(&'a PartialProducts);

impl Walk for AbsRight<'_> {
    type State = Vec<f64>;
    fn init(&self) -> Vec<f64> {
        vec![1.0; self.0.input_dim]
    }
    fn step(&self, v: &Vec<f64>, from: usize, to: usize) -> Vec<f64> {
        self.0.r_apply(to, self.0.abs_apply(to, from, v))
    }
    fn finish(&self, v: &Vec<f64>, from: usize) -> f64 {
        let end = self.0.node_count() - 1;
        self.0.abs_apply(end, from, v).into_iter().fold(0.0, f64::max)
    }
}

struct AbsLeft<'a>(&'a PartialProducts);

impl Walk for AbsLeft<'_> {
    type State = Vec<f64>;
    fn init(&self) -> Vec<f64> {
        vec![1.0; self.0.output_dim]
    }
    fn step(&self, u: &Vec<f64>, from: usize, to: usize) -> Vec<f64> {
        self.0.abs_apply_left(from, to, &self.0.r_apply_left(from, u.clone()))
    }
    fn finish(&self, u: &Vec<f64>, from: usize) -> f64 {
        self.0.abs_apply_left(from, 0, &self.0.r_apply_left(from, u.clone())).into_iter().fold(0.0, f64::max)
    }
}

fn check_depth(pp: &PartialProducts, cap: usize) -> Result<usize> {
    let depth = pp.node_count() - 2;
    if depth > cap {
        return Err(Error::DepthTooLarge { depth, cap });
    }
    Ok(depth)
}

/// `2^-m Σ_subsets ∏ ‖chunk‖·‖R‖`. Returns the value and the term count.
pub fn k1_sum(pp: &PartialProducts, p: NormKind, cap: usize, exec: Execution) -> Result<(f64, u64)> {
    let depth = check_depth(pp, cap)?;
    let n = pp.node_count();
    let chunk = (0..n - 1)
        .map(|from| (from + 1..n).map(|to| pp.chunk_norm(to, from, p)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let r = (0..n).map(|i| pp.r_norm(i, p)).collect::<Result<Vec<_>>>()?;
    let walk = NormProducts { pp, chunk, r };
    let e = Enumerator { walk: &walk, order: (1..n - 1).collect() };
    Ok((e.run(0, exec) / 2f64.powi(depth as i32), 1u64 << depth))
}

/// `2^-m Σ_subsets ‖|chunk|·R^abs·…·|chunk|‖` in l1 or l∞.
pub fn k4_sum(pp: &PartialProducts, p: NormKind, cap: usize, exec: Execution) -> Result<(f64, u64)> {
    let depth = check_depth(pp, cap)?;
    let n = pp.node_count();
    let total = match p {
        NormKind::Linf => Enumerator { walk: &AbsRight(pp), order: (1..n - 1).collect() }.run(0, exec),
        NormKind::L1 => Enumerator { walk: &AbsLeft(pp), order: (1..n - 1).rev().collect() }.run(n - 1, exec),
        NormKind::L2 => return Err(Error::UnsupportedNorm { norm: p.to_string(), bound: "K4" }),
    };
    Ok((total / 2f64.powi(depth as i32), 1u64 << depth))
}

/// `∏ ‖L⁺_k‖`.
pub fn k_star(chain: &SplitChain, p: NormKind) -> Result<f64> {
    chain.layers.iter().try_fold(1.0, |acc, l| Ok(acc * l.plus.norm(p)?))
}

/// `‖∏ |L⁺_k|‖` in l1 or l∞, by propagating a vector of ones.
pub fn k3(chain: &SplitChain, p: NormKind) -> Result<f64> {
    match p {
        NormKind::Linf => {
            let mut v = vec![1.0; chain.input_dim];
            for l in &chain.layers {
                v = l.plus.abs_matvec(&v);
            }
            Ok(v.into_iter().fold(0.0, f64::max))
        }
        NormKind::L1 => {
            let mut u = vec![1.0; chain.output_dim()];
            for l in chain.layers.iter().rev() {
                u = l.plus.abs_vecmat(&u);
            }
            Ok(u.into_iter().fold(0.0, f64::max))
        }
        NormKind::L2 => Err(Error::UnsupportedNorm { norm: p.to_string(), bound: "K3" }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn scalar_chain_k1_equals_k_star() {
        let ws: Vec<Matrix> = [2.0, 0.5, 3.0, 1.5].iter().map(|&w| Matrix::from_rows(&[[w]]).unwrap()).collect();
        let chain = SplitChain::from_weights(&ws);
        let pp = PartialProducts::new(&chain, Execution::Sequential).unwrap();
        let (k1, terms) = k1_sum(&pp, NormKind::Linf, 24, Execution::Sequential).unwrap();
        assert_eq!(terms, 8);
        assert!((k1 - k_star(&chain, NormKind::Linf).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn depth_cap_is_enforced() {
        let ws = vec![Matrix::identity(1); 6];
        let pp = PartialProducts::new(&SplitChain::from_weights(&ws), Execution::Sequential).unwrap();
        assert_eq!(
            k1_sum(&pp, NormKind::L1, 4, Execution::Sequential).unwrap_err(),
            Error::DepthTooLarge { depth: 5, cap: 4 }
        );
    }

    #[test]
    fn deep_chain_sums_identical_across_strategies() {
        let ws: Vec<Matrix> = (0..14)
            .map(|i| Matrix::from_fn(3, 3, |r, c| ((r * 3 + c + i) % 5) as f64 - 2.0))
            .collect();
        let pp = PartialProducts::new(&SplitChain::from_weights(&ws), Execution::Parallel).unwrap();
        for p in [NormKind::L1, NormKind::Linf] {
            let a = k4_sum(&pp, p, 24, Execution::Sequential).unwrap();
            let b = k4_sum(&pp, p, 24, Execution::Parallel).unwrap();
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            let c = k1_sum(&pp, p, 24, Execution::Sequential).unwrap();
            let d = k1_sum(&pp, p, 24, Execution::Parallel).unwrap();
            assert_eq!(c.0.to_bits(), d.0.to_bits());
        }
    }
}
