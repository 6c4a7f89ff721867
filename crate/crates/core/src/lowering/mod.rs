//! Compiles networks to sequences of matrices for the bound engines.
//!
//! Convolutions and average pooling become sparse linear blocks. A 2-D
//! max-pool becomes either a chain of pairwise max stages, each written
//! `½M⁺x + ½Z·M⁻x` with a ±1 diagonal `Z` (explicit), or a single block
//! `½𝟙x + ½Z_M·x` where `Z_M` marks the window argmax (implicit).

mod maxpool;

pub use maxpool::{lower_maxpool_explicit, lower_maxpool_implicit, zm_at, MaxPoolExplicitBlock, MaxPoolImplicitBlock, MaxStage, StageAxis};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};
use crate::netmodel::{ActivationKind, Conv2d, LayerSpec, NetworkSpec, Pool2d, Shape};
use crate::par::Execution;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Explicit,
    Implicit,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Explicit => "explicit",
            Approach::Implicit => "implicit",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "explicit" | "expl" => Ok(Approach::Explicit),
            "implicit" | "impl" => Ok(Approach::Implicit),
            other => Err(Error::Parse(format!("unknown approach `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrigin {
    Dense,
    Conv,
    AvgPool,
    /// Strided 1×1 max-pool, which only selects entries.
    Selection,
    MergedPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearBlock {
    pub matrix: CsrMatrix,
    pub bias: Vec<f64>,
    pub origin: BlockOrigin,
}

impl LinearBlock {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.matrix.matvec(x);
        y.iter_mut().zip(&self.bias).for_each(|(a, b)| *a += b);
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanBlock {
    Linear(LinearBlock),
    Relu { width: usize },
    MaxPoolExplicit(MaxPoolExplicitBlock),
    MaxPoolImplicit(MaxPoolImplicitBlock),
}

/// A network compiled for one approach. Consecutive linear blocks are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct LoweredPlan {
    pub approach: Approach,
    pub input_dim: usize,
    pub blocks: Vec<PlanBlock>,
}

impl LoweredPlan {
    pub fn output_dim(&self) -> usize {
        let mut d = self.input_dim;
        for b in &self.blocks {
            d = match b {
                PlanBlock::Linear(l) => l.matrix.rows(),
                PlanBlock::Relu { width } => *width,
                PlanBlock::MaxPoolExplicit(m) => m.stages.last().map_or(d, |s| s.m_plus.rows()),
                PlanBlock::MaxPoolImplicit(m) => m.ones.rows(),
            };
        }
        d
    }

    pub fn max_pool_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b, PlanBlock::MaxPoolExplicit(_) | PlanBlock::MaxPoolImplicit(_)))
            .count()
    }

    /// Number of pairwise max stages over all explicit max-pool blocks.
    pub fn stage_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                PlanBlock::MaxPoolExplicit(m) => m.stages.len(),
                _ => 0,
            })
            .sum()
    }

    pub fn relu_count(&self) -> usize {
        self.blocks.iter().filter(|b| matches!(b, PlanBlock::Relu { .. })).count()
    }

    /// Evaluates the plan with every max selector read off the input.
    /// Selector matrices have entries in {0, 1}, so max-pool blocks
    /// reproduce the direct max exactly.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, plan expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut v = x.to_vec();
        for b in &self.blocks {
            v = match b {
                PlanBlock::Linear(l) => l.apply(&v),
                PlanBlock::Relu { .. } => v.iter().map(|z| z.max(0.0)).collect(),
                PlanBlock::MaxPoolExplicit(m) => {
                    let mut u = v;
                    for s in &m.stages {
                        u = s.selector_at(&u).matvec(&u);
                    }
                    u
                }
                PlanBlock::MaxPoolImplicit(m) => m.selector_at(&v).matvec(&v),
            };
        }
        Ok(v)
    }
}

/// Matrix of a convolution on the flattened `(h, w, c)` input.
pub fn lower_conv(conv: &Conv2d, input: Shape) -> Result<LinearBlock> {
    let (h, w, c) = image(input, "conv2d")?;
    let k = &conv.kernel;
    if k.in_ch != c || conv.bias.len() != k.out_ch {
        return Err(Error::ShapeMismatch("conv kernel does not match its input or bias".into()));
    }
    let (oh, pt) = conv.axis(h, k.kh, conv.stride.0)?;
    let (ow, pl) = conv.axis(w, k.kw, conv.stride.1)?;
    let mut entries = Vec::with_capacity(oh * ow * k.out_ch * k.kh * k.kw * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..k.out_ch {
                let row = (oy * ow + ox) * k.out_ch + o;
                for ky in 0..k.kh {
                    let iy = (oy * conv.stride.0 + ky) as isize - pt as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k.kw {
                        let ix = (ox * conv.stride.1 + kx) as isize - pl as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        for i in 0..c {
                            let v = k.get(o, i, ky, kx);
                            if v != 0.0 {
                                entries.push((row, (iy as usize * w + ix as usize) * c + i, v));
                            }
                        }
                    }
                }
            }
        }
    }
    let bias = (0..oh * ow).flat_map(|_| conv.bias.iter().copied()).collect();
    Ok(LinearBlock {
        matrix: CsrMatrix::from_triplets(oh * ow * k.out_ch, h * w * c, entries)?,
        bias,
        origin: BlockOrigin::Conv,
    })
}

pub fn lower_avgpool(p: &Pool2d, input: Shape) -> Result<LinearBlock> {
    let windows = crate::netmodel::pool_windows(p, input)?;
    let size = (p.pool.0 * p.pool.1) as f64;
    let entries = windows
        .iter()
        .enumerate()
        .flat_map(|(r, win)| win.iter().map(move |&i| (r, i, 1.0 / size)))
        .collect();
    Ok(LinearBlock {
        matrix: CsrMatrix::from_triplets(windows.len(), input.len(), entries)?,
        bias: vec![0.0; windows.len()],
        origin: BlockOrigin::AvgPool,
    })
}

fn image(s: Shape, what: &str) -> Result<(usize, usize, usize)> {
    match s {
        Shape::Image { h, w, c } => Ok((h, w, c)),
        Shape::Flat(_) => Err(Error::ShapeMismatch(format!("{what} needs an image input"))),
    }
}

fn push_linear(blocks: &mut Vec<PlanBlock>, next: LinearBlock) -> Result<()> {
    if let Some(PlanBlock::Linear(prev)) = blocks.last_mut() {
        let matrix = next.matrix.matmul(&prev.matrix, Execution::default())?;
        let mut bias = next.matrix.matvec(&prev.bias);
        bias.iter_mut().zip(&next.bias).for_each(|(a, b)| *a += b);
        *prev = LinearBlock { matrix, bias, origin: BlockOrigin::MergedPair };
    } else {
        blocks.push(PlanBlock::Linear(next));
    }
    Ok(())
}

/// Compiles `net` for the given max-pool approach.
pub fn lower_network(net: &NetworkSpec, approach: Approach) -> Result<LoweredPlan> {
    let mut blocks = Vec::new();
    for (layer, &shape) in net.layers().iter().zip(net.shapes()) {
        match layer {
            LayerSpec::Dense { weight, bias } => push_linear(
                &mut blocks,
                LinearBlock { matrix: CsrMatrix::from_dense(weight), bias: bias.clone(), origin: BlockOrigin::Dense },
            )?,
            LayerSpec::Conv2d(conv) => push_linear(&mut blocks, lower_conv(conv, shape)?)?,
            LayerSpec::AvgPool2d(p) => push_linear(&mut blocks, lower_avgpool(p, shape)?)?,
            LayerSpec::MaxPool2d(p) => match approach {
                Approach::Explicit => {
                    let block = lower_maxpool_explicit(p, shape)?;
                    if block.stages.is_empty() {
                        let mut sel = lower_avgpool(p, shape)?;
                        sel.origin = BlockOrigin::Selection;
                        push_linear(&mut blocks, sel)?;
                    } else {
                        blocks.push(PlanBlock::MaxPoolExplicit(block));
                    }
                }
                Approach::Implicit => blocks.push(PlanBlock::MaxPoolImplicit(lower_maxpool_implicit(p, shape)?)),
            },
            LayerSpec::Activation(ActivationKind::Relu) => blocks.push(PlanBlock::Relu { width: shape.len() }),
            LayerSpec::Activation(ActivationKind::Identity) => {}
        }
    }
    Ok(LoweredPlan { approach, input_dim: net.input_dim(), blocks })
}

/// Dense copy of every linear block, in order (for inspection and tests).
pub fn linear_matrices(plan: &LoweredPlan) -> Vec<Matrix> {
    plan.blocks
        .iter()
        .filter_map(|b| match b {
            PlanBlock::Linear(l) => Some(l.matrix.to_dense()),
            _ => None,
        })
        .collect()
}
