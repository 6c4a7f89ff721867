use crate::error::Error;
use crate::linalg::Matrix;
use crate::netmodel::{ActivationKind, Conv2d, Kernel, LayerSpec, NetworkSpec, Padding, Pool2d, Shape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt;
use std::str::FromStr;

/// The three MNIST classifiers: A uses average then max pooling, B max
/// pooling twice, C is A with doubled filter and neuron counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CnnModel {
    A,
    B,
    C,
}

impl fmt::Display for CnnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CnnModel::A => "A",
            CnnModel::B => "B",
            CnnModel::C => "C",
        })
    }
}

impl FromStr for CnnModel {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(CnnModel::A),
            "B" => Ok(CnnModel::B),
            "C" => Ok(CnnModel::C),
            other => Err(Error::Parse(format!("unknown CNN model `{other}`"))),
        }
    }
}

pub const KERNEL: usize = 3;
pub const POOL: usize = 2;

fn glorot(rng: &mut ChaCha8Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let dist = Normal::new(0.0, (2.0 / (fan_in + fan_out) as f64).sqrt()).expect("positive std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Random-weight MNIST-architecture CNN on a 28×28×1 input.
///
/// Convolutions are 3×3, stride 1, SAME padding; pools are 2×2, stride 2;
/// every conv and hidden dense layer is followed by a ReLU. Weights follow a
/// Glorot normal law, biases are zero.
pub fn build_mnist_cnn(model: CnnModel, seed: u64) -> NetworkSpec {
    let scale = if model == CnnModel::C { 2 } else { 1 };
    let (f1, f2, hidden) = (5 * scale, 10 * scale, 20 * scale);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = Pool2d { pool: (POOL, POOL), stride: (POOL, POOL) };
    let conv = |rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize| {
        let k2 = KERNEL * KERNEL;
        let data = glorot(rng, out_ch * in_ch * k2, in_ch * k2, out_ch * k2);
        LayerSpec::Conv2d(Conv2d {
            kernel: Kernel::new(out_ch, in_ch, KERNEL, KERNEL, data).expect("kernel size"),
            bias: vec![0.0; out_ch],
            stride: (1, 1),
            padding: Padding::Same,
        })
    };
    let dense = |rng: &mut ChaCha8Rng, n_in: usize, n_out: usize| {
        let data = glorot(rng, n_in * n_out, n_in, n_out);
        LayerSpec::Dense { weight: Matrix::new(n_out, n_in, data).expect("dense size"), bias: vec![0.0; n_out] }
    };
    let relu = || LayerSpec::Activation(ActivationKind::Relu);
    let first_pool = match model {
        CnnModel::B => LayerSpec::MaxPool2d(pool),
        CnnModel::A | CnnModel::C => LayerSpec::AvgPool2d(pool),
    };
    let flat = 7 * 7 * f2;
    let layers = vec![
        conv(&mut rng, 1, f1),
        relu(),
        first_pool,
        conv(&mut rng, f1, f2),
        relu(),
        LayerSpec::MaxPool2d(pool),
        dense(&mut rng, flat, hidden),
        relu(),
        dense(&mut rng, hidden, 10),
    ];
    NetworkSpec::new(format!("cnn-{model}-{seed}"), Shape::Image { h: 28, w: 28, c: 1 }, layers)
        .expect("architecture shapes are consistent")
}
