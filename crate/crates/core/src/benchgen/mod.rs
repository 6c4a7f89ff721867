//! Benchmark networks: x² and xy approximants, random dense nets and
//! MNIST-shaped CNNs with random weights.

mod cnn;
mod random;
mod x2;
mod xy;

pub use cnn::{build_mnist_cnn, CnnModel};
pub use random::build_random_net;
pub use x2::{build_x2_net, exact_l_x2, x2_partial_sum, X2Variant};
pub use xy::{build_xy_net, MeshBasis, MeshNode, XyVariant};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::netmodel::{ActivationKind, LayerSpec, NetworkSpec};

/// Parameters of a generated network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BenchSpec {
    X2 { depth: usize, variant: X2Variant },
    Xy { terms: usize, variant: XyVariant },
    Random { dims: Vec<usize>, seed: u64 },
    Cnn { model: CnnModel, seed: u64 },
}

impl BenchSpec {
    pub fn build(&self) -> Result<NetworkSpec> {
        match self {
            BenchSpec::X2 { depth, variant } => build_x2_net(*depth, *variant),
            BenchSpec::Xy { terms, variant } => Ok(build_xy_net(*terms, *variant)),
            BenchSpec::Random { dims, seed } => build_random_net(dims, *seed),
            BenchSpec::Cnn { model, seed } => Ok(build_mnist_cnn(*model, *seed)),
        }
    }
}

/// `G^ℓ = (K^{ℓ+2} − K^{ℓ+1}) / (K^{ℓ+1} − K^ℓ)` for consecutive depths.
pub fn growth_rate(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 3 {
        return Err(Error::ShapeMismatch(format!("growth rate needs at least 3 values, got {}", series.len())));
    }
    series
        .windows(3)
        .enumerate()
        .map(|(i, w)| {
            let (d0, d1) = (w[1] - w[0], w[2] - w[1]);
            if d0 == 0.0 {
                return Err(Error::DegenerateSeries { index: i });
            }
            Ok(d1 / d0)
        })
        .collect()
}

/// Dense ReLU network from `(weight, bias)` pairs with a ReLU between layers.
pub(crate) fn relu_net(name: impl Into<String>, layers: Vec<(Matrix, Vec<f64>)>) -> NetworkSpec {
    let input = layers[0].0.cols();
    let mut specs = Vec::with_capacity(2 * layers.len());
    for (i, (weight, bias)) in layers.into_iter().enumerate() {
        if i > 0 {
            specs.push(LayerSpec::Activation(ActivationKind::Relu));
        }
        specs.push(LayerSpec::Dense { weight, bias });
    }
    NetworkSpec::new(name, crate::netmodel::Shape::Flat(input), specs).expect("generator shapes are consistent")
}
