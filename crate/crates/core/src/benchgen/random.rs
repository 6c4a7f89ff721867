use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::netmodel::NetworkSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Dense ReLU net with i.i.d. standard normal weights and zero biases.
///
/// `dims` lists layer widths from input to output. Weights are drawn layer
/// by layer in row-major order from a ChaCha8 stream seeded with `seed`.
pub fn build_random_net(dims: &[usize], seed: u64) -> Result<NetworkSpec> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::ShapeMismatch(format!("random net needs at least two positive widths, got {dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = dims
        .windows(2)
        .map(|w| {
            let m = Matrix::from_fn(w[1], w[0], |_, _| StandardNormal.sample(&mut rng));
            (m, vec![0.0; w[1]])
        })
        .collect();
    let name = dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
    Ok(super::relu_net(format!("random-{name}-{seed}"), layers))
}
