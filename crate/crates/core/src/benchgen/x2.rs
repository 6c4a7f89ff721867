use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::netmodel::NetworkSpec;
use std::fmt;
use std::str::FromStr;

/// Representation of the tent map `g` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum X2Variant {
    /// `g(x) = 1 − R(2x−1) − R(1−2x)`
    Symmetric,
    /// `g(x) = R(2x) − R(4x−2)`
    Asymmetric,
}

impl fmt::Display for X2Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            X2Variant::Symmetric => "symmetric",
            X2Variant::Asymmetric => "asymmetric",
        })
    }
}

impl FromStr for X2Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symmetric" | "sym" | "a" | "1" => Ok(X2Variant::Symmetric),
            "asymmetric" | "asym" | "b" | "2" => Ok(X2Variant::Asymmetric),
            other => Err(Error::Parse(format!("unknown x2 variant `{other}`"))),
        }
    }
}

fn m(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(rows).expect("constant matrix")
}

/// Network computing `S_ℓ(x) = x − Σ_{r=1}^{ℓ} g_r(x)/4^r` on `[0, 1]`,
/// where `g_r` is the r-fold tent map.
///
/// Each stage has two hat neurons and an accumulator neuron carrying the
/// running partial sum. The network is assembled stage by stage and the
/// linear maps between stages are then merged.
pub fn build_x2_net(depth: usize, variant: X2Variant) -> Result<NetworkSpec> {
    if depth == 0 {
        return Err(Error::InvalidStructure("x2 network needs depth at least 1".into()));
    }
    // Hats from (g, acc): first layer without and with the accumulator input.
    let (first, hats, hat_bias) = match variant {
        X2Variant::Symmetric => (
            m(&[&[2.0], &[-2.0], &[1.0]]),
            m(&[&[2.0, 0.0], &[-2.0, 0.0], &[0.0, 1.0]]),
            vec![-1.0, 1.0, 0.0],
        ),
        X2Variant::Asymmetric => (
            m(&[&[2.0], &[4.0], &[1.0]]),
            m(&[&[2.0, 0.0], &[4.0, 0.0], &[0.0, 1.0]]),
            vec![0.0, -2.0, 0.0],
        ),
    };
    let mut layers = Vec::new();
    for r in 1..=depth {
        let q = 4f64.powi(-(r as i32));
        layers.push(if r == 1 { (first.clone(), hat_bias.clone()) } else { (hats.clone(), hat_bias.clone()) });
        // (R1, R2, acc) -> (g_r, acc − g_r·q)
        let (g_row, g_bias, acc_row, acc_bias) = match variant {
            X2Variant::Symmetric => ([-1.0, -1.0, 0.0], 1.0, [q, q, 1.0], -q),
            X2Variant::Asymmetric => ([1.0, -1.0, 0.0], 0.0, [-q, q, 1.0], 0.0),
        };
        if r < depth {
            layers.push((m(&[&g_row, &acc_row]), vec![g_bias, acc_bias]));
        } else {
            layers.push((m(&[&acc_row]), vec![acc_bias]));
        }
    }
    // Unmerged form alternates hats and collation maps with no ReLU after
    // the collation map; insert the activations where they belong.
    let mut specs = Vec::new();
    use crate::netmodel::{ActivationKind, LayerSpec, Shape};
    for (i, (weight, bias)) in layers.into_iter().enumerate() {
        if i % 2 == 1 {
            specs.push(LayerSpec::Activation(ActivationKind::Relu));
        }
        specs.push(LayerSpec::Dense { weight, bias });
    }
    let net = NetworkSpec::new(format!("x2-{variant}-{depth}"), Shape::Flat(1), specs)?;
    let merged = net.merge_linear();
    debug_assert_eq!(merged.relu_widths(), vec![3; depth]);
    Ok(merged)
}

/// `S_ℓ(x)` by direct tent-map recursion, independent of any network.
pub fn x2_partial_sum(depth: usize, x: f64) -> f64 {
    let mut g = x;
    let mut s = x;
    for r in 1..=depth {
        g = if g < 0.5 { 2.0 * g } else { 2.0 - 2.0 * g };
        s -= g / 4f64.powi(r as i32);
    }
    s
}

/// Exact Lipschitz constant of `S_ℓ` on `[0, 1]`, from the slope on each
/// of the `2^ℓ` dyadic intervals where `S_ℓ` is affine.
pub fn exact_l_x2(depth: usize) -> f64 {
    let n = 1u64 << depth;
    let mut best: f64 = 0.0;
    for j in 0..n {
        let mut v = (j as f64 + 0.5) / n as f64;
        let mut sign = 1.0;
        let mut slope = 1.0;
        for r in 1..=depth {
            if v < 0.5 {
                v *= 2.0;
            } else {
                v = 2.0 - 2.0 * v;
                sign = -sign;
            }
            slope -= sign * 2f64.powi(r as i32) / 4f64.powi(r as i32);
        }
        best = best.max(slope.abs());
    }
    best
}
