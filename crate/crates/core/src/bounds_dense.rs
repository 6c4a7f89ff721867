//! Bounds for fully connected ReLU networks.

use crate::corners::corner_max;
use crate::error::{Error, Result};
use crate::linalg::{norm, svd, Matrix, NormKind};
use crate::netmodel::{ActivationKind, DiagonalPattern, LayerSpec, NetworkSpec};
use crate::par::{map_indexed, worker_count, Execution};
use crate::report::{timed_entry, BoundConfig, BoundEntry, BoundKind, BoundReport};
use crate::subsets::{self, PartialProducts, SplitChain};

/// Weight matrices `W_0 … W_ℓ` of a dense network, with a ReLU between
/// each consecutive pair. Linear layers not separated by a ReLU are
/// multiplied together; a ReLU at either end gets an identity neighbour.
pub fn dense_weights(net: &NetworkSpec) -> Result<Vec<Matrix>> {
    let mut weights: Vec<Matrix> = Vec::new();
    let mut open = false; // true when the last weight may still absorb a linear layer
    let mut dim = net.input_dim();
    for layer in net.layers() {
        match layer {
            LayerSpec::Dense { weight, .. } => {
                if open {
                    let last = weights.last_mut().unwrap();
                    *last = weight.matmul(last)?;
                } else {
                    weights.push(weight.clone());
                }
                open = true;
                dim = weight.rows();
            }
            LayerSpec::Activation(ActivationKind::Identity) => {}
            LayerSpec::Activation(ActivationKind::Relu) => {
                if !open {
                    weights.push(Matrix::identity(dim));
                }
                open = false;
            }
            other => {
                return Err(Error::UnsupportedLayer(format!(
                    "{} layer in a dense-only bound computation",
                    other.kind_name()
                )))
            }
        }
    }
    if !open {
        weights.push(Matrix::identity(dim));
    }
    Ok(weights)
}

fn chain(net: &NetworkSpec) -> Result<SplitChain> {
    Ok(SplitChain::from_weights(&dense_weights(net)?))
}

/// `K* = ∏ ‖W_r‖`.
pub fn k_star(net: &NetworkSpec, p: NormKind) -> Result<f64> {
    dense_weights(net)?.iter().try_fold(1.0, |acc, w| Ok(acc * norm(w, p)?))
}

/// Combettes–Pesquet bound `K1`.
pub fn k1(net: &NetworkSpec, p: NormKind, cfg: &BoundConfig) -> Result<f64> {
    Ok(k1_terms(net, p, cfg)?.0)
}

fn k1_terms(net: &NetworkSpec, p: NormKind, cfg: &BoundConfig) -> Result<(f64, u64)> {
    let c = chain(net)?;
    check_depth(&c, cfg)?;
    let pp = PartialProducts::new(&c, cfg.exec)?;
    subsets::k1_sum(&pp, p, cfg.depth_cap, cfg.exec)
}

/// `K3 = ‖|W_ℓ| … |W_0|‖`, l1 or l∞ only.
pub fn k3(net: &NetworkSpec, p: NormKind) -> Result<f64> {
    subsets::k3(&chain(net)?, p)
}

/// `K4`: the K1 subset sum over absolute values of the partial products.
pub fn k4(net: &NetworkSpec, p: NormKind, cfg: &BoundConfig) -> Result<f64> {
    Ok(k4_terms(net, p, cfg)?.0)
}

fn k4_terms(net: &NetworkSpec, p: NormKind, cfg: &BoundConfig) -> Result<(f64, u64)> {
    if p == NormKind::L2 {
        return Err(Error::UnsupportedNorm { norm: p.to_string(), bound: "K4" });
    }
    let c = chain(net)?;
    check_depth(&c, cfg)?;
    let pp = PartialProducts::new(&c, cfg.exec)?;
    subsets::k4_sum(&pp, p, cfg.depth_cap, cfg.exec)
}

fn check_depth(c: &SplitChain, cfg: &BoundConfig) -> Result<()> {
    if c.depth() > cfg.depth_cap {
        return Err(Error::DepthTooLarge { depth: c.depth(), cap: cfg.depth_cap });
    }
    Ok(())
}

/// Virmaux–Scaman bound `K2`, with every corner of each activation
/// interface enumerated.
pub fn k2(net: &NetworkSpec, p: NormKind, cfg: &BoundConfig) -> Result<f64> {
    let ws = dense_weights(net)?;
    let l = ws.len() - 1;
    if l == 0 {
        return norm(&ws[0], p);
    }
    for w in &ws[..l] {
        if w.rows() > cfg.width_cap {
            return Err(Error::WidthTooLarge { width: w.rows(), cap: cfg.width_cap });
        }
    }
    let f: Vec<_> = ws.iter().map(svd).collect::<Result<_>>()?;
    // Left and right halves of Σ_i^{1/2}: a_{i+1}×k and k×a_i.
    let half = |i: usize, left: bool| -> Matrix {
        let (r, c) = (ws[i].rows(), ws[i].cols());
        let k = r.min(c);
        let (rows, cols) = if left { (r, k) } else { (k, c) };
        Matrix::from_fn(rows, cols, |a, b| if a == b { f[i].sigma[a].sqrt() } else { 0.0 })
    };
    let l2 = p == NormKind::L2;
    let mut total = 1.0;
    for i in 0..l {
        // Factor for the activation between W_i and W_{i+1}.
        let right = if i == 0 {
            if l2 {
                f[0].u.matmul(&f[0].sigma_matrix())?
            } else {
                ws[0].clone()
            }
        } else {
            f[i].u.matmul(&half(i, true))?
        };
        let left = if i + 1 == l {
            if l2 {
                f[l].sigma_matrix().matmul(&f[l].vt)?
            } else {
                ws[l].clone()
            }
        } else {
            half(i + 1, false).matmul(&f[i + 1].vt)?
        };
        total *= corner_max(&left, &right, p, cfg.exec)?;
    }
    Ok(total)
}

/// Gradient `W_ℓ D_ℓ … D_1 W_0` for a given activation pattern.
pub fn gradient_for_pattern(weights: &[Matrix], pattern: &DiagonalPattern) -> Result<Matrix> {
    if pattern.layers.len() + 1 != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} activation layers for {} weights",
            pattern.layers.len(),
            weights.len()
        )));
    }
    let mut g = weights[0].clone();
    for (d, w) in pattern.layers.iter().zip(&weights[1..]) {
        if d.len() != g.rows() {
            return Err(Error::ShapeMismatch("pattern width does not match layer".into()));
        }
        let masked = Matrix::from_fn(g.rows(), g.cols(), |i, j| if d[i] { g.get(i, j) } else { 0.0 });
        g = w.matmul(&masked)?;
    }
    Ok(g)
}

/// Exact `K = max ‖W_ℓ D_ℓ … D_1 W_0‖` over all 0/1 activation patterns.
///
/// The widest activation layer is enumerated in Gray-code order inside
/// [`corner_max`]; all other layers are enumerated outside it.
pub fn brute_force_k(net: &NetworkSpec, p: NormKind, cfg: &BoundConfig) -> Result<f64> {
    let ws = dense_weights(net)?;
    let l = ws.len() - 1;
    if l == 0 {
        return norm(&ws[0], p);
    }
    let widths: Vec<usize> = ws[..l].iter().map(Matrix::rows).collect();
    let total: usize = widths.iter().sum();
    if total > cfg.neuron_cap {
        return Err(Error::TooManyNeurons { count: total, cap: cfg.neuron_cap });
    }
    let inner = (0..l).max_by_key(|&i| (widths[i], std::cmp::Reverse(i))).unwrap();
    let outer_bits = total - widths[inner];
    let outer_count = 1usize << outer_bits;
    let outer_parallel = outer_count >= 4 * worker_count(cfg.exec);
    let (outer_exec, inner_exec) =
        if outer_parallel { (cfg.exec, Execution::Sequential) } else { (Execution::Sequential, cfg.exec) };

    let values = map_indexed(outer_exec, outer_count, |code| -> Result<f64> {
        let mut bits = code;
        let mut masks: Vec<Option<Vec<bool>>> = Vec::with_capacity(l);
        for (i, &w) in widths.iter().enumerate() {
            if i == inner {
                masks.push(None);
                continue;
            }
            masks.push(Some((0..w).map(|k| bits >> k & 1 == 1).collect()));
            bits >>= w;
        }
        // right = W_inner D … D W_0, left = W_ℓ D … D W_{inner+1}
        let mut right = ws[0].clone();
        for (i, w) in ws.iter().enumerate().take(inner + 1).skip(1) {
            right = w.matmul(&mask_rows(&right, masks[i - 1].as_ref().unwrap()))?;
        }
        let mut left = ws[inner + 1].clone();
        for (i, w) in ws.iter().enumerate().skip(inner + 2) {
            left = w.matmul(&mask_rows(&left, masks[i - 1].as_ref().unwrap()))?;
        }
        corner_max(&left, &right, p, inner_exec)
    });
    values.into_iter().try_fold(0.0, |m, v| Ok(f64::max(m, v?)))
}

fn mask_rows(m: &Matrix, keep: &[bool]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| if keep[i] { m.get(i, j) } else { 0.0 })
}

/// All bounds for a dense network. Bounds whose preconditions fail are
/// listed with the reason instead of a value.
pub fn bound_report(net: &NetworkSpec, p: NormKind, include_brute: bool, cfg: &BoundConfig) -> Result<BoundReport> {
    let depth = chain(net)?.depth();
    let mut entries: Vec<BoundEntry> = vec![
        timed_entry(BoundKind::KStar, || Ok((k_star(net, p)?, None)))?,
        timed_entry(BoundKind::K1, || k1_terms(net, p, cfg).map(|(v, t)| (v, Some(t))))?,
        timed_entry(BoundKind::K2, || Ok((k2(net, p, cfg)?, None)))?,
        timed_entry(BoundKind::K3, || Ok((k3(net, p)?, None)))?,
        timed_entry(BoundKind::K4, || k4_terms(net, p, cfg).map(|(v, t)| (v, Some(t))))?,
    ];
    if include_brute {
        entries.push(timed_entry(BoundKind::KBrute, || Ok((brute_force_k(net, p, cfg)?, None)))?);
    }
    Ok(BoundReport {
        model: net.name().to_string(),
        norm: p,
        approach: None,
        effective_depth: depth,
        term_count: 1u64 << depth.min(63),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::Shape;

    fn net(ws: &[Matrix]) -> NetworkSpec {
        let mut layers = Vec::new();
        for (i, w) in ws.iter().enumerate() {
            if i > 0 {
                layers.push(LayerSpec::Activation(ActivationKind::Relu));
            }
            layers.push(LayerSpec::Dense { weight: w.clone(), bias: vec![0.0; w.rows()] });
        }
        NetworkSpec::new("t", Shape::Flat(ws[0].cols()), layers).unwrap()
    }

    #[test]
    fn two_by_hand_corners() {
        let n = net(&[Matrix::from_rows(&[[1.0], [1.0]]).unwrap(), Matrix::from_rows(&[[1.0, 1.0]]).unwrap()]);
        let cfg = BoundConfig::dense();
        assert_eq!(brute_force_k(&n, NormKind::Linf, &cfg).unwrap(), 2.0);
    }

    #[test]
    fn zero_weights_give_zero() {
        let n = net(&[Matrix::zeros(3, 2), Matrix::zeros(1, 3)]);
        let cfg = BoundConfig::dense();
        for p in [NormKind::L1, NormKind::Linf] {
            let r = bound_report(&n, p, true, &cfg).unwrap();
            assert!(r.entries.iter().all(|e| e.value == Some(0.0)));
        }
    }

    #[test]
    fn single_layer_bounds_are_the_norm() {
        let w = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]).unwrap();
        let n = net(std::slice::from_ref(&w));
        let cfg = BoundConfig::dense();
        for p in [NormKind::L1, NormKind::Linf] {
            let expected = norm(&w, p).unwrap();
            let r = bound_report(&n, p, true, &cfg).unwrap();
            for e in &r.entries {
                assert!((e.value.unwrap() - expected).abs() < 1e-12, "{:?}", e);
            }
            assert_eq!(r.term_count, 1);
        }
    }

    #[test]
    fn l2_report_skips_abs_bounds() {
        let n = net(&[Matrix::from_rows(&[[1.0], [-1.0]]).unwrap(), Matrix::from_rows(&[[1.0, 1.0]]).unwrap()]);
        let r = bound_report(&n, NormKind::L2, false, &BoundConfig::dense()).unwrap();
        assert!(r.get(BoundKind::K3).is_none() && r.get(BoundKind::K4).is_none());
        assert!(r.entry(BoundKind::K4).unwrap().skipped.as_ref().unwrap().starts_with("unsupported_norm"));
        assert!(r.get(BoundKind::K1).is_some() && r.get(BoundKind::K2).is_some());
    }

    #[test]
    fn width_and_neuron_caps() {
        let n = net(&[Matrix::zeros(5, 1), Matrix::zeros(1, 5)]);
        let cfg = BoundConfig { width_cap: 4, neuron_cap: 4, ..BoundConfig::dense() };
        assert_eq!(k2(&n, NormKind::L1, &cfg), Err(Error::WidthTooLarge { width: 5, cap: 4 }));
        assert_eq!(brute_force_k(&n, NormKind::L1, &cfg), Err(Error::TooManyNeurons { count: 5, cap: 4 }));
    }

    #[test]
    fn pattern_gradient_matches_jacobian() {
        let ws = [
            Matrix::from_rows(&[[1.0, -1.0], [2.0, 0.5], [-1.0, 1.0]]).unwrap(),
            Matrix::from_rows(&[[1.0, 1.0, -2.0]]).unwrap(),
        ];
        let n = net(&ws);
        let x = [0.3, -0.7];
        let pat = n.activation_pattern(&x).unwrap();
        assert_eq!(gradient_for_pattern(&ws, &pat).unwrap(), n.jacobian_at(&x).unwrap());
    }
}
