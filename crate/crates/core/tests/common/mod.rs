//! Oracles and helpers shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use lipcert::netmodel::{ActivationKind, Kernel, LayerSpec, NetworkSpec, Pool2d, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Convolution on an explicitly zero-padded copy of the image.
pub fn conv_oracle(x: &[f64], (h, w, c): (usize, usize, usize), k: &Kernel, stride: (usize, usize), same: bool) -> Vec<f64> {
    let (pt, pb, pl, pr, oh, ow) = if same {
        let oh = h.div_ceil(stride.0);
        let ow = w.div_ceil(stride.1);
        let th = ((oh - 1) * stride.0 + k.kh).saturating_sub(h);
        let tw = ((ow - 1) * stride.1 + k.kw).saturating_sub(w);
        (th / 2, th - th / 2, tw / 2, tw - tw / 2, oh, ow)
    } else {
        (0, 0, 0, 0, (h - k.kh) / stride.0 + 1, (w - k.kw) / stride.1 + 1)
    };
    let (hp, wp) = (h + pt + pb, w + pl + pr);
    let mut img = vec![vec![vec![0.0; c]; wp]; hp];
    for y in 0..h {
        for xx in 0..w {
            for ch in 0..c {
                img[y + pt][xx + pl][ch] = x[(y * w + xx) * c + ch];
            }
        }
    }
    let mut out = Vec::with_capacity(oh * ow * k.out_ch);
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..k.out_ch {
                let mut s = 0.0;
                for ky in 0..k.kh {
                    for kx in 0..k.kw {
                        for i in 0..c {
                            s += k.data[((o * k.in_ch + i) * k.kh + ky) * k.kw + kx]
                                * img[oy * stride.0 + ky][ox * stride.1 + kx][i];
                        }
                    }
                }
                out.push(s);
            }
        }
    }
    out
}

pub fn pool_oracle(x: &[f64], (h, w, c): (usize, usize, usize), p: Pool2d, reduce: fn(&[f64]) -> f64) -> Vec<f64> {
    let oh = (h - p.pool.0) / p.stride.0 + 1;
    let ow = (w - p.pool.1) / p.stride.1 + 1;
    let mut out = Vec::new();
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut vals = Vec::new();
                for dy in 0..p.pool.0 {
                    for dx in 0..p.pool.1 {
                        vals.push(x[((oy * p.stride.0 + dy) * w + ox * p.stride.1 + dx) * c + ch]);
                    }
                }
                out.push(reduce(&vals));
            }
        }
    }
    out
}

pub fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub const H: f64 = 1e-6;
pub const JACOBIAN_TOL: f64 = 1e-4;

/// Sign of every ReLU input and the winner of every max-pool window.
/// Two points with the same signature lie on the same linear piece.
pub fn signature(net: &NetworkSpec, x: &[f64]) -> Vec<i64> {
    let t = net.trace(x).unwrap();
    let mut sig = Vec::new();
    for (i, layer) in net.layers().iter().enumerate() {
        let v = &t.values[i];
        match layer {
            LayerSpec::Activation(ActivationKind::Relu) => {
                sig.extend(v.iter().map(|z| if *z > 0.0 { 1 } else if *z < 0.0 { -1 } else { 0 }));
            }
            LayerSpec::MaxPool2d(p) => {
                let Shape::Image { h, w, c } = net.shapes()[i] else { unreachable!() };
                let oh = (h - p.pool.0) / p.stride.0 + 1;
                let ow = (w - p.pool.1) / p.stride.1 + 1;
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ch in 0..c {
                            let mut best = (f64::NEG_INFINITY, 0);
                            for dy in 0..p.pool.0 {
                                for dx in 0..p.pool.1 {
                                    let k = ((oy * p.stride.0 + dy) * w + ox * p.stride.1 + dx) * c + ch;
                                    if v[k] > best.0 {
                                        best = (v[k], k as i64);
                                    }
                                }
                            }
                            sig.push(best.1);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    sig
}

pub fn shifted(x: &[f64], dir: &[f64], s: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(a, d)| a + s * H * d).collect()
}

/// Central difference along `dir`, or `None` if the stencil leaves the
/// linear piece containing `x`.
pub fn central(net: &NetworkSpec, x: &[f64], dir: &[f64], sig: &[i64]) -> Option<Vec<f64>> {
    let (xf, xb) = (shifted(x, dir, 1.0), shifted(x, dir, -1.0));
    if signature(net, &xf) != sig || signature(net, &xb) != sig {
        return None;
    }
    let (f, b) = (net.forward(&xf).unwrap(), net.forward(&xb).unwrap());
    Some(f.iter().zip(&b).map(|(f, b)| (f - b) / (2.0 * H)).collect())
}

/// Compares Jacobian columns (or, when `columns` is set, that many random
/// columns plus one random direction) against central differences at 100
/// points off every kink. Returns the largest deviation.
pub fn jacobian_deviation(net: &NetworkSpec, lo: f64, hi: f64, columns: Option<usize>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = net.input_dim();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut attempts = 0;
    'points: while checked < 100 {
        attempts += 1;
        assert!(attempts < 1000, "{}: too few points off the kinks", net.name());
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        let sig = signature(net, &x);
        let j = net.jacobian_at(&x).unwrap();
        let mut dirs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let cols: Vec<usize> = match columns {
            None => (0..n).collect(),
            Some(k) => (0..k).map(|_| rng.random_range(0..n)).collect(),
        };
        for c in cols {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            dirs.push((e, (0..j.rows()).map(|r| j.get(r, c)).collect()));
        }
        if columns.is_some() {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let jv = j.matvec(&v).unwrap();
            dirs.push((v, jv));
        }
        let mut dev: f64 = 0.0;
        for (d, want) in &dirs {
            let Some(fd) = central(net, &x, d, &sig) else { continue 'points };
            for (a, b) in fd.iter().zip(want) {
                dev = dev.max((a - b).abs());
            }
        }
        worst = worst.max(dev);
        checked += 1;
    }
    worst
}

/// Piecewise-linear interpolation of `f` on the mesh of `[-1, 1]²` whose
/// unit cells are cut into four triangles through the cell centre.
pub fn p1_interpolate(f: impl Fn(f64, f64) -> f64, x: f64, y: f64) -> f64 {
    let cx = if x < 0.0 { -1.0 } else { 0.0 };
    let cy = if y < 0.0 { -1.0 } else { 0.0 };
    let (mx, my) = (cx + 0.5, cy + 0.5);
    let (dx, dy) = (x - mx, y - my);
    let (a, b) = if dy <= -dx.abs() {
        ((cx, cy), (cx + 1.0, cy))
    } else if dy >= dx.abs() {
        ((cx, cy + 1.0), (cx + 1.0, cy + 1.0))
    } else if dx > 0.0 {
        ((cx + 1.0, cy), (cx + 1.0, cy + 1.0))
    } else {
        ((cx, cy), (cx, cy + 1.0))
    };
    // barycentric coordinates in the triangle (a, b, centre)
    let det = (a.0 - mx) * (b.1 - my) - (b.0 - mx) * (a.1 - my);
    let la = (dx * (b.1 - my) - (b.0 - mx) * dy) / det;
    let lb = ((a.0 - mx) * dy - dx * (a.1 - my)) / det;
    la * f(a.0, a.1) + lb * f(b.0, b.1) + (1.0 - la - lb) * f(mx, my)
}

pub fn grid(n: usize) -> impl Iterator<Item = (f64, f64)> {
    let step = 2.0 / (n - 1) as f64;
    (0..n).flat_map(move |i| (0..n).map(move |j| (-1.0 + i as f64 * step, -1.0 + j as f64 * step)))
}

