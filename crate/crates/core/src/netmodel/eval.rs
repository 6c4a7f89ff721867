use super::{ActivationKind, Conv2d, DiagonalPattern, LayerSpec, NetworkSpec, Pool2d, Shape};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Matrix};
use crate::lowering;

/// Flat input indices of every pooling window, in output order. Each
/// window lists its positions in row-major scan order.
pub type PoolWindows = Vec<Vec<usize>>;

pub(crate) fn pool_windows(p: &Pool2d, input: Shape) -> Result<PoolWindows> {
    let (h, w, c) = match input {
        Shape::Image { h, w, c } => (h, w, c),
        Shape::Flat(_) => return Err(Error::ShapeMismatch("pooling needs an image input".into())),
    };
    let (oh, ow) = p.output(h, w)?;
    let mut out = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut win = Vec::with_capacity(p.pool.0 * p.pool.1);
                for py in 0..p.pool.0 {
                    for px in 0..p.pool.1 {
                        let (y, x) = (oy * p.stride.0 + py, ox * p.stride.1 + px);
                        win.push((y * w + x) * c + ch);
                    }
                }
                out.push(win);
            }
        }
    }
    Ok(out)
}

/// Position within `win` of the first maximal entry.
pub(crate) fn argmax_in(x: &[f64], win: &[usize]) -> usize {
    let mut best = 0;
    for (k, &i) in win.iter().enumerate() {
        if x[i] > x[win[best]] {
            best = k;
        }
    }
    best
}

fn conv_direct(conv: &Conv2d, input: Shape, x: &[f64]) -> Result<Vec<f64>> {
    let (h, w, c) = match input {
        Shape::Image { h, w, c } => (h, w, c),
        Shape::Flat(_) => unreachable!("validated"),
    };
    let k = &conv.kernel;
    let (oh, pt) = conv.axis(h, k.kh, conv.stride.0)?;
    let (ow, pl) = conv.axis(w, k.kw, conv.stride.1)?;
    let mut out = vec![0.0; oh * ow * k.out_ch];
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..k.out_ch {
                let mut s = conv.bias[o];
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
                        let base = (iy as usize * w + ix as usize) * c;
                        for i in 0..c {
                            s += k.get(o, i, ky, kx) * x[base + i];
                        }
                    }
                }
                out[(oy * ow + ox) * k.out_ch + o] = s;
            }
        }
    }
    Ok(out)
}

fn apply_layer(layer: &LayerSpec, input: Shape, x: &[f64]) -> Result<Vec<f64>> {
    Ok(match layer {
        LayerSpec::Dense { weight, bias } => {
            let mut y = weight.matvec(x)?;
            y.iter_mut().zip(bias).for_each(|(a, b)| *a += b);
            y
        }
        LayerSpec::Conv2d(conv) => conv_direct(conv, input, x)?,
        LayerSpec::AvgPool2d(p) => pool_windows(p, input)?
            .iter()
            .map(|win| win.iter().map(|&i| x[i]).sum::<f64>() / win.len() as f64)
            .collect(),
        LayerSpec::MaxPool2d(p) => pool_windows(p, input)?
            .iter()
            .map(|win| win.iter().map(|&i| x[i]).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
        LayerSpec::Activation(ActivationKind::Relu) => x.iter().map(|&v| v.max(0.0)).collect(),
        LayerSpec::Activation(ActivationKind::Identity) => x.to_vec(),
    })
}

/// Values entering each layer, plus the final output.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub values: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.values.last().unwrap()
    }
}

impl NetworkSpec {
    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.values.pop().unwrap())
    }

    pub fn trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut values = vec![x.to_vec()];
        for (layer, &shape) in self.layers.iter().zip(&self.shapes) {
            let next = apply_layer(layer, shape, values.last().unwrap())?;
            values.push(next);
        }
        Ok(ForwardTrace { values })
    }

    /// Distance of `x` from the nearest kink: the smallest ReLU input
    /// magnitude, or the smallest gap between the two largest entries of a
    /// max-pool window.
    pub fn kink_distance(&self, x: &[f64]) -> Result<f64> {
        let t = self.trace(x)?;
        let mut d = f64::INFINITY;
        for (i, layer) in self.layers.iter().enumerate() {
            let v = &t.values[i];
            match layer {
                LayerSpec::Activation(ActivationKind::Relu) => {
                    d = v.iter().fold(d, |m, z| m.min(z.abs()));
                }
                LayerSpec::MaxPool2d(p) => {
                    for win in pool_windows(p, self.shapes[i])? {
                        let mut vals: Vec<f64> = win.iter().map(|&k| v[k]).collect();
                        vals.sort_by(|a, b| b.total_cmp(a));
                        if vals.len() > 1 {
                            d = d.min(vals[0] - vals[1]);
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(d)
    }

    /// ReLU derivative pattern at `x` (derivative 0 at 0).
    pub fn activation_pattern(&self, x: &[f64]) -> Result<DiagonalPattern> {
        let t = self.trace(x)?;
        let layers = self
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, LayerSpec::Activation(ActivationKind::Relu)))
            .map(|(i, _)| t.values[i].iter().map(|&z| z > 0.0).collect())
            .collect();
        Ok(DiagonalPattern { layers })
    }

    /// Jacobian of the network at `x` by reverse accumulation of the chain rule.
    pub fn jacobian_at(&self, x: &[f64]) -> Result<Matrix> {
        let t = self.trace(x)?;
        let out = self.output_dim();
        let mut j = Matrix::identity(out);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = self.shapes[i];
            j = match layer {
                LayerSpec::Dense { weight, .. } => j.matmul(weight)?,
                LayerSpec::Conv2d(conv) => right_mul(&j, &lowering::lower_conv(conv, input)?.matrix),
                LayerSpec::AvgPool2d(p) => right_mul(&j, &lowering::lower_avgpool(p, input)?.matrix),
                LayerSpec::MaxPool2d(p) => {
                    let v = &t.values[i];
                    let mut next = Matrix::zeros(j.rows(), input.len());
                    for (o, win) in pool_windows(p, input)?.iter().enumerate() {
                        let k = win[argmax_in(v, win)];
                        for r in 0..j.rows() {
                            next.set(r, k, next.get(r, k) + j.get(r, o));
                        }
                    }
                    next
                }
                LayerSpec::Activation(ActivationKind::Relu) => {
                    let v = &t.values[i];
                    Matrix::from_fn(j.rows(), j.cols(), |r, c| if v[c] > 0.0 { j.get(r, c) } else { 0.0 })
                }
                LayerSpec::Activation(ActivationKind::Identity) => j,
            };
        }
        Ok(j)
    }
}

fn right_mul(j: &Matrix, m: &CsrMatrix) -> Matrix {
    let mut out = Matrix::zeros(j.rows(), m.cols());
    for r in 0..j.rows() {
        for k in 0..m.rows() {
            let a = j.get(r, k);
            if a == 0.0 {
                continue;
            }
            for (c, v) in m.row(k) {
                out.set(r, c, out.get(r, c) + a * v);
            }
        }
    }
    out
}
