//! Network descriptions, validation, evaluation and the interchange format.

mod eval;
mod json;

pub use eval::{ForwardTrace, PoolWindows};
pub(crate) use eval::{argmax_in, pool_windows};
pub use json::{load, load_path, save, save_path};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Tensor shape flowing between layers. Images are stored flattened in
/// `(h, w, c)` row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Flat(usize),
    Image { h: usize, w: usize, c: usize },
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Flat(n) => n,
            Shape::Image { h, w, c } => h * w * c,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    pub fn dims(self) -> Vec<usize> {
        match self {
            Shape::Flat(n) => vec![n],
            Shape::Image { h, w, c } => vec![h, w, c],
        }
    }

    fn image(self, what: &str) -> Result<(usize, usize, usize)> {
        match self {
            Shape::Image { h, w, c } => Ok((h, w, c)),
            Shape::Flat(n) => Err(Error::ShapeMismatch(format!("{what} needs an image input, got flat {n}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Valid,
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Identity,
}

/// Convolution kernel indexed `[out_ch][in_ch][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub data: Vec<f64>,
}

impl Kernel {
    pub fn new(out_ch: usize, in_ch: usize, kh: usize, kw: usize, data: Vec<f64>) -> Result<Self> {
        if out_ch == 0 || in_ch == 0 || kh == 0 || kw == 0 {
            return Err(Error::ShapeMismatch("kernel dimensions must be positive".into()));
        }
        if data.len() != out_ch * in_ch * kh * kw {
            return Err(Error::ShapeMismatch(format!(
                "kernel [{out_ch},{in_ch},{kh},{kw}] needs {} values, got {}",
                out_ch * in_ch * kh * kw,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Kernel { out_ch, in_ch, kh, kw, data })
    }

    pub fn get(&self, o: usize, i: usize, y: usize, x: usize) -> f64 {
        self.data[((o * self.in_ch + i) * self.kh + y) * self.kw + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub kernel: Kernel,
    pub bias: Vec<f64>,
    pub stride: (usize, usize),
    pub padding: Padding,
}

impl Conv2d {
    /// Output size and leading padding along one axis.
    pub fn axis(&self, input: usize, k: usize, s: usize) -> Result<(usize, usize)> {
        match self.padding {
            Padding::Valid => {
                if input < k {
                    return Err(Error::ShapeMismatch(format!("kernel {k} larger than input {input}")));
                }
                Ok(((input - k) / s + 1, 0))
            }
            Padding::Same => {
                let out = input.div_ceil(s);
                let total = ((out - 1) * s + k).saturating_sub(input);
                Ok((out, total / 2))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pool2d {
    pub pool: (usize, usize),
    pub stride: (usize, usize),
}

impl Pool2d {
    /// Output spatial size. Windows must tile the input exactly.
    pub fn output(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let ((ph, pw), (sh, sw)) = (self.pool, self.stride);
        if ph > h || pw > w {
            return Err(Error::ShapeMismatch(format!("pool {ph}x{pw} larger than input {h}x{w}")));
        }
        if (h - ph) % sh != 0 || (w - pw) % sw != 0 {
            return Err(Error::ShapeMismatch(format!(
                "pool {ph}x{pw} stride {sh}x{sw} leaves a ragged border on {h}x{w}"
            )));
        }
        Ok(((h - ph) / sh + 1, (w - pw) / sw + 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense { weight: Matrix, bias: Vec<f64> },
    Conv2d(Conv2d),
    AvgPool2d(Pool2d),
    MaxPool2d(Pool2d),
    Activation(ActivationKind),
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d(_) => "conv2d",
            LayerSpec::AvgPool2d(_) => "avgpool2d",
            LayerSpec::MaxPool2d(_) => "maxpool2d",
            LayerSpec::Activation(_) => "activation",
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            LayerSpec::Dense { .. }
                | LayerSpec::Conv2d(_)
                | LayerSpec::AvgPool2d(_)
                | LayerSpec::Activation(ActivationKind::Identity)
        )
    }

    fn output_shape(&self, input: Shape) -> Result<Shape> {
        match self {
            LayerSpec::Dense { weight, bias } => {
                if bias.len() != weight.rows() {
                    return Err(Error::ShapeMismatch(format!(
                        "dense bias has length {}, weight has {} rows",
                        bias.len(),
                        weight.rows()
                    )));
                }
                if weight.cols() != input.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "dense weight has {} columns, input has {} values",
                        weight.cols(),
                        input.len()
                    )));
                }
                Ok(Shape::Flat(weight.rows()))
            }
            LayerSpec::Conv2d(conv) => {
                let (h, w, c) = input.image("conv2d")?;
                let k = &conv.kernel;
                if conv.bias.len() != k.out_ch {
                    return Err(Error::ShapeMismatch(format!(
                        "conv bias has length {}, kernel has {} output channels",
                        conv.bias.len(),
                        k.out_ch
                    )));
                }
                if k.in_ch != c {
                    return Err(Error::ShapeMismatch(format!("conv expects {} channels, input has {c}", k.in_ch)));
                }
                if conv.stride.0 == 0 || conv.stride.1 == 0 {
                    return Err(Error::ShapeMismatch("conv stride must be positive".into()));
                }
                let (oh, _) = conv.axis(h, k.kh, conv.stride.0)?;
                let (ow, _) = conv.axis(w, k.kw, conv.stride.1)?;
                Ok(Shape::Image { h: oh, w: ow, c: k.out_ch })
            }
            LayerSpec::AvgPool2d(p) | LayerSpec::MaxPool2d(p) => {
                let (h, w, c) = input.image(self.kind_name())?;
                if p.pool.0 == 0 || p.pool.1 == 0 || p.stride.0 == 0 || p.stride.1 == 0 {
                    return Err(Error::ShapeMismatch("pool and stride must be positive".into()));
                }
                let (oh, ow) = p.output(h, w)?;
                Ok(Shape::Image { h: oh, w: ow, c })
            }
            LayerSpec::Activation(_) => Ok(input),
        }
    }
}

/// Per activation layer, the 0/1 diagonal of `D_r` (a corner of the
/// relaxed activation set).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalPattern {
    pub layers: Vec<Vec<bool>>,
}

/// A validated network: layers plus the inferred shape after each layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    name: String,
    input_shape: Shape,
    layers: Vec<LayerSpec>,
    shapes: Vec<Shape>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, input_shape: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        if input_shape.is_empty() {
            return Err(Error::ShapeMismatch("input shape must be nonempty".into()));
        }
        let mut shapes = vec![input_shape];
        for (i, layer) in layers.iter().enumerate() {
            if i > 0 && matches!(layer, LayerSpec::Activation(_)) && matches!(layers[i - 1], LayerSpec::Activation(_)) {
                return Err(Error::InvalidStructure(format!("consecutive activation layers at {}", i - 1)));
            }
            let next = layer
                .output_shape(shapes[i])
                .map_err(|e| match e {
                    Error::ShapeMismatch(m) => Error::ShapeMismatch(format!("layer {i}: {m}")),
                    other => other,
                })?;
            shapes.push(next);
        }
        Ok(NetworkSpec { name: name.into(), input_shape, layers, shapes })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn input_dim(&self) -> usize {
        self.input_shape.len()
    }

    pub fn output_dim(&self) -> usize {
        self.shapes.last().unwrap().len()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// `shapes()[i]` is the input shape of layer `i`; the last entry is the output shape.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn is_dense_only(&self) -> bool {
        self.layers
            .iter()
            .all(|l| matches!(l, LayerSpec::Dense { .. } | LayerSpec::Activation(_)))
    }

    /// Widths of the ReLU layers, in order.
    pub fn relu_widths(&self) -> Vec<usize> {
        self.layers
            .iter()
            .zip(&self.shapes)
            .filter(|(l, _)| matches!(l, LayerSpec::Activation(ActivationKind::Relu)))
            .map(|(_, s)| s.len())
            .collect()
    }

    /// Collapses every adjacent pair of dense layers into one.
    pub fn merge_linear(&self) -> NetworkSpec {
        let mut layers: Vec<LayerSpec> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            if let (Some(LayerSpec::Dense { weight: w1, bias: b1 }), LayerSpec::Dense { weight: w0, bias: b0 }) =
                (layers.last(), layer)
            {
                let weight = w0.matmul(w1).expect("shapes validated");
                let wb = w0.matvec(b1).expect("shapes validated");
                let bias = wb.iter().zip(b0).map(|(a, b)| a + b).collect();
                *layers.last_mut().unwrap() = LayerSpec::Dense { weight, bias };
            } else {
                layers.push(layer.clone());
            }
        }
        NetworkSpec::new(self.name.clone(), self.input_shape, layers).expect("merging preserves shapes")
    }
}
