//! The interchange JSON document.

use super::{ActivationKind, Conv2d, Kernel, LayerSpec, NetworkSpec, Padding, Pool2d, Shape};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use serde_json::{json, Map, Value};
use std::path::Path;

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| perr(format!("{ctx}: missing field `{key}`")))
}

fn number(v: &Value, ctx: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| perr(format!("{ctx}: expected a number")))
}

fn array<'a>(v: &'a Value, ctx: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| perr(format!("{ctx}: expected an array")))
}

fn numbers(v: &Value, ctx: &str) -> Result<Vec<f64>> {
    array(v, ctx)?.iter().map(|x| number(x, ctx)).collect()
}

fn count(v: &Value, ctx: &str) -> Result<usize> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| perr(format!("{ctx}: expected a nonnegative integer")))
}

fn pair(v: &Value, ctx: &str) -> Result<(usize, usize)> {
    let a = array(v, ctx)?;
    if a.len() != 2 {
        return Err(perr(format!("{ctx}: expected two integers")));
    }
    Ok((count(&a[0], ctx)?, count(&a[1], ctx)?))
}

fn matrix(v: &Value, ctx: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = array(v, ctx)?.iter().map(|r| numbers(r, ctx)).collect::<Result<_>>()?;
    Matrix::from_rows(&rows).map_err(|e| match e {
        Error::ShapeMismatch(m) => Error::ShapeMismatch(format!("{ctx}: {m}")),
        other => other,
    })
}

fn kernel(v: &Value, ctx: &str) -> Result<Kernel> {
    let outs = array(v, ctx)?;
    let mut data = Vec::new();
    let mut dims: Option<(usize, usize, usize)> = None;
    for o in outs {
        let ins = array(o, ctx)?;
        for i in ins {
            let rows = array(i, ctx)?;
            for r in rows {
                let vals = numbers(r, ctx)?;
                let d = (ins.len(), rows.len(), vals.len());
                if *dims.get_or_insert(d) != d {
                    return Err(Error::ShapeMismatch(format!("{ctx}: ragged kernel array")));
                }
                data.extend(vals);
            }
        }
    }
    let (ic, kh, kw) = dims.ok_or_else(|| Error::ShapeMismatch(format!("{ctx}: empty kernel")))?;
    Kernel::new(outs.len(), ic, kh, kw, data)
}

fn parse_layer(v: &Value, i: usize) -> Result<LayerSpec> {
    let ctx = format!("layer {i}");
    let obj = v.as_object().ok_or_else(|| perr(format!("{ctx}: expected an object")))?;
    let kind = field(obj, "kind", &ctx)?
        .as_str()
        .ok_or_else(|| perr(format!("{ctx}: `kind` must be a string")))?;
    let pool = |obj: &Map<String, Value>| -> Result<Pool2d> {
        Ok(Pool2d { pool: pair(field(obj, "pool", &ctx)?, &ctx)?, stride: pair(field(obj, "stride", &ctx)?, &ctx)? })
    };
    Ok(match kind {
        "dense" => LayerSpec::Dense {
            weight: matrix(field(obj, "weight", &ctx)?, &ctx)?,
            bias: numbers(field(obj, "bias", &ctx)?, &ctx)?,
        },
        "activation" => match field(obj, "fn", &ctx)?.as_str() {
            Some("relu") => LayerSpec::Activation(ActivationKind::Relu),
            Some("identity") => LayerSpec::Activation(ActivationKind::Identity),
            _ => return Err(perr(format!("{ctx}: `fn` must be \"relu\" or \"identity\""))),
        },
        "conv2d" => {
            let padding = match obj.get("padding").and_then(Value::as_str).unwrap_or("valid") {
                "valid" => Padding::Valid,
                "same" => Padding::Same,
                other => return Err(perr(format!("{ctx}: unknown padding `{other}`"))),
            };
            let stride = match obj.get("stride") {
                Some(s) => pair(s, &ctx)?,
                None => (1, 1),
            };
            LayerSpec::Conv2d(Conv2d {
                kernel: kernel(field(obj, "kernel", &ctx)?, &ctx)?,
                bias: numbers(field(obj, "bias", &ctx)?, &ctx)?,
                stride,
                padding,
            })
        }
        "avgpool2d" => LayerSpec::AvgPool2d(pool(obj)?),
        "maxpool2d" => LayerSpec::MaxPool2d(pool(obj)?),
        other => return Err(Error::UnknownLayerKind(other.to_string())),
    })
}

/// Parses and validates an interchange document.
pub fn load(bytes: &[u8]) -> Result<NetworkSpec> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| perr(e.to_string()))?;
    let obj = doc.as_object().ok_or_else(|| perr("document must be an object"))?;
    let name = obj.get("name").and_then(Value::as_str).unwrap_or("net").to_string();
    let dims: Vec<usize> = array(field(obj, "input_shape", "document")?, "input_shape")?
        .iter()
        .map(|d| count(d, "input_shape"))
        .collect::<Result<_>>()?;
    let input_shape = match dims[..] {
        [n] => Shape::Flat(n),
        [h, w, c] => Shape::Image { h, w, c },
        _ => return Err(perr("input_shape must be [n] or [h, w, c]")),
    };
    let layers = array(field(obj, "layers", "document")?, "layers")?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_layer(l, i))
        .collect::<Result<Vec<_>>>()?;
    NetworkSpec::new(name, input_shape, layers)
}

pub fn load_path(path: impl AsRef<Path>) -> Result<NetworkSpec> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    load(&bytes)
}

fn layer_json(layer: &LayerSpec) -> Value {
    match layer {
        LayerSpec::Dense { weight, bias } => json!({"kind": "dense", "weight": weight.to_rows(), "bias": bias}),
        LayerSpec::Activation(a) => json!({
            "kind": "activation",
            "fn": match a { ActivationKind::Relu => "relu", ActivationKind::Identity => "identity" },
        }),
        LayerSpec::Conv2d(c) => {
            let k = &c.kernel;
            let nested: Vec<Vec<Vec<Vec<f64>>>> = (0..k.out_ch)
                .map(|o| {
                    (0..k.in_ch)
                        .map(|i| (0..k.kh).map(|y| (0..k.kw).map(|x| k.get(o, i, y, x)).collect()).collect())
                        .collect()
                })
                .collect();
            json!({
                "kind": "conv2d",
                "kernel": nested,
                "bias": c.bias,
                "stride": [c.stride.0, c.stride.1],
                "padding": match c.padding { Padding::Valid => "valid", Padding::Same => "same" },
            })
        }
        LayerSpec::AvgPool2d(p) | LayerSpec::MaxPool2d(p) => json!({
            "kind": layer.kind_name(),
            "pool": [p.pool.0, p.pool.1],
            "stride": [p.stride.0, p.stride.1],
        }),
    }
}

/// Serializes `net`; floats are written in shortest round-trip form.
pub fn save(net: &NetworkSpec) -> String {
    let doc = json!({
        "name": net.name(),
        "input_shape": net.input_shape().dims(),
        "layers": net.layers().iter().map(layer_json).collect::<Vec<_>>(),
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("json values serialize");
    s.push('\n');
    s
}

pub fn save_path(net: &NetworkSpec, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, save(net)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
