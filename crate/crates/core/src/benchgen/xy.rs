use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::netmodel::NetworkSpec;
use std::fmt;
use std::str::FromStr;

/// ReLU representation of the reference hat on `[-1, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum XyVariant {
    /// `R[2 − R(x+y) − R(x−y) − R(1−x)]`
    HatA,
    /// `R[1 − Σ R(±x/2 ± y/2)]`
    HatB,
}

impl fmt::Display for XyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            XyVariant::HatA => "hat-a",
            XyVariant::HatB => "hat-b",
        })
    }
}

impl FromStr for XyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hat-a" | "hata" | "a" | "1" => Ok(XyVariant::HatA),
            "hat-b" | "hatb" | "b" | "2" => Ok(XyVariant::HatB),
            other => Err(Error::Parse(format!("unknown xy variant `{other}`"))),
        }
    }
}

impl XyVariant {
    /// First-layer rows, first-layer bias, second-layer coefficients and bias
    /// of the reference hat.
    fn layers(self) -> (Vec<[f64; 2]>, Vec<f64>, Vec<f64>, f64) {
        match self {
            XyVariant::HatA => (
                vec![[1.0, 1.0], [1.0, -1.0], [-1.0, 0.0]],
                vec![0.0, 0.0, 1.0],
                vec![-1.0; 3],
                2.0,
            ),
            XyVariant::HatB => (
                vec![[0.5, 0.5], [0.5, -0.5], [-0.5, 0.5], [-0.5, -0.5]],
                vec![0.0; 4],
                vec![-1.0; 4],
                1.0,
            ),
        }
    }

    /// Reference hat evaluated through its ReLU form.
    pub fn reference_hat(self, u: f64, v: f64) -> f64 {
        let (rows, b1, c2, d2) = self.layers();
        let inner: f64 = rows
            .iter()
            .zip(&b1)
            .zip(&c2)
            .map(|((r, b), c)| c * relu(r[0] * u + r[1] * v + b))
            .sum();
        relu(inner + d2)
    }

    /// Neurons per non-corner basis function.
    pub fn hat_width(self) -> usize {
        self.layers().0.len()
    }
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

/// A mesh node with its coefficients in `Λ` and its value of `T(x, y) = xy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshNode {
    pub name: &'static str,
    pub x: f64,
    pub y: f64,
    pub lambda: [f64; 2],
    /// Corner nodes use a single neuron `R(x0·x + y0·y − 1)`.
    pub corner: bool,
}

impl MeshNode {
    pub fn target(&self) -> f64 {
        self.x * self.y
    }

    /// Change of variables `(u, v) = M·(x, y) + c` onto the reference square.
    pub fn change_of_variables(&self) -> ([[f64; 2]; 2], [f64; 2]) {
        let (x0, y0) = (self.x, self.y);
        if self.name.len() > 1 {
            // cell centre: the cell is the reference square scaled by ½
            ([[2.0, 0.0], [0.0, 2.0]], [-2.0 * x0, -2.0 * y0])
        } else {
            // lattice node: the diamond |u|+|v| ≤ 1 rotated onto the square
            let m = [[1.0, 1.0], [1.0, -1.0]];
            (m, [-(x0 + y0), -(x0 - y0)])
        }
    }
}

/// The P1 basis of the 13-node mesh on `[-1, 1]²`: four cell centres and the
/// 3×3 lattice, each unit cell split into four triangles through its centre.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshBasis {
    variant: XyVariant,
    nodes: Vec<MeshNode>,
}

const fn node(name: &'static str, x: f64, y: f64, l1: f64, l2: f64, corner: bool) -> MeshNode {
    MeshNode { name, x, y, lambda: [l1, l2], corner }
}

const NODES: [MeshNode; 13] = [
    node("alpha", 0.5, 0.5, 1.0, 0.0, false),
    node("beta", -0.5, 0.5, -1.0, 0.0, false),
    node("gamma", -0.5, -0.5, 1.0, 0.0, false),
    node("delta", 0.5, -0.5, -1.0, 0.0, false),
    node("A", 1.0, 1.0, 0.0, -1.0, true),
    node("B", 0.0, 1.0, 0.0, 1.0, false),
    node("C", 0.0, 0.0, 0.0, -1.0, false),
    node("D", 1.0, 0.0, 0.0, 1.0, false),
    node("E", 1.0, -1.0, 0.0, -1.0, true),
    node("F", -1.0, 0.0, 0.0, 1.0, false),
    node("G", -1.0, -1.0, 0.0, -1.0, true),
    node("H", 0.0, -1.0, 0.0, 1.0, false),
    node("I", -1.0, 1.0, 0.0, -1.0, true),
];

impl MeshBasis {
    pub fn new(variant: XyVariant) -> Self {
        MeshBasis { variant, nodes: NODES.to_vec() }
    }

    pub fn variant(&self) -> XyVariant {
        self.variant
    }

    pub fn nodes(&self) -> &[MeshNode] {
        &self.nodes
    }

    /// Basis function of node `i` through its ReLU representation.
    pub fn phi(&self, i: usize, x: f64, y: f64) -> f64 {
        let n = &self.nodes[i];
        if n.corner {
            return relu(relu(n.x * x + n.y * y - 1.0));
        }
        let (m, c) = n.change_of_variables();
        let u = m[0][0] * x + m[0][1] * y + c[0];
        let v = m[1][0] * x + m[1][1] * y + c[1];
        self.variant.reference_hat(u, v)
    }

    pub fn phis(&self, x: f64, y: f64) -> Vec<f64> {
        (0..self.nodes.len()).map(|i| self.phi(i, x, y)).collect()
    }

    pub fn lambda(&self, x: f64, y: f64) -> (f64, f64) {
        self.nodes.iter().zip(self.phis(x, y)).fold((0.0, 0.0), |(a, b), (n, p)| {
            (a + n.lambda[0] * p, b + n.lambda[1] * p)
        })
    }

    /// `e₀ = T − ¼·T∘Λ` through its interpolation form `Σ T(node)·φ_node`.
    pub fn e0(&self, x: f64, y: f64) -> f64 {
        self.nodes.iter().zip(self.phis(x, y)).map(|(n, p)| n.target() * p).sum()
    }

    /// `f₀`: input to the hat neurons of all 13 basis functions.
    fn first_layer(&self) -> (Matrix, Vec<f64>) {
        let (rows, b1, _, _) = self.variant.layers();
        let mut w = Vec::new();
        let mut b = Vec::new();
        for n in &self.nodes {
            if n.corner {
                w.push(vec![n.x, n.y]);
                b.push(-1.0);
                continue;
            }
            let (m, c) = n.change_of_variables();
            for (r, bias) in rows.iter().zip(&b1) {
                w.push(vec![r[0] * m[0][0] + r[1] * m[1][0], r[0] * m[0][1] + r[1] * m[1][1]]);
                b.push(r[0] * c[0] + r[1] * c[1] + bias);
            }
        }
        (Matrix::from_rows(&w).expect("mesh layer"), b)
    }

    /// `f₁`: hat neurons to the 13 basis values.
    fn second_layer(&self, hidden: usize) -> (Matrix, Vec<f64>) {
        let (_, _, c2, d2) = self.variant.layers();
        let mut w = Matrix::zeros(self.nodes.len(), hidden);
        let mut b = vec![0.0; self.nodes.len()];
        let mut k = 0;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.corner {
                w.set(i, k, 1.0);
                k += 1;
            } else {
                for c in &c2 {
                    w.set(i, k, *c);
                    k += 1;
                }
                b[i] = d2;
            }
        }
        (w, b)
    }
}

/// Network computing `Σ_{r=0}^{n} e₀∘Λ^r / 4^r`, which approximates `xy`
/// on `[-1, 1]²`. The running sum is carried through every hidden layer as
/// the pair `R(s), R(−s)`.
pub fn build_xy_net(terms: usize, variant: XyVariant) -> NetworkSpec {
    let mesh = MeshBasis::new(variant);
    let (w0, b0) = mesh.first_layer();
    let h = w0.rows();
    let nb = mesh.nodes.len();
    let (w1, b1) = mesh.second_layer(h);
    let f3 = Matrix::from_fn(2, nb, |i, j| mesh.nodes[j].lambda[i]);
    let f4: Vec<f64> = mesh.nodes.iter().map(MeshNode::target).collect();
    let w03 = w0.matmul(&f3).expect("mesh shapes");

    let mut layers = Vec::new();
    let mut w = Matrix::zeros(h + 2, 2);
    for i in 0..h {
        for j in 0..2 {
            w.set(i, j, w0.get(i, j));
        }
    }
    let mut b = vec![0.0; h + 2];
    b[..h].copy_from_slice(&b0);
    layers.push((w, b));

    for r in 0..=terms {
        let mut w = Matrix::zeros(nb + 2, h + 2);
        for i in 0..nb {
            for j in 0..h {
                w.set(i, j, w1.get(i, j));
            }
        }
        w.set(nb, h, 1.0);
        w.set(nb, h + 1, -1.0);
        w.set(nb + 1, h, -1.0);
        w.set(nb + 1, h + 1, 1.0);
        let mut b = vec![0.0; nb + 2];
        b[..nb].copy_from_slice(&b1);
        layers.push((w, b));

        let q = 4f64.powi(-(r as i32));
        if r < terms {
            let mut w = Matrix::zeros(h + 2, nb + 2);
            for i in 0..h {
                for j in 0..nb {
                    w.set(i, j, w03.get(i, j));
                }
            }
            for (sign, row) in [(1.0, h), (-1.0, h + 1)] {
                w.set(row, nb, sign);
                w.set(row, nb + 1, -sign);
                for (j, t) in f4.iter().enumerate() {
                    w.set(row, j, sign * q * t);
                }
            }
            let mut b = vec![0.0; h + 2];
            b[..h].copy_from_slice(&b0);
            layers.push((w, b));
        } else {
            let mut w = Matrix::zeros(1, nb + 2);
            w.set(0, nb, 1.0);
            w.set(0, nb + 1, -1.0);
            for (j, t) in f4.iter().enumerate() {
                w.set(0, j, q * t);
            }
            layers.push((w, vec![0.0]));
        }
    }
    super::relu_net(format!("xy-{variant}-{terms}"), layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_hat_values() {
        for v in [XyVariant::HatA, XyVariant::HatB] {
            assert_eq!(v.reference_hat(0.0, 0.0), 1.0);
            for (u, w) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, 0.3), (-0.2, -1.0)] {
                assert!(v.reference_hat(u, w).abs() < 1e-12, "{v} {u} {w}");
            }
        }
    }

    #[test]
    fn basis_is_nodal() {
        for v in [XyVariant::HatA, XyVariant::HatB] {
            let mesh = MeshBasis::new(v);
            for (i, n) in mesh.nodes().iter().enumerate() {
                for j in 0..13 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((mesh.phi(j, n.x, n.y) - expect).abs() < 1e-9, "{v} node {} phi {j}", n.name);
                }
            }
        }
    }

    #[test]
    fn lambda_on_reference_triangle() {
        let mesh = MeshBasis::new(XyVariant::HatA);
        for (x, y) in [(0.5, 0.1), (0.3, 0.05), (0.7, 0.2), (0.5, 0.45)] {
            let (a, b) = mesh.lambda(x, y);
            assert!((a - 2.0 * y).abs() < 1e-12 && (b - (2.0 * x - 1.0)).abs() < 1e-12);
        }
        assert!((mesh.e0(0.5, 0.5) - 0.25).abs() < 1e-12);
        assert_eq!(mesh.e0(0.0, 0.0), 0.0);
        assert_eq!(mesh.e0(1.0, 0.0), 0.0);
    }

    #[test]
    fn layer_widths() {
        for (v, w) in [(XyVariant::HatA, 33), (XyVariant::HatB, 42)] {
            let net = build_xy_net(2, v);
            assert_eq!(net.relu_widths(), vec![w, 15, w, 15, w, 15]);
            assert_eq!(net.input_dim(), 2);
            assert_eq!(net.output_dim(), 1);
        }
    }

    #[test]
    fn zero_terms_is_e0() {
        for v in [XyVariant::HatA, XyVariant::HatB] {
            let net = build_xy_net(0, v);
            let mesh = MeshBasis::new(v);
            for i in 0..=20 {
                for j in 0..=20 {
                    let (x, y) = (i as f64 / 10.0 - 1.0, j as f64 / 10.0 - 1.0);
                    let out = net.forward(&[x, y]).unwrap()[0];
                    assert!((out - mesh.e0(x, y)).abs() < 1e-12);
                }
            }
        }
    }
}
