use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Parse(format!("unknown activation `{other}`"))),
        }
    }
}

/// Fully-connected network. Hidden layers use `hidden_activation`, the output layer is linear.
///
/// Layer `l` maps `layer_dims[l]` inputs to `layer_dims[l + 1]` outputs; its weight
/// matrix is stored row-major with one row per output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(crate) layer_dims: Vec<usize>,
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
    pub(crate) hidden_activation: Activation,
}

impl MlpModel {
    pub fn zeros(layer_dims: &[usize], hidden_activation: Activation) -> Result<Self> {
        validate_dims(layer_dims)?;
        let weights = layer_dims.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = layer_dims[1..].iter().map(|&o| vec![0.0; o]).collect();
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            hidden_activation,
        })
    }

    /// Builds a model from explicit per-layer weights and biases.
    pub fn from_parts(
        layer_dims: &[usize],
        hidden_activation: Activation,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_dims(layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::invalid("weights/biases do not match the number of layers"));
        }
        for l in 0..layers {
            if weights[l].len() != layer_dims[l] * layer_dims[l + 1] || biases[l].len() != layer_dims[l + 1] {
                return Err(Error::invalid(format!("layer {l} has inconsistent shape")));
            }
        }
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            hidden_activation,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Same architecture check used by attacks before reading a target.
    pub fn same_architecture(&self, other: &MlpModel) -> bool {
        self.layer_dims == other.layer_dims && self.hidden_activation == other.hidden_activation
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            Activation::Linear
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has length {}, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut ws = Workspace::new(self);
        self.forward_ws(x, &mut ws);
        Ok(ws.acts.last().unwrap().clone())
    }

    /// Forward pass for scalar-output models; panics on dimension mismatch.
    pub fn predict(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        self.forward_ws(x, ws);
        ws.acts.last().unwrap()[0]
    }

    /// Fills `ws` with pre-activations and activations for input `x`.
    pub(crate) fn forward_ws(&self, x: &[f64], ws: &mut Workspace) {
        ws.acts[0].copy_from_slice(x);
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let act = self.activation_for(l);
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            let pre = &mut ws.pre[l];
            let w = &self.weights[l];
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut z = self.biases[l][j];
                for (a, b) in row.iter().zip(input.iter()) {
                    z += a * b;
                }
                pre[j] = z;
                out[j] = act.apply(z);
            }
        }
    }

    /// Accumulates `dout * d(output[0])/d(params)` into `grads`, using the
    /// activations left in `ws` by the preceding forward pass.
    pub(crate) fn backprop_ws(&self, ws: &mut Workspace, dout: f64, grads: &mut Gradients) {
        let last = self.num_layers() - 1;
        ws.deltas[last].iter_mut().for_each(|d| *d = 0.0);
        ws.deltas[last][0] = dout;
        for l in (0..=last).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let act = self.activation_for(l);
            for j in 0..n_out {
                ws.deltas[l][j] *= act.derivative(ws.pre[l][j]);
            }
            let input = &ws.acts[l];
            let gw = &mut grads.weights[l];
            for j in 0..n_out {
                let dj = ws.deltas[l][j];
                if dj == 0.0 {
                    continue;
                }
                grads.biases[l][j] += dj;
                let row = &mut gw[j * n_in..(j + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input.iter()) {
                    *g += dj * a;
                }
            }
            if l > 0 {
                let (lower, upper) = ws.deltas.split_at_mut(l);
                let below = &mut lower[l - 1];
                below.iter_mut().for_each(|d| *d = 0.0);
                let w = &self.weights[l];
                for j in 0..n_out {
                    let dj = upper[0][j];
                    if dj == 0.0 {
                        continue;
                    }
                    let row = &w[j * n_in..(j + 1) * n_in];
                    for (b, wv) in below.iter_mut().zip(row) {
                        *b += dj * wv;
                    }
                }
            }
        }
    }

    /// Gradient of the first output with respect to the input vector.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid("input dimension mismatch"));
        }
        let mut ws = Workspace::new(self);
        self.forward_ws(x, &mut ws);
        let last = self.num_layers() - 1;
        let mut delta = vec![0.0; self.output_dim()];
        delta[0] = 1.0;
        for l in (0..=last).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let act = self.activation_for(l);
            let mut below = vec![0.0; n_in];
            for j in 0..n_out {
                let dj = delta[j] * act.derivative(ws.pre[l][j]);
                for (b, wv) in below.iter_mut().zip(&self.weights[l][j * n_in..(j + 1) * n_in]) {
                    *b += dj * wv;
                }
            }
            delta = below;
        }
        Ok(delta)
    }

    /// Mean squared error of the first output over a dataset.
    pub fn mse(&self, data: &crate::numerics::Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let mut ws = Workspace::new(self);
        let mut acc = 0.0;
        for (x, y) in data.rows().zip(data.labels()) {
            let r = self.predict(x, &mut ws) - y;
            acc += r * r;
        }
        acc / data.n() as f64
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("MLP ");
        out.push_str(&self.hidden_activation.to_string());
        for d in &self.layer_dims {
            out.push_str(&format!(" {d}"));
        }
        out.push('\n');
        for w in &self.weights {
            out.push_str(&format_line(w));
            out.push('\n');
        }
        for b in &self.biases {
            out.push_str(&format_line(b));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty model text".into()))?;
        let mut tok = header.split_whitespace();
        if tok.next() != Some("MLP") {
            return Err(Error::Parse(format!("bad model header `{header}`")));
        }
        let activation: Activation = tok
            .next()
            .ok_or_else(|| Error::Parse("missing activation".into()))?
            .parse()?;
        let dims: Vec<usize> = tok
            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("layer dim `{t}`: {e}"))))
            .collect::<Result<_>>()?;
        validate_dims(&dims)?;
        let layers = dims.len() - 1;
        let mut read_line = |what: &str, l: usize, len: usize| -> Result<Vec<f64>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what} line for layer {l}")))?;
            let vals = parse_line(line)?;
            if vals.len() != len {
                return Err(Error::Parse(format!(
                    "{what} line for layer {l} has {} values, expected {len}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let mut weights = Vec::with_capacity(layers);
        for l in 0..layers {
            weights.push(read_line("weight", l, dims[l] * dims[l + 1])?);
        }
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            biases.push(read_line("bias", l, dims[l + 1])?);
        }
        MlpModel::from_parts(&dims, activation, weights, biases)
    }
}

/// 17 significant digits: enough for an exact f64 round trip.
pub(crate) fn format_line(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ")
}

pub(crate) fn parse_line(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("number `{t}`: {e}"))))
        .collect()
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::invalid("a network needs at least an input and an output layer"));
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::invalid("layer widths must be positive"));
    }
    Ok(())
}

/// Scratch buffers for forward and backward passes.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(model: &MlpModel) -> Self {
        Workspace {
            acts: model.layer_dims.iter().map(|&d| vec![0.0; d]).collect(),
            pre: model.layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
            deltas: model.layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
        }
    }
}

/// Parameter-shaped gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn clear(&mut self) {
        self.weights.iter_mut().flatten().for_each(|g| *g = 0.0);
        self.biases.iter_mut().flatten().for_each(|g| *g = 0.0);
    }

    /// Weights then biases, layer by layer (same order as `flatten_params`).
    pub fn to_flat(&self) -> Vec<f64> {
        self.weights.iter().flatten().chain(self.biases.iter().flatten()).copied().collect()
    }
}

/// Draws every weight and bias i.i.d. from N(0, weight_variance).
pub fn random_init(
    layer_dims: &[usize],
    hidden_activation: Activation,
    weight_variance: f64,
    rng: &mut SeededRng,
) -> Result<MlpModel> {
    if !(weight_variance >= 0.0) {
        return Err(Error::invalid(format!("weight variance must be >= 0, got {weight_variance}")));
    }
    let mut m = MlpModel::zeros(layer_dims, hidden_activation)?;
    for w in m.weights.iter_mut().chain(m.biases.iter_mut()) {
        for v in w.iter_mut() {
            *v = rng.normal(0.0, weight_variance);
        }
    }
    Ok(m)
}

impl MlpModel {
    /// Applies `p -= lr * g` to every parameter.
    pub(crate) fn step(&mut self, grads: &Gradients, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            for (a, b) in w.iter_mut().zip(g) {
                *a -= lr * b;
            }
        }
        for (w, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (a, b) in w.iter_mut().zip(g) {
                *a -= lr * b;
            }
        }
    }

    pub(crate) fn params_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }
}
