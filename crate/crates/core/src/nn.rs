//! Small fully connected Q-network trained by plain SGD, plus replay memory.

use std::io::{BufRead, Write};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEIGHT_FILE_MAGIC: &str = "RAILBEAM-QNET";
pub const WEIGHT_FILE_VERSION: u32 = 1;

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Softplus => {
                if z > 30.0 {
                    z
                } else {
                    z.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative expressed through the activated value `h`.
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Softplus => -(-h).exp_m1(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "softplus" => Some(Activation::Softplus),
            _ => None,
        }
    }
}

/// Affine layer, `weights` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            out.push(b + dot(row, x));
        }
    }
}

/// Dot product with independent partial sums so the loop vectorises.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
    activation: Activation,
}

/// Gradient of a scalar loss, shaped like the network it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= k);
            l.bias.iter_mut().for_each(|b| *b *= k);
        }
    }

    pub fn add(&mut self, other: &Gradients) -> Result<()> {
        check_shapes(&self.layers, &other.layers)?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|&v| v == 0.0))
    }
}

fn check_shapes(a: &[Dense], b: &[Dense]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    for (x, y) in a.iter().zip(b) {
        if x.inputs != y.inputs || x.outputs != y.outputs {
            return Err(Error::DimensionMismatch {
                expected: x.inputs * x.outputs,
                got: y.inputs * y.outputs,
            });
        }
    }
    Ok(())
}

impl QNetwork {
    /// Glorot-uniform weights and zero biases for layer sizes `sizes`
    /// (input first, output last).
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, activation)?;
        for l in &mut net.layers {
            let limit = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for w in &mut l.weights {
                *w = rng.gen_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "network needs at least two non-zero layer sizes, got {sizes:?}"
            )));
        }
        Ok(Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            activation,
        })
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Q-values for one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut acts = Vec::new();
        self.forward_cached(input, &mut acts);
        Ok(acts.pop().unwrap_or_default())
    }

    /// Fills `acts` with the input followed by every layer's output.
    fn forward_cached(&self, input: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.resize_with(self.layers.len() + 1, Vec::new);
        acts[0].clear();
        acts[0].extend_from_slice(input);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = acts.split_at_mut(i + 1);
            layer.affine(&done[i], &mut rest[0]);
            if i < last {
                rest[0]
                    .iter_mut()
                    .for_each(|z| *z = self.activation.apply(*z));
            }
        }
    }

    /// Accumulates `d_out * dQ_action/dparams` into `grad`.
    fn backward_single(
        &self,
        acts: &[Vec<f64>],
        action: usize,
        d_out: f64,
        grad: &mut Gradients,
        delta: &mut Vec<f64>,
        next: &mut Vec<f64>,
    ) {
        let last = self.layers.len() - 1;
        // output layer: only the taken action carries error
        {
            let layer = &self.layers[last];
            let g = &mut grad.layers[last];
            let h = &acts[last];
            let row = action * layer.inputs;
            for (gw, hv) in g.weights[row..row + layer.inputs].iter_mut().zip(h) {
                *gw += d_out * hv;
            }
            g.bias[action] += d_out;
            delta.clear();
            delta.extend(layer.weights[row..row + layer.inputs].iter().map(|w| w * d_out));
        }
        for li in (0..last).rev() {
            let layer = &self.layers[li];
            let h_out = &acts[li + 1];
            for (d, &h) in delta.iter_mut().zip(h_out) {
                *d *= self.activation.derivative_from_output(h);
            }
            let h_in = &acts[li];
            let g = &mut grad.layers[li];
            for (o, &d) in delta.iter().enumerate() {
                let row = o * layer.inputs;
                for (gw, hv) in g.weights[row..row + layer.inputs].iter_mut().zip(h_in) {
                    *gw += d * hv;
                }
                g.bias[o] += d;
            }
            if li > 0 {
                next.clear();
                next.resize(layer.inputs, 0.0);
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += w * d;
                    }
                }
                std::mem::swap(delta, next);
            }
        }
    }

    /// Writes the versioned text weight file.
    pub fn save<W: Write>(&self, mut w: W, meta: &WeightMeta) -> Result<()> {
        writeln!(w, "{WEIGHT_FILE_MAGIC} {WEIGHT_FILE_VERSION}")?;
        writeln!(w, "config_hash {}", meta.config_hash)?;
        writeln!(w, "seed {}", meta.seed)?;
        writeln!(w, "agent {}", meta.agent)?;
        writeln!(w, "activation {}", self.activation.name())?;
        let sizes: Vec<String> = self.sizes().iter().map(|s| s.to_string()).collect();
        writeln!(w, "sizes {}", sizes.join(" "))?;
        for (i, l) in self.layers.iter().enumerate() {
            writeln!(w, "layer {i} weights")?;
            for row in l.weights.chunks_exact(l.inputs) {
                writeln!(w, "{}", join_floats(row))?;
            }
            writeln!(w, "layer {i} bias")?;
            writeln!(w, "{}", join_floats(&l.bias))?;
        }
        writeln!(w, "end")?;
        Ok(())
    }

    /// Reads a file written by [`QNetwork::save`]; values round-trip bit-exactly.
    pub fn load<R: BufRead>(r: R) -> Result<(Self, WeightMeta)> {
        let mut lines = NumberedLines::new(r, "weight");
        let header = lines.next_line()?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(WEIGHT_FILE_MAGIC) {
            return Err(lines.error("missing weight-file magic"));
        }
        let version = parts.next().unwrap_or("");
        if version != WEIGHT_FILE_VERSION.to_string() {
            return Err(Error::Version {
                kind: "weight",
                found: version.to_string(),
                expected: WEIGHT_FILE_VERSION,
            });
        }
        let config_hash = lines.keyed("config_hash")?;
        let seed = lines
            .keyed("seed")?
            .parse()
            .map_err(|_| lines.error("seed is not an integer"))?;
        let agent = lines.keyed("agent")?;
        let activation = Activation::parse(&lines.keyed("activation")?)
            .ok_or_else(|| lines.error("unknown activation"))?;
        let sizes = lines
            .keyed("sizes")?
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| lines.error("bad layer sizes"))?;
        let mut net = Self::zeros(&sizes, activation).map_err(|e| lines.error(&e.to_string()))?;
        for i in 0..net.layers.len() {
            lines.expect(&format!("layer {i} weights"))?;
            let (inputs, outputs) = (net.layers[i].inputs, net.layers[i].outputs);
            let mut weights = Vec::with_capacity(inputs * outputs);
            for _ in 0..outputs {
                weights.extend(lines.floats(inputs)?);
            }
            net.layers[i].weights = weights;
            lines.expect(&format!("layer {i} bias"))?;
            net.layers[i].bias = lines.floats(outputs)?;
        }
        lines.expect("end")?;
        Ok((
            net,
            WeightMeta {
                config_hash,
                seed,
                agent,
            },
        ))
    }
}

/// Provenance stored in weight and table files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightMeta {
    pub config_hash: String,
    pub seed: u64,
    pub agent: String,
}

pub(crate) fn join_floats(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Line reader that tracks line numbers for diagnostics.
pub(crate) struct NumberedLines<R> {
    inner: std::io::Lines<R>,
    line: usize,
    kind: &'static str,
}

impl<R: BufRead> NumberedLines<R> {
    pub(crate) fn new(r: R, kind: &'static str) -> Self {
        Self {
            inner: r.lines(),
            line: 0,
            kind,
        }
    }

    pub(crate) fn error(&self, message: &str) -> Error {
        Error::Format {
            kind: self.kind,
            line: self.line,
            message: message.to_string(),
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.error("unexpected end of file")),
        }
    }

    pub(crate) fn keyed(&mut self, key: &str) -> Result<String> {
        let l = self.next_line()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ if l == key => Ok(String::new()),
            _ => Err(self.error(&format!("expected `{key} <value>`"))),
        }
    }

    pub(crate) fn expect(&mut self, text: &str) -> Result<()> {
        let l = self.next_line()?;
        if l.trim() == text {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{text}`")))
        }
    }

    pub(crate) fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let l = self.next_line()?;
        let v = l
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| self.error("bad number"))?;
        if v.len() != n {
            return Err(self.error(&format!("expected {n} values, found {}", v.len())));
        }
        Ok(v)
    }
}

/// One experience tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions with uniform minibatch sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T = Transition> {
    capacity: usize,
    items: Vec<T>,
    next: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores `t`, overwriting the oldest entry once full.
    pub fn push(&mut self, t: T) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `batch` distinct transitions, or `None` while fewer are stored.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Option<Vec<&T>> {
        if batch == 0 || self.items.len() < batch {
            return None;
        }
        Some(
            index::sample(rng, self.items.len(), batch)
                .into_iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}

/// Mean squared TD error over `batch` and its gradient with respect to `params`.
///
/// Targets come from `target`: `y = r` for terminal samples, otherwise
/// `y = r + discount * max_a' Q_target(s', a')`. Targets are held constant.
pub fn td_loss(
    params: &QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    discount: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_shapes(&params.layers, &target.layers)?;
    let mut samples = Vec::with_capacity(batch.len());
    for t in batch {
        let y = if t.terminal {
            t.reward
        } else {
            t.reward + discount * max_value(&target.forward(&t.next_state)?)
        };
        samples.push((t.state.as_slice(), t.action, y));
    }
    q_regression(params, &samples)
}

/// Largest entry of a Q-vector.
pub fn max_value(q: &[f64]) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Mean of `(y - Q(s, a))^2` over `(s, a, y)` samples with fixed targets `y`,
/// and its gradient.
pub fn q_regression(params: &QNetwork, samples: &[(&[f64], usize, f64)]) -> Result<(f64, Gradients)> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = samples.len() as f64;
    let mut grad = Gradients::zeros_like(params);
    let mut acts = Vec::new();
    let (mut delta, mut next) = (Vec::new(), Vec::new());
    let mut loss = 0.0;
    for &(state, action, y) in samples {
        if state.len() != params.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.input_dim(),
                got: state.len(),
            });
        }
        if action >= params.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.output_dim(),
                got: action + 1,
            });
        }
        params.forward_cached(state, &mut acts);
        let err = y - acts[acts.len() - 1][action];
        loss += err * err;
        params.backward_single(&acts, action, -2.0 * err / n, &mut grad, &mut delta, &mut next);
    }
    Ok((loss / n, grad))
}

/// In-place update `params <- params - lr * grad`.
pub fn sgd_step(params: &mut QNetwork, grad: &Gradients, lr: f64) -> Result<()> {
    check_shapes(&params.layers, &grad.layers)?;
    for (p, g) in params.layers.iter_mut().zip(&grad.layers) {
        p.weights
            .iter_mut()
            .zip(&g.weights)
            .for_each(|(w, d)| *w -= lr * d);
        p.bias.iter_mut().zip(&g.bias).for_each(|(b, d)| *b -= lr * d);
    }
    Ok(())
}

/// Target-network copy; later updates to `params` do not reach it.
pub fn sync_target(params: &QNetwork) -> QNetwork {
    params.clone()
}
