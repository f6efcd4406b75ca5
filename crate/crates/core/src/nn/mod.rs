//! Small f64 layer library with hand-written backward passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

mod check;
mod graph;
mod kernels;
mod lstm;
mod optim;
mod payload;

pub use check::{grad_check, GradCheck, GRAD_FLOOR};
pub use graph::{gcn_backward, gcn_layer, gcn_preact, renormalized_adjacency, GraphOperator};
pub use kernels::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, maxpool1d, maxpool1d_backward,
};
pub use lstm::{lstm_sequence, lstm_sequence_backward, lstm_step, CellKind, LstmParams, LstmState, SequenceCache};
pub use optim::{mse, sgd_step, PlateauSchedule, Sgd, LR_FLOOR, MIN_IMPROVEMENT};
pub use payload::{decode_tensors, encode_tensors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, z: &[f64]) -> Vec<f64> {
        match self {
            Activation::Identity => z.to_vec(),
            Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
        }
    }

    fn backward(self, z: &[f64], dy: &[f64]) -> Vec<f64> {
        match self {
            Activation::Identity => dy.to_vec(),
            Activation::Relu => z.iter().zip(dy).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect(),
        }
    }
}

/// Layer description without parameters. Sizes are per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense { n_in: usize, n_out: usize, act: Activation },
    /// Input `[c_in][len]`, output `[c_out][len − k + 1]`.
    Conv1d { c_in: usize, c_out: usize, k: usize, len: usize, act: Activation },
    /// Width-2 pool over `[channels][len]`.
    MaxPool { channels: usize, len: usize },
    /// Sequence `[n_in][steps]` to the last hidden state `[units]`.
    Lstm { n_in: usize, units: usize, steps: usize, cell: CellKind },
    /// Node features `[n][d_in]` to `[n][d_out]`.
    Gcn { op: GraphOperator, d_in: usize, d_out: usize, act: Activation },
    /// Mean over nodes, `[n][d]` to `[d]`.
    MeanNodes { n: usize, d: usize },
}

impl Layer {
    pub fn in_size(&self) -> usize {
        match *self {
            Layer::Dense { n_in, .. } => n_in,
            Layer::Conv1d { c_in, len, .. } => c_in * len,
            Layer::MaxPool { channels, len } => channels * len,
            Layer::Lstm { n_in, steps, .. } => n_in * steps,
            Layer::Gcn { ref op, d_in, .. } => op.n * d_in,
            Layer::MeanNodes { n, d } => n * d,
        }
    }

    pub fn out_size(&self) -> usize {
        match *self {
            Layer::Dense { n_out, .. } => n_out,
            Layer::Conv1d { c_out, k, len, .. } => c_out * (len + 1 - k),
            Layer::MaxPool { channels, len } => channels * (len / 2),
            Layer::Lstm { units, .. } => units,
            Layer::Gcn { ref op, d_out, .. } => op.n * d_out,
            Layer::MeanNodes { d, .. } => d,
        }
    }

    /// (weight count, bias count).
    pub fn param_counts(&self) -> (usize, usize) {
        match *self {
            Layer::Dense { n_in, n_out, .. } => (n_in * n_out, n_out),
            Layer::Conv1d { c_in, c_out, k, .. } => (c_out * c_in * k, c_out),
            Layer::Lstm { n_in, units, cell, .. } => (cell.gates() * units * (n_in + units), cell.gates() * units),
            Layer::Gcn { d_in, d_out, .. } => (d_in * d_out, d_out),
            Layer::MaxPool { .. } | Layer::MeanNodes { .. } => (0, 0),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Layer::Conv1d { k, len, c_in, c_out, .. } => k >= 1 && k <= len && c_in > 0 && c_out > 0,
            Layer::MaxPool { len, channels } => len >= 2 && channels > 0,
            Layer::Lstm { n_in, units, steps, .. } => n_in > 0 && units > 0 && steps > 0,
            Layer::Gcn { ref op, d_in, d_out, .. } => op.v.len() == op.n * op.n && d_in > 0 && d_out > 0,
            Layer::Dense { n_in, n_out, .. } => n_in > 0 && n_out > 0,
            Layer::MeanNodes { n, d } => n > 0 && d > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Shape { expected: "consistent layer sizes".into(), got: format!("{self:?}") })
        }
    }

    fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        let (nw, nb) = self.param_counts();
        let limit = match *self {
            Layer::Dense { n_in, n_out, .. } => (6.0 / (n_in + n_out) as f64).sqrt(),
            Layer::Conv1d { c_in, c_out, k, .. } => (6.0 / ((c_in + c_out) * k) as f64).sqrt(),
            Layer::Gcn { d_in, d_out, .. } => (6.0 / (d_in + d_out) as f64).sqrt(),
            Layer::Lstm { units, .. } => 1.0 / (units as f64).sqrt(),
            _ => 0.0,
        };
        let mut p: Vec<f64> = (0..nw).map(|_| rng.gen_range(-limit..=limit)).collect();
        p.resize(nw + nb, 0.0);
        p
    }
}

/// Per-layer values kept from the forward pass.
#[derive(Debug, Clone)]
pub enum Cache {
    Affine { x: Vec<f64>, z: Vec<f64> },
    Pool { arg: Vec<usize> },
    Lstm(SequenceCache),
    Gcn { vf: Vec<f64>, z: Vec<f64> },
    Mean,
}

/// Sequential stack with one flat parameter vector per layer (weights, then
/// biases).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub params: Vec<Vec<f64>>,
}

impl Network {
    pub fn new(layers: Vec<Layer>, seed: u64) -> Result<Network> {
        if layers.is_empty() {
            return Err(Error::Shape { expected: "at least one layer".into(), got: "0".into() });
        }
        for l in &layers {
            l.validate()?;
        }
        for pair in layers.windows(2) {
            if pair[0].out_size() != pair[1].in_size() {
                return Err(Error::Shape {
                    expected: format!("{:?} input {}", pair[1], pair[1].in_size()),
                    got: pair[0].out_size().to_string(),
                });
            }
        }
        let mut rng = seed::rng(seed);
        let params = layers.iter().map(|l| l.init(&mut rng)).collect();
        Ok(Network { layers, params })
    }

    pub fn in_size(&self) -> usize {
        self.layers[0].in_size()
    }

    pub fn out_size(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_size)
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| vec![0.0; p.len()]).collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_size() {
            return Err(Error::Shape { expected: format!("input of {}", self.in_size()), got: x.len().to_string() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_train(x)?.0)
    }

    pub fn forward_train(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Cache>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for (layer, p) in self.layers.iter().zip(&self.params) {
            let (nw, _) = layer.param_counts();
            let (w, b) = p.split_at(nw);
            let (out, cache) = match layer {
                Layer::Dense { act, .. } => {
                    let z = dense_forward(&cur, w, b);
                    (act.apply(&z), Cache::Affine { x: cur, z })
                }
                Layer::Conv1d { c_in, k, act, .. } => {
                    let z = conv1d_forward(&cur, *c_in, w, b, *k)?;
                    (act.apply(&z), Cache::Affine { x: cur, z })
                }
                Layer::MaxPool { channels, .. } => {
                    let (y, arg) = maxpool1d(&cur, *channels)?;
                    (y, Cache::Pool { arg })
                }
                Layer::Lstm { n_in, units, cell, .. } => {
                    let lp = LstmParams { n_in: *n_in, units: *units, kind: *cell, w, b };
                    let (h, seq) = lstm_sequence(&lp, &cur)?;
                    (h, Cache::Lstm(seq))
                }
                Layer::Gcn { op, act, .. } => {
                    let (z, vf) = gcn_preact(op, &cur, w, b)?;
                    (act.apply(&z), Cache::Gcn { vf, z })
                }
                Layer::MeanNodes { n, d } => {
                    let mut m = vec![0.0; *d];
                    for i in 0..*n {
                        for (mv, &v) in m.iter_mut().zip(&cur[i * d..(i + 1) * d]) {
                            *mv += v;
                        }
                    }
                    m.iter_mut().for_each(|v| *v /= *n as f64);
                    (m, Cache::Mean)
                }
            };
            caches.push(cache);
            cur = out;
        }
        Ok((cur, caches))
    }

    /// Accumulates parameter gradients of `dyᵀ·output` into `grads` and
    /// returns the input gradient.
    pub fn backward(&self, caches: &[Cache], dy: &[f64], grads: &mut [Vec<f64>]) -> Vec<f64> {
        let mut g = dy.to_vec();
        for ((layer, cache), (p, gp)) in
            self.layers.iter().zip(caches).zip(self.params.iter().zip(grads.iter_mut())).rev()
        {
            let (nw, _) = layer.param_counts();
            let (w, _) = p.split_at(nw);
            let (dw, db) = gp.split_at_mut(nw);
            g = match (layer, cache) {
                (Layer::Dense { act, .. }, Cache::Affine { x, z }) => {
                    let dz = act.backward(z, &g);
                    dense_backward(x, w, &dz, dw, db)
                }
                (Layer::Conv1d { c_in, k, act, .. }, Cache::Affine { x, z }) => {
                    let dz = act.backward(z, &g);
                    conv1d_backward(x, *c_in, w, *k, &dz, dw, db)
                }
                (Layer::MaxPool { .. }, Cache::Pool { arg }) => maxpool1d_backward(arg, &g, layer.in_size()),
                (Layer::Lstm { n_in, units, cell, .. }, Cache::Lstm(seq)) => {
                    let (w, b) = p.split_at(nw);
                    let lp = LstmParams { n_in: *n_in, units: *units, kind: *cell, w, b };
                    lstm_sequence_backward(&lp, seq, &g, dw, db)
                }
                (Layer::Gcn { op, act, .. }, Cache::Gcn { vf, z }) => {
                    let dz = act.backward(z, &g);
                    gcn_backward(op, vf, w, &dz, dw, db)
                }
                (Layer::MeanNodes { n, d }, Cache::Mean) => {
                    let scale = 1.0 / *n as f64;
                    (0..n * d).map(|i| g[i % d] * scale).collect()
                }
                _ => unreachable!("cache does not match layer"),
            };
        }
        g
    }

    /// All parameters as one vector, layer by layer.
    pub fn flat_params(&self) -> Vec<f64> {
        self.params.concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut off = 0;
        for p in &mut self.params {
            let n = p.len();
            p.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().flatten().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Network {
        Network::new(
            vec![
                Layer::Conv1d { c_in: 2, c_out: 3, k: 3, len: 10, act: Activation::Relu },
                Layer::MaxPool { channels: 3, len: 8 },
                Layer::Lstm { n_in: 3, units: 4, steps: 4, cell: CellKind::Standard },
                Layer::Dense { n_in: 4, n_out: 1, act: Activation::Identity },
            ],
            7,
        )
        .unwrap()
    }

    #[test]
    fn same_seed_same_init() {
        assert_eq!(tiny(), tiny());
        assert_eq!(tiny().out_size(), 1);
    }

    #[test]
    fn shape_chain_is_checked() {
        let bad = Network::new(
            vec![
                Layer::Dense { n_in: 4, n_out: 3, act: Activation::Relu },
                Layer::Dense { n_in: 2, n_out: 1, act: Activation::Identity },
            ],
            0,
        );
        assert!(bad.is_err());
        assert!(tiny().forward(&[0.0; 5]).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let net = tiny();
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }
}
