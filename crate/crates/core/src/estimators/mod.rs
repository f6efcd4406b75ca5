//! The four inertia regressors, their training loop and evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::PowerSystem;
use crate::nn::{renormalized_adjacency, Activation, CellKind, Layer, Network};
use crate::pipeline::{Dataset, Sample};

mod checkpoint;
mod metrics;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use metrics::{evaluate, metrics_from, Metrics};
pub use train::{history_csv, train, EpochStats, TrainConfig, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Dnn,
    Cnn,
    Lrcn,
    Gcn,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Dnn, Family::Cnn, Family::Lrcn, Family::Gcn];

    pub fn name(self) -> &'static str {
        match self {
            Family::Dnn => "dnn",
            Family::Cnn => "cnn",
            Family::Lrcn => "lrcn",
            Family::Gcn => "gcn",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(s.trim()))
    }

    /// Hidden fully connected sizes ahead of the scalar output.
    pub fn default_fc(self) -> Vec<usize> {
        match self {
            Family::Dnn => vec![128, 64],
            Family::Cnn => vec![64],
            Family::Lrcn => vec![64, 32],
            Family::Gcn => vec![64, 128],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    /// `[buses, features, steps]`.
    pub input: [usize; 3],
    pub conv_channels: [usize; 2],
    pub kernel: usize,
    pub lstm_units: usize,
    pub cell: CellKind,
    pub gcn_hidden: usize,
    pub fc: Vec<usize>,
    /// Observed-bus adjacency (GCN only), in the dataset's bus order.
    pub adjacency: Option<Vec<Vec<u8>>>,
    #[serde(with = "crate::seed::as_string")]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: Family, input: [usize; 3], seed: u64) -> Self {
        ModelSpec {
            family,
            input,
            conv_channels: [10, 20],
            kernel: 3,
            lstm_units: 32,
            cell: CellKind::Standard,
            gcn_hidden: 32,
            fc: family.default_fc(),
            adjacency: None,
            seed,
        }
    }

    /// Spec matching a dataset's tensor shape; GCN gets the subgraph induced
    /// by the dataset's buses.
    pub fn for_dataset(family: Family, sys: &PowerSystem, dataset: &Dataset, seed: u64) -> Self {
        let mut spec = ModelSpec::new(family, dataset.shape(), seed);
        if family == Family::Gcn {
            spec.adjacency = Some(induced_adjacency(sys, &dataset.manifest.buses));
        }
        spec
    }
}

/// Adjacency among `buses` (internal indices), in that order.
pub fn induced_adjacency(sys: &PowerSystem, buses: &[usize]) -> Vec<Vec<u8>> {
    let full = sys.adjacency();
    buses.iter().map(|&i| buses.iter().map(|&j| full[i][j]).collect()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub net: Network,
}

fn head(layers: &mut Vec<Layer>, mut n_in: usize, fc: &[usize]) {
    for &n in fc {
        layers.push(Layer::Dense { n_in, n_out: n, act: Activation::Relu });
        n_in = n;
    }
    layers.push(Layer::Dense { n_in, n_out: 1, act: Activation::Identity });
}

pub fn build_model(spec: &ModelSpec) -> Result<Model> {
    let [b, f, t] = spec.input;
    if b == 0 || f == 0 || t == 0 {
        return Err(invalid(format!("input shape {:?} has an empty axis", spec.input)));
    }
    let mut layers = Vec::new();
    match spec.family {
        Family::Dnn => head(&mut layers, b * f * t, &spec.fc),
        Family::Cnn | Family::Lrcn => {
            let [p, q] = spec.conv_channels;
            let k = spec.kernel;
            let l1 = t.checked_sub(k - 1).filter(|&l| l >= 2).ok_or_else(|| shape_err(spec))?;
            let l2 = (l1 / 2).checked_sub(k - 1).filter(|&l| l >= 2).ok_or_else(|| shape_err(spec))?;
            layers.push(Layer::Conv1d { c_in: b * f, c_out: p, k, len: t, act: Activation::Relu });
            layers.push(Layer::MaxPool { channels: p, len: l1 });
            layers.push(Layer::Conv1d { c_in: p, c_out: q, k, len: l1 / 2, act: Activation::Relu });
            layers.push(Layer::MaxPool { channels: q, len: l2 });
            if spec.family == Family::Cnn {
                head(&mut layers, q * (l2 / 2), &spec.fc);
            } else {
                layers.push(Layer::Lstm { n_in: q, units: spec.lstm_units, steps: l2 / 2, cell: spec.cell });
                head(&mut layers, spec.lstm_units, &spec.fc);
            }
        }
        Family::Gcn => {
            let adj = spec.adjacency.as_ref().ok_or_else(|| invalid("GCN spec needs an adjacency"))?;
            if adj.len() != b {
                return Err(shape_err(spec));
            }
            let op = renormalized_adjacency(adj)?;
            layers.push(Layer::Gcn { op, d_in: f * t, d_out: spec.gcn_hidden, act: Activation::Relu });
            layers.push(Layer::MeanNodes { n: b, d: spec.gcn_hidden });
            head(&mut layers, spec.gcn_hidden, &spec.fc);
        }
    }
    let net = Network::new(layers, spec.seed)?;
    Ok(Model { spec: spec.clone(), net })
}

fn shape_err(spec: &ModelSpec) -> Error {
    Error::Shape { expected: format!("input usable by {:?}", spec.family), got: format!("{:?}", spec.input) }
}

impl Model {
    fn check(&self, sample: &Sample) -> Result<()> {
        if sample.shape != self.spec.input {
            return Err(Error::Shape {
                expected: format!("{:?}", self.spec.input),
                got: format!("{:?}", sample.shape),
            });
        }
        Ok(())
    }

    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        Ok(self.net.forward(x)?[0])
    }
}

/// Inertia estimate in seconds for one normalized sample.
pub fn predict(model: &Model, sample: &Sample) -> Result<f64> {
    model.check(sample)?;
    model.predict_raw(&sample.to_f64())
}

pub fn predict_batch(model: &Model, samples: &[&Sample]) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    samples.par_iter().map(|s| predict(model, s)).collect()
}
