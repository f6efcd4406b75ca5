use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_model, Model, ModelSpec};
use crate::error::{invalid, Error, Result};
use crate::nn::{PlateauSchedule, Sgd};
use crate::pipeline::Dataset;
use crate::seed;

/// Samples per gradient work unit; batch gradients are summed unit by unit in
/// index order, so thread count never changes the result.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub max_epochs: usize,
    pub momentum: f64,
    /// Stop after this many epochs without a validation improvement.
    pub early_stop: usize,
    /// Start the output bias at the mean training label.
    pub init_bias_to_mean: bool,
    #[serde(with = "crate::seed::as_string")]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            base_lr: 1e-3,
            lr_factor: 0.5,
            lr_patience: 50,
            max_epochs: 2000,
            momentum: 0.0,
            early_stop: 200,
            init_bias_to_mean: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch size must be >= 1"));
        }
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return Err(invalid("learning rate must be finite and >= 0"));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) || self.lr_patience == 0 {
            return Err(invalid("lr factor must be in (0, 1) and patience >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must be in [0, 1)"));
        }
        if self.early_stop == 0 {
            return Err(invalid("early stop patience must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub history: Vec<EpochStats>,
    /// Validation MSE before the first update.
    pub initial_val_mse: f64,
    /// Epoch whose parameters are kept (0 = initialization).
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub skipped_batches: usize,
    pub normalization_hash: u32,
}

const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_EPOCHS: usize = 20;

fn batch_gradient(model: &Model, inputs: &[Vec<f64>], labels: &[f64], batch: &[usize]) -> (Vec<Vec<f64>>, f64) {
    let parts: Vec<(Vec<Vec<f64>>, f64)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = model.net.zero_grads();
            let mut sse = 0.0;
            for &i in chunk {
                let (out, caches) = model.net.forward_train(&inputs[i]).expect("shape checked");
                let err = out[0] - labels[i];
                sse += err * err;
                model.net.backward(&caches, &[2.0 * err / batch.len() as f64], &mut g);
            }
            (g, sse)
        })
        .collect();
    let mut iter = parts.into_iter();
    let (mut grads, mut sse) = iter.next().expect("nonempty batch");
    for (g, s) in iter {
        for (a, b) in grads.iter_mut().zip(g) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        sse += s;
    }
    (grads, sse)
}

fn split_mse(model: &Model, inputs: &[Vec<f64>], labels: &[f64], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return f64::NAN;
    }
    let sse: f64 = idx
        .par_iter()
        .map(|&i| (model.net.forward(&inputs[i]).expect("shape checked")[0] - labels[i]).powi(2))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    sse / idx.len() as f64
}

/// Mini-batch gradient descent on the training split with the plateau
/// schedule, early stopping and best-epoch restoration. When the validation
/// split is empty the training loss is monitored instead.
pub fn train(spec: &ModelSpec, dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let mut model = build_model(spec)?;
    let train_idx = &dataset.split.train;
    if train_idx.is_empty() {
        return Err(invalid("training split is empty"));
    }
    if dataset.shape() != spec.input {
        return Err(Error::Incompatible {
            model: format!("{:?}", spec.input),
            bundle: format!("{:?}", dataset.shape()),
        });
    }
    let inputs: Vec<Vec<f64>> = dataset.samples.iter().map(|s| s.to_f64()).collect();
    let labels: Vec<f64> = dataset.samples.iter().map(|s| s.label).collect();
    if cfg.init_bias_to_mean {
        let mean = train_idx.iter().map(|&i| labels[i]).sum::<f64>() / train_idx.len() as f64;
        *model.net.params.last_mut().and_then(|p| p.last_mut()).expect("output bias") = mean;
    }
    let monitor: &[usize] = if dataset.split.val.is_empty() { train_idx } else { &dataset.split.val };
    let initial = split_mse(&model, &inputs, &labels, monitor);

    let mut schedule = PlateauSchedule::new(cfg.base_lr, cfg.lr_factor, cfg.lr_patience, initial)?;
    let mut opt = Sgd::new(cfg.momentum);
    let mut rng = seed::rng(seed::derive(cfg.seed, seed::stream::SHUFFLE));
    let mut order = train_idx.clone();
    let mut history = Vec::new();
    let mut best = (0, initial, model.net.params.clone());
    let mut skipped = 0;
    let mut diverging = 0;
    let mut lr = cfg.base_lr;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (grads, batch_sse) = batch_gradient(&model, &inputs, &labels, batch);
            sse += batch_sse;
            match opt.step(&mut model.net.params, &grads, lr) {
                Ok(()) => {}
                Err(Error::NonFiniteGradient { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        let train_mse = sse / order.len() as f64;
        let val_mse = split_mse(&model, &inputs, &labels, monitor);
        history.push(EpochStats { epoch, train_mse, val_mse, lr });

        if val_mse < best.1 {
            best = (epoch, val_mse, model.net.params.clone());
        }
        if !(val_mse <= DIVERGENCE_FACTOR * initial) {
            diverging += 1;
            if diverging >= DIVERGENCE_EPOCHS {
                return Err(Error::TrainingDiverged { epoch, val_mse, initial });
            }
        } else {
            diverging = 0;
        }
        lr = schedule.observe(val_mse);
        if epoch - best.0 >= cfg.early_stop {
            break;
        }
    }
    model.net.params = best.2;
    Ok(TrainedModel {
        model,
        history,
        initial_val_mse: initial,
        best_epoch: best.0,
        best_val_mse: best.1,
        skipped_batches: skipped,
        normalization_hash: dataset.normalization.as_ref().map_or(0, |n| n.hash()),
    })
}

/// `epoch,train_mse,val_mse,lr` per line.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_mse,val_mse,lr\n");
    for h in history {
        out.push_str(&format!("{},{},{},{}\n", h.epoch, h.train_mse, h.val_mse, h.lr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{evaluate, predict, Family};
    use crate::pipeline::{Manifest, Sample, SampleMeta, Split, Sweep, SCHEMA_VERSION};
    use rand::Rng;

    fn synthetic(n: usize, label: impl Fn(usize, &[f32]) -> f64, train: usize) -> Dataset {
        let mut rng = seed::rng(42);
        let samples = (0..n)
            .map(|i| {
                let data: Vec<f32> = (0..2 * 10).map(|_| rng.gen_range(0.0..1.0)).collect();
                Sample {
                    shape: [1, 2, 10],
                    label: label(i, &data),
                    data,
                    meta: SampleMeta { h: 0.0, pe: 0.0, window: [0.0, 1.0], snr_db: None, seed: 0 },
                }
            })
            .collect();
        Dataset {
            samples,
            normalization: None,
            split: Split { train: (0..train).collect(), val: (train..n).collect() },
            manifest: Manifest {
                schema_version: SCHEMA_VERSION,
                case: "synthetic".into(),
                rate: 10.0,
                window: [0.0, 1.0],
                features: vec![],
                buses: vec![0],
                bus_numbers: vec![1],
                probe_bus: 0,
                snr_db: None,
                seed: 0,
                sweep: Sweep { h: vec![], pe: vec![] },
                pe_step: 0.0,
                train_fraction: 0.8,
                repairs: 0,
                flags: vec![],
            },
        }
    }

    #[test]
    fn constant_label_is_fitted() {
        let d = synthetic(40, |_, _| 5.5, 32);
        let spec = ModelSpec::new(Family::Dnn, [1, 2, 10], 1);
        let cfg =
            TrainConfig { max_epochs: 200, init_bias_to_mean: false, base_lr: 0.01, momentum: 0.9, ..Default::default() };
        let t = train(&spec, &d, &cfg).unwrap();
        for &i in &d.split.val {
            assert!((predict(&t.model, &d.samples[i]).unwrap() - 5.5).abs() < 0.05);
        }
    }

    #[test]
    fn single_sample_is_memorized() {
        let d = synthetic(1, |_, _| 4.0, 1);
        let spec = ModelSpec::new(Family::Cnn, [1, 2, 10], 2);
        let cfg = TrainConfig { max_epochs: 2000, init_bias_to_mean: false, base_lr: 1e-2, ..Default::default() };
        let t = train(&spec, &d, &cfg).unwrap();
        assert!(t.history.last().unwrap().train_mse < 1e-4);
    }

    #[test]
    fn zero_lr_keeps_validation_loss() {
        let d = synthetic(40, |i, _| 3.0 + (i % 5) as f64, 30);
        let spec = ModelSpec::new(Family::Dnn, [1, 2, 10], 3);
        let cfg = TrainConfig { max_epochs: 5, base_lr: 0.0, ..Default::default() };
        let t = train(&spec, &d, &cfg).unwrap();
        assert!(t.history.iter().all(|h| h.val_mse == t.initial_val_mse));
        assert_eq!(t.best_epoch, 0);
    }

    #[test]
    fn deterministic_and_best_epoch_replays() {
        let d = synthetic(48, |_, x| 3.0 + 5.0 * x[0] as f64, 40);
        let spec = ModelSpec::new(Family::Dnn, [1, 2, 10], 4);
        let cfg = TrainConfig { max_epochs: 30, base_lr: 0.01, momentum: 0.9, ..Default::default() };
        let a = train(&spec, &d, &cfg).unwrap();
        let b = train(&spec, &d, &cfg).unwrap();
        assert_eq!(a, b);
        let m = evaluate(&a.model, &d, &d.split.val, 0.5).unwrap();
        assert_eq!(m.mse, a.best_val_mse);
        let csv = history_csv(&a.history);
        assert_eq!(csv.lines().count(), a.history.len() + 1);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let d = synthetic(10, |_, _| 3.0, 8);
        let spec = ModelSpec::new(Family::Dnn, [1, 2, 10], 5);
        let cfg = TrainConfig { max_epochs: 0, init_bias_to_mean: false, ..Default::default() };
        let t = train(&spec, &d, &cfg).unwrap();
        assert!(t.history.is_empty());
        assert_eq!(t.model, build_model(&spec).unwrap());
    }
}
