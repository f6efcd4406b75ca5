use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_noise, downsample, extract_window, scrub_bad_data, FeatureId};
use crate::error::{invalid, Error, Result};
use crate::grid::{scale_inertia, PowerSystem};
use crate::seed;
use crate::sim::{sample_pmu, simulate, PmuRecord, ProbeShape, ProbingSignal, SimConfig};

pub const SCHEMA_VERSION: u32 = 1;
/// Reporting rate after downsampling.
pub const TARGET_RATE: f64 = 200.0;

/// Inertia and probe-amplitude grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub h: Vec<f64>,
    pub pe: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep { h: (0..11).map(|k| 3.0 + 0.5 * k as f64).collect(), pe: linspace(0.001, 0.01, 100) }
    }
}

impl Sweep {
    pub fn len(&self) -> usize {
        self.h.len() * self.pe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spacing of the probe amplitudes (0 for a single value).
    pub fn pe_step(&self) -> f64 {
        if self.pe.len() < 2 {
            0.0
        } else {
            (self.pe[self.pe.len() - 1] - self.pe[0]) / (self.pe.len() - 1) as f64
        }
    }

    /// (h, P_E) pairs in canonical order: h-major, both ascending as given.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.h.iter().flat_map(|&h| self.pe.iter().map(move |&p| (h, p))).collect()
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// How each sweep point is simulated and preprocessed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Internal index of the injection bus; `None` picks the highest-load bus.
    pub probe_bus: Option<usize>,
    pub shape: ProbeShape,
    pub sim: SimConfig,
    pub rate: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { probe_bus: None, shape: ProbeShape::Step, sim: SimConfig::default(), rate: TARGET_RATE }
    }
}

/// One scrubbed, downsampled record covering every bus and feature.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub h: f64,
    pub pe: f64,
    pub record: PmuRecord,
}

/// Runs one sweep point: simulate, sample every bus at the simulator rate,
/// scrub, downsample.
pub fn process_point(sys: &PowerSystem, h: f64, pe: f64, cfg: &SweepConfig) -> Result<SweepRecord> {
    let wrap = |e: Error| Error::SweepPoint { h, pe, source: Box::new(e) };
    let scaled = scale_inertia(sys, h).map_err(wrap)?;
    let bus = cfg.probe_bus.unwrap_or_else(|| sys.highest_load_bus());
    let probe = ProbingSignal { amplitude: pe, bus, shape: cfg.shape, start: 0.0 };
    let trace = simulate(&scaled, &probe, &cfg.sim).map_err(wrap)?;
    let all: Vec<usize> = (0..sys.n_buses()).collect();
    let raw = sample_pmu(&trace, &all, trace.rate()).map_err(wrap)?;
    let clean = scrub_bad_data(&raw).map_err(wrap)?;
    let record = downsample(&clean, cfg.rate).map_err(wrap)?;
    Ok(SweepRecord { h, pe, record })
}

/// Simulates the full sweep in parallel; output is in canonical order.
pub fn simulate_sweep(sys: &PowerSystem, sweep: &Sweep, cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    if sweep.is_empty() {
        return Err(invalid("sweep is empty"));
    }
    cfg.sim.validate()?;
    sweep.points().par_iter().map(|&(h, pe)| process_point(sys, h, pe, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub h: f64,
    pub pe: f64,
    pub window: [f64; 2],
    pub snr_db: Option<f64>,
    #[serde(with = "seed::as_string")]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `[buses, features, steps]`.
    pub shape: [usize; 3],
    pub data: Vec<f32>,
    /// System inertia constant, seconds.
    pub label: f64,
    pub meta: SampleMeta,
}

impl Sample {
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.shape[2];
        &self.data[c * n..(c + 1) * n]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

/// Per-channel min/max, channel index = bus slot · n_features + feature slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalization {
    pub fn apply(&self, sample: &mut Sample) {
        let n = sample.shape[2];
        for (c, chunk) in sample.data.chunks_mut(n).enumerate() {
            let (lo, hi) = (self.min[c], self.max[c]);
            for v in chunk {
                *v = if hi > lo { ((*v as f64 - lo) / (hi - lo)) as f32 } else { 0.5 };
            }
        }
    }

    pub fn invert(&self, c: usize, v: f64) -> f64 {
        self.min[c] + v * (self.max[c] - self.min[c])
    }

    /// Stable fingerprint used to match checkpoints with bundles.
    pub fn hash(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for v in self.min.iter().chain(&self.max) {
            h.update(&v.to_le_bytes());
        }
        h.finalize()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl Split {
    /// Seeded shuffle of `0..n`, first `round(fraction·n)` go to training.
    pub fn shuffled(n: usize, fraction: f64, seed: u64) -> Split {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut seed::rng(seed));
        let cut = ((n as f64 * fraction).round() as usize).clamp(n.min(1), n);
        let val = idx.split_off(cut);
        Split { train: idx, val }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub case: String,
    pub rate: f64,
    pub window: [f64; 2],
    pub features: Vec<FeatureId>,
    /// Internal indices of the measured buses.
    pub buses: Vec<usize>,
    /// External numbers of the measured buses.
    pub bus_numbers: Vec<usize>,
    /// Internal index of the injection bus.
    pub probe_bus: usize,
    pub snr_db: Option<f64>,
    #[serde(with = "seed::as_string")]
    pub seed: u64,
    pub sweep: Sweep,
    pub pe_step: f64,
    pub train_fraction: f64,
    pub repairs: usize,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub normalization: Option<Normalization>,
    pub split: Split,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn shape(&self) -> [usize; 3] {
        self.samples.first().map_or([0; 3], |s| s.shape)
    }

    pub fn labels(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.samples[i].label).collect()
    }

    /// Min/max normalization fitted on the training split only. Applying it to
    /// an already-normalized dataset is the identity; the stored constants are
    /// composed so they still invert to raw units.
    pub fn normalize(mut self) -> Result<Dataset> {
        if self.split.train.is_empty() {
            return Err(invalid("training split is empty"));
        }
        let [b, f, _] = self.shape();
        let nc = b * f;
        let mut lo = vec![f64::INFINITY; nc];
        let mut hi = vec![f64::NEG_INFINITY; nc];
        for &i in &self.split.train {
            let s = &self.samples[i];
            for c in 0..nc {
                for &v in s.channel(c) {
                    lo[c] = lo[c].min(v as f64);
                    hi[c] = hi[c].max(v as f64);
                }
            }
        }
        let fitted = Normalization { min: lo, max: hi };
        for s in &mut self.samples {
            fitted.apply(s);
        }
        self.normalization = Some(match self.normalization.take() {
            None => fitted,
            Some(prev) => Normalization {
                min: (0..nc).map(|c| prev.invert(c, fitted.min[c])).collect(),
                max: (0..nc).map(|c| prev.invert(c, fitted.max[c])).collect(),
            },
        });
        Ok(self)
    }

    /// Keeps only the channels of `buses` (internal indices) and `features`.
    /// Normalization constants follow their channels.
    pub fn restrict(&self, buses: &[usize], features: &[FeatureId]) -> Result<Dataset> {
        let m = &self.manifest;
        let bus_slots: Vec<usize> = m.buses.iter().enumerate().filter(|(_, b)| buses.contains(b)).map(|(i, _)| i).collect();
        let feat_slots: Vec<usize> =
            m.features.iter().enumerate().filter(|(_, f)| features.contains(f)).map(|(i, _)| i).collect();
        if bus_slots.len() != buses.len() || feat_slots.len() != features.len() || buses.is_empty() || features.is_empty() {
            return Err(invalid("restriction must name a nonempty subset of the dataset's buses and features"));
        }
        let nf = m.features.len();
        let channels: Vec<usize> =
            bus_slots.iter().flat_map(|&b| feat_slots.iter().map(move |&f| b * nf + f)).collect();
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                shape: [bus_slots.len(), feat_slots.len(), s.shape[2]],
                data: channels.iter().flat_map(|&c| s.channel(c).iter().copied()).collect(),
                label: s.label,
                meta: s.meta.clone(),
            })
            .collect();
        let normalization = self.normalization.as_ref().map(|n| Normalization {
            min: channels.iter().map(|&c| n.min[c]).collect(),
            max: channels.iter().map(|&c| n.max[c]).collect(),
        });
        let mut manifest = m.clone();
        manifest.buses = bus_slots.iter().map(|&i| m.buses[i]).collect();
        manifest.bus_numbers = bus_slots.iter().map(|&i| m.bus_numbers[i]).collect();
        manifest.features = feat_slots.iter().map(|&i| m.features[i]).collect();
        Ok(Dataset { samples, normalization, split: self.split.clone(), manifest })
    }
}

/// Which channels, window and noise level go into a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetOptions {
    /// Internal bus indices; empty means the generator buses.
    pub buses: Vec<usize>,
    pub features: Vec<FeatureId>,
    pub window: [f64; 2],
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            buses: vec![],
            features: vec![FeatureId::DeltaOmega, FeatureId::RoCoF],
            window: [0.0, 1.0],
            snr_db: None,
            seed: 0,
            train_fraction: 0.8,
        }
    }
}

/// Turns sweep records into a shuffled, split and normalized dataset.
pub fn build_dataset(
    sys: &PowerSystem,
    records: &[SweepRecord],
    sweep: &Sweep,
    sweep_cfg: &SweepConfig,
    opts: &DatasetOptions,
) -> Result<Dataset> {
    if records.is_empty() {
        return Err(invalid("no records"));
    }
    if opts.features.is_empty() {
        return Err(invalid("feature set is empty"));
    }
    if !(opts.train_fraction > 0.0 && opts.train_fraction <= 1.0) {
        return Err(invalid("train fraction must be in (0, 1]"));
    }
    let mut buses = if opts.buses.is_empty() { sys.generator_buses() } else { opts.buses.clone() };
    buses.sort_unstable();
    buses.dedup();
    if let Some(&b) = buses.iter().find(|&&b| b >= sys.n_buses()) {
        return Err(invalid(format!("bus index {b} out of range")));
    }
    let mut features = opts.features.clone();
    features.sort();
    features.dedup();
    let [t0, t1] = opts.window;

    let built: Vec<(Sample, PmuRecord)> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let sample_seed = seed::derive_indexed(opts.seed, seed::stream::NOISE, i as u64);
            let chosen = r.record.select_buses(&buses).select_features(&features);
            let noisy = match opts.snr_db {
                Some(snr) => add_noise(&chosen, snr, sample_seed)?,
                None => chosen,
            };
            let slab = extract_window(&noisy, t0, t1)?;
            let sample = Sample {
                shape: slab.shape,
                data: slab.data.iter().map(|&v| v as f32).collect(),
                label: r.h,
                meta: SampleMeta { h: r.h, pe: r.pe, window: opts.window, snr_db: opts.snr_db, seed: sample_seed },
            };
            Ok((sample, noisy))
        })
        .collect::<Result<_>>()?;

    let mut flags = Vec::new();
    let mut repairs = 0;
    for (r, (_, noisy)) in records.iter().zip(&built) {
        repairs += r.record.repairs;
        flags.extend(noisy.flags.iter().map(|f| format!("h={} pe={}: {f}", r.h, r.pe)));
    }
    let samples: Vec<Sample> = built.into_iter().map(|(s, _)| s).collect();
    let split = Split::shuffled(samples.len(), opts.train_fraction, seed::derive(opts.seed, seed::stream::SPLIT));
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        case: "ieee24".into(),
        rate: records[0].record.rate,
        window: opts.window,
        features,
        bus_numbers: buses.iter().map(|&b| sys.buses[b].number).collect(),
        buses,
        probe_bus: sweep_cfg.probe_bus.unwrap_or_else(|| sys.highest_load_bus()),
        snr_db: opts.snr_db,
        seed: opts.seed,
        sweep: sweep.clone(),
        pe_step: sweep.pe_step(),
        train_fraction: opts.train_fraction,
        repairs,
        flags,
    };
    Dataset { samples, normalization: None, split, manifest }.normalize()
}

/// Simulates the Cartesian product of `sweep_h × sweep_pe` and assembles the
/// dataset with default sweep settings.
pub fn assemble_dataset(
    sys: &PowerSystem,
    sweep_h: &[f64],
    sweep_pe: &[f64],
    features: &[FeatureId],
    window: [f64; 2],
    snr_db: Option<f64>,
    seed: u64,
) -> Result<Dataset> {
    let sweep = Sweep { h: sweep_h.to_vec(), pe: sweep_pe.to_vec() };
    let cfg = SweepConfig::default();
    let records = simulate_sweep(sys, &sweep, &cfg)?;
    let opts = DatasetOptions { features: features.to_vec(), window, snr_db, seed, ..Default::default() };
    build_dataset(sys, &records, &sweep, &cfg, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_ieee24;

    fn toy(values: &[[f32; 2]], train: Vec<usize>, val: Vec<usize>) -> Dataset {
        let samples = values
            .iter()
            .map(|v| Sample {
                shape: [1, 1, 2],
                data: v.to_vec(),
                label: 3.0,
                meta: SampleMeta { h: 3.0, pe: 0.001, window: [0.0, 1.0], snr_db: None, seed: 0 },
            })
            .collect();
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            case: "toy".into(),
            rate: 200.0,
            window: [0.0, 1.0],
            features: vec![FeatureId::DeltaOmega],
            buses: vec![0],
            bus_numbers: vec![1],
            probe_bus: 0,
            snr_db: None,
            seed: 0,
            sweep: Sweep { h: vec![3.0], pe: vec![0.001] },
            pe_step: 0.0,
            train_fraction: 0.8,
            repairs: 0,
            flags: vec![],
        };
        Dataset { samples, normalization: None, split: Split { train, val }, manifest }
    }

    #[test]
    fn default_sweep_shape() {
        let s = Sweep::default();
        assert_eq!(s.h.len(), 11);
        assert_eq!(s.h[10], 8.0);
        assert_eq!(s.pe.len(), 100);
        assert_eq!(s.pe[0], 0.001);
        assert!((s.pe[99] - 0.01).abs() < 1e-15);
        assert_eq!(s.len(), 1100);
    }

    #[test]
    fn affine_map_and_idempotence() {
        let d = toy(&[[-1.0, 1.0], [0.0, 0.5]], vec![0, 1], vec![]).normalize().unwrap();
        assert_eq!(d.samples[0].data, vec![0.0, 1.0]);
        assert_eq!(d.samples[1].data, vec![0.5, 0.75]);
        let again = d.clone().normalize().unwrap();
        assert_eq!(again.samples, d.samples);
        assert_eq!(again.normalization, d.normalization);
    }

    #[test]
    fn validation_is_not_clamped() {
        let d = toy(&[[0.0, 1.0], [2.0, -1.0]], vec![0], vec![1]).normalize().unwrap();
        assert_eq!(d.samples[1].data, vec![2.0, -1.0]);
    }

    #[test]
    fn degenerate_channel_is_half() {
        let d = toy(&[[4.0, 4.0], [4.0, 4.0]], vec![0, 1], vec![]).normalize().unwrap();
        assert!(d.samples.iter().all(|s| s.data == [0.5, 0.5]));
    }

    #[test]
    fn split_covers_disjointly() {
        let s = Split::shuffled(1100, 0.8, 9);
        assert_eq!((s.train.len(), s.val.len()), (880, 220));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1100).collect::<Vec<_>>());
        assert_eq!(Split::shuffled(1, 0.8, 0).train, vec![0]);
    }

    #[test]
    fn single_point_dataset() {
        let sys = build_ieee24();
        let d = assemble_dataset(&sys, &[4.0], &[0.005], &[FeatureId::RoCoF], [0.0, 1.0], None, 1).unwrap();
        assert_eq!(d.samples.len(), 1);
        assert_eq!(d.samples[0].shape, [11, 1, 200]);
        assert_eq!(d.samples[0].label, 4.0);
        assert_eq!(d.manifest.repairs, 0);
    }

    #[test]
    fn failing_point_is_identified() {
        let sys = build_ieee24();
        let err = assemble_dataset(&sys, &[4.0], &[0.5], &[FeatureId::RoCoF], [0.0, 1.0], None, 1).unwrap_err();
        assert!(matches!(err, Error::SweepPoint { h, pe, .. } if h == 4.0 && pe == 0.5));
    }

    #[test]
    fn restrict_keeps_channel_constants() {
        let sys = build_ieee24();
        let d = assemble_dataset(&sys, &[3.0, 6.0], &[0.002, 0.008], &FeatureId::ALL, [0.0, 1.0], Some(40.0), 3)
            .unwrap();
        let gens = sys.generator_buses();
        let r = d.restrict(&[gens[2]], &[FeatureId::RoCoF]).unwrap();
        assert_eq!(r.shape(), [1, 1, 200]);
        let c = 2 * 3 + 1;
        assert_eq!(r.samples[1].channel(0), d.samples[1].channel(c));
        let n = r.normalization.as_ref().unwrap();
        assert_eq!(n.min[0], d.normalization.as_ref().unwrap().min[c]);
    }
}
