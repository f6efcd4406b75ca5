use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Family, TrainConfig};
use crate::grid::{build_ieee24, parse_case, PowerSystem};
use crate::nn::CellKind;
use crate::opp::{Objective, ZgibMode};
use crate::pipeline::{linspace, DatasetOptions, FeatureId, Sweep, SweepConfig, TARGET_RATE};
use crate::seed;
use crate::sim::{ProbeShape, SimConfig};

/// Everything a run needs. Missing keys take their defaults; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// `ieee24` or a path to a case file.
    pub case: String,
    /// Global seed; every random stream is derived from it.
    #[serde(with = "seed::as_string")]
    pub seed: u64,
    pub out: PathBuf,
    pub sweep: SweepSection,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    /// `train.seed` is overwritten by the global seed.
    pub train: TrainConfig,
    pub evaluate: EvaluateSection,
    pub opp: OppSection,
    pub featselect: FeatselectSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Inertia constants in seconds.
    pub h: Vec<f64>,
    /// Probe amplitudes, `pe_points` values evenly spaced in `[pe_min, pe_max]` pu.
    pub pe_min: f64,
    pub pe_max: f64,
    pub pe_points: usize,
    /// External bus number of the probe; absent means the highest-load bus.
    pub probe_bus: Option<usize>,
    pub shape: ProbeShape,
    /// Reporting rate after downsampling, samples per second.
    pub rate: f64,
    /// `sim.seed` is overwritten by a stream of the global seed.
    pub sim: SimConfig,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = Sweep::default();
        SweepSection {
            h: d.h,
            pe_min: 0.001,
            pe_max: 0.01,
            pe_points: 100,
            probe_bus: None,
            shape: ProbeShape::Step,
            rate: TARGET_RATE,
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// External bus numbers; empty means every generator bus.
    pub buses: Vec<usize>,
    pub features: Vec<FeatureId>,
    /// Seconds after the probe onset.
    pub window: [f64; 2],
    /// Absent means clean measurements.
    pub snr_db: Option<f64>,
    pub train_fraction: f64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetOptions::default();
        DatasetSection { buses: vec![], features: d.features, window: d.window, snr_db: None, train_fraction: d.train_fraction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub family: Family,
    pub cell: CellKind,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { family: Family::Lrcn, cell: CellKind::Standard }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    /// ACC tolerance in seconds; `inf` accepts every prediction.
    pub mu: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection { mu: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OppSection {
    pub budgets: Vec<usize>,
    pub zgib: bool,
    pub zgib_mode: ZgibMode,
    pub objective: Objective,
}

impl Default for OppSection {
    fn default() -> Self {
        OppSection { budgets: vec![2, 3, 4, 5], zgib: false, zgib_mode: ZgibMode::NeighborPairs, objective: Objective::MaxObservability }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatselectSection {
    pub candidates: Vec<FeatureId>,
    /// Training seeds averaged per subset.
    pub repeats: usize,
}

impl Default for FeatselectSection {
    fn default() -> Self {
        FeatselectSection { candidates: FeatureId::ALL.to_vec(), repeats: 1 }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: "ieee24".into(),
            seed: 0,
            out: PathBuf::from("out"),
            sweep: SweepSection::default(),
            dataset: DatasetSection::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            evaluate: EvaluateSection::default(),
            opp: OppSection::default(),
            featselect: FeatselectSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Propagates the global seed into the sections that carry their own.
    pub fn resolve(mut self) -> Result<RunConfig> {
        self.train.seed = self.seed;
        self.sweep.sim.seed = seed::derive(self.seed, seed::stream::SIMULATION);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sweep.h.is_empty() || self.sweep.pe_points == 0 {
            return bad("sweep needs at least one h and one P_E value".into());
        }
        if self.dataset.features.is_empty() {
            return bad("dataset.features is empty".into());
        }
        let [t0, t1] = self.dataset.window;
        if !(t0 >= 0.0 && t1 > t0) {
            return bad(format!("window {t0}:{t1} must satisfy 0 <= t0 < t1"));
        }
        if !(self.evaluate.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.evaluate.mu));
        }
        if self.featselect.repeats == 0 {
            return bad("featselect.repeats must be >= 1".into());
        }
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.sweep.sim.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn system(&self) -> Result<PowerSystem> {
        if self.case.eq_ignore_ascii_case("ieee24") {
            Ok(build_ieee24())
        } else {
            parse_case(&fs::read_to_string(&self.case)?)
        }
    }

    pub fn sweep(&self) -> Sweep {
        Sweep { h: self.sweep.h.clone(), pe: linspace(self.sweep.pe_min, self.sweep.pe_max, self.sweep.pe_points) }
    }

    pub fn sweep_config(&self, sys: &PowerSystem) -> Result<SweepConfig> {
        let probe_bus = match self.sweep.probe_bus {
            Some(n) => Some(bus_index(sys, n)?),
            None => None,
        };
        Ok(SweepConfig { probe_bus, shape: self.sweep.shape, sim: self.sweep.sim, rate: self.sweep.rate })
    }

    pub fn dataset_options(&self, sys: &PowerSystem) -> Result<DatasetOptions> {
        Ok(DatasetOptions {
            buses: self.dataset.buses.iter().map(|&n| bus_index(sys, n)).collect::<Result<_>>()?,
            features: self.dataset.features.clone(),
            window: self.dataset.window,
            snr_db: self.dataset.snr_db,
            seed: self.seed,
            train_fraction: self.dataset.train_fraction,
        })
    }
}

pub fn bus_index(sys: &PowerSystem, number: usize) -> Result<usize> {
    sys.bus_index(number).ok_or_else(|| Error::Config(format!("bus {number} is not in the case")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default().resolve().unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(c.sweep().len(), 1100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sede = 3"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("[train]\nlr = 0.1").is_err());
        let c = RunConfig::from_toml("seed = \"7\"\n[dataset]\nsnr_db = 45.0\nfeatures = [\"rocof\"]").unwrap();
        assert_eq!((c.seed, c.dataset.snr_db, c.dataset.features.clone()), (7, Some(45.0), vec![FeatureId::RoCoF]));
    }

    #[test]
    fn resolve_propagates_seed_and_validates() {
        let c = RunConfig { seed: 11, ..Default::default() }.resolve().unwrap();
        assert_eq!(c.train.seed, 11);
        assert_eq!(c.sweep.sim.seed, seed::derive(11, seed::stream::SIMULATION));
        let mut bad = RunConfig::default();
        bad.dataset.window = [1.0, 0.5];
        assert!(bad.resolve().is_err());
    }
}
