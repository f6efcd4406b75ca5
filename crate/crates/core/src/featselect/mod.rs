//! Greedy forward wrapper selection over the measured feature kinds.
//!
//! Each round trains one fresh model per remaining candidate added to the
//! current set and keeps the best addition. The search stops as soon as no
//! addition strictly raises validation ACC.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimators::{evaluate, train, Family, Metrics, ModelSpec, TrainConfig};
use crate::grid::PowerSystem;
use crate::pipeline::{Dataset, FeatureId};
use crate::seed;

/// Builds a dataset holding only the given features.
pub type DatasetFactory<'a> = dyn Fn(&[FeatureId]) -> Result<Dataset> + Sync + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrapperConfig {
    pub family: Family,
    pub mu: f64,
    pub train: TrainConfig,
    /// Seeds averaged per subset; 1 keeps one fixed seed for every subset.
    pub repeats: usize,
}

impl Default for WrapperConfig {
    fn default() -> Self {
        WrapperConfig { family: Family::Lrcn, mu: 0.5, train: TrainConfig::default(), repeats: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub round: usize,
    pub added: FeatureId,
    /// Current set plus `added`, in selection order.
    pub set: Vec<FeatureId>,
    /// `None` when training this subset failed.
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub trace: Vec<TraceEntry>,
    /// Features in the order they were added.
    pub chosen: Vec<FeatureId>,
    pub family: Family,
}

/// Trains a fresh model on the `subset` dataset and returns its validation
/// metrics.
pub fn score_subset(
    subset: &[FeatureId],
    factory: &DatasetFactory,
    sys: &PowerSystem,
    cfg: &WrapperConfig,
) -> Result<Metrics> {
    if subset.is_empty() {
        return Err(invalid("feature subset is empty"));
    }
    if cfg.repeats == 0 {
        return Err(invalid("repeats must be at least 1"));
    }
    let dataset = factory(subset)?;
    let runs = (0..cfg.repeats)
        .map(|r| {
            let s = if r == 0 { cfg.train.seed } else { seed::derive_indexed(cfg.train.seed, seed::stream::FEATSELECT, r as u64) };
            let spec = ModelSpec::for_dataset(cfg.family, sys, &dataset, seed::derive(s, seed::stream::INIT));
            let trained = train(&spec, &dataset, &TrainConfig { seed: s, ..cfg.train.clone() })?;
            evaluate(&trained.model, &dataset, &dataset.split.val, cfg.mu)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(average(&runs))
}

fn average(runs: &[Metrics]) -> Metrics {
    if runs.len() == 1 {
        return runs[0];
    }
    let k = runs.len() as f64;
    let r2: Option<Vec<f64>> = runs.iter().map(|m| m.r2).collect();
    Metrics {
        acc: runs.iter().map(|m| m.acc).sum::<f64>() / k,
        mse: runs.iter().map(|m| m.mse).sum::<f64>() / k,
        r2: r2.map(|v| v.iter().sum::<f64>() / k),
        n: runs[0].n,
    }
}

/// Higher ACC first, then lower MSE, then earlier feature.
fn better(a: (&Metrics, FeatureId), b: (&Metrics, FeatureId)) -> Ordering {
    b.0.acc
        .total_cmp(&a.0.acc)
        .then(a.0.mse.total_cmp(&b.0.mse))
        .then(a.1.cmp(&b.1))
}

/// Greedy forward search driven by an arbitrary subset scorer.
pub fn greedy_forward_with<S>(candidates: &[FeatureId], family: Family, score: S) -> Result<SelectionResult>
where
    S: Fn(&[FeatureId]) -> Result<Metrics> + Sync,
{
    let mut pool: Vec<FeatureId> = candidates.to_vec();
    pool.sort();
    pool.dedup();
    if pool.is_empty() {
        return Err(invalid("no candidate features"));
    }
    let mut chosen: Vec<FeatureId> = Vec::new();
    let mut current_acc = 0.0;
    let mut trace = Vec::new();
    let mut round = 0;
    while chosen.len() < pool.len() {
        round += 1;
        let remaining: Vec<FeatureId> = pool.iter().copied().filter(|f| !chosen.contains(f)).collect();
        let results: Vec<(FeatureId, Vec<FeatureId>, Result<Metrics>)> = remaining
            .par_iter()
            .map(|&f| {
                let mut set = chosen.clone();
                set.push(f);
                let r = score(&set);
                (f, set, r)
            })
            .collect();
        let start = trace.len();
        let mut best: Option<(usize, Metrics, FeatureId)> = None;
        for (f, set, r) in results {
            let (metrics, error) = match r {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e.to_string())),
            };
            if let Some(m) = metrics {
                if best.as_ref().is_none_or(|(_, bm, bf)| better((&m, f), (bm, *bf)) == Ordering::Less) {
                    best = Some((trace.len(), m, f));
                }
            }
            trace.push(TraceEntry { round, added: f, set, metrics, error, selected: false });
        }
        let Some((at, m, f)) = best else {
            if round == 1 {
                let msgs: Vec<String> = trace[start..].iter().filter_map(|t| t.error.clone()).collect();
                return Err(Error::InvalidInput(format!("every candidate failed: {}", msgs.join("; "))));
            }
            break;
        };
        if m.acc <= current_acc {
            break;
        }
        trace[at].selected = true;
        current_acc = m.acc;
        chosen.push(f);
    }
    Ok(SelectionResult { trace, chosen, family })
}

/// Greedy forward search scoring each subset with [`score_subset`].
pub fn greedy_forward(
    candidates: &[FeatureId],
    factory: &DatasetFactory,
    sys: &PowerSystem,
    cfg: &WrapperConfig,
) -> Result<SelectionResult> {
    greedy_forward_with(candidates, cfg.family, |set| score_subset(set, factory, sys, cfg))
}

/// Factory restricting a dataset that already holds every candidate feature.
pub fn restricting(base: &Dataset) -> impl Fn(&[FeatureId]) -> Result<Dataset> + Sync + '_ {
    move |features| {
        let order: Vec<FeatureId> = base.manifest.features.iter().copied().filter(|f| features.contains(f)).collect();
        if order.len() != features.len() {
            return Err(invalid(format!("dataset lacks some of {features:?}")));
        }
        base.restrict(&base.manifest.buses, &order)
    }
}

/// CSV with columns round, candidate_added, acc, mse, r2, selected_flag.
pub fn trace_csv(result: &SelectionResult) -> String {
    let mut out = String::from("round,candidate_added,acc,mse,r2,selected_flag\n");
    for t in &result.trace {
        let (acc, mse, r2) = match &t.metrics {
            Some(m) => (m.acc.to_string(), m.mse.to_string(), m.r2.map_or(String::new(), |r| r.to_string())),
            None => Default::default(),
        };
        out.push_str(&format!("{},{},{},{},{},{}\n", t.round, t.added.name(), acc, mse, r2, t.selected as u8));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{Manifest, Sample, SampleMeta, Split, Sweep, SCHEMA_VERSION};
    use rand::Rng;
    use FeatureId::*;

    fn mocked<'a>(table: &'a [(&'a [FeatureId], f64)]) -> impl Fn(&[FeatureId]) -> Result<Metrics> + Sync + 'a {
        move |set| {
            let acc = table
                .iter()
                .find(|(k, _)| k.len() == set.len() && k.iter().all(|f| set.contains(f)))
                .map(|(_, a)| *a)
                .ok_or_else(|| invalid(format!("no mock for {set:?}")))?;
            Ok(Metrics { acc, mse: 1.0 - acc, r2: None, n: 220 })
        }
    }

    #[test]
    fn table_two_scores_pick_rocof_then_frequency() {
        // Subsets absent from the reported table get low filler scores.
        let table: &[(&[FeatureId], f64)] = &[
            (&[DeltaOmega], 0.8030),
            (&[RoCoF], 0.9689),
            (&[VoltMag], 0.40),
            (&[RoCoF, DeltaOmega], 0.9734),
            (&[RoCoF, VoltMag], 0.90),
            (&[DeltaOmega, RoCoF, VoltMag], 0.9576),
        ];
        let r = greedy_forward_with(&FeatureId::ALL, Family::Lrcn, mocked(table)).unwrap();
        assert_eq!(r.chosen, vec![RoCoF, DeltaOmega]);
        let last = r.trace.last().unwrap();
        assert_eq!((last.round, last.added, last.selected), (3, VoltMag, false));
        let path: Vec<f64> = r.trace.iter().filter(|t| t.selected).map(|t| t.metrics.unwrap().acc).collect();
        assert!(path.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_candidate_needs_positive_acc() {
        let r = greedy_forward_with(&[VoltMag], Family::Gcn, mocked(&[(&[VoltMag], 0.3)])).unwrap();
        assert_eq!((r.chosen.clone(), r.trace.len()), (vec![VoltMag], 1));
        let r = greedy_forward_with(&[VoltMag], Family::Gcn, mocked(&[(&[VoltMag], 0.0)])).unwrap();
        assert!(r.chosen.is_empty());
    }

    #[test]
    fn ties_fall_back_to_mse_then_order() {
        let score = |set: &[FeatureId]| -> Result<Metrics> {
            let mse = if set.contains(&VoltMag) { 0.1 } else { 0.2 };
            Ok(Metrics { acc: 0.5 * set.len().min(1) as f64, mse, r2: None, n: 1 })
        };
        let r = greedy_forward_with(&FeatureId::ALL, Family::Dnn, score).unwrap();
        assert_eq!(r.chosen, vec![VoltMag]);
        let score = |_: &[FeatureId]| -> Result<Metrics> { Ok(Metrics { acc: 0.5, mse: 0.1, r2: None, n: 1 }) };
        assert_eq!(greedy_forward_with(&[RoCoF, DeltaOmega], Family::Dnn, score).unwrap().chosen, vec![DeltaOmega]);
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let score = |set: &[FeatureId]| -> Result<Metrics> {
            if set.contains(&RoCoF) {
                Err(invalid("boom"))
            } else {
                Ok(Metrics { acc: 0.2 * set.len() as f64, mse: 1.0, r2: None, n: 1 })
            }
        };
        let r = greedy_forward_with(&FeatureId::ALL, Family::Cnn, score).unwrap();
        assert_eq!(r.chosen, vec![DeltaOmega, VoltMag]);
        assert!(r.trace.iter().any(|t| t.error.is_some() && t.added == RoCoF));
        let all_fail = |_: &[FeatureId]| -> Result<Metrics> { Err(invalid("boom")) };
        assert!(greedy_forward_with(&FeatureId::ALL, Family::Cnn, all_fail).is_err());
        assert!(greedy_forward_with(&[], Family::Cnn, all_fail).is_err());
    }

    #[test]
    fn csv_trace_layout() {
        let r = greedy_forward_with(&[RoCoF], Family::Lrcn, mocked(&[(&[RoCoF], 0.75)])).unwrap();
        assert_eq!(trace_csv(&r), "round,candidate_added,acc,mse,r2,selected_flag\n1,rocof,0.75,0.25,,1\n");
    }

    /// Label is an affine function of the first feature's mean; the second
    /// feature is seeded noise.
    fn oracle_dataset() -> Dataset {
        let mut rng = seed::rng(7);
        let n = 120;
        let samples = (0..n)
            .map(|_| {
                let level: f32 = rng.gen_range(0.0..1.0);
                let mut data: Vec<f32> = (0..10).map(|_| level).collect();
                data.extend((0..10).map(|_| rng.gen_range(0.0f32..1.0)));
                Sample {
                    shape: [1, 2, 10],
                    label: 3.0 + 5.0 * level as f64,
                    data,
                    meta: SampleMeta { h: 0.0, pe: 0.0, window: [0.0, 1.0], snr_db: None, seed: 0 },
                }
            })
            .collect();
        Dataset {
            samples,
            normalization: None,
            split: Split { train: (0..96).collect(), val: (96..n).collect() },
            manifest: Manifest {
                schema_version: SCHEMA_VERSION,
                case: "synthetic".into(),
                rate: 10.0,
                window: [0.0, 1.0],
                features: vec![DeltaOmega, RoCoF],
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
    fn informative_feature_wins_on_oracle_data() {
        let base = oracle_dataset();
        let sys = crate::grid::build_ieee24();
        let cfg = WrapperConfig {
            family: Family::Dnn,
            mu: 0.5,
            train: TrainConfig { max_epochs: 150, base_lr: 0.01, momentum: 0.9, ..Default::default() },
            repeats: 1,
        };
        let factory = restricting(&base);
        let r = greedy_forward(&[DeltaOmega, RoCoF], &factory, &sys, &cfg).unwrap();
        assert_eq!(r.chosen, vec![DeltaOmega]);
        let first = r.trace.iter().find(|t| t.selected).unwrap().metrics.unwrap();
        assert_eq!(first.acc, 1.0);
        let again = score_subset(&[DeltaOmega], &factory, &sys, &cfg).unwrap();
        assert_eq!(again, first);
    }
}
