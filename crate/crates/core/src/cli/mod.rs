//! `inertia` command line: simulate, train, evaluate, compare, featselect
//! and opp subcommands over on-disk bundles and checkpoints.
//!
//! Every command resolves a [`RunConfig`] (defaults, then `--config`, then
//! flags), echoes it to `<out>/config.toml` and holds `<out>/.lock` while it
//! runs.

use std::ffi::OsString;
use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimators::{
    history_csv, load_checkpoint, metrics_from, predict_batch, save_checkpoint, train, Family, Metrics, ModelSpec,
    TrainedModel,
};
use crate::featselect::{greedy_forward, restricting, trace_csv, SelectionResult, WrapperConfig};
use crate::opp::{detect_zgib, observability_csv, solve_opp, Objective, ObservabilityReport, Placement, Topology};
use crate::pipeline::{build_dataset, load_dataset, sample_to_csv, save_dataset, simulate_sweep, Dataset, FeatureId};
use crate::seed;

mod config;
pub mod svg;

pub use config::{
    bus_index, DatasetSection, EvaluateSection, FeatselectSection, ModelSection, OppSection, RunConfig, SweepSection,
};

#[derive(Debug, Parser)]
#[command(name = "inertia", version, about = "Inertia estimation from simulated PMU data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    /// `ieee24` or a case file path.
    #[arg(long, global = true)]
    pub case: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Measurement SNR in dB.
    #[arg(long, global = true)]
    pub snr: Option<f64>,
    /// Feature window in seconds, `t0:t1`.
    #[arg(long, global = true)]
    pub window: Option<String>,
    /// Comma-separated features: dw, rocof, v.
    #[arg(long, global = true)]
    pub features: Option<String>,
    /// Measured buses: `gen`, `all` or comma-separated bus numbers.
    #[arg(long, global = true)]
    pub buses: Option<String>,
    /// dnn, cnn, lrcn or gcn.
    #[arg(long, global = true)]
    pub family: Option<String>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// ACC tolerance in seconds (`inf` accepted).
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the sweep and write a dataset bundle to the output directory.
    Simulate {
        /// Also write one preprocessed trace CSV per inertia value.
        #[arg(long)]
        raw_traces: bool,
    },
    /// Train one model on a bundle.
    Train {
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Score a checkpoint on a bundle split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        /// train, val or all.
        #[arg(long, default_value = "val")]
        split: String,
    },
    /// Tabulate several checkpoints; each is matched to the bundle it was trained on.
    Compare {
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, required = true)]
        bundle: Vec<PathBuf>,
    },
    /// Greedy forward feature selection on a bundle holding every candidate.
    Featselect {
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Optimal PMU placement.
    Opp {
        /// Budgets as `3`, `2,4` or `2..5`.
        #[arg(long)]
        budget: Option<String>,
        /// Add ZGIB virtual edges.
        #[arg(long)]
        zgib: bool,
        /// max or full.
        #[arg(long)]
        objective: Option<String>,
        /// Write a copy of this bundle restricted to each placement's buses.
        #[arg(long)]
        restrict_bundle: Option<PathBuf>,
    },
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global, &cli.command)?;
    if cli.global.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let _lock = OutputLock::acquire(&cfg.out)?;
    fs::write(cfg.out.join("config.toml"), cfg.to_toml())?;
    match &cli.command {
        Command::Simulate { raw_traces } => {
            let d = cmd_simulate(&cfg, *raw_traces)?;
            let m = &d.manifest;
            println!(
                "{} samples ({} h x {} P_E), shape {:?}, split {}/{}, {} repairs, {} flags",
                d.samples.len(),
                m.sweep.h.len(),
                m.sweep.pe.len(),
                d.shape(),
                d.split.train.len(),
                d.split.val.len(),
                m.repairs,
                m.flags.len()
            );
        }
        Command::Train { bundle } => {
            let t = cmd_train(&cfg, bundle)?;
            println!(
                "{} epochs, best epoch {} val MSE {:.6} (initial {:.6})",
                t.history.len(),
                t.best_epoch,
                t.best_val_mse,
                t.initial_val_mse
            );
        }
        Command::Evaluate { checkpoint, bundle, split } => {
            let m = cmd_evaluate(&cfg, checkpoint, bundle, split)?;
            println!("n {} ACC {:.4} MSE {:.6} R2 {}", m.n, m.acc, m.mse, fmt_r2(m.r2));
        }
        Command::Compare { checkpoint, bundle } => {
            print!("{}", cmd_compare(&cfg, checkpoint, bundle)?);
        }
        Command::Featselect { bundle } => {
            let r = cmd_featselect(&cfg, bundle)?;
            let names: Vec<&str> = r.chosen.iter().map(|f| f.name()).collect();
            print!("{}", trace_csv(&r));
            println!("chosen: {}", names.join(", "));
        }
        Command::Opp { restrict_bundle, .. } => {
            let rows = cmd_opp(&cfg, restrict_bundle.as_deref())?;
            print!("{}", placement_table(&rows));
        }
    }
    Ok(())
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(g: &GlobalArgs, command: &Command) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &g.case {
        c.case = v.clone();
    }
    if let Some(v) = g.seed {
        c.seed = v;
    }
    if let Some(v) = g.snr {
        c.dataset.snr_db = Some(v);
    }
    if let Some(v) = &g.window {
        c.dataset.window = parse_window(v)?;
    }
    if let Some(v) = &g.features {
        c.dataset.features = parse_features(v)?;
    }
    if let Some(v) = &g.buses {
        c.dataset.buses = parse_buses(v, &c)?;
    }
    if let Some(v) = &g.family {
        c.model.family = Family::parse(v).ok_or_else(|| Error::Config(format!("unknown family {v:?}")))?;
    }
    if let Some(v) = g.epochs {
        c.train.max_epochs = v;
    }
    if let Some(v) = g.mu {
        c.evaluate.mu = v;
    }
    if let Some(v) = &g.out {
        c.out = v.clone();
    }
    if let Command::Opp { budget, zgib, objective, .. } = command {
        if let Some(b) = budget {
            c.opp.budgets = parse_budgets(b)?;
        }
        if *zgib {
            c.opp.zgib = true;
        }
        if let Some(o) = objective {
            c.opp.objective = Objective::parse(o).ok_or_else(|| Error::Config(format!("unknown objective {o:?}")))?;
        }
    }
    c.resolve()
}

pub fn parse_window(s: &str) -> Result<[f64; 2]> {
    let bad = || Error::Config(format!("window must look like t0:t1, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok([a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?])
}

pub fn parse_features(s: &str) -> Result<Vec<FeatureId>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| FeatureId::parse(p).ok_or_else(|| Error::Config(format!("unknown feature {p:?}"))))
        .collect()
}

fn parse_buses(s: &str, c: &RunConfig) -> Result<Vec<usize>> {
    match s.trim() {
        "gen" | "generators" => Ok(vec![]),
        "all" => Ok(c.system()?.buses.iter().map(|b| b.number).collect()),
        list => list
            .split(',')
            .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("bad bus number {p:?}"))))
            .collect(),
    }
}

pub fn parse_budgets(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("budget must look like 3, 2,4 or 2..5, got {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

/// Exclusive claim on an output directory, released on drop.
pub struct OutputLock(PathBuf);

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<OutputLock> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock(path)),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::Locked(dir.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn fmt_r2(r2: Option<f64>) -> String {
    r2.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

/// Simulates the configured sweep and writes the bundle into `cfg.out`.
pub fn cmd_simulate(cfg: &RunConfig, raw_traces: bool) -> Result<Dataset> {
    let sys = cfg.system()?;
    let sweep = cfg.sweep();
    let sweep_cfg = cfg.sweep_config(&sys)?;
    let records = simulate_sweep(&sys, &sweep, &sweep_cfg)?;
    let mut d = build_dataset(&sys, &records, &sweep, &sweep_cfg, &cfg.dataset_options(&sys)?)?;
    d.manifest.case = cfg.case.clone();
    save_dataset(&d, &cfg.out)?;
    let mut summary = String::from("h,pe,repairs\n");
    for r in &records {
        summary.push_str(&format!("{},{},{}\n", r.h, r.pe, r.record.repairs));
    }
    fs::write(cfg.out.join("sweep.csv"), summary)?;
    if raw_traces {
        let dir = cfg.out.join("traces");
        fs::create_dir_all(&dir)?;
        for &h in &sweep.h {
            if let Some(i) = d.samples.iter().position(|s| s.meta.h == h && s.meta.pe == sweep.pe[0]) {
                fs::write(dir.join(format!("h{h}_pe{}.csv", sweep.pe[0])), sample_to_csv(&d, i))?;
            }
        }
    }
    Ok(d)
}

fn model_spec(cfg: &RunConfig, d: &Dataset) -> Result<ModelSpec> {
    let sys = cfg.system()?;
    let mut spec = ModelSpec::for_dataset(cfg.model.family, &sys, d, seed::derive(cfg.seed, seed::stream::INIT));
    spec.cell = cfg.model.cell;
    Ok(spec)
}

/// Trains the configured family and writes the checkpoint, history CSV,
/// validation metrics and learning curve.
pub fn cmd_train(cfg: &RunConfig, bundle: &Path) -> Result<TrainedModel> {
    let d = load_dataset(bundle)?;
    let spec = model_spec(cfg, &d)?;
    let t = train(&spec, &d, &cfg.train)?;
    save_checkpoint(&t, &cfg.out.join("model.ckpt"))?;
    fs::write(cfg.out.join("history.csv"), history_csv(&t.history))?;
    if !d.split.val.is_empty() {
        let y_hat = predict_batch(&t.model, &d.split.val.iter().map(|&i| &d.samples[i]).collect::<Vec<_>>())?;
        let m = metrics_from(&d.labels(&d.split.val), &y_hat, cfg.evaluate.mu)?;
        fs::write(cfg.out.join("metrics.csv"), metrics_csv("val", cfg.evaluate.mu, &m))?;
    }
    let series = |f: fn(&crate::estimators::EpochStats) -> f64| t.history.iter().map(|h| (h.epoch as f64, f(h))).collect();
    let chart = svg::line_chart(
        &format!("{} learning curve", spec.family.name().to_uppercase()),
        "epoch",
        "MSE (s^2)",
        &[("train", series(|h| h.train_mse)), ("validation", series(|h| h.val_mse))],
    );
    fs::write(cfg.out.join("learning_curve.svg"), chart)?;
    Ok(t)
}

fn metrics_csv(split: &str, mu: f64, m: &Metrics) -> String {
    format!("split,n,mu,acc,mse,r2\n{split},{},{mu},{},{},{}\n", m.n, m.acc, m.mse, m.r2.map_or(String::new(), |v| v.to_string()))
}

fn split_indices(d: &Dataset, split: &str) -> Result<Vec<usize>> {
    match split {
        "val" => Ok(d.split.val.clone()),
        "train" => Ok(d.split.train.clone()),
        "all" => Ok((0..d.samples.len()).collect()),
        other => Err(Error::Config(format!("split must be train, val or all, got {other:?}"))),
    }
}

fn bundle_key(d: &Dataset) -> String {
    format!("shape {:?}, normalization {:08x}", d.shape(), d.normalization.as_ref().map_or(0, |n| n.hash()))
}

fn check_compatible(t: &TrainedModel, d: &Dataset) -> Result<()> {
    let hash = d.normalization.as_ref().map_or(0, |n| n.hash());
    if t.model.spec.input != d.shape() || t.normalization_hash != hash {
        return Err(Error::Incompatible {
            model: format!("shape {:?}, normalization {:08x}", t.model.spec.input, t.normalization_hash),
            bundle: bundle_key(d),
        });
    }
    Ok(())
}

/// Metrics on one split plus per-sample predictions, a scatter plot and an
/// absolute-error histogram.
pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path, bundle: &Path, split: &str) -> Result<Metrics> {
    let t = load_checkpoint(checkpoint)?;
    let d = load_dataset(bundle)?;
    check_compatible(&t, &d)?;
    let idx = split_indices(&d, split)?;
    let y = d.labels(&idx);
    let y_hat = predict_batch(&t.model, &idx.iter().map(|&i| &d.samples[i]).collect::<Vec<_>>())?;
    let m = metrics_from(&y, &y_hat, cfg.evaluate.mu)?;
    fs::write(cfg.out.join("metrics.csv"), metrics_csv(split, cfg.evaluate.mu, &m))?;
    let mut rows = String::from("index,y,y_hat,abs_error\n");
    for ((i, a), b) in idx.iter().zip(&y).zip(&y_hat) {
        rows.push_str(&format!("{i},{a},{b},{}\n", (a - b).abs()));
    }
    fs::write(cfg.out.join("predictions.csv"), rows)?;
    let pts: Vec<(f64, f64)> = y.iter().copied().zip(y_hat.iter().copied()).collect();
    fs::write(cfg.out.join("scatter.svg"), svg::scatter("Predicted inertia", "true H (s)", "predicted H (s)", &pts))?;
    let errs: Vec<f64> = pts.iter().map(|(a, b)| (a - b).abs()).collect();
    fs::write(cfg.out.join("error_hist.svg"), svg::histogram("Absolute error", "|error| (s)", &errs, 20))?;
    Ok(m)
}

fn bundle_label(d: &Dataset, path: &Path) -> String {
    let noise = d.manifest.snr_db.map_or_else(|| "clean".to_string(), |s| format!("snr{s}"));
    let dir = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    format!("{dir}:{noise}")
}

/// Long-form table (and an ACC pivot when several bundles are given) of
/// each checkpoint on the bundle it was trained on, from stored artifacts
/// only.
pub fn cmd_compare(cfg: &RunConfig, checkpoints: &[PathBuf], bundles: &[PathBuf]) -> Result<String> {
    if checkpoints.len() < 2 {
        return Err(Error::Config("compare needs at least two checkpoints".into()));
    }
    let data: Vec<(String, Dataset)> =
        bundles.iter().map(|p| Ok((String::new(), load_dataset(p)?))).collect::<Result<Vec<_>>>()?;
    let data: Vec<(String, Dataset)> =
        data.into_iter().zip(bundles).map(|((_, d), p)| (bundle_label(&d, p), d)).collect();
    let mut long = String::from("checkpoint,family,bundle,acc,r2,mse\n");
    let mut cells: Vec<(Family, usize, f64)> = Vec::new();
    for ck in checkpoints {
        let t = load_checkpoint(ck)?;
        let (bi, (label, d)) = data
            .iter()
            .enumerate()
            .find(|(_, (_, d))| check_compatible(&t, d).is_ok())
            .ok_or_else(|| Error::Incompatible {
                model: format!("{} ({:08x})", ck.display(), t.normalization_hash),
                bundle: data.iter().map(|(_, d)| bundle_key(d)).collect::<Vec<_>>().join("; "),
            })?;
        let idx = &d.split.val;
        let y_hat = predict_batch(&t.model, &idx.iter().map(|&i| &d.samples[i]).collect::<Vec<_>>())?;
        let m = metrics_from(&d.labels(idx), &y_hat, cfg.evaluate.mu)?;
        let fam = t.model.spec.family;
        long.push_str(&format!("{},{},{label},{},{},{}\n", ck.display(), fam.name(), m.acc, fmt_opt(m.r2), m.mse));
        cells.push((fam, bi, m.acc));
    }
    fs::write(cfg.out.join("comparison.csv"), &long)?;
    if data.len() > 1 {
        let mut pivot = format!("family,{}\n", data.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>().join(","));
        let mut fams: Vec<Family> = cells.iter().map(|c| c.0).collect();
        fams.sort();
        fams.dedup();
        for f in fams {
            let row: Vec<String> = (0..data.len())
                .map(|b| cells.iter().find(|c| c.0 == f && c.1 == b).map_or(String::new(), |c| c.2.to_string()))
                .collect();
            pivot.push_str(&format!("{},{}\n", f.name(), row.join(",")));
        }
        fs::write(cfg.out.join("comparison_acc.csv"), &pivot)?;
        return Ok(format!("{long}\n{pivot}"));
    }
    Ok(long)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Greedy forward selection with the configured family; writes the trace.
pub fn cmd_featselect(cfg: &RunConfig, bundle: &Path) -> Result<SelectionResult> {
    let d = load_dataset(bundle)?;
    let sys = cfg.system()?;
    let candidates: Vec<FeatureId> =
        cfg.featselect.candidates.iter().copied().filter(|f| d.manifest.features.contains(f)).collect();
    if candidates.is_empty() {
        return Err(Error::Config("bundle holds none of the candidate features".into()));
    }
    let wrapper = WrapperConfig {
        family: cfg.model.family,
        mu: cfg.evaluate.mu,
        train: cfg.train.clone(),
        repeats: cfg.featselect.repeats,
    };
    let factory = restricting(&d);
    let r = greedy_forward(&candidates, &factory, &sys, &wrapper)?;
    fs::write(cfg.out.join("featselect.csv"), trace_csv(&r))?;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementRow {
    pub budget: usize,
    /// External bus numbers.
    pub buses: Vec<usize>,
    pub placement: Placement,
    pub report: ObservabilityReport,
}

/// Solves every configured budget (or the minimum full placement) and
/// writes the placement table and per-bus observability.
pub fn cmd_opp(cfg: &RunConfig, restrict_bundle: Option<&Path>) -> Result<Vec<PlacementRow>> {
    let sys = cfg.system()?;
    let topo = Topology::from_system(&sys);
    let mode = cfg.opp.zgib.then_some(cfg.opp.zgib_mode);
    let budgets = match cfg.opp.objective {
        Objective::MaxObservability => cfg.opp.budgets.clone(),
        Objective::MinPmusFull => vec![0],
    };
    let source = restrict_bundle.map(load_dataset).transpose()?;
    let mut rows = Vec::new();
    for b in budgets {
        let (p, r) = solve_opp(&topo, b, mode, cfg.opp.objective)?;
        let tag = if b == 0 { "full".to_string() } else { b.to_string() };
        fs::write(cfg.out.join(format!("observability_{tag}.csv")), observability_csv(&topo, &p, &r))?;
        if let Some(d) = &source {
            let restricted = d.restrict(&p.buses(), &d.manifest.features)?;
            save_dataset(&restricted, &cfg.out.join(format!("restricted_{tag}")))?;
        }
        rows.push(PlacementRow { budget: p.budget, buses: p.buses().iter().map(|&i| topo.labels[i]).collect(), placement: p, report: r });
    }
    if let Some(m) = mode {
        let z = detect_zgib(&topo, m);
        let names: Vec<String> = z.buses.iter().map(|&i| topo.labels[i].to_string()).collect();
        fs::write(cfg.out.join("zgib.csv"), format!("bus\n{}\n", names.join("\n")))?;
    }
    fs::write(cfg.out.join("placements.csv"), placement_csv(&rows))?;
    Ok(rows)
}

fn placement_csv(rows: &[PlacementRow]) -> String {
    let mut out = String::from("budget,buses,pmus,score,fully_observable\n");
    for r in rows {
        let buses: Vec<String> = r.buses.iter().map(|b| b.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.budget,
            buses.join(" "),
            r.placement.count(),
            r.report.score,
            r.report.fully_observable
        ));
    }
    out
}

fn placement_table(rows: &[PlacementRow]) -> String {
    let mut out = format!("{:>6}  {:<28}{:>6}  {}\n", "budget", "buses", "score", "full");
    for r in rows {
        out.push_str(&format!(
            "{:>6}  {:<28}{:>6}  {}\n",
            r.budget,
            format!("{:?}", r.buses),
            r.report.score,
            r.report.fully_observable
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_parsers() {
        assert_eq!(parse_window("0.5:1.5").unwrap(), [0.5, 1.5]);
        assert!(parse_window("0.5").is_err());
        assert_eq!(parse_features("dw,rocof").unwrap(), vec![FeatureId::DeltaOmega, FeatureId::RoCoF]);
        assert!(parse_features("dw,x").is_err());
        assert_eq!(parse_budgets("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_budgets("3").unwrap(), vec![3]);
        assert_eq!(parse_budgets("2,4").unwrap(), vec![2, 4]);
        assert!(parse_budgets("5..2").is_err());
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from(["inertia", "--snr", "45", "--window", "0.5:1.5", "--family", "gcn", "--seed", "3", "simulate"])
            .unwrap();
        let c = resolve_config(&cli.global, &cli.command).unwrap();
        assert_eq!((c.dataset.snr_db, c.dataset.window, c.model.family, c.seed), (Some(45.0), [0.5, 1.5], Family::Gcn, 3));
        let cli = Cli::try_parse_from(["inertia", "opp", "--budget", "2..3", "--zgib", "--objective", "full"]).unwrap();
        let c = resolve_config(&cli.global, &cli.command).unwrap();
        assert_eq!((c.opp.budgets.clone(), c.opp.zgib, c.opp.objective), (vec![2, 3], true, Objective::MinPmusFull));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["inertia", "bogus"]), 1);
        assert_eq!(main_with_args(["inertia", "--family", "rnn", "--print-config", "simulate"]), 1);
        assert_eq!(main_with_args(["inertia", "--help"]), 0);
    }

    #[test]
    fn lock_rejects_second_holder() {
        let dir = tempfile::tempdir().unwrap();
        let first = OutputLock::acquire(dir.path()).unwrap();
        assert!(matches!(OutputLock::acquire(dir.path()), Err(Error::Locked(_))));
        drop(first);
        assert!(OutputLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn opp_command_writes_table() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { out: dir.path().to_path_buf(), ..Default::default() }.resolve().unwrap();
        let mut cfg = cfg;
        cfg.opp.budgets = vec![24];
        let rows = cmd_opp(&cfg, None).unwrap();
        assert!(rows[0].report.fully_observable);
        let csv = fs::read_to_string(dir.path().join("placements.csv")).unwrap();
        assert!(csv.starts_with("budget,buses,pmus,score,fully_observable\n24,"));
    }
}
