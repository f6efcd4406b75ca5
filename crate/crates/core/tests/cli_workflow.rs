use std::fs;
use std::path::Path;

use inertia_core::cli::main_with_args;

const SMALL: &str = r#"
seed = "5"
[sweep]
h = [3.0, 5.5, 8.0]
pe_points = 4
[train]
max_epochs = 4
"#;

fn inertia(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("inertia").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_train_evaluate_compare_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let (bundle, model, eval, cmp) =
        (dir.path().join("bundle"), dir.path().join("model"), dir.path().join("eval"), dir.path().join("cmp"));

    assert_eq!(inertia(&["--config", s(&cfg), "--out", s(&bundle), "simulate"]), 0);
    for f in ["samples.bin", "manifest", "sweep.csv", "config.toml"] {
        assert!(bundle.join(f).exists(), "missing {f}");
    }
    assert!(!bundle.join(".lock").exists());

    assert_eq!(inertia(&["--config", s(&cfg), "--family", "gcn", "--out", s(&model), "train", "--bundle", s(&bundle)]), 0);
    let ckpt = model.join("model.ckpt");
    let history = fs::read_to_string(model.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 5);

    let args = ["--config", s(&cfg), "--out", s(&eval), "evaluate", "--checkpoint", s(&ckpt), "--bundle", s(&bundle)];
    assert_eq!(inertia(&args), 0);
    let preds = fs::read_to_string(eval.join("predictions.csv")).unwrap();
    assert!(preds.starts_with("index,y,y_hat,abs_error"));
    let best_val = history.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap()).fold(f64::INFINITY, f64::min);
    let metrics = fs::read_to_string(eval.join("metrics.csv")).unwrap();
    let mse: f64 = metrics.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert_eq!(mse, best_val);
    assert!(eval.join("scatter.svg").exists() && eval.join("error_hist.svg").exists());

    let dnn = dir.path().join("dnn");
    assert_eq!(inertia(&["--config", s(&cfg), "--family", "dnn", "--out", s(&dnn), "train", "--bundle", s(&bundle)]), 0);
    let second = dnn.join("model.ckpt");
    let args =
        ["--config", s(&cfg), "--out", s(&cmp), "compare", "--checkpoint", s(&ckpt), "--checkpoint", s(&second), "--bundle", s(&bundle)];
    assert_eq!(inertia(&args), 0);
    assert!(fs::read_to_string(cmp.join("comparison.csv")).unwrap().lines().count() == 3);
}

#[test]
fn checkpoint_is_rejected_on_an_incompatible_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let (a, b, model) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("m"));
    assert_eq!(inertia(&["--config", s(&cfg), "--out", s(&a), "simulate"]), 0);
    assert_eq!(inertia(&["--config", s(&cfg), "--features", "dw", "--out", s(&b), "simulate"]), 0);
    assert_eq!(inertia(&["--config", s(&cfg), "--family", "dnn", "--out", s(&model), "train", "--bundle", s(&a)]), 0);
    let out = dir.path().join("e");
    let code = inertia(&["--config", s(&cfg), "--out", s(&out), "evaluate", "--checkpoint", s(&model.join("model.ckpt")), "--bundle", s(&b)]);
    assert_ne!(code, 0);
}

#[test]
fn opp_writes_placements_and_usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opp");
    assert_eq!(inertia(&["--out", s(&out), "opp", "--budget", "2..3", "--zgib"]), 0);
    let rows = fs::read_to_string(out.join("placements.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert!(out.join("observability_2.csv").exists() && out.join("zgib.csv").exists());

    assert_eq!(inertia(&["--bogus"]), 1);
    assert_eq!(inertia(&["--help"]), 0);
    assert_eq!(inertia(&["--window", "2:1", "--out", s(&out), "simulate"]), 1);
}
