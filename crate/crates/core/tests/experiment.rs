use std::fs;

use multirate::experiment::{
    load_config, parse_config, read_metrics, run_experiment, write_metrics, BoundCheckFile, EvalSet, MetricsRow, Summary,
    METRICS_COLUMNS,
};
use multirate::{CostCounters, Error};

const TINY: &str = r#"
name = "tiny"
method = "vanilla"
epochs = 3
batch_size = 20
seeds = [1, 2]

[dataset]
kind = "spiral"
turns = 1.0
n_per_class = 40
test_per_class = 20
noise = 0.05

[model]
loss = "cross_entropy"
layers = [
  { type = "dense", outputs = 8, activation = "tanh" },
  { type = "dense", outputs = 2, activation = "softmax" },
]

[optimizer]
stepsize = 0.1
momentum = 0.9
"#;

fn with(extra: &str) -> String {
    format!("{TINY}\n{extra}")
}

fn config_field(err: Error) -> String {
    match err {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn zero_epochs_write_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let points = parse_config(&TINY.replace("epochs = 3", "epochs = 0")).unwrap();
    let (summary, _) = run_experiment(&points, Some(dir.path()), None).unwrap();
    let text = fs::read_to_string(dir.path().join("metrics_seed1.csv")).unwrap();
    assert_eq!(text, format!("{}\n", METRICS_COLUMNS.join(",")));
    assert!(summary.points[0].last.is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let points = parse_config(&with("[partition]\nkind = \"bias_slow\"").replace("\"vanilla\"", "\"multirate\"").replace("stepsize = 0.1", "stepsize = 0.1\nk = 2")).unwrap();
    run_experiment(&points, Some(a.path()), None).unwrap();
    run_experiment(&points, Some(b.path()), None).unwrap();
    for seed in [1, 2] {
        let name = format!("metrics_seed{seed}.csv");
        let (x, y) = (fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        assert_eq!(x, y);
        assert_eq!(String::from_utf8(x).unwrap().lines().count(), 4);
    }
    assert_eq!(
        fs::read(a.path().join("summary.json")).unwrap(),
        fs::read(b.path().join("summary.json")).unwrap()
    );
}

#[test]
fn k_sweep_gives_one_summary_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let text = with("[partition]\nkind = \"bias_slow\"\n\n[sweep]\n\"optimizer.k\" = [3, 5, 10]")
        .replace("\"vanilla\"", "\"multirate\"")
        .replace("batch_size = 20", "batch_size = 4")
        .replace("epochs = 3", "epochs = 1")
        .replace("n_per_class = 40", "n_per_class = 60");
    let points = parse_config(&text).unwrap();
    assert_eq!(points.len(), 3);
    let (summary, path) = run_experiment(&points, Some(dir.path()), None).unwrap();
    let labels: Vec<_> = summary.points.iter().map(|p| p.label.as_str()).collect();
    assert_eq!(labels, ["optimizer.k=3", "optimizer.k=5", "optimizer.k=10"]);
    let ks: Vec<usize> = points.iter().map(|p| p.config.optimizer.k).collect();
    assert_eq!(ks, [3, 5, 10]);
    let reread: Summary = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(reread, summary);
}

#[test]
fn summary_matches_recomputation_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let points = parse_config(TINY).unwrap();
    let (summary, _) = run_experiment(&points, Some(dir.path()), None).unwrap();
    let point = &summary.points[0];
    let rows: Vec<Vec<MetricsRow>> = point
        .metrics_files
        .iter()
        .map(|f| read_metrics(&dir.path().join(f)).unwrap())
        .collect();
    for set in [EvalSet::Train, EvalSet::Test] {
        let finals: Vec<f64> = rows.iter().map(|r| r.last().unwrap().accuracy(set).unwrap()).collect();
        let stat = &point.last[&format!("acc_{}", set.name())];
        assert_eq!(stat.per_seed, finals);
        assert_eq!(stat.min, finals.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(stat.max, finals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        assert_eq!(stat.mean, finals.iter().sum::<f64>() / finals.len() as f64);
        let bests: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().map(|x| x.accuracy(set).unwrap()).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        assert_eq!(point.best[&format!("acc_{}", set.name())].per_seed, bests);
    }
}

#[test]
fn metrics_rows_are_monotone_and_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let points = parse_config(&TINY.replace("seeds = [1, 2]", "seeds = [4]")).unwrap();
    run_experiment(&points, Some(dir.path()), None).unwrap();
    let rows = read_metrics(&dir.path().join("metrics_seed4.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[1].micro_step > w[0].micro_step);
        assert!(w[1].backward_layer_visits > w[0].backward_layer_visits);
    }
    for r in &rows {
        for set in [EvalSet::Train, EvalSet::Test] {
            assert!((0.0..=1.0).contains(&r.accuracy(set).unwrap()));
        }
        assert_eq!(r.acc_clean, None);
    }
    assert_eq!(rows[0].micro_step, 4);
}

#[test]
fn csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let mut row = MetricsRow::new(3, 1, 10, 0.25, CostCounters::default());
    row.set_accuracy(EvalSet::PatchOnly, 0.5);
    row.grad_norm_sq = Some(1e-3);
    let rows = vec![row.clone(), MetricsRow::new(3, 2, 20, 0.125, CostCounters::default())];
    write_metrics(&path, &rows).unwrap();
    assert_eq!(read_metrics(&path).unwrap(), rows);
}

#[test]
fn seed_override_runs_one_seed() {
    let dir = tempfile::tempdir().unwrap();
    let points = parse_config(TINY).unwrap();
    let (summary, _) = run_experiment(&points, Some(dir.path()), Some(9)).unwrap();
    assert_eq!(summary.points[0].seeds, [9]);
    assert!(dir.path().join("metrics_seed9.csv").exists());
    assert!(!dir.path().join("metrics_seed1.csv").exists());
}

#[test]
fn invalid_fields_are_reported_with_their_path() {
    let bad_k = TINY.replace("momentum = 0.9", "momentum = 0.9\nk = 0");
    assert_eq!(config_field(parse_config(&bad_k).unwrap_err()), "optimizer.k");
    let unknown = TINY.replace("momentum = 0.9", "momentum = 0.9\nmomentun = 1");
    assert_eq!(config_field(parse_config(&unknown).unwrap_err()), "optimizer.momentun");
    let wrong_type = TINY.replace("outputs = 8", "outputs = \"eight\"");
    assert!(config_field(parse_config(&wrong_type).unwrap_err()).starts_with("model.layers"));
    let no_mask = TINY.replace("\"vanilla\"", "\"random_subset\"");
    assert_eq!(config_field(parse_config(&no_mask).unwrap_err()), "partition.kind");
    let bad_eval = with("eval = [\"patch_only\"]");
    assert!(parse_config(&bad_eval).is_err());
}

#[test]
fn incompatible_cycle_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = with("[partition]\nkind = \"bias_slow\"")
        .replace("\"vanilla\"", "\"multirate\"")
        .replace("stepsize = 0.1", "stepsize = 0.1\nk = 3");
    let points = parse_config(&text).unwrap();
    let err = run_experiment(&points, Some(dir.path()), None).unwrap_err();
    assert_eq!(config_field(err), "batch_size");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let points = parse_config(TINY).unwrap();
    let err = run_experiment(&points, Some(&blocker.join("sub")), None).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn every_method_runs() {
    let cases = [
        ("vanilla", "", ""),
        ("multirate", "[partition]\nkind = \"layerwise\"\nfast_layers = 1", "k = 2"),
        ("random_subset", "[partition]\nkind = \"random_subset\"\nprobabilities = [0.5, 0.2]", "k = 3"),
        ("remask", "[partition]\nkind = \"random_subset\"\nprobabilities = [0.5, 0.2]", ""),
        ("composite", "", "k = 2"),
        ("noise", "", "noise = { gamma = [1.0], tau = [0.0001] }"),
    ];
    for (method, extra, opt) in cases {
        let dir = tempfile::tempdir().unwrap();
        let mut text = with(extra).replace("\"vanilla\"", &format!("\"{method}\""));
        text = text.replace("momentum = 0.9", &format!("momentum = 0.9\n{opt}"));
        if method == "random_subset" {
            text = text.replace("batch_size = 20", "batch_size = 10");
        }
        let points = parse_config(&text).unwrap_or_else(|e| panic!("{method}: {e}"));
        let (summary, _) = run_experiment(&points, Some(dir.path()), None).unwrap_or_else(|e| panic!("{method}: {e}"));
        let loss = &summary.points[0].last["train_loss"];
        assert!(loss.mean.is_finite(), "{method}");
    }
}

#[test]
fn checkpoints_are_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let points = parse_config(&TINY.replace("epochs = 3", "epochs = 1\ncheckpoint = true")).unwrap();
    run_experiment(&points, Some(dir.path()), None).unwrap();
    let ckpt = multirate::model::Checkpoint::load(&dir.path().join("checkpoint_seed1.json")).unwrap();
    assert_eq!(ckpt.optimizer.unwrap().micro_steps, 4);
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let text = fs::read_to_string(&path).unwrap();
        let ok = if path.file_stem().unwrap() == "boundcheck" {
            BoundCheckFile::parse(&text).map(|_| ())
        } else {
            load_config(&path).map(|_| ())
        };
        assert!(ok.is_ok(), "{}: {:?}", path.display(), ok);
        seen += 1;
    }
    assert!(seen >= 10, "only {seen} configs found");
}
