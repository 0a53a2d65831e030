mod common;

use common::tiny_config;

use stgrn::datakit::{load_annotations, MAX_FRAMES};
use stgrn::decode::DecodeMode;
use stgrn::error::Error;
use stgrn::featstore::{FeatureProvider, FeatureStore};
use stgrn::runner::{
    decode_cmd, eval_cmd, generate_cmd, load_split, train_cmd, train_model, Checkpoint, Dataset, RunConfig, Split,
};

fn in_unit(x: Option<f64>) -> bool {
    x.is_some_and(|v| (0.0..=1.0).contains(&v))
}

#[test]
fn generated_files_load_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config();
    let files = generate_cmd(&cfg, dir.path()).unwrap();
    let records = load_annotations(&files.annotations).unwrap();
    assert_eq!(records.len(), cfg.synth_samples);
    let store = FeatureStore::open(&files.manifest).unwrap();
    assert_eq!(store.region_dim(), cfg.synth_region_dim);
    for r in &records {
        assert_eq!(store.num_frames(&r.video_id).unwrap(), r.num_frames);
    }
}

#[test]
fn overlong_synthetic_videos_are_capped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        synth_samples: 2,
        synth_frames: 260,
        ..tiny_config()
    };
    let files = generate_cmd(&cfg, dir.path()).unwrap();
    let records = load_annotations(&files.annotations).unwrap();
    assert!(records.iter().all(|r| r.num_frames == MAX_FRAMES));
}

#[test]
fn generate_into_unwritable_path_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = generate_cmd(&tiny_config(), &blocker.join("sub")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
}

#[test]
fn train_eval_decode_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let base = tiny_config();
    let files = generate_cmd(&base, &data).unwrap();
    let cfg = RunConfig {
        annotations: Some(files.annotations.clone()),
        val_annotations: Some(files.val_annotations.clone()),
        features: Some(files.manifest.clone()),
        val_features: Some(files.val_manifest.clone()),
        output_dir: dir.path().join("run"),
        eval_every: 1,
        ..base
    };
    let (outcome, artifacts) = train_cmd(&cfg).unwrap();
    let log = std::fs::read_to_string(&artifacts.metrics).unwrap();
    let lines: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), cfg.epochs);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["epoch"], i + 1);
        assert!(l["loss"]["total"].as_f64().unwrap().is_finite());
        assert!(l["val"]["overall"]["m_tiou"].is_f64());
    }
    assert_eq!(outcome.history.len(), cfg.epochs);
    let saved = RunConfig::load(&artifacts.config).unwrap();
    assert_eq!(saved, cfg);

    let report = eval_cmd(&cfg, &artifacts.checkpoint, Split::Val).unwrap();
    assert_eq!(report.overall.count, cfg.synth_samples);
    for s in [&report.overall, &report.declarative, &report.interrogative] {
        if s.count > 0 {
            assert!(in_unit(s.m_tiou) && in_unit(s.m_viou) && in_unit(s.viou_at_03) && in_unit(s.viou_at_05));
        }
    }

    let out = dir.path().join("pred.jsonl");
    let lines = decode_cmd(&cfg, &artifacts.checkpoint, Split::Train, &out).unwrap();
    let written = std::fs::read_to_string(&out).unwrap();
    assert_eq!(written.lines().count(), lines.len());
    for l in &lines {
        let (s, e) = l.interval;
        assert!(1 <= s && s <= e);
        assert_eq!(l.boxes.len(), e - s + 1);
    }
}

#[test]
fn dynamic_decoding_energy_not_below_greedy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        output_dir: dir.path().to_path_buf(),
        eval_every: 0,
        ..tiny_config()
    };
    let (_, artifacts) = train_cmd(&cfg).unwrap();
    let run = |mode| {
        let cfg = RunConfig { decode: mode, ..cfg.clone() };
        eval_cmd(&cfg, &artifacts.checkpoint, Split::Val).unwrap()
    };
    let greedy = run(DecodeMode::Greedy);
    let dynamic = run(DecodeMode::Dynamic);
    assert!(dynamic.overall.mean_energy.unwrap() >= greedy.overall.mean_energy.unwrap() - 1e-12);
}

#[test]
fn ablation_keeps_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        output_dir: dir.path().to_path_buf(),
        ..tiny_config()
    };
    let (_, artifacts) = train_cmd(&cfg).unwrap();
    let full = eval_cmd(&cfg, &artifacts.checkpoint, Split::Val).unwrap();
    let ablated_cfg = RunConfig {
        disable_explicit: true,
        ..cfg.clone()
    };
    let ablated = eval_cmd(&ablated_cfg, &artifacts.checkpoint, Split::Val).unwrap();
    let keys = |r: &stgrn::decode::EvalReport| {
        let v = serde_json::to_value(r).unwrap();
        v["overall"].as_object().unwrap().keys().cloned().collect::<Vec<_>>()
    };
    assert_eq!(keys(&full), keys(&ablated));
    assert_ne!(full, ablated);
}

#[test]
fn checkpoint_dimension_mismatch_is_load_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        output_dir: dir.path().to_path_buf(),
        epochs: 1,
        ..tiny_config()
    };
    let (_, artifacts) = train_cmd(&cfg).unwrap();
    let wider = RunConfig {
        model_dim: cfg.model_dim + 1,
        ..cfg.clone()
    };
    assert!(matches!(
        eval_cmd(&wider, &artifacts.checkpoint, Split::Val),
        Err(Error::Checkpoint(_))
    ));
    let missing = dir.path().join("missing.json");
    assert!(matches!(eval_cmd(&cfg, &missing, Split::Val), Err(Error::Io { .. })));
}

#[test]
fn non_finite_features_abort_with_tensor_name() {
    let cfg = tiny_config();
    let Dataset { records, features } = load_split(&cfg, Split::Train).unwrap();
    let (recs, mut bundle) =
        stgrn::datakit::generate_synthetic(&cfg.synthetic_config(), cfg.seed).unwrap();
    assert_eq!(recs, records);
    drop(features);
    bundle.videos[0].frames[0].regions[0][0] = f64::NAN;
    let data = Dataset {
        records,
        features: Box::new(bundle),
    };
    let err = train_model(&cfg, &data, None, &mut |_| Ok(())).err().expect("must abort");
    match err {
        Error::NonFinite { tensor, .. } => assert!(!tensor.is_empty()),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn loss_decreases_early_in_overfit_suite() {
    let cfg = RunConfig {
        epochs: 20,
        ..common::overfit_config()
    };
    let train = load_split(&cfg, Split::Train).unwrap();
    let out = train_model(&cfg, &train, None, &mut |_| Ok(())).unwrap();
    let losses: Vec<f64> = out.history.iter().map(|h| h.loss.total).collect();
    // Every epoch improves on the best loss of three epochs earlier.
    for e in 3..losses.len() {
        let earlier = losses[..=e - 3].iter().copied().fold(f64::INFINITY, f64::min);
        assert!(losses[e] < earlier, "epoch {}: {} vs {}", e + 1, losses[e], earlier);
    }
    assert!(losses[19] < losses[0]);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        output_dir: dir.path().to_path_buf(),
        epochs: 1,
        ..tiny_config()
    };
    let (outcome, artifacts) = train_cmd(&cfg).unwrap();
    let ck = Checkpoint::load(&artifacts.checkpoint).unwrap();
    assert_eq!(ck.params, outcome.model.params);
    assert_eq!(ck.optimizer.as_ref().unwrap(), &outcome.optimizer);
}
