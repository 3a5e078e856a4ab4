use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use behavior_probe::game_model::GameFamily;
use behavior_probe::pipeline::{
    evaluate, load_report, predict, prediction_path, synth, validate, write_report, BackendConfig, Crossing,
    PipelineError, PredictScope, RunConfig, SynthOptions,
};
use behavior_probe::predictor::read_records;
use behavior_probe::prompt::{PromptFormat, VariantName};

fn small(dir: &Path) -> RunConfig {
    let counts: BTreeMap<GameFamily, usize> = GameFamily::ALL.iter().map(|&f| (f, 20)).collect();
    let path = synth(dir, &SynthOptions { seed: 4, counts }).unwrap();
    RunConfig::load(&path).unwrap()
}

#[test]
fn synthetic_config_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    assert_eq!(validate(&cfg), Vec::<String>::new());
}

#[test]
fn missing_chat_template_names_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let tpath = dir.path().join("templates/chatml.toml");
    let text = fs::read_to_string(&tpath).unwrap().replace(", \"synth-b-chat\"", "");
    fs::write(&tpath, text).unwrap();
    let errs = validate(&cfg);
    assert_eq!(errs.len(), 1, "{errs:?}");
    assert!(errs[0].contains("synth-b-chat"));

    let err = predict(&cfg, &PredictScope::default()).unwrap_err();
    assert!(matches!(err, PipelineError::Validation(_)));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn duplicate_pair_ids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let rpath = dir.path().join("registry.json");
    let text = fs::read_to_string(&rpath).unwrap().replace("\"pair_id\": 2", "\"pair_id\": 1");
    fs::write(&rpath, text).unwrap();
    let errs = validate(&cfg);
    assert!(errs.iter().any(|e| e.contains("registry") && e.contains('1')), "{errs:?}");
}

#[test]
fn every_problem_is_reported_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.concurrency = 0;
    if let BackendConfig::Mock { models } = &mut cfg.backend {
        models.remove("synth-a-base");
    }
    fs::write(dir.path().join("data/lottery.jsonl"), "{not json}\n").unwrap();
    let errs = validate(&cfg);
    assert!(errs.iter().any(|e| e.contains("concurrency")), "{errs:?}");
    assert!(errs.iter().any(|e| e.contains("synth-a-base")), "{errs:?}");
    assert!(errs.iter().any(|e| e.contains("lottery")), "{errs:?}");
}

#[test]
fn rerun_is_served_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let first = predict(&cfg, &PredictScope::default()).unwrap();
    assert!(first.backend_calls > 0);
    assert_eq!(first.records, 20 * 6 * 4);
    let before: Vec<Vec<u8>> = first.files.iter().map(|f| fs::read(f).unwrap()).collect();

    let second = predict(&cfg, &PredictScope::default()).unwrap();
    assert_eq!(second.backend_calls, 0);
    let after: Vec<Vec<u8>> = second.files.iter().map(|f| fs::read(f).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn evaluate_without_predictions_is_missing_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let err = evaluate(&cfg, &[]).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
    let PipelineError::MissingData(gaps) = err else { unreachable!() };
    assert!(gaps.iter().any(|g| g.contains("synth-a-base")));

    // One model only: the other three are still missing.
    let scope = PredictScope {
        models: vec!["synth-a-base".into()],
        ..Default::default()
    };
    predict(&cfg, &scope).unwrap();
    let err = evaluate(&cfg, &[]).unwrap_err();
    assert_eq!(err.exit_code(), 3);

    assert_eq!(load_report(&dir.path().join("nowhere")).unwrap_err().exit_code(), 3);
}

#[test]
fn scope_restricts_families_models_and_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let scope = PredictScope {
        families: vec![GameFamily::Lottery],
        models: vec!["synth-b-base".into()],
        variants: vec![],
        format: Some(PromptFormat::Chat),
    };
    let s = predict(&cfg, &scope).unwrap();
    let expected = prediction_path(
        &cfg.output_dir(),
        GameFamily::Lottery,
        VariantName::Standard,
        PromptFormat::Chat,
        "synth-b-base",
    );
    assert_eq!(s.files, vec![expected.clone()]);
    let recs = read_records(&expected).unwrap();
    assert_eq!(recs.len(), 20);
    assert!(recs.iter().all(|r| r.format == PromptFormat::Chat && r.is_valid()));

    let unknown = PredictScope {
        models: vec!["nobody".into()],
        ..Default::default()
    };
    assert_eq!(predict(&cfg, &unknown).unwrap_err().exit_code(), 1);
}

#[test]
fn both_chat_crossing_uses_partner_template() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.prompts.crossing = Crossing::BothChat;
    let scope = PredictScope {
        families: vec![GameFamily::Bargaining],
        ..Default::default()
    };
    predict(&cfg, &scope).unwrap();
    let base = prediction_path(
        &cfg.output_dir(),
        GameFamily::Bargaining,
        VariantName::Standard,
        PromptFormat::Chat,
        "synth-a-base",
    );
    assert_eq!(read_records(&base).unwrap().len(), 20);
    let bundle = evaluate(&cfg, &[GameFamily::Bargaining]).unwrap();
    assert_eq!(bundle.crossing, Crossing::BothChat);
    assert_eq!(bundle.pair_results.len(), 2);
}

#[test]
fn report_round_trips_and_is_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.prompts.variants = vec![VariantName::Standard, VariantName::Simplified, VariantName::Expert];
    predict(&cfg, &PredictScope::default()).unwrap();
    let bundle = evaluate(&cfg, &[]).unwrap();
    let out = dir.path().join("report");
    write_report(&bundle, &out).unwrap();
    assert_eq!(load_report(&out).unwrap(), bundle);

    let stamp = format!("# config {} seed 4", cfg.config_hash());
    for (name, text) in bundle.text_files() {
        assert!(text.starts_with(&stamp), "{name} lacks the stamp");
        assert_eq!(fs::read_to_string(out.join(name)).unwrap(), text);
    }
    let variants: Vec<VariantName> = bundle.variants.iter().map(|v| v.variant).collect();
    assert!(variants.contains(&VariantName::Simplified) && variants.contains(&VariantName::Expert));
    assert_eq!(bundle.sensitivity.len(), 6);
    assert!(bundle.ne.is_some());
}

#[test]
fn unreachable_backend_fails_fast_with_transport_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    drop(listener);
    cfg.backend = BackendConfig::Http {
        http: behavior_probe::logprob::HttpConfig {
            endpoint,
            api_key_env: None,
            timeout_secs: 2,
        },
    };
    let err = predict(&cfg, &PredictScope::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}
