mod common;

use common::{corpus, oracle_scene_count, CORPUS_16, CORPUS_8};
use ghostcarve::experiment::Pass;
use ghostcarve::{acquisition_time, replay, run_experiment, write_artifacts, ExperimentConfig, SessionLog};
use ghostcarve_core::{Method, SceneImage};

fn noiseless() -> ExperimentConfig {
    ExperimentConfig { noise: false, ..Default::default() }
}

fn carved_only(seed: u64) -> ExperimentConfig {
    ExperimentConfig { seed, methods: vec![Method::CgiMask], ..Default::default() }
}

#[test]
fn corpus_loads_with_expected_sizes() {
    for name in CORPUS_16 {
        let s = corpus(name);
        assert_eq!((s.width, s.height), (16, 16), "{name}");
        assert!(s.values.iter().any(|&v| v == 1.0), "{name}");
    }
    for name in CORPUS_8 {
        assert_eq!((corpus(name).width, corpus(name).height), (8, 8), "{name}");
    }
}

#[test]
fn noiseless_runs_are_exact_and_match_oracle_counts() {
    for name in CORPUS_16.iter().chain(&CORPUS_8) {
        let scene = corpus(name);
        let out = run_experiment(&noiseless(), &scene).unwrap();
        let want = oracle_scene_count(&scene);
        for r in &out.reconstructions {
            match r.method {
                Method::Gi => assert_eq!(r.patterns_used, scene.values.len(), "{name}"),
                _ => {
                    assert_eq!(r.patterns_used, want, "{name} {:?}", r.method);
                    assert_eq!(r.image.binarize(0.5), scene.binarize(0.5), "{name} {:?}", r.method);
                }
            }
        }
    }
}

#[test]
fn digit0_noisy_pattern_count_band() {
    let scene = corpus("digit0");
    let counts: Vec<usize> = (0..50)
        .map(|seed| run_experiment(&carved_only(seed), &scene).unwrap().reconstructions[0].patterns_used)
        .collect();
    for (seed, &c) in counts.iter().enumerate() {
        assert!((60..=110).contains(&c), "seed {seed}: {c}");
    }
}

#[test]
fn empty_scene_budget() {
    let scene = SceneImage::from_binary(16, 16, &[0; 256]).unwrap();
    for seed in 0..10 {
        let out = run_experiment(&carved_only(seed), &scene).unwrap();
        assert!(out.reconstructions[0].patterns_used <= 5 * 16, "{}", out.reconstructions[0].patterns_used);
    }
    let out = run_experiment(&ExperimentConfig { noise: false, ..carved_only(0) }, &scene).unwrap();
    assert_eq!(out.reconstructions[0].patterns_used, 16);
    assert!(out.reconstructions[0].image.values.iter().all(|&v| v == 0.0));
}

#[test]
fn same_seed_same_log() {
    let scene = corpus("smiley");
    let cfg = ExperimentConfig { seed: 3, ..Default::default() };
    let a = run_experiment(&cfg, &scene).unwrap();
    let b = run_experiment(&cfg, &scene).unwrap();
    assert_eq!(a.log, b.log);
    let c = run_experiment(&ExperimentConfig { seed: 4, ..cfg }, &scene).unwrap();
    assert_ne!(a.log.events, c.log.events);
}

#[test]
fn replay_reproduces_artifacts_byte_for_byte() {
    let scene = corpus("digit7");
    let out = run_experiment(&ExperimentConfig { seed: 11, ..Default::default() }, &scene).unwrap();
    let first = tempfile::tempdir().unwrap();
    write_artifacts(first.path(), &out).unwrap();

    let text = std::fs::read_to_string(first.path().join("session.json")).unwrap();
    let log: SessionLog = serde_json::from_str(&text).unwrap();
    let second = tempfile::tempdir().unwrap();
    write_artifacts(second.path(), &replay(&log).unwrap()).unwrap();

    let mut names: Vec<_> = std::fs::read_dir(first.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 2 * Method::ALL.len() + 2);
    for name in names {
        let a = std::fs::read(first.path().join(&name)).unwrap();
        let b = std::fs::read(second.path().join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn tampered_log_fails_replay() {
    let out = run_experiment(&noiseless(), &corpus("tee8")).unwrap();
    let mut log = out.log.clone();
    let i = log.events.iter().position(|e| e.pass == Pass::Adaptive && e.stripe == 2).unwrap();
    log.events.remove(i);
    assert!(replay(&log).is_err());
}

#[test]
fn event_durations_add_up_to_the_ledger() {
    for (name, dwell, pause) in [("digit1", 2.0, 0.5), ("seven8", 2.0, 0.0), ("sad", 3.0, 0.25)] {
        let scene = corpus(name);
        let cfg = ExperimentConfig { dwell, pause, ..Default::default() };
        let out = run_experiment(&cfg, &scene).unwrap();
        let n = scene.height;
        assert_eq!(out.log.total_time(), acquisition_time(out.log.events.len(), dwell, pause, n, 16), "{name}");
        for r in &out.reconstructions {
            assert_eq!(r.simulated_time, acquisition_time(r.patterns_used, dwell, pause, n, 16));
        }
        let mut t = 0.0;
        for e in &out.log.events {
            assert_eq!(e.timestamp, t);
            t += e.duration;
        }
    }
}

#[test]
fn full_pass_does_not_disturb_adaptive_events() {
    let scene = corpus("smiley");
    let all = run_experiment(&ExperimentConfig { seed: 5, ..Default::default() }, &scene).unwrap();
    let carved = run_experiment(&carved_only(5), &scene).unwrap();
    let values = |log: &SessionLog| -> Vec<_> {
        log.events.iter().filter(|e| e.pass == Pass::Adaptive).map(|e| (e.stripe, e.pattern_id, e.value)).collect()
    };
    assert_eq!(values(&all.log), values(&carved.log));
}

#[test]
fn every_event_has_one_response() {
    let out = run_experiment(&ExperimentConfig::default(), &corpus("digit0")).unwrap();
    assert!(out.log.events.iter().all(|e| e.value.is_some_and(f64::is_finite)));
    let mut keys: Vec<_> = out.log.events.iter().map(|e| (e.pass == Pass::Full, e.stripe, e.pattern_id)).collect();
    let before = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), before);
}

#[test]
fn human_detector_needs_the_service() {
    let cfg = ExperimentConfig { detector: ghostcarve::DetectorKind::Human, ..Default::default() };
    assert!(run_experiment(&cfg, &corpus("tee8")).is_err());
}
