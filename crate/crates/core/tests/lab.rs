mod common;

use entdetect_core::lab::config::{parse_config, Experiment};
use entdetect_core::lab::{
    bloch_correlation, detection_runs, efficiency, full_setting_count, gain, load_config, max_correlation,
    max_gap, run_experiment, stratify, stream_rng, EfficiencyCurve, Ensemble, Run, StrategyTag, Stratify,
};
use entdetect_core::state::{from_spec, product, random_pure, singlet, werner};
use entdetect_core::tensor::{full_tensor, CorrelationTensor};
use entdetect_core::PauliString;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn stream_rngs_are_independent_and_reproducible() {
    let a: u64 = stream_rng(7, 3).random();
    let b: u64 = stream_rng(7, 3).random();
    let c: u64 = stream_rng(7, 4).random();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let firsts: std::collections::HashSet<u64> = (0..1000).map(|i| stream_rng(9, i).random()).collect();
    assert_eq!(firsts.len(), 1000);
}

#[test]
fn entanglement_oracle_for_ensembles() {
    let pure = Ensemble::Pure { n: 3 };
    assert!(!pure.is_entangled(&product("HVP").unwrap()));
    assert!(pure.is_entangled(&from_spec("ghz:3").unwrap()));
    let mixed = Ensemble::Mixed { n: 2, ancilla_dim: None };
    assert_eq!(mixed.ancilla_dim(), Some(4));
    assert!(mixed.is_entangled(&werner(0.34).unwrap()));
    assert!(!mixed.is_entangled(&werner(0.33).unwrap()));
    assert!(detection_runs(&Ensemble::Mixed { n: 3, ancilla_dim: None }, StrategyTag::Tree, None, 4, 0).is_err());
    assert!(mixed.measure().contains("induced"));
}

#[test]
fn runs_are_deterministic_per_seed() {
    let ens = Ensemble::Pure { n: 2 };
    let a = detection_runs(&ens, StrategyTag::Tree, None, 200, 11).unwrap();
    let b = detection_runs(&ens, StrategyTag::Tree, None, 200, 11).unwrap();
    assert_eq!(a, b);
    let c = detection_runs(&ens, StrategyTag::Tree, None, 200, 12).unwrap();
    assert_ne!(a, c);
    assert!(a.iter().all(|r| r.entangled));
    assert!(a.iter().all(|r| r.step.is_some_and(|k| k <= 9)));
}

#[test]
fn efficiency_curves_are_monotone_and_bounded() {
    for (ens, strategy) in [
        (Ensemble::Pure { n: 2 }, StrategyTag::Tree),
        (Ensemble::Pure { n: 3 }, StrategyTag::Random),
        (Ensemble::Mixed { n: 2, ancilla_dim: Some(2) }, StrategyTag::Tree),
    ] {
        let max = full_setting_count(ens.n_qubits());
        let c = efficiency(&ens, strategy, max, 300, 5).unwrap();
        assert_eq!(c.steps, (1..=max).collect::<Vec<_>>());
        for w in c.fraction_detected.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(c.fraction_detected.iter().all(|f| (0.0..=1.0).contains(f)));
        assert!(c.stderr.iter().all(|s| *s >= 0.0));
        assert_eq!(c.at(0), 0.0);
        let csv = c.to_csv().unwrap();
        assert_eq!(csv.lines().next().unwrap(), "step,fraction,stderr");
        assert_eq!(csv.lines().count(), max + 1);
    }
}

#[test]
fn curve_inversion_interpolates() {
    let runs: Vec<Run> = [Some(1), Some(2), Some(2), Some(4), None]
        .into_iter()
        .map(|step| Run { entangled: true, step, purity: 1.0, negativity: None })
        .collect();
    let c = EfficiencyCurve::from_runs(Ensemble::Pure { n: 2 }, StrategyTag::Tree, &runs, 9);
    assert_eq!(c.entangled, 5);
    assert!((c.at(1) - 0.2).abs() < 1e-12);
    assert!((c.at(2) - 0.6).abs() < 1e-12);
    assert!((c.at(9) - 0.8).abs() < 1e-12);
    assert!((c.steps_for(0.2).unwrap() - 1.0).abs() < 1e-12);
    assert!((c.steps_for(0.4).unwrap() - 1.5).abs() < 1e-12);
    assert!((c.steps_for(0.7).unwrap() - 3.5).abs() < 1e-12);
    assert_eq!(c.steps_for(0.9), None);
}

#[test]
fn max_gap_of_identical_curves_is_zero() {
    let ens = Ensemble::Pure { n: 2 };
    let c = efficiency(&ens, StrategyTag::Tree, 9, 200, 1).unwrap();
    let (g, _) = max_gap(&c, &c);
    assert!(g.abs() < 1e-12);
}

#[test]
fn stratified_bins_split_samples_evenly() {
    let ens = Ensemble::Mixed { n: 2, ancilla_dim: None };
    let runs = detection_runs(&ens, StrategyTag::Tree, None, 400, 3).unwrap();
    let strata = stratify(ens, StrategyTag::Tree, &runs, Stratify::Purity, 4, 9);
    assert_eq!(strata.len(), 4);
    let ent = runs.iter().filter(|r| r.entangled).count();
    assert_eq!(strata.iter().map(|s| s.curve.samples).sum::<usize>(), ent);
    assert!(strata.iter().all(|s| s.curve.samples.abs_diff(ent / 4) <= 1));
    for w in strata.windows(2) {
        assert!(w[0].hi <= w[1].lo + 1e-15);
    }
    // Purer states are easier to detect.
    assert!(strata[3].curve.at(9) >= strata[0].curve.at(9));
    let strata = stratify(ens, StrategyTag::Tree, &runs, Stratify::Negativity, 2, 9);
    assert_eq!(strata.len(), 2);
}

#[test]
fn gain_report_shape() {
    let r = gain(2..=3, 300, 9).unwrap();
    assert_eq!(r.entries.len(), 2);
    for e in &r.entries {
        assert!(e.gain.is_finite() && e.stderr >= 0.0);
        assert!((0.0..1.0).contains(&e.at_fraction));
        assert!(e.mean_steps_tree <= e.mean_steps_random + 1e-9, "{e:?}");
    }
}

#[test]
fn bloch_correlation_values() {
    assert_eq!(bloch_correlation(&singlet()), None);
    let p = product("HV").unwrap();
    assert!((bloch_correlation(&p).unwrap() - 1.0).abs() < 1e-12);
}

fn tv(t: &CorrelationTensor, idx: &[usize]) -> f64 {
    let w: String = idx.iter().map(|&i| ['X', 'Y', 'Z'][i]).collect();
    t.get(&w.parse::<PauliString>().unwrap()).unwrap()
}

fn svd_top(state: &entdetect_core::QuantumState) -> f64 {
    let t = full_tensor(state);
    let m = nalgebra::Matrix3::from_fn(|i, j| tv(&t, &[i, j]));
    m.singular_values().max()
}

#[test]
fn max_correlation_examples() {
    let m = max_correlation(&singlet());
    assert!((m.value - 1.0).abs() < 1e-8);
    let m = max_correlation(&product("HP").unwrap());
    assert!((m.value - 1.0).abs() < 1e-8);
    let m = max_correlation(&from_spec("ghz:3").unwrap());
    assert!((m.value - 1.0).abs() < 1e-8);
    assert!(m.directions.iter().all(|d| (d.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let s = random_pure(2, &mut rng);
        let m = max_correlation(&s);
        assert!((m.value - svd_top(&s)).abs() < 1e-6, "{} vs {}", m.value, svd_top(&s));
    }
}

#[test]
fn max_correlation_beats_axis_settings_and_random_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let s = random_pure(3, &mut rng);
        let t = full_tensor(&s);
        let m = max_correlation(&s);
        assert!(m.value <= 1.0 + 1e-12);
        let axis = common::full_words(3).iter().map(|w| t.get(&w.parse::<PauliString>().unwrap()).unwrap().abs()).fold(0.0, f64::max);
        assert!(m.value >= axis - 1e-12);
        for _ in 0..300 {
            let dirs: Vec<[f64; 3]> = (0..3)
                .map(|_| {
                    let v: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.map(|x| x / n)
                })
                .collect();
            let mut val = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        val += dirs[0][a] * dirs[1][b] * dirs[2][c] * tv(&t, &[a, b, c]);
                    }
                }
            }
            assert!(m.value >= val.abs() - 1e-9);
        }
    }
}

#[test]
fn config_parsing() {
    let c = parse_config("experiment = \"efficiency\"\nN = 3\nsamples = 10\nseed = 4\nstrategy = \"random\"\n", Some("toml")).unwrap();
    assert_eq!(c.n, 3);
    assert_eq!(c.strategy, StrategyTag::Random);
    assert_eq!(c.bins, 4);
    let j = parse_config(r#"{"experiment":"gain","n":2,"n_max":3,"samples":5}"#, None).unwrap();
    assert_eq!(j.experiment, Experiment::Gain);
    assert!(parse_config("n = 2\nsamples = 0\n", Some("toml")).is_err());
    assert!(parse_config("n = 2\nsamples = 3\nbogus = 1\n", Some("toml")).is_err());
    assert!(parse_config("n = 3\nsamples = 3\nensemble = \"pure\"\nancilla_dim = 2\n", Some("toml")).is_err());
    assert!(parse_config("n = 9\nsamples = 3\n", Some("toml")).is_err());
}

#[test]
fn experiments_write_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("eff.toml", "name = \"eff\"\nn = 2\nsamples = 50\nseed = 1\n", "step,fraction,stderr"),
        ("strat.toml", "n = 2\nsamples = 40\nensemble = \"mixed\"\nstratify_by = \"purity\"\nbins = 2\n", "bin,lo,hi,step,fraction,stderr"),
        ("gain.json", r#"{"experiment":"gain","n":2,"n_max":3,"samples":40}"#, "n,gain,stderr,at_fraction,mean_steps_tree,mean_steps_random"),
        ("bloch.toml", "experiment = \"bloch_stats\"\nn = 2\nn_max = 3\nsamples = 40\n", "n,fraction,stderr,mean_ratio"),
    ];
    for (file, text, header) in cases {
        let path = dir.path().join(file);
        std::fs::write(&path, text).unwrap();
        let cfg = load_config(&path).unwrap();
        let out = run_experiment(&cfg, dir.path()).unwrap();
        let csv = std::fs::read_to_string(&out.csv_path).unwrap();
        assert_eq!(csv.lines().next().unwrap(), header, "{file}");
        assert!(csv.lines().count() > 1);
        let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out.summary_path).unwrap()).unwrap();
        assert_eq!(summary["v"], 1);
        assert!(summary["measure"].is_string());
        assert_eq!(summary["config"]["samples"], cfg.samples);
    }
}
