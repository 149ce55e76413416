use wrcast::config::BenchConfig;
use wrcast::data::synthetic_setup;
use wrcast::experiment::{run_alpha_sweep, run_model_comparison, ExperimentResult, ModelSpec};
use wrcast::synth::PerturbSpec;

fn median_ql(res: &ExperimentResult, model: &str, alpha: Option<f64>) -> f64 {
    res.row(model, alpha).and_then(|r| r.median_p50_ql).unwrap()
}

#[test]
fn default_spec_ordering() {
    let cfg = BenchConfig::default();
    let (_, data) = synthetic_setup(&cfg).unwrap();
    let res = run_model_comparison(&data, &cfg).unwrap();
    assert_eq!(res.failures(), 0);
    let wr = median_ql(&res, "wr", Some(1.0));
    let mlp = median_ql(&res, "mlp_combiner", None);
    let add = median_ql(&res, "additive", None);
    assert!(wr < mlp && mlp < add, "wr {wr}, mlp {mlp}, additive {add}");
    // every configured cell is present
    assert_eq!(res.cells.len(), 3 * cfg.seeds + 1);
}

fn small() -> BenchConfig {
    BenchConfig {
        n_series: 8,
        length: 160,
        seeds: 2,
        epochs: 3,
        samples_per_series: 6,
        test_windows: 2,
        alphas: vec![0.0, 1.5],
        ..BenchConfig::default()
    }
}

#[test]
fn reproducible_and_read_only() {
    let cfg = small();
    let (_, data) = synthetic_setup(&cfg).unwrap();
    let before = serde_json::to_string(&data).unwrap();
    let a = run_alpha_sweep(&data, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&data).unwrap(), before);
    let (_, again) = synthetic_setup(&cfg).unwrap();
    let b = run_alpha_sweep(&again, &cfg).unwrap();
    let strip = |r: &ExperimentResult| {
        let mut r = r.clone();
        r.cells.iter_mut().for_each(|c| c.seconds = 0.0);
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(strip(&a), strip(&b));
    let mut other = cfg.clone();
    other.seed = 1;
    let (_, shifted) = synthetic_setup(&other).unwrap();
    assert_ne!(serde_json::to_string(&shifted).unwrap(), before);
}

#[test]
fn perfect_components_additive_is_hard_to_beat() {
    let mut cfg = small();
    cfg.noise = 0.0;
    let id = PerturbSpec::identity(3);
    cfg.bias = id.bias;
    cfg.sigma = id.sigma;
    let (_, data) = synthetic_setup(&cfg).unwrap();
    let res = run_model_comparison(&data, &cfg).unwrap();
    let add = median_ql(&res, "additive", None);
    assert!(add < 1e-12, "exact components sum to the target: {add}");
    for m in ["wr", "mlp_combiner"] {
        let alpha = if m == "wr" { Some(cfg.alpha) } else { None };
        assert!(median_ql(&res, m, alpha) >= add);
    }
    let spec = ModelSpec::parse("wr", 0.5).unwrap();
    assert_eq!(spec, ModelSpec::Wr { alpha: 0.5 });
    assert!(ModelSpec::parse("arima", 1.0).is_err());
}
