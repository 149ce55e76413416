use std::path::Path;
use std::process::{Command, Output};

fn wrcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrcast"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--config")
        .arg(dir.join("small.toml"))
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = wrcast(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("small.toml"),
        "n_series = 6\nlength = 200\nseeds = 1\nepochs = 2\nsamples_per_series = 6\ntest_windows = 2\nalphas = [0.0, 1.0]\n",
    )
    .unwrap();
    dir
}

#[test]
fn synthetic_pipeline() {
    let dir = setup();
    let d = dir.path();
    let out = d.join("out");
    ok(d, &["ingest", "--synthetic"]);
    let panel = out.join("panel.csv");
    assert!(panel.exists() && out.join("panel_summary.csv").exists());
    let p = panel.to_str().unwrap();

    ok(d, &["decompose", "--input", p]);
    let dec = std::fs::read_to_string(out.join("decomposition.csv")).unwrap();
    assert!(dec.starts_with("series_id,date,value,trend,seasonal,remainder"));
    assert_eq!(dec.lines().count(), 1 + 6 * 200);

    ok(d, &["components", "--source", "synthetic"]);
    let bundle = out.join("components.json");
    let b = bundle.to_str().unwrap();
    ok(d, &["train", "--bundle", b, "--alpha", "1"]);
    let model = out.join("model.json");
    ok(d, &["forecast", "--bundle", b, "--model", model.to_str().unwrap()]);
    let fc = std::fs::read_to_string(out.join("forecasts.csv")).unwrap();
    let header = fc.lines().next().unwrap();
    assert_eq!(
        header,
        "series_id,date,yhat,baseline_modified,promotion_modified,festival_modified,residual,\
         weight_baseline,weight_promotion,weight_festival"
    );
    // two test windows of fourteen days per series
    assert_eq!(fc.lines().count(), 1 + 6 * 2 * 14);
    for line in fc.lines().skip(1) {
        let v: Vec<f64> = line.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
        let sum: f64 = v[1..4].iter().sum::<f64>() + v[4];
        assert!((sum - v[0]).abs() < 1e-9 * v[0].abs().max(1.0));
        let wsum: f64 = v[5..8].iter().sum();
        assert!((wsum - 3.0).abs() < 1e-9);
    }

    let fpath = out.join("forecasts.csv");
    let scored = ok(d, &["evaluate", "--bundle", b, "--forecasts", fpath.to_str().unwrap()]);
    assert!(scored.contains("p50_ql"));
    let additive = ok(d, &["evaluate", "--bundle", b]);
    assert_ne!(scored, additive);

    ok(d, &["sweep-alpha", "--bundle", b]);
    let summary = std::fs::read_to_string(out.join("alpha_sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3);
    let printed = ok(d, &["report", "--result", out.join("alpha_sweep.json").to_str().unwrap(), "--forecasts", fpath.to_str().unwrap()]);
    assert!(printed.contains("alpha_sweep"));
    let hist = std::fs::read_to_string(out.join("forecast_histograms.csv")).unwrap();
    assert!(hist.contains("weight_promotion") && hist.contains("residual"));

    ok(d, &["compare"]);
    let cmp = std::fs::read_to_string(out.join("model_comparison_summary.csv")).unwrap();
    for m in ["wr", "additive", "mlp_combiner", "pure_nn"] {
        assert!(cmp.lines().any(|l| l.starts_with(&format!("{m},"))), "{m} missing");
    }
    assert!(out.join("model_comparison_components.csv").exists());

    ok(d, &["components", "--source", "stl", "--input", p]);
    ok(d, &["train", "--bundle", b, "--model", "pure-nn"]);
    let o = wrcast(d, &["baseline", "--input", p]);
    assert_eq!(o.status.code(), Some(3), "six series are too few for the meta-learner");
    std::fs::write(d.join("small.toml"), "n_series = 24\nlength = 160\n").unwrap();
    ok(d, &["ingest", "--synthetic"]);
    ok(d, &["baseline", "--input", p]);
    let learner: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("baseline.json")).unwrap()).unwrap();
    assert!(learner.is_object());
}

#[test]
fn practical_components_from_panel() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["ingest", "--synthetic"]);
    let p = d.join("out/panel.csv");
    let msg = ok(d, &["components", "--source", "practical", "--input", p.to_str().unwrap()]);
    assert!(msg.contains("baseline") && msg.contains("promotion") && msg.contains("festival"), "{msg}");
}

#[test]
fn theory_check_writes_report() {
    let dir = setup();
    let d = dir.path();
    let text = ok(d, &["theory-check", "--trials", "1000"]);
    assert!(text.contains("sign_rule"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/theory.json")).unwrap()).unwrap();
    assert!(json["checks"].as_array().unwrap().len() >= 8);
    let map = std::fs::read_to_string(d.join("out/theory_region_map.csv")).unwrap();
    assert!(map.starts_with("l1,l2,l1_hat,l2_hat,w_star,region"));
}

#[test]
fn exit_codes() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "T = 0\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wrcast"))
        .args(["sweep-alpha", "--config"])
        .arg(d.join("bad.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("T and H"));

    let o = wrcast(d, &["decompose", "--input", "/nonexistent/panel.csv"]);
    assert_eq!(o.status.code(), Some(3));
    let o = wrcast(d, &["compare", "--electricity", "/nonexistent/LD2011_2014.txt"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("UCI"));

    // an unknown flag is a usage error
    let o = wrcast(d, &["train", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    ok(d, &["components", "--source", "synthetic"]);
    let b = d.join("out/components.json");
    let o = wrcast(d, &["train", "--bundle", b.to_str().unwrap(), "--alpha", "7"]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(d.join("small.toml"), "n_series = 6\nlength = 200\nepochs = 2\nlearning_rate = 1e300\n").unwrap();
    let o = wrcast(d, &["train", "--bundle", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
