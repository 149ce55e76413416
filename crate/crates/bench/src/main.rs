use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};

use wrcast::config::BenchConfig;
use wrcast::data::{
    cut_points, dated_split, fit_practical, holdout_split, practical_prepared, stl_prepared, synthetic_setup, Prepared,
};
use wrcast::experiment::{
    fit_model, predict_set, run_alpha_sweep, run_model_comparison, run_public_electricity, ExperimentResult, ModelSpec,
};
use wrcast::report::{write_experiment, write_json, write_theory};
use wrcast::synth::generate_panel;
use wrcast::{BenchError, ErrorClass};
use wrcast_core::electricity::{load_electricity, ClientSelection};
use wrcast_core::panel::{load_panel_csv, summarize, write_panel_csv, CsvSchema};
use wrcast_core::metrics::{write_reports_csv, write_reports_json};
use wrcast_core::{Evaluation, PanelDataset};
use wrcast_nn::{Histogram, Summary, WrModel, WrOutput};
use wrcast_stats::classical::{Method, MethodConfig};
use wrcast_stats::fforma::{default_meta_config, fforma_train, remove_promo_spikes};
use wrcast_stats::stl::stl_decompose;
use wrcast_theory::{run_theory_suite, SuiteConfig};

/// Weighted-residual decomposition forecasting toolkit.
#[derive(Parser)]
#[command(name = "wrcast", version)]
struct Cli {
    /// Flat TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// `series_id,date,value[,price,reference_price,promo_type,festival_level]`
    Panel,
    /// UCI `LD2011_2014.txt`
    Electricity,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    /// Synthetic panel from the config with perturbed true components.
    Synthetic,
    /// Trend and seasonal parts of STL.
    Stl,
    /// Statistical baseline, causal promotion and festival factor.
    Practical,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Wr,
    MlpCombiner,
    PureNn,
}

#[derive(Subcommand)]
enum Cmd {
    /// Normalizes a panel (or generates the synthetic one) into `panel.csv`.
    Ingest {
        #[arg(long, required_unless_present = "synthetic")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "panel")]
        format: InputFormat,
        #[arg(long, conflicts_with = "input")]
        synthetic: bool,
    },
    /// STL decomposition of every series into `decomposition.csv`.
    Decompose {
        #[arg(long)]
        input: PathBuf,
    },
    /// Builds train/test windows with stage-1 components into `components.json`.
    Components {
        #[arg(long, value_enum)]
        source: Source,
        /// Panel CSV; not used for the synthetic source.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Forecast from the configured calendar anchors instead of the last
        /// windows of each series.
        #[arg(long)]
        dated: bool,
    },
    /// Fits the feature-weighted baseline combination into `baseline.json`.
    Baseline {
        #[arg(long)]
        input: PathBuf,
    },
    /// Trains a stage-2 model on a component bundle into `model.json`.
    Train {
        #[arg(long, default_value = "out/components.json")]
        bundle: PathBuf,
        #[arg(long, value_enum, default_value = "wr")]
        model: ModelArg,
        /// Overrides the configured alpha.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Forecasts the bundle's test windows into `forecasts.csv`.
    Forecast {
        #[arg(long, default_value = "out/components.json")]
        bundle: PathBuf,
        /// Trained model; the plain component sum when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Scores forecasts against the bundle's test targets.
    Evaluate {
        #[arg(long, default_value = "out/components.json")]
        bundle: PathBuf,
        /// Forecast CSV; scores the plain component sum when omitted.
        #[arg(long)]
        forecasts: Option<PathBuf>,
    },
    /// W-R over the configured alpha grid.
    SweepAlpha {
        /// Component bundle; the synthetic benchmark when omitted.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// W-R against additive, plain-combiner and component-free models.
    Compare {
        #[arg(long, conflicts_with = "electricity")]
        bundle: Option<PathBuf>,
        /// Runs the public electricity comparison on this file instead.
        #[arg(long)]
        electricity: Option<PathBuf>,
    },
    /// Runs the theory checks into `theory.json` and `theory_region_map.csv`.
    TheoryCheck {
        #[arg(long, default_value_t = 5000)]
        trials: usize,
    },
    /// Prints a saved experiment and writes weight histograms for forecasts.
    Report {
        #[arg(long)]
        result: Option<PathBuf>,
        #[arg(long)]
        forecasts: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let class = e
                .chain()
                .find_map(|c| c.downcast_ref::<BenchError>())
                .map_or(ErrorClass::Data, |b| b.class());
            ExitCode::from(match class {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Training => 4,
            })
        }
    }
}

fn load_config(cli: &Cli) -> Result<BenchConfig> {
    let mut cfg = match &cli.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_file(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    Ok(dir.join(name))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| BenchError::io(path, e))?))
}

fn read_panel(path: &Path, format: InputFormat, cfg: &BenchConfig) -> Result<PanelDataset> {
    let ds = match format {
        InputFormat::Panel => load_panel_csv(path, &CsvSchema::detect_file(path).map_err(BenchError::from)?),
        InputFormat::Electricity => load_electricity(path, &ClientSelection::First(cfg.clients)),
    };
    Ok(ds.map_err(BenchError::from)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    let out = cli.out.as_path();
    match &cli.cmd {
        Cmd::Ingest { input, format, synthetic } => {
            let ds = if *synthetic {
                generate_panel(&cfg.synth_spec(cfg.seed))?.dataset
            } else {
                read_panel(input.as_deref().expect("required by clap"), *format, &cfg)?
            };
            let path = out_file(out, "panel.csv")?;
            write_panel_csv(&ds, create(&path)?).map_err(BenchError::from)?;
            let mut w = csv::Writer::from_writer(create(&out_file(out, "panel_summary.csv")?)?);
            for s in summarize(&ds) {
                w.serialize(s)?;
            }
            w.flush()?;
            println!("{} series, {} observations -> {}", ds.len(), ds.total_points(), path.display());
        }
        Cmd::Decompose { input } => {
            let ds = read_panel(input, InputFormat::Panel, &cfg)?;
            let stl = cfg.stl_config()?;
            let path = out_file(out, "decomposition.csv")?;
            let mut w = csv::Writer::from_writer(create(&path)?);
            w.write_record(["series_id", "date", "value", "trend", "seasonal", "remainder"])?;
            for rec in ds.records() {
                let r = stl_decompose(rec.series.values(), &stl).with_context(|| format!("series `{}`", rec.id()))?;
                for (t, d) in rec.series.dates().iter().enumerate() {
                    w.write_record([
                        rec.id().to_string(),
                        d.to_string(),
                        rec.series.values()[t].to_string(),
                        r.trend[t].to_string(),
                        r.seasonal[t].to_string(),
                        r.remainder[t].to_string(),
                    ])?;
                }
            }
            w.flush()?;
            println!("{} series -> {}", ds.len(), path.display());
        }
        Cmd::Components { source, input, dated } => {
            let data = build_components(&cfg, *source, input.as_deref(), *dated)?;
            let path = out_file(out, "components.json")?;
            data.save(&path)?;
            println!(
                "{} train / {} test windows, components {:?} -> {}",
                data.train.len(),
                data.test.len(),
                data.names,
                path.display()
            );
        }
        Cmd::Baseline { input } => {
            let ds = read_panel(input, InputFormat::Panel, &cfg)?;
            let histories = ds
                .records()
                .iter()
                .map(|r| remove_promo_spikes(r.series.values(), &r.covariates))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(BenchError::from)?;
            let learner = fforma_train(&histories, cfg.h, &Method::ALL, &MethodConfig::default(), &default_meta_config())
                .map_err(BenchError::from)?;
            let path = out_file(out, "baseline.json")?;
            write_json(&path, &learner)?;
            println!("meta-learner over {} series -> {}", histories.len(), path.display());
        }
        Cmd::Train { bundle, model, alpha } => {
            let data = Prepared::load(bundle)?;
            cfg.check_components(data.n_components())?;
            let alpha = alpha.unwrap_or(cfg.alpha);
            let spec = match model {
                ModelArg::Wr => ModelSpec::Wr { alpha },
                ModelArg::MlpCombiner => ModelSpec::MlpCombiner,
                ModelArg::PureNn => ModelSpec::PureNn,
            };
            if let Some(a) = spec.alpha() {
                if !(0.0..=data.n_components() as f64).contains(&a) {
                    return Err(BenchError::Config(format!("alpha {a} outside [0, {}]", data.n_components())).into());
                }
            }
            let m = fit_model(spec, &data, &cfg.train_config(cfg.seed))?.expect("trainable model");
            let path = out_file(out, "model.json")?;
            m.save(&path).map_err(BenchError::from)?;
            let h = &m.meta.history;
            println!("best epoch {} of {} -> {}", h.best_epoch, cfg.epochs, path.display());
        }
        Cmd::Forecast { bundle, model } => {
            let data = Prepared::load(bundle)?;
            let m = model.as_deref().map(WrModel::load).transpose().map_err(BenchError::from)?;
            let outputs = predict_set(m.as_ref(), &data.test)?;
            let path = out_file(out, "forecasts.csv")?;
            write_forecasts(&path, &data, &outputs)?;
            println!("{} windows -> {}", outputs.len(), path.display());
        }
        Cmd::Evaluate { bundle, forecasts } => {
            let data = Prepared::load(bundle)?;
            let yhats = match forecasts {
                Some(f) => read_forecasts(f, &data)?,
                None => data.test.components.iter().map(|c| c.additive()).collect(),
            };
            let mut ev = Evaluation::new();
            for (k, yhat) in yhats.iter().enumerate() {
                let n = data.test.eval_len(k);
                ev.push_window(&yhat[..n], &data.test.windows[k].target()?[..n]);
            }
            let label = if forecasts.is_some() { "forecasts" } else { "additive" };
            let reports = ev.reports(&[("model", label)]).map_err(BenchError::from)?;
            write_reports_json(&reports, create(&out_file(out, "metrics.json")?)?).map_err(BenchError::from)?;
            write_reports_csv(&reports, create(&out_file(out, "metrics.csv")?)?).map_err(BenchError::from)?;
            for r in &reports {
                println!("{:<14} {:.6}", r.metric_name.as_str(), r.value);
            }
        }
        Cmd::SweepAlpha { bundle } => {
            let data = match bundle {
                Some(b) => Prepared::load(b)?,
                None => synthetic_setup(&cfg)?.1,
            };
            let res = run_alpha_sweep(&data, &cfg)?;
            finish_experiment(out, &res, cfg.bins)?;
        }
        Cmd::Compare { bundle, electricity } => {
            let res = match (bundle, electricity) {
                (_, Some(path)) => run_public_electricity(path, &cfg)?.1,
                (Some(b), None) => run_model_comparison(&Prepared::load(b)?, &cfg)?,
                (None, None) => run_model_comparison(&synthetic_setup(&cfg)?.1, &cfg)?,
            };
            finish_experiment(out, &res, cfg.bins)?;
        }
        Cmd::TheoryCheck { trials } => {
            let suite = SuiteConfig {
                seed: cfg.seed,
                mc_trials: *trials,
                ..SuiteConfig::default()
            };
            let rep = run_theory_suite(&suite).map_err(BenchError::from)?;
            write_theory(out, &rep)?;
            for c in &rep.checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            for r in &rep.conjecture {
                println!("alpha {:<5} P(all components improve) {:.4}", r.alpha, r.p_all_improve);
            }
            if !rep.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Report { result, forecasts } => {
            if result.is_none() && forecasts.is_none() {
                return Err(BenchError::Config("report needs --result and/or --forecasts".into()).into());
            }
            if let Some(p) = result {
                let f = File::open(p).map_err(|e| BenchError::io(p, e))?;
                let res: ExperimentResult = serde_json::from_reader(std::io::BufReader::new(f)).map_err(BenchError::from)?;
                print_summary(&res);
                write_experiment(out, &res, cfg.bins)?;
            }
            if let Some(p) = forecasts {
                let path = out_file(out, "forecast_histograms.csv")?;
                forecast_histograms(p, &path, cfg.bins)?;
                println!("histograms -> {}", path.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn build_components(cfg: &BenchConfig, source: Source, input: Option<&Path>, dated: bool) -> Result<Prepared> {
    if let Source::Synthetic = source {
        return Ok(synthetic_setup(cfg)?.1);
    }
    let input = input.ok_or_else(|| BenchError::Config("--input is required for this source".into()))?;
    let ds = read_panel(input, InputFormat::Panel, cfg)?;
    let split = if dated {
        dated_split(&ds, cfg, &cfg.anchors, cfg.seed)?
    } else {
        holdout_split(&ds, cfg, cfg.seed)?
    };
    Ok(match source {
        Source::Stl => stl_prepared(&split, &cfg.stl_config()?)?,
        Source::Practical => {
            let stage1 = fit_practical(&ds, &cut_points(&ds, &split), &split.train, cfg.h, cfg.seed)?;
            practical_prepared(&split, &stage1)?
        }
        Source::Synthetic => unreachable!(),
    })
}

fn finish_experiment(out: &Path, res: &ExperimentResult, bins: usize) -> Result<()> {
    let m = write_experiment(out, res, bins)?;
    print_summary(res);
    println!("wrote {} files to {}", m.files.len(), out.display());
    if res.failures() > 0 {
        eprintln!("warning: {} runs failed; see {}_cells.csv", res.failures(), res.name);
    }
    Ok(())
}

fn print_summary(res: &ExperimentResult) {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.5}"));
    println!("{}", res.name);
    println!("{:<14}{:>6}{:>18}{:>12}{:>12}{:>12}{:>8}", "model", "alpha", "scope", "median_ql", "best_ql", "median_rmse", "failed");
    for r in &res.summary {
        let scope = r.scope.map_or("-".into(), |(lo, hi)| format!("[{lo:.2},{hi:.2}]"));
        let alpha = r.alpha.map_or("-".into(), |a| a.to_string());
        println!(
            "{:<14}{:>6}{:>18}{:>12}{:>12}{:>12}{:>8}",
            r.model,
            alpha,
            scope,
            f(r.median_p50_ql),
            f(r.best_p50_ql),
            f(r.median_rmse),
            r.failed
        );
    }
    if let Some(a) = res.argmin_alpha {
        println!("argmin alpha: {a}");
    }
}

fn write_forecasts(path: &Path, data: &Prepared, outputs: &[WrOutput]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let names: Vec<String> = outputs.first().map(|o| o.names.clone()).unwrap_or_default();
    let mut header = vec!["series_id".to_string(), "date".into(), "yhat".into()];
    header.extend(names.iter().map(|n| format!("{n}_modified")));
    header.push("residual".into());
    header.extend(names.iter().map(|n| format!("weight_{n}")));
    w.write_record(&header)?;
    for (win, o) in data.test.windows.iter().zip(outputs) {
        for (j, d) in win.future_dates.iter().enumerate() {
            let mut row = vec![win.series_id.clone(), d.to_string(), o.yhat[j].to_string()];
            row.extend(o.modified.iter().map(|m| m[j].to_string()));
            row.push(o.residuals[j].to_string());
            row.extend(o.weights.iter().map(|m| m[j].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Forecasts keyed by series and date, laid out like the bundle's test windows.
fn read_forecasts(path: &Path, data: &Prepared) -> Result<Vec<Vec<f64>>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| BenchError::Data(format!("{}: {e}", path.display())))?;
    let headers = rd.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BenchError::Data(format!("{}: missing column `{name}`", path.display())))
    };
    let (ci, cd, cy) = (col("series_id")?, col("date")?, col("yhat")?);
    let mut by_key: HashMap<(String, NaiveDate), f64> = HashMap::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |m: String| BenchError::Data(format!("{} row {}: {m}", path.display(), k + 2));
        let d: NaiveDate = rec[cd].parse().map_err(|e| bad(format!("date: {e}")))?;
        let y: f64 = rec[cy].parse().map_err(|e| bad(format!("yhat: {e}")))?;
        by_key.insert((rec[ci].to_string(), d), y);
    }
    data.test
        .windows
        .iter()
        .map(|w| {
            w.future_dates
                .iter()
                .map(|d| {
                    by_key.get(&(w.series_id.clone(), *d)).copied().ok_or_else(|| {
                        BenchError::Data(format!("no forecast for series `{}` on {d}", w.series_id)).into()
                    })
                })
                .collect()
        })
        .collect()
}

/// Histograms of every `weight_*` and `residual` column of a forecast CSV.
fn forecast_histograms(input: &Path, output: &Path, bins: usize) -> Result<()> {
    let mut rd = csv::Reader::from_path(input).map_err(|e| BenchError::Data(format!("{}: {e}", input.display())))?;
    let headers = rd.headers()?.clone();
    let cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("weight_") || *h == "residual")
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    if cols.is_empty() {
        bail!(BenchError::Data(format!("{}: no weight or residual columns", input.display())));
    }
    let mut values = vec![Vec::new(); cols.len()];
    for rec in rd.records() {
        let rec = rec?;
        for (k, (i, name)) in cols.iter().enumerate() {
            let v: f64 = rec[*i]
                .parse()
                .map_err(|e| BenchError::Data(format!("{}: column {name}: {e}", input.display())))?;
            values[k].push(v);
        }
    }
    let mut w = csv::Writer::from_writer(create(output)?);
    w.write_record(["quantity", "bin_lo", "bin_hi", "count", "mean", "min", "max", "share_below_one", "share_above_one"])?;
    for ((_, name), vals) in cols.iter().zip(&values) {
        let h = Histogram::new(vals, bins);
        let s = Summary::new(vals);
        for (b, c) in h.counts.iter().enumerate() {
            w.write_record([
                name.clone(),
                h.edges[b].to_string(),
                h.edges[b + 1].to_string(),
                c.to_string(),
                s.mean.to_string(),
                s.min.to_string(),
                s.max.to_string(),
                s.share_below_one.to_string(),
                s.share_above_one.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
