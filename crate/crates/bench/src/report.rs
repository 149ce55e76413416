//! CSV tables and a JSON manifest for experiment and theory results.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wrcast_nn::report_weight_distributions;
use wrcast_theory::TheoryReport;

use crate::error::{BenchError, Result};
use crate::experiment::ExperimentResult;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| BenchError::io(path, e))?))
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Files written for one result, relative to the output directory.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Manifest {
    pub files: Vec<String>,
}

impl Manifest {
    fn add(&mut self, dir: &Path, name: String) -> PathBuf {
        self.files.push(name.clone());
        dir.join(name)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(create(path)?, value)?;
    Ok(())
}

/// Writes `<name>_summary.csv`, `<name>_cells.csv`, `<name>_components.csv`,
/// weight histograms when outputs are present, and `<name>.json`.
pub fn write_experiment(dir: &Path, res: &ExperimentResult, bins: usize) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let name = &res.name;
    let mut m = Manifest::default();

    let mut w = csv::Writer::from_writer(create(&m.add(dir, format!("{name}_summary.csv")))?);
    w.write_record([
        "model", "alpha", "scope_lo", "scope_hi", "runs", "failed", "median_rmse", "median_p50_ql", "best_rmse", "best_p50_ql",
    ])?;
    for r in &res.summary {
        w.write_record([
            r.model.clone(),
            fmt(r.alpha),
            fmt(r.scope.map(|s| s.0)),
            fmt(r.scope.map(|s| s.1)),
            r.runs.to_string(),
            r.failed.to_string(),
            fmt(r.median_rmse),
            fmt(r.median_p50_ql),
            fmt(r.best_rmse),
            fmt(r.best_p50_ql),
        ])?;
    }
    w.flush().map_err(|e| BenchError::io(dir, e))?;

    let mut w = csv::Writer::from_writer(create(&m.add(dir, format!("{name}_cells.csv")))?);
    w.write_record(["model", "alpha", "seed", "ok", "rmse", "p50_ql", "best_epoch", "seconds", "error"])?;
    for c in &res.cells {
        w.write_record([
            c.model.clone(),
            fmt(c.alpha),
            c.seed.to_string(),
            c.ok.to_string(),
            fmt(c.rmse),
            fmt(c.p50_ql),
            c.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
            format!("{:.3}", c.seconds),
            c.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| BenchError::io(dir, e))?;

    if !res.component_bias.is_empty() {
        let mut w = csv::Writer::from_writer(create(&m.add(dir, format!("{name}_components.csv")))?);
        w.write_record(["model", "alpha", "component", "count", "mae_modified", "mae_preliminary", "improved_fraction"])?;
        for (model, alpha, rows) in &res.component_bias {
            for b in rows {
                w.write_record([
                    model.clone(),
                    fmt(*alpha),
                    b.component.clone(),
                    b.count.to_string(),
                    b.mean_abs_error_modified.to_string(),
                    b.mean_abs_error_preliminary.to_string(),
                    b.improved_fraction.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| BenchError::io(dir, e))?;
    }

    if !res.sample_outputs.is_empty() {
        let rep = report_weight_distributions(&res.sample_outputs, bins)?;
        rep.write_histograms_csv(create(&m.add(dir, format!("{name}_weight_histograms.csv")))?)?;
        rep.write_summary_csv(create(&m.add(dir, format!("{name}_weight_summary.csv")))?)?;
    }

    let manifest_path = m.add(dir, format!("{name}.json"));
    #[derive(Serialize)]
    struct Doc<'a> {
        #[serde(flatten)]
        result: &'a ExperimentResult,
        files: &'a [String],
    }
    write_json(&manifest_path, &Doc { result: res, files: &m.files })?;
    Ok(m)
}

/// Writes `theory.json` and the N = 2 region map `theory_region_map.csv`.
pub fn write_theory(dir: &Path, rep: &TheoryReport) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut m = Manifest::default();
    let mut w = csv::Writer::from_writer(create(&m.add(dir, "theory_region_map.csv".into()))?);
    for c in &rep.cells {
        w.serialize(c)?;
    }
    w.flush().map_err(|e| BenchError::io(dir, e))?;
    write_json(&m.add(dir, "theory.json".into()), rep)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{Cell, SummaryRow};

    #[test]
    fn writes_tables_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let res = ExperimentResult {
            name: "x".into(),
            component_names: vec!["a".into(), "b".into()],
            seeds: vec![0],
            cells: vec![Cell {
                model: "wr".into(),
                alpha: Some(1.0),
                seed: 0,
                ok: false,
                error: Some("boom, with comma".into()),
                rmse: None,
                p50_ql: None,
                best_epoch: None,
                seconds: 0.0,
                component_bias: vec![],
            }],
            summary: vec![SummaryRow {
                model: "wr".into(),
                alpha: Some(1.0),
                scope: Some((0.5, 1.5)),
                runs: 1,
                failed: 1,
                median_rmse: None,
                median_p50_ql: None,
                best_rmse: None,
                best_p50_ql: None,
            }],
            argmin_alpha: None,
            alpha_zero_matches_additive: None,
            component_bias: vec![],
            sample_outputs: vec![],
        };
        let m = write_experiment(dir.path(), &res, 10).unwrap();
        assert_eq!(m.files, ["x_summary.csv", "x_cells.csv", "x.json"]);
        let mut rd = csv::Reader::from_path(dir.path().join("x_cells.csv")).unwrap();
        let row = rd.records().next().unwrap().unwrap();
        assert_eq!(&row[8], "boom, with comma");
        let doc: serde_json::Value = serde_json::from_reader(File::open(dir.path().join("x.json")).unwrap()).unwrap();
        assert_eq!(doc["summary"][0]["scope"][1], 1.5);
        assert_eq!(doc["files"].as_array().unwrap().len(), 3);
    }
}
