//! Panel data model, CSV ingestion, forecast windows and metrics.

pub mod components;
pub mod electricity;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod panel;
pub mod stats;
pub mod window;

pub use components::{ComponentMatrix, ComponentTable};
pub use error::{CoreError, Result};
pub use metrics::{
    mean_quantile_loss, p50_ql, p50_ql_with, quantile_loss, rmse, rmse_with, Evaluation, MetricName,
    MetricReport, P50Variant, RmseVariant,
};
pub use panel::{
    load_panel_csv, read_panel_csv, write_panel_csv, Calendar, Covariates, CsvSchema, PanelDataset,
    SeriesRecord, TimeSeries, Vocabulary,
};
pub use window::{forecast_window, make_windows, make_windows_where, window_at, ForecastWindow};
