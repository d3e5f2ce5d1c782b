//! Coherent influence-conditioned forecaster, baselines and metrics.

mod arima;
mod baselines;
mod coherent;
mod metrics;
mod mlp;
mod var;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use arima::{fit_arima, ArimaFit};
pub use baselines::{
    baseline_forecast, drift_forecast, exp_smoothing_fit, fit_ar_baseline, last_forecast, mean_forecast,
    seasonal_forecast, Baseline, ALL_BASELINES, SEASON,
};
pub use coherent::{
    combined_loss, forecast_horizon, train_coherent, CityNet, ForecastModelSet, StyleForecaster, Tap, TrainConfig,
    TrainingLog, Wiring,
};
pub use metrics::{compare_models, compute_metrics, write_summary_csv, Comparison, MetricsReport, SeriesMetrics, MAPE_EPS};
pub use mlp::{Adam, Mlp};
pub use var::{fit_var, VarFit};

/// Forecasts for every (style, city) over the test horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastPanel {
    pub model: String,
    pub cities: Vec<String>,
    /// Panel index of the first forecast step.
    pub start: usize,
    /// `values[style][city][h]`.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl ForecastPanel {
    pub fn horizon(&self) -> usize {
        self.values.first().and_then(|s| s.first()).map_or(0, Vec::len)
    }

    pub fn n_styles(&self) -> usize {
        self.values.len()
    }

    /// Columns `model,style_id,city_id,step,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "model,style_id,city_id,step,value").map_err(io)?;
        for (k, style) in self.values.iter().enumerate() {
            for (j, series) in style.iter().enumerate() {
                for (h, v) in series.iter().enumerate() {
                    writeln!(w, "{},{k},{},{},{v}", self.model, self.cities[j], self.start + h).map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}
