//! MAE / MAPE over the test horizon and paired model comparison.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ForecastPanel;
use crate::error::{Error, Result};
use crate::numstats::paired_ttest;
use crate::trajectories::TrajectoryPanel;

/// Denominator floor for MAPE.
pub const MAPE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetrics {
    pub style: usize,
    pub city: String,
    pub abs_errors: Vec<f64>,
    pub mae: f64,
    pub mape: f64,
}

/// Macro-averaged over (style, city) series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub mode: String,
    pub mae: f64,
    pub mape: f64,
    /// Points whose MAPE denominator hit the floor.
    pub floored_points: usize,
    pub series: Vec<SeriesMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `mae(a) - mae(b)`.
    pub delta_mae: f64,
    pub t: f64,
    pub p_value: f64,
}

/// Scores `forecast` against `truth` over the forecast's steps. The MAPE
/// denominator is `max(|y|, eps)` so deseasonalized series (which go
/// negative) stay meaningful.
pub fn compute_metrics(forecast: &ForecastPanel, truth: &TrajectoryPanel, mode: &str) -> Result<MetricsReport> {
    let h = forecast.horizon();
    if forecast.cities != truth.cities || forecast.n_styles() != truth.n_styles {
        return Err(Error::InvalidArgument("forecast and truth cover different series".into()));
    }
    if forecast.start + h > truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: forecast.start + h,
        });
    }
    let mut series = Vec::new();
    let mut floored = 0;
    for (k, style) in forecast.values.iter().enumerate() {
        for (j, f) in style.iter().enumerate() {
            if f.len() != h {
                return Err(Error::DimensionMismatch { expected: h, got: f.len() });
            }
            let y = &truth.series(k, j)[forecast.start..forecast.start + h];
            let abs_errors: Vec<f64> = f.iter().zip(y).map(|(a, b)| (a - b).abs()).collect();
            let mut pct = 0.0;
            for (e, v) in abs_errors.iter().zip(y) {
                if v.abs() < MAPE_EPS {
                    floored += 1;
                }
                pct += e / v.abs().max(MAPE_EPS);
            }
            let n = h.max(1) as f64;
            series.push(SeriesMetrics {
                style: k,
                city: truth.cities[j].clone(),
                mae: abs_errors.iter().sum::<f64>() / n,
                mape: 100.0 * pct / n,
                abs_errors,
            });
        }
    }
    let n = series.len().max(1) as f64;
    Ok(MetricsReport {
        model: forecast.model.clone(),
        mode: mode.to_string(),
        mae: series.iter().map(|s| s.mae).sum::<f64>() / n,
        mape: series.iter().map(|s| s.mape).sum::<f64>() / n,
        floored_points: floored,
        series,
    })
}

/// Paired t-test over per-series MAE.
pub fn compare_models(a: &MetricsReport, b: &MetricsReport) -> Result<Comparison> {
    let same = a.series.len() == b.series.len()
        && a.series.iter().zip(&b.series).all(|(x, y)| x.style == y.style && x.city == y.city);
    if !same {
        return Err(Error::InvalidArgument(format!(
            "reports `{}` and `{}` cover different series",
            a.model, b.model
        )));
    }
    let xa: Vec<f64> = a.series.iter().map(|s| s.mae).collect();
    let xb: Vec<f64> = b.series.iter().map(|s| s.mae).collect();
    let t = paired_ttest(&xa, &xb)?;
    Ok(Comparison {
        delta_mae: a.mae - b.mae,
        t: t.t,
        p_value: t.p_value,
    })
}

impl MetricsReport {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

/// One row per report: `model,mode,mae,mape,floored_points`.
pub fn write_summary_csv(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "model,mode,mae,mape,floored_points").map_err(io)?;
    for r in reports {
        writeln!(w, "{},{},{},{},{}", r.model, r.mode, r.mae, r.mape, r.floored_points).map_err(io)?;
    }
    w.flush().map_err(io)
}
