use std::fs::File;
use std::io::BufWriter;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::granger::GrangerConfig;
use super::scores::influence_scores;
use super::tensor::discover_tensor;
use crate::error::{Error, Result};
use crate::trajectories::TrajectoryPanel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceDynamics {
    pub cities: Vec<String>,
    /// Time index of each window's first step.
    pub window_starts: Vec<usize>,
    /// Week label of each window's first step.
    pub window_weeks: Vec<i64>,
    /// `exerted[city][window]`.
    pub exerted: Vec<Vec<f64>>,
}

/// Exerted influence per city over sliding windows inside `range`.
pub fn influence_dynamics(
    panel: &TrajectoryPanel,
    range: Range<usize>,
    window: usize,
    step: usize,
    cfg: &GrangerConfig,
) -> Result<InfluenceDynamics> {
    if step == 0 || window == 0 {
        return Err(Error::InvalidArgument("window and step must be positive".into()));
    }
    let len = range.len();
    if len < window + step {
        return Err(Error::InsufficientData(format!(
            "window {window} with step {step} does not fit in {len} steps"
        )));
    }
    let mut starts = Vec::new();
    let mut s = range.start;
    while s + window <= range.end {
        starts.push(s);
        s += step;
    }
    let mut exerted = vec![Vec::with_capacity(starts.len()); panel.n_cities()];
    for &start in &starts {
        let (tensor, _) = discover_tensor(panel, start..start + window, cfg)?;
        let scores = influence_scores(&tensor);
        for (c, e) in scores.exerted.into_iter().enumerate() {
            exerted[c].push(e);
        }
    }
    Ok(InfluenceDynamics {
        cities: panel.cities.clone(),
        window_weeks: starts.iter().map(|&s| panel.week_index[s]).collect(),
        window_starts: starts,
        exerted,
    })
}

impl InfluenceDynamics {
    /// `city,window_start,exerted` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(f));
        w.write_record(["city", "window_start", "exerted"])?;
        for (c, city) in self.cities.iter().enumerate() {
            for (wi, week) in self.window_weeks.iter().enumerate() {
                w.write_record([city.clone(), week.to_string(), self.exerted[c][wi].to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}
