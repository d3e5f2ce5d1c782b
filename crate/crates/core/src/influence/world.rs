use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::granger::{granger_test, GrangerConfig, LagCorrection};
use crate::error::Result;
use crate::trajectories::{global_trajectory_excluding, TrajectoryPanel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldEntry {
    pub city: String,
    pub style: usize,
    /// Selected lag, 0 when no lag was significant.
    pub lag: u8,
    pub p_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldInfluence {
    pub entries: Vec<WorldEntry>,
    pub diagnostics: Vec<String>,
}

/// Tests each city's series against the global mean trajectory of the same
/// style. With `leave_self_out` the city is excluded from the mean it is
/// tested against.
pub fn city_to_world(
    panel: &TrajectoryPanel,
    range: Range<usize>,
    cfg: &GrangerConfig,
    leave_self_out: bool,
) -> Result<WorldInfluence> {
    cfg.validate()?;
    let mut out = WorldInfluence::default();
    if panel.n_cities() < 2 {
        out.diagnostics
            .push("fewer than two cities: the global trajectory is the city itself, nothing to test".into());
        return Ok(out);
    }
    let n_lags = cfg.n_lags() as f64;
    for k in 0..panel.n_styles {
        let shared = global_trajectory_excluding(panel, k, None);
        for (c, city) in panel.cities.iter().enumerate() {
            let global = if leave_self_out {
                global_trajectory_excluding(panel, k, Some(c))
            } else {
                shared.clone()
            };
            let source = &panel.values[k][c][range.clone()];
            let target = &global[range.clone()];
            let mut best: Option<(usize, f64)> = None;
            let mut failed = None;
            for lag in cfg.lags.clone() {
                match granger_test(target, source, cfg.order, lag, cfg.alpha, cfg.lag_mode) {
                    Ok(o) => {
                        let p = match cfg.lag_correction {
                            LagCorrection::None => o.p_value,
                            LagCorrection::Bonferroni => (o.p_value * n_lags).min(1.0),
                        };
                        if best.is_none_or(|(_, bp)| p < bp) {
                            best = Some((lag, p));
                        }
                    }
                    Err(e) => failed = Some(e),
                }
            }
            match (best, failed) {
                (Some((lag, p)), None) => out.entries.push(WorldEntry {
                    city: city.clone(),
                    style: k,
                    lag: if p < cfg.alpha { lag as u8 } else { 0 },
                    p_value: p,
                }),
                (_, Some(e)) => out.diagnostics.push(format!("{city} style {k}: {e}")),
                (None, None) => {}
            }
        }
    }
    Ok(out)
}
