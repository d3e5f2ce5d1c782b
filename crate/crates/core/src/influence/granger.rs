use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numstats::{f_test, fit_ar_from, Exog};

/// How the candidate's lags enter the extended model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LagMode {
    /// Only lag `l` of the candidate (window `[l, l]`).
    #[default]
    Single,
    /// Lags `1..=l` of the candidate.
    Cumulative,
}

/// Adjustment applied to each candidate pair's per-lag p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LagCorrection {
    /// Raw per-lag p-values.
    None,
    /// Multiply each per-lag p-value by the number of lags searched.
    #[default]
    Bonferroni,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerConfig {
    /// Own-lag order of the restricted autoregression.
    pub order: usize,
    pub lags: RangeInclusive<usize>,
    pub alpha: f64,
    pub lag_mode: LagMode,
    pub lag_correction: LagCorrection,
    /// Benjamini-Hochberg across every test of a tensor.
    pub benjamini_hochberg: bool,
}

impl Default for GrangerConfig {
    fn default() -> Self {
        GrangerConfig {
            order: 8,
            lags: 1..=8,
            alpha: 0.05,
            lag_mode: LagMode::Single,
            lag_correction: LagCorrection::Bonferroni,
            benjamini_hochberg: false,
        }
    }
}

impl GrangerConfig {
    pub fn n_lags(&self) -> usize {
        self.lags.clone().count()
    }

    /// History needed before the first target of any test.
    pub fn warmup(&self) -> usize {
        self.order.max(*self.lags.end())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if *self.lags.start() == 0 || self.lags.is_empty() || *self.lags.end() > 52 {
            return Err(Error::InvalidArgument(format!("lag range {:?}", self.lags)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrangerOutcome {
    pub significant: bool,
    pub p_value: f64,
    pub f: f64,
    /// Flat target or candidate; the test carries no information.
    pub degenerate: bool,
}

fn is_flat(y: &[f64]) -> bool {
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0)
}

/// Does `candidate` at `lag` Granger-cause `target`?
///
/// Both the restricted AR(`order`) and the extended fit start at the same
/// target index, `max(order, lag)`, so their residual sums are comparable.
pub fn granger_test(
    target: &[f64],
    candidate: &[f64],
    order: usize,
    lag: usize,
    alpha: f64,
    mode: LagMode,
) -> Result<GrangerOutcome> {
    if target.len() != candidate.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: candidate.len(),
        });
    }
    if lag == 0 {
        return Err(Error::InvalidArgument("influence lag must be at least 1".into()));
    }
    if is_flat(target) || is_flat(candidate) {
        return Ok(GrangerOutcome {
            significant: false,
            p_value: 1.0,
            f: 0.0,
            degenerate: true,
        });
    }
    let min_lag = match mode {
        LagMode::Single => lag,
        LagMode::Cumulative => 1,
    };
    let start = order.max(lag);
    let extended = fit_ar_from(
        target,
        order,
        Some(Exog {
            series: candidate,
            min_lag,
            max_lag: lag,
        }),
        start,
    )?;
    let restricted = fit_ar_from(target, order, None, start)?;
    let test = f_test(
        restricted.rss,
        extended.rss,
        extended.n_params - restricted.n_params,
        extended.residual_df(),
    );
    Ok(GrangerOutcome {
        significant: test.p_value < alpha,
        p_value: test.p_value,
        f: test.f,
        degenerate: false,
    })
}

/// Benjamini-Hochberg adjusted p-values, in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adjusted = vec![1.0; m];
    let mut running = 1.0_f64;
    for (rank, &idx) in order.iter().enumerate().rev() {
        running = running.min(p[idx] * m as f64 / (rank + 1) as f64);
        adjusted[idx] = running.min(1.0);
    }
    adjusted
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bh_known_values() {
        // sorted 0.01, 0.03, 0.04, 0.2 -> raw 0.04, 0.06, 0.0533, 0.2, step-up min from the top
        let q = benjamini_hochberg(&[0.01, 0.04, 0.03, 0.2]);
        let expect = [0.04, 0.16 / 3.0, 0.16 / 3.0, 0.2];
        for (a, b) in q.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{q:?}");
        }
    }

    #[test]
    fn flat_target_degenerate() {
        let target = vec![0.3; 60];
        let cand: Vec<f64> = (0..60).map(|t| (t as f64).sin()).collect();
        let out = granger_test(&target, &cand, 8, 2, 0.05, LagMode::Single).unwrap();
        assert!(out.degenerate && !out.significant);
    }
}
