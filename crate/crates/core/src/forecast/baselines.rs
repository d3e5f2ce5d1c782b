//! Naive and classical baselines. Every method forecasts from the history
//! before the test range and never sees test-range values.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{arima, var, ForecastPanel};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::numstats::{fit_ar_from, ArFit};
use crate::trajectories::{SplitSpec, TrajectoryPanel};

pub const SEASON: usize = 52;
const MAX_AR_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Gaussian,
    Seasonal,
    Mean,
    Last,
    Drift,
    Exp,
    Ar,
    Arima,
    Var,
}

pub const ALL_BASELINES: [Baseline; 9] = [
    Baseline::Gaussian,
    Baseline::Seasonal,
    Baseline::Mean,
    Baseline::Last,
    Baseline::Drift,
    Baseline::Exp,
    Baseline::Ar,
    Baseline::Arima,
    Baseline::Var,
];

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Gaussian => "gaussian",
            Baseline::Seasonal => "seasonal",
            Baseline::Mean => "mean",
            Baseline::Last => "last",
            Baseline::Drift => "drift",
            Baseline::Exp => "exp",
            Baseline::Ar => "ar",
            Baseline::Arima => "arima",
            Baseline::Var => "var",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_BASELINES
            .into_iter()
            .find(|b| b.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown baseline `{s}`")))
    }
}

fn need(hist: &[f64], n: usize, what: &str) -> Result<()> {
    if hist.len() < n {
        return Err(Error::InsufficientData(format!(
            "{what} needs at least {n} history points, got {}",
            hist.len()
        )));
    }
    Ok(())
}

pub fn mean_forecast(hist: &[f64], h: usize) -> Result<Vec<f64>> {
    need(hist, 1, "mean")?;
    let m = hist.iter().sum::<f64>() / hist.len() as f64;
    Ok(vec![m; h])
}

pub fn last_forecast(hist: &[f64], h: usize) -> Result<Vec<f64>> {
    need(hist, 1, "last")?;
    Ok(vec![hist[hist.len() - 1]; h])
}

/// Continues the line through the first and last observations.
pub fn drift_forecast(hist: &[f64], h: usize) -> Result<Vec<f64>> {
    need(hist, 2, "drift")?;
    let n = hist.len();
    let slope = (hist[n - 1] - hist[0]) / (n - 1) as f64;
    Ok((1..=h).map(|s| hist[n - 1] + slope * s as f64).collect())
}

/// Repeats the value one season earlier, reading earlier forecasts once the
/// horizon passes a full season.
pub fn seasonal_forecast(hist: &[f64], h: usize) -> Result<Vec<f64>> {
    need(hist, SEASON, "seasonal")?;
    let mut ext = hist.to_vec();
    for _ in 0..h {
        ext.push(ext[ext.len() - SEASON]);
    }
    Ok(ext.split_off(hist.len()))
}

fn gaussian_forecast(hist: &[f64], h: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    need(hist, 2, "gaussian")?;
    let n = hist.len() as f64;
    let m = hist.iter().sum::<f64>() / n;
    let sd = (hist.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let dist = Normal::new(m, sd).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((0..h).map(|_| dist.sample(rng)).collect())
}

/// Smoothing weight minimizing one-step MSE over `fit_len` leading points,
/// searched on the grid 0.01, 0.02, ..., 1.
pub fn exp_smoothing_fit(hist: &[f64], fit_len: usize) -> f64 {
    let fit = &hist[..fit_len.min(hist.len())];
    let mut best = (f64::INFINITY, 1.0);
    for i in 1..=100 {
        let alpha = i as f64 / 100.0;
        let mut level = fit[0];
        let mut sse = 0.0;
        for &y in &fit[1..] {
            sse += (y - level).powi(2);
            level += alpha * (y - level);
        }
        if sse < best.0 {
            best = (sse, alpha);
        }
    }
    best.1
}

fn exp_forecast(hist: &[f64], fit_len: usize, h: usize) -> Result<Vec<f64>> {
    need(hist, 2, "exp")?;
    let alpha = exp_smoothing_fit(hist, fit_len.max(2));
    let mut level = hist[0];
    for &y in &hist[1..] {
        level += alpha * (y - level);
    }
    Ok(vec![level; h])
}

/// AR model with order chosen by AIC over 1..=8 on a common sample window.
pub fn fit_ar_baseline(hist: &[f64]) -> Result<ArFit> {
    let max_order = (1..=MAX_AR_ORDER)
        .rev()
        .find(|&p| hist.len() >= p + p + 4)
        .ok_or_else(|| Error::InsufficientData(format!("ar needs more than {} points", hist.len())))?;
    let mut best: Option<(f64, ArFit)> = None;
    for p in 1..=max_order {
        let fit = fit_ar_from(hist, p, None, max_order)?;
        let n = fit.n_residuals as f64;
        let aic = n * (fit.rss.max(1e-300) / n).ln() + 2.0 * fit.n_params as f64;
        if best.as_ref().is_none_or(|(b, _)| aic < *b) {
            best = Some((aic, fit));
        }
    }
    Ok(best.expect("at least one order").1)
}

fn ar_forecast(hist: &[f64], h: usize) -> Result<Vec<f64>> {
    let fit = fit_ar_baseline(hist)?;
    let mut ext = hist.to_vec();
    for _ in 0..h {
        let t = ext.len();
        ext.push(fit.predict_at(&ext, None, t));
    }
    Ok(ext.split_off(hist.len()))
}

/// Forecasts every (style, city) series over `h` steps from the test origin.
pub fn baseline_forecast(
    method: Baseline,
    panel: &TrajectoryPanel,
    split: &SplitSpec,
    h: usize,
    seed: u64,
) -> Result<ForecastPanel> {
    let origin = split.test.start;
    if origin > panel.len() {
        return Err(Error::InvalidArgument("split exceeds panel length".into()));
    }
    let fit_len = split.train.end;
    let mut values = Vec::with_capacity(panel.n_styles);
    for k in 0..panel.n_styles {
        let hists: Vec<&[f64]> = (0..panel.n_cities()).map(|j| &panel.series(k, j)[..origin]).collect();
        let style = match method {
            Baseline::Var => var::var_forecast(&hists, h)?,
            _ => hists
                .iter()
                .enumerate()
                .map(|(j, hist)| match method {
                    Baseline::Gaussian => {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("gaussian-{k}-{j}")));
                        gaussian_forecast(hist, h, &mut rng)
                    }
                    Baseline::Seasonal => seasonal_forecast(hist, h),
                    Baseline::Mean => mean_forecast(hist, h),
                    Baseline::Last => last_forecast(hist, h),
                    Baseline::Drift => drift_forecast(hist, h),
                    Baseline::Exp => exp_forecast(hist, fit_len, h),
                    Baseline::Ar => ar_forecast(hist, h),
                    Baseline::Arima => arima::arima_forecast(hist, h),
                    Baseline::Var => unreachable!(),
                })
                .collect::<Result<Vec<_>>>()?,
        };
        values.push(style);
    }
    Ok(ForecastPanel {
        model: method.name().to_string(),
        cities: panel.cities.clone(),
        start: origin,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_and_mean_by_hand() {
        let hist = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.5];
        assert_eq!(last_forecast(&hist, 3).unwrap(), vec![3.5; 3]);
        assert_eq!(mean_forecast(&hist, 2).unwrap(), vec![3.95; 2]);
    }

    #[test]
    fn drift_continues_line() {
        let hist: Vec<f64> = (0..30).map(|t| 0.1 + 0.01 * t as f64).collect();
        let f = drift_forecast(&hist, 5).unwrap();
        for (s, v) in f.iter().enumerate() {
            assert!((v - (0.1 + 0.01 * (30 + s) as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn seasonal_wraps_past_one_season() {
        let hist: Vec<f64> = (0..104).map(|t| (t % SEASON) as f64).collect();
        let f = seasonal_forecast(&hist, 60).unwrap();
        for (s, v) in f.iter().enumerate() {
            assert_eq!(*v, ((104 + s) % SEASON) as f64);
        }
        assert!(seasonal_forecast(&hist[..51], 1).is_err());
    }

    #[test]
    fn exp_on_constant_is_constant() {
        assert_eq!(exp_forecast(&[0.3; 20], 15, 4).unwrap(), vec![0.3; 4]);
        // random walk prefers heavy weight on the latest value
        let walk = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(exp_smoothing_fit(&walk, 6), 1.0);
    }

    #[test]
    fn parse_names() {
        for b in ALL_BASELINES {
            assert_eq!(b.name().parse::<Baseline>().unwrap(), b);
        }
        assert!("geomodel".parse::<Baseline>().is_err());
    }
}
