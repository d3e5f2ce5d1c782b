//! Statistics kernel: autoregressive least squares, F and t tail
//! probabilities, Spearman rank correlation and great-circle distance.

mod ols;
pub mod special;

use serde::{Deserialize, Serialize};

pub use ols::{fit_ar, fit_ar_from, least_squares, ArFit, Design, Exog, LeastSquares, RIDGE_JITTER};
pub(crate) use ols::cholesky;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Result of a nested-model F test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTest {
    pub f: f64,
    pub p_value: f64,
}

/// Nested-model F test on the reduction in residual sum of squares.
///
/// A negative statistic (the unrestricted fit did worse, which only happens
/// through round-off) is clamped to zero. A zero unrestricted RSS gives
/// `p = 0` when the restricted RSS is positive, `p = 1` otherwise.
pub fn f_test(rss_restricted: f64, rss_unrestricted: f64, extra_params: usize, residual_df: usize) -> FTest {
    assert!(extra_params >= 1 && residual_df >= 1, "degrees of freedom must be positive");
    let gain = rss_restricted - rss_unrestricted;
    if rss_unrestricted <= f64::MIN_POSITIVE {
        return if gain > f64::MIN_POSITIVE {
            FTest {
                f: f64::INFINITY,
                p_value: 0.0,
            }
        } else {
            FTest { f: 0.0, p_value: 1.0 }
        };
    }
    let f = ((gain / extra_params as f64) / (rss_unrestricted / residual_df as f64)).max(0.0);
    FTest {
        f,
        p_value: special::f_sf(f, extra_params as f64, residual_df as f64),
    }
}

/// Paired two-sided t test on `a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub t: f64,
    pub p_value: f64,
    pub mean_diff: f64,
    /// All differences were identical, so the limit case was reported.
    pub degenerate: bool,
}

pub fn paired_ttest(a: &[f64], b: &[f64]) -> crate::Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(crate::Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(crate::Error::InsufficientData(format!("paired t-test on {n} pairs")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let scale = diffs.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    if var <= (1e-15 * scale).powi(2) {
        let exact_zero = mean.abs() <= 1e-15 * scale.max(f64::MIN_POSITIVE) || mean == 0.0;
        return Ok(PairedTTest {
            t: if exact_zero { 0.0 } else { mean.signum() * f64::INFINITY },
            p_value: if exact_zero { 1.0 } else { 0.0 },
            mean_diff: mean,
            degenerate: true,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    Ok(PairedTTest {
        t,
        p_value: special::t_two_sided(t, (n - 1) as f64),
        mean_diff: mean,
        degenerate: false,
    })
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation. `None` when either side has no rank variance.
pub fn spearman(x: &[f64], y: &[f64]) -> crate::Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(crate::Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(crate::Error::InsufficientData(format!(
            "spearman needs at least 3 pairs, got {}",
            x.len()
        )));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Great-circle distance in km between `(lat, lon)` points given in degrees.
pub fn haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}
