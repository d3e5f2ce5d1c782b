//! Least squares via jittered normal equations, and autoregressive fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal jitter added to the Gram matrix before factorization.
pub const RIDGE_JITTER: f64 = 1e-10;

/// Row-major dense design matrix.
#[derive(Debug, Clone)]
pub struct Design {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Design {
    pub fn with_capacity(cols: usize, rows: usize) -> Self {
        Design {
            rows: 0,
            cols,
            data: Vec::with_capacity(cols * rows),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

/// In-place Cholesky factor of a symmetric positive definite `n x n` matrix
/// (lower triangle). Returns `None` when a pivot is not positive.
pub(crate) fn cholesky(a: &mut [f64], n: usize) -> Option<()> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / diag;
        }
    }
    Some(())
}

pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `min ||X b - y||^2` through `(X'X + jitter I) b = X'y`.
pub fn least_squares(x: &Design, y: &[f64]) -> Result<LeastSquares> {
    if x.rows != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows,
            got: y.len(),
        });
    }
    let p = x.cols;
    let mut gram = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for (r, &target) in y.iter().enumerate() {
        let row = x.row(r);
        for i in 0..p {
            xty[i] += row[i] * target;
            for j in 0..=i {
                gram[i * p + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[j * p + i] = gram[i * p + j];
        }
        gram[i * p + i] += RIDGE_JITTER;
    }
    cholesky(&mut gram, p).ok_or(Error::Singular(p))?;
    cholesky_solve(&gram, p, &mut xty);
    let coef = xty;
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Singular(p));
    }
    let residuals: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(r, &target)| {
            let fit: f64 = x.row(r).iter().zip(&coef).map(|(a, b)| a * b).sum();
            target - fit
        })
        .collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    Ok(LeastSquares {
        coef,
        residuals,
        rss,
    })
}

/// Exogenous regressor for an extended autoregression: `series` enters at
/// lags `min_lag..=max_lag`.
#[derive(Debug, Clone, Copy)]
pub struct Exog<'a> {
    pub series: &'a [f64],
    pub min_lag: usize,
    pub max_lag: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArFit {
    pub intercept: f64,
    /// `own[k]` multiplies `y[t - k - 1]`.
    pub own: Vec<f64>,
    /// `exog[l]` multiplies `x[t - min_lag - l]`.
    pub exog: Vec<f64>,
    pub exog_lags: Option<(usize, usize)>,
    pub rss: f64,
    pub n_residuals: usize,
    pub n_params: usize,
    /// First target index used in the fit.
    pub start: usize,
}

impl ArFit {
    /// Residual degrees of freedom.
    pub fn residual_df(&self) -> usize {
        self.n_residuals.saturating_sub(self.n_params)
    }

    /// One-step prediction of `y[t]` from the available history.
    pub fn predict_at(&self, y: &[f64], x: Option<&[f64]>, t: usize) -> f64 {
        let mut v = self.intercept;
        for (k, c) in self.own.iter().enumerate() {
            v += c * y[t - k - 1];
        }
        if let (Some((m, _)), Some(x)) = (self.exog_lags, x) {
            for (l, c) in self.exog.iter().enumerate() {
                v += c * x[t - m - l];
            }
        }
        v
    }
}

/// Fits `y_t = c + sum_k phi_k y_{t-k} [+ sum_l psi_l x_{t-l}]` on the
/// targets `t = max(order, max_lag) .. len`.
pub fn fit_ar(y: &[f64], order: usize, exog: Option<Exog<'_>>) -> Result<ArFit> {
    let start = order.max(exog.map_or(0, |e| e.max_lag));
    fit_ar_from(y, order, exog, start)
}

/// As [`fit_ar`] with an explicit first target index, so that nested models
/// can share one effective sample window.
pub fn fit_ar_from(y: &[f64], order: usize, exog: Option<Exog<'_>>, start: usize) -> Result<ArFit> {
    if let Some(e) = exog {
        if e.series.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: e.series.len(),
            });
        }
        if e.min_lag == 0 || e.min_lag > e.max_lag {
            return Err(Error::InvalidArgument(format!(
                "exogenous lag window [{}, {}]",
                e.min_lag, e.max_lag
            )));
        }
    }
    let n_exog = exog.map_or(0, |e| e.max_lag - e.min_lag + 1);
    let n_params = 1 + order + n_exog;
    let needed = order.max(exog.map_or(0, |e| e.max_lag));
    if start < needed {
        return Err(Error::InvalidArgument(format!(
            "window start {start} precedes required history {needed}"
        )));
    }
    let n_eff = y.len().saturating_sub(start);
    if n_eff < n_params + 2 {
        return Err(Error::InsufficientData(format!(
            "{n_eff} usable samples for {n_params} parameters"
        )));
    }

    let mut design = Design::with_capacity(n_params, n_eff);
    let mut row = vec![0.0; n_params];
    for t in start..y.len() {
        row[0] = 1.0;
        for k in 0..order {
            row[1 + k] = y[t - k - 1];
        }
        if let Some(e) = exog {
            for (l, lag) in (e.min_lag..=e.max_lag).enumerate() {
                row[1 + order + l] = e.series[t - lag];
            }
        }
        design.push_row(&row);
    }
    let ls = least_squares(&design, &y[start..])?;
    Ok(ArFit {
        intercept: ls.coef[0],
        own: ls.coef[1..1 + order].to_vec(),
        exog: ls.coef[1 + order..].to_vec(),
        exog_lags: exog.map(|e| (e.min_lag, e.max_lag)),
        rss: ls.rss,
        n_residuals: n_eff,
        n_params,
        start,
    })
}
