//! Per-style vector autoregression across all cities, order by AIC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numstats::{cholesky, least_squares, Design};

const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarFit {
    pub order: usize,
    /// `coef[i]` is equation i: intercept, then lag 1 of every city, lag 2, ...
    pub coef: Vec<Vec<f64>>,
    pub aic: f64,
}

impl VarFit {
    fn predict(&self, ys: &[Vec<f64>], t: usize) -> Vec<f64> {
        self.coef
            .iter()
            .map(|c| {
                let mut v = c[0];
                let mut idx = 1;
                for l in 1..=self.order {
                    for y in ys {
                        v += c[idx] * y[t - l];
                        idx += 1;
                    }
                }
                v
            })
            .collect()
    }
}

fn log_det_cov(resid: &[Vec<f64>]) -> Option<f64> {
    let c = resid.len();
    let n = resid[0].len() as f64;
    let mut cov = vec![0.0; c * c];
    for i in 0..c {
        for j in 0..=i {
            let s = resid[i].iter().zip(&resid[j]).map(|(a, b)| a * b).sum::<f64>() / n;
            cov[i * c + j] = s;
            cov[j * c + i] = s;
        }
    }
    cholesky(&mut cov, c)?;
    Some((0..c).map(|i| 2.0 * cov[i * c + i].ln()).sum())
}

/// Fits orders 1..=8 that leave enough samples on a shared window and keeps
/// the lowest AIC.
pub fn fit_var(hists: &[&[f64]]) -> Result<VarFit> {
    let c = hists.len();
    let len = hists.first().map_or(0, |h| h.len());
    if c == 0 || hists.iter().any(|h| h.len() != len) {
        return Err(Error::InvalidArgument("var needs equal-length series".into()));
    }
    let feasible = |p: usize| len >= p && len - p >= c * p + 1 + 2;
    let max_order = (1..=MAX_ORDER)
        .rev()
        .find(|&p| feasible(p))
        .ok_or_else(|| Error::InsufficientData(format!("var on {c} series needs more than {len} points")))?;
    let start = max_order;
    let mut best: Option<VarFit> = None;
    for p in 1..=max_order {
        let cols = 1 + c * p;
        let mut x = Design::with_capacity(cols, len - start);
        let mut row = vec![0.0; cols];
        for t in start..len {
            row[0] = 1.0;
            let mut idx = 1;
            for l in 1..=p {
                for h in hists {
                    row[idx] = h[t - l];
                    idx += 1;
                }
            }
            x.push_row(&row);
        }
        let mut coef = Vec::with_capacity(c);
        let mut resid = Vec::with_capacity(c);
        for h in hists {
            let ls = least_squares(&x, &h[start..])?;
            coef.push(ls.coef);
            resid.push(ls.residuals);
        }
        let n = (len - start) as f64;
        let Some(ld) = log_det_cov(&resid) else { continue };
        let aic = n * ld + 2.0 * (c * cols) as f64;
        if best.as_ref().is_none_or(|b| aic < b.aic) {
            best = Some(VarFit { order: p, coef, aic });
        }
    }
    // exact fits make every residual covariance singular; fall back to order 1
    match best {
        Some(b) => Ok(b),
        None => {
            let mut x = Design::with_capacity(1 + c, len - 1);
            for t in 1..len {
                let mut row = vec![1.0];
                row.extend(hists.iter().map(|h| h[t - 1]));
                x.push_row(&row);
            }
            let coef = hists.iter().map(|h| least_squares(&x, &h[1..]).map(|l| l.coef)).collect::<Result<_>>()?;
            Ok(VarFit {
                order: 1,
                coef,
                aic: f64::NEG_INFINITY,
            })
        }
    }
}

pub(crate) fn var_forecast(hists: &[&[f64]], h: usize) -> Result<Vec<Vec<f64>>> {
    let fit = fit_var(hists)?;
    let len = hists[0].len();
    let mut ys: Vec<Vec<f64>> = hists.iter().map(|v| v.to_vec()).collect();
    for s in 0..h {
        let next = fit.predict(&ys, len + s);
        for (y, v) in ys.iter_mut().zip(next) {
            y.push(v);
        }
    }
    Ok(ys.into_iter().map(|mut y| y.split_off(len)).collect())
}
