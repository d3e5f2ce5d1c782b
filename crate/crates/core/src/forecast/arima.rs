//! ARIMA(p,1,q) by conditional sum of squares, p, q in {0,1,2}, order by AIC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numstats::{least_squares, Design};

const MAX_P: usize = 2;
const MAX_Q: usize = 2;
/// First differenced index scored by every candidate, so AICs are comparable.
const SCORE_START: usize = MAX_P;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub p: usize,
    pub q: usize,
    pub intercept: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub css: f64,
    pub aic: f64,
}

/// Order-2 stationarity triangle; also used for invertibility of theta
/// (with the sign flipped).
fn in_triangle(c: &[f64]) -> bool {
    match c {
        [] => true,
        [a] => a.abs() < 1.0,
        [a, b] => b.abs() < 1.0 && a + b < 1.0 && b - a < 1.0,
        _ => false,
    }
}

fn residuals(d: &[f64], c: f64, phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; d.len()];
    for t in 0..d.len() {
        let mut pred = c;
        for (i, a) in phi.iter().enumerate() {
            if t > i {
                pred += a * d[t - i - 1];
            }
        }
        for (i, b) in theta.iter().enumerate() {
            if t > i {
                pred += b * e[t - i - 1];
            }
        }
        e[t] = d[t] - pred;
    }
    e
}

fn css(d: &[f64], p: usize, params: &[f64]) -> f64 {
    let (phi, theta) = params[1..].split_at(p);
    let neg: Vec<f64> = theta.iter().map(|v| -v).collect();
    if !in_triangle(phi) || !in_triangle(&neg) {
        return f64::INFINITY;
    }
    residuals(d, params[0], phi, theta)[SCORE_START..].iter().map(|e| e * e).sum()
}

/// Hannan-Rissanen starting values: a long autoregression supplies
/// innovation estimates, then one regression on lags of both.
fn initial(d: &[f64], p: usize, q: usize) -> Vec<f64> {
    let long = 6.min(d.len() / 4).max(1);
    let mut innov = vec![0.0; d.len()];
    let mut x = Design::with_capacity(long + 1, d.len());
    for t in long..d.len() {
        let mut row = vec![1.0];
        row.extend((1..=long).map(|k| d[t - k]));
        x.push_row(&row);
    }
    if let Ok(ls) = least_squares(&x, &d[long..]) {
        innov[long..].copy_from_slice(&ls.residuals);
    }
    let start = long + q.max(p);
    let mut x = Design::with_capacity(1 + p + q, d.len());
    for t in start..d.len() {
        let mut row = vec![1.0];
        row.extend((1..=p).map(|k| d[t - k]));
        row.extend((1..=q).map(|k| innov[t - k]));
        x.push_row(&row);
    }
    let mut init = match least_squares(&x, &d[start..]) {
        Ok(ls) => ls.coef,
        Err(_) => vec![0.0; 1 + p + q],
    };
    // pull an inadmissible start back inside the admissible region
    while !css(d, p, &init).is_finite() {
        for v in &mut init[1..] {
            *v *= 0.5;
        }
    }
    init
}

/// Minimizes `f` from `x0` with the Nelder-Mead simplex.
pub(crate) fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-8 { step * x[i].abs().max(0.1) } else { step };
        let fx = f(&x);
        simplex.push((x, fx));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= 1e-14 * (best.abs() + 1e-300) || worst - best < 1e-300 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|i| simplex[..n].iter().map(|s| s.0[i]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < simplex[n].1 { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    for i in 0..n {
                        s.0[i] = x0[i] + 0.5 * (s.0[i] - x0[i]);
                    }
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

fn fit_order(d: &[f64], p: usize, q: usize) -> ArimaFit {
    let x0 = initial(d, p, q);
    let (x, val) = nelder_mead(|x| css(d, p, x), &x0, 0.1, 400 * (1 + p + q));
    let n = (d.len() - SCORE_START) as f64;
    let k = (1 + p + q) as f64;
    ArimaFit {
        p,
        q,
        intercept: x[0],
        phi: x[1..1 + p].to_vec(),
        theta: x[1 + p..].to_vec(),
        css: val,
        aic: n * (val.max(1e-300) / n).ln() + 2.0 * k,
    }
}

/// Fits every (p,1,q) candidate and keeps the lowest AIC.
pub fn fit_arima(hist: &[f64]) -> Result<ArimaFit> {
    if hist.len() < 16 {
        return Err(Error::InsufficientData(format!("arima needs at least 16 points, got {}", hist.len())));
    }
    let d: Vec<f64> = hist.windows(2).map(|w| w[1] - w[0]).collect();
    let mut best: Option<ArimaFit> = None;
    for p in 0..=MAX_P {
        for q in 0..=MAX_Q {
            let fit = fit_order(&d, p, q);
            if best.as_ref().is_none_or(|b| fit.aic < b.aic) {
                best = Some(fit);
            }
        }
    }
    Ok(best.expect("candidates"))
}

pub(crate) fn arima_forecast(hist: &[f64], h: usize) -> Result<Vec<f64>> {
    let fit = fit_arima(hist)?;
    let mut d: Vec<f64> = hist.windows(2).map(|w| w[1] - w[0]).collect();
    let mut e = residuals(&d, fit.intercept, &fit.phi, &fit.theta);
    let mut level = hist[hist.len() - 1];
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let t = d.len();
        let mut next = fit.intercept;
        for (i, a) in fit.phi.iter().enumerate() {
            next += a * d[t - i - 1];
        }
        for (i, b) in fit.theta.iter().enumerate() {
            next += b * e[t - i - 1];
        }
        d.push(next);
        e.push(0.0);
        level += next;
        out.push(level);
    }
    Ok(out)
}
