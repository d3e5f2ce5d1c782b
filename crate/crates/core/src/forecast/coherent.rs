//! Per-city networks wired to their discovered influencers and trained
//! jointly per style under the coherence penalty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Adam, Mlp};
use super::ForecastPanel;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::influence::InfluenceTensor;
use crate::trajectories::{SplitSpec, TrajectoryPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Wiring {
    /// Own lags plus the influencer lags found in the tensor.
    #[default]
    Discovered,
    /// Own lags plus every lag of every other city.
    FullInteraction,
    /// Own lags only.
    OwnOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Coherence weight.
    pub lambda: f64,
    pub lr: f64,
    pub l2: f64,
    pub hidden: usize,
    /// Own-lag count.
    pub order: usize,
    /// When non-empty, the own-lag count is picked per style by validation MAE.
    pub order_candidates: Vec<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    pub wiring: Wiring,
    /// Lags per city used by [`Wiring::FullInteraction`].
    pub full_interaction_lags: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            lr: 1e-2,
            l2: 1e-8,
            hidden: 16,
            order: 8,
            order_candidates: Vec::new(),
            max_epochs: 2000,
            patience: 20,
            wiring: Wiring::Discovered,
            full_interaction_lags: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tap {
    pub source: usize,
    pub lag: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityNet {
    pub city: String,
    pub taps: Vec<Tap>,
    pub net: Mlp,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub stopped_early: bool,
    pub train_loss: Vec<f64>,
    pub final_coherence: f64,
}

/// Networks for every city of one style, plus the shared input scaling:
/// a network sees `(y - offset) / scale` and predicts `offset + scale * out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleForecaster {
    pub style: usize,
    pub order: usize,
    pub offset: f64,
    pub scale: f64,
    pub nets: Vec<CityNet>,
    pub log: TrainingLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModelSet {
    pub name: String,
    pub cities: Vec<String>,
    pub config: TrainConfig,
    pub styles: Vec<StyleForecaster>,
}

impl StyleForecaster {
    fn warmup(&self) -> usize {
        self.nets
            .iter()
            .flat_map(|n| n.taps.iter().map(|t| t.lag))
            .chain(std::iter::once(self.order))
            .max()
            .unwrap_or(self.order)
    }

    /// Network input for predicting step `t` from `z` (scaled series per city).
    fn inputs(&self, city: usize, z: &[Vec<f64>], t: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((1..=self.order).map(|k| z[city][t - k]));
        out.extend(self.nets[city].taps.iter().map(|tap| z[tap.source][t - tap.lag]));
    }

    /// One-step predictions in data units for step `t`, given raw history
    /// `hist[city]` with at least `t` values.
    pub fn predict_step(&self, hist: &[Vec<f64>], t: usize) -> Vec<f64> {
        let warm = self.warmup();
        let lo = t - warm;
        let z: Vec<Vec<f64>> = hist
            .iter()
            .map(|y| {
                let mut v = vec![0.0; t];
                for i in lo..t {
                    v[i] = (y[i] - self.offset) / self.scale;
                }
                v
            })
            .collect();
        let mut x = Vec::new();
        (0..self.nets.len())
            .map(|c| {
                self.inputs(c, &z, t, &mut x);
                self.offset + self.scale * self.nets[c].net.forward(&x)
            })
            .collect()
    }
}

/// Combined loss over one style's cities and its parameter gradient.
///
/// With scaled errors `e[c][n] = target - out`, the loss is
/// `(1/N) sum_n [ sum_c e^2 + lambda * (mean_c e)^2 ] + (l2/2) |theta|^2`.
/// Gradients are returned per city in [`Mlp::params`] layout.
pub fn combined_loss(
    nets: &[Mlp],
    inputs: &[Vec<Vec<f64>>],
    targets: &[Vec<f64>],
    lambda: f64,
    l2: f64,
) -> (f64, Vec<Vec<f64>>) {
    let (loss, mut grads, _) = data_loss(nets, inputs, targets, lambda);
    let mut total = loss;
    for (net, g) in nets.iter().zip(grads.iter_mut()) {
        for (gi, p) in g.iter_mut().zip(net.params()) {
            total += 0.5 * l2 * p * p;
            *gi += l2 * p;
        }
    }
    (total, grads)
}

/// Data part of [`combined_loss`]; also returns the coherence term alone.
fn data_loss(nets: &[Mlp], inputs: &[Vec<Vec<f64>>], targets: &[Vec<f64>], lambda: f64) -> (f64, Vec<Vec<f64>>, f64) {
    let c = nets.len();
    let n = targets[0].len();
    let hidden = nets.iter().map(|m| m.hidden).max().unwrap_or(0);
    let mut acts = vec![vec![0.0; hidden]; c];
    let mut grads: Vec<Vec<f64>> = nets.iter().map(|m| vec![0.0; m.n_params()]).collect();
    let mut errs = vec![0.0; c];
    let mut loss = 0.0;
    let mut coherence = 0.0;
    let inv_n = 1.0 / n as f64;
    // activations per (city, sample) are recomputed in the backward sweep
    for s in 0..n {
        for j in 0..c {
            let out = nets[j].forward_with(&inputs[j][s], &mut acts[j]);
            errs[j] = targets[j][s] - out;
        }
        let mean = errs.iter().sum::<f64>() / c as f64;
        loss += errs.iter().map(|e| e * e).sum::<f64>() + lambda * mean * mean;
        coherence += mean * mean;
        for j in 0..c {
            let dout = -2.0 * inv_n * (errs[j] + lambda * mean / c as f64);
            nets[j].backward(&inputs[j][s], &acts[j], dout, &mut grads[j]);
        }
    }
    (loss * inv_n, grads, coherence * inv_n)
}

fn taps_for(wiring: Wiring, tensor: Option<&InfluenceTensor>, style: usize, city: usize, n_cities: usize, full_lags: usize) -> Vec<Tap> {
    match wiring {
        Wiring::OwnOnly => Vec::new(),
        Wiring::Discovered => tensor
            .map(|t| {
                t.influencers(style, city)
                    .into_iter()
                    .map(|(source, lag)| Tap { source, lag })
                    .collect()
            })
            .unwrap_or_default(),
        Wiring::FullInteraction => (0..n_cities)
            .filter(|&i| i != city)
            .flat_map(|source| (1..=full_lags).map(move |lag| Tap { source, lag }))
            .collect(),
    }
}

fn train_style(
    panel: &TrajectoryPanel,
    tensor: Option<&InfluenceTensor>,
    split: &SplitSpec,
    cfg: &TrainConfig,
    style: usize,
    order: usize,
) -> Result<StyleForecaster> {
    let c = panel.n_cities();
    // nothing at or beyond the test range is visible to training
    let visible = split.test.start;
    let train_vals: Vec<f64> = (0..c).flat_map(|j| panel.values[style][j][split.train.clone()].iter().copied()).collect();
    let offset = train_vals.iter().sum::<f64>() / train_vals.len() as f64;
    let var = train_vals.iter().map(|v| (v - offset).powi(2)).sum::<f64>() / train_vals.len() as f64;
    let scale = var.sqrt().max(1e-6);
    let z: Vec<Vec<f64>> = (0..c)
        .map(|j| panel.values[style][j][..visible].iter().map(|v| (v - offset) / scale).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("coherent-style-{style}-order-{order}")));
    let nets: Vec<CityNet> = (0..c)
        .map(|j| {
            let taps = taps_for(cfg.wiring, tensor, style, j, c, cfg.full_interaction_lags);
            let net = Mlp::init(order + taps.len(), cfg.hidden, &mut rng);
            CityNet {
                city: panel.cities[j].clone(),
                taps,
                net,
            }
        })
        .collect();
    let mut model = StyleForecaster {
        style,
        order,
        offset,
        scale,
        nets,
        log: TrainingLog::default(),
    };
    let warm = model.warmup();
    if split.train.end <= warm + 1 {
        return Err(Error::InsufficientData(format!(
            "training range of {} steps is shorter than the widest lag {warm}",
            split.train.end
        )));
    }
    let gather = |range: std::ops::Range<usize>| {
        let mut x = Vec::new();
        let mut inputs = vec![Vec::new(); c];
        let mut targets = vec![Vec::new(); c];
        for t in range {
            for j in 0..c {
                model.inputs(j, &z, t, &mut x);
                inputs[j].push(x.clone());
                targets[j].push(z[j][t]);
            }
        }
        (inputs, targets)
    };
    let (train_x, train_y) = gather(warm..split.train.end);
    let (val_x, val_y) = gather(split.validation.start.max(warm)..split.validation.end);

    let val_mae = |nets: &[CityNet]| -> f64 {
        let mut acc = 0.0;
        let mut n = 0usize;
        for j in 0..c {
            for (x, y) in val_x[j].iter().zip(&val_y[j]) {
                acc += (nets[j].net.forward(x) - y).abs();
                n += 1;
            }
        }
        acc * scale / n.max(1) as f64
    };

    let mut opts: Vec<Adam> = model.nets.iter().map(|n| Adam::new(n.net.n_params(), cfg.lr, cfg.l2)).collect();
    let mut params: Vec<Vec<f64>> = model.nets.iter().map(|n| n.net.params()).collect();
    let has_val = !val_y[0].is_empty();
    let mut best_val = if has_val { val_mae(&model.nets) } else { f64::INFINITY };
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut log = TrainingLog::default();

    for epoch in 1..=cfg.max_epochs {
        let mlps: Vec<Mlp> = model.nets.iter().map(|n| n.net.clone()).collect();
        let (loss, grads, _) = data_loss(&mlps, &train_x, &train_y, cfg.lambda);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("style {style}: non-finite training loss at epoch {epoch}")));
        }
        log.train_loss.push(loss);
        for j in 0..c {
            opts[j].update(&mut params[j], &grads[j]);
            model.nets[j].net.set_params(&params[j]);
        }
        log.epochs = epoch;
        if has_val {
            let v = val_mae(&model.nets);
            if v < best_val {
                best_val = v;
                best_params = params.clone();
                best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    log.stopped_early = true;
                    break;
                }
            }
        } else {
            best_params = params.clone();
            best_epoch = epoch;
        }
    }
    for (net, p) in model.nets.iter_mut().zip(&best_params) {
        net.net.set_params(p);
    }
    let mlps: Vec<Mlp> = model.nets.iter().map(|n| n.net.clone()).collect();
    log.final_coherence = data_loss(&mlps, &train_x, &train_y, cfg.lambda).2 * scale * scale;
    log.best_epoch = best_epoch;
    log.best_val_mae = if has_val { best_val } else { f64::NAN };
    model.log = log;
    Ok(model)
}

/// Trains one joint forecaster per style. `tensor` supplies the influencer
/// wiring for [`Wiring::Discovered`].
pub fn train_coherent(
    panel: &TrajectoryPanel,
    tensor: Option<&InfluenceTensor>,
    split: &SplitSpec,
    cfg: &TrainConfig,
    name: &str,
) -> Result<ForecastModelSet> {
    if let Some(t) = tensor {
        if t.cities != panel.cities || t.n_styles != panel.n_styles {
            return Err(Error::InvalidArgument("influence tensor was built on a different panel".into()));
        }
    }
    if split.test.end > panel.len() {
        return Err(Error::InvalidArgument("split exceeds panel length".into()));
    }
    let orders = if cfg.order_candidates.is_empty() {
        vec![cfg.order]
    } else {
        cfg.order_candidates.clone()
    };
    let fit = |style: usize| -> Result<StyleForecaster> {
        let mut best: Option<StyleForecaster> = None;
        for &order in &orders {
            let m = train_style(panel, tensor, split, cfg, style, order)?;
            if best.as_ref().is_none_or(|b| m.log.best_val_mae < b.log.best_val_mae) {
                best = Some(m);
            }
        }
        Ok(best.expect("at least one order"))
    };
    #[cfg(feature = "parallel")]
    let styles: Vec<StyleForecaster> = {
        use rayon::prelude::*;
        (0..panel.n_styles).into_par_iter().map(fit).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let styles: Vec<StyleForecaster> = (0..panel.n_styles).map(fit).collect::<Result<_>>()?;
    Ok(ForecastModelSet {
        name: name.to_string(),
        cities: panel.cities.clone(),
        config: cfg.clone(),
        styles,
    })
}

/// Joint recursive rollout from the start of the test range: every step's
/// forecasts for all cities are appended to the history before the next
/// step, so influencer taps read forecasts once they pass the origin.
pub fn forecast_horizon(models: &ForecastModelSet, panel: &TrajectoryPanel, split: &SplitSpec, horizon: usize) -> ForecastPanel {
    let origin = split.test.start;
    let values = models
        .styles
        .iter()
        .map(|sf| {
            let mut hist: Vec<Vec<f64>> = (0..panel.n_cities())
                .map(|j| panel.values[sf.style][j][..origin].to_vec())
                .collect();
            for h in 0..horizon {
                let preds = sf.predict_step(&hist, origin + h);
                for (y, p) in hist.iter_mut().zip(preds) {
                    y.push(p);
                }
            }
            hist.into_iter().map(|y| y[origin..].to_vec()).collect()
        })
        .collect();
    ForecastPanel {
        model: models.name.clone(),
        cities: panel.cities.clone(),
        start: origin,
        values,
    }
}

impl ForecastModelSet {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}
