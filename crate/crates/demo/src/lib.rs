//! Browser bindings for a few stylecast operations on small synthetic panels.
//! Every export takes plain numbers and returns a JSON string.

use serde::Serialize;
use stylecast::forecast::{baseline_forecast, compute_metrics, forecast_horizon, train_coherent, Baseline, TrainConfig};
use stylecast::influence::{discover_tensor, granger_test, GrangerConfig, LagMode};
use stylecast::synthetic::{generate_panel, PlantedEdge, SyntheticSpec};
use stylecast::trajectories::{split, TrajectoryPanel};
use wasm_bindgen::prelude::*;

const HORIZON: usize = 26;

fn demo_spec(seed: u64, strength: f64) -> SyntheticSpec {
    let e = |source, target, lag| PlantedEdge {
        source,
        target,
        style: 0,
        lag,
        strength,
    };
    SyntheticSpec {
        n_cities: 5,
        n_styles: 1,
        len: 200,
        edges: vec![e(0, 1, 2), e(0, 2, 4), e(3, 4, 1)],
        seasonal_amplitude: 0.0,
        noise_sigma: 0.01,
        persistence: 0.8,
        seed,
        ..SyntheticSpec::default()
    }
}

fn panel(spec: &SyntheticSpec) -> Result<TrajectoryPanel, JsError> {
    Ok(generate_panel(spec).map_err(err)?.panel)
}

fn err(e: stylecast::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

#[derive(Serialize)]
struct Edge {
    source: String,
    target: String,
    lag: usize,
}

#[derive(Serialize)]
struct Discovery {
    cities: Vec<String>,
    planted: Vec<Edge>,
    found: Vec<Edge>,
    series: Vec<Vec<f64>>,
}

/// Plants three edges in a five-city panel and runs discovery on the
/// training range.
#[wasm_bindgen]
pub fn discover(seed: u32, strength: f64) -> Result<String, JsError> {
    let spec = demo_spec(seed as u64, strength);
    let panel = panel(&spec)?;
    let sp = split(panel.len(), HORIZON, HORIZON).map_err(err)?;
    let (tensor, _) = discover_tensor(&panel, sp.train, &GrangerConfig::default()).map_err(err)?;
    let name = |i: usize| panel.cities[i].clone();
    json(&Discovery {
        planted: spec
            .edges
            .iter()
            .map(|e| Edge {
                source: name(e.source),
                target: name(e.target),
                lag: e.lag,
            })
            .collect(),
        found: tensor
            .edges()
            .into_iter()
            .map(|e| Edge {
                source: e.source,
                target: e.target,
                lag: e.lag as usize,
            })
            .collect(),
        series: panel.values[0].clone(),
        cities: panel.cities,
    })
}

/// Granger p-value at each lag 1..=8 for `source` driving `target`.
#[wasm_bindgen]
pub fn lag_profile(seed: u32, strength: f64, source: usize, target: usize) -> Result<String, JsError> {
    let panel = panel(&demo_spec(seed as u64, strength))?;
    if source >= panel.n_cities() || target >= panel.n_cities() {
        return Err(JsError::new("city index out of range"));
    }
    let sp = split(panel.len(), HORIZON, HORIZON).map_err(err)?;
    let cfg = GrangerConfig::default();
    let y = &panel.series(0, target)[sp.train.clone()];
    let x = &panel.series(0, source)[sp.train];
    let p: Vec<f64> = cfg
        .lags
        .clone()
        .map(|lag| granger_test(y, x, cfg.order, lag, cfg.alpha, LagMode::Single).map(|o| o.p_value))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    json(&p)
}

#[derive(Serialize)]
struct Model {
    name: String,
    mae: f64,
    forecast: Vec<f64>,
}

#[derive(Serialize)]
struct Comparison {
    history: Vec<f64>,
    truth: Vec<f64>,
    models: Vec<Model>,
}

/// Trains the influence-wired model and compares its forecast for `city`
/// with the last-value and AR baselines.
#[wasm_bindgen]
pub fn forecast_compare(seed: u32, strength: f64, city: usize) -> Result<String, JsError> {
    let panel = panel(&demo_spec(seed as u64, strength))?;
    if city >= panel.n_cities() {
        return Err(JsError::new("city index out of range"));
    }
    let sp = split(panel.len(), HORIZON, HORIZON).map_err(err)?;
    let (tensor, _) = discover_tensor(&panel, sp.train.clone(), &GrangerConfig::default()).map_err(err)?;
    let cfg = TrainConfig {
        max_epochs: 400,
        seed: seed as u64,
        ..TrainConfig::default()
    };
    let models = train_coherent(&panel, Some(&tensor), &sp, &cfg, "influence").map_err(err)?;
    let mut forecasts = vec![forecast_horizon(&models, &panel, &sp, HORIZON)];
    for b in [Baseline::Last, Baseline::Ar] {
        forecasts.push(baseline_forecast(b, &panel, &sp, HORIZON, 0).map_err(err)?);
    }
    let models = forecasts
        .into_iter()
        .map(|f| {
            let report = compute_metrics(&f, &panel, "seasonal")?;
            Ok(Model {
                mae: report.series[city].mae,
                forecast: f.values[0][city].clone(),
                name: f.model,
            })
        })
        .collect::<Result<Vec<_>, stylecast::Error>>()
        .map_err(err)?;
    let y = panel.series(0, city);
    json(&Comparison {
        history: y[..sp.test.start].to_vec(),
        truth: y[sp.test.clone()].to_vec(),
        models,
    })
}
