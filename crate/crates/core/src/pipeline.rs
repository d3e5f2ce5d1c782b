//! Stage orchestration over an output directory of cached artifacts.
//!
//! Each stage reads the artifacts of earlier stages from the output
//! directory, so stages can be rerun one at a time. `run_pipeline` runs them
//! all in order and writes `manifest.json`: the config plus the SHA-256 of
//! every artifact.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Mode, RunConfig};
use crate::datamodel::{load_city_metadata, load_records, CityMetadata, Corpus, RecordSchema};
use crate::error::{Error, Result};
use crate::forecast::{
    baseline_forecast, compare_models, compute_metrics, forecast_horizon, train_coherent, write_summary_csv,
    Comparison, ForecastModelSet, ForecastPanel, MetricsReport, Wiring,
};
use crate::influence::{
    aggregate_regions, city_to_world, correlate_metadata, discover_tensor, influence_dynamics, influence_scores,
    rank_cities, DiscoveryReport, InfluenceScores, InfluenceTensor, RankBy, Region,
};
use crate::styles::{assign_style_posteriors, fit_gmm, StyleModel};
use crate::trajectories::{build_panel, deseasonalize, split, SplitSpec, TrajectoryPanel, SEASON_WEEKS};

pub const MANIFEST: &str = "manifest.json";
pub const FULL_MODEL: &str = "full";
pub const NO_INFLUENCE: &str = "no_influence";
pub const NO_INFLUENCE_NO_COHERENCE: &str = "no_influence_no_coherence";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Styles,
    Panel,
    Influence,
    Rank,
    Correlate,
    Dynamics,
    ExportGraph,
    Forecast,
    Evaluate,
}

pub const ALL_STAGES: [Stage; 9] = [
    Stage::Styles,
    Stage::Panel,
    Stage::Influence,
    Stage::Rank,
    Stage::Correlate,
    Stage::Dynamics,
    Stage::ExportGraph,
    Stage::Forecast,
    Stage::Evaluate,
];

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Styles => "styles",
            Stage::Panel => "panel",
            Stage::Influence => "influence",
            Stage::Rank => "rank",
            Stage::Correlate => "correlate",
            Stage::Dynamics => "dynamics",
            Stage::ExportGraph => "export-graph",
            Stage::Forecast => "forecast",
            Stage::Evaluate => "evaluate",
        }
    }

    /// Files written by the stage, relative to the output directory.
    pub fn artifacts(self) -> &'static [&'static str] {
        match self {
            Stage::Styles => &["style_model.json", "styles_log.json"],
            Stage::Panel => &["panel.json", "panel.csv"],
            Stage::Influence => &["tensor.json", "edges.csv", "discovery.json", "world.json"],
            Stage::Rank => &["scores.json", "ranking.csv", "teams.csv", "regions.json"],
            Stage::Correlate => &["correlations.json"],
            Stage::Dynamics => &["dynamics.csv"],
            Stage::ExportGraph => &["influence.dot"],
            Stage::Forecast => &["models.json", "forecasts.json", "forecasts.csv"],
            Stage::Evaluate => &["metrics.json", "metrics.csv"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_STAGES
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    /// Artifact path relative to the output directory, to hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub reports: Vec<MetricsReport>,
    /// The full model against every other model.
    pub comparisons: Vec<NamedComparison>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedComparison {
    pub a: String,
    pub b: String,
    #[serde(flatten)]
    pub result: Comparison,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Loaders shared by the stages and by callers inspecting a run directory.
pub struct RunDir<'a> {
    pub cfg: &'a RunConfig,
}

impl RunDir<'_> {
    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    pub fn metadata(&self) -> Result<Option<BTreeMap<String, CityMetadata>>> {
        self.cfg.metadata.as_deref().map(load_city_metadata).transpose()
    }

    pub fn corpus(&self) -> Result<Corpus> {
        let records = self
            .cfg
            .records
            .as_deref()
            .ok_or_else(|| Error::Config("no records path configured".into()))?;
        let meta = self.metadata()?;
        let schema = RecordSchema {
            strict_cities: meta.is_some(),
            ..RecordSchema::default()
        };
        load_records(records, &schema, meta)
    }

    pub fn style_model(&self) -> Result<StyleModel> {
        StyleModel::load(&self.path("style_model.json"))
    }

    pub fn panel(&self) -> Result<TrajectoryPanel> {
        TrajectoryPanel::load_json(&self.path("panel.json"))
    }

    pub fn split(&self, panel: &TrajectoryPanel) -> Result<SplitSpec> {
        split(panel.len(), self.cfg.horizon, self.cfg.val_len)
    }

    pub fn tensor(&self) -> Result<InfluenceTensor> {
        read_json(&self.path("tensor.json"))
    }

    pub fn scores(&self) -> Result<InfluenceScores> {
        read_json(&self.path("scores.json"))
    }

    pub fn forecasts(&self) -> Result<Vec<ForecastPanel>> {
        read_json(&self.path("forecasts.json"))
    }

    pub fn models(&self) -> Result<ForecastModelSet> {
        ForecastModelSet::load(&self.path("models.json"))
    }

    pub fn evaluation(&self) -> Result<Evaluation> {
        read_json(&self.path("metrics.json"))
    }
}

fn stage_styles(d: &RunDir) -> Result<()> {
    let corpus = d.corpus()?;
    let (model, log) = fit_gmm(&corpus, &d.cfg.gmm_options()?)?;
    log::info!(
        "styles: {} components over {} records, converged={}",
        model.k(),
        corpus.records.len(),
        log.converged
    );
    model.save(&d.path("style_model.json"))?;
    write_json(&d.path("styles_log.json"), &log)
}

fn stage_panel(d: &RunDir) -> Result<()> {
    let corpus = d.corpus()?;
    let model = d.style_model()?;
    let post = assign_style_posteriors(&model, &corpus)?;
    let (raw, warnings) = build_panel(&corpus, &post, &d.cfg.panel_options())?;
    for w in &warnings {
        log::warn!("panel: {w}");
    }
    let panel = match d.cfg.mode {
        Mode::Seasonal => raw,
        Mode::Deseason => deseasonalize(&raw, SEASON_WEEKS)?,
    };
    d.split(&panel)?;
    panel.save_json(&d.path("panel.json"))?;
    panel.write_csv(&d.path("panel.csv"))
}

fn stage_influence(d: &RunDir) -> Result<()> {
    let panel = d.panel()?;
    let sp = d.split(&panel)?;
    let cfg = d.cfg.granger();
    let (tensor, report): (InfluenceTensor, DiscoveryReport) = discover_tensor(&panel, sp.train.clone(), &cfg)?;
    log::info!("influence: {} edges from {} tests", tensor.edge_count(), report.tests_run);
    let world = city_to_world(&panel, sp.train.clone(), &cfg, d.cfg.leave_self_out)?;
    write_json(&d.path("tensor.json"), &tensor)?;
    let mut edges = String::from("source,target,style,lag,p_value,weight\n");
    for e in tensor.edges() {
        edges.push_str(&format!("{},{},{},{},{},{}\n", e.source, e.target, e.style, e.lag, e.p_value, e.weight));
    }
    write_text(&d.path("edges.csv"), &edges)?;
    write_json(&d.path("discovery.json"), &report)?;
    write_json(&d.path("world.json"), &world)
}

fn stage_rank(d: &RunDir) -> Result<()> {
    let tensor = d.tensor()?;
    let scores = influence_scores(&tensor);
    write_json(&d.path("scores.json"), &scores)?;
    let idx: BTreeMap<&str, usize> = scores.cities.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut ranking = String::from("rank,city_id,net,exerted,received\n");
    for (r, (city, _)) in rank_cities(&scores, RankBy::Net).iter().enumerate() {
        let i = idx[city.as_str()];
        ranking.push_str(&format!(
            "{},{city},{},{},{}\n",
            r + 1,
            scores.net[i],
            scores.exerted[i],
            scores.received[i]
        ));
    }
    write_text(&d.path("ranking.csv"), &ranking)?;
    let mut teams = String::from("city_id");
    for k in 0..tensor.n_styles {
        teams.push_str(&format!(",style_{k}"));
    }
    teams.push('\n');
    for (city, row) in scores.cities.iter().zip(&scores.exerted_by_style) {
        teams.push_str(city);
        for v in row {
            teams.push_str(&format!(",{v}"));
        }
        teams.push('\n');
    }
    write_text(&d.path("teams.csv"), &teams)?;
    let meta = d.metadata()?.unwrap_or_default();
    let regions = BTreeMap::from([
        ("country", aggregate_regions(&scores, &meta, Region::Country)),
        ("continent", aggregate_regions(&scores, &meta, Region::Continent)),
    ]);
    write_json(&d.path("regions.json"), &regions)
}

fn stage_correlate(d: &RunDir) -> Result<()> {
    let tensor = d.tensor()?;
    let scores = d.scores()?;
    let corpus = d.corpus()?;
    let report = correlate_metadata(&scores, &tensor, &corpus.cities);
    write_json(&d.path("correlations.json"), &report)
}

fn stage_dynamics(d: &RunDir) -> Result<()> {
    let panel = d.panel()?;
    let sp = d.split(&panel)?;
    let path = d.path("dynamics.csv");
    match influence_dynamics(&panel, sp.train.clone(), d.cfg.dynamics_window, d.cfg.dynamics_step, &d.cfg.granger()) {
        Ok(dy) => dy.write_csv(&path),
        Err(Error::InsufficientData(msg)) => {
            log::warn!("dynamics: {msg}; writing an empty table");
            write_text(&path, "city,window_start,exerted\n")
        }
        Err(e) => Err(e),
    }
}

fn stage_export_graph(d: &RunDir) -> Result<()> {
    write_text(&d.path("influence.dot"), &d.tensor()?.to_dot())
}

fn stage_forecast(d: &RunDir) -> Result<()> {
    let panel = d.panel()?;
    let sp = d.split(&panel)?;
    let tensor = d.tensor()?;
    let h = d.cfg.horizon;
    let full = train_coherent(
        &panel,
        Some(&tensor),
        &sp,
        &d.cfg.train(Wiring::Discovered, d.cfg.lambda)?,
        FULL_MODEL,
    )?;
    let mut forecasts = vec![forecast_horizon(&full, &panel, &sp, h)];
    if d.cfg.ablations {
        for (name, lambda) in [(NO_INFLUENCE, d.cfg.lambda), (NO_INFLUENCE_NO_COHERENCE, 0.0)] {
            let m = train_coherent(&panel, None, &sp, &d.cfg.train(Wiring::FullInteraction, lambda)?, name)?;
            forecasts.push(forecast_horizon(&m, &panel, &sp, h));
        }
    }
    let seed = crate::derive_seed(d.cfg.require_seed()?, "baselines");
    for &b in &d.cfg.baselines {
        forecasts.push(baseline_forecast(b, &panel, &sp, h, seed)?);
    }
    full.save(&d.path("models.json"))?;
    write_json(&d.path("forecasts.json"), &forecasts)?;
    let mut csv = String::from("model,style_id,city_id,week,value\n");
    for f in &forecasts {
        for (k, style) in f.values.iter().enumerate() {
            for (j, series) in style.iter().enumerate() {
                for (s, v) in series.iter().enumerate() {
                    csv.push_str(&format!("{},{k},{},{},{v}\n", f.model, f.cities[j], f.start + s));
                }
            }
        }
    }
    write_text(&d.path("forecasts.csv"), &csv)
}

fn stage_evaluate(d: &RunDir) -> Result<()> {
    let panel = d.panel()?;
    let forecasts = d.forecasts()?;
    let mode = d.cfg.mode.name();
    let reports = forecasts
        .iter()
        .map(|f| compute_metrics(f, &panel, mode))
        .collect::<Result<Vec<_>>>()?;
    let mut comparisons = Vec::new();
    if let Some(full) = reports.iter().find(|r| r.model == FULL_MODEL) {
        for other in reports.iter().filter(|r| r.model != FULL_MODEL) {
            comparisons.push(NamedComparison {
                a: full.model.clone(),
                b: other.model.clone(),
                result: compare_models(full, other)?,
            });
        }
    }
    let notes = vec!["the GeoModel seasonal parametric baseline is not included".to_string()];
    write_summary_csv(&reports, &d.path("metrics.csv"))?;
    write_json(
        &d.path("metrics.json"),
        &Evaluation {
            reports,
            comparisons,
            notes,
        },
    )
}

/// Runs one stage. Failures carry the stage name.
pub fn run_stage(stage: Stage, cfg: &RunConfig) -> Result<()> {
    let wrap = |e: Error| match e {
        Error::Config(_) => e,
        e => Error::Stage {
            stage: stage.name(),
            source: Box::new(e),
        },
    };
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let d = RunDir { cfg };
    let started = std::time::Instant::now();
    let res = match stage {
        Stage::Styles => stage_styles(&d),
        Stage::Panel => stage_panel(&d),
        Stage::Influence => stage_influence(&d),
        Stage::Rank => stage_rank(&d),
        Stage::Correlate => stage_correlate(&d),
        Stage::Dynamics => stage_dynamics(&d),
        Stage::ExportGraph => stage_export_graph(&d),
        Stage::Forecast => stage_forecast(&d),
        Stage::Evaluate => stage_evaluate(&d),
    };
    log::info!("{stage} finished in {:.2?}", started.elapsed());
    res.map_err(wrap)
}

/// Hashes every artifact present in the output directory.
pub fn build_manifest(cfg: &RunConfig) -> Result<Manifest> {
    let mut artifacts = BTreeMap::new();
    for stage in ALL_STAGES {
        for name in stage.artifacts() {
            let p = cfg.out.join(name);
            if p.exists() {
                artifacts.insert(name.to_string(), sha256_file(&p)?);
            }
        }
    }
    Ok(Manifest {
        config: cfg.clone(),
        artifacts,
    })
}

pub fn write_manifest(cfg: &RunConfig) -> Result<Manifest> {
    let m = build_manifest(cfg)?;
    write_json(&cfg.out.join(MANIFEST), &m)?;
    Ok(m)
}

/// Runs every stage in order, then writes the manifest.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest> {
    cfg.require_seed()?;
    for stage in ALL_STAGES {
        run_stage(stage, cfg)?;
    }
    write_manifest(cfg)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    read_json(path)
}
