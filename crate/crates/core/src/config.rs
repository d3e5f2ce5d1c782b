//! Run configuration: a flat `key = value` file, overridable per key.
//!
//! Precedence is override > file > default. Lines starting with `#` are
//! comments; list values are comma separated.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{Baseline, TrainConfig, Wiring, ALL_BASELINES};
use crate::influence::{GrangerConfig, LagCorrection, LagMode};
use crate::styles::GmmOptions;
use crate::trajectories::PanelOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Seasonal,
    /// Year-over-year differences `y_t - y_{t-52}`.
    Deseason,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seasonal" => Ok(Mode::Seasonal),
            "deseason" | "deseasonalized" => Ok(Mode::Deseason),
            _ => Err(Error::Config(format!("mode must be seasonal or deseason, got `{s}`"))),
        }
    }
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Seasonal => "seasonal",
            Mode::Deseason => "deseason",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub records: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub mode: Mode,

    pub k: usize,
    pub standardize: bool,
    pub gmm_max_iters: usize,
    pub gmm_tol: f64,

    pub resolution_weeks: usize,
    pub smoothing_window: usize,

    pub granger_order: usize,
    pub lag_min: usize,
    pub lag_max: usize,
    pub alpha: f64,
    pub lag_correction: LagCorrection,
    pub cumulative_lags: bool,
    pub benjamini_hochberg: bool,
    pub leave_self_out: bool,
    pub dynamics_window: usize,
    pub dynamics_step: usize,

    pub order: usize,
    pub lambda: f64,
    pub lr: f64,
    pub l2: f64,
    pub hidden: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub horizon: usize,
    pub val_len: usize,
    pub ablations: bool,
    pub baselines: Vec<Baseline>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            records: None,
            metadata: None,
            out: PathBuf::from("out"),
            seed: None,
            mode: Mode::Seasonal,
            k: 50,
            standardize: false,
            gmm_max_iters: 500,
            gmm_tol: 1e-6,
            resolution_weeks: 1,
            smoothing_window: 1,
            granger_order: 8,
            lag_min: 1,
            lag_max: 8,
            alpha: 0.05,
            lag_correction: LagCorrection::Bonferroni,
            cumulative_lags: false,
            benjamini_hochberg: false,
            leave_self_out: false,
            dynamics_window: 52,
            dynamics_step: 13,
            order: 8,
            lambda: 1.0,
            lr: 1e-2,
            l2: 1e-8,
            hidden: 16,
            max_epochs: 2000,
            patience: 20,
            horizon: 26,
            val_len: 26,
            ablations: true,
            baselines: ALL_BASELINES.to_vec(),
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got `{v}`"))),
    }
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Parses a config file body. Relative paths are kept as written.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // file-relative input paths
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.records, &mut cfg.metadata].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "records" => self.records = opt_path(v),
            "metadata" => self.metadata = opt_path(v),
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = Some(parse(key, v)?),
            "mode" => self.mode = v.parse()?,
            "k" => self.k = parse(key, v)?,
            "standardize" => self.standardize = parse_bool(key, v)?,
            "gmm_max_iters" => self.gmm_max_iters = parse(key, v)?,
            "gmm_tol" => self.gmm_tol = parse(key, v)?,
            "resolution_weeks" => self.resolution_weeks = parse(key, v)?,
            "smoothing_window" => self.smoothing_window = parse(key, v)?,
            "granger_order" => self.granger_order = parse(key, v)?,
            "lag_min" => self.lag_min = parse(key, v)?,
            "lag_max" => self.lag_max = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "lag_correction" => {
                self.lag_correction = match v {
                    "none" => LagCorrection::None,
                    "bonferroni" => LagCorrection::Bonferroni,
                    _ => return Err(Error::Config(format!("`lag_correction`: expected none or bonferroni, got `{v}`"))),
                }
            }
            "cumulative_lags" => self.cumulative_lags = parse_bool(key, v)?,
            "benjamini_hochberg" | "bh" => self.benjamini_hochberg = parse_bool(key, v)?,
            "leave_self_out" => self.leave_self_out = parse_bool(key, v)?,
            "dynamics_window" => self.dynamics_window = parse(key, v)?,
            "dynamics_step" => self.dynamics_step = parse(key, v)?,
            "order" => self.order = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "l2" => self.l2 = parse(key, v)?,
            "hidden" => self.hidden = parse(key, v)?,
            "max_epochs" => self.max_epochs = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "horizon" => self.horizon = parse(key, v)?,
            "val_len" => self.val_len = parse(key, v)?,
            "ablations" => self.ablations = parse_bool(key, v)?,
            "baselines" => {
                self.baselines = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|_| Error::Config(format!("`baselines`: unknown method `{s}`"))))
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.resolution_weeks == 0 || self.smoothing_window == 0 {
            return bad("resolution_weeks and smoothing_window must be positive".into());
        }
        if self.lag_min == 0 || self.lag_min > self.lag_max || self.lag_max > 52 {
            return bad(format!("lag range {}..={} must lie in 1..=52", self.lag_min, self.lag_max));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} must lie in (0, 1)", self.alpha));
        }
        if self.lambda < 0.0 || !(self.lr > 0.0) || self.l2 < 0.0 {
            return bad("lambda and l2 must be non-negative, lr positive".into());
        }
        if self.order == 0 || self.hidden == 0 || self.horizon == 0 || self.max_epochs == 0 {
            return bad("order, hidden, horizon and max_epochs must be positive".into());
        }
        if self.dynamics_window == 0 || self.dynamics_step == 0 {
            return bad("dynamics window and step must be positive".into());
        }
        Ok(())
    }

    /// Seed for stochastic stages; absent seeds are a configuration error.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (set `seed` or pass --seed)".into()))
    }

    pub fn gmm_options(&self) -> Result<GmmOptions> {
        Ok(GmmOptions {
            k: self.k,
            seed: crate::derive_seed(self.require_seed()?, "styles"),
            max_iters: self.gmm_max_iters,
            tol: self.gmm_tol,
            standardize: self.standardize,
            ..GmmOptions::default()
        })
    }

    pub fn panel_options(&self) -> PanelOptions {
        PanelOptions {
            resolution_weeks: self.resolution_weeks,
            smoothing_window: self.smoothing_window,
        }
    }

    pub fn granger(&self) -> GrangerConfig {
        GrangerConfig {
            order: self.granger_order,
            lags: self.lag_min..=self.lag_max,
            alpha: self.alpha,
            lag_mode: if self.cumulative_lags { LagMode::Cumulative } else { LagMode::Single },
            lag_correction: self.lag_correction,
            benjamini_hochberg: self.benjamini_hochberg,
        }
    }

    pub fn train(&self, wiring: Wiring, lambda: f64) -> Result<TrainConfig> {
        Ok(TrainConfig {
            lambda,
            lr: self.lr,
            l2: self.l2,
            hidden: self.hidden,
            order: self.order,
            max_epochs: self.max_epochs,
            patience: self.patience,
            wiring,
            full_interaction_lags: self.lag_max,
            seed: crate::derive_seed(self.require_seed()?, "forecast"),
            ..TrainConfig::default()
        })
    }

    /// Canonical `key = value` rendering; parsing it back yields `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let _ = writeln!(s, "records = {}", path(&self.records));
        let _ = writeln!(s, "metadata = {}", path(&self.metadata));
        let _ = writeln!(s, "out = {}", self.out.display());
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        let kv: Vec<(&str, String)> = vec![
            ("mode", self.mode.name().into()),
            ("k", self.k.to_string()),
            ("standardize", self.standardize.to_string()),
            ("gmm_max_iters", self.gmm_max_iters.to_string()),
            ("gmm_tol", self.gmm_tol.to_string()),
            ("resolution_weeks", self.resolution_weeks.to_string()),
            ("smoothing_window", self.smoothing_window.to_string()),
            ("granger_order", self.granger_order.to_string()),
            ("lag_min", self.lag_min.to_string()),
            ("lag_max", self.lag_max.to_string()),
            ("alpha", self.alpha.to_string()),
            (
                "lag_correction",
                match self.lag_correction {
                    LagCorrection::None => "none",
                    LagCorrection::Bonferroni => "bonferroni",
                }
                .into(),
            ),
            ("cumulative_lags", self.cumulative_lags.to_string()),
            ("benjamini_hochberg", self.benjamini_hochberg.to_string()),
            ("leave_self_out", self.leave_self_out.to_string()),
            ("dynamics_window", self.dynamics_window.to_string()),
            ("dynamics_step", self.dynamics_step.to_string()),
            ("order", self.order.to_string()),
            ("lambda", self.lambda.to_string()),
            ("lr", self.lr.to_string()),
            ("l2", self.l2.to_string()),
            ("hidden", self.hidden.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("horizon", self.horizon.to_string()),
            ("val_len", self.val_len.to_string()),
            ("ablations", self.ablations.to_string()),
            (
                "baselines",
                self.baselines.iter().map(|b| b.name()).collect::<Vec<_>>().join(","),
            ),
        ];
        for (k, v) in &kv {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!((c.k, c.horizon, c.lag_min, c.lag_max), (50, 26, 1, 8));
        assert_eq!((c.alpha, c.lambda, c.lr, c.l2), (0.05, 1.0, 1e-2, 1e-8));
    }

    #[test]
    fn overrides_take_precedence() {
        let mut c = RunConfig::parse("# comment\nk = 4\nseed = 3\nmode = deseason\nbaselines = last, drift\n").unwrap();
        assert_eq!((c.k, c.seed, c.mode), (4, Some(3), Mode::Deseason));
        assert_eq!(c.baselines, vec![Baseline::Last, Baseline::Drift]);
        c.set("k", "7").unwrap();
        assert_eq!(c.k, 7);
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.seed = Some(9);
        c.records = Some("data/records.csv".into());
        c.lag_correction = LagCorrection::None;
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn bad_input_reported_with_line() {
        let e = RunConfig::parse("k = 4\nbogus = 1\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("bogus"), "{e}");
        assert!(RunConfig::parse("alpha = x").is_err());
        assert!(RunConfig::default().require_seed().is_err());
    }
}
