//! Seeded synthetic panels with planted lagged influence, and attribute
//! records whose style mixture follows a planted panel.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{write_city_metadata, write_records, AttributeRecord, CityMetadata, Corpus};
use crate::error::{Error, Result};
use crate::derive_seed;
use crate::trajectories::{TrajectoryPanel, SEASON_WEEKS};

/// (name, latitude, longitude, country, continent)
pub const CITY_TABLE: [(&str, f64, f64, &str, &str); 44] = [
    ("austin", 30.27, -97.74, "United States", "North America"),
    ("bangkok", 13.76, 100.50, "Thailand", "Asia"),
    ("beijing", 39.90, 116.41, "China", "Asia"),
    ("berlin", 52.52, 13.40, "Germany", "Europe"),
    ("bogota", 4.71, -74.07, "Colombia", "South America"),
    ("budapest", 47.50, 19.04, "Hungary", "Europe"),
    ("buenos_aires", -34.60, -58.38, "Argentina", "South America"),
    ("cairo", 30.04, 31.24, "Egypt", "Africa"),
    ("chicago", 41.88, -87.63, "United States", "North America"),
    ("delhi", 28.70, 77.10, "India", "Asia"),
    ("dhaka", 23.81, 90.41, "Bangladesh", "Asia"),
    ("guangzhou", 23.13, 113.26, "China", "Asia"),
    ("istanbul", 41.01, 28.98, "Turkey", "Europe"),
    ("jakarta", -6.21, 106.85, "Indonesia", "Asia"),
    ("johannesburg", -26.20, 28.05, "South Africa", "Africa"),
    ("karachi", 24.86, 67.01, "Pakistan", "Asia"),
    ("kiev", 50.45, 30.52, "Ukraine", "Europe"),
    ("kolkata", 22.57, 88.36, "India", "Asia"),
    ("lagos", 6.52, 3.38, "Nigeria", "Africa"),
    ("lima", -12.05, -77.04, "Peru", "South America"),
    ("london", 51.51, -0.13, "United Kingdom", "Europe"),
    ("los_angeles", 34.05, -118.24, "United States", "North America"),
    ("madrid", 40.42, -3.70, "Spain", "Europe"),
    ("manila", 14.60, 120.98, "Philippines", "Asia"),
    ("mexico_city", 19.43, -99.13, "Mexico", "North America"),
    ("milan", 45.46, 9.19, "Italy", "Europe"),
    ("moscow", 55.76, 37.62, "Russia", "Europe"),
    ("mumbai", 19.08, 72.88, "India", "Asia"),
    ("nairobi", -1.29, 36.82, "Kenya", "Africa"),
    ("new_york", 40.71, -74.01, "United States", "North America"),
    ("osaka", 34.69, 135.50, "Japan", "Asia"),
    ("paris", 48.86, 2.35, "France", "Europe"),
    ("rio", -22.91, -43.17, "Brazil", "South America"),
    ("rome", 41.90, 12.50, "Italy", "Europe"),
    ("sao_paulo", -23.55, -46.63, "Brazil", "South America"),
    ("seattle", 47.61, -122.33, "United States", "North America"),
    ("seoul", 37.57, 126.98, "South Korea", "Asia"),
    ("shanghai", 31.23, 121.47, "China", "Asia"),
    ("singapore", 1.35, 103.82, "Singapore", "Asia"),
    ("sydney", -33.87, 151.21, "Australia", "Oceania"),
    ("tianjin", 39.34, 117.36, "China", "Asia"),
    ("tokyo", 35.68, 139.69, "Japan", "Asia"),
    ("toronto", 43.65, -79.38, "Canada", "North America"),
    ("vancouver", 49.28, -123.12, "Canada", "North America"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEdge {
    pub source: usize,
    pub target: usize,
    pub style: usize,
    pub lag: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_cities: usize,
    pub n_styles: usize,
    pub len: usize,
    pub edges: Vec<PlantedEdge>,
    pub seasonal_amplitude: f64,
    pub noise_sigma: f64,
    /// AR(1) coefficient of each city's deviation from its seasonal base.
    pub persistence: f64,
    /// Standard deviation of a per-style shock shared by every city (a global
    /// trend), added to the deviations with the same persistence.
    pub global_sigma: f64,
    /// Mean popularity of each modeled style; `None` uses `0.5 / n_styles`.
    pub base_level: Option<f64>,
    pub seed: u64,
    pub n_attributes: usize,
    pub records_per_bin: usize,
    pub attribute_noise: f64,
    pub start: NaiveDate,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_cities: 5,
            n_styles: 3,
            len: 160,
            edges: Vec::new(),
            seasonal_amplitude: 0.02,
            noise_sigma: 0.01,
            persistence: 0.0,
            global_sigma: 0.0,
            base_level: None,
            seed: 0,
            n_attributes: 6,
            records_per_bin: 15,
            attribute_noise: 0.05,
            start: NaiveDate::from_ymd_opt(2013, 7, 1).expect("valid date"),
        }
    }
}

impl SyntheticSpec {
    pub fn level(&self) -> f64 {
        self.base_level.unwrap_or(0.5 / self.n_styles.max(1) as f64)
    }

    pub fn city_names(&self) -> Vec<String> {
        (0..self.n_cities)
            .map(|i| match CITY_TABLE.get(i) {
                Some(c) => c.0.to_string(),
                None => format!("city_{i:03}"),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cities == 0 || self.n_styles == 0 {
            return Err(Error::InvalidArgument("need at least one city and one style".into()));
        }
        for e in &self.edges {
            if e.lag == 0 || e.lag > 8 || e.lag >= self.len {
                return Err(Error::InvalidArgument(format!("planted lag {} infeasible", e.lag)));
            }
            if e.source >= self.n_cities || e.target >= self.n_cities || e.style >= self.n_styles {
                return Err(Error::InvalidArgument(format!("planted edge {e:?} out of range")));
            }
            if e.source == e.target {
                return Err(Error::InvalidArgument("planted self-influence".into()));
            }
        }
        if self.level() * self.n_styles as f64 > 1.0 {
            return Err(Error::InvalidArgument("style levels exceed total probability 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPanel {
    pub panel: TrajectoryPanel,
    /// Seasonal signal without deviations, `base[style][city][t]`.
    pub base: Vec<Vec<Vec<f64>>>,
    /// Values clipped into [0, 1].
    pub clipped: usize,
}

const BURN_IN: usize = 100;

/// Seasonal base + planted lagged cross-city terms + noise:
/// `y = base + dev`, `dev_t = rho dev_{t-1} + sigma e_t + sum_edges s dev^src_{t-lag}`.
pub fn generate_panel(spec: &SyntheticSpec) -> Result<SyntheticPanel> {
    spec.validate()?;
    let (c, k, t_len) = (spec.n_cities, spec.n_styles, spec.len);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "synthetic-panel"));
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let level = spec.level();

    let mut base = vec![vec![vec![0.0; t_len]; c]; k];
    for style in base.iter_mut() {
        for series in style.iter_mut() {
            let phase = rng.random::<f64>() * 2.0 * PI;
            for (t, v) in series.iter_mut().enumerate() {
                *v = level + spec.seasonal_amplitude * (2.0 * PI * t as f64 / SEASON_WEEKS as f64 + phase).sin();
            }
        }
    }

    // deviations, including a discarded burn-in so the recursion starts stationary
    let total = BURN_IN + t_len;
    let mut dev = vec![vec![vec![0.0; total]; c]; k];
    let global = Normal::new(0.0, spec.global_sigma.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for t in 0..total {
        for style in 0..k {
            let common = if spec.global_sigma > 0.0 { global.sample(&mut rng) } else { 0.0 };
            for city in 0..c {
                let prev = if t > 0 { dev[style][city][t - 1] } else { 0.0 };
                let shock = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                dev[style][city][t] = spec.persistence * prev + shock + common;
            }
            for e in spec.edges.iter().filter(|e| e.style == style) {
                if t >= e.lag {
                    let push = e.strength * dev[style][e.source][t - e.lag];
                    dev[style][e.target][t] += push;
                }
            }
        }
    }

    let mut clipped = 0;
    let values: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|style| {
            (0..c)
                .map(|city| {
                    (0..t_len)
                        .map(|t| {
                            let v = base[style][city][t] + dev[style][city][BURN_IN + t];
                            if !(0.0..=1.0).contains(&v) {
                                clipped += 1;
                            }
                            v.clamp(0.0, 1.0)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut panel = TrajectoryPanel::from_values(spec.city_names(), values)?;
    panel.anchor = Some(crate::trajectories::iso_week_start(spec.start));
    Ok(SyntheticPanel { panel, base, clipped })
}

/// Ground truth accompanying generated records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub spec: SyntheticSpec,
    pub cities: Vec<String>,
    /// Planted edges with city names resolved: (source, target, style, lag).
    pub edges: Vec<(String, String, usize, usize)>,
    /// Generating style probabilities, `expected[style][city][t]`; the last
    /// style is the background mass absorbing `1 - sum(modeled)`.
    pub expected: Vec<Vec<Vec<f64>>>,
    /// Realized fraction of records drawn from each style per bin.
    pub realized: Vec<Vec<Vec<f64>>>,
    pub records_per_bin: Vec<Vec<usize>>,
    /// Attribute prototype per style (background last).
    pub prototypes: Vec<Vec<f64>>,
}

pub fn prototypes(n_styles_total: usize, n_attributes: usize) -> Vec<Vec<f64>> {
    (0..n_styles_total)
        .map(|z| {
            (0..n_attributes)
                .map(|m| if m % n_styles_total == z { 0.8 } else { 0.15 })
                .collect()
        })
        .collect()
}

/// Synthetic city metadata; coordinates come from [`CITY_TABLE`], economic
/// fields are seeded draws.
pub fn synthetic_metadata(spec: &SyntheticSpec) -> BTreeMap<String, CityMetadata> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "synthetic-metadata"));
    spec.city_names()
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let mut m = CityMetadata::new(name.clone());
            if let Some(&(_, lat, lon, country, continent)) = CITY_TABLE.get(i) {
                m.latitude = Some(lat);
                m.longitude = Some(lon);
                m.country = Some(country.into());
                m.continent = Some(continent.into());
                m.avg_temperature = Some(((28.0 - 0.35 * lat.abs() + rng.random_range(-3.0..3.0)) * 10.0_f64).round() / 10.0);
            }
            m.gdp = Some((rng.random_range(50.0..1500.0_f64) * 1e9).round());
            m.population = Some((rng.random_range(0.8..25.0_f64) * 1e6).round());
            (name, m)
        })
        .collect()
}

/// Attribute records whose style mixture follows the planted panel.
pub fn generate_records(spec: &SyntheticSpec) -> Result<(Corpus, SyntheticTruth)> {
    let synth = generate_panel(spec)?;
    let k_total = spec.n_styles + 1;
    let protos = prototypes(k_total, spec.n_attributes);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "synthetic-records"));
    let attr_noise = Normal::new(0.0, spec.attribute_noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let anchor = crate::trajectories::iso_week_start(spec.start);
    let cities = spec.city_names();

    let (c, t_len) = (spec.n_cities, spec.len);
    let mut expected = vec![vec![vec![0.0; t_len]; c]; k_total];
    let mut realized = vec![vec![vec![0.0; t_len]; c]; k_total];
    let mut records = Vec::with_capacity(c * t_len * spec.records_per_bin);
    for (city, name) in cities.iter().enumerate() {
        for t in 0..t_len {
            let mut probs: Vec<f64> = (0..spec.n_styles).map(|s| synth.panel.values[s][city][t]).collect();
            let rest = (1.0 - probs.iter().sum::<f64>()).max(0.0);
            probs.push(rest);
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            for (s, p) in probs.iter().enumerate() {
                expected[s][city][t] = *p;
            }
            let week_start = Utc.from_utc_datetime(
                &(anchor + Duration::weeks(t as i64)).and_hms_opt(0, 0, 0).expect("midnight"),
            );
            for _ in 0..spec.records_per_bin {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut z = k_total - 1;
                for (s, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        z = s;
                        break;
                    }
                }
                realized[z][city][t] += 1.0;
                let attributes = protos[z]
                    .iter()
                    .map(|v| ((v + attr_noise.sample(&mut rng)).clamp(0.0, 1.0) * 1e6).round() / 1e6)
                    .collect();
                let offset = rng.random_range(0..7 * 86_400);
                records.push(AttributeRecord {
                    city_id: name.clone(),
                    timestamp: week_start + Duration::seconds(offset),
                    attributes,
                });
            }
            if spec.records_per_bin > 0 {
                for s in 0..k_total {
                    realized[s][city][t] /= spec.records_per_bin as f64;
                }
            }
        }
    }
    let names = (0..spec.n_attributes).map(|m| format!("attr_{}", m + 1)).collect();
    let corpus = Corpus::new(records, synthetic_metadata(spec), names)?;
    let truth = SyntheticTruth {
        spec: spec.clone(),
        edges: spec
            .edges
            .iter()
            .map(|e| (cities[e.source].clone(), cities[e.target].clone(), e.style, e.lag))
            .collect(),
        cities,
        expected,
        realized,
        records_per_bin: vec![vec![spec.records_per_bin; t_len]; c],
        prototypes: protos,
    };
    Ok((corpus, truth))
}

/// Writes `records.csv`, `metadata.csv` and `truth.json` into `dir`.
pub fn generate_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<SyntheticTruth> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (corpus, truth) = generate_records(spec)?;
    write_records(&corpus, &dir.join("records.csv"))?;
    write_city_metadata(&corpus.cities, &dir.join("metadata.csv"))?;
    let path = dir.join("truth.json");
    let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer(BufWriter::new(f), &truth)?;
    Ok(truth)
}
