use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scores::InfluenceScores;
use super::tensor::InfluenceTensor;
use crate::datamodel::CityMetadata;
use crate::numstats::{haversine, spearman};

/// Minimum number of outgoing edges before a city enters the direction average.
pub const MIN_DIRECTION_EDGES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Gdp,
    Temperature,
    Latitude,
    Population,
    Distance,
    SampleCount,
}

impl Property {
    pub const ALL: [Property; 6] = [
        Property::Gdp,
        Property::Temperature,
        Property::Latitude,
        Property::Population,
        Property::Distance,
        Property::SampleCount,
    ];

    fn value(self, m: &CityMetadata) -> Option<f64> {
        match self {
            Property::Gdp => m.gdp,
            Property::Temperature => m.avg_temperature,
            Property::Latitude => m.latitude,
            Property::Population => m.population,
            Property::Distance => None,
            Property::SampleCount => Some(m.sample_count as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCorrelation {
    pub property: Property,
    /// Spearman between net influence and the property across cities.
    pub world_rank: Option<f64>,
    pub world_rank_cities: usize,
    /// Mean over qualifying cities of the Spearman between property
    /// differences (or distances) and exerted edge weights.
    pub direction: Option<f64>,
    pub direction_cities: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rows: Vec<PropertyCorrelation>,
}

impl CorrelationReport {
    pub fn get(&self, p: Property) -> Option<&PropertyCorrelation> {
        self.rows.iter().find(|r| r.property == p)
    }
}

pub fn correlate_metadata(
    scores: &InfluenceScores,
    tensor: &InfluenceTensor,
    meta: &BTreeMap<String, CityMetadata>,
) -> CorrelationReport {
    let c = tensor.n_cities();
    let s = tensor.n_styles.max(1) as f64;
    let weight: Vec<Vec<f64>> = (0..c)
        .map(|i| {
            (0..c)
                .map(|j| (0..tensor.n_styles).map(|k| tensor.lags[k][i][j] as f64).sum::<f64>() / s)
                .collect()
        })
        .collect();
    let metas: Vec<Option<&CityMetadata>> = tensor.cities.iter().map(|id| meta.get(id)).collect();

    let rows = Property::ALL
        .iter()
        .map(|&prop| {
            let (world_rank, world_rank_cities) = if prop == Property::Distance {
                (None, 0)
            } else {
                let pairs: Vec<(f64, f64)> = scores
                    .cities
                    .iter()
                    .zip(&scores.net)
                    .filter_map(|(id, &net)| Some((net, prop.value(meta.get(id)?)?)))
                    .collect();
                let n = pairs.len();
                let rho = if n >= 3 {
                    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                    spearman(&x, &y).ok().flatten()
                } else {
                    None
                };
                (rho, n)
            };

            let mut rhos = Vec::new();
            for i in 0..c {
                if weight[i].iter().filter(|w| **w > 0.0).count() < MIN_DIRECTION_EDGES {
                    continue;
                }
                let Some(mi) = metas[i] else { continue };
                let mut x = Vec::new();
                let mut y = Vec::new();
                for j in (0..c).filter(|&j| j != i) {
                    let Some(mj) = metas[j] else { continue };
                    let diff = match prop {
                        Property::Distance => mi.location().zip(mj.location()).map(|(a, b)| haversine(a, b)),
                        _ => prop.value(mi).zip(prop.value(mj)).map(|(a, b)| a - b),
                    };
                    if let Some(d) = diff {
                        x.push(d);
                        y.push(weight[i][j]);
                    }
                }
                if x.len() >= 3 {
                    if let Ok(Some(r)) = spearman(&x, &y) {
                        rhos.push(r);
                    }
                }
            }
            let direction = (!rhos.is_empty()).then(|| rhos.iter().sum::<f64>() / rhos.len() as f64);
            PropertyCorrelation {
                property: prop,
                world_rank,
                world_rank_cities,
                direction,
                direction_cities: rhos.len(),
            }
        })
        .collect();
    CorrelationReport { rows }
}
