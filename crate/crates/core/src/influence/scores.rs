use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tensor::InfluenceTensor;
use crate::datamodel::CityMetadata;

/// Lag-weighted influence totals per city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceScores {
    pub cities: Vec<String>,
    /// Sum of outgoing lags averaged over styles.
    pub exerted: Vec<f64>,
    pub received: Vec<f64>,
    pub net: Vec<f64>,
    /// `exerted_by_style[city][style]`: sum of outgoing lags for that style.
    pub exerted_by_style: Vec<Vec<f64>>,
}

pub fn influence_scores(tensor: &InfluenceTensor) -> InfluenceScores {
    let c = tensor.n_cities();
    let s = tensor.n_styles.max(1) as f64;
    let mut exerted_by_style = vec![vec![0.0; tensor.n_styles]; c];
    let mut received_raw = vec![0.0; c];
    for k in 0..tensor.n_styles {
        for i in 0..c {
            for j in 0..c {
                let w = tensor.lags[k][i][j] as f64;
                exerted_by_style[i][k] += w;
                received_raw[j] += w;
            }
        }
    }
    let exerted: Vec<f64> = exerted_by_style.iter().map(|row| row.iter().sum::<f64>() / s).collect();
    let received: Vec<f64> = received_raw.iter().map(|r| r / s).collect();
    let net = exerted.iter().zip(&received).map(|(e, r)| e - r).collect();
    InfluenceScores {
        cities: tensor.cities.clone(),
        exerted,
        received,
        net,
        exerted_by_style,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBy {
    Net,
    Exerted,
    Received,
}

impl std::str::FromStr for RankBy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "net" => Ok(RankBy::Net),
            "exerted" => Ok(RankBy::Exerted),
            "received" => Ok(RankBy::Received),
            other => Err(format!("unknown ranking `{other}`")),
        }
    }
}

/// Cities by descending score; ties alphabetical by city id.
pub fn rank_cities(scores: &InfluenceScores, by: RankBy) -> Vec<(String, f64)> {
    let values = match by {
        RankBy::Net => &scores.net,
        RankBy::Exerted => &scores.exerted,
        RankBy::Received => &scores.received,
    };
    let mut out: Vec<(String, f64)> = scores.cities.iter().cloned().zip(values.iter().copied()).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Country,
    Continent,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub exerted: f64,
    pub received: f64,
    pub net: f64,
    pub cities: usize,
}

/// Sums city scores by country or continent; cities without the field go
/// under `unknown`.
pub fn aggregate_regions(
    scores: &InfluenceScores,
    meta: &BTreeMap<String, CityMetadata>,
    region: Region,
) -> BTreeMap<String, RegionScore> {
    let mut out: BTreeMap<String, RegionScore> = BTreeMap::new();
    for (i, city) in scores.cities.iter().enumerate() {
        let key = meta
            .get(city)
            .and_then(|m| match region {
                Region::Country => m.country.clone(),
                Region::Continent => m.continent.clone(),
            })
            .unwrap_or_else(|| "unknown".into());
        let e = out.entry(key).or_default();
        e.exerted += scores.exerted[i];
        e.received += scores.received[i];
        e.net += scores.net[i];
        e.cities += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor_with(edges: &[(usize, usize, usize, u8)], cities: &[&str], styles: usize) -> InfluenceTensor {
        let mut t = InfluenceTensor::empty(cities.iter().map(|c| c.to_string()).collect(), styles);
        for &(k, i, j, l) in edges {
            t.lags[k][i][j] = l;
        }
        t
    }

    #[test]
    fn single_edge_arithmetic() {
        let t = tensor_with(&[(0, 0, 1, 4)], &["A", "B"], 1);
        let s = influence_scores(&t);
        assert_eq!(s.exerted, vec![4.0, 0.0]);
        assert_eq!(s.received, vec![0.0, 4.0]);
        assert_eq!(s.net, vec![4.0, -4.0]);
        let names: Vec<String> = rank_cities(&s, RankBy::Net).into_iter().map(|r| r.0).collect();
        assert_eq!(names, vec!["A", "B"]);
    }

    #[test]
    fn empty_tensor_zero_and_alphabetical() {
        let t = tensor_with(&[], &["c", "a", "b"], 2);
        let s = influence_scores(&t);
        assert!(s.exerted.iter().chain(&s.received).chain(&s.net).all(|v| *v == 0.0));
        let names: Vec<String> = rank_cities(&s, RankBy::Net).into_iter().map(|r| r.0).collect();
        assert_eq!(names, vec!["a", "b", "c"]);
    }

    #[test]
    fn conservation_and_style_breakdown() {
        let t = tensor_with(&[(0, 0, 1, 2), (1, 0, 2, 5), (1, 2, 1, 3)], &["A", "B", "C"], 2);
        let s = influence_scores(&t);
        let ex: f64 = s.exerted.iter().sum();
        let rc: f64 = s.received.iter().sum();
        assert!((ex - rc).abs() < 1e-12);
        assert_eq!(s.exerted_by_style[0], vec![2.0, 5.0]);
        assert_eq!(s.exerted[0], 3.5);
    }

    #[test]
    fn region_sums() {
        let t = tensor_with(&[(0, 0, 1, 4)], &["A", "B", "C"], 1);
        let s = influence_scores(&t);
        let mut meta = BTreeMap::new();
        for (c, country) in [("A", "X"), ("B", "X")] {
            let mut m = CityMetadata::new(c);
            m.country = Some(country.into());
            meta.insert(c.to_string(), m);
        }
        let agg = aggregate_regions(&s, &meta, Region::Country);
        assert_eq!(agg["X"].net, 0.0);
        assert_eq!(agg["X"].cities, 2);
        assert_eq!(agg["unknown"].cities, 1);
    }
}
