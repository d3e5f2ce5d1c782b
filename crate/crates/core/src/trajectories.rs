//! Weekly per-city style-popularity trajectories.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::datamodel::Corpus;
use crate::error::{Error, Result};

/// Yearly season in weeks.
pub const SEASON_WEEKS: usize = 52;
/// Shortest training range the lag search accepts (8 lags + 1 target).
pub const MIN_TRAIN_LEN: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPanel {
    /// Monday starting week offset 0, when the panel came from dated records.
    pub anchor: Option<NaiveDate>,
    /// Week offsets from the anchor, one per time step.
    pub week_index: Vec<i64>,
    pub cities: Vec<String>,
    pub n_styles: usize,
    /// `values[style][city][t]`.
    pub values: Vec<Vec<Vec<f64>>>,
    /// `bin_counts[city][t]`: number of records in the bin.
    pub bin_counts: Vec<Vec<usize>>,
    /// `imputed[city][t]`: the bin had no records and was interpolated.
    pub imputed: Vec<Vec<bool>>,
    /// Season length subtracted by [`deseasonalize`], if any.
    #[serde(default)]
    pub deseasonalized_by: Option<usize>,
}

impl TrajectoryPanel {
    /// Panel of fully observed series, `values[style][city][t]`.
    pub fn from_values(cities: Vec<String>, values: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n_styles = values.len();
        let t = values.first().and_then(|s| s.first()).map_or(0, Vec::len);
        for s in &values {
            if s.len() != cities.len() {
                return Err(Error::DimensionMismatch {
                    expected: cities.len(),
                    got: s.len(),
                });
            }
            if let Some(bad) = s.iter().find(|y| y.len() != t) {
                return Err(Error::DimensionMismatch {
                    expected: t,
                    got: bad.len(),
                });
            }
        }
        Ok(TrajectoryPanel {
            anchor: None,
            week_index: (0..t as i64).collect(),
            n_styles,
            values,
            bin_counts: vec![vec![1; t]; cities.len()],
            imputed: vec![vec![false; t]; cities.len()],
            cities,
            deseasonalized_by: None,
        })
    }

    pub fn len(&self) -> usize {
        self.week_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.week_index.is_empty()
    }

    pub fn n_cities(&self) -> usize {
        self.cities.len()
    }

    pub fn series(&self, style: usize, city: usize) -> &[f64] {
        &self.values[style][city]
    }

    pub fn city_index(&self, id: &str) -> Option<usize> {
        self.cities.iter().position(|c| c == id)
    }

    /// Copy restricted to the time steps in `range`.
    pub fn slice(&self, range: Range<usize>) -> TrajectoryPanel {
        TrajectoryPanel {
            anchor: self.anchor,
            week_index: self.week_index[range.clone()].to_vec(),
            cities: self.cities.clone(),
            n_styles: self.n_styles,
            values: self
                .values
                .iter()
                .map(|s| s.iter().map(|y| y[range.clone()].to_vec()).collect())
                .collect(),
            bin_counts: self.bin_counts.iter().map(|c| c[range.clone()].to_vec()).collect(),
            imputed: self.imputed.iter().map(|c| c[range.clone()].to_vec()).collect(),
            deseasonalized_by: self.deseasonalized_by,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PanelOptions {
    /// Weeks per bin.
    pub resolution_weeks: usize,
    /// Centered moving-average window; 1 disables smoothing.
    pub smoothing_window: usize,
}

impl Default for PanelOptions {
    fn default() -> Self {
        PanelOptions {
            resolution_weeks: 1,
            smoothing_window: 1,
        }
    }
}

/// Monday of the ISO week containing `date`.
pub fn iso_week_start(date: NaiveDate) -> NaiveDate {
    date - Duration::days(date.weekday().num_days_from_monday() as i64)
}

/// Bins style posteriors into mean popularity per (style, city, week).
///
/// Returns the panel and warnings for dropped cities. Empty bins are filled
/// by linear interpolation and flagged in `imputed`.
pub fn build_panel(
    corpus: &Corpus,
    posteriors: &[Vec<f64>],
    opts: &PanelOptions,
) -> Result<(TrajectoryPanel, Vec<String>)> {
    if corpus.records.is_empty() {
        return Err(Error::InsufficientData("empty corpus".into()));
    }
    if posteriors.len() != corpus.records.len() {
        return Err(Error::DimensionMismatch {
            expected: corpus.records.len(),
            got: posteriors.len(),
        });
    }
    let k = posteriors[0].len();
    let res = opts.resolution_weeks.max(1) as i64;
    let (first, _) = corpus.time_range().expect("non-empty corpus");
    let anchor = iso_week_start(first.date_naive());
    let bin_of = |d: NaiveDate| (d - anchor).num_days().div_euclid(7 * res) as usize;
    let t_len = corpus.records.iter().map(|r| bin_of(r.timestamp.date_naive())).max().unwrap() + 1;

    let mut sums: BTreeMap<&str, (Vec<Vec<f64>>, Vec<usize>)> = BTreeMap::new();
    for (rec, post) in corpus.records.iter().zip(posteriors) {
        if post.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: post.len(),
            });
        }
        let entry = sums
            .entry(rec.city_id.as_str())
            .or_insert_with(|| (vec![vec![0.0; t_len]; k], vec![0; t_len]));
        let t = bin_of(rec.timestamp.date_naive());
        for (s, p) in post.iter().enumerate() {
            entry.0[s][t] += p;
        }
        entry.1[t] += 1;
    }

    let mut warnings = Vec::new();
    for city in corpus.cities.keys() {
        if !sums.contains_key(city.as_str()) {
            warnings.push(format!("city `{city}` has no records in any week; dropped"));
        }
    }

    let mut cities = Vec::new();
    let mut values = vec![Vec::new(); k];
    let mut bin_counts = Vec::new();
    let mut imputed = Vec::new();
    for (city, (style_sums, counts)) in sums {
        let observed: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
        for (s, sum) in style_sums.into_iter().enumerate() {
            let mean: Vec<f64> = sum
                .iter()
                .zip(&counts)
                .map(|(v, &c)| if c > 0 { v / c as f64 } else { f64::NAN })
                .collect();
            values[s].push(interpolate_missing(&mean, &observed));
        }
        imputed.push(observed.iter().map(|o| !o).collect());
        bin_counts.push(counts);
        cities.push(city.to_string());
    }
    let mut panel = TrajectoryPanel {
        anchor: Some(anchor),
        week_index: (0..t_len as i64).map(|t| t * res).collect(),
        cities,
        n_styles: k,
        values,
        bin_counts,
        imputed,
        deseasonalized_by: None,
    };
    if opts.smoothing_window > 1 {
        panel = smooth(&panel, opts.smoothing_window);
    }
    Ok((panel, warnings))
}

/// Linear interpolation across unobserved points; ends hold the nearest
/// observed value.
pub fn interpolate_missing(values: &[f64], observed: &[bool]) -> Vec<f64> {
    let known: Vec<usize> = (0..values.len()).filter(|&i| observed[i]).collect();
    if known.is_empty() {
        return vec![0.0; values.len()];
    }
    let mut out = values.to_vec();
    for i in 0..values.len() {
        if observed[i] {
            continue;
        }
        let next = known.partition_point(|&k| k < i);
        out[i] = match (next.checked_sub(1).map(|p| known[p]), known.get(next)) {
            (Some(lo), Some(&hi)) => {
                let w = (i - lo) as f64 / (hi - lo) as f64;
                values[lo] * (1.0 - w) + values[hi] * w
            }
            (Some(lo), None) => values[lo],
            (None, Some(&hi)) => values[hi],
            (None, None) => unreachable!(),
        };
    }
    out
}

/// Centered moving average with a truncated window at the edges.
pub fn smooth(panel: &TrajectoryPanel, window: usize) -> TrajectoryPanel {
    let half = window / 2;
    let mut out = panel.clone();
    for style in out.values.iter_mut() {
        for y in style.iter_mut() {
            let src = y.clone();
            for (t, v) in y.iter_mut().enumerate() {
                let lo = t.saturating_sub(half);
                let hi = (t + half + 1).min(src.len());
                *v = src[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            }
        }
    }
    out
}

/// Seasonal differencing `y'[t] = y[t] - y[t - season]`; the first `season`
/// steps are dropped.
pub fn deseasonalize(panel: &TrajectoryPanel, season: usize) -> Result<TrajectoryPanel> {
    let t = panel.len();
    if t <= season {
        return Err(Error::InsufficientData(format!(
            "deseasonalizing with season {season} needs more than {season} steps, panel has {t}"
        )));
    }
    let tail = season..t;
    Ok(TrajectoryPanel {
        anchor: panel.anchor,
        week_index: panel.week_index[tail.clone()].to_vec(),
        cities: panel.cities.clone(),
        n_styles: panel.n_styles,
        values: panel
            .values
            .iter()
            .map(|s| s.iter().map(|y| (season..t).map(|i| y[i] - y[i - season]).collect()).collect())
            .collect(),
        bin_counts: panel.bin_counts.iter().map(|c| c[tail.clone()].to_vec()).collect(),
        imputed: panel.imputed.iter().map(|c| c[tail.clone()].to_vec()).collect(),
        deseasonalized_by: Some(panel.deseasonalized_by.unwrap_or(0) + season),
    })
}

/// Train / validation / test ranges over the time axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
    pub horizon: usize,
}

impl SplitSpec {
    /// Everything before the test range.
    pub fn history(&self) -> Range<usize> {
        0..self.test.start
    }
}

pub fn split(len: usize, horizon: usize, val_len: usize) -> Result<SplitSpec> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    if len <= horizon + val_len + MIN_TRAIN_LEN {
        return Err(Error::InsufficientData(format!(
            "series of length {len} too short for horizon {horizon}, validation {val_len} and {MIN_TRAIN_LEN} training steps"
        )));
    }
    let test_start = len - horizon;
    let val_start = test_start - val_len;
    Ok(SplitSpec {
        train: 0..val_start,
        validation: val_start..test_start,
        test: test_start..len,
        horizon,
    })
}

/// Per-week mean of a style across cities with records that week.
pub fn global_trajectory(panel: &TrajectoryPanel, style: usize) -> Vec<f64> {
    global_trajectory_excluding(panel, style, None)
}

/// As [`global_trajectory`], optionally leaving one city out of the mean.
pub fn global_trajectory_excluding(panel: &TrajectoryPanel, style: usize, exclude: Option<usize>) -> Vec<f64> {
    let members: Vec<usize> = (0..panel.n_cities()).filter(|&c| Some(c) != exclude).collect();
    (0..panel.len())
        .map(|t| {
            let with_data: Vec<usize> = members.iter().copied().filter(|&c| panel.bin_counts[c][t] > 0).collect();
            let pool = if with_data.is_empty() { &members } else { &with_data };
            pool.iter().map(|&c| panel.values[style][c][t]).sum::<f64>() / pool.len().max(1) as f64
        })
        .collect()
}

impl TrajectoryPanel {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(["style_id", "city_id", "week", "value", "bin_count"])?;
        for s in 0..self.n_styles {
            for (c, city) in self.cities.iter().enumerate() {
                for (t, &week) in self.week_index.iter().enumerate() {
                    let label = match self.anchor {
                        Some(a) => (a + Duration::weeks(week)).to_string(),
                        None => week.to_string(),
                    };
                    w.write_record([
                        s.to_string(),
                        city.clone(),
                        label,
                        self.values[s][c][t].to_string(),
                        self.bin_counts[c][t].to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads the CSV layout written by [`TrajectoryPanel::write_csv`].
    /// Bins with zero records are marked imputed.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(BufReader::new(file));
        let mut rows = Vec::new();
        for (n, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::MalformedRow {
                row: n + 1,
                message: format!("bad {what}"),
            };
            let style: usize = rec[0].parse().map_err(|_| bad("style_id"))?;
            let week = rec[2].to_string();
            let value: f64 = rec[3].parse().map_err(|_| bad("value"))?;
            let count: usize = rec[4].parse().map_err(|_| bad("bin_count"))?;
            rows.push((style, rec[1].to_string(), week, value, count));
        }
        let mut cities: Vec<String> = Vec::new();
        let mut weeks: Vec<String> = Vec::new();
        for (_, city, week, _, _) in &rows {
            if !cities.contains(city) {
                cities.push(city.clone());
            }
            if !weeks.contains(week) {
                weeks.push(week.clone());
            }
        }
        let n_styles = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let (anchor, week_index) = match weeks.first().and_then(|w| w.parse::<NaiveDate>().ok()) {
            Some(first) => {
                let parsed: Vec<NaiveDate> = weeks
                    .iter()
                    .map(|w| w.parse().map_err(|_| Error::MalformedRow { row: 0, message: format!("week `{w}`") }))
                    .collect::<Result<_>>()?;
                (Some(first), parsed.iter().map(|d| (*d - first).num_weeks()).collect())
            }
            None => (
                None,
                weeks
                    .iter()
                    .map(|w| w.parse().map_err(|_| Error::MalformedRow { row: 0, message: format!("week `{w}`") }))
                    .collect::<Result<Vec<i64>>>()?,
            ),
        };
        let t = weeks.len();
        let mut values = vec![vec![vec![0.0; t]; cities.len()]; n_styles];
        let mut counts = vec![vec![0; t]; cities.len()];
        for (s, city, week, v, n) in rows {
            let c = cities.iter().position(|x| *x == city).unwrap();
            let i = weeks.iter().position(|x| *x == week).unwrap();
            values[s][c][i] = v;
            counts[c][i] = n;
        }
        Ok(TrajectoryPanel {
            anchor,
            week_index,
            imputed: counts.iter().map(|c| c.iter().map(|&n| n == 0).collect()).collect(),
            bin_counts: counts,
            cities,
            n_styles,
            values,
            deseasonalized_by: None,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{AttributeRecord, CityMetadata};
    use chrono::{TimeZone, Utc};

    fn one_city_corpus(days: &[u32]) -> Corpus {
        let records = days
            .iter()
            .map(|&d| AttributeRecord {
                city_id: "paris".into(),
                timestamp: Utc.with_ymd_and_hms(2014, 1, d, 12, 0, 0).unwrap(),
                attributes: vec![0.5],
            })
            .collect();
        Corpus::new(records, BTreeMap::new(), vec!["a".into()]).unwrap()
    }

    #[test]
    fn mean_of_posteriors() {
        let corpus = one_city_corpus(&[7, 8]);
        let (panel, _) = build_panel(&corpus, &[vec![1.0, 0.0], vec![0.0, 1.0]], &PanelOptions::default()).unwrap();
        assert_eq!(panel.len(), 1);
        assert_eq!(panel.values[0][0], vec![0.5]);
        assert_eq!(panel.values[1][0], vec![0.5]);
        assert_eq!(panel.bin_counts[0], vec![2]);
        // 2014-01-07 is a Tuesday
        assert_eq!(panel.anchor, NaiveDate::from_ymd_opt(2014, 1, 6));
    }

    #[test]
    fn gap_is_interpolated_and_flagged() {
        // weeks 0 and 2 observed, week 1 empty
        let corpus = one_city_corpus(&[6, 20]);
        let (panel, _) = build_panel(&corpus, &[vec![0.2, 0.8], vec![0.6, 0.4]], &PanelOptions::default()).unwrap();
        assert_eq!(panel.len(), 3);
        assert!((panel.values[0][0][1] - 0.4).abs() < 1e-12);
        assert_eq!(panel.imputed[0], vec![false, true, false]);
        let sum: f64 = (0..2).map(|s| panel.values[s][0][1]).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recordless_city_dropped() {
        let mut corpus = one_city_corpus(&[6]);
        corpus.cities.insert("rome".into(), CityMetadata::new("rome"));
        let (panel, warnings) = build_panel(&corpus, &[vec![1.0]], &PanelOptions::default()).unwrap();
        assert_eq!(panel.cities, vec!["paris".to_string()]);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn empty_corpus_rejected() {
        let corpus = Corpus::new(vec![], BTreeMap::new(), vec!["a".into()]).unwrap();
        assert!(build_panel(&corpus, &[], &PanelOptions::default()).is_err());
    }

    fn panel_of(y: Vec<f64>) -> TrajectoryPanel {
        TrajectoryPanel::from_values(vec!["a".into()], vec![vec![y]]).unwrap()
    }

    #[test]
    fn deseasonalize_identities() {
        let periodic: Vec<f64> = (0..130).map(|t| ((t % 52) as f64 * 0.7).sin()).collect();
        let out = deseasonalize(&panel_of(periodic), 52).unwrap();
        assert_eq!(out.len(), 78);
        assert!(out.values[0][0].iter().all(|v| *v == 0.0));

        let c = 0.003;
        let linear: Vec<f64> = (0..60).map(|t| c * t as f64).collect();
        let out = deseasonalize(&panel_of(linear), 52).unwrap();
        assert_eq!(out.len(), 8);
        assert!(out.values[0][0].iter().all(|v| (v - 52.0 * c).abs() < 1e-12));
        assert_eq!(out.week_index[0], 52);

        assert!(deseasonalize(&panel_of(vec![0.0; 52]), 52).is_err());
    }

    #[test]
    fn split_arithmetic() {
        let s = split(150, 26, 26).unwrap();
        assert_eq!(s.train, 0..98);
        assert_eq!(s.validation, 98..124);
        assert_eq!(s.test, 124..150);
        assert!(split(40, 26, 26).is_err());
    }

    #[test]
    fn global_mean() {
        let panel = TrajectoryPanel::from_values(
            vec!["a".into(), "b".into()],
            vec![vec![vec![0.2; 5], vec![0.4; 5]]],
        )
        .unwrap();
        assert!(global_trajectory(&panel, 0).iter().all(|v| (v - 0.3).abs() < 1e-15));
        assert_eq!(global_trajectory_excluding(&panel, 0, Some(0)), vec![0.4; 5]);
    }

    #[test]
    fn smoothing_window() {
        let p = panel_of(vec![0.0, 3.0, 0.0, 3.0]);
        let s = smooth(&p, 3);
        assert_eq!(s.values[0][0], vec![1.5, 1.0, 2.0, 1.5]);
    }

    #[test]
    fn csv_round_trip() {
        let corpus = one_city_corpus(&[6, 20]);
        let (panel, _) = build_panel(&corpus, &[vec![0.2, 0.8], vec![0.6, 0.4]], &PanelOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("panel.csv");
        panel.write_csv(&p).unwrap();
        assert_eq!(TrajectoryPanel::read_csv(&p).unwrap(), panel);
        let j = dir.path().join("panel.json");
        panel.save_json(&j).unwrap();
        assert_eq!(TrajectoryPanel::load_json(&j).unwrap(), panel);
    }
}
