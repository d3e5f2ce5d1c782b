use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::granger::{benjamini_hochberg, granger_test, GrangerConfig, LagCorrection};
use crate::error::{Error, Result};
use crate::trajectories::TrajectoryPanel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEdge {
    pub source: String,
    pub target: String,
    pub style: usize,
    pub lag: u8,
    pub p_value: f64,
    /// Edge weight; equals the lag.
    pub weight: f64,
}

/// `lags[style][source][target]`: discovered influence lag, 0 for none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceTensor {
    pub cities: Vec<String>,
    pub n_styles: usize,
    pub lags: Vec<Vec<Vec<u8>>>,
    /// Selected (adjusted) p-value per entry; 1 on the diagonal.
    pub p_values: Vec<Vec<Vec<f64>>>,
}

impl InfluenceTensor {
    pub fn empty(cities: Vec<String>, n_styles: usize) -> Self {
        let c = cities.len();
        InfluenceTensor {
            cities,
            n_styles,
            lags: vec![vec![vec![0; c]; c]; n_styles],
            p_values: vec![vec![vec![1.0; c]; c]; n_styles],
        }
    }

    pub fn n_cities(&self) -> usize {
        self.cities.len()
    }

    pub fn lag(&self, style: usize, source: usize, target: usize) -> u8 {
        self.lags[style][source][target]
    }

    /// Influencers of `target` for `style` as `(source, lag)`, by source index.
    pub fn influencers(&self, style: usize, target: usize) -> Vec<(usize, usize)> {
        (0..self.n_cities())
            .filter_map(|i| match self.lags[style][i][target] {
                0 => None,
                l => Some((i, l as usize)),
            })
            .collect()
    }

    pub fn edges(&self) -> Vec<InfluenceEdge> {
        let mut out = Vec::new();
        for k in 0..self.n_styles {
            for i in 0..self.n_cities() {
                for j in 0..self.n_cities() {
                    let lag = self.lags[k][i][j];
                    if lag > 0 {
                        out.push(InfluenceEdge {
                            source: self.cities[i].clone(),
                            target: self.cities[j].clone(),
                            style: k,
                            lag,
                            p_value: self.p_values[k][i][j],
                            weight: lag as f64,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.lags.iter().flatten().flatten().filter(|&&l| l > 0).count()
    }

    /// Graphviz digraph; one edge per (source, target, style).
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph influence {\n");
        for c in &self.cities {
            let _ = writeln!(s, "  \"{c}\";");
        }
        for e in self.edges() {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [lag={}, style={}, p={:e}];",
                e.source, e.target, e.lag, e.style, e.p_value
            );
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub style: usize,
    pub source: String,
    pub target: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub tests_run: usize,
    pub degenerate: usize,
    pub skipped: Vec<SkippedPair>,
}

struct PairTests {
    style: usize,
    source: usize,
    target: usize,
    /// p-value per lag in config order, `None` when the fit failed.
    p: Result<Vec<f64>>,
    degenerate: bool,
}

fn run_pair(panel: &TrajectoryPanel, range: &Range<usize>, cfg: &GrangerConfig, style: usize, source: usize, target: usize) -> PairTests {
    let y = &panel.values[style][target][range.clone()];
    let x = &panel.values[style][source][range.clone()];
    let mut degenerate = false;
    let p = cfg
        .lags
        .clone()
        .map(|lag| {
            let out = granger_test(y, x, cfg.order, lag, cfg.alpha, cfg.lag_mode)?;
            degenerate |= out.degenerate;
            Ok(out.p_value)
        })
        .collect::<Result<Vec<f64>>>();
    PairTests {
        style,
        source,
        target,
        p,
        degenerate,
    }
}

/// Runs the lag search for every ordered city pair and style, using only the
/// time steps in `range`.
pub fn discover_tensor(
    panel: &TrajectoryPanel,
    range: Range<usize>,
    cfg: &GrangerConfig,
) -> Result<(InfluenceTensor, DiscoveryReport)> {
    cfg.validate()?;
    if range.end > panel.len() || range.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "range {range:?} outside panel of length {}",
            panel.len()
        )));
    }
    let c = panel.n_cities();
    let mut tensor = InfluenceTensor::empty(panel.cities.clone(), panel.n_styles);
    let mut report = DiscoveryReport::default();
    if c < 2 {
        return Ok((tensor, report));
    }

    let jobs: Vec<(usize, usize, usize)> = (0..panel.n_styles)
        .flat_map(|k| (0..c).flat_map(move |i| (0..c).filter(move |&j| j != i).map(move |j| (k, i, j))))
        .collect();
    #[cfg(feature = "parallel")]
    let results: Vec<PairTests> = {
        use rayon::prelude::*;
        jobs.par_iter().map(|&(k, i, j)| run_pair(panel, &range, cfg, k, i, j)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<PairTests> = jobs.iter().map(|&(k, i, j)| run_pair(panel, &range, cfg, k, i, j)).collect();

    let n_lags = cfg.n_lags();
    let lag_values: Vec<usize> = cfg.lags.clone().collect();
    let mut adjusted: Vec<Option<Vec<f64>>> = results
        .iter()
        .map(|r| {
            r.p.as_ref().ok().map(|p| match cfg.lag_correction {
                LagCorrection::None => p.clone(),
                LagCorrection::Bonferroni => p.iter().map(|v| (v * n_lags as f64).min(1.0)).collect(),
            })
        })
        .collect();
    if cfg.benjamini_hochberg {
        let flat: Vec<f64> = adjusted.iter().flatten().flatten().copied().collect();
        let mut q = benjamini_hochberg(&flat).into_iter();
        for p in adjusted.iter_mut().flatten() {
            for v in p.iter_mut() {
                *v = q.next().expect("one q per p");
            }
        }
    }

    for (r, adj) in results.iter().zip(&adjusted) {
        let p = match (&r.p, adj) {
            (Ok(_), Some(p)) => p,
            (Err(e), _) => {
                report.skipped.push(SkippedPair {
                    style: r.style,
                    source: panel.cities[r.source].clone(),
                    target: panel.cities[r.target].clone(),
                    reason: e.to_string(),
                });
                continue;
            }
            (Ok(_), None) => unreachable!("adjusted p-values exist for every successful pair"),
        };
        report.tests_run += n_lags;
        if r.degenerate {
            report.degenerate += 1;
        }
        // first minimum wins, so ties go to the shorter lag
        let (best, &best_p) = p
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty lag range");
        tensor.p_values[r.style][r.source][r.target] = best_p;
        if best_p < cfg.alpha {
            tensor.lags[r.style][r.source][r.target] = lag_values[best] as u8;
        }
    }
    Ok((tensor, report))
}
