//! Fashion styles as a diagonal-covariance Gaussian mixture over attribute
//! vectors, fitted by expectation maximization.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::Corpus;
use crate::error::{Error, Result};

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub attribute_names: Vec<String>,
    /// Present when the model was fitted on z-scored attributes.
    #[serde(default)]
    pub standardization: Option<Standardization>,
}

#[derive(Debug, Clone)]
pub struct GmmOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub variance_floor: f64,
    pub standardize: bool,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            k: 50,
            seed: 0,
            max_iters: 500,
            tol: 1e-6,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reseed {
    pub iteration: usize,
    pub component: usize,
    pub record: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitLog {
    /// Mean per-record log-likelihood evaluated before each M-step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    pub reseeds: Vec<Reseed>,
}

impl StyleModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn prepared(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(match &self.standardization {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        })
    }

    /// Per-component `ln(pi_k) + ln N(x | mu_k, diag(var_k))`.
    fn joint_log(&self, x: &[f64], out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.weights[k].ln() + log_normal_diag(x, &self.means[k], &self.variances[k]);
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

fn log_normal_diag(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((xi, mi), vi) in x.iter().zip(mean).zip(var) {
        let d = xi - mi;
        acc += (2.0 * PI * vi).ln() + d * d / vi;
    }
    -0.5 * acc
}

/// Normalizes `logs` in place into probabilities, returning the log of the sum.
fn softmax_in_place(logs: &mut [f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logs.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logs.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

fn column_stats(data: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = data.len() as f64;
    let dim = data[0].len();
    let mut mean = vec![0.0; dim];
    for x in data {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for x in data {
        for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

/// Seeded k-means++ seeding over a shuffled record order.
pub fn kmeans_pp_init(data: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();

    let mut centers = vec![data[order[0]].clone()];
    let mut dist: Vec<f64> = order.iter().map(|&i| sq(&data[i], &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = dist.len() - 1;
            for (pos, d) in dist.iter().enumerate() {
                acc += d;
                if acc >= target && *d > 0.0 {
                    chosen = pos;
                    break;
                }
            }
            chosen
        } else {
            centers.len() % order.len()
        };
        let c = data[order[pick]].clone();
        for (pos, &i) in order.iter().enumerate() {
            dist[pos] = dist[pos].min(sq(&data[i], &c));
        }
        centers.push(c);
    }
    centers
}

/// Fits a `k`-component mixture to the corpus attribute vectors.
pub fn fit_gmm(corpus: &Corpus, opts: &GmmOptions) -> Result<(StyleModel, FitLog)> {
    let raw: Vec<Vec<f64>> = corpus.records.iter().map(|r| r.attributes.clone()).collect();
    let (data, standardization) = if opts.standardize && !raw.is_empty() {
        let (mean, var) = column_stats(&raw);
        let scale: Vec<f64> = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        let s = Standardization { mean, scale };
        (raw.iter().map(|x| s.apply(x)).collect(), Some(s))
    } else {
        (raw, None)
    };
    let (mut model, log) = fit_gmm_data(&data, opts, None)?;
    model.attribute_names = corpus.attribute_names.clone();
    model.standardization = standardization;
    Ok((model, log))
}

/// EM on raw vectors. `init_means` overrides the k-means++ seeding.
pub fn fit_gmm_data(
    data: &[Vec<f64>],
    opts: &GmmOptions,
    init_means: Option<Vec<Vec<f64>>>,
) -> Result<(StyleModel, FitLog)> {
    let k = opts.k;
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if data.len() < k {
        return Err(Error::InvalidArgument(format!(
            "K = {k} exceeds the {} available records",
            data.len()
        )));
    }
    let dim = data[0].len();
    if let Some(bad) = data.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let n = data.len();
    let floor = opts.variance_floor;
    let (_, global_var) = column_stats(data);
    let global_var: Vec<f64> = global_var.iter().map(|v| v.max(floor)).collect();

    let means = match init_means {
        Some(m) => {
            if m.len() != k || m.iter().any(|v| v.len() != dim) {
                return Err(Error::InvalidArgument("initial means shape".into()));
            }
            m
        }
        None => kmeans_pp_init(data, k, opts.seed),
    };
    let mut model = StyleModel {
        weights: vec![1.0 / k as f64; k],
        means,
        variances: vec![global_var.clone(); k],
        attribute_names: Vec::new(),
        standardization: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_0f_7e5e_ed00);
    let mut log = FitLog::default();
    let mut resp = vec![0.0; n * k];

    for iter in 0..=opts.max_iters {
        // E-step
        let mut ll = 0.0;
        for (x, r) in data.iter().zip(resp.chunks_mut(k)) {
            model.joint_log(x, r);
            ll += softmax_in_place(r);
        }
        let ll = ll / n as f64;
        if !ll.is_finite() {
            return Err(Error::Numerical(format!("log-likelihood {ll} at EM iteration {iter}")));
        }
        if let Some(&prev) = log.log_likelihood.last() {
            log.log_likelihood.push(ll);
            if ((ll - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < opts.tol {
                log.converged = true;
                break;
            }
        } else {
            log.log_likelihood.push(ll);
        }
        if iter == opts.max_iters {
            break;
        }

        // M-step
        let mut nk = vec![0.0; k];
        let mut sums = vec![vec![0.0; dim]; k];
        for (x, r) in data.iter().zip(resp.chunks(k)) {
            for c in 0..k {
                nk[c] += r[c];
                for (s, v) in sums[c].iter_mut().zip(x) {
                    *s += r[c] * v;
                }
            }
        }
        for c in 0..k {
            if nk[c] < 1e-10 * n as f64 {
                let record = rng.random_range(0..n);
                model.means[c] = data[record].clone();
                model.variances[c] = global_var.clone();
                nk[c] = 1.0;
                log.reseeds.push(Reseed {
                    iteration: iter,
                    component: c,
                    record,
                });
                log::warn!("style component {c} collapsed at EM iteration {iter}; reseeded from record {record}");
                continue;
            }
            for (m, s) in model.means[c].iter_mut().zip(&sums[c]) {
                *m = s / nk[c];
            }
        }
        let mut sq = vec![vec![0.0; dim]; k];
        for (x, r) in data.iter().zip(resp.chunks(k)) {
            for c in 0..k {
                for ((s, v), m) in sq[c].iter_mut().zip(x).zip(&model.means[c]) {
                    *s += r[c] * (v - m) * (v - m);
                }
            }
        }
        let reseeded: Vec<usize> = log.reseeds.iter().filter(|r| r.iteration == iter).map(|r| r.component).collect();
        for c in 0..k {
            if reseeded.contains(&c) {
                continue;
            }
            for (v, s) in model.variances[c].iter_mut().zip(&sq[c]) {
                *v = (s / nk[c]).max(floor);
            }
        }
        let total: f64 = nk.iter().sum();
        for c in 0..k {
            model.weights[c] = nk[c] / total;
        }
    }
    Ok((model, log))
}

/// Posterior style probabilities for one attribute vector.
pub fn posterior(model: &StyleModel, attributes: &[f64]) -> Result<Vec<f64>> {
    let x = model.prepared(attributes)?;
    let mut out = vec![0.0; model.k()];
    model.joint_log(&x, &mut out);
    softmax_in_place(&mut out);
    Ok(out)
}

/// Posterior rows for every record, in corpus order.
pub fn assign_style_posteriors(model: &StyleModel, corpus: &Corpus) -> Result<Vec<Vec<f64>>> {
    corpus.records.iter().map(|r| posterior(model, &r.attributes)).collect()
}

/// Mean per-record log density under the mixture.
pub fn gmm_log_likelihood(model: &StyleModel, corpus: &Corpus) -> Result<f64> {
    let mut buf = vec![0.0; model.k()];
    let mut total = 0.0;
    for r in &corpus.records {
        let x = model.prepared(&r.attributes)?;
        model.joint_log(&x, &mut buf);
        total += softmax_in_place(&mut buf);
    }
    Ok(total / corpus.records.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::AttributeRecord;
    use chrono::{TimeZone, Utc};
    use rand_distr::{Distribution, Normal};
    use std::collections::BTreeMap;

    fn corpus_of(points: Vec<Vec<f64>>) -> Corpus {
        let dim = points[0].len();
        let records = points
            .into_iter()
            .map(|attributes| AttributeRecord {
                city_id: "c".into(),
                timestamp: Utc.with_ymd_and_hms(2014, 1, 6, 0, 0, 0).unwrap(),
                attributes,
            })
            .collect();
        Corpus::new(records, BTreeMap::new(), (0..dim).map(|i| format!("a{i}")).collect()).unwrap()
    }

    fn two_clusters(seed: u64, n: usize) -> (Vec<Vec<f64>>, [[f64; 2]; 2]) {
        let truth: [[f64; 2]; 2] = [[0.2, 0.3], [0.8, 0.7]];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.04).unwrap();
        let pts = (0..n)
            .map(|i| {
                let c = truth[i % 2];
                vec![
                    (c[0] + noise.sample(&mut rng)).clamp(0.0, 1.0),
                    (c[1] + noise.sample(&mut rng)).clamp(0.0, 1.0),
                ]
            })
            .collect();
        (pts, truth)
    }

    #[test]
    fn single_component_closed_form() {
        let (pts, _) = two_clusters(3, 200);
        let corpus = corpus_of(pts.clone());
        let (model, _) = fit_gmm(
            &corpus,
            &GmmOptions {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let (mean, var) = column_stats(&pts);
        for d in 0..2 {
            assert!((model.means[0][d] - mean[d]).abs() < 1e-12);
            assert!((model.variances[0][d] - var[d]).abs() < 1e-12);
        }
        assert_eq!(posterior(&model, &pts[0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn separated_clusters_recovered() {
        let (pts, truth) = two_clusters(5, 600);
        let corpus = corpus_of(pts);
        let (model, log) = fit_gmm(
            &corpus,
            &GmmOptions {
                k: 2,
                seed: 9,
                ..Default::default()
            },
        )
        .unwrap();
        // match components to truth by the cheaper assignment
        let err = |perm: [usize; 2]| {
            (0..2)
                .flat_map(|c| (0..2).map(move |d| (c, d)))
                .map(|(c, d)| (model.means[perm[c]][d] - truth[c][d]).abs())
                .fold(0.0_f64, f64::max)
        };
        let best = err([0, 1]).min(err([1, 0]));
        assert!(best < 0.05, "max mean error {best}");
        for w in log.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        assert!(log.converged);
    }

    #[test]
    fn log_density_at_mean() {
        let model = StyleModel {
            weights: vec![1.0],
            means: vec![vec![0.4, 0.6, 0.1]],
            variances: vec![vec![1.0; 3]],
            attribute_names: vec![],
            standardization: None,
        };
        let corpus = corpus_of(vec![vec![0.4, 0.6, 0.1]]);
        let ll = gmm_log_likelihood(&model, &corpus).unwrap();
        assert!((ll + 1.5 * (2.0 * PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn dominant_posterior_and_dimension_error() {
        let model = StyleModel {
            weights: vec![0.5, 0.5],
            means: vec![vec![0.1, 0.1], vec![0.9, 0.9]],
            variances: vec![vec![0.001; 2]; 2],
            attribute_names: vec![],
            standardization: None,
        };
        let p = posterior(&model, &[0.1, 0.1]).unwrap();
        assert!(p[0] > 1.0 - 1e-12);
        assert!(matches!(posterior(&model, &[0.1]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn too_many_components() {
        let corpus = corpus_of(vec![vec![0.1], vec![0.2]]);
        assert!(fit_gmm(
            &corpus,
            &GmmOptions {
                k: 3,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn collapsed_component_reseeded() {
        // four identical points and a seeded init placing one mean far away
        let data = vec![vec![0.5, 0.5]; 4];
        let (model, log) = fit_gmm_data(
            &data,
            &GmmOptions {
                k: 2,
                max_iters: 5,
                ..Default::default()
            },
            Some(vec![vec![0.5, 0.5], vec![50.0, 50.0]]),
        )
        .unwrap();
        assert!(!log.reseeds.is_empty());
        assert!((model.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn permutation_with_fixed_init() {
        let (pts, _) = two_clusters(21, 300);
        let opts = GmmOptions {
            k: 2,
            ..Default::default()
        };
        let init = vec![vec![0.3, 0.3], vec![0.7, 0.7]];
        let (a, _) = fit_gmm_data(&pts, &opts, Some(init.clone())).unwrap();
        let mut shuffled = pts.clone();
        shuffled.reverse();
        shuffled.rotate_left(17);
        let (b, _) = fit_gmm_data(&shuffled, &opts, Some(init)).unwrap();
        for c in 0..2 {
            assert!((a.weights[c] - b.weights[c]).abs() < 1e-9);
            for d in 0..2 {
                assert!((a.means[c][d] - b.means[c][d]).abs() < 1e-9);
            }
        }
    }
}
