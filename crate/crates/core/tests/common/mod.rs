#![allow(dead_code)]

use std::path::PathBuf;

use stylecast::synthetic::{PlantedEdge, SyntheticSpec};

/// Planted-influence fixture: 8 cities, 4 styles, 200 weeks, six edges with
/// distinct targets and no chains, persistent deviations, no season.
pub fn planted_spec(seed: u64) -> SyntheticSpec {
    let e = |source, target, style, lag| PlantedEdge {
        source,
        target,
        style,
        lag,
        strength: 0.7,
    };
    SyntheticSpec {
        n_cities: 8,
        n_styles: 4,
        len: 200,
        edges: vec![e(0, 1, 0, 2), e(2, 3, 0, 5), e(4, 5, 1, 1), e(6, 7, 2, 3), e(1, 6, 3, 7), e(3, 0, 1, 4)],
        seasonal_amplitude: 0.0,
        noise_sigma: 0.01,
        persistence: 0.8,
        seed,
        ..SyntheticSpec::default()
    }
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/five_city")
}

/// `n` independent standard-normal draws scaled by `sigma`.
pub fn normal_series(rng: &mut rand_chacha::ChaCha8Rng, n: usize, sigma: f64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect()
}

/// Composite Simpson over [0, 1) after mapping `x = a + s / (1 - s)`.
pub fn tail_integral(kernel: impl Fn(f64) -> f64, a: f64) -> f64 {
    let n = 200_000;
    let h = 1.0 / n as f64;
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let x = a + s / (1.0 - s);
        kernel(x) / ((1.0 - s) * (1.0 - s))
    };
    let mut acc = g(0.0) + g(1.0);
    for i in 1..n {
        acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}
