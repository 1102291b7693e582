//! Seeded synthetic inputs for experiments and tests.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{invalid, Result};
use crate::geometry::{CenterSet, GridDataset, PointCloud, RealDataset};
use crate::rng::{derive_seed, generator};

/// `n` points drawn uniformly from `[Δ]^d`.
pub fn uniform_grid(n: usize, d: usize, delta: u64, seed: u64) -> Result<GridDataset> {
    let mut rng = generator(seed);
    let coords = (0..n * d).map(|_| rng.random_range(1..=delta)).collect();
    GridDataset::new(d, delta, coords)
}

/// Gaussian blobs around `clusters` uniform centers with standard deviation
/// `spread` (in grid units), rounded and clamped to the grid. Point `i`
/// belongs to blob `i mod clusters`.
pub fn gaussian_blobs(n: usize, d: usize, delta: u64, clusters: usize, spread: f64, seed: u64) -> Result<GridDataset> {
    if clusters == 0 {
        return Err(invalid("clusters", "must be at least 1"));
    }
    let normal = Normal::new(0.0, spread).map_err(|e| invalid("spread", e.to_string()))?;
    let mut crng = generator(derive_seed(seed, 0));
    let means: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..d).map(|_| crng.random_range(1.0..=delta as f64)).collect())
        .collect();
    let mut rng = generator(derive_seed(seed, 1));
    let mut coords = Vec::with_capacity(n * d);
    for i in 0..n {
        for &m in &means[i % clusters] {
            let v = (m + normal.sample(&mut rng)).round().clamp(1.0, delta as f64);
            coords.push(v as u64);
        }
    }
    GridDataset::new(d, delta, coords)
}

/// `k` centers with coordinates uniform in `[0, Δ+1]`.
pub fn random_centers(k: usize, d: usize, delta: u64, seed: u64) -> Result<CenterSet> {
    let mut rng = generator(seed);
    let coords = (0..k * d).map(|_| rng.random_range(0.0..=delta as f64 + 1.0)).collect();
    CenterSet::new(d, coords)
}

/// Centers at data points displaced by Gaussian noise of scale `jitter`.
pub fn perturbed_data_centers(data: &GridDataset, k: usize, jitter: f64, seed: u64) -> Result<CenterSet> {
    let mut rng = generator(seed);
    let n = data.len();
    if n == 0 {
        return Err(crate::Error::Empty("dataset"));
    }
    let mut coords = Vec::with_capacity(k * data.dim());
    for _ in 0..k {
        let p = data.point(rng.random_range(0..n));
        for &c in p {
            let e: f64 = StandardNormal.sample(&mut rng);
            coords.push(c as f64 + jitter * e);
        }
    }
    CenterSet::new(data.dim(), coords)
}

/// `n` points uniform in the closed unit ball of `ℝ^d`.
pub fn unit_ball(n: usize, d: usize, seed: u64) -> Result<RealDataset> {
    let mut rng = generator(seed);
    let mut coords = Vec::with_capacity(n * d);
    for _ in 0..n {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let r = rng.random::<f64>().powf(1.0 / d as f64);
        coords.extend(g.iter().map(|x| x / norm * r));
    }
    RealDataset::new(d, coords)
}
