//! Approximate centers drawn from the data, and weighted coresets.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{
    nearest_center, pairwise_sum, validate_epsilon, validate_weights, weighted_cost, CenterSet,
    GridDataset, PointCloud, Power,
};
use crate::rng::{derive_seed, generator, InverseCdf};

/// `k` centers, each a copy of some dataset point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxCenters {
    /// Index into the source dataset for each center.
    pub indices: Vec<usize>,
    pub points: GridDataset,
    /// Nominal approximation factor the downstream analysis assumes.
    pub approx_factor: f64,
    /// Set when `k` exceeds the number of distinct points, so centers repeat.
    pub duplicate_warning: bool,
}

impl ApproxCenters {
    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn center_set(&self) -> CenterSet {
        CenterSet::new(self.points.dim(), self.points.to_real().coords().to_vec())
            .expect("grid points are finite and non-empty")
    }
}

/// D^z seeding followed by one improvement sweep; every center is a data point.
pub fn approx_centers(data: &GridDataset, k: usize, z: Power, seed: u64) -> Result<ApproxCenters> {
    let ones = vec![1.0; data.len()];
    approx_centers_weighted(data, &ones, k, z, seed)
}

/// Weighted variant: seeding mass and sweep cost are scaled by `weights`.
pub fn approx_centers_weighted(
    data: &GridDataset,
    weights: &[f64],
    k: usize,
    z: Power,
    seed: u64,
) -> Result<ApproxCenters> {
    if data.is_empty() {
        return Err(crate::Error::Empty("dataset"));
    }
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    if weights.len() != data.len() {
        return Err(crate::Error::DimensionMismatch {
            expected: data.len(),
            got: weights.len(),
        });
    }
    validate_weights(weights)?;

    let n = data.len();
    let mut rng = generator(seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let first = InverseCdf::new(weights).map(|cdf| cdf.sample(&mut rng)).unwrap_or(0);
    chosen.push(first);

    let mut best_sq: Vec<f64> = (0..n)
        .map(|i| data.sq_dist_to(i, &data.point_vec(first)))
        .collect();
    let mut duplicate_warning = false;
    while chosen.len() < k {
        let mass: Vec<f64> = (0..n)
            .map(|i| weights[i] * z.pow_from_squared(best_sq[i]))
            .collect();
        let next = match InverseCdf::new(&mass) {
            Some(cdf) => cdf.sample(&mut rng),
            None => {
                // Every point already coincides with a center.
                duplicate_warning = true;
                chosen[0]
            }
        };
        chosen.push(next);
        let c = data.point_vec(next);
        for (i, slot) in best_sq.iter_mut().enumerate() {
            let sq = data.sq_dist_to(i, &c);
            if sq < *slot {
                *slot = sq;
            }
        }
    }

    improve_once(data, weights, &mut chosen, z)?;

    Ok(ApproxCenters {
        points: data.select(&chosen),
        indices: chosen,
        approx_factor: 2.0,
        duplicate_warning,
    })
}

fn centers_of(data: &GridDataset, idx: &[usize]) -> CenterSet {
    CenterSet::new(data.dim(), data.select(idx).to_real().coords().to_vec())
        .expect("selected grid points form a valid center set")
}

/// Moves each center to the data point nearest its cluster's weighted mean
/// when that lowers the total cost.
#[allow(clippy::needless_range_loop)]
fn improve_once(data: &GridDataset, weights: &[f64], chosen: &mut [usize], z: Power) -> Result<()> {
    let d = data.dim();
    let mut current = weighted_cost(data, weights, &centers_of(data, chosen), z)?;
    for l in 0..chosen.len() {
        let centers = centers_of(data, chosen);
        let mut mean = vec![0.0; d];
        let mut mass = 0.0;
        for i in 0..data.len() {
            if nearest_center(data, i, &centers).0 == l && weights[i] > 0.0 {
                mass += weights[i];
                for (a, m) in mean.iter_mut().enumerate() {
                    *m += weights[i] * data.coord(i, a);
                }
            }
        }
        if mass == 0.0 {
            continue;
        }
        mean.iter_mut().for_each(|m| *m /= mass);
        let snapped = nearest_point(data, &mean);
        if snapped == chosen[l] {
            continue;
        }
        let old = chosen[l];
        chosen[l] = snapped;
        let candidate = weighted_cost(data, weights, &centers_of(data, chosen), z)?;
        if candidate < current {
            current = candidate;
        } else {
            chosen[l] = old;
        }
    }
    Ok(())
}

/// Nearest dataset point to `target`, ties to the lowest index.
fn nearest_point(data: &GridDataset, target: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for i in 0..data.len() {
        let sq = data.sq_dist_to(i, target);
        if sq < best.1 {
            best = (i, sq);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoresetMethod {
    Identity,
    Sensitivity,
}

impl std::str::FromStr for CoresetMethod {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "sensitivity" => Ok(Self::Sensitivity),
            other => Err(invalid("method", format!("unknown method {other:?}"))),
        }
    }
}

/// Sample-size constants: `m = min(n, ⌈c0·k·ε⁻²·(d + log₂(1/δ))⌉)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub c0: f64,
    pub failure_prob: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            c0: 1.0,
            failure_prob: 0.01,
        }
    }
}

impl SamplingParams {
    pub fn sample_size(&self, n: usize, d: usize, k: usize, eps: f64) -> usize {
        let raw = self.c0 * k as f64 / (eps * eps) * (d as f64 + (1.0 / self.failure_prob).log2());
        (raw.ceil().max(1.0) as usize).min(n)
    }
}

/// A weighted subset of a source dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCoreset {
    pub points: GridDataset,
    pub weights: Vec<f64>,
    /// Position of each point in the source dataset, ascending.
    pub source_indices: Vec<usize>,
    pub source_n: usize,
    pub epsilon: f64,
}

impl WeightedCoreset {
    /// Every point with weight 1.
    pub fn identity(data: &GridDataset, eps: f64) -> Result<Self> {
        validate_epsilon(eps)?;
        Ok(Self {
            points: data.clone(),
            weights: vec![1.0; data.len()],
            source_indices: (0..data.len()).collect(),
            source_n: data.len(),
            epsilon: eps,
        })
    }

    pub fn new(
        points: GridDataset,
        weights: Vec<f64>,
        source_indices: Vec<usize>,
        source_n: usize,
        epsilon: f64,
    ) -> Result<Self> {
        validate_weights(&weights)?;
        if weights.len() != points.len() || source_indices.len() != points.len() {
            return Err(crate::Error::DimensionMismatch {
                expected: points.len(),
                got: weights.len().min(source_indices.len()),
            });
        }
        if points.len() > source_n {
            return Err(invalid("source_n", "coreset larger than its source"));
        }
        Ok(Self {
            points,
            weights,
            source_indices,
            source_n,
            epsilon,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    pub fn weighted_cost(&self, centers: &CenterSet, z: Power) -> Result<f64> {
        weighted_cost(&self.points, &self.weights, centers, z)
    }

    /// Whether `Σw ∈ (1 ± 4ε)·source_n` (open interval).
    pub fn weight_sum_check(&self) -> bool {
        let n = self.source_n as f64;
        let s = self.weight_sum();
        let slack = 4.0 * self.epsilon * n;
        if self.epsilon == 0.0 {
            return s == n;
        }
        (s - n).abs() < slack
    }
}

pub fn weight_sum_check(coreset: &WeightedCoreset) -> bool {
    coreset.weight_sum_check()
}

/// Builds a coreset with default sampling constants.
pub fn build_coreset(
    data: &GridDataset,
    k: usize,
    z: Power,
    eps: f64,
    method: CoresetMethod,
    seed: u64,
) -> Result<WeightedCoreset> {
    match method {
        CoresetMethod::Identity => WeightedCoreset::identity(data, eps),
        CoresetMethod::Sensitivity => {
            let ones = vec![1.0; data.len()];
            sensitivity_coreset(data, &ones, data.len(), k, z, eps, SamplingParams::default(), seed)
        }
    }
}

/// Importance sampling over a (possibly weighted) point set.
///
/// Each draw picks `p` with probability `q_p = ½·w_p·cost_p/Σ w·cost + ½·w_p/W`
/// against approximate centers, and a drawn point receives `w_p/(m·q_p)`.
/// Repeated draws of the same point are merged, so the output is sorted by
/// source index with no duplicates.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_coreset(
    data: &GridDataset,
    weights: &[f64],
    source_n: usize,
    k: usize,
    z: Power,
    eps: f64,
    params: SamplingParams,
    seed: u64,
) -> Result<WeightedCoreset> {
    validate_epsilon(eps)?;
    validate_weights(weights)?;
    if data.is_empty() {
        return Err(crate::Error::Empty("dataset"));
    }
    let approx = approx_centers_weighted(data, weights, k, z, derive_seed(seed, 1))?;
    let centers = approx.center_set();
    let n = data.len();

    let costs: Vec<f64> = (0..n)
        .map(|i| weights[i] * z.pow_from_squared(nearest_center(data, i, &centers).1))
        .collect();
    let total_cost = pairwise_sum(&costs);
    let total_weight = pairwise_sum(weights);
    if total_weight == 0.0 {
        return Err(invalid("weights", "total weight is zero"));
    }
    let probs: Vec<f64> = (0..n)
        .map(|i| {
            let uniform = 0.5 * weights[i] / total_weight;
            if total_cost > 0.0 {
                uniform + 0.5 * costs[i] / total_cost
            } else {
                2.0 * uniform
            }
        })
        .collect();

    let m = params.sample_size(n, data.dim(), k, eps);
    let cdf = InverseCdf::new(&probs).expect("total probability is positive");
    let mut rng = generator(derive_seed(seed, 2));
    let mut acc = vec![0.0; n];
    for _ in 0..m {
        let i = cdf.sample(&mut rng);
        acc[i] += weights[i] / (m as f64 * probs[i]);
    }
    let picked: Vec<usize> = (0..n).filter(|&i| acc[i] > 0.0).collect();
    WeightedCoreset::new(
        data.select(&picked),
        picked.iter().map(|&i| acc[i]).collect(),
        picked,
        source_n,
        eps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cost;
    use rand::Rng;

    fn random_grid(n: usize, d: usize, delta: u64, seed: u64) -> GridDataset {
        let mut rng = generator(seed);
        let coords = (0..n * d).map(|_| rng.random_range(1..=delta)).collect();
        GridDataset::new(d, delta, coords).unwrap()
    }

    #[test]
    fn distinct_points_are_recovered() {
        let data = GridDataset::new(2, 50, vec![1, 1, 40, 40, 20, 5]).unwrap();
        let ac = approx_centers(&data, 3, Power::TWO, 9).unwrap();
        let mut idx = ac.indices.clone();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2]);
        assert!(!ac.duplicate_warning);
        assert_eq!(cost(&data, &ac.center_set(), Power::TWO).unwrap(), 0.0);
    }

    #[test]
    fn single_point_repeats() {
        let data = GridDataset::new(2, 8, vec![3, 4]).unwrap();
        let ac = approx_centers(&data, 3, Power::ONE, 1).unwrap();
        assert_eq!(ac.indices, vec![0, 0, 0]);
        assert!(ac.duplicate_warning);
    }

    #[test]
    fn centers_are_members_and_deterministic() {
        let data = random_grid(120, 3, 64, 4);
        let a = approx_centers(&data, 4, Power::TWO, 77).unwrap();
        let b = approx_centers(&data, 4, Power::TWO, 77).unwrap();
        assert_eq!(a, b);
        for (j, &i) in a.indices.iter().enumerate() {
            assert_eq!(a.points.point(j), data.point(i));
        }
    }

    #[test]
    fn identity_coreset_is_exact() {
        let data = random_grid(40, 2, 16, 2);
        let cs = build_coreset(&data, 2, Power::TWO, 0.1, CoresetMethod::Identity, 0).unwrap();
        assert_eq!(cs.weight_sum(), 40.0);
        assert!(cs.weight_sum_check());
        let c = CenterSet::from_points(&[vec![3.0, 3.0], vec![12.5, 9.0]]).unwrap();
        assert_eq!(
            cs.weighted_cost(&c, Power::TWO).unwrap(),
            cost(&data, &c, Power::TWO).unwrap()
        );
    }

    #[test]
    fn doubled_weights_fail_check() {
        let data = random_grid(10, 2, 16, 3);
        let mut cs = WeightedCoreset::identity(&data, 0.1).unwrap();
        cs.weights.iter_mut().for_each(|w| *w *= 2.0);
        assert!(!cs.weight_sum_check());
    }

    #[test]
    fn sample_size_formula() {
        let p = SamplingParams::default();
        // 1·2/0.25·(3 + log2 100) = 8·9.6439 = 77.15 → 78
        assert_eq!(p.sample_size(10_000, 3, 2, 0.5), 78);
        assert_eq!(p.sample_size(50, 3, 2, 0.5), 50);
    }

    #[test]
    fn sensitivity_coreset_shape() {
        let data = random_grid(500, 3, 128, 5);
        let params = SamplingParams {
            c0: 0.05,
            failure_prob: 0.01,
        };
        let ones = vec![1.0; data.len()];
        let cs = sensitivity_coreset(&data, &ones, 500, 3, Power::TWO, 0.3, params, 8).unwrap();
        assert!(cs.len() < 500);
        assert!(cs.source_indices.windows(2).all(|w| w[0] < w[1]));
        assert!(cs.weights.iter().all(|&w| w > 0.0));
        for (j, &i) in cs.source_indices.iter().enumerate() {
            assert_eq!(cs.points.point(j), data.point(i));
        }
        assert!(cs.weight_sum_check());
    }

    #[test]
    fn method_parse() {
        assert_eq!("identity".parse::<CoresetMethod>().unwrap(), CoresetMethod::Identity);
        assert!("bogus".parse::<CoresetMethod>().is_err());
    }
}
