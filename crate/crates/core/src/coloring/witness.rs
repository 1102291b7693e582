//! Center sets certifying that two datasets cannot share a sketch, and the
//! small-`n` and log-log instance families.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{cost, CenterSet, GridDataset, PointCloud, Power};
use crate::rng::generator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationWitness {
    pub centers: CenterSet,
    pub cost_p: f64,
    pub cost_q: f64,
    pub separated: bool,
}

impl SeparationWitness {
    /// `cost_p / cost_q` (infinite when only `cost_q` vanishes).
    pub fn ratio(&self) -> f64 {
        if self.cost_q == 0.0 {
            if self.cost_p == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.cost_p / self.cost_q
        }
    }
}

fn outside_band(a: f64, b: f64, eps: f64) -> bool {
    if b == 0.0 {
        return a > 0.0;
    }
    a <= (1.0 - 3.0 * eps) * b || a >= (1.0 + 3.0 * eps) * b
}

/// Whether either cost lies outside the open band `((1−3ε)x, (1+3ε)x)`
/// around the other. A zero cost is separated from any positive one.
pub fn is_separated(cost_p: f64, cost_q: f64, eps: f64) -> bool {
    outside_band(cost_p, cost_q, eps) || outside_band(cost_q, cost_p, eps)
}

pub fn separation_witness<P: PointCloud + ?Sized, Q: PointCloud + ?Sized>(
    p: &P,
    q: &Q,
    centers: &CenterSet,
    z: Power,
    eps: f64,
) -> Result<SeparationWitness> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let cost_p = cost(p, centers, z)?;
    let cost_q = cost(q, centers, z)?;
    Ok(SeparationWitness {
        centers: centers.clone(),
        cost_p,
        cost_q,
        separated: is_separated(cost_p, cost_q, eps),
    })
}

/// For `n ≤ k`: centers on every point of `P` (padded by repetition) give
/// `cost(P) = 0` while `cost(Q) > 0` whenever `Q ⊄ P`.
pub fn store_everything_witness(p: &GridDataset, q: &GridDataset, k: usize, z: Power, eps: f64) -> Result<SeparationWitness> {
    if p.len() > k {
        return Err(Error::Precondition(format!("n = {} exceeds k = {k}", p.len())));
    }
    if p.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut coords: Vec<f64> = p.to_real().coords().to_vec();
    for _ in p.len()..k {
        coords.extend(p.point(0).iter().map(|&c| c as f64));
    }
    let centers = CenterSet::new(p.dim(), coords)?;
    separation_witness(p, q, &centers, z, eps)
}

/// Number of admissible exponents: `m ∈ {1, …, ⌊log₂(n/k)⌋}`.
pub fn loglog_levels(k: usize, n: usize) -> u32 {
    if k == 0 || n < 2 * k {
        return 0;
    }
    (n / k).ilog2()
}

fn check_anchors(anchors: &[Vec<u64>]) -> Result<usize> {
    let d = anchors.first().map(|a| a.len()).ok_or(Error::Empty("anchors"))?;
    for (i, a) in anchors.iter().enumerate() {
        if a.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: a.len(),
            });
        }
        for b in &anchors[..i] {
            let sq: f64 = a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
            if sq < 100.0 {
                return Err(Error::Precondition("anchors must be at least 10 apart".into()));
            }
        }
    }
    Ok(d)
}

/// For each of the `k/2` anchors, `2n/k − 2^{mᵢ}` points at `pᵢ` and
/// `2^{mᵢ}` points at `pᵢ + e₁`. When `m_choices` is `None` the exponents
/// are drawn uniformly from `seed`.
pub fn loglog_family_instance(
    k: usize,
    n: usize,
    anchors: &[Vec<u64>],
    m_choices: Option<&[u32]>,
    delta: u64,
    seed: u64,
) -> Result<(GridDataset, Vec<u32>)> {
    if k == 0 || !k.is_multiple_of(2) {
        return Err(invalid("k", "must be a positive even number"));
    }
    if n < k || !n.is_multiple_of(k) {
        return Err(invalid("n", "must be a multiple of k, at least k"));
    }
    if anchors.len() != k / 2 {
        return Err(invalid("anchors", format!("need k/2 = {} anchors", k / 2)));
    }
    let d = check_anchors(anchors)?;
    let levels = loglog_levels(k, n);
    if levels == 0 {
        return Err(Error::Capacity("n/k too small for any exponent".into()));
    }
    let ms: Vec<u32> = match m_choices {
        Some(m) => m.to_vec(),
        None => {
            let mut rng = generator(seed);
            (0..k / 2).map(|_| rng.random_range(1..=levels)).collect()
        }
    };
    if ms.len() != k / 2 {
        return Err(invalid("m_choices", "need one exponent per anchor"));
    }
    if let Some(&bad) = ms.iter().find(|&&m| m == 0 || m > levels) {
        return Err(invalid("m_choices", format!("{bad} not in 1..={levels}")));
    }
    let per_anchor = 2 * n / k;
    let mut coords = Vec::with_capacity(n * d);
    for (a, &m) in anchors.iter().zip(&ms) {
        if a.iter().any(|&c| c < 1) || a[0] + 1 > delta || a.iter().any(|&c| c > delta) {
            return Err(Error::Capacity("anchor plus e₁ leaves the grid".into()));
        }
        let moved = 1usize << m;
        for _ in 0..per_anchor - moved {
            coords.extend_from_slice(a);
        }
        for _ in 0..moved {
            coords.push(a[0] + 1);
            coords.extend_from_slice(&a[1..]);
        }
    }
    Ok((GridDataset::new(d, delta, coords)?, ms))
}

/// Centers `pᵢ` and `pᵢ + e₁` for every anchor, except that anchor `l`
/// gets `p_l + 2e₁` in place of `p_l + e₁`; the cost of a family member is
/// then exactly `2^{m_l}`.
pub fn loglog_witness_centers(anchors: &[Vec<u64>], l: usize) -> Result<CenterSet> {
    let d = check_anchors(anchors)?;
    if l >= anchors.len() {
        return Err(invalid("l", "anchor index out of range"));
    }
    let mut coords = Vec::with_capacity(2 * anchors.len() * d);
    for (i, a) in anchors.iter().enumerate() {
        let base: Vec<f64> = a.iter().map(|&c| c as f64).collect();
        coords.extend_from_slice(&base);
        let mut shifted = base;
        shifted[0] += if i == l { 2.0 } else { 1.0 };
        coords.extend_from_slice(&shifted);
    }
    CenterSet::new(d, coords)
}

/// Greedy selection of choice vectors pairwise differing in at least
/// `min_distance` positions; returns the kept indices.
pub fn hamming_filter(choices: &[Vec<u32>], min_distance: usize) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, c) in choices.iter().enumerate() {
        let far = kept.iter().all(|&j| {
            choices[j].iter().zip(c).filter(|(a, b)| a != b).count() >= min_distance
        });
        if far {
            kept.push(i);
        }
    }
    kept
}
