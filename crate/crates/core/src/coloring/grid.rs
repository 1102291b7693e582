//! Moving unit-ball instances onto the integer grid, and tiling several
//! instances into one larger grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{cost, nearest_assignment, CenterSet, GridDataset, PointCloud, Power, RealDataset};

/// `⌈Δ/2⌉`.
fn half_up(delta: u64) -> u64 {
    delta.div_ceil(2)
}

fn make_odd(v: u64) -> u64 {
    if v.is_multiple_of(2) {
        v + 1
    } else {
        v
    }
}

/// Grid side for `z = 2`: `⌈10√d/ε⌉`, bumped to the next odd integer.
pub fn default_delta_z2(d: usize, eps: f64) -> u64 {
    make_odd((10.0 * (d as f64).sqrt() / eps).ceil() as u64).max(3)
}

/// Grid side for general `z`: `⌈3072·2^{z/2}·√d/(z²ε)⌉`, made odd.
pub fn default_delta_tilde(d: usize, z: Power, eps: f64) -> u64 {
    let zf = z.value();
    make_odd((3072.0 * 2f64.powf(zf / 2.0) * (d as f64).sqrt() / (zf * zf * eps)).ceil() as u64).max(3)
}

/// Grid side used by the lower-bound pipeline for power `z`.
pub fn default_delta(d: usize, z: Power, eps: f64) -> u64 {
    if z == Power::TWO {
        default_delta_z2(d, eps)
    } else {
        default_delta_tilde(d, z, eps)
    }
}

/// `(Δ/2)·x + ⌈Δ/2⌉·1`, the exact image of a point or center.
pub fn scale_point(x: &[f64], delta: u64) -> Vec<f64> {
    let h = delta as f64 / 2.0;
    let shift = half_up(delta) as f64;
    x.iter().map(|v| h * v + shift).collect()
}

/// Image of every center of `centers`.
pub fn scale_centers(centers: &CenterSet, delta: u64) -> CenterSet {
    let coords = centers.centers().flat_map(|c| scale_point(c, delta)).collect();
    CenterSet::new(centers.dim(), coords).expect("scaled centers are finite")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundedInstance {
    pub grid: GridDataset,
    /// Largest `‖p̂ − p̃‖₂` where `p̂` is the exact scaled point.
    pub max_displacement: f64,
    /// Largest per-point displacement caused by clamping alone.
    pub max_clamp_displacement: f64,
    /// Number of coordinates that had to be clamped.
    pub clamped: usize,
}

/// `p̃ = clamp(⌈(Δ/2)·p⌉ + ⌈Δ/2⌉·1, 1, Δ)` for points of norm at most 1.
pub fn round_and_scale(points: &RealDataset, delta: u64) -> Result<RoundedInstance> {
    if delta < 3 || delta.is_multiple_of(2) {
        return Err(invalid("delta", format!("{delta} must be an odd integer ≥ 3")));
    }
    let h = delta as f64 / 2.0;
    let shift = half_up(delta) as i64;
    let mut coords = Vec::with_capacity(points.coords().len());
    let mut max_displacement: f64 = 0.0;
    let mut max_clamp: f64 = 0.0;
    let mut clamped = 0;
    for (i, p) in points.points().enumerate() {
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 + 1e-9 {
            return Err(invalid("points", format!("point {i} has norm {norm} > 1")));
        }
        let (mut disp, mut clamp_disp) = (0.0, 0.0);
        for &v in p {
            let exact = h * v + shift as f64;
            let raw = (h * v).ceil() as i64 + shift;
            let kept = raw.clamp(1, delta as i64);
            if kept != raw {
                clamped += 1;
                clamp_disp += ((kept - raw) as f64).powi(2);
            }
            disp += (kept as f64 - exact).powi(2);
            coords.push(kept as u64);
        }
        max_displacement = max_displacement.max(disp.sqrt());
        max_clamp = max_clamp.max(clamp_disp.sqrt());
    }
    Ok(RoundedInstance {
        grid: GridDataset::new(points.dim(), delta, coords)?,
        max_displacement,
        max_clamp_displacement: max_clamp,
        clamped,
    })
}

/// Worst `|‖p̂ − c̄‖² − ‖p̃ − c̄‖²|` over all points and centers, where `p̂`
/// and `c̄` are exact scaled images and `p̃` the rounded point.
pub fn max_rounding_perturbation(
    original: &RealDataset,
    rounded: &GridDataset,
    centers: &CenterSet,
    delta: u64,
) -> Result<f64> {
    if original.len() != rounded.len() || original.dim() != rounded.dim() {
        return Err(Error::DimensionMismatch {
            expected: original.len(),
            got: rounded.len(),
        });
    }
    let scaled = scale_centers(centers, delta);
    let mut worst: f64 = 0.0;
    for i in 0..original.len() {
        let p_hat = scale_point(original.point(i), delta);
        for c in scaled.centers() {
            let exact: f64 = p_hat.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            let rounded_sq = rounded.sq_dist_to(i, c);
            worst = worst.max((exact - rounded_sq).abs());
        }
    }
    Ok(worst)
}

/// The budget `2Δ√d + d` for [`max_rounding_perturbation`].
pub fn perturbation_budget(delta: u64, d: usize) -> f64 {
    2.0 * delta as f64 * (d as f64).sqrt() + d as f64
}

/// One `k = 2` instance to be placed in a tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileCopy {
    pub p: GridDataset,
    pub q: GridDataset,
    /// The two centers used against this copy, in copy coordinates.
    pub centers: CenterSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiledInstance {
    /// Per-copy integer offset added to every coordinate.
    pub offsets: Vec<Vec<u64>>,
    pub copies: Vec<TileCopy>,
    pub p: GridDataset,
    pub q: GridDataset,
    pub centers: CenterSet,
    pub total_k: usize,
    pub delta_tilde: u64,
    pub delta: u64,
    /// Copy index of every point (same for `p` and `q`).
    pub point_copy: Vec<usize>,
}

/// Smallest `m` with `m^d ≥ k`, i.e. `⌈k^{1/d}⌉` without rounding error.
pub fn integer_root_ceil(k: u64, d: u32) -> u64 {
    let mut m = 1u64;
    while m.checked_pow(d).is_some_and(|v| v < k) {
        m += 1;
    }
    m
}

/// Places `k/2` copies in distinct cells of side `4Δ̃` (row-major, first axis
/// slowest), each copy centered in its cell. The global side is
/// `Δ = 4⌈k^{1/d}⌉Δ̃`.
pub fn tile_instances(copies: &[TileCopy], k: usize, delta_tilde: u64) -> Result<TiledInstance> {
    if k == 0 || !k.is_multiple_of(2) {
        return Err(invalid("k", "must be a positive even number"));
    }
    if copies.len() != k / 2 {
        return Err(invalid("copies", format!("need k/2 = {} copies, got {}", k / 2, copies.len())));
    }
    let d = copies[0].p.dim();
    for c in copies {
        if c.p.dim() != d || c.q.dim() != d || c.centers.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.p.dim(),
            });
        }
        if c.p.len() != copies[0].p.len() || c.q.len() != c.p.len() {
            return Err(invalid("copies", "all copies need the same point count"));
        }
        if c.centers.k() != 2 {
            return Err(invalid("copies", "each copy carries exactly two centers"));
        }
        if c.p.delta() > delta_tilde || c.q.delta() > delta_tilde {
            return Err(invalid("copies", "copy grid exceeds Δ̃"));
        }
    }
    let per_axis = integer_root_ceil(k as u64, d as u32);
    let cell = 4 * delta_tilde;
    let delta = per_axis
        .checked_mul(cell)
        .ok_or_else(|| Error::Capacity("global grid side overflows".into()))?;
    let capacity = per_axis.checked_pow(d as u32).unwrap_or(u64::MAX);
    if capacity < copies.len() as u64 {
        return Err(Error::Capacity(format!(
            "{capacity} cells cannot hold {} copies",
            copies.len()
        )));
    }
    let inset = (cell - delta_tilde) / 2;

    let mut offsets = Vec::with_capacity(copies.len());
    for idx in 0..copies.len() as u64 {
        let mut digits = vec![0u64; d];
        let mut rest = idx;
        for axis in (0..d).rev() {
            digits[axis] = rest % per_axis;
            rest /= per_axis;
        }
        offsets.push(digits.iter().map(|&g| g * cell + inset).collect::<Vec<u64>>());
    }

    let shift = |data: &GridDataset, off: &[u64]| -> Vec<u64> {
        data.points().flat_map(|p| p.iter().zip(off).map(|(a, o)| a + o)).collect()
    };
    let mut p_coords = Vec::new();
    let mut q_coords = Vec::new();
    let mut center_coords = Vec::new();
    let mut point_copy = Vec::new();
    for (i, (copy, off)) in copies.iter().zip(&offsets).enumerate() {
        p_coords.extend(shift(&copy.p, off));
        q_coords.extend(shift(&copy.q, off));
        for c in copy.centers.centers() {
            center_coords.extend(c.iter().zip(off).map(|(a, &o)| a + o as f64));
        }
        point_copy.extend(std::iter::repeat_n(i, copy.p.len()));
    }

    Ok(TiledInstance {
        p: GridDataset::new(d, delta, p_coords)?,
        q: GridDataset::new(d, delta, q_coords)?,
        centers: CenterSet::new(d, center_coords)?,
        offsets,
        copies: copies.to_vec(),
        total_k: k,
        delta_tilde,
        delta,
        point_copy,
    })
}

impl TiledInstance {
    /// Points of `p` or `q` whose nearest center belongs to another copy.
    pub fn cross_copy_assignments(&self) -> Result<usize> {
        let mut count = 0;
        for data in [&self.p, &self.q] {
            for (i, c) in nearest_assignment(data, &self.centers)?.into_iter().enumerate() {
                if c / 2 != self.point_copy[i] {
                    count += 1;
                }
            }
        }
        Ok(count)
    }

    /// Smallest distance between a point of one copy and a center of another.
    pub fn min_cross_copy_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for data in [&self.p, &self.q] {
            for i in 0..data.len() {
                for (l, c) in self.centers.centers().enumerate() {
                    if l / 2 != self.point_copy[i] {
                        best = best.min(data.sq_dist_to(i, c).sqrt());
                    }
                }
            }
        }
        best
    }

    /// `cost_z(P, C) − cost_z(Q, C)` on the tiled instance.
    pub fn total_gap(&self, z: Power) -> Result<f64> {
        Ok(cost(&self.p, &self.centers, z)? - cost(&self.q, &self.centers, z)?)
    }

    /// Per-copy gaps against each copy's own two centers.
    pub fn copy_gaps(&self, z: Power) -> Result<Vec<f64>> {
        self.copies
            .iter()
            .map(|c| Ok(cost(&c.p, &c.centers, z)? - cost(&c.q, &c.centers, z)?))
            .collect()
    }
}
