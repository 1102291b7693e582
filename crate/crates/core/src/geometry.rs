//! Datasets, center sets and exact (k,z)-clustering cost.
//!
//! Costs are summed with a fixed pairwise (tree) order, so the same inputs
//! always produce the same bits regardless of how the caller iterates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// The distance power `z`, held as an exact positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Power {
    num: u32,
    den: u32,
}

impl Power {
    pub const ONE: Power = Power { num: 1, den: 1 };
    pub const TWO: Power = Power { num: 2, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(invalid("z", format!("{num}/{den} is not a positive rational")));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(z: u32) -> Result<Self> {
        Self::new(z, 1)
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `‖v‖^z` given `‖v‖²`.
    #[inline]
    pub fn pow_from_squared(self, sq: f64) -> f64 {
        match (self.num, self.den) {
            (2, 1) => sq,
            (1, 1) => sq.sqrt(),
            _ => {
                if sq == 0.0 {
                    0.0
                } else {
                    (0.5 * self.value() * sq.ln()).exp()
                }
            }
        }
    }

    /// `x^z` for `x ≥ 0`.
    #[inline]
    pub fn pow(self, x: f64) -> f64 {
        match (self.num, self.den) {
            (1, 1) => x,
            (2, 1) => x * x,
            _ => {
                if x == 0.0 {
                    0.0
                } else {
                    (self.value() * x.ln()).exp()
                }
            }
        }
    }
}

impl fmt::Display for Power {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Power {
    type Err = Error;

    /// Accepts `3`, `3/2` or a finite decimal such as `1.5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || invalid("z", format!("cannot parse {s:?}"));
        if let Some((a, b)) = s.split_once('/') {
            let num = a.trim().parse::<u32>().map_err(|_| bad())?;
            let den = b.trim().parse::<u32>().map_err(|_| bad())?;
            return Power::new(num, den);
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.len() > 6 || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let int: u32 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            let scale = 10u32.pow(frac.len() as u32);
            let frac_v: u32 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
            let num = int
                .checked_mul(scale)
                .and_then(|v| v.checked_add(frac_v))
                .ok_or_else(bad)?;
            return Power::new(num, scale);
        }
        Power::new(s.parse::<u32>().map_err(|_| bad())?, 1)
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Parameters of one sketching problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub z: Power,
    pub delta: u64,
    pub epsilon: f64,
}

impl ProblemConfig {
    pub fn new(n: usize, d: usize, k: usize, z: Power, delta: u64, epsilon: f64) -> Result<Self> {
        let cfg = Self {
            n,
            d,
            k,
            z,
            delta,
            epsilon,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.k == 0 {
            return Err(invalid("n/d/k", "counts must be at least 1"));
        }
        if self.z.value() < 1.0 {
            return Err(invalid("z", "must be at least 1"));
        }
        if self.delta < 2 {
            return Err(invalid("delta", "grid side must be at least 2"));
        }
        validate_epsilon(self.epsilon)
    }
}

pub(crate) fn validate_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("epsilon", format!("{eps} not in (0,1)")));
    }
    Ok(())
}

/// Read access to a finite set of points in `R^d`.
pub trait PointCloud {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn coord(&self, point: usize, axis: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sq_dist_to(&self, point: usize, target: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (axis, &t) in target.iter().enumerate() {
            let diff = self.coord(point, axis) - t;
            acc += diff * diff;
        }
        acc
    }

    fn point_vec(&self, point: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.coord(point, a)).collect()
    }
}

/// Points with integer coordinates in `[1, Δ]^d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDataset {
    dim: usize,
    delta: u64,
    coords: Vec<u64>,
}

impl GridDataset {
    pub fn new(dim: usize, delta: u64, coords: Vec<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        if delta < 2 {
            return Err(invalid("delta", "grid side must be at least 2"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(invalid(
                "coords",
                format!("{} values is not a multiple of d={dim}", coords.len()),
            ));
        }
        if let Some(pos) = coords.iter().position(|&c| c < 1 || c > delta) {
            return Err(Error::OffGrid {
                point: pos / dim,
                value: coords[pos] as i64,
                delta,
            });
        }
        Ok(Self { dim, delta, coords })
    }

    pub fn from_points(delta: u64, points: &[Vec<u64>]) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).ok_or(Error::Empty("points"))?;
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, delta, coords)
    }

    pub fn delta(&self) -> u64 {
        self.delta
    }

    pub fn point(&self, i: usize) -> &[u64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[u64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Subset by point index, in the given order.
    pub fn select(&self, indices: &[usize]) -> GridDataset {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        GridDataset {
            dim: self.dim,
            delta: self.delta,
            coords,
        }
    }

    pub fn to_real(&self) -> RealDataset {
        RealDataset {
            dim: self.dim,
            coords: self.coords.iter().map(|&c| c as f64).collect(),
        }
    }
}

impl PointCloud for GridDataset {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    fn coord(&self, point: usize, axis: usize) -> f64 {
        self.coords[point * self.dim + axis] as f64
    }
}

/// Points with finite real coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataset {
    dim: usize,
    coords: Vec<f64>,
}

impl RealDataset {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(invalid(
                "coords",
                format!("{} values is not a multiple of d={dim}", coords.len()),
            ));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index: pos / dim });
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).ok_or(Error::Empty("points"))?;
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    /// Columns of a `d × n` matrix as `n` points.
    pub fn from_columns(m: &nalgebra::DMatrix<f64>) -> Result<Self> {
        // nalgebra stores column-major, so the raw slice is already point-major.
        Self::new(m.nrows(), m.as_slice().to_vec())
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

impl PointCloud for RealDataset {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    fn coord(&self, point: usize, axis: usize) -> f64 {
        self.coords[point * self.dim + axis]
    }
}

/// A multiset of centers; duplicates are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSet {
    dim: usize,
    coords: Vec<f64>,
}

impl CenterSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        let inner = RealDataset::new(dim, coords)?;
        if inner.is_empty() {
            return Err(Error::Empty("center set"));
        }
        Ok(Self {
            dim,
            coords: inner.coords,
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let inner = RealDataset::from_points(points)?;
        Self::new(inner.dim, inner.coords)
    }

    pub fn k(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Union with another set of the same dimension.
    pub fn union(&self, other: &CenterSet) -> Result<CenterSet> {
        check_dim(self.dim, other.dim)?;
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(CenterSet {
            dim: self.dim,
            coords,
        })
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Pairwise summation with a fixed split rule.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Squared distance to the nearest center, with the index of that center.
/// Ties go to the lowest index.
#[inline]
pub fn nearest_center<P: PointCloud + ?Sized>(points: &P, i: usize, centers: &CenterSet) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.centers().enumerate() {
        let sq = points.sq_dist_to(i, c);
        if sq < best.1 {
            best = (j, sq);
        }
    }
    best
}

/// `dist^z(p_i, C)` for every point.
pub fn point_costs<P: PointCloud + ?Sized>(points: &P, centers: &CenterSet, z: Power) -> Result<Vec<f64>> {
    check_dim(points.dim(), centers.dim())?;
    Ok((0..points.len())
        .map(|i| z.pow_from_squared(nearest_center(points, i, centers).1))
        .collect())
}

/// `cost_z(P, C) = Σ_p min_c ‖p − c‖^z`.
pub fn cost<P: PointCloud + ?Sized>(points: &P, centers: &CenterSet, z: Power) -> Result<f64> {
    Ok(pairwise_sum(&point_costs(points, centers, z)?))
}

/// `Σ_p w(p) · dist^z(p, C)`; zero weights contribute exactly zero.
pub fn weighted_cost<P: PointCloud + ?Sized>(
    points: &P,
    weights: &[f64],
    centers: &CenterSet,
    z: Power,
) -> Result<f64> {
    check_dim(points.dim(), centers.dim())?;
    check_dim(points.len(), weights.len())?;
    validate_weights(weights)?;
    let terms: Vec<f64> = (0..points.len())
        .map(|i| {
            let w = weights[i];
            if w == 0.0 {
                0.0
            } else {
                w * z.pow_from_squared(nearest_center(points, i, centers).1)
            }
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

pub(crate) fn validate_weights(weights: &[f64]) -> Result<()> {
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if value < 0.0 {
            return Err(Error::NegativeWeight { index, value });
        }
    }
    Ok(())
}

/// Index of the closest center for every point (ties to the lowest index).
pub fn nearest_assignment<P: PointCloud + ?Sized>(points: &P, centers: &CenterSet) -> Result<Vec<usize>> {
    check_dim(points.dim(), centers.dim())?;
    Ok((0..points.len())
        .map(|i| nearest_center(points, i, centers).0)
        .collect())
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Evaluates both relaxed triangle inequalities for the triple:
///
/// ```text
/// d12^z ≤ (1+ε)^(z−1) d13^z + ((1+ε)/ε)^(z−1) d23^z
/// |d12^z − d13^z| ≤ ε d13^z + ((z+ε)/ε)^(z−1) d23^z
/// ```
///
/// A relative slack of `1e-12` absorbs rounding in the equality cases.
pub fn check_relaxed_triangle(p1: &[f64], p2: &[f64], p3: &[f64], z: Power, eps: f64) -> bool {
    assert!(eps > 0.0, "eps must be positive");
    let zf = z.value();
    assert!(zf >= 1.0, "z must be at least 1");
    let d12 = z.pow(euclid(p1, p2));
    let d13 = z.pow(euclid(p1, p3));
    let d23 = z.pow(euclid(p2, p3));
    let slack = |rhs: f64| 1e-12 * rhs.max(d12).max(d13) + 1e-300;

    let rhs1 = (1.0 + eps).powf(zf - 1.0) * d13 + ((1.0 + eps) / eps).powf(zf - 1.0) * d23;
    let rhs2 = eps * d13 + ((zf + eps) / eps).powf(zf - 1.0) * d23;
    d12 <= rhs1 + slack(rhs1) && (d12 - d13).abs() <= rhs2 + slack(rhs2)
}
