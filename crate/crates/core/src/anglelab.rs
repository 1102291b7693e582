//! Random subspaces and the principal angles between them.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::RealDataset;
use crate::rng::{derive_seed, generator};

const ORTHO_TOL: f64 = 1e-10;

/// A `d × n` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    matrix: DMatrix<f64>,
}

impl OrthonormalBasis {
    /// Wraps a matrix after checking `‖BᵀB − I‖_max ≤ 1e-10` and `n ≤ d`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() == 0 {
            return Err(Error::Empty("basis"));
        }
        if matrix.ncols() > matrix.nrows() {
            return Err(invalid(
                "basis",
                format!("{} columns exceed dimension {}", matrix.ncols(), matrix.nrows()),
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: 0 });
        }
        let dev = orthonormality_defect(&matrix);
        if dev > ORTHO_TOL {
            return Err(invalid("basis", format!("columns not orthonormal (defect {dev:.3e})")));
        }
        Ok(Self { matrix })
    }

    /// Orthonormalizes the columns of `m` by QR, fixing signs so that `R` has
    /// a positive diagonal.
    pub fn orthonormalize(m: DMatrix<f64>) -> Result<Self> {
        let n = m.ncols();
        if n > m.nrows() {
            return Err(invalid("basis", "more columns than rows"));
        }
        let qr = m.qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..n {
            if r[(j, j)] == 0.0 {
                return Err(invalid("basis", "columns are linearly dependent"));
            }
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Self::new(q)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.matrix.ncols()
    }

    /// Columns as points.
    pub fn to_dataset(&self) -> RealDataset {
        RealDataset::from_columns(&self.matrix).expect("basis entries are finite")
    }
}

pub fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = generator(seed);
    // Filled column by column, so the draw order is fixed.
    DMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)))
}

/// A uniformly random `n`-dimensional subspace of `ℝ^d`.
pub fn sample_haar_basis(d: usize, n: usize, seed: u64) -> Result<OrthonormalBasis> {
    if n == 0 || n > d {
        return Err(invalid("n", format!("need 1 ≤ n ≤ d, got n={n}, d={d}")));
    }
    OrthonormalBasis::orthonormalize(gaussian_matrix(d, n, seed))
}

/// Uniformly random `n`-dimensional subspace of the orthogonal complement of
/// `span(p)`.
pub fn sample_complement_basis(p: &OrthonormalBasis, n: usize, seed: u64) -> Result<OrthonormalBasis> {
    let d = p.dim();
    if p.rank() + n > d {
        return Err(invalid("n", "complement too small"));
    }
    let mut g = gaussian_matrix(d, n, seed);
    let pm = p.matrix();
    for _ in 0..2 {
        let proj = pm * (pm.transpose() * &g);
        g -= proj;
    }
    OrthonormalBasis::orthonormalize(g)
}

/// Two bases whose spans are exactly orthogonal: a Haar `d × 2n` basis split
/// into halves.
pub fn orthogonal_pair(d: usize, n: usize, seed: u64) -> Result<(OrthonormalBasis, OrthonormalBasis)> {
    if 2 * n > d {
        return Err(invalid("d", "orthogonal pair needs d ≥ 2n"));
    }
    let full = sample_haar_basis(d, 2 * n, seed)?.into_matrix();
    let p = OrthonormalBasis::new(full.columns(0, n).into_owned())?;
    let q = OrthonormalBasis::new(full.columns(n, n).into_owned())?;
    Ok((p, q))
}

/// Two planes in `ℝ³` sharing the `e₁` axis and tilted by 60° around it:
/// `P = span(e₁, e₂)`, `Q = span(e₁, cos60°·e₂ + sin60°·e₃)`. Their principal
/// angles are `(0, π/3)`.
pub fn tilted_plane_pair() -> (OrthonormalBasis, OrthonormalBasis) {
    let (c, s) = (std::f64::consts::FRAC_PI_3.cos(), std::f64::consts::FRAC_PI_3.sin());
    let p = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let q = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, c, s]);
    (
        OrthonormalBasis::new(p).expect("orthonormal"),
        OrthonormalBasis::new(q).expect("orthonormal"),
    )
}

/// A pair with `σ₁(PᵀQ)` equal to `sigma_max`.
///
/// `Q` spans `Q⊥ + t·P·M` where `Q⊥ ⟂ P` is random, `M` is a random `n × n`
/// matrix of unit spectral norm and `t = σ/√(1−σ²)`; the cosines of the
/// principal angles are then `t·m_i/√(1 + t²m_i²)` for the singular values
/// `m_i` of `M`, so the largest is exactly `sigma_max`.
pub fn perturbed_pair(
    d: usize,
    n: usize,
    sigma_max: f64,
    seed: u64,
) -> Result<(OrthonormalBasis, OrthonormalBasis)> {
    if !(0.0..1.0).contains(&sigma_max) {
        return Err(invalid("sigma_max", "must lie in [0,1)"));
    }
    if 2 * n > d {
        return Err(invalid("d", "perturbed pair needs d ≥ 2n"));
    }
    let p = sample_haar_basis(d, n, derive_seed(seed, 0))?;
    let q_perp = sample_complement_basis(&p, n, derive_seed(seed, 1))?;
    let mut m = gaussian_matrix(n, n, derive_seed(seed, 2));
    let norm = m.clone().svd(false, false).singular_values.max();
    m /= norm;
    let t = sigma_max / (1.0 - sigma_max * sigma_max).sqrt();
    let q = q_perp.matrix() + p.matrix() * (m * t);
    Ok((p, OrthonormalBasis::orthonormalize(q)?))
}

/// `U = PᵀQ` together with its row norms.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProductMatrix {
    pub u: DMatrix<f64>,
    pub row_norms: Vec<f64>,
}

impl InnerProductMatrix {
    pub fn new(u: DMatrix<f64>) -> Self {
        let row_norms = (0..u.nrows()).map(|i| u.row(i).norm()).collect();
        Self { u, row_norms }
    }

    pub fn between(p: &OrthonormalBasis, q: &OrthonormalBasis) -> Result<Self> {
        check_pair(p, q)?;
        Ok(Self::new(p.matrix().transpose() * q.matrix()))
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.u.norm_squared()
    }
}

fn check_pair(p: &OrthonormalBasis, q: &OrthonormalBasis) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    if p.rank() != q.rank() {
        return Err(Error::DimensionMismatch {
            expected: p.rank(),
            got: q.rank(),
        });
    }
    Ok(())
}

/// Cosines (descending) and angles (ascending) between two subspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalAngles {
    pub sigmas: Vec<f64>,
    pub thetas: Vec<f64>,
}

impl PrincipalAngles {
    /// The `i`-th smallest angle, 1-based.
    pub fn theta(&self, i: usize) -> f64 {
        self.thetas[i - 1]
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigmas[0]
    }
}

/// Principal angles from the SVD of `PᵀQ`.
///
/// Cosines near 1 lose resolution in `arccos`, so small angles are instead
/// read from the singular values of `(I − PPᵀ)Q`, which are their sines.
pub fn principal_angles(p: &OrthonormalBasis, q: &OrthonormalBasis) -> Result<PrincipalAngles> {
    check_pair(p, q)?;
    let pt_q = p.matrix().transpose() * q.matrix();
    let residual = q.matrix() - p.matrix() * &pt_q;

    let mut sigmas: Vec<f64> = pt_q
        .svd(false, false)
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    sigmas.sort_by(|a, b| b.total_cmp(a));
    let mut sines: Vec<f64> = residual
        .svd(false, false)
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    sines.sort_by(|a, b| a.total_cmp(b));

    let thetas = sigmas
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| if c * c >= 0.5 { s.asin() } else { c.acos() })
        .collect();
    Ok(PrincipalAngles { sigmas, thetas })
}

/// Threshold constants for the lower-bound argument, with paper defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleThresholds {
    /// Fraction `a`; the angle checked is the `⌈a·n⌉`-th smallest.
    pub a: f64,
    pub cos_star: f64,
    pub theta_star: f64,
    pub row_norm_bound: f64,
    pub outlier_fraction: f64,
}

impl Default for AngleThresholds {
    fn default() -> Self {
        let cos_star = 1e-3 / (4.0 * 2f64.sqrt());
        Self {
            a: 1e-6 / 32.0,
            cos_star,
            theta_star: cos_star.acos(),
            row_norm_bound: 1e-2,
            outlier_fraction: 1e-4 / 16.0,
        }
    }
}

impl AngleThresholds {
    /// Paper defaults with a different angle threshold `θ*`.
    pub fn with_theta_star(theta_star: f64) -> Result<Self> {
        if !(theta_star > 0.0 && theta_star < std::f64::consts::FRAC_PI_2) {
            return Err(invalid("theta_star", "must lie in (0, π/2)"));
        }
        Ok(Self {
            theta_star,
            cos_star: theta_star.cos(),
            ..Self::default()
        })
    }

    /// `⌈a·n⌉`, at least 1.
    pub fn angle_index(&self, n: usize) -> usize {
        ((self.a * n as f64).ceil() as usize).clamp(1, n.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowNormProfile {
    /// Rows with `‖U_i‖² ≤ row_norm_bound`.
    pub small_rows: Vec<usize>,
    pub pass: bool,
}

pub fn row_norm_profile(u: &InnerProductMatrix, thresholds: &AngleThresholds) -> RowNormProfile {
    let small_rows: Vec<usize> = u
        .row_norms
        .iter()
        .enumerate()
        .filter(|(_, &r)| r * r <= thresholds.row_norm_bound)
        .map(|(i, _)| i)
        .collect();
    let need = (1.0 - thresholds.outlier_fraction) * u.n() as f64;
    RowNormProfile {
        pass: small_rows.len() as f64 >= need,
        small_rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub index: usize,
    pub theta_star: f64,
    pub pairs: Vec<PairCheck>,
    pub passed: usize,
}

impl FamilyReport {
    pub fn pass_fraction(&self) -> f64 {
        self.passed as f64 / self.pairs.len() as f64
    }

    pub fn all_pass(&self) -> bool {
        self.passed == self.pairs.len()
    }
}

/// Checks every unordered pair for `θ_index ≥ θ*`. `index` defaults to
/// `⌈a·n⌉`.
pub fn verify_family(
    bases: &[OrthonormalBasis],
    thresholds: &AngleThresholds,
    index: Option<usize>,
) -> Result<FamilyReport> {
    if bases.len() < 2 {
        return Err(invalid("bases", "need at least two bases"));
    }
    let n = bases[0].rank();
    let index = index.unwrap_or_else(|| thresholds.angle_index(n));
    if index == 0 || index > n {
        return Err(invalid("index", format!("{index} not in 1..={n}")));
    }
    let mut pairs = Vec::new();
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            let theta = principal_angles(&bases[i], &bases[j])?.theta(index);
            pairs.push(PairCheck {
                i,
                j,
                theta,
                pass: theta >= thresholds.theta_star,
            });
        }
    }
    let passed = pairs.iter().filter(|p| p.pass).count();
    Ok(FamilyReport {
        index,
        theta_star: thresholds.theta_star,
        pairs,
        passed,
    })
}

/// Empirical distribution summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `(probability, value)` pairs with linear interpolation between order
    /// statistics.
    pub quantiles: Vec<(f64, f64)>,
}

pub const SUMMARY_PROBS: [f64; 9] = [0.001, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 0.999];

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let quantiles = SUMMARY_PROBS.iter().map(|&p| (p, quantile_sorted(&v, p))).collect();
        Self {
            count: v.len(),
            mean: crate::geometry::pairwise_sum(&v) / v.len() as f64,
            min: v[0],
            max: v[v.len() - 1],
            quantiles,
        }
    }

    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles.iter().find(|(q, _)| (q - p).abs() < 1e-12).map(|&(_, v)| v)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleStatistics {
    pub d: usize,
    pub n: usize,
    pub trials: usize,
    pub index: usize,
    pub theta_1: Summary,
    pub theta_index: Summary,
    pub sigma_1: Summary,
}

/// Angles between `trials` independent Haar pairs. Pair `t` uses sub-seeds
/// `2t` and `2t+1` of `seed`.
pub fn angle_statistics(d: usize, n: usize, trials: usize, seed: u64, index: usize) -> Result<AngleStatistics> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    if index == 0 || index > n {
        return Err(invalid("index", format!("{index} not in 1..={n}")));
    }
    let mut t1 = Vec::with_capacity(trials);
    let mut ti = Vec::with_capacity(trials);
    let mut s1 = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let p = sample_haar_basis(d, n, derive_seed(seed, 2 * t))?;
        let q = sample_haar_basis(d, n, derive_seed(seed, 2 * t + 1))?;
        let a = principal_angles(&p, &q)?;
        t1.push(a.theta(1));
        ti.push(a.theta(index));
        s1.push(a.sigma_max());
    }
    Ok(AngleStatistics {
        d,
        n,
        trials,
        index,
        theta_1: Summary::of(&t1),
        theta_index: Summary::of(&ti),
        sigma_1: Summary::of(&s1),
    })
}

/// Unit vector orthogonal to every column of `columns`, taken as the
/// normalized residual of the standard basis vector least covered by their
/// span. `None` when the columns span the whole space.
pub fn orthogonal_unit_vector(columns: &DMatrix<f64>) -> Option<DVector<f64>> {
    let d = columns.nrows();
    // Orthonormal basis of the column span (Gram–Schmidt, applied twice).
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..columns.ncols() {
        let mut v = columns.column(j).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let nv = v.norm();
        if nv > 1e-10 {
            basis.push(v / nv);
        }
    }
    if basis.len() >= d {
        return None;
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for i in 0..d {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let nv = v.norm();
        if best.as_ref().is_none_or(|(bn, _)| nv > *bn + 1e-12) {
            best = Some((nv, v));
        }
    }
    best.filter(|(nv, _)| *nv > 1e-8).map(|(nv, v)| v / nv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    #[test]
    fn haar_is_orthonormal_and_deterministic() {
        let b = sample_haar_basis(50, 7, 3).unwrap();
        assert!(orthonormality_defect(b.matrix()) <= 1e-10);
        assert_eq!(b, sample_haar_basis(50, 7, 3).unwrap());
        assert_ne!(b, sample_haar_basis(50, 7, 4).unwrap());
    }

    #[test]
    fn square_haar_has_unit_determinant() {
        let b = sample_haar_basis(12, 12, 8).unwrap();
        assert!((b.matrix().determinant().abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn identical_and_orthogonal_subspaces() {
        let p = sample_haar_basis(30, 5, 1).unwrap();
        let a = principal_angles(&p, &p).unwrap();
        assert!(a.thetas.iter().all(|&t| t <= 1e-7));
        let (p, q) = orthogonal_pair(30, 5, 2).unwrap();
        let a = principal_angles(&p, &q).unwrap();
        assert!(a.thetas.iter().all(|&t| (t - FRAC_PI_2).abs() <= 1e-7));
    }

    #[test]
    fn figure_one_fixture() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let (c, s) = (FRAC_PI_3.cos(), FRAC_PI_3.sin());
        let y = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, c, s]);
        let a = principal_angles(&OrthonormalBasis::new(x).unwrap(), &OrthonormalBasis::new(y).unwrap()).unwrap();
        assert!(a.thetas[0].abs() <= 1e-9);
        assert!((a.thetas[1] - FRAC_PI_3).abs() <= 1e-9);
    }

    #[test]
    fn perturbed_pair_hits_target_sigma() {
        let target = 1e-3 / (4.0 * 2f64.sqrt());
        let (p, q) = perturbed_pair(60, 10, target, 5).unwrap();
        let a = principal_angles(&p, &q).unwrap();
        assert!((a.sigma_max() - target).abs() < 1e-12);
    }

    #[test]
    fn row_profile_extremes() {
        let t = AngleThresholds::default();
        let zero = InnerProductMatrix::new(DMatrix::zeros(5, 5));
        let r = row_norm_profile(&zero, &t);
        assert_eq!(r.small_rows.len(), 5);
        assert!(r.pass);
        let eye = InnerProductMatrix::new(DMatrix::identity(5, 5));
        let r = row_norm_profile(&eye, &t);
        assert!(r.small_rows.is_empty());
        assert!(!r.pass);
    }

    #[test]
    fn family_checks() {
        let t = AngleThresholds::default();
        assert_eq!(t.angle_index(100), 1);
        let full = sample_haar_basis(24, 12, 9).unwrap().into_matrix();
        let fam: Vec<_> = (0..3)
            .map(|i| OrthonormalBasis::new(full.columns(4 * i, 4).into_owned()).unwrap())
            .collect();
        let rep = verify_family(&fam, &t, None).unwrap();
        assert_eq!(rep.pairs.len(), 3);
        assert!(rep.all_pass());
        let dup = vec![fam[0].clone(), fam[0].clone()];
        assert_eq!(verify_family(&dup, &t, None).unwrap().passed, 0);
    }

    #[test]
    fn statistics_full_space_is_zero() {
        let s = angle_statistics(4, 4, 5, 1, 1).unwrap();
        assert!(s.theta_1.max <= 1e-7);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.125), 1.5);
    }

    #[test]
    fn orthogonal_vector_exists_iff_room() {
        let b = sample_haar_basis(6, 4, 2).unwrap();
        let v = orthogonal_unit_vector(b.matrix()).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((b.matrix().transpose() * &v).amax() < 1e-12);
        let full = sample_haar_basis(4, 4, 2).unwrap();
        assert!(orthogonal_unit_vector(full.matrix()).is_none());
    }
}
