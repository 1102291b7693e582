//! Centers that separate the costs of two orthonormal datasets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::anglelab::{orthogonal_unit_vector, OrthonormalBasis};
use crate::error::{invalid, Error, Result};
use crate::geometry::{cost, CenterSet, PointCloud, Power};

fn concat_columns(p: &OrthonormalBasis, q: &OrthonormalBasis) -> DMatrix<f64> {
    let (d, n) = (p.dim(), p.rank());
    let mut m = DMatrix::zeros(d, 2 * n);
    m.columns_mut(0, n).copy_from(p.matrix());
    m.columns_mut(n, q.rank()).copy_from(q.matrix());
    m
}

fn check_room(p: &OrthonormalBasis, q: &OrthonormalBasis) -> Result<()> {
    if p.dim() != q.dim() || p.rank() != q.rank() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    if p.dim() <= 2 * p.rank() {
        return Err(Error::Precondition(format!(
            "orthogonal completion needs d > 2n (d={}, n={})",
            p.dim(),
            p.rank()
        )));
    }
    Ok(())
}

/// `c = Qζ/√n + ĉ` with `ĉ ⟂ span(P) ∪ span(Q)` filling the norm up to 1.
pub fn adversarial_center(q: &OrthonormalBasis, p: &OrthonormalBasis, zeta: &[i8]) -> Result<DVector<f64>> {
    check_room(p, q)?;
    let n = q.rank();
    if zeta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: zeta.len(),
        });
    }
    let z = DVector::from_iterator(n, zeta.iter().map(|&v| v as f64));
    let c_tilde = q.matrix() * z / (n as f64).sqrt();
    complete_to_unit(c_tilde, &concat_columns(p, q))
}

/// Adds a vector orthogonal to `span` so the result has unit norm.
fn complete_to_unit(c_tilde: DVector<f64>, span: &DMatrix<f64>) -> Result<DVector<f64>> {
    let rest = 1.0 - c_tilde.norm_squared();
    if rest < -1e-12 {
        return Err(Error::Precondition("partial center already exceeds unit norm".into()));
    }
    let mut c = c_tilde;
    if rest > 0.0 {
        let hat = orthogonal_unit_vector(span)
            .ok_or_else(|| Error::Precondition("no vector orthogonal to both spans".into()))?;
        c.axpy(rest.sqrt(), &hat, 1.0);
    }
    Ok(c)
}

/// The two-center set `{c, −c}`.
pub fn antipodal_centers(c: &DVector<f64>) -> CenterSet {
    let d = c.len();
    let mut coords = c.as_slice().to_vec();
    coords.extend(c.iter().map(|v| -v));
    CenterSet::new(d, coords).expect("finite center")
}

/// `cost_z(P, {c,−c}) − cost_z(Q, {c,−c})` for a unit vector `c`.
pub fn cost_gap(p: &OrthonormalBasis, q: &OrthonormalBasis, c: &DVector<f64>, z: Power) -> Result<f64> {
    if (c.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!("center norm {} is not 1", c.norm())));
    }
    if c.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: c.len(),
        });
    }
    let centers = antipodal_centers(c);
    Ok(cost(&p.to_dataset(), &centers, z)? - cost(&q.to_dataset(), &centers, z)?)
}

/// `Σᵢ |⟨bᵢ, c⟩|` over the columns of `b`.
pub fn abs_inner_sum(b: &OrthonormalBasis, c: &DVector<f64>) -> f64 {
    (b.matrix().transpose() * c).iter().map(|v| v.abs()).sum()
}

/// Result of lifting a separating direction to a general power `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCenter {
    pub center: Vec<f64>,
    /// `Σ|⟨pᵢ,ĉ⟩| − Σ|⟨qᵢ,ĉ⟩|` for the input direction.
    pub direction_gap: f64,
    /// Cost gap measured in the direction where the input favors `P`:
    /// `s·(cost_z(Q,{c,−c}) − cost_z(P,{c,−c}))` with `s` the sign of
    /// `direction_gap`.
    pub gap: f64,
    pub bound_leading: f64,
    pub bound_additive: f64,
    pub bound: f64,
    pub meets_bound: bool,
}

/// `(leading, additive)` terms of the power-`z` gap bound:
/// `2^{z/2}·z/8·√n` minus `2^{z/2}·z(1−z/2)/4` (z ≤ 2) or
/// `2^{z/2}·z(z/2−1)/8` (z ≥ 2).
pub fn power_gap_bound(n: usize, z: f64) -> (f64, f64) {
    let scale = 2f64.powf(z / 2.0);
    let leading = scale * z / 8.0 * (n as f64).sqrt();
    let additive = if z <= 2.0 {
        scale * z * (1.0 - z / 2.0) / 4.0
    } else {
        scale * z * (z / 2.0 - 1.0) / 8.0
    };
    (leading, additive)
}

/// Halves the in-span part of `ĉ` and completes orthogonally to a unit
/// vector, so `⟨b, c⟩ = ⟨b, ĉ⟩/2` for every column `b` of `P` and `Q`.
///
/// The direction may favor either dataset; the reported gap is oriented
/// accordingly.
pub fn center_for_power(
    p: &OrthonormalBasis,
    q: &OrthonormalBasis,
    c_hat: &DVector<f64>,
    z: Power,
) -> Result<PowerCenter> {
    check_room(p, q)?;
    if (c_hat.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition("direction must be a unit vector".into()));
    }
    let n = p.rank();
    let direction_gap = abs_inner_sum(p, c_hat) - abs_inner_sum(q, c_hat);
    if direction_gap.abs() <= 0.5 * (n as f64).sqrt() {
        return Err(Error::Precondition(format!(
            "direction gap {direction_gap:.6} does not exceed √n/2 = {:.6}",
            0.5 * (n as f64).sqrt()
        )));
    }
    let span = concat_columns(p, q);
    let basis = span_basis(&span);
    let projected = &basis * (basis.transpose() * c_hat);
    let c = complete_to_unit(projected * 0.5, &span)?;

    let centers = antipodal_centers(&c);
    let raw = cost(&q.to_dataset(), &centers, z)? - cost(&p.to_dataset(), &centers, z)?;
    let gap = raw * direction_gap.signum();
    let (bound_leading, bound_additive) = power_gap_bound(n, z.value());
    let bound = bound_leading - bound_additive;
    Ok(PowerCenter {
        center: c.as_slice().to_vec(),
        direction_gap,
        gap,
        bound_leading,
        bound_additive,
        bound,
        meets_bound: gap >= bound - 1e-9 * bound_leading.max(1.0),
    })
}

/// Orthonormal basis of the column span (modified Gram–Schmidt, twice).
fn span_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for j in 0..m.ncols() {
        let mut v = m.column(j).into_owned();
        for _ in 0..2 {
            for b in &cols {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let nv = v.norm();
        if nv > 1e-10 {
            cols.push(v / nv);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Both second-order bounds on `(1−x)^{z/2}` for `x ∈ [0, 1/2]`:
///
/// ```text
/// z ≤ 2:  1 − (z/2)x − z(1−z/2)x² ≤ (1−x)^{z/2} ≤ 1 − (z/2)x
/// z ≥ 2:  1 − (z/2)x ≤ (1−x)^{z/2} ≤ 1 − (z/2)x + (z/2)(z/2−1)x²
/// ```
///
/// At `z = 2` both chains are checked.
pub fn taylor_bounds_check(x: f64, z: f64) -> Result<bool> {
    if !(0.0..=0.5).contains(&x) {
        return Err(invalid("x", format!("{x} outside [0, 1/2]")));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(invalid("z", "must be positive"));
    }
    let value = (1.0 - x).powf(z / 2.0);
    let linear = 1.0 - z / 2.0 * x;
    let tol = 1e-12;
    let mut ok = true;
    if z <= 2.0 {
        let lower = linear - z * (1.0 - z / 2.0) * x * x;
        ok &= lower <= value + tol && value <= linear + tol;
    }
    if z >= 2.0 {
        let upper = linear + z / 2.0 * (z / 2.0 - 1.0) * x * x;
        ok &= linear <= value + tol && value <= upper + tol;
    }
    Ok(ok)
}

/// A single center (used twice) maximizing the cost ratio between two
/// point sets, searched over the plane through their joint mean spanned by
/// the two centroid directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidWitness {
    pub center: Vec<f64>,
    pub cost_p: f64,
    pub cost_q: f64,
    /// `max(cost_p/cost_q, cost_q/cost_p)` at the returned center.
    pub ratio: f64,
}

impl CentroidWitness {
    pub fn centers(&self) -> CenterSet {
        let mut coords = self.center.clone();
        coords.extend_from_slice(&self.center);
        CenterSet::new(self.center.len(), coords).expect("finite center")
    }
}

struct PlaneProjection {
    base_sq: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PlaneProjection {
    fn new<P: PointCloud + ?Sized>(points: &P, origin: &[f64], e1: &[f64], e2: &[f64]) -> Self {
        let mut out = Self {
            base_sq: Vec::with_capacity(points.len()),
            a: Vec::with_capacity(points.len()),
            b: Vec::with_capacity(points.len()),
        };
        for i in 0..points.len() {
            let (mut sq, mut a, mut b) = (0.0, 0.0, 0.0);
            for j in 0..points.dim() {
                let x = points.coord(i, j) - origin[j];
                sq += x * x;
                a += x * e1[j];
                b += x * e2[j];
            }
            out.base_sq.push(sq);
            out.a.push(a);
            out.b.push(b);
        }
        out
    }

    /// `Σ‖x − (origin + αe₁ + βe₂)‖^z`.
    fn cost(&self, alpha: f64, beta: f64, z: Power) -> f64 {
        let r2 = alpha * alpha + beta * beta;
        let terms: Vec<f64> = (0..self.a.len())
            .map(|i| {
                let sq = (self.base_sq[i] - 2.0 * (alpha * self.a[i] + beta * self.b[i]) + r2).max(0.0);
                z.pow_from_squared(sq)
            })
            .collect();
        crate::geometry::pairwise_sum(&terms)
    }
}

/// Grid search in polar coordinates followed by pattern refinement. All
/// candidate centers are evaluated exactly; the returned costs are
/// recomputed with [`cost`].
pub fn centroid_witness<P: PointCloud + ?Sized, Q: PointCloud + ?Sized>(
    p: &P,
    q: &Q,
    z: Power,
) -> Result<CentroidWitness> {
    let d = p.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.dim(),
        });
    }
    if p.is_empty() || q.is_empty() {
        return Err(Error::Empty("point set"));
    }
    let total = (p.len() + q.len()) as f64;
    let mut origin = vec![0.0; d];
    let mut mean_p = vec![0.0; d];
    let mut mean_q = vec![0.0; d];
    for j in 0..d {
        let sp: f64 = (0..p.len()).map(|i| p.coord(i, j)).sum();
        let sq: f64 = (0..q.len()).map(|i| q.coord(i, j)).sum();
        origin[j] = (sp + sq) / total;
        mean_p[j] = sp / p.len() as f64;
        mean_q[j] = sq / q.len() as f64;
    }
    let u = DVector::from_iterator(d, (0..d).map(|j| mean_p[j] - origin[j]));
    let w = DVector::from_iterator(d, (0..d).map(|j| mean_q[j] - origin[j]));
    let e1 = if u.norm() > 0.0 {
        u.normalize()
    } else {
        let mut e = DVector::zeros(d);
        e[0] = 1.0;
        e
    };
    let mut w_perp = &w - &e1 * e1.dot(&w);
    if w_perp.norm() <= 1e-12 * w.norm().max(1.0) {
        // Degenerate plane: pick any direction orthogonal to e1.
        w_perp = orthogonal_unit_vector(&DMatrix::from_column_slice(d, 1, e1.as_slice()))
            .unwrap_or_else(|| DVector::zeros(d));
    }
    let e2 = if w_perp.norm() > 0.0 {
        w_perp.normalize()
    } else {
        w_perp
    };

    let pp = PlaneProjection::new(p, &origin, e1.as_slice(), e2.as_slice());
    let qp = PlaneProjection::new(q, &origin, e1.as_slice(), e2.as_slice());
    let objective = |alpha: f64, beta: f64| -> f64 {
        let cp = pp.cost(alpha, beta, z);
        let cq = qp.cost(alpha, beta, z);
        if cp == 0.0 && cq == 0.0 {
            1.0
        } else if cp == 0.0 || cq == 0.0 {
            f64::INFINITY
        } else {
            (cp / cq).max(cq / cp)
        }
    };

    let spread = ((pp.base_sq.iter().sum::<f64>() + qp.base_sq.iter().sum::<f64>()) / total).sqrt();
    let radius = 3.0 * spread.max(1e-12);
    const ANGLES: usize = 360;
    const RADII: usize = 120;
    let mut best = (objective(0.0, 0.0), 0.0, 0.0);
    for a in 0..ANGLES {
        let phi = a as f64 / ANGLES as f64 * std::f64::consts::TAU;
        let (s, c) = phi.sin_cos();
        for r in 1..=RADII {
            let rho = radius * r as f64 / RADII as f64;
            let v = objective(rho * c, rho * s);
            if v > best.0 {
                best = (v, rho * c, rho * s);
            }
        }
    }
    let mut step = radius / RADII as f64;
    while step > radius * 1e-9 {
        let mut moved = false;
        for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let (x, y) = (best.1 + dx * step, best.2 + dy * step);
            let v = objective(x, y);
            if v > best.0 {
                best = (v, x, y);
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }

    let center: Vec<f64> = (0..d)
        .map(|j| origin[j] + best.1 * e1[j] + best.2 * e2[j])
        .collect();
    let mut coords = center.clone();
    coords.extend_from_slice(&center);
    let set = CenterSet::new(d, coords)?;
    let cost_p = cost(p, &set, z)?;
    let cost_q = cost(q, &set, z)?;
    let ratio = if cost_p == 0.0 || cost_q == 0.0 {
        if cost_p == cost_q {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        (cost_p / cost_q).max(cost_q / cost_p)
    };
    Ok(CentroidWitness {
        center,
        cost_p,
        cost_q,
        ratio,
    })
}
