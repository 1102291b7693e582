//! End-to-end hard-instance pipeline: sample a basis pair, measure angles,
//! color, build the separating center, move everything onto the grid and
//! certify separation. Every inequality checked along the way is recorded.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::anglelab::{
    orthogonal_pair, perturbed_pair, principal_angles, row_norm_profile, sample_haar_basis, AngleThresholds,
    InnerProductMatrix, OrthonormalBasis,
};
use crate::coloring::{
    adversarial_center, antipodal_centers, center_for_power, centroid_witness, cost_gap, default_delta,
    find_partial_coloring, max_rounding_perturbation, perturbation_budget, round_and_scale, scale_centers,
    separation_witness, SeparationWitness,
};
use crate::error::{invalid, Result};
use crate::geometry::{validate_epsilon, CenterSet, GridDataset, Power};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    /// Exactly orthogonal spans.
    Orthogonal,
    /// Two independent uniformly random subspaces.
    Haar,
    /// Spans whose largest principal cosine equals the threshold `cos*`.
    Perturbed,
}

impl std::str::FromStr for PairMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(Self::Orthogonal),
            "haar" => Ok(Self::Haar),
            "perturbed" => Ok(Self::Perturbed),
            other => Err(invalid("mode", format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundConfig {
    pub n: usize,
    pub d: usize,
    pub z: Power,
    pub eps: f64,
    pub mode: PairMode,
    pub seed: u64,
    pub max_restarts: usize,
    /// Grid side override; defaults to the odd value derived from `(d, z, ε)`.
    pub delta: Option<u64>,
    pub thresholds: AngleThresholds,
    /// 1-based angle index to test; defaults to `⌈a·n⌉`.
    pub angle_index: Option<usize>,
}

impl LowerBoundConfig {
    pub fn new(n: usize, d: usize, z: Power, eps: f64, mode: PairMode, seed: u64) -> Self {
        Self {
            n,
            d,
            z,
            eps,
            mode,
            seed,
            max_restarts: 10_000,
            delta: None,
            thresholds: AngleThresholds::default(),
            angle_index: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One checked inequality `lhs (≤|≥) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub pass: bool,
}

impl Inequality {
    pub fn at_most(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.to_string(),
            lhs,
            relation: Relation::AtMost,
            rhs,
            pass: lhs <= rhs,
        }
    }

    pub fn at_least(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.to_string(),
            lhs,
            relation: Relation::AtLeast,
            rhs,
            pass: lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSummary {
    pub kind: String,
    pub cost_p: f64,
    pub cost_q: f64,
    pub ratio: f64,
    pub separated: bool,
}

impl WitnessSummary {
    fn from(kind: &str, w: &SeparationWitness) -> Self {
        Self {
            kind: kind.to_string(),
            cost_p: w.cost_p,
            cost_q: w.cost_q,
            ratio: w.ratio(),
            separated: w.separated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub config: LowerBoundConfig,
    pub sigma_max: f64,
    pub angle_index: usize,
    pub theta_at_index: f64,
    pub coloring_zero_count: usize,
    pub coloring_discrepancy: f64,
    pub coloring_guarantee_met: bool,
    pub coloring_restarts: usize,
    pub delta: u64,
    pub inequalities: Vec<Inequality>,
    pub witnesses: Vec<WitnessSummary>,
    /// At least one witness separates the rounded pair.
    pub separated: bool,
}

impl Certificate {
    pub fn failed(&self) -> Vec<&Inequality> {
        self.inequalities.iter().filter(|i| !i.pass).collect()
    }
}

/// Rounded instance together with the centers used against it.
#[derive(Debug, Clone)]
pub struct HardInstance {
    pub p: OrthonormalBasis,
    pub q: OrthonormalBasis,
    pub p_grid: GridDataset,
    pub q_grid: GridDataset,
    /// Unit center before scaling.
    pub center: DVector<f64>,
    pub delta: u64,
}

pub fn sample_pair(cfg: &LowerBoundConfig) -> Result<(OrthonormalBasis, OrthonormalBasis)> {
    match cfg.mode {
        PairMode::Orthogonal => orthogonal_pair(cfg.d, cfg.n, cfg.seed),
        PairMode::Haar => Ok((
            sample_haar_basis(cfg.d, cfg.n, derive_seed(cfg.seed, 0))?,
            sample_haar_basis(cfg.d, cfg.n, derive_seed(cfg.seed, 1))?,
        )),
        PairMode::Perturbed => perturbed_pair(cfg.d, cfg.n, cfg.thresholds.cos_star, cfg.seed),
    }
}

/// Runs the pipeline and returns the certificate and the instance.
pub fn run_lower_bound(cfg: &LowerBoundConfig) -> Result<(Certificate, HardInstance)> {
    validate_epsilon(cfg.eps)?;
    let (p, q) = sample_pair(cfg)?;
    let n = cfg.n;
    let sqrt_n = (n as f64).sqrt();
    let mut ineq = Vec::new();

    let angles = principal_angles(&p, &q)?;
    let angle_index = cfg.angle_index.unwrap_or_else(|| cfg.thresholds.angle_index(n));
    if angle_index == 0 || angle_index > n {
        return Err(invalid("angle_index", format!("{angle_index} not in 1..={n}")));
    }
    let theta = angles.theta(angle_index);
    ineq.push(Inequality::at_least("theta_index >= theta_star", theta, cfg.thresholds.theta_star));

    let u = InnerProductMatrix::between(&p, &q)?;
    let sigma_sq: f64 = angles.sigmas.iter().map(|s| s * s).sum();
    ineq.push(Inequality::at_most(
        "|sum sigma^2 - frobenius^2|",
        (sigma_sq - u.frobenius_sq()).abs(),
        1e-8,
    ));
    let profile = row_norm_profile(&u, &cfg.thresholds);
    ineq.push(Inequality::at_least(
        "rows with norm^2 <= bound",
        profile.small_rows.len() as f64,
        (1.0 - cfg.thresholds.outlier_fraction) * n as f64,
    ));

    let coloring = find_partial_coloring(&u, &cfg.thresholds, cfg.max_restarts, derive_seed(cfg.seed, 7));
    ineq.push(Inequality::at_most("coloring zero count", coloring.zero_count as f64, n as f64 / 4.0));
    ineq.push(Inequality::at_most("coloring discrepancy", coloring.discrepancy, 0.5));

    let c2 = adversarial_center(&q, &p, &coloring.zeta)?;
    let gap2 = cost_gap(&p, &q, &c2, Power::TWO)?;
    ineq.push(Inequality::at_least("z=2 cost gap", gap2, 0.5 * sqrt_n - 1e-6));

    let center = if cfg.z == Power::TWO {
        c2
    } else {
        match center_for_power(&q, &p, &c2, cfg.z) {
            Ok(pc) => {
                ineq.push(Inequality::at_least("power-z cost gap", pc.gap, pc.bound));
                DVector::from_vec(pc.center)
            }
            Err(_) => {
                ineq.push(Inequality::at_least(
                    "direction gap for power-z lift",
                    crate::coloring::abs_inner_sum(&q, &c2) - crate::coloring::abs_inner_sum(&p, &c2),
                    0.5 * sqrt_n,
                ));
                c2
            }
        }
    };

    let delta = cfg.delta.unwrap_or_else(|| default_delta(cfg.d, cfg.z, cfg.eps));
    let p_real = p.to_dataset();
    let q_real = q.to_dataset();
    let p_round = round_and_scale(&p_real, delta)?;
    let q_round = round_and_scale(&q_real, delta)?;
    let unit_pair = antipodal_centers(&center);
    let budget = perturbation_budget(delta, cfg.d);
    let worst = max_rounding_perturbation(&p_real, &p_round.grid, &unit_pair, delta)?
        .max(max_rounding_perturbation(&q_real, &q_round.grid, &unit_pair, delta)?);
    ineq.push(Inequality::at_most("rounding perturbation", worst, budget));
    ineq.push(Inequality::at_most(
        "2*delta*sqrt(d) + d <= delta^2*eps/4",
        budget,
        (delta as f64).powi(2) * cfg.eps / 4.0,
    ));

    let grid_centers: CenterSet = scale_centers(&unit_pair, delta);
    let antipodal = separation_witness(&p_round.grid, &q_round.grid, &grid_centers, cfg.z, cfg.eps)?;
    let centroid = centroid_witness(&p_round.grid, &q_round.grid, cfg.z)?;
    let centroid_w = separation_witness(&p_round.grid, &q_round.grid, &centroid.centers(), cfg.z, cfg.eps)?;
    let witnesses = vec![
        WitnessSummary::from("antipodal", &antipodal),
        WitnessSummary::from("centroid", &centroid_w),
    ];
    let separated = antipodal.separated || centroid_w.separated;

    let cert = Certificate {
        config: cfg.clone(),
        sigma_max: angles.sigma_max(),
        angle_index,
        theta_at_index: theta,
        coloring_zero_count: coloring.zero_count,
        coloring_discrepancy: coloring.discrepancy,
        coloring_guarantee_met: coloring.guarantee_met,
        coloring_restarts: coloring.restarts_used,
        delta,
        inequalities: ineq,
        witnesses,
        separated,
    };
    let inst = HardInstance {
        p,
        q,
        p_grid: p_round.grid,
        q_grid: q_round.grid,
        center,
        delta,
    };
    Ok((cert, inst))
}
