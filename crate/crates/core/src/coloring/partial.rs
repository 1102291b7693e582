//! Search for low-discrepancy partial colorings of an inner-product matrix.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anglelab::{row_norm_profile, AngleThresholds, InnerProductMatrix};
use crate::rng::{derive_seed, generator};

/// A vector in `{−1, 0, +1}^n` with its statistics against some `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialColoring {
    pub zeta: Vec<i8>,
    pub zero_count: usize,
    /// `‖Uζ‖_∞`.
    pub discrepancy: f64,
    /// `zero_count ≤ n/4` and `discrepancy ≤ 1/2`.
    pub guarantee_met: bool,
    /// Whether the row-norm profile of `U` passed.
    pub precondition_met: bool,
    pub restarts_used: usize,
    /// The restart budget ran out without meeting the guarantee.
    pub timed_out: bool,
    /// How the returned coloring was found.
    pub origin: ColoringOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColoringOrigin {
    Descent,
    RoundingClass,
}

/// `‖Uζ‖_∞`.
pub fn discrepancy(u: &DMatrix<f64>, zeta: &[i8]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..u.nrows() {
        let mut acc = 0.0;
        for (j, &z) in zeta.iter().enumerate() {
            if z != 0 {
                acc += u[(i, j)] * z as f64;
            }
        }
        worst = worst.max(acc.abs());
    }
    worst
}

fn meets(zeta: &[i8], disc: f64) -> bool {
    let zeros = zeta.iter().filter(|&&z| z == 0).count();
    4 * zeros <= zeta.len() && disc <= 0.5
}

fn finish(
    u: &DMatrix<f64>,
    zeta: Vec<i8>,
    precondition_met: bool,
    restarts_used: usize,
    timed_out: bool,
    origin: ColoringOrigin,
) -> PartialColoring {
    let discrepancy = discrepancy(u, &zeta);
    let zero_count = zeta.iter().filter(|&&z| z == 0).count();
    PartialColoring {
        guarantee_met: meets(&zeta, discrepancy),
        zeta,
        zero_count,
        discrepancy,
        precondition_met,
        restarts_used,
        timed_out,
        origin,
    }
}

/// Greedy local search on `‖Uζ‖_∞` from a full coloring. Each step applies
/// the single-coordinate change (to either other value in `{−1,0,1}`,
/// respecting the zero budget `⌊n/4⌋`) with the smallest resulting
/// discrepancy, if it strictly improves. At most `2n` steps.
#[allow(clippy::needless_range_loop)]
fn descend(u: &DMatrix<f64>, zeta: &mut [i8]) -> f64 {
    let n = zeta.len();
    let budget = n / 4;
    let mut v: Vec<f64> = (0..u.nrows())
        .map(|i| (0..n).map(|j| u[(i, j)] * zeta[j] as f64).sum())
        .collect();
    let mut current = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut zeros = zeta.iter().filter(|&&z| z == 0).count();
    for _ in 0..2 * n {
        if current == 0.0 {
            break;
        }
        let mut best: Option<(f64, usize, i8)> = None;
        for j in 0..n {
            for target in [-1i8, 0, 1] {
                if target == zeta[j] || (target == 0 && zeros >= budget) {
                    continue;
                }
                let delta = (target - zeta[j]) as f64;
                let col = u.column(j);
                let mut worst: f64 = 0.0;
                for i in 0..v.len() {
                    worst = worst.max((v[i] + delta * col[i]).abs());
                    if best.is_some_and(|(b, _, _)| worst >= b) {
                        break;
                    }
                }
                if best.is_none_or(|(b, _, _)| worst < b) {
                    best = Some((worst, j, target));
                }
            }
        }
        match best {
            Some((value, j, target)) if value < current => {
                let delta = (target - zeta[j]) as f64;
                for (i, vi) in v.iter_mut().enumerate() {
                    *vi += delta * u[(i, j)];
                }
                if zeta[j] == 0 {
                    zeros -= 1;
                }
                if target == 0 {
                    zeros += 1;
                }
                zeta[j] = target;
                current = value;
            }
            _ => break,
        }
    }
    current
}

/// Pairs full colorings that round to the same integer vector `round(Uζ)`;
/// half their difference lies in `{−1,0,1}^n` with discrepancy at most 1/2.
/// Returns the pair difference with the fewest zeros.
fn rounding_class_pass(u: &DMatrix<f64>, samples: &[Vec<i8>]) -> Option<Vec<i8>> {
    const PER_CLASS: usize = 64;
    let mut classes: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (s, zeta) in samples.iter().enumerate() {
        let key: Vec<i64> = (0..u.nrows())
            .map(|i| {
                let acc: f64 = zeta.iter().enumerate().map(|(j, &z)| u[(i, j)] * z as f64).sum();
                acc.round() as i64
            })
            .collect();
        let members = classes.entry(key).or_default();
        if members.len() < PER_CLASS {
            members.push(s);
        }
    }
    let mut best: Option<(usize, Vec<i8>)> = None;
    for members in classes.values() {
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                let (x, y) = (&samples[members[a]], &samples[members[b]]);
                let zeta: Vec<i8> = x.iter().zip(y).map(|(&p, &q)| (p - q) / 2).collect();
                let zeros = zeta.iter().filter(|&&z| z == 0).count();
                if zeros == zeta.len() {
                    continue;
                }
                if best.as_ref().is_none_or(|(bz, _)| zeros < *bz) {
                    best = Some((zeros, zeta));
                }
            }
        }
    }
    best.map(|(_, z)| z)
}

/// Randomized search for a partial coloring with at most `n/4` zeros and
/// `‖Uζ‖_∞ ≤ 1/2`.
///
/// Restart `r` draws a uniform full coloring from sub-seed `r` of `seed` and
/// runs greedy descent; the search stops at the first restart meeting the
/// guarantee. If none does, the rounding-class pass is tried on the sampled
/// colorings. The result is always verified by direct multiplication; the
/// best candidate is chosen by (guarantee, discrepancy, zero count, restart).
pub fn find_partial_coloring(
    u: &InnerProductMatrix,
    thresholds: &AngleThresholds,
    max_restarts: usize,
    seed: u64,
) -> PartialColoring {
    let n = u.n();
    let precondition = row_norm_profile(u, thresholds).pass;
    let m = &u.u;
    if n == 0 {
        return finish(m, Vec::new(), precondition, 0, false, ColoringOrigin::Descent);
    }

    let mut samples: Vec<Vec<i8>> = Vec::new();
    let mut best: Option<(bool, f64, usize, Vec<i8>)> = None;
    for r in 0..max_restarts.max(1) {
        let mut rng = generator(derive_seed(seed, r as u64));
        let start: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        samples.push(start.clone());
        let mut zeta = start;
        descend(m, &mut zeta);
        let disc = discrepancy(m, &zeta);
        let ok = meets(&zeta, disc);
        let zeros = zeta.iter().filter(|&&z| z == 0).count();
        if ok {
            return finish(m, zeta, precondition, r + 1, false, ColoringOrigin::Descent);
        }
        let better = match &best {
            None => true,
            Some((_, bd, bz, _)) => disc < *bd || (disc == *bd && zeros < *bz),
        };
        if better {
            best = Some((ok, disc, zeros, zeta));
        }
    }
    let used = max_restarts.max(1);
    if let Some(zeta) = rounding_class_pass(m, &samples) {
        let disc = discrepancy(m, &zeta);
        if meets(&zeta, disc) {
            return finish(m, zeta, precondition, used, false, ColoringOrigin::RoundingClass);
        }
    }
    let (_, _, _, zeta) = best.expect("at least one restart ran");
    finish(m, zeta, precondition, used, true, ColoringOrigin::Descent)
}
