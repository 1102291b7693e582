//! Browser bindings for three interactive views: compressing a 2-D point
//! set, the distribution of the smallest principal angle, and a hard-instance
//! certificate. Every entry point returns a JSON string; failures come back
//! as `{"error": "..."}` so the page never has to catch exceptions.

use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use kzsketch_core::anglelab::{principal_angles, sample_haar_basis, Summary};
use kzsketch_core::codec::compress;
use kzsketch_core::coreset::CoresetMethod;
use kzsketch_core::geometry::{cost, GridDataset, PointCloud, Power};
use kzsketch_core::lowerbound::{run_lower_bound, LowerBoundConfig, PairMode};
use kzsketch_core::rng::derive_seed;

#[derive(Debug, Deserialize)]
struct PointsInput {
    delta: u64,
    points: Vec<[u64; 2]>,
}

fn wrap(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Compresses `{"delta": Δ, "points": [[x, y], ...]}` and returns the decoded
/// coreset, the approximate centers, the bit ledger and the estimated versus
/// exact cost at those centers.
pub fn sketch_points(input: &str, k: usize, z: &str, eps: f64, sensitivity: bool, seed: u64) -> Result<Value, String> {
    let input: PointsInput = serde_json::from_str(input).map_err(err)?;
    let z: Power = z.parse().map_err(err)?;
    let coords = input.points.iter().flat_map(|p| p.iter().copied()).collect();
    let data = GridDataset::new(2, input.delta, coords).map_err(err)?;
    let method = if sensitivity {
        CoresetMethod::Sensitivity
    } else {
        CoresetMethod::Identity
    };
    let c = compress(&data, k, z, eps, method, seed).map_err(err)?;
    let decoded = c.sketch.decode();
    let centers = c.centers.center_set();
    let estimate = decoded.estimate_cost(&centers).map_err(err)?;
    let exact = cost(&data, &centers, z).map_err(err)?;
    let points: Vec<[f64; 2]> = (0..decoded.points.len())
        .map(|i| {
            let p = decoded.points.point(i);
            [p[0], p[1]]
        })
        .collect();
    Ok(json!({
        "n": data.len(),
        "centers": (0..centers.k()).map(|i| centers.center(i).to_vec()).collect::<Vec<_>>(),
        "coreset": points,
        "weights": decoded.weights,
        "bits": c.sketch.bit_size(),
        "raw_bits": data.len() as u64 * 2 * 64,
        "estimate": estimate,
        "exact": exact,
    }))
}

/// Histogram of `θ₁` over `trials` random pairs of `n`-dimensional subspaces
/// of `ℝ^d`, on `bins` equal bins of `[0, π/2]`.
pub fn angle_histogram(d: usize, n: usize, trials: usize, bins: usize, seed: u64) -> Result<Value, String> {
    if bins == 0 {
        return Err("bins must be at least 1".into());
    }
    if trials == 0 {
        return Err("trials must be at least 1".into());
    }
    let width = std::f64::consts::FRAC_PI_2 / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut thetas = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let p = sample_haar_basis(d, n, derive_seed(seed, 2 * t)).map_err(err)?;
        let q = sample_haar_basis(d, n, derive_seed(seed, 2 * t + 1)).map_err(err)?;
        let theta = principal_angles(&p, &q).map_err(err)?.theta(1);
        counts[((theta / width) as usize).min(bins - 1)] += 1;
        thetas.push(theta);
    }
    Ok(json!({
        "bin_width": width,
        "counts": counts,
        "summary": Summary::of(&thetas),
    }))
}

/// Runs the hard-instance pipeline and returns its certificate.
pub fn certificate(n: usize, d: usize, z: &str, eps: f64, mode: &str, seed: u64) -> Result<Value, String> {
    let z: Power = z.parse().map_err(err)?;
    let mode: PairMode = mode.parse().map_err(err)?;
    let cfg = LowerBoundConfig::new(n, d, z, eps, mode, seed);
    let (cert, _) = run_lower_bound(&cfg).map_err(err)?;
    serde_json::to_value(cert).map_err(err)
}

#[wasm_bindgen(js_name = sketchPoints)]
pub fn sketch_points_js(input: &str, k: usize, z: &str, eps: f64, sensitivity: bool, seed: u32) -> String {
    wrap(sketch_points(input, k, z, eps, sensitivity, seed as u64))
}

#[wasm_bindgen(js_name = angleHistogram)]
pub fn angle_histogram_js(d: usize, n: usize, trials: usize, bins: usize, seed: u32) -> String {
    wrap(angle_histogram(d, n, trials, bins, seed as u64))
}

#[wasm_bindgen(js_name = lowerBoundCertificate)]
pub fn certificate_js(n: usize, d: usize, z: &str, eps: f64, mode: &str, seed: u32) -> String {
    wrap(certificate(n, d, z, eps, mode, seed as u64))
}
