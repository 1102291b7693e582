//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use kzsketch_core::anglelab::{
    orthogonal_pair, perturbed_pair, principal_angles, sample_haar_basis, tilted_plane_pair, AngleThresholds,
    InnerProductMatrix, OrthonormalBasis,
};
use kzsketch_core::codec::{compress, partition_order};
use kzsketch_core::coloring::{
    adversarial_center, antipodal_centers, cost_gap, default_delta_z2, find_partial_coloring, loglog_family_instance,
    loglog_levels, loglog_witness_centers, max_rounding_perturbation, perturbation_budget, round_and_scale,
    separation_witness, taylor_bounds_check, tile_instances, TileCopy,
};
use kzsketch_core::coreset::{build_coreset, CoresetMethod};
use kzsketch_core::distsim::{run_coordinator, run_stream, SitePartition, StreamConfig};
use kzsketch_core::geometry::{cost, nearest_center, CenterSet, GridDataset, PointCloud, Power};
use kzsketch_core::lowerbound::{run_lower_bound, LowerBoundConfig, PairMode};
use kzsketch_core::rng::derive_seed;
use kzsketch_core::synth;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn probe(data: &GridDataset, k: usize, r: usize, seed: u64) -> CenterSet {
    let s = derive_seed(seed, r as u64);
    if r.is_multiple_of(2) {
        synth::random_centers(k, data.dim(), data.delta(), s).unwrap()
    } else {
        synth::perturbed_data_centers(data, k, data.delta() as f64 / 100.0, s).unwrap()
    }
}

fn rel_err(est: f64, exact: f64) -> f64 {
    (est - exact).abs() / exact
}

/// `(n, d, k, z, ε index)` of one grid configuration.
type GridKey = (usize, usize, usize, u32, u64);

type Criterion = (&'static str, fn() -> Verdict);

/// Results of the compression grid shared by criteria 1 and 3.
struct GridRun {
    configs: usize,
    trials: usize,
    estimate_failures: usize,
    worst_ratio_to_eps: f64,
    weight_failures: usize,
    point_failures: usize,
    bit_failures: usize,
    worst_bits_ratio: f64,
    coordinate_bits: Vec<(GridKey, u64)>,
    elapsed: Duration,
}

const NS: [usize; 3] = [100, 500, 2000];
const DS: [usize; 3] = [8, 16, 64];
const KS: [usize; 3] = [2, 4, 8];
const ZS: [u32; 2] = [1, 2];
const EPSS: [f64; 2] = [0.1, 0.2];
const DELTA: u64 = 1 << 10;

fn bound_bits(n: usize, k: usize, d: usize, s: usize, z: f64, eps: f64) -> f64 {
    let ld = (DELTA as f64).log2();
    let (n, k, d, s) = (n as f64, k as f64, d as f64, s as f64);
    let inner = (4.0 * s / eps).log2().max(n.log2());
    16.0 * (k * d * ld
        + s * (d * (4.0 * z / eps).log2() + d * ld.log2() + (4.0 / eps).log2() + inner.log2())
        + 256.0)
}

fn grid_run() -> &'static GridRun {
    static RUN: OnceLock<GridRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let mut run = GridRun {
            configs: 0,
            trials: 0,
            estimate_failures: 0,
            worst_ratio_to_eps: 0.0,
            weight_failures: 0,
            point_failures: 0,
            bit_failures: 0,
            worst_bits_ratio: 0.0,
            coordinate_bits: Vec::new(),
            elapsed: Duration::ZERO,
        };
        let mut cfg_id = 0u64;
        for &n in &NS {
            for &d in &DS {
                for &k in &KS {
                    for &zi in &ZS {
                        for (ei, &eps) in EPSS.iter().enumerate() {
                            cfg_id += 1;
                            let z = Power::integer(zi).unwrap();
                            let data = synth::gaussian_blobs(n, d, DELTA, k, 60.0, cfg_id).unwrap();
                            let c = compress(&data, k, z, eps, CoresetMethod::Identity, cfg_id).unwrap();
                            let dec = c.sketch.decode();
                            let centers = c.centers.center_set();
                            let order = partition_order(&c.coreset.points, &centers);
                            for (j, &i) in order.iter().enumerate() {
                                let w = c.coreset.weights[i];
                                if (dec.weights[j] - w).abs() > eps / 4.0 * w {
                                    run.weight_failures += 1;
                                }
                                let (_, sq) = nearest_center(&c.coreset.points, i, &centers);
                                let moved: f64 = dec
                                    .points
                                    .point(j)
                                    .iter()
                                    .zip(c.coreset.points.point(i))
                                    .map(|(a, &b)| (a - b as f64).powi(2))
                                    .sum::<f64>()
                                    .sqrt();
                                if moved > eps / (4.0 * zi as f64) * sq.sqrt() {
                                    run.point_failures += 1;
                                }
                            }
                            for r in 0..200 {
                                let cs = probe(&data, k, r, 7_000 + cfg_id);
                                let exact = cost(&data, &cs, z).unwrap();
                                let est = dec.estimate_cost(&cs).unwrap();
                                let e = rel_err(est, exact);
                                run.worst_ratio_to_eps = run.worst_ratio_to_eps.max(e / eps);
                                if e > eps {
                                    run.estimate_failures += 1;
                                }
                                run.trials += 1;
                            }
                            let ledger = c.sketch.bit_size();
                            let bound = bound_bits(n, k, d, c.sketch.coreset_size(), zi as f64, eps);
                            run.worst_bits_ratio = run.worst_bits_ratio.max(ledger.total_bits as f64 / bound);
                            if ledger.total_bits as f64 > bound {
                                run.bit_failures += 1;
                            }
                            run.coordinate_bits.push(((n, d, k, zi, ei as u64), ledger.coordinate_bits));
                            run.configs += 1;
                        }
                    }
                }
            }
        }
        run.elapsed = start.elapsed();
        run
    })
}

fn criterion_1() -> Verdict {
    let g = grid_run();
    let pass = g.estimate_failures == 0
        && g.weight_failures == 0
        && g.point_failures == 0
        && g.elapsed <= Duration::from_secs(300);
    verdict(
        pass,
        format!(
            "{} configs × 200 center sets: {} estimate violations (worst error {:.3}ε), {} weight and {} point \
             bound violations, {:.1}s",
            g.configs,
            g.estimate_failures,
            g.worst_ratio_to_eps,
            g.weight_failures,
            g.point_failures,
            g.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Verdict {
    let data = synth::gaussian_blobs(3000, 8, DELTA, 4, 40.0, 11).unwrap();
    let n = data.len() as f64;
    let mut worst: f64 = 0.0;
    let mut fails = 0;
    let mut sizes = Vec::new();
    for &eps in &[0.2, 0.3] {
        for seed in 0..20 {
            let cs = build_coreset(&data, 4, Power::TWO, eps, CoresetMethod::Sensitivity, seed).unwrap();
            let dev = (cs.weight_sum() - n).abs() / n;
            worst = worst.max(dev / eps);
            if dev >= 4.0 * eps {
                fails += 1;
            }
            sizes.push(cs.len());
        }
    }
    let ident = build_coreset(&data, 4, Power::TWO, 0.2, CoresetMethod::Identity, 0).unwrap();
    let exact = ident.weight_sum() == n;
    let real_sampling = sizes.iter().all(|&s| s < data.len());
    verdict(
        fails == 0 && exact && real_sampling,
        format!(
            "40 sensitivity coresets (|S| {}..{} of {}): worst |Σw−n|/n = {:.4}ε, {} outside (1±4ε)n; identity Σw = n: {}",
            sizes.iter().min().unwrap(),
            sizes.iter().max().unwrap(),
            data.len(),
            worst,
            fails,
            exact
        ),
    )
}

fn criterion_3() -> Verdict {
    let g = grid_run();
    let lookup = |n, d, k, z, e| {
        g.coordinate_bits
            .iter()
            .find(|(key, _)| *key == (n, d, k, z, e))
            .map(|(_, b)| *b as f64)
            .unwrap()
    };
    let mut ratios = Vec::new();
    for &n in &NS {
        for &k in &KS {
            for &z in &ZS {
                for e in 0..2 {
                    ratios.push(lookup(n, 16, k, z, e) / lookup(n, 8, k, z, e));
                }
            }
        }
    }
    // d = 32 → 64 with otherwise identical settings.
    for (i, &z) in ZS.iter().enumerate() {
        let bits = |d| {
            let data = synth::uniform_grid(500, d, DELTA, 40 + i as u64).unwrap();
            compress(&data, 4, Power::integer(z).unwrap(), 0.1, CoresetMethod::Identity, 1)
                .unwrap()
                .sketch
                .bit_size()
                .coordinate_bits as f64
        };
        ratios.push(bits(64) / bits(32));
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let scaling = lo >= 1.9 && hi <= 2.1;
    verdict(
        g.bit_failures == 0 && scaling,
        format!(
            "{} bound violations (worst total/bound = {:.4}); coordinate-bit ratio on doubling d in [{:.4}, {:.4}]",
            g.bit_failures, g.worst_bits_ratio, lo, hi
        ),
    )
}

fn haar_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    sample_haar_basis(d, d, seed).unwrap().into_matrix()
}

fn criterion_4() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;

    let p = sample_haar_basis(30, 6, 1).unwrap();
    let same = principal_angles(&p, &p).unwrap();
    let m = same.thetas.iter().cloned().fold(0.0, f64::max);
    pass &= m <= 1e-7;
    notes.push(format!("P=Q max θ {m:.1e}"));

    let (a, b) = orthogonal_pair(30, 6, 2).unwrap();
    let orth = principal_angles(&a, &b).unwrap();
    let m = orth.thetas.iter().map(|t| (t - std::f64::consts::FRAC_PI_2).abs()).fold(0.0, f64::max);
    pass &= m <= 1e-7;
    notes.push(format!("orthogonal max |θ−π/2| {m:.1e}"));

    let (fp, fq) = tilted_plane_pair();
    let fx = principal_angles(&fp, &fq).unwrap();
    let m = (fx.thetas[0] - 0.0).abs().max((fx.thetas[1] - std::f64::consts::FRAC_PI_3).abs());
    pass &= m <= 1e-9;
    notes.push(format!("tilted planes error {m:.1e}"));

    let (d, n) = (20, 5);
    let p = sample_haar_basis(d, n, 3).unwrap();
    let q = sample_haar_basis(d, n, 4).unwrap();
    let base = principal_angles(&p, &q).unwrap();
    let mut worst: f64 = 0.0;
    for t in 0..100u64 {
        let o = haar_orthogonal(d, derive_seed(5, 3 * t));
        let r1 = haar_orthogonal(n, derive_seed(5, 3 * t + 1));
        let r2 = haar_orthogonal(n, derive_seed(5, 3 * t + 2));
        let tp = OrthonormalBasis::new(&o * p.matrix() * &r1).unwrap();
        let tq = OrthonormalBasis::new(&o * q.matrix() * &r2).unwrap();
        let ang = principal_angles(&tp, &tq).unwrap();
        for (x, y) in ang.thetas.iter().zip(&base.thetas) {
            worst = worst.max((x - y).abs());
        }
    }
    pass &= worst <= 1e-8;
    notes.push(format!("invariance over 100 transforms {worst:.1e}"));

    let u = InnerProductMatrix::between(&p, &q).unwrap();
    let s2: f64 = base.sigmas.iter().map(|s| s * s).sum();
    let m = (s2 - u.frobenius_sq()).abs();
    pass &= m <= 1e-8;
    notes.push(format!("|Σσ²−‖U‖²_F| {m:.1e}"));
    verdict(pass, notes.join("; "))
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let (n, d) = (100, 400);
    let th = AngleThresholds::default();
    let sigma = 1e-3 / (4.0 * 2f64.sqrt());
    let mut profile_fail = 0;
    let mut coloring_fail = 0;
    let mut gap_fail = 0;
    let mut max_restarts = 0;
    let mut min_gap = f64::INFINITY;
    for s in 0..20u64 {
        let (p, q) = perturbed_pair(d, n, sigma, 100 + s).unwrap();
        let u = InnerProductMatrix::between(&p, &q).unwrap();
        if !kzsketch_core::anglelab::row_norm_profile(&u, &th).pass {
            profile_fail += 1;
        }
        let col = find_partial_coloring(&u, &th, 10_000, derive_seed(s, 9));
        max_restarts = max_restarts.max(col.restarts_used);
        if !col.guarantee_met {
            coloring_fail += 1;
        }
        let c = adversarial_center(&q, &p, &col.zeta).unwrap();
        let gap = cost_gap(&p, &q, &c, Power::TWO).unwrap();
        min_gap = min_gap.min(gap);
        if gap < 0.5 * (n as f64).sqrt() - 1e-6 {
            gap_fail += 1;
        }
    }
    let ident = InnerProductMatrix::new(DMatrix::identity(n, n));
    let id_col = find_partial_coloring(&ident, &th, 10_000, 1);
    let elapsed = start.elapsed();
    let pass = profile_fail == 0
        && coloring_fail == 0
        && gap_fail == 0
        && !id_col.guarantee_met
        && elapsed <= Duration::from_secs(120);
    verdict(
        pass,
        format!(
            "20 pairs: {profile_fail} profile, {coloring_fail} coloring, {gap_fail} gap failures; \
             max restarts {max_restarts}; min gap {min_gap:.3} (need ≥ 5); U=I guarantee_met = {}; {:.1}s",
            id_col.guarantee_met,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Verdict {
    let mut bad = 0;
    let mut z2_seen = false;
    for i in 0..500 {
        let x = 0.5 * i as f64 / 499.0;
        for j in 0..500 {
            let z = 4.0 * (j + 1) as f64 / 500.0;
            z2_seen |= z == 2.0;
            if !taylor_bounds_check(x, z).unwrap() {
                bad += 1;
            }
        }
    }
    verdict(bad == 0 && z2_seen, format!("{bad} of 250000 grid points fail; z = 2 included: {z2_seen}"))
}

fn criterion_7() -> Verdict {
    let eps = 0.1;
    let mut worst_ratio: f64 = 0.0;
    let mut budget_ok = true;
    for t in 0..50u64 {
        let d = 4 + 4 * (t as usize % 8);
        let data = synth::unit_ball(40, d, 500 + t).unwrap();
        let delta = default_delta_z2(d, eps);
        let rounded = round_and_scale(&data, delta).unwrap();
        let probes = synth::unit_ball(6, d, 900 + t).unwrap();
        let centers = CenterSet::new(d, probes.coords().to_vec()).unwrap();
        let worst = max_rounding_perturbation(&data, &rounded.grid, &centers, delta).unwrap();
        let budget = perturbation_budget(delta, d);
        worst_ratio = worst_ratio.max(worst / budget);
        budget_ok &= delta % 2 == 1 && budget <= (delta as f64).powi(2) * eps / 4.0;
    }
    let cfg = LowerBoundConfig::new(100, 256, Power::TWO, 0.05, PairMode::Orthogonal, 0);
    let (cert, _) = run_lower_bound(&cfg).unwrap();
    let ratios: Vec<String> = cert
        .witnesses
        .iter()
        .map(|w| format!("{} {:.4}{}", w.kind, w.ratio, if w.separated { " (separates)" } else { "" }))
        .collect();
    verdict(
        worst_ratio <= 1.0 && budget_ok && cert.separated,
        format!(
            "50 datasets: worst perturbation/budget {worst_ratio:.4}, budget ≤ Δ²ε/4: {budget_ok}; \
             n=100 d=256 ε=0.05 separated: {} [{}]",
            cert.separated,
            ratios.join(", ")
        ),
    )
}

fn criterion_8() -> Verdict {
    let (n, d, eps) = (8, 20, 0.05);
    let delta_tilde = kzsketch_core::coloring::default_delta_tilde(d, Power::TWO, eps);
    let copies: Vec<TileCopy> = (0..2u64)
        .map(|s| {
            let mut cfg = LowerBoundConfig::new(n, d, Power::TWO, eps, PairMode::Orthogonal, 30 + s);
            cfg.delta = Some(delta_tilde);
            let (_, inst) = run_lower_bound(&cfg).unwrap();
            let half = (delta_tilde as f64 + 1.0) / 2.0;
            let coords: Vec<f64> = antipodal_centers(&inst.center)
                .coords()
                .iter()
                .map(|&x| (half + (delta_tilde as f64 / 2.0) * x).round())
                .collect();
            TileCopy {
                p: inst.p_grid,
                q: inst.q_grid,
                centers: CenterSet::new(d, coords).unwrap(),
            }
        })
        .collect();
    let tiled = tile_instances(&copies, 4, delta_tilde).unwrap();
    let cross = tiled.cross_copy_assignments().unwrap();
    let total = tiled.total_gap(Power::TWO).unwrap();
    let parts: f64 = tiled.copy_gaps(Power::TWO).unwrap().iter().sum();
    let diff = (total - parts).abs();
    verdict(
        cross == 0 && diff <= 1e-6,
        format!(
            "Δ̃ = {delta_tilde}, Δ = {}: {cross} cross-copy assignments over {} points; |tiled gap − Σ copy gaps| = {diff:.1e} (gap {total:.1})",
            tiled.delta,
            tiled.p.len() + tiled.q.len()
        ),
    )
}

fn criterion_9() -> Verdict {
    let (k, n, delta) = (4usize, 64usize, 64u64);
    let anchors = vec![vec![5u64, 5, 5], vec![40, 5, 5]];
    let levels = loglog_levels(k, n);
    let mut choices = Vec::new();
    for a in 1..=levels {
        for b in 1..=levels {
            choices.push(vec![a, b]);
        }
    }
    let sets: Vec<GridDataset> = choices
        .iter()
        .map(|m| loglog_family_instance(k, n, &anchors, Some(m), delta, 0).unwrap().0)
        .collect();
    let mut pairs = 0;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for i in 0..choices.len() {
        for j in 0..choices.len() {
            if i == j {
                continue;
            }
            let l = (0..k / 2).find(|&l| choices[i][l] != choices[j][l]).unwrap();
            let c = loglog_witness_centers(&anchors, l).unwrap();
            let w = separation_witness(&sets[i], &sets[j], &c, Power::TWO, 1.0 / 6.0).unwrap();
            let r = w.cost_p.min(w.cost_q) / w.cost_p.max(w.cost_q);
            worst = worst.max(r);
            pairs += 1;
            if r > 0.5 || !w.separated {
                failures += 1;
            }
        }
    }
    verdict(
        failures == 0 && pairs > 0,
        format!("{levels} levels, {pairs} ordered pairs: {failures} failures, worst min/max cost ratio {worst:.3}"),
    )
}

fn criterion_10() -> Verdict {
    let (k, eps, z) = (4, 0.2, Power::TWO);
    let data = synth::gaussian_blobs(4000, 6, DELTA, 6, 50.0, 21).unwrap();
    let part = SitePartition::split_even(&data, 4).unwrap();
    let run = run_coordinator(&part, k, z, eps, CoresetMethod::Identity, 3).unwrap();
    let ledger_ok = run.ledger.total_bits == run.ledger.per_site_bits.iter().sum::<u64>();
    let mut coord_worst: f64 = 0.0;
    for r in 0..100 {
        let c = probe(&data, k, r, 77);
        coord_worst = coord_worst.max(rel_err(run.merged.estimate_cost(&c).unwrap(), cost(&data, &c, z).unwrap()));
    }

    let stream_data = synth::gaussian_blobs(10_000, 6, DELTA, 6, 50.0, 22).unwrap();
    let cfg = StreamConfig::new(6, DELTA, k, z, eps, 500, 5);
    let res = run_stream(&stream_data, cfg).unwrap();
    let mut stream_worst: f64 = 0.0;
    for r in 0..100 {
        let c = probe(&stream_data, k, r, 78);
        stream_worst = stream_worst.max(rel_err(
            res.merged.estimate_cost(&c).unwrap(),
            cost(&stream_data, &c, z).unwrap(),
        ));
    }

    let small = synth::gaussian_blobs(800, 6, DELTA, 6, 50.0, 23).unwrap();
    let offline = compress(&small, k, z, eps, CoresetMethod::Identity, 8).unwrap().sketch.to_bytes();
    let streamed = run_stream(&small, StreamConfig::new(6, DELTA, k, z, eps, 800, 8)).unwrap();
    let identical = streamed.sketches.len() == 1 && streamed.sketches[0].to_bytes() == offline;

    verdict(
        ledger_ok && coord_worst <= eps && stream_worst <= 3.0 * eps && identical,
        format!(
            "coordinator l=4: Σ per-site = total ({} bits): {ledger_ok}, worst error {:.4}ε; stream 10⁴ pts \
             ({} blocks, {} merges, peak {} bits): worst error {:.4}ε; single-block stream = offline bytes: {identical}",
            run.ledger.total_bits,
            coord_worst / eps,
            res.blocks,
            res.merges,
            res.max_resident_bits,
            stream_worst / eps
        ),
    )
}

fn criterion_11() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_kzsketch");
    let dir = std::env::temp_dir().join(format!("kzsketch-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let path = |name: &str| -> String { dir.join(name).to_str().unwrap().to_string() };
    let data = path("data.kzds");
    let run = |args: &[String]| -> (Option<i32>, Vec<u8>) {
        let out = Command::new(bin).env_remove("KZSKETCH_REPORT_DIR").args(args).output().unwrap();
        (out.status.code(), out.stdout)
    };
    let strs = |v: &[&str]| -> Vec<String> { v.iter().map(|s| s.to_string()).collect() };
    run(&strs(&["gen", "--n", "1500", "--d", "6", "--seed", "4", "--out", &data]));

    let mut commands: Vec<(Vec<String>, Option<PathBuf>)> = Vec::new();
    let sketch_cmd = |out: &str| {
        strs(&[
            "encode", "--data", &data, "--k", "4", "--z", "3/2", "--eps", "0.1", "--method", "sensitivity", "--seed",
            "6", "--out", out,
        ])
    };
    commands.push((sketch_cmd(&path("a.kzsk")), Some(dir.join("a.kzsk"))));
    commands.push((strs(&["size", "--sketch", &path("a.kzsk")]), None));
    commands.push((
        strs(&["verify", "--data", &data, "--k", "4", "--eps", "0.2", "--seed", "2", "--trials", "30"]),
        None,
    ));
    commands.push((
        strs(&["lowerbound", "--n", "32", "--d", "80", "--eps", "0.05", "--mode", "perturbed", "--seed", "5"]),
        None,
    ));
    commands.push((strs(&["angles", "--d", "48", "--n", "4", "--trials", "30", "--seed", "3"]), None));
    commands.push((
        strs(&["distributed", "--data", &data, "--sites", "3", "--k", "4", "--eps", "0.2", "--seed", "1", "--trials", "20"]),
        None,
    ));
    commands.push((
        strs(&[
            "stream", "--data", &data, "--block", "200", "--cap", "3", "--k", "4", "--eps", "0.2", "--method",
            "sensitivity", "--seed", "1", "--trials", "20",
        ]),
        None,
    ));

    let mut mismatches = Vec::new();
    for (args, file) in &commands {
        let first = run(args);
        let first_file = file.as_ref().map(|f| std::fs::read(f).unwrap());
        let second = run(args);
        let second_file = file.as_ref().map(|f| std::fs::read(f).unwrap());
        if first != second || first_file != second_file || first.0.is_none() {
            mismatches.push(args[0].clone());
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    verdict(
        mismatches.is_empty(),
        format!("{} commands run twice; differing: {:?}", commands.len(), mismatches),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 11] = [
        ("sketch contract", criterion_1),
        ("coreset weight sums", criterion_2),
        ("bit budget", criterion_3),
        ("principal angles", criterion_4),
        ("coloring and cost gap", criterion_5),
        ("taylor bounds", criterion_6),
        ("rounding and separation", criterion_7),
        ("tiling", criterion_8),
        ("log log family", criterion_9),
        ("distributed and streaming", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<26} {} [{:.1}s] {}",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
