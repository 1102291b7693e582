//! Command-line experiments over `kzsketch-core`.
//!
//! Every run is fully described by the parsed arguments; that description is
//! embedded verbatim in the JSON report next to the results, so a report is
//! enough to reproduce the run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use kzsketch_core::anglelab::{angle_statistics, principal_angles, tilted_plane_pair, AngleThresholds};
use kzsketch_core::codec::{compress, theoretical_upper_bound, Sketch};
use kzsketch_core::coreset::CoresetMethod;
use kzsketch_core::distsim::{run_coordinator, run_stream, stream_space_formula, SitePartition, StreamConfig};
use kzsketch_core::geometry::{cost, CenterSet, GridDataset, PointCloud, Power};
use kzsketch_core::io;
use kzsketch_core::lowerbound::{run_lower_bound, LowerBoundConfig, PairMode};
use kzsketch_core::rng::derive_seed;
use kzsketch_core::synth;

#[derive(Debug, Parser)]
#[command(name = "kzsketch", version, about = "Clustering sketches and lower-bound instances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Report format written to stdout.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Json)]
    pub report: ReportFormat,

    /// Also write the report to this file.
    #[arg(long, global = true)]
    pub report_out: Option<PathBuf>,

    /// Directory receiving `<command>.json` when `--report-out` is absent.
    #[arg(long, global = true, env = "KZSKETCH_REPORT_DIR")]
    pub report_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Table,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase", tag = "command", content = "args")]
pub enum Command {
    /// Generate a synthetic grid dataset.
    Gen(GenArgs),
    /// Compress a dataset into a sketch file.
    Encode(EncodeArgs),
    /// Estimate the cost of a center set from a sketch.
    Eval(EvalArgs),
    /// Bit accounting of a sketch file.
    Size(SizeArgs),
    /// Compare sketch estimates with exact costs on random center sets.
    Verify(VerifyArgs),
    /// Build and certify a hard instance pair.
    Lowerbound(LowerBoundArgs),
    /// Principal-angle statistics of random subspace pairs.
    Angles(AnglesArgs),
    /// One-round coordinator simulation.
    Distributed(DistributedArgs),
    /// Merge-and-reduce streaming simulation.
    Stream(StreamArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Encode(_) => "encode",
            Command::Eval(_) => "eval",
            Command::Size(_) => "size",
            Command::Verify(_) => "verify",
            Command::Lowerbound(_) => "lowerbound",
            Command::Angles(_) => "angles",
            Command::Distributed(_) => "distributed",
            Command::Stream(_) => "stream",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Dataset file: binary `KZDS` or CSV of integer coordinates.
    #[arg(long)]
    pub data: PathBuf,
    /// Grid side for CSV input.
    #[arg(long)]
    pub delta: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    #[arg(long)]
    pub k: usize,
    /// Cost exponent, e.g. `2`, `1`, `3/2`.
    #[arg(long, default_value = "2")]
    pub z: Power,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Method::Identity)]
    pub method: Method,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Identity,
    Sensitivity,
}

impl From<Method> for CoresetMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Identity => CoresetMethod::Identity,
            Method::Sensitivity => CoresetMethod::Sensitivity,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 1024)]
    pub delta: u64,
    /// Number of Gaussian blobs; 0 draws uniformly from the grid.
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    /// Blob standard deviation in grid units.
    #[arg(long, default_value_t = 20.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; a `.csv` extension selects CSV, anything else `KZDS`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub sketch: PathBuf,
    /// CSV of center coordinates, one center per line.
    #[arg(long)]
    pub centers: PathBuf,
    /// Optional original dataset for an exact comparison.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SizeArgs {
    #[arg(long)]
    pub sketch: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Number of random center sets.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Verify this sketch instead of compressing the data afresh.
    #[arg(long)]
    pub sketch: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Orthogonal,
    Haar,
    Perturbed,
}

impl From<Mode> for PairMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Orthogonal => PairMode::Orthogonal,
            Mode::Haar => PairMode::Haar,
            Mode::Perturbed => PairMode::Perturbed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LowerBoundArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value = "2")]
    pub z: Power,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Mode::Orthogonal)]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid side; defaults to the smallest admissible odd value.
    #[arg(long)]
    pub delta: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub max_restarts: usize,
    /// Override the angle threshold θ* (radians).
    #[arg(long)]
    pub theta_star: Option<f64>,
    /// 1-based principal-angle index to test.
    #[arg(long)]
    pub angle_index: Option<usize>,
    /// Write bases (`KZOB`), rounded datasets (`KZDS`) and the center here.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    /// Two planes in ℝ³ sharing an axis, tilted by 60°.
    TiltedPlanes,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnglesArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 1-based angle index to summarise besides θ₁.
    #[arg(long)]
    pub index: Option<usize>,
    /// Report the angles of a fixed pair instead of sampling.
    #[arg(long, value_enum)]
    pub fixture: Option<Fixture>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DistributedArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub sites: usize,
    /// Number of random center sets used to check the merged estimate.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StreamArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub block: usize,
    /// Level-0 sketches held before a merge.
    #[arg(long, default_value_t = 8)]
    pub cap: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

/// Result of one command: the JSON report and whether its checks passed.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub pass: bool,
}

/// Runs a parsed command and returns its report.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let (result, pass) = match &cli.command {
        Command::Gen(a) => cmd_gen(a)?,
        Command::Encode(a) => cmd_encode(a)?,
        Command::Eval(a) => cmd_eval(a)?,
        Command::Size(a) => cmd_size(a)?,
        Command::Verify(a) => cmd_verify(a)?,
        Command::Lowerbound(a) => cmd_lowerbound(a)?,
        Command::Angles(a) => cmd_angles(a)?,
        Command::Distributed(a) => cmd_distributed(a)?,
        Command::Stream(a) => cmd_stream(a)?,
    };
    let report = json!({
        "spec": {
            "command": cli.command.name(),
            "args": serde_json::to_value(&cli.command)?["args"],
            "report_format": cli.report,
        },
        "pass": pass,
        "result": result,
    });
    Ok(Outcome { report, pass })
}

/// Renders a report in the requested format.
pub fn render(report: &Value, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("serializable") + "\n",
        ReportFormat::Table => {
            let mut rows = Vec::new();
            flatten("", report, &mut rows);
            let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&join(k), v, out)),
        Value::Array(items) if items.iter().any(|x| x.is_object() || x.is_array()) => {
            items.iter().enumerate().for_each(|(i, v)| flatten(&join(&i.to_string()), v, out))
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Where the report file goes, if anywhere.
pub fn report_path(cli: &Cli) -> Option<PathBuf> {
    let ext = match cli.report {
        ReportFormat::Json => "json",
        ReportFormat::Table => "txt",
    };
    cli.report_out
        .clone()
        .or_else(|| cli.report_dir.as_ref().map(|d| d.join(format!("{}.{ext}", cli.command.name()))))
}

pub fn load_dataset(path: &Path, delta: Option<u64>) -> Result<GridDataset> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(b"KZDS") {
        let data = io::read_dataset(bytes.as_slice())?;
        if let Some(dl) = delta {
            if dl != data.delta() {
                bail!("--delta {dl} disagrees with Δ={} stored in {}", data.delta(), path.display());
            }
        }
        Ok(data)
    } else {
        let delta = delta.context("CSV datasets need --delta")?;
        let text = String::from_utf8(bytes).context("dataset is neither KZDS nor UTF-8 CSV")?;
        Ok(io::parse_dataset_csv(&text, delta)?)
    }
}

fn load_sketch(path: &Path) -> Result<Sketch> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sketch::from_bytes(&bytes)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Probe center set `r`: even `r` draws uniform points of the grid box,
/// odd `r` jitters randomly chosen data points.
pub fn probe_centers(data: &GridDataset, k: usize, r: usize, seed: u64) -> Result<CenterSet> {
    let s = derive_seed(seed, 1_000 + r as u64);
    Ok(if r.is_multiple_of(2) {
        synth::random_centers(k, data.dim(), data.delta(), s)?
    } else {
        synth::perturbed_data_centers(data, k, data.delta() as f64 / 100.0, s)?
    })
}

fn relative_error(estimate: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        if estimate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (estimate - exact).abs() / exact
    }
}

fn cmd_gen(a: &GenArgs) -> Result<(Value, bool)> {
    let data = if a.clusters == 0 {
        synth::uniform_grid(a.n, a.d, a.delta, a.seed)?
    } else {
        synth::gaussian_blobs(a.n, a.d, a.delta, a.clusters, a.spread, a.seed)?
    };
    let bytes = if a.out.extension().is_some_and(|e| e == "csv") {
        io::dataset_to_csv(&data).into_bytes()
    } else {
        io::dataset_to_bytes(&data)
    };
    write_file(&a.out, &bytes)?;
    Ok((json!({ "n": data.len(), "d": data.dim(), "delta": data.delta(), "bytes": bytes.len() }), true))
}

fn cmd_encode(a: &EncodeArgs) -> Result<(Value, bool)> {
    let data = load_dataset(&a.data.data, a.data.delta)?;
    let p = &a.problem;
    let c = compress(&data, p.k, p.z, p.eps, p.method.into(), p.seed)?;
    let bytes = c.sketch.to_bytes();
    write_file(&a.out, &bytes)?;
    let ledger = c.sketch.bit_size();
    let formula = theoretical_upper_bound(
        data.len() as u64,
        p.k as u64,
        data.dim() as u64,
        data.delta(),
        p.eps,
        p.z,
        c.sketch.coreset_size() as u64,
    );
    let result = json!({
        "n": data.len(),
        "d": data.dim(),
        "delta": data.delta(),
        "coreset_size": c.coreset.len(),
        "weight_sum": c.coreset.weight_sum(),
        "weight_sum_ok": c.coreset.weight_sum_check(),
        "duplicate_centers": c.centers.duplicate_warning,
        "bits": ledger,
        "file_bytes": bytes.len(),
        "formula_bits": formula,
    });
    Ok((result, c.coreset.weight_sum_check()))
}

fn cmd_eval(a: &EvalArgs) -> Result<(Value, bool)> {
    let sketch = load_sketch(&a.sketch)?;
    let text = fs::read_to_string(&a.centers).with_context(|| format!("reading {}", a.centers.display()))?;
    let centers = io::parse_centers_csv(&text)?;
    let estimate = sketch.estimate_cost(&centers)?;
    let mut result = json!({ "k": centers.k(), "estimate": estimate });
    let mut pass = estimate.is_finite() && estimate >= 0.0;
    if let Some(path) = &a.data {
        let data = load_dataset(path, a.delta)?;
        let exact = cost(&data, &centers, sketch.header.z)?;
        let rel = relative_error(estimate, exact);
        let eps = sketch.header.epsilon();
        result["exact"] = json!(exact);
        result["relative_error"] = json!(rel);
        result["epsilon"] = json!(eps);
        pass &= rel <= eps;
    }
    Ok((result, pass))
}

fn cmd_size(a: &SizeArgs) -> Result<(Value, bool)> {
    let bytes = fs::read(&a.sketch).with_context(|| format!("reading {}", a.sketch.display()))?;
    let sketch = Sketch::from_bytes(&bytes)?;
    let ledger = sketch.bit_size();
    let padding = bytes.len() as u64 * 8 - ledger.total_bits;
    let h = &sketch.header;
    let formula = theoretical_upper_bound(h.n, h.k as u64, h.d as u64, h.delta, h.epsilon(), h.z, h.coreset_size);
    let result = json!({
        "header": h,
        "bits": ledger,
        "file_bytes": bytes.len(),
        "padding_bits": padding,
        "formula_bits": formula,
    });
    Ok((result, padding < 8))
}

fn cmd_verify(a: &VerifyArgs) -> Result<(Value, bool)> {
    let data = load_dataset(&a.data.data, a.data.delta)?;
    let p = &a.problem;
    let sketch = match &a.sketch {
        Some(path) => load_sketch(path)?,
        None => compress(&data, p.k, p.z, p.eps, p.method.into(), p.seed)?.sketch,
    };
    let decoded = sketch.decode();
    let mut worst: f64 = 0.0;
    let mut worst_trial = 0;
    for r in 0..a.trials {
        let c = probe_centers(&data, p.k, r, p.seed)?;
        let rel = relative_error(decoded.estimate_cost(&c)?, cost(&data, &c, p.z)?);
        if rel > worst {
            worst = rel;
            worst_trial = r;
        }
    }
    let result = json!({
        "trials": a.trials,
        "coreset_size": sketch.coreset_size(),
        "total_bits": sketch.bit_size().total_bits,
        "worst_relative_error": worst,
        "worst_trial": worst_trial,
        "epsilon": p.eps,
    });
    Ok((result, worst <= p.eps))
}

fn cmd_lowerbound(a: &LowerBoundArgs) -> Result<(Value, bool)> {
    let mut cfg = LowerBoundConfig::new(a.n, a.d, a.z, a.eps, a.mode.into(), a.seed);
    cfg.delta = a.delta;
    cfg.max_restarts = a.max_restarts;
    cfg.angle_index = a.angle_index;
    if let Some(t) = a.theta_star {
        cfg.thresholds = AngleThresholds::with_theta_star(t)?;
    }
    let (cert, inst) = run_lower_bound(&cfg)?;
    if let Some(dir) = &a.dump_dir {
        let mut buf = Vec::new();
        io::write_matrix(&mut buf, inst.p.matrix())?;
        write_file(&dir.join("p.kzob"), &buf)?;
        buf.clear();
        io::write_matrix(&mut buf, inst.q.matrix())?;
        write_file(&dir.join("q.kzob"), &buf)?;
        write_file(&dir.join("p.kzds"), &io::dataset_to_bytes(&inst.p_grid))?;
        write_file(&dir.join("q.kzds"), &io::dataset_to_bytes(&inst.q_grid))?;
        let center = CenterSet::new(inst.center.len(), inst.center.iter().copied().collect())?;
        write_file(&dir.join("center.csv"), io::centers_to_csv(&center).as_bytes())?;
    }
    let pass = cert.separated && cert.failed().is_empty();
    Ok((serde_json::to_value(&cert)?, pass))
}

fn cmd_angles(a: &AnglesArgs) -> Result<(Value, bool)> {
    if let Some(Fixture::TiltedPlanes) = a.fixture {
        let (p, q) = tilted_plane_pair();
        let angles = principal_angles(&p, &q)?;
        let expected = [0.0, std::f64::consts::FRAC_PI_3];
        let err = angles.thetas.iter().zip(expected).map(|(t, e)| (t - e).abs()).fold(0.0, f64::max);
        let result = json!({ "fixture": "tilted-planes", "thetas": angles.thetas, "sigmas": angles.sigmas, "max_error": err });
        return Ok((result, err <= 1e-9));
    }
    let index = a.index.unwrap_or_else(|| AngleThresholds::default().angle_index(a.n));
    let stats = angle_statistics(a.d, a.n, a.trials, a.seed, index)?;
    Ok((serde_json::to_value(&stats)?, true))
}

fn cmd_distributed(a: &DistributedArgs) -> Result<(Value, bool)> {
    let data = load_dataset(&a.data.data, a.data.delta)?;
    let p = &a.problem;
    let partition = SitePartition::split_even(&data, a.sites)?;
    let run = run_coordinator(&partition, p.k, p.z, p.eps, p.method.into(), p.seed)?;
    let mut worst: f64 = 0.0;
    for r in 0..a.trials {
        let c = probe_centers(&data, p.k, r, p.seed)?;
        worst = worst.max(relative_error(run.merged.estimate_cost(&c)?, cost(&data, &c, p.z)?));
    }
    let sum_ok = run.ledger.total_bits == run.ledger.per_site_bits.iter().sum::<u64>();
    let result = json!({
        "sites": a.sites,
        "ledger": run.ledger,
        "formula_bits": run.formula_bits,
        "transmitted_bytes": run.transmissions.iter().map(Vec::len).collect::<Vec<_>>(),
        "coreset_points": run.merged.coreset_points(),
        "worst_relative_error": worst,
        "epsilon": p.eps,
    });
    Ok((result, sum_ok && worst <= p.eps))
}

fn cmd_stream(a: &StreamArgs) -> Result<(Value, bool)> {
    let data = load_dataset(&a.data.data, a.data.delta)?;
    let p = &a.problem;
    let mut cfg = StreamConfig::new(data.dim(), data.delta(), p.k, p.z, p.eps, a.block, p.seed);
    cfg.level0_cap = a.cap;
    cfg.method = p.method.into();
    let res = run_stream(&data, cfg)?;
    let mut worst: f64 = 0.0;
    for r in 0..a.trials {
        let c = probe_centers(&data, p.k, r, p.seed)?;
        worst = worst.max(relative_error(res.merged.estimate_cost(&c)?, cost(&data, &c, p.z)?));
    }
    let formula = stream_space_formula(&cfg, data.len(), res.merged.coreset_points(), res.sketches.len());
    let result = json!({
        "points": res.points_seen,
        "blocks": res.blocks,
        "merges": res.merges,
        "live_sketches": res.sketches.len(),
        "coreset_points": res.merged.coreset_points(),
        "final_bits": res.merged.total_bits(),
        "max_resident_bits": res.max_resident_bits,
        "space_formula_bits": formula,
        "worst_relative_error": worst,
        "tolerance": 3.0 * p.eps,
    });
    Ok((result, worst <= 3.0 * p.eps))
}
