//! Coordinator-model and insertion-only streaming harnesses.
//!
//! Sites are simulated in-process. Everything a site "sends" goes through the
//! sketch wire format, and the coordinator only ever sees decoded bytes, so
//! the bit counts are exactly what a real deployment would transmit.

use serde::{Deserialize, Serialize};

use crate::codec::bits::ceil_log2;
use crate::codec::{compress, encode, theoretical_upper_bound, DecodedSketch, Sketch};
use crate::coreset::{approx_centers_weighted, sensitivity_coreset, CoresetMethod, SamplingParams, WeightedCoreset};
use crate::error::{invalid, Error, Result};
use crate::geometry::{validate_epsilon, CenterSet, GridDataset, PointCloud, Power};
use crate::rng::derive_seed;

/// Private inputs of `l` sites over a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SitePartition {
    shards: Vec<GridDataset>,
}

impl SitePartition {
    pub fn new(shards: Vec<GridDataset>) -> Result<Self> {
        let first = shards.first().ok_or(Error::Empty("partition"))?;
        let (d, delta) = (first.dim(), first.delta());
        for (i, s) in shards.iter().enumerate() {
            if s.is_empty() {
                return Err(invalid("shards", format!("site {i} is empty")));
            }
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.dim(),
                });
            }
            if s.delta() != delta {
                return Err(Error::HeaderMismatch(format!("site {i} has Δ={} not {delta}", s.delta())));
            }
        }
        Ok(Self { shards })
    }

    /// Contiguous, nearly equal shards.
    pub fn split_even(data: &GridDataset, sites: usize) -> Result<Self> {
        if sites == 0 || sites > data.len() {
            return Err(invalid("sites", format!("need 1 ≤ l ≤ n, got {sites}")));
        }
        let n = data.len();
        let shards = (0..sites)
            .map(|i| {
                let (lo, hi) = (i * n / sites, (i + 1) * n / sites);
                data.select(&(lo..hi).collect::<Vec<_>>())
            })
            .collect();
        Self::new(shards)
    }

    pub fn shards(&self) -> &[GridDataset] {
        &self.shards
    }

    pub fn total_n(&self) -> usize {
        self.shards.iter().map(|s| s.len()).sum()
    }

    /// All shards concatenated in site order.
    pub fn union(&self) -> GridDataset {
        let coords = self.shards.iter().flat_map(|s| s.coords().iter().copied()).collect();
        GridDataset::new(self.shards[0].dim(), self.shards[0].delta(), coords).expect("shards share a grid")
    }
}

/// Several sketches answering queries as the sum of their estimates.
#[derive(Debug, Clone)]
pub struct MergedSketch {
    members: Vec<Sketch>,
    decoded: Vec<DecodedSketch>,
}

impl MergedSketch {
    pub fn members(&self) -> &[Sketch] {
        &self.members
    }

    /// Largest member ε.
    pub fn effective_epsilon(&self) -> f64 {
        self.members.iter().map(|s| s.header.epsilon()).fold(0.0, f64::max)
    }

    /// Sum of member estimates, left to right.
    pub fn estimate_cost(&self, centers: &CenterSet) -> Result<f64> {
        let mut total = 0.0;
        for m in &self.decoded {
            total += m.estimate_cost(centers)?;
        }
        Ok(total)
    }

    pub fn total_bits(&self) -> u64 {
        self.members.iter().map(|s| s.bit_size().total_bits).sum()
    }

    pub fn coreset_points(&self) -> usize {
        self.members.iter().map(|s| s.coreset_size()).sum()
    }
}

/// Groups sketches that share `(d, z, Δ)`.
pub fn merge_sketches(sketches: &[Sketch]) -> Result<MergedSketch> {
    let first = sketches.first().ok_or(Error::Empty("sketch list"))?;
    let key = (first.header.d, first.header.z, first.header.delta);
    for (i, s) in sketches.iter().enumerate() {
        if (s.header.d, s.header.z, s.header.delta) != key {
            return Err(Error::HeaderMismatch(format!(
                "sketch {i} has (d, z, Δ) = ({}, {}, {}) but sketch 0 has ({}, {}, {})",
                s.header.d, s.header.z, s.header.delta, key.0, key.1, key.2
            )));
        }
    }
    Ok(MergedSketch {
        decoded: sketches.iter().map(Sketch::decode).collect(),
        members: sketches.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    pub per_site_bits: Vec<u64>,
    pub total_bits: u64,
    pub rounds: u32,
}

#[derive(Debug, Clone)]
pub struct CoordinatorRun {
    pub merged: MergedSketch,
    pub ledger: CommLedger,
    /// Exactly what each site transmitted.
    pub transmissions: Vec<Vec<u8>>,
    /// Sum over sites of the unit-constant size bound.
    pub formula_bits: f64,
}

/// One round on a star: site `i` compresses its shard with seed `seed + i`
/// and sends the bytes; the coordinator parses them and merges.
pub fn run_coordinator(
    partition: &SitePartition,
    k: usize,
    z: Power,
    eps: f64,
    method: CoresetMethod,
    seed: u64,
) -> Result<CoordinatorRun> {
    validate_epsilon(eps)?;
    let mut transmissions = Vec::with_capacity(partition.shards.len());
    let mut per_site_bits = Vec::with_capacity(partition.shards.len());
    let mut formula_bits = 0.0;
    for (i, shard) in partition.shards.iter().enumerate() {
        let c = compress(shard, k, z, eps, method, seed.wrapping_add(i as u64))?;
        per_site_bits.push(c.sketch.bit_size().total_bits);
        formula_bits += theoretical_upper_bound(
            shard.len() as u64,
            k as u64,
            shard.dim() as u64,
            shard.delta(),
            eps,
            z,
            c.sketch.coreset_size() as u64,
        );
        transmissions.push(c.sketch.to_bytes());
    }
    let received = transmissions
        .iter()
        .map(|b| Sketch::from_bytes(b))
        .collect::<Result<Vec<_>>>()?;
    let merged = merge_sketches(&received)?;
    Ok(CoordinatorRun {
        merged,
        ledger: CommLedger {
            total_bits: per_site_bits.iter().sum(),
            per_site_bits,
            rounds: 1,
        },
        transmissions,
        formula_bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub d: usize,
    pub delta: u64,
    pub k: usize,
    pub z: Power,
    pub eps: f64,
    pub block_size: usize,
    /// Number of level-0 sketches that triggers a merge into level 1.
    pub level0_cap: usize,
    pub method: CoresetMethod,
    pub seed: u64,
}

impl StreamConfig {
    pub fn new(d: usize, delta: u64, k: usize, z: Power, eps: f64, block_size: usize, seed: u64) -> Self {
        Self {
            d,
            delta,
            k,
            z,
            eps,
            block_size,
            level0_cap: 8,
            method: CoresetMethod::Identity,
            seed,
        }
    }
}

/// Merge-and-reduce state with two levels.
#[derive(Debug, Clone)]
pub struct StreamState {
    cfg: StreamConfig,
    buffer: Vec<u64>,
    level0: Vec<Sketch>,
    level1: Vec<Sketch>,
    /// Source points represented by each live sketch, parallel to the levels.
    level0_n: Vec<usize>,
    level1_n: Vec<usize>,
    blocks: u64,
    merges: u64,
    points_seen: usize,
    resident_bits: u64,
}

#[derive(Debug, Clone)]
pub struct StreamResult {
    pub sketches: Vec<Sketch>,
    pub merged: MergedSketch,
    pub max_resident_bits: u64,
    pub points_seen: usize,
    pub blocks: u64,
    pub merges: u64,
}

impl StreamState {
    pub fn new(cfg: StreamConfig) -> Result<Self> {
        validate_epsilon(cfg.eps)?;
        if cfg.block_size < cfg.k + 1 {
            return Err(invalid("block_size", "must be at least k + 1"));
        }
        if cfg.level0_cap < 2 {
            return Err(invalid("level0_cap", "must be at least 2"));
        }
        if cfg.d == 0 || cfg.delta < 2 {
            return Err(invalid("d/delta", "need d ≥ 1 and Δ ≥ 2"));
        }
        Ok(Self {
            cfg,
            buffer: Vec::with_capacity(cfg.block_size * cfg.d),
            level0: Vec::new(),
            level1: Vec::new(),
            level0_n: Vec::new(),
            level1_n: Vec::new(),
            blocks: 0,
            merges: 0,
            points_seen: 0,
            resident_bits: 0,
        })
    }

    fn buffered(&self) -> usize {
        self.buffer.len() / self.cfg.d
    }

    /// Bits currently held: raw buffered points plus every live sketch.
    pub fn current_bits(&self) -> u64 {
        let raw = self.buffered() as u64 * self.cfg.d as u64 * ceil_log2(self.cfg.delta) as u64;
        raw + self
            .level0
            .iter()
            .chain(&self.level1)
            .map(|s| s.bit_size().total_bits)
            .sum::<u64>()
    }

    /// Running maximum of [`Self::current_bits`].
    pub fn resident_bits(&self) -> u64 {
        self.resident_bits
    }

    pub fn live_sketches(&self) -> usize {
        self.level0.len() + self.level1.len()
    }

    /// Total coreset points across live sketches.
    pub fn live_coreset_points(&self) -> usize {
        self.level0.iter().chain(&self.level1).map(|s| s.coreset_size()).sum()
    }

    fn observe(&mut self) {
        self.resident_bits = self.resident_bits.max(self.current_bits());
    }

    pub fn push(&mut self, point: &[u64]) -> Result<()> {
        if point.len() != self.cfg.d {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.d,
                got: point.len(),
            });
        }
        if let Some(&v) = point.iter().find(|&&c| c < 1 || c > self.cfg.delta) {
            return Err(Error::OffGrid {
                point: self.points_seen,
                value: v as i64,
                delta: self.cfg.delta,
            });
        }
        // A full block is only encoded once more input arrives, so a stream
        // that fits in one block ends up on the offline path.
        if self.buffered() == self.cfg.block_size {
            self.flush_block()?;
        }
        self.buffer.extend_from_slice(point);
        self.points_seen += 1;
        self.observe();
        Ok(())
    }

    fn take_buffer(&mut self) -> Result<GridDataset> {
        let coords = std::mem::take(&mut self.buffer);
        GridDataset::new(self.cfg.d, self.cfg.delta, coords)
    }

    fn flush_block(&mut self) -> Result<()> {
        let block = self.take_buffer()?;
        let c = &self.cfg;
        let seed = derive_seed(c.seed, 100 + self.blocks);
        let sketch = compress(&block, c.k, c.z, c.eps / 2.0, c.method, seed)?.sketch;
        self.blocks += 1;
        self.level0_n.push(block.len());
        self.level0.push(sketch);
        self.observe();
        if self.level0.len() >= self.cfg.level0_cap {
            self.reduce()?;
        }
        Ok(())
    }

    /// Decodes all level-0 sketches, snaps decoded points to the grid,
    /// rebuilds a weighted coreset of the union at `ε/2` and re-encodes it.
    fn reduce(&mut self) -> Result<()> {
        let c = self.cfg;
        let mut merged: std::collections::BTreeMap<Vec<u64>, f64> = std::collections::BTreeMap::new();
        for s in &self.level0 {
            let dec = s.decode();
            for (i, &w) in dec.weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let snapped: Vec<u64> = dec
                    .points
                    .point(i)
                    .iter()
                    .map(|&x| (x.round().max(1.0) as u64).min(c.delta))
                    .collect();
                *merged.entry(snapped).or_insert(0.0) += w;
            }
        }
        let source_n: usize = self.level0_n.iter().sum();
        let seed = derive_seed(c.seed, 10_000 + self.merges);
        self.merges += 1;
        self.level0.clear();
        self.level0_n.clear();
        if merged.is_empty() {
            return Ok(());
        }
        let points: Vec<Vec<u64>> = merged.keys().cloned().collect();
        let weights: Vec<f64> = merged.values().copied().collect();
        let union = GridDataset::from_points(c.delta, &points)?;
        let coreset = match c.method {
            CoresetMethod::Identity => WeightedCoreset::new(
                union.clone(),
                weights.clone(),
                (0..union.len()).collect(),
                source_n.max(union.len()),
                c.eps / 2.0,
            )?,
            CoresetMethod::Sensitivity => sensitivity_coreset(
                &union,
                &weights,
                source_n.max(union.len()),
                c.k,
                c.z,
                c.eps / 2.0,
                SamplingParams::default(),
                derive_seed(seed, 1),
            )?,
        };
        let centers = approx_centers_weighted(&union, &weights, c.k, c.z, derive_seed(seed, 2))?;
        let sketch = encode(&coreset, &centers, c.z, c.delta, c.eps / 2.0)?;
        self.level1_n.push(source_n);
        self.level1.push(sketch);
        self.observe();
        Ok(())
    }

    pub fn finish(mut self) -> Result<StreamResult> {
        if self.buffered() > 0 {
            if self.level0.is_empty() && self.level1.is_empty() {
                let block = self.take_buffer()?;
                let c = &self.cfg;
                let sketch = compress(&block, c.k, c.z, c.eps, c.method, c.seed)?.sketch;
                self.level0_n.push(block.len());
                self.level0.push(sketch);
                self.blocks += 1;
            } else {
                // Encoded without triggering another reduction.
                let block = self.take_buffer()?;
                let c = &self.cfg;
                let seed = derive_seed(c.seed, 100 + self.blocks);
                let sketch = compress(&block, c.k, c.z, c.eps / 2.0, c.method, seed)?.sketch;
                self.level0_n.push(block.len());
                self.level0.push(sketch);
                self.blocks += 1;
            }
            self.observe();
        }
        let sketches: Vec<Sketch> = self.level1.iter().chain(&self.level0).cloned().collect();
        if sketches.is_empty() {
            return Err(Error::Empty("stream"));
        }
        Ok(StreamResult {
            merged: merge_sketches(&sketches)?,
            sketches,
            max_resident_bits: self.resident_bits,
            points_seen: self.points_seen,
            blocks: self.blocks,
            merges: self.merges,
        })
    }
}

/// Feeds every point of `data` through a fresh stream.
pub fn run_stream(data: &GridDataset, cfg: StreamConfig) -> Result<StreamResult> {
    if data.dim() != cfg.d || data.delta() != cfg.delta {
        return Err(Error::HeaderMismatch("stream config does not match dataset".into()));
    }
    let mut state = StreamState::new(cfg)?;
    for p in data.points() {
        state.push(p)?;
    }
    state.finish()
}

/// Budget used to judge resident memory: the unit-constant bound evaluated
/// at the live coreset total, plus a fixed per-sketch header allowance and
/// the raw buffer.
pub fn stream_space_formula(cfg: &StreamConfig, n: usize, live_points: usize, live_sketches: usize) -> f64 {
    theoretical_upper_bound(
        n as u64,
        cfg.k as u64,
        cfg.d as u64,
        cfg.delta,
        cfg.eps / 2.0,
        cfg.z,
        live_points as u64,
    ) + 256.0 * live_sketches as f64
        + (cfg.block_size * cfg.d) as f64 * ceil_log2(cfg.delta) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cost;
    use crate::rng::generator;
    use rand::Rng;

    fn random_grid(n: usize, d: usize, delta: u64, seed: u64) -> GridDataset {
        let mut rng = generator(seed);
        let coords = (0..n * d).map(|_| rng.random_range(1..=delta)).collect();
        GridDataset::new(d, delta, coords).unwrap()
    }

    #[test]
    fn single_site_matches_offline() {
        let data = random_grid(80, 3, 256, 1);
        let part = SitePartition::split_even(&data, 1).unwrap();
        let run = run_coordinator(&part, 3, Power::TWO, 0.2, CoresetMethod::Identity, 9).unwrap();
        let offline = compress(&data, 3, Power::TWO, 0.2, CoresetMethod::Identity, 9).unwrap();
        assert_eq!(run.transmissions[0], offline.sketch.to_bytes());
        assert_eq!(run.ledger.total_bits, offline.sketch.bit_size().total_bits);
        let c = CenterSet::from_points(&[vec![10.0, 20.0, 30.0]]).unwrap();
        assert_eq!(
            run.merged.estimate_cost(&c).unwrap(),
            offline.sketch.estimate_cost(&c).unwrap()
        );
    }

    #[test]
    fn ledger_sums_sites() {
        let data = random_grid(200, 2, 128, 2);
        let part = SitePartition::split_even(&data, 4).unwrap();
        let run = run_coordinator(&part, 2, Power::ONE, 0.1, CoresetMethod::Identity, 0).unwrap();
        assert_eq!(run.ledger.per_site_bits.len(), 4);
        assert_eq!(run.ledger.total_bits, run.ledger.per_site_bits.iter().sum::<u64>());
        assert_eq!(run.ledger.rounds, 1);
    }

    #[test]
    fn merge_rejects_mismatch() {
        let a = compress(&random_grid(20, 2, 64, 3), 2, Power::TWO, 0.2, CoresetMethod::Identity, 0).unwrap();
        let b = compress(&random_grid(20, 2, 32, 3), 2, Power::TWO, 0.2, CoresetMethod::Identity, 0).unwrap();
        assert!(matches!(
            merge_sketches(&[a.sketch.clone(), b.sketch]),
            Err(Error::HeaderMismatch(_))
        ));
        let one = merge_sketches(std::slice::from_ref(&a.sketch)).unwrap();
        let c = CenterSet::from_points(&[vec![3.0, 3.0]]).unwrap();
        assert_eq!(one.estimate_cost(&c).unwrap(), a.sketch.estimate_cost(&c).unwrap());
    }

    #[test]
    fn short_stream_is_offline() {
        let data = random_grid(50, 2, 64, 4);
        let cfg = StreamConfig::new(2, 64, 2, Power::TWO, 0.2, 50, 5);
        let res = run_stream(&data, cfg).unwrap();
        let offline = compress(&data, 2, Power::TWO, 0.2, CoresetMethod::Identity, 5).unwrap();
        assert_eq!(res.sketches.len(), 1);
        assert_eq!(res.sketches[0].to_bytes(), offline.sketch.to_bytes());
    }

    #[test]
    fn stream_merges_and_stays_accurate() {
        let data = random_grid(1200, 3, 512, 6);
        let mut cfg = StreamConfig::new(3, 512, 3, Power::TWO, 0.2, 100, 7);
        cfg.level0_cap = 4;
        let res = run_stream(&data, cfg).unwrap();
        assert_eq!(res.blocks, 12);
        assert_eq!(res.merges, 2);
        for s in 0..10 {
            let mut rng = generator(50 + s);
            let coords = (0..9).map(|_| rng.random_range(1.0..512.0)).collect();
            let c = CenterSet::new(3, coords).unwrap();
            let exact = cost(&data, &c, Power::TWO).unwrap();
            let est = res.merged.estimate_cost(&c).unwrap();
            assert!((est - exact).abs() <= 0.6 * exact);
        }
    }

    #[test]
    fn stream_validates() {
        let cfg = StreamConfig::new(2, 64, 4, Power::TWO, 0.2, 4, 0);
        assert!(StreamState::new(cfg).is_err());
        let mut s = StreamState::new(StreamConfig::new(2, 64, 2, Power::TWO, 0.2, 4, 0)).unwrap();
        assert!(s.push(&[1, 65]).is_err());
        assert!(s.push(&[1]).is_err());
    }
}
