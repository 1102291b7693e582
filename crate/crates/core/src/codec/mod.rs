//! The quantizing sketch codec.
//!
//! A sketch stores the approximate centers verbatim and, for every coreset
//! point, a quantized weight plus the quantized offset of the point from its
//! nearest approximate center. Offsets are integers, so a zero offset costs a
//! single bit and nonzero offsets have a small, bounded exponent range.
//!
//! Wire layout (all integers little-endian in the fixed header, then an
//! MSB-first bit stream):
//!
//! ```text
//! "KZSK" u16:version
//! u32:k u32:d u32:z_num u32:z_den u64:Δ u32:ε(f32 bits) u64:n u64:|S|
//! u8:weight_expo_width u8:coord_expo_width
//! k·d × (center coord − 1)              ⌈log₂Δ⌉ bits each
//! for each center l:
//!     |S_l|                              ⌈log₂(|S|+1)⌉ bits
//!     for each point of S_l:
//!         weight:  zero? [expo (signed) | fraction (f_w bits)]
//!         d × coord offset: zero? [sign | expo | fraction (f_x bits)]
//! zero padding to a byte boundary
//! ```

pub mod bits;
pub mod scalar;

use serde::{Deserialize, Serialize};

use crate::coreset::{approx_centers, build_coreset, ApproxCenters, CoresetMethod, WeightedCoreset};
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    nearest_center, validate_epsilon, weighted_cost, CenterSet, GridDataset, PointCloud, Power,
    RealDataset,
};
use crate::rng::derive_seed;

use bits::{ceil_log2, signed_width, BitReader, BitWriter};
pub use scalar::{encode_scalar, ScalarCode};

pub const MAGIC: [u8; 4] = *b"KZSK";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 52;

/// Fixed metadata preceding the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchHeader {
    pub k: u32,
    pub d: u32,
    pub z: Power,
    pub delta: u64,
    /// ε as stored on the wire (single precision bits).
    pub eps_bits: u32,
    pub n: u64,
    pub coreset_size: u64,
    pub weight_expo_width: u8,
    pub coord_expo_width: u8,
}

impl SketchHeader {
    pub fn epsilon(&self) -> f64 {
        f32::from_bits(self.eps_bits) as f64
    }

    /// Fraction bits for weights, `⌈log₂(4/ε)⌉`.
    pub fn weight_fraction_bits(&self) -> u32 {
        weight_fraction_bits(self.epsilon())
    }

    /// Fraction bits for coordinate offsets, `⌈log₂(4z/ε)⌉`.
    pub fn coord_fraction_bits(&self) -> u32 {
        coord_fraction_bits(self.epsilon(), self.z)
    }

    pub fn center_width(&self) -> u32 {
        ceil_log2(self.delta)
    }

    pub fn count_width(&self) -> u32 {
        ceil_log2(self.coreset_size + 1)
    }

    /// Weights at or below this value are stored as zero.
    pub fn zero_threshold(&self) -> f64 {
        if self.coreset_size == 0 {
            0.0
        } else {
            self.epsilon() / (4.0 * self.coreset_size as f64)
        }
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.d.to_le_bytes());
        out.extend_from_slice(&self.z.num().to_le_bytes());
        out.extend_from_slice(&self.z.den().to_le_bytes());
        out.extend_from_slice(&self.delta.to_le_bytes());
        out.extend_from_slice(&self.eps_bits.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.coreset_size.to_le_bytes());
        out.push(self.weight_expo_width);
        out.push(self.coord_expo_width);
    }

    fn read(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 6 {
            return Err(Error::Truncated {
                bit_offset: bytes.len() as u64 * 8,
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic {
                expected: MAGIC,
                found: magic,
            });
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        if bytes.len() < HEADER_BYTES {
            return Err(Error::Truncated {
                bit_offset: bytes.len() as u64 * 8,
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let corrupt = |byte: usize, reason: &str| Error::Corrupt {
            bit_offset: byte as u64 * 8,
            reason: reason.to_string(),
        };
        let k = u32_at(6);
        let d = u32_at(10);
        let z = Power::new(u32_at(14), u32_at(18)).map_err(|_| corrupt(14, "invalid z"))?;
        let delta = u64_at(22);
        let eps_bits = u32_at(30);
        let n = u64_at(34);
        let coreset_size = u64_at(42);
        let weight_expo_width = bytes[50];
        let coord_expo_width = bytes[51];
        if k == 0 || d == 0 {
            return Err(corrupt(6, "k and d must be positive"));
        }
        if delta < 2 {
            return Err(corrupt(22, "Δ must be at least 2"));
        }
        let eps = f32::from_bits(eps_bits) as f64;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(corrupt(30, "ε outside (0,1)"));
        }
        if coreset_size > n {
            return Err(corrupt(42, "|S| exceeds n"));
        }
        if !(1..=63).contains(&weight_expo_width) || !(1..=63).contains(&coord_expo_width) {
            return Err(corrupt(50, "exponent width out of range"));
        }
        Ok(Self {
            k,
            d,
            z,
            delta,
            eps_bits,
            n,
            coreset_size,
            weight_expo_width,
            coord_expo_width,
        })
    }
}

pub fn weight_fraction_bits(eps: f64) -> u32 {
    ((4.0 / eps).log2().ceil() as u32).clamp(1, 52)
}

pub fn coord_fraction_bits(eps: f64, z: Power) -> u32 {
    ((4.0 * z.value() / eps).log2().ceil() as u32).clamp(1, 52)
}

/// Signed weight-exponent width from the a-priori weight range
/// `(ε/(4n), (1+4ε)n]`.
pub fn nominal_weight_expo_width(n: u64, eps: f64) -> u32 {
    let n = n.max(1) as f64;
    let hi = ((1.0 + 4.0 * eps) * n).log2().ceil() as i64;
    let lo = (eps / (4.0 * n)).log2().floor() as i64;
    let range = (hi - lo).max(1) as u64;
    ceil_log2(range) + 1
}

/// Width of the unsigned coordinate exponent, covering `0..=⌈log₂Δ⌉`.
pub fn coord_expo_width(delta: u64) -> u32 {
    ceil_log2(ceil_log2(delta) as u64 + 1).max(1)
}

/// One quantized coreset point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedPoint {
    pub weight: ScalarCode,
    pub offsets: Vec<ScalarCode>,
}

/// Bits by category; `total_bits` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BitLedger {
    pub header_bits: u64,
    pub center_bits: u64,
    pub weight_bits: u64,
    pub coordinate_bits: u64,
    pub total_bits: u64,
}

/// An encoded sketch. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sketch {
    pub header: SketchHeader,
    /// `k·d` grid coordinates of the approximate centers.
    pub centers: Vec<u64>,
    /// Points grouped by nearest approximate center, in center order.
    pub groups: Vec<Vec<EncodedPoint>>,
}

/// Order in which coreset points appear in an encoded sketch: grouped by
/// nearest center (ties to the lowest index), stable within a group.
pub fn partition_order<P: PointCloud + ?Sized>(points: &P, centers: &CenterSet) -> Vec<usize> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); centers.k()];
    for i in 0..points.len() {
        groups[nearest_center(points, i, centers).0].push(i);
    }
    groups.concat()
}

fn check_on_grid(data: &GridDataset, delta: u64) -> Result<()> {
    for (point, p) in data.points().enumerate() {
        if let Some(&value) = p.iter().find(|&&c| c < 1 || c > delta) {
            return Err(Error::OffGrid {
                point,
                value: value as i64,
                delta,
            });
        }
    }
    Ok(())
}

/// Quantizes a weighted coreset relative to approximate centers.
pub fn encode(
    coreset: &WeightedCoreset,
    centers: &ApproxCenters,
    z: Power,
    delta: u64,
    eps: f64,
) -> Result<Sketch> {
    validate_epsilon(eps)?;
    if delta < 2 {
        return Err(invalid("delta", "grid side must be at least 2"));
    }
    let d = centers.points.dim();
    if coreset.points.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: coreset.points.dim(),
        });
    }
    check_on_grid(&centers.points, delta)?;
    check_on_grid(&coreset.points, delta)?;
    crate::geometry::validate_weights(&coreset.weights)?;

    let eps_bits = (eps as f32).to_bits();
    let size = coreset.len() as u64;
    let mut header = SketchHeader {
        k: centers.k() as u32,
        d: d as u32,
        z,
        delta,
        eps_bits,
        n: coreset.source_n as u64,
        coreset_size: size,
        weight_expo_width: 0,
        coord_expo_width: coord_expo_width(delta) as u8,
    };
    if header.epsilon() >= 1.0 {
        return Err(invalid("epsilon", "rounds to 1 in single precision"));
    }
    let f_w = header.weight_fraction_bits();
    let f_x = header.coord_fraction_bits();
    let threshold = header.zero_threshold();

    let center_set = centers.center_set();
    let mut groups: Vec<Vec<EncodedPoint>> = vec![Vec::new(); centers.k()];
    let mut expo_width = nominal_weight_expo_width(header.n, header.epsilon());
    for i in 0..coreset.len() {
        let (l, _) = nearest_center(&coreset.points, i, &center_set);
        let weight = encode_scalar(coreset.weights[i], f_w, threshold);
        if !weight.is_zero {
            expo_width = expo_width.max(signed_width(weight.expo as i64));
        }
        let c = centers.points.point(l);
        let offsets = coreset
            .points
            .point(i)
            .iter()
            .zip(c)
            .map(|(&p, &cc)| encode_scalar(p as f64 - cc as f64, f_x, 0.0))
            .collect();
        groups[l].push(EncodedPoint { weight, offsets });
    }
    header.weight_expo_width = expo_width as u8;

    Ok(Sketch {
        header,
        centers: centers.points.coords().to_vec(),
        groups,
    })
}

/// Decoded coreset: exact reconstruction of every quantized value.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSketch {
    pub header: SketchHeader,
    pub centers: CenterSet,
    pub weights: Vec<f64>,
    pub points: RealDataset,
}

impl DecodedSketch {
    /// `Σ ŵ(p)·dist^z(p̂, C)` for any center set of matching dimension.
    pub fn estimate_cost(&self, centers: &CenterSet) -> Result<f64> {
        if self.weights.is_empty() {
            if centers.dim() != self.header.d as usize {
                return Err(Error::DimensionMismatch {
                    expected: self.header.d as usize,
                    got: centers.dim(),
                });
            }
            return Ok(0.0);
        }
        weighted_cost(&self.points, &self.weights, centers, self.header.z)
    }
}

impl Sketch {
    pub fn coreset_size(&self) -> usize {
        self.header.coreset_size as usize
    }

    pub fn dim(&self) -> usize {
        self.header.d as usize
    }

    /// Approximate centers as stored.
    pub fn center_set(&self) -> CenterSet {
        CenterSet::new(self.dim(), self.centers.iter().map(|&c| c as f64).collect())
            .expect("stored centers are finite")
    }

    pub fn decode(&self) -> DecodedSketch {
        let d = self.dim();
        let f_w = self.header.weight_fraction_bits();
        let f_x = self.header.coord_fraction_bits();
        let mut weights = Vec::with_capacity(self.coreset_size());
        let mut coords = Vec::with_capacity(self.coreset_size() * d);
        for (l, group) in self.groups.iter().enumerate() {
            let c = &self.centers[l * d..(l + 1) * d];
            for p in group {
                weights.push(p.weight.decode(f_w));
                for (o, &cc) in p.offsets.iter().zip(c) {
                    coords.push(cc as f64 + o.decode(f_x));
                }
            }
        }
        DecodedSketch {
            header: self.header,
            centers: self.center_set(),
            weights,
            points: RealDataset::new(d, coords).expect("decoded values are finite"),
        }
    }

    pub fn estimate_cost(&self, centers: &CenterSet) -> Result<f64> {
        self.decode().estimate_cost(centers)
    }

    pub fn bit_size(&self) -> BitLedger {
        let h = &self.header;
        let d = h.d as u64;
        let f_w = h.weight_fraction_bits() as u64;
        let f_x = h.coord_fraction_bits() as u64;
        let header_bits = HEADER_BYTES as u64 * 8 + h.k as u64 * h.count_width() as u64;
        let center_bits = h.k as u64 * d * h.center_width() as u64;
        let mut weight_bits = 0;
        let mut coordinate_bits = 0;
        for p in self.groups.iter().flatten() {
            weight_bits += 1 + if p.weight.is_zero {
                0
            } else {
                h.weight_expo_width as u64 + f_w
            };
            for o in &p.offsets {
                coordinate_bits += 1 + if o.is_zero {
                    0
                } else {
                    1 + h.coord_expo_width as u64 + f_x
                };
            }
        }
        BitLedger {
            header_bits,
            center_bits,
            weight_bits,
            coordinate_bits,
            total_bits: header_bits + center_bits + weight_bits + coordinate_bits,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(HEADER_BYTES + 64);
        h.write(&mut out);
        let f_w = h.weight_fraction_bits();
        let f_x = h.coord_fraction_bits();
        let mut w = BitWriter::new();
        for &c in &self.centers {
            w.put(c - 1, h.center_width());
        }
        for group in &self.groups {
            w.put(group.len() as u64, h.count_width());
            for p in group {
                w.push_bit(p.weight.is_zero);
                if !p.weight.is_zero {
                    w.put_signed(p.weight.expo as i64, h.weight_expo_width as u32);
                    w.put(p.weight.fraction, f_w);
                }
                for o in &p.offsets {
                    w.push_bit(o.is_zero);
                    if !o.is_zero {
                        w.push_bit(o.sign);
                        w.put(o.expo as u64, h.coord_expo_width as u32);
                        w.put(o.fraction, f_x);
                    }
                }
            }
        }
        out.extend_from_slice(&w.into_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = SketchHeader::read(bytes)?;
        let base = HEADER_BYTES as u64 * 8;
        let mut r = BitReader::new(&bytes[HEADER_BYTES..], base);
        let d = header.d as usize;
        let k = header.k as usize;
        let f_w = header.weight_fraction_bits();
        let f_x = header.coord_fraction_bits();
        let max_coord_expo = header.center_width() as u64;

        let corrupt = |at: u64, reason: String| Error::Corrupt {
            bit_offset: at,
            reason,
        };
        let needed = (k as u64)
            .checked_mul(d as u64)
            .and_then(|kd| kd.checked_mul(header.center_width() as u64))
            .ok_or_else(|| corrupt(base, "k·d overflows".into()))?;
        if needed > r.remaining() {
            return Err(Error::Truncated {
                bit_offset: base + r.remaining(),
            });
        }
        let mut centers = Vec::with_capacity(k * d);
        for _ in 0..k * d {
            let at = r.position();
            let v = r.get(header.center_width())?;
            if v >= header.delta {
                return Err(corrupt(at, format!("center coordinate {} exceeds Δ", v + 1)));
            }
            centers.push(v + 1);
        }

        let mut groups = Vec::with_capacity(k);
        let mut seen = 0u64;
        for _ in 0..k {
            let at = r.position();
            let count = r.get(header.count_width())?;
            seen += count;
            if seen > header.coreset_size {
                return Err(corrupt(at, "group sizes exceed |S|".into()));
            }
            let mut group = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let weight = if r.bit()? {
                    ScalarCode::ZERO
                } else {
                    let expo = r.get_signed(header.weight_expo_width as u32)? as i32;
                    let fraction = r.get(f_w)?;
                    ScalarCode {
                        is_zero: false,
                        sign: false,
                        expo,
                        fraction,
                    }
                };
                let mut offsets = Vec::with_capacity(d);
                for _ in 0..d {
                    if r.bit()? {
                        offsets.push(ScalarCode::ZERO);
                        continue;
                    }
                    let sign = r.bit()?;
                    let at = r.position();
                    let expo = r.get(header.coord_expo_width as u32)?;
                    if expo > max_coord_expo {
                        return Err(corrupt(at, format!("offset exponent {expo} out of range")));
                    }
                    let fraction = r.get(f_x)?;
                    offsets.push(ScalarCode {
                        is_zero: false,
                        sign,
                        expo: expo as i32,
                        fraction,
                    });
                }
                group.push(EncodedPoint { weight, offsets });
            }
            groups.push(group);
        }
        if seen != header.coreset_size {
            return Err(corrupt(r.position(), format!("{seen} points but header says {}", header.coreset_size)));
        }
        if r.remaining() >= 8 {
            return Err(corrupt(r.position(), "trailing bytes after payload".into()));
        }
        while r.remaining() > 0 {
            let at = r.position();
            if r.bit()? {
                return Err(corrupt(at, "nonzero padding".into()));
            }
        }
        Ok(Self {
            header,
            centers,
            groups,
        })
    }
}

/// Unit-constant bound `kd·log₂Δ + |S|(log₂(4/ε) + log₂max{log₂(4|S|/ε), log₂n}
/// + d·log₂(4z/ε) + d·log₂log₂Δ)`, or `nd·log₂Δ` when `n ≤ k`.
///
/// The inner `max` is floored at 2 so its logarithm is never negative.
pub fn theoretical_upper_bound(
    n: u64,
    k: u64,
    d: u64,
    delta: u64,
    eps: f64,
    z: Power,
    coreset_size: u64,
) -> f64 {
    let log_delta = (delta as f64).log2();
    if n <= k {
        return n as f64 * d as f64 * log_delta;
    }
    let s = coreset_size as f64;
    let inner = (4.0 * s / eps).log2().max((n as f64).log2()).max(2.0);
    let per_point = (4.0 / eps).log2()
        + inner.log2()
        + d as f64 * (4.0 * z.value() / eps).log2()
        + d as f64 * log_delta.log2().max(0.0);
    k as f64 * d as f64 * log_delta + s * per_point
}

/// Approximate centers, coreset and sketch for one dataset.
#[derive(Debug, Clone)]
pub struct Compressed {
    pub centers: ApproxCenters,
    pub coreset: WeightedCoreset,
    pub sketch: Sketch,
}

/// Runs the whole compressor. Sensitivity coresets are built at `ε/5` so
/// the sampling and quantization errors together stay within `ε`.
pub fn compress(
    data: &GridDataset,
    k: usize,
    z: Power,
    eps: f64,
    method: CoresetMethod,
    seed: u64,
) -> Result<Compressed> {
    let centers = approx_centers(data, k, z, derive_seed(seed, 3))?;
    let coreset_eps = match method {
        CoresetMethod::Identity => eps,
        CoresetMethod::Sensitivity => eps / 5.0,
    };
    let coreset = build_coreset(data, k, z, coreset_eps, method, derive_seed(seed, 4))?;
    let sketch = encode(&coreset, &centers, z, data.delta(), eps)?;
    Ok(Compressed {
        centers,
        coreset,
        sketch,
    })
}
