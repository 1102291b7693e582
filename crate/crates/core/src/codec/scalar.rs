//! Sign/exponent/fraction quantization of a single real.

use serde::{Deserialize, Serialize};

/// A real rounded to `f` fractional mantissa bits; the leading 1 is implicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScalarCode {
    pub is_zero: bool,
    /// `true` for negative values.
    pub sign: bool,
    pub expo: i32,
    pub fraction: u64,
}

impl ScalarCode {
    pub const ZERO: ScalarCode = ScalarCode {
        is_zero: true,
        sign: false,
        expo: 0,
        fraction: 0,
    };

    /// `±(1 + fraction/2^f)·2^expo`, computed exactly.
    pub fn decode(&self, f: u32) -> f64 {
        if self.is_zero {
            return 0.0;
        }
        let mantissa = 1.0 + self.fraction as f64 * pow2(-(f as i32));
        let mag = mantissa * pow2(self.expo);
        if self.sign {
            -mag
        } else {
            mag
        }
    }
}

/// `2^e` as an exact double, including the subnormal range.
pub fn pow2(e: i32) -> f64 {
    if (-1022..=1023).contains(&e) {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e > 1023 {
        f64::INFINITY
    } else if e >= -1074 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        0.0
    }
}

/// `⌊log₂ x⌋` and `x / 2^⌊log₂ x⌋ ∈ [1, 2)` for finite `x > 0`.
pub fn split_binary(x: f64) -> (i32, f64) {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        // Subnormal: renormalize by 2^64 (exact) and correct the exponent.
        let (e, m) = split_binary(x * pow2(64));
        return (e - 64, m);
    }
    let mantissa = f64::from_bits((bits & ((1u64 << 52) - 1)) | (1023u64 << 52));
    (biased - 1023, mantissa)
}

/// Quantizes `value` to `f` fractional bits; magnitudes at or below
/// `zero_threshold` become the zero code.
///
/// Rounding is to nearest with ties to even. A mantissa that rounds up to
/// 2.0 carries into the exponent.
pub fn encode_scalar(value: f64, f: u32, zero_threshold: f64) -> ScalarCode {
    assert!(value.is_finite(), "encode_scalar needs a finite value");
    assert!((1..=52).contains(&f), "fraction width must be in 1..=52");
    let mag = value.abs();
    if mag == 0.0 || mag <= zero_threshold {
        return ScalarCode::ZERO;
    }
    let (mut expo, mantissa) = split_binary(mag);
    // Exact: mantissa − 1 has at most 52 significant bits and scaling is a
    // pure exponent shift.
    let scaled = (mantissa - 1.0) * pow2(f as i32);
    let mut fraction = scaled.round_ties_even() as u64;
    if fraction == 1u64 << f {
        fraction = 0;
        expo += 1;
    }
    ScalarCode {
        is_zero: false,
        sign: value < 0.0,
        expo,
        fraction,
    }
}
