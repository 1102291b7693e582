//! MSB-first bit packing.

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn put(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value >> width == 0, "value {value} wider than {width} bits");
        for i in (0..width).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }

    pub fn push_bit(&mut self, bit: bool) {
        let pos = (self.len % 8) as u32;
        if pos == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> pos;
        }
        self.len += 1;
    }

    /// Two's-complement signed field.
    pub fn put_signed(&mut self, value: i64, width: u32) {
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        self.put(value as u64 & mask, width);
    }

    pub fn bit_len(&self) -> u64 {
        self.len
    }

    /// Bytes with the final byte zero-padded.
    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
    /// Bit offset of `bytes[0]` within the enclosing stream, for error reports.
    base: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], base: u64) -> Self {
        Self { bytes, pos: 0, base }
    }

    pub fn position(&self) -> u64 {
        self.base + self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.bytes.len() as u64 * 8 - self.pos
    }

    pub fn bit(&mut self) -> Result<bool> {
        if self.pos >= self.bytes.len() as u64 * 8 {
            return Err(Error::Truncated {
                bit_offset: self.position(),
            });
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn get(&mut self, width: u32) -> Result<u64> {
        if (width as u64) > self.remaining() {
            return Err(Error::Truncated {
                bit_offset: self.position(),
            });
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.bit()? as u64;
        }
        Ok(v)
    }

    pub fn get_signed(&mut self, width: u32) -> Result<i64> {
        let raw = self.get(width)?;
        if width == 0 {
            return Ok(0);
        }
        if width < 64 && raw >> (width - 1) & 1 == 1 {
            Ok((raw | (u64::MAX << width)) as i64)
        } else {
            Ok(raw as i64)
        }
    }
}

/// `⌈log₂ x⌉` for `x ≥ 1`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x >= 1, "ceil_log2 of zero");
    if x == 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Width of a two's-complement field holding `v`.
pub fn signed_width(v: i64) -> u32 {
    if v >= 0 {
        65 - (v as u64).leading_zeros()
    } else {
        65 - (!(v as u64)).leading_zeros()
    }
}
