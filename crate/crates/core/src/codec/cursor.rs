// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MalformedKind {
    BadMagic,
    BadVersion,
    Truncated,
    OverlongVarint,
    BadSectionOrder,
    SectionSizeMismatch,
    /// Unknown opcode, or an unexpected tag byte where the format allows
    /// only a fixed set (value types, limit flags, export kinds, ...).
    BadOpcode,
    BadUtf8,
}

impl fmt::Display for MalformedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MalformedKind::BadMagic => "bad-magic",
            MalformedKind::BadVersion => "bad-version",
            MalformedKind::Truncated => "truncated",
            MalformedKind::OverlongVarint => "overlong-varint",
            MalformedKind::BadSectionOrder => "bad-section-order",
            MalformedKind::SectionSizeMismatch => "section-size-mismatch",
            MalformedKind::BadOpcode => "bad-opcode",
            MalformedKind::BadUtf8 => "bad-utf8",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed binary ({kind}) at offset {offset}: {detail}")]
pub struct MalformedError {
    pub kind: MalformedKind,
    pub offset: usize,
    pub detail: String,
}

impl MalformedError {
    pub fn new(kind: MalformedKind, offset: usize, detail: impl Into<String>) -> Self {
        MalformedError {
            kind,
            offset,
            detail: detail.into(),
        }
    }
}

pub type DecodeResult<T> = Result<T, MalformedError>;

/// Forward-only reader over a byte buffer.
///
/// There is no way to move the position backwards; `limit` narrows the
/// readable window to the current section or function body.
#[derive(Debug, Clone)]
pub struct ByteCursor<'a> {
    buffer: &'a [u8],
    position: usize,
    limit: usize,
}

impl<'a> ByteCursor<'a> {
    pub fn new(buffer: &'a [u8]) -> Self {
        ByteCursor {
            buffer,
            position: 0,
            limit: buffer.len(),
        }
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn remaining(&self) -> usize {
        self.limit - self.position
    }

    pub fn is_empty(&self) -> bool {
        self.position == self.limit
    }

    /// Restricts reads to the next `len` bytes, returning the previous
    /// limit so the caller can restore it with [`ByteCursor::pop_limit`].
    pub fn push_limit(&mut self, len: usize) -> DecodeResult<usize> {
        if len > self.remaining() {
            return Err(self.truncated(format!(
                "declared size {len} exceeds the {} remaining bytes",
                self.remaining()
            )));
        }
        let outer = self.limit;
        self.limit = self.position + len;
        Ok(outer)
    }

    pub fn pop_limit(&mut self, outer: usize) {
        debug_assert!(outer >= self.limit && outer <= self.buffer.len());
        self.limit = outer;
    }

    pub fn error(&self, kind: MalformedKind, detail: impl Into<String>) -> MalformedError {
        MalformedError::new(kind, self.position, detail)
    }

    fn truncated(&self, detail: impl Into<String>) -> MalformedError {
        self.error(MalformedKind::Truncated, detail)
    }

    pub fn read_u8(&mut self) -> DecodeResult<u8> {
        if self.position >= self.limit {
            return Err(self.truncated("unexpected end of input"));
        }
        let b = self.buffer[self.position];
        self.position += 1;
        Ok(b)
    }

    pub fn read_bytes(&mut self, len: usize) -> DecodeResult<&'a [u8]> {
        if len > self.remaining() {
            return Err(self.truncated(format!(
                "need {len} bytes, {} remaining",
                self.remaining()
            )));
        }
        let s = &self.buffer[self.position..self.position + len];
        self.position += len;
        Ok(s)
    }

    pub fn read_array<const N: usize>(&mut self) -> DecodeResult<[u8; N]> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.read_bytes(N)?);
        Ok(out)
    }

    /// Unsigned LEB128 of at most `ceil(bits / 7)` bytes.
    pub fn read_uleb128(&mut self, bits: u32) -> DecodeResult<u64> {
        debug_assert!(bits == 32 || bits == 64);
        let max_bytes = bits.div_ceil(7);
        let start = self.position;
        let mut result = 0u64;
        let mut shift = 0u32;
        for i in 0..max_bytes {
            let byte = self.read_u8()?;
            let payload = u64::from(byte & 0x7F);
            if i == max_bytes - 1 {
                // Bits beyond the target width must be zero.
                let used = bits - shift;
                if used < 7 && (payload >> used) != 0 {
                    return Err(MalformedError::new(
                        MalformedKind::OverlongVarint,
                        start,
                        format!("u{bits} value out of range"),
                    ));
                }
            }
            result |= payload << shift;
            if byte & 0x80 == 0 {
                return Ok(result);
            }
            shift += 7;
        }
        Err(MalformedError::new(
            MalformedKind::OverlongVarint,
            start,
            format!("u{bits} encoding longer than {max_bytes} bytes"),
        ))
    }

    /// Signed LEB128 of at most `ceil(bits / 7)` bytes, sign-extended from
    /// the final byte.
    pub fn read_sleb128(&mut self, bits: u32) -> DecodeResult<i64> {
        debug_assert!(bits == 32 || bits == 64);
        let max_bytes = bits.div_ceil(7);
        let start = self.position;
        let mut result = 0i64;
        let mut shift = 0u32;
        for i in 0..max_bytes {
            let byte = self.read_u8()?;
            let payload = i64::from(byte & 0x7F);
            if i == max_bytes - 1 {
                // The unused high bits must all equal the sign bit.
                let used = bits - shift;
                if used < 7 {
                    let rest = (byte & 0x7F) >> (used - 1);
                    let all = (1u8 << (8 - used)) - 1;
                    let all = all & (0x7F >> (used - 1));
                    if rest != 0 && rest != all {
                        return Err(MalformedError::new(
                            MalformedKind::OverlongVarint,
                            start,
                            format!("s{bits} value out of range"),
                        ));
                    }
                }
            }
            if shift < 64 {
                result |= payload << shift;
            }
            shift += 7;
            if byte & 0x80 == 0 {
                if shift < 64 && byte & 0x40 != 0 {
                    result |= -1i64 << shift;
                }
                return Ok(result);
            }
        }
        Err(MalformedError::new(
            MalformedKind::OverlongVarint,
            start,
            format!("s{bits} encoding longer than {max_bytes} bytes"),
        ))
    }

    pub fn read_u32(&mut self) -> DecodeResult<u32> {
        Ok(self.read_uleb128(32)? as u32)
    }

    pub fn read_s32(&mut self) -> DecodeResult<i32> {
        Ok(self.read_sleb128(32)? as i32)
    }

    pub fn read_s64(&mut self) -> DecodeResult<i64> {
        self.read_sleb128(64)
    }

    pub fn read_name(&mut self) -> DecodeResult<String> {
        let len = self.read_u32()? as usize;
        let start = self.position;
        let bytes = self.read_bytes(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|e| {
            MalformedError::new(
                MalformedKind::BadUtf8,
                start + e.utf8_error().valid_up_to(),
                "name is not valid UTF-8",
            )
        })
    }
}

/// Appends the minimal unsigned LEB128 encoding of `v`.
pub fn write_uleb128(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7F) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Appends the minimal signed LEB128 encoding of `v`.
pub fn write_sleb128(out: &mut Vec<u8>, mut v: i64) {
    loop {
        let byte = (v & 0x7F) as u8;
        v >>= 7;
        let done = (v == 0 && byte & 0x40 == 0) || (v == -1 && byte & 0x40 != 0);
        if done {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent reference encoders: bit-by-bit group extraction rather
    // than the shifting loops above.
    fn ref_uleb(v: u64) -> Vec<u8> {
        let bits = 64 - v.leading_zeros().min(63);
        let groups = bits.div_ceil(7).max(1);
        (0..groups)
            .map(|g| {
                let chunk = ((v >> (7 * g)) & 0x7F) as u8;
                if g + 1 < groups {
                    chunk | 0x80
                } else {
                    chunk
                }
            })
            .collect()
    }

    fn ref_sleb(v: i64) -> Vec<u8> {
        // Smallest group count whose sign-extended value reproduces v.
        let mut groups = 1u32;
        while groups < 10 {
            let width = 7 * groups;
            let shifted = (v << (64 - width)) >> (64 - width);
            if shifted == v {
                break;
            }
            groups += 1;
        }
        (0..groups)
            .map(|g| {
                let chunk = if 7 * g < 64 { ((v >> (7 * g)) & 0x7F) as u8 } else { 0 };
                if g + 1 < groups {
                    chunk | 0x80
                } else {
                    chunk
                }
            })
            .collect()
    }

    #[test]
    fn uleb_examples() {
        let mut c = ByteCursor::new(&[0x00]);
        assert_eq!(c.read_uleb128(32).unwrap(), 0);
        assert_eq!(c.position(), 1);

        let mut c = ByteCursor::new(&[0xE5, 0x8E, 0x26]);
        assert_eq!(c.read_uleb128(32).unwrap(), 624485);
        assert_eq!(ref_uleb(624485), vec![0xE5, 0x8E, 0x26]);

        let mut c = ByteCursor::new(&[0x80, 0x80, 0x80, 0x80, 0x80, 0x00]);
        let e = c.read_uleb128(32).unwrap_err();
        assert_eq!(e.kind, MalformedKind::OverlongVarint);
        assert_eq!(e.offset, 0);

        let mut c = ByteCursor::new(&[0x80, 0x80]);
        assert_eq!(c.read_uleb128(32).unwrap_err().kind, MalformedKind::Truncated);
    }

    #[test]
    fn uleb_non_minimal_within_width_is_accepted() {
        let mut c = ByteCursor::new(&[0x80, 0x80, 0x80, 0x80, 0x00]);
        assert_eq!(c.read_uleb128(32).unwrap(), 0);
        // Fifth byte may only carry 4 payload bits for u32.
        let mut c = ByteCursor::new(&[0xFF, 0xFF, 0xFF, 0xFF, 0x0F]);
        assert_eq!(c.read_uleb128(32).unwrap(), u64::from(u32::MAX));
        let mut c = ByteCursor::new(&[0xFF, 0xFF, 0xFF, 0xFF, 0x1F]);
        assert_eq!(c.read_uleb128(32).unwrap_err().kind, MalformedKind::OverlongVarint);
    }

    #[test]
    fn sleb_examples() {
        let mut c = ByteCursor::new(&[0x7F]);
        assert_eq!(c.read_sleb128(32).unwrap(), -1);
        assert_eq!(ref_sleb(-1), vec![0x7F]);
        let mut c = ByteCursor::new(&[0x00]);
        assert_eq!(c.read_sleb128(32).unwrap(), 0);
        let mut c = ByteCursor::new(&[0x80]);
        assert_eq!(c.read_sleb128(32).unwrap_err().kind, MalformedKind::Truncated);
    }

    #[test]
    fn sleb_range_checks_final_byte() {
        // i32::MIN = 0x80 0x80 0x80 0x80 0x78
        let mut c = ByteCursor::new(&[0x80, 0x80, 0x80, 0x80, 0x78]);
        assert_eq!(c.read_sleb128(32).unwrap(), i64::from(i32::MIN));
        let mut c = ByteCursor::new(&[0xFF, 0xFF, 0xFF, 0xFF, 0x07]);
        assert_eq!(c.read_sleb128(32).unwrap(), i64::from(i32::MAX));
        let mut c = ByteCursor::new(&[0xFF, 0xFF, 0xFF, 0xFF, 0x0F]);
        assert_eq!(c.read_sleb128(32).unwrap_err().kind, MalformedKind::OverlongVarint);
        let mut c = ByteCursor::new(&[0x80, 0x80, 0x80, 0x80, 0x70]);
        assert_eq!(c.read_sleb128(32).unwrap_err().kind, MalformedKind::OverlongVarint);
        let mut c = ByteCursor::new(&[0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x80, 0x7F]);
        assert_eq!(c.read_sleb128(64).unwrap(), i64::MIN);
    }

    #[test]
    fn randomized_round_trip_against_reference_encoder() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1eb);
        for _ in 0..100_000 {
            let shift = rng.random_range(0..64u32);
            let u: u64 = rng.random::<u64>() >> shift;
            let mut out = Vec::new();
            write_uleb128(&mut out, u);
            assert_eq!(out, ref_uleb(u));
            assert_eq!(ByteCursor::new(&out).read_uleb128(64).unwrap(), u);

            let s = (rng.random::<u64>() as i64) >> shift;
            let mut out = Vec::new();
            write_sleb128(&mut out, s);
            assert_eq!(out, ref_sleb(s));
            assert_eq!(ByteCursor::new(&out).read_sleb128(64).unwrap(), s);

            let s32 = s as i32;
            let mut out = Vec::new();
            write_sleb128(&mut out, i64::from(s32));
            assert_eq!(ByteCursor::new(&out).read_sleb128(32).unwrap(), i64::from(s32));
        }
    }

    #[test]
    fn limits_confine_reads() {
        let data = [1u8, 2, 3, 4];
        let mut c = ByteCursor::new(&data);
        let outer = c.push_limit(2).unwrap();
        assert_eq!(c.read_bytes(2).unwrap(), &[1, 2]);
        assert_eq!(c.read_u8().unwrap_err().kind, MalformedKind::Truncated);
        c.pop_limit(outer);
        assert_eq!(c.read_u8().unwrap(), 3);
        assert!(c.push_limit(5).is_err());
    }

    proptest! {
        #[test]
        fn cursor_never_moves_backwards(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let mut c = ByteCursor::new(&bytes);
            let mut last = 0;
            loop {
                let r = if last % 2 == 0 { c.read_uleb128(32).map(|_| ()) } else { c.read_sleb128(64).map(|_| ()) };
                prop_assert!(c.position() >= last);
                prop_assert!(c.position() <= c.limit());
                last = c.position();
                if r.is_err() || c.is_empty() { break; }
            }
        }
    }
}
