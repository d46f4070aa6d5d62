//! Segment entropy stage: zigzag-mapped coefficients and zero runs, written as
//! base-128 varints.
//!
//! A token `u >= 1` is one nonzero coefficient with `zigzag(c) == u`. A token
//! `0` is followed by a run length `n >= 1` of zero coefficients.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("varint truncated at byte {0}")]
    TruncatedVarint(usize),
    #[error("varint at byte {0} overflows 64 bits")]
    VarintOverflow(usize),
    #[error("zero-run of length 0 at byte {0}")]
    EmptyRun(usize),
    #[error("coefficient at byte {0} does not fit in 32 bits")]
    CoefficientRange(usize),
    #[error("segment decodes to more than the expected {expected} coefficients")]
    TooManyCoefficients { expected: usize },
    #[error("segment decodes to {got} coefficients, expected {expected}")]
    TooFewCoefficients { expected: usize, got: usize },
}

#[inline]
pub fn zigzag(c: i64) -> u64 {
    ((c << 1) ^ (c >> 63)) as u64
}

#[inline]
pub fn unzigzag(u: u64) -> i64 {
    ((u >> 1) as i64) ^ -((u & 1) as i64)
}

pub fn write_varint(mut v: u64, out: &mut Vec<u8>) {
    while v >= 0x80 {
        out.push((v as u8 & 0x7f) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

/// Reads one varint from `bytes[*pos..]` and advances `pos`.
pub fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, SegmentError> {
    let start = *pos;
    let mut v = 0u64;
    let mut shift = 0u32;
    loop {
        let b = *bytes.get(*pos).ok_or(SegmentError::TruncatedVarint(start))?;
        *pos += 1;
        let part = (b & 0x7f) as u64;
        if shift == 63 && part > 1 || shift > 63 {
            return Err(SegmentError::VarintOverflow(start));
        }
        v |= part << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

/// Appends the token stream for `coeffs` to `out`.
pub fn encode_segment<I: IntoIterator<Item = i32>>(coeffs: I, out: &mut Vec<u8>) {
    let mut run = 0u64;
    for c in coeffs {
        if c == 0 {
            run += 1;
            continue;
        }
        if run > 0 {
            out.push(0);
            write_varint(run, out);
            run = 0;
        }
        write_varint(zigzag(c as i64), out);
    }
    if run > 0 {
        out.push(0);
        write_varint(run, out);
    }
}

/// Decodes a token stream that must yield exactly `count` coefficients.
pub fn decode_segment(bytes: &[u8], count: usize) -> Result<Vec<i32>, SegmentError> {
    let mut out = Vec::with_capacity(count);
    let mut pos = 0;
    while pos < bytes.len() {
        let at = pos;
        let token = read_varint(bytes, &mut pos)?;
        if token == 0 {
            let run = read_varint(bytes, &mut pos)?;
            if run == 0 {
                return Err(SegmentError::EmptyRun(at));
            }
            if run > (count - out.len()) as u64 {
                return Err(SegmentError::TooManyCoefficients { expected: count });
            }
            out.resize(out.len() + run as usize, 0);
        } else {
            if out.len() == count {
                return Err(SegmentError::TooManyCoefficients { expected: count });
            }
            let c = i32::try_from(unzigzag(token)).map_err(|_| SegmentError::CoefficientRange(at))?;
            out.push(c);
        }
    }
    if out.len() != count {
        return Err(SegmentError::TooFewCoefficients { expected: count, got: out.len() });
    }
    Ok(out)
}
