//! `Range: bytes=...` parsing for single ranges.

use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RangeError {
    /// Not a single well-formed byte range.
    Malformed,
    /// Well formed, but outside the resource.
    Unsatisfiable,
}

/// Parses one byte range against a resource of `len` bytes; the result is
/// half-open.
pub fn parse_range(header: &str, len: u64) -> Result<Range<u64>, RangeError> {
    let spec = header.trim().strip_prefix("bytes=").ok_or(RangeError::Malformed)?.trim();
    if spec.contains(',') {
        return Err(RangeError::Malformed);
    }
    let (a, b) = spec.split_once('-').ok_or(RangeError::Malformed)?;
    let (a, b) = (a.trim(), b.trim());
    let num = |s: &str| -> Result<u64, RangeError> {
        if s.is_empty() || !s.bytes().all(|c| c.is_ascii_digit()) {
            return Err(RangeError::Malformed);
        }
        s.parse().map_err(|_| RangeError::Malformed)
    };
    if a.is_empty() {
        // Suffix range: the last `n` bytes.
        let n = num(b)?;
        if n == 0 || len == 0 {
            return Err(RangeError::Unsatisfiable);
        }
        return Ok(len.saturating_sub(n)..len);
    }
    let start = num(a)?;
    let end = if b.is_empty() { u64::MAX } else { num(b)? };
    if end < start {
        return Err(RangeError::Malformed);
    }
    if start >= len {
        return Err(RangeError::Unsatisfiable);
    }
    Ok(start..end.min(len - 1) + 1)
}
