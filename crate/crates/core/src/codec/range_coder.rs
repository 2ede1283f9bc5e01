//! Adaptive binary range coder with 11-bit probabilities.

use crate::error::{Error, Result};

const PROB_BITS: u32 = 11;
const PROB_ONE: u16 = 1 << PROB_BITS;
const MOVE_BITS: u32 = 5;
const TOP: u32 = 1 << 24;

/// Adaptive probability that the next bit is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prob(u16);

impl Default for Prob {
    fn default() -> Self {
        Prob(PROB_ONE / 2)
    }
}

pub struct Encoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for Encoder {
    fn default() -> Self {
        Self::new()
    }
}

impl Encoder {
    pub fn new() -> Self {
        Encoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut temp = self.cache;
            loop {
                self.out.push(temp.wrapping_add(carry));
                temp = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    pub fn bit(&mut self, p: &mut Prob, bit: bool) {
        let bound = (self.range >> PROB_BITS) * p.0 as u32;
        if !bit {
            self.range = bound;
            p.0 += (PROB_ONE - p.0) >> MOVE_BITS;
        } else {
            self.low += bound as u64;
            self.range -= bound;
            p.0 -= p.0 >> MOVE_BITS;
        }
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    /// Equiprobable bits, most significant first.
    pub fn direct(&mut self, value: u32, bits: u32) {
        for i in (0..bits).rev() {
            self.range >>= 1;
            if (value >> i) & 1 == 1 {
                self.low += self.range as u64;
            }
            while self.range < TOP {
                self.range <<= 8;
                self.shift_low();
            }
        }
    }

    /// `bits`-bit symbol through a binary tree of `2^bits` probabilities.
    pub fn tree(&mut self, probs: &mut [Prob], bits: u32, value: u32) {
        let mut m = 1usize;
        for i in (0..bits).rev() {
            let b = (value >> i) & 1 == 1;
            self.bit(&mut probs[m], b);
            m = (m << 1) | b as usize;
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub struct Decoder<'a> {
    code: u32,
    range: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self> {
        if input.len() < 5 {
            return Err(Error::Format("range-coded payload shorter than 5 bytes".into()));
        }
        if input[0] != 0 {
            return Err(Error::Format("range-coded payload has a bad lead byte".into()));
        }
        let code = u32::from_be_bytes([input[1], input[2], input[3], input[4]]);
        Ok(Decoder {
            code,
            range: u32::MAX,
            input,
            pos: 5,
        })
    }

    fn next_byte(&mut self) -> u8 {
        // Reads past the end yield zeros; callers detect truncation through
        // checksums and structural limits.
        let b = self.input.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b
    }

    fn normalize(&mut self) {
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | self.next_byte() as u32;
        }
    }

    pub fn bit(&mut self, p: &mut Prob) -> bool {
        let bound = (self.range >> PROB_BITS) * p.0 as u32;
        let bit = if self.code < bound {
            self.range = bound;
            p.0 += (PROB_ONE - p.0) >> MOVE_BITS;
            false
        } else {
            self.code -= bound;
            self.range -= bound;
            p.0 -= p.0 >> MOVE_BITS;
            true
        };
        self.normalize();
        bit
    }

    pub fn direct(&mut self, bits: u32) -> u32 {
        let mut v = 0u32;
        for _ in 0..bits {
            self.range >>= 1;
            let b = if self.code >= self.range {
                self.code -= self.range;
                1
            } else {
                0
            };
            v = (v << 1) | b;
            self.normalize();
        }
        v
    }

    pub fn tree(&mut self, probs: &mut [Prob], bits: u32) -> u32 {
        let mut m = 1usize;
        for _ in 0..bits {
            m = (m << 1) | self.bit(&mut probs[m]) as usize;
        }
        (m - (1 << bits)) as u32
    }

    /// True once the decoder has consumed bytes beyond the payload.
    pub fn overran(&self) -> bool {
        self.pos > self.input.len()
    }
}

/// Order-0 adaptive byte model; a reference use of the coder.
pub fn compress_bytes(data: &[u8]) -> Vec<u8> {
    let mut enc = Encoder::new();
    let mut probs = [Prob::default(); 256];
    enc.direct(data.len() as u32, 32);
    for &b in data {
        enc.tree(&mut probs, 8, b as u32);
    }
    enc.finish()
}

pub fn decompress_bytes(bytes: &[u8], max_len: usize) -> Result<Vec<u8>> {
    let mut dec = Decoder::new(bytes)?;
    let mut probs = [Prob::default(); 256];
    let len = dec.direct(32) as usize;
    if len > max_len {
        return Err(Error::Format(format!("declared length {len} exceeds {max_len}")));
    }
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(dec.tree(&mut probs, 8) as u8);
        if dec.pos > bytes.len() + 8 {
            return Err(Error::Format("range-coded payload truncated".into()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn skewed_bits_compress() {
        let mut enc = Encoder::new();
        let mut p = Prob::default();
        for i in 0..10_000 {
            enc.bit(&mut p, i % 100 == 0);
        }
        let bytes = enc.finish();
        assert!(bytes.len() < 200, "{} bytes", bytes.len());
        let mut dec = Decoder::new(&bytes).unwrap();
        let mut p = Prob::default();
        for i in 0..10_000 {
            assert_eq!(dec.bit(&mut p), i % 100 == 0);
        }
    }

    #[test]
    fn carries_propagate() {
        // Long runs of improbable ones force carries through 0xFF caches.
        let mut enc = Encoder::new();
        let mut p = Prob::default();
        let bits: Vec<bool> = (0..5000).map(|i| i % 7 != 3 || i % 11 == 0).collect();
        for &b in &bits {
            enc.bit(&mut p, b);
        }
        enc.direct(0xdead_beef, 32);
        let bytes = enc.finish();
        let mut dec = Decoder::new(&bytes).unwrap();
        let mut p = Prob::default();
        for &b in &bits {
            assert_eq!(dec.bit(&mut p), b);
        }
        assert_eq!(dec.direct(32), 0xdead_beef);
    }

    proptest! {
        #[test]
        fn arbitrary_bytes_round_trip(data in proptest::collection::vec(any::<u8>(), 0..2048)) {
            let c = compress_bytes(&data);
            prop_assert_eq!(decompress_bytes(&c, 1 << 20).unwrap(), data);
        }

        #[test]
        fn decoding_garbage_never_panics(data in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = decompress_bytes(&data, 4096);
        }
    }
}
