//! Group-of-frames coding: an intra keyframe followed by residual frames,
//! each a separate range-coded payload of 8x8 blocks per channel.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dct::{self, LUMA, ZIGZAG};
use super::quant::{QuantizationProfile, Uint8Image};
use super::range_coder::{Decoder, Encoder, Prob};
use crate::error::{Error, Result};
use crate::io::{checked_volume, put_f64, put_u16, put_u32, Reader, MAX_ELEMENTS};

const BLOCK: usize = dct::N;
const BANDS: usize = 16;
const MAX_PREFIX: usize = 24;
/// Frames accepted from a decoded chunk.
pub const MAX_GOF_FRAMES: usize = 4096;

/// Coefficient quantizer: a lossless residual path or an integer scale on
/// the luminance table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantizer {
    Lossless,
    Lossy(u16),
}

impl Quantizer {
    pub fn lossy(q: u16) -> Result<Self> {
        if q == 0 {
            return Err(Error::Range("quantizer q must be at least 1".into()));
        }
        Ok(Quantizer::Lossy(q))
    }

    /// Pinned worst-case absolute pixel error of one decoded frame.
    pub fn max_error(self) -> f64 {
        match self {
            Quantizer::Lossless => 0.0,
            Quantizer::Lossy(q) => dct::max_error_bound(q),
        }
    }
}

impl fmt::Display for Quantizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantizer::Lossless => write!(f, "lossless"),
            Quantizer::Lossy(q) => write!(f, "{q}"),
        }
    }
}

impl FromStr for Quantizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("lossless") {
            return Ok(Quantizer::Lossless);
        }
        let q: u16 = s
            .parse()
            .map_err(|_| Error::Config(format!("quantizer {s:?} is neither 'lossless' nor an integer")))?;
        Quantizer::lossy(q)
    }
}

impl Serialize for Quantizer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Quantizer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One coded group of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedGof {
    pub group_id: u32,
    /// Sequence index of the keyframe.
    pub first_frame: u32,
    pub quantizer: Quantizer,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub profile: QuantizationProfile,
    /// Range-coded payloads; index 0 is the keyframe.
    pub frames: Vec<Vec<u8>>,
}

impl EncodedGof {
    pub fn keyframe_bytes(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    pub fn inter_bytes(&self) -> usize {
        self.frames.iter().skip(1).map(Vec::len).sum()
    }

    /// Serialized chunk size.
    pub fn size_bytes(&self) -> usize {
        self.to_bytes().len()
    }

    /// Self-contained chunk ending in a CRC-32 of everything before it.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u32(&mut out, self.group_id);
        put_u32(&mut out, self.first_frame);
        let (mode, q) = match self.quantizer {
            Quantizer::Lossless => (1u8, 1u16),
            Quantizer::Lossy(q) => (0, q),
        };
        out.push(mode);
        put_u16(&mut out, q);
        put_u32(&mut out, self.width as u32);
        put_u32(&mut out, self.height as u32);
        put_u16(&mut out, self.channels as u16);
        out.push(self.profile.bits);
        for r in &self.profile.ranges {
            put_f64(&mut out, r[0]);
            put_f64(&mut out, r[1]);
        }
        put_u32(&mut out, self.frames.len() as u32);
        for f in &self.frames {
            put_u32(&mut out, f.len() as u32);
            out.extend_from_slice(f);
        }
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Format("GOF chunk shorter than its checksum".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader::new(body);
        let group_id = r.u32()?;
        let first_frame = r.u32()?;
        let mode = r.u8()?;
        let q = r.u16()?;
        let quantizer = match mode {
            0 => Quantizer::lossy(q)?,
            1 => Quantizer::Lossless,
            m => return Err(Error::Format(format!("unknown coding mode {m}"))),
        };
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let channels = r.u16()? as usize;
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Format("empty GOF frame shape".into()));
        }
        checked_volume(&[width, height, channels], MAX_ELEMENTS)?;
        let bits = r.u8()?;
        let mut ranges = Vec::with_capacity(channels);
        for _ in 0..channels {
            ranges.push([r.f64()?, r.f64()?]);
        }
        let profile = QuantizationProfile { ranges, bits };
        profile.validate().map_err(|e| Error::Format(format!("quantization profile: {e}")))?;
        let count = r.u32()? as usize;
        if count == 0 || count > MAX_GOF_FRAMES {
            return Err(Error::Format(format!("GOF frame count {count} outside 1..={MAX_GOF_FRAMES}")));
        }
        let mut frames = Vec::with_capacity(count.min(r.remaining() / 4 + 1));
        for _ in 0..count {
            let len = r.u32()? as usize;
            frames.push(r.take(len)?.to_vec());
        }
        r.expect_end()?;
        Ok(EncodedGof {
            group_id,
            first_frame,
            quantizer,
            width,
            height,
            channels,
            profile,
            frames,
        })
    }
}

/// Adaptive models for one frame payload; channel 0 (density) and the
/// feature channels keep separate statistics.
struct Models {
    classes: [ClassModels; 2],
}

#[derive(Clone)]
struct ClassModels {
    count: [Prob; 128],
    zero: [Prob; BANDS],
    sign: [Prob; BANDS],
    prefix: [[Prob; MAX_PREFIX]; BANDS],
}

impl Models {
    fn new() -> Self {
        let class = ClassModels {
            count: [Prob::default(); 128],
            zero: [Prob::default(); BANDS],
            sign: [Prob::default(); BANDS],
            prefix: [[Prob::default(); MAX_PREFIX]; BANDS],
        };
        Models {
            classes: [class.clone(), class],
        }
    }

    fn class(&mut self, channel: usize) -> &mut ClassModels {
        &mut self.classes[channel.min(1)]
    }
}

fn band(k: usize) -> usize {
    if k < 8 {
        k
    } else {
        (8 + (k - 8) / 8).min(BANDS - 1)
    }
}

fn encode_block(enc: &mut Encoder, m: &mut ClassModels, coefs: &[i32; 64]) {
    let count = coefs.iter().rposition(|&c| c != 0).map_or(0, |i| i + 1);
    enc.tree(&mut m.count, 7, count as u32);
    for (k, &c) in coefs.iter().enumerate().take(count) {
        let b = band(k);
        if k + 1 < count {
            enc.bit(&mut m.zero[b], c == 0);
            if c == 0 {
                continue;
            }
        }
        enc.bit(&mut m.sign[b], c < 0);
        // Exp-Golomb of |c| - 1 with adaptive prefix bits.
        let v = c.unsigned_abs() as u64;
        let n = 63 - v.leading_zeros() as usize;
        for i in 0..n {
            enc.bit(&mut m.prefix[b][i.min(MAX_PREFIX - 1)], true);
        }
        if n < MAX_PREFIX {
            enc.bit(&mut m.prefix[b][n], false);
        }
        enc.direct((v - (1 << n)) as u32, n as u32);
    }
}

fn decode_block(dec: &mut Decoder<'_>, m: &mut ClassModels) -> Result<[i32; 64]> {
    let count = dec.tree(&mut m.count, 7) as usize;
    if count > 64 {
        return Err(Error::Format(format!("block declares {count} coefficients")));
    }
    let mut coefs = [0i32; 64];
    for (k, slot) in coefs.iter_mut().enumerate().take(count) {
        let b = band(k);
        if k + 1 < count && dec.bit(&mut m.zero[b]) {
            continue;
        }
        let negative = dec.bit(&mut m.sign[b]);
        let mut n = 0usize;
        while n < MAX_PREFIX && dec.bit(&mut m.prefix[b][n]) {
            n += 1;
        }
        if n >= MAX_PREFIX - 1 {
            return Err(Error::Format("coefficient magnitude out of range".into()));
        }
        let v = (1i64 << n) + dec.direct(n as u32) as i64;
        *slot = if negative { -v as i32 } else { v as i32 };
    }
    Ok(coefs)
}

/// Predictor of lossy keyframes: mid-gray.
const INTRA_PREDICTION: i32 = 128;

struct FrameShape {
    width: usize,
    height: usize,
    channels: usize,
}

impl FrameShape {
    fn blocks(&self) -> impl Iterator<Item = (usize, usize, usize)> {
        let (bw, bh, ch) = (self.width.div_ceil(BLOCK), self.height.div_ceil(BLOCK), self.channels);
        (0..ch).flat_map(move |c| (0..bh).flat_map(move |by| (0..bw).map(move |bx| (c, bx, by))))
    }

    /// Image coordinates of block sample `i`, clamped to the last row or
    /// column past the edge.
    fn xy(&self, bx: usize, by: usize, i: usize) -> (usize, usize) {
        (
            (bx * BLOCK + i % BLOCK).min(self.width - 1),
            (by * BLOCK + i / BLOCK).min(self.height - 1),
        )
    }

    fn sample(&self, bx: usize, by: usize, i: usize) -> usize {
        let (x, y) = self.xy(bx, by, i);
        y * self.width + x
    }

    fn inside(&self, bx: usize, by: usize, i: usize) -> bool {
        bx * BLOCK + i % BLOCK < self.width && by * BLOCK + i / BLOCK < self.height
    }
}

fn step(q: u16, k: usize) -> f64 {
    q as f64 * LUMA[k] as f64
}

/// Nearest integer with halves rounded toward zero, which keeps repeated
/// requantization of a static block from oscillating.
fn quantize_coefficient(x: f64) -> i32 {
    let m = (x.abs() - 0.5).ceil().max(0.0);
    (m.copysign(x)) as i32
}

/// Lossless prediction of pixel `(x, y)`: the previous frame for inter
/// frames, otherwise the left neighbour, the upper one on the first column,
/// mid-gray at the origin. Only already coded pixels are consulted.
fn lossless_prediction(shape: &FrameShape, previous: Option<&Uint8Image>, coded: &Uint8Image, c: usize, x: usize, y: usize) -> i32 {
    let plane = c * shape.width * shape.height;
    if let Some(prev) = previous {
        prev.data[plane + y * shape.width + x] as i32
    } else if x > 0 {
        coded.data[plane + y * shape.width + x - 1] as i32
    } else if y > 0 {
        coded.data[plane + (y - 1) * shape.width] as i32
    } else {
        INTRA_PREDICTION
    }
}

fn lossy_prediction(shape: &FrameShape, previous: Option<&Uint8Image>, c: usize, bx: usize, by: usize) -> [i32; 64] {
    let mut pred = [INTRA_PREDICTION; 64];
    if let Some(prev) = previous {
        let plane = c * shape.width * shape.height;
        for (i, p) in pred.iter_mut().enumerate() {
            *p = prev.data[plane + shape.sample(bx, by, i)] as i32;
        }
    }
    pred
}

/// Writes one block of a lossless frame; samples are rebuilt in raster
/// order so the intra predictor sees decoded neighbours.
fn reconstruct_lossless(
    shape: &FrameShape,
    previous: Option<&Uint8Image>,
    coefs: &[i32; 64],
    (c, bx, by): (usize, usize, usize),
    recon: &mut Uint8Image,
) -> Result<()> {
    let plane = c * shape.width * shape.height;
    for i in 0..64 {
        if !shape.inside(bx, by, i) {
            continue;
        }
        let (x, y) = shape.xy(bx, by, i);
        let v = lossless_prediction(shape, previous, recon, c, x, y) + coefs[ZIGZAG_POS[i]];
        if !(0..=255).contains(&v) {
            return Err(Error::Format(format!("lossless sample {v} outside 0..=255")));
        }
        recon.data[plane + y * shape.width + x] = v as u8;
    }
    Ok(())
}

fn reconstruct_lossy(
    shape: &FrameShape,
    q: u16,
    coefs: &[i32; 64],
    pred: &[i32; 64],
    (c, bx, by): (usize, usize, usize),
    recon: &mut Uint8Image,
) {
    let plane = c * shape.width * shape.height;
    let mut f = [0.0; 64];
    for (k, &coef) in coefs.iter().enumerate() {
        let idx = ZIGZAG[k];
        f[idx] = coef as f64 * step(q, idx);
    }
    let residual = dct::inverse(&f);
    for i in 0..64 {
        if shape.inside(bx, by, i) {
            let v = (pred[i] as f64 + residual[i]).round().clamp(0.0, 255.0);
            recon.data[plane + shape.sample(bx, by, i)] = v as u8;
        }
    }
}

/// Position of raster sample `i` in the zigzag scan.
const ZIGZAG_POS: [usize; 64] = {
    let mut pos = [0usize; 64];
    let mut k = 0;
    while k < 64 {
        pos[ZIGZAG[k]] = k;
        k += 1;
    }
    pos
};

fn encode_frame(
    frame: &Uint8Image,
    previous: Option<&Uint8Image>,
    quantizer: Quantizer,
) -> (Vec<u8>, Uint8Image) {
    let shape = FrameShape {
        width: frame.width,
        height: frame.height,
        channels: frame.channels,
    };
    let mut enc = Encoder::new();
    let mut models = Models::new();
    let mut recon = Uint8Image::filled(frame.width, frame.height, frame.channels, 0);
    for (c, bx, by) in shape.blocks() {
        let plane = c * shape.width * shape.height;
        let mut coefs = [0i32; 64];
        match quantizer {
            Quantizer::Lossless => {
                // Reconstruction equals the input, so the input serves as the
                // already-coded neighbourhood.
                for i in 0..64 {
                    if shape.inside(bx, by, i) {
                        let (x, y) = shape.xy(bx, by, i);
                        let v = frame.data[plane + y * shape.width + x] as i32;
                        coefs[ZIGZAG_POS[i]] = v - lossless_prediction(&shape, previous, frame, c, x, y);
                    }
                }
                encode_block(&mut enc, models.class(c), &coefs);
            }
            Quantizer::Lossy(q) => {
                let pred = lossy_prediction(&shape, previous, c, bx, by);
                let mut r = [0.0; 64];
                for (i, v) in r.iter_mut().enumerate() {
                    *v = (frame.data[plane + shape.sample(bx, by, i)] as i32 - pred[i]) as f64;
                }
                let f = dct::forward(&r);
                for (k, coef) in coefs.iter_mut().enumerate() {
                    let idx = ZIGZAG[k];
                    *coef = quantize_coefficient(f[idx] / step(q, idx));
                }
                encode_block(&mut enc, models.class(c), &coefs);
                reconstruct_lossy(&shape, q, &coefs, &pred, (c, bx, by), &mut recon);
            }
        }
    }
    if quantizer == Quantizer::Lossless {
        recon = frame.clone();
    }
    (enc.finish(), recon)
}

fn decode_frame(
    payload: &[u8],
    shape: &FrameShape,
    previous: Option<&Uint8Image>,
    quantizer: Quantizer,
) -> Result<Uint8Image> {
    let mut dec = Decoder::new(payload)?;
    let mut models = Models::new();
    let mut recon = Uint8Image::filled(shape.width, shape.height, shape.channels, 0);
    for (c, bx, by) in shape.blocks() {
        let coefs = decode_block(&mut dec, models.class(c))?;
        if dec.overran() {
            return Err(Error::Format("frame payload truncated".into()));
        }
        match quantizer {
            Quantizer::Lossless => reconstruct_lossless(shape, previous, &coefs, (c, bx, by), &mut recon)?,
            Quantizer::Lossy(q) => {
                let pred = lossy_prediction(shape, previous, c, bx, by);
                reconstruct_lossy(shape, q, &coefs, &pred, (c, bx, by), &mut recon);
            }
        }
    }
    Ok(recon)
}

/// Codes `frames` as one group: the first intra, the rest as residuals
/// against the previous reconstruction.
pub fn encode_gof(
    group_id: u32,
    first_frame: u32,
    frames: &[Uint8Image],
    profile: QuantizationProfile,
    quantizer: Quantizer,
) -> Result<EncodedGof> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Shape("a GOF needs at least one frame".into()))?;
    if frames.iter().any(|f| !f.same_shape(first)) {
        return Err(Error::Shape("GOF frames differ in size".into()));
    }
    if first.width == 0 || first.height == 0 || first.channels == 0 {
        return Err(Error::Shape("empty GOF frame".into()));
    }
    if frames.len() > MAX_GOF_FRAMES {
        return Err(Error::Shape(format!("{} frames exceed {MAX_GOF_FRAMES}", frames.len())));
    }
    if profile.ranges.len() != first.channels {
        return Err(Error::Shape("profile channel count differs from frames".into()));
    }
    if let Quantizer::Lossy(0) = quantizer {
        return Err(Error::Range("quantizer q must be at least 1".into()));
    }
    let mut payloads = Vec::with_capacity(frames.len());
    let mut previous: Option<Uint8Image> = None;
    for f in frames {
        let (bytes, recon) = encode_frame(f, previous.as_ref(), quantizer);
        payloads.push(bytes);
        previous = Some(recon);
    }
    Ok(EncodedGof {
        group_id,
        first_frame,
        quantizer,
        width: first.width,
        height: first.height,
        channels: first.channels,
        profile,
        frames: payloads,
    })
}

pub fn decode_gof(gof: &EncodedGof) -> Result<Vec<Uint8Image>> {
    let shape = FrameShape {
        width: gof.width,
        height: gof.height,
        channels: gof.channels,
    };
    if shape.width == 0 || shape.height == 0 || shape.channels == 0 {
        return Err(Error::Format("empty GOF frame shape".into()));
    }
    checked_volume(&[shape.width, shape.height, shape.channels], MAX_ELEMENTS)?;
    let mut out: Vec<Uint8Image> = Vec::with_capacity(gof.frames.len());
    for payload in &gof.frames {
        let frame = decode_frame(payload, &shape, out.last(), gof.quantizer)?;
        out.push(frame);
    }
    Ok(out)
}
