//! Per-channel affine quantization of feature images to 8 bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::FeatureImage;

/// Per-channel `[min, max]` ranges mapped onto `0..=255`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationProfile {
    pub ranges: Vec<[f64; 2]>,
    pub bits: u8,
}

/// Planar 8-bit image, one plane per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Uint8Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Uint8Image {
    pub fn filled(width: usize, height: usize, channels: usize, v: u8) -> Self {
        Uint8Image {
            width,
            height,
            channels,
            data: vec![v; width * height * channels],
        }
    }

    pub fn plane(&self, c: usize) -> &[u8] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Uint8Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn raw_len(&self) -> usize {
        self.data.len()
    }
}

impl QuantizationProfile {
    /// Tightest ranges covering every frame; constant channels get a unit
    /// range centred on their value so the profile stays invertible.
    pub fn covering(frames: &[FeatureImage]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Shape("no frames to profile".into()))?;
        let mut ranges = vec![[f64::INFINITY, f64::NEG_INFINITY]; first.channels];
        for f in frames {
            if !f.same_shape(first) {
                return Err(Error::Shape("frames differ in shape".into()));
            }
            for (c, r) in ranges.iter_mut().enumerate() {
                for &v in f.plane(c) {
                    if !v.is_finite() {
                        return Err(Error::Range(format!("non-finite value in channel {c}")));
                    }
                    r[0] = r[0].min(v);
                    r[1] = r[1].max(v);
                }
            }
        }
        for r in &mut ranges {
            if r[1] <= r[0] {
                let mid = r[0];
                *r = [mid - 0.5, mid + 0.5];
            }
        }
        Ok(QuantizationProfile { ranges, bits: 8 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits != 8 {
            return Err(Error::Config(format!("unsupported bit depth {}", self.bits)));
        }
        for (c, r) in self.ranges.iter().enumerate() {
            if !(r[0].is_finite() && r[1].is_finite() && r[1] > r[0]) {
                return Err(Error::Range(format!(
                    "channel {c} has degenerate range [{}, {}]",
                    r[0], r[1]
                )));
            }
        }
        Ok(())
    }

    /// Largest dequantization error for an in-range value.
    pub fn step(&self, channel: usize) -> f64 {
        let r = self.ranges[channel];
        (r[1] - r[0]) / 255.0
    }
}

/// `round(255 * clamp((v - min) / (max - min), 0, 1))`, halves rounded away
/// from zero.
pub fn quantize_value(v: f64, range: [f64; 2]) -> u8 {
    let t = ((v - range[0]) / (range[1] - range[0])).clamp(0.0, 1.0);
    (255.0 * t).round() as u8
}

pub fn dequantize_value(q: u8, range: [f64; 2]) -> f64 {
    range[0] + (range[1] - range[0]) * q as f64 / 255.0
}

pub fn quantize(img: &FeatureImage, prof: &QuantizationProfile) -> Result<Uint8Image> {
    prof.validate()?;
    if prof.ranges.len() != img.channels {
        return Err(Error::Shape(format!(
            "profile has {} channels, image {}",
            prof.ranges.len(),
            img.channels
        )));
    }
    let mut out = Uint8Image::filled(img.width, img.height, img.channels, 0);
    let n = img.width * img.height;
    for c in 0..img.channels {
        for (o, &v) in out.data[c * n..(c + 1) * n].iter_mut().zip(img.plane(c)) {
            if !v.is_finite() {
                return Err(Error::Range(format!("non-finite value in channel {c}")));
            }
            *o = quantize_value(v, prof.ranges[c]);
        }
    }
    Ok(out)
}

pub fn dequantize(
    img: &Uint8Image,
    prof: &QuantizationProfile,
    frame_index: usize,
    group_id: usize,
) -> Result<FeatureImage> {
    prof.validate()?;
    if prof.ranges.len() != img.channels {
        return Err(Error::Shape(format!(
            "profile has {} channels, image {}",
            prof.ranges.len(),
            img.channels
        )));
    }
    let n = img.width * img.height;
    let mut data = Vec::with_capacity(img.data.len());
    for c in 0..img.channels {
        data.extend(img.data[c * n..(c + 1) * n].iter().map(|&q| dequantize_value(q, prof.ranges[c])));
    }
    Ok(FeatureImage {
        width: img.width,
        height: img.height,
        channels: img.channels,
        frame_index,
        group_id,
        data,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let r = [-2.0, 3.0];
        assert_eq!(quantize_value(-2.0, r), 0);
        assert_eq!(quantize_value(3.0, r), 255);
        // 127.5 rounds away from zero.
        assert_eq!(quantize_value(0.5, r), 128);
        assert_eq!(quantize_value(-10.0, r), 0);
        assert_eq!(quantize_value(10.0, r), 255);
    }

    #[test]
    fn dequantization_error_is_half_a_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = [-1.3, 0.7];
        let bound = (r[1] - r[0]) / 255.0 / 2.0 + 1e-12;
        for _ in 0..10_000 {
            let v = rng.gen_range(r[0]..=r[1]);
            let back = dequantize_value(quantize_value(v, r), r);
            assert!((back - v).abs() <= bound, "{v} -> {back}");
        }
    }

    #[test]
    fn degenerate_range_is_rejected() {
        let prof = QuantizationProfile {
            ranges: vec![[1.0, 1.0]; 13],
            bits: 8,
        };
        let img = FeatureImage::zeros(8, 8, 0, 0);
        assert!(matches!(quantize(&img, &prof), Err(Error::Range(_))));
    }

    #[test]
    fn covering_profile_round_trips_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut img = FeatureImage::zeros(8, 8, 2, 1);
        img.data.iter_mut().for_each(|v| *v = rng.gen_range(-4.0..4.0));
        let prof = QuantizationProfile::covering(std::slice::from_ref(&img)).unwrap();
        let q = quantize(&img, &prof).unwrap();
        let back = dequantize(&q, &prof, 2, 1).unwrap();
        assert_eq!((back.frame_index, back.group_id), (2, 1));
        for c in 0..img.channels {
            let tol = prof.step(c) / 2.0 + 1e-12;
            for (a, b) in img.plane(c).iter().zip(back.plane(c)) {
                assert!((a - b).abs() <= tol);
            }
        }
    }
}
