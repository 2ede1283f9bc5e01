use std::io::Cursor;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

/// Linear RGB image with channels nominally in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl ColorImage {
    pub fn filled(width: usize, height: usize, c: [f64; 3]) -> Self {
        ColorImage {
            width,
            height,
            pixels: vec![c; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> [f64; 3] {
        self.pixels[v * self.width + u]
    }

    pub fn to_rgb8(&self) -> RgbImage {
        RgbImage::from_fn(self.width as u32, self.height as u32, |u, v| {
            let c = self.get(u as usize, v as usize);
            Rgb(c.map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8))
        })
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut buf = Cursor::new(Vec::new());
        self.to_rgb8().write_to(&mut buf, image::ImageFormat::Png)?;
        Ok(buf.into_inner())
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.to_rgb8();
        let (w, h) = img.dimensions();
        Ok(ColorImage {
            width: w as usize,
            height: h as usize,
            pixels: img.pixels().map(|p| p.0.map(|c| c as f64 / 255.0)).collect(),
        })
    }
}

pub fn mse(a: &ColorImage, b: &ColorImage) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let sum: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]).powi(2)).sum::<f64>())
        .sum();
    Ok(sum / (3 * a.pixels.len()).max(1) as f64)
}

/// Peak signal-to-noise ratio for unit peak; identical images give infinity.
pub fn psnr(a: &ColorImage, b: &ColorImage) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * m.log10()
    })
}
