//! Regularizers and the photometric loss, each with an analytic gradient.

use crate::color::ColorImage;
use crate::error::{Error, Result};
use crate::feature::FeatureImage;
use crate::volume::DensityVolume;

/// Smoothing constant inside the 3D total-variation square root.
pub const TV_EPSILON: f64 = 1e-8;

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean over pixels and channels of the absolute differences to the right
/// and lower neighbours (unit pixel spacing; missing neighbours contribute
/// nothing). Returns the loss and its gradient in the image's planar layout.
pub fn loss_spatial(img: &FeatureImage) -> (f64, Vec<f64>) {
    let (w, h, c) = (img.width, img.height, img.channels);
    let norm = 1.0 / (w * h * c).max(1) as f64;
    let mut grad = vec![0.0; img.data.len()];
    let mut total = 0.0;
    for ch in 0..c {
        let plane = img.plane(ch);
        let base = ch * w * h;
        for v in 0..h {
            for u in 0..w {
                let p = v * w + u;
                if u + 1 < w {
                    let d = plane[p + 1] - plane[p];
                    total += d.abs();
                    let s = sign(d) * norm;
                    grad[base + p + 1] += s;
                    grad[base + p] -= s;
                }
                if v + 1 < h {
                    let d = plane[p + w] - plane[p];
                    total += d.abs();
                    let s = sign(d) * norm;
                    grad[base + p + w] += s;
                    grad[base + p] -= s;
                }
            }
        }
    }
    (total * norm, grad)
}

/// `sum |current - previous|`; the gradient is taken with respect to the
/// current image only.
pub fn loss_temporal(current: &FeatureImage, previous: &FeatureImage) -> Result<(f64, Vec<f64>)> {
    if !current.same_shape(previous) {
        return Err(Error::Shape(format!(
            "temporal loss between {}x{}x{} and {}x{}x{}",
            current.width,
            current.height,
            current.channels,
            previous.width,
            previous.height,
            previous.channels
        )));
    }
    let mut total = 0.0;
    let grad = current
        .data
        .iter()
        .zip(&previous.data)
        .map(|(a, b)| {
            let d = a - b;
            total += d.abs();
            sign(d)
        })
        .collect();
    Ok((total, grad))
}

/// Mean over vertices of `sqrt(dx^2 + dy^2 + dz^2 + eps) - sqrt(eps)` with
/// forward differences (missing neighbours count as zero difference).
/// Subtracting `sqrt(eps)` makes constant volumes score exactly zero.
pub fn loss_tv3d(vol: &DensityVolume) -> (f64, Vec<f64>) {
    let dims = vol.dims;
    let [nx, ny, nz] = dims.0;
    let n = dims.count();
    let norm = 1.0 / n.max(1) as f64;
    let floor = TV_EPSILON.sqrt();
    let mut grad = vec![0.0; n];
    let mut total = 0.0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = dims.index(x, y, z);
                let v = vol.values[i];
                let mut diffs = [(0usize, 0.0f64); 3];
                let mut k = 0;
                if x + 1 < nx {
                    let j = dims.index(x + 1, y, z);
                    diffs[k] = (j, vol.values[j] - v);
                    k += 1;
                }
                if y + 1 < ny {
                    let j = dims.index(x, y + 1, z);
                    diffs[k] = (j, vol.values[j] - v);
                    k += 1;
                }
                if z + 1 < nz {
                    let j = dims.index(x, y, z + 1);
                    diffs[k] = (j, vol.values[j] - v);
                    k += 1;
                }
                let sq: f64 = diffs[..k].iter().map(|(_, d)| d * d).sum();
                let root = (sq + TV_EPSILON).sqrt();
                total += root - floor;
                for &(j, d) in &diffs[..k] {
                    let g = norm * d / root;
                    grad[j] += g;
                    grad[i] -= g;
                }
            }
        }
    }
    (total * norm, grad)
}

/// Sum over the selected pixels of the squared RGB error, with the gradient
/// with respect to the predicted image (one entry per pixel).
pub fn loss_photometric(
    pred: &ColorImage,
    truth: &ColorImage,
    rays: &[usize],
) -> Result<(f64, Vec<[f64; 3]>)> {
    if pred.width != truth.width || pred.height != truth.height {
        return Err(Error::Shape("predicted and reference images differ in size".into()));
    }
    let mut grad = vec![[0.0; 3]; pred.pixels.len()];
    let mut total = 0.0;
    for &r in rays {
        let (p, t) = (pred.pixels.get(r), truth.pixels[r.min(truth.pixels.len() - 1)]);
        let p = p.ok_or_else(|| Error::Range(format!("ray {r} outside the image")))?;
        for c in 0..3 {
            let d = p[c] - t[c];
            total += d * d;
            grad[r][c] += 2.0 * d;
        }
    }
    Ok((total, grad))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::volume::GridDims;

    fn image(w: usize, h: usize, channels: usize, data: Vec<f64>) -> FeatureImage {
        FeatureImage {
            width: w,
            height: h,
            channels,
            frame_index: 0,
            group_id: 0,
            data,
        }
    }

    fn random_image(seed: u64) -> FeatureImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = FeatureImage::zeros(16, 16, 0, 0);
        img.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        img
    }

    #[test]
    fn spatial_constant_is_zero() {
        let img = image(4, 3, 2, vec![0.7; 24]);
        assert_eq!(loss_spatial(&img).0, 0.0);
    }

    #[test]
    fn spatial_two_pixel_hand_value() {
        let img = image(2, 1, 1, vec![0.0, 1.0]);
        assert_eq!(loss_spatial(&img).0, 0.5);
    }

    #[test]
    fn temporal_values() {
        let a = random_image(1);
        assert_eq!(loss_temporal(&a, &a).unwrap().0, 0.0);
        let mut b = a.clone();
        b.data[77] += 0.5;
        assert!((loss_temporal(&b, &a).unwrap().0 - 0.5).abs() < 1e-12);
        let c = random_image(2);
        let oracle: f64 = a.data.iter().zip(&c.data).map(|(x, y)| (x - y).abs()).sum();
        assert!((loss_temporal(&a, &c).unwrap().0 - oracle).abs() < 1e-9);
        let small = FeatureImage::zeros(8, 8, 0, 0);
        assert!(loss_temporal(&a, &small).is_err());
    }

    #[test]
    fn tv3d_hand_values() {
        let dims = GridDims::cube(3);
        let c = DensityVolume::from_values(dims, vec![2.0; 27]).unwrap();
        assert_eq!(loss_tv3d(&c).0, 0.0);
        let two = DensityVolume::from_values(GridDims([2, 1, 1]), vec![0.0, 1.0]).unwrap();
        assert!((loss_tv3d(&two).0 - 0.5).abs() < 1e-4);
    }

    #[test]
    fn photometric_values() {
        let a = ColorImage::filled(2, 2, [0.2, 0.4, 0.6]);
        assert_eq!(loss_photometric(&a, &a, &[0, 1, 2, 3]).unwrap().0, 0.0);
        let mut b = a.clone();
        b.pixels[2][0] += 0.1;
        let (l, g) = loss_photometric(&b, &a, &[2]).unwrap();
        assert!((l - 0.01).abs() < 1e-12);
        assert!((g[2][0] - 0.2).abs() < 1e-12);
    }
}
