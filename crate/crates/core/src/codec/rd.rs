//! Rate-distortion sweeps: bytes per frame against rendered quality.

use serde::Serialize;

use super::gof::{decode_gof, encode_gof, Quantizer};
use super::quant::{dequantize, quantize, QuantizationProfile};
use crate::color::{mse, ColorImage};
use crate::error::Result;
use crate::feature::{expand, DensityActivation, FeatureImage};
use crate::mapping::MappingTable;
use crate::occupancy::OccupancyPyramid;
use crate::render::{render_volume, Camera, RenderOptions, TinyMlp};

/// A fitted group ready for coding.
pub struct RdGroup<'a> {
    pub group_id: u32,
    pub first_frame: usize,
    pub frames: &'a [FeatureImage],
    pub map: &'a MappingTable,
    pub pyramid: &'a OccupancyPyramid,
}

/// Decoder and held-out view used to score reconstructions.
pub struct RdContext<'a> {
    pub act: DensityActivation,
    pub mlp: &'a TinyMlp,
    pub camera: &'a Camera,
    pub opts: RenderOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdPoint {
    pub quantizer: Quantizer,
    pub bytes: usize,
    pub bytes_per_frame: f64,
    /// PSNR against renders of the lossless path; infinite when identical.
    pub psnr: f64,
}

fn render_frame(img: &FeatureImage, g: &RdGroup<'_>, ctx: &RdContext<'_>) -> Result<ColorImage> {
    let vol = expand(img, g.map, &ctx.act)?;
    Ok(render_volume(&vol, Some(g.pyramid), ctx.mlp, ctx.camera, &ctx.opts)?.color)
}

pub fn rate_distortion(groups: &[RdGroup<'_>], ctx: &RdContext<'_>, quantizers: &[Quantizer]) -> Result<Vec<RdPoint>> {
    // Quantize once; the lossless path is the reference.
    let mut prepared = Vec::with_capacity(groups.len());
    for g in groups {
        let profile = QuantizationProfile::covering(g.frames)?;
        let q8 = g
            .frames
            .iter()
            .map(|f| quantize(f, &profile))
            .collect::<Result<Vec<_>>>()?;
        let refs = q8
            .iter()
            .zip(g.frames)
            .map(|(q, f)| render_frame(&dequantize(q, &profile, f.frame_index, f.group_id)?, g, ctx))
            .collect::<Result<Vec<_>>>()?;
        prepared.push((profile, q8, refs));
    }
    let total_frames: usize = groups.iter().map(|g| g.frames.len()).sum();
    let mut points = Vec::with_capacity(quantizers.len());
    for &quantizer in quantizers {
        let mut bytes = 0;
        let mut err = 0.0;
        for (g, (profile, q8, refs)) in groups.iter().zip(&prepared) {
            let gof = encode_gof(g.group_id, g.first_frame as u32, q8, profile.clone(), quantizer)?;
            bytes += gof.size_bytes();
            for ((dec, f), reference) in decode_gof(&gof)?.iter().zip(g.frames).zip(refs) {
                let img = dequantize(dec, profile, f.frame_index, f.group_id)?;
                err += mse(&render_frame(&img, g, ctx)?, reference)?;
            }
        }
        let mean = err / total_frames.max(1) as f64;
        points.push(RdPoint {
            quantizer,
            bytes,
            bytes_per_frame: bytes as f64 / total_frames.max(1) as f64,
            psnr: if mean == 0.0 { f64::INFINITY } else { -10.0 * mean.log10() },
        });
    }
    Ok(points)
}
