//! Deferred volumetric rendering: march, accumulate features, decode once
//! per ray.

pub mod camera;
pub mod march;
pub mod mlp;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::ColorImage;
use crate::error::{Error, Result};
use crate::feature::{expand, DensityActivation, ExpandedVolume, FeatureImage};
use crate::mapping::MappingTable;
use crate::occupancy::{FrameGroup, OccupancyPyramid};
use crate::volume::GridDims;

pub use camera::{Camera, Ray};
pub use march::{accumulate, march_points, march_ray, Accumulation, RaySample};
pub use mlp::{decode, positional_encode, TinyMlp};

/// How the decoded ray color meets the empty background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    /// Output the decoded color as is.
    #[default]
    Decoded,
    /// `opacity * rgb + (1 - opacity) * white`.
    White,
}

impl Background {
    pub fn composite(self, rgb: [f64; 3], opacity: f64) -> [f64; 3] {
        match self {
            Background::Decoded => rgb,
            Background::White => rgb.map(|c| opacity * c + (1.0 - opacity)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// World-space march step.
    pub step: f64,
    /// Use the occupancy pyramid to skip empty space.
    pub skip: bool,
    pub background: Background,
}

impl RenderOptions {
    /// Half a voxel edge along the finest axis.
    pub fn for_grid(dims: GridDims) -> Self {
        let n = dims.0.iter().copied().max().unwrap_or(2).max(2);
        RenderOptions {
            step: 0.5 / (n - 1) as f64,
            skip: true,
            background: Background::Decoded,
        }
    }

    pub fn with_background(mut self, background: Background) -> Self {
        self.background = background;
        self
    }

    /// Dense marching at half the step, no skipping.
    pub fn oracle(self) -> Self {
        RenderOptions {
            step: self.step * 0.5,
            skip: false,
            ..self
        }
    }
}

/// Rendered color plus per-pixel accumulated opacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub color: ColorImage,
    pub opacity: Vec<f64>,
}

/// Renders one expanded volume.
pub fn render_volume(
    vol: &ExpandedVolume,
    pyramid: Option<&OccupancyPyramid>,
    mlp: &TinyMlp,
    camera: &Camera,
    opts: &RenderOptions,
) -> Result<Rendered> {
    camera.validate()?;
    mlp.validate()?;
    if let Some(p) = pyramid {
        if p.base().dims() != vol.dims {
            return Err(Error::Shape(format!(
                "pyramid {:?} vs volume {:?}",
                p.base().dims().0,
                vol.dims.0
            )));
        }
    }
    if !(opts.step > 0.0) {
        return Err(Error::Config(format!("march step must be positive, got {}", opts.step)));
    }
    let pyramid = if opts.skip { pyramid } else { None };
    let (w, h) = (camera.width, camera.height);
    let pixels: Vec<([f64; 3], f64)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let ray = camera.ray(i % w, i / w);
            let samples = march_ray(vol, pyramid, &ray, opts.step);
            let acc = accumulate(&samples);
            let enc = positional_encode(ray.dir, mlp.frequencies);
            let rgb = mlp.forward(&acc.feature, &enc).expect("validated shapes").rgb;
            (opts.background.composite(rgb, acc.opacity), acc.opacity)
        })
        .collect();
    Ok(Rendered {
        color: ColorImage {
            width: w,
            height: h,
            pixels: pixels.iter().map(|p| p.0).collect(),
        },
        opacity: pixels.iter().map(|p| p.1).collect(),
    })
}

/// A group's shared assets plus the feature images of its frames.
#[derive(Debug, Clone)]
pub struct LoadedGroup {
    pub start: usize,
    pub end: usize,
    pub map: MappingTable,
    pub pyramid: OccupancyPyramid,
    /// One image per frame in `start..=end`.
    pub frames: Vec<FeatureImage>,
}

impl LoadedGroup {
    pub fn new(
        group: &FrameGroup,
        map: MappingTable,
        pyramid: OccupancyPyramid,
        frames: Vec<FeatureImage>,
    ) -> Result<Self> {
        if frames.len() != group.len() {
            return Err(Error::Shape(format!(
                "group {}..={} has {} frames, got {} images",
                group.start,
                group.end,
                group.len(),
                frames.len()
            )));
        }
        Ok(LoadedGroup {
            start: group.start,
            end: group.end,
            map,
            pyramid,
            frames,
        })
    }

    pub fn frame(&self, frame: usize) -> Option<&FeatureImage> {
        (self.start..=self.end)
            .contains(&frame)
            .then(|| &self.frames[frame - self.start])
    }
}

/// Renders `frame` from whichever loaded group holds it.
pub fn render(
    groups: &[LoadedGroup],
    act: &DensityActivation,
    mlp: &TinyMlp,
    camera: &Camera,
    frame: usize,
    opts: &RenderOptions,
) -> Result<Rendered> {
    let (group, img) = groups
        .iter()
        .find_map(|g| g.frame(frame).map(|img| (g, img)))
        .ok_or(Error::Load(frame))?;
    let vol = expand(img, &group.map, act)?;
    render_volume(&vol, Some(&group.pyramid), mlp, camera, opts)
}
