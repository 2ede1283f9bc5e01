//! Loss functions and sequential per-group fitting of feature images and the
//! shared decoder.

pub mod adam;
pub mod losses;
pub mod photometric;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::ColorImage;
use crate::error::{Error, Result};
use crate::feature::{DensityActivation, FeatureImage};
use crate::mapping::MappingTable;
use crate::math::Vec3;
use crate::occupancy::OccupancyPyramid;
pub use crate::pipeline::GroupAssets;
use crate::render::{Background, Camera, RenderOptions, TinyMlp};
use crate::volume::DensityVolume;

pub use adam::Adam;
pub use losses::{loss_photometric, loss_spatial, loss_temporal, loss_tv3d, TV_EPSILON};
pub use photometric::{ray_color, ray_loss_grad, Gradients, RayContext};

/// Weights of the regularizers relative to the photometric term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_s: f64,
    pub lambda_t: f64,
    pub lambda_tv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_s: 1e-4,
            lambda_t: 1e-4,
            lambda_tv: 1.6e-5,
        }
    }
}

impl LossWeights {
    pub const NONE: LossWeights = LossWeights {
        lambda_s: 0.0,
        lambda_t: 0.0,
        lambda_tv: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_s", self.lambda_s),
            ("lambda_t", self.lambda_t),
            ("lambda_tv", self.lambda_tv),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// When the shared decoder receives updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MlpTraining {
    /// Trained while fitting the first group, frozen afterwards.
    #[default]
    FirstGroup,
    /// Trained on every frame.
    Always,
    /// Never updated.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Optimizer steps per frame.
    pub iters: usize,
    pub lr_image: f64,
    pub lr_mlp: f64,
    /// Rays sampled per step.
    pub batch_rays: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub mlp_training: MlpTraining,
    /// Standard deviation-like spread of the initial feature noise.
    pub init_noise: f64,
    /// Rays per gradient chunk; bounds the per-chunk gradient buffers.
    pub chunk_rays: usize,
    /// Stop a frame early once the batch's per-channel mean squared color error drops to
    /// this value; `iters` stays the cap.
    pub target_ray_mse: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iters: 2000,
            lr_image: 0.05,
            lr_mlp: 0.002,
            batch_rays: 1024,
            seed: 0,
            weights: LossWeights::default(),
            mlp_training: MlpTraining::FirstGroup,
            init_noise: 0.1,
            chunk_rays: 256,
            target_ray_mse: None,
        }
    }
}

impl FitConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: FitConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.batch_rays == 0 || self.chunk_rays == 0 {
            return Err(Error::Config("batch_rays and chunk_rays must be positive".into()));
        }
        if let Some(t) = self.target_ray_mse {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("target_ray_mse must be positive, got {t}")));
            }
        }
        for (name, v) in [("lr_image", self.lr_image), ("lr_mlp", self.lr_mlp), ("init_noise", self.init_noise)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// A training view: camera plus the reference image of one frame.
#[derive(Debug, Clone)]
pub struct View {
    pub camera: Camera,
    pub target: ColorImage,
}

/// Per-frame optimisation summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameReport {
    pub frame: usize,
    pub group: usize,
    /// Optimizer steps taken.
    pub iterations: usize,
    /// Per-channel mean squared color error of the last batch.
    pub ray_mse: f64,
    pub final_loss: f64,
    pub photometric: f64,
    pub spatial: f64,
    pub temporal: f64,
    pub tv: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// One image per frame, in frame order.
    pub images: Vec<FeatureImage>,
    pub mlp: TinyMlp,
    pub reports: Vec<FrameReport>,
}

/// Individual terms of the per-frame objective.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObjectiveTerms {
    pub photometric: f64,
    pub spatial: f64,
    pub temporal: f64,
    pub tv: f64,
    pub total: f64,
}

/// A ray with the pixel it should reproduce.
#[derive(Debug, Clone, Copy)]
pub struct TargetRay {
    pub ray: crate::render::Ray,
    pub color: [f64; 3],
}

/// The per-frame objective
/// `sum_rays |c - c_ref|^2 + ls * spatial + lt * temporal + ltv * tv(density)`
/// and its gradient with respect to image pixels and decoder weights.
pub fn frame_objective(
    ctx: &RayContext<'_>,
    img: &FeatureImage,
    previous: Option<&FeatureImage>,
    mlp: &TinyMlp,
    rays: &[TargetRay],
    weights: &LossWeights,
    chunk_rays: usize,
) -> Result<(ObjectiveTerms, Gradients)> {
    img.check_map(ctx.map)?;
    let n_img = img.data.len();
    let n_mlp = mlp.parameter_count();
    let (photo, mut grads) = rays
        .par_chunks(chunk_rays.max(1))
        .map(|chunk| {
            let mut g = Gradients::zeros(n_img, n_mlp);
            let loss: f64 = chunk
                .iter()
                .map(|r| ray_loss_grad(ctx, img, mlp, &r.ray, r.color, &mut g))
                .sum();
            (loss, g)
        })
        .reduce(
            || (0.0, Gradients::zeros(n_img, n_mlp)),
            |(la, mut ga), (lb, gb)| {
                ga.add(&gb);
                (la + lb, ga)
            },
        );
    let mut terms = ObjectiveTerms {
        photometric: photo,
        ..Default::default()
    };

    if weights.lambda_s > 0.0 {
        let (l, g) = loss_spatial(img);
        terms.spatial = l;
        axpy(&mut grads.image, weights.lambda_s, &g);
    }
    if let (Some(prev), true) = (previous, weights.lambda_t > 0.0) {
        let (l, g) = loss_temporal(img, prev)?;
        terms.temporal = l;
        axpy(&mut grads.image, weights.lambda_t, &g);
    }
    if weights.lambda_tv > 0.0 {
        let (l, g_pixels) = density_tv(img, ctx.map, &ctx.act);
        terms.tv = l;
        axpy(&mut grads.image, weights.lambda_tv, &g_pixels);
    }
    terms.total = terms.photometric
        + weights.lambda_s * terms.spatial
        + weights.lambda_t * terms.temporal
        + weights.lambda_tv * terms.tv;
    Ok((terms, grads))
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

/// Total variation of the expanded density, pulled back to image pixels.
fn density_tv(img: &FeatureImage, map: &MappingTable, act: &DensityActivation) -> (f64, Vec<f64>) {
    let dims = map.grid();
    let mut values = vec![0.0; dims.count()];
    for (p, v) in map.mapped() {
        values[v] = act.apply(img.get(0, p));
    }
    let vol = DensityVolume { dims, values };
    let (loss, g_vol) = loss_tv3d(&vol);
    let mut g = vec![0.0; img.data.len()];
    for (p, v) in map.mapped() {
        g[p] = g_vol[v] * act.derivative(img.get(0, p));
    }
    (loss, g)
}

/// Initial image of a group's first frame: seeded noise on mapped pixels,
/// zero elsewhere.
pub fn noise_image(map: &MappingTable, frame: usize, group: usize, spread: f64, seed: u64) -> FeatureImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = FeatureImage::zeros(map.width(), map.height(), frame, group);
    for (p, _) in map.mapped() {
        for c in 0..img.channels {
            let v = if spread > 0.0 { rng.gen_range(-spread..spread) } else { 0.0 };
            img.set(c, p, v);
        }
    }
    img
}

/// Fits every frame in sequence. `views[t]` holds the training views of
/// frame `t`; `groups` must cover `0..views.len()` contiguously.
pub fn fit_sequence(
    views: &[Vec<View>],
    groups: &[GroupAssets],
    act: DensityActivation,
    mlp_init: TinyMlp,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    mlp_init.validate()?;
    let mut expect = 0;
    for g in groups {
        if g.group.start != expect || g.group.end < g.group.start {
            return Err(Error::Config(format!(
                "groups must tile the frames contiguously; group {}..={} found where frame {expect} was expected",
                g.group.start, g.group.end
            )));
        }
        if g.pyramid.base().dims() != g.map.grid() {
            return Err(Error::Shape("pyramid and mapping disagree on the grid".into()));
        }
        expect = g.group.end + 1;
    }
    if expect != views.len() {
        return Err(Error::Config(format!(
            "groups cover {expect} frames, {} have views",
            views.len()
        )));
    }

    let mut mlp = mlp_init;
    let mut mlp_opt = Adam::new(mlp.parameter_count(), cfg.lr_mlp);
    let mut images = Vec::with_capacity(views.len());
    let mut reports = Vec::with_capacity(views.len());
    for (gi, assets) in groups.iter().enumerate() {
        let ctx = RayContext {
            map: &assets.map,
            pyramid: &assets.pyramid,
            act,
            step: RenderOptions::for_grid(assets.map.grid()).step,
            background: Background::White,
        };
        let train_mlp = match cfg.mlp_training {
            MlpTraining::FirstGroup => gi == 0,
            MlpTraining::Always => true,
            MlpTraining::Frozen => false,
        };
        let mut previous: Option<FeatureImage> = None;
        for frame in assets.group.start..=assets.group.end {
            let mut img = match &previous {
                Some(prev) => {
                    let mut warm = prev.clone();
                    warm.frame_index = frame;
                    warm
                }
                None => noise_image(&assets.map, frame, gi, cfg.init_noise, cfg.seed ^ (frame as u64).wrapping_mul(0x9e37_79b9)),
            };
            let rays = target_rays(&views[frame])?;
            let frame_seed = cfg.seed.wrapping_add(0x5851_f42d).wrapping_mul(frame as u64 + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
            let mut img_opt = Adam::new(img.data.len(), cfg.lr_image);
            let mut batch = Vec::with_capacity(cfg.batch_rays);
            let mut last = ObjectiveTerms::default();
            let mut iterations = 0;
            let mut ray_mse = f64::NAN;
            for it in 0..cfg.iters {
                batch.clear();
                if !rays.is_empty() {
                    batch.extend((0..cfg.batch_rays).map(|_| rays[rng.gen_range(0..rays.len())]));
                }
                let (terms, grads) = frame_objective(
                    &ctx,
                    &img,
                    previous.as_ref(),
                    &mlp,
                    &batch,
                    &cfg.weights,
                    cfg.chunk_rays,
                )?;
                if !terms.total.is_finite() {
                    return Err(Error::Divergence {
                        frame,
                        iteration: it,
                        loss: terms.total,
                    });
                }
                ray_mse = terms.photometric / (3 * batch.len().max(1)) as f64;
                last = terms;
                if cfg.target_ray_mse.is_some_and(|t| ray_mse <= t) {
                    break;
                }
                iterations = it + 1;
                img_opt.update(&mut img.data, &grads.image);
                if train_mlp {
                    let mut p = mlp.params();
                    mlp_opt.update(&mut p, &grads.mlp);
                    mlp.set_params(&p);
                }
            }
            log::debug!(
                "frame {frame}: loss {:.6} (photometric {:.6})",
                last.total,
                last.photometric
            );
            reports.push(FrameReport {
                frame,
                group: gi,
                iterations,
                ray_mse,
                final_loss: last.total,
                photometric: last.photometric,
                spatial: last.spatial,
                temporal: last.temporal,
                tv: last.tv,
            });
            images.push(img.clone());
            previous = Some(img);
        }
    }
    Ok(FitResult {
        images,
        mlp,
        reports,
    })
}

fn target_rays(views: &[View]) -> Result<Vec<TargetRay>> {
    let mut rays = Vec::new();
    for v in views {
        v.camera.validate()?;
        if v.target.width != v.camera.width || v.target.height != v.camera.height {
            return Err(Error::Shape(format!(
                "target {}x{} vs camera {}x{}",
                v.target.width, v.target.height, v.camera.width, v.camera.height
            )));
        }
        for y in 0..v.camera.height {
            for x in 0..v.camera.width {
                rays.push(TargetRay {
                    ray: v.camera.ray(x, y),
                    color: v.target.get(x, y),
                });
            }
        }
    }
    Ok(rays)
}

/// Renders `img` for `camera` with the fitting conventions (white
/// background, occupancy skipping).
pub fn render_fitted(
    img: &FeatureImage,
    map: &MappingTable,
    pyramid: &OccupancyPyramid,
    act: DensityActivation,
    mlp: &TinyMlp,
    camera: &Camera,
) -> Result<ColorImage> {
    img.check_map(map)?;
    camera.validate()?;
    let ctx = RayContext {
        map,
        pyramid,
        act,
        step: RenderOptions::for_grid(map.grid()).step,
        background: Background::White,
    };
    let (w, h) = (camera.width, camera.height);
    let pixels = (0..w * h)
        .into_par_iter()
        .map(|i| ray_color(&ctx, img, mlp, &camera.ray(i % w, i / w)).0)
        .collect();
    Ok(ColorImage {
        width: w,
        height: h,
        pixels,
    })
}

/// `n` cameras on a ring around the cube center, alternating elevation.
pub fn orbit_views(n: usize, size: usize) -> Vec<Camera> {
    (0..n)
        .map(|i| {
            let az = 360.0 * i as f64 / n as f64;
            let el = if i % 2 == 0 { 25.0 } else { -15.0 };
            Camera::orbit(Vec3::splat(0.5), az, el, 2.4, 40.0, size, size)
        })
        .collect()
}
