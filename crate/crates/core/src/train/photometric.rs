//! Differentiable rendering of individual rays: color, squared error and
//! gradients with respect to feature-image pixels and decoder weights.

use crate::feature::{trilinear_corners, DensityActivation, FeatureImage};
use crate::mapping::MappingTable;
use crate::occupancy::OccupancyPyramid;
use crate::render::march::{compositing_weights, march_points};
use crate::render::mlp::TinyMlp;
use crate::render::{positional_encode, Background, Ray};
use crate::volume::FEATURE_CHANNELS;

/// Everything a ray needs besides the parameters being optimized.
pub struct RayContext<'a> {
    pub map: &'a MappingTable,
    pub pyramid: &'a OccupancyPyramid,
    pub act: DensityActivation,
    pub step: f64,
    pub background: Background,
}

struct Sample {
    pixels: [u32; 8],
    weights: [f64; 8],
    sigma: f64,
    delta: f64,
    feature: [f64; FEATURE_CHANNELS],
}

/// Gradient sinks for one batch.
pub struct Gradients {
    pub image: Vec<f64>,
    pub mlp: Vec<f64>,
}

impl Gradients {
    pub fn zeros(image_len: usize, mlp_len: usize) -> Self {
        Gradients {
            image: vec![0.0; image_len],
            mlp: vec![0.0; mlp_len],
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.image.iter_mut().zip(&other.image) {
            *a += b;
        }
        for (a, b) in self.mlp.iter_mut().zip(&other.mlp) {
            *a += b;
        }
    }
}

const UNMAPPED: u32 = u32::MAX;

fn gather(ctx: &RayContext<'_>, img: &FeatureImage, ray: &Ray) -> Vec<Sample> {
    let dims = ctx.map.grid();
    let mut samples = Vec::new();
    march_points(dims, Some(ctx.pyramid), ray, ctx.step, |_, delta, p| {
        let c = trilinear_corners(dims, p).expect("march stays inside the cube");
        let mut s = Sample {
            pixels: [UNMAPPED; 8],
            weights: c.weight,
            sigma: 0.0,
            delta,
            feature: [0.0; FEATURE_CHANNELS],
        };
        for k in 0..8 {
            let Some(px) = ctx.map.forward_index(c.index[k]) else {
                continue;
            };
            let w = c.weight[k];
            s.pixels[k] = px as u32;
            s.sigma += w * ctx.act.apply(img.get(0, px));
            for (ch, f) in s.feature.iter_mut().enumerate() {
                *f += w * img.get(ch + 1, px);
            }
        }
        samples.push(s);
    });
    samples
}

/// Renders one ray; returns `(color, opacity)`.
pub fn ray_color(ctx: &RayContext<'_>, img: &FeatureImage, mlp: &TinyMlp, ray: &Ray) -> ([f64; 3], f64) {
    let samples = gather(ctx, img, ray);
    let weights = compositing_weights(samples.iter().map(|s| (s.sigma, s.delta)));
    let mut feat = [0.0; FEATURE_CHANNELS];
    let mut opacity = 0.0;
    for (s, w) in samples.iter().zip(&weights) {
        opacity += w;
        for (a, f) in feat.iter_mut().zip(&s.feature) {
            *a += w * f;
        }
    }
    let mut input = feat.to_vec();
    input.extend(positional_encode(ray.dir, mlp.frequencies));
    let rgb = mlp.forward_input(input).rgb;
    (ctx.background.composite(rgb, opacity), opacity)
}

/// Squared color error of one ray; accumulates its gradient into `grads`.
pub fn ray_loss_grad(
    ctx: &RayContext<'_>,
    img: &FeatureImage,
    mlp: &TinyMlp,
    ray: &Ray,
    target: [f64; 3],
    grads: &mut Gradients,
) -> f64 {
    let samples = gather(ctx, img, ray);
    let weights = compositing_weights(samples.iter().map(|s| (s.sigma, s.delta)));
    let mut feat = [0.0; FEATURE_CHANNELS];
    let mut opacity = 0.0;
    for (s, w) in samples.iter().zip(&weights) {
        opacity += w;
        for (a, f) in feat.iter_mut().zip(&s.feature) {
            *a += w * f;
        }
    }
    let mut input = feat.to_vec();
    input.extend(positional_encode(ray.dir, mlp.frequencies));
    let trace = mlp.forward_input(input);
    let rgb = trace.rgb;
    let color = ctx.background.composite(rgb, opacity);

    let mut loss = 0.0;
    let mut d_color = [0.0; 3];
    for c in 0..3 {
        let d = color[c] - target[c];
        loss += d * d;
        d_color[c] = 2.0 * d;
    }
    let (d_rgb, d_opacity) = match ctx.background {
        Background::Decoded => (d_color, 0.0),
        Background::White => (
            d_color.map(|d| d * opacity),
            (0..3).map(|c| d_color[c] * (rgb[c] - 1.0)).sum(),
        ),
    };
    let d_input = mlp.backward(&trace, d_rgb, &mut grads.mlp);
    let d_feat = &d_input[..FEATURE_CHANNELS];

    // dL/dw_k for every compositing weight.
    let d_w: Vec<f64> = samples
        .iter()
        .map(|s| d_opacity + s.feature.iter().zip(d_feat).map(|(f, d)| f * d).sum::<f64>())
        .collect();
    // dL/ds_k = dL/dw_k * T_{k+1} - sum_{i>k} dL/dw_i * w_i
    let mut suffix = 0.0;
    let mut d_s = vec![0.0; samples.len()];
    let mut depth_after: Vec<f64> = Vec::with_capacity(samples.len());
    let mut depth = 0.0;
    for s in &samples {
        depth += s.sigma * s.delta;
        depth_after.push(depth);
    }
    for k in (0..samples.len()).rev() {
        d_s[k] = d_w[k] * (-depth_after[k]).exp() - suffix;
        suffix += d_w[k] * weights[k];
    }

    let n = img.pixels();
    for (k, s) in samples.iter().enumerate() {
        let d_sigma = d_s[k] * s.delta;
        for c in 0..8 {
            let px = s.pixels[c];
            if px == UNMAPPED {
                continue;
            }
            let (px, wc) = (px as usize, s.weights[c]);
            if wc == 0.0 {
                continue;
            }
            grads.image[px] += d_sigma * wc * ctx.act.derivative(img.get(0, px));
            let scale = weights[k] * wc;
            for ch in 0..FEATURE_CHANNELS {
                grads.image[(ch + 1) * n + px] += scale * d_feat[ch];
            }
        }
    }
    loss
}
