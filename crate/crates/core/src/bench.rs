//! Paired experiments behind the compression ablations: mapping layout,
//! temporal and spatial regularization, each measured in coded bytes.

use serde::Serialize;

use crate::codec::{encode_feature_gof, Quantizer};
use crate::error::Result;
use crate::feature::{DensityActivation, FeatureImage};
use crate::mapping::{adjacency_distance, Layout};
use crate::occupancy::DEFAULT_GAMMA;
use crate::pipeline::{bake_sequence, build_groups, image_size_for, plan_scene, GroupAssets};
use crate::render::TinyMlp;
use crate::scene::SyntheticScene;
use crate::train::{fit_sequence, loss_spatial, loss_temporal, orbit_views, FitConfig, FrameReport, LossWeights, View};

/// Coded size of a baked sequence under each layout.
#[derive(Debug, Clone, Serialize)]
pub struct LayoutAblation {
    pub morton_bytes: usize,
    pub row_major_bytes: usize,
    pub morton_adjacency: f64,
    pub row_major_adjacency: f64,
}

fn coded_bytes(images: &[FeatureImage], groups: &[GroupAssets], q: Quantizer) -> Result<(usize, usize, usize)> {
    let (mut total, mut key, mut inter) = (0, 0, 0);
    for (gi, g) in groups.iter().enumerate() {
        let frames = &images[g.group.start..=g.group.end];
        let gof = encode_feature_gof(gi as u32, g.group.start, frames, q)?;
        total += gof.size_bytes();
        key += gof.keyframe_bytes();
        inter += gof.inter_bytes();
    }
    Ok((total, key, inter))
}

/// Bakes the ground truth of `scene` through Morton-block and row-major
/// mapping tables and codes both at `q`.
pub fn layout_ablation(scene: &SyntheticScene, theta: usize, q: Quantizer) -> Result<LayoutAblation> {
    let plan = plan_scene(scene, DEFAULT_GAMMA, theta)?;
    let (w, h) = image_size_for(&plan);
    let act = DensityActivation::default();
    let mut out = [(0usize, 0.0f64); 2];
    for (slot, layout) in out.iter_mut().zip([Layout::MORTON_BLOCKS, Layout::ROW_MAJOR]) {
        let groups = build_groups(&plan, w, h, layout)?;
        let images = bake_sequence(scene, &groups, &act, DEFAULT_GAMMA)?;
        let adjacency = groups.iter().map(|g| adjacency_distance(&g.map)).sum::<f64>() / groups.len() as f64;
        *slot = (coded_bytes(&images, &groups, q)?.0, adjacency);
    }
    Ok(LayoutAblation {
        morton_bytes: out[0].0,
        row_major_bytes: out[1].0,
        morton_adjacency: out[0].1,
        row_major_adjacency: out[1].1,
    })
}

/// A fitting experiment: scene, training views and optimizer settings.
pub struct FitExperiment {
    pub scene: SyntheticScene,
    pub groups: Vec<GroupAssets>,
    pub views: Vec<Vec<View>>,
    pub config: FitConfig,
    pub mlp_seed: u64,
    pub quantizer: Quantizer,
}

impl FitExperiment {
    /// The translating-sphere sequence used by the regularizer ablations:
    /// fits stop at a matched per-channel color error so paired runs spend
    /// the same photometric budget.
    pub fn translating_sphere(seed: u64) -> Result<Self> {
        let scene = SyntheticScene::translating_sphere(24, 4, 0.25, 1.0, seed);
        let config = FitConfig {
            iters: 1500,
            seed,
            target_ray_mse: Some(1e-4),
            ..FitConfig::default()
        };
        Self::new(scene, 6, 32, config, 100 + seed, Quantizer::Lossy(2))
    }

    pub fn new(
        scene: SyntheticScene,
        view_count: usize,
        view_size: usize,
        config: FitConfig,
        mlp_seed: u64,
        quantizer: Quantizer,
    ) -> Result<Self> {
        let plan = plan_scene(&scene, DEFAULT_GAMMA, 1 << 18)?;
        let (w, h) = image_size_for(&plan);
        let groups = build_groups(&plan, w, h, Layout::MORTON_BLOCKS)?;
        let cams = orbit_views(view_count, view_size);
        let views = (0..scene.frame_count)
            .map(|t| {
                cams.iter()
                    .map(|c| {
                        Ok(View {
                            camera: c.clone(),
                            target: scene.reference_render(t, c)?.color,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FitExperiment {
            scene,
            groups,
            views,
            config,
            mlp_seed,
            quantizer,
        })
    }

    pub fn run(&self, weights: LossWeights) -> Result<FitRun> {
        let cfg = FitConfig {
            weights,
            ..self.config.clone()
        };
        let fit = fit_sequence(
            &self.views,
            &self.groups,
            DensityActivation::default(),
            TinyMlp::random(self.mlp_seed, 4),
            &cfg,
        )?;
        let (total_bytes, gof_keyframe_bytes, inter_bytes) = coded_bytes(&fit.images, &self.groups, self.quantizer)?;
        let keyframe_bytes = self
            .groups
            .iter()
            .map(|g| {
                let key = &fit.images[g.group.start..=g.group.start];
                Ok(encode_feature_gof(0, g.group.start, key, self.quantizer)?.keyframe_bytes())
            })
            .sum::<Result<usize>>()?;
        let mut temporal_l1 = 0.0;
        for g in &self.groups {
            for t in g.group.start + 1..=g.group.end {
                temporal_l1 += loss_temporal(&fit.images[t], &fit.images[t - 1])?.0;
            }
        }
        let spatial = fit.images.iter().map(|i| loss_spatial(i).0).sum::<f64>() / fit.images.len() as f64;
        Ok(FitRun {
            weights,
            total_bytes,
            keyframe_bytes,
            gof_keyframe_bytes,
            inter_bytes,
            temporal_l1,
            spatial,
            reports: fit.reports,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitRun {
    pub weights: LossWeights,
    pub total_bytes: usize,
    /// Keyframes coded on their own, with profiles of their own.
    pub keyframe_bytes: usize,
    /// Keyframe payloads inside the group streams.
    pub gof_keyframe_bytes: usize,
    pub inter_bytes: usize,
    /// Sum over groups of `|I_t - I_{t-1}|_1` between consecutive frames.
    pub temporal_l1: f64,
    /// Mean spatial smoothness loss over frames.
    pub spatial: f64,
    pub reports: Vec<FrameReport>,
}

impl FitRun {
    /// Whether every frame stopped at or below the color-error budget.
    pub fn met_budget(&self, target: f64) -> bool {
        self.reports.iter().all(|r| r.ray_mse <= target)
    }
}
