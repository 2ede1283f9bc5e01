//! Deterministic animated scenes built from signed-distance primitives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::ExpandedVolume;
use crate::math::{sigmoid, Vec3};
use crate::occupancy::DEFAULT_GAMMA;
use crate::render::{render_volume, Background, Camera, RenderOptions, Rendered, TinyMlp};
use crate::volume::{DensityVolume, FeatureVolume, GridDims, FEATURE_CHANNELS};

/// density = DENSITY_SCALE * max(0, -sdf)
pub const DENSITY_SCALE: f64 = 50.0;
/// Seed of the decoder used for reference renders.
pub const REFERENCE_MLP_SEED: u64 = 0x5eed_0f_c0105;

/// Linear center motion, in world units per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterPath {
    pub start: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
}

impl CenterPath {
    pub fn fixed(c: [f64; 3]) -> Self {
        CenterPath {
            start: c,
            velocity: [0.0; 3],
        }
    }

    pub fn at(&self, t: usize) -> Vec3 {
        Vec3::from_array(self.start) + Vec3::from_array(self.velocity) * t as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Sphere {
        center_path: CenterPath,
        radius: f64,
    },
    /// Ring in the xy plane.
    Torus {
        center_path: CenterPath,
        radius: f64,
        minor_radius: f64,
    },
    Box {
        center_path: CenterPath,
        half_extents: [f64; 3],
    },
}

impl Primitive {
    fn path(&self) -> &CenterPath {
        match self {
            Primitive::Sphere { center_path, .. }
            | Primitive::Torus { center_path, .. }
            | Primitive::Box { center_path, .. } => center_path,
        }
    }

    /// Radius of a ball around the center containing the shape.
    fn bound(&self) -> f64 {
        match self {
            Primitive::Sphere { radius, .. } => *radius,
            Primitive::Torus {
                radius,
                minor_radius,
                ..
            } => radius + minor_radius,
            Primitive::Box { half_extents, .. } => Vec3::from_array(*half_extents).length(),
        }
    }

    pub fn sdf(&self, p: Vec3, t: usize) -> f64 {
        let q = p - self.path().at(t);
        match self {
            Primitive::Sphere { radius, .. } => q.length() - radius,
            Primitive::Torus {
                radius,
                minor_radius,
                ..
            } => {
                let ring = (q.x * q.x + q.y * q.y).sqrt() - radius;
                (ring * ring + q.z * q.z).sqrt() - minor_radius
            }
            Primitive::Box { half_extents, .. } => {
                let d = q.abs() - Vec3::from_array(*half_extents);
                d.max(Vec3::ZERO).length() + d.max_elem().min(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    /// Vertices per axis.
    pub resolution: usize,
    #[serde(rename = "frames")]
    pub frame_count: usize,
    pub seed: u64,
    pub primitives: Vec<Primitive>,
}

impl SyntheticScene {
    pub fn new(resolution: usize, frame_count: usize, seed: u64, primitives: Vec<Primitive>) -> Result<Self> {
        let scene = SyntheticScene {
            resolution,
            frame_count,
            seed,
            primitives,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// One static sphere at the cube center.
    pub fn centered_sphere(resolution: usize, radius: f64, seed: u64) -> Self {
        SyntheticScene {
            resolution,
            frame_count: 1,
            seed,
            primitives: vec![Primitive::Sphere {
                center_path: CenterPath::fixed([0.5; 3]),
                radius,
            }],
        }
    }

    /// A sphere sliding along +x by `voxels_per_frame` voxel edges per frame.
    pub fn translating_sphere(
        resolution: usize,
        frames: usize,
        radius: f64,
        voxels_per_frame: f64,
        seed: u64,
    ) -> Self {
        let v = voxels_per_frame / (resolution - 1) as f64;
        let span = v * frames.saturating_sub(1) as f64;
        SyntheticScene {
            resolution,
            frame_count: frames,
            seed,
            primitives: vec![Primitive::Sphere {
                center_path: CenterPath {
                    start: [0.5 - span / 2.0, 0.5, 0.5],
                    velocity: [v, 0.0, 0.0],
                },
                radius,
            }],
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scene: SyntheticScene = serde_json::from_str(s)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn dims(&self) -> GridDims {
        GridDims::cube(self.resolution)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 || self.resolution > 1024 {
            return Err(Error::Config(format!(
                "resolution {} outside 2..=1024",
                self.resolution
            )));
        }
        if self.frame_count == 0 {
            return Err(Error::Config("scene needs at least one frame".into()));
        }
        for (i, prim) in self.primitives.iter().enumerate() {
            let b = prim.bound();
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::Config(format!("primitive {i} has an invalid size")));
            }
            // Linear paths reach their extremes at the first and last frame.
            for t in [0, self.frame_count - 1] {
                let c = prim.path().at(t);
                let lo = c - Vec3::splat(b);
                let hi = c + Vec3::splat(b);
                if [lo.x, lo.y, lo.z].iter().any(|v| *v < 0.0 || !v.is_finite())
                    || [hi.x, hi.y, hi.z].iter().any(|v| *v > 1.0 || !v.is_finite())
                {
                    return Err(Error::Config(format!(
                        "primitive {i} leaves the unit cube at frame {t}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Union signed distance; +infinity for an empty scene.
    pub fn sdf(&self, p: Vec3, t: usize) -> f64 {
        self.primitives
            .iter()
            .map(|prim| prim.sdf(p, t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn density_at(&self, p: Vec3, t: usize) -> f64 {
        DENSITY_SCALE * (-self.sdf(p, t)).max(0.0)
    }

    /// The seeded affine feature map applied to `(x, y, z, phase)`.
    pub fn feature_rule(&self) -> FeatureRule {
        FeatureRule::new(self.seed)
    }

    pub fn generate_frame(&self, t: usize) -> Result<(DensityVolume, FeatureVolume)> {
        if t >= self.frame_count {
            return Err(Error::Range(format!(
                "frame {t} outside 0..{}",
                self.frame_count
            )));
        }
        let dims = self.dims();
        let rule = self.feature_rule();
        let phase = (2.0 * std::f64::consts::PI * t as f64 / self.frame_count as f64).sin();
        let mut density = DensityVolume::zeros(dims);
        let mut features = FeatureVolume::zeros(dims, FEATURE_CHANNELS);
        for idx in 0..dims.count() {
            let p = Vec3::from_array(dims.position(dims.coords(idx)));
            density.values[idx] = self.density_at(p, t);
            features
                .vertex_mut(idx)
                .copy_from_slice(&rule.eval(p, phase));
        }
        Ok((density, features))
    }

    /// Ground-truth image of frame `t`: dense marching of the ground-truth
    /// volumes (vertices at or below the occupancy threshold zeroed) decoded
    /// by the reference MLP over a white background.
    pub fn reference_render(&self, t: usize, camera: &Camera) -> Result<Rendered> {
        let vol = self.reference_volume(t)?;
        let opts = RenderOptions {
            skip: false,
            ..RenderOptions::for_grid(self.dims()).with_background(Background::White)
        };
        render_volume(&vol, None, &reference_mlp(), camera, &opts)
    }

    pub fn reference_volume(&self, t: usize) -> Result<ExpandedVolume> {
        let (d, f) = self.generate_frame(t)?;
        ExpandedVolume::from_ground_truth(&d, &f, DEFAULT_GAMMA)
    }
}

/// The fixed decoder behind reference renders.
pub fn reference_mlp() -> TinyMlp {
    TinyMlp::random(REFERENCE_MLP_SEED, crate::render::mlp::DEFAULT_FREQUENCIES)
}

/// `feature = sigmoid(A (x, y, z, phase) + b)` with a seeded A and b.
#[derive(Debug, Clone)]
pub struct FeatureRule {
    matrix: [[f64; 4]; FEATURE_CHANNELS],
    bias: [f64; FEATURE_CHANNELS],
}

impl FeatureRule {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut matrix = [[0.0; 4]; FEATURE_CHANNELS];
        let mut bias = [0.0; FEATURE_CHANNELS];
        for (row, b) in matrix.iter_mut().zip(bias.iter_mut()) {
            for m in row.iter_mut() {
                *m = 2.0 * rng.sample::<f64, _>(StandardNormal);
            }
            *b = rng.gen_range(-1.0..1.0);
        }
        FeatureRule { matrix, bias }
    }

    pub fn eval(&self, p: Vec3, phase: f64) -> [f64; FEATURE_CHANNELS] {
        let x = [p.x - 0.5, p.y - 0.5, p.z - 0.5, phase];
        let mut out = [0.0; FEATURE_CHANNELS];
        for (o, (row, b)) in out.iter_mut().zip(self.matrix.iter().zip(&self.bias)) {
            *o = sigmoid(b + row.iter().zip(&x).map(|(m, v)| m * v).sum::<f64>());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::threshold_occupancy;
    use crate::render::march_ray;

    #[test]
    fn sphere_center_occupied_corner_empty() {
        let scene = SyntheticScene::centered_sphere(17, 0.25, 1);
        let (d, _) = scene.generate_frame(0).unwrap();
        assert!(d.get(8, 8, 8) > 0.0);
        assert_eq!(d.get(0, 0, 0), 0.0);
        assert!(d.values.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn generation_is_deterministic() {
        let scene = SyntheticScene::translating_sphere(16, 6, 0.2, 1.0, 42);
        let a = scene.generate_frame(3).unwrap();
        let b = scene.generate_frame(3).unwrap();
        assert_eq!(a, b);
        assert!(matches!(scene.generate_frame(6), Err(Error::Range(_))));
    }

    #[test]
    fn occupied_count_matches_exhaustive_sdf() {
        let scene = SyntheticScene::centered_sphere(64, 0.25, 0);
        let (d, _) = scene.generate_frame(0).unwrap();
        let count = threshold_occupancy(&d, DEFAULT_GAMMA).count();
        let mut oracle = 0;
        for k in 0..64 {
            for j in 0..64 {
                for i in 0..64 {
                    let p = [i, j, k].map(|c| c as f64 / 63.0);
                    let r = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) + (p[2] - 0.5).powi(2)).sqrt();
                    if 50.0 * (0.25 - r).max(0.0) > 0.003 {
                        oracle += 1;
                    }
                }
            }
        }
        assert_eq!(count, oracle);
        assert!(count > 0);
    }

    #[test]
    fn leaving_the_cube_is_rejected() {
        let bad = SyntheticScene::new(
            16,
            10,
            0,
            vec![Primitive::Sphere {
                center_path: CenterPath {
                    start: [0.5; 3],
                    velocity: [0.1, 0.0, 0.0],
                },
                radius: 0.2,
            }],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn scene_json_round_trip() {
        let json = r#"{
            "resolution": 32, "frames": 4, "seed": 7,
            "primitives": [
                {"kind": "sphere", "center_path": {"start": [0.5, 0.5, 0.5]}, "radius": 0.2},
                {"kind": "torus", "center_path": {"start": [0.5, 0.5, 0.5], "velocity": [0.0, 0.0, 0.01]},
                 "radius": 0.2, "minor_radius": 0.05},
                {"kind": "box", "center_path": {"start": [0.3, 0.3, 0.3]}, "half_extents": [0.1, 0.05, 0.1]}
            ]
        }"#;
        let scene = SyntheticScene::from_json(json).unwrap();
        assert_eq!(scene.frame_count, 4);
        assert_eq!(scene.primitives.len(), 3);
        let back: SyntheticScene = serde_json::from_str(&serde_json::to_string(&scene).unwrap()).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn translation_changes_occupancy_only_near_the_surface() {
        let scene = SyntheticScene::translating_sphere(32, 5, 0.2, 1.0, 3);
        let grids: Vec<_> = (0..5)
            .map(|t| threshold_occupancy(&scene.generate_frame(t).unwrap().0, DEFAULT_GAMMA))
            .collect();
        let dims = scene.dims();
        for t in 1..5 {
            let (a, b) = (&grids[t - 1], &grids[t]);
            let sym = (0..dims.count()).filter(|&i| a.get_index(i) != b.get_index(i)).count();
            let surface = (0..dims.count())
                .filter(|&i| {
                    if !a.get_index(i) {
                        return false;
                    }
                    let c = dims.coords(i);
                    (0..3).any(|ax| {
                        [-1i64, 1].iter().any(|s| {
                            let n = c[ax] as i64 + s;
                            if n < 0 || n >= dims.0[ax] as i64 {
                                return true;
                            }
                            let mut m = c;
                            m[ax] = n as usize;
                            !a.get(m[0], m[1], m[2])
                        })
                    })
                })
                .count();
            assert!(sym <= 2 * surface, "frame {t}: {sym} > 2 x {surface}");
        }
    }

    #[test]
    fn empty_scene_reference_is_background() {
        let scene = SyntheticScene::new(8, 1, 0, vec![]).unwrap();
        let cam = Camera::orbit(Vec3::splat(0.5), 20.0, 10.0, 2.0, 40.0, 8, 8);
        let img = scene.reference_render(0, &cam).unwrap();
        assert!(img.color.pixels.iter().all(|p| *p == [1.0; 3]));
    }

    #[test]
    fn opaque_sphere_occludes_centre_pixel() {
        let scene = SyntheticScene::centered_sphere(24, 0.3, 5);
        let cam = Camera::orbit(Vec3::splat(0.5), 0.0, 0.0, 2.0, 30.0, 9, 9);
        let img = scene.reference_render(0, &cam).unwrap();
        assert!(img.opacity[4 * 9 + 4] > 0.5);
        assert_ne!(img.color.get(4, 4), [1.0; 3]);
    }

    #[test]
    fn reference_equals_renderer_oracle() {
        let scene = SyntheticScene::translating_sphere(20, 3, 0.22, 1.0, 9);
        let cam = Camera::orbit(Vec3::splat(0.5), 35.0, 25.0, 2.2, 35.0, 12, 12);
        let img = scene.reference_render(1, &cam).unwrap();
        // Independent composition: march, accumulate by hand, decode.
        let (d, f) = scene.generate_frame(1).unwrap();
        let vol = ExpandedVolume::from_ground_truth(&d, &f, DEFAULT_GAMMA).unwrap();
        let mlp = reference_mlp();
        let step = 0.5 / 19.0;
        for v in 0..12 {
            for u in 0..12 {
                let ray = cam.ray(u, v);
                let samples = march_ray(&vol, None, &ray, step);
                let mut trans = 1.0;
                let mut feat = [0.0; FEATURE_CHANNELS];
                let mut alpha_sum = 0.0;
                for s in &samples {
                    let a = 1.0 - (-s.density * s.delta).exp();
                    for c in 0..FEATURE_CHANNELS {
                        feat[c] += trans * a * s.feature[c];
                    }
                    alpha_sum += trans * a;
                    trans *= 1.0 - a;
                }
                let enc = crate::render::positional_encode(ray.dir, 4);
                let rgb = crate::render::decode(&mlp, &feat, &enc).unwrap();
                let px = img.color.get(u, v);
                for c in 0..3 {
                    let expect = alpha_sum * rgb[c] + (1.0 - alpha_sum);
                    assert!((px[c] - expect).abs() < 1e-6);
                }
            }
        }
    }
}
