#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tempfile::TempDir;
use videorf_core::codec::Quantizer;
use videorf_core::pipeline::frame_occupancy;
use videorf_core::scene::SyntheticScene;
use videorf_stream::cli::{bake_work, encode, plan, synth, LayoutArg, Source};

/// A moving sphere whose frames do not all fit in one group.
pub fn moving_scene() -> SyntheticScene {
    SyntheticScene::translating_sphere(12, 4, 0.2, 2.0, 5)
}

/// Pixel budget that splits `moving_scene` into several groups.
pub fn split_theta(scene: &SyntheticScene) -> usize {
    let counts: Vec<usize> = frame_occupancy(scene, 0.003).unwrap().iter().map(|g| g.count()).collect();
    counts.iter().max().unwrap() * 13 / 10
}

pub struct Fixture {
    pub dir: TempDir,
    pub scene: SyntheticScene,
    pub theta: usize,
}

impl Fixture {
    pub fn work(&self) -> PathBuf {
        self.dir.path().join("work")
    }

    pub fn bundle(&self) -> PathBuf {
        self.dir.path().join("bundle")
    }

    pub fn scene_path(&self) -> PathBuf {
        self.dir.path().join("scene.json")
    }
}

/// synth -> plan -> bake -> encode (baked images) into a temp directory.
pub fn bundled(q: Quantizer) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let scene = moving_scene();
    let theta = split_theta(&scene);
    let fx = Fixture { dir, scene, theta };
    std::fs::write(fx.scene_path(), serde_json::to_string(&fx.scene).unwrap()).unwrap();
    synth(&fx.scene_path(), &fx.work()).unwrap();
    plan(&fx.work(), 0.003, theta).unwrap();
    bake_work(&fx.work(), LayoutArg::Morton).unwrap();
    encode(&fx.work(), Source::Baked, q, &[], None, &fx.bundle(), "moving").unwrap();
    fx
}

pub fn copy_file(from: &Path, to: &Path) {
    std::fs::create_dir_all(to.parent().unwrap()).unwrap();
    std::fs::copy(from, to).unwrap();
}
