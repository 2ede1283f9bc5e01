mod common;

use std::fs;

use videorf_core::codec::Quantizer;
use videorf_core::color::ColorImage;
use videorf_core::math::Vec3;
use videorf_core::occupancy::plan_groups;
use videorf_core::pipeline::frame_occupancy;
use videorf_core::render::Camera;
use videorf_stream::bundle::render_from_assets;
use videorf_stream::cli::{run, PlanFile};

fn s(p: &std::path::Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn render_matches_library_render() {
    let fx = common::bundled(Quantizer::Lossy(4));
    let cam = Camera::orbit(Vec3::splat(0.5), 45.0, 15.0, 2.4, 40.0, 20, 16);
    let cam_path = fx.dir.path().join("cam.json");
    fs::write(&cam_path, serde_json::to_string(&cam).unwrap()).unwrap();
    let png = fx.dir.path().join("frame.png");
    let code = run([
        "render", "--assets", &s(&fx.bundle()), "--frame", "0", "--camera", &s(&cam_path), "--out", &s(&png),
    ]);
    assert_eq!(code, 0);
    let lib = render_from_assets(&fx.bundle(), 0, &cam).unwrap();
    assert_eq!(fs::read(&png).unwrap(), lib.color.to_png().unwrap());
    assert_eq!(ColorImage::from_png(&fs::read(&png).unwrap()).unwrap().width, 20);
}

#[test]
fn plan_matches_library_grouping() {
    let dir = tempfile::tempdir().unwrap();
    let scene = common::moving_scene();
    let scene_path = dir.path().join("scene.json");
    fs::write(&scene_path, serde_json::to_string(&scene).unwrap()).unwrap();
    let work = dir.path().join("w");
    assert_eq!(run(["synth", "--scene", &s(&scene_path), "--out", &s(&work)]), 0);
    let grids = frame_occupancy(&scene, 0.003).unwrap();
    for theta in [262_144, common::split_theta(&scene)] {
        assert_eq!(run(["plan", "--work", &s(&work), "--theta", &theta.to_string()]), 0);
        let file: PlanFile = serde_json::from_str(&fs::read_to_string(work.join("plan.json")).unwrap()).unwrap();
        assert_eq!(file.groups, plan_groups(&grids, theta).unwrap().ranges());
    }
}

#[test]
fn pipeline_through_cli_produces_a_valid_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let scene = common::moving_scene();
    let scene_path = dir.path().join("scene.json");
    fs::write(&scene_path, serde_json::to_string(&scene).unwrap()).unwrap();
    let work = s(&dir.path().join("w"));
    let out = s(&dir.path().join("b"));
    let fit_cfg = dir.path().join("fit.json");
    fs::write(&fit_cfg, r#"{"iters": 3, "batch_rays": 64}"#).unwrap();
    let theta = common::split_theta(&scene).to_string();
    assert_eq!(run(["synth", "--scene", &s(&scene_path), "--out", &work]), 0);
    assert_eq!(run(["plan", "--work", &work, "--theta", &theta]), 0);
    assert_eq!(run(["bake", "--work", &work]), 0);
    assert_eq!(
        run(["fit", "--work", &work, "--config", &s(&fit_cfg), "--views", "2", "--size", "8"]),
        0
    );
    assert_eq!(run(["encode", "--work", &work, "--q", "8", "--sweep", "4,lossless", "--out", &out]), 0);
    let b = videorf_stream::bundle::AssetBundle::open(&out).unwrap();
    b.manifest.validate_assets(std::path::Path::new(&out)).unwrap();
    assert_eq!(b.manifest.frame_count, scene.frame_count);
    assert_eq!(run(["bench", "--rd", "--work", &work, "--q", "4,16"]), 0);
}

#[test]
fn bench_layout_writes_morton_and_row_major_columns() {
    let dir = tempfile::tempdir().unwrap();
    let scene_path = dir.path().join("scene.json");
    fs::write(&scene_path, serde_json::to_string(&common::moving_scene()).unwrap()).unwrap();
    let csv = dir.path().join("layout.csv");
    assert_eq!(
        run(["bench", "--ablate", "layout", "--scene", &s(&scene_path), "--q", "8", "--out", &s(&csv)]),
        0
    );
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()].parse::<f64>().unwrap();
    assert!(col("morton_bytes") > 0.0 && col("row_major_bytes") > 0.0);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(["plan", "--no-such-flag"]), 2);
    assert_eq!(run(["frobnicate"]), 2);
    assert_eq!(run(["bench"]), 2);
    assert_eq!(run(["encode", "--work", "w", "--out", "o", "--q", "zero"]), 2);
}

#[test]
fn runtime_failure_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let code = run(["render", "--assets", &s(&missing), "--frame", "0", "--camera", "c.json", "--out", "o.png"]);
    assert_eq!(code, 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(["--help"]), 0);
}
