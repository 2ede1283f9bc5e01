mod common;

use std::fs;

use videorf_core::codec::{decode_feature_gof, encode_feature_gof, Quantizer};
use videorf_core::feature::DensityActivation;
use videorf_core::math::Vec3;
use videorf_core::pipeline::{bake_sequence, build_groups, image_size_for, plan_scene};
use videorf_core::render::{render, Background, Camera, LoadedGroup};
use videorf_core::scene::{reference_mlp, SyntheticScene};
use videorf_stream::bundle::{bundle, AssetBundle, BundleInput, MANIFEST_FILE};
use videorf_stream::manifest::GofManifest;
use videorf_stream::StreamError;

fn camera() -> Camera {
    Camera::orbit(Vec3::splat(0.5), 30.0, 20.0, 2.4, 40.0, 24, 24)
}

#[test]
fn manifest_round_trip_is_byte_identical() {
    let fx = common::bundled(Quantizer::Lossy(4));
    let text = fs::read_to_string(fx.bundle().join(MANIFEST_FILE)).unwrap();
    let parsed = GofManifest::from_json(&text).unwrap();
    assert_eq!(parsed.to_json(), text);
    assert_eq!(GofManifest::from_json(&parsed.to_json()).unwrap(), parsed);
}

#[test]
fn manifests_conform_to_published_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../../../docs/manifest.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    for q in [Quantizer::Lossless, Quantizer::Lossy(4)] {
        let fx = common::bundled(q);
        let text = fs::read_to_string(fx.bundle().join(MANIFEST_FILE)).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{q:?}: {errors:?}");
    }
    let mut doc: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(common::bundled(Quantizer::Lossy(4)).bundle().join(MANIFEST_FILE)).unwrap(),
    )
    .unwrap();
    doc["groups"][0]["quantizer"] = "0".into();
    assert!(!validator.is_valid(&doc));
}

#[test]
fn storage_breakdown_sums_to_total_and_matches_files() {
    let fx = common::bundled(Quantizer::Lossy(4));
    let b = AssetBundle::open(fx.bundle()).unwrap();
    let m = &b.manifest;
    assert!(m.groups.len() >= 2, "fixture should split into groups");
    assert_eq!(m.storage.total(), m.total_bytes);
    m.validate_assets(&fx.bundle()).unwrap();
    let on_disk: u64 = m.uris().iter().map(|u| fs::metadata(fx.bundle().join(u)).unwrap().len()).sum();
    assert_eq!(on_disk, m.total_bytes);
    for s in [m.storage.feature_images, m.storage.mapping, m.storage.occupancy, m.storage.mlp] {
        assert!(s > 0);
    }
}

#[test]
fn one_group_sequence_has_one_entry_with_its_frame_range() {
    let scene = SyntheticScene::translating_sphere(10, 3, 0.2, 0.5, 1);
    let plan = plan_scene(&scene, 0.003, 1 << 18).unwrap();
    let (w, h) = image_size_for(&plan);
    let groups = build_groups(&plan, w, h, Default::default()).unwrap();
    assert_eq!(groups.len(), 1);
    let act = DensityActivation::default();
    let images = bake_sequence(&scene, &groups, &act, 0.003).unwrap();
    let gof = encode_feature_gof(0, 0, &images, Quantizer::Lossless).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mlp = reference_mlp();
    let m = bundle(
        &BundleInput {
            sequence_id: "one",
            groups: &groups,
            gofs: &[gof],
            mlp: &mlp,
            act,
            background: Background::White,
        },
        dir.path(),
    )
    .unwrap();
    assert_eq!(m.groups.len(), 1);
    assert_eq!((m.groups[0].start, m.groups[0].end), (0, 2));
    assert_eq!(m.frame_count, 3);
}

#[test]
fn missing_stream_is_a_bundle_error() {
    let scene = SyntheticScene::centered_sphere(8, 0.3, 0);
    let plan = plan_scene(&scene, 0.003, 1 << 18).unwrap();
    let (w, h) = image_size_for(&plan);
    let groups = build_groups(&plan, w, h, Default::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let r = bundle(
        &BundleInput {
            sequence_id: "x",
            groups: &groups,
            gofs: &[],
            mlp: &reference_mlp(),
            act: DensityActivation::default(),
            background: Background::White,
        },
        dir.path(),
    );
    assert!(matches!(r, Err(StreamError::Bundle(_))));
}

#[test]
fn deleted_asset_is_reported() {
    let fx = common::bundled(Quantizer::Lossy(8));
    let b = AssetBundle::open(fx.bundle()).unwrap();
    fs::remove_file(fx.bundle().join(&b.manifest.groups[0].occupancy_uri)).unwrap();
    assert!(matches!(b.manifest.validate_assets(&fx.bundle()), Err(StreamError::Bundle(_))));
    assert!(matches!(b.load_group(0), Err(StreamError::Bundle(_))));
}

#[test]
fn bundle_render_equals_library_render_of_loaded_group() {
    let fx = common::bundled(Quantizer::Lossless);
    let b = AssetBundle::open(fx.bundle()).unwrap();
    let cam = camera();
    let frame = b.manifest.groups[1].start;
    let from_disk = b.render(frame, &cam).unwrap();
    let g = b.load_group(1).unwrap();
    let direct = render(
        std::slice::from_ref(&g),
        &DensityActivation::default(),
        &b.mlp().unwrap(),
        &cam,
        frame,
        &b.render_options(),
    )
    .unwrap();
    assert_eq!(from_disk, direct);
}

#[test]
fn any_group_renders_from_a_partial_copy() {
    let fx = common::bundled(Quantizer::Lossy(4));
    let full = AssetBundle::open(fx.bundle()).unwrap();
    let cam = camera();
    for g in &full.manifest.groups {
        let partial = tempfile::tempdir().unwrap();
        for uri in [MANIFEST_FILE, &full.manifest.mlp.uri, &g.stream_uri, &g.mapping_uri, &g.mapping_mask_uri, &g.occupancy_uri] {
            common::copy_file(&fx.bundle().join(uri), &partial.path().join(uri));
        }
        let seek = AssetBundle::open(partial.path()).unwrap();
        for frame in g.start..=g.end {
            assert_eq!(seek.render(frame, &cam).unwrap(), full.render(frame, &cam).unwrap());
        }
        // Frames of other groups need assets that were not copied.
        let other = full.manifest.groups.iter().find(|o| o.id != g.id).unwrap();
        assert!(seek.render(other.start, &cam).is_err());
    }
}

#[test]
fn loaded_group_matches_decoded_stream() {
    let fx = common::bundled(Quantizer::Lossy(4));
    let b = AssetBundle::open(fx.bundle()).unwrap();
    let g: LoadedGroup = b.load_group(0).unwrap();
    let stream = videorf_core::codec::StreamFile::from_bytes(&fs::read(fx.bundle().join(&b.manifest.groups[0].stream_uri)).unwrap()).unwrap();
    assert_eq!(g.frames, decode_feature_gof(&stream.gofs[0]).unwrap());
}
