//! Property checks shared by the fuzz targets and the corpus replay test.
//! Each accepts arbitrary bytes and panics only on a genuine bug.

use videorf_core::checkpoint::Checkpoint;
use videorf_core::codec::range_coder::{compress_bytes, decompress_bytes};
use videorf_core::codec::{decode_gof, EncodedGof, StreamFile};
use videorf_core::feature::FeatureImage;
use videorf_core::mapping::MappingTable;
use videorf_core::occupancy::{OccupancyGrid, OccupancyPyramid};
use videorf_core::render::Camera;
use videorf_core::scene::SyntheticScene;
use videorf_core::train::FitConfig;
use videorf_core::volume::{DensityVolume, FeatureVolume, GridDims};
use videorf_stream::manifest::GofManifest;
use videorf_stream::range::parse_range;

/// Decoding cost bound for one GOF input.
const MAX_SAMPLES: usize = 1 << 20;

pub fn vrfv(data: &[u8]) {
    if let Ok(v) = DensityVolume::from_vrfv(data) {
        assert_eq!(DensityVolume::from_vrfv(&v.to_vrfv()).unwrap(), v);
    }
    if let Ok(v) = FeatureVolume::from_vrfv(data) {
        assert_eq!(FeatureVolume::from_vrfv(&v.to_vrfv()).unwrap(), v);
    }
}

pub fn vrfo(data: &[u8]) {
    if let Ok(g) = OccupancyGrid::from_vrfo(data) {
        assert_eq!(OccupancyGrid::from_vrfo(&g.to_vrfo()).unwrap(), g);
    }
    if let Ok(p) = OccupancyPyramid::from_bytes(data) {
        assert_eq!(OccupancyPyramid::from_bytes(&p.to_bytes()).unwrap(), p);
    }
}

pub fn vrfm(data: &[u8]) {
    if let Ok(m) = MappingTable::from_vrfm(data) {
        assert_eq!(MappingTable::from_vrfm(&m.to_vrfm().unwrap()).unwrap(), m);
    }
}

/// Layout: three grid dimensions (minus one), a little-endian u32 mask
/// length, the mask, then the PNG.
pub fn mapping_png(data: &[u8]) {
    if data.len() < 7 {
        return;
    }
    let grid = GridDims([data[0], data[1], data[2]].map(|d| d as usize + 1));
    let mask_len = u32::from_le_bytes(data[3..7].try_into().unwrap()) as usize;
    let rest = &data[7..];
    if mask_len > rest.len() {
        return;
    }
    let (mask, png) = rest.split_at(mask_len);
    if let Ok(m) = MappingTable::from_png(grid, png, mask) {
        let (png, _) = m.to_png().unwrap();
        assert_eq!(MappingTable::from_png(grid, &png, &m.validity_mask()).unwrap(), m);
    }
}

pub fn vrfi(data: &[u8]) {
    if let Ok(img) = FeatureImage::from_vrfi(data) {
        let bytes = img.to_vrfi();
        assert_eq!(FeatureImage::from_vrfi(&bytes).unwrap().to_vrfi(), bytes);
    }
}

pub fn gof_chunk(data: &[u8]) {
    if let Ok(gof) = EncodedGof::from_bytes(data) {
        assert_eq!(EncodedGof::from_bytes(&gof.to_bytes()).unwrap(), gof);
        if gof.width * gof.height * gof.channels * gof.frames.len() <= MAX_SAMPLES {
            let _ = decode_gof(&gof);
        }
    }
}

pub fn vrfs(data: &[u8]) {
    if let Ok(index) = StreamFile::index(data) {
        for entry in index {
            assert!(entry.range.end <= data.len());
        }
    }
    if let Ok(file) = StreamFile::from_bytes(data) {
        assert_eq!(StreamFile::from_bytes(&file.to_bytes().unwrap()).unwrap(), file);
    }
}

pub fn vrfc(data: &[u8]) {
    if let Ok(c) = Checkpoint::from_bytes(data) {
        let bytes = c.to_bytes().unwrap();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap().to_bytes().unwrap(), bytes);
    }
}

pub fn range_coder(data: &[u8]) {
    let _ = decompress_bytes(data, 1 << 16);
    assert_eq!(decompress_bytes(&compress_bytes(data), data.len()).unwrap(), data);
}

/// The first byte selects the document type.
pub fn json(data: &[u8]) {
    let Some((&kind, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    match kind % 4 {
        0 => {
            if let Ok(s) = SyntheticScene::from_json(text) {
                assert_eq!(SyntheticScene::from_json(&serde_json::to_string(&s).unwrap()).unwrap(), s);
            }
        }
        1 => {
            if let Ok(c) = serde_json::from_str::<Camera>(text) {
                if c.validate().is_ok() {
                    let _ = c.ray(0, 0);
                }
            }
        }
        2 => {
            if let Ok(m) = GofManifest::from_json(text) {
                assert_eq!(GofManifest::from_json(&m.to_json()).unwrap().to_json(), m.to_json());
            }
        }
        _ => {
            if let Ok(c) = FitConfig::from_json(text) {
                assert_eq!(FitConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap(), c);
            }
        }
    }
}

/// Layout: little-endian u64 resource length, then the header text.
pub fn range_header(data: &[u8]) {
    if data.len() < 8 {
        return;
    }
    let len = u64::from_le_bytes(data[..8].try_into().unwrap()) % (1 << 40);
    if let Ok(header) = std::str::from_utf8(&data[8..]) {
        if let Ok(r) = parse_range(header, len) {
            assert!(r.start < r.end && r.end <= len);
        }
    }
}

/// Every target, by corpus directory name.
pub const TARGETS: [(&str, fn(&[u8])); 11] = [
    ("vrfv", vrfv),
    ("vrfo", vrfo),
    ("vrfm", vrfm),
    ("mapping_png", mapping_png),
    ("vrfi", vrfi),
    ("gof_chunk", gof_chunk),
    ("vrfs", vrfs),
    ("vrfc", vrfc),
    ("range_coder", range_coder),
    ("json", json),
    ("range_header", range_header),
];
