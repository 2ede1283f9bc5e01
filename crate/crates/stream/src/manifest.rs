//! The JSON manifest describing a bundled sequence.

use std::path::{Component, Path};

use serde::{Deserialize, Serialize};
use videorf_core::codec::{QuantizationProfile, Quantizer};
use videorf_core::feature::DensityActivation;
use videorf_core::render::Background;

use crate::error::{Result, StreamError};

pub const MANIFEST_FORMAT: &str = "videorf-manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Field order is the canonical serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GofManifest {
    pub format: String,
    pub version: u32,
    pub sequence_id: String,
    pub frame_count: usize,
    /// Vertices per axis.
    pub grid: [usize; 3],
    pub feature_channels: usize,
    pub image: ImageSpec,
    pub density_activation: DensityActivation,
    pub encoding_frequencies: usize,
    pub background: Background,
    pub mlp: MlpSpec,
    pub groups: Vec<GroupEntry>,
    pub storage: Storage,
    /// Sum of the sizes of every referenced asset.
    pub total_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSpec {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub uri: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupEntry {
    pub id: u32,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub stream_uri: String,
    pub mapping_uri: String,
    pub mapping_mask_uri: String,
    pub occupancy_uri: String,
    /// Bits per channel of the mapping PNG.
    pub mapping_depth: u8,
    pub quantizer: Quantizer,
    pub quant_profile: QuantizationProfile,
    pub bytes: GroupBytes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupBytes {
    pub stream: u64,
    pub mapping: u64,
    pub mapping_mask: u64,
    pub occupancy: u64,
}

/// Per-component storage, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Storage {
    pub feature_images: u64,
    pub mapping: u64,
    pub occupancy: u64,
    pub mlp: u64,
}

impl Storage {
    pub fn total(&self) -> u64 {
        self.feature_images + self.mapping + self.occupancy + self.mlp
    }
}

impl GofManifest {
    /// Canonical text: pretty-printed in declaration order, trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: GofManifest = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn group(&self, id: u32) -> Option<&GroupEntry> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn group_of_frame(&self, frame: usize) -> Option<&GroupEntry> {
        self.groups.iter().find(|g| (g.start..=g.end).contains(&frame))
    }

    /// Storage recomputed from the per-asset sizes.
    pub fn computed_storage(&self) -> Storage {
        let mut s = Storage {
            mlp: self.mlp.bytes,
            ..Storage::default()
        };
        for g in &self.groups {
            s.feature_images += g.bytes.stream;
            s.mapping += g.bytes.mapping + g.bytes.mapping_mask;
            s.occupancy += g.bytes.occupancy;
        }
        s
    }

    pub fn uris(&self) -> Vec<&str> {
        let mut out = vec![self.mlp.uri.as_str()];
        for g in &self.groups {
            out.extend([
                g.stream_uri.as_str(),
                g.mapping_uri.as_str(),
                g.mapping_mask_uri.as_str(),
                g.occupancy_uri.as_str(),
            ]);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(StreamError::Manifest(m));
        if self.format != MANIFEST_FORMAT || self.version != MANIFEST_VERSION {
            return bad(format!("unsupported format {} v{}", self.format, self.version));
        }
        if self.groups.is_empty() {
            return bad("no groups".into());
        }
        let mut next = 0;
        for (i, g) in self.groups.iter().enumerate() {
            if g.id as usize != i {
                return bad(format!("group {i} has id {}", g.id));
            }
            if g.start != next || g.end < g.start {
                return bad(format!("group {} covers {}..={}, expected to start at {next}", g.id, g.start, g.end));
            }
            next = g.end + 1;
            g.quant_profile
                .validate()
                .map_err(|e| StreamError::Manifest(format!("group {}: {e}", g.id)))?;
            if g.quant_profile.ranges.len() != self.image.channels {
                return bad(format!("group {} profile has {} channels", g.id, g.quant_profile.ranges.len()));
            }
        }
        if next != self.frame_count {
            return bad(format!("groups cover {next} frames, manifest says {}", self.frame_count));
        }
        for uri in self.uris() {
            if !safe_relative(uri) {
                return bad(format!("URI {uri:?} is not a plain relative path"));
            }
        }
        let computed = self.computed_storage();
        if computed != self.storage {
            return bad(format!("storage {:?} disagrees with assets {:?}", self.storage, computed));
        }
        if self.storage.total() != self.total_bytes {
            return bad(format!(
                "components sum to {}, total_bytes is {}",
                self.storage.total(),
                self.total_bytes
            ));
        }
        Ok(())
    }

    /// Checks that every URI resolves under `root` with the recorded size.
    pub fn validate_assets(&self, root: &Path) -> Result<()> {
        let mut expected = vec![(self.mlp.uri.as_str(), self.mlp.bytes)];
        for g in &self.groups {
            expected.extend([
                (g.stream_uri.as_str(), g.bytes.stream),
                (g.mapping_uri.as_str(), g.bytes.mapping),
                (g.mapping_mask_uri.as_str(), g.bytes.mapping_mask),
                (g.occupancy_uri.as_str(), g.bytes.occupancy),
            ]);
        }
        for (uri, bytes) in expected {
            let len = std::fs::metadata(root.join(uri))
                .map_err(|e| StreamError::Bundle(format!("{uri}: {e}")))?
                .len();
            if len != bytes {
                return Err(StreamError::Bundle(format!("{uri} has {len} bytes, manifest says {bytes}")));
            }
        }
        Ok(())
    }
}

/// True for non-empty relative paths made only of normal components.
pub fn safe_relative(uri: &str) -> bool {
    !uri.contains('\\')
        && uri.split('/').all(|s| !s.is_empty() && s != "." && s != "..")
        && Path::new(uri).components().all(|c| matches!(c, Component::Normal(_)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths() {
        assert!(safe_relative("gof/0/stream.vrfs"));
        assert!(!safe_relative("../etc/passwd"));
        assert!(!safe_relative("/abs"));
        assert!(!safe_relative(""));
        assert!(!safe_relative("a/./b"));
    }
}
