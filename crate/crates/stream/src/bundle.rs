//! Writing and reading bundled asset directories.

use std::fs;
use std::path::{Path, PathBuf};

use videorf_core::codec::{decode_feature_gof, EncodedGof, StreamFile};
use videorf_core::feature::{DensityActivation, FeatureImage, IMAGE_CHANNELS};
use videorf_core::mapping::MappingTable;
use videorf_core::occupancy::OccupancyPyramid;
use videorf_core::pipeline::GroupAssets;
use videorf_core::render::{render, Background, Camera, LoadedGroup, RenderOptions, Rendered, TinyMlp};
use videorf_core::volume::{GridDims, FEATURE_CHANNELS};

use crate::error::{Result, StreamError};
use crate::manifest::{GofManifest, GroupBytes, GroupEntry, ImageSpec, MlpSpec, MANIFEST_FORMAT, MANIFEST_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MLP_FILE: &str = "mlp.json";

/// Everything one sequence bundle is made of.
pub struct BundleInput<'a> {
    pub sequence_id: &'a str,
    pub groups: &'a [GroupAssets],
    /// One coded stream per group, in group order.
    pub gofs: &'a [EncodedGof],
    pub mlp: &'a TinyMlp,
    pub act: DensityActivation,
    pub background: Background,
}

fn write(root: &Path, uri: &str, bytes: &[u8]) -> Result<u64> {
    let path = root.join(uri);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, bytes)?;
    Ok(bytes.len() as u64)
}

/// Writes every asset plus `manifest.json` under `root`.
pub fn bundle(input: &BundleInput<'_>, root: &Path) -> Result<GofManifest> {
    let first = input
        .groups
        .first()
        .ok_or_else(|| StreamError::Bundle("no groups".into()))?;
    if input.gofs.len() != input.groups.len() {
        return Err(StreamError::Bundle(format!(
            "{} groups but {} coded streams",
            input.groups.len(),
            input.gofs.len()
        )));
    }
    input.mlp.validate()?;
    let (width, height) = (first.map.width(), first.map.height());
    let grid = first.map.grid();
    let mut entries = Vec::with_capacity(input.groups.len());
    for (i, (g, gof)) in input.groups.iter().zip(input.gofs).enumerate() {
        let id = i as u32;
        if gof.group_id != id || gof.first_frame as usize != g.group.start || gof.frames.len() != g.group.len() {
            return Err(StreamError::Bundle(format!(
                "stream for group {id} covers group {} frames {}+{}, expected frames {}..={}",
                gof.group_id,
                gof.first_frame,
                gof.frames.len(),
                g.group.start,
                g.group.end
            )));
        }
        if g.map.width() != width || g.map.height() != height || g.map.grid() != grid {
            return Err(StreamError::Bundle(format!("group {id} has a different image or grid size")));
        }
        if (gof.width, gof.height, gof.channels) != (width, height, IMAGE_CHANNELS) {
            return Err(StreamError::Bundle(format!("stream for group {id} has the wrong frame shape")));
        }
        let dir = format!("gof/{id}");
        let stream = StreamFile {
            width,
            height,
            channels: IMAGE_CHANNELS,
            gofs: vec![gof.clone()],
        }
        .to_bytes()?;
        let (png, depth) = g.map.to_png()?;
        let entry = GroupEntry {
            id,
            start: g.group.start,
            end: g.group.end,
            stream_uri: format!("{dir}/stream.vrfs"),
            mapping_uri: format!("{dir}/mapping.png"),
            mapping_mask_uri: format!("{dir}/mapping.mask"),
            occupancy_uri: format!("{dir}/occupancy.bin"),
            mapping_depth: depth,
            quantizer: gof.quantizer,
            quant_profile: gof.profile.clone(),
            bytes: GroupBytes {
                stream: 0,
                mapping: 0,
                mapping_mask: 0,
                occupancy: 0,
            },
        };
        let bytes = GroupBytes {
            stream: write(root, &entry.stream_uri, &stream)?,
            mapping: write(root, &entry.mapping_uri, &png)?,
            mapping_mask: write(root, &entry.mapping_mask_uri, &g.map.validity_mask())?,
            occupancy: write(root, &entry.occupancy_uri, &g.pyramid.to_bytes())?,
        };
        entries.push(GroupEntry { bytes, ..entry });
    }
    let mlp_json = serde_json::to_vec(input.mlp)?;
    let mlp_bytes = write(root, MLP_FILE, &mlp_json)?;
    let mut manifest = GofManifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        sequence_id: input.sequence_id.into(),
        frame_count: input.groups.last().map_or(0, |g| g.group.end + 1),
        grid: grid.0,
        feature_channels: FEATURE_CHANNELS,
        image: ImageSpec {
            width,
            height,
            channels: IMAGE_CHANNELS,
        },
        density_activation: input.act,
        encoding_frequencies: input.mlp.frequencies,
        background: input.background,
        mlp: MlpSpec {
            uri: MLP_FILE.into(),
            input_dim: input.mlp.input_dim,
            hidden_dim: input.mlp.hidden_dim,
            output_dim: input.mlp.output_dim,
            bytes: mlp_bytes,
        },
        groups: entries,
        storage: Default::default(),
        total_bytes: 0,
    };
    manifest.storage = manifest.computed_storage();
    manifest.total_bytes = manifest.storage.total();
    manifest.validate()?;
    fs::write(root.join(MANIFEST_FILE), manifest.to_json())?;
    Ok(manifest)
}

/// A bundle directory opened for reading.
pub struct AssetBundle {
    pub root: PathBuf,
    pub manifest: GofManifest,
}

impl AssetBundle {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let text = fs::read_to_string(root.join(MANIFEST_FILE))?;
        let manifest = GofManifest::from_json(&text)?;
        Ok(AssetBundle { root, manifest })
    }

    fn read(&self, uri: &str) -> Result<Vec<u8>> {
        fs::read(self.root.join(uri)).map_err(|e| StreamError::Bundle(format!("{uri}: {e}")))
    }

    pub fn mlp(&self) -> Result<TinyMlp> {
        let mlp: TinyMlp = serde_json::from_slice(&self.read(&self.manifest.mlp.uri)?)?;
        mlp.validate()?;
        Ok(mlp)
    }

    /// Reads only the assets of group `id`.
    pub fn load_group(&self, id: u32) -> Result<LoadedGroup> {
        let entry = self
            .manifest
            .group(id)
            .ok_or(videorf_core::Error::Load(id as usize))?;
        let grid = GridDims(self.manifest.grid);
        let map = MappingTable::from_png(grid, &self.read(&entry.mapping_uri)?, &self.read(&entry.mapping_mask_uri)?)?;
        let pyramid = OccupancyPyramid::from_bytes(&self.read(&entry.occupancy_uri)?)?;
        if pyramid.base().dims() != grid {
            return Err(StreamError::Bundle(format!("group {id} occupancy grid disagrees with the manifest")));
        }
        let stream = StreamFile::from_bytes(&self.read(&entry.stream_uri)?)?;
        let [gof] = <[EncodedGof; 1]>::try_from(stream.gofs)
            .map_err(|g| StreamError::Bundle(format!("group {id} stream holds {} chunks", g.len())))?;
        if gof.first_frame as usize != entry.start || gof.frames.len() != entry.end - entry.start + 1 {
            return Err(StreamError::Bundle(format!("group {id} stream covers the wrong frames")));
        }
        let frames: Vec<FeatureImage> = decode_feature_gof(&gof)?;
        Ok(LoadedGroup {
            start: entry.start,
            end: entry.end,
            map,
            pyramid,
            frames,
        })
    }

    /// Default render options for this bundle.
    pub fn render_options(&self) -> RenderOptions {
        RenderOptions::for_grid(GridDims(self.manifest.grid)).with_background(self.manifest.background)
    }

    /// Renders `frame` using only the assets of the group holding it.
    pub fn render(&self, frame: usize, camera: &Camera) -> Result<Rendered> {
        let entry = self
            .manifest
            .group_of_frame(frame)
            .ok_or(videorf_core::Error::Load(frame))?;
        let group = self.load_group(entry.id)?;
        let mlp = self.mlp()?;
        Ok(render(
            std::slice::from_ref(&group),
            &self.manifest.density_activation,
            &mlp,
            camera,
            frame,
            &self.render_options(),
        )?)
    }
}

/// Library entry point behind `videorf render`.
pub fn render_from_assets(root: &Path, frame: usize, camera: &Camera) -> Result<Rendered> {
    AssetBundle::open(root)?.render(frame, camera)
}
