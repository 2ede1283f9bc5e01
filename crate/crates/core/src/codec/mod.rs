//! 8-bit quantization and a compact block-DCT video codec for feature
//! images, plus the `.vrfs` stream container.

pub mod container;
pub mod dct;
pub mod external;
pub mod gof;
pub mod quant;
pub mod range_coder;
pub mod rd;

pub use container::{ChunkEntry, StreamFile};
pub use external::{external_decode, external_encode, ExternalCodec, ToolSpec};
pub use gof::{decode_gof, encode_gof, EncodedGof, Quantizer};
pub use quant::{dequantize, quantize, QuantizationProfile, Uint8Image};
pub use rd::{rate_distortion, RdContext, RdGroup, RdPoint};

use crate::error::{Error, Result};
use crate::feature::FeatureImage;

/// Quantizes a group with a covering profile and codes it.
pub fn encode_feature_gof(
    group_id: u32,
    first_frame: usize,
    frames: &[FeatureImage],
    quantizer: Quantizer,
) -> Result<EncodedGof> {
    let profile = QuantizationProfile::covering(frames)?;
    let q8 = frames
        .iter()
        .map(|f| quantize(f, &profile))
        .collect::<Result<Vec<_>>>()?;
    encode_gof(group_id, first_frame as u32, &q8, profile, quantizer)
}

/// Decodes a group back to feature images with sequence frame indices.
pub fn decode_feature_gof(gof: &EncodedGof) -> Result<Vec<FeatureImage>> {
    let frames = decode_gof(gof)?;
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let index = (gof.first_frame as usize)
                .checked_add(i)
                .ok_or_else(|| Error::Format("frame index overflows".into()))?;
            dequantize(f, &gof.profile, index, gof.group_id as usize)
        })
        .collect()
}
