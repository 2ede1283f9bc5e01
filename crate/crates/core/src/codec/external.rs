//! Adapter for an external system encoder: channels are packed into stacked
//! RGB tiles, written as a raw rgb24 stream and handed to a command line.

use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::quant::Uint8Image;
use crate::error::{Error, Result};

/// A program plus argument template; `{input}` and `{output}` are replaced
/// by file paths. Without `{output}`, the tool's stdout is the result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub program: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCodec {
    pub encode: ToolSpec,
    pub decode: ToolSpec,
}

/// Number of stacked RGB tiles holding `channels` planes.
pub fn tile_count(channels: usize) -> usize {
    channels.div_ceil(3)
}

/// Packs each frame into a `width x (height * tiles)` rgb24 picture and
/// concatenates the pictures.
pub fn pack_tiles(frames: &[Uint8Image]) -> Vec<u8> {
    let mut out = Vec::new();
    for f in frames {
        let n = f.width * f.height;
        for t in 0..tile_count(f.channels) {
            for p in 0..n {
                for k in 0..3 {
                    let c = 3 * t + k;
                    out.push(if c < f.channels { f.data[c * n + p] } else { 0 });
                }
            }
        }
    }
    out
}

pub fn unpack_tiles(raw: &[u8], width: usize, height: usize, channels: usize, frames: usize) -> Result<Vec<Uint8Image>> {
    let n = width * height;
    let per_frame = n * 3 * tile_count(channels);
    if raw.len() != per_frame * frames {
        return Err(Error::Format(format!(
            "raw stream has {} bytes, expected {}",
            raw.len(),
            per_frame * frames
        )));
    }
    Ok(raw
        .chunks_exact(per_frame.max(1))
        .take(frames)
        .map(|chunk| {
            let mut img = Uint8Image::filled(width, height, channels, 0);
            for c in 0..channels {
                let (t, k) = (c / 3, c % 3);
                for p in 0..n {
                    img.data[c * n + p] = chunk[t * n * 3 + p * 3 + k];
                }
            }
            img
        })
        .collect())
}

fn run(tool: &ToolSpec, input: &[u8], dir: &Path) -> Result<Vec<u8>> {
    let in_path = dir.join("input.raw");
    let out_path = dir.join("output.bin");
    std::fs::write(&in_path, input)?;
    let mut writes_file = false;
    let args: Vec<String> = tool
        .args
        .iter()
        .map(|a| {
            writes_file |= a.contains("{output}");
            a.replace("{input}", &in_path.to_string_lossy())
                .replace("{output}", &out_path.to_string_lossy())
        })
        .collect();
    let output = Command::new(&tool.program).args(&args).output().map_err(|e| {
        Error::Unavailable(format!("cannot run {:?}: {e}", tool.program))
    })?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(Error::Unavailable(format!(
            "{:?} failed with {}: {}",
            tool.program,
            output.status,
            stderr.lines().next().unwrap_or("")
        )));
    }
    if writes_file {
        Ok(std::fs::read(&out_path)?)
    } else {
        Ok(output.stdout)
    }
}

/// Encodes `frames` with the external tool.
pub fn external_encode(frames: &[Uint8Image], codec: &ExternalCodec) -> Result<Vec<u8>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Shape("no frames to encode".into()))?;
    if frames.iter().any(|f| !f.same_shape(first)) {
        return Err(Error::Shape("frames differ in size".into()));
    }
    let dir = tempfile::tempdir()?;
    run(&codec.encode, &pack_tiles(frames), dir.path())
}

pub fn external_decode(
    bytes: &[u8],
    codec: &ExternalCodec,
    width: usize,
    height: usize,
    channels: usize,
    frames: usize,
) -> Result<Vec<Uint8Image>> {
    let dir = tempfile::tempdir()?;
    let raw = run(&codec.decode, bytes, dir.path())?;
    unpack_tiles(&raw, width, height, channels, frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiles_round_trip() {
        let mut f = Uint8Image::filled(4, 3, 13, 0);
        for (i, v) in f.data.iter_mut().enumerate() {
            *v = (i % 256) as u8;
        }
        let raw = pack_tiles(&[f.clone(), f.clone()]);
        assert_eq!(raw.len(), 2 * 4 * 3 * 3 * 5);
        assert_eq!(unpack_tiles(&raw, 4, 3, 13, 2).unwrap(), vec![f.clone(), f]);
    }

    #[test]
    fn missing_tool_is_unavailable() {
        let tool = ToolSpec {
            program: "definitely-not-an-installed-encoder".into(),
            args: vec!["{input}".into()],
        };
        let codec = ExternalCodec {
            encode: tool.clone(),
            decode: tool,
        };
        let err = external_encode(&[Uint8Image::filled(8, 8, 13, 0)], &codec).unwrap_err();
        assert_eq!(err.kind(), "unavailable");
    }
}
