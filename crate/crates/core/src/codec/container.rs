//! `.vrfs` stream container: a small header followed by length-prefixed,
//! independently decodable GOF chunks.

use std::ops::Range;

use super::gof::EncodedGof;
use crate::error::{Error, Result};
use crate::io::{put_u16, put_u32, put_u64, Reader};

pub const VRFS_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 2 + 4;
/// Chunks accepted from one container.
pub const MAX_GOFS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamFile {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub gofs: Vec<EncodedGof>,
}

/// Where one chunk lives inside a container.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkEntry {
    pub group_id: u32,
    /// Byte range of the chunk body, excluding its length prefix.
    pub range: Range<usize>,
}

impl StreamFile {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(b"VRFS");
        put_u16(&mut out, VRFS_VERSION);
        put_u32(&mut out, self.width as u32);
        put_u32(&mut out, self.height as u32);
        put_u16(&mut out, self.channels as u16);
        put_u32(&mut out, self.gofs.len() as u32);
        for g in &self.gofs {
            if (g.width, g.height, g.channels) != (self.width, self.height, self.channels) {
                return Err(Error::Shape(format!(
                    "GOF {} is {}x{}x{}, stream is {}x{}x{}",
                    g.group_id, g.width, g.height, g.channels, self.width, self.height, self.channels
                )));
            }
            let chunk = g.to_bytes();
            put_u64(&mut out, chunk.len() as u64);
            out.extend_from_slice(&chunk);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (width, height, channels, entries) = parse_index(bytes)?;
        let mut gofs = Vec::with_capacity(entries.len());
        for e in entries {
            let g = EncodedGof::from_bytes(&bytes[e.range])?;
            if (g.width, g.height, g.channels) != (width, height, channels) {
                return Err(Error::Format(format!(
                    "GOF {} shape disagrees with the stream header",
                    g.group_id
                )));
            }
            gofs.push(g);
        }
        Ok(StreamFile {
            width,
            height,
            channels,
            gofs,
        })
    }

    pub fn index(bytes: &[u8]) -> Result<Vec<ChunkEntry>> {
        Ok(parse_index(bytes)?.3)
    }
}

fn parse_index(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<ChunkEntry>)> {
    let mut r = Reader::new(bytes);
    r.magic(b"VRFS")?;
    let version = r.u16()?;
    if version != VRFS_VERSION {
        return Err(Error::Format(format!("unsupported VRFS version {version}")));
    }
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let channels = r.u16()? as usize;
    let count = r.u32()? as usize;
    if count > MAX_GOFS {
        return Err(Error::Format(format!("{count} GOFs exceed {MAX_GOFS}")));
    }
    debug_assert_eq!(r.position(), HEADER_LEN);
    let mut entries = Vec::with_capacity(count.min(r.remaining() / 12 + 1));
    for _ in 0..count {
        let len = usize::try_from(r.u64()?).map_err(|_| Error::Format("chunk length overflows".into()))?;
        let start = r.position();
        let body = r.take(len)?;
        if body.len() < 4 {
            return Err(Error::Format("chunk too short for a group id".into()));
        }
        entries.push(ChunkEntry {
            group_id: u32::from_le_bytes(body[..4].try_into().unwrap()),
            range: start..start + len,
        });
    }
    r.expect_end()?;
    Ok((width, height, channels, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::gof::{decode_gof, encode_gof, Quantizer};
    use crate::codec::quant::{QuantizationProfile, Uint8Image};

    fn stream() -> StreamFile {
        let profile = QuantizationProfile {
            ranges: vec![[0.0, 1.0]; 2],
            bits: 8,
        };
        let gofs = (0..3u32)
            .map(|g| {
                let frames: Vec<Uint8Image> = (0..2)
                    .map(|t| {
                        let mut f = Uint8Image::filled(16, 8, 2, 0);
                        for (i, v) in f.data.iter_mut().enumerate() {
                            *v = ((i * 7 + t * 3 + g as usize * 11) % 251) as u8;
                        }
                        f
                    })
                    .collect();
                encode_gof(g, 2 * g, &frames, profile.clone(), Quantizer::Lossless).unwrap()
            })
            .collect();
        StreamFile {
            width: 16,
            height: 8,
            channels: 2,
            gofs,
        }
    }

    #[test]
    fn container_round_trip() {
        let s = stream();
        let bytes = s.to_bytes().unwrap();
        assert_eq!(StreamFile::from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn chunks_decode_from_their_byte_range_alone() {
        let s = stream();
        let bytes = s.to_bytes().unwrap();
        for (entry, gof) in StreamFile::index(&bytes).unwrap().iter().zip(&s.gofs) {
            assert_eq!(entry.group_id, gof.group_id);
            let slice = bytes[entry.range.clone()].to_vec();
            let decoded = EncodedGof::from_bytes(&slice).unwrap();
            assert_eq!(decode_gof(&decoded).unwrap(), decode_gof(gof).unwrap());
        }
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = stream().to_bytes().unwrap();
        for cut in [0, 3, HEADER_LEN, bytes.len() - 1] {
            assert!(StreamFile::from_bytes(&bytes[..cut]).is_err());
        }
    }
}
