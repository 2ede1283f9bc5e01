//! `VRFC` checkpoints bundling fitted feature images with the decoder.

use crate::error::{Error, Result};
use crate::feature::FeatureImage;
use crate::io::{put_u16, put_u32, put_u64, Reader};
use crate::render::TinyMlp;

pub const VRFC_VERSION: u16 = 1;
/// Images accepted from one checkpoint.
pub const MAX_IMAGES: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub images: Vec<FeatureImage>,
    pub mlp: TinyMlp,
}

impl Checkpoint {
    /// Layout: magic, version, image count, length-prefixed `VRFI` records,
    /// length-prefixed MLP JSON, CRC-32 of everything before it.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(b"VRFC");
        put_u16(&mut out, VRFC_VERSION);
        put_u32(&mut out, self.images.len() as u32);
        for img in &self.images {
            let rec = img.to_vrfi();
            put_u64(&mut out, rec.len() as u64);
            out.extend_from_slice(&rec);
        }
        let mlp = serde_json::to_vec(&self.mlp)?;
        put_u64(&mut out, mlp.len() as u64);
        out.extend_from_slice(&mlp);
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Format("checkpoint shorter than its checksum".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader::new(body);
        r.magic(b"VRFC")?;
        let version = r.u16()?;
        if version != VRFC_VERSION {
            return Err(Error::Format(format!("unsupported VRFC version {version}")));
        }
        let count = r.u32()? as usize;
        if count > MAX_IMAGES {
            return Err(Error::Format(format!("{count} images exceed {MAX_IMAGES}")));
        }
        let mut images = Vec::with_capacity(count.min(r.remaining() / 8 + 1));
        for _ in 0..count {
            let len = usize::try_from(r.u64()?).map_err(|_| Error::Format("record length overflows".into()))?;
            images.push(FeatureImage::from_vrfi(r.take(len)?)?);
        }
        let len = usize::try_from(r.u64()?).map_err(|_| Error::Format("record length overflows".into()))?;
        let mlp: TinyMlp = serde_json::from_slice(r.take(len)?)?;
        mlp.validate()?;
        r.expect_end()?;
        Ok(Checkpoint { images, mlp })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_checksum() {
        let mut img = FeatureImage::zeros(8, 8, 3, 1);
        img.data.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.25);
        let ck = Checkpoint {
            images: vec![img.clone(), img],
            mlp: TinyMlp::random(9, 4),
        };
        let mut bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.images, ck.images);
        assert_eq!(back.mlp.params().len(), ck.mlp.params().len());
        for (a, b) in back.mlp.params().iter().zip(ck.mlp.params()) {
            assert_eq!(*a, b);
        }
        bytes[10] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checksum { .. })));
    }
}
