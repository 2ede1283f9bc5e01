//! Dense vertex grids over the unit cube and their raw float32 export.

use crate::error::{Error, Result};
use crate::io::{checked_volume, put_f32, put_u32, Reader, MAX_ELEMENTS};

/// Appearance feature channels per vertex.
pub const FEATURE_CHANNELS: usize = 12;

const VOLUME_MAGIC: &[u8; 4] = b"VRFV";

/// Vertex-grid dimensions `[nx, ny, nz]`. Vertex `(i, j, k)` sits at
/// `(i / (nx - 1), j / (ny - 1), k / (nz - 1))` in the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridDims(pub [usize; 3]);

impl GridDims {
    pub fn cube(n: usize) -> Self {
        GridDims([n, n, n])
    }

    pub fn count(&self) -> usize {
        self.0[0] * self.0[1] * self.0[2]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.0[0] * (y + self.0[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.0[0];
        let r = idx / self.0[0];
        [x, r % self.0[1], r / self.0[1]]
    }

    pub fn contains(&self, c: [usize; 3]) -> bool {
        c[0] < self.0[0] && c[1] < self.0[1] && c[2] < self.0[2]
    }

    pub fn min_axis(&self) -> usize {
        self.0.iter().copied().min().unwrap_or(0)
    }

    /// World position of a vertex.
    pub fn position(&self, c: [usize; 3]) -> [f64; 3] {
        let f = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        [f(c[0], self.0[0]), f(c[1], self.0[1]), f(c[2], self.0[2])]
    }
}

/// Nonnegative density per vertex, in inverse world units.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVolume {
    pub dims: GridDims,
    pub values: Vec<f64>,
}

impl DensityVolume {
    pub fn zeros(dims: GridDims) -> Self {
        DensityVolume {
            dims,
            values: vec![0.0; dims.count()],
        }
    }

    pub fn from_values(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.count() {
            return Err(Error::Shape(format!(
                "{} density values for a {:?} grid",
                values.len(),
                dims.0
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Range(format!("density {v} is negative or non-finite")));
        }
        Ok(DensityVolume { dims, values })
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.dims.index(x, y, z)]
    }

    pub fn to_vrfv(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.values.len());
        write_record(&mut out, self.dims, self.values.iter().copied());
        out
    }

    pub fn from_vrfv(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let (dims, values) = read_record(&mut r)?;
        r.expect_end()?;
        DensityVolume::from_values(dims, values)
    }
}

/// Per-vertex appearance features, stored vertex-major (`[vertex][channel]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    pub dims: GridDims,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl FeatureVolume {
    pub fn zeros(dims: GridDims, channels: usize) -> Self {
        FeatureVolume {
            dims,
            channels,
            values: vec![0.0; dims.count() * channels],
        }
    }

    pub fn vertex(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.channels..(idx + 1) * self.channels]
    }

    pub fn vertex_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.values[idx * self.channels..(idx + 1) * self.channels]
    }

    /// One VRFV record per channel, concatenated.
    pub fn to_vrfv(&self) -> Vec<u8> {
        let n = self.dims.count();
        let mut out = Vec::with_capacity(self.channels * (16 + 4 * n));
        for c in 0..self.channels {
            write_record(&mut out, self.dims, (0..n).map(|i| self.values[i * self.channels + c]));
        }
        out
    }

    pub fn from_vrfv(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let mut planes = Vec::new();
        let mut dims = None;
        while r.remaining() > 0 {
            let (d, values) = read_record(&mut r)?;
            if *dims.get_or_insert(d) != d {
                return Err(Error::Shape("feature channels disagree on grid size".into()));
            }
            planes.push(values);
            if planes.len() > 1024 {
                return Err(Error::Format("too many feature channels".into()));
            }
        }
        let dims = dims.ok_or_else(|| Error::Format("empty feature volume".into()))?;
        let channels = planes.len();
        let mut vol = FeatureVolume::zeros(dims, channels);
        for (c, plane) in planes.iter().enumerate() {
            for (i, v) in plane.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Range("non-finite feature value".into()));
                }
                vol.values[i * channels + c] = *v;
            }
        }
        Ok(vol)
    }
}

fn write_record(out: &mut Vec<u8>, dims: GridDims, values: impl Iterator<Item = f64>) {
    out.extend_from_slice(VOLUME_MAGIC);
    for d in dims.0 {
        put_u32(out, d as u32);
    }
    for v in values {
        put_f32(out, v as f32);
    }
}

fn read_record(r: &mut Reader<'_>) -> Result<(GridDims, Vec<f64>)> {
    r.magic(VOLUME_MAGIC)?;
    let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let n = checked_volume(&dims, MAX_ELEMENTS)?;
    if r.remaining() < n * 4 {
        return Err(Error::Format(format!(
            "volume body truncated: need {} bytes, have {}",
            n * 4,
            r.remaining()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(r.f32()? as f64);
    }
    Ok((GridDims(dims), values))
}
