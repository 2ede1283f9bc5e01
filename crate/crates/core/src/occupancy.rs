//! Binary vertex occupancy, adaptive frame grouping and the max-pooled skip
//! pyramid.

use std::io::Cursor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{checked_volume, put_u32, Reader, MAX_ELEMENTS};
use crate::volume::{DensityVolume, GridDims};

const OCCUPANCY_MAGIC: &[u8; 4] = b"VRFO";

/// Density threshold for occupancy.
pub const DEFAULT_GAMMA: f64 = 0.003;
/// Pixel budget per group of frames (a 512x512 feature image).
pub const DEFAULT_THETA: usize = 512 * 512;

/// One bit per voxel vertex with a cached population count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    dims: GridDims,
    words: Vec<u64>,
    count: usize,
}

impl OccupancyGrid {
    pub fn empty(dims: GridDims) -> Self {
        OccupancyGrid {
            dims,
            words: vec![0; dims.count().div_ceil(64)],
            count: 0,
        }
    }

    pub fn from_fn(dims: GridDims, mut f: impl FnMut([usize; 3]) -> bool) -> Self {
        let mut grid = OccupancyGrid::empty(dims);
        for idx in 0..dims.count() {
            if f(dims.coords(idx)) {
                grid.set_index(idx);
            }
        }
        grid
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// Number of occupied vertices, g(O).
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.words[idx >> 6] >> (idx & 63) & 1 == 1
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.get_index(self.dims.index(x, y, z))
    }

    pub fn set_index(&mut self, idx: usize) {
        let w = &mut self.words[idx >> 6];
        let bit = 1u64 << (idx & 63);
        if *w & bit == 0 {
            *w |= bit;
            self.count += 1;
        }
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize) {
        let idx = self.dims.index(x, y, z);
        self.set_index(idx);
    }

    /// Occupied vertex indices in ascending linear (row-major) order.
    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
        })
    }

    fn or_assign(&mut self, other: &OccupancyGrid) {
        let mut count = 0;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
            count += a.count_ones() as usize;
        }
        self.count = count;
    }

    /// Occupied vertices in `other` that are not in `self`.
    fn count_new(&self, other: &OccupancyGrid) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (b & !a).count_ones() as usize)
            .sum()
    }

    /// Bit-packed rows (`ceil(nx / 8)` bytes per `(y, z)` row, LSB first)
    /// behind the 16-byte VRFO header.
    pub fn to_vrfo(&self) -> Vec<u8> {
        let [nx, ny, nz] = self.dims.0;
        let row = nx.div_ceil(8);
        let mut out = Vec::with_capacity(16 + row * ny * nz);
        out.extend_from_slice(OCCUPANCY_MAGIC);
        for d in self.dims.0 {
            put_u32(&mut out, d as u32);
        }
        for z in 0..nz {
            for y in 0..ny {
                let start = out.len();
                out.resize(start + row, 0);
                for x in 0..nx {
                    if self.get(x, y, z) {
                        out[start + x / 8] |= 1 << (x % 8);
                    }
                }
            }
        }
        out
    }

    pub fn from_vrfo(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let grid = Self::read_vrfo(&mut r)?;
        r.expect_end()?;
        Ok(grid)
    }

    fn read_vrfo(r: &mut Reader<'_>) -> Result<Self> {
        r.magic(OCCUPANCY_MAGIC)?;
        let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
        checked_volume(&dims, MAX_ELEMENTS)?;
        let dims = GridDims(dims);
        let [nx, ny, nz] = dims.0;
        let row = nx.div_ceil(8);
        let body = r.take(row * ny * nz)?;
        let mut grid = OccupancyGrid::empty(dims);
        for z in 0..nz {
            for y in 0..ny {
                let bytes = &body[(z * ny + y) * row..][..row];
                for x in 0..nx {
                    if bytes[x / 8] >> (x % 8) & 1 == 1 {
                        grid.set(x, y, z);
                    }
                }
            }
        }
        Ok(grid)
    }

    /// One monochrome PNG per z slice (occupied = 255).
    pub fn to_png_slices(&self) -> Result<Vec<Vec<u8>>> {
        let [nx, ny, nz] = self.dims.0;
        (0..nz)
            .map(|z| {
                let img = image::GrayImage::from_fn(nx as u32, ny as u32, |x, y| {
                    image::Luma([if self.get(x as usize, y as usize, z) { 255 } else { 0 }])
                });
                let mut buf = Cursor::new(Vec::new());
                img.write_to(&mut buf, image::ImageFormat::Png)?;
                Ok(buf.into_inner())
            })
            .collect()
    }
}

/// Marks vertices whose density exceeds `gamma`.
pub fn threshold_occupancy(vol: &DensityVolume, gamma: f64) -> OccupancyGrid {
    let mut grid = OccupancyGrid::empty(vol.dims);
    for (i, &v) in vol.values.iter().enumerate() {
        if v > gamma {
            grid.set_index(i);
        }
    }
    grid
}

/// Elementwise OR of grids sharing one resolution.
pub fn union(grids: &[&OccupancyGrid]) -> Result<OccupancyGrid> {
    let first = grids
        .first()
        .ok_or_else(|| Error::Shape("union of zero grids".into()))?;
    let mut out = OccupancyGrid::empty(first.dims);
    for g in grids {
        if g.dims != first.dims {
            return Err(Error::Shape(format!(
                "cannot union {:?} with {:?}",
                first.dims.0, g.dims.0
            )));
        }
        out.or_assign(g);
    }
    Ok(out)
}

/// A run of frames sharing one mapping table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameGroup {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub union: OccupancyGrid,
}

impl FrameGroup {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start..=self.end).contains(&frame)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPlan {
    pub groups: Vec<FrameGroup>,
}

/// Frame ranges of a plan, without the union grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRange {
    pub start: usize,
    pub end: usize,
}

impl GroupPlan {
    pub fn ranges(&self) -> Vec<GroupRange> {
        self.groups
            .iter()
            .map(|g| GroupRange {
                start: g.start,
                end: g.end,
            })
            .collect()
    }

    pub fn frame_count(&self) -> usize {
        self.groups.last().map_or(0, |g| g.end + 1)
    }

    pub fn group_of(&self, frame: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(frame))
    }
}

/// Greedy left-to-right grouping: each group is the longest run of frames
/// whose union occupancy stays within `theta` vertices.
pub fn plan_groups(grids: &[OccupancyGrid], theta: usize) -> Result<GroupPlan> {
    if grids.is_empty() {
        return Err(Error::Range("no frames to group".into()));
    }
    if theta == 0 {
        return Err(Error::Range("theta must be at least 1".into()));
    }
    let dims = grids[0].dims;
    let mut groups = Vec::new();
    let mut start = 0;
    let mut acc: Option<OccupancyGrid> = None;
    for (t, grid) in grids.iter().enumerate() {
        if grid.dims != dims {
            return Err(Error::Shape(format!(
                "frame {t} has grid {:?}, expected {:?}",
                grid.dims.0, dims.0
            )));
        }
        if grid.count() > theta {
            return Err(Error::Overflow {
                frame: t,
                occupied: grid.count(),
                theta,
            });
        }
        match acc.as_mut() {
            Some(u) if u.count() + u.count_new(grid) <= theta => u.or_assign(grid),
            Some(_) => {
                groups.push(FrameGroup {
                    start,
                    end: t - 1,
                    union: acc.take().unwrap(),
                });
                start = t;
                acc = Some(grid.clone());
            }
            None => acc = Some(grid.clone()),
        }
    }
    groups.push(FrameGroup {
        start,
        end: grids.len() - 1,
        union: acc.unwrap(),
    });
    Ok(GroupPlan { groups })
}

/// Max-pooled occupancy hierarchy; level 0 is the full-resolution grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyPyramid {
    levels: Vec<OccupancyGrid>,
}

/// Pooling continues while the smallest axis is at least this long.
const POOL_WHILE_AT_LEAST: usize = 16;

/// Builds halved levels (ceiling division, empty padding) until the coarsest
/// level's shortest axis drops below 16. At least one pooled level is
/// always produced.
pub fn build_pyramid(grid: &OccupancyGrid) -> Result<OccupancyPyramid> {
    if grid.dims.min_axis() < 2 {
        return Err(Error::Range(format!(
            "pyramid needs every axis >= 2, got {:?}",
            grid.dims.0
        )));
    }
    let mut levels = vec![grid.clone()];
    loop {
        let last = levels.last().unwrap();
        if levels.len() >= 2 && last.dims.min_axis() < POOL_WHILE_AT_LEAST {
            break;
        }
        if last.dims.min_axis() < 2 {
            break;
        }
        let pooled = max_pool(last);
        levels.push(pooled);
    }
    Ok(OccupancyPyramid { levels })
}

fn max_pool(fine: &OccupancyGrid) -> OccupancyGrid {
    let [nx, ny, nz] = fine.dims.0;
    let dims = GridDims([nx.div_ceil(2), ny.div_ceil(2), nz.div_ceil(2)]);
    let mut coarse = OccupancyGrid::empty(dims);
    for idx in fine.occupied() {
        let [x, y, z] = fine.dims.coords(idx);
        coarse.set(x / 2, y / 2, z / 2);
    }
    coarse
}

impl OccupancyPyramid {
    pub fn levels(&self) -> &[OccupancyGrid] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &OccupancyGrid {
        &self.levels[l]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn base(&self) -> &OccupancyGrid {
        &self.levels[0]
    }

    /// Concatenated VRFO records, finest first.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.levels.iter().flat_map(|l| l.to_vrfo()).collect()
    }

    /// Parses concatenated levels and checks each one is the max-pool of its
    /// predecessor.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let mut levels: Vec<OccupancyGrid> = Vec::new();
        while r.remaining() > 0 {
            let level = OccupancyGrid::read_vrfo(&mut r)?;
            if let Some(prev) = levels.last() {
                if max_pool(prev) != level {
                    return Err(Error::Format(format!(
                        "pyramid level {} is not the max-pool of its predecessor",
                        levels.len()
                    )));
                }
            }
            levels.push(level);
            if levels.len() > 64 {
                return Err(Error::Format("too many pyramid levels".into()));
            }
        }
        if levels.len() < 2 {
            return Err(Error::Format(format!(
                "pyramid needs at least 2 levels, found {}",
                levels.len()
            )));
        }
        Ok(OccupancyPyramid { levels })
    }
}
