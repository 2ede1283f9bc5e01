//! Mapping tables between occupied voxel vertices and feature-image pixels.
//!
//! Occupied vertices of a group's union grid are sorted (3D Morton order by
//! default), cut into chunks of 64 and written block by block into 8x8 tiles
//! of the feature image, each tile filled in 2D Morton order.

use std::io::Cursor;

use image::{ImageBuffer, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::io::{checked_volume, put_u16, put_u32, Reader};
use crate::morton::{morton2_decode, morton3_encode, MortonCode};
use crate::occupancy::OccupancyGrid;
use crate::volume::GridDims;

/// Longest grid axis a 16-bit coordinate image can address.
const MAX_AXIS: usize = 1 << 16;

/// Marks a pixel or vertex without a partner.
pub const EMPTY: u32 = u32::MAX;

pub const BLOCK: usize = 8;
const BLOCK_PIXELS: usize = BLOCK * BLOCK;
const MAPPING_MAGIC: &[u8; 4] = b"VRFM";
const MAPPING_VERSION: u16 = 1;
/// Largest feature image accepted when decoding.
const MAX_IMAGE_PIXELS: usize = 4096 * 4096;

/// Order in which occupied vertices are consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexOrder {
    Morton,
    RowMajor,
}

/// How the k-th vertex of the sorted list lands on the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelPlacement {
    /// Chunks of 64 fill 8x8 blocks (blocks row-major), 2D Morton inside.
    MortonBlocks,
    /// Plain raster order across the whole image.
    RowMajor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub order: VertexOrder,
    pub placement: PixelPlacement,
}

impl Layout {
    pub const MORTON_BLOCKS: Layout = Layout {
        order: VertexOrder::Morton,
        placement: PixelPlacement::MortonBlocks,
    };
    pub const ROW_MAJOR: Layout = Layout {
        order: VertexOrder::RowMajor,
        placement: PixelPlacement::RowMajor,
    };
}

impl Default for Layout {
    fn default() -> Self {
        Layout::MORTON_BLOCKS
    }
}

/// Bijection between occupied vertices and pixels of a `width x height`
/// feature image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingTable {
    grid: GridDims,
    width: usize,
    height: usize,
    /// Pixel index (`v * width + u`) per vertex, or [`EMPTY`].
    forward: Vec<u32>,
    /// Vertex index per pixel, or [`EMPTY`].
    inverse: Vec<u32>,
    occupied: usize,
}

pub fn build_mapping(occ: &OccupancyGrid, width: usize, height: usize) -> Result<MappingTable> {
    build_mapping_with(occ, width, height, Layout::default())
}

pub fn build_mapping_with(
    occ: &OccupancyGrid,
    width: usize,
    height: usize,
    layout: Layout,
) -> Result<MappingTable> {
    if width == 0 || height == 0 || width % BLOCK != 0 || height % BLOCK != 0 {
        return Err(Error::Shape(format!(
            "feature image {width}x{height} must be a nonzero multiple of {BLOCK}"
        )));
    }
    let pixels = width * height;
    if occ.count() > pixels {
        return Err(Error::Capacity {
            needed: occ.count(),
            available: pixels,
        });
    }
    let grid = occ.dims();
    let mut vertices: Vec<usize> = occ.occupied().collect();
    if layout.order == VertexOrder::Morton {
        let mut keyed = vertices
            .iter()
            .map(|&i| {
                let [x, y, z] = grid.coords(i);
                Ok((morton3_encode(x as u32, y as u32, z as u32)?, i))
            })
            .collect::<Result<Vec<_>>>()?;
        keyed.sort_unstable();
        vertices = keyed.into_iter().map(|(_, i)| i).collect();
    }

    let mut forward = vec![EMPTY; grid.count()];
    let mut inverse = vec![EMPTY; pixels];
    for (rank, &v) in vertices.iter().enumerate() {
        let (u, row) = place(rank, width, layout.placement);
        let p = row * width + u;
        forward[v] = p as u32;
        inverse[p] = v as u32;
    }
    Ok(MappingTable {
        grid,
        width,
        height,
        forward,
        inverse,
        occupied: vertices.len(),
    })
}

/// Smallest square image, with a side that is a multiple of the block size,
/// holding `count` pixels.
pub fn square_image_for(count: usize) -> (usize, usize) {
    let mut side = BLOCK;
    while side * side < count {
        side += BLOCK;
    }
    (side, side)
}

/// Pixel `(u, v)` receiving the `rank`-th sorted vertex.
pub fn place(rank: usize, width: usize, placement: PixelPlacement) -> (usize, usize) {
    match placement {
        PixelPlacement::MortonBlocks => {
            let blocks_per_row = width / BLOCK;
            let (block, k) = (rank / BLOCK_PIXELS, rank % BLOCK_PIXELS);
            let (du, dv) = morton2_decode(MortonCode(k as u64));
            (
                (block % blocks_per_row) * BLOCK + du as usize,
                (block / blocks_per_row) * BLOCK + dv as usize,
            )
        }
        PixelPlacement::RowMajor => (rank % width, rank / width),
    }
}

impl MappingTable {
    pub fn grid(&self) -> GridDims {
        self.grid
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn occupied_pixels(&self) -> usize {
        self.occupied
    }

    /// Pixel index for a vertex index, O(1).
    #[inline]
    pub fn forward_index(&self, vertex: usize) -> Option<usize> {
        match self.forward[vertex] {
            EMPTY => None,
            p => Some(p as usize),
        }
    }

    /// Pixel `(u, v)` for vertex coordinates.
    pub fn forward(&self, c: [usize; 3]) -> Option<(usize, usize)> {
        if !self.grid.contains(c) {
            return None;
        }
        self.forward_index(self.grid.index(c[0], c[1], c[2]))
            .map(|p| (p % self.width, p / self.width))
    }

    #[inline]
    pub fn inverse_index(&self, pixel: usize) -> Option<usize> {
        match self.inverse[pixel] {
            EMPTY => None,
            v => Some(v as usize),
        }
    }

    pub fn inverse(&self, u: usize, v: usize) -> Option<[usize; 3]> {
        if u >= self.width || v >= self.height {
            return None;
        }
        self.inverse_index(v * self.width + u)
            .map(|i| self.grid.coords(i))
    }

    /// `(pixel, vertex)` pairs for every mapped pixel.
    pub fn mapped(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.inverse
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != EMPTY)
            .map(|(p, &v)| (p, v as usize))
    }

    /// Mapped vertices as an occupancy grid.
    pub fn occupancy(&self) -> OccupancyGrid {
        let mut g = OccupancyGrid::empty(self.grid);
        for (_, v) in self.mapped() {
            g.set_index(v);
        }
        g
    }

    /// Inverse map as 8-bit RGB; unmapped pixels are (255, 255, 255).
    pub fn to_rgb8(&self) -> Result<RgbImage> {
        if let Some(&m) = self.grid.0.iter().max() {
            if m > 256 {
                return Err(Error::Depth {
                    value: (m - 1) as u32,
                    bits: 8,
                });
            }
        }
        Ok(RgbImage::from_fn(self.width as u32, self.height as u32, |u, v| {
            match self.inverse(u as usize, v as usize) {
                Some([x, y, z]) => Rgb([x as u8, y as u8, z as u8]),
                None => Rgb([u8::MAX; 3]),
            }
        }))
    }

    /// Inverse map as 16-bit RGB; unmapped pixels are (65535, 65535, 65535).
    pub fn to_rgb16(&self) -> Result<ImageBuffer<Rgb<u16>, Vec<u16>>> {
        if let Some(&m) = self.grid.0.iter().max() {
            if m > MAX_AXIS {
                return Err(Error::Depth {
                    value: (m - 1) as u32,
                    bits: 16,
                });
            }
        }
        Ok(ImageBuffer::from_fn(self.width as u32, self.height as u32, |u, v| {
            match self.inverse(u as usize, v as usize) {
                Some([x, y, z]) => Rgb([x as u16, y as u16, z as u16]),
                None => Rgb([u16::MAX; 3]),
            }
        }))
    }

    /// One bit per pixel in raster order, LSB first; set = mapped.
    pub fn validity_mask(&self) -> Vec<u8> {
        let mut mask = vec![0u8; (self.width * self.height).div_ceil(8)];
        for (p, _) in self.mapped() {
            mask[p / 8] |= 1 << (p % 8);
        }
        mask
    }

    /// Rebuilds a table from an inverse-map image and its validity mask.
    pub fn from_inverse<F>(
        grid: GridDims,
        width: usize,
        height: usize,
        mask: &[u8],
        mut coords_at: F,
    ) -> Result<MappingTable>
    where
        F: FnMut(usize, usize) -> [u32; 3],
    {
        let pixels = width * height;
        if mask.len() != pixels.div_ceil(8) {
            return Err(Error::Shape(format!(
                "validity mask has {} bytes, expected {}",
                mask.len(),
                pixels.div_ceil(8)
            )));
        }
        checked_volume(&grid.0, crate::io::MAX_ELEMENTS)?;
        if let Some(&m) = grid.0.iter().find(|&&d| d > MAX_AXIS) {
            return Err(Error::Depth {
                value: (m - 1) as u32,
                bits: 16,
            });
        }
        let mut forward = vec![EMPTY; grid.count()];
        let mut inverse = vec![EMPTY; pixels];
        let mut occupied = 0;
        for p in 0..pixels {
            if mask[p / 8] >> (p % 8) & 1 == 0 {
                continue;
            }
            let [x, y, z] = coords_at(p % width, p / width).map(|c| c as usize);
            if !grid.contains([x, y, z]) {
                return Err(Error::Format(format!(
                    "pixel {p} maps to ({x}, {y}, {z}) outside grid {:?}",
                    grid.0
                )));
            }
            let v = grid.index(x, y, z);
            if forward[v] != EMPTY {
                return Err(Error::Format(format!(
                    "vertex ({x}, {y}, {z}) mapped by two pixels"
                )));
            }
            forward[v] = p as u32;
            inverse[p] = v as u32;
            occupied += 1;
        }
        Ok(MappingTable {
            grid,
            width,
            height,
            forward,
            inverse,
            occupied,
        })
    }

    pub fn from_rgb8(grid: GridDims, img: &RgbImage, mask: &[u8]) -> Result<MappingTable> {
        let (w, h) = img.dimensions();
        Self::from_inverse(grid, w as usize, h as usize, mask, |u, v| {
            img.get_pixel(u as u32, v as u32).0.map(u32::from)
        })
    }

    pub fn from_rgb16(
        grid: GridDims,
        img: &ImageBuffer<Rgb<u16>, Vec<u16>>,
        mask: &[u8],
    ) -> Result<MappingTable> {
        let (w, h) = img.dimensions();
        Self::from_inverse(grid, w as usize, h as usize, mask, |u, v| {
            img.get_pixel(u as u32, v as u32).0.map(u32::from)
        })
    }

    /// PNG of the inverse map, 8-bit when every coordinate fits, else 16-bit.
    /// Returns the bit depth used.
    pub fn to_png(&self) -> Result<(Vec<u8>, u8)> {
        let mut buf = Cursor::new(Vec::new());
        let depth = match self.to_rgb8() {
            Ok(img) => {
                img.write_to(&mut buf, image::ImageFormat::Png)?;
                8
            }
            Err(Error::Depth { .. }) => {
                self.to_rgb16()?.write_to(&mut buf, image::ImageFormat::Png)?;
                16
            }
            Err(e) => return Err(e),
        };
        Ok((buf.into_inner(), depth))
    }

    /// Parses an inverse-map PNG of either depth.
    pub fn from_png(grid: GridDims, png: &[u8], mask: &[u8]) -> Result<MappingTable> {
        let mut reader = image::ImageReader::with_format(Cursor::new(png), image::ImageFormat::Png);
        let mut limits = image::Limits::default();
        limits.max_image_width = Some(4096);
        limits.max_image_height = Some(4096);
        limits.max_alloc = Some(256 << 20);
        reader.limits(limits);
        match reader.decode()? {
            image::DynamicImage::ImageRgb8(img) => Self::from_rgb8(grid, &img, mask),
            image::DynamicImage::ImageRgb16(img) => Self::from_rgb16(grid, &img, mask),
            other => Err(Error::Format(format!(
                "mapping image has unsupported color type {:?}",
                other.color()
            ))),
        }
    }

    /// Binary `.vrfm` container: header, inverse-map PNG, validity mask.
    pub fn to_vrfm(&self) -> Result<Vec<u8>> {
        let (png, depth) = self.to_png()?;
        let mut out = Vec::with_capacity(36 + png.len());
        out.extend_from_slice(MAPPING_MAGIC);
        put_u16(&mut out, MAPPING_VERSION);
        put_u16(&mut out, depth as u16);
        put_u32(&mut out, self.width as u32);
        put_u32(&mut out, self.height as u32);
        for d in self.grid.0 {
            put_u32(&mut out, d as u32);
        }
        put_u32(&mut out, png.len() as u32);
        out.extend_from_slice(&png);
        out.extend_from_slice(&self.validity_mask());
        Ok(out)
    }

    pub fn from_vrfm(bytes: &[u8]) -> Result<MappingTable> {
        let mut r = Reader::new(bytes);
        r.magic(MAPPING_MAGIC)?;
        let version = r.u16()?;
        if version != MAPPING_VERSION {
            return Err(Error::Format(format!("unsupported mapping version {version}")));
        }
        let depth = r.u16()?;
        if depth != 8 && depth != 16 {
            return Err(Error::Format(format!("bad mapping depth {depth}")));
        }
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        checked_volume(&[width, height], MAX_IMAGE_PIXELS)?;
        let grid = GridDims([r.u32()? as usize, r.u32()? as usize, r.u32()? as usize]);
        checked_volume(&grid.0, crate::io::MAX_ELEMENTS)?;
        let png_len = r.u32()? as usize;
        let png = r.take(png_len)?;
        let mask = r.take((width * height).div_ceil(8))?;
        r.expect_end()?;
        let table = MappingTable::from_png(grid, png, mask)?;
        if table.width != width || table.height != height {
            return Err(Error::Shape(format!(
                "mapping PNG is {}x{}, header says {width}x{height}",
                table.width, table.height
            )));
        }
        Ok(table)
    }
}

/// Mean image-plane distance between the pixels of 6-adjacent mapped
/// vertices. Lower means 3D neighbours stay closer together in 2D.
pub fn adjacency_distance(map: &MappingTable) -> f64 {
    let grid = map.grid();
    let (mut total, mut pairs) = (0.0, 0usize);
    for (p, v) in map.mapped() {
        let c = grid.coords(v);
        for axis in 0..3 {
            let mut n = c;
            n[axis] += 1;
            if let Some((nu, nv)) = map.forward(n) {
                let (u, w) = ((p % map.width()) as f64, (p / map.width()) as f64);
                total += ((u - nu as f64).powi(2) + (w - nv as f64).powi(2)).sqrt();
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morton::{morton2_encode, morton3_encode};

    #[test]
    fn decoded_tables_stay_encodable() {
        // A grid axis longer than 16 bits cannot be written back as a PNG.
        let mut bytes = MAPPING_MAGIC.to_vec();
        put_u16(&mut bytes, MAPPING_VERSION);
        put_u16(&mut bytes, 16);
        put_u32(&mut bytes, 1);
        put_u32(&mut bytes, 1);
        for d in [MAX_AXIS as u32 + 1, 1, 1] {
            put_u32(&mut bytes, d);
        }
        let png = {
            let img: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::from_pixel(1, 1, Rgb([0; 3]));
            let mut out = Vec::new();
            img.write_to(&mut std::io::Cursor::new(&mut out), image::ImageFormat::Png)
                .unwrap();
            out
        };
        put_u32(&mut bytes, png.len() as u32);
        bytes.extend_from_slice(&png);
        bytes.push(1);
        assert!(matches!(
            MappingTable::from_vrfm(&bytes),
            Err(Error::Depth { bits: 16, .. })
        ));
    }

    #[test]
    fn single_vertex_lands_on_origin_pixel() {
        let dims = GridDims::cube(8);
        let mut occ = OccupancyGrid::empty(dims);
        occ.set(0, 0, 0);
        let map = build_mapping(&occ, 16, 16).unwrap();
        assert_eq!(map.forward([0, 0, 0]), Some((0, 0)));
        assert_eq!(map.occupied_pixels(), 1);
        assert_eq!(map.mapped().count(), 1);
    }

    #[test]
    fn sixty_four_vertices_fill_block_zero_in_z_order() {
        let dims = GridDims::cube(16);
        // Scattered vertices so the Morton sort actually reorders.
        let occ = OccupancyGrid::from_fn(dims, |[x, y, z]| (x * 7 + y * 3 + z * 5) % 31 == 0);
        let n = occ.count();
        let take: Vec<usize> = occ.occupied().take(64).collect();
        let mut occ64 = OccupancyGrid::empty(dims);
        for &i in &take {
            occ64.set_index(i);
        }
        assert!(n >= 64);
        let map = build_mapping(&occ64, 32, 32).unwrap();

        // Oracle: sort by Morton code, rank within block by 2D Morton code.
        let mut sorted: Vec<(u64, [usize; 3])> = take
            .iter()
            .map(|&i| {
                let c = dims.coords(i);
                (morton3_encode(c[0] as u32, c[1] as u32, c[2] as u32).unwrap().0, c)
            })
            .collect();
        sorted.sort();
        let mut block_pixels: Vec<(u64, (usize, usize))> = (0..8)
            .flat_map(|v| (0..8).map(move |u| (morton2_encode(u as u32, v as u32).0, (u, v))))
            .collect();
        block_pixels.sort();
        for (k, (_, c)) in sorted.iter().enumerate() {
            assert_eq!(map.forward(*c), Some(block_pixels[k].1));
        }
        for v in 0..32 {
            for u in 0..32 {
                assert_eq!(map.inverse(u, v).is_some(), u < 8 && v < 8);
            }
        }
    }

    #[test]
    fn capacity_and_shape_errors() {
        let occ = OccupancyGrid::from_fn(GridDims::cube(5), |_| true);
        assert!(matches!(
            build_mapping(&occ, 8, 8),
            Err(Error::Capacity { needed: 125, available: 64 })
        ));
        assert!(matches!(build_mapping(&occ, 12, 16), Err(Error::Shape(_))));
    }

    #[test]
    fn full_budget_is_a_bijection() {
        let dims = GridDims::cube(64);
        let occ = OccupancyGrid::from_fn(dims, |_| true);
        assert_eq!(occ.count(), 262_144);
        let map = build_mapping(&occ, 512, 512).unwrap();
        assert_eq!(map.occupied_pixels(), 512 * 512);
        for p in 0..512 * 512 {
            let v = map.inverse_index(p).expect("every pixel mapped");
            assert_eq!(map.forward_index(v), Some(p));
        }
    }

    #[test]
    fn empty_table_serializes_to_sentinels() {
        let map = build_mapping(&OccupancyGrid::empty(GridDims::cube(4)), 8, 8).unwrap();
        let img = map.to_rgb8().unwrap();
        assert!(img.pixels().all(|p| p.0 == [255, 255, 255]));
        assert!(map.validity_mask().iter().all(|&b| b == 0));
        let back = MappingTable::from_rgb8(map.grid(), &img, &map.validity_mask()).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn legal_sentinel_coordinate_survives() {
        let dims = GridDims::cube(256);
        let mut occ = OccupancyGrid::empty(dims);
        occ.set(255, 255, 255);
        occ.set(1, 2, 3);
        let map = build_mapping(&occ, 8, 8).unwrap();
        let bytes = map.to_vrfm().unwrap();
        assert_eq!(MappingTable::from_vrfm(&bytes).unwrap(), map);
    }

    #[test]
    fn deep_grids_fall_back_to_sixteen_bits() {
        let dims = GridDims([300, 2, 2]);
        let mut occ = OccupancyGrid::empty(dims);
        occ.set(299, 1, 0);
        let map = build_mapping(&occ, 8, 8).unwrap();
        assert!(matches!(map.to_rgb8(), Err(Error::Depth { value: 299, bits: 8 })));
        let (png, depth) = map.to_png().unwrap();
        assert_eq!(depth, 16);
        let back = MappingTable::from_png(dims, &png, &map.validity_mask()).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn duplicate_vertices_are_rejected() {
        let img = RgbImage::from_pixel(8, 8, Rgb([1, 1, 1]));
        let mask = vec![0xff; 8];
        assert!(MappingTable::from_rgb8(GridDims::cube(4), &img, &mask).is_err());
    }

    #[test]
    fn row_major_layout_is_raster_order() {
        let dims = GridDims::cube(4);
        let occ = OccupancyGrid::from_fn(dims, |_| true);
        let map = build_mapping_with(&occ, 16, 8, Layout::ROW_MAJOR).unwrap();
        for (rank, v) in occ.occupied().enumerate() {
            assert_eq!(map.forward_index(v), Some(rank));
        }
    }
}
