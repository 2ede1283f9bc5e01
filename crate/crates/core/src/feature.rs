//! Feature images (one density channel plus appearance features per pixel),
//! vertex fetch through a mapping table and expansion back to a 3D volume.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{checked_volume, put_f32, put_u32, Reader};
use crate::mapping::MappingTable;
use crate::math::{softplus, softplus_inv};
use crate::volume::{DensityVolume, FeatureVolume, GridDims, FEATURE_CHANNELS};

/// Density plus appearance channels.
pub const IMAGE_CHANNELS: usize = 1 + FEATURE_CHANNELS;
pub type Feature = [f64; FEATURE_CHANNELS];

const IMAGE_MAGIC: &[u8; 4] = b"VRFI";
/// Raw density value written for mapped vertices that are empty in a frame.
pub const EMPTY_DENSITY_RAW: f64 = -40.0;

/// `density = softplus(raw + shift)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityActivation {
    pub kind: ActivationKind,
    pub shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Softplus,
}

impl Default for DensityActivation {
    /// A raw value of zero decodes to ~0.0025, just under the occupancy
    /// threshold.
    fn default() -> Self {
        DensityActivation {
            kind: ActivationKind::Softplus,
            shift: -6.0,
        }
    }
}

impl DensityActivation {
    #[inline]
    pub fn apply(&self, raw: f64) -> f64 {
        softplus(raw + self.shift)
    }

    /// d density / d raw.
    #[inline]
    pub fn derivative(&self, raw: f64) -> f64 {
        crate::math::sigmoid(raw + self.shift)
    }

    pub fn invert(&self, density: f64) -> f64 {
        softplus_inv(density) - self.shift
    }
}

/// Planar `channels x height x width` image, channel 0 = raw density.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub frame_index: usize,
    pub group_id: usize,
    pub data: Vec<f64>,
}

impl FeatureImage {
    pub fn zeros(width: usize, height: usize, frame_index: usize, group_id: usize) -> Self {
        FeatureImage {
            width,
            height,
            channels: IMAGE_CHANNELS,
            frame_index,
            group_id,
            data: vec![0.0; width * height * IMAGE_CHANNELS],
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, channel: usize, pixel: usize) -> f64 {
        self.data[channel * self.pixels() + pixel]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, pixel: usize, v: f64) {
        let n = self.pixels();
        self.data[channel * n + pixel] = v;
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn same_shape(&self, other: &FeatureImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_map(&self, map: &MappingTable) -> Result<()> {
        if self.width != map.width() || self.height != map.height() {
            return Err(Error::Shape(format!(
                "feature image {}x{} vs mapping {}x{}",
                self.width,
                self.height,
                map.width(),
                map.height()
            )));
        }
        if self.channels != IMAGE_CHANNELS {
            return Err(Error::Shape(format!(
                "feature image has {} channels, expected {IMAGE_CHANNELS}",
                self.channels
            )));
        }
        Ok(())
    }

    /// 24-byte VRFI header then planar little-endian float32.
    pub fn to_vrfi(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 4 * self.data.len());
        out.extend_from_slice(IMAGE_MAGIC);
        for v in [self.width, self.height, self.channels, self.frame_index, self.group_id] {
            put_u32(&mut out, v as u32);
        }
        for &v in &self.data {
            put_f32(&mut out, v as f32);
        }
        out
    }

    pub fn from_vrfi(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(IMAGE_MAGIC)?;
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let channels = r.u32()? as usize;
        let frame_index = r.u32()? as usize;
        let group_id = r.u32()? as usize;
        let n = checked_volume(&[width, height, channels], crate::io::MAX_ELEMENTS)?;
        if r.remaining() != n * 4 {
            return Err(Error::Format(format!(
                "feature image body has {} bytes, expected {}",
                r.remaining(),
                n * 4
            )));
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let v = r.f32()?;
            if !v.is_finite() {
                return Err(Error::Range("non-finite feature image value".into()));
            }
            data.push(v as f64);
        }
        Ok(FeatureImage {
            width,
            height,
            channels,
            frame_index,
            group_id,
            data,
        })
    }
}

/// Counts table and image reads made by [`fetch_probed`].
#[derive(Debug, Default, Clone, Copy)]
pub struct Probe {
    pub reads: usize,
}

/// Density and feature of one vertex; unmapped vertices are exact zeros.
pub fn fetch(
    img: &FeatureImage,
    map: &MappingTable,
    act: &DensityActivation,
    x: [usize; 3],
) -> Result<(f64, Feature)> {
    fetch_probed(img, map, act, x, &mut Probe::default())
}

pub fn fetch_probed(
    img: &FeatureImage,
    map: &MappingTable,
    act: &DensityActivation,
    x: [usize; 3],
    probe: &mut Probe,
) -> Result<(f64, Feature)> {
    img.check_map(map)?;
    if !map.grid().contains(x) {
        return Err(Error::Range(format!(
            "vertex {x:?} outside grid {:?}",
            map.grid().0
        )));
    }
    probe.reads += 1;
    let Some(p) = map.forward_index(map.grid().index(x[0], x[1], x[2])) else {
        return Ok((0.0, [0.0; FEATURE_CHANNELS]));
    };
    probe.reads += IMAGE_CHANNELS;
    let mut f = [0.0; FEATURE_CHANNELS];
    for (c, slot) in f.iter_mut().enumerate() {
        *slot = img.get(c + 1, p);
    }
    Ok((act.apply(img.get(0, p)), f))
}

/// Activated density and features on the full vertex grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedVolume {
    pub dims: GridDims,
    pub density: Vec<f64>,
    /// Vertex-major, [`FEATURE_CHANNELS`] per vertex.
    pub features: Vec<f64>,
}

impl ExpandedVolume {
    pub fn zeros(dims: GridDims) -> Self {
        ExpandedVolume {
            dims,
            density: vec![0.0; dims.count()],
            features: vec![0.0; dims.count() * FEATURE_CHANNELS],
        }
    }

    /// Ground-truth volumes with every vertex at or below `gamma` zeroed, the
    /// support a baked feature image can represent.
    pub fn from_ground_truth(
        density: &DensityVolume,
        features: &FeatureVolume,
        gamma: f64,
    ) -> Result<Self> {
        if density.dims != features.dims || features.channels != FEATURE_CHANNELS {
            return Err(Error::Shape("density and feature volumes disagree".into()));
        }
        let mut vol = ExpandedVolume::zeros(density.dims);
        for (i, &s) in density.values.iter().enumerate() {
            if s > gamma {
                vol.density[i] = s;
                vol.features[i * FEATURE_CHANNELS..(i + 1) * FEATURE_CHANNELS]
                    .copy_from_slice(features.vertex(i));
            }
        }
        Ok(vol)
    }

    pub fn feature(&self, idx: usize) -> &[f64] {
        &self.features[idx * FEATURE_CHANNELS..(idx + 1) * FEATURE_CHANNELS]
    }

    /// Trilinear interpolation corners for a world point; `None` outside the
    /// unit cube.
    #[inline]
    pub fn corners(&self, p: [f64; 3]) -> Option<Corners> {
        trilinear_corners(self.dims, p)
    }

    /// Trilinear density and feature at a world point; zero outside [0,1]^3.
    pub fn sample(&self, p: [f64; 3]) -> (f64, Feature) {
        let mut f = [0.0; FEATURE_CHANNELS];
        let Some(c) = self.corners(p) else {
            return (0.0, f);
        };
        let mut sigma = 0.0;
        for k in 0..8 {
            let (i, w) = (c.index[k], c.weight[k]);
            if w == 0.0 {
                continue;
            }
            sigma += w * self.density[i];
            for (slot, v) in f.iter_mut().zip(self.feature(i)) {
                *slot += w * v;
            }
        }
        (sigma, f)
    }
}

/// The eight vertices surrounding a point and their trilinear weights.
#[derive(Debug, Clone, Copy)]
pub struct Corners {
    pub index: [usize; 8],
    pub weight: [f64; 8],
}

pub fn trilinear_corners(dims: GridDims, p: [f64; 3]) -> Option<Corners> {
    if p.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return None;
    }
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let n = dims.0[a];
        if n < 2 {
            base[a] = 0;
            frac[a] = 0.0;
            continue;
        }
        let g = p[a] * (n - 1) as f64;
        let i = (g.floor() as usize).min(n - 2);
        base[a] = i;
        frac[a] = g - i as f64;
    }
    let step = |a: usize| usize::from(dims.0[a] > 1);
    let mut index = [0usize; 8];
    let mut weight = [0.0f64; 8];
    for k in 0..8 {
        let (dx, dy, dz) = (k & 1, (k >> 1) & 1, (k >> 2) & 1);
        let wx = if dx == 1 { frac[0] } else { 1.0 - frac[0] };
        let wy = if dy == 1 { frac[1] } else { 1.0 - frac[1] };
        let wz = if dz == 1 { frac[2] } else { 1.0 - frac[2] };
        index[k] = dims.index(
            base[0] + dx * step(0),
            base[1] + dy * step(1),
            base[2] + dz * step(2),
        );
        weight[k] = wx * wy * wz;
    }
    Some(Corners { index, weight })
}

/// Expands a feature image into a dense volume using the global rayon pool.
pub fn expand(img: &FeatureImage, map: &MappingTable, act: &DensityActivation) -> Result<ExpandedVolume> {
    img.check_map(map)?;
    let dims = map.grid();
    let mut vol = ExpandedVolume::zeros(dims);
    // Every vertex has at most one source pixel, so per-vertex writes are
    // disjoint.
    vol.density
        .par_iter_mut()
        .zip(vol.features.par_chunks_mut(FEATURE_CHANNELS))
        .enumerate()
        .for_each(|(v, (d, f))| {
            if let Some(p) = map.forward_index(v) {
                *d = act.apply(img.get(0, p));
                for (c, slot) in f.iter_mut().enumerate() {
                    *slot = img.get(c + 1, p);
                }
            }
        });
    Ok(vol)
}

/// [`expand`] on a dedicated pool with exactly `workers` threads.
pub fn expand_with_workers(
    img: &FeatureImage,
    map: &MappingTable,
    act: &DensityActivation,
    workers: usize,
) -> Result<ExpandedVolume> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| expand(img, map, act))
}

/// Writes ground-truth volumes into a feature image through `map`. Vertices
/// mapped for the group but empty in this frame get a near-zero density and
/// zero features.
pub fn bake(
    density: &DensityVolume,
    features: &FeatureVolume,
    map: &MappingTable,
    act: &DensityActivation,
    gamma: f64,
    frame_index: usize,
    group_id: usize,
) -> Result<FeatureImage> {
    if density.dims != map.grid() || features.dims != map.grid() {
        return Err(Error::Shape(format!(
            "volume {:?} vs mapping grid {:?}",
            density.dims.0,
            map.grid().0
        )));
    }
    if features.channels != FEATURE_CHANNELS {
        return Err(Error::Shape(format!(
            "{} feature channels, expected {FEATURE_CHANNELS}",
            features.channels
        )));
    }
    let mut img = FeatureImage::zeros(map.width(), map.height(), frame_index, group_id);
    for (p, v) in map.mapped() {
        let sigma = density.values[v];
        if sigma > gamma {
            img.set(0, p, act.invert(sigma));
            for (c, &f) in features.vertex(v).iter().enumerate() {
                img.set(c + 1, p, f);
            }
        } else {
            img.set(0, p, EMPTY_DENSITY_RAW);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mapping::build_mapping;
    use crate::occupancy::OccupancyGrid;

    fn random_setup(seed: u64) -> (FeatureImage, MappingTable) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = GridDims([9, 7, 6]);
        let occ = OccupancyGrid::from_fn(dims, |_| rng.gen_bool(0.3));
        let map = build_mapping(&occ, 16, 16).unwrap();
        let mut img = FeatureImage::zeros(16, 16, 0, 0);
        for v in img.data.iter_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
        (img, map)
    }

    #[test]
    fn unmapped_vertex_fetches_zero() {
        let (img, map) = random_setup(1);
        let act = DensityActivation::default();
        let v = (0..map.grid().count()).find(|&v| map.forward_index(v).is_none()).unwrap();
        let (d, f) = fetch(&img, &map, &act, map.grid().coords(v)).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(f, [0.0; FEATURE_CHANNELS]);
    }

    #[test]
    fn mapped_fetch_applies_shifted_softplus() {
        let (mut img, map) = random_setup(2);
        let act = DensityActivation::default();
        let mapped: Vec<_> = map.mapped().take(3).collect();
        let raws = [0.0, 3.5, -1.25];
        for ((p, v), raw) in mapped.iter().zip(raws) {
            img.set(0, *p, raw);
            let (d, f) = fetch(&img, &map, &act, map.grid().coords(*v)).unwrap();
            let expected = (1.0 + (raw - 6.0f64).exp()).ln();
            assert!((d - expected).abs() < 1e-15, "{d} vs {expected}");
            for (c, fc) in f.iter().enumerate() {
                assert_eq!(*fc, img.get(c + 1, *p));
            }
        }
    }

    #[test]
    fn fetch_out_of_bounds_is_range_error() {
        let (img, map) = random_setup(3);
        let r = fetch(&img, &map, &DensityActivation::default(), [9, 0, 0]);
        assert!(matches!(r, Err(Error::Range(_))));
    }

    #[test]
    fn fetch_agrees_with_expansion() {
        let (img, map) = random_setup(4);
        let act = DensityActivation::default();
        let vol = expand(&img, &map, &act).unwrap();
        for v in 0..map.grid().count() {
            let (d, f) = fetch(&img, &map, &act, map.grid().coords(v)).unwrap();
            assert_eq!(d, vol.density[v]);
            assert_eq!(&f[..], vol.feature(v));
        }
    }

    #[test]
    fn fetch_cost_is_independent_of_occupancy() {
        let act = DensityActivation::default();
        let mut costs = Vec::new();
        for n in [1usize, 50, 500] {
            let dims = GridDims::cube(10);
            let occ = OccupancyGrid::from_fn(dims, |c| dims.index(c[0], c[1], c[2]) < n);
            let map = build_mapping(&occ, 32, 32).unwrap();
            let img = FeatureImage::zeros(32, 32, 0, 0);
            let mut probe = Probe::default();
            fetch_probed(&img, &map, &act, [0, 0, 0], &mut probe).unwrap();
            costs.push(probe.reads);
        }
        assert!(costs.windows(2).all(|w| w[0] == w[1]), "{costs:?}");
    }

    #[test]
    fn empty_map_expands_to_zeros() {
        let map = build_mapping(&OccupancyGrid::empty(GridDims::cube(5)), 8, 8).unwrap();
        let mut img = FeatureImage::zeros(8, 8, 0, 0);
        img.data.iter_mut().for_each(|v| *v = 1.0);
        let vol = expand(&img, &map, &DensityActivation::default()).unwrap();
        assert!(vol.density.iter().chain(&vol.features).all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_scatter() {
        let dims = GridDims::cube(5);
        let mut occ = OccupancyGrid::empty(dims);
        occ.set(2, 3, 4);
        let map = build_mapping(&occ, 8, 8).unwrap();
        let mut img = FeatureImage::zeros(8, 8, 0, 0);
        img.data.iter_mut().for_each(|v| *v = 0.5);
        let vol = expand(&img, &map, &DensityActivation::default()).unwrap();
        let nonzero: Vec<_> = (0..dims.count()).filter(|&v| vol.density[v] != 0.0).collect();
        assert_eq!(nonzero, vec![dims.index(2, 3, 4)]);
    }

    #[test]
    fn expansion_is_worker_count_invariant() {
        let (img, map) = random_setup(5);
        let act = DensityActivation::default();
        let one = expand_with_workers(&img, &map, &act, 1).unwrap();
        let many = expand_with_workers(&img, &map, &act, 7).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn expand_rejects_size_mismatch() {
        let (_, map) = random_setup(6);
        let img = FeatureImage::zeros(8, 16, 0, 0);
        assert!(matches!(expand(&img, &map, &DensityActivation::default()), Err(Error::Shape(_))));
    }

    #[test]
    fn sample_at_vertex_and_edge_midpoint() {
        let (img, map) = random_setup(7);
        let act = DensityActivation::default();
        let vol = expand(&img, &map, &act).unwrap();
        let dims = vol.dims;
        let (v, _) = (0..dims.count())
            .map(|v| (v, map.forward_index(v)))
            .find(|(v, p)| p.is_some() && dims.coords(*v)[0] + 1 < dims.0[0])
            .unwrap();
        let c = dims.coords(v);
        let pos = dims.position(c);
        let (d, f) = vol.sample(pos);
        let (fd, ff) = fetch(&img, &map, &act, c).unwrap();
        assert!((d - fd).abs() < 1e-12);
        for (a, b) in f.iter().zip(ff) {
            assert!((a - b).abs() < 1e-12);
        }
        let n = dims.index(c[0] + 1, c[1], c[2]);
        let mut mid = pos;
        mid[0] += 0.5 / (dims.0[0] - 1) as f64;
        let (dm, fm) = vol.sample(mid);
        assert!((dm - 0.5 * (vol.density[v] + vol.density[n])).abs() < 1e-12);
        for ch in 0..FEATURE_CHANNELS {
            let expect = 0.5 * (vol.feature(v)[ch] + vol.feature(n)[ch]);
            assert!((fm[ch] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_matches_eight_corner_oracle() {
        let (img, map) = random_setup(8);
        let vol = expand(&img, &map, &DensityActivation::default()).unwrap();
        let dims = vol.dims;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let value = |x: usize, y: usize, z: usize| vol.density[dims.index(x, y, z)];
        for _ in 0..500 {
            let p = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let g: Vec<f64> = (0..3).map(|a| p[a] * (dims.0[a] - 1) as f64).collect();
            let i: Vec<usize> = (0..3).map(|a| (g[a].floor() as usize).min(dims.0[a] - 2)).collect();
            let t: Vec<f64> = (0..3).map(|a| g[a] - i[a] as f64).collect();
            let mut oracle = 0.0;
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        let w = (if dx == 1 { t[0] } else { 1.0 - t[0] })
                            * (if dy == 1 { t[1] } else { 1.0 - t[1] })
                            * (if dz == 1 { t[2] } else { 1.0 - t[2] });
                        oracle += w * value(i[0] + dx, i[1] + dy, i[2] + dz);
                    }
                }
            }
            assert!((vol.sample(p).0 - oracle).abs() < 1e-6);
        }
        assert_eq!(vol.sample([1.2, 0.5, 0.5]).0, 0.0);
    }

    #[test]
    fn bake_then_expand_restores_occupied_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let dims = GridDims::cube(8);
        let values: Vec<f64> = (0..dims.count())
            .map(|_| if rng.gen_bool(0.4) { rng.gen_range(0.01..20.0) } else { 0.0 })
            .collect();
        let density = DensityVolume::from_values(dims, values).unwrap();
        let mut feats = FeatureVolume::zeros(dims, FEATURE_CHANNELS);
        feats.values.iter_mut().for_each(|v| *v = rng.gen());
        let occ = crate::occupancy::threshold_occupancy(&density, 0.003);
        let map = build_mapping(&occ, 24, 24).unwrap();
        let act = DensityActivation::default();
        let img = bake(&density, &feats, &map, &act, 0.003, 0, 0).unwrap();
        let vol = expand(&img, &map, &act).unwrap();
        for v in occ.occupied() {
            let rel = (vol.density[v] - density.values[v]).abs() / density.values[v];
            assert!(rel < 1e-12, "vertex {v}: {rel}");
            assert_eq!(vol.feature(v), feats.vertex(v));
        }
    }

    #[test]
    fn vrfi_round_trip_through_f32() {
        let (img, _) = random_setup(11);
        let back = FeatureImage::from_vrfi(&img.to_vrfi()).unwrap();
        assert_eq!(back.width, 16);
        for (a, b) in img.data.iter().zip(&back.data) {
            assert_eq!(*a as f32, *b as f32);
        }
        assert!(FeatureImage::from_vrfi(&img.to_vrfi()[..30]).is_err());
    }
}
