//! Fixed-step ray marching with hierarchical empty-space skipping, and
//! front-to-back feature accumulation.

use crate::feature::{ExpandedVolume, Feature};
use crate::occupancy::OccupancyPyramid;
use crate::render::camera::Ray;
use crate::volume::{GridDims, FEATURE_CHANNELS};

#[derive(Debug, Clone, PartialEq)]
pub struct RaySample {
    pub t: f64,
    pub delta: f64,
    pub density: f64,
    pub feature: Feature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accumulation {
    pub feature: Feature,
    pub opacity: f64,
}

/// Per-sample compositing weights `T_k (1 - exp(-sigma_k delta_k))`, with the
/// transmittance carried as a running optical depth.
pub fn compositing_weights(samples: impl IntoIterator<Item = (f64, f64)>) -> Vec<f64> {
    let mut depth: f64 = 0.0;
    samples
        .into_iter()
        .map(|(sigma, delta)| {
            let s = sigma * delta;
            let w = (-depth).exp() * -(-s).exp_m1();
            depth += s;
            w
        })
        .collect()
}

pub fn accumulate(samples: &[RaySample]) -> Accumulation {
    let weights = compositing_weights(samples.iter().map(|s| (s.density, s.delta)));
    let mut feature = [0.0; FEATURE_CHANNELS];
    let mut opacity = 0.0;
    for (s, w) in samples.iter().zip(&weights) {
        opacity += w;
        for (acc, f) in feature.iter_mut().zip(&s.feature) {
            *acc += w * f;
        }
    }
    Accumulation { feature, opacity }
}

enum Skip {
    /// Everything up to this ray parameter is provably empty.
    To(f64),
    /// This sample has no occupied corner.
    Empty,
    Occupied,
}

/// Visits every sample position `(t, delta, point)` the renderer evaluates.
///
/// Samples sit at `t0 + k * step` on the ray's span inside the unit cube,
/// with `delta = step` truncated at the exit. With a pyramid, samples whose
/// trilinear support is empty are never visited; skipping keeps samples on
/// the same lattice, so the visited set is exactly the unskipped set minus
/// provably empty points.
pub fn march_points(
    dims: GridDims,
    pyramid: Option<&OccupancyPyramid>,
    ray: &Ray,
    step: f64,
    mut visit: impl FnMut(f64, f64, [f64; 3]),
) {
    assert!(step > 0.0, "march step must be positive");
    let Some((t0, t1)) = ray.unit_cube_span() else {
        return;
    };
    let mut k: u64 = 0;
    loop {
        let t = t0 + k as f64 * step;
        if t >= t1 {
            break;
        }
        let p = ray.at(t).to_array().map(|c| c.clamp(0.0, 1.0));
        if let Some(pyr) = pyramid {
            match skip_query(pyr, dims, p, ray) {
                Skip::To(exit) => {
                    let resume = ((exit - t0) / step).floor().max(0.0) as u64;
                    k = resume.max(k + 1);
                    continue;
                }
                Skip::Empty => {
                    k += 1;
                    continue;
                }
                Skip::Occupied => {}
            }
        }
        visit(t, step.min(t1 - t), p);
        k += 1;
    }
}

fn skip_query(pyr: &OccupancyPyramid, dims: GridDims, p: [f64; 3], ray: &Ray) -> Skip {
    let mut g = [0.0; 3];
    let mut fl = [0usize; 3];
    for a in 0..3 {
        let n = dims.0[a];
        g[a] = p[a] * (n.max(2) - 1) as f64;
        fl[a] = (g[a].floor() as usize).min(n - 1);
    }
    for level in (1..pyr.len()).rev() {
        let grid = pyr.level(level);
        let cell = fl.map(|f| f >> level);
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut inside = true;
        for a in 0..3 {
            lo[a] = cell[a] << level;
            hi[a] = (((cell[a] + 1) << level).min(dims.0[a])) - 1;
            inside &= g[a] <= hi[a] as f64;
        }
        if inside && !grid.get(cell[0], cell[1], cell[2]) {
            return Skip::To(box_exit(dims, lo, hi, ray));
        }
    }
    let base = pyr.base();
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let c = [fl[0] + dx, fl[1] + dy, fl[2] + dz];
                let c = [0, 1, 2].map(|a| c[a].min(dims.0[a] - 1));
                if base.get(c[0], c[1], c[2]) {
                    return Skip::Occupied;
                }
            }
        }
    }
    Skip::Empty
}

/// Ray parameter where the ray leaves the vertex box `[lo, hi]`.
fn box_exit(dims: GridDims, lo: [usize; 3], hi: [usize; 3], ray: &Ray) -> f64 {
    let mut exit = f64::INFINITY;
    for a in 0..3 {
        let scale = (dims.0[a].max(2) - 1) as f64;
        let d = ray.dir.axis(a);
        let o = ray.origin.axis(a);
        if d > 0.0 {
            exit = exit.min((hi[a] as f64 / scale - o) / d);
        } else if d < 0.0 {
            exit = exit.min((lo[a] as f64 / scale - o) / d);
        }
    }
    exit
}

/// Samples along a ray, skipping empty space when a pyramid is given.
pub fn march_ray(
    vol: &ExpandedVolume,
    pyramid: Option<&OccupancyPyramid>,
    ray: &Ray,
    step: f64,
) -> Vec<RaySample> {
    let mut out = Vec::new();
    march_points(vol.dims, pyramid, ray, step, |t, delta, p| {
        let (density, feature) = vol.sample(p);
        out.push(RaySample {
            t,
            delta,
            density,
            feature,
        });
    });
    out
}
