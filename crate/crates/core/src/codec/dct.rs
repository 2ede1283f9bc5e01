//! Orthonormal 8x8 DCT-II, the JPEG luminance table and zigzag scan.

use std::sync::OnceLock;

pub const N: usize = 8;

/// JPEG Annex K luminance quantization table, row-major.
pub const LUMA: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Zigzag scan: `ZIGZAG[k]` is the row-major index of the k-th coefficient.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27,
    20, 13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58,
    59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

/// `basis()[u][x] = a(u) cos((2x + 1) u pi / 16)`.
fn basis() -> &'static [[f64; N]; N] {
    static TABLE: OnceLock<[[f64; N]; N]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; N]; N];
        for (u, row) in t.iter_mut().enumerate() {
            let a = if u == 0 { (1.0 / N as f64).sqrt() } else { (2.0 / N as f64).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = a * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        t
    })
}

/// Forward transform of a row-major block.
pub fn forward(block: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    // Rows: tmp[y][u] = sum_x c[u][x] b[y][x]
    for y in 0..N {
        for u in 0..N {
            tmp[y * N + u] = (0..N).map(|x| c[u][x] * block[y * N + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..N {
        for u in 0..N {
            out[v * N + u] = (0..N).map(|y| c[v][y] * tmp[y * N + u]).sum();
        }
    }
    out
}

pub fn inverse(coef: &[f64; 64]) -> [f64; 64] {
    let c = basis();
    let mut tmp = [0.0; 64];
    for y in 0..N {
        for u in 0..N {
            tmp[y * N + u] = (0..N).map(|v| c[v][y] * coef[v * N + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..N {
        for x in 0..N {
            out[y * N + x] = (0..N).map(|u| c[u][x] * tmp[y * N + u]).sum();
        }
    }
    out
}

/// Worst-case reconstruction error, in 8-bit levels, of a block quantized
/// with step `q * LUMA[k]`: half a step per coefficient spread through the
/// basis, plus half a level of output rounding.
pub fn max_error_bound(q: u16) -> f64 {
    let c = basis();
    let mut worst: f64 = 0.0;
    for y in 0..N {
        for x in 0..N {
            let mut e = 0.0;
            for v in 0..N {
                for u in 0..N {
                    e += (c[v][y] * c[u][x]).abs() * q as f64 * LUMA[v * N + u] as f64 / 2.0;
                }
            }
            worst = worst.max(e);
        }
    }
    worst + 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zigzag_is_a_permutation() {
        let mut seen = [false; 64];
        for &i in &ZIGZAG {
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert_eq!(&ZIGZAG[..6], &[0, 1, 8, 16, 9, 2]);
    }

    #[test]
    fn transform_is_orthonormal() {
        let mut b = [0.0; 64];
        for (i, v) in b.iter_mut().enumerate() {
            *v = ((i * 37) % 23) as f64 - 11.0;
        }
        let f = forward(&b);
        let energy_b: f64 = b.iter().map(|v| v * v).sum();
        let energy_f: f64 = f.iter().map(|v| v * v).sum();
        assert!((energy_b - energy_f).abs() < 1e-9);
        let back = inverse(&f);
        for (a, c) in b.iter().zip(&back) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_block_has_only_dc() {
        let f = forward(&[3.0; 64]);
        assert!((f[0] - 24.0).abs() < 1e-12);
        assert!(f[1..].iter().all(|v| v.abs() < 1e-12));
    }
}
