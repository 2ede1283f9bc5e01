//! Bit-interleaved Z-order codes. x (or u) occupies the least significant
//! bit of every group.

use crate::error::{Error, Result};

/// Largest coordinate accepted by the 3D codes.
pub const MORTON3_MAX: u32 = (1 << 21) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MortonCode(pub u64);

fn spread3(v: u32) -> u64 {
    let mut x = v as u64 & 0x1f_ffff;
    x = (x | (x << 32)) & 0x1f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x1f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

fn compact3(code: u64) -> u32 {
    let mut x = code & 0x1249_2492_4924_9249;
    x = (x | (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x >> 8)) & 0x1f_0000_ff00_00ff;
    x = (x | (x >> 16)) & 0x1f_0000_0000_ffff;
    x = (x | (x >> 32)) & 0x1f_ffff;
    x as u32
}

fn spread2(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

fn compact2(code: u64) -> u32 {
    let mut x = code & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x >> 4)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x >> 8)) & 0x0000_ffff_0000_ffff;
    x = (x | (x >> 16)) & 0x0000_0000_ffff_ffff;
    x as u32
}

pub fn morton3_encode(x: u32, y: u32, z: u32) -> Result<MortonCode> {
    if x > MORTON3_MAX || y > MORTON3_MAX || z > MORTON3_MAX {
        return Err(Error::Range(format!(
            "3D Morton coordinates ({x}, {y}, {z}) exceed {MORTON3_MAX}"
        )));
    }
    Ok(MortonCode(spread3(x) | spread3(y) << 1 | spread3(z) << 2))
}

pub fn morton3_decode(code: MortonCode) -> (u32, u32, u32) {
    (compact3(code.0), compact3(code.0 >> 1), compact3(code.0 >> 2))
}

pub fn morton2_encode(u: u32, v: u32) -> MortonCode {
    MortonCode(spread2(u) | spread2(v) << 1)
}

pub fn morton2_decode(code: MortonCode) -> (u32, u32) {
    (compact2(code.0), compact2(code.0 >> 1))
}
