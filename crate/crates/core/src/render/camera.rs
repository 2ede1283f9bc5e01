use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Pinhole camera looking down its local +z axis (x right, y down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// 4x4 rigid transform, row-major.
    pub world_from_camera: [f64; 16],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub dir: Vec3,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }

    /// Parameter interval inside [0,1]^3, clipped to t >= 0.
    pub fn unit_cube_span(&self) -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let o = self.origin.axis(a);
            let d = self.dir.axis(a);
            if d.abs() < 1e-300 {
                if !(0.0..=1.0).contains(&o) {
                    return None;
                }
                continue;
            }
            let (mut near, mut far) = ((0.0 - o) / d, (1.0 - o) / d);
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
        }
        (t0 < t1).then_some((t0, t1))
    }
}

impl Camera {
    /// Camera at `eye` aimed at `target`, vertical field of view in degrees.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        fov_y_deg: f64,
        width: usize,
        height: usize,
    ) -> Camera {
        let forward = (target - eye).normalized();
        let mut right = forward.cross(up);
        if right.length() < 1e-9 {
            right = forward.cross(Vec3::new(1.0, 0.0, 0.0));
        }
        let right = right.normalized();
        let down = forward.cross(right);
        let f = 0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan();
        #[rustfmt::skip]
        let m = [
            right.x, down.x, forward.x, eye.x,
            right.y, down.y, forward.y, eye.y,
            right.z, down.z, forward.z, eye.z,
            0.0, 0.0, 0.0, 1.0,
        ];
        Camera {
            fx: f,
            fy: f,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            world_from_camera: m,
        }
    }

    /// Camera on a sphere around `target`; azimuth about +z, elevation from
    /// the xy plane, both in degrees.
    pub fn orbit(
        target: Vec3,
        azimuth_deg: f64,
        elevation_deg: f64,
        distance: f64,
        fov_y_deg: f64,
        width: usize,
        height: usize,
    ) -> Camera {
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        let offset = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * distance;
        Camera::look_at(target + offset, target, Vec3::new(0.0, 0.0, 1.0), fov_y_deg, width, height)
    }

    fn column(&self, c: usize) -> Vec3 {
        let m = &self.world_from_camera;
        Vec3::new(m[c], m[4 + c], m[8 + c])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config(format!(
                "focal lengths must be positive, got ({}, {})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera image size must be nonzero".into()));
        }
        if self.world_from_camera.iter().any(|v| !v.is_finite()) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::Config("camera parameters must be finite".into()));
        }
        let cols = [self.column(0), self.column(1), self.column(2)];
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (cols[i].dot(cols[j]) - expect).abs() > 1e-6 {
                    return Err(Error::Config("camera rotation is not orthonormal".into()));
                }
            }
        }
        let m = &self.world_from_camera;
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::Config("camera transform bottom row must be 0 0 0 1".into()));
        }
        Ok(())
    }

    pub fn origin(&self) -> Vec3 {
        self.column(3)
    }

    /// Ray through the centre of pixel `(u, v)`.
    pub fn ray(&self, u: usize, v: usize) -> Ray {
        let x = (u as f64 + 0.5 - self.cx) / self.fx;
        let y = (v as f64 + 0.5 - self.cy) / self.fy;
        let dir = self.column(0) * x + self.column(1) * y + self.column(2);
        Ray {
            origin: self.origin(),
            dir: dir.normalized(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_centre_ray_hits_target() {
        let cam = Camera::look_at(
            Vec3::new(0.5, -1.5, 0.5),
            Vec3::splat(0.5),
            Vec3::new(0.0, 0.0, 1.0),
            40.0,
            32,
            32,
        );
        cam.validate().unwrap();
        let r = cam.ray(16, 16);
        let t = (0.5 - r.origin.y) / r.dir.y;
        let hit = r.at(t);
        assert!((hit.x - 0.5).abs() < 0.05 && (hit.z - 0.5).abs() < 0.05);
    }

    #[test]
    fn invalid_cameras_are_rejected() {
        let mut cam = Camera::orbit(Vec3::splat(0.5), 30.0, 20.0, 2.0, 45.0, 8, 8);
        cam.validate().unwrap();
        cam.world_from_camera[0] *= 2.0;
        assert!(cam.validate().is_err());
        let mut cam = Camera::orbit(Vec3::splat(0.5), 30.0, 20.0, 2.0, 45.0, 8, 8);
        cam.fx = 0.0;
        assert!(cam.validate().is_err());
    }

    #[test]
    fn cube_span() {
        let r = Ray {
            origin: Vec3::new(-1.0, 0.5, 0.5),
            dir: Vec3::new(1.0, 0.0, 0.0),
        };
        let (t0, t1) = r.unit_cube_span().unwrap();
        assert!((t0 - 1.0).abs() < 1e-12 && (t1 - 2.0).abs() < 1e-12);
        let miss = Ray {
            origin: Vec3::new(-1.0, 2.0, 0.5),
            dir: Vec3::new(1.0, 0.0, 0.0),
        };
        assert!(miss.unit_cube_span().is_none());
    }

    #[test]
    fn json_shape() {
        let cam = Camera::orbit(Vec3::splat(0.5), 0.0, 0.0, 2.0, 45.0, 4, 4);
        let v: serde_json::Value = serde_json::to_value(&cam).unwrap();
        assert_eq!(v["world_from_camera"].as_array().unwrap().len(), 16);
        assert_eq!(v["width"], 4);
    }
}
