//! Pelvis-relative depth classes and joint annotations.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::Camera;
use crate::raster::Raster;

/// Depth value stored for background pixels.
pub const DEPTH_BACKGROUND: f32 = 1e10;

#[derive(Debug, Error, PartialEq)]
pub enum DepthLabelError {
    #[error("background has no depth")]
    Background,
    #[error("depth label {0} out of range")]
    OutOfRange(u8),
}

/// Uniform depth bins centered on the pelvis. Labels run `1..=n_bins`, the
/// middle label holding the pelvis; 0 is background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthQuantization {
    /// Bin width in meters.
    pub bin_width: f64,
    pub n_bins: u8,
}

impl Default for DepthQuantization {
    fn default() -> Self {
        Self {
            bin_width: 0.045,
            n_bins: 19,
        }
    }
}

impl DepthQuantization {
    /// Bins on either side of the pelvis bin.
    pub fn half_span(&self) -> i64 {
        debug_assert!(self.n_bins % 2 == 1, "bin count must be odd");
        (self.n_bins as i64 - 1) / 2
    }

    pub fn center_label(&self) -> u8 {
        self.half_span() as u8 + 1
    }

    /// Label of a single foreground depth.
    pub fn label(&self, z: f64, pelvis_z: f64) -> u8 {
        let h = self.half_span();
        let k = ((z - pelvis_z) / self.bin_width).round() as i64;
        (k.clamp(-h, h) + h + 1) as u8
    }

    /// Bin-center offset from the pelvis, meters.
    pub fn dequantize(&self, label: u8) -> Result<f64, DepthLabelError> {
        match label {
            0 => Err(DepthLabelError::Background),
            l if l > self.n_bins => Err(DepthLabelError::OutOfRange(l)),
            l => Ok((l as i64 - self.center_label() as i64) as f64 * self.bin_width),
        }
    }
}

/// Depth classes for a depth raster; background pixels (at the sentinel)
/// get label 0.
pub fn quantize_depth(depth_m: &Raster<f32>, pelvis_z: f64, q: &DepthQuantization) -> Raster<u8> {
    let data = depth_m
        .data()
        .iter()
        .map(|&z| {
            if z >= DEPTH_BACKGROUND || !z.is_finite() {
                0
            } else {
                q.label(z as f64, pelvis_z)
            }
        })
        .collect();
    Raster::from_vec(depth_m.width(), depth_m.height(), 1, data).expect("same shape")
}

pub fn dequantize(label: u8, q: &DepthQuantization) -> Result<f64, DepthLabelError> {
    q.dequantize(label)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointAnnotation {
    /// Pixel coordinates; recorded even when outside the image.
    pub joints2d: Vec<[f64; 2]>,
    /// Camera-space positions, meters.
    pub joints3d: Vec<[f64; 3]>,
    /// Joints at or behind the camera plane; their 2D entries are not
    /// meaningful.
    pub behind_camera: Vec<bool>,
}

pub fn joints_annotation(posed_joints_world: &[Vector3<f64>], camera: &Camera) -> JointAnnotation {
    let mut out = JointAnnotation {
        joints2d: Vec::with_capacity(posed_joints_world.len()),
        joints3d: Vec::with_capacity(posed_joints_world.len()),
        behind_camera: Vec::with_capacity(posed_joints_world.len()),
    };
    for p in posed_joints_world {
        let cam = camera.pose.to_camera(p);
        let proj = camera.project_camera_space(&cam);
        out.joints2d.push([proj.u, proj.v]);
        out.joints3d.push(cam.into());
        out.behind_camera.push(proj.behind_camera);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{place_camera, CameraIntrinsics};

    #[test]
    fn label_examples() {
        let q = DepthQuantization::default();
        assert_eq!(q.center_label(), 10);
        assert_eq!(q.label(4.0, 4.0), 10);
        assert_eq!(q.label(4.045, 4.0), 11);
        assert_eq!(q.label(3.5, 4.0), 1);
        assert_eq!(q.label(40.0, 4.0), 19);
    }

    #[test]
    fn dequantize_examples() {
        let q = DepthQuantization::default();
        assert_eq!(q.dequantize(10), Ok(0.0));
        assert!((q.dequantize(11).unwrap() - 0.045).abs() < 1e-15);
        assert_eq!(q.dequantize(0), Err(DepthLabelError::Background));
        assert_eq!(
            q.dequantize(0).unwrap_err().to_string(),
            "background has no depth"
        );
        assert_eq!(q.dequantize(20), Err(DepthLabelError::OutOfRange(20)));
    }

    #[test]
    fn raster_background_is_zero() {
        let depth = Raster::from_vec(3, 1, 1, vec![DEPTH_BACKGROUND, 2.0, 2.2]).unwrap();
        let labels = quantize_depth(&depth, 2.0, &DepthQuantization::default());
        assert_eq!(labels.data(), &[0, 10, 14]);
    }

    #[test]
    fn monotone_in_depth() {
        let q = DepthQuantization::default();
        let mut last = 0;
        for i in 0..4000 {
            let z = 1.0 + i as f64 * 0.001;
            let l = q.label(z, 3.0);
            assert!(l >= last);
            last = l;
        }
    }

    #[test]
    fn joints_follow_camera_projection() {
        let intr = CameraIntrinsics::default_for(320, 240).unwrap();
        let pose = place_camera(&Vector3::zeros(), 8.0, 0.0);
        let camera = Camera {
            intrinsics: intr,
            pose,
        };
        // Pelvis at the target, one joint on the axis 4 m away, one
        // 0.32 m to the right at 8 m.
        let joints = vec![
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, 4.0),
            Vector3::new(0.32, 0.0, 0.0),
            Vector3::new(0.0, 0.0, 9.0),
        ];
        let ann = joints_annotation(&joints, &camera);
        assert!((ann.joints2d[0][0] - 160.0).abs() < 1e-9);
        assert!((ann.joints2d[0][1] - 120.0).abs() < 1e-9);
        assert!((ann.joints3d[1][2] - 4.0).abs() < 1e-12);
        assert!((ann.joints2d[2][0] - 184.0).abs() < 1e-9);
        assert!(ann.behind_camera[3]);
        for (p, a) in joints.iter().zip(&ann.joints2d) {
            let proj = camera.project(p);
            if !proj.behind_camera {
                assert!((proj.u - a[0]).abs() <= 1e-9 && (proj.v - a[1]).abs() <= 1e-9);
            }
        }
    }
}
