//! Pinhole camera with physical intrinsics and pelvis-targeted placement.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_FOCAL_MM: f64 = 60.0;
pub const DEFAULT_SENSOR_WIDTH_MM: f64 = 32.0;
pub const DEFAULT_WIDTH: u32 = 320;
pub const DEFAULT_HEIGHT: u32 = 240;

/// Points at or closer than this depth are behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    /// Square-pixel intrinsics from focal length and sensor width. The
    /// sensor height follows from the image aspect ratio.
    pub fn from_physical(
        focal_mm: f64,
        sensor_width_mm: f64,
        width_px: u32,
        height_px: u32,
    ) -> Result<Self, CameraError> {
        for (name, value) in [
            ("focal length", focal_mm),
            ("sensor width", sensor_width_mm),
            ("image width", width_px as f64),
            ("image height", height_px as f64),
        ] {
            if !(value > 0.0) {
                return Err(CameraError::NonPositive { name, value });
            }
        }
        let f = focal_mm / sensor_width_mm * width_px as f64;
        Ok(Self {
            fx: f,
            fy: f,
            cx: width_px as f64 / 2.0,
            cy: height_px as f64 / 2.0,
            width: width_px,
            height: height_px,
        })
    }

    pub fn default_for(width_px: u32, height_px: u32) -> Result<Self, CameraError> {
        Self::from_physical(
            DEFAULT_FOCAL_MM,
            DEFAULT_SENSOR_WIDTH_MM,
            width_px,
            height_px,
        )
    }
}

/// World-to-camera rigid transform. Camera space: +x right, +y down in
/// the image, +z along the viewing direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Row-major world→camera rotation.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: [
                [rotation[(0, 0)], rotation[(0, 1)], rotation[(0, 2)]],
                [rotation[(1, 0)], rotation[(1, 1)], rotation[(1, 2)]],
                [rotation[(2, 0)], rotation[(2, 1)], rotation[(2, 2)]],
            ],
            translation: translation.into(),
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let r = &self.rotation;
        Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        )
    }

    pub fn translation_vector(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }

    pub fn to_camera(&self, p_world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * p_world + self.translation_vector()
    }

    /// Rotates a world direction into camera space.
    pub fn direction_to_camera(&self, d_world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * d_world
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation_matrix().transpose() * self.translation_vector())
    }
}

/// World up axis (the body model is y-up).
pub fn world_up() -> Vector3<f64> {
    Vector3::y()
}

/// Places the camera `distance` meters from the pelvis in the horizontal
/// plane through it, at azimuth `yaw`, looking straight at the pelvis.
pub fn place_camera(pelvis_world: &Vector3<f64>, distance: f64, yaw: f64) -> CameraPose {
    let offset = Vector3::new(yaw.sin(), 0.0, yaw.cos());
    let center = pelvis_world + offset * distance;
    let forward = -offset;
    let down = -world_up();
    let right = down.cross(&forward);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    CameraPose::new(rotation, -(rotation * center))
}

/// Pixel projection of a point. `behind_camera` is set when the
/// camera-space depth is at most [`MIN_DEPTH`]; `u`/`v` are then the
/// principal point and must not be used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub behind_camera: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

impl Camera {
    pub fn project(&self, point_world: &Vector3<f64>) -> Projection {
        project(&self.intrinsics, &self.pose, point_world)
    }

    pub fn project_camera_space(&self, p_cam: &Vector3<f64>) -> Projection {
        project_camera_space(&self.intrinsics, p_cam)
    }
}

pub fn project(
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    point_world: &Vector3<f64>,
) -> Projection {
    project_camera_space(intr, &pose.to_camera(point_world))
}

pub fn project_camera_space(intr: &CameraIntrinsics, p: &Vector3<f64>) -> Projection {
    if p.z <= MIN_DEPTH {
        return Projection {
            u: intr.cx,
            v: intr.cy,
            z: p.z,
            behind_camera: true,
        };
    }
    Projection {
        u: intr.cx + intr.fx * p.x / p.z,
        v: intr.cy + intr.fy * p.y / p.z,
        z: p.z,
        behind_camera: false,
    }
}
