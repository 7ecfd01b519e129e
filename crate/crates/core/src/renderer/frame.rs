//! Full per-frame pass generation for one clip.

use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use thiserror::Error;

use super::rasterize::{rasterize, GeometryBuffers};
use super::sh::{shade_sh, to_u8};
use super::{composite, render_flow};
use crate::body_model::{
    apply_shape, pose_body, regress_joints, BodyModel, PosedBody, PosingOptions, PELVIS,
};
use crate::camera::{place_camera, Camera, CameraIntrinsics};
use crate::ground_truth::{
    joints_annotation, quantize_depth, DepthQuantization, JointAnnotation, DEPTH_BACKGROUND,
};
use crate::motion::{Clip, MotionSequence};
use crate::raster::Raster;
use crate::scene_sampler::{fit_to, AssetBanks, AssetError, SceneConfig, Texture};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error("frame {frame} outside clip of {length} frames")]
    FrameOutOfRange { frame: usize, length: usize },
    #[error("clip frames {start}..{end} exceed sequence of {available} frames")]
    ClipOutOfRange {
        start: usize,
        end: usize,
        available: usize,
    },
    #[error("motion has {motion} joints, model has {model}")]
    JointCount { motion: usize, model: usize },
}

#[derive(Debug, Error, PartialEq)]
#[error("coverage mismatch at pixel ({x}, {y}): {detail}")]
pub struct CoverageError {
    pub x: u32,
    pub y: u32,
    pub detail: String,
}

/// All ground truth for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePasses {
    /// Position within the clip.
    pub frame_index: u32,
    pub rgb: RgbImage,
    /// Camera-space z in meters; [`DEPTH_BACKGROUND`] off the body.
    pub depth_m: Raster<f32>,
    /// Part labels 1..=14, 0 on background.
    pub segm: Raster<u8>,
    /// Camera-space unit normals, zero on background.
    pub normals: Raster<f32>,
    /// Forward flow to the next frame in pixels.
    pub flow: Raster<f32>,
    /// False on the last frame of a clip, whose flow is all zero.
    pub flow_valid: bool,
    pub joints: JointAnnotation,
    pub depth_labels: Raster<u8>,
}

impl FramePasses {
    pub fn width(&self) -> u32 {
        self.rgb.width()
    }

    pub fn height(&self) -> u32 {
        self.rgb.height()
    }

    /// Body pixels must agree across segmentation, depth, normals and
    /// depth labels.
    pub fn check_coverage(&self) -> Result<(), CoverageError> {
        let w = self.width();
        for i in 0..self.segm.pixel_count() {
            let seg = self.segm.pixel(i)[0] > 0;
            let depth = self.depth_m.pixel(i)[0] < DEPTH_BACKGROUND;
            let n = self.normals.pixel(i);
            let norm = n.iter().map(|&c| (c as f64).powi(2)).sum::<f64>().sqrt();
            let unit = (norm - 1.0).abs() < 1e-4;
            let label = self.depth_labels.pixel(i)[0] > 0;
            if !(seg == depth && depth == unit && unit == label) || (!seg && norm != 0.0) {
                return Err(CoverageError {
                    x: i as u32 % w,
                    y: i as u32 / w,
                    detail: format!(
                        "segm {seg}, depth {depth}, unit normal {unit} (|n| = {norm}), depth label {label}"
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub intrinsics: CameraIntrinsics,
    pub quantization: DepthQuantization,
    pub posing: PosingOptions,
}

impl RenderSettings {
    pub fn new(intrinsics: CameraIntrinsics) -> Self {
        Self {
            intrinsics,
            quantization: DepthQuantization::default(),
            posing: PosingOptions::default(),
        }
    }
}

/// Per-clip state shared by all frames: shaped rest geometry, camera and
/// resolved assets.
pub struct ClipRenderer<'a> {
    model: &'a BodyModel,
    motion: &'a MotionSequence,
    clip: &'a Clip,
    scene: &'a SceneConfig,
    settings: RenderSettings,
    texture: &'a Texture,
    background: RgbImage,
    rest_vertices: Vec<Vector3<f64>>,
    rest_joints: Vec<Vector3<f64>>,
    face_labels: Vec<u8>,
    camera: Camera,
}

impl<'a> ClipRenderer<'a> {
    pub fn new(
        model: &'a BodyModel,
        motion: &'a MotionSequence,
        clip: &'a Clip,
        scene: &'a SceneConfig,
        banks: &'a AssetBanks,
        settings: RenderSettings,
    ) -> Result<Self, RenderError> {
        if motion.num_joints() != model.num_joints() {
            return Err(RenderError::JointCount {
                motion: motion.num_joints(),
                model: model.num_joints(),
            });
        }
        let range = clip.frame_range();
        if range.end > motion.len() || clip.length == 0 {
            return Err(RenderError::ClipOutOfRange {
                start: range.start,
                end: range.end,
                available: motion.len(),
            });
        }
        let texture = banks.texture(scene.texture_id)?;
        let intr = &settings.intrinsics;
        let background = fit_to(
            &banks.background(scene.background_id)?.image,
            intr.width,
            intr.height,
        );

        let rest_vertices = apply_shape(model, &scene.shape);
        let rest_joints = regress_joints(model, &rest_vertices);
        let mut this = Self {
            model,
            motion,
            clip,
            scene,
            settings,
            texture,
            background,
            rest_vertices,
            rest_joints,
            face_labels: model.face_part_labels(),
            camera: Camera {
                intrinsics: settings.intrinsics,
                pose: place_camera(&Vector3::zeros(), 1.0, 0.0),
            },
        };
        let pelvis = this.pose(0).joints[PELVIS];
        this.camera.pose = place_camera(&pelvis, scene.camera_distance, scene.camera_yaw);
        Ok(this)
    }

    /// Fixed for the whole clip, aimed at the pelvis of its first frame.
    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn len(&self) -> usize {
        self.clip.length
    }

    pub fn is_empty(&self) -> bool {
        self.clip.length == 0
    }

    /// Posed geometry of clip frame `t` (no range check).
    pub fn pose(&self, t: usize) -> PosedBody {
        let pose = &self.motion.frames[self.clip.start_frame + t];
        pose_body(
            self.model,
            &self.rest_vertices,
            &self.rest_joints,
            pose,
            self.settings.posing,
        )
    }

    pub fn render_frame(&self, t: usize) -> Result<FramePasses, RenderError> {
        if t >= self.clip.length {
            return Err(RenderError::FrameOutOfRange {
                frame: t,
                length: self.clip.length,
            });
        }
        let current = self.pose(t);
        let next = (t + 1 < self.clip.length).then(|| self.pose(t + 1));
        Ok(self.render_posed(t, &current, next.as_ref()))
    }

    /// Renders every frame in order, posing each frame once. Stops at the
    /// first error from `sink`.
    pub fn render_all<E>(
        &self,
        mut sink: impl FnMut(FramePasses) -> Result<(), E>,
    ) -> Result<(), E> {
        let mut current = self.pose(0);
        for t in 0..self.clip.length {
            let next = (t + 1 < self.clip.length).then(|| self.pose(t + 1));
            sink(self.render_posed(t, &current, next.as_ref()))?;
            match next {
                Some(n) => current = n,
                None => break,
            }
        }
        Ok(())
    }

    /// Passes for frame `t` from already-posed geometry. `next` is the
    /// following frame's geometry, absent on the last frame.
    pub fn render_posed(
        &self,
        t: usize,
        current: &PosedBody,
        next: Option<&PosedBody>,
    ) -> FramePasses {
        let faces = self.model.faces();
        let intr = &self.settings.intrinsics;
        let (w, h) = (intr.width, intr.height);
        let geom = rasterize(&current.vertices, faces, &self.camera);
        let vertex_normals = vertex_normals(&current.vertices, faces);

        let mut depth_m = Raster::filled(w, h, 1, DEPTH_BACKGROUND);
        let mut segm = Raster::filled(w, h, 1, 0u8);
        let mut normals = Raster::filled(w, h, 3, 0.0f32);
        let mut shaded = RgbImage::new(w, h);
        let uv = self.model.uv_coords();
        let rot = self.camera.pose.rotation_matrix();

        for i in 0..geom.face_id.len() {
            if !geom.is_covered(i) {
                continue;
            }
            let fi = geom.face_id[i] as usize;
            let f = faces[fi].map(|v| v as usize);
            let b = geom.barycentric[i];
            let n_world = surface_normal(&geom, i, &f, &current.vertices, &vertex_normals);
            let n_cam = rot * n_world;

            let u = b[0] * uv[f[0]][0] + b[1] * uv[f[1]][0] + b[2] * uv[f[2]][0];
            let v = b[0] * uv[f[0]][1] + b[1] * uv[f[1]][1] + b[2] * uv[f[2]][1];
            let rgb = shade_sh(&n_world, self.texture.sample(u, v), &self.scene.light);

            depth_m.pixel_mut(i)[0] = geom.depth[i] as f32;
            segm.pixel_mut(i)[0] = self.face_labels[fi];
            normals
                .pixel_mut(i)
                .copy_from_slice(&[n_cam.x as f32, n_cam.y as f32, n_cam.z as f32]);
            shaded.put_pixel(i as u32 % w, i as u32 / w, Rgb(rgb.map(to_u8)));
        }

        let rgb = composite(&shaded, &geom.coverage_mask(), &self.background);
        let flow = match next {
            Some(n) => render_flow(&geom, &current.vertices, &n.vertices, faces, &self.camera),
            None => Raster::filled(w, h, 2, 0.0),
        };
        let joints = joints_annotation(&current.joints, &self.camera);
        let pelvis_z = joints.joints3d[PELVIS][2];
        let depth_labels = quantize_depth(&depth_m, pelvis_z, &self.settings.quantization);

        FramePasses {
            frame_index: t as u32,
            rgb,
            depth_m,
            segm,
            normals,
            flow,
            flow_valid: next.is_some(),
            joints,
            depth_labels,
        }
    }
}

/// Area-weighted vertex normals (unnormalized sums of face cross products).
fn vertex_normals(vertices: &[Vector3<f64>], faces: &[[u32; 3]]) -> Vec<Vector3<f64>> {
    let mut acc = vec![Vector3::zeros(); vertices.len()];
    for f in faces {
        let [a, b, c] = f.map(|i| i as usize);
        let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
        acc[a] += n;
        acc[b] += n;
        acc[c] += n;
    }
    acc.into_iter()
        .map(|n| n.try_normalize(1e-12).unwrap_or_else(Vector3::zeros))
        .collect()
}

/// Interpolated smooth normal; the face normal where interpolation
/// cancels out, world up as a last resort.
fn surface_normal(
    geom: &GeometryBuffers,
    i: usize,
    f: &[usize; 3],
    vertices: &[Vector3<f64>],
    vertex_normals: &[Vector3<f64>],
) -> Vector3<f64> {
    let b = geom.barycentric[i];
    let smooth =
        vertex_normals[f[0]] * b[0] + vertex_normals[f[1]] * b[1] + vertex_normals[f[2]] * b[2];
    smooth
        .try_normalize(1e-9)
        .or_else(|| {
            (vertices[f[1]] - vertices[f[0]])
                .cross(&(vertices[f[2]] - vertices[f[0]]))
                .try_normalize(1e-15)
        })
        .unwrap_or_else(Vector3::y)
}

/// One-off render of clip frame `t`.
pub fn render_frame(
    scene: &SceneConfig,
    model: &BodyModel,
    motion: &MotionSequence,
    clip: &Clip,
    t: usize,
    banks: &AssetBanks,
    settings: RenderSettings,
) -> Result<FramePasses, RenderError> {
    ClipRenderer::new(model, motion, clip, scene, banks, settings)?.render_frame(t)
}
