//! Software rasterizer and ground-truth passes.

mod frame;
mod rasterize;
mod sh;

pub use frame::{
    render_frame, ClipRenderer, CoverageError, FramePasses, RenderError, RenderSettings,
};
pub use rasterize::{rasterize, GeometryBuffers, NEAR_PLANE, NO_FACE};
pub use sh::{irradiance, sh_basis, shade_sh, to_u8};

use image::RgbImage;
use nalgebra::Vector3;

use crate::camera::Camera;
use crate::raster::Raster;

/// Hard-mask compositing: covered pixels from `shaded`, the rest from
/// `background`. All three must share the image size.
pub fn composite(shaded: &RgbImage, coverage: &[bool], background: &RgbImage) -> RgbImage {
    assert_eq!(shaded.dimensions(), background.dimensions());
    assert_eq!(coverage.len(), (shaded.width() * shaded.height()) as usize);
    let mut out = background.clone();
    for ((dst, src), &covered) in out.pixels_mut().zip(shaded.pixels()).zip(coverage) {
        if covered {
            *dst = *src;
        }
    }
    out
}

/// Forward flow in pixels. Each covered pixel's surface point is carried to
/// the next frame with the same face and barycentrics and projected again.
/// Points that end up behind the camera get zero flow.
pub fn render_flow(
    geom: &GeometryBuffers,
    vertices_t: &[Vector3<f64>],
    vertices_next: &[Vector3<f64>],
    faces: &[[u32; 3]],
    camera: &Camera,
) -> Raster<f32> {
    let mut flow = Raster::filled(geom.width, geom.height, 2, 0.0f32);
    for i in 0..geom.face_id.len() {
        if !geom.is_covered(i) {
            continue;
        }
        let f = faces[geom.face_id[i] as usize].map(|v| v as usize);
        let b = geom.barycentric[i];
        let at = |v: &[Vector3<f64>]| v[f[0]] * b[0] + v[f[1]] * b[1] + v[f[2]] * b[2];
        let p0 = camera.project(&at(vertices_t));
        let p1 = camera.project(&at(vertices_next));
        if p0.behind_camera || p1.behind_camera {
            continue;
        }
        let px = flow.pixel_mut(i);
        px[0] = (p1.u - p0.u) as f32;
        px[1] = (p1.v - p0.v) as f32;
    }
    flow
}
