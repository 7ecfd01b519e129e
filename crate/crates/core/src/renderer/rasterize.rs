//! Z-buffered scan conversion.

use nalgebra::Vector3;

use crate::camera::Camera;

/// Face id of pixels no triangle covers.
pub const NO_FACE: u32 = u32::MAX;

/// Triangles with a vertex closer than this (meters) are dropped rather
/// than clipped.
pub const NEAR_PLANE: f64 = 0.05;

/// Per-pixel visibility: which face is nearest, where on it, and how far.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryBuffers {
    pub width: u32,
    pub height: u32,
    /// Row-major; [`NO_FACE`] on background.
    pub face_id: Vec<u32>,
    /// Perspective-correct barycentrics of the pixel center on its face.
    pub barycentric: Vec<[f64; 3]>,
    /// Camera-space z, infinite on background.
    pub depth: Vec<f64>,
}

impl GeometryBuffers {
    pub fn empty(width: u32, height: u32) -> Self {
        let n = (width * height) as usize;
        Self {
            width,
            height,
            face_id: vec![NO_FACE; n],
            barycentric: vec![[0.0; 3]; n],
            depth: vec![f64::INFINITY; n],
        }
    }

    pub fn is_covered(&self, i: usize) -> bool {
        self.face_id[i] != NO_FACE
    }

    pub fn coverage_mask(&self) -> Vec<bool> {
        self.face_id.iter().map(|&f| f != NO_FACE).collect()
    }

    pub fn covered_count(&self) -> usize {
        self.face_id.iter().filter(|&&f| f != NO_FACE).count()
    }
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Rasterizes world-space triangles. Pixel centers sit at `(x+0.5, y+0.5)`;
/// a center on an edge counts as inside. Both windings are drawn. On equal
/// depth the earlier face keeps the pixel.
pub fn rasterize(
    vertices: &[Vector3<f64>],
    faces: &[[u32; 3]],
    camera: &Camera,
) -> GeometryBuffers {
    let intr = &camera.intrinsics;
    let (w, h) = (intr.width, intr.height);
    let mut buf = GeometryBuffers::empty(w, h);
    if faces.is_empty() || w == 0 || h == 0 {
        return buf;
    }

    let cam: Vec<Vector3<f64>> = vertices.iter().map(|v| camera.pose.to_camera(v)).collect();
    let screen: Vec<[f64; 2]> = cam
        .iter()
        .map(|p| {
            if p.z > 0.0 {
                [intr.cx + intr.fx * p.x / p.z, intr.cy + intr.fy * p.y / p.z]
            } else {
                [f64::NAN; 2]
            }
        })
        .collect();

    for (fi, face) in faces.iter().enumerate() {
        let idx = face.map(|i| i as usize);
        let z = idx.map(|i| cam[i].z);
        if z.iter().any(|&z| !(z >= NEAR_PLANE)) {
            continue;
        }
        let s = idx.map(|i| screen[i]);
        let area = edge(s[0], s[1], s[2]);
        if !area.is_finite() || area.abs() < 1e-12 {
            continue;
        }

        let min_x = s.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        if max_x < 0.0 || max_y < 0.0 || min_x > w as f64 || min_y > h as f64 {
            continue;
        }
        let x0 = (min_x - 0.5).floor().max(0.0) as u32;
        let x1 = ((max_x - 0.5).ceil().max(0.0) as u32).min(w - 1);
        let y0 = (min_y - 0.5).floor().max(0.0) as u32;
        let y1 = ((max_y - 0.5).ceil().max(0.0) as u32).min(h - 1);
        let inv_area = 1.0 / area;

        for y in y0..=y1 {
            for x in x0..=x1 {
                let p = [x as f64 + 0.5, y as f64 + 0.5];
                let l = [
                    edge(s[1], s[2], p) * inv_area,
                    edge(s[2], s[0], p) * inv_area,
                    edge(s[0], s[1], p) * inv_area,
                ];
                if l.iter().any(|&v| v < 0.0) {
                    continue;
                }
                let inv_z = l[0] / z[0] + l[1] / z[1] + l[2] / z[2];
                let depth = 1.0 / inv_z;
                let i = (y * w + x) as usize;
                if depth < buf.depth[i] {
                    buf.depth[i] = depth;
                    buf.face_id[i] = fi as u32;
                    buf.barycentric[i] = [
                        l[0] / z[0] * depth,
                        l[1] / z[1] * depth,
                        l[2] / z[2] * depth,
                    ];
                }
            }
        }
    }
    buf
}
