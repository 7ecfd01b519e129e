//! Procedural low-poly humanoid with the SMPL joint layout.
//!
//! Every body part is a capped tube of 8-sided rings. Joints are regressed
//! as the centroid of one ring (or the midpoint of two rings for the
//! collars), so the rest skeleton is recovered exactly. Skinning weights
//! fall off linearly near the ends of each bone, at most two per vertex.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{part, BodyModel, BodyModelParts, NUM_JOINTS, NUM_SHAPE_COMPONENTS};

const RING_SIDES: usize = 8;
const BLEND_SPAN: f64 = 0.15;
const PELVIS_HEIGHT: f64 = 0.95;

/// Hand-specified rest skeleton (meters, y up, body facing +z, left = +x).
pub fn toy_skeleton() -> [Vector3<f64>; NUM_JOINTS] {
    let v = Vector3::new;
    let neck = v(0.0, 1.50, 0.0);
    let l_shoulder = v(0.19, 1.45, 0.0);
    let r_shoulder = v(-0.19, 1.45, 0.0);
    [
        v(0.0, PELVIS_HEIGHT, 0.0),
        v(0.09, 0.88, 0.0),
        v(-0.09, 0.88, 0.0),
        v(0.0, 1.07, 0.0),
        v(0.09, 0.50, 0.0),
        v(-0.09, 0.50, 0.0),
        v(0.0, 1.19, 0.0),
        v(0.09, 0.10, 0.0),
        v(-0.09, 0.10, 0.0),
        v(0.0, 1.31, 0.0),
        v(0.09, 0.03, 0.14),
        v(-0.09, 0.03, 0.14),
        neck,
        (neck + l_shoulder) * 0.5,
        (neck + r_shoulder) * 0.5,
        v(0.0, 1.62, 0.0),
        l_shoulder,
        r_shoulder,
        v(0.45, 1.45, 0.0),
        v(-0.45, 1.45, 0.0),
        v(0.69, 1.45, 0.0),
        v(-0.69, 1.45, 0.0),
        v(0.79, 1.45, 0.0),
        v(-0.79, 1.45, 0.0),
    ]
}

const SMPL_PARENTS: [i32; NUM_JOINTS] = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

/// The toy humanoid as a validated model.
pub fn toy_model() -> BodyModel {
    BodyModel::from_parts(toy_parts()).expect("toy model satisfies all invariants")
}

struct Ring {
    t: f64,
    radius: f64,
    /// Joint whose regressor row is this ring's centroid.
    regresses: Option<usize>,
}

/// How a tube's vertices are bound to the skeleton, as a function of the
/// position `t ∈ [0,1]` along the tube.
enum Binding {
    /// Rigidly attached to `bone`, blending into `parent` near the start and
    /// into `child` near the end.
    Limb {
        bone: usize,
        parent: usize,
        child: Option<usize>,
    },
    /// Piecewise-linear interpolation between consecutive joints of a chain
    /// located at the given tube parameters.
    Chain(Vec<(f64, usize)>),
}

struct Tube {
    part: u8,
    start: Vector3<f64>,
    end: Vector3<f64>,
    rings: Vec<Ring>,
    binding: Binding,
}

fn ring(t: f64, radius: f64, regresses: Option<usize>) -> Ring {
    Ring {
        t,
        radius,
        regresses,
    }
}

fn limb(part: u8, sk: &[Vector3<f64>; NUM_JOINTS], bone: usize, child: usize, radius: f64) -> Tube {
    let parent = SMPL_PARENTS[bone] as usize;
    Tube {
        part,
        start: sk[bone],
        end: sk[child],
        rings: vec![
            ring(0.0, radius, Some(bone)),
            ring(BLEND_SPAN, radius, None),
            ring(0.5, radius * 0.95, None),
            ring(1.0 - BLEND_SPAN, radius * 0.85, None),
            // Terminal joints (feet, hands) are regressed from the tip ring.
            ring(
                1.0,
                radius * 0.8,
                matches!(child, 10 | 11 | 22 | 23).then_some(child),
            ),
        ],
        binding: Binding::Limb {
            bone,
            parent,
            child: Some(child),
        },
    }
}

fn tubes() -> Vec<Tube> {
    let sk = toy_skeleton();
    let torso_t = |j: usize| (sk[j].y - sk[0].y) / (sk[12].y - sk[0].y);
    let head_top = Vector3::new(0.0, 1.78, 0.0);
    let head_t = (sk[15].y - sk[12].y) / (head_top.y - sk[12].y);

    vec![
        Tube {
            part: part::TORSO,
            start: sk[0],
            end: sk[12],
            rings: vec![
                ring(0.0, 0.14, Some(0)),
                ring(torso_t(3), 0.13, Some(3)),
                ring(torso_t(6), 0.14, Some(6)),
                ring(torso_t(9), 0.15, Some(9)),
                ring(1.0, 0.08, Some(12)),
            ],
            binding: Binding::Chain(vec![
                (0.0, 0),
                (torso_t(3), 3),
                (torso_t(6), 6),
                (torso_t(9), 9),
                (1.0, 12),
            ]),
        },
        Tube {
            part: part::HEAD,
            start: sk[12],
            end: head_top,
            rings: vec![
                ring(0.0, 0.06, None),
                ring(head_t, 0.10, Some(15)),
                ring(0.75, 0.09, None),
                ring(1.0, 0.05, None),
            ],
            binding: Binding::Chain(vec![(0.0, 12), (head_t, 15), (1.0, 15)]),
        },
        limb(part::UPPER_LEG_L, &sk, 1, 4, 0.08),
        limb(part::UPPER_LEG_R, &sk, 2, 5, 0.08),
        limb(part::LOWER_LEG_L, &sk, 4, 7, 0.06),
        limb(part::LOWER_LEG_R, &sk, 5, 8, 0.06),
        limb(part::FOOT_L, &sk, 7, 10, 0.045),
        limb(part::FOOT_R, &sk, 8, 11, 0.045),
        limb(part::UPPER_ARM_L, &sk, 16, 18, 0.05),
        limb(part::UPPER_ARM_R, &sk, 17, 19, 0.05),
        limb(part::LOWER_ARM_L, &sk, 18, 20, 0.04),
        limb(part::LOWER_ARM_R, &sk, 19, 21, 0.04),
        limb(part::HAND_L, &sk, 20, 22, 0.035),
        limb(part::HAND_R, &sk, 21, 23, 0.035),
    ]
}

fn binding_weights(binding: &Binding, t: f64) -> Vec<(usize, f64)> {
    match binding {
        Binding::Limb {
            bone,
            parent,
            child,
        } => {
            if t < BLEND_SPAN {
                let w_parent = 0.5 * (1.0 - t / BLEND_SPAN);
                vec![(*parent, w_parent), (*bone, 1.0 - w_parent)]
            } else if t > 1.0 - BLEND_SPAN && child.is_some() {
                let w_child = 0.5 * (t - (1.0 - BLEND_SPAN)) / BLEND_SPAN;
                vec![(*bone, 1.0 - w_child), (child.unwrap(), w_child)]
            } else {
                vec![(*bone, 1.0)]
            }
        }
        Binding::Chain(knots) => {
            for pair in knots.windows(2) {
                let (t0, j0) = pair[0];
                let (t1, j1) = pair[1];
                if t <= t1 {
                    let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                    return if j0 == j1 || s == 0.0 {
                        vec![(j0, 1.0)]
                    } else if s == 1.0 {
                        vec![(j1, 1.0)]
                    } else {
                        vec![(j0, 1.0 - s), (j1, s)]
                    };
                }
            }
            vec![(knots.last().unwrap().1, 1.0)]
        }
    }
}

/// Per-vertex bookkeeping used to author the analytic blendshapes.
struct VertexInfo {
    part: u8,
    /// Unit radial direction from the tube axis (zero on cap centers).
    radial: Vector3<f64>,
}

pub(super) fn toy_parts() -> BodyModelParts {
    let mut vertices = Vec::new();
    let mut info = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut uvs = Vec::new();
    let mut weights: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut regressor_rings: Vec<Vec<usize>> = vec![Vec::new(); NUM_JOINTS];

    for tube in tubes() {
        let axis = tube.end - tube.start;
        let dir = axis.normalize();
        let helper = if dir.y.abs() < 0.9 {
            Vector3::y()
        } else {
            Vector3::x()
        };
        let u = helper.cross(&dir).normalize();
        let v = dir.cross(&u);
        // Atlas cell for this part: 7 columns × 2 rows.
        let cell = (tube.part - 1) as f64;
        let (col, row) = (cell % 7.0, (cell / 7.0).floor());

        let mut ring_starts = Vec::with_capacity(tube.rings.len());
        for r in &tube.rings {
            let center = tube.start + axis * r.t;
            let first = vertices.len();
            ring_starts.push(first);
            for k in 0..RING_SIDES {
                let theta = 2.0 * PI * k as f64 / RING_SIDES as f64;
                let radial = u * theta.cos() + v * theta.sin();
                vertices.push(center + radial * r.radius);
                info.push(VertexInfo {
                    part: tube.part,
                    radial,
                });
                // Triangle wave in angle keeps u continuous across the seam.
                let around = 1.0 - (2.0 * k as f64 / RING_SIDES as f64 - 1.0).abs();
                uvs.push([(col + around) / 7.0, (row + r.t) / 2.0]);
                weights.push(binding_weights(&tube.binding, r.t));
            }
            if let Some(j) = r.regresses {
                regressor_rings[j].extend(first..first + RING_SIDES);
            }
        }

        let cap_start = vertices.len();
        for (end_t, point) in [(0.0, tube.start), (1.0, tube.end)] {
            vertices.push(point);
            info.push(VertexInfo {
                part: tube.part,
                radial: Vector3::zeros(),
            });
            uvs.push([(col + 0.5) / 7.0, (row + end_t) / 2.0]);
            weights.push(binding_weights(&tube.binding, end_t));
        }

        let idx = |i: usize| i as u32;
        for pair in ring_starts.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            for k in 0..RING_SIDES {
                let k1 = (k + 1) % RING_SIDES;
                let (a, b, c, d) = (lo + k, lo + k1, hi + k1, hi + k);
                faces.push([idx(a), idx(b), idx(c)]);
                faces.push([idx(a), idx(c), idx(d)]);
            }
        }
        let first_ring = ring_starts[0];
        let last_ring = *ring_starts.last().unwrap();
        for k in 0..RING_SIDES {
            let k1 = (k + 1) % RING_SIDES;
            faces.push([idx(cap_start), idx(first_ring + k1), idx(first_ring + k)]);
            faces.push([idx(cap_start + 1), idx(last_ring + k), idx(last_ring + k1)]);
        }
    }

    let n = vertices.len();
    let mut skinning = vec![0.0; n * NUM_JOINTS];
    for (i, w) in weights.iter().enumerate() {
        for &(j, wj) in w {
            skinning[i * NUM_JOINTS + j] += wj;
        }
    }

    // Collars sit halfway between the neck ring and the shoulder ring.
    let neck_ring = regressor_rings[12].clone();
    for (collar, shoulder) in [(13, 16), (14, 17)] {
        let mut members = neck_ring.clone();
        members.extend(&regressor_rings[shoulder]);
        regressor_rings[collar] = members;
    }
    let mut regressor = vec![0.0; NUM_JOINTS * n];
    for (j, members) in regressor_rings.iter().enumerate() {
        assert!(!members.is_empty(), "joint {j} has no regressor ring");
        let w = 1.0 / members.len() as f64;
        for &i in members {
            regressor[j * n + i] += w;
        }
    }

    let shape_blendshapes = (0..NUM_SHAPE_COMPONENTS)
        .map(|k| {
            vertices
                .iter()
                .zip(&info)
                .map(|(p, vi)| shape_offset(k, p, vi))
                .collect()
        })
        .collect();

    BodyModelParts {
        template_vertices: vertices,
        faces,
        shape_blendshapes,
        joint_regressor: regressor,
        skinning_weights: skinning,
        parents: SMPL_PARENTS
            .iter()
            .map(|&p| (p >= 0).then_some(p as usize))
            .collect(),
        part_labels: info.iter().map(|vi| vi.part).collect(),
        uv_coords: uvs,
        pose_blendshapes: None,
    }
}

fn is_arm(part: u8) -> bool {
    (part::UPPER_ARM_R..=part::HAND_L).contains(&part)
}

fn is_leg(part: u8) -> bool {
    matches!(
        part,
        part::UPPER_LEG_R
            | part::UPPER_LEG_L
            | part::LOWER_LEG_R
            | part::LOWER_LEG_L
            | part::FOOT_R
            | part::FOOT_L
    )
}

/// Offset of one vertex in blendshape `k` (meters per unit coefficient).
fn shape_offset(k: usize, p: &Vector3<f64>, vi: &VertexInfo) -> Vector3<f64> {
    let above_pelvis = p.y - PELVIS_HEIGHT;
    match k {
        // Overall stature.
        0 => Vector3::new(0.0, 0.06 * p.y, 0.0),
        // Girth.
        1 => vi.radial * 0.012,
        // Arm length.
        2 if is_arm(vi.part) => {
            Vector3::new(0.04 * (p.x.abs() - 0.19).max(0.0) * p.x.signum(), 0.0, 0.0)
        }
        // Leg length.
        3 if is_leg(vi.part) => Vector3::new(0.0, -0.05 * (0.88 - p.y).max(0.0), 0.0),
        // Shoulder breadth.
        4 if p.y > 1.3 && p.x.abs() > 0.1 => Vector3::new(0.02 * p.x.signum(), 0.0, 0.0),
        // Belly.
        5 if vi.part == part::TORSO => {
            let bump = (-((p.y - 1.1) / 0.12).powi(2)).exp();
            Vector3::new(0.0, 0.0, 0.03 * bump * vi.radial.z.max(0.0))
        }
        // Head size.
        6 if vi.part == part::HEAD => vi.radial * 0.01 + Vector3::new(0.0, 0.01 * (p.y - 1.5), 0.0),
        // Hip width.
        7 if p.y < 1.0 && p.x.abs() > 0.02 && !is_arm(vi.part) => {
            Vector3::new(0.015 * p.x.signum(), 0.0, 0.0)
        }
        // Torso length.
        8 if above_pelvis > 0.0 => Vector3::new(0.0, 0.03 * above_pelvis, 0.0),
        // Low-amplitude ripple.
        9 => vi.radial * (0.004 * (10.0 * p.y).sin()),
        _ => Vector3::zeros(),
    }
}
