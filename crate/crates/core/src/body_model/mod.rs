//! Parametric articulated body: shape blendshapes, joint regression,
//! forward kinematics and linear blend skinning.

mod format;
mod toy;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use toy::{toy_model, toy_skeleton};

/// Joint count of the SMPL kinematic tree.
pub const NUM_JOINTS: usize = 24;
/// Number of shape principal components consumed by [`apply_shape`].
pub const NUM_SHAPE_COMPONENTS: usize = 10;
/// Number of body-part labels (1..=14).
pub const NUM_PARTS: u8 = 14;
/// Largest admissible magnitude of a shape coefficient.
pub const SHAPE_COEFF_LIMIT: f64 = 5.0;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// Joint names in SMPL order.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

/// Index of the pelvis (root) joint in SMPL order.
pub const PELVIS: usize = 0;

/// Body-part label semantics.
pub mod part {
    pub const HEAD: u8 = 1;
    pub const TORSO: u8 = 2;
    pub const UPPER_LEG_R: u8 = 3;
    pub const UPPER_LEG_L: u8 = 4;
    pub const LOWER_LEG_R: u8 = 5;
    pub const LOWER_LEG_L: u8 = 6;
    pub const UPPER_ARM_R: u8 = 7;
    pub const UPPER_ARM_L: u8 = 8;
    pub const LOWER_ARM_R: u8 = 9;
    pub const LOWER_ARM_L: u8 = 10;
    pub const HAND_R: u8 = 11;
    pub const HAND_L: u8 = 12;
    pub const FOOT_R: u8 = 13;
    pub const FOOT_L: u8 = 14;

    pub const NAMES: [&str; 14] = [
        "head",
        "torso",
        "upper_leg_r",
        "upper_leg_l",
        "lower_leg_r",
        "lower_leg_l",
        "upper_arm_r",
        "upper_arm_l",
        "lower_arm_r",
        "lower_arm_l",
        "hand_r",
        "hand_l",
        "foot_r",
        "foot_l",
    ];
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("unsupported model version {0:?}")]
    UnsupportedVersion(String),
    #[error("array size mismatch for {field}: expected {expected}, got {got}")]
    SizeMismatch {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("face {face} references vertex {index} out of range")]
    FaceIndexOutOfRange { face: usize, index: usize },
    #[error("kinematic parent of joint {joint} out of range")]
    ParentOutOfRange { joint: usize },
    #[error("kinematic tree must have exactly one root, found {0}")]
    RootCount(usize),
    #[error("kinematic tree has a cycle through joint {0}")]
    Cycle(usize),
    #[error("negative weight in {field} row {row}")]
    NegativeWeight { field: &'static str, row: usize },
    #[error("skinning weights row not normalized (vertex {vertex}, sum {sum})")]
    SkinningRowNotNormalized { vertex: usize, sum: f64 },
    #[error("joint regressor row not normalized (joint {joint}, sum {sum})")]
    RegressorRowNotNormalized { joint: usize, sum: f64 },
    #[error("part label {label} out of range at vertex {vertex}")]
    PartLabelOutOfRange { vertex: usize, label: i64 },
    #[error("missing part label {0}")]
    MissingPartLabel(u8),
    #[error("uv coordinate outside [0,1] at vertex {0}")]
    UvOutOfRange(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum PoseError {
    #[error("non-finite pose")]
    NonFinite,
    #[error("axis-angle magnitude {magnitude} exceeds 2π at joint {joint}")]
    RotationTooLarge { joint: usize, magnitude: f64 },
    #[error("expected {expected} joint rotations, got {got}")]
    JointCount { expected: usize, got: usize },
    #[error("non-finite shape coefficient")]
    NonFiniteShape,
}

/// Ten PCA shape coordinates. Magnitudes are clamped to
/// [`SHAPE_COEFF_LIMIT`] on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "[f64; NUM_SHAPE_COMPONENTS]",
    into = "[f64; NUM_SHAPE_COMPONENTS]"
)]
pub struct ShapeCoefficients([f64; NUM_SHAPE_COMPONENTS]);

impl ShapeCoefficients {
    pub fn new(beta: [f64; NUM_SHAPE_COMPONENTS]) -> Result<Self, PoseError> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(PoseError::NonFiniteShape);
        }
        Ok(Self(
            beta.map(|b| b.clamp(-SHAPE_COEFF_LIMIT, SHAPE_COEFF_LIMIT)),
        ))
    }

    pub fn zero() -> Self {
        Self([0.0; NUM_SHAPE_COMPONENTS])
    }

    pub fn values(&self) -> &[f64; NUM_SHAPE_COMPONENTS] {
        &self.0
    }
}

impl Default for ShapeCoefficients {
    fn default() -> Self {
        Self::zero()
    }
}

impl TryFrom<[f64; NUM_SHAPE_COMPONENTS]> for ShapeCoefficients {
    type Error = PoseError;
    fn try_from(beta: [f64; NUM_SHAPE_COMPONENTS]) -> Result<Self, PoseError> {
        Self::new(beta)
    }
}

impl From<ShapeCoefficients> for [f64; NUM_SHAPE_COMPONENTS] {
    fn from(s: ShapeCoefficients) -> Self {
        s.0
    }
}

/// One frame of articulated pose: world root translation plus per-joint
/// axis-angle rotations (radians).
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub root_translation: Vector3<f64>,
    pub joint_rotations: Vec<Vector3<f64>>,
}

impl PoseFrame {
    pub fn new(
        root_translation: Vector3<f64>,
        joint_rotations: Vec<Vector3<f64>>,
    ) -> Result<Self, PoseError> {
        let frame = Self {
            root_translation,
            joint_rotations,
        };
        frame.validate()?;
        Ok(frame)
    }

    /// Rest pose (no rotation, no translation).
    pub fn identity(num_joints: usize) -> Self {
        Self {
            root_translation: Vector3::zeros(),
            joint_rotations: vec![Vector3::zeros(); num_joints],
        }
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        if self.root_translation.iter().any(|v| !v.is_finite()) {
            return Err(PoseError::NonFinite);
        }
        for (joint, r) in self.joint_rotations.iter().enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(PoseError::NonFinite);
            }
            let magnitude = r.norm();
            if magnitude > 2.0 * std::f64::consts::PI {
                return Err(PoseError::RotationTooLarge { joint, magnitude });
            }
        }
        Ok(())
    }
}

/// Rigid transform `p ↦ rotation·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation by `rotation` about the fixed point `center`.
    pub fn rotation_about(rotation: Matrix3<f64>, center: &Vector3<f64>) -> Self {
        Self {
            rotation,
            translation: center - rotation * center,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Rodrigues' formula. The zero vector maps to the exact identity.
pub fn axis_angle_to_matrix(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = omega.norm_squared();
    if theta_sq == 0.0 {
        return Matrix3::identity();
    }
    let k = omega.cross_matrix();
    let k2 = k * k;
    let (a, b) = if theta_sq < 1e-12 {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        let theta = theta_sq.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    Matrix3::identity() + k * a + k2 * b
}

/// Raw arrays making up a body model, prior to validation.
#[derive(Debug, Clone, Default)]
pub struct BodyModelParts {
    pub template_vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[u32; 3]>,
    /// `K` blendshapes, each with one offset per vertex.
    pub shape_blendshapes: Vec<Vec<Vector3<f64>>>,
    /// Row-major `J × V`.
    pub joint_regressor: Vec<f64>,
    /// Row-major `V × J`.
    pub skinning_weights: Vec<f64>,
    pub parents: Vec<Option<usize>>,
    pub part_labels: Vec<u8>,
    pub uv_coords: Vec<[f64; 2]>,
    /// Optional pose-corrective blendshapes, `9·(J−1)` fields of per-vertex
    /// offsets driven by the entries of `R_j − I` for every non-root joint.
    pub pose_blendshapes: Option<Vec<Vec<Vector3<f64>>>>,
}

/// A validated body model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct BodyModel {
    parts: BodyModelParts,
    /// Joints ordered so that parents precede children.
    topo_order: Vec<usize>,
    /// Nonzero skinning entries per vertex.
    sparse_weights: Vec<Vec<(usize, f64)>>,
}

impl BodyModel {
    /// Validates every structural invariant and reports the first violation.
    pub fn from_parts(parts: BodyModelParts) -> Result<Self, ModelError> {
        let v = parts.template_vertices.len();
        let j = parts.parents.len();
        if v == 0 {
            return Err(ModelError::Malformed("model has no vertices".into()));
        }
        if j == 0 {
            return Err(ModelError::Malformed("model has no joints".into()));
        }
        if parts
            .template_vertices
            .iter()
            .any(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(ModelError::NonFinite("template_vertices"));
        }
        if parts.shape_blendshapes.len() != NUM_SHAPE_COMPONENTS {
            return Err(ModelError::SizeMismatch {
                field: "shape_blendshapes",
                expected: NUM_SHAPE_COMPONENTS,
                got: parts.shape_blendshapes.len(),
            });
        }
        for shape in &parts.shape_blendshapes {
            if shape.len() != v {
                return Err(ModelError::SizeMismatch {
                    field: "shape_blendshapes",
                    expected: v,
                    got: shape.len(),
                });
            }
            if shape.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
                return Err(ModelError::NonFinite("shape_blendshapes"));
            }
        }
        for (fi, face) in parts.faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&i| i as usize >= v) {
                return Err(ModelError::FaceIndexOutOfRange {
                    face: fi,
                    index: bad as usize,
                });
            }
        }
        let topo_order = kinematic_order(&parts.parents)?;

        check_len("joint_regressor", parts.joint_regressor.len(), j * v)?;
        check_len("skinning_weights", parts.skinning_weights.len(), v * j)?;
        check_len("part_labels", parts.part_labels.len(), v)?;
        check_len("uv_coords", parts.uv_coords.len(), v)?;

        for (row, weights) in parts.skinning_weights.chunks(j).enumerate() {
            check_row("skinning_weights", row, weights)?;
            let sum: f64 = weights.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(ModelError::SkinningRowNotNormalized { vertex: row, sum });
            }
        }
        for (row, weights) in parts.joint_regressor.chunks(v).enumerate() {
            check_row("joint_regressor", row, weights)?;
            let sum: f64 = weights.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(ModelError::RegressorRowNotNormalized { joint: row, sum });
            }
        }

        let mut seen = [false; NUM_PARTS as usize];
        for (vertex, &label) in parts.part_labels.iter().enumerate() {
            if !(1..=NUM_PARTS).contains(&label) {
                return Err(ModelError::PartLabelOutOfRange {
                    vertex,
                    label: label as i64,
                });
            }
            seen[label as usize - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(ModelError::MissingPartLabel(missing as u8 + 1));
        }

        for (vertex, uv) in parts.uv_coords.iter().enumerate() {
            if uv.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(ModelError::UvOutOfRange(vertex));
            }
        }

        if let Some(pose_shapes) = &parts.pose_blendshapes {
            check_len("pose_blendshapes", pose_shapes.len(), 9 * (j - 1))?;
            for shape in pose_shapes {
                check_len("pose_blendshapes", shape.len(), v)?;
                if shape.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
                    return Err(ModelError::NonFinite("pose_blendshapes"));
                }
            }
        }

        let sparse_weights = parts
            .skinning_weights
            .chunks(j)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(i, &w)| (i, w))
                    .collect()
            })
            .collect();

        Ok(Self {
            parts,
            topo_order,
            sparse_weights,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.parts.template_vertices.len()
    }

    pub fn num_joints(&self) -> usize {
        self.parts.parents.len()
    }

    pub fn template_vertices(&self) -> &[Vector3<f64>] {
        &self.parts.template_vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.parts.faces
    }

    pub fn shape_blendshapes(&self) -> &[Vec<Vector3<f64>>] {
        &self.parts.shape_blendshapes
    }

    pub fn joint_regressor(&self) -> &[f64] {
        &self.parts.joint_regressor
    }

    pub fn skinning_weights(&self) -> &[f64] {
        &self.parts.skinning_weights
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parts.parents
    }

    pub fn part_labels(&self) -> &[u8] {
        &self.parts.part_labels
    }

    pub fn uv_coords(&self) -> &[[f64; 2]] {
        &self.parts.uv_coords
    }

    pub fn has_pose_blendshapes(&self) -> bool {
        self.parts.pose_blendshapes.is_some()
    }

    pub fn parts(&self) -> &BodyModelParts {
        &self.parts
    }

    /// The root joint (the unique joint without a parent).
    pub fn root(&self) -> usize {
        self.topo_order[0]
    }

    /// Part label of each face: the majority label of its three vertices,
    /// ties broken towards the smallest label.
    pub fn face_part_labels(&self) -> Vec<u8> {
        let labels = &self.parts.part_labels;
        self.parts
            .faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| labels[i as usize]);
                if a == b || a == c {
                    a
                } else if b == c {
                    b
                } else {
                    a.min(b).min(c)
                }
            })
            .collect()
    }
}

fn check_len(field: &'static str, got: usize, expected: usize) -> Result<(), ModelError> {
    if got != expected {
        return Err(ModelError::SizeMismatch {
            field,
            expected,
            got,
        });
    }
    Ok(())
}

fn check_row(field: &'static str, row: usize, weights: &[f64]) -> Result<(), ModelError> {
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(ModelError::NonFinite(field));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(ModelError::NegativeWeight { field, row });
    }
    Ok(())
}

/// Validates the parent array as a single-rooted tree and returns a
/// parents-first joint ordering.
fn kinematic_order(parents: &[Option<usize>]) -> Result<Vec<usize>, ModelError> {
    let j = parents.len();
    for (joint, parent) in parents.iter().enumerate() {
        if let Some(p) = *parent {
            if p >= j || p == joint {
                return Err(ModelError::ParentOutOfRange { joint });
            }
        }
    }
    let roots: Vec<usize> = (0..j).filter(|&i| parents[i].is_none()).collect();
    if roots.len() != 1 {
        return Err(ModelError::RootCount(roots.len()));
    }
    let mut children = vec![Vec::new(); j];
    for (joint, parent) in parents.iter().enumerate() {
        if let Some(p) = *parent {
            children[p].push(joint);
        }
    }
    let mut order = Vec::with_capacity(j);
    let mut stack = vec![roots[0]];
    while let Some(joint) = stack.pop() {
        order.push(joint);
        stack.extend(children[joint].iter().rev());
    }
    if order.len() != j {
        let unreached = (0..j).find(|i| !order.contains(i)).unwrap_or(0);
        return Err(ModelError::Cycle(unreached));
    }
    Ok(order)
}

/// Rest-pose vertices for the given shape: `template + Σ_k β_k · S_k`.
pub fn apply_shape(model: &BodyModel, beta: &ShapeCoefficients) -> Vec<Vector3<f64>> {
    let mut vertices = model.template_vertices().to_vec();
    for (coeff, shape) in beta.values().iter().zip(model.shape_blendshapes()) {
        if *coeff == 0.0 {
            continue;
        }
        for (v, offset) in vertices.iter_mut().zip(shape) {
            *v += offset * *coeff;
        }
    }
    vertices
}

/// Rest joint positions as convex combinations of the rest vertices.
pub fn regress_joints(model: &BodyModel, rest_vertices: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let v = model.num_vertices();
    model
        .joint_regressor()
        .chunks(v)
        .map(|row| {
            row.iter()
                .zip(rest_vertices)
                .filter(|(w, _)| **w != 0.0)
                .fold(Vector3::zeros(), |acc, (w, p)| acc + p * *w)
        })
        .collect()
}

/// World transforms mapping rest-pose space to posed space, one per joint.
///
/// Each joint rotates about its own rest position; the root is additionally
/// translated by the pose's root translation.
pub fn forward_kinematics(
    rest_joints: &[Vector3<f64>],
    pose: &PoseFrame,
    parents: &[Option<usize>],
) -> Vec<RigidTransform> {
    let j = parents.len();
    debug_assert_eq!(rest_joints.len(), j);
    debug_assert_eq!(pose.joint_rotations.len(), j);
    let order = kinematic_order(parents).expect("kinematic tree validated");
    let mut world = vec![RigidTransform::identity(); j];
    for joint in order {
        let rotation = axis_angle_to_matrix(&pose.joint_rotations[joint]);
        let local = RigidTransform::rotation_about(rotation, &rest_joints[joint]);
        world[joint] = match parents[joint] {
            Some(p) => world[p].compose(&local),
            None => RigidTransform::from_translation(pose.root_translation).compose(&local),
        };
    }
    world
}

/// Posed joint locations: each joint's world transform applied to its rest
/// position.
pub fn posed_joints(
    rest_joints: &[Vector3<f64>],
    transforms: &[RigidTransform],
) -> Vec<Vector3<f64>> {
    rest_joints
        .iter()
        .zip(transforms)
        .map(|(p, t)| t.apply(p))
        .collect()
}

/// Linear blend skinning: `v' = Σ_j w_ij · T_j(v_i)`.
///
/// Evaluated as `v + Σ_j w_ij · ((R_j − I)·v + t_j)` so identity transforms
/// reproduce the input bit-for-bit.
pub fn skin(
    model: &BodyModel,
    rest_vertices: &[Vector3<f64>],
    transforms: &[RigidTransform],
) -> Vec<Vector3<f64>> {
    let deltas: Vec<(Matrix3<f64>, Vector3<f64>)> = transforms
        .iter()
        .map(|t| (t.rotation - Matrix3::identity(), t.translation))
        .collect();
    rest_vertices
        .iter()
        .zip(&model.sparse_weights)
        .map(|(v, weights)| {
            let mut offset = Vector3::zeros();
            for &(joint, w) in weights {
                let (dr, t) = &deltas[joint];
                offset += (dr * v + t) * w;
            }
            v + offset
        })
        .collect()
}

/// Adds pose-corrective offsets, if the model carries them. Not part of the
/// default pipeline.
pub fn apply_pose_correctives(
    model: &BodyModel,
    rest_vertices: &mut [Vector3<f64>],
    pose: &PoseFrame,
) {
    let Some(pose_shapes) = &model.parts.pose_blendshapes else {
        return;
    };
    let root = model.root();
    let features = (0..model.num_joints())
        .filter(|&j| j != root)
        .flat_map(|j| {
            let m = axis_angle_to_matrix(&pose.joint_rotations[j]) - Matrix3::identity();
            // Row-major flattening.
            (0..9).map(move |k| m[(k / 3, k % 3)])
        });
    for (feature, shape) in features.zip(pose_shapes) {
        if feature == 0.0 {
            continue;
        }
        for (v, offset) in rest_vertices.iter_mut().zip(shape) {
            *v += offset * feature;
        }
    }
}

/// Options for [`pose_body`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PosingOptions {
    pub pose_correctives: bool,
}

/// Posed mesh and joints for one frame.
#[derive(Debug, Clone)]
pub struct PosedBody {
    pub vertices: Vec<Vector3<f64>>,
    pub joints: Vec<Vector3<f64>>,
}

/// Full chain for one frame given already-shaped rest geometry.
pub fn pose_body(
    model: &BodyModel,
    rest_vertices: &[Vector3<f64>],
    rest_joints: &[Vector3<f64>],
    pose: &PoseFrame,
    options: PosingOptions,
) -> PosedBody {
    let transforms = forward_kinematics(rest_joints, pose, model.parents());
    let vertices = if options.pose_correctives && model.has_pose_blendshapes() {
        let mut corrected = rest_vertices.to_vec();
        apply_pose_correctives(model, &mut corrected, pose);
        skin(model, &corrected, &transforms)
    } else {
        skin(model, rest_vertices, &transforms)
    };
    PosedBody {
        vertices,
        joints: posed_joints(rest_joints, &transforms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn chain_parents() -> Vec<Option<usize>> {
        vec![None, Some(0)]
    }

    #[test]
    fn rodrigues_quarter_turn_about_z() {
        let r = axis_angle_to_matrix(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let x = r * Vector3::x();
        assert!((x - Vector3::y()).norm() < 1e-15);
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-15);
    }

    #[test]
    fn rodrigues_small_angle_is_orthonormal() {
        let r = axis_angle_to_matrix(&Vector3::new(1e-8, -2e-8, 3e-9));
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-15);
    }

    #[test]
    fn fk_identity_pose_gives_identity_transforms() {
        let model = toy_model();
        let rest = regress_joints(&model, model.template_vertices());
        let pose = PoseFrame::identity(NUM_JOINTS);
        for t in forward_kinematics(&rest, &pose, model.parents()) {
            assert_eq!(t, RigidTransform::identity());
        }
    }

    #[test]
    fn fk_root_rotation_rotates_every_joint_about_root() {
        let model = toy_model();
        let rest = regress_joints(&model, model.template_vertices());
        let mut pose = PoseFrame::identity(NUM_JOINTS);
        let omega = Vector3::new(0.3, -1.1, 0.4);
        pose.joint_rotations[PELVIS] = omega;
        let r = axis_angle_to_matrix(&omega);
        let transforms = forward_kinematics(&rest, &pose, model.parents());
        for (j, p) in posed_joints(&rest, &transforms).iter().enumerate() {
            let expected = r * (rest[j] - rest[PELVIS]) + rest[PELVIS];
            assert!((p - expected).norm() < 1e-12, "joint {j}");
        }
    }

    #[test]
    fn fk_two_link_chain_by_hand() {
        // Links of unit length along x; each joint turns 90° about z.
        let rest = vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)];
        let end_rest = Vector3::new(2.0, 0.0, 0.0);
        let quarter = Vector3::new(0.0, 0.0, FRAC_PI_2);
        let pose = PoseFrame {
            root_translation: Vector3::zeros(),
            joint_rotations: vec![quarter, quarter],
        };
        let t = forward_kinematics(&rest, &pose, &chain_parents());
        // Hand composition: joint 1 moves to (0,1,0); the end point is
        // rotated 180° in total about z around the moved elbow → (-1,1,0).
        let elbow = t[1].apply(&rest[1]);
        let end = t[1].apply(&end_rest);
        assert!((elbow - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        assert!((end - Vector3::new(-1.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fk_root_translation_applies_to_all() {
        let rest = vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)];
        let pose = PoseFrame {
            root_translation: Vector3::new(0.5, -1.0, 2.0),
            joint_rotations: vec![Vector3::zeros(); 2],
        };
        let t = forward_kinematics(&rest, &pose, &chain_parents());
        assert_eq!(t[1].apply(&rest[1]), Vector3::new(1.5, -1.0, 2.0));
    }

    #[test]
    fn skin_half_half_blend() {
        let mut parts = toy::toy_parts();
        // Vertex 0 gets weights (0.5, 0.5) on joints 0 and 1.
        let j = parts.parents.len();
        for w in &mut parts.skinning_weights[0..j] {
            *w = 0.0;
        }
        parts.skinning_weights[0] = 0.5;
        parts.skinning_weights[1] = 0.5;
        let model = BodyModel::from_parts(parts).unwrap();
        let mut transforms = vec![RigidTransform::identity(); j];
        transforms[0] = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let rest = model.template_vertices();
        let posed = skin(&model, rest, &transforms);
        assert_eq!(posed[0], rest[0] + Vector3::new(0.5, 0.0, 0.0));
    }

    #[test]
    fn skin_identity_is_exact() {
        let model = toy_model();
        let rest = apply_shape(&model, &ShapeCoefficients::new([0.7; 10]).unwrap());
        let posed = skin(&model, &rest, &vec![RigidTransform::identity(); NUM_JOINTS]);
        assert_eq!(posed, rest);
    }

    #[test]
    fn shape_zero_and_unit() {
        let model = toy_model();
        assert_eq!(
            apply_shape(&model, &ShapeCoefficients::zero()),
            model.template_vertices()
        );
        let mut e1 = [0.0; 10];
        e1[0] = 1.0;
        let shaped = apply_shape(&model, &ShapeCoefficients::new(e1).unwrap());
        for (i, v) in shaped.iter().enumerate() {
            assert_eq!(
                *v,
                model.template_vertices()[i] + model.shape_blendshapes()[0][i]
            );
        }
    }

    #[test]
    fn shape_two_component_matches_elementwise_sum() {
        let model = toy_model();
        let mut beta = [0.0; 10];
        beta[0] = 2.0;
        beta[1] = -1.0;
        let shaped = apply_shape(&model, &ShapeCoefficients::new(beta).unwrap());
        let t = model.template_vertices();
        let s = model.shape_blendshapes();
        for i in 0..model.num_vertices() {
            for c in 0..3 {
                let oracle = t[i][c] + 2.0 * s[0][i][c] - s[1][i][c];
                assert!((shaped[i][c] - oracle).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shape_coefficients_clamp_and_reject() {
        let s =
            ShapeCoefficients::new([9.0, -9.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.values()[0], 5.0);
        assert_eq!(s.values()[1], -5.0);
        let mut bad = [0.0; 10];
        bad[3] = f64::NAN;
        assert_eq!(ShapeCoefficients::new(bad), Err(PoseError::NonFiniteShape));
    }

    #[test]
    fn regress_single_vertex_mass() {
        let mut parts = toy::toy_parts();
        let v = parts.template_vertices.len();
        for w in &mut parts.joint_regressor[0..v] {
            *w = 0.0;
        }
        parts.joint_regressor[17] = 1.0;
        let model = BodyModel::from_parts(parts).unwrap();
        let joints = regress_joints(&model, model.template_vertices());
        assert_eq!(joints[0], model.template_vertices()[17]);
    }

    #[test]
    fn toy_joints_match_hand_skeleton() {
        let model = toy_model();
        let joints = regress_joints(&model, model.template_vertices());
        for (j, (got, want)) in joints.iter().zip(toy_skeleton().iter()).enumerate() {
            assert!((got - want).norm() < 1e-9, "joint {j}: {got:?} vs {want:?}");
        }
    }

    #[test]
    fn pose_validation() {
        let mut rots = vec![Vector3::zeros(); 24];
        rots[3] = Vector3::new(7.0, 0.0, 0.0);
        assert!(matches!(
            PoseFrame::new(Vector3::zeros(), rots.clone()),
            Err(PoseError::RotationTooLarge { joint: 3, .. })
        ));
        rots[3] = Vector3::new(f64::NAN, 0.0, 0.0);
        assert_eq!(
            PoseFrame::new(Vector3::zeros(), rots),
            Err(PoseError::NonFinite)
        );
    }

    #[test]
    fn validation_rejects_bad_structures() {
        let mut parts = toy::toy_parts();
        parts.parents[5] = Some(40);
        assert_eq!(
            BodyModel::from_parts(parts).unwrap_err(),
            ModelError::ParentOutOfRange { joint: 5 }
        );

        let mut parts = toy::toy_parts();
        parts.parents[0] = Some(3);
        assert!(matches!(
            BodyModel::from_parts(parts).unwrap_err(),
            ModelError::RootCount(0)
        ));

        let mut parts = toy::toy_parts();
        parts.faces[2][1] = 100_000;
        assert!(matches!(
            BodyModel::from_parts(parts).unwrap_err(),
            ModelError::FaceIndexOutOfRange { face: 2, .. }
        ));

        let mut parts = toy::toy_parts();
        for l in parts.part_labels.iter_mut() {
            if *l == part::HAND_L {
                *l = part::HAND_R;
            }
        }
        assert_eq!(
            BodyModel::from_parts(parts).unwrap_err(),
            ModelError::MissingPartLabel(part::HAND_L)
        );

        let mut parts = toy::toy_parts();
        let j = parts.parents.len();
        for w in &mut parts.skinning_weights[3 * j..4 * j] {
            *w *= 0.5;
        }
        let err = BodyModel::from_parts(parts).unwrap_err();
        assert!(err
            .to_string()
            .contains("skinning weights row not normalized"));
    }

    #[test]
    fn cycle_detected() {
        // 0 is root; 1 and 2 point at each other and are unreachable.
        let parents = vec![None, Some(2), Some(1)];
        assert_eq!(kinematic_order(&parents), Err(ModelError::Cycle(1)));
    }

    #[test]
    fn face_labels_majority_and_ties() {
        let model = toy_model();
        let labels = model.face_part_labels();
        assert_eq!(labels.len(), model.faces().len());
        assert!(labels.iter().all(|l| (1..=14).contains(l)));
    }

    #[test]
    fn pose_correctives_default_off_and_hook_applies() {
        let mut parts = toy::toy_parts();
        let v = parts.template_vertices.len();
        let mut shapes = vec![vec![Vector3::zeros(); v]; 9 * (NUM_JOINTS - 1)];
        shapes[0][0] = Vector3::new(1.0, 0.0, 0.0);
        parts.pose_blendshapes = Some(shapes);
        let model = BodyModel::from_parts(parts).unwrap();
        let rest = model.template_vertices().to_vec();
        let joints = regress_joints(&model, &rest);
        let mut pose = PoseFrame::identity(NUM_JOINTS);
        pose.joint_rotations[1] = Vector3::new(0.0, 0.0, FRAC_PI_2);
        let plain = pose_body(&model, &rest, &joints, &pose, PosingOptions::default());
        let corrected = pose_body(
            &model,
            &rest,
            &joints,
            &pose,
            PosingOptions {
                pose_correctives: true,
            },
        );
        assert_eq!(plain.vertices[1..], corrected.vertices[1..]);
        assert_ne!(plain.vertices[0], corrected.vertices[0]);
    }
}
