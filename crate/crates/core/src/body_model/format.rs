//! JSON container for body models.
//!
//! Float arrays are base64-encoded little-endian `f32`, flattened row-major.
//! Integer arrays are plain JSON. Field layout:
//!
//! | field                | encoding | shape            |
//! |----------------------|----------|------------------|
//! | `template_vertices`  | f32 b64  | V × 3            |
//! | `faces`              | int      | F × [3]          |
//! | `shape_blendshapes`  | f32 b64  | K × V × 3 (K=10) |
//! | `joint_regressor`    | f32 b64  | J × V            |
//! | `skinning_weights`   | f32 b64  | V × J            |
//! | `kinematic_parents`  | int      | J (root = -1)    |
//! | `part_labels`        | int      | V, values 1..=14 |
//! | `uv_coords`          | f32 b64  | V × 2            |
//! | `pose_blendshapes`   | f32 b64  | 9(J−1) × V × 3, optional |

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{BodyModel, BodyModelParts, ModelError, NUM_SHAPE_COMPONENTS};

pub const MODEL_FORMAT_VERSION: &str = "sh-forge-model/1";

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: String,
    num_vertices: usize,
    num_joints: usize,
    num_shape_components: usize,
    template_vertices: String,
    faces: Vec<[i64; 3]>,
    shape_blendshapes: String,
    joint_regressor: String,
    skinning_weights: String,
    kinematic_parents: Vec<i64>,
    part_labels: Vec<i64>,
    uv_coords: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose_blendshapes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joint_names: Option<Vec<String>>,
}

fn encode_f32(values: impl Iterator<Item = f64>) -> String {
    let bytes: Vec<u8> = values.flat_map(|v| (v as f32).to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode_f32(field: &'static str, text: &str, expected: usize) -> Result<Vec<f64>, ModelError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| ModelError::Malformed(format!("{field}: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(ModelError::Malformed(format!(
            "{field}: byte length {} not a multiple of 4",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if values.len() != expected {
        return Err(ModelError::SizeMismatch {
            field,
            expected,
            got: values.len(),
        });
    }
    Ok(values)
}

fn to_points(values: &[f64]) -> Vec<Vector3<f64>> {
    values
        .chunks_exact(3)
        .map(|c| Vector3::new(c[0], c[1], c[2]))
        .collect()
}

fn flatten(points: &[Vector3<f64>]) -> impl Iterator<Item = f64> + '_ {
    points.iter().flat_map(|p| p.iter().copied())
}

/// Parses and validates a model document.
pub fn load_model(source: &[u8]) -> Result<BodyModel, ModelError> {
    let doc: ModelDocument =
        serde_json::from_slice(source).map_err(|e| ModelError::Malformed(e.to_string()))?;
    if doc.version != MODEL_FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(doc.version));
    }
    let (v, j, k) = (doc.num_vertices, doc.num_joints, doc.num_shape_components);
    if k != NUM_SHAPE_COMPONENTS {
        return Err(ModelError::SizeMismatch {
            field: "num_shape_components",
            expected: NUM_SHAPE_COMPONENTS,
            got: k,
        });
    }

    let template = decode_f32("template_vertices", &doc.template_vertices, v * 3)?;
    let shapes = decode_f32("shape_blendshapes", &doc.shape_blendshapes, k * v * 3)?;
    let regressor = decode_f32("joint_regressor", &doc.joint_regressor, j * v)?;
    let skinning = decode_f32("skinning_weights", &doc.skinning_weights, v * j)?;
    let uv = decode_f32("uv_coords", &doc.uv_coords, v * 2)?;
    let pose_blendshapes = match &doc.pose_blendshapes {
        Some(text) if j > 0 => {
            let n = 9 * (j - 1);
            let values = decode_f32("pose_blendshapes", text, n * v * 3)?;
            Some(values.chunks_exact(v * 3).map(to_points).collect())
        }
        _ => None,
    };

    if doc.kinematic_parents.len() != j {
        return Err(ModelError::SizeMismatch {
            field: "kinematic_parents",
            expected: j,
            got: doc.kinematic_parents.len(),
        });
    }
    let parents = doc
        .kinematic_parents
        .iter()
        .enumerate()
        .map(|(joint, &p)| match p {
            -1 => Ok(None),
            p if p >= 0 && (p as usize) < j => Ok(Some(p as usize)),
            _ => Err(ModelError::ParentOutOfRange { joint }),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let faces = doc
        .faces
        .iter()
        .enumerate()
        .map(|(face, f)| {
            let mut out = [0u32; 3];
            for (slot, &i) in out.iter_mut().zip(f) {
                if i < 0 || i as usize >= v {
                    return Err(ModelError::FaceIndexOutOfRange {
                        face,
                        index: i.max(0) as usize,
                    });
                }
                *slot = i as u32;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let part_labels = doc
        .part_labels
        .iter()
        .enumerate()
        .map(|(vertex, &l)| {
            u8::try_from(l)
                .ok()
                .filter(|l| (1..=super::NUM_PARTS).contains(l))
                .ok_or(ModelError::PartLabelOutOfRange { vertex, label: l })
        })
        .collect::<Result<Vec<_>, _>>()?;

    BodyModel::from_parts(BodyModelParts {
        template_vertices: to_points(&template),
        faces,
        shape_blendshapes: shapes.chunks_exact(v * 3).map(to_points).collect(),
        joint_regressor: regressor,
        skinning_weights: skinning,
        parents,
        part_labels,
        uv_coords: uv.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        pose_blendshapes,
    })
}

/// Serializes a model. Floats are narrowed to `f32`.
pub fn save_model(model: &BodyModel) -> Vec<u8> {
    let p = model.parts();
    let doc = ModelDocument {
        version: MODEL_FORMAT_VERSION.to_string(),
        num_vertices: model.num_vertices(),
        num_joints: model.num_joints(),
        num_shape_components: p.shape_blendshapes.len(),
        template_vertices: encode_f32(flatten(&p.template_vertices)),
        faces: p.faces.iter().map(|f| f.map(i64::from)).collect(),
        shape_blendshapes: encode_f32(p.shape_blendshapes.iter().flat_map(|s| flatten(s))),
        joint_regressor: encode_f32(p.joint_regressor.iter().copied()),
        skinning_weights: encode_f32(p.skinning_weights.iter().copied()),
        kinematic_parents: p
            .parents
            .iter()
            .map(|p| p.map_or(-1, |i| i as i64))
            .collect(),
        part_labels: p.part_labels.iter().map(|&l| l as i64).collect(),
        uv_coords: encode_f32(p.uv_coords.iter().flat_map(|uv| uv.iter().copied())),
        pose_blendshapes: p
            .pose_blendshapes
            .as_ref()
            .map(|shapes| encode_f32(shapes.iter().flat_map(|s| flatten(s)))),
        joint_names: (model.num_joints() == super::NUM_JOINTS)
            .then(|| super::JOINT_NAMES.iter().map(|s| s.to_string()).collect()),
    };
    serde_json::to_vec_pretty(&doc).expect("model document serializes")
}
