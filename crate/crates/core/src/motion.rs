//! Pose sequences and their division into fixed-length clips.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body_model::{PoseError, PoseFrame, NUM_JOINTS};

pub const MOTION_FORMAT_VERSION: &str = "sh-forge-motion/1";

/// Nominal clip length in frames.
pub const CLIP_LENGTH: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("malformed motion: {0}")]
    Malformed(String),
    #[error("unsupported motion version {0:?}")]
    UnsupportedVersion(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("non-finite pose at frame {0}")]
    NonFinitePose(usize),
    #[error("frame {frame}: {source}")]
    InvalidPose { frame: usize, source: PoseError },
    #[error("frame {frame} has {got} values, expected {expected}")]
    FrameWidth {
        frame: usize,
        expected: usize,
        got: usize,
    },
    #[error("fps must be positive, got {0}")]
    InvalidFps(f64),
}

/// Overlap between consecutive clips of one rendering of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Overlap {
    P30,
    P50,
    P70,
}

impl Overlap {
    /// The three renderings of every sequence, in rendering order.
    pub const ALL: [Overlap; 3] = [Overlap::P30, Overlap::P50, Overlap::P70];

    pub fn percent(self) -> u32 {
        match self {
            Overlap::P30 => 30,
            Overlap::P50 => 50,
            Overlap::P70 => 70,
        }
    }

    pub fn fraction(self) -> f64 {
        self.percent() as f64 / 100.0
    }

    /// Frame step between clip starts: `round_half_up(clip_len · (1 − overlap))`.
    pub fn stride(self, clip_len: usize) -> usize {
        let keep = 100 - self.percent() as usize;
        ((clip_len * keep + 50) / 100).max(1)
    }
}

impl TryFrom<u32> for Overlap {
    type Error = String;
    fn try_from(percent: u32) -> Result<Self, String> {
        match percent {
            30 => Ok(Overlap::P30),
            50 => Ok(Overlap::P50),
            70 => Ok(Overlap::P70),
            other => Err(format!("unsupported overlap {other}%")),
        }
    }
}

impl From<Overlap> for u32 {
    fn from(o: Overlap) -> u32 {
        o.percent()
    }
}

impl FromStr for Overlap {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "0.3" | "30" => Ok(Overlap::P30),
            "0.5" | "50" => Ok(Overlap::P50),
            "0.7" | "70" => Ok(Overlap::P70),
            other => Err(format!(
                "unsupported overlap {other:?}; use 0.3, 0.5 or 0.7"
            )),
        }
    }
}

impl fmt::Display for Overlap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0.{}", self.percent() / 10)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub subject_id: String,
    pub sequence_id: String,
    pub fps: f64,
    pub frames: Vec<PoseFrame>,
    /// Optional action labels (e.g. "walk"), used by the splitter.
    pub action_tags: Vec<String>,
}

impl MotionSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn num_joints(&self) -> usize {
        self.frames.first().map_or(0, |f| f.joint_rotations.len())
    }
}

#[derive(Serialize, Deserialize)]
struct MotionDocument {
    version: String,
    subject_id: String,
    sequence_id: String,
    fps: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    action_tags: Vec<String>,
    /// `null` marks a non-finite value (see [`nonfinite_literals_to_null`]).
    frames: Vec<Vec<Option<f64>>>,
}

/// Rewrites the bare `NaN`, `Infinity` and `-Infinity` tokens that
/// Python-style JSON writers emit into `null`, leaving string contents alone.
fn nonfinite_literals_to_null(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
        } else if c == '"' {
            in_string = true;
        } else {
            let token = ["-Infinity", "Infinity", "NaN"]
                .into_iter()
                .find(|t| rest.starts_with(t));
            if let Some(token) = token {
                out.push_str("null");
                rest = &rest[token.len()..];
                continue;
            }
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

/// Parses a motion document. Each frame row is
/// `[tx, ty, tz, then 3 axis-angle values per joint]`.
pub fn load_motion(source: &[u8]) -> Result<MotionSequence, MotionError> {
    let text = std::str::from_utf8(source).map_err(|e| MotionError::Malformed(e.to_string()))?;
    let doc: MotionDocument = serde_json::from_str(&nonfinite_literals_to_null(text))
        .map_err(|e| MotionError::Malformed(e.to_string()))?;
    if doc.version != MOTION_FORMAT_VERSION {
        return Err(MotionError::UnsupportedVersion(doc.version));
    }
    if !(doc.fps.is_finite() && doc.fps > 0.0) {
        return Err(MotionError::InvalidFps(doc.fps));
    }
    let Some(first) = doc.frames.first() else {
        return Err(MotionError::EmptySequence);
    };
    let width = first.len();
    if width < 6 || (width - 3) % 3 != 0 {
        return Err(MotionError::FrameWidth {
            frame: 0,
            expected: 3 + 3 * NUM_JOINTS,
            got: width,
        });
    }
    let frames = doc
        .frames
        .iter()
        .enumerate()
        .map(|(frame, row)| {
            if row.len() != width {
                return Err(MotionError::FrameWidth {
                    frame,
                    expected: width,
                    got: row.len(),
                });
            }
            let Some(row) = row
                .iter()
                .map(|v| v.filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
            else {
                return Err(MotionError::NonFinitePose(frame));
            };
            let rotations = row[3..]
                .chunks_exact(3)
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect();
            PoseFrame::new(Vector3::new(row[0], row[1], row[2]), rotations)
                .map_err(|source| MotionError::InvalidPose { frame, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MotionSequence {
        subject_id: doc.subject_id,
        sequence_id: doc.sequence_id,
        fps: doc.fps,
        frames,
        action_tags: doc.action_tags,
    })
}

pub fn save_motion(seq: &MotionSequence) -> Vec<u8> {
    let doc = MotionDocument {
        version: MOTION_FORMAT_VERSION.to_string(),
        subject_id: seq.subject_id.clone(),
        sequence_id: seq.sequence_id.clone(),
        fps: seq.fps,
        action_tags: seq.action_tags.clone(),
        frames: seq
            .frames
            .iter()
            .map(|f| {
                f.root_translation
                    .iter()
                    .chain(f.joint_rotations.iter().flat_map(|r| r.iter()))
                    .map(|&v| Some(v))
                    .collect()
            })
            .collect(),
    };
    serde_json::to_vec(&doc).expect("motion document serializes")
}

/// Per-joint rotation amplitude (radians) for procedural motion.
fn joint_amplitude(joint: usize) -> f64 {
    match joint {
        0 => 0.12,
        3 | 6 | 9 | 12 | 15 => 0.15,
        13 | 14 => 0.1,
        10 | 11 | 22 | 23 => 0.1,
        _ => 0.45,
    }
}

const FILTER_ALPHA: f64 = 0.92;
// Restores roughly unit spread after the first smoothing stage.
const FILTER_GAIN: f64 = 4.9;
const FILTER_WARMUP: usize = 60;

/// Smooth random trajectory: every rotation channel is white noise passed
/// through two exponential low-pass stages. Deterministic in `seed`.
pub fn generate_test_motion(seed: u64, n_frames: usize) -> MotionSequence {
    assert!(n_frames >= 1, "at least one frame");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = 3 * NUM_JOINTS;
    let heading: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let speed: f64 = rng.random_range(0.0..0.4);
    let direction: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let fps = 30.0;

    let mut stage1 = vec![0.0f64; channels];
    let mut stage2 = vec![0.0f64; channels];
    let step = |rng: &mut ChaCha8Rng, stage1: &mut [f64], stage2: &mut [f64]| {
        for c in 0..channels {
            let noise: f64 = rng.sample(StandardNormal);
            stage1[c] = FILTER_ALPHA * stage1[c] + (1.0 - FILTER_ALPHA) * noise;
            stage2[c] = FILTER_ALPHA * stage2[c] + (1.0 - FILTER_ALPHA) * stage1[c] * FILTER_GAIN;
        }
    };
    for _ in 0..FILTER_WARMUP {
        step(&mut rng, &mut stage1, &mut stage2);
    }

    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        step(&mut rng, &mut stage1, &mut stage2);
        let time = t as f64 / fps;
        let rotations = (0..NUM_JOINTS)
            .map(|j| {
                let amp = joint_amplitude(j);
                let mut r = Vector3::new(
                    stage2[3 * j] * amp,
                    stage2[3 * j + 1] * amp,
                    stage2[3 * j + 2] * amp,
                )
                .map(|v| v.clamp(-1.2, 1.2));
                if j == 0 {
                    r.y += heading;
                }
                r
            })
            .collect();
        let root = Vector3::new(
            speed * time * direction.cos(),
            0.02 * (2.0 * std::f64::consts::PI * 1.5 * time).sin(),
            speed * time * direction.sin(),
        );
        frames.push(PoseFrame::new(root, rotations).expect("bounded procedural pose"));
    }

    MotionSequence {
        subject_id: format!("toy{:02}", seed % 100),
        sequence_id: format!("seq{seed}"),
        fps,
        frames,
        action_tags: Vec::new(),
    }
}

/// A window of one sequence rendered with a single scene configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clip {
    pub subject_id: String,
    pub sequence_id: String,
    pub overlap: Overlap,
    /// Position of the clip within its (sequence, overlap) rendering.
    pub clip_index: usize,
    pub start_frame: usize,
    pub length: usize,
}

impl Clip {
    pub fn frame_range(&self) -> std::ops::Range<usize> {
        self.start_frame..self.start_frame + self.length
    }
}

/// `(start, length)` windows: starts at multiples of the stride while below
/// `n`, each truncated at the end of the sequence. A sequence that fits in
/// one clip gives exactly one window.
pub fn clip_windows(n: usize, clip_len: usize, overlap: Overlap) -> Vec<(usize, usize)> {
    assert!(clip_len >= 1);
    if n == 0 {
        return Vec::new();
    }
    if n <= clip_len {
        return vec![(0, n)];
    }
    let stride = overlap.stride(clip_len);
    (0..n)
        .step_by(stride)
        .map(|start| (start, clip_len.min(n - start)))
        .collect()
}

pub fn chunk_clips(seq: &MotionSequence, clip_len: usize, overlap: Overlap) -> Vec<Clip> {
    clip_windows(seq.len(), clip_len, overlap)
        .into_iter()
        .enumerate()
        .map(|(clip_index, (start_frame, length))| Clip {
            subject_id: seq.subject_id.clone(),
            sequence_id: seq.sequence_id.clone(),
            overlap,
            clip_index,
            start_frame,
            length,
        })
        .collect()
}
