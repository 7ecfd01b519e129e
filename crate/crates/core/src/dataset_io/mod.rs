//! On-disk dataset layout: per-clip directories of pass files, a
//! `scene.json` per clip and a `manifest.json` at the root.
//!
//! ```text
//! <root>/manifest.json
//! <root>/<subject>/<sequence>_o<pct>_c<index>/scene.json
//!                                           /f0000_rgb.png
//!                                           /f0000_segm.png
//!                                           /f0000_depth_labels.png
//!                                           /f0000_depth.shf
//!                                           /f0000_normals.shf
//!                                           /f0000_flow.shf
//! ```

mod clip;
pub mod raw;
mod stats;

pub use clip::{
    read_clip, read_clip_document, read_frame, write_clip, ClipDocument, ClipWriter, FrameMeta,
};
pub use stats::{
    dataset_stats, format_table, reference_rows, StatsRow, StatsTable, REFERENCE_TABLE,
};

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::Overlap;
use crate::scene_sampler::{AssetCatalog, SceneConfig};
use crate::splitter::SplitAssignment;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCENE_FILE: &str = "scene.json";
pub const GENERATOR_VERSION: &str = concat!("shforge/", env!("CARGO_PKG_VERSION"));

/// Pass file suffixes, in write order.
pub const PASS_SUFFIXES: [&str; 6] = [
    "rgb.png",
    "segm.png",
    "depth_labels.png",
    "depth.shf",
    "normals.shf",
    "flow.shf",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("clip directory {0} already exists")]
    AlreadyExists(PathBuf),
    #[error("corrupt raster {path}: {reason}")]
    CorruptRaster { path: PathBuf, reason: String },
    #[error("invalid label {value} in {path}")]
    InvalidLabel { path: PathBuf, value: u8 },
    #[error("dimension mismatch in {path}: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        path: PathBuf,
        expected: (u32, u32, u32),
        got: (u32, u32, u32),
    },
    #[error("invalid metadata {path}: {message}")]
    Metadata { path: PathBuf, message: String },
    #[error("frame {frame} not in clip of {count} frames")]
    MissingFrame { frame: usize, count: usize },
    #[error("duplicate clip {0}")]
    DuplicateClip(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Identity of a clip within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClipId {
    pub subject_id: String,
    pub sequence_id: String,
    pub overlap: Overlap,
    pub clip_index: usize,
}

impl ClipId {
    pub fn dir_name(&self) -> String {
        format!(
            "{}_o{}_c{:04}",
            self.sequence_id,
            self.overlap.percent(),
            self.clip_index
        )
    }

    /// Path relative to the dataset root, always `/`-separated.
    pub fn relative_path(&self) -> String {
        format!("{}/{}", self.subject_id, self.dir_name())
    }
}

impl std::fmt::Display for ClipId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.relative_path())
    }
}

/// Manifest entry for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    #[serde(flatten)]
    pub id: ClipId,
    /// First source frame of the clip in its motion sequence.
    pub start_frame: usize,
    pub frame_count: usize,
    pub scene: SceneConfig,
    #[serde(default)]
    pub action_tags: Vec<String>,
}

pub fn frame_file(frame: usize, suffix: &str) -> String {
    format!("f{frame:04}_{suffix}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub master_seed: u64,
    pub width: u32,
    pub height: u32,
    /// Banks the clips' asset ids refer to.
    #[serde(default)]
    pub assets: AssetCatalog,
    pub clips: Vec<ClipRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitAssignment>,
}

impl DatasetManifest {
    pub fn new(master_seed: u64, width: u32, height: u32) -> Self {
        Self {
            version: GENERATOR_VERSION.to_string(),
            master_seed,
            width,
            height,
            assets: AssetCatalog::default(),
            clips: Vec::new(),
            split: None,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for c in &self.clips {
            if !seen.insert(&c.id) {
                return Err(DatasetError::DuplicateClip(c.id.to_string()));
            }
        }
        Ok(())
    }

    pub fn clip_dir(&self, root: &Path, clip: &ClipRecord) -> PathBuf {
        root.join(&clip.id.subject_id).join(clip.id.dir_name())
    }
}

pub fn read_manifest(root: &Path) -> Result<DatasetManifest, DatasetError> {
    let path = root.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let manifest: DatasetManifest =
        serde_json::from_slice(&bytes).map_err(|e| DatasetError::Metadata {
            path: path.clone(),
            message: e.to_string(),
        })?;
    manifest.validate()?;
    Ok(manifest)
}

/// Replaces `manifest.json` atomically.
pub fn write_manifest(root: &Path, manifest: &DatasetManifest) -> Result<(), DatasetError> {
    manifest.validate()?;
    fs::create_dir_all(root).map_err(io_err(root))?;
    let path = root.join(MANIFEST_FILE);
    let mut json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    json.push(b'\n');
    write_atomic(&path, &json)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}
