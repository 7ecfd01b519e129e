//! Per-clip directories.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, GrayImage, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use super::{frame_file, io_err, raw, ClipRecord, DatasetError, PASS_SUFFIXES, SCENE_FILE};
use crate::body_model::NUM_PARTS;
use crate::camera::Camera;
use crate::ground_truth::{DepthQuantization, JointAnnotation};
use crate::raster::Raster;
use crate::renderer::FramePasses;

/// Per-frame metadata kept in `scene.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub frame_index: u32,
    pub flow_valid: bool,
    /// Pass file names, in [`PASS_SUFFIXES`] order.
    pub files: Vec<String>,
    #[serde(flatten)]
    pub joints: JointAnnotation,
}

/// Contents of `scene.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipDocument {
    pub version: String,
    pub record: ClipRecord,
    pub camera: Camera,
    pub quantization: DepthQuantization,
    pub frames: Vec<FrameMeta>,
}

impl ClipDocument {
    pub fn width(&self) -> u32 {
        self.camera.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.camera.intrinsics.height
    }
}

/// Streams frames into a hidden temporary directory next to the final
/// location and renames it into place on [`ClipWriter::finish`]. Dropping
/// an unfinished writer removes the partial clip.
pub struct ClipWriter {
    final_dir: PathBuf,
    tmp: TempDir,
    doc: ClipDocument,
    overwrite: bool,
}

impl ClipWriter {
    pub fn create(
        root: &Path,
        record: ClipRecord,
        camera: Camera,
        quantization: DepthQuantization,
        overwrite: bool,
    ) -> Result<Self, DatasetError> {
        let parent = root.join(&record.id.subject_id);
        let final_dir = parent.join(record.id.dir_name());
        if final_dir.exists() && !overwrite {
            return Err(DatasetError::AlreadyExists(final_dir));
        }
        fs::create_dir_all(&parent).map_err(io_err(&parent))?;
        let tmp = tempfile::Builder::new()
            .prefix(".partial-")
            .tempdir_in(&parent)
            .map_err(io_err(&parent))?;
        Ok(Self {
            final_dir,
            tmp,
            doc: ClipDocument {
                version: super::GENERATOR_VERSION.to_string(),
                record,
                camera,
                quantization,
                frames: Vec::new(),
            },
            overwrite,
        })
    }

    /// Frames must arrive in order.
    pub fn write_frame(&mut self, f: &FramePasses) -> Result<(), DatasetError> {
        let t = self.doc.frames.len();
        let (w, h) = (self.doc.width(), self.doc.height());
        if f.frame_index as usize != t || f.width() != w || f.height() != h {
            return Err(DatasetError::Metadata {
                path: self.final_dir.clone(),
                message: format!(
                    "expected frame {t} at {w}x{h}, got frame {} at {}x{}",
                    f.frame_index,
                    f.width(),
                    f.height()
                ),
            });
        }
        let files: Vec<String> = PASS_SUFFIXES.iter().map(|s| frame_file(t, s)).collect();
        let dir = self.tmp.path();
        let gray = |r: &Raster<u8>| {
            GrayImage::from_raw(r.width(), r.height(), r.data().to_vec()).expect("sized raster")
        };
        write_png(
            &dir.join(&files[0]),
            &DynamicImage::ImageRgb8(f.rgb.clone()),
        )?;
        write_png(
            &dir.join(&files[1]),
            &DynamicImage::ImageLuma8(gray(&f.segm)),
        )?;
        write_png(
            &dir.join(&files[2]),
            &DynamicImage::ImageLuma8(gray(&f.depth_labels)),
        )?;
        for (name, raster) in files[3..].iter().zip([&f.depth_m, &f.normals, &f.flow]) {
            let path = dir.join(name);
            fs::write(&path, raw::encode(raster, f.frame_index)).map_err(io_err(&path))?;
        }
        self.doc.frames.push(FrameMeta {
            frame_index: f.frame_index,
            flow_valid: f.flow_valid,
            files,
            joints: f.joints.clone(),
        });
        Ok(())
    }

    /// Writes `scene.json` and moves the clip into place.
    pub fn finish(self) -> Result<PathBuf, DatasetError> {
        if self.doc.frames.len() != self.doc.record.frame_count {
            return Err(DatasetError::Metadata {
                path: self.final_dir,
                message: format!(
                    "{} frames written, record says {}",
                    self.doc.frames.len(),
                    self.doc.record.frame_count
                ),
            });
        }
        let scene_path = self.tmp.path().join(SCENE_FILE);
        let mut json = serde_json::to_vec_pretty(&self.doc).expect("scene document serializes");
        json.push(b'\n');
        fs::write(&scene_path, json).map_err(io_err(&scene_path))?;

        if self.final_dir.exists() {
            if !self.overwrite {
                return Err(DatasetError::AlreadyExists(self.final_dir));
            }
            fs::remove_dir_all(&self.final_dir).map_err(io_err(&self.final_dir))?;
        }
        let staged = self.tmp.keep();
        fs::rename(&staged, &self.final_dir).map_err(|source| {
            let _ = fs::remove_dir_all(&staged);
            DatasetError::Io {
                path: self.final_dir.clone(),
                source,
            }
        })?;
        Ok(self.final_dir)
    }
}

fn write_png(path: &Path, img: &DynamicImage) -> Result<(), DatasetError> {
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), ImageFormat::Png)
        .map_err(|e| DatasetError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
    fs::write(path, bytes).map_err(io_err(path))
}

/// Writes a whole clip at once.
pub fn write_clip(
    root: &Path,
    record: ClipRecord,
    camera: Camera,
    quantization: DepthQuantization,
    frames: &[FramePasses],
    overwrite: bool,
) -> Result<PathBuf, DatasetError> {
    let mut w = ClipWriter::create(root, record, camera, quantization, overwrite)?;
    for f in frames {
        w.write_frame(f)?;
    }
    w.finish()
}

pub fn read_clip_document(dir: &Path) -> Result<ClipDocument, DatasetError> {
    let path = dir.join(SCENE_FILE);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let doc: ClipDocument = serde_json::from_slice(&bytes).map_err(|e| DatasetError::Metadata {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if doc.frames.len() != doc.record.frame_count {
        return Err(DatasetError::Metadata {
            path,
            message: format!(
                "{} frame entries, frame_count {}",
                doc.frames.len(),
                doc.record.frame_count
            ),
        });
    }
    Ok(doc)
}

fn read_png(path: &Path, color: ColorType, dims: (u32, u32)) -> Result<DynamicImage, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png).map_err(|e| {
        DatasetError::CorruptRaster {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
    })?;
    let channels = color.channel_count() as u32;
    let got = (
        img.width(),
        img.height(),
        img.color().channel_count() as u32,
    );
    if img.color() != color || (got.0, got.1) != dims {
        return Err(DatasetError::DimensionMismatch {
            path: path.to_path_buf(),
            expected: (dims.0, dims.1, channels),
            got,
        });
    }
    Ok(img)
}

fn read_labels(path: &Path, dims: (u32, u32), max: u8) -> Result<Raster<u8>, DatasetError> {
    let img = read_png(path, ColorType::L8, dims)?.into_luma8();
    if let Some(&value) = img.as_raw().iter().find(|&&v| v > max) {
        return Err(DatasetError::InvalidLabel {
            path: path.to_path_buf(),
            value,
        });
    }
    Ok(Raster::from_vec(dims.0, dims.1, 1, img.into_raw()).expect("checked dimensions"))
}

fn read_raw(
    path: &Path,
    dims: (u32, u32),
    channels: u32,
    frame: u32,
) -> Result<Raster<f32>, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let corrupt = |reason: String| DatasetError::CorruptRaster {
        path: path.to_path_buf(),
        reason,
    };
    let (header, raster) = raw::decode(&bytes).map_err(corrupt)?;
    let got = (header.width, header.height, header.channels);
    if got != (dims.0, dims.1, channels) {
        return Err(DatasetError::DimensionMismatch {
            path: path.to_path_buf(),
            expected: (dims.0, dims.1, channels),
            got,
        });
    }
    if header.frame_index != frame {
        return Err(corrupt(format!(
            "frame index {} in header, expected {frame}",
            header.frame_index
        )));
    }
    Ok(raster)
}

/// Loads and validates frame `t` of a clip.
pub fn read_frame(dir: &Path, doc: &ClipDocument, t: usize) -> Result<FramePasses, DatasetError> {
    let meta = doc.frames.get(t).ok_or(DatasetError::MissingFrame {
        frame: t,
        count: doc.frames.len(),
    })?;
    if meta.files.len() != PASS_SUFFIXES.len() {
        return Err(DatasetError::Metadata {
            path: dir.join(SCENE_FILE),
            message: format!("frame {t} lists {} files", meta.files.len()),
        });
    }
    let dims = (doc.width(), doc.height());
    let file = |i: usize| dir.join(&meta.files[i]);
    let rgb: RgbImage = read_png(&file(0), ColorType::Rgb8, dims)?.into_rgb8();
    let segm = read_labels(&file(1), dims, NUM_PARTS)?;
    let depth_labels = read_labels(&file(2), dims, doc.quantization.n_bins)?;
    let idx = meta.frame_index;
    Ok(FramePasses {
        frame_index: idx,
        rgb,
        depth_m: read_raw(&file(3), dims, 1, idx)?,
        segm,
        normals: read_raw(&file(4), dims, 3, idx)?,
        flow: read_raw(&file(5), dims, 2, idx)?,
        flow_valid: meta.flow_valid,
        joints: meta.joints.clone(),
        depth_labels,
    })
}

pub fn read_clip(dir: &Path) -> Result<(ClipDocument, Vec<FramePasses>), DatasetError> {
    let doc = read_clip_document(dir)?;
    let frames = (0..doc.frames.len())
        .map(|t| read_frame(dir, &doc, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((doc, frames))
}
