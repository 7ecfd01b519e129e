//! Dataset generation: clip planning, per-clip scene sampling and parallel
//! rendering into a dataset directory.

use std::path::Path;

use log::{debug, info};
use rayon::prelude::*;
use thiserror::Error;

use crate::body_model::{BodyModel, PosingOptions};
use crate::camera::CameraIntrinsics;
use crate::dataset_io::{
    write_manifest, ClipId, ClipRecord, ClipWriter, DatasetError, DatasetManifest,
};
use crate::ground_truth::DepthQuantization;
use crate::motion::{
    chunk_clips, generate_test_motion, Clip, MotionSequence, Overlap, CLIP_LENGTH,
};
use crate::renderer::{ClipRenderer, RenderError, RenderSettings};
use crate::scene_sampler::{sample_scene_from_pool, AssetBanks, AssetCatalog, AssetPool};
use crate::splitter::{assign_split_units, Split, SplitError, SplitUnit};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("no motion sequences given")]
    NoMotions,
    #[error("duplicate motion sequence {subject}/{sequence}")]
    DuplicateSequence { subject: String, sequence: String },
    #[error("worker pool: {0}")]
    Workers(String),
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub master_seed: u64,
    pub overlaps: Vec<Overlap>,
    pub clip_len: usize,
    pub intrinsics: CameraIntrinsics,
    /// Keep only the first `n` clips of the sorted plan.
    pub max_clips: Option<usize>,
    /// Draw textures only from the first `n` ids of each pool.
    pub max_clothing: Option<usize>,
    /// Split subjects before rendering and restrict each side to its own
    /// assets.
    pub test_fraction: Option<f64>,
    pub workers: usize,
    pub overwrite: bool,
    pub posing: PosingOptions,
    pub quantization: DepthQuantization,
}

impl GenerateOptions {
    pub fn new(master_seed: u64, intrinsics: CameraIntrinsics) -> Self {
        Self {
            master_seed,
            overlaps: Overlap::ALL.to_vec(),
            clip_len: CLIP_LENGTH,
            intrinsics,
            max_clips: None,
            max_clothing: None,
            test_fraction: None,
            workers: 1,
            overwrite: false,
            posing: PosingOptions::default(),
            quantization: DepthQuantization::default(),
        }
    }
}

/// A clip of the plan and the motion it comes from.
#[derive(Debug, Clone)]
pub struct PlannedClip {
    pub motion: usize,
    pub clip: Clip,
}

/// Every clip of every sequence and overlap, ordered by subject, sequence,
/// overlap and clip index. A clip's position in this list is its global
/// index and seeds its scene.
pub fn plan_clips(
    motions: &[MotionSequence],
    overlaps: &[Overlap],
    clip_len: usize,
) -> Result<Vec<PlannedClip>, GenerateError> {
    let mut order: Vec<usize> = (0..motions.len()).collect();
    order.sort_by(|&a, &b| {
        (&motions[a].subject_id, &motions[a].sequence_id)
            .cmp(&(&motions[b].subject_id, &motions[b].sequence_id))
    });
    for w in order.windows(2) {
        let (a, b) = (&motions[w[0]], &motions[w[1]]);
        if a.subject_id == b.subject_id && a.sequence_id == b.sequence_id {
            return Err(GenerateError::DuplicateSequence {
                subject: a.subject_id.clone(),
                sequence: a.sequence_id.clone(),
            });
        }
    }
    let mut overlaps = overlaps.to_vec();
    overlaps.sort();
    overlaps.dedup();

    let mut plan = Vec::new();
    for &m in &order {
        for &o in &overlaps {
            plan.extend(
                chunk_clips(&motions[m], clip_len, o)
                    .into_iter()
                    .map(|clip| PlannedClip { motion: m, clip }),
            );
        }
    }
    Ok(plan)
}

/// Builds the manifest (scenes included) without rendering anything.
pub fn plan_dataset(
    motions: &[MotionSequence],
    banks: &AssetBanks,
    opts: &GenerateOptions,
) -> Result<(DatasetManifest, Vec<PlannedClip>), GenerateError> {
    if motions.is_empty() {
        return Err(GenerateError::NoMotions);
    }
    let mut plan = plan_clips(motions, &opts.overlaps, opts.clip_len)?;
    if let Some(n) = opts.max_clips {
        plan.truncate(n);
    }
    let catalog = AssetCatalog::of(banks);

    let split = match opts.test_fraction {
        Some(fraction) => {
            let units: Vec<SplitUnit> = plan
                .iter()
                .map(|p| {
                    let m = &motions[p.motion];
                    SplitUnit {
                        subject_id: &m.subject_id,
                        sequence_id: &m.sequence_id,
                        frames: p.clip.length,
                        action_tags: &m.action_tags,
                    }
                })
                .collect();
            Some(assign_split_units(
                &units,
                &catalog,
                fraction,
                opts.master_seed,
            )?)
        }
        None => None,
    };

    let mut manifest = DatasetManifest::new(
        opts.master_seed,
        opts.intrinsics.width,
        opts.intrinsics.height,
    );
    manifest.assets = catalog.clone();
    for (global, p) in plan.iter().enumerate() {
        let motion = &motions[p.motion];
        let mut pool = match &split {
            Some(s) => s.pool(
                s.split_of(&motion.subject_id).unwrap_or(Split::Train),
                &catalog,
            ),
            None => AssetPool::all(banks),
        };
        if let Some(n) = opts.max_clothing {
            pool = pool.limit_textures(n);
        }
        let scene = sample_scene_from_pool(opts.master_seed, global as u64, banks, &pool);
        manifest.clips.push(ClipRecord {
            id: ClipId {
                subject_id: p.clip.subject_id.clone(),
                sequence_id: p.clip.sequence_id.clone(),
                overlap: p.clip.overlap,
                clip_index: p.clip.clip_index,
            },
            start_frame: p.clip.start_frame,
            frame_count: p.clip.length,
            scene,
            action_tags: motion.action_tags.clone(),
        });
    }
    manifest.split = split;
    manifest.validate()?;
    Ok((manifest, plan))
}

#[allow(clippy::too_many_arguments)]
fn render_clip(
    model: &BodyModel,
    motion: &MotionSequence,
    clip: &Clip,
    record: &ClipRecord,
    banks: &AssetBanks,
    settings: RenderSettings,
    out: &Path,
    overwrite: bool,
) -> Result<(), GenerateError> {
    let renderer = ClipRenderer::new(model, motion, clip, &record.scene, banks, settings)?;
    let mut writer = ClipWriter::create(
        out,
        record.clone(),
        *renderer.camera(),
        settings.quantization,
        overwrite,
    )?;
    renderer.render_all(|f| writer.write_frame(&f))?;
    let dir = writer.finish()?;
    debug!("wrote {}", dir.display());
    Ok(())
}

/// Plans, renders and writes a dataset. Output bytes do not depend on the
/// worker count.
pub fn generate_dataset(
    model: &BodyModel,
    motions: &[MotionSequence],
    banks: &AssetBanks,
    opts: &GenerateOptions,
    out: &Path,
) -> Result<DatasetManifest, GenerateError> {
    let (manifest, plan) = plan_dataset(motions, banks, opts)?;
    info!(
        "rendering {} clips ({} frames) with {} workers",
        plan.len(),
        manifest.clips.iter().map(|c| c.frame_count).sum::<usize>(),
        opts.workers.max(1)
    );
    let settings = RenderSettings {
        intrinsics: opts.intrinsics,
        quantization: opts.quantization,
        posing: opts.posing,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| GenerateError::Workers(e.to_string()))?;
    let results: Vec<Result<(), GenerateError>> = pool.install(|| {
        plan.par_iter()
            .zip(manifest.clips.par_iter())
            .map(|(p, record)| {
                render_clip(
                    model,
                    &motions[p.motion],
                    &p.clip,
                    record,
                    banks,
                    settings,
                    out,
                    opts.overwrite,
                )
            })
            .collect()
    });
    results.into_iter().collect::<Result<Vec<()>, _>>()?;
    write_manifest(out, &manifest)?;
    info!("wrote {} clips to {}", manifest.clips.len(), out.display());
    Ok(manifest)
}

const TOY_ACTIONS: [&str; 5] = ["walk", "run", "jump", "dance", "wave"];

/// Procedural stand-in for a motion-capture library: `subjects` subjects
/// with `sequences` sequences each, named `toyNN` and `toyNN_MM`.
pub fn toy_motions(subjects: usize, sequences: usize, frames: usize) -> Vec<MotionSequence> {
    let mut out = Vec::with_capacity(subjects * sequences);
    for s in 0..subjects {
        for q in 0..sequences {
            let mut m = generate_test_motion(1000 * s as u64 + q as u64, frames);
            m.subject_id = format!("toy{s:02}");
            m.sequence_id = format!("toy{s:02}_{q:02}");
            m.action_tags = vec![TOY_ACTIONS[(s + 2 * q) % TOY_ACTIONS.len()].to_string()];
            out.push(m);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> GenerateOptions {
        GenerateOptions::new(7, CameraIntrinsics::default_for(32, 24).unwrap())
    }

    #[test]
    fn plan_order_and_indices() {
        let mut motions = toy_motions(2, 2, 240);
        motions.reverse();
        let plan = plan_clips(&motions, &Overlap::ALL, 100).unwrap();
        // 240 frames: 4 clips at 30%, 5 at 50%, 8 at 70%.
        assert_eq!(plan.len(), 4 * (4 + 5 + 8));
        assert_eq!(plan[0].clip.sequence_id, "toy00_00");
        assert_eq!(plan[0].clip.overlap, Overlap::P30);
        assert_eq!(plan[4].clip.overlap, Overlap::P50);
        assert_eq!(plan.last().unwrap().clip.sequence_id, "toy01_01");
    }

    #[test]
    fn duplicate_sequences_rejected() {
        let mut motions = toy_motions(1, 1, 10);
        motions.push(motions[0].clone());
        assert!(matches!(
            plan_clips(&motions, &Overlap::ALL, 100),
            Err(GenerateError::DuplicateSequence { .. })
        ));
    }

    #[test]
    fn max_clips_keeps_scene_of_kept_clips() {
        let motions = toy_motions(2, 2, 150);
        let banks = AssetBanks::procedural(32, 24);
        let (full, _) = plan_dataset(&motions, &banks, &opts()).unwrap();
        let mut o = opts();
        o.max_clips = Some(5);
        let (cut, _) = plan_dataset(&motions, &banks, &o).unwrap();
        assert_eq!(cut.clips.len(), 5);
        assert_eq!(&cut.clips[..], &full.clips[..5]);
    }

    #[test]
    fn max_clothing_shares_texture() {
        let motions = toy_motions(3, 2, 240);
        let banks = AssetBanks::procedural(32, 24);
        let mut o = opts();
        o.max_clothing = Some(1);
        o.max_clips = Some(100);
        let (m, _) = plan_dataset(&motions, &banks, &o).unwrap();
        assert!(m.clips.len() > 50);
        assert!(m
            .clips
            .iter()
            .all(|c| c.scene.texture_id == m.clips[0].scene.texture_id));
    }

    #[test]
    fn split_generation_respects_held_out_assets() {
        let motions = toy_motions(6, 2, 240);
        let banks = AssetBanks::procedural(32, 24);
        let mut o = opts();
        o.test_fraction = Some(0.2);
        let (m, _) = plan_dataset(&motions, &banks, &o).unwrap();
        let split = m.split.as_ref().unwrap();
        for c in &m.clips {
            let side = split.split_of(&c.id.subject_id).unwrap();
            let held = split.test_textures.contains(&c.scene.texture_id);
            assert_eq!(held, side == Split::Test, "{}", c.id);
            let held = split.test_backgrounds.contains(&c.scene.background_id);
            assert_eq!(held, side == Split::Test, "{}", c.id);
        }
    }
}
