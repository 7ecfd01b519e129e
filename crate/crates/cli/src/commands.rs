use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use log::info;
use shforge_core::body_model::{load_model, toy_model, BodyModel};
use shforge_core::camera::CameraIntrinsics;
use shforge_core::dataset_io::{
    dataset_stats, format_table, read_clip_document, read_frame, read_manifest, reference_rows,
    write_manifest, ClipDocument, DatasetManifest, MANIFEST_FILE, SCENE_FILE,
};
use shforge_core::metrics::{format_report, MetricsAccumulator};
use shforge_core::motion::{load_motion, MotionSequence, Overlap};
use shforge_core::pipeline::{generate_dataset, toy_motions, GenerateOptions};
use shforge_core::raster::Raster;
use shforge_core::scene_sampler::AssetBanks;
use shforge_core::splitter::{assign_split, Split, SplitAssignment, DEFAULT_TEST_FRACTION};

use crate::preview::preview_panel;
use crate::OutputError;

/// Overlap variants to render.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlaps(pub Vec<Overlap>);

fn parse_overlaps(s: &str) -> Result<Overlaps, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Overlaps(Overlap::ALL.to_vec()));
    }
    s.split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map(Overlaps)
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1)"))
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Body model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Motion JSON file, or a directory of them.
    #[arg(long)]
    pub motions: Option<PathBuf>,
    /// Directory of texture PNGs; names starting with `caesar` form the
    /// scanner set.
    #[arg(long)]
    pub textures: Option<PathBuf>,
    /// Directory of background PNGs.
    #[arg(long)]
    pub backgrounds: Option<PathBuf>,
    /// JSON array of 10-value shape vectors.
    #[arg(long)]
    pub shapes: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 0.3, 0.5, 0.7, a comma list of those, or all.
    #[arg(long, default_value = "all", value_parser = parse_overlaps)]
    pub overlap: Overlaps,
    #[arg(long, default_value_t = 320)]
    pub width: u32,
    #[arg(long, default_value_t = 240)]
    pub height: u32,
    /// Clips rendered in parallel. Output does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Keep only the first N clips in subject/sequence/overlap order.
    #[arg(long)]
    pub max_clips: Option<usize>,
    /// Use only the first N texture ids.
    #[arg(long)]
    pub max_clothing: Option<usize>,
    /// Use the built-in toy model, motions and procedural asset banks for
    /// whatever is not given explicitly.
    #[arg(long)]
    pub toy: bool,
    /// Subjects in the toy motion set (two sequences each).
    #[arg(long, default_value_t = 5)]
    pub toy_subjects: usize,
    /// Frames per toy sequence.
    #[arg(long, default_value_t = 100)]
    pub toy_frames: usize,
    /// Split subjects before rendering, with held-out assets for test.
    #[arg(long, value_parser = parse_fraction)]
    pub test_fraction: Option<f64>,
    /// Replace clip directories that already exist.
    #[arg(long)]
    pub overwrite: bool,
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_motions(path: &Path) -> Result<Vec<MotionSequence>> {
    let files = if path.is_dir() {
        let mut files = Vec::new();
        for entry in fs::read_dir(path).with_context(|| format!("listing {}", path.display()))? {
            let p = entry?.path();
            if p.extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("json"))
            {
                files.push(p);
            }
        }
        files.sort();
        if files.is_empty() {
            bail!("no motion files in {}", path.display());
        }
        files
    } else {
        vec![path.to_path_buf()]
    };
    files
        .iter()
        .map(|f| load_motion(&read_input(f)?).with_context(|| format!("motion {}", f.display())))
        .collect()
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let model: BodyModel = match (&a.model, a.toy) {
        (Some(p), _) => {
            load_model(&read_input(p)?).with_context(|| format!("model {}", p.display()))?
        }
        (None, true) => toy_model(),
        (None, false) => bail!("--model is required (or pass --toy)"),
    };
    let motions = match (&a.motions, a.toy) {
        (Some(p), _) => load_motions(p)?,
        (None, true) => toy_motions(a.toy_subjects, 2, a.toy_frames),
        (None, false) => bail!("--motions is required (or pass --toy)"),
    };
    let banks = AssetBanks::load(
        a.textures.as_deref(),
        a.backgrounds.as_deref(),
        a.shapes.as_deref(),
        a.width,
        a.height,
    )?;
    let intrinsics = CameraIntrinsics::default_for(a.width, a.height)?;

    let mut opts = GenerateOptions::new(a.seed, intrinsics);
    opts.overlaps = a.overlap.0;
    opts.max_clips = a.max_clips;
    opts.max_clothing = a.max_clothing;
    opts.test_fraction = a.test_fraction;
    opts.workers = a.workers.max(1);
    opts.overwrite = a.overwrite;

    let manifest = generate_dataset(&model, &motions, &banks, &opts, &a.out)?;
    let frames: usize = manifest.clips.iter().map(|c| c.frame_count).sum();
    println!(
        "wrote {} clips ({} frames) to {}",
        manifest.clips.len(),
        frames,
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Dataset root.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION, value_parser = parse_fraction)]
    pub test_fraction: f64,
    /// Defaults to the dataset's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Clips whose scene uses an asset reserved for the other side.
fn asset_violations(manifest: &DatasetManifest, split: &SplitAssignment) -> Vec<String> {
    let mut out = Vec::new();
    for c in &manifest.clips {
        let side = split.split_of(&c.id.subject_id).unwrap_or(Split::Train);
        let pool = split.pool(side, &manifest.assets);
        let mut bad = Vec::new();
        if !pool.textures.contains(&c.scene.texture_id) {
            bad.push(format!("texture {}", c.scene.texture_id));
        }
        if !pool.backgrounds.contains(&c.scene.background_id) {
            bad.push(format!("background {}", c.scene.background_id));
        }
        if let Some(id) = c.scene.shape_id {
            if !pool.shapes.contains(&id) {
                bad.push(format!("shape {id}"));
            }
        }
        if !bad.is_empty() {
            out.push(format!("{} ({side}): {}", c.id, bad.join(", ")));
        }
    }
    out
}

pub fn split(a: SplitArgs) -> Result<()> {
    let mut manifest = read_manifest(&a.data)?;
    let seed = a.seed.unwrap_or(manifest.master_seed);
    let split = assign_split(&manifest.clips, &manifest.assets, a.test_fraction, seed)?;
    let violations = asset_violations(&manifest, &split);
    let n_test = split
        .subjects
        .values()
        .filter(|s| **s == Split::Test)
        .count();
    println!(
        "{} test subjects of {}; test frame fraction {:.4} (target {})",
        n_test,
        split.subjects.len(),
        split.achieved_test_fraction,
        a.test_fraction
    );
    if !violations.is_empty() {
        println!(
            "{} clips use assets reserved for the other side:",
            violations.len()
        );
        for v in &violations {
            println!("  {v}");
        }
        println!("regenerate with --test-fraction to keep asset sets disjoint");
    }
    manifest.split = Some(split);
    write_manifest(&a.data, &manifest)
        .map_err(|e| anyhow::Error::new(e).context(OutputError("updating manifest".into())))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset root.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub json: bool,
    /// Also print the published full-scale table.
    #[arg(long)]
    pub reference: bool,
}

pub fn stats(a: StatsArgs) -> Result<()> {
    if !a.data.is_dir() {
        bail!("{} is not a directory", a.data.display());
    }
    let manifest = if a.data.join(MANIFEST_FILE).exists() {
        read_manifest(&a.data)?
    } else {
        DatasetManifest::new(0, 0, 0)
    };
    let table = dataset_stats(&manifest);
    if a.json {
        let mut value = serde_json::json!({ "rows": table.rows });
        if a.reference {
            value["reference"] = serde_json::to_value(reference_rows())?;
        }
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        print!("{}", format_table(&table.rows));
        if a.reference {
            println!("\nreference:");
            print!("{}", format_table(&reference_rows()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FrameSelection {
    /// The middle frame of each clip.
    Middle,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predictions: a dataset or clip directory laid out like the ground
    /// truth, holding `*_segm.png` and/or `*_depth_labels.png`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth dataset or clip directory.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value_t = FrameSelection::Middle)]
    pub frames: FrameSelection,
    #[arg(long)]
    pub json: bool,
}

/// Clip directories relative to `root`: every manifest entry, or `root`
/// itself when it is a single clip.
fn clip_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(MANIFEST_FILE).exists() {
        let m = read_manifest(root)?;
        Ok(m.clips
            .iter()
            .map(|c| PathBuf::from(c.id.relative_path()))
            .collect())
    } else if root.join(SCENE_FILE).exists() {
        Ok(vec![PathBuf::new()])
    } else {
        bail!(
            "{} holds neither {MANIFEST_FILE} nor {SCENE_FILE}",
            root.display()
        )
    }
}

fn read_label_png(path: &Path) -> Result<Option<Raster<u8>>> {
    if !path.exists() {
        return Ok(None);
    }
    let img = image::open(path).with_context(|| format!("decoding {}", path.display()))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => bail!(
            "{}: expected 8-bit grayscale labels, got {:?}",
            path.display(),
            other.color()
        ),
    };
    let (w, h) = gray.dimensions();
    Ok(Raster::from_vec(w, h, 1, gray.into_raw()))
}

fn eval_clip(
    acc: &mut MetricsAccumulator,
    gt_dir: &Path,
    pred_dir: &Path,
    doc: &ClipDocument,
    selection: FrameSelection,
) -> Result<()> {
    let n = doc.frames.len();
    let frames: Vec<usize> = match selection {
        FrameSelection::Middle if n > 0 => vec![n / 2],
        FrameSelection::Middle => Vec::new(),
        FrameSelection::All => (0..n).collect(),
    };
    for t in frames {
        let gt = read_frame(gt_dir, doc, t)?;
        let meta = &doc.frames[t];
        let segm = read_label_png(&pred_dir.join(&meta.files[1]))?;
        let depth = read_label_png(&pred_dir.join(&meta.files[2]))?;
        if segm.is_none() && depth.is_none() {
            bail!("no prediction for frame {t} in {}", pred_dir.display());
        }
        let joints: Vec<[f64; 2]> = meta
            .joints
            .joints2d
            .iter()
            .zip(&meta.joints.behind_camera)
            .filter(|(_, &behind)| !behind)
            .map(|(j, _)| *j)
            .collect();
        acc.add_frame(
            segm.as_ref().map(|p| (p, &gt.segm)),
            depth.as_ref().map(|p| (p, &gt.depth_labels)),
            &joints,
            &doc.quantization,
        )
        .with_context(|| format!("frame {t} of {}", gt_dir.display()))?;
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut acc = MetricsAccumulator::default();
    let mut quantization = None;
    for rel in clip_dirs(&a.gt)? {
        let gt_dir = a.gt.join(&rel);
        let doc = read_clip_document(&gt_dir)?;
        eval_clip(&mut acc, &gt_dir, &a.pred.join(&rel), &doc, a.frames)?;
        quantization.get_or_insert(doc.quantization);
    }
    let report = acc.report(&quantization.unwrap_or_default());
    info!("evaluated {} frames", report.frames);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", format_report(&report));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    /// Clip directory.
    #[arg(long)]
    pub clip: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn preview(a: PreviewArgs) -> Result<()> {
    let doc = read_clip_document(&a.clip)?;
    let frame = read_frame(&a.clip, &doc, a.frame)?;
    let panel = preview_panel(&frame, doc.quantization.n_bins);
    panel.save(&a.out).map_err(|e| {
        anyhow::Error::new(e).context(OutputError(format!("writing {}", a.out.display())))
    })?;
    println!(
        "wrote {} ({}x{})",
        a.out.display(),
        panel.width(),
        panel.height()
    );
    Ok(())
}
