//! Subject-disjoint train/test split with held-out appearance assets.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset_io::ClipRecord;
use crate::scene_sampler::{AssetCatalog, AssetPool, TextureSet};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
/// Accepted distance between the achieved and requested test fraction.
pub const FRACTION_TOLERANCE: f64 = 0.03;
/// Share of each asset bank reserved for test clips.
pub const HELD_OUT_ASSET_FRACTION: f64 = 0.2;
/// Tags on at least this many sequences must appear on both sides.
pub const COMMON_ACTION_MIN_SEQUENCES: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("empty manifest")]
    Empty,
    #[error("cannot split by subject: only one subject ({0})")]
    SingleSubject(String),
    #[error("test fraction {0} outside (0, 1)")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub target_test_fraction: f64,
    pub achieved_test_fraction: f64,
    pub subjects: BTreeMap<String, Split>,
    /// Asset ids only test clips may use; train clips use the rest.
    pub test_textures: Vec<usize>,
    pub test_backgrounds: Vec<usize>,
    pub test_shapes: Vec<usize>,
}

impl SplitAssignment {
    pub fn split_of(&self, subject: &str) -> Option<Split> {
        self.subjects.get(subject).copied()
    }

    /// Asset ids available to clips of `split`.
    pub fn pool(&self, split: Split, assets: &AssetCatalog) -> AssetPool {
        let pick = |n: usize, held: &[usize]| -> Vec<usize> {
            let held: BTreeSet<usize> = held.iter().copied().collect();
            let ids: Vec<usize> = (0..n)
                .filter(|i| held.contains(i) == (split == Split::Test))
                .collect();
            // Banks too small to hold anything out are shared.
            if ids.is_empty() {
                (0..n).collect()
            } else {
                ids
            }
        };
        AssetPool {
            textures: pick(assets.texture_sets.len(), &self.test_textures),
            backgrounds: pick(assets.backgrounds, &self.test_backgrounds),
            shapes: if assets.shapes == 0 {
                Vec::new()
            } else {
                pick(assets.shapes, &self.test_shapes)
            },
        }
    }
}

/// Seeded choice of `round(0.2·n)` ids, at least one and never all of
/// them; nothing is held out of a single-entry bank.
fn hold_out(ids: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    if ids.len() < 2 {
        return Vec::new();
    }
    let k = ((ids.len() as f64 * HELD_OUT_ASSET_FRACTION).round() as usize).clamp(1, ids.len() - 1);
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(rng);
    let mut held = shuffled[..k].to_vec();
    held.sort_unstable();
    held
}

struct Subject {
    name: String,
    frames: u64,
    tags: BTreeSet<String>,
}

/// Assigns whole subjects to train or test so that test holds about
/// `target` of all frames, and reserves test-only asset ids.
///
/// Subjects are visited in a seeded random order and added to test while
/// they fit under the target. If that leaves test short of
/// `target − 0.03`, the smallest remaining subjects are added. Common
/// action tags are then repaired so each appears on both sides.
pub fn assign_split(
    clips: &[ClipRecord],
    assets: &AssetCatalog,
    target: f64,
    seed: u64,
) -> Result<SplitAssignment, SplitError> {
    let units: Vec<SplitUnit> = clips
        .iter()
        .map(|c| SplitUnit {
            subject_id: &c.id.subject_id,
            sequence_id: &c.id.sequence_id,
            frames: c.frame_count,
            action_tags: &c.action_tags,
        })
        .collect();
    assign_split_units(&units, assets, target, seed)
}

/// What the splitter needs to know about one clip.
#[derive(Debug, Clone, Copy)]
pub struct SplitUnit<'a> {
    pub subject_id: &'a str,
    pub sequence_id: &'a str,
    pub frames: usize,
    pub action_tags: &'a [String],
}

/// [`assign_split`] over bare clip descriptions, usable before any scene
/// has been sampled.
pub fn assign_split_units(
    clips: &[SplitUnit<'_>],
    assets: &AssetCatalog,
    target: f64,
    seed: u64,
) -> Result<SplitAssignment, SplitError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(SplitError::BadFraction(target));
    }
    let mut by_name: BTreeMap<&str, Subject> = BTreeMap::new();
    let mut tag_sequences: BTreeMap<&str, BTreeSet<(&str, &str)>> = BTreeMap::new();
    for c in clips {
        let s = by_name.entry(c.subject_id).or_insert_with(|| Subject {
            name: c.subject_id.to_string(),
            frames: 0,
            tags: BTreeSet::new(),
        });
        s.frames += c.frames as u64;
        for t in c.action_tags {
            s.tags.insert(t.clone());
            tag_sequences
                .entry(t)
                .or_default()
                .insert((c.subject_id, c.sequence_id));
        }
    }
    match by_name.len() {
        0 => return Err(SplitError::Empty),
        1 => {
            let only = by_name.into_keys().next().unwrap_or_default().to_string();
            return Err(SplitError::SingleSubject(only));
        }
        _ => {}
    }
    let subjects: Vec<Subject> = by_name.into_values().collect();
    let total: u64 = subjects.iter().map(|s| s.frames).sum::<u64>().max(1);
    let frac = |test: &[bool]| -> f64 {
        subjects
            .iter()
            .zip(test)
            .filter(|(_, &t)| t)
            .map(|(s, _)| s.frames)
            .sum::<u64>() as f64
            / total as f64
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..subjects.len()).collect();
    order.shuffle(&mut rng);

    let mut test = vec![false; subjects.len()];
    let budget = target * total as f64;
    let mut used = 0u64;
    for &i in &order {
        if (used + subjects[i].frames) as f64 <= budget {
            test[i] = true;
            used += subjects[i].frames;
        }
    }
    // Top up with the smallest train subjects (ties in visiting order).
    let mut by_size = order.clone();
    by_size.sort_by_key(|&i| subjects[i].frames);
    for &i in &by_size {
        if frac(&test) >= target - FRACTION_TOLERANCE {
            break;
        }
        if !test[i] {
            test[i] = true;
        }
    }
    ensure_both_sides(&mut test, &by_size);

    let common: Vec<&str> = tag_sequences
        .iter()
        .filter(|(_, seqs)| seqs.len() >= COMMON_ACTION_MIN_SEQUENCES)
        .map(|(t, _)| *t)
        .collect();
    repair_action_coverage(&subjects, &mut test, &by_size, &common);
    ensure_both_sides(&mut test, &by_size);

    let test_textures = [TextureSet::CaesarLike, TextureSet::ClothedLike]
        .into_iter()
        .flat_map(|set| hold_out(&assets.texture_ids_in(set), &mut rng))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let background_ids: Vec<usize> = (0..assets.backgrounds).collect();
    let test_backgrounds = hold_out(&background_ids, &mut rng);
    let shape_ids: Vec<usize> = (0..assets.shapes).collect();
    let test_shapes = hold_out(&shape_ids, &mut rng);

    Ok(SplitAssignment {
        seed,
        target_test_fraction: target,
        achieved_test_fraction: frac(&test),
        subjects: subjects
            .iter()
            .zip(&test)
            .map(|(s, &t)| (s.name.clone(), if t { Split::Test } else { Split::Train }))
            .collect(),
        test_textures,
        test_backgrounds,
        test_shapes,
    })
}

/// Keeps at least one subject on each side; `by_size` is ascending.
fn ensure_both_sides(test: &mut [bool], by_size: &[usize]) {
    if !test.iter().any(|&t| t) {
        test[by_size[0]] = true;
    }
    if test.iter().all(|&t| t) {
        test[*by_size.last().unwrap()] = false;
    }
}

/// Moves the smallest subject carrying a missing common tag across.
/// Subjects whose move would take a common tag away from its last carrier
/// on the other side are skipped.
fn repair_action_coverage(
    subjects: &[Subject],
    test: &mut [bool],
    by_size: &[usize],
    common: &[&str],
) {
    let carriers = |test: &[bool], tag: &str, side: bool| {
        subjects
            .iter()
            .zip(test)
            .filter(|(s, &t)| t == side && s.tags.contains(tag))
            .count()
    };
    for _ in 0..subjects.len() {
        let mut changed = false;
        for &tag in common {
            for side in [true, false] {
                if carriers(test, tag, side) > 0 {
                    continue;
                }
                // Candidate from the other side whose move keeps every
                // common tag present where it was.
                let candidate = by_size.iter().copied().find(|&i| {
                    test[i] != side
                        && subjects[i].tags.contains(tag)
                        && subjects[i]
                            .tags
                            .iter()
                            .filter(|t| common.contains(&t.as_str()))
                            .all(|t| carriers(test, t, !side) > 1)
                });
                if let Some(i) = candidate {
                    test[i] = side;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}
