//! Dataset size table: subjects, sequences, clips and frames per split.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ClipRecord, DatasetManifest};
use crate::splitter::Split;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub name: String,
    pub subjects: u64,
    pub sequences: u64,
    pub clips: u64,
    pub frames: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsTable {
    /// Per-split rows (train, test) when a split exists, then the total.
    pub rows: Vec<StatsRow>,
}

impl StatsTable {
    pub fn total(&self) -> &StatsRow {
        self.rows.last().expect("table always has a total row")
    }
}

/// Sizes of the full-scale dataset this generator imitates, as published.
/// Note the published sequence and clip totals are not the sums of the
/// split rows.
pub const REFERENCE_TABLE: [(&str, u64, u64, u64, u64); 3] = [
    ("Train", 115, 1964, 55001, 5342090),
    ("Test", 30, 703, 12528, 1194662),
    ("Total", 145, 2607, 67582, 6536752),
];

fn row<'a>(name: &str, clips: impl Iterator<Item = &'a ClipRecord>) -> StatsRow {
    let mut subjects = BTreeSet::new();
    let mut sequences = BTreeSet::new();
    let (mut n_clips, mut frames) = (0, 0);
    for c in clips {
        subjects.insert(c.id.subject_id.as_str());
        sequences.insert((c.id.subject_id.as_str(), c.id.sequence_id.as_str()));
        n_clips += 1;
        frames += c.frame_count as u64;
    }
    StatsRow {
        name: name.to_string(),
        subjects: subjects.len() as u64,
        sequences: sequences.len() as u64,
        clips: n_clips,
        frames,
    }
}

/// Counts per split. Sequences are distinct (subject, sequence) pairs, so
/// the overlap variants of one sequence count once; clips count every
/// variant. Subjects missing from the split map are counted as train.
pub fn dataset_stats(manifest: &DatasetManifest) -> StatsTable {
    let mut rows = Vec::new();
    if let Some(split) = &manifest.split {
        for (name, which) in [("Train", Split::Train), ("Test", Split::Test)] {
            let clips = manifest
                .clips
                .iter()
                .filter(|c| split.split_of(&c.id.subject_id).unwrap_or(Split::Train) == which);
            rows.push(row(name, clips));
        }
    }
    rows.push(row("Total", manifest.clips.iter()));
    StatsTable { rows }
}

fn group(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Plain-text table with the columns `#subjects #sequences #clips #frames`.
pub fn format_table(rows: &[StatsRow]) -> String {
    let mut out = format!(
        "{:<8}{:>11}{:>13}{:>10}{:>13}\n",
        "", "#subjects", "#sequences", "#clips", "#frames"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<8}{:>11}{:>13}{:>10}{:>13}\n",
            r.name,
            group(r.subjects),
            group(r.sequences),
            group(r.clips),
            group(r.frames)
        ));
    }
    out
}

pub fn reference_rows() -> Vec<StatsRow> {
    REFERENCE_TABLE
        .iter()
        .map(|&(name, subjects, sequences, clips, frames)| StatsRow {
            name: name.to_string(),
            subjects,
            sequences,
            clips,
            frames,
        })
        .collect()
}
