//! Per-clip random scene parameters, drawn deterministically from a master
//! seed and the clip's position in the dataset.

mod assets;

pub use assets::{
    fit_to, AssetBanks, AssetError, Background, Texture, TextureSet, PROCEDURAL_BACKGROUNDS,
    PROCEDURAL_CAESAR_TEXTURES, PROCEDURAL_CLOTHED_TEXTURES,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::body_model::{ShapeCoefficients, NUM_SHAPE_COMPONENTS};

/// Number of spherical-harmonics lighting coefficients (bands 0–2).
pub const SH_COEFFICIENTS: usize = 9;
pub const SH_RANGE: f64 = 0.7;
pub const AMBIENT_MIN: f64 = 0.5;
/// Band-1 coefficient of the world up axis (band 1 is ordered y, z, x).
pub const VERTICAL_SH_INDEX: usize = 1;
pub const VERTICAL_BIAS: f64 = 0.3;

pub const CAMERA_DISTANCE_MEAN: f64 = 8.0;
pub const CAMERA_DISTANCE_STD: f64 = 1.0;
/// Draws closer than this are rejected and redrawn.
pub const CAMERA_DISTANCE_MIN: f64 = 0.5;

/// Probability that a clip uses the scanner texture set.
pub const CAESAR_FRACTION: f64 = 0.2;
pub const SHAPE_TRUNCATION: f64 = 3.0;

/// Everything random about one clip. Constant over the clip's frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Global clip position the configuration was drawn for.
    pub clip_index: u64,
    pub shape: ShapeCoefficients,
    /// Index into the shape bank when one was used.
    pub shape_id: Option<usize>,
    pub texture_id: usize,
    pub texture_set: TextureSet,
    pub background_id: usize,
    pub light: [f64; SH_COEFFICIENTS],
    pub camera_distance: f64,
    pub camera_yaw: f64,
    /// Seed of the clip's own generator.
    pub rng_seed: u64,
}

/// Sizes and texture sets of the banks a dataset was generated with; kept
/// in the manifest so splits can be computed without the images.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssetCatalog {
    pub texture_sets: Vec<TextureSet>,
    pub backgrounds: usize,
    pub shapes: usize,
}

impl AssetCatalog {
    pub fn of(banks: &AssetBanks) -> Self {
        Self {
            texture_sets: banks.textures.iter().map(|t| t.set).collect(),
            backgrounds: banks.backgrounds.len(),
            shapes: banks.shapes.len(),
        }
    }

    pub fn texture_ids_in(&self, set: TextureSet) -> Vec<usize> {
        (0..self.texture_sets.len())
            .filter(|&i| self.texture_sets[i] == set)
            .collect()
    }
}

/// Asset ids a clip may draw from. Used to keep held-out assets out of
/// training clips and vice versa.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssetPool {
    pub textures: Vec<usize>,
    pub backgrounds: Vec<usize>,
    pub shapes: Vec<usize>,
}

impl AssetPool {
    pub fn all(banks: &AssetBanks) -> Self {
        Self {
            textures: (0..banks.textures.len()).collect(),
            backgrounds: (0..banks.backgrounds.len()).collect(),
            shapes: (0..banks.shapes.len()).collect(),
        }
    }

    /// Keeps only the first `n` texture ids.
    pub fn limit_textures(mut self, n: usize) -> Self {
        self.textures.truncate(n.max(1));
        self
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of a clip's private generator. Depends only on the master seed
/// and the clip index, never on generation order.
pub fn clip_seed(master_seed: u64, clip_index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ clip_index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

pub fn clip_rng(master_seed: u64, clip_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(clip_seed(master_seed, clip_index))
}

/// Nine SH coefficients: uniform on [−0.7, 0.7], the ambient term on
/// [0.5, 0.7], and the vertical band-1 term shifted up by 0.3 and clamped.
pub fn sample_lighting<R: Rng + ?Sized>(rng: &mut R) -> [f64; SH_COEFFICIENTS] {
    let mut c = [0.0; SH_COEFFICIENTS];
    for v in c.iter_mut() {
        *v = rng.random_range(-SH_RANGE..SH_RANGE);
    }
    c[0] = rng.random_range(AMBIENT_MIN..SH_RANGE);
    c[VERTICAL_SH_INDEX] = (c[VERTICAL_SH_INDEX] + VERTICAL_BIAS).clamp(-SH_RANGE, SH_RANGE);
    c
}

/// Uniform pick from the bank when it has entries, otherwise each
/// coefficient from a standard normal truncated to ±3.
pub fn sample_shape<R: Rng + ?Sized>(
    rng: &mut R,
    shape_bank: &[ShapeCoefficients],
) -> ShapeCoefficients {
    if !shape_bank.is_empty() {
        return shape_bank[rng.random_range(0..shape_bank.len())];
    }
    sample_truncated_shape(rng)
}

fn sample_truncated_shape<R: Rng + ?Sized>(rng: &mut R) -> ShapeCoefficients {
    let mut beta = [0.0; NUM_SHAPE_COMPONENTS];
    for b in beta.iter_mut() {
        *b = loop {
            let x: f64 = rng.sample(StandardNormal);
            if x.abs() <= SHAPE_TRUNCATION {
                break x;
            }
        };
    }
    ShapeCoefficients::new(beta).expect("finite draws")
}

pub fn sample_camera_distance<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let normal = Normal::new(CAMERA_DISTANCE_MEAN, CAMERA_DISTANCE_STD).expect("valid normal");
    loop {
        let d = normal.sample(rng);
        if d >= CAMERA_DISTANCE_MIN {
            return d;
        }
    }
}

pub fn sample_scene(master_seed: u64, clip_index: u64, banks: &AssetBanks) -> SceneConfig {
    sample_scene_from_pool(master_seed, clip_index, banks, &AssetPool::all(banks))
}

/// Like [`sample_scene`], restricted to the ids in `pool`. Draw order is
/// fixed: shape, texture set, texture, background, lighting, distance, yaw.
pub fn sample_scene_from_pool(
    master_seed: u64,
    clip_index: u64,
    banks: &AssetBanks,
    pool: &AssetPool,
) -> SceneConfig {
    assert!(!pool.textures.is_empty() && !pool.backgrounds.is_empty());
    let rng_seed = clip_seed(master_seed, clip_index);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let (shape, shape_id) = if pool.shapes.is_empty() {
        (sample_truncated_shape(&mut rng), None)
    } else {
        let id = pool.shapes[rng.random_range(0..pool.shapes.len())];
        (banks.shapes[id], Some(id))
    };

    let wanted = if rng.random_bool(CAESAR_FRACTION) {
        TextureSet::CaesarLike
    } else {
        TextureSet::ClothedLike
    };
    let in_set: Vec<usize> = pool
        .textures
        .iter()
        .copied()
        .filter(|&id| banks.textures[id].set == wanted)
        .collect();
    let candidates = if in_set.is_empty() {
        &pool.textures
    } else {
        &in_set
    };
    let texture_id = candidates[rng.random_range(0..candidates.len())];
    let background_id = pool.backgrounds[rng.random_range(0..pool.backgrounds.len())];
    let light = sample_lighting(&mut rng);
    let camera_distance = sample_camera_distance(&mut rng);
    let camera_yaw = rng.random_range(0.0..std::f64::consts::TAU);

    SceneConfig {
        clip_index,
        shape,
        shape_id,
        texture_id,
        texture_set: banks.textures[texture_id].set,
        background_id,
        light,
        camera_distance,
        camera_yaw,
        rng_seed,
    }
}
