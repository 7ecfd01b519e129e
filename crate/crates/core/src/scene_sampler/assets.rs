//! Texture, background and shape banks, with procedural fallbacks.

use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body_model::{ShapeCoefficients, NUM_SHAPE_COMPONENTS};

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("decoding {path}: {source}")]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("shape bank {path}: {message}")]
    ShapeBank { path: PathBuf, message: String },
    #[error("texture id {0} not in bank")]
    UnknownTexture(usize),
    #[error("background id {0} not in bank")]
    UnknownBackground(usize),
}

/// Which family of scans a texture imitates: tight-fitting scanner
/// clothing or everyday clothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureSet {
    CaesarLike,
    ClothedLike,
}

impl TextureSet {
    /// Files whose name starts with `caesar` (any case) belong to the
    /// scanner set; everything else is clothed.
    pub fn from_file_name(name: &str) -> Self {
        if name.to_ascii_lowercase().starts_with("caesar") {
            TextureSet::CaesarLike
        } else {
            TextureSet::ClothedLike
        }
    }
}

#[derive(Debug, Clone)]
pub struct Texture {
    pub name: String,
    pub set: TextureSet,
    pub image: RgbImage,
}

impl Texture {
    /// Nearest-texel lookup; `v = 0` is the top row. Returns linear albedo
    /// in [0,1].
    pub fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        let (w, h) = self.image.dimensions();
        let x = ((u.clamp(0.0, 1.0) * w as f64) as u32).min(w - 1);
        let y = ((v.clamp(0.0, 1.0) * h as f64) as u32).min(h - 1);
        let p = self.image.get_pixel(x, y).0;
        [
            p[0] as f64 / 255.0,
            p[1] as f64 / 255.0,
            p[2] as f64 / 255.0,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Background {
    pub name: String,
    /// Already cropped and resized to the render resolution.
    pub image: RgbImage,
}

#[derive(Debug, Clone)]
pub struct AssetBanks {
    pub textures: Vec<Texture>,
    pub backgrounds: Vec<Background>,
    pub shapes: Vec<ShapeCoefficients>,
}

pub const PROCEDURAL_CAESAR_TEXTURES: usize = 2;
pub const PROCEDURAL_CLOTHED_TEXTURES: usize = 8;
pub const PROCEDURAL_BACKGROUNDS: usize = 5;
const TEXTURE_SIZE: (u32, u32) = (224, 64);

impl AssetBanks {
    /// Fully procedural banks: skin-tone gradients, checker/stripe garments
    /// and flat-noise rooms.
    pub fn procedural(width: u32, height: u32) -> Self {
        Self {
            textures: procedural_textures(),
            backgrounds: procedural_backgrounds(width, height),
            shapes: Vec::new(),
        }
    }

    /// Loads whichever banks are given; missing or empty banks fall back
    /// to the procedural ones. Directory entries are taken in sorted
    /// filename order and ids are positions in that order.
    pub fn load(
        textures_dir: Option<&Path>,
        backgrounds_dir: Option<&Path>,
        shapes_file: Option<&Path>,
        width: u32,
        height: u32,
    ) -> Result<Self, AssetError> {
        let mut textures = Vec::new();
        if let Some(dir) = textures_dir {
            for path in sorted_pngs(dir)? {
                let name = file_name(&path);
                textures.push(Texture {
                    set: TextureSet::from_file_name(&name),
                    image: read_rgb(&path)?,
                    name,
                });
            }
        }
        if textures.is_empty() {
            textures = procedural_textures();
        }

        let mut backgrounds = Vec::new();
        if let Some(dir) = backgrounds_dir {
            for path in sorted_pngs(dir)? {
                backgrounds.push(Background {
                    name: file_name(&path),
                    image: fit_to(&read_rgb(&path)?, width, height),
                });
            }
        }
        if backgrounds.is_empty() {
            backgrounds = procedural_backgrounds(width, height);
        }

        let shapes = match shapes_file {
            Some(path) => load_shape_bank(path)?,
            None => Vec::new(),
        };

        Ok(Self {
            textures,
            backgrounds,
            shapes,
        })
    }

    pub fn texture(&self, id: usize) -> Result<&Texture, AssetError> {
        self.textures.get(id).ok_or(AssetError::UnknownTexture(id))
    }

    pub fn background(&self, id: usize) -> Result<&Background, AssetError> {
        self.backgrounds
            .get(id)
            .ok_or(AssetError::UnknownBackground(id))
    }

    pub fn texture_ids_in(&self, set: TextureSet) -> Vec<usize> {
        (0..self.textures.len())
            .filter(|&i| self.textures[i].set == set)
            .collect()
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn sorted_pngs(dir: &Path) -> Result<Vec<PathBuf>, AssetError> {
    let io = |source| AssetError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

fn read_rgb(path: &Path) -> Result<RgbImage, AssetError> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|source| AssetError::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Center-crops to the target aspect ratio, then resamples to the target
/// size.
pub fn fit_to(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    let (w, h) = img.dimensions();
    if (w, h) == (width, height) {
        return img.clone();
    }
    let target_aspect = width as f64 / height as f64;
    let (cw, ch) = if (w as f64 / h as f64) > target_aspect {
        (((h as f64 * target_aspect).round() as u32).clamp(1, w), h)
    } else {
        (w, ((w as f64 / target_aspect).round() as u32).clamp(1, h))
    };
    let cropped = imageops::crop_imm(img, (w - cw) / 2, (h - ch) / 2, cw, ch).to_image();
    imageops::resize(&cropped, width, height, FilterType::Triangle)
}

fn load_shape_bank(path: &Path) -> Result<Vec<ShapeCoefficients>, AssetError> {
    let bytes = fs::read(path).map_err(|source| AssetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let rows: Vec<Vec<f64>> =
        serde_json::from_slice(&bytes).map_err(|e| AssetError::ShapeBank {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            let beta: [f64; NUM_SHAPE_COMPONENTS] =
                row.try_into()
                    .map_err(|r: Vec<f64>| AssetError::ShapeBank {
                        path: path.to_path_buf(),
                        message: format!("entry {i} has {} values, expected 10", r.len()),
                    })?;
            ShapeCoefficients::new(beta).map_err(|e| AssetError::ShapeBank {
                path: path.to_path_buf(),
                message: format!("entry {i}: {e}"),
            })
        })
        .collect()
}

const SKIN_TONES: [[u8; 3]; 6] = [
    [241, 194, 167],
    [224, 172, 138],
    [198, 134, 99],
    [161, 102, 70],
    [119, 76, 52],
    [86, 54, 38],
];

const GARMENT_COLORS: [[u8; 3]; 10] = [
    [30, 40, 90],
    [160, 30, 40],
    [40, 110, 60],
    [200, 200, 200],
    [25, 25, 25],
    [220, 170, 40],
    [90, 60, 120],
    [60, 140, 180],
    [130, 90, 50],
    [230, 120, 150],
];

fn jitter(rng: &mut ChaCha8Rng, c: [u8; 3], amount: i32) -> Rgb<u8> {
    let d: i32 = rng.random_range(-amount..=amount);
    Rgb(c.map(|v| (v as i32 + d).clamp(0, 255) as u8))
}

/// Atlas cell (column, row) of a body part in the 7 × 2 part atlas.
fn part_of_texel(x: u32, y: u32) -> u8 {
    let (w, h) = TEXTURE_SIZE;
    let col = (x * 7 / w).min(6);
    let row = (y * 2 / h).min(1);
    (row * 7 + col + 1) as u8
}

fn procedural_textures() -> Vec<Texture> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e47_0001);
    let (w, h) = TEXTURE_SIZE;
    let mut out = Vec::new();
    for i in 0..PROCEDURAL_CAESAR_TEXTURES {
        let skin = SKIN_TONES[(2 * i + 1) % SKIN_TONES.len()];
        let suit = [60u8, 60, 70];
        let mut img = RgbImage::new(w, h);
        for (x, y, p) in img.enumerate_pixels_mut() {
            let part = part_of_texel(x, y);
            // Tight scanner garments over torso and upper legs.
            let base = if matches!(part, 2..=4) { suit } else { skin };
            let shade = 1.0 - 0.25 * ((y % (h / 2)) as f64 / (h / 2) as f64);
            let c = base.map(|v| (v as f64 * shade) as u8);
            *p = jitter(&mut rng, c, 4);
        }
        out.push(Texture {
            name: format!("caesar_procedural_{i:02}"),
            set: TextureSet::CaesarLike,
            image: img,
        });
    }
    for i in 0..PROCEDURAL_CLOTHED_TEXTURES {
        let skin = SKIN_TONES[rng.random_range(0..SKIN_TONES.len())];
        let top = GARMENT_COLORS[rng.random_range(0..GARMENT_COLORS.len())];
        let top2 = GARMENT_COLORS[rng.random_range(0..GARMENT_COLORS.len())];
        let bottom = GARMENT_COLORS[rng.random_range(0..GARMENT_COLORS.len())];
        let shoes = GARMENT_COLORS[rng.random_range(0..GARMENT_COLORS.len())];
        let period = rng.random_range(4..12u32);
        let stripes = i % 2 == 0;
        let short_sleeves = i % 3 == 0;
        let mut img = RgbImage::new(w, h);
        for (x, y, p) in img.enumerate_pixels_mut() {
            let c = match part_of_texel(x, y) {
                1 | 11 | 12 => skin,
                2 | 7 | 8 => {
                    let alt = if stripes {
                        (y / period) % 2 == 1
                    } else {
                        ((x / period) + (y / period)) % 2 == 1
                    };
                    if alt {
                        top2
                    } else {
                        top
                    }
                }
                9 | 10 if short_sleeves => skin,
                9 | 10 => top,
                13 | 14 => shoes,
                _ => bottom,
            };
            *p = jitter(&mut rng, c, 6);
        }
        out.push(Texture {
            name: format!("clothed_procedural_{i:02}"),
            set: TextureSet::ClothedLike,
            image: img,
        });
    }
    out
}

fn procedural_backgrounds(width: u32, height: u32) -> Vec<Background> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb6_0001);
    (0..PROCEDURAL_BACKGROUNDS)
        .map(|i| {
            let wall = [
                rng.random_range(90..220u8),
                rng.random_range(90..220u8),
                rng.random_range(90..220u8),
            ];
            let floor = wall.map(|c| c / 2);
            let horizon = rng.random_range(height / 2..height * 4 / 5);
            let block = 8;
            let cols = width.div_ceil(block);
            let rows = height.div_ceil(block);
            let noise: Vec<i32> = (0..cols * rows)
                .map(|_| rng.random_range(-12..=12))
                .collect();
            let img = RgbImage::from_fn(width, height, |x, y| {
                let base = if y < horizon { wall } else { floor };
                let n = noise[((y / block) * cols + x / block) as usize];
                Rgb(base.map(|c| (c as i32 + n).clamp(0, 255) as u8))
            });
            Background {
                name: format!("procedural_room_{i:02}"),
                image: img,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn procedural_banks_are_deterministic_and_tagged() {
        let a = AssetBanks::procedural(320, 240);
        let b = AssetBanks::procedural(320, 240);
        assert_eq!(a.textures.len(), 10);
        assert_eq!(a.backgrounds.len(), 5);
        assert_eq!(a.texture_ids_in(TextureSet::CaesarLike), vec![0, 1]);
        for (x, y) in a.textures.iter().zip(&b.textures) {
            assert_eq!(x.image, y.image);
        }
        for bg in &a.backgrounds {
            assert_eq!(bg.image.dimensions(), (320, 240));
        }
    }

    #[test]
    fn loads_sorted_dirs_and_falls_back() {
        let dir = tempfile::tempdir().unwrap();
        let tex = dir.path().join("tex");
        let bg = dir.path().join("bg");
        fs::create_dir_all(&tex).unwrap();
        fs::create_dir_all(&bg).unwrap();
        RgbImage::from_pixel(8, 8, Rgb([1, 2, 3]))
            .save(tex.join("b_shirt.png"))
            .unwrap();
        RgbImage::from_pixel(8, 8, Rgb([9, 9, 9]))
            .save(tex.join("CAESAR_01.png"))
            .unwrap();
        fs::write(tex.join("notes.txt"), "ignored").unwrap();
        let shapes = dir.path().join("shapes.json");
        fs::write(&shapes, "[[0,0,0,0,0,0,0,0,0,1]]").unwrap();

        let banks = AssetBanks::load(Some(&tex), Some(&bg), Some(&shapes), 32, 24).unwrap();
        assert_eq!(banks.textures.len(), 2);
        assert_eq!(banks.textures[0].name, "CAESAR_01.png");
        assert_eq!(banks.textures[0].set, TextureSet::CaesarLike);
        assert_eq!(banks.textures[1].set, TextureSet::ClothedLike);
        // Empty background dir → procedural rooms at the render size.
        assert_eq!(banks.backgrounds.len(), PROCEDURAL_BACKGROUNDS);
        assert_eq!(banks.backgrounds[0].image.dimensions(), (32, 24));
        assert_eq!(banks.shapes.len(), 1);
        assert_eq!(banks.shapes[0].values()[9], 1.0);
    }

    #[test]
    fn bad_shape_bank_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let shapes = dir.path().join("shapes.json");
        fs::write(&shapes, "[[1,2,3]]").unwrap();
        assert!(matches!(
            AssetBanks::load(None, None, Some(&shapes), 32, 24),
            Err(AssetError::ShapeBank { .. })
        ));
    }

    #[test]
    fn fit_crops_to_aspect() {
        let img = RgbImage::from_fn(400, 100, |x, _| Rgb([(x / 2) as u8, 0, 0]));
        let out = fit_to(&img, 40, 30);
        assert_eq!(out.dimensions(), (40, 30));
    }

    #[test]
    fn texture_sampling_edges() {
        let t = Texture {
            name: "t".into(),
            set: TextureSet::ClothedLike,
            image: RgbImage::from_fn(2, 2, |x, y| Rgb([(x * 255) as u8, (y * 255) as u8, 0])),
        };
        assert_eq!(t.sample(0.0, 0.0), [0.0, 0.0, 0.0]);
        assert_eq!(t.sample(1.0, 1.0), [1.0, 1.0, 0.0]);
        assert_eq!(t.sample(0.75, 0.25), [1.0, 0.0, 0.0]);
    }
}
