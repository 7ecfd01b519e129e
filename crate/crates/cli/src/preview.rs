//! Color mapping for the four-panel frame preview.

use image::{imageops, Rgb, RgbImage};
use shforge_core::renderer::FramePasses;

/// Background (label 0) then one color per body part.
pub const SEGM_PALETTE: [[u8; 3]; 15] = [
    [0, 0, 0],
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [128, 0, 0],
];

fn hsv(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let c = v * s;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|u| ((u + m) * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Label 0 is black; labels 1..=n_bins run from blue (near) to red (far).
pub fn depth_colors(label: u8, n_bins: u8) -> [u8; 3] {
    if label == 0 || n_bins == 0 {
        return [0, 0, 0];
    }
    let t = if n_bins > 1 {
        (label.min(n_bins) - 1) as f64 / (n_bins - 1) as f64
    } else {
        0.0
    };
    hsv(2.0 / 3.0 * (1.0 - t), 1.0, 1.0)
}

/// Direction as hue, magnitude relative to `max_mag` as saturation. Zero
/// flow is white.
pub fn flow_color(dx: f32, dy: f32, max_mag: f32) -> [u8; 3] {
    let mag = (dx * dx + dy * dy).sqrt();
    if mag == 0.0 || max_mag <= 0.0 {
        return [255, 255, 255];
    }
    let hue = (dy as f64).atan2(dx as f64) / std::f64::consts::TAU;
    hsv(hue, (mag / max_mag).min(1.0) as f64, 1.0)
}

fn label_panel(labels: &[u8], w: u32, h: u32, color: impl Fn(u8) -> [u8; 3]) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| Rgb(color(labels[(y * w + x) as usize])))
}

/// RGB | segmentation | depth labels | flow, side by side.
pub fn preview_panel(f: &FramePasses, n_bins: u8) -> RgbImage {
    let (w, h) = (f.width(), f.height());
    let segm = label_panel(f.segm.data(), w, h, |l| {
        SEGM_PALETTE[(l as usize).min(SEGM_PALETTE.len() - 1)]
    });
    let depth = label_panel(f.depth_labels.data(), w, h, |l| depth_colors(l, n_bins));
    let flow = f.flow.data();
    let max_mag = flow
        .chunks_exact(2)
        .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
        .fold(0.0f32, f32::max);
    let flow_img = RgbImage::from_fn(w, h, |x, y| {
        let i = 2 * (y * w + x) as usize;
        Rgb(flow_color(flow[i], flow[i + 1], max_mag))
    });

    let mut panel = RgbImage::new(4 * w, h);
    for (k, img) in [&f.rgb, &segm, &depth, &flow_img].into_iter().enumerate() {
        imageops::replace(&mut panel, img, (k as u32 * w) as i64, 0);
    }
    panel
}
