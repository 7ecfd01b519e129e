//! Segmentation and quantized-depth evaluation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body_model::NUM_PARTS;
use crate::ground_truth::DepthQuantization;
use crate::raster::Raster;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: prediction {pred:?}, ground truth {gt:?}")]
    ShapeMismatch {
        pred: (u32, u32, u32),
        gt: (u32, u32, u32),
    },
    #[error("empty foreground")]
    EmptyForeground,
    #[error("no usable joints")]
    NoUsableJoints,
}

fn check_shapes(pred: &Raster<u8>, gt: &Raster<u8>) -> Result<(), MetricsError> {
    if !pred.same_shape(gt) {
        let dims = |r: &Raster<u8>| (r.width(), r.height(), r.channels());
        return Err(MetricsError::ShapeMismatch {
            pred: dims(pred),
            gt: dims(gt),
        });
    }
    Ok(())
}

/// Per-part pixel counts. Index 0 is part 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmCounts {
    pub intersection: [u64; NUM_PARTS as usize],
    pub predicted: [u64; NUM_PARTS as usize],
    pub ground_truth: [u64; NUM_PARTS as usize],
    /// Foreground ground-truth pixels and how many got the right part.
    pub foreground: u64,
    pub foreground_correct: u64,
}

impl SegmCounts {
    pub fn from_maps(pred: &Raster<u8>, gt: &Raster<u8>) -> Result<Self, MetricsError> {
        check_shapes(pred, gt)?;
        let mut c = Self::default();
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            let part = |l: u8| (1..=NUM_PARTS).contains(&l).then(|| l as usize - 1);
            if let Some(i) = part(p) {
                c.predicted[i] += 1;
            }
            if let Some(i) = part(g) {
                c.ground_truth[i] += 1;
                c.foreground += 1;
                if p == g {
                    c.intersection[i] += 1;
                    c.foreground_correct += 1;
                }
            }
        }
        Ok(c)
    }

    pub fn add(&mut self, other: &SegmCounts) {
        for i in 0..NUM_PARTS as usize {
            self.intersection[i] += other.intersection[i];
            self.predicted[i] += other.predicted[i];
            self.ground_truth[i] += other.ground_truth[i];
        }
        self.foreground += other.foreground;
        self.foreground_correct += other.foreground_correct;
    }

    pub fn metrics(&self) -> SegmMetrics {
        let mut per_part_iou = [None; NUM_PARTS as usize];
        let mut recalls = Vec::new();
        for i in 0..NUM_PARTS as usize {
            let union = self.predicted[i] + self.ground_truth[i] - self.intersection[i];
            if union > 0 {
                per_part_iou[i] = Some(self.intersection[i] as f64 / union as f64);
            }
            if self.ground_truth[i] > 0 {
                recalls.push(self.intersection[i] as f64 / self.ground_truth[i] as f64);
            }
        }
        let defined: Vec<f64> = per_part_iou.iter().flatten().copied().collect();
        SegmMetrics {
            per_part_iou,
            mean_iou: mean(&defined),
            pixel_accuracy: mean(&recalls),
            global_accuracy: (self.foreground > 0)
                .then(|| self.foreground_correct as f64 / self.foreground as f64),
        }
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmMetrics {
    /// `None` for parts absent from both maps.
    pub per_part_iou: [Option<f64>; NUM_PARTS as usize],
    pub mean_iou: Option<f64>,
    /// Mean per-part recall over parts present in the ground truth.
    pub pixel_accuracy: Option<f64>,
    /// Share of ground-truth foreground pixels labeled correctly.
    pub global_accuracy: Option<f64>,
}

pub fn segm_metrics(pred: &Raster<u8>, gt: &Raster<u8>) -> Result<SegmMetrics, MetricsError> {
    Ok(SegmCounts::from_maps(pred, gt)?.metrics())
}

/// Exact sufficient statistics for plain and affine-fitted depth errors,
/// in label units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthSums {
    pub n: u64,
    pub sum_pred: i64,
    pub sum_gt: i64,
    pub sum_pred2: i64,
    pub sum_gt2: i64,
    pub sum_cross: i64,
    pub sum_diff2: i64,
}

impl DepthSums {
    pub fn push(&mut self, pred: u8, gt: u8) {
        let (x, y) = (pred as i64, gt as i64);
        self.n += 1;
        self.sum_pred += x;
        self.sum_gt += y;
        self.sum_pred2 += x * x;
        self.sum_gt2 += y * y;
        self.sum_cross += x * y;
        self.sum_diff2 += (x - y) * (x - y);
    }

    pub fn add(&mut self, o: &DepthSums) {
        self.n += o.n;
        self.sum_pred += o.sum_pred;
        self.sum_gt += o.sum_gt;
        self.sum_pred2 += o.sum_pred2;
        self.sum_gt2 += o.sum_gt2;
        self.sum_cross += o.sum_cross;
        self.sum_diff2 += o.sum_diff2;
    }

    /// Plain RMSE in millimeters.
    pub fn rmse_mm(&self, q: &DepthQuantization) -> Result<f64, MetricsError> {
        if self.n == 0 {
            return Err(MetricsError::EmptyForeground);
        }
        Ok((self.sum_diff2 as f64 / self.n as f64).sqrt() * q.bin_width * 1000.0)
    }

    /// RMSE after the least-squares fit `a·pred + b ≈ gt`; with constant
    /// predictions `a = 0` and `b` is the ground-truth mean. Computed in
    /// exact integer arithmetic.
    pub fn st_rmse_mm(&self, q: &DepthQuantization) -> Result<f64, MetricsError> {
        if self.n == 0 {
            return Err(MetricsError::EmptyForeground);
        }
        let n = self.n as i128;
        let (sx, sy) = (self.sum_pred as i128, self.sum_gt as i128);
        let d = n * self.sum_pred2 as i128 - sx * sx;
        let e = n * self.sum_cross as i128 - sx * sy;
        let f = n * self.sum_gt2 as i128 - sy * sy;
        // Mean squared residual = (f·d − e²) / (d·n²), or f / n² when d = 0.
        let ms = if d == 0 {
            f as f64 / (n * n) as f64
        } else {
            (f * d - e * e) as f64 / (d as f64 * (n * n) as f64)
        };
        let st = ms.max(0.0).sqrt() * q.bin_width * 1000.0;
        // The identity map is one of the candidate fits.
        Ok(st.min(self.rmse_mm(q)?))
    }
}

fn foreground_sums(pred: &Raster<u8>, gt: &Raster<u8>) -> Result<DepthSums, MetricsError> {
    check_shapes(pred, gt)?;
    let mut s = DepthSums::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if g > 0 {
            s.push(p, g);
        }
    }
    Ok(s)
}

/// RMSE over ground-truth foreground of the label difference times the
/// bin width, in millimeters. Predicted background counts as label 0.
pub fn depth_rmse(
    pred: &Raster<u8>,
    gt: &Raster<u8>,
    q: &DepthQuantization,
) -> Result<f64, MetricsError> {
    foreground_sums(pred, gt)?.rmse_mm(q)
}

/// Scale- and translation-invariant RMSE over ground-truth foreground.
pub fn st_rmse(
    pred: &Raster<u8>,
    gt: &Raster<u8>,
    q: &DepthQuantization,
) -> Result<f64, MetricsError> {
    foreground_sums(pred, gt)?.st_rmse_mm(q)
}

/// Pixel of a joint, rounding half up; `None` outside the image.
pub fn joint_pixel(uv: [f64; 2], width: u32, height: u32) -> Option<(u32, u32)> {
    let (x, y) = ((uv[0] + 0.5).floor(), (uv[1] + 0.5).floor());
    (x.is_finite()
        && y.is_finite()
        && x >= 0.0
        && y >= 0.0
        && x < width as f64
        && y < height as f64)
        .then_some((x as u32, y as u32))
}

/// Depth sums restricted to the pixels under the given joints; joints off
/// the image or on ground-truth background are skipped.
pub fn joint_sums(
    pred: &Raster<u8>,
    gt: &Raster<u8>,
    joints2d: &[[f64; 2]],
) -> Result<DepthSums, MetricsError> {
    check_shapes(pred, gt)?;
    let mut s = DepthSums::default();
    for &uv in joints2d {
        if let Some((x, y)) = joint_pixel(uv, gt.width(), gt.height()) {
            let g = gt.get(x, y)[0];
            if g > 0 {
                s.push(pred.get(x, y)[0], g);
            }
        }
    }
    Ok(s)
}

/// `(pose_rmse_mm, st_pose_rmse_mm)` at the joint pixels.
pub fn pose_rmse(
    pred: &Raster<u8>,
    gt: &Raster<u8>,
    joints2d: &[[f64; 2]],
    q: &DepthQuantization,
) -> Result<(f64, f64), MetricsError> {
    let s = joint_sums(pred, gt, joints2d)?;
    if s.n == 0 {
        return Err(MetricsError::NoUsableJoints);
    }
    Ok((s.rmse_mm(q)?, s.st_rmse_mm(q)?))
}

/// Evaluation summary over any number of frames. Segmentation counts and
/// plain depth errors are pooled over all pixels; the affine-fitted errors
/// are fitted per frame and averaged over frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: u64,
    pub per_part_iou: [Option<f64>; NUM_PARTS as usize],
    pub mean_iou: Option<f64>,
    pub pixel_accuracy: Option<f64>,
    pub global_accuracy: Option<f64>,
    pub rmse_mm: Option<f64>,
    pub st_rmse_mm: Option<f64>,
    pub pose_rmse_mm: Option<f64>,
    pub st_pose_rmse_mm: Option<f64>,
    pub foreground_pixels: u64,
    pub joint_pixels: u64,
}

#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    frames: u64,
    segm: SegmCounts,
    depth: DepthSums,
    joints: DepthSums,
    st_sum: f64,
    st_frames: u64,
    st_pose_sum: f64,
    st_pose_frames: u64,
}

impl MetricsAccumulator {
    /// Adds one frame. Depth maps are optional so segmentation-only
    /// predictions can be scored.
    pub fn add_frame(
        &mut self,
        segm: Option<(&Raster<u8>, &Raster<u8>)>,
        depth: Option<(&Raster<u8>, &Raster<u8>)>,
        joints2d: &[[f64; 2]],
        q: &DepthQuantization,
    ) -> Result<(), MetricsError> {
        self.frames += 1;
        if let Some((pred, gt)) = segm {
            self.segm.add(&SegmCounts::from_maps(pred, gt)?);
        }
        if let Some((pred, gt)) = depth {
            let s = foreground_sums(pred, gt)?;
            if s.n > 0 {
                self.st_sum += s.st_rmse_mm(q)?;
                self.st_frames += 1;
                self.depth.add(&s);
            }
            let j = joint_sums(pred, gt, joints2d)?;
            if j.n > 0 {
                self.st_pose_sum += j.st_rmse_mm(q)?;
                self.st_pose_frames += 1;
                self.joints.add(&j);
            }
        }
        Ok(())
    }

    pub fn report(&self, q: &DepthQuantization) -> MetricsReport {
        let s = self.segm.metrics();
        let avg = |sum: f64, n: u64| (n > 0).then(|| sum / n as f64);
        MetricsReport {
            frames: self.frames,
            per_part_iou: s.per_part_iou,
            mean_iou: s.mean_iou,
            pixel_accuracy: s.pixel_accuracy,
            global_accuracy: s.global_accuracy,
            rmse_mm: self.depth.rmse_mm(q).ok(),
            st_rmse_mm: avg(self.st_sum, self.st_frames),
            pose_rmse_mm: self.joints.rmse_mm(q).ok(),
            st_pose_rmse_mm: avg(self.st_pose_sum, self.st_pose_frames),
            foreground_pixels: self.depth.n,
            joint_pixels: self.joints.n,
        }
    }
}

fn fmt_opt(v: Option<f64>, scale: f64, unit: &str) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}{unit}", x * scale))
}

/// Aligned plain-text rendering of a report.
pub fn format_report(r: &MetricsReport) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k:<18}{v:>12}\n"));
    line("frames", r.frames.to_string());
    line("mean IOU", fmt_opt(r.mean_iou, 100.0, "%"));
    line("pixel accuracy", fmt_opt(r.pixel_accuracy, 100.0, "%"));
    line("global accuracy", fmt_opt(r.global_accuracy, 100.0, "%"));
    line("RMSE", fmt_opt(r.rmse_mm, 1.0, " mm"));
    line("st-RMSE", fmt_opt(r.st_rmse_mm, 1.0, " mm"));
    line("PoseRMSE", fmt_opt(r.pose_rmse_mm, 1.0, " mm"));
    line("st-PoseRMSE", fmt_opt(r.st_pose_rmse_mm, 1.0, " mm"));
    for (i, iou) in r.per_part_iou.iter().enumerate() {
        let name = crate::body_model::part::NAMES[i];
        line(&format!("IOU {name}"), fmt_opt(*iou, 100.0, "%"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: u32, h: u32, v: Vec<u8>) -> Raster<u8> {
        Raster::from_vec(w, h, 1, v).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let labels: Vec<u8> = (0..16).map(|i| (i % 15) as u8).collect();
        let gt = map(4, 4, labels);
        let m = segm_metrics(&gt, &gt).unwrap();
        assert!(m.per_part_iou.iter().all(|v| *v == Some(1.0)));
        assert_eq!(m.mean_iou, Some(1.0));
        assert_eq!(m.pixel_accuracy, Some(1.0));
    }

    #[test]
    fn toy_four_by_four() {
        let gt = map(4, 4, [vec![1; 8], vec![2; 8]].concat());
        let pred = map(4, 4, [vec![1; 4], vec![0; 12]].concat());
        let m = segm_metrics(&pred, &gt).unwrap();
        assert_eq!(m.per_part_iou[0], Some(0.5));
        assert_eq!(m.per_part_iou[1], Some(0.0));
        assert!(m.per_part_iou[2..].iter().all(Option::is_none));
        assert_eq!(m.mean_iou, Some(0.25));
        assert_eq!(m.pixel_accuracy, Some(0.25));
        assert_eq!(m.global_accuracy, Some(0.25));
    }

    #[test]
    fn disjoint_part_has_zero_iou() {
        let gt = map(2, 1, vec![1, 0]);
        let pred = map(2, 1, vec![0, 1]);
        assert_eq!(segm_metrics(&pred, &gt).unwrap().per_part_iou[0], Some(0.0));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = map(2, 1, vec![1, 0]);
        let b = map(1, 2, vec![1, 0]);
        assert!(matches!(
            segm_metrics(&a, &b),
            Err(MetricsError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn rmse_examples() {
        let q = DepthQuantization::default();
        let gt = map(4, 1, vec![10, 11, 12, 0]);
        assert_eq!(depth_rmse(&gt, &gt, &q).unwrap(), 0.0);
        let plus_one = map(4, 1, vec![11, 12, 13, 5]);
        assert!((depth_rmse(&plus_one, &gt, &q).unwrap() - 45.0).abs() < 1e-9);
        let gt = map(4, 1, vec![10, 10, 10, 10]);
        let half = map(4, 1, vec![12, 12, 10, 10]);
        assert!((depth_rmse(&half, &gt, &q).unwrap() - 45.0 * 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(
            depth_rmse(&gt, &map(4, 1, vec![0; 4]), &q),
            Err(MetricsError::EmptyForeground)
        );
    }

    #[test]
    fn st_rmse_examples() {
        let q = DepthQuantization::default();
        let gt = map(4, 1, vec![1, 2, 3, 4]);
        // pred = 2·gt + 5 bins.
        let pred = map(4, 1, vec![7, 9, 11, 13]);
        assert!(st_rmse(&pred, &gt, &q).unwrap().abs() < 1e-9);
        // Constant prediction: population std of gt depths.
        let constant = map(4, 1, vec![10; 4]);
        let zs = [45.0, 90.0, 135.0, 180.0];
        let m = zs.iter().sum::<f64>() / 4.0;
        let std = (zs.iter().map(|z| (z - m).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!((st_rmse(&constant, &gt, &q).unwrap() - std).abs() < 1e-9);
    }

    #[test]
    fn pose_examples() {
        let q = DepthQuantization::default();
        let gt = map(3, 3, vec![0, 0, 0, 0, 10, 0, 0, 0, 0]);
        let pred = map(3, 3, vec![0, 0, 0, 0, 13, 0, 0, 0, 0]);
        let joints = [[1.2, 0.9], [10.0, 1.0], [0.0, 0.0]];
        let (rmse, st) = pose_rmse(&pred, &gt, &joints, &q).unwrap();
        assert!((rmse - 135.0).abs() < 1e-9);
        assert_eq!(st, 0.0);
        assert_eq!(pose_rmse(&gt, &gt, &joints, &q).unwrap().0, 0.0);
        assert_eq!(
            pose_rmse(&gt, &gt, &[[0.0, 0.0], [2.4, 2.4]], &q),
            Err(MetricsError::NoUsableJoints)
        );
    }

    #[test]
    fn joint_pixel_rounds_half_up() {
        assert_eq!(joint_pixel([0.5, 1.49], 4, 4), Some((1, 1)));
        assert_eq!(joint_pixel([-0.5, 0.0], 4, 4), Some((0, 0)));
        assert_eq!(joint_pixel([-0.51, 0.0], 4, 4), None);
        assert_eq!(joint_pixel([3.5, 0.0], 4, 4), None);
    }
}
