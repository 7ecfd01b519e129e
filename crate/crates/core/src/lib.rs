//! Procedural generation of articulated synthetic humans with per-pixel
//! ground truth, plus the dataset split machinery and evaluation metrics
//! used to benchmark models trained on the output.

pub mod body_model;
pub mod camera;
pub mod dataset_io;
pub mod ground_truth;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod raster;
pub mod renderer;
pub mod scene_sampler;
pub mod splitter;
