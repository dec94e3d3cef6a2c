//! Geometry-consistent cut-and-paste: real object cutouts are aligned by
//! principal axes, scaled to cover, clipped to the synthetic instance mask and
//! blended into synthetic scenes; labels and detection metrics round out the
//! dataset loop.

pub mod buffer;
pub mod compose;
pub mod config;
pub mod error;
pub mod eval;
pub mod labels;
pub mod mask;
pub mod rng;
pub mod synth;

pub use buffer::{ingest_buffer, sample_cutout, CutoutBuffer, InstanceCutout};
pub use compose::{
    blend, clip_to_target, compose_scene, plan_alignment, transform_cutout, ComposeConfig, CompositeRecord,
    SceneInstance,
};
pub use error::{Error, Result};
pub use eval::{average_precision, iou, map_suite, match_detections, pr_f1_at, BoxF, Detection, EvalReport};
pub use labels::{emit_labels, parse_instance_map, DetectionLabel};
pub use mask::{compute_pca, mask_bbox, rotation_angle, scale_factor, AlignmentPlan, BBox, BinaryMask, PrincipalAxes};
pub use synth::{synth_scene, LightingLevel, SynthSceneSpec};
