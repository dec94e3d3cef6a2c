//! Single-class detection metrics: IoU, greedy matching, precision / recall /
//! F1 at a confidence threshold, and average precision at one or ten IoU
//! thresholds.
//!
//! Conventions:
//! - predictions are ranked by descending confidence, ties kept in input order;
//! - each prediction takes the highest-IoU still-unmatched ground truth box
//!   whose IoU reaches the threshold (greedy, not optimal assignment);
//! - AP integrates the monotone precision envelope over every recall step
//!   ("all points"); 101-point sampling is available as an option.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BBox;

/// Default confidence threshold for precision / recall / F1 reporting.
pub const DEFAULT_CONF_THRESH: f64 = 0.25;
/// Default IoU threshold for precision / recall / F1 reporting.
pub const DEFAULT_IOU_THRESH: f64 = 0.3;

/// `0.50, 0.55, …, 0.95`.
pub fn coco_iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// Continuous axis-aligned box in pixel units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxF {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
}

impl BoxF {
    pub fn new(x_min: f64, y_min: f64, width: f64, height: f64) -> Self {
        Self {
            x_min,
            y_min,
            width,
            height,
        }
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }
}

impl From<BBox> for BoxF {
    fn from(b: BBox) -> Self {
        BoxF::new(b.x_min as f64, b.y_min as f64, b.width as f64, b.height as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: u32,
    pub bbox: BoxF,
    pub confidence: f64,
}

impl Detection {
    pub fn new(class_id: u32, bbox: BoxF, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Spec(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self {
            class_id,
            bbox,
            confidence,
        })
    }
}

pub fn iou(a: &BoxF, b: &BoxF) -> f64 {
    let ix = (a.x_min + a.width).min(b.x_min + b.width) - a.x_min.max(b.x_min);
    let iy = (a.y_min + a.height).min(b.y_min + b.height) - a.y_min.max(b.y_min);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Indices of `preds` by descending confidence, ties in input order.
fn rank(preds: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .confidence
            .partial_cmp(&preds[a].confidence)
            .unwrap_or(Ordering::Equal)
    });
    order
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `(prediction index, ground-truth index, iou)`.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Per prediction (input order): whether it was a true positive.
    pub is_tp: Vec<bool>,
}

pub fn match_detections(preds: &[Detection], gts: &[BoxF], iou_thresh: f64) -> MatchResult {
    let mut taken = vec![false; gts.len()];
    let mut is_tp = vec![false; preds.len()];
    let mut pairs = Vec::new();
    for p in rank(preds) {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let v = iou(&preds[p].bbox, gt);
            if v >= iou_thresh && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            taken[g] = true;
            is_tp[p] = true;
            pairs.push((p, g, v));
        }
    }
    let tp = pairs.len();
    MatchResult {
        tp,
        fp: preds.len() - tp,
        fn_: gts.len() - tp,
        pairs,
        is_tp,
    }
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Predictions and ground truth of one image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImageEval {
    pub image_id: String,
    pub preds: Vec<Detection>,
    pub gts: Vec<BoxF>,
}

impl ImageEval {
    pub fn new(image_id: impl Into<String>, preds: Vec<Detection>, gts: Vec<BoxF>) -> Self {
        Self {
            image_id: image_id.into(),
            preds,
            gts,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
}

/// Precision, recall and F1 over a set of images, keeping only predictions
/// with `confidence >= conf_thresh`. Counts are summed over images.
pub fn pr_f1_over(images: &[ImageEval], iou_thresh: f64, conf_thresh: f64) -> PrF1 {
    let mut c = Counts::default();
    for img in images {
        let kept: Vec<Detection> = img
            .preds
            .iter()
            .filter(|d| d.confidence >= conf_thresh)
            .copied()
            .collect();
        let m = match_detections(&kept, &img.gts, iou_thresh);
        c.tp += m.tp;
        c.fp += m.fp;
        c.fn_ += m.fn_;
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    PrF1 {
        precision,
        recall,
        f1: f1_score(precision, recall),
        counts: c,
    }
}

pub fn pr_f1_at(preds: &[Detection], gts: &[BoxF], iou_thresh: f64, conf_thresh: f64) -> PrF1 {
    pr_f1_over(&[ImageEval::new("", preds.to_vec(), gts.to_vec())], iou_thresh, conf_thresh)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    AllPoints,
    Points101,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub confidence: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Cumulative precision/recall after each prediction, pooled over images
/// and ranked by confidence (ties by image order, then input order).
pub fn pr_curve(images: &[ImageEval], iou_thresh: f64) -> (Vec<PrPoint>, usize) {
    let n_gt: usize = images.iter().map(|i| i.gts.len()).sum();
    let mut pooled: Vec<(f64, bool)> = Vec::new();
    for img in images {
        let m = match_detections(&img.preds, &img.gts, iou_thresh);
        pooled.extend(img.preds.iter().zip(&m.is_tp).map(|(d, &tp)| (d.confidence, tp)));
    }
    pooled.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    let mut tp = 0usize;
    let curve = pooled
        .iter()
        .enumerate()
        .map(|(k, &(confidence, hit))| {
            tp += hit as usize;
            PrPoint {
                confidence,
                precision: tp as f64 / (k + 1) as f64,
                recall: ratio(tp, n_gt),
            }
        })
        .collect();
    (curve, n_gt)
}

fn integrate(curve: &[PrPoint], interpolation: Interpolation) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    // Envelope: best precision at this recall or any higher one.
    let mut env: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for k in (0..env.len().saturating_sub(1)).rev() {
        env[k] = env[k].max(env[k + 1]);
    }
    match interpolation {
        Interpolation::AllPoints => {
            let mut ap = 0.0;
            let mut prev = 0.0;
            for (p, e) in curve.iter().zip(&env) {
                if p.recall > prev {
                    ap += (p.recall - prev) * e;
                    prev = p.recall;
                }
            }
            ap
        }
        Interpolation::Points101 => {
            let mut sum = 0.0;
            let mut k = 0;
            for t in 0..=100 {
                let r = t as f64 / 100.0;
                while k < curve.len() && curve[k].recall < r {
                    k += 1;
                }
                if k < curve.len() {
                    sum += env[k];
                }
            }
            sum / 101.0
        }
    }
}

/// Area under the pooled precision–recall curve. Zero when there is no
/// ground truth.
pub fn average_precision_over(images: &[ImageEval], iou_thresh: f64, interpolation: Interpolation) -> f64 {
    let (curve, n_gt) = pr_curve(images, iou_thresh);
    if n_gt == 0 {
        return 0.0;
    }
    integrate(&curve, interpolation)
}

pub fn average_precision(preds: &[Detection], gts: &[BoxF], iou_thresh: f64) -> f64 {
    average_precision_over(
        &[ImageEval::new("", preds.to_vec(), gts.to_vec())],
        iou_thresh,
        Interpolation::AllPoints,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSuite {
    pub map50: f64,
    pub map50_95: f64,
    /// `(iou threshold, AP)` for each of the ten thresholds.
    pub per_threshold: Vec<(f64, f64)>,
}

/// AP at IoU 0.5 and the mean AP over 0.50:0.05:0.95. With a single class
/// the mean over classes is the AP itself.
pub fn map_suite_over(images: &[ImageEval], interpolation: Interpolation) -> MapSuite {
    let per_threshold: Vec<(f64, f64)> = coco_iou_thresholds()
        .into_iter()
        .map(|t| (t, average_precision_over(images, t, interpolation)))
        .collect();
    let map50 = per_threshold[0].1;
    let map50_95 = per_threshold.iter().map(|(_, ap)| ap).sum::<f64>() / per_threshold.len() as f64;
    MapSuite {
        map50,
        map50_95,
        per_threshold,
    }
}

pub fn map_suite(preds: &[Detection], gts: &[BoxF]) -> (f64, f64) {
    let s = map_suite_over(
        &[ImageEval::new("", preds.to_vec(), gts.to_vec())],
        Interpolation::AllPoints,
    );
    (s.map50, s.map50_95)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub map50: f64,
    pub map50_95: f64,
    pub counts: Counts,
    pub conf_thresh: f64,
    pub iou_thresh: f64,
    pub interpolation: Interpolation,
    pub n_images: usize,
    pub ap_per_iou: Vec<(f64, f64)>,
    /// Precision/recall after each ranked prediction at IoU 0.5.
    pub pr_curve_50: Vec<PrPoint>,
    pub seed: Option<u64>,
}

pub fn evaluate(images: &[ImageEval], conf_thresh: f64, iou_thresh: f64, interpolation: Interpolation) -> EvalReport {
    let prf = pr_f1_over(images, iou_thresh, conf_thresh);
    let suite = map_suite_over(images, interpolation);
    let (curve, _) = pr_curve(images, 0.5);
    EvalReport {
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        map50: suite.map50,
        map50_95: suite.map50_95,
        counts: prf.counts,
        conf_thresh,
        iou_thresh,
        interpolation,
        n_images: images.len(),
        ap_per_iou: suite.per_threshold,
        pr_curve_50: curve,
        seed: None,
    }
}

impl EvalReport {
    /// Fixed-width table with the columns Precision, Recall, F1, mAP50,
    /// mAP50-95.
    pub fn to_table(&self, name: &str) -> String {
        let name_w = name.len().max(8);
        let mut s = format!(
            "{:<name_w$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}\n",
            "Set", "Precision", "Recall", "F1", "mAP50", "mAP50-95"
        );
        s.push_str(&format!(
            "{:<name_w$}  {:>9.3}  {:>9.3}  {:>9.3}  {:>9.3}  {:>9.3}\n",
            name, self.precision, self.recall, self.f1, self.map50, self.map50_95
        ));
        s
    }
}

/// Parses a prediction file: `class conf cx cy w h` per line, normalized
/// coordinates, denormalized with `image_dims`.
pub fn parse_predictions(text: &str, image_dims: (u32, u32), path: &Path) -> Result<Vec<Detection>> {
    let (iw, ih) = (image_dims.0 as f64, image_dims.1 as f64);
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let class_id = f[0].parse::<u32>().map_err(|e| err(e.to_string()))?;
        let v: Vec<f64> = f[1..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| err(e.to_string())))
            .collect::<Result<_>>()?;
        let bbox = BoxF::new((v[1] - v[3] / 2.0) * iw, (v[2] - v[4] / 2.0) * ih, v[3] * iw, v[4] * ih);
        out.push(Detection::new(class_id, bbox, v[0]).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}
