//! Pasting real cutouts onto synthetic instances.
//!
//! Per instance: sample a cutout, align its major axis with the instance's
//! (modulo π), scale it so its box covers the instance's box, move its
//! centroid onto the instance centroid, keep only the pixels that fall inside
//! the instance mask, and blend.

use std::sync::OnceLock;

use image::{Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{sample_cutout, CutoutBuffer, InstanceCutout};
use crate::error::{Error, Result};
use crate::mask::{
    compute_pca, mask_bbox, rotation_angle, scale_factor_dims, AlignmentPlan, BBox, BinaryMask,
    PrincipalAxes,
};

pub const DEFAULT_MIN_PASTE_AREA: usize = 64;

/// One synthetic object instance in scene coordinates.
#[derive(Debug)]
pub struct SceneInstance {
    pub instance_id: u32,
    pub mask: BinaryMask,
    pub bbox: BBox,
    area: usize,
    axes: OnceLock<Option<PrincipalAxes>>,
}

impl Clone for SceneInstance {
    fn clone(&self) -> Self {
        Self {
            instance_id: self.instance_id,
            mask: self.mask.clone(),
            bbox: self.bbox,
            area: self.area,
            axes: self.axes.clone(),
        }
    }
}

impl SceneInstance {
    pub fn new(instance_id: u32, mask: BinaryMask) -> Result<Self> {
        let bbox = mask_bbox(&mask)?;
        let area = mask.area();
        Ok(Self {
            instance_id,
            mask,
            bbox,
            area,
            axes: OnceLock::new(),
        })
    }

    pub fn area(&self) -> usize {
        self.area
    }

    /// Principal axes of the mask, computed on first use.
    pub fn axes(&self) -> Result<PrincipalAxes> {
        self.axes
            .get_or_init(|| compute_pca(&self.mask).ok())
            .ok_or(Error::DegenerateMask(self.area))
    }
}

/// Whether the scale factor is measured on the cutout before or after it is
/// rotated into alignment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleReference {
    #[default]
    PostRotation,
    PreRotation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PasteOrder {
    /// Largest instance first, ties by instance id; smaller pastes land on top.
    #[default]
    DescendingArea,
    InstanceId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposeConfig {
    pub min_paste_area: usize,
    pub feather_radius: u32,
    pub paste_order: PasteOrder,
    pub scale_reference: ScaleReference,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        Self {
            min_paste_area: DEFAULT_MIN_PASTE_AREA,
            feather_radius: 0,
            paste_order: PasteOrder::default(),
            scale_reference: ScaleReference::default(),
        }
    }
}

/// A transformed cutout positioned in a scene. `color` and `mask` cover the
/// part of the transformed footprint that lies inside the scene; `origin` is
/// the scene position of their top-left pixel.
#[derive(Clone, Debug)]
pub struct PlacedCutout {
    pub cutout_id: String,
    pub origin: (i64, i64),
    pub color: RgbImage,
    pub mask: BinaryMask,
    /// Tight box of the whole transformed mask before cropping to the scene.
    pub footprint: BBox,
}

impl PlacedCutout {
    /// The placed mask as a full-scene raster.
    pub fn scene_mask(&self, width: u32, height: u32) -> BinaryMask {
        self.mask.embed(self.origin.0, self.origin.1, width, height)
    }

    fn color_at(&self, x: u32, y: u32) -> Option<Rgb<u8>> {
        let lx = x as i64 - self.origin.0;
        let ly = y as i64 - self.origin.1;
        if lx < 0 || ly < 0 || lx >= self.color.width() as i64 || ly >= self.color.height() as i64 {
            return None;
        }
        Some(*self.color.get_pixel(lx as u32, ly as u32))
    }
}

fn mask_centroid(mask: &BinaryMask) -> Result<[f64; 2]> {
    let (mut n, mut sx, mut sy) = (0u64, 0u64, 0u64);
    for (x, y) in mask.foreground() {
        n += 1;
        sx += x as u64;
        sy += y as u64;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok([sx as f64 / n as f64, sy as f64 / n as f64])
}

/// Width and height of the mask's footprint after rotating by `theta`
/// about its centroid, treating every pixel as a unit square. Exact for
/// `theta = 0` (the plain bbox size).
pub fn rotated_footprint_dims(mask: &BinaryMask, theta: f64) -> Result<(f64, f64)> {
    let c = mask_centroid(mask)?;
    let (s, co) = theta.sin_cos();
    let half = 0.5 * (co.abs() + s.abs());
    let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in mask.foreground() {
        let (dx, dy) = (x as f64 - c[0], y as f64 - c[1]);
        let u = co * dx - s * dy;
        let v = s * dx + co * dy;
        u0 = u0.min(u);
        u1 = u1.max(u);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    Ok((u1 - u0 + 2.0 * half, v1 - v0 + 2.0 * half))
}

/// Rotation from the cutout's major axis onto the target's, and the uniform
/// scale that makes the cutout's box cover the target's box.
pub fn plan_alignment(
    cutout: &InstanceCutout,
    target: &SceneInstance,
    scale_reference: ScaleReference,
) -> Result<AlignmentPlan> {
    let real = compute_pca(&cutout.mask)?;
    let sim = target.axes()?;
    let theta = rotation_angle(&real, &sim);
    let real_dims = match scale_reference {
        ScaleReference::PostRotation => rotated_footprint_dims(&cutout.mask, theta)?,
        ScaleReference::PreRotation => {
            let b = mask_bbox(&cutout.mask)?;
            (b.width as f64, b.height as f64)
        }
    };
    let sim_dims = (target.bbox.width as f64, target.bbox.height as f64);
    AlignmentPlan::new(theta, scale_factor_dims(sim_dims, real_dims), sim.centroid)
}

fn bilinear(img: &RgbImage, x: f64, y: f64) -> Rgb<u8> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let clamp = |v: i64, hi: i64| v.clamp(0, hi - 1) as u32;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let p = |xx: i64, yy: i64| img.get_pixel(clamp(xx, w), clamp(yy, h)).0;
    let (a, b, c, d) = (p(x0, y0), p(x0 + 1, y0), p(x0, y0 + 1), p(x0 + 1, y0 + 1));
    let mut out = [0u8; 3];
    for k in 0..3 {
        let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
        let bot = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
        out[k] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}

/// Rotates the cutout by `plan.theta_rot` about its mask centroid, scales it
/// by `plan.scale` and moves the centroid onto `plan.target_centroid`, in a
/// single inverse-mapped resampling pass: bilinear for color,
/// nearest-neighbor for the mask.
pub fn transform_cutout(cutout: &InstanceCutout, plan: &AlignmentPlan, scene_dims: (u32, u32)) -> Result<PlacedCutout> {
    let c = mask_centroid(&cutout.mask)?;
    let (sin, cos) = plan.theta_rot.sin_cos();
    let s = plan.scale;
    let t = plan.target_centroid;

    // Forward extent of the transformed pixel squares.
    let half = 0.5 * s * (cos.abs() + sin.abs());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in cutout.mask.foreground() {
        let (dx, dy) = (x as f64 - c[0], y as f64 - c[1]);
        let u = s * (cos * dx - sin * dy) + t[0];
        let v = s * (sin * dx + cos * dy) + t[1];
        x0 = x0.min(u - half);
        x1 = x1.max(u + half);
        y0 = y0.min(v - half);
        y1 = y1.max(v + half);
    }
    let (wx0, wx1) = (x0.floor() as i64 - 1, x1.ceil() as i64 + 1);
    let (wy0, wy1) = (y0.floor() as i64 - 1, y1.ceil() as i64 + 1);

    let inv = |px: f64, py: f64| {
        let (dx, dy) = ((px - t[0]) / s, (py - t[1]) / s);
        (cos * dx + sin * dy + c[0], -sin * dx + cos * dy + c[1])
    };

    // Tight box of the full (unclipped) transformed mask.
    let mut hits: Vec<(i64, i64)> = Vec::new();
    for py in wy0..=wy1 {
        for px in wx0..=wx1 {
            let (qx, qy) = inv(px as f64, py as f64);
            if cutout.mask.get_signed((qx + 0.5).floor() as i64, (qy + 0.5).floor() as i64) {
                hits.push((px, py));
            }
        }
    }
    if hits.is_empty() {
        return Err(Error::EmptyMask);
    }
    let fx0 = hits.iter().map(|p| p.0).min().unwrap();
    let fx1 = hits.iter().map(|p| p.0).max().unwrap();
    let fy0 = hits.iter().map(|p| p.1).min().unwrap();
    let fy1 = hits.iter().map(|p| p.1).max().unwrap();
    let footprint = BBox {
        x_min: fx0,
        y_min: fy0,
        width: (fx1 - fx0 + 1) as u32,
        height: (fy1 - fy0 + 1) as u32,
    };

    let (sw, sh) = (scene_dims.0 as i64, scene_dims.1 as i64);
    let inside: Vec<(i64, i64)> = hits
        .into_iter()
        .filter(|&(x, y)| x >= 0 && y >= 0 && x < sw && y < sh)
        .collect();
    if inside.is_empty() {
        return Err(Error::OutOfFrame);
    }
    let ox = inside.iter().map(|p| p.0).min().unwrap();
    let oy = inside.iter().map(|p| p.1).min().unwrap();
    let w = (inside.iter().map(|p| p.0).max().unwrap() - ox + 1) as u32;
    let h = (inside.iter().map(|p| p.1).max().unwrap() - oy + 1) as u32;

    let mut mask = BinaryMask::new(w, h);
    let mut color = RgbImage::new(w, h);
    for (px, py) in inside {
        let (lx, ly) = ((px - ox) as u32, (py - oy) as u32);
        mask.set(lx, ly, true);
        let (qx, qy) = inv(px as f64, py as f64);
        color.put_pixel(lx, ly, bilinear(&cutout.color, qx, qy));
    }
    Ok(PlacedCutout {
        cutout_id: cutout.id.clone(),
        origin: (ox, oy),
        color,
        mask,
        footprint,
    })
}

/// Keeps only the transformed pixels that also belong to the target
/// instance, so anything already occluding the instance stays on top.
pub fn clip_to_target(transformed: &BinaryMask, target: &BinaryMask) -> Result<BinaryMask> {
    transformed.and(target)
}

/// Alpha for a clip pixel: its distance to the nearest non-clip pixel
/// divided by `radius`, capped at 1. Pixels outside the scene count as clip.
fn feather_alpha(clip: &BinaryMask, x: u32, y: u32, radius: u32) -> f64 {
    if radius == 0 {
        return 1.0;
    }
    let r = radius as i64;
    let mut best2 = i64::MAX;
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = dx * dx + dy * dy;
            if d2 == 0 || d2 > r * r || d2 >= best2 {
                continue;
            }
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx >= clip.width() as i64 || ny >= clip.height() as i64 {
                continue;
            }
            if !clip.get(nx as u32, ny as u32) {
                best2 = d2;
            }
        }
    }
    if best2 == i64::MAX {
        1.0
    } else {
        ((best2 as f64).sqrt() / radius as f64).min(1.0)
    }
}

/// Writes cutout pixels into the scene inside `clip`. With a positive
/// `feather_radius`, pixels closer than that to the clip boundary are mixed
/// linearly by distance; nothing outside `clip` is touched.
pub fn blend(scene: &RgbImage, placed: &PlacedCutout, clip: &BinaryMask, feather_radius: u32) -> Result<RgbImage> {
    if scene.dimensions() != clip.dims() {
        return Err(Error::ShapeMismatch {
            what: "scene",
            left: scene.dimensions(),
            other: "clip",
            right: clip.dims(),
        });
    }
    let mut out = scene.clone();
    for (x, y) in clip.foreground() {
        let Some(src) = placed.color_at(x, y) else {
            debug_assert!(false, "clip pixel outside placed cutout");
            continue;
        };
        let alpha = feather_alpha(clip, x, y, feather_radius);
        let dst = out.get_pixel_mut(x, y);
        if alpha >= 1.0 {
            *dst = src;
        } else {
            for k in 0..3 {
                let v = alpha * src[k] as f64 + (1.0 - alpha) * dst[k] as f64;
                dst[k] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipReason {
    pub kind: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub instance_id: u32,
    pub area_px: usize,
    pub sim_bbox: BBox,
    pub cutout_id: Option<String>,
    pub theta_rot: Option<f64>,
    pub scale: Option<f64>,
    pub target_centroid: Option<[f64; 2]>,
    /// Tight box of the transformed cutout mask, before cropping to the scene.
    pub transformed_bbox: Option<BBox>,
    pub clipped_area_px: usize,
    pub skipped: Option<SkipReason>,
}

impl RecordEntry {
    fn new(inst: &SceneInstance) -> Self {
        Self {
            instance_id: inst.instance_id,
            area_px: inst.area(),
            sim_bbox: inst.bbox,
            cutout_id: None,
            theta_rot: None,
            scale: None,
            target_centroid: None,
            transformed_bbox: None,
            clipped_area_px: 0,
            skipped: None,
        }
    }

    pub fn is_pasted(&self) -> bool {
        self.skipped.is_none()
    }
}

/// Per-scene paste ledger, one entry per instance in paste order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeRecord {
    pub scene_id: String,
    pub seed: Option<u64>,
    pub entries: Vec<RecordEntry>,
}

impl CompositeRecord {
    pub fn pasted(&self) -> impl Iterator<Item = &RecordEntry> {
        self.entries.iter().filter(|e| e.is_pasted())
    }

    pub fn cutout_for(&self, instance_id: u32) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.instance_id == instance_id && e.is_pasted())
            .and_then(|e| e.cutout_id.as_deref())
    }
}

/// Output of [`compose_scene`]: the image, its record, and each pasted
/// instance's clip mask (same order as the pasted record entries).
#[derive(Clone, Debug)]
pub struct Composite {
    pub image: RgbImage,
    pub record: CompositeRecord,
    pub clips: Vec<(u32, BinaryMask)>,
}

fn paste_one<R: Rng + ?Sized>(
    image: &mut RgbImage,
    inst: &SceneInstance,
    buffer: &CutoutBuffer,
    rng: &mut R,
    config: &ComposeConfig,
    entry: &mut RecordEntry,
) -> Result<BinaryMask> {
    let cutout = sample_cutout(buffer, rng)?;
    entry.cutout_id = Some(cutout.id.clone());
    let plan = plan_alignment(cutout, inst, config.scale_reference)?;
    entry.theta_rot = Some(plan.theta_rot);
    entry.scale = Some(plan.scale);
    entry.target_centroid = Some(plan.target_centroid);
    let placed = transform_cutout(cutout, &plan, image.dimensions())?;
    entry.transformed_bbox = Some(placed.footprint);
    let clip = clip_to_target(&placed.scene_mask(image.width(), image.height()), &inst.mask)?;
    entry.clipped_area_px = clip.area();
    if entry.clipped_area_px == 0 {
        return Err(Error::EmptyMask);
    }
    *image = blend(image, &placed, &clip, config.feather_radius)?;
    Ok(clip)
}

/// Pastes a sampled cutout onto every eligible instance of one scene.
///
/// A failure on one instance is recorded as a skip for that instance and
/// never aborts the scene.
pub fn compose_scene<R: Rng + ?Sized>(
    scene_id: &str,
    scene_image: &RgbImage,
    instances: &[SceneInstance],
    buffer: &CutoutBuffer,
    rng: &mut R,
    config: &ComposeConfig,
) -> Result<Composite> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    for inst in instances {
        if inst.mask.dims() != scene_image.dimensions() {
            return Err(Error::ShapeMismatch {
                what: "instance mask",
                left: inst.mask.dims(),
                other: "scene",
                right: scene_image.dimensions(),
            });
        }
    }

    let mut order: Vec<&SceneInstance> = instances.iter().collect();
    match config.paste_order {
        PasteOrder::DescendingArea => {
            order.sort_by(|a, b| b.area().cmp(&a.area()).then(a.instance_id.cmp(&b.instance_id)))
        }
        PasteOrder::InstanceId => order.sort_by_key(|i| i.instance_id),
    }

    let mut image = scene_image.clone();
    let mut entries = Vec::with_capacity(order.len());
    let mut clips = Vec::new();
    for inst in order {
        let mut entry = RecordEntry::new(inst);
        if inst.area() < config.min_paste_area {
            entry.skipped = Some(SkipReason {
                kind: "BelowMinPasteArea".into(),
                detail: format!("{} px < min_paste_area {}", inst.area(), config.min_paste_area),
            });
        } else {
            match paste_one(&mut image, inst, buffer, rng, config, &mut entry) {
                Ok(clip) => clips.push((inst.instance_id, clip)),
                Err(e) => {
                    let kind = match e {
                        Error::EmptyMask if entry.transformed_bbox.is_some() => "EmptyClip",
                        _ => e.kind(),
                    };
                    entry.skipped = Some(SkipReason {
                        kind: kind.into(),
                        detail: e.to_string(),
                    });
                }
            }
        }
        entries.push(entry);
    }
    Ok(Composite {
        image,
        record: CompositeRecord {
            scene_id: scene_id.to_string(),
            seed: None,
            entries,
        },
        clips,
    })
}
