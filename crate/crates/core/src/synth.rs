//! Procedural toy scenes: elongated clusters of overlapping discs ("bunches")
//! on a foliage-like background, with an exact instance map and a four-step
//! lighting sweep.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use image::{ImageBuffer, Luma, Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::InstanceCutout;
use crate::compose::SceneInstance;
use crate::error::{Error, Result};
use crate::labels::{parse_instance_map, InstanceMap};
use crate::mask::BinaryMask;
use crate::rng::{derive_rng, Stream};

pub type InstanceMapImage = ImageBuffer<Luma<u16>, Vec<u16>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightingLevel {
    Low,
    Medium,
    High,
    Backlight,
}

impl LightingLevel {
    pub const ALL: [LightingLevel; 4] = [
        LightingLevel::Low,
        LightingLevel::Medium,
        LightingLevel::High,
        LightingLevel::Backlight,
    ];

    /// `(gain, gamma)` applied as `255 * gain * (v / 255)^gamma`.
    pub fn gain_gamma(self) -> (f64, f64) {
        match self {
            LightingLevel::Low => (0.5, 1.2),
            LightingLevel::Medium => (1.0, 1.0),
            LightingLevel::High => (1.5, 0.9),
            LightingLevel::Backlight => (2.2, 0.7),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LightingLevel::Low => "low",
            LightingLevel::Medium => "medium",
            LightingLevel::High => "high",
            LightingLevel::Backlight => "backlight",
        }
    }
}

impl FromStr for LightingLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LightingLevel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Spec(format!("unknown lighting level {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSceneSpec {
    pub width: u32,
    pub height: u32,
    pub n_instances: u32,
    /// Bunch length range in pixels.
    pub size_range: (f64, f64),
    /// Range of major-axis angles in radians (image coordinates).
    pub orientation_range: (f64, f64),
    pub lighting_level: LightingLevel,
    /// Leaf blobs drawn over everything, occluding bunches.
    #[serde(default)]
    pub leaf_occluders: u32,
    pub seed: u64,
}

impl Default for SynthSceneSpec {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            n_instances: 5,
            size_range: (50.0, 110.0),
            orientation_range: (-FRAC_PI_2, FRAC_PI_2),
            lighting_level: LightingLevel::Medium,
            leaf_occluders: 2,
            seed: 0,
        }
    }
}

impl SynthSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::Spec(format!(
                "scene must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if self.n_instances >= u16::MAX as u32 {
            return Err(Error::Spec(format!("too many instances: {}", self.n_instances)));
        }
        let (lo, hi) = self.size_range;
        let frame = self.width.min(self.height) as f64;
        if !(lo.is_finite() && hi.is_finite() && lo >= 4.0 && lo <= hi && hi <= frame) {
            return Err(Error::Spec(format!(
                "size_range ({lo}, {hi}) must satisfy 4 <= min <= max <= {frame}"
            )));
        }
        let (a, b) = self.orientation_range;
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::Spec(format!("orientation_range ({a}, {b}) is not a valid interval")));
        }
        Ok(())
    }
}

pub struct SynthScene {
    pub image: RgbImage,
    pub instances: Vec<SceneInstance>,
    pub instance_map: InstanceMapImage,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Integer hash noise in `[-1, 1]`, stable across platforms.
fn hash_noise(seed: u64, x: u32, y: u32) -> f64 {
    let mut h = seed ^ ((x as u64) << 32 | y as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    h ^= h >> 31;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 29;
    (h % 2001) as f64 / 1000.0 - 1.0
}

fn shade(base: [f64; 3], k: f64) -> Rgb<u8> {
    Rgb(base.map(|c| (c * k).round().clamp(0.0, 255.0) as u8))
}

/// A disc cluster laid out along a principal direction.
struct Bunch {
    discs: Vec<(f64, f64, f64)>,
}

fn layout_bunch<R: Rng + ?Sized>(rng: &mut R, cx: f64, cy: f64, length: f64, angle: f64) -> Bunch {
    let (s, c) = angle.sin_cos();
    let half = 0.5 * length;
    let mut discs = Vec::new();
    // Spine: a row of discs along the axis keeps the cluster connected and elongated.
    let spine_r = 0.13 * length;
    let n_spine = 7;
    for i in 0..n_spine {
        let t = -half + spine_r + (length - 2.0 * spine_r) * i as f64 / (n_spine - 1) as f64;
        discs.push((cx + c * t, cy + s * t, spine_r.max(1.5)));
    }
    let n_berries = rng.gen_range(5..9);
    for _ in 0..n_berries {
        let t = rng.gen_range(-0.8..0.8) * (half - spine_r);
        let spread = 0.16 * length * (1.0 - 0.4 * (t / half + 1.0) * 0.5);
        let o = rng.gen_range(-1.0..1.0) * spread;
        let r = rng.gen_range(0.07..0.11) * length;
        // Berries come in mirrored pairs so the cluster stays symmetric about its axis.
        discs.push((cx + c * t - s * o, cy + s * t + c * o, r.max(1.0)));
        discs.push((cx + c * t + s * o, cy + s * t - c * o, r.max(1.0)));
    }
    Bunch { discs }
}

fn draw_discs(discs: &[(f64, f64, f64)], w: u32, h: u32, mut put: impl FnMut(u32, u32, f64)) {
    for &(dx, dy, r) in discs {
        let x0 = (dx - r).floor().max(0.0) as i64;
        let x1 = (dx + r).ceil().min(w as f64 - 1.0) as i64;
        let y0 = (dy - r).floor().max(0.0) as i64;
        let y1 = (dy + r).ceil().min(h as f64 - 1.0) as i64;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((x as f64 - dx).powi(2) + (y as f64 - dy).powi(2)).sqrt();
                if d <= r {
                    put(x as u32, y as u32, d / r);
                }
            }
        }
    }
}

fn draw_leaf<R: Rng + ?Sized>(rng: &mut R, img: &mut RgbImage, map: &mut InstanceMapImage) {
    let (w, h) = img.dimensions();
    let frame = w.min(h) as f64;
    let (cx, cy) = (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
    let a = rng.gen_range(0.12..0.25) * frame;
    let b = a * rng.gen_range(0.35..0.6);
    let (s, c) = rng.gen_range(0.0..std::f64::consts::PI).sin_cos();
    let tone = rng.gen_range(0.8..1.1);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let u = c * dx + s * dy;
            let v = -s * dx + c * dy;
            let q = (u / a).powi(2) + (v / b).powi(2);
            if q <= 1.0 {
                let vein = if v.abs() < 1.0 { 1.25 } else { 1.0 };
                img.put_pixel(x, y, shade([45.0, 105.0, 35.0], tone * vein * (1.0 - 0.25 * q)));
                map.put_pixel(x, y, Luma([0]));
            }
        }
    }
}

fn apply_lighting(img: &mut RgbImage, level: LightingLevel) {
    let (gain, gamma) = level.gain_gamma();
    let lut: Vec<u8> = (0..256)
        .map(|v| (255.0 * gain * (v as f64 / 255.0).powf(gamma)).round().clamp(0.0, 255.0) as u8)
        .collect();
    for p in img.pixels_mut() {
        for c in p.0.iter_mut() {
            *c = lut[*c as usize];
        }
    }
}

/// Renders one scene. Later bunches occlude earlier ones; leaves occlude
/// everything. Instances fully hidden by occlusion are not emitted.
pub fn synth_scene(spec: &SynthSceneSpec) -> Result<SynthScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = derive_rng(spec.seed, Stream::Synth);

    let mut img = RgbImage::from_fn(w, h, |x, y| {
        let ny = y as f64 / h as f64;
        let n = hash_noise(spec.seed, x / 2, y / 2);
        shade([70.0 + 40.0 * ny, 95.0 + 30.0 * ny, 55.0], 1.0 + 0.08 * n)
    });
    let mut map = InstanceMapImage::new(w, h);

    // Every bunch gets the same berry texture.
    let berry = [150.0, 175.0, 80.0];
    for id in 1..=spec.n_instances {
        let length = uniform(&mut rng, spec.size_range);
        let angle = uniform(&mut rng, spec.orientation_range);
        let mx = (0.5 * length).min(0.5 * w as f64);
        let my = (0.5 * length).min(0.5 * h as f64);
        let cx = uniform(&mut rng, (mx, w as f64 - mx));
        let cy = uniform(&mut rng, (my, h as f64 - my));
        let bunch = layout_bunch(&mut rng, cx, cy, length, angle);
        draw_discs(&bunch.discs, w, h, |x, y, d| {
            let k = 0.7 + 0.3 * (1.0 - d * d) + if d < 0.35 { 0.15 } else { 0.0 };
            img.put_pixel(x, y, shade(berry, k));
            map.put_pixel(x, y, Luma([id as u16]));
        });
    }
    for _ in 0..spec.leaf_occluders {
        draw_leaf(&mut rng, &mut img, &mut map);
    }
    apply_lighting(&mut img, spec.lighting_level);

    let instances = parse_instance_map(InstanceMap::Ids(&map))?;
    Ok(SynthScene {
        image: img,
        instances,
        instance_map: map,
    })
}

/// `scene.json` contents: the spec that produced the scene.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneEcho {
    pub scene_id: String,
    pub master_seed: Option<u64>,
    pub spec: SynthSceneSpec,
    pub instance_ids: Vec<u32>,
}

pub fn write_scene(dir: &Path, scene_id: &str, scene: &SynthScene, echo: &SceneEcho) -> Result<()> {
    let rgb = dir.join(format!("{scene_id}.rgb.png"));
    scene.image.save(&rgb).map_err(|e| Error::image(&rgb, e))?;
    let inst = dir.join(format!("{scene_id}.inst.png"));
    scene.instance_map.save(&inst).map_err(|e| Error::image(&inst, e))?;
    let json = dir.join(format!("{scene_id}.scene.json"));
    let mut text = serde_json::to_string_pretty(echo).map_err(|e| Error::json(&json, e))?;
    text.push('\n');
    fs::write(&json, text).map_err(|e| Error::io(&json, e))
}

/// A stand-in for a real extracted instance: a differently textured bunch on
/// a cropped patch of its own background, with its mask. Used to populate
/// demo buffers when no real cutouts are at hand.
pub fn synth_cutout(id: &str, seed: u64, size_range: (f64, f64)) -> Result<InstanceCutout> {
    let mut rng = derive_rng(seed, Stream::Cutouts);
    let length = uniform(&mut rng, size_range).max(12.0);
    let angle = rng.gen_range(-FRAC_PI_2..FRAC_PI_2);
    let side = (length * 1.3).ceil() as u32 + 4;
    let c = side as f64 / 2.0;
    let bunch = layout_bunch(&mut rng, c, c, length, angle);
    let hue: [f64; 3] = [
        rng.gen_range(70.0..140.0),
        rng.gen_range(20.0..60.0),
        rng.gen_range(60.0..120.0),
    ];
    let mut color = RgbImage::from_fn(side, side, |x, y| {
        shade([90.0, 80.0, 60.0], 1.0 + 0.1 * hash_noise(seed, x, y))
    });
    let mut mask = BinaryMask::new(side, side);
    draw_discs(&bunch.discs, side, side, |x, y, d| {
        let grain = 0.06 * hash_noise(seed.wrapping_add(1), x, y);
        let k = 0.6 + 0.5 * (1.0 - d * d) + grain + if d < 0.3 { 0.25 } else { 0.0 };
        color.put_pixel(x, y, shade(hue, k));
        mask.set(x, y, true);
    });
    InstanceCutout::new(id, color, mask, format!("procedural:seed={seed}"))
}
