//! Instance ground truth in, detection labels out.
//!
//! Two instance-map encodings are understood:
//! - id-indexed: 16-bit grayscale, pixel value = instance id, 0 = background;
//! - color-coded: 8-bit RGB, one unique non-black color per instance, black =
//!   background.
//!
//! Labels are written one per line as `class cx cy w h`, all normalized by the
//! image size, with six decimals.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use image::{ImageBuffer, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::compose::{CompositeRecord, SceneInstance};
use crate::error::{Error, Result};
use crate::eval::BoxF;
use crate::mask::{BBox, BinaryMask};

pub const GRAPE_CLASS: u32 = 0;

#[derive(Clone, Copy)]
pub enum InstanceMap<'a> {
    Ids(&'a ImageBuffer<Luma<u16>, Vec<u16>>),
    Colors(&'a RgbImage),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapEncoding {
    IdIndexed,
    ColorCoded,
}

impl FromStr for MapEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id-indexed" => Ok(MapEncoding::IdIndexed),
            "color-coded" => Ok(MapEncoding::ColorCoded),
            other => Err(Error::Encoding(format!("unknown instance map encoding {other:?}"))),
        }
    }
}

fn masks_from_keys(width: u32, height: u32, keys: impl Iterator<Item = u32>) -> BTreeMap<u32, Vec<usize>> {
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.enumerate() {
        if k != 0 {
            groups.entry(k).or_default().push(i);
        }
    }
    debug_assert!(groups.values().all(|v| v.iter().all(|&i| i < (width * height) as usize)));
    groups
}

fn to_instances(width: u32, height: u32, groups: BTreeMap<u32, Vec<usize>>, ids: impl Fn(usize, u32) -> u32) -> Result<Vec<SceneInstance>> {
    groups
        .into_iter()
        .enumerate()
        .map(|(rank, (key, pixels))| {
            let mut bits = vec![false; width as usize * height as usize];
            for i in pixels {
                bits[i] = true;
            }
            SceneInstance::new(ids(rank, key), BinaryMask::from_bits(width, height, bits)?)
        })
        .collect()
}

/// One instance per distinct non-background value, in ascending key order.
///
/// For id-indexed maps the instance id is the pixel value. For color-coded
/// maps colors are ordered by their packed `0xRRGGBB` value and numbered from
/// 1. Pixels sharing a key stay one instance even when disconnected.
pub fn parse_instance_map(map: InstanceMap<'_>) -> Result<Vec<SceneInstance>> {
    match map {
        InstanceMap::Ids(img) => {
            let (w, h) = img.dimensions();
            let groups = masks_from_keys(w, h, img.as_raw().iter().map(|&v| v as u32));
            to_instances(w, h, groups, |_, key| key)
        }
        InstanceMap::Colors(img) => {
            let (w, h) = img.dimensions();
            let groups = masks_from_keys(w, h, img.pixels().map(|p| pack_rgb(p.0)));
            to_instances(w, h, groups, |rank, _| rank as u32 + 1)
        }
    }
}

/// Reads an instance map file in the given encoding.
pub fn load_instance_map(path: &Path, encoding: MapEncoding) -> Result<Vec<SceneInstance>> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    match encoding {
        MapEncoding::IdIndexed => {
            let ids = match img {
                image::DynamicImage::ImageLuma16(m) => m,
                image::DynamicImage::ImageLuma8(m) => {
                    let raw = m.as_raw().iter().map(|&v| v as u16).collect();
                    ImageBuffer::from_raw(m.width(), m.height(), raw).expect("raster size")
                }
                other => {
                    return Err(Error::Encoding(format!(
                        "{}: id-indexed map must be grayscale, found {:?}",
                        path.display(),
                        other.color()
                    )))
                }
            };
            parse_instance_map(InstanceMap::Ids(&ids))
        }
        MapEncoding::ColorCoded => parse_instance_map(InstanceMap::Colors(&img.to_rgb8())),
    }
}

fn pack_rgb([r, g, b]: [u8; 3]) -> u32 {
    (r as u32) << 16 | (g as u32) << 8 | b as u32
}

/// Color for an instance id in color-coded exports. Multiplication by an odd
/// constant is a bijection on 24 bits, so distinct ids below 2^24 get
/// distinct colors and only id 0 maps to black.
pub fn instance_color(id: u32) -> Rgb<u8> {
    let v = id.wrapping_mul(0x009E_3779) & 0x00FF_FFFF;
    Rgb([(v >> 16) as u8, (v >> 8) as u8, v as u8])
}

pub fn color_code_map(ids: &ImageBuffer<Luma<u16>, Vec<u16>>) -> RgbImage {
    RgbImage::from_fn(ids.width(), ids.height(), |x, y| instance_color(ids.get_pixel(x, y).0[0] as u32))
}

/// Normalized detection box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionLabel {
    pub class_id: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl DetectionLabel {
    /// Center-of-box normalization of a pixel box.
    pub fn from_bbox(class_id: u32, b: &BBox, (width, height): (u32, u32)) -> Self {
        let (iw, ih) = (width as f64, height as f64);
        Self {
            class_id,
            cx: (b.x_min as f64 + b.width as f64 / 2.0) / iw,
            cy: (b.y_min as f64 + b.height as f64 / 2.0) / ih,
            w: b.width as f64 / iw,
            h: b.height as f64 / ih,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.cx) && unit(self.cy) && self.w > 0.0 && self.w <= 1.0 && self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::Spec(format!("label out of range: {self:?}")));
        }
        Ok(())
    }

    /// Pixel-space box for an image of the given size.
    pub fn denormalize(&self, (width, height): (u32, u32)) -> BoxF {
        let (iw, ih) = (width as f64, height as f64);
        BoxF {
            x_min: (self.cx - self.w / 2.0) * iw,
            y_min: (self.cy - self.h / 2.0) * ih,
            width: self.w * iw,
            height: self.h * ih,
        }
    }

    pub fn to_line(&self) -> String {
        format!("{} {:.6} {:.6} {:.6} {:.6}", self.class_id, self.cx, self.cy, self.w, self.h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelFormat {
    NormalizedText,
    JsonManifest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestLabel {
    pub instance_id: u32,
    pub class_id: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub bbox: BBox,
    pub area_px: usize,
    pub cutout_id: Option<String>,
}

/// Label file content for the given instances. Boxes come from each
/// instance mask's tight bbox. With `record`, JSON entries carry the id of
/// the cutout pasted onto the instance.
pub fn emit_labels(
    instances: &[SceneInstance],
    image_dims: (u32, u32),
    format: LabelFormat,
    record: Option<&CompositeRecord>,
) -> String {
    match format {
        LabelFormat::NormalizedText => {
            let mut out = String::new();
            for inst in instances {
                out.push_str(&DetectionLabel::from_bbox(GRAPE_CLASS, &inst.bbox, image_dims).to_line());
                out.push('\n');
            }
            out
        }
        LabelFormat::JsonManifest => {
            let entries: Vec<ManifestLabel> = instances
                .iter()
                .map(|inst| {
                    let l = DetectionLabel::from_bbox(GRAPE_CLASS, &inst.bbox, image_dims);
                    ManifestLabel {
                        instance_id: inst.instance_id,
                        class_id: l.class_id,
                        cx: l.cx,
                        cy: l.cy,
                        w: l.w,
                        h: l.h,
                        bbox: inst.bbox,
                        area_px: inst.area(),
                        cutout_id: record.and_then(|r| r.cutout_for(inst.instance_id)).map(str::to_string),
                    }
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&entries).expect("labels serialize");
            s.push('\n');
            s
        }
    }
}

/// The instances that received a paste, in the caller's order.
pub fn pasted_instances<'a>(instances: &'a [SceneInstance], record: &CompositeRecord) -> Vec<&'a SceneInstance> {
    instances
        .iter()
        .filter(|i| record.pasted().any(|e| e.instance_id == i.instance_id))
        .collect()
}

/// Parses normalized-text labels (`class cx cy w h` per line; blank lines
/// ignored). `path` is only used in error messages.
pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<DetectionLabel>> {
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
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let class_id = fields[0].parse::<u32>().map_err(|e| err(e.to_string()))?;
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(e.to_string()));
        let label = DetectionLabel {
            class_id,
            cx: num(fields[1])?,
            cy: num(fields[2])?,
            w: num(fields[3])?,
            h: num(fields[4])?,
        };
        label.validate().map_err(|e| err(e.to_string()))?;
        out.push(label);
    }
    Ok(out)
}
