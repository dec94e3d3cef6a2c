//! The buffer of real instance cutouts: ingestion from disk, manifest
//! emission and seeded sampling.
//!
//! On disk a buffer is a flat directory of pairs `<id>.rgb.png` (8-bit RGB)
//! and `<id>.mask.png` (8-bit grayscale, any non-zero value is foreground).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub const DEFAULT_MIN_CUTOUT_AREA: usize = 64;
pub const MANIFEST_FILE: &str = "buffer.json";

const RGB_SUFFIX: &str = ".rgb.png";
const MASK_SUFFIX: &str = ".mask.png";

/// One real object: color patch, its foreground mask and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceCutout {
    pub id: String,
    pub color: RgbImage,
    pub mask: BinaryMask,
    pub source: String,
}

impl InstanceCutout {
    pub fn new(id: impl Into<String>, color: RgbImage, mask: BinaryMask, source: impl Into<String>) -> Result<Self> {
        if color.dimensions() != mask.dims() {
            return Err(Error::ShapeMismatch {
                what: "color",
                left: color.dimensions(),
                other: "mask",
                right: mask.dims(),
            });
        }
        Ok(Self {
            id: id.into(),
            color,
            mask,
            source: source.into(),
        })
    }

    pub fn area(&self) -> usize {
        self.mask.area()
    }

    pub fn write_pair(&self, dir: &Path) -> Result<()> {
        let rgb = dir.join(format!("{}{RGB_SUFFIX}", self.id));
        self.color.save(&rgb).map_err(|e| Error::image(&rgb, e))?;
        let mask = dir.join(format!("{}{MASK_SUFFIX}", self.id));
        self.mask.to_luma().save(&mask).map_err(|e| Error::image(&mask, e))?;
        Ok(())
    }
}

/// Immutable, id-sorted collection of validated cutouts.
#[derive(Clone, Debug)]
pub struct CutoutBuffer {
    items: Vec<InstanceCutout>,
    manifest_digest: String,
}

impl CutoutBuffer {
    /// Builds a buffer from in-memory cutouts. Items are sorted by id; ids
    /// must be unique and the result non-empty.
    pub fn from_cutouts(mut items: Vec<InstanceCutout>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        items.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(pair) = items.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Spec(format!("duplicate cutout id {:?}", pair[0].id)));
        }
        let manifest_digest = digest(&items);
        Ok(Self {
            items,
            manifest_digest,
        })
    }

    pub fn items(&self) -> &[InstanceCutout] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// SHA-256 over ids, sizes, pixels and provenance, in buffer order.
    pub fn manifest_digest(&self) -> &str {
        &self.manifest_digest
    }

    pub fn manifest(&self) -> BufferManifest {
        BufferManifest {
            items: self
                .items
                .iter()
                .map(|c| ManifestEntry {
                    id: c.id.clone(),
                    width: c.color.width(),
                    height: c.color.height(),
                    area_px: c.area(),
                    source: c.source.clone(),
                })
                .collect(),
            manifest_digest: self.manifest_digest.clone(),
        }
    }
}

fn digest(items: &[InstanceCutout]) -> String {
    let mut h = Sha256::new();
    for c in items {
        h.update((c.id.len() as u64).to_le_bytes());
        h.update(c.id.as_bytes());
        h.update(c.color.width().to_le_bytes());
        h.update(c.color.height().to_le_bytes());
        h.update(c.color.as_raw());
        let bits: Vec<u8> = c.mask.bits().iter().map(|&b| b as u8).collect();
        h.update(&bits);
        h.update((c.source.len() as u64).to_le_bytes());
        h.update(c.source.as_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub area_px: usize,
    pub source: String,
}

/// Contents of `buffer.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferManifest {
    pub items: Vec<ManifestEntry>,
    pub manifest_digest: String,
}

impl BufferManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// A pair that was found on disk but not admitted into the buffer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkippedPair {
    pub id: String,
    pub kind: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct Ingested {
    pub buffer: CutoutBuffer,
    pub skipped: Vec<SkippedPair>,
}

/// Loads every `<id>.rgb.png` / `<id>.mask.png` pair in `dir`.
///
/// Pairs with mismatched sizes, a missing half, or fewer than
/// `min_cutout_area` foreground pixels are skipped and listed in
/// [`Ingested::skipped`]. Files that exist but cannot be decoded abort the
/// ingestion.
pub fn ingest_buffer(dir: &Path, min_cutout_area: usize) -> Result<Ingested> {
    let mut rgb_ids = BTreeSet::new();
    let mut mask_ids = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(id) = name.strip_suffix(RGB_SUFFIX) {
            rgb_ids.insert(id.to_string());
        } else if let Some(id) = name.strip_suffix(MASK_SUFFIX) {
            mask_ids.insert(id.to_string());
        }
    }

    let mut status: BTreeMap<String, std::result::Result<InstanceCutout, SkippedPair>> = BTreeMap::new();
    for id in rgb_ids.union(&mask_ids) {
        let skip = |kind: &str, reason: String| SkippedPair {
            id: id.clone(),
            kind: kind.to_string(),
            reason,
        };
        if !mask_ids.contains(id) {
            status.insert(id.clone(), Err(skip("MissingFile", format!("{id}{MASK_SUFFIX} not found"))));
            continue;
        }
        if !rgb_ids.contains(id) {
            status.insert(id.clone(), Err(skip("MissingFile", format!("{id}{RGB_SUFFIX} not found"))));
            continue;
        }
        let rgb_name = format!("{id}{RGB_SUFFIX}");
        let rgb_path = dir.join(&rgb_name);
        let mask_path = dir.join(format!("{id}{MASK_SUFFIX}"));
        let color = image::open(&rgb_path)
            .map_err(|e| Error::image(&rgb_path, e))?
            .to_rgb8();
        let mask = BinaryMask::from_luma(
            &image::open(&mask_path)
                .map_err(|e| Error::image(&mask_path, e))?
                .to_luma8(),
        );
        let entry = match InstanceCutout::new(id.clone(), color, mask, rgb_name) {
            Err(e) => Err(skip(e.kind(), e.to_string())),
            Ok(c) if c.area() < min_cutout_area => Err(skip(
                "BelowMinArea",
                format!("{} foreground px < min_cutout_area {min_cutout_area}", c.area()),
            )),
            Ok(c) => Ok(c),
        };
        status.insert(id.clone(), entry);
    }

    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (_, s) in status {
        match s {
            Ok(c) => items.push(c),
            Err(sk) => {
                log::warn!("skipping cutout {}: {}", sk.id, sk.reason);
                skipped.push(sk);
            }
        }
    }
    let buffer = CutoutBuffer::from_cutouts(items)?;
    Ok(Ingested { buffer, skipped })
}

/// Uniform draw with replacement.
pub fn sample_cutout<'a, R: Rng + ?Sized>(buffer: &'a CutoutBuffer, rng: &mut R) -> Result<&'a InstanceCutout> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    Ok(&buffer.items[rng.gen_range(0..buffer.items.len())])
}
