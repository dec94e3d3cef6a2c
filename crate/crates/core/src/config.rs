//! Run configuration file: flat `key = value` lines (a TOML subset), `#`
//! comments. Every key is optional; command-line flags override file values.
//!
//! ```text
//! master_seed = 42
//! min_paste_area = 64
//! feather_radius = 0
//! paste_order = "descending_area"     # or "instance_id"
//! scale_reference = "post_rotation"   # or "pre_rotation"
//! min_cutout_area = 64
//! conf_thresh = 0.25
//! iou_thresh = 0.3
//! interpolation = "all_points"        # or "points101"
//! workers = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compose::{PasteOrder, ScaleReference};
use crate::error::{Error, Result};
use crate::eval::Interpolation;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub master_seed: Option<u64>,
    pub min_paste_area: Option<usize>,
    pub feather_radius: Option<u32>,
    pub paste_order: Option<PasteOrder>,
    pub scale_reference: Option<ScaleReference>,
    pub min_cutout_area: Option<usize>,
    pub conf_thresh: Option<f64>,
    pub iou_thresh: Option<f64>,
    pub interpolation: Option<Interpolation>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (name, v) in [("conf_thresh", cfg.conf_thresh), ("iou_thresh", cfg.iou_thresh)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
