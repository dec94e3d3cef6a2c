//! Binary-mask primitives: bounding boxes, principal axes, axis alignment and
//! the bounding-box scale factor used to fit a cutout onto a target instance.
//!
//! Coordinates are image coordinates: `x` grows to the right (columns), `y`
//! grows downward (rows). Angles are `atan2(y, x)` in that frame, so a
//! positive angle turns clockwise on screen.

use std::f64::consts::{FRAC_PI_2, PI};

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalue gap below which a pixel cloud is treated as isotropic.
pub const ISOTROPY_EPS: f64 = 1e-9;

/// Row-major boolean raster; `true` is foreground.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::Spec(format!(
                "mask bits length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Any non-zero pixel is foreground.
    pub fn from_luma(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            bits: img.as_raw().iter().map(|&v| v > 0).collect(),
        }
    }

    pub fn to_luma(&self) -> GrayImage {
        let raw = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        GrayImage::from_raw(self.width, self.height, raw).expect("raster size")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Like [`get`](Self::get) but returns `false` outside the raster.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    /// Foreground pixel count.
    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground pixel coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// Pixel-wise AND of two equally sized masks.
    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.check_same_dims(other)?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    pub fn or_assign(&mut self, other: &BinaryMask) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// True when every foreground pixel of `self` is also foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Exact quarter turn: the pixel at `(x, y)` moves to `(h - 1 - y, x)`.
    /// In image coordinates this adds `+π/2` to every direction angle.
    pub fn rotate90(&self) -> BinaryMask {
        let (w, h) = (self.width, self.height);
        let mut out = BinaryMask::new(h, w);
        for (x, y) in self.foreground() {
            out.set(h - 1 - y, x, true);
        }
        out
    }

    /// Shifts the foreground by `(dx, dy)`; pixels leaving the raster are dropped.
    pub fn translate(&self, dx: i64, dy: i64) -> BinaryMask {
        let mut out = BinaryMask::new(self.width, self.height);
        for (x, y) in self.foreground() {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && nx < self.width as i64 && ny < self.height as i64 {
                out.set(nx as u32, ny as u32, true);
            }
        }
        out
    }

    /// Copies this mask into a larger (or smaller) raster with its origin at `(ox, oy)`.
    pub fn embed(&self, ox: i64, oy: i64, width: u32, height: u32) -> BinaryMask {
        let mut out = BinaryMask::new(width, height);
        for (x, y) in self.foreground() {
            let (nx, ny) = (x as i64 + ox, y as i64 + oy);
            if nx >= 0 && ny >= 0 && nx < width as i64 && ny < height as i64 {
                out.set(nx as u32, ny as u32, true);
            }
        }
        out
    }

    fn check_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::ShapeMismatch {
                what: "mask",
                left: self.dims(),
                other: "mask",
                right: other.dims(),
            });
        }
        Ok(())
    }
}

/// Axis-aligned pixel box; `x_min`/`y_min` are inclusive, sizes are at least 1.
///
/// Origins are signed so that boxes of transformed footprints that stick out
/// of a scene can still be described.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: i64,
    pub y_min: i64,
    pub width: u32,
    pub height: u32,
}

impl BBox {
    pub fn new(x_min: i64, y_min: i64, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Spec(format!(
                "bbox sizes must be >= 1, got {width}x{height}"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            width,
            height,
        })
    }

    /// Inclusive right edge.
    pub fn x_max(&self) -> i64 {
        self.x_min + self.width as i64 - 1
    }

    /// Inclusive bottom edge.
    pub fn y_max(&self) -> i64 {
        self.y_min + self.height as i64 - 1
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x_min && x <= self.x_max() && y >= self.y_min && y <= self.y_max()
    }
}

/// Tightest box holding every foreground pixel.
pub fn mask_bbox(mask: &BinaryMask) -> Result<BBox> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut rows = (usize::MAX, 0usize);
    let mut cols = (usize::MAX, 0usize);
    for y in 0..h {
        let row = &mask.bits[y * w..(y + 1) * w];
        let Some(first) = row.iter().position(|&b| b) else {
            continue;
        };
        let last = row.iter().rposition(|&b| b).unwrap_or(first);
        rows = (rows.0.min(y), y);
        cols = (cols.0.min(first), cols.1.max(last));
    }
    if rows.0 == usize::MAX {
        return Err(Error::EmptyMask);
    }
    Ok(BBox {
        x_min: cols.0 as i64,
        y_min: rows.0 as i64,
        width: (cols.1 - cols.0 + 1) as u32,
        height: (rows.1 - rows.0 + 1) as u32,
    })
}

/// Centroid, principal directions and variances of a mask's pixel cloud.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrincipalAxes {
    pub centroid: [f64; 2],
    /// Unit vector along the direction of largest variance, angle in `(-π/2, π/2]`.
    pub major: [f64; 2],
    /// `major` turned by `+π/2`.
    pub minor: [f64; 2],
    /// `[λ1, λ2]`, `λ1 >= λ2 >= 0`.
    pub variances: [f64; 2],
    /// Population covariance `[σxx, σxy, σyy]`.
    pub covariance: [f64; 3],
}

impl PrincipalAxes {
    /// Angle of the major axis, in `(-π/2, π/2]`.
    pub fn angle(&self) -> f64 {
        wrap_half_turn(self.major[1].atan2(self.major[0]))
    }

    /// `λ1 / λ2`; infinite for a perfectly thin cloud.
    pub fn elongation(&self) -> f64 {
        if self.variances[1] <= 0.0 {
            f64::INFINITY
        } else {
            self.variances[0] / self.variances[1]
        }
    }

    pub fn is_isotropic(&self) -> bool {
        self.variances[0] - self.variances[1] < ISOTROPY_EPS
    }
}

/// Maps an axis angle onto its canonical representative in `(-π/2, π/2]`.
///
/// Axes have no sign, so angles are only defined modulo π.
pub fn wrap_half_turn(angle: f64) -> f64 {
    let r = angle.rem_euclid(PI);
    if r > FRAC_PI_2 {
        r - PI
    } else {
        r
    }
}

/// PCA over the integer coordinates of the foreground pixels.
///
/// Moments are accumulated in exact integer arithmetic, so translating a mask
/// leaves the covariance (and therefore the axes) bit-for-bit unchanged.
pub fn compute_pca(mask: &BinaryMask) -> Result<PrincipalAxes> {
    let mut n: i128 = 0;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for (x, y) in mask.foreground() {
        let (x, y) = (x as i128, y as i128);
        n += 1;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    match n {
        0 => return Err(Error::EmptyMask),
        1 => return Err(Error::DegenerateMask(1)),
        _ => {}
    }
    let n2 = (n * n) as f64;
    let cxx = (n * sxx - sx * sx) as f64 / n2;
    let cxy = (n * sxy - sx * sy) as f64 / n2;
    let cyy = (n * syy - sy * sy) as f64 / n2;
    let nf = n as f64;
    let centroid = [sx as f64 / nf, sy as f64 / nf];
    Ok(axes_from_covariance(centroid, [cxx, cxy, cyy]))
}

/// Eigen-decomposition of a 2×2 symmetric covariance.
pub fn axes_from_covariance(centroid: [f64; 2], cov: [f64; 3]) -> PrincipalAxes {
    let [cxx, cxy, cyy] = cov;
    let mean = 0.5 * (cxx + cyy);
    let half_diff = 0.5 * (cxx - cyy);
    let radius = half_diff.hypot(cxy);
    let l1 = mean + radius;
    let l2 = (mean - radius).max(0.0);

    let angle = if l1 - l2 < ISOTROPY_EPS {
        0.0
    } else {
        // `+ 0.0` turns a negative zero into positive zero so that a vertical
        // axis lands on +π/2 rather than -π/2.
        0.5 * (2.0 * cxy + 0.0).atan2(cxx - cyy)
    };
    let angle = wrap_half_turn(angle);
    let (s, c) = angle.sin_cos();
    PrincipalAxes {
        centroid,
        major: [c, s],
        minor: [-s, c],
        variances: [l1, l2],
        covariance: cov,
    }
}

/// Signed minimal rotation that makes the real major axis parallel to the
/// simulated one. Result lies in `(-π/2, π/2]`.
pub fn rotation_angle(real: &PrincipalAxes, sim: &PrincipalAxes) -> f64 {
    wrap_half_turn(sim.angle() - real.angle())
}

/// Uniform factor that makes the real box at least as large as the simulated
/// box in both dimensions: `max(sim_w / real_w, sim_h / real_h)`.
pub fn scale_factor(sim_box: &BBox, real_box: &BBox) -> f64 {
    scale_factor_dims(
        (sim_box.width as f64, sim_box.height as f64),
        (real_box.width as f64, real_box.height as f64),
    )
}

/// [`scale_factor`] on raw (possibly sub-pixel) box dimensions.
pub fn scale_factor_dims(sim: (f64, f64), real: (f64, f64)) -> f64 {
    let fw = sim.0 / real.0;
    let fh = sim.1 / real.1;
    fw.max(fh)
}

/// Rotation, scale and destination for pasting one cutout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPlan {
    pub theta_rot: f64,
    pub scale: f64,
    pub target_centroid: [f64; 2],
}

impl AlignmentPlan {
    pub fn new(theta_rot: f64, scale: f64, target_centroid: [f64; 2]) -> Result<Self> {
        if !(theta_rot > -FRAC_PI_2 && theta_rot <= FRAC_PI_2) {
            return Err(Error::Spec(format!(
                "theta_rot {theta_rot} outside (-pi/2, pi/2]"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Spec(format!("scale {scale} must be finite and > 0")));
        }
        if !(target_centroid[0].is_finite() && target_centroid[1].is_finite()) {
            return Err(Error::Spec("target centroid must be finite".into()));
        }
        Ok(Self {
            theta_rot,
            scale,
            target_centroid,
        })
    }
}
