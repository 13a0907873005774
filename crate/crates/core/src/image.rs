//! Raster types and rectangle geometry.
//!
//! All rasters are row-major with the origin at the top-left pixel.
//! Rectangles use integer pixel units with exclusive right/bottom edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![color; width * height])
    }

    /// Builds an image from packed `r,g,b` bytes.
    pub fn from_raw(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::CorruptData(format!(
                "expected {} bytes for {width}x{height} rgb, got {}",
                width * height * 3,
                bytes.len()
            )));
        }
        let pixels = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(width, height, pixels)
    }

    pub fn to_raw(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: [u8; 3]) {
        self.pixels[y * self.width + x] = color;
    }

    /// Pixel colors as `f64` triples, the representation the color models use.
    pub fn colors_f64(&self) -> Vec<[f64; 3]> {
        self.pixels
            .iter()
            .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
            .collect()
    }

    /// Luma in `[0,1]` (BT.601 weights).
    pub fn grayscale(&self) -> Vec<f64> {
        self.pixels
            .iter()
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
            .collect()
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }
}

/// Per-pixel foreground probability raster with values in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

/// Values within this distance outside `[0,1]` are clamped; anything further
/// is rejected as a producer bug.
pub const PROB_TOLERANCE: f64 = 1e-9;

impl ProbMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        let mut values = values;
        for (index, v) in values.iter_mut().enumerate() {
            let vf = *v as f64;
            if !vf.is_finite() || !(-PROB_TOLERANCE..=1.0 + PROB_TOLERANCE).contains(&vf) {
                return Err(Error::ValueOutOfRange { index, value: vf });
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Builds a map from `f64` values, clamping and validating like [`ProbMap::new`].
    pub fn from_f64(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        check_dims(width, height, values.len())?;
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(-PROB_TOLERANCE..=1.0 + PROB_TOLERANCE).contains(&v) {
                return Err(Error::ValueOutOfRange { index, value: v });
            }
        }
        let values = values.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect();
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_mask(mask: &CutoutMask) -> Self {
        let values = mask
            .labels()
            .iter()
            .map(|&fg| if fg { 1.0 } else { 0.0 })
            .collect();
        Self {
            width: mask.width(),
            height: mask.height(),
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn crop(&self, rect: &Rect) -> Result<ProbMap> {
        rect.check_inside(self.width, self.height)?;
        let mut values = Vec::with_capacity(rect.area());
        for y in rect.y..rect.bottom() {
            let row = y * self.width;
            values.extend_from_slice(&self.values[row + rect.x..row + rect.right()]);
        }
        Ok(ProbMap {
            width: rect.w,
            height: rect.h,
            values,
        })
    }
}

/// Binary cutout labeling: `true` is foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CutoutMask {
    width: usize,
    height: usize,
    labels: Vec<bool>,
}

impl CutoutMask {
    pub fn new(width: usize, height: usize, labels: Vec<bool>) -> Result<Self> {
        check_dims(width, height, labels.len())?;
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [bool] {
        &mut self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, fg: bool) {
        self.labels[y * self.width + x] = fg;
    }

    pub fn count_fg(&self) -> usize {
        self.labels.iter().filter(|&&fg| fg).count()
    }

    /// Tight bounding box of the foreground pixels, `None` when empty.
    pub fn bounding_rect(&self) -> Option<Rect> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        (x0 != usize::MAX).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn crop(&self, rect: &Rect) -> Result<CutoutMask> {
        rect.check_inside(self.width, self.height)?;
        let mut labels = Vec::with_capacity(rect.area());
        for y in rect.y..rect.bottom() {
            let row = y * self.width;
            labels.extend_from_slice(&self.labels[row + rect.x..row + rect.right()]);
        }
        Ok(CutoutMask {
            width: rect.w,
            height: rect.h,
            labels,
        })
    }

    /// Places `local` at `rect` inside an otherwise-background mask of the
    /// given size.
    pub fn paste(width: usize, height: usize, rect: &Rect, local: &CutoutMask) -> Result<Self> {
        rect.check_inside(width, height)?;
        if local.dims() != (rect.w, rect.h) {
            return Err(Error::dims((rect.w, rect.h), local.dims()));
        }
        let mut out = Self::empty(width, height)?;
        for y in 0..rect.h {
            for x in 0..rect.w {
                out.set(rect.x + x, rect.y + y, local.get(x, y));
            }
        }
        Ok(out)
    }
}

/// Axis-aligned rectangle in pixel units, optionally carrying a detection
/// confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// A candidate object rectangle.
pub type RectProposal = Rect;

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self {
            x,
            y,
            w,
            h,
            confidence: None,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        self.w >= 1 && self.h >= 1
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn check_inside(&self, width: usize, height: usize) -> Result<()> {
        if !self.is_valid() || self.right() > width || self.bottom() > height {
            return Err(Error::OutOfBounds {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                width,
                height,
            });
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &Rect) -> usize {
        let w = self
            .right()
            .min(other.right())
            .saturating_sub(self.x.max(other.x));
        let h = self
            .bottom()
            .min(other.bottom())
            .saturating_sub(self.y.max(other.y));
        w * h
    }

    /// Grows the rectangle by `margin` pixels on every side, clipped to the
    /// image.
    pub fn expand(&self, margin: usize, width: usize, height: usize) -> Rect {
        let x = self.x.saturating_sub(margin);
        let y = self.y.saturating_sub(margin);
        let right = (self.right() + margin).min(width);
        let bottom = (self.bottom() + margin).min(height);
        Rect::new(x, y, right - x, bottom - y)
    }
}

/// Intersection-over-union of two rectangles; `0` when they are disjoint.
pub fn rect_iou(a: &Rect, b: &Rect) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}

/// Copies the pixels under `rect` into a new image.
pub fn crop(image: &RgbImage, rect: &Rect) -> Result<RgbImage> {
    rect.check_inside(image.width, image.height)?;
    let mut pixels = Vec::with_capacity(rect.area());
    for y in rect.y..rect.bottom() {
        let row = y * image.width;
        pixels.extend_from_slice(&image.pixels[row + rect.x..row + rect.right()]);
    }
    RgbImage::new(rect.w, rect.h, pixels)
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParam(format!(
            "raster dimensions must be positive, got {width}x{height}"
        )));
    }
    if len != width * height {
        return Err(Error::DimensionMismatch {
            expected: format!("{} values for {width}x{height}", width * height),
            got: format!("{len} values"),
        });
    }
    Ok(())
}
