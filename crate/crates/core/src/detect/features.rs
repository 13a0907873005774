use serde::{Deserialize, Serialize};

use super::hog::{hog, HogConfig};
use super::pca::{pca_project, PcaModel};
use crate::error::{Error, Result};
use crate::image::{ProbMap, RgbImage};

/// Bins per channel of the color histogram.
pub const COLOR_BINS: usize = 16;

/// Which channels feed the proposal classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Appearance only.
    Rgb,
    /// Appearance plus the PCA-reduced HoG of the P-map.
    RgbP,
}

/// Appearance descriptor of an image patch. The built-in implementation is
/// [`HogColorDescriptor`]; any fixed-length embedding can be plugged in.
pub trait RgbDescriptor: Sync {
    fn dim(&self) -> usize;
    fn describe(&self, patch: &RgbImage) -> Result<Vec<f64>>;
}

/// HoG of the grayscale patch followed by a per-channel color histogram.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HogColorDescriptor {
    pub hog: HogConfig,
}

impl RgbDescriptor for HogColorDescriptor {
    fn dim(&self) -> usize {
        self.hog.dim() + 3 * COLOR_BINS
    }

    fn describe(&self, patch: &RgbImage) -> Result<Vec<f64>> {
        let (w, h) = patch.dims();
        let mut out = hog(&patch.grayscale(), w, h, &self.hog)?;
        out.extend(color_histogram(patch));
        Ok(out)
    }
}

/// `3 × COLOR_BINS` histogram (R bins, then G, then B), each channel
/// normalized to sum to one.
pub fn color_histogram(patch: &RgbImage) -> Vec<f64> {
    let mut hist = vec![0.0; 3 * COLOR_BINS];
    for px in patch.pixels() {
        for (c, &v) in px.iter().enumerate() {
            hist[c * COLOR_BINS + v as usize * COLOR_BINS / 256] += 1.0;
        }
    }
    let n = patch.pixels().len().max(1) as f64;
    hist.iter_mut().for_each(|v| *v /= n);
    hist
}

/// HoG of a P-map patch.
pub fn pmap_hog(pmap_patch: &ProbMap, cfg: &HogConfig) -> Result<Vec<f64>> {
    let (w, h) = pmap_patch.dims();
    let raster: Vec<f64> = pmap_patch.values().iter().map(|&v| v as f64).collect();
    hog(&raster, w, h, cfg)
}

/// Appearance descriptor only: `hog_dim + 48` values.
pub fn rgb_features(image_patch: &RgbImage, cfg: &HogConfig) -> Result<Vec<f64>> {
    HogColorDescriptor { hog: *cfg }.describe(image_patch)
}

/// Appearance descriptor, followed (when `pca_p` is given) by the
/// projection of the P-map HoG onto `pca_p`. Without `pca_p` this is the
/// RGB-only feature.
pub fn build_rgbp_features(
    image_patch: &RgbImage,
    pmap_patch: &ProbMap,
    cfg: &HogConfig,
    pca_p: Option<&PcaModel>,
) -> Result<Vec<f64>> {
    build_features_with(
        &HogColorDescriptor { hog: *cfg },
        image_patch,
        pmap_patch,
        cfg,
        pca_p,
    )
}

/// [`build_rgbp_features`] with a custom appearance descriptor.
pub fn build_features_with(
    descriptor: &dyn RgbDescriptor,
    image_patch: &RgbImage,
    pmap_patch: &ProbMap,
    cfg: &HogConfig,
    pca_p: Option<&PcaModel>,
) -> Result<Vec<f64>> {
    if image_patch.dims() != pmap_patch.dims() {
        return Err(Error::mismatch(
            format!("{:?}", image_patch.dims()),
            format!("{:?}", pmap_patch.dims()),
        ));
    }
    let mut out = descriptor.describe(image_patch)?;
    if let Some(pca) = pca_p {
        out.extend(pca_project(pca, &pmap_hog(pmap_patch, cfg)?)?);
    }
    Ok(out)
}
