//! Trained proposal scorer and its binary file format.
//!
//! All integers are `u32` and all reals `f64`, little-endian:
//!
//! ```text
//! magic      8 bytes  "PMCDET\0\0"
//! version    u32      1
//! hog        u32 × 5  cell_size, block_size, n_bins, patch_w, patch_h
//! mode       u32      0 = rgb, 1 = rgb_p
//! [rgb_p]    u32 d, u32 r, f64 × d mean, f64 × r·d basis (row-major)
//! svm        u32 n, f64 × n weights, f64 bias
//! ```

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{build_rgbp_features, rgb_features, FeatureMode};
use super::hog::HogConfig;
use super::pca::PcaModel;
use super::proposals::{sort_detections, Detection};
use super::svm::{svm_score, LinearSvm};
use crate::error::{Error, Result};
use crate::image::{crop, ProbMap, Rect, RgbImage};

const MAGIC: &[u8; 8] = b"PMCDET\0\0";
pub const MODEL_VERSION: u32 = 1;

/// HoG geometry, optional P-map subspace and linear scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalScorer {
    pub hog: HogConfig,
    /// Present exactly for [`FeatureMode::RgbP`].
    pub pca: Option<PcaModel>,
    pub svm: LinearSvm,
}

impl ProposalScorer {
    pub fn mode(&self) -> FeatureMode {
        if self.pca.is_some() {
            FeatureMode::RgbP
        } else {
            FeatureMode::Rgb
        }
    }

    pub fn features(
        &self,
        image: &RgbImage,
        pmap: Option<&ProbMap>,
        rect: &Rect,
    ) -> Result<Vec<f64>> {
        let patch = crop(image, rect)?;
        match &self.pca {
            None => rgb_features(&patch, &self.hog),
            Some(pca) => {
                let pmap = pmap.ok_or(Error::EmptyInput("P-map for an RGB-P scorer"))?;
                build_rgbp_features(&patch, &pmap.crop(rect)?, &self.hog, Some(pca))
            }
        }
    }

    /// Scores every proposal (in parallel) and returns detections sorted by
    /// descending score.
    pub fn detect(
        &self,
        image: &RgbImage,
        pmap: Option<&ProbMap>,
        proposals: &[Rect],
    ) -> Result<Vec<Detection>> {
        if let Some(p) = pmap {
            if p.dims() != image.dims() {
                return Err(Error::mismatch(
                    format!("{:?}", image.dims()),
                    format!("{:?}", p.dims()),
                ));
            }
        }
        let mut dets = proposals
            .par_iter()
            .map(|r| {
                let score = svm_score(&self.svm, &self.features(image, pmap, r)?)?;
                Ok(Detection { rect: *r, score })
            })
            .collect::<Result<Vec<_>>>()?;
        sort_detections(&mut dets);
        Ok(dets)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let u32s = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
        u32s(&mut out, MODEL_VERSION as usize);
        for v in [
            self.hog.cell_size,
            self.hog.block_size,
            self.hog.n_bins,
            self.hog.patch_size.0,
            self.hog.patch_size.1,
        ] {
            u32s(&mut out, v);
        }
        let f64s = |out: &mut Vec<u8>, vs: &[f64]| {
            vs.iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes()))
        };
        match &self.pca {
            None => u32s(&mut out, 0),
            Some(p) => {
                u32s(&mut out, 1);
                u32s(&mut out, p.dim());
                u32s(&mut out, p.rank());
                f64s(&mut out, p.mean());
                p.basis().iter().for_each(|row| f64s(&mut out, row));
            }
        }
        u32s(&mut out, self.svm.dim());
        f64s(&mut out, self.svm.weights());
        f64s(&mut out, &[self.svm.bias()]);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::UnsupportedFormat(
                "not a proposal scorer model".into(),
            ));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION as usize {
            return Err(Error::UnsupportedFormat(format!("model version {version}")));
        }
        let hog = HogConfig {
            cell_size: r.u32()?,
            block_size: r.u32()?,
            n_bins: r.u32()?,
            patch_size: (r.u32()?, r.u32()?),
        };
        hog.validate()
            .map_err(|e| Error::CorruptData(e.to_string()))?;
        let pca = match r.u32()? {
            0 => None,
            1 => {
                let d = r.u32()?;
                let rank = r.u32()?;
                let mean = r.f64s(d)?;
                let basis = (0..rank).map(|_| r.f64s(d)).collect::<Result<Vec<_>>>()?;
                Some(PcaModel::new(mean, basis)?)
            }
            m => return Err(Error::CorruptData(format!("unknown feature mode {m}"))),
        };
        let n = r.u32()?;
        let weights = r.f64s(n)?;
        let bias = r.f64s(1)?[0];
        if r.pos != bytes.len() {
            return Err(Error::CorruptData("trailing bytes after model".into()));
        }
        let expected =
            hog.dim() + 3 * super::features::COLOR_BINS + pca.as_ref().map_or(0, PcaModel::rank);
        if n != expected || pca.as_ref().is_some_and(|p| p.dim() != hog.dim()) {
            return Err(Error::CorruptData(format!(
                "scorer expects {expected} features, model stores {n}"
            )));
        }
        Ok(Self {
            hog,
            pca,
            svm: LinearSvm::new(weights, bias)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::CorruptData("model file truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::CorruptData("model size overflow".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}
