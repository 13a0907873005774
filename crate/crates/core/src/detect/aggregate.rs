use crate::error::{Error, Result};
use crate::image::{ProbMap, Rect};

/// Image-level map accumulated from per-proposal P-maps.
pub type AggregatedPMap = ProbMap;

/// A proposal's local P-map and its confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct PmapEntry {
    pub rect: Rect,
    pub pmap: ProbMap,
    pub confidence: f64,
}

/// `acc_i = Σ confidence·p_local` over entries covering pixel `i`, divided
/// by `max(acc)`. All zeros when nothing accumulates.
pub fn aggregate_pmap(
    width: usize,
    height: usize,
    entries: &[PmapEntry],
) -> Result<AggregatedPMap> {
    let mut acc = vec![0.0f64; width * height];
    for e in entries {
        e.rect.check_inside(width, height)?;
        if e.pmap.dims() != (e.rect.w, e.rect.h) {
            return Err(Error::mismatch(
                format!("{}x{} local map", e.rect.w, e.rect.h),
                format!("{}x{}", e.pmap.width(), e.pmap.height()),
            ));
        }
        if !(e.confidence >= 0.0 && e.confidence.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "confidence must be finite and non-negative, got {}",
                e.confidence
            )));
        }
        for y in 0..e.rect.h {
            let row = &mut acc[(e.rect.y + y) * width + e.rect.x..][..e.rect.w];
            for (a, &p) in row
                .iter_mut()
                .zip(&e.pmap.values()[y * e.rect.w..(y + 1) * e.rect.w])
            {
                *a += e.confidence * p as f64;
            }
        }
    }
    let max = acc.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        acc.iter_mut().for_each(|a| *a /= max);
    }
    ProbMap::from_f64(width, height, &acc)
}
