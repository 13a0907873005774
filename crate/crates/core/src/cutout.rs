//! Cutout mask extraction.
//!
//! [`pmap_grabcut`] seeds GrabCut from a probability map instead of a
//! rectangle: the map alone gives an initial min-cut mask, and in later
//! rounds its likelihoods are blended into the color-model unaries with a
//! weight `w = b / k` that decays over the iteration index `k`:
//!
//! ```text
//! CP_fg = GMM_fg(z) * exp(-w * (1 - p)^alpha)
//! CP_bg = GMM_bg(z) * exp(-w * p^alpha)
//! ```
//!
//! Graph-cut costs are `-ln CP`. [`plain_grabcut`] is the classic
//! rectangle-initialized variant used as the baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{self, ColorGmm};
use crate::image::{crop, CutoutMask, ProbMap, Rect, RgbImage};
use crate::mincut::{contrast_weights, min_cut, neighbor, GridEnergy};
use crate::rng::XorShift64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CutoutParams {
    /// Exponent turning probabilities into likelihoods.
    pub alpha: f64,
    /// Initial blend weight; iteration `k` uses `b / k`.
    pub b: f64,
    pub max_iters: usize,
    /// Smoothness strength.
    pub gamma: f64,
    /// Components per color model.
    pub components: usize,
    /// Probabilities are clamped to `[eps_prob, 1 - eps_prob]`.
    pub eps_prob: f64,
    /// Stop once fewer than this fraction of pixels change label.
    pub converge_frac: f64,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 0x5EED_C0DE;

impl Default for CutoutParams {
    fn default() -> Self {
        Self {
            alpha: 2.3,
            b: 25.0,
            max_iters: 10,
            gamma: 50.0,
            components: gmm::DEFAULT_COMPONENTS,
            eps_prob: 1e-6,
            converge_frac: 0.001,
            seed: DEFAULT_SEED,
        }
    }
}

impl CutoutParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParam(what));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad(format!("b must be > 0, got {}", self.b));
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if self.components < 1 {
            return bad("components must be at least 1".into());
        }
        if !(self.eps_prob > 0.0 && self.eps_prob < 0.5) {
            return bad(format!(
                "eps_prob must be in (0, 0.5), got {}",
                self.eps_prob
            ));
        }
        if !(self.converge_frac >= 0.0 && self.converge_frac <= 1.0) {
            return bad(format!(
                "converge_frac must be in [0,1], got {}",
                self.converge_frac
            ));
        }
        Ok(())
    }

    /// Blend weight for iteration `k` (1-based).
    pub fn weight(&self, k: usize) -> f64 {
        self.b / k as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub k: usize,
    pub w: f64,
    /// Energy of the returned labeling under this iteration's costs.
    pub energy: f64,
    pub changed_pixels: usize,
    #[serde(skip)]
    pub mask: CutoutMask,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CutoutTrace {
    pub steps: Vec<TraceStep>,
}

impl CutoutTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }
}

/// Per-pixel foreground and background likelihoods `p^alpha` and
/// `(1-p)^alpha`, with `p` first clamped to `[eps, 1-eps]`.
pub fn pmap_likelihoods(pmap: &ProbMap, alpha: f64, eps: f64) -> (Vec<f64>, Vec<f64>) {
    pmap.values()
        .iter()
        .map(|&p| {
            let p = (p as f64).clamp(eps, 1.0 - eps);
            (p.powf(alpha), (1.0 - p).powf(alpha))
        })
        .unzip()
}

/// Shifts raw `-ln` costs by one global constant so every cost is
/// nonnegative. Returns the constant; the argmin is unaffected.
fn shift_nonnegative(fg: &mut [f64], bg: &mut [f64]) -> f64 {
    let lowest = fg
        .iter()
        .chain(bg.iter())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let shift = if lowest < 0.0 { -lowest } else { 0.0 };
    if shift > 0.0 {
        fg.iter_mut().chain(bg.iter_mut()).for_each(|v| *v += shift);
    }
    shift
}

fn check_dims(image: &RgbImage, pmap: &ProbMap) -> Result<()> {
    if image.dims() != pmap.dims() {
        return Err(Error::dims(image.dims(), pmap.dims()));
    }
    Ok(())
}

fn check_nondegenerate(mask: &CutoutMask) -> Result<()> {
    let fg = mask.count_fg();
    if fg == 0 {
        return Err(Error::EmptyForeground);
    }
    if fg == mask.labels().len() {
        return Err(Error::EmptyBackground);
    }
    Ok(())
}

/// Grid energy whose unaries come from the probability map alone.
pub fn initial_energy(
    image: &RgbImage,
    pmap: &ProbMap,
    params: &CutoutParams,
) -> Result<GridEnergy> {
    params.validate()?;
    check_dims(image, pmap)?;
    let (pf, pb) = pmap_likelihoods(pmap, params.alpha, params.eps_prob);
    let fg = pf.iter().map(|v| -v.ln()).collect();
    let bg = pb.iter().map(|v| -v.ln()).collect();
    GridEnergy::new(
        image.width(),
        image.height(),
        fg,
        bg,
        contrast_weights(image, params.gamma),
    )
}

pub fn initial_mask(image: &RgbImage, pmap: &ProbMap, params: &CutoutParams) -> Result<CutoutMask> {
    let mask = min_cut(&initial_energy(image, pmap, params)?).mask;
    check_nondegenerate(&mask)?;
    Ok(mask)
}

/// Fits the foreground and background color models on `mask`.
pub fn fit_color_models(
    colors: &[[f64; 3]],
    mask: &CutoutMask,
    components: usize,
    seed: u64,
) -> Result<(ColorGmm, ColorGmm)> {
    let (fg, bg): (Vec<_>, Vec<_>) = colors
        .iter()
        .zip(mask.labels())
        .partition(|(_, &is_fg)| is_fg);
    if fg.is_empty() {
        return Err(Error::EmptyForeground);
    }
    if bg.is_empty() {
        return Err(Error::EmptyBackground);
    }
    let fg: Vec<[f64; 3]> = fg.into_iter().map(|(c, _)| *c).collect();
    let bg: Vec<[f64; 3]> = bg.into_iter().map(|(c, _)| *c).collect();
    Ok((
        gmm::fit(&fg, components, XorShift64::derive(seed, 1).next_u64())?,
        gmm::fit(&bg, components, XorShift64::derive(seed, 2).next_u64())?,
    ))
}

/// Raw blended costs `-ln GMM_fg + w * P_bg` and `-ln GMM_bg + w * P_fg`.
/// Values may be negative where a color model density exceeds one.
pub fn blended_unaries(
    colors: &[[f64; 3]],
    gmm_fg: &ColorGmm,
    gmm_bg: &ColorGmm,
    lik_fg: &[f64],
    lik_bg: &[f64],
    w: f64,
) -> (Vec<f64>, Vec<f64>) {
    colors
        .iter()
        .zip(lik_fg.iter().zip(lik_bg))
        .map(|(z, (&pf, &pb))| {
            (
                gmm_fg.neg_log_likelihood(z) + w * pb,
                gmm_bg.neg_log_likelihood(z) + w * pf,
            )
        })
        .unzip()
}

/// Iteration state needed to rebuild the energy of step `k` from the mask
/// that preceded it.
pub struct IterationEnergy {
    pub energy: GridEnergy,
    /// Constant added to every raw cost to make the grid energy nonnegative.
    pub shift: f64,
}

/// Energy minimized at iteration `k` given the previous mask.
pub fn iteration_energy(
    image: &RgbImage,
    pmap: &ProbMap,
    previous: &CutoutMask,
    k: usize,
    params: &CutoutParams,
) -> Result<IterationEnergy> {
    params.validate()?;
    check_dims(image, pmap)?;
    let colors = image.colors_f64();
    let (pf, pb) = pmap_likelihoods(pmap, params.alpha, params.eps_prob);
    let edges = contrast_weights(image, params.gamma);
    build_iteration(image, &colors, &pf, &pb, &edges, previous, k, params)
}

#[allow(clippy::too_many_arguments)]
fn build_iteration(
    image: &RgbImage,
    colors: &[[f64; 3]],
    pf: &[f64],
    pb: &[f64],
    edges: &[[f64; 4]],
    previous: &CutoutMask,
    k: usize,
    params: &CutoutParams,
) -> Result<IterationEnergy> {
    let seed = XorShift64::derive(params.seed, k as u64).next_u64();
    let (gmm_fg, gmm_bg) = fit_color_models(colors, previous, params.components, seed)?;
    let (mut fg, mut bg) = blended_unaries(colors, &gmm_fg, &gmm_bg, pf, pb, params.weight(k));
    let shift = shift_nonnegative(&mut fg, &mut bg);
    let energy = GridEnergy::new(image.width(), image.height(), fg, bg, edges.to_vec())?;
    Ok(IterationEnergy { energy, shift })
}

fn count_changed(a: &CutoutMask, b: &CutoutMask) -> usize {
    a.labels()
        .iter()
        .zip(b.labels())
        .filter(|(x, y)| x != y)
        .count()
}

/// Probability-map guided GrabCut over the whole of `image`.
///
/// Trace energies are reported in raw `-ln` units (the nonnegativity shift
/// is removed).
pub fn pmap_grabcut(
    image: &RgbImage,
    pmap: &ProbMap,
    params: &CutoutParams,
) -> Result<(CutoutMask, CutoutTrace)> {
    let mut mask = initial_mask(image, pmap, params)?;
    let colors = image.colors_f64();
    let (pf, pb) = pmap_likelihoods(pmap, params.alpha, params.eps_prob);
    let edges = contrast_weights(image, params.gamma);
    let n = colors.len();
    let mut trace = CutoutTrace::default();
    for k in 1..=params.max_iters {
        let it = build_iteration(image, &colors, &pf, &pb, &edges, &mask, k, params)?;
        let cut = min_cut(&it.energy);
        let changed = count_changed(&mask, &cut.mask);
        trace.steps.push(TraceStep {
            k,
            w: params.weight(k),
            energy: cut.energy - it.shift * n as f64,
            changed_pixels: changed,
            mask: cut.mask.clone(),
        });
        check_nondegenerate(&cut.mask)?;
        mask = cut.mask;
        if (changed as f64) < params.converge_frac * n as f64 {
            break;
        }
    }
    Ok((mask, trace))
}

/// Classic GrabCut: color models start from inside/outside `rect`, pixels
/// outside the rectangle stay background, and min-cut plus model refits
/// alternate under the same stopping rule as [`pmap_grabcut`]. The trace
/// carries `w = 0` since no probability map is blended in.
pub fn plain_grabcut_traced(
    image: &RgbImage,
    rect: &Rect,
    params: &CutoutParams,
) -> Result<(CutoutMask, CutoutTrace)> {
    params.validate()?;
    rect.check_inside(image.width(), image.height())?;
    if rect.area() == image.width() * image.height() {
        return Err(Error::EmptyBackground);
    }
    let (width, height) = image.dims();
    let colors = image.colors_f64();
    let edges = contrast_weights(image, params.gamma);

    // pairwise terms toward the clamped outside act as extra foreground cost
    let mut boundary = vec![0.0; rect.area()];
    let mut local_edges = vec![[0.0; 4]; rect.area()];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            for (k, &w) in edges[i].iter().enumerate() {
                let Some(j) = neighbor(width, height, x, y, k) else {
                    continue;
                };
                let (jx, jy) = (j % width, j / width);
                match (rect.contains(x, y), rect.contains(jx, jy)) {
                    (true, true) => {
                        local_edges[(y - rect.y) * rect.w + (x - rect.x)][k] = w;
                    }
                    (true, false) => boundary[(y - rect.y) * rect.w + (x - rect.x)] += w,
                    (false, true) => boundary[(jy - rect.y) * rect.w + (jx - rect.x)] += w,
                    (false, false) => {}
                }
            }
        }
    }

    let mut mask = CutoutMask::empty(width, height)?;
    for y in rect.y..rect.bottom() {
        for x in rect.x..rect.right() {
            mask.set(x, y, true);
        }
    }
    let local_colors: Vec<[f64; 3]> = (rect.y..rect.bottom())
        .flat_map(|y| (rect.x..rect.right()).map(move |x| (x, y)))
        .map(|(x, y)| colors[y * width + x])
        .collect();

    let mut trace = CutoutTrace::default();
    for k in 1..=params.max_iters {
        let seed = XorShift64::derive(params.seed, k as u64).next_u64();
        let (gmm_fg, gmm_bg) = fit_color_models(&colors, &mask, params.components, seed)?;
        let (mut fg, mut bg): (Vec<f64>, Vec<f64>) = local_colors
            .iter()
            .zip(&boundary)
            .map(|(z, &extra)| {
                (
                    gmm_fg.neg_log_likelihood(z) + extra,
                    gmm_bg.neg_log_likelihood(z),
                )
            })
            .unzip();
        let shift = shift_nonnegative(&mut fg, &mut bg);
        let energy = GridEnergy::new(rect.w, rect.h, fg, bg, local_edges.clone())?;
        let cut = min_cut(&energy);
        let next = CutoutMask::paste(width, height, rect, &cut.mask)?;
        let changed = count_changed(&mask, &next);
        trace.steps.push(TraceStep {
            k,
            w: 0.0,
            energy: cut.energy - shift * rect.area() as f64,
            changed_pixels: changed,
            mask: next.clone(),
        });
        if next.count_fg() == 0 {
            return Err(Error::EmptyForeground);
        }
        mask = next;
        if (changed as f64) < params.converge_frac * rect.area() as f64 {
            break;
        }
    }
    Ok((mask, trace))
}

/// [`pmap_grabcut`] restricted to `rect`. The map may cover the whole image
/// or exactly the rectangle; the returned mask is image-sized and
/// background outside `rect`.
pub fn pmap_grabcut_in_rect(
    image: &RgbImage,
    pmap: &ProbMap,
    rect: &Rect,
    params: &CutoutParams,
) -> Result<(CutoutMask, CutoutTrace)> {
    let (width, height) = image.dims();
    rect.check_inside(width, height)?;
    let local_pmap = if pmap.dims() == (width, height) {
        pmap.crop(rect)?
    } else if pmap.dims() == (rect.w, rect.h) {
        pmap.clone()
    } else {
        return Err(Error::DimensionMismatch {
            expected: format!("{width}x{height} or {}x{}", rect.w, rect.h),
            got: format!("{}x{}", pmap.width(), pmap.height()),
        });
    };
    let (local, trace) = pmap_grabcut(&crop(image, rect)?, &local_pmap, params)?;
    Ok((CutoutMask::paste(width, height, rect, &local)?, trace))
}

pub fn plain_grabcut(image: &RgbImage, rect: &Rect, params: &CutoutParams) -> Result<CutoutMask> {
    plain_grabcut_traced(image, rect, params).map(|(mask, _)| mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn likelihoods_at_half_and_bounds() {
        let m = ProbMap::from_f64(3, 1, &[0.5, 1.0, 0.0]).unwrap();
        let (f, b) = pmap_likelihoods(&m, 2.3, 1e-6);
        assert_eq!(f[0], 0.5f64.powf(2.3));
        assert_eq!(b[0], f[0]);
        assert!((f[0] - 0.20306).abs() < 1e-5);
        assert!((f[1] - 1.0).abs() < 1e-5);
        assert!((b[1] / 1e-6f64.powf(2.3) - 1.0).abs() < 1e-6);
        assert_eq!(f[2], 1e-6f64.powf(2.3));
        assert!(f.iter().chain(&b).all(|v| *v > 0.0 && v.ln().is_finite()));
    }

    #[test]
    fn unit_alpha_is_identity_on_clamped_values() {
        let vals = [0.1, 0.25, 0.9, 0.0];
        let m = ProbMap::from_f64(4, 1, &vals).unwrap();
        let (f, _) = pmap_likelihoods(&m, 1.0, 1e-6);
        for (got, &p) in f.iter().zip(&vals) {
            assert_eq!(*got, (p as f32 as f64).clamp(1e-6, 1.0 - 1e-6));
        }
    }

    #[test]
    fn weight_schedule() {
        let p = CutoutParams::default();
        assert_eq!(p.weight(1), 25.0);
        assert_eq!(p.weight(2), 12.5);
        assert_eq!(p.weight(5), 5.0);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = CutoutParams {
            eps_prob: 0.5,
            ..Default::default()
        };
        assert_eq!(p.validate().unwrap_err().code(), "InvalidParam");
    }

    fn square_scene() -> (RgbImage, CutoutMask) {
        let (w, h) = (24, 20);
        let mut img = RgbImage::filled(w, h, [30, 90, 40]).unwrap();
        let mut gt = CutoutMask::empty(w, h).unwrap();
        for y in 5..15 {
            for x in 6..18 {
                img.set(x, y, [200, 60, 50]);
                gt.set(x, y, true);
            }
        }
        (img, gt)
    }

    #[test]
    fn clean_pmap_reproduces_ground_truth() {
        let (img, gt) = square_scene();
        let pmap = ProbMap::from_mask(&gt);
        assert_eq!(
            initial_mask(&img, &pmap, &CutoutParams::default()).unwrap(),
            gt
        );
        let (mask, trace) = pmap_grabcut(&img, &pmap, &CutoutParams::default()).unwrap();
        assert_eq!(mask, gt);
        for s in &trace.steps {
            assert_eq!(s.w, 25.0 / s.k as f64);
        }
    }

    #[test]
    fn degenerate_pmaps_rejected() {
        let (img, _) = square_scene();
        let zero = ProbMap::zeros(24, 20).unwrap();
        assert_eq!(
            initial_mask(&img, &zero, &CutoutParams::default())
                .unwrap_err()
                .code(),
            "EmptyForeground"
        );
        let half = ProbMap::constant(24, 20, 0.5).unwrap();
        let params = CutoutParams {
            gamma: 0.0,
            ..Default::default()
        };
        assert_eq!(
            initial_mask(&img, &half, &params).unwrap_err().code(),
            "EmptyForeground"
        );
    }

    #[test]
    fn dimension_mismatch() {
        let (img, _) = square_scene();
        let pmap = ProbMap::zeros(3, 3).unwrap();
        assert_eq!(
            pmap_grabcut(&img, &pmap, &CutoutParams::default())
                .unwrap_err()
                .code(),
            "DimensionMismatch"
        );
    }

    #[test]
    fn plain_grabcut_on_separable_square() {
        let (img, gt) = square_scene();
        let mask = plain_grabcut(&img, &Rect::new(4, 3, 16, 14), &CutoutParams::default()).unwrap();
        assert_eq!(mask, gt);
    }

    #[test]
    fn plain_grabcut_whole_image_rect() {
        let (img, _) = square_scene();
        let err = plain_grabcut(&img, &img.full_rect(), &CutoutParams::default()).unwrap_err();
        assert_eq!(err.code(), "EmptyBackground");
        let err =
            plain_grabcut(&img, &Rect::new(20, 0, 10, 5), &CutoutParams::default()).unwrap_err();
        assert_eq!(err.code(), "OutOfBounds");
    }

    #[test]
    fn deterministic() {
        let (img, gt) = square_scene();
        let mut pmap_vals: Vec<f64> = ProbMap::from_mask(&gt)
            .values()
            .iter()
            .map(|&v| v as f64)
            .collect();
        for (i, v) in pmap_vals.iter_mut().enumerate() {
            *v = (*v * 0.8 + (i % 7) as f64 * 0.02).min(1.0);
        }
        let pmap = ProbMap::from_f64(24, 20, &pmap_vals).unwrap();
        let a = pmap_grabcut(&img, &pmap, &CutoutParams::default()).unwrap();
        let b = pmap_grabcut(&img, &pmap, &CutoutParams::default()).unwrap();
        assert_eq!(a, b);
    }
}
