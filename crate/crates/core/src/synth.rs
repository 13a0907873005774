//! Procedural cluttered scenes with exact ground truth, and an oracle that
//! degrades ground-truth masks into realistic-looking probability maps.
//!
//! Objects are chair-like silhouettes built from rectangles: a backrest,
//! a seat and two to four thin legs. Distractors are drawn either with the
//! target palette (look-alike chairs, usually placed close to a target) or
//! as unrelated colored blobs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{CutoutMask, ProbMap, Rect, RgbImage};
use crate::rng::XorShift64;

const PLACEMENT_ATTEMPTS: usize = 1000;
/// Canvas size at which object lengths are taken at face value; larger
/// canvases scale objects up proportionally.
const REFERENCE_DIMS: (f64, f64) = (160.0, 120.0);
/// Empty pixels kept between any two objects.
const OBJECT_GAP: usize = 2;
/// Per-channel uniform jitter applied to object colors.
const COLOR_JITTER: i32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundKind {
    Flat,
    Gradient,
    Texture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub n_targets: usize,
    pub n_distractors: usize,
    /// Fraction of distractors drawn with the target palette.
    pub palette_overlap: f64,
    pub background: BackgroundKind,
    pub seed: u64,
}

impl SceneSpec {
    /// The cluttered regime used by the demo and the benchmark: a 320×240
    /// flat canvas, one target and three distractors, all sharing the
    /// target palette.
    pub fn clutter(seed: u64) -> Self {
        Self {
            width: 320,
            height: 240,
            n_targets: 1,
            n_distractors: 3,
            palette_overlap: 1.0,
            background: BackgroundKind::Flat,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParam(
                "scene dimensions must be positive".into(),
            ));
        }
        if self.n_targets == 0 {
            return Err(Error::InvalidParam("n_targets must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.palette_overlap) {
            return Err(Error::InvalidParam(format!(
                "palette_overlap must be in [0,1], got {}",
                self.palette_overlap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub image: RgbImage,
    pub gt_masks: Vec<CutoutMask>,
    pub gt_rects: Vec<Rect>,
    pub distractor_masks: Vec<CutoutMask>,
    /// Whether each distractor uses the target palette.
    pub distractor_lookalike: Vec<bool>,
}

impl SynthScene {
    /// Every object except target `index`: other targets and all distractors.
    pub fn confusers(&self, index: usize) -> Vec<&CutoutMask> {
        self.gt_masks
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, m)| m)
            .chain(&self.distractor_masks)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleNoise {
    pub blur_radius: usize,
    /// Amplitude of uniform per-pixel noise.
    pub flip_noise: f64,
    /// Probability floor painted over distractor pixels.
    pub leak: f64,
    pub seed: u64,
}

impl Default for OracleNoise {
    fn default() -> Self {
        Self {
            blur_radius: 2,
            flip_noise: 0.05,
            leak: 0.15,
            seed: 0,
        }
    }
}

impl OracleNoise {
    pub fn clean() -> Self {
        Self {
            blur_radius: 0,
            flip_noise: 0.0,
            leak: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("flip_noise", self.flip_noise), ("leak", self.leak)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam(format!(
                    "{name} must be in [0,1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Two-tone palette: frame (seat and back) and legs.
#[derive(Debug, Clone, Copy)]
struct Palette {
    frame: [u8; 3],
    legs: [u8; 3],
}

/// Shape layer: which pixels of an object box are frame or leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Empty,
    Frame,
    Legs,
}

struct Shape {
    w: usize,
    h: usize,
    parts: Vec<Part>,
}

impl Shape {
    /// Object pixels inside `r` minus those outside it, with the shape at
    /// `(ox, oy)`.
    fn containment(&self, ox: usize, oy: usize, r: &Rect) -> i64 {
        let mut n = 0;
        for y in 0..self.h {
            for x in 0..self.w {
                if self.at(x, y) != Part::Empty {
                    n += if r.contains(ox + x, oy + y) { 1 } else { -1 };
                }
            }
        }
        n
    }

    fn at(&self, x: usize, y: usize) -> Part {
        self.parts[y * self.w + x]
    }

    fn fill(&mut self, x0: usize, y0: usize, w: usize, h: usize, part: Part) {
        for y in y0..(y0 + h).min(self.h) {
            for x in x0..(x0 + w).min(self.w) {
                self.parts[y * self.w + x] = part;
            }
        }
    }
}

/// Front- or side-facing chair with random proportions. All lengths are
/// multiplied by `unit`.
fn chair_shape(rng: &mut XorShift64, unit: f64) -> Shape {
    let sc = |v: usize| scaled(v, unit);
    let w = sc(rng.range(22, 34));
    let h = sc(rng.range(30, 46));
    let mut s = Shape {
        w,
        h,
        parts: vec![Part::Empty; w * h],
    };
    let seat_y = h * rng.range(40, 55) / 100;
    let seat_h = sc(rng.range(4, 7));
    let leg_w = sc(rng.range(2, 3));
    let back_w = sc(rng.range(4, 7));
    if rng.chance(0.5) {
        // front view: backrest panel above the seat, legs at both sides
        let inset = sc(rng.range(1, 3));
        s.fill(inset, 0, w - 2 * inset, seat_y, Part::Frame);
        // hollow out the middle of the backrest
        let hole_w = (w - 2 * inset).saturating_sub(2 * back_w);
        let hole_h = seat_y.saturating_sub(back_w + sc(2));
        if hole_w >= sc(3) && hole_h >= sc(3) {
            s.fill(inset + back_w, back_w, hole_w, hole_h, Part::Empty);
        }
        s.fill(0, seat_y, w, seat_h, Part::Frame);
        let leg_top = seat_y + seat_h;
        s.fill(inset / 2, leg_top, leg_w, h - leg_top, Part::Legs);
        s.fill(
            w - inset / 2 - leg_w,
            leg_top,
            leg_w,
            h - leg_top,
            Part::Legs,
        );
        if rng.chance(0.5) {
            let cross_y = leg_top + (h - leg_top) / 2;
            s.fill(0, cross_y, w, sc(2), Part::Legs);
        }
    } else {
        // side view: tall backrest post on one side
        let back_left = rng.chance(0.5);
        let bx = if back_left { 0 } else { w - back_w };
        s.fill(bx, 0, back_w, seat_y + seat_h, Part::Frame);
        s.fill(0, seat_y, w, seat_h, Part::Frame);
        let leg_top = seat_y + seat_h;
        let n_legs = rng.range(2, 3);
        for l in 0..n_legs {
            let lx = if n_legs == 1 {
                0
            } else {
                l * (w - leg_w) / (n_legs - 1)
            };
            s.fill(lx, leg_top, leg_w, h - leg_top, Part::Legs);
        }
    }
    s
}

/// Ellipse or rectangle blob used by non-look-alike distractors.
fn blob_shape(rng: &mut XorShift64, unit: f64) -> Shape {
    let w = scaled(rng.range(12, 34), unit);
    let h = scaled(rng.range(12, 40), unit);
    let mut s = Shape {
        w,
        h,
        parts: vec![Part::Empty; w * h],
    };
    if rng.chance(0.5) {
        s.fill(0, 0, w, h, Part::Frame);
    } else {
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        for y in 0..h {
            for x in 0..w {
                let dx = (x as f64 + 0.5 - cx) / cx;
                let dy = (y as f64 + 0.5 - cy) / cy;
                if dx * dx + dy * dy <= 1.0 {
                    s.parts[y * w + x] = Part::Frame;
                }
            }
        }
    }
    s
}

fn scaled(v: usize, unit: f64) -> usize {
    ((v as f64 * unit).round() as usize).max(1)
}

fn random_color(rng: &mut XorShift64) -> [u8; 3] {
    std::array::from_fn(|_| rng.range(0, 255) as u8)
}

fn color_dist(a: [u8; 3], b: [f64; 3]) -> f64 {
    (0..3)
        .map(|c| (a[c] as f64 - b[c]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Color at least `min_dist` away from every color in `avoid`.
fn distinct_color(rng: &mut XorShift64, avoid: &[[f64; 3]], min_dist: f64) -> [u8; 3] {
    let mut best = random_color(rng);
    let mut best_d = 0.0;
    for _ in 0..200 {
        let c = random_color(rng);
        let d = avoid
            .iter()
            .map(|a| color_dist(c, *a))
            .fold(f64::INFINITY, f64::min);
        if d >= min_dist {
            return c;
        }
        if d > best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn jitter(rng: &mut XorShift64, c: [u8; 3]) -> [u8; 3] {
    std::array::from_fn(|i| {
        let v = c[i] as i32 + rng.range(0, 2 * COLOR_JITTER as usize) as i32 - COLOR_JITTER;
        v.clamp(0, 255) as u8
    })
}

fn paint_background(
    rng: &mut XorShift64,
    spec: &SceneSpec,
    avoid: &[[f64; 3]],
) -> Result<RgbImage> {
    let (w, h) = (spec.width, spec.height);
    let c0 = distinct_color(rng, avoid, 120.0);
    let mut img = RgbImage::filled(w, h, c0)?;
    match spec.background {
        BackgroundKind::Flat => {}
        BackgroundKind::Gradient => {
            let c1 = distinct_color(rng, avoid, 120.0);
            let horizontal = rng.chance(0.5);
            for y in 0..h {
                for x in 0..w {
                    let t = if horizontal {
                        x as f64 / (w.max(2) - 1) as f64
                    } else {
                        y as f64 / (h.max(2) - 1) as f64
                    };
                    let c = std::array::from_fn(|i| {
                        (c0[i] as f64 * (1.0 - t) + c1[i] as f64 * t).round() as u8
                    });
                    img.set(x, y, c);
                }
            }
        }
        BackgroundKind::Texture => {
            let c1 = distinct_color(rng, avoid, 120.0);
            let cell = rng.range(6, 12);
            let phase = rng.range(0, 1000);
            for y in 0..h {
                for x in 0..w {
                    let t = ((x / cell + 3 * (y / cell) + phase) * 2_654_435_761) % 97;
                    let base = if t < 48 { c0 } else { c1 };
                    img.set(x, y, jitter(rng, base));
                }
            }
        }
    }
    Ok(img)
}

/// Occupancy grid of already-placed objects, grown by [`OBJECT_GAP`].
struct Occupancy {
    w: usize,
    h: usize,
    taken: Vec<bool>,
}

impl Occupancy {
    fn fits(&self, shape: &Shape, ox: usize, oy: usize) -> bool {
        for y in 0..shape.h {
            for x in 0..shape.w {
                if shape.at(x, y) != Part::Empty && self.taken[(oy + y) * self.w + ox + x] {
                    return false;
                }
            }
        }
        true
    }

    fn claim(&mut self, shape: &Shape, ox: usize, oy: usize) {
        let g = OBJECT_GAP as isize;
        for y in 0..shape.h {
            for x in 0..shape.w {
                if shape.at(x, y) == Part::Empty {
                    continue;
                }
                for dy in -g..=g {
                    for dx in -g..=g {
                        let px = (ox + x) as isize + dx;
                        let py = (oy + y) as isize + dy;
                        if px >= 0 && py >= 0 && (px as usize) < self.w && (py as usize) < self.h {
                            self.taken[py as usize * self.w + px as usize] = true;
                        }
                    }
                }
            }
        }
    }
}

/// Neighborhood of a target, as a cutout rectangle around it would cover.
const NEIGHBORHOOD_FRAC: f64 = 0.15;
const NEIGHBORHOOD_MIN: usize = 4;
/// Fitting candidates compared when packing a look-alike next to its anchor.
const NEAR_CANDIDATES: usize = 64;

/// Places `shape` by rejection sampling. With `near`, the first half of the
/// budget samples around that rectangle and keeps the fitting position that
/// best packs the object into the rectangle's neighborhood.
fn place(
    rng: &mut XorShift64,
    occ: &Occupancy,
    shape: &Shape,
    near: Option<&Rect>,
    what: &str,
) -> Result<(usize, usize)> {
    if shape.w > occ.w || shape.h > occ.h {
        return Err(Error::PlacementFailed(format!(
            "{what}: {}x{} object does not fit a {}x{} canvas",
            shape.w, shape.h, occ.w, occ.h
        )));
    }
    let max_x = occ.w - shape.w;
    let max_y = occ.h - shape.h;
    if let Some(r) = near {
        let margin =
            NEIGHBORHOOD_MIN.max((r.w.max(r.h) as f64 * NEIGHBORHOOD_FRAC).round() as usize);
        let hood = r.expand(margin, occ.w, occ.h);
        let mut best: Option<((usize, usize), i64)> = None;
        let mut found = 0;
        for _ in 0..PLACEMENT_ATTEMPTS / 2 {
            // top-left corners whose box intersects the neighborhood
            let x = rng.range(
                (hood.x + 1).saturating_sub(shape.w),
                (hood.right() - 1).min(max_x),
            );
            let y = rng.range(
                (hood.y + 1).saturating_sub(shape.h),
                (hood.bottom() - 1).min(max_y),
            );
            if !occ.fits(shape, x, y) {
                continue;
            }
            let inside = shape.containment(x, y, &hood);
            if best.is_none_or(|(_, b)| inside > b) {
                best = Some(((x, y), inside));
            }
            found += 1;
            if found == NEAR_CANDIDATES {
                break;
            }
        }
        if let Some((pos, _)) = best {
            return Ok(pos);
        }
    }
    for _ in 0..PLACEMENT_ATTEMPTS {
        let (x, y) = (rng.range(0, max_x), rng.range(0, max_y));
        if occ.fits(shape, x, y) {
            return Ok((x, y));
        }
    }
    Err(Error::PlacementFailed(format!(
        "{what} after {PLACEMENT_ATTEMPTS} attempts"
    )))
}

fn paint_shape(
    rng: &mut XorShift64,
    img: &mut RgbImage,
    shape: &Shape,
    palette: &Palette,
    ox: usize,
    oy: usize,
) -> CutoutMask {
    let (w, h) = img.dims();
    let mut mask = CutoutMask::empty(w, h).expect("canvas is non-empty");
    for y in 0..shape.h {
        for x in 0..shape.w {
            let base = match shape.at(x, y) {
                Part::Empty => continue,
                Part::Frame => palette.frame,
                Part::Legs => palette.legs,
            };
            img.set(ox + x, oy + y, jitter(rng, base));
            mask.set(ox + x, oy + y, true);
        }
    }
    mask
}

/// Generates a scene; a pure function of `spec`.
pub fn gen_scene(spec: &SceneSpec) -> Result<SynthScene> {
    spec.validate()?;
    let mut rng = XorShift64::new(spec.seed);
    let unit = (spec.width as f64 / REFERENCE_DIMS.0)
        .min(spec.height as f64 / REFERENCE_DIMS.1)
        .max(1.0);
    let frame = random_color(&mut rng);
    let legs: [u8; 3] = std::array::from_fn(|c| (frame[c] as f64 * 0.7) as u8);
    let target_palette = Palette { frame, legs };
    let avoid = [
        target_palette.frame.map(|v| v as f64),
        target_palette.legs.map(|v| v as f64),
    ];
    let mut img = paint_background(&mut rng, spec, &avoid)?;
    let mut occ = Occupancy {
        w: spec.width,
        h: spec.height,
        taken: vec![false; spec.width * spec.height],
    };

    let mut gt_masks = Vec::with_capacity(spec.n_targets);
    let mut gt_rects = Vec::with_capacity(spec.n_targets);
    for t in 0..spec.n_targets {
        let shape = chair_shape(&mut rng, unit);
        let (x, y) = place(&mut rng, &occ, &shape, None, &format!("target {t}"))?;
        occ.claim(&shape, x, y);
        let mask = paint_shape(&mut rng, &mut img, &shape, &target_palette, x, y);
        gt_rects.push(mask.bounding_rect().expect("chair shapes are non-empty"));
        gt_masks.push(mask);
    }

    let mut distractor_masks = Vec::with_capacity(spec.n_distractors);
    let mut distractor_lookalike = Vec::with_capacity(spec.n_distractors);
    for d in 0..spec.n_distractors {
        let lookalike = rng.chance(spec.palette_overlap);
        let (shape, palette, near) = if lookalike {
            let anchor = gt_rects[rng.range(0, gt_rects.len() - 1)];
            // look-alikes further back in the scene appear smaller
            let depth = if rng.chance(0.5) {
                rng.uniform(0.35, 0.6)
            } else {
                1.0
            };
            (
                chair_shape(&mut rng, unit * depth),
                target_palette,
                Some(anchor),
            )
        } else {
            let c = distinct_color(&mut rng, &avoid, 80.0);
            let palette = Palette { frame: c, legs: c };
            let shape = if rng.chance(0.5) {
                blob_shape(&mut rng, unit)
            } else {
                chair_shape(&mut rng, unit)
            };
            (shape, palette, None)
        };
        let (x, y) = place(
            &mut rng,
            &occ,
            &shape,
            near.as_ref(),
            &format!("distractor {d}"),
        )?;
        occ.claim(&shape, x, y);
        distractor_masks.push(paint_shape(&mut rng, &mut img, &shape, &palette, x, y));
        distractor_lookalike.push(lookalike);
    }

    Ok(SynthScene {
        image: img,
        gt_masks,
        gt_rects,
        distractor_masks,
        distractor_lookalike,
    })
}

/// Mean color of the masked pixels.
pub fn mean_color(image: &RgbImage, mask: &CutoutMask) -> Option<[f64; 3]> {
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for (p, &fg) in image.pixels().iter().zip(mask.labels()) {
        if fg {
            for c in 0..3 {
                sum[c] += p[c] as f64;
            }
            n += 1;
        }
    }
    (n > 0).then(|| sum.map(|s| s / n as f64))
}

/// Union of all target masks.
pub fn targets_union(scene: &SynthScene) -> CutoutMask {
    let (w, h) = scene.image.dims();
    let mut out = CutoutMask::empty(w, h).expect("scene canvas is non-empty");
    for m in &scene.gt_masks {
        for (o, &g) in out.labels_mut().iter_mut().zip(m.labels()) {
            *o |= g;
        }
    }
    out
}

/// Image-level oracle map: every target is foreground, every distractor
/// leaks.
pub fn scene_pmap(scene: &SynthScene, noise: &OracleNoise) -> Result<ProbMap> {
    let distractors: Vec<&CutoutMask> = scene.distractor_masks.iter().collect();
    oracle_pmap(&targets_union(scene), &distractors, noise)
}

/// Degrades `gt` into a probability map: distractor pixels are raised to
/// at least `leak`, the result is box-blurred with zero padding over a
/// `(2r+1)^2` window, uniform noise in `[-flip_noise, flip_noise]` is added,
/// and values are clamped to `[0,1]`.
pub fn oracle_pmap(
    gt: &CutoutMask,
    distractors: &[&CutoutMask],
    noise: &OracleNoise,
) -> Result<ProbMap> {
    noise.validate()?;
    let (w, h) = gt.dims();
    for d in distractors {
        if d.dims() != gt.dims() {
            return Err(Error::dims(gt.dims(), d.dims()));
        }
    }
    let mut values: Vec<f64> = gt
        .labels()
        .iter()
        .map(|&fg| if fg { 1.0 } else { 0.0 })
        .collect();
    if noise.leak > 0.0 {
        for d in distractors {
            for (v, &fg) in values.iter_mut().zip(d.labels()) {
                if fg {
                    *v = v.max(noise.leak);
                }
            }
        }
    }
    if noise.blur_radius > 0 {
        values = box_blur(&values, w, h, noise.blur_radius);
    }
    if noise.flip_noise > 0.0 {
        let mut rng = XorShift64::new(noise.seed);
        for v in values.iter_mut() {
            *v += rng.uniform(-noise.flip_noise, noise.flip_noise);
        }
    }
    for v in values.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    ProbMap::from_f64(w, h, &values)
}

/// Separable box filter, zero padding, fixed `(2r+1)^2` divisor.
fn box_blur(values: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let r = r as isize;
    let norm = (2 * r + 1) as f64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for dx in -r..=r {
                let xx = x as isize + dx;
                if xx >= 0 && (xx as usize) < w {
                    s += values[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = s / norm;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for dy in -r..=r {
                let yy = y as isize + dy;
                if yy >= 0 && (yy as usize) < h {
                    s += tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = s / norm;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64) -> SceneSpec {
        SceneSpec {
            width: 160,
            height: 120,
            n_targets: 1,
            n_distractors: 3,
            palette_overlap: 1.0,
            background: BackgroundKind::Flat,
            seed,
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(gen_scene(&spec(5)).unwrap(), gen_scene(&spec(5)).unwrap());
        assert_ne!(
            gen_scene(&spec(5)).unwrap().image,
            gen_scene(&spec(6)).unwrap().image
        );
    }

    #[test]
    fn single_target_uses_target_palette() {
        let s = SceneSpec {
            n_distractors: 0,
            ..spec(11)
        };
        let scene = gen_scene(&s).unwrap();
        assert_eq!(scene.gt_masks.len(), 1);
        // frame and legs are two jittered base colors; every FG pixel lies
        // within the jitter of one of them
        let mut rng = XorShift64::new(s.seed);
        let frame = random_color(&mut rng);
        let legs: [u8; 3] = std::array::from_fn(|c| (frame[c] as f64 * 0.7) as u8);
        for (p, &fg) in scene.image.pixels().iter().zip(scene.gt_masks[0].labels()) {
            if fg {
                let near = |base: [u8; 3]| {
                    (0..3).all(|c| (p[c] as i32 - base[c] as i32).abs() <= COLOR_JITTER)
                };
                assert!(near(frame) || near(legs), "{p:?}");
            }
        }
    }

    #[test]
    fn rects_are_tight_and_masks_disjoint() {
        let s = SceneSpec {
            n_targets: 3,
            n_distractors: 4,
            background: BackgroundKind::Texture,
            width: 240,
            height: 180,
            ..spec(2)
        };
        let scene = gen_scene(&s).unwrap();
        for (m, r) in scene.gt_masks.iter().zip(&scene.gt_rects) {
            assert_eq!(m.bounding_rect().unwrap(), *r);
        }
        let all: Vec<&CutoutMask> = scene
            .gt_masks
            .iter()
            .chain(&scene.distractor_masks)
            .collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert!(all[i]
                    .labels()
                    .iter()
                    .zip(all[j].labels())
                    .all(|(a, b)| !(a & b)));
            }
        }
    }

    #[test]
    fn crowded_canvas_fails() {
        let s = SceneSpec {
            width: 64,
            height: 64,
            n_targets: 20,
            n_distractors: 0,
            ..spec(1)
        };
        assert_eq!(gen_scene(&s).unwrap_err().code(), "PlacementFailed");
    }

    #[test]
    fn lookalike_distractor_matches_target_color() {
        for seed in 0..10 {
            let scene = gen_scene(&spec(seed)).unwrap();
            let target = mean_color(&scene.image, &scene.gt_masks[0]).unwrap();
            let close = scene.distractor_masks.iter().any(|d| {
                let m = mean_color(&scene.image, d).unwrap();
                (0..3).all(|c| (m[c] - target[c]).abs() <= 10.0)
            });
            assert!(close, "seed {seed}");
        }
    }

    #[test]
    fn clean_oracle_is_ground_truth() {
        let scene = gen_scene(&spec(3)).unwrap();
        let gt = &scene.gt_masks[0];
        let confusers = scene.confusers(0);
        let p = oracle_pmap(gt, &confusers, &OracleNoise::clean()).unwrap();
        assert_eq!(p, ProbMap::from_mask(gt));
        let empty = CutoutMask::empty(gt.width(), gt.height()).unwrap();
        let p = oracle_pmap(
            &empty,
            &[],
            &OracleNoise {
                seed: 1,
                ..OracleNoise::clean()
            },
        )
        .unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn box_blur_on_center_pixel() {
        let mut gt = CutoutMask::empty(3, 3).unwrap();
        gt.set(1, 1, true);
        let p = oracle_pmap(
            &gt,
            &[],
            &OracleNoise {
                blur_radius: 1,
                ..OracleNoise::clean()
            },
        )
        .unwrap();
        for &v in p.values() {
            assert!((v as f64 - 1.0 / 9.0).abs() < 1e-7);
        }
    }

    #[test]
    fn oracle_mismatch_and_range() {
        let gt = CutoutMask::empty(4, 4).unwrap();
        let other = CutoutMask::empty(5, 4).unwrap();
        assert_eq!(
            oracle_pmap(&gt, &[&other], &OracleNoise::default())
                .unwrap_err()
                .code(),
            "DimensionMismatch"
        );
        let scene = gen_scene(&spec(8)).unwrap();
        let noise = OracleNoise {
            flip_noise: 0.4,
            leak: 0.3,
            blur_radius: 3,
            seed: 2,
        };
        let p = oracle_pmap(&scene.gt_masks[0], &scene.confusers(0), &noise).unwrap();
        assert!(p.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
