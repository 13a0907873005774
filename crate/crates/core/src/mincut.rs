//! Binary pixel-labeling energies on an 8-connected grid and their exact
//! minimization by max-flow.
//!
//! The energy of a labeling `L` is
//! `sum_i U_i(L_i) + sum_(i,j) w_ij [L_i != L_j]`, with all costs finite and
//! nonnegative. Foreground is the source side of the cut.

use crate::error::{Error, Result};
use crate::image::{CutoutMask, RgbImage};
use crate::maxflow::FlowGraph;

/// Neighbor offsets whose edge weight is stored at each pixel: east, south,
/// south-east, south-west. Every undirected 8-neighborhood edge appears
/// exactly once.
pub const NEIGHBORS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (-1, 1)];

const DIAGONAL_ATTENUATION: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct GridEnergy {
    width: usize,
    height: usize,
    unary_fg: Vec<f64>,
    unary_bg: Vec<f64>,
    /// Per pixel, weights toward the neighbors in [`NEIGHBORS`]; zero where
    /// the neighbor falls outside the grid.
    edges: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutResult {
    pub mask: CutoutMask,
    pub energy: f64,
    pub flow: f64,
}

impl GridEnergy {
    pub fn new(
        width: usize,
        height: usize,
        unary_fg: Vec<f64>,
        unary_bg: Vec<f64>,
        edges: Vec<[f64; 4]>,
    ) -> Result<Self> {
        let n = width * height;
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam("empty grid".into()));
        }
        for (name, len) in [
            ("unary_fg", unary_fg.len()),
            ("unary_bg", unary_bg.len()),
            ("edges", edges.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n} {name} entries for {width}x{height}"),
                    got: format!("{len}"),
                });
            }
        }
        for (index, &value) in unary_fg.iter().chain(&unary_bg).enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::NegativeUnary {
                    index: index % n,
                    value,
                });
            }
        }
        let mut edges = edges;
        for (i, e) in edges.iter_mut().enumerate() {
            let (x, y) = (i % width, i / width);
            for (k, w) in e.iter_mut().enumerate() {
                if !(w.is_finite() && *w >= 0.0) {
                    return Err(Error::InvalidParam(format!(
                        "edge weight {w} at pixel {i} must be finite and nonnegative"
                    )));
                }
                if neighbor(width, height, x, y, k).is_none() {
                    *w = 0.0;
                }
            }
        }
        Ok(Self {
            width,
            height,
            unary_fg,
            unary_bg,
            edges,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn unary_fg(&self) -> &[f64] {
        &self.unary_fg
    }

    pub fn unary_bg(&self) -> &[f64] {
        &self.unary_bg
    }

    pub fn edges(&self) -> &[[f64; 4]] {
        &self.edges
    }

    /// Energy of `labels` (true = foreground).
    pub fn energy(&self, labels: &[bool]) -> f64 {
        let mut total = 0.0;
        for (i, &fg) in labels.iter().enumerate() {
            total += if fg {
                self.unary_fg[i]
            } else {
                self.unary_bg[i]
            };
            let (x, y) = (i % self.width, i / self.width);
            for (k, &w) in self.edges[i].iter().enumerate() {
                if w > 0.0 {
                    if let Some(j) = neighbor(self.width, self.height, x, y, k) {
                        if labels[j] != fg {
                            total += w;
                        }
                    }
                }
            }
        }
        total
    }

    /// `sum_i min(U_i(FG), U_i(BG))`, the constant separating the max-flow
    /// value from the energy of the optimal labeling.
    pub fn unary_floor(&self) -> f64 {
        self.unary_fg
            .iter()
            .zip(&self.unary_bg)
            .map(|(f, b)| f.min(*b))
            .sum()
    }
}

#[inline]
pub(crate) fn neighbor(width: usize, height: usize, x: usize, y: usize, k: usize) -> Option<usize> {
    let (dx, dy) = NEIGHBORS[k];
    let nx = x as isize + dx;
    let ny = y as isize + dy;
    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
        return None;
    }
    Some(ny as usize * width + nx as usize)
}

/// Contrast-sensitive smoothness weights
/// `gamma * exp(-beta * |z_i - z_j|^2) / dist(i,j)` with
/// `beta = 1 / (2 * mean |z_i - z_j|^2)` over all grid edges. A constant
/// image has `beta = 0`.
pub fn contrast_weights(image: &RgbImage, gamma: f64) -> Vec<[f64; 4]> {
    let (w, h) = image.dims();
    let px = image.pixels();
    let sq = |a: [u8; 3], b: [u8; 3]| -> f64 {
        (0..3)
            .map(|c| {
                let d = a[c] as f64 - b[c] as f64;
                d * d
            })
            .sum()
    };
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            for k in 0..4 {
                if let Some(j) = neighbor(w, h, x, y, k) {
                    sum += sq(px[y * w + x], px[j]);
                    count += 1;
                }
            }
        }
    }
    let beta = if count > 0 && sum > 0.0 {
        1.0 / (2.0 * sum / count as f64)
    } else {
        0.0
    };
    let mut edges = vec![[0.0; 4]; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            for (k, edge) in edges[i].iter_mut().enumerate() {
                if let Some(j) = neighbor(w, h, x, y, k) {
                    let atten = if k < 2 { 1.0 } else { DIAGONAL_ATTENUATION };
                    *edge = gamma * (-beta * sq(px[i], px[j])).exp() * atten;
                }
            }
        }
    }
    edges
}

pub fn build_grid_energy(
    image: &RgbImage,
    unary_fg: Vec<f64>,
    unary_bg: Vec<f64>,
    gamma: f64,
) -> Result<GridEnergy> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }
    let n = image.width() * image.height();
    if unary_fg.len() != n || unary_bg.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} unaries for {}x{}", image.width(), image.height()),
            got: format!("{} fg / {} bg", unary_fg.len(), unary_bg.len()),
        });
    }
    GridEnergy::new(
        image.width(),
        image.height(),
        unary_fg,
        unary_bg,
        contrast_weights(image, gamma),
    )
}

/// Global minimizer of the grid energy. Among equal-energy labelings the
/// one with the smallest foreground set is returned.
pub fn min_cut(energy: &GridEnergy) -> CutResult {
    let n = energy.width * energy.height;
    let mut graph = FlowGraph::new(n, n * 4);
    for i in 0..n {
        // source->i is cut when i ends up background, i->sink when foreground;
        // the shared part min(fg, bg) is paid by every labeling
        let floor = energy.unary_fg[i].min(energy.unary_bg[i]);
        graph.add_terminal_weights(i, energy.unary_bg[i] - floor, energy.unary_fg[i] - floor);
    }
    for i in 0..n {
        let (x, y) = (i % energy.width, i / energy.width);
        for (k, &w) in energy.edges[i].iter().enumerate() {
            if w > 0.0 {
                if let Some(j) = neighbor(energy.width, energy.height, x, y, k) {
                    graph.add_edge(i, j, w, w);
                }
            }
        }
    }
    let flow = graph.max_flow();
    let labels = graph.source_side();
    let value = energy.energy(&labels);
    CutResult {
        mask: CutoutMask::new(energy.width, energy.height, labels).expect("labels sized to grid"),
        energy: value,
        flow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64;
    use proptest::prelude::*;

    /// Exhaustive minimum over all 2^n labelings.
    fn brute_force(e: &GridEnergy) -> f64 {
        let n = e.width * e.height;
        (0u32..1 << n)
            .map(|bits| {
                let labels: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
                e.energy(&labels)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn random_energy(rng: &mut XorShift64, w: usize, h: usize, max_cost: usize) -> GridEnergy {
        let n = w * h;
        let fg = (0..n).map(|_| rng.range(0, max_cost) as f64).collect();
        let bg = (0..n).map(|_| rng.range(0, max_cost) as f64).collect();
        let edges = (0..n)
            .map(|_| std::array::from_fn(|_| rng.range(0, max_cost / 2) as f64))
            .collect();
        GridEnergy::new(w, h, fg, bg, edges).unwrap()
    }

    #[test]
    fn constant_image_axial_weights_equal_gamma() {
        let img = RgbImage::filled(4, 3, [40, 50, 60]).unwrap();
        let edges = contrast_weights(&img, 50.0);
        assert_eq!(edges[0][0], 50.0);
        assert_eq!(edges[0][1], 50.0);
        assert!((edges[0][2] - 50.0 / 2f64.sqrt()).abs() < 1e-12);
        // last column has no east neighbor
        assert_eq!(edges[3][0], 0.0);
    }

    #[test]
    fn zero_gamma_gives_zero_weights() {
        let img = RgbImage::new(2, 2, vec![[0, 0, 0], [255, 0, 0], [0, 9, 0], [1, 2, 3]]).unwrap();
        assert!(contrast_weights(&img, 0.0)
            .iter()
            .flatten()
            .all(|&w| w == 0.0));
    }

    #[test]
    fn two_pixel_contrast_weight() {
        let img = RgbImage::new(2, 1, vec![[10, 10, 10], [10, 10, 40]]).unwrap();
        let edges = contrast_weights(&img, 7.0);
        assert!((edges[0][0] - 7.0 * (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let img = RgbImage::filled(2, 1, [0, 0, 0]).unwrap();
        let err = build_grid_energy(&img, vec![0.0, -1.0], vec![0.0, 0.0], 1.0).unwrap_err();
        assert_eq!(err.code(), "NegativeUnary");
        let err = build_grid_energy(&img, vec![0.0], vec![0.0, 0.0], 1.0).unwrap_err();
        assert_eq!(err.code(), "DimensionMismatch");
    }

    #[test]
    fn all_foreground_when_bg_expensive() {
        let img = RgbImage::filled(5, 4, [1, 2, 3]).unwrap();
        let e = build_grid_energy(&img, vec![0.0; 20], vec![10.0; 20], 50.0).unwrap();
        let r = min_cut(&e);
        assert_eq!(r.mask.count_fg(), 20);
        assert_eq!(r.energy, 0.0);
    }

    #[test]
    fn two_pixel_tie_breaks_to_background() {
        // FF = 5, BB = 5, FB = 10, BF = 20
        let e = GridEnergy::new(
            2,
            1,
            vec![0.0, 5.0],
            vec![5.0, 0.0],
            vec![[10.0, 0.0, 0.0, 0.0], [0.0; 4]],
        )
        .unwrap();
        let r = min_cut(&e);
        assert_eq!(r.energy, 5.0);
        assert_eq!(r.mask.labels(), &[false, false]);
    }

    #[test]
    fn random_3x3_matches_enumeration() {
        for seed in 0..100 {
            let mut rng = XorShift64::new(seed);
            let e = random_energy(&mut rng, 3, 3, 20);
            let r = min_cut(&e);
            assert_eq!(r.energy, brute_force(&e), "seed {seed}");
            assert_eq!(r.energy, r.flow + e.unary_floor());
        }
    }

    #[test]
    fn energy_equals_flow_on_float_costs() {
        let mut rng = XorShift64::new(99);
        let n = 12 * 9;
        let fg = (0..n).map(|_| rng.uniform(0.0, 5.0)).collect();
        let bg = (0..n).map(|_| rng.uniform(0.0, 5.0)).collect();
        let edges = (0..n)
            .map(|_| std::array::from_fn(|_| rng.uniform(0.0, 2.0)))
            .collect();
        let e = GridEnergy::new(12, 9, fg, bg, edges).unwrap();
        let r = min_cut(&e);
        let reformulated = r.flow + e.unary_floor();
        assert!((r.energy - reformulated).abs() <= 1e-9 * r.energy.max(1.0));
    }

    proptest! {
        #[test]
        fn optimal_on_small_grids(seed in any::<u64>(), w in 1usize..5, h in 1usize..5) {
            let mut rng = XorShift64::new(seed);
            let e = random_energy(&mut rng, w, h, 30);
            let r = min_cut(&e);
            prop_assert_eq!(r.energy, brute_force(&e));
            prop_assert_eq!(e.energy(r.mask.labels()), r.energy);
        }

        #[test]
        fn raising_fg_cost_never_grows_foreground(seed in any::<u64>(), c in 0usize..10) {
            let mut rng = XorShift64::new(seed);
            let e = random_energy(&mut rng, 4, 4, 20);
            let before = min_cut(&e).mask.count_fg();
            let shifted = GridEnergy::new(
                4, 4,
                e.unary_fg().iter().map(|v| v + c as f64).collect(),
                e.unary_bg().to_vec(),
                e.edges().to_vec(),
            ).unwrap();
            prop_assert!(min_cut(&shifted).mask.count_fg() <= before);
        }
    }
}
