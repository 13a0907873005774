use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// HoG geometry. Inputs are resampled to `patch_size` before extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogConfig {
    pub cell_size: usize,
    /// Block side in cells.
    pub block_size: usize,
    pub n_bins: usize,
    /// `(width, height)` in pixels.
    pub patch_size: (usize, usize),
}

impl Default for HogConfig {
    fn default() -> Self {
        Self {
            cell_size: 8,
            block_size: 2,
            n_bins: 9,
            patch_size: (64, 64),
        }
    }
}

/// Clip applied between the two L2 normalizations of a block.
const L2HYS_CLIP: f64 = 0.2;

impl HogConfig {
    pub fn validate(&self) -> Result<()> {
        let (pw, ph) = self.patch_size;
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        if self.cell_size == 0 || self.block_size == 0 || self.n_bins == 0 {
            return bad("cell_size, block_size and n_bins must be positive".into());
        }
        if pw == 0 || ph == 0 || pw % self.cell_size != 0 || ph % self.cell_size != 0 {
            return bad(format!(
                "patch {pw}x{ph} is not a positive multiple of cell size {}",
                self.cell_size
            ));
        }
        let (cx, cy) = self.cells();
        if self.block_size > cx || self.block_size > cy {
            return bad(format!(
                "{0}x{0} block does not fit a {cx}x{cy} cell grid",
                self.block_size
            ));
        }
        Ok(())
    }

    pub fn cells(&self) -> (usize, usize) {
        (
            self.patch_size.0 / self.cell_size,
            self.patch_size.1 / self.cell_size,
        )
    }

    /// `(cells_x − block + 1)·(cells_y − block + 1)·block²·n_bins`.
    pub fn dim(&self) -> usize {
        let (cx, cy) = self.cells();
        (cx + 1 - self.block_size)
            * (cy + 1 - self.block_size)
            * self.block_size.pow(2)
            * self.n_bins
    }
}

/// Bilinear resampling with pixel centers aligned (`src = (dst + 0.5)·scale − 0.5`,
/// clamped at the borders). Same-size input is returned unchanged.
pub fn resample_bilinear(
    raster: &[f64],
    width: usize,
    height: usize,
    out_w: usize,
    out_h: usize,
) -> Vec<f64> {
    assert_eq!(
        raster.len(),
        width * height,
        "raster does not match its dimensions"
    );
    if (width, height) == (out_w, out_h) {
        return raster.to_vec();
    }
    let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xs = axis(width, out_w);
    let ys = axis(height, out_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = raster[y0 * width + x0] * (1.0 - fx) + raster[y0 * width + x1] * fx;
            let bottom = raster[y1 * width + x0] * (1.0 - fx) + raster[y1 * width + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Histogram of oriented gradients of a single-channel raster.
///
/// Gradients are central differences with replicated borders. Each pixel
/// votes its magnitude into the two nearest of `n_bins` unsigned
/// orientation bins centered at `b·180°/n_bins`. Cell histograms are
/// grouped into overlapping blocks (stride one cell, blocks and their cells
/// row-major) and each block is L2-hys normalized; an all-zero block stays
/// zero.
pub fn hog(raster: &[f64], width: usize, height: usize, cfg: &HogConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if raster.len() != width * height || width == 0 || height == 0 {
        return Err(Error::mismatch(
            format!("{width}x{height} raster ({} values)", width * height),
            format!("{} values", raster.len()),
        ));
    }
    let (pw, ph) = cfg.patch_size;
    let patch = resample_bilinear(raster, width, height, pw, ph);
    let (cx, cy) = cfg.cells();
    let nb = cfg.n_bins;
    let bin_width = std::f64::consts::PI / nb as f64;
    let mut cells = vec![0.0; cx * cy * nb];
    let at = |x: usize, y: usize| patch[y * pw + x];
    for y in 0..ph {
        for x in 0..pw {
            let gx = at((x + 1).min(pw - 1), y) - at(x.saturating_sub(1), y);
            let gy = at(x, (y + 1).min(ph - 1)) - at(x, y.saturating_sub(1));
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let angle = gy.atan2(gx).rem_euclid(std::f64::consts::PI);
            let pos = angle / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = lo as usize % nb;
            let b1 = (b0 + 1) % nb;
            let cell = ((y / cfg.cell_size) * cx + x / cfg.cell_size) * nb;
            cells[cell + b0] += mag * (1.0 - frac);
            cells[cell + b1] += mag * frac;
        }
    }

    let bs = cfg.block_size;
    let mut out = Vec::with_capacity(cfg.dim());
    let mut block = Vec::with_capacity(bs * bs * nb);
    for by in 0..=cy - bs {
        for bx in 0..=cx - bs {
            block.clear();
            for y in by..by + bs {
                for x in bx..bx + bs {
                    let c = (y * cx + x) * nb;
                    block.extend_from_slice(&cells[c..c + nb]);
                }
            }
            l2hys(&mut block);
            out.extend_from_slice(&block);
        }
    }
    Ok(out)
}

fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
}

fn l2hys(v: &mut [f64]) {
    l2_normalize(v);
    v.iter_mut().for_each(|x| *x = x.min(L2HYS_CLIP));
    l2_normalize(v);
}
