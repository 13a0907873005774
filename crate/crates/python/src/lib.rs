//! Python bindings: images cross the boundary as raw row-major RGB bytes,
//! masks as one byte per pixel (0 or 1), P-maps as lists of floats.

use pmap_cutout::cutout::{plain_grabcut_traced, pmap_grabcut_in_rect, CutoutParams, CutoutTrace};
use pmap_cutout::eval::mask_iou as iou;
use pmap_cutout::synth::{gen_scene, oracle_pmap, OracleNoise, SceneSpec};
use pmap_cutout::{CutoutMask, Error, ProbMap, Rect, RgbImage};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(format!("{}: {other}", other.code())),
    }
}

fn mask_from_bytes(width: usize, height: usize, bytes: &[u8]) -> PyResult<CutoutMask> {
    CutoutMask::new(width, height, bytes.iter().map(|&b| b != 0).collect()).map_err(to_py)
}

fn mask_bytes<'py>(py: Python<'py>, mask: &CutoutMask) -> Bound<'py, PyBytes> {
    let raw: Vec<u8> = mask.labels().iter().map(|&l| l as u8).collect();
    PyBytes::new(py, &raw)
}

fn params_from(
    alpha: Option<f64>,
    b: Option<f64>,
    max_iters: Option<usize>,
    gamma: Option<f64>,
    seed: Option<u64>,
) -> CutoutParams {
    let d = CutoutParams::default();
    CutoutParams {
        alpha: alpha.unwrap_or(d.alpha),
        b: b.unwrap_or(d.b),
        max_iters: max_iters.unwrap_or(d.max_iters),
        gamma: gamma.unwrap_or(d.gamma),
        seed: seed.unwrap_or(d.seed),
        ..d
    }
}

fn result_dict<'py>(
    py: Python<'py>,
    mask: &CutoutMask,
    trace: &CutoutTrace,
) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("mask", mask_bytes(py, mask))?;
    let steps = trace
        .steps
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("k", s.k)?;
            d.set_item("w", s.w)?;
            d.set_item("energy", s.energy)?;
            d.set_item("changed_pixels", s.changed_pixels)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("trace", steps)?;
    Ok(out)
}

/// P-map guided GrabCut inside `rect = (x, y, w, h)`. `pmap` holds either
/// `width*height` or `w*h` probabilities. Returns `{"mask", "trace"}`.
#[pyfunction]
#[pyo3(signature = (image, width, height, pmap, rect, alpha=None, b=None, max_iters=None, gamma=None, seed=None))]
#[allow(clippy::too_many_arguments)]
fn pmap_grabcut<'py>(
    py: Python<'py>,
    image: &[u8],
    width: usize,
    height: usize,
    pmap: Vec<f32>,
    rect: (usize, usize, usize, usize),
    alpha: Option<f64>,
    b: Option<f64>,
    max_iters: Option<usize>,
    gamma: Option<f64>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let image = RgbImage::from_raw(width, height, image).map_err(to_py)?;
    let rect = Rect::new(rect.0, rect.1, rect.2, rect.3);
    let (pw, ph) = if pmap.len() == width * height {
        (width, height)
    } else {
        (rect.w, rect.h)
    };
    let pmap = ProbMap::new(pw, ph, pmap).map_err(to_py)?;
    let params = params_from(alpha, b, max_iters, gamma, seed);
    let (mask, trace) = py
        .detach(|| pmap_grabcut_in_rect(&image, &pmap, &rect, &params))
        .map_err(to_py)?;
    result_dict(py, &mask, &trace)
}

/// Rectangle-initialized GrabCut. Returns `{"mask", "trace"}`.
#[pyfunction]
#[pyo3(signature = (image, width, height, rect, max_iters=None, gamma=None, seed=None))]
#[allow(clippy::too_many_arguments)]
fn plain_grabcut<'py>(
    py: Python<'py>,
    image: &[u8],
    width: usize,
    height: usize,
    rect: (usize, usize, usize, usize),
    max_iters: Option<usize>,
    gamma: Option<f64>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let image = RgbImage::from_raw(width, height, image).map_err(to_py)?;
    let rect = Rect::new(rect.0, rect.1, rect.2, rect.3);
    let params = params_from(None, None, max_iters, gamma, seed);
    let (mask, trace) = py
        .detach(|| plain_grabcut_traced(&image, &rect, &params))
        .map_err(to_py)?;
    result_dict(py, &mask, &trace)
}

/// Synthetic clutter scene with an oracle P-map for its first target.
#[pyfunction]
#[pyo3(signature = (seed, width=320, height=240))]
fn synth_scene<'py>(
    py: Python<'py>,
    seed: u64,
    width: usize,
    height: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = SceneSpec {
        width,
        height,
        ..SceneSpec::clutter(seed)
    };
    let scene = gen_scene(&spec).map_err(to_py)?;
    let noise = OracleNoise {
        seed,
        ..OracleNoise::default()
    };
    let pmap = oracle_pmap(&scene.gt_masks[0], &scene.confusers(0), &noise).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("width", width)?;
    out.set_item("height", height)?;
    out.set_item("image", PyBytes::new(py, &scene.image.to_raw()))?;
    out.set_item(
        "gt_masks",
        scene
            .gt_masks
            .iter()
            .map(|m| mask_bytes(py, m))
            .collect::<Vec<_>>(),
    )?;
    out.set_item(
        "gt_rects",
        scene
            .gt_rects
            .iter()
            .map(|r| (r.x, r.y, r.w, r.h))
            .collect::<Vec<_>>(),
    )?;
    out.set_item("pmap", pmap.values().to_vec())?;
    Ok(out)
}

/// Foreground IoU of two byte masks of the same size.
#[pyfunction]
fn mask_iou(a: &[u8], b: &[u8], width: usize, height: usize) -> PyResult<f64> {
    iou(
        &mask_from_bytes(width, height, a)?,
        &mask_from_bytes(width, height, b)?,
    )
    .map_err(to_py)
}

#[pymodule]
pub fn pmap_cutout_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(pmap_grabcut, m)?)?;
    m.add_function(wrap_pyfunction!(plain_grabcut, m)?)?;
    m.add_function(wrap_pyfunction!(synth_scene, m)?)?;
    m.add_function(wrap_pyfunction!(mask_iou, m)?)?;
    Ok(())
}
