//! Probability-map guided object cutout.
//!
//! Per-pixel instance probability maps (P-maps) drive an iterative
//! graph-cut segmentation with color mixture models, and the same maps
//! feed a HoG + linear SVM scorer that ranks rectangular object proposals.
//! A synthetic clutter generator and benchmark harness exercise both.

pub mod cutout;
pub mod detect;
pub mod error;
pub mod eval;
pub mod gmm;
pub mod image;
pub mod io;
pub mod maxflow;
pub mod mincut;
pub mod rng;
pub mod synth;

pub use cutout::{
    initial_mask, plain_grabcut, pmap_grabcut, pmap_grabcut_in_rect, pmap_likelihoods,
    CutoutParams, CutoutTrace, TraceStep,
};
pub use error::{Error, Result};
pub use gmm::ColorGmm;
pub use image::{crop, rect_iou, CutoutMask, ProbMap, Rect, RectProposal, RgbImage};
pub use mincut::{build_grid_energy, min_cut, CutResult, GridEnergy};
pub use synth::{gen_scene, oracle_pmap, BackgroundKind, OracleNoise, SceneSpec, SynthScene};
