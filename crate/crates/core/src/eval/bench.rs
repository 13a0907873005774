//! Benchmark orchestration over synthetic scenes.
//!
//! Every target of every scene is cut out by each requested method inside
//! the target's ground-truth rectangle grown by a margin. The P-map method
//! runs on the crop with an oracle map; the rectangle baseline runs on the
//! full image with that rectangle. Both masks are scored against the full
//! ground-truth mask.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutout::{plain_grabcut_traced, pmap_grabcut, CutoutParams};
use crate::error::{Error, Result};
use crate::eval::metrics::mask_iou;
use crate::image::{crop, CutoutMask, Rect};
use crate::rng::XorShift64;
use crate::synth::{gen_scene, oracle_pmap, OracleNoise, SceneSpec, SynthScene};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PmapGrabcut,
    PlainGrabcut,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::PmapGrabcut, Method::PlainGrabcut];

    pub fn name(&self) -> &'static str {
        match self {
            Method::PmapGrabcut => "pmap_grabcut",
            Method::PlainGrabcut => "plain_grabcut",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pmap_grabcut" => Ok(Method::PmapGrabcut),
            "plain_grabcut" => Ok(Method::PlainGrabcut),
            other => Err(Error::InvalidParam(format!("unknown method {other:?}"))),
        }
    }
}

/// Margin around the ground-truth box: `max(min_margin, frac * max(w, h))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropMargin {
    pub frac: f64,
    pub min_margin: usize,
}

impl Default for CropMargin {
    fn default() -> Self {
        Self {
            frac: 0.15,
            min_margin: 4,
        }
    }
}

impl CropMargin {
    pub fn rect_for(&self, gt: &Rect, width: usize, height: usize) -> Rect {
        let m = ((gt.w.max(gt.h) as f64 * self.frac).round() as usize).max(self.min_margin);
        gt.expand(m, width, height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_seed: u64,
    pub target: usize,
    pub method: Method,
    pub iou: f64,
    pub runtime_ms: f64,
    pub iterations: usize,
    /// Set when the method ended on a degenerate mask; `iou` is then 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub mean_iou: f64,
    /// Targets where this method scored strictly higher than every other.
    pub wins: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub records: Vec<SceneRecord>,
    pub summary: Vec<MethodSummary>,
}

impl BenchReport {
    pub fn from_records(mut records: Vec<SceneRecord>) -> Self {
        records.sort_by(|a, b| {
            (a.scene_seed, a.target, a.method.name()).cmp(&(
                b.scene_seed,
                b.target,
                b.method.name(),
            ))
        });
        let mut methods: Vec<Method> = records.iter().map(|r| r.method).collect();
        methods.sort_by_key(|m| m.name());
        methods.dedup();

        let mut summary: Vec<MethodSummary> = methods
            .iter()
            .map(|&method| {
                let runs: Vec<&SceneRecord> =
                    records.iter().filter(|r| r.method == method).collect();
                MethodSummary {
                    method,
                    runs: runs.len(),
                    mean_iou: runs.iter().map(|r| r.iou).sum::<f64>() / runs.len().max(1) as f64,
                    wins: 0,
                    failures: runs.iter().filter(|r| r.error.is_some()).count(),
                }
            })
            .collect();
        if methods.len() > 1 {
            for group in
                records.chunk_by(|a, b| (a.scene_seed, a.target) == (b.scene_seed, b.target))
            {
                let best = group
                    .iter()
                    .map(|r| r.iou)
                    .fold(f64::NEG_INFINITY, f64::max);
                let top: Vec<&SceneRecord> = group.iter().filter(|r| r.iou == best).collect();
                if let [winner] = top.as_slice() {
                    if let Some(s) = summary.iter_mut().find(|s| s.method == winner.method) {
                        s.wins += 1;
                    }
                }
            }
        }
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            records,
            summary,
        }
    }

    pub fn mean_iou(&self, method: Method) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method)
            .map(|s| s.mean_iou)
    }

    pub fn all_completed(&self) -> bool {
        self.records.iter().all(|r| r.error.is_none())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self).map_err(std::io::Error::other)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(std::io::Error::other)?;
        w.write_record([
            "schema_version",
            "scene_seed",
            "target",
            "method",
            "iou",
            "runtime_ms",
            "iterations",
            "error",
        ])
        .map_err(std::io::Error::other)?;
        for r in &self.records {
            w.write_record([
                REPORT_SCHEMA_VERSION.to_string(),
                r.scene_seed.to_string(),
                r.target.to_string(),
                r.method.name().to_string(),
                format!("{:.6}", r.iou),
                format!("{:.3}", r.runtime_ms),
                r.iterations.to_string(),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(std::io::Error::other)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `n` clutter scenes with consecutive seeds from `first_seed`.
pub fn clutter_grid(n: usize, first_seed: u64) -> Vec<SceneSpec> {
    (0..n as u64)
        .map(|i| SceneSpec::clutter(first_seed + i))
        .collect()
}

/// Oracle noise for one target of one scene; the seed mixes the scene and
/// target so maps differ but stay reproducible.
pub fn target_noise(noise: &OracleNoise, scene_seed: u64, target: usize) -> OracleNoise {
    OracleNoise {
        seed: XorShift64::derive(noise.seed ^ scene_seed, target as u64).next_u64(),
        ..*noise
    }
}

/// Runs `method` on target `target` of `scene`, returning the full-size
/// mask and the number of iterations used.
pub fn run_method(
    scene: &SynthScene,
    scene_seed: u64,
    target: usize,
    method: Method,
    noise: &OracleNoise,
    params: &CutoutParams,
    margin: &CropMargin,
) -> Result<(CutoutMask, usize)> {
    let (w, h) = scene.image.dims();
    let gt = &scene.gt_masks[target];
    let rect = margin.rect_for(&scene.gt_rects[target], w, h);
    match method {
        Method::PmapGrabcut => {
            let pmap = oracle_pmap(
                gt,
                &scene.confusers(target),
                &target_noise(noise, scene_seed, target),
            )?;
            let local_img = crop(&scene.image, &rect)?;
            let local_pmap = pmap.crop(&rect)?;
            let (local, trace) = pmap_grabcut(&local_img, &local_pmap, params)?;
            Ok((CutoutMask::paste(w, h, &rect, &local)?, trace.iterations()))
        }
        Method::PlainGrabcut => {
            let (mask, trace) = plain_grabcut_traced(&scene.image, &rect, params)?;
            Ok((mask, trace.iterations()))
        }
    }
}

pub fn run_benchmark(
    specs: &[SceneSpec],
    noise: &OracleNoise,
    params: &CutoutParams,
    methods: &[Method],
) -> Result<BenchReport> {
    run_benchmark_with(specs, noise, params, methods, &CropMargin::default())
}

pub fn run_benchmark_with(
    specs: &[SceneSpec],
    noise: &OracleNoise,
    params: &CutoutParams,
    methods: &[Method],
    margin: &CropMargin,
) -> Result<BenchReport> {
    if specs.is_empty() {
        return Err(Error::EmptyInput("scene grid"));
    }
    if methods.is_empty() {
        return Err(Error::EmptyInput("method list"));
    }
    params.validate()?;
    noise.validate()?;
    let per_scene: Vec<Result<Vec<SceneRecord>>> = specs
        .par_iter()
        .map(|spec| {
            let scene = gen_scene(spec)?;
            let mut out = Vec::new();
            for target in 0..scene.gt_masks.len() {
                for &method in methods {
                    let start = Instant::now();
                    let result =
                        run_method(&scene, spec.seed, target, method, noise, params, margin);
                    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                    let (iou, iterations, error) = match result {
                        Ok((mask, iters)) => {
                            (mask_iou(&mask, &scene.gt_masks[target])?, iters, None)
                        }
                        Err(e @ (Error::EmptyForeground | Error::EmptyBackground)) => {
                            (0.0, 0, Some(e.code().to_string()))
                        }
                        Err(e) => return Err(e),
                    };
                    out.push(SceneRecord {
                        scene_seed: spec.seed,
                        target,
                        method,
                        iou,
                        runtime_ms,
                        iterations,
                        error,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_scene {
        records.extend(r?);
    }
    Ok(BenchReport::from_records(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::BackgroundKind;

    fn record(seed: u64, method: Method, iou: f64) -> SceneRecord {
        SceneRecord {
            scene_seed: seed,
            target: 0,
            method,
            iou,
            runtime_ms: 1.0,
            iterations: 1,
            error: None,
        }
    }

    #[test]
    fn summary_means_and_wins() {
        let report = BenchReport::from_records(vec![
            record(2, Method::PlainGrabcut, 0.5),
            record(1, Method::PmapGrabcut, 0.9),
            record(1, Method::PlainGrabcut, 0.7),
            record(2, Method::PmapGrabcut, 0.5),
        ]);
        assert_eq!(report.records[0].scene_seed, 1);
        assert_eq!(report.records[0].method, Method::PlainGrabcut);
        let pmap = report
            .summary
            .iter()
            .find(|s| s.method == Method::PmapGrabcut)
            .unwrap();
        assert!((pmap.mean_iou - 0.7).abs() < 1e-12);
        assert_eq!(pmap.wins, 1);
        let plain = report
            .summary
            .iter()
            .find(|s| s.method == Method::PlainGrabcut)
            .unwrap();
        assert_eq!(plain.wins, 0);
    }

    #[test]
    fn empty_grid_rejected() {
        let err = run_benchmark(
            &[],
            &OracleNoise::default(),
            &CutoutParams::default(),
            &Method::ALL,
        )
        .unwrap_err();
        assert_eq!(err.code(), "EmptyInput");
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("grabcut".parse::<Method>().is_err());
    }

    #[test]
    fn report_files() {
        let spec = SceneSpec {
            width: 120,
            height: 100,
            n_targets: 1,
            n_distractors: 0,
            palette_overlap: 0.0,
            background: BackgroundKind::Flat,
            seed: 4,
        };
        let report = run_benchmark(
            &[spec],
            &OracleNoise::default(),
            &CutoutParams::default(),
            &Method::ALL,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        report.write_json(dir.path().join("report.json")).unwrap();
        report.write_csv(dir.path().join("report.csv")).unwrap();
        let back: BenchReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(back, report);
        let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + report.records.len());
    }
}
