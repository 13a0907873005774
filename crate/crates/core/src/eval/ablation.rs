//! Proposal-scoring ablation: the same linear scorer trained on appearance
//! features alone and on appearance plus P-map features, compared by
//! balanced recall on held-out scenes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    gen_proposals, label_samples, pca_fit, pmap_hog, rgb_features, svm_score, svm_train, HogConfig,
    LinearSvm, PcaModel, ProposalScorer, SvmParams, DEFAULT_LABEL_THRESH,
};
use crate::error::{Error, Result};
use crate::eval::metrics::balanced_recall;
use crate::image::{crop, ProbMap, Rect};
use crate::rng::XorShift64;
use crate::synth::{gen_scene, scene_pmap, BackgroundKind, OracleNoise, SceneSpec, SynthScene};

/// Corpus and training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub n_scenes: usize,
    /// The first `train_scenes` scenes train, the rest test.
    pub train_scenes: usize,
    pub width: usize,
    pub height: usize,
    pub n_targets: usize,
    pub n_distractors: usize,
    pub palette_overlap: f64,
    /// Jittered copies of each target box with edges moved by up to 5%.
    pub tight_per_target: usize,
    /// Jittered copies of each target box with edges moved by 10–35%.
    pub loose_per_target: usize,
    /// Jittered copies (tight and loose alike) of each distractor box.
    pub per_distractor: usize,
    /// Sliding windows sampled per scene.
    pub windows_per_scene: usize,
    pub noise: OracleNoise,
    pub hog: HogConfig,
    pub pca_rank: usize,
    pub svm: SvmParams,
    pub label_thresh: f64,
    pub seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            n_scenes: 20,
            train_scenes: 10,
            width: 320,
            height: 240,
            n_targets: 2,
            n_distractors: 4,
            palette_overlap: 0.5,
            tight_per_target: 20,
            loose_per_target: 16,
            per_distractor: 12,
            windows_per_scene: 20,
            noise: OracleNoise::default(),
            hog: HogConfig::default(),
            pca_rank: 128,
            svm: SvmParams::default(),
            label_thresh: DEFAULT_LABEL_THRESH,
            seed: 2024,
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_scenes < 2 || self.train_scenes == 0 || self.train_scenes >= self.n_scenes {
            return Err(Error::InvalidParam(format!(
                "need 0 < train_scenes ({}) < n_scenes ({})",
                self.train_scenes, self.n_scenes
            )));
        }
        if !(self.label_thresh > 0.0 && self.label_thresh < 1.0) {
            return Err(Error::InvalidParam(format!(
                "label_thresh {} outside (0,1)",
                self.label_thresh
            )));
        }
        self.hog.validate()?;
        self.noise.validate()
    }

    fn scene_spec(&self, index: usize) -> SceneSpec {
        SceneSpec {
            width: self.width,
            height: self.height,
            n_targets: self.n_targets,
            n_distractors: self.n_distractors,
            palette_overlap: self.palette_overlap,
            background: BackgroundKind::Flat,
            seed: XorShift64::derive(self.seed, index as u64).next_u64(),
        }
    }
}

/// One scene of the corpus with its proposals and their labels.
#[derive(Debug, Clone)]
pub struct CorpusScene {
    pub scene: SynthScene,
    pub pmap: ProbMap,
    pub proposals: Vec<Rect>,
    pub labels: Vec<bool>,
}

/// Moves each edge of `r` by a random fraction in `[lo, hi]` of the box
/// size, in a random direction, keeping the box inside the image.
fn jitter_rect(
    rng: &mut XorShift64,
    r: &Rect,
    lo: f64,
    hi: f64,
    width: usize,
    height: usize,
) -> Rect {
    let mut edge = |pos: usize, size: usize| {
        let amount = rng.uniform(lo, hi) * size as f64;
        let sign = if rng.chance(0.5) { 1.0 } else { -1.0 };
        pos as f64 + sign * amount
    };
    let x0 = edge(r.x, r.w);
    let x1 = edge(r.right(), r.w);
    let y0 = edge(r.y, r.h);
    let y1 = edge(r.bottom(), r.h);
    let clamp = |v: f64, max: usize| v.round().clamp(0.0, max as f64) as usize;
    let (x0, x1) = (clamp(x0.min(x1), width), clamp(x0.max(x1), width));
    let (y0, y1) = (clamp(y0.min(y1), height), clamp(y0.max(y1), height));
    let x0 = x0.min(width - 2);
    let y0 = y0.min(height - 2);
    Rect::new(x0, y0, (x1 - x0).max(2), (y1 - y0).max(2))
}

fn corpus_scene(cfg: &AblationConfig, index: usize) -> Result<CorpusScene> {
    let spec = cfg.scene_spec(index);
    let scene = gen_scene(&spec)?;
    let noise = OracleNoise {
        seed: XorShift64::derive(cfg.noise.seed ^ spec.seed, 0).next_u64(),
        ..cfg.noise
    };
    let pmap = scene_pmap(&scene, &noise)?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = XorShift64::derive(spec.seed, 7);
    let mut proposals = Vec::new();
    for gt in &scene.gt_rects {
        for _ in 0..cfg.tight_per_target {
            proposals.push(jitter_rect(&mut rng, gt, 0.0, 0.05, w, h));
        }
        for _ in 0..cfg.loose_per_target {
            proposals.push(jitter_rect(&mut rng, gt, 0.10, 0.35, w, h));
        }
    }
    for mask in &scene.distractor_masks {
        let r = mask.bounding_rect().expect("distractors are non-empty");
        for i in 0..cfg.per_distractor {
            let (lo, hi) = if i % 2 == 0 {
                (0.0, 0.05)
            } else {
                (0.10, 0.35)
            };
            proposals.push(jitter_rect(&mut rng, &r, lo, hi, w, h));
        }
    }
    let side = w.min(h);
    let windows = gen_proposals(
        &scene.image,
        &[side / 6, side / 4, side / 3],
        0.5,
        &[0.75, 1.0],
    )?;
    for _ in 0..cfg.windows_per_scene.min(windows.len()) {
        proposals.push(windows[rng.range(0, windows.len() - 1)]);
    }
    let labels = label_samples(&proposals, &scene.gt_rects, cfg.label_thresh);
    Ok(CorpusScene {
        scene,
        pmap,
        proposals,
        labels,
    })
}

/// Generates every corpus scene (in parallel, deterministic order).
pub fn build_corpus(cfg: &AblationConfig) -> Result<Vec<CorpusScene>> {
    cfg.validate()?;
    (0..cfg.n_scenes)
        .into_par_iter()
        .map(|i| corpus_scene(cfg, i))
        .collect()
}

/// Per-proposal appearance features and P-map HoGs of one scene.
struct SceneFeatures {
    rgb: Vec<Vec<f64>>,
    phog: Vec<Vec<f64>>,
}

fn scene_features(c: &CorpusScene, hog: &HogConfig) -> Result<SceneFeatures> {
    let pairs = c
        .proposals
        .par_iter()
        .map(|r| {
            let rgb = rgb_features(&crop(&c.scene.image, r)?, hog)?;
            let phog = pmap_hog(&c.pmap.crop(r)?, hog)?;
            Ok((rgb, phog))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rgb, phog) = pairs.into_iter().unzip();
    Ok(SceneFeatures { rgb, phog })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub n_proposals: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub train_positives: usize,
    pub test_positives: usize,
    pub recall_rgb: f64,
    pub recall_rgbp: f64,
}

/// Trained scorers for both feature modes plus their held-out scores.
#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub report: AblationReport,
    pub rgb: ProposalScorer,
    pub rgbp: ProposalScorer,
}

fn test_recall(svm: &LinearSvm, feats: &[Vec<f64>], labels: &[bool]) -> Result<f64> {
    let preds = feats
        .iter()
        .zip(labels)
        .map(|(f, &y)| Ok((svm_score(svm, f)? > 0.0, y)))
        .collect::<Result<Vec<_>>>()?;
    balanced_recall(&preds)
}

/// Builds the corpus, trains both scorers on the training scenes and
/// measures balanced recall (score > 0 is positive) on the test scenes.
pub fn run_ablation(cfg: &AblationConfig) -> Result<AblationOutcome> {
    let corpus = build_corpus(cfg)?;
    let feats = corpus
        .iter()
        .map(|c| scene_features(c, &cfg.hog))
        .collect::<Result<Vec<_>>>()?;
    let split = |range: std::ops::Range<usize>| {
        let mut rgb = Vec::new();
        let mut phog = Vec::new();
        let mut labels = Vec::new();
        for i in range {
            rgb.extend(feats[i].rgb.iter().cloned());
            phog.extend(feats[i].phog.iter().cloned());
            labels.extend(corpus[i].labels.iter().copied());
        }
        (rgb, phog, labels)
    };
    let (train_rgb, train_phog, train_y) = split(0..cfg.train_scenes);
    let (test_rgb, test_phog, test_y) = split(cfg.train_scenes..cfg.n_scenes);

    let pca: PcaModel = pca_fit(&train_phog, cfg.pca_rank)?;
    let with_p = |rgb: &[Vec<f64>], phog: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        rgb.par_iter()
            .zip(phog)
            .map(|(a, p)| {
                let mut f = a.clone();
                f.extend(pca.project(p)?);
                Ok(f)
            })
            .collect()
    };
    let train_rgbp = with_p(&train_rgb, &train_phog)?;
    let test_rgbp = with_p(&test_rgb, &test_phog)?;

    let (svm_rgb, svm_rgbp) = rayon::join(
        || svm_train(&train_rgb, &train_y, &cfg.svm),
        || svm_train(&train_rgbp, &train_y, &cfg.svm),
    );
    let (svm_rgb, svm_rgbp) = (svm_rgb?, svm_rgbp?);
    let report = AblationReport {
        n_proposals: train_y.len() + test_y.len(),
        n_train: train_y.len(),
        n_test: test_y.len(),
        train_positives: train_y.iter().filter(|&&y| y).count(),
        test_positives: test_y.iter().filter(|&&y| y).count(),
        recall_rgb: test_recall(&svm_rgb, &test_rgb, &test_y)?,
        recall_rgbp: test_recall(&svm_rgbp, &test_rgbp, &test_y)?,
    };
    Ok(AblationOutcome {
        report,
        rgb: ProposalScorer {
            hog: cfg.hog,
            pca: None,
            svm: svm_rgb,
        },
        rgbp: ProposalScorer {
            hog: cfg.hog,
            pca: Some(pca),
            svm: svm_rgbp,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_stays_inside() {
        let mut rng = XorShift64::new(3);
        for _ in 0..500 {
            let r = jitter_rect(&mut rng, &Rect::new(0, 0, 30, 40), 0.1, 0.35, 40, 50);
            assert!(r.is_valid() && r.right() <= 40 && r.bottom() <= 50);
        }
    }

    #[test]
    fn tight_jitter_is_mostly_positive() {
        let mut rng = XorShift64::new(5);
        let gt = Rect::new(50, 50, 40, 60);
        let tight: Vec<Rect> = (0..200)
            .map(|_| jitter_rect(&mut rng, &gt, 0.0, 0.05, 320, 240))
            .collect();
        let pos = label_samples(&tight, &[gt], 0.8)
            .iter()
            .filter(|&&p| p)
            .count();
        assert!(pos > 150, "{pos}");
        let loose: Vec<Rect> = (0..200)
            .map(|_| jitter_rect(&mut rng, &gt, 0.10, 0.35, 320, 240))
            .collect();
        let pos = label_samples(&loose, &[gt], 0.8)
            .iter()
            .filter(|&&p| p)
            .count();
        assert!(pos < 20, "{pos}");
    }

    #[test]
    fn corpus_is_deterministic_and_labelled() {
        let cfg = AblationConfig {
            n_scenes: 3,
            train_scenes: 1,
            ..AblationConfig::default()
        };
        let a = build_corpus(&cfg).unwrap();
        let b = build_corpus(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.proposals, y.proposals);
            assert_eq!(x.labels, y.labels);
            assert_eq!(
                x.labels,
                label_samples(&x.proposals, &x.scene.gt_rects, 0.8)
            );
        }
        assert!(a
            .iter()
            .all(|c| c.labels.iter().any(|&l| l) && c.labels.iter().any(|&l| !l)));
    }

    #[test]
    fn config_validation() {
        let cfg = AblationConfig {
            train_scenes: 20,
            ..AblationConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().code(), "InvalidParam");
    }
}
