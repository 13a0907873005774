use pmap_cutout::detect::{format_proposals, label_samples, parse_proposals, ProposalScorer};
use pmap_cutout::eval::{
    clutter_grid, mask_iou, run_ablation, run_benchmark, AblationConfig, BenchReport, Method,
};
use pmap_cutout::io::{load_image, load_mask, load_pmap, save_image, save_mask, save_pmap};
use pmap_cutout::synth::{gen_scene, oracle_pmap, scene_pmap, OracleNoise, SceneSpec};
use pmap_cutout::{crop, plain_grabcut, pmap_grabcut, pmap_grabcut_in_rect, CutoutParams, Error};

fn small_spec(seed: u64) -> SceneSpec {
    SceneSpec {
        width: 160,
        height: 120,
        ..SceneSpec::clutter(seed)
    }
}

#[test]
fn scene_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_scene(&small_spec(4)).unwrap();
    let pmap = oracle_pmap(
        &scene.gt_masks[0],
        &scene.confusers(0),
        &OracleNoise::default(),
    )
    .unwrap();
    save_image(&scene.image, dir.path().join("s.png")).unwrap();
    save_image(&scene.image, dir.path().join("s.ppm")).unwrap();
    save_mask(&scene.gt_masks[0], dir.path().join("m.pgm")).unwrap();
    save_pmap(&pmap, dir.path().join("p.pgm")).unwrap();
    assert_eq!(load_image(dir.path().join("s.png")).unwrap(), scene.image);
    assert_eq!(load_image(dir.path().join("s.ppm")).unwrap(), scene.image);
    assert_eq!(
        load_mask(dir.path().join("m.pgm")).unwrap(),
        scene.gt_masks[0]
    );
    let back = load_pmap(dir.path().join("p.pgm")).unwrap();
    for (a, b) in back.values().iter().zip(pmap.values()) {
        assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
    }
}

#[test]
fn scenes_are_deterministic() {
    let a = gen_scene(&small_spec(9)).unwrap();
    let b = gen_scene(&small_spec(9)).unwrap();
    let c = gen_scene(&small_spec(10)).unwrap();
    assert_eq!(a.image, b.image);
    assert_eq!(a.gt_masks, b.gt_masks);
    assert_ne!(a.image, c.image);
}

#[test]
fn cropped_and_full_cutouts_agree_on_rect_pixels() {
    let scene = gen_scene(&SceneSpec::clutter(1003)).unwrap();
    let pmap = oracle_pmap(
        &scene.gt_masks[0],
        &scene.confusers(0),
        &OracleNoise::default(),
    )
    .unwrap();
    let rect = scene.gt_rects[0].expand(10, 320, 240);
    let params = CutoutParams::default();
    let (from_full, trace_full) =
        pmap_grabcut_in_rect(&scene.image, &pmap, &rect, &params).unwrap();
    let (from_local, trace_local) =
        pmap_grabcut_in_rect(&scene.image, &pmap.crop(&rect).unwrap(), &rect, &params).unwrap();
    assert_eq!(from_full, from_local);
    assert_eq!(trace_full, trace_local);
    let (direct, _) = pmap_grabcut(
        &crop(&scene.image, &rect).unwrap(),
        &pmap.crop(&rect).unwrap(),
        &params,
    )
    .unwrap();
    assert_eq!(from_full.crop(&rect).unwrap(), direct);
    assert!(mask_iou(&from_full, &scene.gt_masks[0]).unwrap() > 0.9);
    assert_eq!(from_full.count_fg(), direct.count_fg());
}

#[test]
fn pmap_beats_plain_on_a_cluttered_scene() {
    let scene = gen_scene(&SceneSpec::clutter(1001)).unwrap();
    let pmap = scene_pmap(&scene, &OracleNoise::default()).unwrap();
    let rect = scene.gt_rects[0].expand(12, 320, 240);
    let params = CutoutParams::default();
    let (guided, _) = pmap_grabcut_in_rect(&scene.image, &pmap, &rect, &params).unwrap();
    let plain = plain_grabcut(&scene.image, &rect, &params).unwrap();
    let gt = &scene.gt_masks[0];
    assert!(mask_iou(&guided, gt).unwrap() >= mask_iou(&plain, gt).unwrap());
}

#[test]
fn mismatched_pmap_is_rejected() {
    let scene = gen_scene(&small_spec(2)).unwrap();
    let pmap = pmap_cutout::ProbMap::zeros(10, 10).unwrap();
    let rect = pmap_cutout::Rect::new(0, 0, 20, 20);
    let err =
        pmap_grabcut_in_rect(&scene.image, &pmap, &rect, &CutoutParams::default()).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { .. }), "{err:?}");
}

#[test]
fn benchmark_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let specs = clutter_grid(3, 1000);
    let report = run_benchmark(
        &specs,
        &OracleNoise::default(),
        &CutoutParams::default(),
        &Method::ALL,
    )
    .unwrap();
    assert_eq!(report.records.len(), 6);
    assert!(report.all_completed());
    report.write_json(dir.path().join("r.json")).unwrap();
    report.write_csv(dir.path().join("r.csv")).unwrap();
    let back: BenchReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(back, report);
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "schema_version,scene_seed,target,method,iou,runtime_ms,iterations,error"
    );
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn trained_scorer_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = AblationConfig {
        n_scenes: 4,
        train_scenes: 2,
        pca_rank: 32,
        ..AblationConfig::default()
    };
    let outcome = run_ablation(&cfg).unwrap();
    let scene = gen_scene(&SceneSpec {
        width: 320,
        height: 240,
        ..SceneSpec::clutter(77)
    })
    .unwrap();
    let pmap = scene_pmap(&scene, &OracleNoise::default()).unwrap();
    let proposals = parse_proposals(&format_proposals(&scene.gt_rects)).unwrap();
    assert!(label_samples(&proposals, &scene.gt_rects, 0.8)
        .iter()
        .all(|&l| l));
    for (name, scorer) in [("rgb.bin", &outcome.rgb), ("rgbp.bin", &outcome.rgbp)] {
        let path = dir.path().join(name);
        scorer.save(&path).unwrap();
        let loaded = ProposalScorer::load(&path).unwrap();
        assert_eq!(loaded.to_bytes(), scorer.to_bytes());
        assert_eq!(
            loaded
                .detect(&scene.image, Some(&pmap), &proposals)
                .unwrap(),
            scorer
                .detect(&scene.image, Some(&pmap), &proposals)
                .unwrap()
        );
    }
    assert!(outcome.rgbp.detect(&scene.image, None, &proposals).is_err());
}

#[test]
fn truncated_model_is_corrupt() {
    let cfg = AblationConfig {
        n_scenes: 2,
        train_scenes: 1,
        pca_rank: 8,
        ..AblationConfig::default()
    };
    let bytes = run_ablation(&cfg).unwrap().rgbp.to_bytes();
    for cut in [0, 8, bytes.len() / 2, bytes.len() - 1] {
        assert!(
            ProposalScorer::from_bytes(&bytes[..cut]).is_err(),
            "cut at {cut}"
        );
    }
}
