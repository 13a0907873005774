use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{rect_iou, Rect, RgbImage};

/// Multi-scale sliding windows. A window of scale `s` and aspect ratio `a`
/// (width / height) measures `round(s·√a) × round(s/√a)` and moves by
/// `max(1, round(stride_frac·s))` pixels. Windows are ordered by scale,
/// then aspect ratio, then row-major position; shapes that do not fit the
/// image are skipped.
pub fn gen_proposals(
    image: &RgbImage,
    scales: &[usize],
    stride_frac: f64,
    aspect_ratios: &[f64],
) -> Result<Vec<Rect>> {
    if !(stride_frac > 0.0 && stride_frac.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "stride_frac must be positive, got {stride_frac}"
        )));
    }
    if let Some(a) = aspect_ratios.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidParam(format!(
            "aspect ratio must be positive, got {a}"
        )));
    }
    let (width, height) = image.dims();
    let limit = width.min(height);
    let mut out = Vec::new();
    for &scale in scales {
        if scale == 0 {
            return Err(Error::InvalidParam(
                "window scale must be at least 1".into(),
            ));
        }
        if scale > limit {
            return Err(Error::ScaleTooLarge { scale, limit });
        }
        let stride = ((stride_frac * scale as f64).round() as usize).max(1);
        for &ratio in aspect_ratios {
            let w = ((scale as f64 * ratio.sqrt()).round() as usize).max(1);
            let h = ((scale as f64 / ratio.sqrt()).round() as usize).max(1);
            if w > width || h > height {
                continue;
            }
            for y in (0..=height - h).step_by(stride) {
                for x in (0..=width - w).step_by(stride) {
                    out.push(Rect::new(x, y, w, h));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProposalLine {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    #[serde(default)]
    confidence: Option<f64>,
}

/// Parses JSON-lines proposals `{"x":..,"y":..,"w":..,"h":..[,"confidence":..]}`.
/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_proposals(text: &str) -> Result<Vec<Rect>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |detail: String| Error::Parse {
            line: i + 1,
            detail,
        };
        let p: ProposalLine = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if p.w == 0 || p.h == 0 {
            return Err(parse_err(format!("empty rectangle {}x{}", p.w, p.h)));
        }
        let mut r = Rect::new(p.x, p.y, p.w, p.h);
        if let Some(c) = p.confidence {
            if !c.is_finite() {
                return Err(parse_err("confidence must be finite".into()));
            }
            r = r.with_confidence(c);
        }
        out.push(r);
    }
    Ok(out)
}

pub fn load_proposals(path: impl AsRef<Path>) -> Result<Vec<Rect>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_proposals(&text)
}

/// One JSON object per line, the inverse of [`parse_proposals`].
pub fn format_proposals(rects: &[Rect]) -> String {
    let mut out = String::new();
    for r in rects {
        out.push_str(&serde_json::to_string(r).expect("rects serialize"));
        out.push('\n');
    }
    out
}

/// `true` for proposals whose best IoU against any ground-truth rect is
/// strictly above `thresh`.
pub fn label_samples(proposals: &[Rect], gt_rects: &[Rect], thresh: f64) -> Vec<bool> {
    proposals
        .iter()
        .map(|p| gt_rects.iter().any(|g| rect_iou(p, g) > thresh))
        .collect()
}

pub const DEFAULT_LABEL_THRESH: f64 = 0.8;

/// A scored proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub rect: Rect,
    pub score: f64,
}

/// Sorts by descending score; ties keep their input order.
pub fn sort_detections(dets: &mut [Detection]) {
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
}

/// Greedy non-maximum suppression for display: walks detections best first
/// and drops any whose IoU with an already kept one exceeds `iou_thresh`.
pub fn nms(dets: &[Detection], iou_thresh: f64) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sort_detections(&mut sorted);
    let mut kept: Vec<Detection> = Vec::new();
    for d in sorted {
        if kept
            .iter()
            .all(|k| rect_iou(&k.rect, &d.rect) <= iou_thresh)
        {
            kept.push(d);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(w: usize, h: usize) -> RgbImage {
        RgbImage::filled(w, h, [0, 0, 0]).unwrap()
    }

    #[test]
    fn single_window_covers_image() {
        let p = gen_proposals(&image(64, 64), &[64], 1.0, &[1.0]).unwrap();
        assert_eq!(p, vec![Rect::new(0, 0, 64, 64)]);
    }

    #[test]
    fn half_stride_positions() {
        let p = gen_proposals(&image(128, 64), &[64], 0.5, &[1.0]).unwrap();
        let xs: Vec<usize> = p.iter().map(|r| r.x).collect();
        assert_eq!(xs, vec![0, 32, 64]);
        assert!(p.iter().all(|r| r.y == 0 && r.w == 64 && r.h == 64));
    }

    #[test]
    fn ordering_is_scale_then_row_major() {
        let p = gen_proposals(&image(40, 30), &[20, 10], 1.0, &[1.0]).unwrap();
        assert_eq!(p[0], Rect::new(0, 0, 20, 20));
        assert_eq!(p[1], Rect::new(20, 0, 20, 20));
        assert_eq!(p[2].w, 10);
        assert_eq!((p[2].x, p[2].y), (0, 0));
        assert_eq!((p[3].x, p[3].y), (10, 0));
        assert_eq!(p.len(), 2 + 4 * 3);
    }

    #[test]
    fn aspect_ratio_shapes() {
        let p = gen_proposals(&image(100, 100), &[20], 5.0, &[4.0]).unwrap();
        assert!(p.iter().all(|r| r.w == 40 && r.h == 10));
    }

    #[test]
    fn scale_too_large() {
        let e = gen_proposals(&image(64, 64), &[256], 0.5, &[1.0]).unwrap_err();
        assert_eq!(e.code(), "ScaleTooLarge");
        let e = gen_proposals(&image(64, 64), &[32], 0.0, &[1.0]).unwrap_err();
        assert_eq!(e.code(), "InvalidParam");
    }

    #[test]
    fn parse_lines() {
        let p = parse_proposals("{\"x\":0,\"y\":0,\"w\":10,\"h\":10}\n").unwrap();
        assert_eq!(p, vec![Rect::new(0, 0, 10, 10)]);
        assert!(parse_proposals("").unwrap().is_empty());
        let with_conf =
            parse_proposals("\n{\"x\":1,\"y\":2,\"w\":3,\"h\":4,\"confidence\":0.5}").unwrap();
        assert_eq!(with_conf[0].confidence, Some(0.5));
        let e = parse_proposals(
            "{\"x\":0,\"y\":0,\"w\":10,\"h\":10}\n{\"x\":0,\"y\":0,\"w\":0,\"h\":10}",
        )
        .unwrap_err();
        assert_eq!(e.code(), "ParseError");
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert_eq!(
            parse_proposals("{\"x\":-1,\"y\":0,\"w\":1,\"h\":1}")
                .unwrap_err()
                .code(),
            "ParseError"
        );
        assert_eq!(
            parse_proposals("not json").unwrap_err().code(),
            "ParseError"
        );
    }

    #[test]
    fn format_round_trips() {
        let rects = vec![
            Rect::new(1, 2, 3, 4),
            Rect::new(5, 6, 7, 8).with_confidence(0.25),
        ];
        assert_eq!(parse_proposals(&format_proposals(&rects)).unwrap(), rects);
    }

    #[test]
    fn labels_follow_iou_rule() {
        let gt = Rect::new(0, 0, 10, 10);
        let half = Rect::new(0, 0, 10, 5);
        assert_eq!(rect_iou(&half, &gt), 0.5);
        assert_eq!(
            label_samples(&[gt, half], &[gt], DEFAULT_LABEL_THRESH),
            vec![true, false]
        );
        assert_eq!(
            label_samples(&[gt, half], &[], DEFAULT_LABEL_THRESH),
            vec![false, false]
        );
    }

    #[test]
    fn nms_keeps_best_of_overlapping() {
        let a = Detection {
            rect: Rect::new(0, 0, 10, 10),
            score: 0.9,
        };
        let b = Detection {
            rect: Rect::new(1, 0, 10, 10),
            score: 0.95,
        };
        let c = Detection {
            rect: Rect::new(50, 50, 10, 10),
            score: 0.1,
        };
        assert_eq!(nms(&[a, b, c], 0.5), vec![b, c]);
    }
}
