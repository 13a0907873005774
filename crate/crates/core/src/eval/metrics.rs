use crate::error::{Error, Result};
use crate::image::{rect_iou, CutoutMask, Rect};

/// Foreground intersection over union. Two empty masks agree vacuously and
/// score 1.
pub fn mask_iou(pred: &CutoutMask, gt: &CutoutMask) -> Result<f64> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims(gt.dims(), pred.dims()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// One classifier decision: `(predicted, actual)`, `true` = positive.
pub type Prediction = (bool, bool);

/// Mean of the recalls on actual positives and actual negatives.
pub fn balanced_recall(predictions: &[Prediction]) -> Result<f64> {
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for &(predicted, actual) in predictions {
        if actual {
            pos += 1;
            tp += predicted as usize;
        } else {
            neg += 1;
            tn += !predicted as usize;
        }
    }
    if pos == 0 {
        return Err(Error::MissingClass("positive"));
    }
    if neg == 0 {
        return Err(Error::MissingClass("negative"));
    }
    Ok((tp as f64 / pos as f64 + tn as f64 / neg as f64) / 2.0)
}

/// Proposals for one image, best first, with that image's ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedImage {
    pub ranked: Vec<Rect>,
    pub gt: Vec<Rect>,
}

/// Fraction of images where one of the `k` best proposals overlaps some
/// ground-truth box with IoU at least `iou_thresh`. Zero for no images.
pub fn topk_accuracy(per_image: &[RankedImage], k: usize, iou_thresh: f64) -> f64 {
    if per_image.is_empty() {
        return 0.0;
    }
    let hits = per_image
        .iter()
        .filter(|img| {
            img.ranked
                .iter()
                .take(k)
                .any(|r| img.gt.iter().any(|g| rect_iou(r, g) >= iou_thresh))
        })
        .count();
    hits as f64 / per_image.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(w: usize, h: usize, f: impl Fn(usize, usize) -> bool) -> CutoutMask {
        let labels = (0..w * h).map(|i| f(i % w, i / w)).collect();
        CutoutMask::new(w, h, labels).unwrap()
    }

    #[test]
    fn iou_examples() {
        let gt = mask(10, 8, |x, y| (2..8).contains(&x) && (1..7).contains(&y));
        assert_eq!(mask_iou(&gt, &gt).unwrap(), 1.0);
        let disjoint = mask(10, 8, |x, _| x == 9);
        assert_eq!(mask_iou(&disjoint, &gt).unwrap(), 0.0);
        let left = mask(10, 8, |x, y| (2..5).contains(&x) && (1..7).contains(&y));
        assert_eq!(mask_iou(&left, &gt).unwrap(), 0.5);
        let empty = CutoutMask::empty(10, 8).unwrap();
        assert_eq!(mask_iou(&empty, &empty).unwrap(), 1.0);
        let small = CutoutMask::empty(3, 3).unwrap();
        assert_eq!(
            mask_iou(&small, &gt).unwrap_err().code(),
            "DimensionMismatch"
        );
    }

    #[test]
    fn recall_examples() {
        let perfect = [(true, true), (false, false), (false, false)];
        assert_eq!(balanced_recall(&perfect).unwrap(), 1.0);
        let always_pos = [(true, true), (true, true), (true, false), (true, false)];
        assert_eq!(balanced_recall(&always_pos).unwrap(), 0.5);
        assert_eq!(
            balanced_recall(&[(true, true)]).unwrap_err().code(),
            "MissingClass"
        );
    }

    #[test]
    fn topk_examples() {
        let gt = Rect::new(10, 10, 20, 20);
        let images = vec![
            RankedImage {
                ranked: vec![gt, Rect::new(0, 0, 5, 5)],
                gt: vec![gt],
            },
            RankedImage {
                ranked: vec![Rect::new(50, 50, 5, 5), gt],
                gt: vec![gt],
            },
        ];
        assert_eq!(topk_accuracy(&images, 1, 0.5), 0.5);
        assert_eq!(topk_accuracy(&images, 2, 0.5), 1.0);
        assert_eq!(
            topk_accuracy(&images, 50, 0.5),
            topk_accuracy(&images, 2, 0.5)
        );
    }

    fn rect_strategy() -> impl Strategy<Value = Rect> {
        (0usize..30, 0usize..30, 1usize..20, 1usize..20)
            .prop_map(|(x, y, w, h)| Rect::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric(a in proptest::collection::vec(any::<bool>(), 36),
                         b in proptest::collection::vec(any::<bool>(), 36)) {
            let a = CutoutMask::new(6, 6, a).unwrap();
            let b = CutoutMask::new(6, 6, b).unwrap();
            let ab = mask_iou(&a, &b).unwrap();
            prop_assert_eq!(ab, mask_iou(&b, &a).unwrap());
            if a.count_fg() > 0 && b.count_fg() > 0 {
                prop_assert_eq!(ab == 1.0, a == b);
            }
        }

        #[test]
        fn topk_monotone(ranked in proptest::collection::vec(rect_strategy(), 1..8),
                         gt in proptest::collection::vec(rect_strategy(), 1..3),
                         t1 in 0.05f64..1.0, t2 in 0.05f64..1.0) {
            let images = vec![RankedImage { ranked, gt }];
            for k in 1..8 {
                prop_assert!(topk_accuracy(&images, k, 0.5) <= topk_accuracy(&images, k + 1, 0.5));
            }
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(topk_accuracy(&images, 3, hi) <= topk_accuracy(&images, 3, lo));
        }

        #[test]
        fn recall_invariant_under_class_duplication(
            preds in proptest::collection::vec(any::<bool>(), 2..20), times in 1usize..4) {
            // alternate actual labels so both classes are present
            let base: Vec<Prediction> = preds.iter().enumerate().map(|(i, &p)| (p, i % 2 == 0)).collect();
            let mut dup = base.clone();
            for _ in 0..times {
                dup.extend(base.iter().filter(|(_, actual)| *actual));
            }
            let a = balanced_recall(&base).unwrap();
            let b = balanced_recall(&dup).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
