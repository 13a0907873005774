"""Smoke test for the pmap_cutout_py extension module.

Build and install first, either with maturin:

    pip install maturin
    pip install ./crates/python

or with cargo, copying the library next to this script:

    cargo build --release -p pmap-cutout-py --features extension-module
    cp target/release/libpmap_cutout_py.so python/pmap_cutout_py.so
"""

import sys

import pmap_cutout_py as pc


def expand(rect, width, height):
    x, y, w, h = rect
    m = max(4, round(0.15 * max(w, h)))
    x0, y0 = max(0, x - m), max(0, y - m)
    return x0, y0, min(width, x + w + m) - x0, min(height, y + h + m) - y0


def main():
    scene = pc.synth_scene(7)
    width, height = scene["width"], scene["height"]
    assert len(scene["image"]) == width * height * 3
    assert len(scene["pmap"]) == width * height
    rect = expand(scene["gt_rects"][0], width, height)
    gt = scene["gt_masks"][0]

    out = pc.pmap_grabcut(scene["image"], width, height, scene["pmap"], rect)
    iou = pc.mask_iou(out["mask"], gt, width, height)
    weights = [step["w"] for step in out["trace"]]
    assert weights == [25.0 / k for k in range(1, len(weights) + 1)], weights
    assert iou >= 0.9, iou

    plain = pc.plain_grabcut(scene["image"], width, height, rect, max_iters=3)
    plain_iou = pc.mask_iou(plain["mask"], gt, width, height)

    try:
        pc.pmap_grabcut(scene["image"], width, height, scene["pmap"], (300, 200, 50, 50))
    except ValueError as e:
        assert str(e).startswith("OutOfBounds"), e
    else:
        raise AssertionError("out-of-bounds rect accepted")

    print(f"pmap_cutout_py {pc.__version__}: pmap IoU {iou:.4f}, plain IoU {plain_iou:.4f}, {len(weights)} iterations")
    return 0


if __name__ == "__main__":
    sys.exit(main())
