use pmap_cutout_py::pmap_cutout_py;
use pyo3::prelude::*;

#[test]
fn module_runs_from_python() {
    pyo3::append_to_inittab!(pmap_cutout_py);
    Python::attach(|py| {
        let code = c"
import pmap_cutout_py as pc
s = pc.synth_scene(3, 160, 120)
w, h = s['width'], s['height']
x, y, rw, rh = s['gt_rects'][0]
rect = (max(0, x - 4), max(0, y - 4), min(w, x + rw + 4) - max(0, x - 4), min(h, y + rh + 4) - max(0, y - 4))
out = pc.pmap_grabcut(s['image'], w, h, s['pmap'], rect, max_iters=3)
iou = pc.mask_iou(out['mask'], s['gt_masks'][0], w, h)
assert out['trace'][0]['w'] == 25.0
try:
    pc.mask_iou(b'\\x00', b'\\x00\\x01', 1, 1)
    raise AssertionError('size mismatch accepted')
except ValueError:
    pass
";
        let globals = pyo3::types::PyDict::new(py);
        py.run(code, Some(&globals), None).unwrap();
        let iou: f64 = globals.get_item("iou").unwrap().unwrap().extract().unwrap();
        assert!(iou > 0.5, "iou {iou}");
    });
}
