//! Metrics and the benchmark harness.

pub mod ablation;
pub mod bench;
pub mod metrics;

pub use ablation::{run_ablation, AblationConfig, AblationReport};
pub use bench::{clutter_grid, run_benchmark, BenchReport, Method, SceneRecord};
pub use metrics::{balanced_recall, mask_iou, topk_accuracy, RankedImage};
