//! Proposal generation and ingestion, RGB-P features (HoG + PCA), linear
//! SVM scoring and aggregated P-maps.

pub mod aggregate;
pub mod features;
pub mod hog;
pub mod model;
pub mod pca;
pub mod proposals;
pub mod svm;

pub use aggregate::{aggregate_pmap, AggregatedPMap, PmapEntry};
pub use features::{
    build_rgbp_features, pmap_hog, rgb_features, FeatureMode, HogColorDescriptor, RgbDescriptor,
};
pub use hog::{hog, HogConfig};
pub use model::ProposalScorer;
pub use pca::{pca_fit, pca_project, PcaModel};
pub use proposals::{
    format_proposals, gen_proposals, label_samples, load_proposals, nms, parse_proposals,
    Detection, DEFAULT_LABEL_THRESH,
};
pub use svm::{svm_score, svm_train, LinearSvm, SvmParams};
