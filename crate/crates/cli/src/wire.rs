//! JSON shapes shared by the HTTP service and the CLI. Binary payloads
//! travel as standard base64.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use pmap_cutout::cutout::{CutoutParams, CutoutTrace};
use pmap_cutout::image::Rect;
use pmap_cutout::synth::{OracleNoise, SceneSpec};
use pmap_cutout::Error;
use serde::{Deserialize, Serialize};

pub fn encode_b64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn decode_b64(field: &'static str, text: &str) -> Result<Vec<u8>, Error> {
    STANDARD
        .decode(text.trim())
        .map_err(|e| Error::CorruptData(format!("{field}: invalid base64 ({e})")))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoutMode {
    /// P-map guided GrabCut.
    #[default]
    Pmap,
    /// Rectangle-initialized GrabCut.
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoutRequest {
    /// PNG or binary PPM.
    pub image: String,
    /// 16-bit PGM or raw float map, either image-sized or rect-sized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmap: Option<String>,
    pub rect: Rect,
    #[serde(default)]
    pub mode: CutoutMode,
    /// Overrides on top of the defaults.
    #[serde(default)]
    pub params: CutoutParams,
    /// Demo mode: synthesize the P-map from `gt` with this degradation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleNoise>,
    /// Ground-truth mask (8-bit PGM); enables `iou` in the response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<String>,
    /// Extra masks that leak into a synthesized P-map.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub confusers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub k: usize,
    pub w: f64,
    pub energy: f64,
    pub changed_pixels: usize,
}

pub fn trace_entries(trace: &CutoutTrace) -> Vec<TraceEntry> {
    trace
        .steps
        .iter()
        .map(|s| TraceEntry {
            k: s.k,
            w: s.w,
            energy: s.energy,
            changed_pixels: s.changed_pixels,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoutResponse {
    /// Image-sized 8-bit PGM, 255 = foreground.
    pub mask: String,
    pub width: usize,
    pub height: usize,
    pub mode: CutoutMode,
    pub iou: Option<f64>,
    pub trace: Vec<TraceEntry>,
    pub timing_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleRequest {
    /// Demo scene seed, as for `/synth`.
    pub seed: u64,
    /// Target whose map to synthesize; all targets when absent.
    #[serde(default)]
    pub target: Option<usize>,
    #[serde(default)]
    pub noise: Option<OracleNoise>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmapResponse {
    /// 16-bit PGM.
    pub pmap: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthResponse {
    pub seed: u64,
    pub spec: SceneSpec,
    /// PNG.
    pub image: String,
    /// One 8-bit PGM per target.
    pub gt_masks: Vec<String>,
    pub gt_rects: Vec<Rect>,
    /// Oracle map over all targets with the default degradation.
    pub pmap: String,
    pub noise: OracleNoise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}
