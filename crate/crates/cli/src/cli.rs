//! `pmap-cutout` command line.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 when the command ran
//! but failed. Failures are printed to stderr as one JSON object
//! `{"error": code, "detail": text}`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pmap_cutout::cutout::{plain_grabcut_traced, pmap_grabcut_in_rect, CutoutParams, CutoutTrace};
use pmap_cutout::detect::{
    aggregate_pmap, gen_proposals, load_proposals, nms, Detection, PmapEntry, ProposalScorer,
};
use pmap_cutout::eval::{mask_iou, run_ablation, run_benchmark, AblationConfig, Method};
use pmap_cutout::io::{load_image, load_mask, load_pmap, save_image, save_mask, save_pmap};
use pmap_cutout::synth::{gen_scene, oracle_pmap, BackgroundKind, OracleNoise, SceneSpec};
use pmap_cutout::{Error, Rect};
use serde::Serialize;

use crate::wire::{trace_entries, ErrorBody, TraceEntry};

#[derive(Debug, Parser)]
#[command(name = "pmap-cutout", version, about = "P-map guided object cutout")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic clutter scene with masks and oracle P-maps.
    Synth(SynthArgs),
    /// Cut out an object with P-map guided GrabCut.
    Cutout(CutoutArgs),
    /// Cut out an object with rectangle-initialized GrabCut.
    Grabcut(GrabcutArgs),
    /// Train or apply the proposal scorer.
    Detect {
        #[command(subcommand)]
        command: DetectCommand,
    },
    /// Compare cutout methods over a grid of synthetic scenes.
    Bench(BenchArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Background {
    Flat,
    Gradient,
    Texture,
}

impl From<Background> for BackgroundKind {
    fn from(b: Background) -> Self {
        match b {
            Background::Flat => BackgroundKind::Flat,
            Background::Gradient => BackgroundKind::Gradient,
            Background::Texture => BackgroundKind::Texture,
        }
    }
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    #[arg(long, default_value_t = 320)]
    pub width: usize,
    #[arg(long, default_value_t = 240)]
    pub height: usize,
    #[arg(long, default_value_t = 1)]
    pub targets: usize,
    #[arg(long, default_value_t = 3)]
    pub distractors: usize,
    /// Fraction of distractors painted with the target palette.
    #[arg(long, default_value_t = 1.0)]
    pub overlap: f64,
    #[arg(long, value_enum, default_value_t = Background::Flat)]
    pub background: Background,
}

impl SceneArgs {
    fn spec(&self, seed: u64) -> SceneSpec {
        SceneSpec {
            width: self.width,
            height: self.height,
            n_targets: self.targets,
            n_distractors: self.distractors,
            palette_overlap: self.overlap,
            background: self.background.into(),
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Box-blur radius of the oracle P-map.
    #[arg(long, default_value_t = 2)]
    pub blur: usize,
    #[arg(long, default_value_t = 0.05)]
    pub flip_noise: f64,
    /// Probability floor painted over distractors.
    #[arg(long, default_value_t = 0.15)]
    pub leak: f64,
    #[arg(long)]
    pub noise_seed: Option<u64>,
}

impl NoiseArgs {
    fn noise(&self, default_seed: u64) -> OracleNoise {
        OracleNoise {
            blur_radius: self.blur,
            flip_noise: self.flip_noise,
            leak: self.leak,
            seed: self.noise_seed.unwrap_or(default_seed),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Components per color model.
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ParamArgs {
    fn params(&self) -> CutoutParams {
        let d = CutoutParams::default();
        CutoutParams {
            alpha: self.alpha.unwrap_or(d.alpha),
            b: self.b.unwrap_or(d.b),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            gamma: self.gamma.unwrap_or(d.gamma),
            components: self.components.unwrap_or(d.components),
            seed: self.seed.unwrap_or(d.seed),
            ..d
        }
    }
}

#[derive(Debug, Args)]
pub struct CutoutArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Image-sized or rect-sized map (16-bit PGM or raw float).
    #[arg(long)]
    pub pmap: PathBuf,
    /// `x,y,w,h`.
    #[arg(long, value_parser = parse_rect)]
    pub rect: Rect,
    /// Output mask (8-bit PGM).
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth mask; adds `iou` to the summary.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct GrabcutArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, value_parser = parse_rect)]
    pub rect: Rect,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Features {
    Rgb,
    Rgbp,
}

#[derive(Debug, Subcommand)]
pub enum DetectCommand {
    /// Train a scorer on a synthetic proposal corpus.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Features::Rgbp)]
        features: Features,
        #[arg(long, default_value_t = 20)]
        scenes: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Score proposals on an image.
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Image-sized P-map; required by RGB-P models.
        #[arg(long)]
        pmap: Option<PathBuf>,
        /// JSON-lines proposals; sliding windows when absent.
        #[arg(long)]
        proposals: Option<PathBuf>,
        /// Detections JSON, best first.
        #[arg(long)]
        out: PathBuf,
        /// Suppress detections overlapping a better one above this IoU.
        #[arg(long)]
        nms: Option<f64>,
        #[arg(long)]
        top: Option<usize>,
        /// Also write the confidence-weighted aggregate of the P-map over
        /// the kept detections.
        #[arg(long, requires = "pmap")]
        aggregate: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 50)]
    pub scenes: usize,
    #[arg(long, default_value_t = 1000)]
    pub first_seed: u64,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["pmap_grabcut".to_string(), "plain_grabcut".to_string()])]
    pub methods: Vec<String>,
    /// Receives report.json and report.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
}

pub fn parse_rect(s: &str) -> Result<Rect, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, w, h] = parts.as_slice() else {
        return Err(format!("expected x,y,w,h but got {s:?}"));
    };
    let num = |v: &str| v.parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    let rect = Rect::new(num(x)?, num(y)?, num(w)?, num(h)?);
    if !rect.is_valid() {
        return Err("rectangle width and height must be positive".into());
    }
    Ok(rect)
}

/// Failure of a subcommand that parsed correctly.
#[derive(Debug)]
pub struct RunError {
    pub code: String,
    pub detail: String,
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        Self {
            code: e.code().to_string(),
            detail: e.to_string(),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("PMAP_CUTOUT_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let body = ErrorBody {
                error: e.code,
                detail: e.detail,
            };
            eprintln!(
                "{}",
                serde_json::to_string(&body).expect("error body serializes")
            );
            2
        }
    }
}

fn run(command: Command) -> Result<(), RunError> {
    match command {
        Command::Synth(a) => synth(&a),
        Command::Cutout(a) => cutout(&a),
        Command::Grabcut(a) => grabcut(&a),
        Command::Detect { command } => detect(command),
        Command::Bench(a) => bench(&a),
        Command::Serve(a) => serve(&a),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn print_json(value: &impl Serialize) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

#[derive(Serialize)]
struct TargetFiles {
    rect: Rect,
    mask: String,
    pmap: String,
}

#[derive(Serialize)]
struct Manifest {
    spec: SceneSpec,
    noise: OracleNoise,
    image: String,
    targets: Vec<TargetFiles>,
}

fn synth(a: &SynthArgs) -> Result<(), RunError> {
    let spec = a.scene.spec(a.seed);
    let noise = a.noise.noise(a.seed);
    let scene = gen_scene(&spec)?;
    std::fs::create_dir_all(&a.out_dir)?;
    save_image(&scene.image, a.out_dir.join("scene.png"))?;
    let mut targets = Vec::new();
    for (i, (mask, rect)) in scene.gt_masks.iter().zip(&scene.gt_rects).enumerate() {
        let mask_name = format!("target_{i}_mask.pgm");
        let pmap_name = format!("target_{i}_pmap.pgm");
        save_mask(mask, a.out_dir.join(&mask_name))?;
        let target_noise = OracleNoise {
            seed: noise.seed.wrapping_add(i as u64),
            ..noise
        };
        save_pmap(
            &oracle_pmap(mask, &scene.confusers(i), &target_noise)?,
            a.out_dir.join(&pmap_name),
        )?;
        targets.push(TargetFiles {
            rect: *rect,
            mask: mask_name,
            pmap: pmap_name,
        });
    }
    let manifest = Manifest {
        spec,
        noise,
        image: "scene.png".into(),
        targets,
    };
    write_json(&a.out_dir.join("manifest.json"), &manifest)?;
    print_json(&manifest);
    Ok(())
}

#[derive(Serialize)]
struct CutoutSummary {
    out: PathBuf,
    foreground_pixels: usize,
    iou: Option<f64>,
    trace: Vec<TraceEntry>,
}

fn finish_cutout(
    mask: pmap_cutout::CutoutMask,
    trace: CutoutTrace,
    out: &Path,
    gt: Option<&PathBuf>,
) -> Result<(), RunError> {
    let iou = gt
        .map(|p| load_mask(p).and_then(|g| mask_iou(&mask, &g)))
        .transpose()?;
    save_mask(&mask, out)?;
    print_json(&CutoutSummary {
        out: out.to_path_buf(),
        foreground_pixels: mask.count_fg(),
        iou,
        trace: trace_entries(&trace),
    });
    Ok(())
}

fn cutout(a: &CutoutArgs) -> Result<(), RunError> {
    let image = load_image(&a.image)?;
    let pmap = load_pmap(&a.pmap)?;
    let (mask, trace) = pmap_grabcut_in_rect(&image, &pmap, &a.rect, &a.params.params())?;
    finish_cutout(mask, trace, &a.out, a.gt.as_ref())
}

fn grabcut(a: &GrabcutArgs) -> Result<(), RunError> {
    let image = load_image(&a.image)?;
    let (mask, trace) = plain_grabcut_traced(&image, &a.rect, &a.params.params())?;
    finish_cutout(mask, trace, &a.out, a.gt.as_ref())
}

fn detect(command: DetectCommand) -> Result<(), RunError> {
    match command {
        DetectCommand::Train {
            out,
            features,
            scenes,
            seed,
        } => {
            let cfg = AblationConfig {
                n_scenes: scenes,
                train_scenes: scenes / 2,
                seed,
                ..AblationConfig::default()
            };
            let outcome = run_ablation(&cfg)?;
            let scorer = match features {
                Features::Rgb => outcome.rgb,
                Features::Rgbp => outcome.rgbp,
            };
            scorer.save(&out)?;
            print_json(&outcome.report);
            Ok(())
        }
        DetectCommand::Run {
            model,
            image,
            pmap,
            proposals,
            out,
            nms: nms_iou,
            top,
            aggregate,
        } => {
            let scorer = ProposalScorer::load(&model)?;
            let image = load_image(&image)?;
            let pmap = pmap.map(load_pmap).transpose()?;
            let proposals = match proposals {
                Some(p) => load_proposals(p)?,
                None => {
                    let side = image.width().min(image.height());
                    let scales: Vec<usize> = [6, 4, 3, 2]
                        .iter()
                        .map(|d| side / d)
                        .filter(|&s| s >= 8)
                        .collect();
                    gen_proposals(&image, &scales, 0.25, &[0.75, 1.0])?
                }
            };
            let mut dets = scorer.detect(&image, pmap.as_ref(), &proposals)?;
            if let Some(t) = nms_iou {
                dets = nms(&dets, t);
            }
            if let Some(k) = top {
                dets.truncate(k);
            }
            write_json(&out, &dets)?;
            if let (Some(path), Some(pmap)) = (aggregate, pmap.as_ref()) {
                save_pmap(&aggregate_detections(pmap, &dets)?, path)?;
            }
            print_json(&serde_json::json!({ "detections": dets.len(), "out": out }));
            Ok(())
        }
    }
}

/// Aggregates the image-level map over detections, using positive scores
/// as confidences.
fn aggregate_detections(
    pmap: &pmap_cutout::ProbMap,
    dets: &[Detection],
) -> Result<pmap_cutout::ProbMap, Error> {
    let entries = dets
        .iter()
        .filter(|d| d.score > 0.0)
        .map(|d| {
            Ok(PmapEntry {
                rect: d.rect,
                pmap: pmap.crop(&d.rect)?,
                confidence: d.score,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    aggregate_pmap(pmap.width(), pmap.height(), &entries)
}

fn bench(a: &BenchArgs) -> Result<(), RunError> {
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>, _>>()?;
    let specs: Vec<SceneSpec> = (0..a.scenes as u64)
        .map(|i| a.scene.spec(a.first_seed + i))
        .collect();
    let noise = a.noise.noise(0);
    let report = run_benchmark(&specs, &noise, &CutoutParams::default(), &methods)?;
    std::fs::create_dir_all(&a.out_dir)?;
    report.write_json(a.out_dir.join("report.json"))?;
    report.write_csv(a.out_dir.join("report.csv"))?;
    print_json(&report.summary);
    if report.all_completed() {
        Ok(())
    } else {
        let failed = report.records.iter().filter(|r| r.error.is_some()).count();
        Err(RunError {
            code: "IncompleteBenchmark".into(),
            detail: format!(
                "{failed} of {} runs ended on a degenerate mask",
                report.records.len()
            ),
        })
    }
}

fn serve(a: &ServeArgs) -> Result<(), RunError> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(crate::service::serve(&a.bind, a.port))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn rect_parsing() {
        assert_eq!(
            parse_rect("10,10,100,120").unwrap(),
            Rect::new(10, 10, 100, 120)
        );
        assert_eq!(parse_rect(" 1, 2 ,3,4").unwrap(), Rect::new(1, 2, 3, 4));
        assert!(parse_rect("1,2,3").is_err());
        assert!(parse_rect("1,2,0,4").is_err());
        assert!(parse_rect("a,2,3,4").is_err());
    }

    #[test]
    fn param_overrides() {
        let p = ParamArgs {
            alpha: None,
            b: Some(10.0),
            max_iters: Some(3),
            gamma: None,
            components: None,
            seed: None,
        };
        let params = p.params();
        assert_eq!(params.b, 10.0);
        assert_eq!(params.max_iters, 3);
        assert_eq!(params.alpha, CutoutParams::default().alpha);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cli_main(["pmap-cutout", "cutout", "--pmap", "p.pgm"]), 1);
        assert_eq!(cli_main(["pmap-cutout", "frobnicate"]), 1);
        assert_eq!(cli_main(["pmap-cutout", "--help"]), 0);
    }
}
