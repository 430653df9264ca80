use std::path::PathBuf;

use clap::Args;

use avatar_core::backend::{GenerationBackend, ProceduralBackend};
use avatar_core::conditioning::MouthBoxes;
use avatar_core::director::{DirectorBackend, ExternalDirector, ImageCaption, RulesDirector};
use avatar_core::media::{load_audio, load_frame};
use avatar_core::pipeline::{generate, write_outputs, GenerateOptions};

use crate::errors::CliError;

#[derive(Args)]
pub struct GenerateArgs {
    /// Reference image (binary PPM).
    #[arg(long)]
    pub image: PathBuf,
    /// Driving audio (WAV PCM16).
    #[arg(long)]
    pub audio: PathBuf,
    /// Free-text instruction prompt.
    #[arg(long, default_value = "")]
    pub prompt: String,
    /// Output clip directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of sub-clips (default: one per 5 s of audio).
    #[arg(long)]
    pub clips: Option<usize>,
    /// Output frame rate.
    #[arg(long)]
    pub fps: Option<f64>,
    /// Worker threads for parallel sub-clip generation.
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    /// Generation seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Blueprint mouth boxes (keypoints JSONL), overriding the backend's.
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    /// Structured image caption (JSON file), overriding the heuristic.
    #[arg(long)]
    pub image_caption: Option<PathBuf>,
    /// Director backend: "rules" or "external:<url>".
    #[arg(long, default_value = "rules")]
    pub director: String,
    /// Generation backend; "procedural" is the only shipped one.
    #[arg(long, default_value = "procedural")]
    pub backend: String,
    /// Config file (TOML); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn select_director(spec: &str) -> Result<Box<dyn DirectorBackend>, CliError> {
    if spec == "rules" {
        return Ok(Box::new(RulesDirector));
    }
    if let Some(url) = spec.strip_prefix("external:") {
        if url.is_empty() {
            return Err(CliError::validation("external director needs a URL: --director external:<url>"));
        }
        return Ok(Box::new(ExternalDirector::new(url)));
    }
    Err(CliError::validation(format!(
        "unknown director {spec:?}; expected \"rules\" or \"external:<url>\""
    )))
}

pub fn select_backend(spec: &str, boost_factor: f64) -> Result<Box<dyn GenerationBackend>, CliError> {
    match spec {
        "procedural" => Ok(Box::new(ProceduralBackend::new(boost_factor))),
        other => Err(CliError::validation(format!(
            "unknown backend {other:?}; \"procedural\" is the only shipped backend"
        ))),
    }
}

pub fn run(args: GenerateArgs) -> Result<(), CliError> {
    let mut config = super::load_config(args.config.as_deref())?;
    if let Some(fps) = args.fps {
        config.media.fps = fps;
    }
    config.validate()?;

    let reference = load_frame(&args.image)?;
    let audio = load_audio(&args.audio)?;
    let director = select_director(&args.director)?;
    let backend = select_backend(&args.backend, config.conditioning.boost_factor)?;

    let keypoints = match &args.keypoints {
        Some(path) => Some(MouthBoxes::load(path)?),
        None => None,
    };
    let image_caption: Option<ImageCaption> = match &args.image_caption {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(CliError::io)?;
            Some(serde_json::from_str(&text).map_err(|e| {
                CliError::validation(format!("invalid image caption {}: {e}", path.display()))
            })?)
        }
        None => None,
    };

    let options = GenerateOptions {
        num_clips: args.clips,
        workers: args.workers,
        seed: args.seed,
        keypoints,
        image_caption,
    };
    let output = generate(&reference, &audio, &args.prompt, director.as_ref(), backend.as_ref(), &config, &options)?;
    write_outputs(&output, &audio, &args.out)?;
    eprintln!(
        "generate: wrote {} frames at {} fps to {} ({} sub-clips)",
        output.report.num_frames,
        output.report.fps,
        args.out.display(),
        output.report.num_clips
    );
    Ok(())
}
