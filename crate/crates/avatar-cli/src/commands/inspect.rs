use std::path::PathBuf;

use clap::{Args, Subcommand};

use avatar_core::backend::{GenerationBackend, GenerationRequest, Guidance};
use avatar_core::cascade::{plan_segments, select_anchors};
use avatar_core::conditioning::build_audio_mask;
use avatar_core::director::DirectorRequest;
use avatar_core::media::{frames_for_audio, load_audio, load_frame, TimeGrid};
use avatar_core::pipeline::heuristic_image_caption;

use crate::errors::CliError;

#[derive(Args)]
pub struct InspectArgs {
    #[command(subcommand)]
    pub command: InspectCommand,
}

#[derive(Subcommand)]
pub enum InspectCommand {
    /// Print a sliding-window audio attention mask as per-frame ranges.
    Mask {
        #[arg(long)]
        fps: f64,
        #[arg(long, default_value_t = 50.0)]
        token_rate: f64,
        #[arg(long, default_value_t = 0)]
        pad: u64,
        #[arg(long)]
        frames: u64,
        #[arg(long)]
        tokens: u64,
    },
    /// Run the blueprint pass and print the anchor selection table.
    Anchors {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        #[arg(long, default_value = "")]
        prompt: String,
        #[arg(long)]
        clips: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

pub fn run(args: InspectArgs) -> Result<(), CliError> {
    match args.command {
        InspectCommand::Mask { fps, token_rate, pad, frames, tokens } => {
            let grid = TimeGrid::new(fps, token_rate).map_err(|e| CliError::validation(e.to_string()))?;
            let mask = build_audio_mask(&grid, frames, tokens, pad)?;
            let ranges: Vec<String> = mask.allowed.iter().map(|(lo, hi)| format!("[{lo},{hi}]")).collect();
            println!("{}", ranges.join(","));
            Ok(())
        }
        InspectCommand::Anchors { image, audio, prompt, clips, seed, config } => {
            inspect_anchors(&image, &audio, &prompt, clips, seed, config.as_deref())
        }
    }
}

fn inspect_anchors(
    image: &std::path::Path,
    audio_path: &std::path::Path,
    prompt: &str,
    clips: Option<usize>,
    seed: u64,
    config_path: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let config = super::load_config(config_path)?;
    let reference = load_frame(image)?;
    let audio = load_audio(audio_path)?;
    let duration_s = audio.duration_s();

    let features = avatar_core::audio::extract_features(&audio, config.media.token_rate)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let caption = avatar_core::audio::caption_audio(&features, &config.audio);
    let image_caption = heuristic_image_caption(&reference);
    let director = avatar_core::director::RulesDirector;
    let storyline = avatar_core::director::DirectorBackend::ground(
        &director,
        &DirectorRequest::new(prompt, Some(caption), Some(image_caption), duration_s),
    )?;

    let backend = avatar_core::backend::ProceduralBackend::new(config.conditioning.boost_factor);
    let blueprint_grid = TimeGrid::new(config.media.blueprint_fps, config.media.token_rate)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let blueprint = backend.generate_blueprint(&GenerationRequest {
        reference: reference.clone(),
        guidance: Guidance::Global(storyline),
        audio: features,
        grid: blueprint_grid,
        duration_s,
        first_frame: None,
        last_frame: None,
        seed,
    })?;
    let boxes = backend.mouth_boxes(&blueprint).unwrap_or_default();

    let num_clips =
        clips.unwrap_or_else(|| (duration_s / config.cascade.clip_seconds).ceil().max(1.0) as usize);
    let plan = plan_segments(duration_s, num_clips)?;
    let total = frames_for_audio(duration_s, config.media.fps);
    let anchors = select_anchors(
        &blueprint,
        &plan,
        &reference,
        &boxes,
        config.cascade.anchor_window_s,
        &config.cascade.anchor_weights,
        config.media.fps,
        total,
    )?;

    println!("anchor blueprint_frame snapped_frame score identity motion occlusion expressiveness");
    for (i, a) in anchors.iter().enumerate() {
        println!(
            "{i:<6} {:<15} {:<13} {:.4} {:.4} {:.4} {:.4} {:.4}",
            a.blueprint_frame_index,
            a.snapped_output_frame_index,
            a.score,
            a.breakdown.identity,
            a.breakdown.motion,
            a.breakdown.occlusion_free,
            a.breakdown.expressiveness
        );
    }
    Ok(())
}
