use std::path::PathBuf;

use clap::Args;

use avatar_core::curation::{reports_to_jsonl, run_curation};

use crate::errors::CliError;

#[derive(Args)]
pub struct CurateArgs {
    /// Glob over clip directories (e.g. "data/clips/*").
    #[arg(long)]
    pub input: String,
    /// Keypoints file path per clip dir: <dir><suffix>.
    #[arg(long, default_value = ".kp.jsonl")]
    pub keypoints_suffix: String,
    /// Output manifest (JSONL, one report per clip in input order).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    /// Minimum sync confidence (overrides config).
    #[arg(long)]
    pub min_sync: Option<f64>,
    /// Maximum |lag| in frames (overrides config).
    #[arg(long)]
    pub max_lag: Option<i64>,
    /// Minimum lip-clarity score (overrides config).
    #[arg(long)]
    pub min_lip_clarity: Option<f64>,
    /// Minimum aesthetic composite (overrides config).
    #[arg(long)]
    pub min_aesthetic: Option<f64>,
    /// Maximum allowed scene cuts (overrides config).
    #[arg(long)]
    pub max_scene_cuts: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: CurateArgs) -> Result<(), CliError> {
    let config = super::load_config(args.config.as_deref())?;
    let mut thresholds = config.curation.clone();
    if let Some(v) = args.min_sync {
        thresholds.min_sync_confidence = Some(v);
    }
    if let Some(v) = args.max_lag {
        thresholds.max_abs_lag_frames = Some(v);
    }
    if let Some(v) = args.min_lip_clarity {
        thresholds.min_lip_clarity = Some(v);
    }
    if let Some(v) = args.min_aesthetic {
        thresholds.min_aesthetic = Some(v);
    }
    if let Some(v) = args.max_scene_cuts {
        thresholds.max_scene_cuts = Some(v);
    }

    let mut dirs: Vec<PathBuf> = glob::glob(&args.input)
        .map_err(|e| CliError::validation(format!("bad glob {:?}: {e}", args.input)))?
        .filter_map(Result::ok)
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::validation(format!("no clip directories match {:?}", args.input)));
    }

    let reports = run_curation(&dirs, &args.keypoints_suffix, &thresholds, config.media.token_rate, args.workers.max(1));
    std::fs::write(&args.out, reports_to_jsonl(&reports)).map_err(CliError::io)?;

    let kept = reports.iter().filter(|r| matches!(r.verdict, avatar_core::curation::Verdict::Keep)).count();
    eprintln!("curate: {} clips scored, {} keep, {} drop -> {}", reports.len(), kept, reports.len() - kept, args.out.display());
    Ok(())
}
