use std::path::PathBuf;

use clap::{Args, Subcommand};

use avatar_core::bench::{
    filter_sample_ids, load_manifest, load_votes, tally, validate_manifest, BenchSample, CompositionSpec,
    GsbResult,
};

use crate::errors::CliError;

#[derive(Args)]
pub struct BenchArgs {
    #[command(subcommand)]
    pub command: BenchCommand,
}

#[derive(Subcommand)]
pub enum BenchCommand {
    /// Check a manifest against a composition spec.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
        /// Composition spec (JSON); defaults to the built-in composition.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Tally GSB votes: per-sample majority vote, metric (G+S)/(B+S).
    Score {
        /// Votes JSONL: {"sample_id", "judge_id", "label"} per line.
        #[arg(long)]
        votes: PathBuf,
        /// Manifest JSONL; required for --filter and category rows.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated key=value filters (language, kind, category,
        /// source, orientation, resolution, emotion).
        #[arg(long)]
        filter: Option<String>,
    },
}

pub fn run(args: BenchArgs) -> Result<(), CliError> {
    match args.command {
        BenchCommand::Validate { manifest, spec } => run_validate(&manifest, spec.as_deref()),
        BenchCommand::Score { votes, manifest, filter } => {
            run_score(&votes, manifest.as_deref(), filter.as_deref())
        }
    }
}

fn run_validate(manifest_path: &std::path::Path, spec_path: Option<&std::path::Path>) -> Result<(), CliError> {
    let samples = load_manifest(manifest_path)?;
    let spec = match spec_path {
        Some(p) => CompositionSpec::load(p)?,
        None => CompositionSpec::default(),
    };
    let report = validate_manifest(&samples, &spec);
    if report.is_valid() {
        println!("valid: {} samples match the composition", samples.len());
        Ok(())
    } else {
        for v in &report.violations {
            println!("violation: {}: expected {}, got {}", v.rule, v.expected, v.actual);
        }
        Err(CliError::validation(format!("{} composition violations", report.violations.len())))
    }
}

fn parse_filters(filter: &str) -> Result<Vec<(String, String)>, CliError> {
    filter
        .split(',')
        .filter(|part| !part.trim().is_empty())
        .map(|part| {
            part.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::validation(format!("bad filter term {part:?}; expected key=value")))
        })
        .collect()
}

fn print_row(name: &str, result: &GsbResult) {
    println!(
        "{name:<12} G={:<4} S={:<4} B={:<4} (G+S)/(B+S)={}",
        result.good,
        result.same,
        result.bad,
        result.metric_display()
    );
}

fn run_score(
    votes_path: &std::path::Path,
    manifest_path: Option<&std::path::Path>,
    filter: Option<&str>,
) -> Result<(), CliError> {
    let votes = load_votes(votes_path)?;
    let manifest: Option<Vec<BenchSample>> = match manifest_path {
        Some(p) => Some(load_manifest(p)?),
        None => None,
    };

    if let Some(filter) = filter {
        let samples = manifest
            .as_ref()
            .ok_or_else(|| CliError::validation("--filter requires --manifest for sample metadata"))?;
        let filters = parse_filters(filter)?;
        let ids = filter_sample_ids(samples, &filters)?;
        let result = tally(&votes, Some(&ids))?;
        print_row(filter, &result);
        return Ok(());
    }

    let overall = tally(&votes, None)?;
    print_row("overall", &overall);

    // with a manifest, print the standard category rows
    if let Some(samples) = &manifest {
        let rows: [(&str, &[(&str, &str)]); 3] = [
            ("speech-en", &[("language", "en"), ("kind", "speech")]),
            ("speech-zh", &[("language", "zh"), ("kind", "speech")]),
            ("sing-en/zh", &[("kind", "song")]),
        ];
        for (name, terms) in rows {
            let filters: Vec<(String, String)> =
                terms.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
            let ids = filter_sample_ids(samples, &filters)?;
            // only samples that actually have votes
            let voted: std::collections::BTreeSet<String> = votes
                .iter()
                .map(|v| v.sample_id.clone())
                .filter(|id| ids.contains(id))
                .collect();
            if voted.is_empty() {
                continue;
            }
            let result = tally(&votes, Some(&voted))?;
            print_row(name, &result);
        }
    }
    Ok(())
}
