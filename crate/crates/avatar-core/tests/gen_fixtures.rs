//! Regenerates the committed benchmark fixtures. Run manually after
//! changing the manifest schema or the synthetic generator:
//!
//!     cargo test -p avatar-core --test gen_fixtures -- --ignored
//!
//! Committed outputs: data/bench/composition.json, data/bench/manifest.jsonl,
//! data/bench/mutants/*.jsonl, data/bench/votes_example.jsonl.

use std::path::PathBuf;

use avatar_core::bench::{
    manifest_to_jsonl, mutants, synthetic_manifest, CompositionSpec, GsbLabel, GsbRecord,
};
use avatar_core::rng::Rng;

fn repo_data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/bench")
}

#[test]
#[ignore = "writes committed fixtures; run explicitly"]
fn regenerate_bench_fixtures() {
    let dir = repo_data_dir();
    std::fs::create_dir_all(dir.join("mutants")).unwrap();

    let spec = CompositionSpec::default();
    let spec_json = serde_json::to_string_pretty(&spec).unwrap();
    std::fs::write(dir.join("composition.json"), spec_json + "\n").unwrap();

    let samples = synthetic_manifest(&spec, 20_250_901);
    std::fs::write(dir.join("manifest.jsonl"), manifest_to_jsonl(&samples)).unwrap();

    std::fs::write(dir.join("mutants/wrong_total.jsonl"), mutants::wrong_total(&samples)).unwrap();
    std::fs::write(dir.join("mutants/wrong_split.jsonl"), mutants::wrong_split(&samples)).unwrap();
    std::fs::write(dir.join("mutants/wrong_language.jsonl"), mutants::wrong_language(&samples)).unwrap();
    std::fs::write(dir.join("mutants/wrong_duration.jsonl"), mutants::wrong_duration(&samples)).unwrap();
    std::fs::write(dir.join("mutants/bad_enum.jsonl"), mutants::bad_enum(&samples)).unwrap();

    // example votes: three judges over every sample, seeded
    let mut rng = Rng::new(9);
    let mut votes = String::new();
    for s in &samples {
        for judge in ["judge_a", "judge_b", "judge_c"] {
            let label = match rng.below(10) {
                0..=4 => GsbLabel::G,
                5..=7 => GsbLabel::S,
                _ => GsbLabel::B,
            };
            let record = GsbRecord { sample_id: s.id.clone(), judge_id: judge.to_string(), label };
            votes.push_str(&serde_json::to_string(&record).unwrap());
            votes.push('\n');
        }
    }
    std::fs::write(dir.join("votes_example.jsonl"), votes).unwrap();
}
