//! Benchmark manifest schema, composition validator, and the GSB
//! preference-evaluation tally (per-sample majority vote over three
//! judges, reported as (G+S)/(B+S)).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::director::{CameraOp, Emotion, Intensity};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path} line {line}: {detail}")]
    Parse { path: String, line: usize, detail: String },
    #[error("cannot read {path}: {detail}")]
    Unreadable { path: String, detail: String },
    #[error("majority vote needs exactly 3 labels, got {0}")]
    WrongLabelCount(usize),
    #[error("samples without exactly 3 judgments: {0:?}")]
    WrongJudgeCount(Vec<String>),
    #[error("unknown filter key {0:?}")]
    UnknownFilterKey(String),
    #[error("unknown filter value {value:?} for key {key:?}")]
    UnknownFilterValue { key: String, value: String },
}

// ---------------------------------------------------------------------
// GSB records and tally
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GsbLabel {
    G,
    S,
    B,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GsbRecord {
    pub sample_id: String,
    pub judge_id: String,
    pub label: GsbLabel,
}

/// Counts after per-sample majority vote; metric = (G+S)/(B+S).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GsbResult {
    pub good: u64,
    pub same: u64,
    pub bad: u64,
}

impl GsbResult {
    pub fn total(&self) -> u64 {
        self.good + self.same + self.bad
    }

    /// None encodes the +infinity case (B + S = 0).
    pub fn metric(&self) -> Option<f64> {
        let denom = self.bad + self.same;
        if denom == 0 {
            None
        } else {
            Some((self.good + self.same) as f64 / denom as f64)
        }
    }

    /// Two-decimal display, "inf" for the +infinity marker.
    pub fn metric_display(&self) -> String {
        match self.metric() {
            Some(m) => format!("{m:.2}"),
            None => "inf".to_string(),
        }
    }
}

/// Majority vote over exactly 3 labels; the three-way (G, S, B) tie
/// resolves to S.
pub fn majority_vote(labels: &[GsbLabel]) -> Result<GsbLabel, BenchError> {
    if labels.len() != 3 {
        return Err(BenchError::WrongLabelCount(labels.len()));
    }
    let count = |l: GsbLabel| labels.iter().filter(|&&x| x == l).count();
    for l in [GsbLabel::G, GsbLabel::S, GsbLabel::B] {
        if count(l) >= 2 {
            return Ok(l);
        }
    }
    Ok(GsbLabel::S)
}

/// Tally records: per-sample majority vote, then counts. Every sample
/// passing the filter must have exactly 3 judgments; violators are all
/// named in the error.
pub fn tally(records: &[GsbRecord], sample_filter: Option<&BTreeSet<String>>) -> Result<GsbResult, BenchError> {
    let mut by_sample: BTreeMap<&str, Vec<GsbLabel>> = BTreeMap::new();
    for r in records {
        if let Some(filter) = sample_filter {
            if !filter.contains(&r.sample_id) {
                continue;
            }
        }
        by_sample.entry(&r.sample_id).or_default().push(r.label);
    }
    let bad_ids: Vec<String> = by_sample
        .iter()
        .filter(|(_, labels)| labels.len() != 3)
        .map(|(id, _)| id.to_string())
        .collect();
    if !bad_ids.is_empty() {
        return Err(BenchError::WrongJudgeCount(bad_ids));
    }
    let mut result = GsbResult { good: 0, same: 0, bad: 0 };
    for labels in by_sample.values() {
        match majority_vote(labels)? {
            GsbLabel::G => result.good += 1,
            GsbLabel::S => result.same += 1,
            GsbLabel::B => result.bad += 1,
        }
    }
    Ok(result)
}

/// Load votes JSONL: one {sample_id, judge_id, label} per line.
pub fn load_votes(path: &Path) -> Result<Vec<GsbRecord>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Unreadable {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: GsbRecord = serde_json::from_str(line).map_err(|e| BenchError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Benchmark manifest
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSource {
    Real,
    Ai,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageCategory {
    HumanFull,
    HumanHalf,
    Cartoon,
    Anime,
    Animal,
}

impl ImageCategory {
    pub fn is_human(&self) -> bool {
        matches!(self, ImageCategory::HumanFull | ImageCategory::HumanHalf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Vertical,
    Horizontal,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolutionClass {
    #[serde(rename = "480p")]
    R480,
    #[serde(rename = "720p")]
    R720,
    #[serde(rename = "1080p")]
    R1080,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Zh,
    En,
    Ko,
    Ja,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioKind {
    Speech,
    Song,
}

/// One benchmark entry: an image-audio-prompt triple with its metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSample {
    pub id: String,
    pub image_path: String,
    pub image_source: ImageSource,
    pub image_category: ImageCategory,
    pub orientation: Orientation,
    pub resolution_class: ResolutionClass,
    pub audio_path: String,
    pub language: Language,
    pub audio_kind: AudioKind,
    pub duration_s: f64,
    pub prompt: String,
    pub emotion: Emotion,
    pub intensity: Intensity,
    pub camera_ops: Vec<CameraOp>,
    pub actions: Vec<String>,
}

/// Required composition of a manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositionSpec {
    pub total: u64,
    pub human: u64,
    pub non_human: u64,
    pub languages: BTreeMap<Language, u64>,
    pub duration_range: (f64, f64),
}

impl Default for CompositionSpec {
    fn default() -> Self {
        let mut languages = BTreeMap::new();
        languages.insert(Language::Zh, 150);
        languages.insert(Language::En, 150);
        languages.insert(Language::Ko, 35);
        languages.insert(Language::Ja, 40);
        CompositionSpec { total: 375, human: 340, non_human: 35, languages, duration_range: (8.0, 120.0) }
    }
}

impl CompositionSpec {
    pub fn load(path: &Path) -> Result<CompositionSpec, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Unreadable {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| BenchError::Parse {
            path: path.display().to_string(),
            line: 0,
            detail: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check a manifest against a composition spec: total count, human and
/// non-human counts, per-language counts, and the duration range (each
/// out-of-range duration names the sample id).
pub fn validate_manifest(samples: &[BenchSample], spec: &CompositionSpec) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |rule: &str, expected: String, actual: String| {
        violations.push(Violation { rule: rule.to_string(), expected, actual });
    };

    if samples.len() as u64 != spec.total {
        push("total", spec.total.to_string(), samples.len().to_string());
    }
    let human = samples.iter().filter(|s| s.image_category.is_human()).count() as u64;
    if human != spec.human {
        push("human", spec.human.to_string(), human.to_string());
    }
    let non_human = samples.len() as u64 - human;
    if non_human != spec.non_human {
        push("non_human", spec.non_human.to_string(), non_human.to_string());
    }
    for (lang, &expected) in &spec.languages {
        let actual = samples.iter().filter(|s| s.language == *lang).count() as u64;
        if actual != expected {
            push(
                &format!("language {}", serde_json::to_string(lang).unwrap().trim_matches('"')),
                expected.to_string(),
                actual.to_string(),
            );
        }
    }
    let (lo, hi) = spec.duration_range;
    for s in samples {
        if s.duration_s < lo || s.duration_s > hi {
            push(
                "duration",
                format!("[{lo}, {hi}] for sample {}", s.id),
                format!("{}", s.duration_s),
            );
        }
    }
    ValidationReport { violations }
}

/// Load a manifest JSONL, reporting parse errors with line numbers.
pub fn load_manifest(path: &Path) -> Result<Vec<BenchSample>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Unreadable {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sample: BenchSample = serde_json::from_str(line).map_err(|e| BenchError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(sample);
    }
    Ok(out)
}

pub fn manifest_to_jsonl(samples: &[BenchSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("sample serializes"));
        out.push('\n');
    }
    out
}

/// Ids of samples matching key=value filters. Supported keys:
/// language, kind, category, source, orientation, resolution, emotion.
pub fn filter_sample_ids(
    samples: &[BenchSample],
    filters: &[(String, String)],
) -> Result<BTreeSet<String>, BenchError> {
    let mut ids = BTreeSet::new();
    'samples: for s in samples {
        for (key, value) in filters {
            let matched = match key.as_str() {
                "language" => enum_matches(&s.language, key, value)?,
                "kind" => enum_matches(&s.audio_kind, key, value)?,
                "category" => enum_matches(&s.image_category, key, value)?,
                "source" => enum_matches(&s.image_source, key, value)?,
                "orientation" => enum_matches(&s.orientation, key, value)?,
                "resolution" => enum_matches(&s.resolution_class, key, value)?,
                "emotion" => enum_matches(&s.emotion, key, value)?,
                _ => return Err(BenchError::UnknownFilterKey(key.clone())),
            };
            if !matched {
                continue 'samples;
            }
        }
        ids.insert(s.id.clone());
    }
    Ok(ids)
}

fn enum_matches<T: Serialize>(field: &T, key: &str, value: &str) -> Result<bool, BenchError> {
    if let Some(vals) = known_values(key) {
        if !vals.contains(&value) {
            return Err(BenchError::UnknownFilterValue { key: key.to_string(), value: value.to_string() });
        }
    }
    let field_str = serde_json::to_string(field).expect("enum serializes");
    Ok(field_str.trim_matches('"') == value)
}

fn known_values(key: &str) -> Option<&'static [&'static str]> {
    match key {
        "language" => Some(&["zh", "en", "ko", "ja"]),
        "kind" => Some(&["speech", "song"]),
        "category" => Some(&["human_full", "human_half", "cartoon", "anime", "animal"]),
        "source" => Some(&["real", "ai"]),
        "orientation" => Some(&["vertical", "horizontal", "square"]),
        "resolution" => Some(&["480p", "720p", "1080p"]),
        "emotion" => Some(&["calm", "excitement", "confusion", "sadness", "surprise", "anger"]),
        _ => None,
    }
}

// ---------------------------------------------------------------------
// Synthetic manifest (shipped example + mutants)
// ---------------------------------------------------------------------

/// Deterministic synthetic manifest hitting the composition exactly.
pub fn synthetic_manifest(spec: &CompositionSpec, seed: u64) -> Vec<BenchSample> {
    let mut rng = Rng::new(seed);
    let mut languages: Vec<Language> = Vec::new();
    for (lang, &count) in &spec.languages {
        languages.extend(std::iter::repeat_n(*lang, count as usize));
    }
    // pad or trim to total in case the spec is inconsistent
    while (languages.len() as u64) < spec.total {
        languages.push(Language::En);
    }
    languages.truncate(spec.total as usize);

    let non_human_cats = [ImageCategory::Cartoon, ImageCategory::Anime, ImageCategory::Animal];
    let orientations = [Orientation::Vertical, Orientation::Horizontal, Orientation::Square];
    let resolutions = [ResolutionClass::R480, ResolutionClass::R720, ResolutionClass::R1080];
    let emotions = Emotion::ALL;
    let cameras = [
        vec![],
        vec![CameraOp::PanLeft],
        vec![CameraOp::PanRight],
        vec![CameraOp::ZoomIn],
        vec![CameraOp::ZoomOut, CameraOp::Static],
    ];
    let actions = [
        vec!["talking".to_string()],
        vec!["turning".to_string()],
        vec!["raising_hands".to_string(), "talking".to_string()],
        vec!["head_shaking".to_string()],
        vec!["waving".to_string()],
    ];
    let intensities = [Intensity::Low, Intensity::Medium, Intensity::High];

    let mut samples = Vec::with_capacity(spec.total as usize);
    for i in 0..spec.total as usize {
        let image_category = if (i as u64) < spec.human {
            if i % 2 == 0 {
                ImageCategory::HumanFull
            } else {
                ImageCategory::HumanHalf
            }
        } else {
            non_human_cats[(i - spec.human as usize) % non_human_cats.len()]
        };
        let emotion = emotions[i % emotions.len()];
        let (lo, hi) = spec.duration_range;
        let duration_s = (lo + (hi - lo) * rng.next_f64() * 100.0).round() / 100.0;
        samples.push(BenchSample {
            id: format!("sample_{i:04}"),
            image_path: format!("images/ref_{i:04}.ppm"),
            image_source: if i % 2 == 0 { ImageSource::Real } else { ImageSource::Ai },
            image_category,
            orientation: orientations[i % orientations.len()],
            resolution_class: resolutions[i % resolutions.len()],
            audio_path: format!("audio/drive_{i:04}.wav"),
            language: languages[i],
            audio_kind: if i % 5 == 4 { AudioKind::Song } else { AudioKind::Speech },
            duration_s: duration_s.clamp(lo, hi),
            prompt: format!("{} delivery, sample {i}", emotion.as_str()),
            emotion,
            intensity: intensities[i % intensities.len()],
            camera_ops: cameras[i % cameras.len()].clone(),
            actions: actions[i % actions.len()].clone(),
        });
    }
    samples
}

/// The five shipped mutants, one per validation rule. Each returns the
/// mutated JSONL text.
pub mod mutants {
    use super::*;

    /// total != 375: drop the last sample.
    pub fn wrong_total(samples: &[BenchSample]) -> String {
        manifest_to_jsonl(&samples[..samples.len() - 1])
    }

    /// human/non-human split broken: one human becomes a cartoon.
    pub fn wrong_split(samples: &[BenchSample]) -> String {
        let mut s = samples.to_vec();
        let idx = s.iter().position(|x| x.image_category.is_human()).unwrap();
        s[idx].image_category = ImageCategory::Cartoon;
        manifest_to_jsonl(&s)
    }

    /// language counts broken: one zh sample becomes en.
    pub fn wrong_language(samples: &[BenchSample]) -> String {
        let mut s = samples.to_vec();
        let idx = s.iter().position(|x| x.language == Language::Zh).unwrap();
        s[idx].language = Language::En;
        manifest_to_jsonl(&s)
    }

    /// duration out of [8, 120].
    pub fn wrong_duration(samples: &[BenchSample]) -> String {
        let mut s = samples.to_vec();
        s[0].duration_s = 150.0;
        manifest_to_jsonl(&s)
    }

    /// an emotion outside the six-category taxonomy (parse-level failure).
    pub fn bad_enum(samples: &[BenchSample]) -> String {
        let mut text = manifest_to_jsonl(samples);
        let first_end = text.find('\n').unwrap();
        let mutated = text[..first_end].replace("\"emotion\":\"calm\"", "\"emotion\":\"joy\"");
        let mutated = if mutated.contains("\"joy\"") {
            mutated
        } else {
            // first sample's emotion is always calm in the synthetic
            // manifest, but fall back to a forced bad field
            text[..first_end].replacen("\"calm\"", "\"joy\"", 1)
        };
        text.replace_range(..first_end, &mutated);
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(sample: &str, judge: &str, label: GsbLabel) -> GsbRecord {
        GsbRecord { sample_id: sample.into(), judge_id: judge.into(), label }
    }

    #[test]
    fn majority_vote_rules() {
        use GsbLabel::*;
        assert_eq!(majority_vote(&[G, G, B]).unwrap(), G);
        assert_eq!(majority_vote(&[S, S, S]).unwrap(), S);
        assert_eq!(majority_vote(&[G, S, B]).unwrap(), S); // three-way tie
        assert_eq!(majority_vote(&[B, G, B]).unwrap(), B);
        assert!(matches!(majority_vote(&[G, G]), Err(BenchError::WrongLabelCount(2))));
    }

    #[test]
    fn tally_arithmetic() {
        use GsbLabel::*;
        // 60 G-majority, 25 S-majority, 15 B-majority
        let mut records = Vec::new();
        for i in 0..100 {
            let majority = if i < 60 { G } else if i < 85 { S } else { B };
            let minority = if majority == G { B } else { G };
            let id = format!("s{i:03}");
            records.push(rec(&id, "j1", majority));
            records.push(rec(&id, "j2", majority));
            records.push(rec(&id, "j3", minority));
        }
        let result = tally(&records, None).unwrap();
        assert_eq!((result.good, result.same, result.bad), (60, 25, 15));
        assert!((result.metric().unwrap() - 2.125).abs() < 1e-12);
        assert_eq!(result.metric_display(), "2.12");
    }

    #[test]
    fn all_same_gives_metric_one_and_all_good_gives_inf() {
        use GsbLabel::*;
        let mut records = Vec::new();
        for i in 0..10 {
            for j in 0..3 {
                records.push(rec(&format!("s{i}"), &format!("j{j}"), S));
            }
        }
        let result = tally(&records, None).unwrap();
        assert_eq!(result.metric().unwrap(), 1.0);

        let all_good: Vec<GsbRecord> = (0..6)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| rec(&format!("s{i}"), &format!("j{j}"), G))
            .collect();
        let result = tally(&all_good, None).unwrap();
        assert_eq!(result.metric(), None);
        assert_eq!(result.metric_display(), "inf");
    }

    #[test]
    fn metric_antisymmetry() {
        use GsbLabel::*;
        let mut rng = Rng::new(77);
        let mut records = Vec::new();
        for i in 0..60 {
            let label = match rng.below(3) {
                0 => G,
                1 => S,
                _ => B,
            };
            for j in 0..3 {
                records.push(rec(&format!("s{i:02}"), &format!("j{j}"), label));
            }
        }
        let forward = tally(&records, None).unwrap();
        let swapped: Vec<GsbRecord> = records
            .iter()
            .map(|r| GsbRecord {
                sample_id: r.sample_id.clone(),
                judge_id: r.judge_id.clone(),
                label: match r.label {
                    G => B,
                    B => G,
                    S => S,
                },
            })
            .collect();
        let backward = tally(&swapped, None).unwrap();
        if let (Some(m), Some(m_inv)) = (forward.metric(), backward.metric()) {
            assert!((m * m_inv - 1.0).abs() < 1e-9 || forward.same != backward.same);
            // with S fixed and G/B swapped the product is exactly 1
            assert_eq!(forward.same, backward.same);
            assert!((m - 1.0 / m_inv).abs() < 1e-9);
        }
    }

    #[test]
    fn tally_matches_brute_force_recount() {
        use GsbLabel::*;
        for seed in 0..50 {
            let mut rng = Rng::new(seed);
            let n = 20 + rng.below(50) as usize;
            let mut records = Vec::new();
            for i in 0..n {
                for j in 0..3 {
                    let label = match rng.below(3) {
                        0 => G,
                        1 => S,
                        _ => B,
                    };
                    records.push(rec(&format!("s{i:03}"), &format!("j{j}"), label));
                }
            }
            let got = tally(&records, None).unwrap();

            // oracle: group and count from scratch with a different shape
            let mut counts = (0u64, 0u64, 0u64);
            for i in 0..n {
                let id = format!("s{i:03}");
                let labels: Vec<GsbLabel> =
                    records.iter().filter(|r| r.sample_id == id).map(|r| r.label).collect();
                let g = labels.iter().filter(|&&l| l == G).count();
                let s = labels.iter().filter(|&&l| l == S).count();
                let b = labels.iter().filter(|&&l| l == B).count();
                let winner = if g >= 2 {
                    G
                } else if s >= 2 {
                    S
                } else if b >= 2 {
                    B
                } else {
                    S
                };
                match winner {
                    G => counts.0 += 1,
                    S => counts.1 += 1,
                    B => counts.2 += 1,
                }
            }
            assert_eq!((got.good, got.same, got.bad), counts, "seed {seed}");
        }
    }

    #[test]
    fn missing_and_extra_judgments_named() {
        use GsbLabel::*;
        let mut records = vec![
            rec("ok", "j1", G),
            rec("ok", "j2", G),
            rec("ok", "j3", B),
            rec("short", "j1", G),
            rec("short", "j2", G),
        ];
        for j in 0..4 {
            records.push(rec("long", &format!("j{j}"), S));
        }
        match tally(&records, None) {
            Err(BenchError::WrongJudgeCount(ids)) => {
                assert_eq!(ids, vec!["long".to_string(), "short".to_string()]);
            }
            other => panic!("expected WrongJudgeCount, got {other:?}"),
        }
    }

    #[test]
    fn filter_restricts_tally() {
        use GsbLabel::*;
        let records = vec![
            rec("a", "j1", G),
            rec("a", "j2", G),
            rec("a", "j3", G),
            rec("b", "j1", B),
            rec("b", "j2", B),
            rec("b", "j3", B),
        ];
        let only_a: BTreeSet<String> = ["a".to_string()].into();
        let result = tally(&records, Some(&only_a)).unwrap();
        assert_eq!((result.good, result.bad), (1, 0));
    }

    #[test]
    fn synthetic_manifest_is_valid_and_deterministic() {
        let spec = CompositionSpec::default();
        let a = synthetic_manifest(&spec, 1);
        let b = synthetic_manifest(&spec, 1);
        assert_eq!(manifest_to_jsonl(&a), manifest_to_jsonl(&b));
        assert_eq!(a.len(), 375);
        let report = validate_manifest(&a, &spec);
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn each_mutant_fails_its_rule() {
        let spec = CompositionSpec::default();
        let samples = synthetic_manifest(&spec, 1);
        let tmp = std::env::temp_dir().join(format!("avatar_bench_{}", std::process::id()));
        std::fs::create_dir_all(&tmp).unwrap();

        let check_violation = |jsonl: String, rule_prefix: &str| {
            let path = tmp.join("mutant.jsonl");
            std::fs::write(&path, jsonl).unwrap();
            let loaded = load_manifest(&path).unwrap();
            let report = validate_manifest(&loaded, &spec);
            assert!(
                report.violations.iter().any(|v| v.rule.starts_with(rule_prefix)),
                "expected a {rule_prefix} violation, got {:?}",
                report.violations
            );
        };
        check_violation(mutants::wrong_total(&samples), "total");
        check_violation(mutants::wrong_split(&samples), "human");
        check_violation(mutants::wrong_language(&samples), "language");
        check_violation(mutants::wrong_duration(&samples), "duration");

        let path = tmp.join("bad_enum.jsonl");
        std::fs::write(&path, mutants::bad_enum(&samples)).unwrap();
        match load_manifest(&path) {
            Err(BenchError::Parse { line: 1, .. }) => {}
            other => panic!("expected parse error on line 1, got {other:?}"),
        }
    }

    #[test]
    fn language_violation_message_shape() {
        let spec = CompositionSpec::default();
        let samples = synthetic_manifest(&spec, 1);
        let mut mutated = samples.clone();
        let idx = mutated.iter().position(|s| s.language == Language::Zh).unwrap();
        mutated[idx].language = Language::Ko;
        let report = validate_manifest(&mutated, &spec);
        let zh = report.violations.iter().find(|v| v.rule == "language zh").unwrap();
        assert_eq!(zh.expected, "150");
        assert_eq!(zh.actual, "149");
        assert!(report.violations.iter().any(|v| v.rule == "language ko" && v.actual == "36"));
    }

    #[test]
    fn filters_match_table_rows() {
        let spec = CompositionSpec::default();
        let samples = synthetic_manifest(&spec, 1);
        let speech_en =
            filter_sample_ids(&samples, &[("language".into(), "en".into()), ("kind".into(), "speech".into())])
                .unwrap();
        let song_en =
            filter_sample_ids(&samples, &[("language".into(), "en".into()), ("kind".into(), "song".into())])
                .unwrap();
        let en = filter_sample_ids(&samples, &[("language".into(), "en".into())]).unwrap();
        assert_eq!(speech_en.len() + song_en.len(), en.len());
        assert_eq!(en.len(), 150);
        assert!(filter_sample_ids(&samples, &[("nope".into(), "x".into())]).is_err());
        assert!(matches!(
            filter_sample_ids(&samples, &[("language".into(), "fr".into())]),
            Err(BenchError::UnknownFilterValue { .. })
        ));
    }

    #[test]
    fn votes_jsonl_roundtrip() {
        use GsbLabel::*;
        let records = vec![rec("a", "j1", G), rec("a", "j2", S), rec("a", "j3", B)];
        let path = std::env::temp_dir().join(format!("avatar_votes_{}.jsonl", std::process::id()));
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r).unwrap());
            text.push('\n');
        }
        std::fs::write(&path, &text).unwrap();
        let loaded = load_votes(&path).unwrap();
        assert_eq!(loaded.len(), 3);
        assert_eq!(loaded[2].label, B);

        std::fs::write(&path, "{\"sample_id\": 42}\n").unwrap();
        assert!(matches!(load_votes(&path), Err(BenchError::Parse { line: 1, .. })));
    }
}
