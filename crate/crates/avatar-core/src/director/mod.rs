//! Instruction grounding: merge (user prompt, audio caption, image caption)
//! into a structured global [`Storyline`], and decompose it into per-sub-clip
//! [`LocalPlan`]s. The reference implementation is rule-based and fully
//! deterministic; an external backend can replace it behind the same
//! contract (see [`backend`]).

pub mod backend;
mod parse;

pub use backend::{DirectorBackend, DirectorRequest, ExternalDirector, RulesDirector};
pub use parse::parse_user_prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioCaption;

/// Six-category emotion taxonomy used across the whole pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Calm,
    Excitement,
    Confusion,
    Sadness,
    Surprise,
    Anger,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Calm,
        Emotion::Excitement,
        Emotion::Confusion,
        Emotion::Sadness,
        Emotion::Surprise,
        Emotion::Anger,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Emotion::Calm => "calm",
            Emotion::Excitement => "excitement",
            Emotion::Confusion => "confusion",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
            Emotion::Anger => "anger",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intensity {
    Low,
    Medium,
    High,
}

impl Intensity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Intensity::Low => "low",
            Intensity::Medium => "medium",
            Intensity::High => "high",
        }
    }

    /// Expression modulation factor used by rendering backends.
    pub fn factor(&self) -> f64 {
        match self {
            Intensity::Low => 0.5,
            Intensity::Medium => 0.75,
            Intensity::High => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraOp {
    Static,
    PanLeft,
    PanRight,
    ZoomIn,
    ZoomOut,
}

impl CameraOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            CameraOp::Static => "static",
            CameraOp::PanLeft => "pan_left",
            CameraOp::PanRight => "pan_right",
            CameraOp::ZoomIn => "zoom_in",
            CameraOp::ZoomOut => "zoom_out",
        }
    }

    /// Ops that cannot both be honored in one storyline.
    pub fn contradicts(&self, other: CameraOp) -> bool {
        matches!(
            (self, other),
            (CameraOp::PanLeft, CameraOp::PanRight)
                | (CameraOp::PanRight, CameraOp::PanLeft)
                | (CameraOp::ZoomIn, CameraOp::ZoomOut)
                | (CameraOp::ZoomOut, CameraOp::ZoomIn)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageStyle {
    Photoreal,
    Cartoon,
    Anime,
    Animal,
    Other,
}

impl ImageStyle {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImageStyle::Photoreal => "photoreal",
            ImageStyle::Cartoon => "cartoon",
            ImageStyle::Anime => "anime",
            ImageStyle::Animal => "animal",
            ImageStyle::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framing {
    FullBody,
    HalfBody,
    Face,
}

/// Structured description of the reference image (normally produced by an
/// external captioner; a heuristic stand-in exists in the pipeline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageCaption {
    pub subject: String,
    pub style: ImageStyle,
    pub framing: Framing,
    pub background: String,
}

/// A timeline segment: `value` holds on [start_s, end_s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span<T> {
    pub start_s: f64,
    pub end_s: f64,
    pub value: T,
}

impl<T> Span<T> {
    pub fn new(start_s: f64, end_s: f64, value: T) -> Self {
        Self { start_s, end_s, value }
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Global semantic plan: every timeline covers [0, duration] with no gaps
/// or overlaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Storyline {
    pub duration_s: f64,
    pub character_features: String,
    pub background_layout: String,
    pub visual_style: String,
    pub actions: Vec<Span<String>>,
    pub camera_plan: Vec<Span<CameraOp>>,
    pub emotion_track: Vec<Span<(Emotion, Intensity)>>,
    pub unified_prompt: String,
}

/// The storyline restricted to one sub-clip window, plus dominant-value
/// summaries for quick consumption by a generation backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPlan {
    pub clip_index: usize,
    pub window: (f64, f64),
    pub emotion: Emotion,
    pub intensity: Intensity,
    /// Distinct action tags active in the window, in timeline order.
    pub actions: Vec<String>,
    /// Camera op covering the largest fraction of the window.
    pub camera_op: CameraOp,
    pub action_segments: Vec<Span<String>>,
    pub camera_segments: Vec<Span<CameraOp>>,
    pub emotion_segments: Vec<Span<(Emotion, Intensity)>>,
    pub local_prompt: String,
}

/// Parsed user prompt. The parsed fields are derived from `raw` by the
/// documented keyword grammar (see [`parse_user_prompt`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPrompt {
    pub raw: String,
    pub parsed_emotion: Option<(Emotion, Intensity)>,
    pub parsed_actions: Vec<String>,
    pub parsed_camera: Vec<CameraOp>,
    /// True when the prompt contains an explicit shift directive
    /// ("then", "later", "shift", ...), which permits a second-half
    /// emotion change sourced from the audio caption.
    pub shift_directive: bool,
}

impl UserPrompt {
    pub fn empty() -> Self {
        UserPrompt {
            raw: String::new(),
            parsed_emotion: None,
            parsed_actions: Vec::new(),
            parsed_camera: Vec::new(),
            shift_directive: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum DirectorError {
    #[error("duration must be positive, got {0}")]
    BadDuration(f64),
    #[error("windows do not partition [0, {duration}]: {detail}")]
    BadWindows { duration: f64, detail: String },
    #[error("storyline violates invariants: {}", violations.join("; "))]
    InvalidStoryline { violations: Vec<String> },
    #[error("external director response is not valid JSON: {0}")]
    MalformedResponse(String),
    #[error("external director transport failed: {0}")]
    Transport(String),
}

const DEFAULT_ACTION: &str = "talking";
const TIME_EPS: f64 = 1e-9;

/// Field-wise priority merge (user prompt, then audio caption, then image
/// caption, then documented defaults) into a full storyline.
///
/// Defaults: emotion calm/medium, camera static, action "talking",
/// subject "a person", background "plain background", style photoreal.
/// When both the user and the audio specify different emotions, the
/// user's wins for the whole duration unless the prompt carries an
/// explicit shift directive, in which case the audio's emotion occupies
/// the second half.
pub fn compose_storyline(
    prompt: &UserPrompt,
    audio: Option<&AudioCaption>,
    image: Option<&ImageCaption>,
    duration_s: f64,
) -> Result<Storyline, DirectorError> {
    if !(duration_s > 0.0) {
        return Err(DirectorError::BadDuration(duration_s));
    }

    let character_features = image
        .map(|i| i.subject.clone())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "a person".to_string());
    let background_layout = image
        .map(|i| i.background.clone())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "plain background".to_string());
    let visual_style = image
        .map(|i| i.style.as_str().to_string())
        .unwrap_or_else(|| ImageStyle::Photoreal.as_str().to_string());

    // actions: user's parsed tags laid out evenly, else the default tag
    let action_tags: Vec<String> = if prompt.parsed_actions.is_empty() {
        vec![DEFAULT_ACTION.to_string()]
    } else {
        prompt.parsed_actions.clone()
    };
    let actions = spread_evenly(&action_tags, duration_s);

    // camera: contradictions already resolved at parse time (first wins)
    let camera_ops: Vec<CameraOp> = if prompt.parsed_camera.is_empty() {
        vec![CameraOp::Static]
    } else {
        prompt.parsed_camera.clone()
    };
    let camera_plan = spread_evenly(&camera_ops, duration_s);

    // emotion: user > audio > default, with the optional second-half shift
    let user_emotion = prompt.parsed_emotion;
    let audio_emotion = audio.map(|a| (a.emotion, a.intensity));
    let emotion_track = match (user_emotion, audio_emotion) {
        (Some(u), Some(a)) if u.0 != a.0 && prompt.shift_directive => vec![
            Span::new(0.0, duration_s / 2.0, u),
            Span::new(duration_s / 2.0, duration_s, a),
        ],
        (Some(u), _) => vec![Span::new(0.0, duration_s, u)],
        (None, Some(a)) => vec![Span::new(0.0, duration_s, a)],
        (None, None) => vec![Span::new(0.0, duration_s, (Emotion::Calm, Intensity::Medium))],
    };

    let mut storyline = Storyline {
        duration_s,
        character_features,
        background_layout,
        visual_style,
        actions,
        camera_plan,
        emotion_track,
        unified_prompt: String::new(),
    };
    storyline.unified_prompt = render_prompt(&storyline);
    Ok(storyline)
}

fn spread_evenly<T: Clone>(values: &[T], duration_s: f64) -> Vec<Span<T>> {
    let n = values.len().max(1);
    values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let start = duration_s * k as f64 / n as f64;
            let end = if k + 1 == n { duration_s } else { duration_s * (k + 1) as f64 / n as f64 };
            Span::new(start, end, v.clone())
        })
        .collect()
}

/// Render the storyline into its unified textual prompt. Slot order is
/// fixed (character, background, style, actions, camera, emotion) so equal
/// storylines render byte-identically.
pub fn render_prompt(s: &Storyline) -> String {
    let actions = s
        .actions
        .iter()
        .map(|sp| format!("{} [{:.2}s-{:.2}s]", sp.value, sp.start_s, sp.end_s))
        .collect::<Vec<_>>()
        .join("; ");
    let camera = s
        .camera_plan
        .iter()
        .map(|sp| format!("{} [{:.2}s-{:.2}s]", sp.value.as_str(), sp.start_s, sp.end_s))
        .collect::<Vec<_>>()
        .join("; ");
    let emotion = s
        .emotion_track
        .iter()
        .map(|sp| {
            format!("{} ({}) [{:.2}s-{:.2}s]", sp.value.0.as_str(), sp.value.1.as_str(), sp.start_s, sp.end_s)
        })
        .collect::<Vec<_>>()
        .join("; ");
    format!(
        "Character: {}. Background: {}. Style: {}. Actions: {}. Camera: {}. Emotion: {}.",
        s.character_features, s.background_layout, s.visual_style, actions, camera, emotion
    )
}

fn render_local_prompt(plan_window: (f64, f64), s: &Storyline, emotion: (Emotion, Intensity), actions: &[String], camera: CameraOp) -> String {
    format!(
        "Window: [{:.2}s-{:.2}s]. Character: {}. Background: {}. Style: {}. Actions: {}. Camera: {}. Emotion: {} ({}).",
        plan_window.0,
        plan_window.1,
        s.character_features,
        s.background_layout,
        s.visual_style,
        actions.join(", "),
        camera.as_str(),
        emotion.0.as_str(),
        emotion.1.as_str(),
    )
}

/// Check every invariant of a storyline; used on external backend
/// responses before they are accepted.
pub fn validate_storyline(s: &Storyline) -> Result<(), DirectorError> {
    let mut violations = Vec::new();
    if !(s.duration_s > 0.0) {
        violations.push(format!("duration_s must be positive, got {}", s.duration_s));
    }
    check_timeline(&s.actions, s.duration_s, "actions", &mut violations);
    check_timeline(&s.camera_plan, s.duration_s, "camera_plan", &mut violations);
    check_timeline(&s.emotion_track, s.duration_s, "emotion_track", &mut violations);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(DirectorError::InvalidStoryline { violations })
    }
}

fn check_timeline<T>(spans: &[Span<T>], duration: f64, name: &str, out: &mut Vec<String>) {
    if spans.is_empty() {
        out.push(format!("{name} timeline is empty"));
        return;
    }
    if spans[0].start_s.abs() > TIME_EPS {
        out.push(format!("{name} does not start at 0 (starts at {})", spans[0].start_s));
    }
    for w in spans.windows(2) {
        let gap = w[1].start_s - w[0].end_s;
        if gap > TIME_EPS {
            out.push(format!("{name} has a gap at {}", w[0].end_s));
        } else if gap < -TIME_EPS {
            out.push(format!("{name} has overlapping intervals at {}", w[1].start_s));
        }
    }
    for sp in spans {
        if sp.end_s - sp.start_s <= 0.0 {
            out.push(format!("{name} has an empty interval at {}", sp.start_s));
        }
    }
    let end = spans.last().unwrap().end_s;
    if (end - duration).abs() > TIME_EPS {
        out.push(format!("{name} ends at {end}, expected {duration}"));
    }
}

/// Restrict the storyline to each window. An entry spanning a boundary
/// appears in both plans, clipped to each window; the dominant emotion of
/// a window is the one covering the largest fraction of it (ties to the
/// earlier entry).
pub fn decompose(storyline: &Storyline, windows: &[(f64, f64)]) -> Result<Vec<LocalPlan>, DirectorError> {
    validate_windows(windows, storyline.duration_s)?;
    let mut plans = Vec::with_capacity(windows.len());
    for (k, &(ws, we)) in windows.iter().enumerate() {
        let action_segments = clip_timeline(&storyline.actions, ws, we);
        let camera_segments = clip_timeline(&storyline.camera_plan, ws, we);
        let emotion_segments = clip_timeline(&storyline.emotion_track, ws, we);

        let emotion = dominant(&emotion_segments).unwrap_or((Emotion::Calm, Intensity::Medium));
        let camera_op = dominant(&camera_segments).unwrap_or(CameraOp::Static);
        let mut actions = Vec::new();
        for seg in &action_segments {
            if !actions.contains(&seg.value) {
                actions.push(seg.value.clone());
            }
        }
        let local_prompt = render_local_prompt((ws, we), storyline, emotion, &actions, camera_op);
        plans.push(LocalPlan {
            clip_index: k,
            window: (ws, we),
            emotion: emotion.0,
            intensity: emotion.1,
            actions,
            camera_op,
            action_segments,
            camera_segments,
            emotion_segments,
            local_prompt,
        });
    }
    Ok(plans)
}

fn validate_windows(windows: &[(f64, f64)], duration: f64) -> Result<(), DirectorError> {
    let err = |detail: String| DirectorError::BadWindows { duration, detail };
    if windows.is_empty() {
        return Err(err("no windows".into()));
    }
    if windows[0].0.abs() > TIME_EPS {
        return Err(err(format!("first window starts at {}, not 0", windows[0].0)));
    }
    for (k, w) in windows.iter().enumerate() {
        if w.1 - w.0 <= TIME_EPS {
            return Err(err(format!("window {k} is empty or inverted")));
        }
    }
    for k in 1..windows.len() {
        let gap = windows[k].0 - windows[k - 1].1;
        if gap > TIME_EPS {
            return Err(err(format!("gap between windows {} and {k}", k - 1)));
        }
        if gap < -TIME_EPS {
            return Err(err(format!("overlap between windows {} and {k}", k - 1)));
        }
    }
    let end = windows.last().unwrap().1;
    if (end - duration).abs() > TIME_EPS {
        return Err(err(format!("last window ends at {end}, expected {duration}")));
    }
    Ok(())
}

/// Entries overlapping [ws, we), clipped to the window.
fn clip_timeline<T: Clone>(spans: &[Span<T>], ws: f64, we: f64) -> Vec<Span<T>> {
    spans
        .iter()
        .filter(|sp| sp.start_s < we - TIME_EPS && sp.end_s > ws + TIME_EPS)
        .map(|sp| Span::new(sp.start_s.max(ws), sp.end_s.min(we), sp.value.clone()))
        .collect()
}

fn dominant<T: Clone>(segments: &[Span<T>]) -> Option<T> {
    let mut best: Option<(f64, &Span<T>)> = None;
    for sp in segments {
        let cov = sp.duration();
        let better = match &best {
            None => true,
            Some((bc, _)) => cov > bc + TIME_EPS, // ties keep the earlier entry
        };
        if better {
            best = Some((cov, sp));
        }
    }
    best.map(|(_, sp)| sp.value.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caption(emotion: Emotion, intensity: Intensity) -> AudioCaption {
        AudioCaption { transcript: String::new(), emotion, intensity, speech_rate: 20.0 }
    }

    #[test]
    fn user_emotion_beats_audio_caption() {
        let prompt = parse_user_prompt("speak with anger");
        let s = compose_storyline(&prompt, Some(&caption(Emotion::Calm, Intensity::Low)), None, 10.0).unwrap();
        assert_eq!(s.emotion_track.len(), 1);
        assert_eq!(s.emotion_track[0].value.0, Emotion::Anger);
    }

    #[test]
    fn audio_caption_fills_missing_emotion() {
        let prompt = UserPrompt::empty();
        let s = compose_storyline(&prompt, Some(&caption(Emotion::Sadness, Intensity::High)), None, 10.0).unwrap();
        assert_eq!(s.emotion_track[0].value, (Emotion::Sadness, Intensity::High));
    }

    #[test]
    fn defaults_when_nothing_specified() {
        let s = compose_storyline(&UserPrompt::empty(), None, None, 8.0).unwrap();
        assert_eq!(s.emotion_track[0].value, (Emotion::Calm, Intensity::Medium));
        assert_eq!(s.camera_plan[0].value, CameraOp::Static);
        assert_eq!(s.actions[0].value, "talking");
        assert_eq!(s.character_features, "a person");
        validate_storyline(&s).unwrap();
    }

    #[test]
    fn shift_directive_appends_audio_emotion_second_half() {
        let with_shift = parse_user_prompt("start with anger, then calm down");
        let s = compose_storyline(&with_shift, Some(&caption(Emotion::Sadness, Intensity::Low)), None, 12.0).unwrap();
        assert_eq!(s.emotion_track.len(), 2);
        assert_eq!(s.emotion_track[0].value.0, Emotion::Anger);
        assert_eq!(s.emotion_track[1].value.0, Emotion::Sadness);
        assert!((s.emotion_track[0].end_s - 6.0).abs() < 1e-12);

        let no_shift = parse_user_prompt("speak with anger");
        let s2 = compose_storyline(&no_shift, Some(&caption(Emotion::Sadness, Intensity::Low)), None, 12.0).unwrap();
        assert_eq!(s2.emotion_track.len(), 1);
    }

    #[test]
    fn compose_is_deterministic() {
        let prompt = parse_user_prompt("very excited, pan left while waving");
        let a = compose_storyline(&prompt, None, None, 10.0).unwrap();
        let b = compose_storyline(&prompt, None, None, 10.0).unwrap();
        assert_eq!(a.unified_prompt, b.unified_prompt);
        assert_eq!(a, b);
    }

    #[test]
    fn priority_merge_touches_only_emotion_slots() {
        let base = compose_storyline(&UserPrompt::empty(), None, None, 10.0).unwrap();
        let angry = compose_storyline(&parse_user_prompt("angry"), None, None, 10.0).unwrap();
        assert_eq!(base.actions, angry.actions);
        assert_eq!(base.camera_plan, angry.camera_plan);
        assert_eq!(base.character_features, angry.character_features);
        assert_eq!(base.background_layout, angry.background_layout);
        assert_eq!(angry.emotion_track[0].value.0, Emotion::Anger);
    }

    #[test]
    fn decompose_single_window_is_identity() {
        let s = compose_storyline(&parse_user_prompt("waving, pan right"), None, None, 10.0).unwrap();
        let plans = decompose(&s, &[(0.0, 10.0)]).unwrap();
        assert_eq!(plans.len(), 1);
        assert_eq!(plans[0].action_segments, s.actions);
        assert_eq!(plans[0].camera_segments, s.camera_plan);
        assert_eq!(plans[0].emotion_segments, s.emotion_track);
    }

    // brute-force interval assignment oracle: every (span, window) pair
    // with positive overlap must appear exactly once, clipped
    fn oracle_clipped<T: Clone + PartialEq + std::fmt::Debug>(
        spans: &[Span<T>],
        windows: &[(f64, f64)],
        plans: &[Vec<Span<T>>],
    ) {
        for (k, &(ws, we)) in windows.iter().enumerate() {
            let mut expected = Vec::new();
            for sp in spans {
                let lo = sp.start_s.max(ws);
                let hi = sp.end_s.min(we);
                if hi - lo > 1e-9 {
                    expected.push(Span::new(lo, hi, sp.value.clone()));
                }
            }
            assert_eq!(plans[k], expected, "window {k}");
        }
    }

    #[test]
    fn emotion_shift_assignment_matches_oracle() {
        let mut s = compose_storyline(&UserPrompt::empty(), None, None, 15.0).unwrap();
        s.emotion_track = vec![
            Span::new(0.0, 10.0, (Emotion::Anger, Intensity::High)),
            Span::new(10.0, 15.0, (Emotion::Calm, Intensity::Low)),
        ];
        let windows = [(0.0, 5.0), (5.0, 10.0), (10.0, 15.0)];
        let plans = decompose(&s, &windows).unwrap();
        assert_eq!(plans[0].emotion, Emotion::Anger);
        assert_eq!(plans[1].emotion, Emotion::Anger);
        assert_eq!(plans[2].emotion, Emotion::Calm);
        let clipped: Vec<_> = plans.iter().map(|p| p.emotion_segments.clone()).collect();
        oracle_clipped(&s.emotion_track, &windows, &clipped);
    }

    #[test]
    fn boundary_spanning_camera_appears_clipped_in_both() {
        let mut s = compose_storyline(&UserPrompt::empty(), None, None, 10.0).unwrap();
        s.camera_plan = vec![
            Span::new(0.0, 4.0, CameraOp::Static),
            Span::new(4.0, 6.0, CameraOp::PanLeft),
            Span::new(6.0, 10.0, CameraOp::Static),
        ];
        let windows = [(0.0, 5.0), (5.0, 10.0)];
        let plans = decompose(&s, &windows).unwrap();
        let pan0: Vec<_> = plans[0].camera_segments.iter().filter(|sp| sp.value == CameraOp::PanLeft).collect();
        let pan1: Vec<_> = plans[1].camera_segments.iter().filter(|sp| sp.value == CameraOp::PanLeft).collect();
        assert_eq!(pan0.len(), 1);
        assert_eq!(pan1.len(), 1);
        assert_eq!((pan0[0].start_s, pan0[0].end_s), (4.0, 5.0));
        assert_eq!((pan1[0].start_s, pan1[0].end_s), (5.0, 6.0));
        let clipped: Vec<_> = plans.iter().map(|p| p.camera_segments.clone()).collect();
        oracle_clipped(&s.camera_plan, &windows, &clipped);
    }

    #[test]
    fn decompose_rejects_gaps_and_overlaps() {
        let s = compose_storyline(&UserPrompt::empty(), None, None, 10.0).unwrap();
        assert!(matches!(decompose(&s, &[(0.0, 4.0), (5.0, 10.0)]), Err(DirectorError::BadWindows { .. })));
        assert!(matches!(decompose(&s, &[(0.0, 6.0), (5.0, 10.0)]), Err(DirectorError::BadWindows { .. })));
        assert!(matches!(decompose(&s, &[(0.0, 6.0)]), Err(DirectorError::BadWindows { .. })));
    }

    // decompose is lossless: merging every plan's clipped intervals
    // reproduces each storyline timeline exactly
    #[test]
    fn decompose_coverage_is_lossless() {
        let prompt = parse_user_prompt("turn and wave, then nod; pan left; very sad");
        let s = compose_storyline(&prompt, Some(&caption(Emotion::Excitement, Intensity::High)), None, 20.0).unwrap();
        let windows = [(0.0, 3.5), (3.5, 9.0), (9.0, 14.0), (14.0, 20.0)];
        let plans = decompose(&s, &windows).unwrap();

        fn merged<T: Clone + PartialEq>(plans: &[LocalPlan], pick: impl Fn(&LocalPlan) -> &[Span<T>]) -> Vec<Span<T>> {
            let mut all: Vec<Span<T>> = Vec::new();
            for p in plans {
                for sp in pick(p) {
                    match all.last_mut() {
                        Some(last) if last.value == sp.value && (last.end_s - sp.start_s).abs() < 1e-9 => {
                            last.end_s = sp.end_s;
                        }
                        _ => all.push(sp.clone()),
                    }
                }
            }
            all
        }

        assert_eq!(merged(&plans, |p| &p.action_segments), s.actions);
        assert_eq!(merged(&plans, |p| &p.camera_segments), s.camera_plan);
        assert_eq!(merged(&plans, |p| &p.emotion_segments), s.emotion_track);
    }

    #[test]
    fn validate_storyline_reports_all_violations() {
        let mut s = compose_storyline(&UserPrompt::empty(), None, None, 10.0).unwrap();
        s.emotion_track = vec![]; // missing
        s.actions = vec![Span::new(0.0, 4.0, "talking".into()), Span::new(5.0, 10.0, "waving".into())]; // gap
        match validate_storyline(&s) {
            Err(DirectorError::InvalidStoryline { violations }) => {
                assert!(violations.iter().any(|v| v.contains("emotion_track")));
                assert!(violations.iter().any(|v| v.contains("gap")));
            }
            other => panic!("expected InvalidStoryline, got {other:?}"),
        }
    }
}
