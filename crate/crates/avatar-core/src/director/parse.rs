//! Keyword grammar for user prompts. Deliberately small and documented:
//! this is deterministic keyword spotting, not language understanding.
//! The tables below are the whole grammar.

use super::{CameraOp, Emotion, Intensity, UserPrompt};

/// Emotion keywords (matched on word boundaries after normalization).
pub const EMOTION_KEYWORDS: &[(&str, Emotion)] = &[
    ("calm", Emotion::Calm),
    ("calmly", Emotion::Calm),
    ("peaceful", Emotion::Calm),
    ("serene", Emotion::Calm),
    ("excited", Emotion::Excitement),
    ("excitement", Emotion::Excitement),
    ("excitedly", Emotion::Excitement),
    ("thrilled", Emotion::Excitement),
    ("energetic", Emotion::Excitement),
    ("confused", Emotion::Confusion),
    ("confusion", Emotion::Confusion),
    ("puzzled", Emotion::Confusion),
    ("bewildered", Emotion::Confusion),
    ("sad", Emotion::Sadness),
    ("sadness", Emotion::Sadness),
    ("sadly", Emotion::Sadness),
    ("sorrowful", Emotion::Sadness),
    ("melancholy", Emotion::Sadness),
    ("surprised", Emotion::Surprise),
    ("surprise", Emotion::Surprise),
    ("astonished", Emotion::Surprise),
    ("shocked", Emotion::Surprise),
    ("angry", Emotion::Anger),
    ("anger", Emotion::Anger),
    ("angrily", Emotion::Anger),
    ("furious", Emotion::Anger),
];

/// Intensity modifiers; absent modifier means medium.
pub const INTENSITY_KEYWORDS: &[(&str, Intensity)] = &[
    ("slightly", Intensity::Low),
    ("mildly", Intensity::Low),
    ("faintly", Intensity::Low),
    ("very", Intensity::High),
    ("extremely", Intensity::High),
    ("intensely", Intensity::High),
    ("deeply", Intensity::High),
];

/// Camera phrases (normalized substring match).
pub const CAMERA_KEYWORDS: &[(&str, CameraOp)] = &[
    ("pan left", CameraOp::PanLeft),
    ("pans left", CameraOp::PanLeft),
    ("panning left", CameraOp::PanLeft),
    ("pan to the left", CameraOp::PanLeft),
    ("pan right", CameraOp::PanRight),
    ("pans right", CameraOp::PanRight),
    ("panning right", CameraOp::PanRight),
    ("pan to the right", CameraOp::PanRight),
    ("zoom in", CameraOp::ZoomIn),
    ("zooms in", CameraOp::ZoomIn),
    ("zooming in", CameraOp::ZoomIn),
    ("zoom out", CameraOp::ZoomOut),
    ("zooms out", CameraOp::ZoomOut),
    ("zooming out", CameraOp::ZoomOut),
    ("static camera", CameraOp::Static),
    ("fixed camera", CameraOp::Static),
    ("static shot", CameraOp::Static),
];

/// Action stems: the tag fires when every stem starts a word somewhere in
/// the normalized prompt.
pub const ACTION_STEMS: &[(&[&str], &str)] = &[
    (&["rais", "hand"], "raising_hands"),
    (&["shak", "head"], "head_shaking"),
    (&["turn"], "turning"),
    (&["nod"], "nodding"),
    (&["wav"], "waving"),
    (&["point"], "pointing"),
    (&["talk"], "talking"),
    (&["sing"], "singing"),
];

/// Words that permit a second-half emotion shift.
pub const SHIFT_DIRECTIVES: &[&str] = &["then", "later", "gradually", "shift", "shifting", "becoming", "becomes"];

fn normalize(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len() + 2);
    out.push(' ');
    for c in raw.chars() {
        if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
        } else {
            out.push(' ');
        }
    }
    out.push(' ');
    // collapse runs of spaces so multiword phrases match
    let mut collapsed = String::with_capacity(out.len());
    let mut prev_space = false;
    for c in out.chars() {
        if c == ' ' {
            if !prev_space {
                collapsed.push(' ');
            }
            prev_space = true;
        } else {
            collapsed.push(c);
            prev_space = false;
        }
    }
    collapsed
}

fn find_word(text: &str, word: &str) -> Option<usize> {
    text.find(&format!(" {word} "))
}

/// Parse a raw prompt against the keyword tables. Earliest occurrence
/// decides the emotion; camera ops are collected in occurrence order with
/// contradictions resolved first-occurrence-wins; action tags are ordered
/// by first stem position.
pub fn parse_user_prompt(raw: &str) -> UserPrompt {
    let text = normalize(raw);

    // emotion: earliest keyword wins
    let mut emotion: Option<(usize, Emotion)> = None;
    for (kw, e) in EMOTION_KEYWORDS {
        if let Some(pos) = find_word(&text, kw) {
            if emotion.is_none_or(|(best, _)| pos < best) {
                emotion = Some((pos, *e));
            }
        }
    }
    let intensity = INTENSITY_KEYWORDS
        .iter()
        .filter_map(|(kw, i)| find_word(&text, kw).map(|pos| (pos, *i)))
        .min_by_key(|&(pos, _)| pos)
        .map(|(_, i)| i)
        .unwrap_or(Intensity::Medium);
    let parsed_emotion = emotion.map(|(_, e)| (e, intensity));

    // camera: occurrence order, drop ops contradicting an earlier one
    let mut camera_hits: Vec<(usize, CameraOp)> = CAMERA_KEYWORDS
        .iter()
        .filter_map(|(kw, op)| find_word(&text, kw).map(|pos| (pos, *op)))
        .collect();
    camera_hits.sort_by_key(|&(pos, _)| pos);
    let mut parsed_camera: Vec<CameraOp> = Vec::new();
    for (_, op) in camera_hits {
        if parsed_camera.contains(&op) {
            continue;
        }
        if parsed_camera.iter().any(|prev| prev.contradicts(op)) {
            continue; // first occurrence wins
        }
        parsed_camera.push(op);
    }

    // actions: all stems present, ordered by first stem position
    let mut action_hits: Vec<(usize, &str)> = Vec::new();
    for (stems, tag) in ACTION_STEMS {
        let positions: Vec<usize> = stems.iter().filter_map(|s| text.find(&format!(" {s}"))).collect();
        if positions.len() == stems.len() {
            action_hits.push((positions.into_iter().min().unwrap(), tag));
        }
    }
    action_hits.sort_by_key(|&(pos, _)| pos);
    let mut parsed_actions: Vec<String> = Vec::new();
    for (_, tag) in action_hits {
        if !parsed_actions.iter().any(|t| t == tag) {
            parsed_actions.push(tag.to_string());
        }
    }

    let shift_directive = SHIFT_DIRECTIVES.iter().any(|d| find_word(&text, d).is_some());

    UserPrompt { raw: raw.to_string(), parsed_emotion, parsed_actions, parsed_camera, shift_directive }
}
