//! Deterministic procedural avatar backend.
//!
//! Renders a stylized face (background, skin disk, eyes, brows, mouth
//! ellipse) from a small parameter vector. Every color is an exact palette
//! value with no antialiasing, so a rendered frame can be decoded back
//! into its parameters ([`recover_params`]); that recovery is what lets
//! sub-clips blend smoothly away from anchor frames they only know as
//! pixels.

use serde::{Deserialize, Serialize};

use crate::conditioning::{MouthBox, MouthBoxes};
use crate::director::{CameraOp, Emotion, Intensity, Span};
use crate::media::{Clip, Frame};

use super::{BackendError, GenerationBackend, GenerationRequest, Guidance};

// Face geometry as fractions of the face radius r (see render()).
const FACE_CY_FRAC: f64 = 0.45; // face center y as fraction of height
const BASE_RADIUS_FRAC: f64 = 0.28; // of min(width, height)
const YAW_SHIFT_FRAC: f64 = 0.06; // horizontal shift per unit yaw, fraction of width
const MOUTH_DY: f64 = 0.45;
const MOUTH_HALF_W: f64 = 0.28;
const MOUTH_MIN_HALF_H: f64 = 0.03;
const MOUTH_APERTURE_HALF_H: f64 = 0.27;
const EYE_DX: f64 = 0.38;
const EYE_DY: f64 = -0.18;
const EYE_RADIUS: f64 = 0.09;
const BROW_HALF_W: f64 = 0.14;
const BROW_HALF_H: f64 = 0.04;
const BROW_BASE_DY: f64 = 0.36; // above center, plus raise * BROW_RAISE_SPAN
const BROW_RAISE_SPAN: f64 = 0.12;
// Brows slope downward toward the temples. Besides looking less robotic,
// the slant makes different columns cover different pixel rows, which is
// what gives recover_params sub-pixel brow accuracy.
const BROW_SLOPE: f64 = 0.25;

/// How long expression changes ease in at emotion-segment boundaries.
const EMOTION_RAMP_S: f64 = 0.5;
/// Sub-clip frames over which the envelope-driven mouth eases into the
/// anchor frames' recovered aperture.
const APERTURE_EASE_FRAMES: u64 = 3;

/// Exact colors used by the renderer, derived deterministically from the
/// reference image and made pairwise distinct so renders are decodable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub skin: [u8; 3],
    pub background: [u8; 3],
    pub mouth: [u8; 3],
    pub eye: [u8; 3],
    pub brow: [u8; 3],
}

/// Derive the render palette from a reference image: skin from the mean
/// color of the central disk (brightened into [64, 255]), background from
/// the mean border color (slightly darkened), feature colors as fixed
/// darkenings of skin.
pub fn palette_from_reference(reference: &Frame) -> Palette {
    let (w, h) = (reference.width(), reference.height());
    let (cx, cy) = (w as f64 / 2.0, h as f64 * FACE_CY_FRAC);
    let r = 0.25 * w.min(h) as f64;

    let mut face_acc = [0u64; 3];
    let mut face_n = 0u64;
    let mut border_acc = [0u64; 3];
    let mut border_n = 0u64;
    for y in 0..h {
        for x in 0..w {
            let px = reference.get(x, y);
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            if dx * dx + dy * dy <= r * r {
                for c in 0..3 {
                    face_acc[c] += px[c] as u64;
                }
                face_n += 1;
            }
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                for c in 0..3 {
                    border_acc[c] += px[c] as u64;
                }
                border_n += 1;
            }
        }
    }
    let mean = |acc: [u64; 3], n: u64| {
        let div = |v: u64| v.checked_div(n).unwrap_or(128) as u8;
        [div(acc[0]), div(acc[1]), div(acc[2])]
    };
    let face_mean = mean(face_acc, face_n);
    let border_mean = mean(border_acc, border_n);

    let skin = [
        64 + (face_mean[0] as f64 * 0.75).round() as u8,
        64 + (face_mean[1] as f64 * 0.75).round() as u8,
        64 + (face_mean[2] as f64 * 0.75).round() as u8,
    ];
    let mouth = [skin[0] / 4, skin[1] / 4, skin[2] / 4];
    let brow = [skin[0] / 6, skin[1] / 6, skin[2] / 6];
    let eye = [skin[0] / 8, skin[1] / 8, skin[2] / 8];
    let mut background = [
        (border_mean[0] as f64 * 0.85).round() as u8,
        (border_mean[1] as f64 * 0.85).round() as u8,
        (border_mean[2] as f64 * 0.85).round() as u8,
    ];
    // background must differ from every paint color for exact decoding
    while background == skin || background == mouth || background == brow || background == eye {
        background[2] = background[2].wrapping_add(1);
    }
    Palette { skin, background, mouth, eye, brow }
}

/// The full render state of one frame. Rendering is a pure function of
/// (params, frame size).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvatarParams {
    /// Face center as fractions of (width, height).
    pub face_center: (f64, f64),
    /// Face radius as a fraction of min(width, height).
    pub face_radius: f64,
    pub skin: [u8; 3],
    pub background: [u8; 3],
    pub mouth: [u8; 3],
    pub eye: [u8; 3],
    pub brow: [u8; 3],
    /// Mouth opening in [0, 1].
    pub mouth_aperture: f64,
    /// Horizontal head turn in [-1, 1]; shifts the face sideways.
    pub head_yaw: f64,
    /// Brow height in [0, 1]; the emotion channel of the render.
    pub brow_raise: f64,
}

impl AvatarParams {
    pub fn neutral(palette: &Palette) -> Self {
        AvatarParams {
            face_center: (0.5, FACE_CY_FRAC),
            face_radius: BASE_RADIUS_FRAC,
            skin: palette.skin,
            background: palette.background,
            mouth: palette.mouth,
            eye: palette.eye,
            brow: palette.brow,
            mouth_aperture: 0.0,
            head_yaw: 0.0,
            brow_raise: 0.4,
        }
    }

    /// Clamp every field into its renderable range (keeps the face fully
    /// inside the frame with background-colored corners).
    pub fn normalized(mut self) -> Self {
        self.face_center.0 = self.face_center.0.clamp(0.40, 0.60);
        self.face_center.1 = self.face_center.1.clamp(0.40, 0.50);
        self.face_radius = self.face_radius.clamp(0.15, 0.34);
        self.mouth_aperture = self.mouth_aperture.clamp(0.0, 1.0);
        self.head_yaw = self.head_yaw.clamp(-1.0, 1.0);
        self.brow_raise = self.brow_raise.clamp(0.0, 1.0);
        self
    }

    fn lerp(a: &AvatarParams, b: &AvatarParams, u: f64) -> AvatarParams {
        let mix = |x: f64, y: f64| x + (y - x) * u;
        let mix_color = |x: [u8; 3], y: [u8; 3]| {
            [
                mix(x[0] as f64, y[0] as f64).round() as u8,
                mix(x[1] as f64, y[1] as f64).round() as u8,
                mix(x[2] as f64, y[2] as f64).round() as u8,
            ]
        };
        AvatarParams {
            face_center: (mix(a.face_center.0, b.face_center.0), mix(a.face_center.1, b.face_center.1)),
            face_radius: mix(a.face_radius, b.face_radius),
            skin: mix_color(a.skin, b.skin),
            background: mix_color(a.background, b.background),
            mouth: mix_color(a.mouth, b.mouth),
            eye: mix_color(a.eye, b.eye),
            brow: mix_color(a.brow, b.brow),
            mouth_aperture: mix(a.mouth_aperture, b.mouth_aperture),
            head_yaw: mix(a.head_yaw, b.head_yaw),
            brow_raise: mix(a.brow_raise, b.brow_raise),
        }
    }

    /// Effective face center x in pixels (yaw folded in).
    fn cx(&self, width: u32) -> f64 {
        (self.face_center.0 + YAW_SHIFT_FRAC * self.head_yaw) * width as f64
    }

    fn cy(&self, height: u32) -> f64 {
        self.face_center.1 * height as f64
    }

    fn radius(&self, width: u32, height: u32) -> f64 {
        self.face_radius * width.min(height) as f64
    }

    /// The fixed mouth search box (maximum mouth extent), in pixels.
    pub fn mouth_box(&self, width: u32, height: u32) -> MouthBox {
        let cx = self.cx(width);
        let cy = self.cy(height);
        let r = self.radius(width, height);
        let mx = cx;
        let my = cy + MOUTH_DY * r;
        let half_w = (MOUTH_HALF_W + 0.04) * r;
        let half_h = (MOUTH_MIN_HALF_H + MOUTH_APERTURE_HALF_H + 0.04) * r;
        let clampx = |v: f64| v.round().clamp(0.0, (width - 1) as f64) as u32;
        let clampy = |v: f64| v.round().clamp(0.0, (height - 1) as f64) as u32;
        MouthBox {
            x0: clampx(mx - half_w),
            y0: clampy(my - half_h),
            x1: clampx(mx + half_w),
            y1: clampy(my + half_h),
            conf: 1.0,
        }
    }
}

/// Render params into a frame; exact palette colors, no antialiasing.
pub fn render(params: &AvatarParams, width: u32, height: u32) -> Frame {
    let p = params.normalized();
    let cx = p.cx(width);
    let cy = p.cy(height);
    let r = p.radius(width, height);

    let mouth_cy = cy + MOUTH_DY * r;
    let mouth_hw = MOUTH_HALF_W * r;
    let mouth_hh = (MOUTH_MIN_HALF_H + MOUTH_APERTURE_HALF_H * p.mouth_aperture) * r;
    let eye_dy = cy + EYE_DY * r;
    let eye_r2 = (EYE_RADIUS * r) * (EYE_RADIUS * r);
    let brow_cy = cy - (BROW_BASE_DY + BROW_RAISE_SPAN * p.brow_raise) * r;

    let mut frame = Frame::filled(width, height, p.background).expect("non-empty frame");
    for y in 0..height {
        for x in 0..width {
            let px = x as f64 + 0.5;
            let py = y as f64 + 0.5;
            let dx = px - cx;
            let dy = py - cy;
            if dx * dx + dy * dy > r * r {
                continue; // background
            }
            let mdx = px - cx;
            let mdy = py - mouth_cy;
            let in_mouth = (mdx / mouth_hw) * (mdx / mouth_hw) + (mdy / mouth_hh) * (mdy / mouth_hh) <= 1.0;
            let color = if in_mouth {
                p.mouth
            } else {
                let mut c = p.skin;
                for side in [-1.0f64, 1.0] {
                    let ex = cx + side * EYE_DX * r;
                    let edx = px - ex;
                    let edy = py - eye_dy;
                    if edx * edx + edy * edy <= eye_r2 {
                        c = p.eye;
                        break;
                    }
                    let brow_y = brow_cy + BROW_SLOPE * side * edx;
                    if edx.abs() <= BROW_HALF_W * r && (py - brow_y).abs() <= BROW_HALF_H * r {
                        c = p.brow;
                        break;
                    }
                }
                c
            };
            frame.set(x, y, color);
        }
    }
    frame
}

/// Decode a rendered frame back into its parameters. Returns None when
/// the frame is not a recognizable render (no face disk against the corner
/// background color, or unreadable colors).
pub fn recover_params(frame: &Frame) -> Option<AvatarParams> {
    let (w, h) = (frame.width(), frame.height());
    let background = frame.get(0, 0);

    let (mut xmin, mut xmax, mut ymin, mut ymax) = (u32::MAX, 0u32, u32::MAX, 0u32);
    for y in 0..h {
        for x in 0..w {
            if frame.get(x, y) != background {
                xmin = xmin.min(x);
                xmax = xmax.max(x);
                ymin = ymin.min(y);
                ymax = ymax.max(y);
            }
        }
    }
    if xmin == u32::MAX {
        return None;
    }
    let cx = (xmin + xmax + 1) as f64 / 2.0;
    let cy = (ymin + ymax + 1) as f64 / 2.0;
    let r = ((xmax - xmin + 1) as f64 + (ymax - ymin + 1) as f64) / 4.0;
    if r < 3.0 {
        return None;
    }

    // skin sample from a feature-free point between the eyes and mouth
    let sx = cx.round().clamp(0.0, (w - 1) as f64) as u32;
    let sy = (cy + 0.05 * r).round().clamp(0.0, (h - 1) as f64) as u32;
    let skin = frame.get(sx, sy);
    if skin == background {
        return None;
    }
    let mouth = [skin[0] / 4, skin[1] / 4, skin[2] / 4];
    let brow = [skin[0] / 6, skin[1] / 6, skin[2] / 6];
    let eye = [skin[0] / 8, skin[1] / 8, skin[2] / 8];

    // mouth aperture from the vertical extent of mouth-colored pixels
    let (mut mymin, mut mymax) = (u32::MAX, 0u32);
    // brow raise from brow pixel mass, measured against the eye pixel
    // mass (both are sub-pixel means, unlike the bbox-derived cy)
    let (mut brow_sum, mut brow_n) = (0.0f64, 0u64);
    let (mut eye_sum, mut eye_n) = (0.0f64, 0u64);
    for y in 0..h {
        for x in 0..w {
            let px = frame.get(x, y);
            if px == mouth {
                mymin = mymin.min(y);
                mymax = mymax.max(y);
            } else if px == brow {
                brow_sum += y as f64 + 0.5;
                brow_n += 1;
            } else if px == eye {
                eye_sum += y as f64 + 0.5;
                eye_n += 1;
            }
        }
    }
    let mouth_aperture = if mymin == u32::MAX {
        0.0
    } else {
        let half_h = (mymax - mymin + 1) as f64 / 2.0;
        ((half_h / r - MOUTH_MIN_HALF_H) / MOUTH_APERTURE_HALF_H).clamp(0.0, 1.0)
    };
    let brow_raise = if brow_n == 0 {
        0.4
    } else {
        let brow_y = brow_sum / brow_n as f64;
        let reference_y = if eye_n > 0 { eye_sum / eye_n as f64 } else { cy + EYE_DY * r };
        // eye_y - brow_y = (BROW_BASE_DY + BROW_RAISE_SPAN * b + EYE_DY) * r
        (((reference_y - brow_y) / r - (BROW_BASE_DY + EYE_DY)) / BROW_RAISE_SPAN).clamp(0.0, 1.0)
    };

    Some(AvatarParams {
        // yaw folds into the recovered center
        face_center: (cx / w as f64, cy / h as f64),
        face_radius: r / w.min(h) as f64,
        skin,
        background,
        mouth,
        eye,
        brow,
        mouth_aperture,
        head_yaw: 0.0,
        brow_raise,
    })
}

/// Brow height for an emotion at an intensity: the documented
/// emotion-to-expression table. Intensity scales the deviation from the
/// calm baseline.
pub fn brow_for(emotion: Emotion, intensity: Intensity) -> f64 {
    let baseline = 0.4;
    let target = match emotion {
        Emotion::Calm => 0.4,
        Emotion::Excitement => 0.8,
        Emotion::Confusion => 0.6,
        Emotion::Sadness => 0.15,
        Emotion::Surprise => 1.0,
        Emotion::Anger => 0.0,
    };
    baseline + (target - baseline) * intensity.factor()
}

fn span_at<T>(spans: &[Span<T>], t: f64) -> Option<&Span<T>> {
    if spans.is_empty() {
        return None;
    }
    for sp in spans {
        if t >= sp.start_s && t < sp.end_s {
            return Some(sp);
        }
    }
    spans.last()
}

fn span_index_at<T>(spans: &[Span<T>], t: f64) -> Option<usize> {
    if spans.is_empty() {
        return None;
    }
    for (i, sp) in spans.iter().enumerate() {
        if t >= sp.start_s && t < sp.end_s {
            return Some(i);
        }
    }
    Some(spans.len() - 1)
}

/// Motion contributed by a camera op at relative position u in [0, 1] of
/// its segment; the sin(pi*u) bump vanishes at segment edges so the path
/// stays continuous.
fn camera_motion(op: CameraOp, u: f64) -> (f64, f64) {
    let bump = (std::f64::consts::PI * u).sin();
    match op {
        CameraOp::Static => (0.0, 0.0),
        CameraOp::PanLeft => (-0.05 * bump, 0.0),
        CameraOp::PanRight => (0.05 * bump, 0.0),
        CameraOp::ZoomIn => (0.0, 0.12 * bump),
        CameraOp::ZoomOut => (0.0, -0.12 * bump),
    }
}

/// Yaw contributed by an action tag at time t, bump-windowed inside its
/// segment.
fn action_yaw(tag: &str, t: f64, u: f64, phase: f64) -> f64 {
    let bump = (std::f64::consts::PI * u).sin();
    match tag {
        "head_shaking" => 0.30 * (2.0 * std::f64::consts::PI * 1.2 * t + phase).sin() * bump,
        "turning" => 0.45 * bump,
        _ => 0.0,
    }
}

/// The shipped generation backend. `boost_factor` scales the
/// mouth-aperture response to the audio envelope (the audio
/// cross-attention boost, honored at render level).
#[derive(Debug, Clone)]
pub struct ProceduralBackend {
    pub boost_factor: f64,
}

impl Default for ProceduralBackend {
    fn default() -> Self {
        ProceduralBackend { boost_factor: 1.0 }
    }
}

impl ProceduralBackend {
    pub fn new(boost_factor: f64) -> Self {
        assert!(boost_factor > 0.0);
        ProceduralBackend { boost_factor }
    }

    fn seed_phase(seed: u64) -> f64 {
        (seed % 997) as f64 / 997.0 * 2.0 * std::f64::consts::PI
    }

    /// Parameters of blueprint frame i: mouth from the envelope at the
    /// frame's center token, yaw from camera/action tags, brow from the
    /// emotion table with 0.5 s easing at segment boundaries.
    pub fn blueprint_params_at(
        &self,
        request: &GenerationRequest,
        frame_index: u64,
    ) -> Result<AvatarParams, BackendError> {
        let storyline = match &request.guidance {
            Guidance::Global(s) => s,
            Guidance::Local(_) => return Err(BackendError::MissingStoryline),
        };
        let palette = palette_from_reference(&request.reference);
        let fps = request.grid.fps;
        let t = (frame_index as f64 + 0.5) / fps;
        let phase = Self::seed_phase(request.seed);

        let token = request.grid.frame_center_token(frame_index) as i64;
        let aperture = (request.audio.envelope_at_token(token) * self.boost_factor).clamp(0.0, 1.0);

        // base talking sway
        let mut yaw = 0.08 * (2.0 * std::f64::consts::PI * 0.25 * t + phase).sin();
        let mut center_dx = 0.0;
        let mut center_dy = 0.0;
        let mut radius_mult = 1.0;

        if let Some(sp) = span_at(&storyline.actions, t) {
            let u = ((t - sp.start_s) / sp.duration().max(1e-9)).clamp(0.0, 1.0);
            yaw += action_yaw(&sp.value, t, u, phase);
            if sp.value == "nodding" {
                center_dy += 0.015 * (2.0 * std::f64::consts::PI * t + phase).sin() * (std::f64::consts::PI * u).sin();
            }
        }
        if let Some(sp) = span_at(&storyline.camera_plan, t) {
            let u = ((t - sp.start_s) / sp.duration().max(1e-9)).clamp(0.0, 1.0);
            let (dx, rm) = camera_motion(sp.value, u);
            center_dx += dx;
            radius_mult += rm;
        }

        // brow from the emotion track, eased across segment boundaries
        let brow_raise = match span_index_at(&storyline.emotion_track, t) {
            None => 0.4,
            Some(k) => {
                let sp = &storyline.emotion_track[k];
                let v = brow_for(sp.value.0, sp.value.1);
                if k > 0 && t - sp.start_s < EMOTION_RAMP_S {
                    let prev = &storyline.emotion_track[k - 1];
                    let pv = brow_for(prev.value.0, prev.value.1);
                    let u = (t - sp.start_s) / EMOTION_RAMP_S;
                    pv + (v - pv) * u
                } else {
                    v
                }
            }
        };

        Ok(AvatarParams {
            face_center: (0.5 + center_dx, FACE_CY_FRAC + center_dy),
            face_radius: BASE_RADIUS_FRAC * radius_mult,
            skin: palette.skin,
            background: palette.background,
            mouth: palette.mouth,
            eye: palette.eye,
            brow: palette.brow,
            mouth_aperture: aperture,
            head_yaw: yaw,
            brow_raise,
        }
        .normalized())
    }
}

impl GenerationBackend for ProceduralBackend {
    fn generate_blueprint(&self, request: &GenerationRequest) -> Result<Clip, BackendError> {
        if !matches!(request.guidance, Guidance::Global(_)) {
            return Err(BackendError::MissingStoryline);
        }
        let n = request.num_frames();
        if n == 0 {
            return Err(BackendError::ZeroFrames(request.duration_s, request.grid.fps));
        }
        let (w, h) = (request.reference.width(), request.reference.height());
        let mut frames = Vec::with_capacity(n as usize);
        for i in 0..n {
            let params = self.blueprint_params_at(request, i)?;
            frames.push(render(&params, w, h));
        }
        Ok(Clip::new(frames, request.grid.fps, None)?)
    }

    fn generate_subclip(&self, request: &GenerationRequest) -> Result<Clip, BackendError> {
        let plan = match &request.guidance {
            Guidance::Local(p) => p,
            Guidance::Global(_) => return Err(BackendError::MissingPlan),
        };
        let (first, last) = match (&request.first_frame, &request.last_frame) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(BackendError::MissingAnchors),
        };
        if first.width() != last.width() || first.height() != last.height() {
            return Err(BackendError::AnchorDimensionMismatch(
                first.width(),
                first.height(),
                last.width(),
                last.height(),
            ));
        }
        let n = request.num_frames();
        if n == 0 {
            return Err(BackendError::ZeroFrames(request.duration_s, request.grid.fps));
        }
        let (w, h) = (first.width(), first.height());
        let fps = request.grid.fps;
        let window_start = request.guidance.window_start_s();
        let phase = Self::seed_phase(request.seed);

        let recovered = (recover_params(first), recover_params(last));
        let anchors_equal = first == last;
        let mut frames = Vec::with_capacity(n as usize);
        for i in 0..n {
            if i == 0 {
                frames.push(first.clone());
                continue;
            }
            if i == n - 1 {
                frames.push(last.clone());
                continue;
            }
            let u = i as f64 / (n - 1) as f64;
            let frame = match &recovered {
                (Some(pa), Some(pb)) => {
                    let mut params = AvatarParams::lerp(pa, pb, u);
                    // local camera/action motion, bump-windowed so the
                    // endpoints still match the anchors exactly
                    let (dx, rm) = camera_motion(plan.camera_op, u);
                    params.face_center.0 += dx;
                    params.face_radius *= 1.0 + rm;
                    let t = window_start + (i as f64 + 0.5) / fps;
                    for tag in &plan.actions {
                        params.head_yaw += action_yaw(tag, t, u, phase);
                    }
                    // mouth follows the time-aligned envelope, easing into
                    // the anchors' recovered aperture at the edges
                    let token = (t * request.grid.token_rate).floor() as i64;
                    let env_aperture =
                        (request.audio.envelope_at_token(token) * self.boost_factor).clamp(0.0, 1.0);
                    let ease = APERTURE_EASE_FRAMES.min((n - 1) / 2).max(1);
                    params.mouth_aperture = if i <= ease {
                        let v = i as f64 / ease as f64;
                        pa.mouth_aperture + (env_aperture - pa.mouth_aperture) * v
                    } else if i >= n - 1 - ease {
                        let v = (n - 1 - i) as f64 / ease as f64;
                        pb.mouth_aperture + (env_aperture - pb.mouth_aperture) * v
                    } else {
                        env_aperture
                    };
                    // constant param path between identical anchors is the
                    // anchor frame itself; copying keeps it bit-exact
                    if anchors_equal && params == *pa {
                        first.clone()
                    } else {
                        let rendered = render(&params.normalized(), w, h);
                        // ease pixels out of / into the anchors so any
                        // param-recovery residual is spread over several
                        // steps instead of landing on the junction
                        if i <= ease {
                            let alpha = i as f64 / (ease + 1) as f64;
                            crossfade(first, &rendered, alpha)
                        } else if i >= n - 1 - ease {
                            let alpha = (n - 1 - i) as f64 / (ease + 1) as f64;
                            crossfade(last, &rendered, alpha)
                        } else {
                            rendered
                        }
                    }
                }
                // unrecognizable anchors: plain pixel cross-fade
                _ => crossfade(first, last, u),
            };
            frames.push(frame);
        }
        Ok(Clip::new(frames, fps, None)?)
    }

    fn interpolate_transition(
        &self,
        frame_a: &Frame,
        frame_b: &Frame,
        num_frames: usize,
        envelope: &[f64],
        fps: f64,
    ) -> Result<Clip, BackendError> {
        if frame_a.width() != frame_b.width() || frame_a.height() != frame_b.height() {
            return Err(BackendError::AnchorDimensionMismatch(
                frame_a.width(),
                frame_a.height(),
                frame_b.width(),
                frame_b.height(),
            ));
        }
        let mut frames = Vec::with_capacity(num_frames);
        let recovered = (recover_params(frame_a), recover_params(frame_b));
        let endpoints_equal = frame_a == frame_b;
        for k in 0..num_frames {
            let u = (k as f64 + 1.0) / (num_frames as f64 + 1.0);
            let frame = match &recovered {
                (Some(pa), Some(pb)) => {
                    let mut params = AvatarParams::lerp(pa, pb, u);
                    if let Some(&e) = envelope.get(k) {
                        params.mouth_aperture = (e * self.boost_factor).clamp(0.0, 1.0);
                    }
                    if endpoints_equal && params == *pa {
                        frame_a.clone()
                    } else {
                        render(&params.normalized(), frame_a.width(), frame_a.height())
                    }
                }
                _ => crossfade(frame_a, frame_b, u),
            };
            frames.push(frame);
        }
        Ok(Clip::new(frames, fps, None)?)
    }

    fn mouth_boxes(&self, clip: &Clip) -> Option<MouthBoxes> {
        let mut boxes = MouthBoxes::new();
        for (i, frame) in clip.frames().iter().enumerate() {
            let params = recover_params(frame)?;
            boxes.insert(i as u64, params.mouth_box(frame.width(), frame.height()));
        }
        Some(boxes)
    }
}

/// Plain per-pixel linear cross-fade.
fn crossfade(a: &Frame, b: &Frame, u: f64) -> Frame {
    let pixels = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&pa, &pb)| (pa as f64 + (pb as f64 - pa as f64) * u).round() as u8)
        .collect();
    Frame::from_pixels(a.width(), a.height(), pixels).expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::AudioFeatures;
    use crate::director::{compose_storyline, parse_user_prompt, LocalPlan};
    use crate::media::TimeGrid;

    fn reference() -> Frame {
        let mut f = Frame::filled(64, 64, [40, 60, 90]).unwrap();
        for y in 20..44 {
            for x in 20..44 {
                f.set(x, y, [180, 140, 110]);
            }
        }
        f
    }

    fn features(envelope: Vec<f64>) -> AudioFeatures {
        let n = envelope.len();
        AudioFeatures {
            token_rate: 50.0,
            start_token: 0,
            activity: envelope.iter().map(|&e| e > 0.05).collect(),
            raw_rms: envelope.clone(),
            envelope,
            band_energy: vec![[0.25; 4]; n],
        }
    }

    fn blueprint_request(envelope: Vec<f64>, duration_s: f64, seed: u64) -> GenerationRequest {
        let storyline =
            compose_storyline(&parse_user_prompt("calm talking"), None, None, duration_s).unwrap();
        GenerationRequest {
            reference: reference(),
            guidance: Guidance::Global(storyline),
            audio: features(envelope),
            grid: TimeGrid::new(12.0, 50.0).unwrap(),
            duration_s,
            first_frame: None,
            last_frame: None,
            seed,
        }
    }

    #[test]
    fn render_recover_roundtrip() {
        let palette = palette_from_reference(&reference());
        let mut rng = crate::rng::Rng::new(41);
        for _ in 0..40 {
            let params = AvatarParams {
                face_center: (rng.range_f64(0.42, 0.58), rng.range_f64(0.42, 0.48)),
                face_radius: rng.range_f64(0.2, 0.32),
                mouth_aperture: rng.next_f64(),
                head_yaw: 0.0,
                brow_raise: rng.next_f64(),
                ..AvatarParams::neutral(&palette)
            };
            let frame = render(&params, 96, 96);
            let rec = recover_params(&frame).expect("recoverable");
            assert!((rec.face_center.0 - params.face_center.0).abs() < 0.02, "cx");
            assert!((rec.face_center.1 - params.face_center.1).abs() < 0.02, "cy");
            assert!((rec.face_radius - params.face_radius).abs() < 0.02, "r");
            assert!((rec.mouth_aperture - params.mouth_aperture).abs() < 0.15, "aperture");
            assert!((rec.brow_raise - params.brow_raise).abs() < 0.15, "brow");
            assert_eq!(rec.skin, params.skin);
            assert_eq!(rec.background, params.background);
        }
    }

    #[test]
    fn yaw_folds_into_recovered_center() {
        let palette = palette_from_reference(&reference());
        let params = AvatarParams { head_yaw: 0.5, ..AvatarParams::neutral(&palette) };
        let frame = render(&params, 96, 96);
        let rec = recover_params(&frame).unwrap();
        assert!((rec.face_center.0 - (0.5 + YAW_SHIFT_FRAC * 0.5)).abs() < 0.02);
    }

    #[test]
    fn silent_audio_keeps_mouth_closed() {
        let req = blueprint_request(vec![0.0; 500], 10.0, 7);
        let backend = ProceduralBackend::default();
        for i in [0u64, 13, 60, 119] {
            let p = backend.blueprint_params_at(&req, i).unwrap();
            assert_eq!(p.mouth_aperture, 0.0);
        }
        let clip = backend.generate_blueprint(&req).unwrap();
        assert_eq!(clip.num_frames(), 120); // 10 s at 12 fps
    }

    #[test]
    fn blueprint_is_deterministic() {
        let backend = ProceduralBackend::default();
        let env: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.1).sin().abs()).collect();
        let a = backend.generate_blueprint(&blueprint_request(env.clone(), 10.0, 5)).unwrap();
        let b = backend.generate_blueprint(&blueprint_request(env, 10.0, 5)).unwrap();
        assert_eq!(a, b);
    }

    fn local_plan(window: (f64, f64)) -> LocalPlan {
        let storyline =
            compose_storyline(&parse_user_prompt("calm talking"), None, None, window.1.max(1.0)).unwrap();
        let mut plans = crate::director::decompose(&storyline, &[(0.0, window.1.max(1.0))]).unwrap();
        let mut plan = plans.remove(0);
        plan.window = window;
        plan
    }

    fn subclip_request(
        first: Frame,
        last: Frame,
        envelope: Vec<f64>,
        window: (f64, f64),
        seed: u64,
    ) -> GenerationRequest {
        GenerationRequest {
            reference: reference(),
            guidance: Guidance::Local(local_plan(window)),
            audio: features(envelope),
            grid: TimeGrid::new(48.0, 50.0).unwrap(),
            duration_s: window.1 - window.0,
            first_frame: Some(first),
            last_frame: Some(last),
            seed,
        }
    }

    #[test]
    fn subclip_endpoints_are_bit_exact() {
        let palette = palette_from_reference(&reference());
        let a = render(&AvatarParams { mouth_aperture: 0.2, ..AvatarParams::neutral(&palette) }, 64, 64);
        let b = render(
            &AvatarParams { mouth_aperture: 0.7, face_center: (0.52, 0.45), ..AvatarParams::neutral(&palette) },
            64,
            64,
        );
        let env: Vec<f64> = (0..200).map(|i| (i as f64 * 0.21).sin().abs()).collect();
        let clip = ProceduralBackend::default()
            .generate_subclip(&subclip_request(a.clone(), b.clone(), env, (0.0, 2.0), 3))
            .unwrap();
        assert_eq!(clip.num_frames(), 96);
        assert_eq!(clip.frame(0), &a);
        assert_eq!(clip.frame(95), &b);
    }

    #[test]
    fn constant_anchors_and_silence_give_constant_clip() {
        let palette = palette_from_reference(&reference());
        let a = render(&AvatarParams::neutral(&palette), 64, 64);
        let clip = ProceduralBackend::default()
            .generate_subclip(&subclip_request(a.clone(), a.clone(), vec![0.0; 200], (0.0, 1.0), 9))
            .unwrap();
        for f in clip.frames() {
            assert_eq!(f, &a);
        }
    }

    #[test]
    fn envelope_impulse_peaks_at_matching_frame() {
        // impulse at global token 60 -> time ~1.21 s -> frame ~58 of 96
        let mut env = vec![0.0; 200];
        env[60] = 1.0;
        env[61] = 1.0;
        let palette = palette_from_reference(&reference());
        let a = render(&AvatarParams::neutral(&palette), 64, 64);
        let clip = ProceduralBackend::default()
            .generate_subclip(&subclip_request(a.clone(), a.clone(), env, (0.0, 2.0), 1))
            .unwrap();
        // argmax oracle over recovered apertures
        let mut best = (0usize, -1.0f64);
        for (i, f) in clip.frames().iter().enumerate() {
            let ap = recover_params(f).unwrap().mouth_aperture;
            if ap > best.1 {
                best = (i, ap);
            }
        }
        // frames whose center token is 60 or 61: t in [1.2, 1.24) -> i in {57, 58, 59}
        assert!(
            (57..=59).contains(&best.0),
            "impulse peak at frame {} aperture {}",
            best.0,
            best.1
        );
        assert!(best.1 > 0.5);
    }

    #[test]
    fn missing_anchor_or_plan_is_an_error() {
        let env = vec![0.0; 100];
        let palette = palette_from_reference(&reference());
        let a = render(&AvatarParams::neutral(&palette), 64, 64);
        let mut req = subclip_request(a.clone(), a.clone(), env.clone(), (0.0, 1.0), 0);
        req.last_frame = None;
        assert!(matches!(
            ProceduralBackend::default().generate_subclip(&req),
            Err(BackendError::MissingAnchors)
        ));

        let breq = blueprint_request(env, 2.0, 0);
        assert!(matches!(
            ProceduralBackend::default().generate_subclip(&breq),
            Err(BackendError::MissingPlan)
        ));
    }

    #[test]
    fn anchor_dimension_mismatch_rejected() {
        let palette = palette_from_reference(&reference());
        let a = render(&AvatarParams::neutral(&palette), 64, 64);
        let b = render(&AvatarParams::neutral(&palette), 48, 48);
        let req = subclip_request(a, b, vec![0.0; 100], (0.0, 1.0), 0);
        assert!(matches!(
            ProceduralBackend::default().generate_subclip(&req),
            Err(BackendError::AnchorDimensionMismatch(..))
        ));
    }

    #[test]
    fn transition_zero_frames_is_empty() {
        let palette = palette_from_reference(&reference());
        let a = render(&AvatarParams::neutral(&palette), 64, 64);
        let clip = ProceduralBackend::default()
            .interpolate_transition(&a, &a, 0, &[], 48.0)
            .unwrap();
        assert_eq!(clip.num_frames(), 0);
    }

    #[test]
    fn transition_identity_fade_with_silence() {
        let palette = palette_from_reference(&reference());
        let a = render(&AvatarParams::neutral(&palette), 64, 64);
        let clip = ProceduralBackend::default()
            .interpolate_transition(&a, &a, 5, &[0.0; 5], 48.0)
            .unwrap();
        for f in clip.frames() {
            assert_eq!(f, &a);
        }
    }

    // Direct pixel-average oracle: the midpoint of a black-to-white fade
    // has mean intensity 127.5 +- 2 (these frames are not avatar renders,
    // so the path is a plain cross-fade and there is no mouth region).
    #[test]
    fn transition_midpoint_of_black_white_fade() {
        let black = Frame::filled(32, 32, [0, 0, 0]).unwrap();
        let white = Frame::filled(32, 32, [255, 255, 255]).unwrap();
        let clip = ProceduralBackend::default()
            .interpolate_transition(&black, &white, 5, &[0.0; 5], 48.0)
            .unwrap();
        let mid = clip.frame(2); // u = 3/6 = 0.5
        let mean: f64 =
            mid.pixels().iter().map(|&p| p as f64).sum::<f64>() / mid.pixels().len() as f64;
        assert!((mean - 127.5).abs() <= 2.0, "mean {mean}");
    }

    #[test]
    fn mouth_boxes_cover_the_mouth() {
        let palette = palette_from_reference(&reference());
        let params = AvatarParams { mouth_aperture: 0.8, ..AvatarParams::neutral(&palette) };
        let frame = render(&params, 64, 64);
        let clip = Clip::new(vec![frame.clone()], 48.0, None).unwrap();
        let boxes = ProceduralBackend::default().mouth_boxes(&clip).unwrap();
        let b = boxes.get(0).unwrap();
        // every mouth-colored pixel lies inside the box
        for y in 0..64u32 {
            for x in 0..64u32 {
                if frame.get(x, y) == palette.mouth {
                    assert!(x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1, "({x},{y}) outside box");
                }
            }
        }
    }
}
