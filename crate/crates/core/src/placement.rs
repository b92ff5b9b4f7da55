//! Subtitle placement around the speaker's face by energy minimization over
//! eight candidate anchors, chained forward across segments.

use serde::{Deserialize, Serialize};

use crate::geom::{Point, Rect};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlacementError {
    #[error("subtitle has no text")]
    EmptyText,
    #[error("subtitle box is {width} px wide but the screen is {screen} px")]
    TextTooWide { width: f64, screen: f64 },
    #[error("subtitle box is {height} px tall but the screen is {screen} px")]
    TextTooTall { height: f64, screen: f64 },
}

/// Fixed-width glyph metrics used to size subtitle boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FontConfig {
    pub glyph_w: f64,
    pub glyph_h: f64,
    pub pad: f64,
}

impl Default for FontConfig {
    fn default() -> Self {
        Self { glyph_w: 10.0, glyph_h: 20.0, pad: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubtitleBox<T> {
    pub width: T,
    pub height: T,
}

impl<T: Scalar> SubtitleBox<T> {
    pub fn new(width: T, height: T) -> Self {
        Self { width, height }
    }

    pub fn at(&self, top_left: Point<T>) -> Rect<T> {
        Rect::new(top_left.x, top_left.y, self.width, self.height)
    }
}

pub fn measure_subtitle_box<T: Scalar, S: AsRef<str>>(lines: &[S], font: &FontConfig, screen: (T, T)) -> Result<SubtitleBox<T>, PlacementError> {
    if lines.is_empty() || lines.iter().all(|l| l.as_ref().trim().is_empty()) {
        return Err(PlacementError::EmptyText);
    }
    let glyphs = lines.iter().map(|l| l.as_ref().chars().count()).max().unwrap_or(0);
    let width = glyphs as f64 * font.glyph_w + 2.0 * font.pad;
    let height = lines.len() as f64 * font.glyph_h + 2.0 * font.pad;
    if width > screen.0.as_f64() {
        return Err(PlacementError::TextTooWide { width, screen: screen.0.as_f64() });
    }
    if height > screen.1.as_f64() {
        return Err(PlacementError::TextTooTall { height, screen: screen.1.as_f64() });
    }
    Ok(SubtitleBox::new(T::of(width), T::of(height)))
}

/// Candidate slots around a face, in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    AboveLeft,
    Above,
    AboveRight,
    BelowLeft,
    Below,
    BelowRight,
    Left,
    Right,
}

impl Anchor {
    pub const ALL: [Anchor; 8] =
        [Anchor::AboveLeft, Anchor::Above, Anchor::AboveRight, Anchor::BelowLeft, Anchor::Below, Anchor::BelowRight, Anchor::Left, Anchor::Right];

    /// Horizontal and vertical direction from the face center.
    fn direction(self) -> (i8, i8) {
        match self {
            Anchor::AboveLeft => (-1, -1),
            Anchor::Above => (0, -1),
            Anchor::AboveRight => (1, -1),
            Anchor::BelowLeft => (-1, 1),
            Anchor::Below => (0, 1),
            Anchor::BelowRight => (1, 1),
            Anchor::Left => (-1, 0),
            Anchor::Right => (1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Anchor::AboveLeft => "above-left",
            Anchor::Above => "above",
            Anchor::AboveRight => "above-right",
            Anchor::BelowLeft => "below-left",
            Anchor::Below => "below",
            Anchor::BelowRight => "below-right",
            Anchor::Left => "left",
            Anchor::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate<T> {
    pub anchor: Anchor,
    /// Top-left corner of the subtitle box.
    pub position: Point<T>,
}

impl<T: Scalar> Candidate<T> {
    pub fn rect(&self, b: &SubtitleBox<T>) -> Rect<T> {
        b.at(self.position)
    }

    pub fn center(&self, b: &SubtitleBox<T>) -> Point<T> {
        self.rect(b).center()
    }
}

/// All eight slots, before any filtering. Box centers sit `face/2 + margin +
/// box/2` away from the face center along each used axis.
pub fn anchor_slots<T: Scalar>(face: &Rect<T>, b: &SubtitleBox<T>, margin: T) -> [Candidate<T>; 8] {
    let c = face.center();
    let dx = face.w * T::half() + margin + b.width * T::half();
    let dy = face.h * T::half() + margin + b.height * T::half();
    Anchor::ALL.map(|anchor| {
        let (sx, sy) = anchor.direction();
        let center = Point::new(c.x + dx * T::of(sx as f64), c.y + dy * T::of(sy as f64));
        Candidate { anchor, position: Point::new(center.x - b.width * T::half(), center.y - b.height * T::half()) }
    })
}

/// Slots whose box stays on screen and covers none of `faces`.
pub fn candidate_positions<T: Scalar>(face: &Rect<T>, b: &SubtitleBox<T>, screen: (T, T), margin: T, faces: &[Rect<T>]) -> Vec<Candidate<T>> {
    let bounds = Rect::new(T::zero(), T::zero(), screen.0, screen.1);
    anchor_slots(face, b, margin)
        .into_iter()
        .filter(|c| {
            let r = c.rect(b);
            r.within(&bounds) && faces.iter().all(|f| !r.intersects(f))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights<T> {
    pub w1: T,
    pub w2: T,
    pub w3: T,
}

impl<T: Scalar> Default for Weights<T> {
    fn default() -> Self {
        Self { w1: T::one(), w2: T::one(), w3: -T::one() }
    }
}

impl<T: Scalar> Weights<T> {
    pub fn scaled(&self, c: T) -> Self {
        Self { w1: self.w1 * c, w2: self.w2 * c, w3: self.w3 * c }
    }
}

/// Everything the energy needs besides the candidate itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementContext<T> {
    pub speaker: Point<T>,
    pub non_speakers: Vec<Point<T>>,
    /// Box center of the previous optimized subtitle in the same shot.
    pub previous: Option<Point<T>>,
    pub screen: (T, T),
    pub weights: Weights<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyTerms<T> {
    /// Distance to the speaker minus distances to the other faces.
    pub local: T,
    /// Distance to the previous subtitle; absent at the start of a chain.
    pub global: Option<T>,
    /// Distance to the nearest screen edge.
    pub layout: T,
    pub total: T,
}

/// Energy terms for a subtitle box centered at `p`.
pub fn energy_terms<T: Scalar>(p: Point<T>, ctx: &PlacementContext<T>) -> EnergyTerms<T> {
    let mut local = p.distance(ctx.speaker);
    for &q in &ctx.non_speakers {
        local -= p.distance(q);
    }
    let global = ctx.previous.map(|q| p.distance(q));
    let (w, h) = ctx.screen;
    let layout = p.x.min(w - p.x).min(p.y).min(h - p.y);
    let wt = &ctx.weights;
    let total = wt.w1 * local + wt.w2 * global.unwrap_or(T::zero()) + wt.w3 * layout;
    EnergyTerms { local, global, layout, total }
}

pub fn energy<T: Scalar>(p: Point<T>, ctx: &PlacementContext<T>) -> T {
    energy_terms(p, ctx).total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Placement<T> {
    /// Chosen slot; `None` means the default bottom-center position.
    pub candidate: Option<Candidate<T>>,
    /// Top-left corner actually used.
    pub position: Point<T>,
    pub subtitle_box: SubtitleBox<T>,
    pub energy: Option<EnergyTerms<T>>,
    /// Speaker face center the arrow points at.
    pub arrow_target: Option<Point<T>>,
}

impl<T: Scalar> Placement<T> {
    pub fn is_default(&self) -> bool {
        self.candidate.is_none()
    }

    pub fn rect(&self) -> Rect<T> {
        self.subtitle_box.at(self.position)
    }

    pub fn default_at(screen: (T, T), b: SubtitleBox<T>, pad_bottom: T) -> Self {
        Self { candidate: None, position: default_position(screen, &b, pad_bottom), subtitle_box: b, energy: None, arrow_target: None }
    }
}

/// Horizontally centered with the bottom edge `pad_bottom` above the screen bottom.
pub fn default_position<T: Scalar>(screen: (T, T), b: &SubtitleBox<T>, pad_bottom: T) -> Point<T> {
    Point::new((screen.0 - b.width) * T::half(), screen.1 - pad_bottom - b.height)
}

/// Lowest-energy candidate; earlier anchors win ties. `None` for no candidates.
pub fn choose_candidate<T: Scalar>(candidates: &[Candidate<T>], b: &SubtitleBox<T>, ctx: &PlacementContext<T>) -> Option<(Candidate<T>, EnergyTerms<T>)> {
    let mut best: Option<(Candidate<T>, EnergyTerms<T>)> = None;
    for c in candidates {
        let e = energy_terms(c.center(b), ctx);
        if best.as_ref().is_none_or(|(_, be)| e.total < be.total) {
            best = Some((*c, e));
        }
    }
    best
}

pub fn place_segment<T: Scalar>(candidates: &[Candidate<T>], b: SubtitleBox<T>, ctx: &PlacementContext<T>, pad_bottom: T) -> Placement<T> {
    match choose_candidate(candidates, &b, ctx) {
        Some((c, e)) => Placement { candidate: Some(c), position: c.position, subtitle_box: b, energy: Some(e), arrow_target: Some(ctx.speaker) },
        None => Placement::default_at(ctx.screen, b, pad_bottom),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementParams<T> {
    pub screen: (T, T),
    pub weights: Weights<T>,
    pub margin: T,
    pub pad_bottom: T,
}

/// One segment to place, in temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementRequest<T> {
    /// Mean speaker face; `None` for segments shown at the default position.
    pub speaker_face: Option<Rect<T>>,
    pub non_speaker_faces: Vec<Rect<T>>,
    pub subtitle_box: SubtitleBox<T>,
    /// Shot the segment belongs to; the chain restarts when it changes.
    pub shot: usize,
}

/// Greedy forward pass. Each optimized placement attracts the next one in
/// the same shot; a default placement or a new shot breaks the chain.
pub fn place_all<T: Scalar>(requests: &[PlacementRequest<T>], params: &PlacementParams<T>) -> Vec<Placement<T>> {
    let mut out = Vec::with_capacity(requests.len());
    let mut chain: Option<(usize, Point<T>)> = None;
    for r in requests {
        let Some(face) = r.speaker_face else {
            out.push(Placement::default_at(params.screen, r.subtitle_box, params.pad_bottom));
            chain = None;
            continue;
        };
        let mut faces = vec![face];
        faces.extend(r.non_speaker_faces.iter().copied());
        let candidates = candidate_positions(&face, &r.subtitle_box, params.screen, params.margin, &faces);
        let ctx = PlacementContext {
            speaker: face.center(),
            non_speakers: r.non_speaker_faces.iter().map(|f| f.center()).collect(),
            previous: chain.filter(|(shot, _)| *shot == r.shot).map(|(_, p)| p),
            screen: params.screen,
            weights: params.weights,
        };
        let p = place_segment(&candidates, r.subtitle_box, &ctx, params.pad_bottom);
        chain = (!p.is_default()).then(|| (r.shot, p.rect().center()));
        out.push(p);
    }
    out
}
