use serde::Serialize;

use super::RenderedSegment;
use crate::cascade::{Stage, StageEntry};
use crate::interval::FrameInterval;
use crate::placement::{Anchor, EnergyTerms, SubtitleBox, Weights};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRecord {
    pub tracklet: u32,
    pub msd: f64,
    pub cc: Option<f64>,
    pub lc: Option<f64>,
    pub av: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionRecord {
    pub x: f64,
    pub y: f64,
    pub anchor: Anchor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PositionField {
    Placed(PositionRecord),
    Default(&'static str),
}

/// One line of the decision report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRecord {
    pub segment: u32,
    pub turn: Option<usize>,
    pub part: usize,
    pub interval: [usize; 2],
    pub refined_interval: [usize; 2],
    pub assigned: bool,
    pub stage: Option<Stage>,
    pub speaker: Option<u32>,
    pub audio_unavailable: bool,
    pub candidates: Vec<CandidateRecord>,
    pub stages: Vec<StageEntry<f64>>,
    /// Absent in decision-only reports.
    #[serde(flatten)]
    pub placement: Option<PlacementRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementRecord {
    pub position: PositionField,
    #[serde(rename = "box")]
    pub subtitle_box: SubtitleBox<f64>,
    pub energy: Option<EnergyTerms<f64>>,
    pub weights: Weights<f64>,
}

fn pair(iv: FrameInterval) -> [usize; 2] {
    [iv.first, iv.last]
}

/// Records for `segments`; `weights` is `None` for a decision-only report.
pub fn report_records(segments: &[RenderedSegment], weights: Option<Weights<f64>>) -> Vec<ReportRecord> {
    segments
        .iter()
        .map(|s| {
            let d = s.decision.as_ref();
            let candidates = d
                .map(|d| d.features.iter().map(|(&id, f)| CandidateRecord { tracklet: id, msd: f.msd, cc: f.cc, lc: f.lc, av: f.av }).collect())
                .unwrap_or_default();
            let position = match s.placement.candidate {
                Some(c) => PositionField::Placed(PositionRecord { x: c.position.x, y: c.position.y, anchor: c.anchor }),
                None => PositionField::Default("default"),
            };
            ReportRecord {
                segment: s.segment.segment_index,
                turn: s.segment.turn,
                part: s.segment.part,
                interval: pair(s.segment.frame_interval),
                refined_interval: pair(s.segment.refined_interval),
                assigned: s.segment.assigned,
                stage: d.and_then(|d| d.stage),
                speaker: d.and_then(|d| d.speaker),
                audio_unavailable: d.is_some_and(|d| d.audio_unavailable),
                candidates,
                stages: d.map(|d| d.stages.clone()).unwrap_or_default(),
                placement: weights.map(|weights| PlacementRecord { position, subtitle_box: s.placement.subtitle_box, energy: s.placement.energy, weights }),
            }
        })
        .collect()
}

/// Newline-delimited JSON, one record per segment.
pub fn emit_report(segments: &[RenderedSegment], weights: Option<Weights<f64>>) -> String {
    let mut out = String::new();
    for r in report_records(segments, weights) {
        out.push_str(&serde_json::to_string(&r).expect("report records always serialize"));
        out.push('\n');
    }
    out
}
