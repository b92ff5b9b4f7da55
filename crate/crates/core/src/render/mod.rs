//! Output artifacts: positioned ASS subtitles, the JSONL decision report and
//! annotated debug frames.

mod annotate;
mod ass;
mod report;

pub use annotate::{annotate_frames, draw_annotations, NON_SPEAKER_COLOR, SPEAKER_COLOR, SUBTITLE_COLOR};
pub use ass::{arrow_triangle, emit_ass, validate_ass, AssStyle, AssSummary, ARROW_SIZE};
pub use report::{emit_report, report_records, CandidateRecord, PlacementRecord, PositionField, PositionRecord, ReportRecord};

use crate::cascade::SpeakerDecision;
use crate::placement::Placement;
use crate::segmentation::SpeakingVideoSegment;

/// A finished speaking video segment: its timing, the detector's verdict and
/// where its subtitle goes.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSegment {
    pub segment: SpeakingVideoSegment,
    /// `None` for pieces that were never examined for a speaker.
    pub decision: Option<SpeakerDecision<f64>>,
    pub placement: Placement<f64>,
}

impl RenderedSegment {
    pub fn speaker(&self) -> Option<u32> {
        self.decision.as_ref().and_then(|d| d.speaker)
    }
}
