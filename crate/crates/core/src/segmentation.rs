//! Shot-change detection and the splits that turn subtitle segments into
//! speaking video segments.

use std::io::Write;

use serde::Serialize;

use crate::ingest::{histogram_similarity, rgb_histogram, Frame, Histogram, IngestError};
use crate::interval::FrameInterval;
use crate::subtitle::SpeakerTurn;
use crate::tracking::Tracklet;

pub const DEFAULT_SHOT_THRESHOLD: f64 = 0.99;

/// First frame of a new shot and the similarity that triggered it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotChange {
    pub frame_index: usize,
    pub delta: f64,
}

/// Similarity of two adjacent frames; flat histograms compare as identical.
fn adjacent_similarity(a: &Histogram, b: &Histogram) -> Result<f64, IngestError> {
    match histogram_similarity(a, b) {
        Err(IngestError::DegenerateHistogram) => Ok(1.0),
        other => other,
    }
}

/// Cuts between consecutive histograms. `first_index` is the frame index of
/// `histograms[0]`.
pub fn shot_changes_from_histograms(histograms: &[Histogram], first_index: usize, threshold: f64) -> Result<Vec<ShotChange>, IngestError> {
    let mut out = Vec::new();
    for (i, pair) in histograms.windows(2).enumerate() {
        let delta = adjacent_similarity(&pair[0], &pair[1])?;
        if delta < threshold {
            out.push(ShotChange { frame_index: first_index + i + 1, delta });
        }
    }
    Ok(out)
}

/// Hard cuts in a run of consecutive frames.
pub fn detect_shot_changes(frames: &[Frame], bins_per_channel: usize, threshold: f64) -> Result<Vec<ShotChange>, IngestError> {
    let Some(first) = frames.first() else { return Ok(Vec::new()) };
    let hists = frames.iter().map(|f| rgb_histogram(f, bins_per_channel)).collect::<Result<Vec<_>, _>>()?;
    shot_changes_from_histograms(&hists, first.index, threshold)
}

/// `frame_index,delta` rows under a header line.
pub fn write_shot_csv<W: Write>(mut out: W, cuts: &[ShotChange]) -> std::io::Result<()> {
    writeln!(out, "frame_index,delta")?;
    for c in cuts {
        writeln!(out, "{},{}", c.frame_index, c.delta)?;
    }
    Ok(())
}

/// A stretch of frames that shows one piece of subtitle text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeakingVideoSegment {
    /// Index of the originating SRT block.
    pub segment_index: u32,
    /// Speaker turn within the block, when it was split by `-` markers.
    pub turn: Option<usize>,
    /// Ordinal among the pieces of the same block or turn.
    pub part: usize,
    pub lines: Vec<String>,
    pub words: usize,
    pub frame_interval: FrameInterval,
    pub refined_interval: FrameInterval,
    /// Carries the subtitle at an optimized position; otherwise shown at the default position.
    pub assigned: bool,
}

impl SpeakingVideoSegment {
    pub fn new(segment_index: u32, lines: Vec<String>, interval: FrameInterval) -> Self {
        let words = lines.iter().map(|l| l.split_whitespace().count()).sum();
        Self { segment_index, turn: None, part: 0, lines, words, frame_interval: interval, refined_interval: interval, assigned: true }
    }

    fn piece(&self, interval: FrameInterval) -> Self {
        Self { frame_interval: interval, refined_interval: interval, ..self.clone() }
    }
}

/// Cut `interval` before each frame in `starts` that lies strictly inside it.
pub fn partition_at(interval: FrameInterval, starts: &[usize]) -> Vec<FrameInterval> {
    let mut cuts: Vec<usize> = starts.iter().copied().filter(|&c| c > interval.first && c <= interval.last).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut first = interval.first;
    for c in cuts {
        out.push(FrameInterval::new(first, c - 1));
        first = c;
    }
    out.push(FrameInterval::new(first, interval.last));
    out
}

/// Index of the piece overlapping `span` the most; earlier wins ties.
pub fn assigned_piece(pieces: &[FrameInterval], span: &FrameInterval) -> usize {
    let mut best = 0;
    for (i, p) in pieces.iter().enumerate() {
        if p.overlap(span) > pieces[best].overlap(span) {
            best = i;
        }
    }
    best
}

/// Split at shot changes; only the piece overlapping `speaking_span` most
/// keeps the optimized subtitle.
pub fn split_on_shot_changes(segment: &SpeakingVideoSegment, cuts: &[usize], speaking_span: &FrameInterval) -> Vec<SpeakingVideoSegment> {
    let pieces = partition_at(segment.frame_interval, cuts);
    let chosen = assigned_piece(&pieces, speaking_span);
    pieces.iter().enumerate().map(|(i, &iv)| SpeakingVideoSegment { part: i, assigned: i == chosen, ..segment.piece(iv) }).collect()
}

/// Frames at which a moving speaker's subtitle should be re-placed.
///
/// A split happens when the face center is more than `beta` mean face
/// widths away from its position at the start of the current piece, provided
/// both sides of the split keep at least `min_frames` frames.
pub fn moving_split_points(interval: &FrameInterval, speaker: &Tracklet, beta: f64, min_frames: usize) -> Vec<usize> {
    let Some(local) = speaker.crop(interval) else { return Vec::new() };
    let mean_w = local.mean_face().w;
    let limit = beta * mean_w;
    let center_at = |t: usize| speaker.record_at_or_before(t).map(|r| r.face.center());
    let mut out = Vec::new();
    let mut start = interval.first;
    let mut anchor = center_at(start);
    for t in interval.first + 1..=interval.last {
        if anchor.is_none() {
            start = t;
            anchor = center_at(t);
            continue;
        }
        if t - start < min_frames || interval.last + 1 - t < min_frames {
            continue;
        }
        if let (Some(a), Some(c)) = (anchor, center_at(t)) {
            if c.distance(a) > limit {
                out.push(t);
                start = t;
                anchor = Some(c);
            }
        }
    }
    out
}

/// Split the refined interval of `segment` wherever the speaker moves far.
/// Every piece keeps the full text. Refined intervals partition the refined
/// interval and frame intervals partition the frame interval, split at the
/// same frames.
pub fn split_moving_speaker(segment: &SpeakingVideoSegment, speaker: &Tracklet, beta: f64, min_frames: usize) -> Vec<SpeakingVideoSegment> {
    let iv = segment.refined_interval;
    let cuts = moving_split_points(&iv, speaker, beta, min_frames);
    partition_at(iv, &cuts)
        .into_iter()
        .zip(partition_at(segment.frame_interval, &cuts))
        .enumerate()
        .map(|(i, (refined, frames))| SpeakingVideoSegment { part: segment.part + i, frame_interval: frames, refined_interval: refined, ..segment.clone() })
        .collect()
}

/// Divide `interval` among `weights` proportionally, each share at least one
/// frame. `None` when there are fewer frames than shares.
pub fn proportional_ranges(interval: &FrameInterval, weights: &[usize]) -> Option<Vec<FrameInterval>> {
    let k = weights.len();
    if k == 0 || interval.len() < k {
        return None;
    }
    let n = interval.len();
    let total: usize = weights.iter().sum();
    let (weights, total): (Vec<usize>, usize) = if total == 0 { (vec![1; k], k) } else { (weights.to_vec(), total) };
    let mut starts = Vec::with_capacity(k);
    starts.push(interval.first);
    let mut cum = 0usize;
    for (i, w) in weights.iter().enumerate().take(k - 1) {
        cum += w;
        let raw = interval.first + ((n * cum) as f64 / total as f64).round() as usize;
        // Leave room for one frame per remaining share.
        let lo = starts[i] + 1;
        let hi = interval.last + 1 - (k - 1 - i);
        starts.push(raw.clamp(lo, hi));
    }
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let last = if i + 1 < k { starts[i + 1] - 1 } else { interval.last };
        out.push(FrameInterval::new(starts[i], last));
    }
    Some(out)
}

/// Move turn boundaries to the midpoint between one face disappearing and
/// the next appearing, when each of the two ranges has exactly one face
/// covering at least half of it.
pub fn snap_turn_ranges(ranges: &[FrameInterval], tracklets: &[Tracklet]) -> Vec<FrameInterval> {
    let sole: Vec<Option<&Tracklet>> = ranges
        .iter()
        .map(|r| {
            let mut active = tracklets.iter().filter(|t| 2 * t.span().overlap(r) >= r.len());
            match (active.next(), active.next()) {
                (Some(t), None) => Some(t),
                _ => None,
            }
        })
        .collect();
    let mut starts: Vec<usize> = ranges.iter().map(|r| r.first).collect();
    for i in 1..ranges.len() {
        if let (Some(a), Some(b)) = (sole[i - 1], sole[i]) {
            if a.id != b.id {
                let mid = (a.last_frame() + b.first_frame()).div_ceil(2);
                let lo = starts[i - 1] + 1;
                let hi = ranges[i].last;
                starts[i] = mid.clamp(lo, hi);
            }
        }
    }
    let end = ranges.last().map_or(0, |r| r.last);
    (0..ranges.len()).map(|i| FrameInterval::new(starts[i], if i + 1 < ranges.len() { starts[i + 1] - 1 } else { end })).collect()
}

/// One speaking segment per speaker turn, timed by word share. A single
/// turn, or too few frames to give each turn one, leaves the segment whole.
pub fn split_multi_speaker(segment: &SpeakingVideoSegment, turns: &[SpeakerTurn], tracklets: Option<&[Tracklet]>) -> Vec<SpeakingVideoSegment> {
    if turns.len() < 2 {
        return vec![segment.clone()];
    }
    let weights: Vec<usize> = turns.iter().map(|t| t.word_count()).collect();
    let Some(mut ranges) = proportional_ranges(&segment.frame_interval, &weights) else {
        return vec![segment.clone()];
    };
    if let Some(ts) = tracklets {
        ranges = snap_turn_ranges(&ranges, ts);
    }
    turns
        .iter()
        .zip(ranges)
        .map(|(turn, iv)| {
            let mut s = SpeakingVideoSegment::new(segment.segment_index, turn.lines.clone(), iv);
            s.turn = Some(turn.turn_index);
            s
        })
        .collect()
}

/// The subtitle interval narrowed to the speaker's tracklet, unless that
/// leaves fewer than `min_display` frames.
pub fn refine_speaking_time(srt: &FrameInterval, tracklet_span: &FrameInterval, min_display: usize) -> FrameInterval {
    match srt.intersect(tracklet_span) {
        Some(iv) if iv.len() >= min_display => iv,
        _ => *srt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{FrameSize, Rect};
    use crate::ingest::DetectionRecord;
    use crate::subtitle::{split_speaker_turns, SubtitleSegment};
    use proptest::prelude::*;

    fn solid(index: usize, rgb: [u8; 3]) -> Frame {
        let size = FrameSize::new(8, 6);
        Frame::from_rgb(index, size, rgb.repeat(size.pixels()))
    }

    fn textured(index: usize, base: u8) -> Frame {
        let size = FrameSize::new(8, 6);
        let rgb = (0..size.pixels()).flat_map(|i| [base.wrapping_add((i * 16) as u8), base, 255 - base]).collect();
        Frame::from_rgb(index, size, rgb)
    }

    fn seg(first: usize, last: usize) -> SpeakingVideoSegment {
        SpeakingVideoSegment::new(1, vec!["hello there".into()], FrameInterval::new(first, last))
    }

    fn track(id: u32, frames: std::ops::RangeInclusive<usize>, x: impl Fn(usize) -> f64) -> Tracklet {
        Tracklet::new(id, frames.map(|f| DetectionRecord::new(f, Rect::new(x(f), 50.0, 20.0, 20.0))).collect())
    }

    #[test]
    fn duplicated_frames_have_no_cuts() {
        let frames: Vec<Frame> = (0..10).map(|i| textured(i, 40)).collect();
        assert!(detect_shot_changes(&frames, 16, 0.99).unwrap().is_empty());
    }

    #[test]
    fn black_to_white_cut() {
        let frames: Vec<Frame> = (0..12).map(|i| solid(i, if i < 7 { [0; 3] } else { [255; 3] })).collect();
        let cuts = detect_shot_changes(&frames, 16, 0.99).unwrap();
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].frame_index, 7);
        assert!(cuts[0].delta < 0.99);
    }

    #[test]
    fn two_injected_cuts() {
        let frames: Vec<Frame> = (0..30)
            .map(|i| match i {
                0..=9 => textured(i, 10),
                10..=19 => solid(i, [200, 30, 90]),
                _ => textured(i, 120),
            })
            .collect();
        let cuts: Vec<usize> = detect_shot_changes(&frames, 16, 0.99).unwrap().iter().map(|c| c.frame_index).collect();
        assert_eq!(cuts, vec![10, 20]);
    }

    #[test]
    fn indices_follow_first_frame() {
        let frames: Vec<Frame> = (100..104).map(|i| solid(i, if i < 102 { [0; 3] } else { [255; 3] })).collect();
        assert_eq!(detect_shot_changes(&frames, 16, 0.99).unwrap()[0].frame_index, 102);
    }

    #[test]
    fn shot_csv() {
        let mut buf = Vec::new();
        write_shot_csv(&mut buf, &[ShotChange { frame_index: 7, delta: -0.0625 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "frame_index,delta\n7,-0.0625\n");
    }

    #[test]
    fn no_cuts_single_assigned() {
        let out = split_on_shot_changes(&seg(0, 99), &[], &FrameInterval::new(0, 99));
        assert_eq!(out.len(), 1);
        assert!(out[0].assigned);
    }

    #[test]
    fn speaker_in_first_half() {
        let out = split_on_shot_changes(&seg(0, 99), &[50], &FrameInterval::new(5, 40));
        assert_eq!(out.len(), 2);
        assert!(out[0].assigned && !out[1].assigned);
        assert_eq!(out[1].frame_interval, FrameInterval::new(50, 99));
        assert_eq!(out[1].lines, out[0].lines);
    }

    #[test]
    fn equal_overlap_prefers_earlier() {
        let out = split_on_shot_changes(&seg(0, 99), &[50], &FrameInterval::new(40, 59));
        assert!(out[0].assigned && !out[1].assigned);
    }

    #[test]
    fn cuts_outside_are_ignored() {
        let out = split_on_shot_changes(&seg(10, 20), &[3, 10, 21, 40], &FrameInterval::new(10, 20));
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn static_speaker_not_split() {
        let t = track(1, 0..=99, |_| 100.0);
        assert_eq!(split_moving_speaker(&seg(0, 99), &t, 1.0, 12).len(), 1);
    }

    #[test]
    fn teleport_splits() {
        let t = track(1, 0..=99, |f| if f < 40 { 20.0 } else { 120.0 });
        let out = split_moving_speaker(&seg(0, 99), &t, 1.0, 12);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].refined_interval.first, 40);
        assert_eq!(out[1].lines, out[0].lines);
    }

    #[test]
    fn slow_drift_within_limit() {
        let t = track(1, 0..=99, |f| 100.0 + f as f64 * 0.15);
        assert_eq!(split_moving_speaker(&seg(0, 99), &t, 1.0, 12).len(), 1);
    }

    #[test]
    fn late_jump_respects_min_length() {
        let t = track(1, 0..=99, |f| if f < 95 { 20.0 } else { 120.0 });
        assert_eq!(split_moving_speaker(&seg(0, 99), &t, 1.0, 12).len(), 1);
    }

    #[test]
    fn word_proportional_turns() {
        let s = SubtitleSegment::new(3, 0, 4000, &["- Yes I am.", "- No."]);
        let turns = split_speaker_turns(&s);
        let parent = SpeakingVideoSegment::new(3, s.lines.clone(), FrameInterval::new(0, 99));
        let out = split_multi_speaker(&parent, &turns, None);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].frame_interval, FrameInterval::new(0, 74));
        assert_eq!(out[1].frame_interval, FrameInterval::new(75, 99));
        assert_eq!(out[0].lines, vec!["Yes I am."]);
        assert_eq!(out[1].turn, Some(1));
    }

    #[test]
    fn one_turn_is_identity() {
        let parent = seg(0, 49);
        let turns = split_speaker_turns(&SubtitleSegment::new(1, 0, 2000, &["hello there"]));
        assert_eq!(split_multi_speaker(&parent, &turns, None), vec![parent]);
    }

    #[test]
    fn equal_words_equal_halves() {
        let r = proportional_ranges(&FrameInterval::new(10, 59), &[2, 2]).unwrap();
        assert_eq!(r, vec![FrameInterval::new(10, 34), FrameInterval::new(35, 59)]);
    }

    #[test]
    fn too_short_for_turns() {
        assert!(proportional_ranges(&FrameInterval::new(0, 1), &[1, 1, 1]).is_none());
        let r = proportional_ranges(&FrameInterval::new(0, 2), &[100, 0, 0]).unwrap();
        assert!(r.iter().all(|i| i.len() == 1));
    }

    #[test]
    fn snaps_to_face_transition() {
        let ranges = proportional_ranges(&FrameInterval::new(0, 99), &[1, 1]).unwrap();
        let ts = vec![track(1, 0..=29, |_| 10.0), track(2, 32..=99, |_| 80.0)];
        let snapped = snap_turn_ranges(&ranges, &ts);
        assert_eq!(snapped, vec![FrameInterval::new(0, 30), FrameInterval::new(31, 99)]);
    }

    #[test]
    fn no_snap_when_both_faces_visible() {
        let ranges = proportional_ranges(&FrameInterval::new(0, 99), &[1, 1]).unwrap();
        let ts = vec![track(1, 0..=99, |_| 10.0), track(2, 0..=99, |_| 80.0)];
        assert_eq!(snap_turn_ranges(&ranges, &ts), ranges);
    }

    #[test]
    fn refine_cases() {
        let srt = FrameInterval::new(0, 99);
        assert_eq!(refine_speaking_time(&srt, &FrameInterval::new(0, 500), 15), srt);
        assert_eq!(refine_speaking_time(&srt, &FrameInterval::new(20, 79), 15), FrameInterval::new(20, 79));
        assert_eq!(refine_speaking_time(&srt, &FrameInterval::new(200, 300), 15), srt);
        assert_eq!(refine_speaking_time(&srt, &FrameInterval::new(95, 300), 15), srt);
    }

    fn assert_partition(parent: &FrameInterval, pieces: &[FrameInterval]) -> Result<(), TestCaseError> {
        prop_assert_eq!(pieces.first().unwrap().first, parent.first);
        prop_assert_eq!(pieces.last().unwrap().last, parent.last);
        for w in pieces.windows(2) {
            prop_assert_eq!(w[0].last + 1, w[1].first);
        }
        Ok(())
    }

    proptest! {
        #[test]
        fn shot_split_partitions(first in 0usize..100, len in 1usize..300, cuts in prop::collection::vec(0usize..500, 0..10), a in 0usize..500, b in 0usize..500) {
            let parent = seg(first, first + len - 1);
            let span = FrameInterval::new(a.min(b), a.max(b));
            let out = split_on_shot_changes(&parent, &cuts, &span);
            let ivs: Vec<FrameInterval> = out.iter().map(|s| s.frame_interval).collect();
            assert_partition(&parent.frame_interval, &ivs)?;
            prop_assert_eq!(out.iter().filter(|s| s.assigned).count(), 1);
        }

        #[test]
        fn moving_split_partitions(len in 1usize..200, jumps in prop::collection::vec((0usize..200, -200.0..200.0f64), 0..6), min in 1usize..20, lead in 0usize..30, tail in 0usize..30) {
            let t = track(1, 0..=len - 1, |f| jumps.iter().filter(|j| j.0 <= f).map(|j| j.1).sum::<f64>() + 300.0);
            let mut parent = seg(0, len - 1 + lead + tail);
            parent.refined_interval = FrameInterval::new(lead.min(len - 1), len - 1);
            let out = split_moving_speaker(&parent, &t, 1.0, min);
            let ivs: Vec<FrameInterval> = out.iter().map(|s| s.refined_interval).collect();
            assert_partition(&parent.refined_interval, &ivs)?;
            let fivs: Vec<FrameInterval> = out.iter().map(|s| s.frame_interval).collect();
            assert_partition(&parent.frame_interval, &fivs)?;
            prop_assert!(ivs.len() == 1 || ivs.iter().all(|i| i.len() >= min));
        }

        #[test]
        fn proportional_partitions(first in 0usize..50, len in 1usize..200, w in prop::collection::vec(0usize..20, 1..6)) {
            let parent = FrameInterval::new(first, first + len - 1);
            match proportional_ranges(&parent, &w) {
                Some(r) => {
                    prop_assert_eq!(r.len(), w.len());
                    assert_partition(&parent, &r)?;
                }
                None => prop_assert!(len < w.len()),
            }
        }

        #[test]
        fn refine_is_subinterval(a in 0usize..200, b in 0usize..200, c in 0usize..300, d in 0usize..300) {
            let srt = FrameInterval::new(a.min(b), a.max(b));
            let span = FrameInterval::new(c.min(d), c.max(d));
            let r = refine_speaking_time(&srt, &span, 15);
            prop_assert!(srt.contains_interval(&r));
        }

        #[test]
        fn cuts_ignore_brightness_within_bins(base in 0u8..8) {
            // Shifting every channel by less than a bin width keeps bin membership.
            let make = |shift: u8| -> Vec<Frame> {
                (0..6).map(|i| {
                    let v = if i < 3 { 16 * base } else { 16 * (base + 8) };
                    solid(i, [v + shift, v + shift, v + shift])
                }).collect()
            };
            let a = detect_shot_changes(&make(0), 16, 0.99).unwrap();
            let b = detect_shot_changes(&make(15), 16, 0.99).unwrap();
            prop_assert_eq!(a.iter().map(|c| c.frame_index).collect::<Vec<_>>(), b.iter().map(|c| c.frame_index).collect::<Vec<_>>());
        }
    }
}
