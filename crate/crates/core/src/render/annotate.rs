use std::collections::BTreeMap;
use std::path::Path;

use super::{arrow_triangle, RenderedSegment};
use crate::geom::{Point, Rect};
use crate::ingest::{Frame, FramePattern, IngestError};
use crate::tracking::Tracklet;

pub const SPEAKER_COLOR: [u8; 3] = [255, 255, 0];
pub const NON_SPEAKER_COLOR: [u8; 3] = [255, 0, 0];
pub const SUBTITLE_COLOR: [u8; 3] = [255, 255, 255];

struct Canvas<'a> {
    rgb: &'a mut [u8],
    w: i64,
    h: i64,
}

impl Canvas<'_> {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if (0..self.w).contains(&x) && (0..self.h).contains(&y) {
            let i = ((y * self.w + x) * 3) as usize;
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    /// Two-pixel outline hugging the inside of `r`.
    fn rect(&mut self, r: &Rect<f64>, c: [u8; 3]) {
        let (x0, y0) = (r.x.round() as i64, r.y.round() as i64);
        let (x1, y1) = (r.right().round() as i64 - 1, r.bottom().round() as i64 - 1);
        for t in 0..2 {
            for x in x0..=x1 {
                self.put(x, y0 + t, c);
                self.put(x, y1 - t, c);
            }
            for y in y0..=y1 {
                self.put(x0 + t, y, c);
                self.put(x1 - t, y, c);
            }
        }
    }

    fn line(&mut self, a: Point<f64>, b: Point<f64>, c: [u8; 3]) {
        let steps = (b.x - a.x).abs().max((b.y - a.y).abs()).ceil().max(1.0) as i64;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            self.put((a.x + (b.x - a.x) * t).round() as i64, (a.y + (b.y - a.y) * t).round() as i64, c);
        }
    }
}

/// Copy of `frame` with the face boxes, subtitle boxes and arrows of every
/// segment showing on it.
pub fn draw_annotations(frame: &Frame, segments: &[&RenderedSegment], tracklets: &[Tracklet]) -> Frame {
    let mut rgb = frame.rgb.clone();
    let mut canvas = Canvas { rgb: &mut rgb, w: frame.width() as i64, h: frame.height() as i64 };
    for s in segments {
        let speaker = s.speaker();
        if let Some(d) = &s.decision {
            for &id in d.features.keys().filter(|&&id| Some(id) != speaker) {
                if let Some(r) = tracklets.iter().find(|t| t.id == id).and_then(|t| t.record_at(frame.index)) {
                    canvas.rect(&r.face, NON_SPEAKER_COLOR);
                }
            }
        }
        if let Some(r) = speaker.and_then(|id| tracklets.iter().find(|t| t.id == id)).and_then(|t| t.record_at(frame.index)) {
            canvas.rect(&r.face, SPEAKER_COLOR);
        }
    }
    for s in segments {
        let rect = s.placement.rect();
        if let Some(target) = s.placement.arrow_target {
            let tri = arrow_triangle(&rect, target);
            canvas.line(tri[0], tri[2], SPEAKER_COLOR);
            canvas.line(tri[1], tri[2], SPEAKER_COLOR);
            canvas.line(tri[0], tri[1], SPEAKER_COLOR);
        }
        canvas.rect(&rect, SUBTITLE_COLOR);
    }
    Frame::from_rgb(frame.index, frame.size, rgb)
}

/// Writes one PNG per frame covered by an assigned segment and returns how
/// many were written.
pub fn annotate_frames(frames: &[Frame], segments: &[RenderedSegment], tracklets: &[Tracklet], out_dir: &Path) -> Result<usize, IngestError> {
    let mut by_frame: BTreeMap<usize, Vec<&RenderedSegment>> = BTreeMap::new();
    for s in segments.iter().filter(|s| s.segment.assigned) {
        for f in s.segment.refined_interval.frames() {
            by_frame.entry(f).or_default().push(s);
        }
    }
    if by_frame.is_empty() {
        return Ok(0);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| IngestError::Io { path: out_dir.to_path_buf(), source: e })?;
    let pattern = FramePattern::default();
    let mut written = 0;
    for (index, segs) in by_frame {
        let Some(frame) = frames.get(index) else { continue };
        draw_annotations(frame, &segs, tracklets).save(&out_dir.join(pattern.file_name(index, "png")))?;
        written += 1;
    }
    Ok(written)
}
