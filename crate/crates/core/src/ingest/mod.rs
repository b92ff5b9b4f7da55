//! Loading frames, external face detections and audio, plus the per-frame
//! measurements derived from them (color histograms, clothing boxes).

mod audio;
mod detections;
mod frames;
mod histogram;

pub use audio::{audio_energy_from_pcm, read_audio_energy, read_energy_csv, read_wav_energy, AudioEnergySeries};
pub use detections::{parse_detections, read_detections, write_detections, DetectionRecord};
pub use frames::{load_frames, open_frame_sequence, Frame, FramePattern, FrameSource};
pub use histogram::{histogram_similarity, rgb_histogram, Histogram};

use std::path::PathBuf;

use thiserror::Error;

use crate::geom::{FrameSize, Rect};
use crate::BBox;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode image: {message}")]
    Image { path: PathBuf, message: String },
    #[error("no frame files found in {0}")]
    NoFrames(PathBuf),
    #[error("frame {0} appears more than once")]
    DuplicateFrame(usize),
    #[error("frame {0} is missing from the sequence")]
    MissingFrame(usize),
    #[error("frame {index} is {found:?}, expected {expected:?}")]
    DimensionMismatch { index: usize, expected: FrameSize, found: FrameSize },
    #[error("line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error("bins per channel must divide 256, got {0}")]
    BadBinCount(usize),
    #[error("histograms have different bin layouts")]
    BinMismatch,
    #[error("histogram has zero variance")]
    DegenerateHistogram,
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("unsupported audio: {0}")]
    BadAudio(String),
}

/// Clothing region under a face: `2d` wide, `1.5d` tall (d = face width),
/// starting `0.2 * face height` below the chin, centered on the face.
pub fn clothing_box_unclipped(face: &BBox) -> BBox {
    let d = face.w;
    let w = 2.0 * d;
    let h = 1.5 * d;
    let cx = face.x + face.w / 2.0;
    Rect::new(cx - w / 2.0, face.y + face.h + 0.2 * face.h, w, h)
}

/// Clothing box clipped to the frame; `None` when clipping leaves nothing.
pub fn derive_clothing_box(face: &BBox, size: FrameSize) -> Option<BBox> {
    clothing_box_unclipped(face).clip(size.width as f64, size.height as f64)
}
