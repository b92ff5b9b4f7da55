#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod config;
pub mod features;
pub mod geom;
pub mod ingest;
pub mod interval;
pub mod num;
pub mod pipeline;
pub mod placement;
pub mod raster;
pub mod render;
pub mod segmentation;
pub mod subtitle;
pub mod synth;
pub mod tracking;

pub use geom::{FrameSize, Point, Rect};
pub use num::Scalar;

/// Pixel-space box used for detections and derived regions.
pub type BBox = Rect<f64>;

// The pipeline runs in f64.
pub type Thresholds64 = cascade::Thresholds<f64>;
pub type SpeakerDecision64 = cascade::SpeakerDecision<f64>;
pub type TrackletFeatures64 = features::TrackletFeatures<f64>;
pub type CorpusStats64 = features::CorpusStats<f64>;
pub type Weights64 = placement::Weights<f64>;
pub type PlacementContext64 = placement::PlacementContext<f64>;
pub type EnergyTerms64 = placement::EnergyTerms<f64>;
pub type Placement64 = placement::Placement<f64>;
pub type SubtitleBox64 = placement::SubtitleBox<f64>;
