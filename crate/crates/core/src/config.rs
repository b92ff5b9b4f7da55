//! Pipeline configuration: one flat TOML table whose every key has a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::Thresholds;
use crate::placement::{FontConfig, PlacementParams, Weights};
use crate::render::AssStyle;
use crate::tracking::AssociationParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
    pub theta5: f64,

    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    /// Gap between the face box and a candidate subtitle box, in pixels.
    pub margin: f64,
    pub pad_bottom: f64,
    pub glyph_w: f64,
    pub glyph_h: f64,
    pub box_pad: f64,
    pub font: String,

    pub hist_bins: usize,
    pub shot_threshold: f64,

    pub iou_min: f64,
    pub size_ratio_max: f64,
    pub appearance_dist_max: f64,
    pub max_gap: usize,
    pub motion_angle_max: f64,
    pub min_overlap_fraction: f64,

    /// Face-width multiple a speaker must move before the subtitle follows.
    pub beta: f64,
    pub min_segment_frames: usize,
    /// Shortest refined display time, in frames.
    pub min_display: usize,
    /// Snap multi-speaker turn boundaries to face appearances.
    pub snap_turns: bool,
    pub frame_rate: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let t = Thresholds::<f64>::default();
        let w = Weights::<f64>::default();
        let a = AssociationParams::default();
        let f = FontConfig::default();
        Self {
            theta1: t.theta1,
            theta2: t.theta2,
            theta3: t.theta3,
            theta4: t.theta4,
            theta5: t.theta5,
            w1: w.w1,
            w2: w.w2,
            w3: w.w3,
            margin: 8.0,
            pad_bottom: 10.0,
            glyph_w: f.glyph_w,
            glyph_h: f.glyph_h,
            box_pad: f.pad,
            font: "Monospace".into(),
            hist_bins: 16,
            shot_threshold: crate::segmentation::DEFAULT_SHOT_THRESHOLD,
            iou_min: a.iou_min,
            size_ratio_max: a.size_ratio_max,
            appearance_dist_max: a.appearance_dist_max,
            max_gap: a.max_gap,
            motion_angle_max: a.motion_angle_max,
            min_overlap_fraction: a.min_overlap_fraction,
            beta: 1.0,
            min_segment_frames: 12,
            min_display: 15,
            snap_turns: true,
            frame_rate: 25.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive, got {v}"))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), String> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be non-negative, got {v}"))
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Effective configuration as TOML; loading it back gives an equal value.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all TOML-representable")
    }

    /// Apply `key=value` overrides; values use TOML syntax, bare words are
    /// taken as strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table: toml::Table = toml::from_str(&self.to_toml()).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o.split_once('=').ok_or_else(|| ConfigError::Parse(format!("override {o:?} is not key=value")))?;
            let (key, raw) = (key.trim(), raw.trim());
            let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
                Ok(mut t) => t.remove("v").expect("parsed table has the key"),
                Err(_) => toml::Value::String(raw.to_string()),
            };
            table.insert(key.to_string(), value);
        }
        Self::from_toml(&table.to_string())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.thresholds().validate()?;
        for (n, v) in [("w1", self.w1), ("w2", self.w2), ("w3", self.w3)] {
            if !v.is_finite() {
                return Err(format!("{n} must be finite"));
            }
        }
        non_negative("margin", self.margin)?;
        non_negative("pad_bottom", self.pad_bottom)?;
        positive("glyph_w", self.glyph_w)?;
        positive("glyph_h", self.glyph_h)?;
        non_negative("box_pad", self.box_pad)?;
        if self.font.is_empty() || self.font.contains(',') {
            return Err("font must be a non-empty name without commas".into());
        }
        if self.hist_bins == 0 || self.hist_bins > 256 || 256 % self.hist_bins != 0 {
            return Err(format!("hist_bins must divide 256, got {}", self.hist_bins));
        }
        if !(self.shot_threshold > -1.0 && self.shot_threshold <= 1.0) {
            return Err(format!("shot_threshold must be in (-1, 1], got {}", self.shot_threshold));
        }
        self.association().validate()?;
        positive("beta", self.beta)?;
        if self.min_segment_frames == 0 {
            return Err("min_segment_frames must be positive".into());
        }
        positive("frame_rate", self.frame_rate)?;
        Ok(())
    }

    pub fn thresholds(&self) -> Thresholds<f64> {
        Thresholds { theta1: self.theta1, theta2: self.theta2, theta3: self.theta3, theta4: self.theta4, theta5: self.theta5 }
    }

    pub fn weights(&self) -> Weights<f64> {
        Weights { w1: self.w1, w2: self.w2, w3: self.w3 }
    }

    pub fn association(&self) -> AssociationParams {
        AssociationParams {
            iou_min: self.iou_min,
            size_ratio_max: self.size_ratio_max,
            appearance_dist_max: self.appearance_dist_max,
            max_gap: self.max_gap,
            motion_angle_max: self.motion_angle_max,
            min_overlap_fraction: self.min_overlap_fraction,
        }
    }

    pub fn font_config(&self) -> FontConfig {
        FontConfig { glyph_w: self.glyph_w, glyph_h: self.glyph_h, pad: self.box_pad }
    }

    pub fn placement_params(&self, screen: (f64, f64)) -> PlacementParams<f64> {
        PlacementParams { screen, weights: self.weights(), margin: self.margin, pad_bottom: self.pad_bottom }
    }

    pub fn ass_style(&self) -> AssStyle {
        AssStyle { font: self.font.clone(), font_size: self.glyph_h, box_pad: self.box_pad, frame_rate: self.frame_rate }
    }
}
