//! Cascaded speaker detection over candidate face tracklets.
//!
//! Candidates are filtered by lip motion, lip-motion dominance, center
//! contribution, length consistency and finally audio-visual synchrony.
//! Each stage only runs if the previous one left more than one candidate,
//! so the costlier cues are computed for few tracklets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::features::{
    av_synchrony, center_contribution, length_consistency, lip_motion_msd, visual_motion_signal, CorpusStats, FrameGeometry, SyncWindow, TrackletFeatures,
};
use crate::ingest::Frame;
use crate::num::Scalar;
use crate::tracking::Tracklet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds<T> {
    /// Minimum lip motion.
    pub theta1: T,
    /// Lip motion dominance ratio.
    pub theta2: T,
    /// Center contribution dominance ratio.
    pub theta3: T,
    /// Required margin between the best and second-best length consistency.
    pub theta4: T,
    /// Minimum synchrony score.
    pub theta5: T,
}

impl<T: Scalar> Default for Thresholds<T> {
    fn default() -> Self {
        Self { theta1: T::of(20.0), theta2: T::of(2.5), theta3: T::of(2.0), theta4: T::of(0.1), theta5: T::of(2.0) }
    }
}

impl<T: Scalar> Thresholds<T> {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("theta1", self.theta1), ("theta2", self.theta2), ("theta3", self.theta3), ("theta4", self.theta4), ("theta5", self.theta5)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Msd,
    MsdDominance,
    Cc,
    Lc,
    Av,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Msd => "msd",
            Stage::MsdDominance => "msd-dominance",
            Stage::Cc => "cc",
            Stage::Lc => "lc",
            Stage::Av => "av",
        }
    }
}

/// Candidates left after one stage, with the value that stage looked at.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageEntry<T> {
    pub stage: Stage,
    pub survivors: Vec<(u32, T)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeakerDecision<T> {
    /// Chosen tracklet id; `None` means no speaker.
    pub speaker: Option<u32>,
    /// Stage that produced the answer; `None` only for an empty candidate set.
    pub stage: Option<Stage>,
    pub features: BTreeMap<u32, TrackletFeatures<T>>,
    pub audio_unavailable: bool,
    pub stages: Vec<StageEntry<T>>,
}

/// Supplies cue values on demand so unused stages cost nothing.
pub trait FeatureProvider<T> {
    fn msd(&mut self, id: u32) -> T;
    fn cc(&mut self, id: u32) -> T;
    fn lc(&mut self, id: u32) -> T;
    /// `None` when there is no audio track.
    fn av(&mut self, id: u32) -> Option<T>;
}

/// First id with the largest value (ids are visited in ascending order).
fn argmax<T: Scalar>(items: &[(u32, T)]) -> (u32, T) {
    let mut best = items[0];
    for &(id, v) in &items[1..] {
        if v > best.1 {
            best = (id, v);
        }
    }
    best
}

fn max_value<T: Scalar>(items: &[(u32, T)]) -> T {
    argmax(items).1
}

pub fn detect_speaker<T: Scalar, P: FeatureProvider<T>>(candidates: &[u32], provider: &mut P, thresholds: &Thresholds<T>) -> SpeakerDecision<T> {
    let mut ids = candidates.to_vec();
    ids.sort_unstable();
    ids.dedup();

    let mut d = SpeakerDecision { speaker: None, stage: None, features: BTreeMap::new(), audio_unavailable: false, stages: Vec::new() };
    if ids.is_empty() {
        return d;
    }
    let finish = |mut d: SpeakerDecision<T>, stage: Stage, speaker: Option<u32>| {
        d.stage = Some(stage);
        d.speaker = speaker;
        d
    };

    // Lip motion floor.
    let msd: Vec<(u32, T)> = ids.iter().map(|&id| (id, provider.msd(id))).collect();
    for &(id, v) in &msd {
        d.features.insert(id, TrackletFeatures { msd: v, ..Default::default() });
    }
    let s1: Vec<(u32, T)> = msd.into_iter().filter(|&(_, v)| !(v < thresholds.theta1)).collect();
    d.stages.push(StageEntry { stage: Stage::Msd, survivors: s1.clone() });
    match s1.len() {
        0 => return finish(d, Stage::Msd, None),
        1 => return finish(d, Stage::Msd, Some(s1[0].0)),
        _ => {}
    }

    // Lip motion dominance.
    let top = max_value(&s1);
    let s2: Vec<(u32, T)> = s1.into_iter().filter(|&(_, v)| !(v * thresholds.theta2 < top)).collect();
    d.stages.push(StageEntry { stage: Stage::MsdDominance, survivors: s2.clone() });
    match s2.len() {
        0 => return finish(d, Stage::MsdDominance, None),
        1 => return finish(d, Stage::MsdDominance, Some(s2[0].0)),
        _ => {}
    }

    // Center contribution dominance.
    let cc: Vec<(u32, T)> = s2.iter().map(|&(id, _)| (id, provider.cc(id))).collect();
    for &(id, v) in &cc {
        d.features.get_mut(&id).unwrap().cc = Some(v);
    }
    let top = max_value(&cc);
    let s3: Vec<(u32, T)> = cc.into_iter().filter(|&(_, v)| !(v * thresholds.theta3 < top)).collect();
    d.stages.push(StageEntry { stage: Stage::Cc, survivors: s3.clone() });
    match s3.len() {
        // Reachable only when every center contribution is negative.
        0 => return finish(d, Stage::Cc, None),
        1 => return finish(d, Stage::Cc, Some(s3[0].0)),
        _ => {}
    }

    // Length consistency margin.
    let lc: Vec<(u32, T)> = s3.iter().map(|&(id, _)| (id, provider.lc(id))).collect();
    for &(id, v) in &lc {
        d.features.get_mut(&id).unwrap().lc = Some(v);
    }
    let (best_id, best) = argmax(&lc);
    let mut sorted: Vec<T> = lc.iter().map(|&(_, v)| v).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    if best - sorted[1] > thresholds.theta4 {
        d.stages.push(StageEntry { stage: Stage::Lc, survivors: vec![(best_id, best)] });
        return finish(d, Stage::Lc, Some(best_id));
    }
    d.stages.push(StageEntry { stage: Stage::Lc, survivors: lc.clone() });

    // Audio-visual synchrony.
    let mut av = Vec::with_capacity(lc.len());
    for &(id, _) in &lc {
        match provider.av(id) {
            Some(v) => {
                d.features.get_mut(&id).unwrap().av = Some(v);
                av.push((id, v));
            }
            None => {
                d.audio_unavailable = true;
                d.stages.push(StageEntry { stage: Stage::Av, survivors: Vec::new() });
                return finish(d, Stage::Av, None);
            }
        }
    }
    let (best_id, best) = argmax(&av);
    if best > thresholds.theta5 {
        d.stages.push(StageEntry { stage: Stage::Av, survivors: vec![(best_id, best)] });
        finish(d, Stage::Av, Some(best_id))
    } else {
        d.stages.push(StageEntry { stage: Stage::Av, survivors: Vec::new() });
        finish(d, Stage::Av, None)
    }
}

/// Per-stage survivors in cascade order.
pub fn stage_report<T: Clone>(decision: &SpeakerDecision<T>) -> Vec<StageEntry<T>> {
    decision.stages.clone()
}

/// Computes cues from frames, tracklets and audio for one speaking interval.
pub struct TrackletEvidence<'a> {
    pub tracklets: &'a [Tracklet],
    pub frames: &'a [Frame],
    pub geometry: FrameGeometry<f64>,
    pub stats: CorpusStats<f64>,
    pub words: usize,
    /// Per-frame audio energy for the whole video.
    pub audio: Option<&'a [f64]>,
}

impl TrackletEvidence<'_> {
    fn get(&self, id: u32) -> &Tracklet {
        self.tracklets.iter().find(|t| t.id == id).expect("candidate id comes from the tracklet set")
    }

    pub fn candidate_ids(&self) -> Vec<u32> {
        self.tracklets.iter().map(|t| t.id).collect()
    }
}

impl FeatureProvider<f64> for TrackletEvidence<'_> {
    fn msd(&mut self, id: u32) -> f64 {
        // Single-frame tracklets show no motion.
        lip_motion_msd(self.get(id), self.frames).unwrap_or(0.0)
    }

    fn cc(&mut self, id: u32) -> f64 {
        center_contribution(self.get(id), &self.geometry)
    }

    fn lc(&mut self, id: u32) -> f64 {
        length_consistency(self.get(id).length() as f64, self.words, &self.stats)
    }

    fn av(&mut self, id: u32) -> Option<f64> {
        let audio = self.audio?;
        let t = self.get(id);
        let window = SyncWindow::new(t.first_frame(), t.last_frame().min(audio.len().saturating_sub(1)).max(t.first_frame()));
        let visual = visual_motion_signal(t, self.frames, window).ok()?;
        Some(av_synchrony(audio, &visual, window).unwrap_or(0.0))
    }
}
