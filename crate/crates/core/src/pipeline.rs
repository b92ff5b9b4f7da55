//! End-to-end runs: read inputs, detect speakers, place subtitles, write
//! outputs atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::cascade::{detect_speaker, SpeakerDecision, TrackletEvidence};
use crate::config::{ConfigError, PipelineConfig};
use crate::features::{CorpusStats, FrameGeometry};
use crate::geom::FrameSize;
use crate::ingest::{load_frames, open_frame_sequence, read_audio_energy, read_detections, rgb_histogram, DetectionRecord, Frame, FramePattern, IngestError};
use crate::interval::FrameInterval;
use crate::placement::{measure_subtitle_box, place_all, PlacementRequest};
use crate::render::{annotate_frames, emit_ass, emit_report, validate_ass, RenderedSegment};
use crate::segmentation::{
    detect_shot_changes, partition_at, refine_speaking_time, shot_changes_from_histograms, split_moving_speaker, split_multi_speaker, split_on_shot_changes,
    write_shot_csv, ShotChange, SpeakingVideoSegment,
};
use crate::subtitle::{parse_srt, split_speaker_turns, SubtitleSegment};
use crate::tracking::{check_frame_range, track_faces, tracklets_in_interval, write_tracklet_dump, Tracklet};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// Bad or missing input, configuration or output location.
    #[error("{0}")]
    Input(String),
    /// A result broke one of the pipeline's own guarantees.
    #[error("internal error: {0}")]
    Internal(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input(_) => 2,
            PipelineError::Internal(_) => 3,
        }
    }
}

impl From<IngestError> for PipelineError {
    fn from(e: IngestError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

fn input<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Input(format!("{context}: {e}"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), PipelineError> {
    if cond {
        Ok(())
    } else {
        Err(PipelineError::Internal(msg()))
    }
}

/// Input file locations.
#[derive(Debug, Clone, Default)]
pub struct InputPaths {
    pub srt: PathBuf,
    pub frames: PathBuf,
    pub detections: PathBuf,
    pub audio: Option<PathBuf>,
}

/// Optional output locations.
#[derive(Debug, Clone, Default)]
pub struct OutputPaths {
    pub ass: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub annotate: Option<PathBuf>,
    pub tracklets: Option<PathBuf>,
}

/// Everything needed to run the analysis, already in memory.
#[derive(Debug, Clone)]
pub struct LoadedInputs {
    pub segments: Vec<SubtitleSegment>,
    pub frames: Vec<Frame>,
    pub detections: Vec<DetectionRecord>,
    /// Per-frame audio energy, same length as `frames`.
    pub audio: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub size: FrameSize,
    pub tracklets: Vec<Tracklet>,
    pub cuts: Vec<ShotChange>,
    pub segments: Vec<RenderedSegment>,
}

pub fn load_inputs(paths: &InputPaths, config: &PipelineConfig) -> Result<LoadedInputs, PipelineError> {
    let srt_text = std::fs::read_to_string(&paths.srt).map_err(input(paths.srt.display()))?;
    let segments = parse_srt(&srt_text).map_err(input(paths.srt.display()))?;
    let frames = load_frames(&paths.frames, &FramePattern::default())?;
    let detections = read_detections(&paths.detections)?;
    check_frame_range(&detections, frames.len()).map_err(input(paths.detections.display()))?;
    let audio = match &paths.audio {
        Some(p) => Some(read_audio_energy(p, config.frame_rate)?.fit_to(frames.len()).values),
        None => None,
    };
    Ok(LoadedInputs { segments, frames, detections, audio })
}

/// Words and seconds of speech over the whole subtitle file.
pub fn corpus_stats(segments: &[SubtitleSegment], frame_rate: f64) -> Result<CorpusStats<f64>, PipelineError> {
    let words = segments.iter().flat_map(split_speaker_turns).map(|t| t.word_count()).sum();
    let time = segments.iter().map(|s| s.duration_secs()).sum();
    CorpusStats::new(words, time, frame_rate).map_err(input("subtitle statistics"))
}

fn shot_of(cuts: &[ShotChange], frame: usize) -> usize {
    cuts.partition_point(|c| c.frame_index <= frame)
}

fn hull(a: Option<FrameInterval>, b: FrameInterval) -> FrameInterval {
    match a {
        Some(a) => FrameInterval::new(a.first.min(b.first), a.last.max(b.last)),
        None => b,
    }
}

fn find(tracklets: &[Tracklet], id: u32) -> Option<&Tracklet> {
    tracklets.iter().find(|t| t.id == id)
}

/// Segment pieces in temporal order, each with its speaker decision, before placement.
struct Piece {
    segment: SpeakingVideoSegment,
    decision: Option<SpeakerDecision<f64>>,
}

struct Analyzer<'a> {
    config: &'a PipelineConfig,
    inputs: &'a LoadedInputs,
    tracklets: &'a [Tracklet],
    cuts: &'a [ShotChange],
    stats: CorpusStats<f64>,
    geometry: FrameGeometry<f64>,
}

impl Analyzer<'_> {
    fn decide(&self, interval: &FrameInterval, words: usize) -> SpeakerDecision<f64> {
        let candidates = tracklets_in_interval(self.tracklets, interval, self.config.min_overlap_fraction);
        let mut evidence = TrackletEvidence {
            tracklets: &candidates,
            frames: &self.inputs.frames,
            geometry: self.geometry,
            stats: self.stats,
            words,
            audio: self.inputs.audio.as_deref(),
        };
        let ids = evidence.candidate_ids();
        detect_speaker(&ids, &mut evidence, &self.config.thresholds())
    }

    /// Shot split, speaker detection, time refinement and moving-speaker split of one turn.
    fn turn_pieces(&self, turn: &SpeakingVideoSegment) -> Result<Vec<Piece>, PipelineError> {
        let cut_frames: Vec<usize> = self.cuts.iter().map(|c| c.frame_index).collect();
        let shots = partition_at(turn.frame_interval, &cut_frames);
        let decisions: Vec<SpeakerDecision<f64>> = shots.iter().map(|s| self.decide(s, turn.words)).collect();

        let mut span = None;
        for (shot, d) in shots.iter().zip(&decisions) {
            if let Some(active) = d.speaker.and_then(|id| find(self.tracklets, id)).and_then(|t| t.span().intersect(shot)) {
                span = Some(hull(span, active));
            }
        }
        let span = span.unwrap_or(turn.frame_interval);

        let split = split_on_shot_changes(turn, &cut_frames, &span);
        ensure(split.len() == shots.len() && split.iter().filter(|s| s.assigned).count() == 1, || {
            format!("segment {} shot split lost its single assigned piece", turn.segment_index)
        })?;

        let mut out = Vec::new();
        for (mut piece, decision) in split.into_iter().zip(decisions) {
            let speaker = decision.speaker.and_then(|id| find(self.tracklets, id));
            match (piece.assigned, speaker) {
                (true, Some(t)) => {
                    piece.refined_interval = refine_speaking_time(&piece.frame_interval, &t.span(), self.config.min_display);
                    for p in split_moving_speaker(&piece, t, self.config.beta, self.config.min_segment_frames) {
                        out.push(Piece { segment: p, decision: Some(decision.clone()) });
                    }
                }
                _ => out.push(Piece { segment: piece, decision: Some(decision) }),
            }
        }
        for (i, p) in out.iter_mut().enumerate() {
            p.segment.part = i;
        }
        Ok(out)
    }

    fn request(&self, piece: &Piece) -> Result<PlacementRequest<f64>, PipelineError> {
        let size = self.inputs.frames[0].size;
        let screen = (size.width as f64, size.height as f64);
        let b = measure_subtitle_box(&piece.segment.lines, &self.config.font_config(), screen)
            .map_err(|e| PipelineError::Input(format!("subtitle {}: {e}", piece.segment.segment_index)))?;
        let iv = piece.segment.refined_interval;
        let mean_face = |id: u32| find(self.tracklets, id).and_then(|t| t.crop(&iv)).map(|t| t.mean_face());
        let d = piece.decision.as_ref();
        let speaker_face = if piece.segment.assigned { d.and_then(|d| d.speaker).and_then(mean_face) } else { None };
        let non_speaker_faces = match (speaker_face, d) {
            (Some(_), Some(d)) => d.features.keys().filter(|&&id| Some(id) != d.speaker).filter_map(|&id| mean_face(id)).collect(),
            _ => Vec::new(),
        };
        Ok(PlacementRequest { speaker_face, non_speaker_faces, subtitle_box: b, shot: shot_of(self.cuts, iv.first) })
    }
}

/// Speaker detection and placement for every subtitle segment.
pub fn analyze(inputs: &LoadedInputs, config: &PipelineConfig) -> Result<Analysis, PipelineError> {
    config.validate().map_err(PipelineError::Input)?;
    let Some(first) = inputs.frames.first() else { return Err(PipelineError::Input("no frames".into())) };
    let size = first.size;
    if let Some(a) = &inputs.audio {
        ensure(a.len() == inputs.frames.len(), || format!("audio has {} values for {} frames", a.len(), inputs.frames.len()))?;
    }
    let stats = corpus_stats(&inputs.segments, config.frame_rate)?;
    let tracklets = track_faces(&inputs.detections, &inputs.frames, &config.association());
    let cuts = detect_shot_changes(&inputs.frames, config.hist_bins, config.shot_threshold)?;
    let analyzer = Analyzer { config, inputs, tracklets: &tracklets, cuts: &cuts, stats, geometry: FrameGeometry::from_size(size) };

    let mut pieces = Vec::new();
    for seg in &inputs.segments {
        let Some(iv) = FrameInterval::from_millis(seg.start.millis(), seg.end.millis(), config.frame_rate, inputs.frames.len()) else {
            log::warn!("subtitle {} starts after the last frame; skipped", seg.index);
            continue;
        };
        let base = SpeakingVideoSegment::new(seg.index, seg.lines.clone(), iv);
        let turns = split_speaker_turns(seg);
        let snap = config.snap_turns.then_some(tracklets.as_slice());
        let turn_segments = split_multi_speaker(&base, &turns, snap);
        let mut covered = Vec::new();
        for t in &turn_segments {
            let ps = analyzer.turn_pieces(t)?;
            covered.extend(ps.iter().map(|p| p.segment.frame_interval));
            pieces.extend(ps);
        }
        covered.sort();
        covered.dedup();
        ensure(
            covered.first().map(|c| c.first) == Some(iv.first)
                && covered.last().map(|c| c.last) == Some(iv.last)
                && covered.windows(2).all(|w| w[0].last + 1 == w[1].first),
            || format!("segment {} pieces do not partition its frames", seg.index),
        )?;
    }

    let requests = pieces.iter().map(|p| analyzer.request(p)).collect::<Result<Vec<_>, _>>()?;
    let placements = place_all(&requests, &config.placement_params((size.width as f64, size.height as f64)));
    let segments = pieces.into_iter().zip(placements).map(|(p, placement)| RenderedSegment { segment: p.segment, decision: p.decision, placement }).collect();
    Ok(Analysis { size, tracklets, cuts, segments })
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let ctx = path.display().to_string();
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(input(&ctx))?;
    tmp.write_all(bytes).map_err(input(&ctx))?;
    tmp.persist(path).map_err(|e| PipelineError::Input(format!("{ctx}: {}", e.error)))?;
    Ok(())
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub segments: usize,
    pub placed: usize,
    pub annotated: usize,
}

fn tracklet_dump(tracklets: &[Tracklet]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_tracklet_dump(&mut buf, tracklets).expect("writing to memory cannot fail");
    buf
}

/// Full run: subtitles, report and optional debug outputs.
pub fn run_place(paths: &InputPaths, config: &PipelineConfig, out: &OutputPaths) -> Result<RunSummary, PipelineError> {
    let inputs = load_inputs(paths, config)?;
    let analysis = analyze(&inputs, config)?;
    let ass = emit_ass(&analysis.segments, analysis.size, &config.ass_style());
    validate_ass(&ass).map_err(|e| PipelineError::Internal(format!("generated subtitles fail validation: {e}")))?;
    let report = emit_report(&analysis.segments, Some(config.weights()));
    ensure(report.lines().count() == analysis.segments.len(), || "report is not one record per segment".into())?;

    if let Some(p) = &out.ass {
        write_atomic(p, ass.as_bytes())?;
    }
    if let Some(p) = &out.report {
        write_atomic(p, report.as_bytes())?;
    }
    if let Some(p) = &out.tracklets {
        write_atomic(p, &tracklet_dump(&analysis.tracklets))?;
    }
    let annotated = match &out.annotate {
        Some(dir) => annotate_frames(&inputs.frames, &analysis.segments, &analysis.tracklets, dir)?,
        None => 0,
    };
    Ok(RunSummary { segments: analysis.segments.len(), placed: analysis.segments.iter().filter(|s| !s.placement.is_default()).count(), annotated })
}

/// Speaker decisions only; returns the report text and writes it when a path is given.
pub fn run_detect(paths: &InputPaths, config: &PipelineConfig, out: &OutputPaths) -> Result<String, PipelineError> {
    let inputs = load_inputs(paths, config)?;
    let analysis = analyze(&inputs, config)?;
    let report = emit_report(&analysis.segments, None);
    if let Some(p) = &out.report {
        write_atomic(p, report.as_bytes())?;
    }
    if let Some(p) = &out.tracklets {
        write_atomic(p, &tracklet_dump(&analysis.tracklets))?;
    }
    Ok(report)
}

/// Shot-change CSV for a frame directory, decoding one frame at a time.
pub fn run_shots(frames_dir: &Path, config: &PipelineConfig) -> Result<String, PipelineError> {
    config.validate().map_err(PipelineError::Input)?;
    let mut hists = Vec::new();
    for frame in open_frame_sequence(frames_dir, &FramePattern::default())? {
        hists.push(rgb_histogram(&frame?, config.hist_bins)?);
    }
    let cuts = shot_changes_from_histograms(&hists, 0, config.shot_threshold)?;
    let mut buf = Vec::new();
    write_shot_csv(&mut buf, &cuts).expect("writing to memory cannot fail");
    Ok(String::from_utf8(buf).expect("CSV is ASCII"))
}

/// Effective configuration as TOML, followed by a commented summary of any
/// inputs given. The output loads back as a configuration file.
pub fn inspect(config: &PipelineConfig, paths: &InputPaths) -> Result<String, PipelineError> {
    let mut out = config.to_toml();
    out.push('\n');
    if !paths.srt.as_os_str().is_empty() {
        let text = std::fs::read_to_string(&paths.srt).map_err(input(paths.srt.display()))?;
        let segs = parse_srt(&text).map_err(input(paths.srt.display()))?;
        let stats = corpus_stats(&segs, config.frame_rate)?;
        let turns: usize = segs.iter().map(|s| split_speaker_turns(s).len()).sum();
        let _ = writeln!(out, "# subtitles: {} segments, {turns} speaker turns", segs.len());
        let _ = writeln!(out, "# words: {}, speech seconds: {}", stats.total_words, stats.total_time);
    }
    if !paths.frames.as_os_str().is_empty() {
        let source = open_frame_sequence(&paths.frames, &FramePattern::default())?;
        let n = source.len();
        let first = Frame::load(0, &source.paths()[0])?;
        let _ = writeln!(out, "# frames: {n} at {}x{}, {:.3} s", first.size.width, first.size.height, n as f64 / config.frame_rate);
    }
    if !paths.detections.as_os_str().is_empty() {
        let dets = read_detections(&paths.detections)?;
        let frames_with = dets.iter().map(|d| d.frame_index).collect::<std::collections::BTreeSet<_>>().len();
        let _ = writeln!(out, "# detections: {} in {frames_with} frames", dets.len());
    }
    if let Some(p) = &paths.audio {
        let a = read_audio_energy(p, config.frame_rate)?;
        let _ = writeln!(out, "# audio: {} energy values", a.len());
    }
    Ok(out)
}
