//! Seeded synthetic test material: talking-head scenes with matching
//! detections and audio, multi-shot clips with known cuts, and complete
//! on-disk input bundles.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{FrameSize, Point, Rect};
use crate::ingest::{audio_energy_from_pcm, clothing_box_unclipped, write_detections, DetectionRecord, Frame, FramePattern, IngestError};
use crate::subtitle::{serialize_srt, SubtitleSegment};
use crate::BBox;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub frames: usize,
    pub size: FrameSize,
    pub min_faces: usize,
    pub max_faces: usize,
    /// When false every face is idle.
    pub with_speaker: bool,
    pub frame_rate: f64,
    pub sample_rate: u32,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self { frames: 100, size: FrameSize::new(320, 240), min_faces: 2, max_faces: 4, with_speaker: true, frame_rate: 25.0, sample_rate: 8000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceRole {
    /// Mouth moves in step with the audio.
    Speaker,
    /// Mouth moves as much as the speaker's but to its own rhythm.
    Mouthing,
    /// Mouth barely moves.
    Idle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFace {
    pub face: BBox,
    pub role: FaceRole,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub frames: Vec<Frame>,
    pub detections: Vec<DetectionRecord>,
    pub faces: Vec<SyntheticFace>,
    pub pcm: Vec<i16>,
    pub sample_rate: u32,
    /// Per-frame RMS of `pcm`.
    pub audio: Vec<f64>,
}

impl SyntheticScene {
    pub fn speaker(&self) -> Option<usize> {
        self.faces.iter().position(|f| f.role == FaceRole::Speaker)
    }
}

/// Speech-like loudness: runs of 3 to 8 frames at a random level or silent,
/// lightly smoothed.
fn envelope(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut raw = Vec::with_capacity(n + 8);
    while raw.len() < n {
        let len = rng.gen_range(3..=8);
        let level = if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.4..1.0) };
        raw.extend(std::iter::repeat_n(level, len));
    }
    raw.truncate(n);
    (0..n)
        .map(|i| {
            let prev = raw[i.saturating_sub(1)];
            let next = raw[(i + 1).min(n - 1)];
            0.25 * prev + 0.5 * raw[i] + 0.25 * next
        })
        .collect()
}

struct Canvas {
    size: FrameSize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn fill(&mut self, r: &Rect<f64>, color: impl Fn(usize, usize) -> [u8; 3]) {
        let w = self.size.width as usize;
        let x0 = r.x.max(0.0).round() as usize;
        let y0 = r.y.max(0.0).round() as usize;
        let x1 = (r.right().round().max(0.0) as usize).min(w);
        let y1 = (r.bottom().round().max(0.0) as usize).min(self.size.height as usize);
        for y in y0..y1 {
            for x in x0..x1 {
                let i = (y * w + x) * 3;
                self.rgb[i..i + 3].copy_from_slice(&color(x, y));
            }
        }
    }

    /// Blend `color` over whole columns `x0..x1`, weighting each row by how
    /// much of it lies inside `[top, bottom)`.
    fn fill_rows_aa(&mut self, x0: usize, x1: usize, top: f64, bottom: f64, color: [u8; 3]) {
        let w = self.size.width as usize;
        let h = self.size.height as usize;
        if bottom <= top {
            return;
        }
        let first = top.floor().max(0.0) as usize;
        let last = (bottom.ceil() as usize).min(h);
        for y in first..last {
            let cover = (bottom.min(y as f64 + 1.0) - top.max(y as f64)).clamp(0.0, 1.0);
            for x in x0..x1.min(w) {
                let i = (y * w + x) * 3;
                for (px, &c) in self.rgb[i..i + 3].iter_mut().zip(&color) {
                    *px = (*px as f64 * (1.0 - cover) + c as f64 * cover).round() as u8;
                }
            }
        }
    }
}

fn texture(seed: u32, x: usize, y: usize) -> i32 {
    let mut h = seed ^ (x as u32).wrapping_mul(0x9E37_79B1) ^ (y as u32).wrapping_mul(0x85EB_CA77);
    h ^= h >> 15;
    h = h.wrapping_mul(0x2C1B_3C6D);
    h ^= h >> 12;
    (h % 25) as i32 - 12
}

fn shade(base: [u8; 3], t: i32) -> [u8; 3] {
    base.map(|c| (c as i32 + t).clamp(0, 255) as u8)
}

fn random_color(rng: &mut ChaCha8Rng, lo: u8, hi: u8) -> [u8; 3] {
    [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)]
}

const LIP: [u8; 3] = [150, 60, 60];
const MOUTH_INSIDE: [u8; 3] = [20, 8, 8];

/// Geometry of one drawn face, derived from its box side `s`.
struct FaceLayout {
    face: BBox,
    mouth_y: f64,
    mouth_x0: usize,
    mouth_x1: usize,
    max_open: f64,
}

impl FaceLayout {
    fn new(face: BBox) -> Self {
        let s = face.w;
        let cx = face.x + s / 2.0;
        Self { face, mouth_y: face.y + 0.72 * s, mouth_x0: (cx - 0.18 * s).round() as usize, mouth_x1: (cx + 0.18 * s).round() as usize, max_open: 0.14 * s }
    }

    /// Mouth corners first, then eyes and chin.
    fn landmarks(&self) -> Vec<Point<f64>> {
        let (f, s) = (&self.face, self.face.w);
        let cx = f.x + s / 2.0;
        vec![
            Point::new(cx - 0.2 * s, self.mouth_y),
            Point::new(cx + 0.2 * s, self.mouth_y),
            Point::new(f.x + 0.3 * s, f.y + 0.35 * s),
            Point::new(f.x + 0.7 * s, f.y + 0.35 * s),
            Point::new(cx, f.y + 0.95 * s),
        ]
    }
}

/// Non-overlapping square faces whose centers are 15 to 95 px from the
/// frame center, so their center contributions stay within a factor of two.
fn place_faces(rng: &mut ChaCha8Rng, count: usize, size: FrameSize) -> Vec<BBox> {
    let (w, h) = (size.width as f64, size.height as f64);
    let center = Point::new(w / 2.0, h / 2.0);
    'retry: loop {
        let mut boxes: Vec<BBox> = Vec::with_capacity(count);
        for _ in 0..count {
            let mut placed = false;
            for _ in 0..200 {
                let s = rng.gen_range(36.0f64..52.0).round();
                let c = Point::new(rng.gen_range(s / 2.0..w - s / 2.0).round(), rng.gen_range(s / 2.0..h - s / 2.0 - 0.5 * s).round());
                let d = c.distance(center);
                if !(15.0..=95.0).contains(&d) {
                    continue;
                }
                let b = Rect::from_center(c, s, s);
                if boxes.iter().all(|o| !o.expand(0.4).intersects(&b)) {
                    boxes.push(b);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'retry;
            }
        }
        return boxes;
    }
}

pub fn generate_scene(seed: u64, params: &SceneParams) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.frames;
    let size = params.size;
    let count = rng.gen_range(params.min_faces..=params.max_faces);
    let boxes = place_faces(&mut rng, count, size);
    let speaker = params.with_speaker.then(|| rng.gen_range(0..count));

    let speech = envelope(&mut rng, n);
    let speech_mean = speech.iter().sum::<f64>() / n as f64;
    let faces: Vec<SyntheticFace> = boxes
        .iter()
        .enumerate()
        .map(|(i, &face)| {
            let role = if Some(i) == speaker {
                FaceRole::Speaker
            } else if params.with_speaker && rng.gen_bool(0.5) {
                FaceRole::Mouthing
            } else {
                FaceRole::Idle
            };
            SyntheticFace { face, role }
        })
        .collect();

    // Mouth opening per face per frame, in pixels.
    let openings: Vec<Vec<f64>> = faces
        .iter()
        .map(|f| {
            let max_open = FaceLayout::new(f.face).max_open;
            match f.role {
                FaceRole::Speaker => (0..n).map(|t| if t % 2 == 1 { max_open * speech[t] } else { 0.0 }).collect(),
                FaceRole::Mouthing => {
                    let own = envelope(&mut rng, n);
                    let mean = own.iter().sum::<f64>() / n as f64;
                    let k = if mean > 0.0 { speech_mean / mean } else { 1.0 };
                    (0..n).map(|t| if t % 2 == 1 { (max_open * own[t] * k).min(max_open * 1.2) } else { 0.0 }).collect()
                }
                FaceRole::Idle => (0..n).map(|_| rng.gen_range(0.0..0.5)).collect(),
            }
        })
        .collect();

    // Static layer: background, clothing, faces with closed mouths.
    let bg_a = random_color(&mut rng, 30, 90);
    let bg_b = random_color(&mut rng, 90, 160);
    let w = size.width as usize;
    let mut canvas = Canvas {
        size,
        rgb: (0..size.pixels())
            .flat_map(|i| {
                let (x, y) = (i % w, i / w);
                let t = y as f64 / size.height as f64;
                let base = [0, 1, 2].map(|c| (bg_a[c] as f64 * (1.0 - t) + bg_b[c] as f64 * t) as u8);
                shade(base, texture(7, x, y) / 3)
            })
            .collect(),
    };
    let seeds: Vec<u32> = (0..count).map(|_| rng.gen()).collect();
    for (f, &sd) in faces.iter().zip(&seeds) {
        let shirt = random_color(&mut rng, 40, 220);
        canvas.fill(&clothing_box_unclipped(&f.face), |x, y| shade(shirt, texture(sd.wrapping_add(1), x, y)));
    }
    let layouts: Vec<FaceLayout> = faces.iter().map(|f| FaceLayout::new(f.face)).collect();
    for (l, &sd) in layouts.iter().zip(&seeds) {
        let skin = [rng.gen_range(150..=235), rng.gen_range(100..=190), rng.gen_range(70..=160)];
        let s = l.face.w;
        canvas.fill(&l.face, |x, y| shade(skin, texture(sd, x, y)));
        for ex in [0.3, 0.7] {
            let eye = Rect::from_center(Point::new(l.face.x + ex * s, l.face.y + 0.35 * s), 0.1 * s, 0.08 * s);
            canvas.fill(&eye, |_, _| [30, 30, 40]);
        }
        let lips = Rect::new(l.mouth_x0 as f64 - 0.04 * s, l.mouth_y - 0.09 * s, (l.mouth_x1 - l.mouth_x0) as f64 + 0.08 * s, 0.18 * s);
        canvas.fill(&lips, |_, _| LIP);
    }
    let base = canvas.rgb.clone();

    let mut frames = Vec::with_capacity(n);
    let mut detections = Vec::with_capacity(n * count);
    for t in 0..n {
        canvas.rgb.copy_from_slice(&base);
        for (l, open) in layouts.iter().zip(&openings) {
            let o = open[t];
            canvas.fill_rows_aa(l.mouth_x0, l.mouth_x1, l.mouth_y - o / 2.0, l.mouth_y + o / 2.0, MOUTH_INSIDE);
        }
        frames.push(Frame::from_rgb(t, size, canvas.rgb.clone()));
        for l in &layouts {
            detections.push(DetectionRecord { frame_index: t, face: l.face, landmarks: Some(l.landmarks()), confidence: 0.9 });
        }
    }

    // The soundtrack follows the speaker's loudness; without a speaker it is
    // unrelated background sound.
    let loudness = if params.with_speaker { speech } else { envelope(&mut rng, n) };
    let per_frame = params.sample_rate as f64 / params.frame_rate;
    let total = (n as f64 * per_frame).round() as usize;
    let pcm: Vec<i16> = (0..total)
        .map(|i| {
            let t = ((i as f64 / per_frame) as usize).min(n - 1);
            let v = rng.gen_range(-1.0..1.0) * 12000.0 * loudness[t] + rng.gen_range(-1.0..1.0) * 150.0;
            v.round() as i16
        })
        .collect();
    let audio = audio_energy_from_pcm(&pcm, params.sample_rate, params.frame_rate).expect("synthetic audio is valid").fit_to(n).values;

    SyntheticScene { frames, detections, faces, pcm, sample_rate: params.sample_rate, audio }
}

/// Frames with known hard cuts.
#[derive(Debug, Clone)]
pub struct ShotClip {
    pub frames: Vec<Frame>,
    /// First frame of every shot after the first.
    pub cuts: Vec<usize>,
}

/// `frames` frames split into `cuts + 1` shots of at least 10 frames. Each
/// shot pans a pattern in its own palette, with light per-pixel noise.
pub fn generate_shot_clip(seed: u64, frames: usize, cuts: usize, size: FrameSize) -> ShotClip {
    const MIN_SHOT: usize = 10;
    assert!(frames >= (cuts + 1) * MIN_SHOT, "too many cuts for {frames} frames");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spare = frames - (cuts + 1) * MIN_SHOT;
    let mut splits: Vec<usize> = (0..cuts).map(|_| rng.gen_range(0..=spare)).collect();
    splits.sort_unstable();
    let cut_frames: Vec<usize> = splits.iter().enumerate().map(|(i, &s)| s + (i + 1) * MIN_SHOT).collect();

    let (w, h) = (size.width as usize, size.height as usize);
    let mut out = Vec::with_capacity(frames);
    let mut shot_start = 0;
    for end in cut_frames.iter().copied().chain(std::iter::once(frames)) {
        let palette: Vec<[u8; 3]> = (0..3).map(|_| random_color(&mut rng, 0, 255)).collect();
        let period = rng.gen_range(4..12);
        let speed = rng.gen_range(1..3);
        for t in shot_start..end {
            let shift = (t - shot_start) * speed;
            let rgb: Vec<u8> = (0..w * h)
                .flat_map(|i| {
                    let (x, y) = ((i % w + shift) % w, i / w);
                    let c = palette[((x + 2 * y) / period) % 3];
                    let noise = rng.gen_range(-3..=3);
                    shade(c, noise + (y as i32 * 16 / h as i32))
                })
                .collect();
            out.push(Frame::from_rgb(t, size, rgb));
        }
        shot_start = end;
    }
    ShotClip { frames: out, cuts: cut_frames }
}

/// Paths of an input bundle written by [`write_bundle`].
#[derive(Debug, Clone)]
pub struct BundlePaths {
    pub srt: PathBuf,
    pub frames: PathBuf,
    pub detections: PathBuf,
    pub audio: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

pub fn write_frames(dir: &Path, frames: &[Frame]) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let pattern = FramePattern::default();
    for f in frames {
        f.save(&dir.join(pattern.file_name(f.index, "png")))?;
    }
    Ok(())
}

pub fn write_wav(path: &Path, pcm: &[i16], sample_rate: u32) -> Result<(), IngestError> {
    let spec = hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let bad = |e: hound::Error| IngestError::BadAudio(format!("{}: {e}", path.display()));
    let mut w = hound::WavWriter::create(path, spec).map_err(bad)?;
    for &s in pcm {
        w.write_sample(s).map_err(bad)?;
    }
    w.finalize().map_err(bad)
}

/// Subtitles for a six-second scene: one single-speaker block and one
/// two-speaker block.
pub fn bundle_subtitles() -> Vec<SubtitleSegment> {
    vec![SubtitleSegment::new(1, 200, 2600, &["Where were you last night?"]), SubtitleSegment::new(2, 3000, 5800, &["- At home, reading.", "- All night?"])]
}

/// Write a complete input bundle (frames, detections, WAV audio, SRT) for a
/// synthetic scene into `dir`.
pub fn write_bundle(dir: &Path, seed: u64, with_speaker: bool) -> Result<BundlePaths, IngestError> {
    let params = SceneParams { frames: 150, with_speaker, ..SceneParams::default() };
    let scene = generate_scene(seed, &params);
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let paths =
        BundlePaths { srt: dir.join("subtitles.srt"), frames: dir.join("frames"), detections: dir.join("detections.jsonl"), audio: dir.join("audio.wav") };
    write_frames(&paths.frames, &scene.frames)?;
    let mut dets = Vec::new();
    write_detections(&mut dets, &scene.detections).expect("writing to memory cannot fail");
    std::fs::write(&paths.detections, dets).map_err(io_err(&paths.detections))?;
    write_wav(&paths.audio, &scene.pcm, scene.sample_rate)?;
    let srt = serialize_srt(&bundle_subtitles()).expect("bundle subtitles are well formed");
    std::fs::write(&paths.srt, srt).map_err(io_err(&paths.srt))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::lip_motion_msd;
    use crate::tracking::Tracklet;

    fn small() -> SceneParams {
        SceneParams { frames: 40, ..SceneParams::default() }
    }

    #[test]
    fn scenes_are_reproducible() {
        let a = generate_scene(3, &small());
        let b = generate_scene(3, &small());
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.pcm, b.pcm);
        assert_ne!(generate_scene(4, &small()).pcm, a.pcm);
    }

    #[test]
    fn scene_shape() {
        let s = generate_scene(11, &small());
        assert_eq!(s.frames.len(), 40);
        assert_eq!(s.audio.len(), 40);
        assert!((2..=4).contains(&s.faces.len()));
        assert_eq!(s.detections.len(), 40 * s.faces.len());
        assert!(s.speaker().is_some());
        for f in &s.faces {
            assert!(f.face.within(&Rect::new(0.0, 0.0, 320.0, 240.0)));
        }
    }

    #[test]
    fn speaker_moves_lips_idle_faces_do_not() {
        for seed in 0..5 {
            let s = generate_scene(seed, &small());
            for (i, f) in s.faces.iter().enumerate() {
                let recs: Vec<_> = s.detections.iter().filter(|d| d.face == f.face).cloned().collect();
                let msd: f64 = lip_motion_msd(&Tracklet::new(i as u32, recs), &s.frames).unwrap();
                match f.role {
                    FaceRole::Idle => assert!(msd < 20.0, "idle face msd {msd}"),
                    _ => assert!(msd > 20.0, "moving face msd {msd}"),
                }
            }
        }
    }

    #[test]
    fn speakerless_scene_is_idle() {
        let s = generate_scene(5, &SceneParams { with_speaker: false, ..small() });
        assert!(s.faces.iter().all(|f| f.role == FaceRole::Idle));
    }

    #[test]
    fn shot_clip_cuts() {
        let c = generate_shot_clip(1, 200, 5, FrameSize::new(32, 24));
        assert_eq!(c.frames.len(), 200);
        assert_eq!(c.cuts.len(), 5);
        assert!(c.cuts.windows(2).all(|w| w[1] - w[0] >= 10));
        assert!(c.cuts[0] >= 10 && *c.cuts.last().unwrap() <= 190);
    }

    #[test]
    fn bundle_files_exist() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_bundle(dir.path(), 1, true).unwrap();
        assert!(p.srt.exists() && p.detections.exists() && p.audio.exists());
        assert!(p.frames.join("frame_000149.png").exists());
    }
}
