//! The file formats an external detector hands to the pipeline: a frames
//! directory, detection JSON lines and audio as WAV or per-frame energy CSV.

use std::fmt::Write as _;

use dynsub::config::PipelineConfig;
use dynsub::ingest::{read_audio_energy, read_detections};
use dynsub::pipeline::{run_detect, run_place, InputPaths, OutputPaths, PipelineError};
use dynsub::synth::write_bundle;

fn bundle(seed: u64) -> (tempfile::TempDir, InputPaths) {
    let dir = tempfile::tempdir().unwrap();
    let b = write_bundle(&dir.path().join("b"), seed, true).unwrap();
    let paths = InputPaths { srt: b.srt, frames: b.frames, detections: b.detections, audio: Some(b.audio) };
    (dir, paths)
}

#[test]
fn energy_csv_and_wav_give_the_same_decisions() {
    let (dir, wav) = bundle(21);
    let config = PipelineConfig::default();
    let energy = read_audio_energy(wav.audio.as_ref().unwrap(), config.frame_rate).unwrap();
    let csv_path = dir.path().join("energy.csv");
    let mut csv = String::new();
    for v in &energy.values {
        writeln!(csv, "{v:?}").unwrap();
    }
    std::fs::write(&csv_path, csv).unwrap();
    let csv = InputPaths { audio: Some(csv_path), ..wav.clone() };
    let none = OutputPaths { ass: None, report: None, annotate: None, tracklets: None };
    assert_eq!(run_detect(&wav, &config, &none).unwrap(), run_detect(&csv, &config, &none).unwrap());
}

#[test]
fn handwritten_detection_lines_are_accepted() {
    let (_dir, paths) = bundle(22);
    let first = std::fs::read_to_string(&paths.detections).unwrap();
    let line = first.lines().next().unwrap();
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["confidence", "face", "frame", "landmarks"]);

    // Landmarks are optional.
    let minimal = "{\"frame\": 0, \"face\": [10, 20, 30, 30], \"confidence\": 0.5}\n";
    std::fs::write(&paths.detections, minimal).unwrap();
    let recs = read_detections(&paths.detections).unwrap();
    assert_eq!(recs.len(), 1);
    assert!(recs[0].landmarks.is_none());
}

#[test]
fn malformed_detections_stop_the_run() {
    let (dir, paths) = bundle(23);
    let mut text = std::fs::read_to_string(&paths.detections).unwrap();
    text.push_str("{\"frame\": 3, \"face\": [1, 1, 5, 5], \"confidence\": 0.9, \"extra\": 1}\n");
    std::fs::write(&paths.detections, text).unwrap();
    let out = OutputPaths { ass: Some(dir.path().join("out.ass")), report: None, annotate: None, tracklets: None };
    let err = run_place(&paths, &PipelineConfig::default(), &out).unwrap_err();
    assert!(matches!(err, PipelineError::Input(_)));
    assert_eq!(err.exit_code(), 2);
    assert!(!dir.path().join("out.ass").exists());
}

#[test]
fn detections_past_the_last_frame_are_rejected() {
    let (_dir, paths) = bundle(24);
    let mut text = std::fs::read_to_string(&paths.detections).unwrap();
    text.push_str("{\"frame\": 999, \"face\": [1, 1, 5, 5], \"confidence\": 0.9}\n");
    std::fs::write(&paths.detections, text).unwrap();
    let out = OutputPaths { ass: None, report: None, annotate: None, tracklets: None };
    assert_eq!(run_place(&paths, &PipelineConfig::default(), &out).unwrap_err().exit_code(), 2);
}

#[test]
fn missing_frame_file_is_reported() {
    let (_dir, paths) = bundle(25);
    std::fs::remove_file(paths.frames.join("frame_000040.png")).unwrap();
    let out = OutputPaths { ass: None, report: None, annotate: None, tracklets: None };
    let err = run_place(&paths, &PipelineConfig::default(), &out).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("40"), "{err}");
}
