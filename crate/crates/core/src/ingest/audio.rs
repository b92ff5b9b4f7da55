use std::path::Path;

use super::IngestError;

/// One non-negative energy value per video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioEnergySeries {
    pub values: Vec<f64>,
    pub frame_rate: f64,
}

impl AudioEnergySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Truncate or zero-pad to exactly `frames` values.
    pub fn fit_to(mut self, frames: usize) -> Self {
        self.values.resize(frames, 0.0);
        self
    }
}

/// RMS of the PCM samples inside each video frame's time window. The final
/// partial window is kept.
pub fn audio_energy_from_pcm(samples: &[i16], sample_rate: u32, frame_rate: f64) -> Result<AudioEnergySeries, IngestError> {
    if sample_rate < 8000 {
        return Err(IngestError::BadAudio(format!("sample rate {sample_rate} below 8000 Hz")));
    }
    if !(frame_rate > 0.0 && frame_rate.is_finite()) {
        return Err(IngestError::BadAudio(format!("frame rate {frame_rate} must be positive")));
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyAudio);
    }
    let window = sample_rate as f64 / frame_rate;
    let count = (samples.len() as f64 / window - 1e-9).ceil().max(1.0) as usize;
    let boundary = |i: usize| ((i as f64 * window + 1e-9).floor() as usize).min(samples.len());
    let values = (0..count)
        .map(|i| {
            let chunk = &samples[boundary(i)..boundary(i + 1).max(boundary(i) + 1).min(samples.len())];
            let sq: f64 = chunk.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
            (sq / chunk.len() as f64).sqrt()
        })
        .collect();
    Ok(AudioEnergySeries { values, frame_rate })
}

/// 16-bit mono PCM WAV reduced to per-frame RMS.
pub fn read_wav_energy(path: &Path, frame_rate: f64) -> Result<AudioEnergySeries, IngestError> {
    let bad = |m: String| IngestError::BadAudio(format!("{}: {m}", path.display()));
    let mut reader = hound::WavReader::open(path).map_err(|e| bad(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(bad(format!("expected 16-bit mono PCM, found {} channel(s) at {} bits", spec.channels, spec.bits_per_sample)));
    }
    let samples = reader.samples::<i16>().collect::<Result<Vec<_>, _>>().map_err(|e| bad(e.to_string()))?;
    audio_energy_from_pcm(&samples, spec.sample_rate, frame_rate)
}

/// Precomputed energies, one value per line.
pub fn read_energy_csv(path: &Path, frame_rate: f64) -> Result<AudioEnergySeries, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| IngestError::SchemaError { line: i + 1, message: format!("not a number: {line:?}") })?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(IngestError::SchemaError { line: i + 1, message: format!("energy {v} must be finite and >= 0") });
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(IngestError::EmptyAudio);
    }
    Ok(AudioEnergySeries { values, frame_rate })
}

/// Dispatch on extension: `.wav` is decoded, anything else is read as CSV.
pub fn read_audio_energy(path: &Path, frame_rate: f64) -> Result<AudioEnergySeries, IngestError> {
    let is_wav = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if is_wav {
        read_wav_energy(path, frame_rate)
    } else {
        read_energy_csv(path, frame_rate)
    }
}
