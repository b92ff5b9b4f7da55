use super::{Frame, IngestError};

/// Per-channel RGB histogram with `bins_per_channel` equal-width bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub bins_per_channel: usize,
    /// Counts for R, G and B, each of length `bins_per_channel`.
    pub counts: [Vec<u32>; 3],
}

impl Histogram {
    /// R, G and B bins laid end to end.
    pub fn concatenated(&self) -> impl Iterator<Item = u32> + '_ {
        self.counts.iter().flatten().copied()
    }
}

pub fn rgb_histogram(frame: &Frame, bins_per_channel: usize) -> Result<Histogram, IngestError> {
    if bins_per_channel == 0 || bins_per_channel > 256 || 256 % bins_per_channel != 0 {
        return Err(IngestError::BadBinCount(bins_per_channel));
    }
    let shift = (256 / bins_per_channel).trailing_zeros();
    let mut counts = [vec![0u32; bins_per_channel], vec![0u32; bins_per_channel], vec![0u32; bins_per_channel]];
    for px in frame.rgb.chunks_exact(3) {
        for (c, &v) in px.iter().enumerate() {
            counts[c][(v >> shift) as usize] += 1;
        }
    }
    Ok(Histogram { bins_per_channel, counts })
}

/// Pearson correlation of the concatenated channel histograms.
pub fn histogram_similarity(a: &Histogram, b: &Histogram) -> Result<f64, IngestError> {
    if a.bins_per_channel != b.bins_per_channel {
        return Err(IngestError::BinMismatch);
    }
    let n = (3 * a.bins_per_channel) as f64;
    let mean_a = a.concatenated().map(f64::from).sum::<f64>() / n;
    let mean_b = b.concatenated().map(f64::from).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.concatenated().zip(b.concatenated()) {
        let dx = f64::from(x) - mean_a;
        let dy = f64::from(y) - mean_b;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(IngestError::DegenerateHistogram);
    }
    // saa * sbb is commutative, so the result is exactly symmetric.
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}
