use crate::dsp::{MultichannelWaveform, Stft, StftConfig};
use crate::error::{invalid_input, Result};

pub const FBANK_MEL_BANDS: usize = 80;
pub const FBANK_LOG_FLOOR: f64 = 1e-10;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-mel filters spanning 0 Hz to Nyquist over STFT power bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    stft: Stft,
    // per band: (bin, weight) pairs with non-zero weight
    filters: Vec<Vec<(usize, f64)>>,
    floor: f64,
}

impl MelFilterbank {
    pub fn new(cfg: StftConfig, sample_rate: u32, bands: usize) -> Result<Self> {
        if bands == 0 {
            return Err(invalid_input("mel filterbank needs at least one band"));
        }
        let stft = Stft::new(cfg)?;
        let bins = cfg.num_bins();
        let fs = sample_rate as f64;
        let top = hz_to_mel(fs / 2.0);
        let edges: Vec<f64> = (0..bands + 2)
            .map(|k| mel_to_hz(top * k as f64 / (bands + 1) as f64))
            .collect();
        let filters = (0..bands)
            .map(|b| {
                let (lo, c, hi) = (edges[b], edges[b + 1], edges[b + 2]);
                (0..bins)
                    .filter_map(|k| {
                        let f = k as f64 * fs / cfg.fft_size as f64;
                        let w = if f > lo && f <= c {
                            (f - lo) / (c - lo)
                        } else if f > c && f < hi {
                            (hi - f) / (hi - c)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            stft,
            filters,
            floor: FBANK_LOG_FLOOR,
        })
    }

    pub fn num_bands(&self) -> usize {
        self.filters.len()
    }

    /// `ln(max(mel energy, floor))`, one row per STFT frame.
    pub fn log_mel(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.is_empty() {
            return Err(invalid_input("fbank input is empty"));
        }
        let spec = self.stft.analyze(&MultichannelWaveform::mono(x.to_vec(), 16000))?;
        Ok((0..spec.num_frames())
            .map(|t| {
                let frame = spec.frame(0, t);
                self.filters
                    .iter()
                    .map(|f| {
                        let e: f64 = f.iter().map(|&(k, w)| w * frame[k].norm_sqr()).sum();
                        e.max(self.floor).ln()
                    })
                    .collect()
            })
            .collect())
    }
}

impl Default for MelFilterbank {
    fn default() -> Self {
        Self::new(StftConfig::default(), 16000, FBANK_MEL_BANDS).expect("default fbank config is valid")
    }
}

/// Mean absolute difference of log-mel features over all frames and bands.
pub fn fbank_mae(a: &[f64], b: &[f64]) -> Result<f64> {
    fbank_mae_with(&MelFilterbank::default(), a, b)
}

pub fn fbank_mae_with(fb: &MelFilterbank, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid_input(format!(
            "fbank MAE needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (fa, fb_) = (fb.log_mel(a)?, fb.log_mel(b)?);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (ra, rb) in fa.iter().zip(&fb_) {
        for (x, y) in ra.iter().zip(rb) {
            sum += (x - y).abs();
            n += 1;
        }
    }
    Ok(sum / n as f64)
}
