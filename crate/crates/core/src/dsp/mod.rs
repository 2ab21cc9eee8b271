//! Time-frequency analysis/synthesis, convolution and WAV I/O shared by the
//! rest of the crate.

mod conv;
mod stft;
pub mod wav;
mod waveform;

pub use conv::{circular_convolve, convolve, convolve_slices, dft_real, idft_real};
pub use stft::{analyze, synthesize, FrameAnalyzer, OverlapAdd, Stft, StftConfig, WindowKind, NORM_FLOOR};
pub use waveform::{ComplexSpectrogram, MultichannelWaveform, DEFAULT_SAMPLE_RATE};

/// Mean square of a signal; zero for an empty slice.
pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

pub fn rms(x: &[f64]) -> f64 {
    power(x).sqrt()
}
