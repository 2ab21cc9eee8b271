use num_complex::Complex64;

use crate::error::{invalid_input, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Z time-domain channels of equal length, one per zone microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelWaveform {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl MultichannelWaveform {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(invalid_input("waveform needs at least one channel"));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(invalid_input("all channels must have equal length"));
        }
        if sample_rate == 0 {
            return Err(invalid_input("sample rate must be positive"));
        }
        Ok(Self { channels, sample_rate })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            channels: vec![samples],
            sample_rate,
        }
    }

    pub fn zeros(num_channels: usize, len: usize, sample_rate: u32) -> Self {
        Self {
            channels: vec![vec![0.0; len]; num_channels.max(1)],
            sample_rate,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_seconds(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn channel_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// First `len` samples of every channel (shorter signals are returned whole).
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        Self {
            channels: self.channels.iter().map(|c| c[..len].to_vec()).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Single-channel waveform holding channel `i`.
    pub fn select(&self, i: usize) -> Self {
        Self::mono(self.channels[i].clone(), self.sample_rate)
    }
}

/// One-sided complex T-F representation, indexed `[z][t][f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    channels: usize,
    frames: usize,
    bins: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn zeros(channels: usize, frames: usize, bins: usize) -> Self {
        Self {
            channels,
            frames,
            bins,
            data: vec![Complex64::new(0.0, 0.0); channels * frames * bins],
        }
    }

    pub fn from_vec(channels: usize, frames: usize, bins: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != channels * frames * bins {
            return Err(invalid_input(format!(
                "spectrogram data has {} values, expected {}x{}x{}",
                data.len(),
                channels,
                frames,
                bins
            )));
        }
        Ok(Self {
            channels,
            frames,
            bins,
            data,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn num_bins(&self) -> usize {
        self.bins
    }

    #[inline]
    fn offset(&self, z: usize, t: usize) -> usize {
        (z * self.frames + t) * self.bins
    }

    #[inline]
    pub fn get(&self, z: usize, t: usize, f: usize) -> Complex64 {
        self.data[self.offset(z, t) + f]
    }

    #[inline]
    pub fn set(&mut self, z: usize, t: usize, f: usize, v: Complex64) {
        let o = self.offset(z, t);
        self.data[o + f] = v;
    }

    pub fn frame(&self, z: usize, t: usize) -> &[Complex64] {
        let o = self.offset(z, t);
        &self.data[o..o + self.bins]
    }

    pub fn frame_mut(&mut self, z: usize, t: usize) -> &mut [Complex64] {
        let o = self.offset(z, t);
        &mut self.data[o..o + self.bins]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Snapshot of all channels at frame `t`, laid out `[z][f]`.
    pub fn snapshot(&self, t: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.channels * self.bins);
        for z in 0..self.channels {
            out.extend_from_slice(self.frame(z, t));
        }
        out
    }

    /// First `frames` frames of every channel.
    pub fn truncated(&self, frames: usize) -> Self {
        let frames = frames.min(self.frames);
        let mut out = Self::zeros(self.channels, frames, self.bins);
        for z in 0..self.channels {
            for t in 0..frames {
                out.frame_mut(z, t).copy_from_slice(self.frame(z, t));
            }
        }
        out
    }
}
