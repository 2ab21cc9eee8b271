//! Short-time Fourier analysis and squared-window overlap-add synthesis.
//!
//! Frame `t` covers samples `[t * hop, t * hop + window_length)`; samples past
//! the end of the signal are zero. A signal of `n` samples yields
//! `ceil(n / hop)` frames. Synthesis divides the overlap-added output by the
//! summed squared window (floored at [`NORM_FLOOR`]), so
//! `synthesize(analyze(w))` reproduces `w` wherever at least one frame covers
//! the sample.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::waveform::{ComplexSpectrogram, MultichannelWaveform};
use crate::error::{invalid_config, invalid_input, Result};

pub const NORM_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hamming,
}

impl WindowKind {
    /// Periodic window of length `len`.
    pub fn build(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Hamming => (0..len)
                .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub fft_size: usize,
    pub window_length: usize,
    pub hop: usize,
    pub window_kind: WindowKind,
}

impl Default for StftConfig {
    /// 32 ms Hamming window, 16 ms hop, 512-point FFT at 16 kHz.
    fn default() -> Self {
        Self {
            fft_size: 512,
            window_length: 512,
            hop: 256,
            window_kind: WindowKind::Hamming,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window_length || self.window_length > self.fft_size {
            return Err(invalid_config(format!(
                "stft requires 0 < hop <= window_length <= fft_size, got hop={} window={} fft={}",
                self.hop, self.window_length, self.fft_size
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn num_frames(&self, num_samples: usize) -> usize {
        num_samples.div_ceil(self.hop)
    }

    pub fn hop_seconds(&self, sample_rate: u32) -> f64 {
        self.hop as f64 / sample_rate as f64
    }
}

/// Planned STFT for one configuration. Cheap to clone and shareable.
#[derive(Clone)]
pub struct Stft {
    cfg: StftConfig,
    window: Arc<Vec<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            window: Arc::new(cfg.window_kind.build(cfg.window_length)),
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Spectrum of one frame; `frame` holds up to `window_length` samples,
    /// missing samples are treated as zero.
    pub fn analyze_frame(&self, frame: &[f64], out: &mut [Complex64]) {
        let n = self.cfg.fft_size;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (i, (&x, &w)) in frame.iter().zip(self.window.iter()).enumerate() {
            buf[i] = Complex64::new(x * w, 0.0);
        }
        self.forward.process(&mut buf);
        out.copy_from_slice(&buf[..self.cfg.num_bins()]);
    }

    /// Windowed time-domain frame from a one-sided spectrum (synthesis
    /// window applied, not yet normalized).
    pub fn synthesize_frame(&self, spectrum: &[Complex64], out: &mut [f64]) {
        let n = self.cfg.fft_size;
        let bins = self.cfg.num_bins();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..bins].copy_from_slice(spectrum);
        buf[0].im = 0.0;
        if n % 2 == 0 {
            buf[bins - 1].im = 0.0;
        }
        for k in 1..n.div_ceil(2) {
            buf[n - k] = buf[k].conj();
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        for (o, (b, &w)) in out.iter_mut().zip(buf.iter().zip(self.window.iter())) {
            *o = b.re * scale * w;
        }
    }

    pub fn analyze(&self, w: &MultichannelWaveform) -> Result<ComplexSpectrogram> {
        if w.is_empty() {
            return Err(invalid_input("cannot analyze an empty waveform"));
        }
        let frames = self.cfg.num_frames(w.len());
        let bins = self.cfg.num_bins();
        let mut spec = ComplexSpectrogram::zeros(w.num_channels(), frames, bins);
        for z in 0..w.num_channels() {
            let x = w.channel(z);
            for t in 0..frames {
                let start = t * self.cfg.hop;
                let end = (start + self.cfg.window_length).min(x.len());
                self.analyze_frame(&x[start..end], spec.frame_mut(z, t));
            }
        }
        Ok(spec)
    }

    /// Inverse of [`Stft::analyze`]; `num_samples` defaults to `frames * hop`.
    pub fn synthesize(
        &self,
        spec: &ComplexSpectrogram,
        num_samples: Option<usize>,
        sample_rate: u32,
    ) -> Result<MultichannelWaveform> {
        if spec.num_bins() != self.cfg.num_bins() {
            return Err(invalid_config(format!(
                "spectrogram has {} bins, config expects {}",
                spec.num_bins(),
                self.cfg.num_bins()
            )));
        }
        let len = num_samples.unwrap_or(spec.num_frames() * self.cfg.hop);
        let mut channels = Vec::with_capacity(spec.num_channels());
        for z in 0..spec.num_channels() {
            let mut synth = OverlapAdd::new(self.clone());
            let mut out = Vec::with_capacity(len + self.cfg.window_length);
            for t in 0..spec.num_frames() {
                out.extend(synth.push(spec.frame(z, t)));
            }
            out.extend(synth.flush());
            out.resize(len, 0.0);
            channels.push(out);
        }
        MultichannelWaveform::new(channels, sample_rate)
    }
}

/// Streaming single-channel synthesizer. After frame `t` is pushed, samples
/// `[t * hop, (t + 1) * hop)` are final and are returned.
pub struct OverlapAdd {
    stft: Stft,
    acc: Vec<f64>,
    norm: Vec<f64>,
    frame: Vec<f64>,
}

impl OverlapAdd {
    pub fn new(stft: Stft) -> Self {
        let wl = stft.cfg.window_length;
        Self {
            acc: vec![0.0; wl],
            norm: vec![0.0; wl],
            frame: vec![0.0; wl],
            stft,
        }
    }

    pub fn push(&mut self, spectrum: &[Complex64]) -> Vec<f64> {
        let hop = self.stft.cfg.hop;
        self.stft.synthesize_frame(spectrum, &mut self.frame);
        for i in 0..self.frame.len() {
            self.acc[i] += self.frame[i];
            let w = self.stft.window[i];
            self.norm[i] += w * w;
        }
        let out: Vec<f64> = (0..hop).map(|i| self.acc[i] / self.norm[i].max(NORM_FLOOR)).collect();
        self.acc.rotate_left(hop);
        self.norm.rotate_left(hop);
        let wl = self.acc.len();
        self.acc[wl - hop..].fill(0.0);
        self.norm[wl - hop..].fill(0.0);
        out
    }

    /// Remaining partially covered samples after the last frame.
    pub fn flush(&mut self) -> Vec<f64> {
        let hop = self.stft.cfg.hop;
        let wl = self.acc.len();
        let out = (0..wl - hop)
            .map(|i| self.acc[i] / self.norm[i].max(NORM_FLOOR))
            .collect();
        self.acc.fill(0.0);
        self.norm.fill(0.0);
        out
    }
}

/// Streaming multichannel analyzer. Frame `t` is emitted once samples up to
/// `t * hop + window_length` have been pushed, or zero-padded on
/// [`FrameAnalyzer::finish`].
pub struct FrameAnalyzer {
    stft: Stft,
    buffers: Vec<Vec<f64>>,
    consumed: usize,
    total: usize,
    next_frame: usize,
}

impl FrameAnalyzer {
    pub fn new(stft: Stft, channels: usize) -> Self {
        Self {
            stft,
            buffers: vec![Vec::new(); channels],
            consumed: 0,
            total: 0,
            next_frame: 0,
        }
    }

    /// Push one block of samples (`block[z]` per channel, equal lengths) and
    /// return every frame that became complete, each laid out `[z][f]`.
    pub fn push(&mut self, block: &[&[f64]]) -> Vec<Vec<Complex64>> {
        for (buf, b) in self.buffers.iter_mut().zip(block) {
            buf.extend_from_slice(b);
        }
        self.total += block.first().map_or(0, |b| b.len());
        let mut out = Vec::new();
        let cfg = self.stft.cfg;
        while self.next_frame * cfg.hop + cfg.window_length <= self.total {
            out.push(self.emit());
        }
        out
    }

    /// Emit the trailing zero-padded frames so that `ceil(total / hop)` frames
    /// have been produced overall.
    pub fn finish(&mut self) -> Vec<Vec<Complex64>> {
        let mut out = Vec::new();
        while self.next_frame * self.stft.cfg.hop < self.total {
            out.push(self.emit());
        }
        out
    }

    fn emit(&mut self) -> Vec<Complex64> {
        let cfg = self.stft.cfg;
        let bins = cfg.num_bins();
        let start = self.next_frame * cfg.hop - self.consumed;
        let mut snapshot = vec![Complex64::new(0.0, 0.0); self.buffers.len() * bins];
        for (z, buf) in self.buffers.iter().enumerate() {
            let end = (start + cfg.window_length).min(buf.len());
            self.stft
                .analyze_frame(&buf[start..end], &mut snapshot[z * bins..(z + 1) * bins]);
        }
        self.next_frame += 1;
        let drop = (self.next_frame * cfg.hop - self.consumed).min(self.buffers[0].len());
        for buf in &mut self.buffers {
            buf.drain(..drop);
        }
        self.consumed += drop;
        snapshot
    }
}

pub fn analyze(w: &MultichannelWaveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    Stft::new(*cfg)?.analyze(w)
}

pub fn synthesize(
    spec: &ComplexSpectrogram,
    cfg: &StftConfig,
    num_samples: Option<usize>,
    sample_rate: u32,
) -> Result<MultichannelWaveform> {
    Stft::new(*cfg)?.synthesize(spec, num_samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::DEFAULT_SAMPLE_RATE;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn frame_and_bin_counts() {
        let w = MultichannelWaveform::mono(vec![0.0; 4096], DEFAULT_SAMPLE_RATE);
        let s = analyze(&w, &StftConfig::default()).unwrap();
        assert_eq!(s.num_frames(), 16);
        assert_eq!(s.num_bins(), 257);
        assert!(s.data().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn rejects_bad_config_and_empty_input() {
        let bad = StftConfig {
            hop: 600,
            ..StftConfig::default()
        };
        assert!(matches!(bad.validate(), Err(crate::Error::InvalidConfig(_))));
        let w = MultichannelWaveform::mono(vec![], DEFAULT_SAMPLE_RATE);
        assert!(matches!(
            analyze(&w, &StftConfig::default()),
            Err(crate::Error::InvalidInput(_))
        ));
    }

    #[test]
    fn cosine_peaks_at_expected_bin() {
        let x: Vec<f64> = (0..4096)
            .map(|n| (2.0 * PI * 1000.0 * n as f64 / 16000.0).cos())
            .collect();
        let cfg = StftConfig::default();
        let s = analyze(&MultichannelWaveform::mono(x.clone(), 16000), &cfg).unwrap();
        let win = WindowKind::Hamming.build(512);
        for t in 0..s.num_frames() - 2 {
            let peak = (0..257)
                .max_by(|&a, &b| s.get(0, t, a).norm().total_cmp(&s.get(0, t, b).norm()))
                .unwrap();
            assert_eq!(peak, 32);
        }
        // direct DFT of frame 3 at bin 32
        let start = 3 * 256;
        let direct: Complex64 = (0..512)
            .map(|n| {
                let ang = -2.0 * PI * 32.0 * n as f64 / 512.0;
                Complex64::from_polar(x[start + n] * win[n], ang)
            })
            .sum();
        assert!((direct - s.get(0, 3, 32)).norm() < 1e-9);
    }

    #[test]
    fn round_trip_whole_signal() {
        let cfg = StftConfig::default();
        let x = noise(5000, 1);
        let w = MultichannelWaveform::mono(x.clone(), 16000);
        let y = synthesize(&analyze(&w, &cfg).unwrap(), &cfg, Some(x.len()), 16000).unwrap();
        let err = x
            .iter()
            .zip(y.channel(0))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn single_frame_synthesis_is_normalized_window_frame() {
        let cfg = StftConfig::default();
        let stft = Stft::new(cfg).unwrap();
        let mut spec = ComplexSpectrogram::zeros(1, 1, 257);
        let frame = noise(512, 9);
        stft.analyze_frame(&frame, spec.frame_mut(0, 0));
        let y = stft.synthesize(&spec, Some(512), 16000).unwrap();
        // one frame: acc = x w^2, norm = w^2
        for n in 0..512 {
            assert!((y.channel(0)[n] - frame[n]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_spectrogram_gives_silence() {
        let cfg = StftConfig::default();
        let spec = ComplexSpectrogram::zeros(2, 10, 257);
        let y = synthesize(&spec, &cfg, None, 16000).unwrap();
        assert_eq!(y.len(), 2560);
        assert!(y.channels().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn synthesis_rejects_bin_mismatch() {
        let spec = ComplexSpectrogram::zeros(1, 3, 100);
        assert!(matches!(
            synthesize(&spec, &StftConfig::default(), None, 16000),
            Err(crate::Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn streaming_analyzer_matches_batch() {
        let cfg = StftConfig::default();
        let stft = Stft::new(cfg).unwrap();
        let a = noise(3000, 2);
        let b = noise(3000, 3);
        let w = MultichannelWaveform::new(vec![a.clone(), b.clone()], 16000).unwrap();
        let batch = stft.analyze(&w).unwrap();
        let mut an = FrameAnalyzer::new(stft.clone(), 2);
        let mut frames = Vec::new();
        for i in (0..3000).step_by(100) {
            frames.extend(an.push(&[&a[i..i + 100], &b[i..i + 100]]));
        }
        frames.extend(an.finish());
        assert_eq!(frames.len(), batch.num_frames());
        for (t, snap) in frames.iter().enumerate() {
            assert_eq!(snap, &batch.snapshot(t));
        }
    }
}
