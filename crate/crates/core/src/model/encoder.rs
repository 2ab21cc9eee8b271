use num_complex::Complex64;

use super::config::ModelConfig;
use super::layers::{relu, CausalConv2d, FrameHistory, Linear};
use super::weights::ModelWeights;
use crate::error::{invalid_input, Result};
use crate::features::{ipd_value, lps_value};
use crate::tensor::Tensor3;

pub type EmbeddingTensor = Tensor3;

/// Two causal 3x3 convolutions, each followed by ReLU.
#[derive(Debug, Clone)]
pub struct ConvEncoder {
    conv1: CausalConv2d,
    conv2: CausalConv2d,
}

#[derive(Debug, Clone)]
pub struct ConvEncoderState {
    h1: FrameHistory,
    h2: FrameHistory,
}

impl ConvEncoder {
    fn load(w: &ModelWeights, prefix: &str, inputs: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            conv1: CausalConv2d::load(w, &format!("{prefix}.conv1"), inputs, hidden, 3, 3)?,
            conv2: CausalConv2d::load(w, &format!("{prefix}.conv2"), hidden, hidden, 3, 3)?,
        })
    }

    fn new_state(&self, bins: usize) -> ConvEncoderState {
        ConvEncoderState {
            h1: self.conv1.new_state(bins),
            h2: self.conv2.new_state(bins),
        }
    }

    fn step(&self, s: &mut ConvEncoderState, x: &[f32], bins: usize) -> Vec<f32> {
        let mut a = self.conv1.step(&mut s.h1, x, bins);
        a.iter_mut().for_each(|v| *v = relu(*v));
        let mut b = self.conv2.step(&mut s.h2, &a, bins);
        b.iter_mut().for_each(|v| *v = relu(*v));
        b
    }
}

/// Spectrum, LPS and IPD encoders followed by a 1x1 merge to C channels.
#[derive(Debug, Clone)]
pub struct Encoders {
    zones: usize,
    bins: usize,
    ipd_pair: (usize, usize),
    lps_floor: f64,
    spec: ConvEncoder,
    lps: ConvEncoder,
    ipd: ConvEncoder,
    merge: Linear,
}

#[derive(Debug, Clone)]
pub struct EncodersState {
    spec: ConvEncoderState,
    lps: ConvEncoderState,
    ipd: ConvEncoderState,
}

impl Encoders {
    pub fn load(w: &ModelWeights, cfg: &ModelConfig) -> Result<Self> {
        let (z, ce) = (cfg.zones, cfg.encoder_channels);
        Ok(Self {
            zones: z,
            bins: cfg.num_bins(),
            ipd_pair: cfg.ipd_pair,
            lps_floor: cfg.lps_floor,
            spec: ConvEncoder::load(w, "enc.spec", 2 * z, ce)?,
            lps: ConvEncoder::load(w, "enc.lps", z, ce)?,
            ipd: ConvEncoder::load(w, "enc.ipd", 2, ce)?,
            merge: Linear::load(w, "enc.merge", 3 * ce, cfg.embed_channels)?,
        })
    }

    pub fn new_state(&self) -> EncodersState {
        EncodersState {
            spec: self.spec.new_state(self.bins),
            lps: self.lps.new_state(self.bins),
            ipd: self.ipd.new_state(self.bins),
        }
    }

    /// One frame from precomputed feature frames (`[c][f]` blocks).
    pub fn step_features(&self, s: &mut EncodersState, stacked: &[f32], lps: &[f32], ipd: &[f32]) -> Vec<f32> {
        let bins = self.bins;
        let mut cat = self.spec.step(&mut s.spec, stacked, bins);
        cat.extend(self.lps.step(&mut s.lps, lps, bins));
        cat.extend(self.ipd.step(&mut s.ipd, ipd, bins));
        self.merge.pointwise(&cat, bins)
    }

    /// Features for one `[z][f]` spectrum snapshot.
    pub fn frame_features(&self, snapshot: &[Complex64]) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
        let (z, bins) = (self.zones, self.bins);
        let mut stacked = vec![0.0f32; 2 * z * bins];
        let mut lps = vec![0.0f32; z * bins];
        for (i, v) in snapshot.iter().enumerate() {
            stacked[i] = v.re as f32;
            stacked[z * bins + i] = v.im as f32;
            lps[i] = lps_value(*v, self.lps_floor) as f32;
        }
        let mut ipd = vec![0.0f32; 2 * bins];
        for f in 0..bins {
            let (c, s) = if z >= 2 {
                let (a, b) = self.ipd_pair;
                ipd_value(snapshot[a * bins + f], snapshot[b * bins + f])
            } else {
                (1.0, 0.0)
            };
            ipd[f] = c as f32;
            ipd[bins + f] = s as f32;
        }
        (stacked, lps, ipd)
    }

    pub fn step(&self, s: &mut EncodersState, snapshot: &[Complex64]) -> Vec<f32> {
        let (stacked, lps, ipd) = self.frame_features(snapshot);
        self.step_features(s, &stacked, &lps, &ipd)
    }

    /// Whole-tensor pass: `yr` is 2Z x T x F, `lps` Z x T x F, `ipd` 2 x T x F.
    pub fn forward(&self, yr: &Tensor3, lps: &Tensor3, ipd: &Tensor3) -> Result<EmbeddingTensor> {
        let (z, bins) = (self.zones, self.bins);
        let t_n = yr.num_frames();
        if yr.shape() != (2 * z, t_n, bins) || lps.shape() != (z, t_n, bins) || ipd.shape() != (2, t_n, bins) {
            return Err(invalid_input(format!(
                "encoder inputs {:?}, {:?}, {:?} inconsistent with Z={z}, F={bins}",
                yr.shape(),
                lps.shape(),
                ipd.shape()
            )));
        }
        let mut s = self.new_state();
        let frames: Vec<Vec<f32>> = (0..t_n)
            .map(|t| self.step_features(&mut s, &yr.frame(t), &lps.frame(t), &ipd.frame(t)))
            .collect();
        Ok(Tensor3::from_frames(self.merge.outputs, bins, &frames))
    }
}
