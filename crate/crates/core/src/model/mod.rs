//! Forward-only mask estimator.
//!
//! Pipeline per frame: spectrum/LPS/IPD encoders and merge convolution, N
//! full-sub modules (full-band LSTM, TAC behind an optional stride-2 time
//! skip, sub-band conformer), a causal transposed convolution back to Z
//! channels, and two sigmoid heads giving speech and noise masks.
//!
//! Every stage is causal. [`Model::forward`] runs stage by stage over whole
//! tensors, [`ModelStream`] runs all stages frame by frame; both share the
//! same per-frame kernels and agree bit for bit.

mod blocks;
mod config;
mod conformer;
mod encoder;
mod layers;
mod macs;
mod weights;

use num_complex::Complex64;

pub use blocks::{is_skip_frame_selected, skip_count, time_skip_merge, time_skip_select, FullBandLstm, Tac};
pub use config::{ModelConfig, Variant};
pub use conformer::{SubbandConformer, SubbandState};
pub use encoder::{EmbeddingTensor, Encoders, EncodersState};
pub use layers::{sigmoid, CausalConv2d, CausalConvTranspose2d, FrameHistory, Linear, LstmState};
pub use macs::{count_macs, MacReport};
pub use weights::{init_random, init_zeros, ModelWeights, WeightTensor};

use weights::{Init, ParamSpec};

use crate::dsp::ComplexSpectrogram;
use crate::error::{invalid_input, Result};
use crate::features::{compute_ipd, compute_lps, stack_real_imag, FeatureTensor};
use crate::tensor::Tensor3;

/// Speech and noise masks, both Z x T x F with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair {
    pub speech: Tensor3,
    pub noise: Tensor3,
}

impl MaskPair {
    pub fn shape(&self) -> (usize, usize, usize) {
        self.speech.shape()
    }
}

/// Every parameter tensor the config requires, in a fixed order.
pub(crate) fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let mut v = Vec::new();
    let mut push = |path: String, shape: Vec<usize>, init: Init| v.push(ParamSpec { path, shape, init });
    let dense = |push: &mut dyn FnMut(String, Vec<usize>, Init), p: &str, i: usize, o: usize| {
        push(format!("{p}.weight"), vec![o, i], Init::Uniform { fan_in: i });
        push(format!("{p}.bias"), vec![o], Init::Uniform { fan_in: i });
    };
    let conv = |push: &mut dyn FnMut(String, Vec<usize>, Init), p: &str, i: usize, o: usize| {
        push(format!("{p}.weight"), vec![o, i, 3, 3], Init::Uniform { fan_in: i * 9 });
        push(format!("{p}.bias"), vec![o], Init::Uniform { fan_in: i * 9 });
    };
    let norm = |push: &mut dyn FnMut(String, Vec<usize>, Init), p: &str, d: usize| {
        push(format!("{p}.gamma"), vec![d], Init::Ones);
        push(format!("{p}.beta"), vec![d], Init::Zeros);
    };

    let (z, ce, c, h) = (cfg.zones, cfg.encoder_channels, cfg.embed_channels, cfg.subband_hidden);
    let bins = cfg.num_bins();
    for (name, inputs) in [("spec", 2 * z), ("lps", z), ("ipd", 2)] {
        conv(&mut push, &format!("enc.{name}.conv1"), inputs, ce);
        conv(&mut push, &format!("enc.{name}.conv2"), ce, ce);
    }
    dense(&mut push, "enc.merge", 3 * ce, c);

    let fb = cfg.fullband_hidden;
    for n in 0..cfg.n_full_sub {
        let p = format!("blocks.{n}");
        dense(&mut push, &format!("{p}.fullband.in_proj"), c * bins, fb);
        push(
            format!("{p}.fullband.lstm.weight_ih"),
            vec![4 * fb, fb],
            Init::Uniform { fan_in: fb },
        );
        push(
            format!("{p}.fullband.lstm.weight_hh"),
            vec![4 * fb, fb],
            Init::Uniform { fan_in: fb },
        );
        push(
            format!("{p}.fullband.lstm.bias"),
            vec![4 * fb],
            Init::Uniform { fan_in: fb },
        );
        dense(&mut push, &format!("{p}.fullband.out_proj"), fb, c * bins);

        let k = cfg.tac_channels();
        dense(&mut push, &format!("{p}.tac.linear_a"), c, k);
        dense(&mut push, &format!("{p}.tac.linear_b"), c, k);
        dense(&mut push, &format!("{p}.tac.linear_c"), 2 * k, c);

        let sb = format!("{p}.subband");
        push(
            format!("{sb}.in_conv.weight"),
            vec![h, c, 3],
            Init::Uniform { fan_in: c * 3 },
        );
        push(format!("{sb}.in_conv.bias"), vec![h], Init::Uniform { fan_in: c * 3 });
        for l in 0..cfg.conformer_layers {
            let lp = format!("{sb}.layers.{l}");
            for ff in ["ff1", "ff2"] {
                norm(&mut push, &format!("{lp}.{ff}.norm"), h);
                dense(&mut push, &format!("{lp}.{ff}.w1"), h, cfg.ff_dim);
                dense(&mut push, &format!("{lp}.{ff}.w2"), cfg.ff_dim, h);
            }
            norm(&mut push, &format!("{lp}.attn.norm"), h);
            dense(&mut push, &format!("{lp}.attn.qkv"), h, 3 * h);
            dense(&mut push, &format!("{lp}.attn.out"), h, h);
            norm(&mut push, &format!("{lp}.conv.norm"), h);
            dense(&mut push, &format!("{lp}.conv.pw1"), h, 2 * h);
            push(
                format!("{lp}.conv.dw.weight"),
                vec![h, cfg.conv_kernel],
                Init::Uniform {
                    fan_in: cfg.conv_kernel,
                },
            );
            push(
                format!("{lp}.conv.dw.bias"),
                vec![h],
                Init::Uniform {
                    fan_in: cfg.conv_kernel,
                },
            );
            dense(&mut push, &format!("{lp}.conv.pw2"), h, h);
            norm(&mut push, &format!("{lp}.final_norm"), h);
        }
        dense(&mut push, &format!("{sb}.out_proj"), h, c);
    }

    push(
        "decoder.weight".into(),
        vec![c, z, 3, 3],
        Init::Uniform { fan_in: c * 9 },
    );
    push("decoder.bias".into(), vec![z], Init::Uniform { fan_in: c * 9 });
    dense(&mut push, "heads.speech", z, z);
    dense(&mut push, "heads.noise", z, z);
    v
}

/// Parameter count implied by a config.
pub fn num_parameters(cfg: &ModelConfig) -> usize {
    param_specs(cfg).iter().map(|s| s.shape.iter().product::<usize>()).sum()
}

#[derive(Debug, Clone)]
struct FullSubBlock {
    fullband: FullBandLstm,
    tac: Tac,
    subband: SubbandConformer,
}

#[derive(Debug, Clone)]
pub struct Model {
    cfg: ModelConfig,
    encoders: Encoders,
    blocks: Vec<FullSubBlock>,
    decoder: CausalConvTranspose2d,
    speech_head: Linear,
    noise_head: Linear,
}

impl Model {
    pub fn new(cfg: ModelConfig, w: &ModelWeights) -> Result<Self> {
        cfg.validate()?;
        w.check_against(&cfg)?;
        let blocks = (0..cfg.n_full_sub)
            .map(|n| {
                let p = format!("blocks.{n}");
                Ok(FullSubBlock {
                    fullband: FullBandLstm::load(w, &format!("{p}.fullband"), &cfg)?,
                    tac: Tac::load(w, &format!("{p}.tac"), &cfg)?,
                    subband: SubbandConformer::load(w, &format!("{p}.subband"), &cfg)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            encoders: Encoders::load(w, &cfg)?,
            blocks,
            decoder: CausalConvTranspose2d::load(w, "decoder", cfg.embed_channels, cfg.zones, 3, 3)?,
            speech_head: Linear::load(w, "heads.speech", cfg.zones, cfg.zones)?,
            noise_head: Linear::load(w, "heads.noise", cfg.zones, cfg.zones)?,
            cfg,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn check_input(&self, y: &ComplexSpectrogram, start: usize) -> Result<()> {
        if y.num_channels() != self.cfg.zones || y.num_bins() != self.cfg.num_bins() {
            return Err(invalid_input(format!(
                "spectrogram is {}x{}x{}, model expects {} channels and {} bins",
                y.num_channels(),
                y.num_frames(),
                y.num_bins(),
                self.cfg.zones,
                self.cfg.num_bins()
            )));
        }
        if start > 1 {
            return Err(invalid_input(format!("time-skip start must be 0 or 1, got {start}")));
        }
        Ok(())
    }

    /// Input features for the encoders: stacked real/imag, LPS and IPD.
    pub fn features(&self, y: &ComplexSpectrogram) -> Result<(FeatureTensor, FeatureTensor, FeatureTensor)> {
        let yr = stack_real_imag(y);
        let lps = compute_lps(y, self.cfg.lps_floor)?;
        let ipd = if self.cfg.zones >= 2 {
            compute_ipd(y, self.cfg.ipd_pair.0, self.cfg.ipd_pair.1)?
        } else {
            Tensor3::from_fn(
                2,
                y.num_frames(),
                y.num_bins(),
                |c, _, _| if c == 0 { 1.0 } else { 0.0 },
            )
        };
        Ok((yr, lps, ipd))
    }

    pub fn encode(&self, yr: &Tensor3, lps: &Tensor3, ipd: &Tensor3) -> Result<EmbeddingTensor> {
        self.encoders.forward(yr, lps, ipd)
    }

    /// Stage-by-stage pass over the whole input.
    pub fn forward(&self, y: &ComplexSpectrogram, start: usize) -> Result<MaskPair> {
        self.check_input(y, start)?;
        let (yr, lps, ipd) = self.features(y)?;
        let mut e = self.encode(&yr, &lps, &ipd)?;
        for b in &self.blocks {
            e = b.fullband.forward(&e)?;
            e = if self.cfg.time_skip {
                let sel = time_skip_select(&e, start)?;
                time_skip_merge(&b.tac.forward(&sel)?, &e, start)?
            } else {
                b.tac.forward(&e)?
            };
            e = b.subband.forward(&e)?;
        }
        let bins = self.cfg.num_bins();
        let mut st = self.decoder.new_state(bins);
        let mut speech = Vec::with_capacity(e.num_frames());
        let mut noise = Vec::with_capacity(e.num_frames());
        for t in 0..e.num_frames() {
            let d = self.decoder.step(&mut st, &e.frame(t), bins);
            let (s, n) = self.heads(&d);
            speech.push(s);
            noise.push(n);
        }
        let z = self.cfg.zones;
        Ok(MaskPair {
            speech: Tensor3::from_frames(z, bins, &speech),
            noise: Tensor3::from_frames(z, bins, &noise),
        })
    }

    fn heads(&self, d: &[f32]) -> (Vec<f32>, Vec<f32>) {
        let bins = self.cfg.num_bins();
        let mut s = self.speech_head.pointwise(d, bins);
        let mut n = self.noise_head.pointwise(d, bins);
        s.iter_mut().for_each(|v| *v = sigmoid(*v));
        n.iter_mut().for_each(|v| *v = sigmoid(*v));
        (s, n)
    }

    /// Frame-by-frame state for this model, TAC phase anchored at `start`.
    pub fn stream(&self, start: usize) -> Result<ModelStream<'_>> {
        if start > 1 {
            return Err(invalid_input(format!("time-skip start must be 0 or 1, got {start}")));
        }
        let bins = self.cfg.num_bins();
        Ok(ModelStream {
            model: self,
            start,
            frame: 0,
            encoders: self.encoders.new_state(),
            blocks: self
                .blocks
                .iter()
                .map(|b| (b.fullband.new_state(), b.subband.new_state()))
                .collect(),
            decoder: self.decoder.new_state(bins),
        })
    }
}

/// Recurrent, attention and convolution state of one stream.
pub struct ModelStream<'a> {
    model: &'a Model,
    start: usize,
    frame: usize,
    encoders: EncodersState,
    blocks: Vec<(LstmState, SubbandState)>,
    decoder: FrameHistory,
}

impl ModelStream<'_> {
    pub fn frames_processed(&self) -> usize {
        self.frame
    }

    /// One `[z][f]` spectrum snapshot in, `[z][f]` speech and noise masks out.
    pub fn step(&mut self, snapshot: &[Complex64]) -> Result<(Vec<f32>, Vec<f32>)> {
        let m = self.model;
        let bins = m.cfg.num_bins();
        if snapshot.len() != m.cfg.zones * bins {
            return Err(invalid_input(format!(
                "snapshot has {} values, expected {}",
                snapshot.len(),
                m.cfg.zones * bins
            )));
        }
        let mut e = m.encoders.step(&mut self.encoders, snapshot);
        let run_tac = !m.cfg.time_skip || is_skip_frame_selected(self.frame, self.start);
        for (b, (lstm, sub)) in m.blocks.iter().zip(self.blocks.iter_mut()) {
            e = b.fullband.step(lstm, &e);
            if run_tac {
                e = b.tac.step(&e, bins);
            }
            e = b.subband.step(sub, &e);
        }
        let d = m.decoder.step(&mut self.decoder, &e, bins);
        self.frame += 1;
        Ok(m.heads(&d))
    }
}

/// Masks for `y` with freshly built model state.
pub fn forward(y: &ComplexSpectrogram, w: &ModelWeights, cfg: &ModelConfig, start: usize) -> Result<MaskPair> {
    Model::new(cfg.clone(), w)?.forward(y, start)
}

pub fn encode(
    y: &ComplexSpectrogram,
    lps: &FeatureTensor,
    ipd: &FeatureTensor,
    w: &ModelWeights,
    cfg: &ModelConfig,
) -> Result<EmbeddingTensor> {
    let yr = stack_real_imag(y);
    Encoders::load(w, cfg)?.forward(&yr, lps, ipd)
}

/// TAC of full-sub module `block`.
pub fn tac_forward(e: &Tensor3, w: &ModelWeights, cfg: &ModelConfig, block: usize) -> Result<Tensor3> {
    cfg.validate()?;
    Tac::load(w, &format!("blocks.{block}.tac"), cfg)?.forward(e)
}

pub fn full_band_lstm(e: &Tensor3, w: &ModelWeights, cfg: &ModelConfig, block: usize) -> Result<Tensor3> {
    FullBandLstm::load(w, &format!("blocks.{block}.fullband"), cfg)?.forward(e)
}

pub fn subband_conformer(e: &Tensor3, w: &ModelWeights, cfg: &ModelConfig, block: usize) -> Result<Tensor3> {
    SubbandConformer::load(w, &format!("blocks.{block}.subband"), cfg)?.forward(e)
}
