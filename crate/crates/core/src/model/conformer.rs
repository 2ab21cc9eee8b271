//! Sub-band conformer: each frequency bin is an independent sequence over
//! time, all bins share weights. Attention is causal and optionally limited
//! to a fixed number of past frames.

use super::config::ModelConfig;
use super::layers::{sigmoid, swish, LayerNorm, Linear};
use super::weights::ModelWeights;
use crate::error::{invalid_input, Error, Result};
use crate::tensor::Tensor3;

#[derive(Debug, Clone)]
struct FeedForward {
    norm: LayerNorm,
    w1: Linear,
    w2: Linear,
}

impl FeedForward {
    fn load(w: &ModelWeights, prefix: &str, dim: usize, ff: usize) -> Result<Self> {
        Ok(Self {
            norm: LayerNorm::load(w, &format!("{prefix}.norm"), dim)?,
            w1: Linear::load(w, &format!("{prefix}.w1"), dim, ff)?,
            w2: Linear::load(w, &format!("{prefix}.w2"), ff, dim)?,
        })
    }

    /// Half-step residual update in place.
    fn apply(&self, x: &mut [f32], scratch: &mut Scratch) {
        self.norm.forward_into(x, &mut scratch.norm);
        self.w1.forward_into(&scratch.norm, &mut scratch.ff);
        scratch.ff.iter_mut().for_each(|v| *v = swish(*v));
        self.w2.forward_into(&scratch.ff, &mut scratch.out);
        for (a, b) in x.iter_mut().zip(&scratch.out) {
            *a += 0.5 * b;
        }
    }
}

#[derive(Debug, Clone)]
struct Attention {
    norm: LayerNorm,
    qkv: Linear,
    out: Linear,
    heads: usize,
}

#[derive(Debug, Clone)]
struct ConvModule {
    norm: LayerNorm,
    pw1: Linear,
    dw_weight: Vec<f32>,
    dw_bias: Vec<f32>,
    kernel: usize,
    pw2: Linear,
}

#[derive(Debug, Clone)]
struct ConformerLayer {
    ff1: FeedForward,
    attn: Attention,
    conv: ConvModule,
    ff2: FeedForward,
    final_norm: LayerNorm,
}

/// Attention cache and depthwise-conv history of one layer at one bin.
#[derive(Debug, Clone, Default)]
struct LayerState {
    keys: Vec<f32>,
    values: Vec<f32>,
    // first live entry in `keys`/`values` (in units of one key)
    start: usize,
    conv_hist: Vec<f32>,
}

#[derive(Debug, Clone)]
struct Scratch {
    norm: Vec<f32>,
    ff: Vec<f32>,
    out: Vec<f32>,
    qkv: Vec<f32>,
    attn: Vec<f32>,
    glu: Vec<f32>,
    scores: Vec<f32>,
}

impl Scratch {
    fn new(h: usize, ff: usize) -> Self {
        Self {
            norm: vec![0.0; h],
            ff: vec![0.0; ff],
            out: vec![0.0; h],
            qkv: vec![0.0; 3 * h],
            attn: vec![0.0; h],
            glu: vec![0.0; 2 * h],
            scores: Vec::new(),
        }
    }
}

impl ConformerLayer {
    fn load(w: &ModelWeights, prefix: &str, cfg: &ModelConfig) -> Result<Self> {
        let h = cfg.subband_hidden;
        let k = cfg.conv_kernel;
        let fetch = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let t = w.get(&format!("{prefix}.{name}"))?;
            if t.shape != shape {
                return Err(Error::WeightShape(format!("{prefix}.{name} has shape {:?}", t.shape)));
            }
            Ok(t.data.clone())
        };
        Ok(Self {
            ff1: FeedForward::load(w, &format!("{prefix}.ff1"), h, cfg.ff_dim)?,
            attn: Attention {
                norm: LayerNorm::load(w, &format!("{prefix}.attn.norm"), h)?,
                qkv: Linear::load(w, &format!("{prefix}.attn.qkv"), h, 3 * h)?,
                out: Linear::load(w, &format!("{prefix}.attn.out"), h, h)?,
                heads: cfg.attn_heads,
            },
            conv: ConvModule {
                norm: LayerNorm::load(w, &format!("{prefix}.conv.norm"), h)?,
                pw1: Linear::load(w, &format!("{prefix}.conv.pw1"), h, 2 * h)?,
                dw_weight: fetch("conv.dw.weight", &[h, k])?,
                dw_bias: fetch("conv.dw.bias", &[h])?,
                kernel: k,
                pw2: Linear::load(w, &format!("{prefix}.conv.pw2"), h, h)?,
            },
            ff2: FeedForward::load(w, &format!("{prefix}.ff2"), h, cfg.ff_dim)?,
            final_norm: LayerNorm::load(w, &format!("{prefix}.final_norm"), h)?,
        })
    }

    fn new_state(&self, h: usize) -> LayerState {
        LayerState {
            conv_hist: vec![0.0; (self.conv.kernel - 1) * h],
            ..LayerState::default()
        }
    }

    fn step(&self, st: &mut LayerState, x: &mut [f32], lookback: Option<usize>, sc: &mut Scratch) {
        let h = x.len();
        self.ff1.apply(x, sc);

        // causal multi-head self-attention
        let a = &self.attn;
        a.norm.forward_into(x, &mut sc.norm);
        a.qkv.forward_into(&sc.norm, &mut sc.qkv);
        st.keys.extend_from_slice(&sc.qkv[h..2 * h]);
        st.values.extend_from_slice(&sc.qkv[2 * h..]);
        let total = st.keys.len() / h;
        if let Some(w) = lookback {
            st.start = st.start.max(total.saturating_sub(w + 1));
            if st.start > 256 && st.start * 2 > total {
                st.keys.drain(..st.start * h);
                st.values.drain(..st.start * h);
                st.start = 0;
            }
        }
        let total = st.keys.len() / h;
        let live = st.start..total;
        let dh = h / a.heads;
        let scale = 1.0 / (dh as f32).sqrt();
        for head in 0..a.heads {
            let q = &sc.qkv[head * dh..(head + 1) * dh];
            sc.scores.clear();
            let mut max = f32::NEG_INFINITY;
            for j in live.clone() {
                let k = &st.keys[j * h + head * dh..j * h + (head + 1) * dh];
                let s = q.iter().zip(k).map(|(p, r)| p * r).sum::<f32>() * scale;
                max = max.max(s);
                sc.scores.push(s);
            }
            let mut denom = 0.0;
            for s in sc.scores.iter_mut() {
                *s = (*s - max).exp();
                denom += *s;
            }
            let out = &mut sc.attn[head * dh..(head + 1) * dh];
            out.fill(0.0);
            for (p, j) in sc.scores.iter().zip(live.clone()) {
                let v = &st.values[j * h + head * dh..j * h + (head + 1) * dh];
                let p = p / denom;
                for (o, vv) in out.iter_mut().zip(v) {
                    *o += p * vv;
                }
            }
        }
        a.out.forward_into(&sc.attn, &mut sc.out);
        for (xv, o) in x.iter_mut().zip(&sc.out) {
            *xv += o;
        }

        // convolution module: pointwise + GLU, causal depthwise, swish, pointwise
        let c = &self.conv;
        c.norm.forward_into(x, &mut sc.norm);
        c.pw1.forward_into(&sc.norm, &mut sc.glu);
        let k = c.kernel;
        let mut g = vec![0.0f32; h];
        for ch in 0..h {
            g[ch] = sc.glu[ch] * sigmoid(sc.glu[h + ch]);
        }
        for ch in 0..h {
            let mut acc = c.dw_bias[ch];
            for tap in 0..k - 1 {
                acc += c.dw_weight[ch * k + tap] * st.conv_hist[tap * h + ch];
            }
            acc += c.dw_weight[ch * k + k - 1] * g[ch];
            sc.attn[ch] = swish(acc);
        }
        if k > 1 {
            st.conv_hist.drain(..h);
            st.conv_hist.extend_from_slice(&g);
        }
        c.pw2.forward_into(&sc.attn, &mut sc.out);
        for (xv, o) in x.iter_mut().zip(&sc.out) {
            *xv += o;
        }

        self.ff2.apply(x, sc);
        sc.norm.copy_from_slice(x);
        self.final_norm.forward_into(&sc.norm, x);
    }
}

#[derive(Debug, Clone)]
pub struct SubbandConformer {
    channels: usize,
    hidden: usize,
    ff_dim: usize,
    bins: usize,
    lookback: Option<usize>,
    // [H][C][3] over neighbouring bins
    in_weight: Vec<f32>,
    in_bias: Vec<f32>,
    layers: Vec<ConformerLayer>,
    out_proj: Linear,
}

#[derive(Debug, Clone)]
pub struct SubbandState {
    // [layer][bin]
    layers: Vec<Vec<LayerState>>,
}

impl SubbandConformer {
    pub fn load(w: &ModelWeights, prefix: &str, cfg: &ModelConfig) -> Result<Self> {
        let (c, h) = (cfg.embed_channels, cfg.subband_hidden);
        let in_w = w.get(&format!("{prefix}.in_conv.weight"))?;
        let in_b = w.get(&format!("{prefix}.in_conv.bias"))?;
        if in_w.shape != [h, c, 3] || in_b.shape != [h] {
            return Err(Error::WeightShape(format!("{prefix}.in_conv has wrong shape")));
        }
        let layers = (0..cfg.conformer_layers)
            .map(|l| ConformerLayer::load(w, &format!("{prefix}.layers.{l}"), cfg))
            .collect::<Result<_>>()?;
        Ok(Self {
            channels: c,
            hidden: h,
            ff_dim: cfg.ff_dim,
            bins: cfg.num_bins(),
            lookback: cfg.lookback_frames(),
            in_weight: in_w.data.clone(),
            in_bias: in_b.data.clone(),
            layers,
            out_proj: Linear::load(w, &format!("{prefix}.out_proj"), h, c)?,
        })
    }

    pub fn new_state(&self) -> SubbandState {
        SubbandState {
            layers: self
                .layers
                .iter()
                .map(|l| (0..self.bins).map(|_| l.new_state(self.hidden)).collect())
                .collect(),
        }
    }

    pub fn step(&self, st: &mut SubbandState, x: &[f32]) -> Vec<f32> {
        let (c, h, bins) = (self.channels, self.hidden, self.bins);
        let mut sc = Scratch::new(h, self.ff_dim);
        // [H][F] hidden block
        let mut hid = vec![0.0f32; h * bins];
        let mut col = vec![0.0f32; h];
        for f in 0..bins {
            for o in 0..h {
                let mut acc = self.in_bias[o];
                for i in 0..c {
                    let wi = &self.in_weight[(o * c + i) * 3..(o * c + i) * 3 + 3];
                    let row = &x[i * bins..(i + 1) * bins];
                    if f > 0 {
                        acc += wi[0] * row[f - 1];
                    }
                    acc += wi[1] * row[f];
                    if f + 1 < bins {
                        acc += wi[2] * row[f + 1];
                    }
                }
                col[o] = acc;
            }
            for (layer, states) in self.layers.iter().zip(st.layers.iter_mut()) {
                layer.step(&mut states[f], &mut col, self.lookback, &mut sc);
            }
            for o in 0..h {
                hid[o * bins + f] = col[o];
            }
        }
        let mut y = self.out_proj.pointwise(&hid, bins);
        for (a, b) in y.iter_mut().zip(x) {
            *a += b;
        }
        y
    }

    pub fn forward(&self, e: &Tensor3) -> Result<Tensor3> {
        if e.num_channels() != self.channels || e.num_bins() != self.bins {
            return Err(invalid_input(format!(
                "sub-band conformer expects {} x T x {}, got {:?}",
                self.channels,
                self.bins,
                e.shape()
            )));
        }
        let mut st = self.new_state();
        let frames: Vec<_> = (0..e.num_frames()).map(|t| self.step(&mut st, &e.frame(t))).collect();
        Ok(Tensor3::from_frames(self.channels, self.bins, &frames))
    }
}
