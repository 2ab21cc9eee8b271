//! Inference primitives. Every layer exposes a per-frame step over `[c][f]`
//! blocks; whole-tensor passes are loops over the same steps, which keeps
//! batch and streaming outputs bit-identical.

use std::collections::VecDeque;

use super::weights::ModelWeights;
use crate::error::{Error, Result};

#[inline]
pub fn relu(x: f32) -> f32 {
    x.max(0.0)
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn swish(x: f32) -> f32 {
    x * sigmoid(x)
}

fn fetch(w: &ModelWeights, path: &str, shape: &[usize]) -> Result<Vec<f32>> {
    let t = w.get(path)?;
    if t.shape != shape {
        return Err(Error::WeightShape(format!(
            "{path} has shape {:?}, expected {shape:?}",
            t.shape
        )));
    }
    Ok(t.data.clone())
}

/// Dense `out x in` matrix plus bias applied to a vector.
#[derive(Debug, Clone)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn load(w: &ModelWeights, prefix: &str, inputs: usize, outputs: usize) -> Result<Self> {
        Ok(Self {
            inputs,
            outputs,
            weight: fetch(w, &format!("{prefix}.weight"), &[outputs, inputs])?,
            bias: fetch(w, &format!("{prefix}.bias"), &[outputs])?,
        })
    }

    pub fn forward_into(&self, x: &[f32], y: &mut [f32]) {
        debug_assert_eq!(x.len(), self.inputs);
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.bias[o];
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *yo = acc;
        }
    }

    pub fn forward(&self, x: &[f32]) -> Vec<f32> {
        let mut y = vec![0.0; self.outputs];
        self.forward_into(x, &mut y);
        y
    }

    /// Channel mixing at every bin of a `[c][f]` block.
    pub fn pointwise(&self, x: &[f32], bins: usize) -> Vec<f32> {
        debug_assert_eq!(x.len(), self.inputs * bins);
        let mut y = vec![0.0; self.outputs * bins];
        for o in 0..self.outputs {
            let out = &mut y[o * bins..(o + 1) * bins];
            out.fill(self.bias[o]);
            for i in 0..self.inputs {
                let w = self.weight[o * self.inputs + i];
                if w == 0.0 {
                    continue;
                }
                let inp = &x[i * bins..(i + 1) * bins];
                for (a, b) in out.iter_mut().zip(inp) {
                    *a += w * b;
                }
            }
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

impl LayerNorm {
    const EPS: f32 = 1e-5;

    pub fn load(w: &ModelWeights, prefix: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            gamma: fetch(w, &format!("{prefix}.gamma"), &[dim])?,
            beta: fetch(w, &format!("{prefix}.beta"), &[dim])?,
        })
    }

    pub fn forward_into(&self, x: &[f32], y: &mut [f32]) {
        let n = x.len() as f32;
        let mean = x.iter().sum::<f32>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
        let inv = 1.0 / (var + Self::EPS).sqrt();
        for i in 0..x.len() {
            y[i] = (x[i] - mean) * inv * self.gamma[i] + self.beta[i];
        }
    }
}

/// History of the last `len` input frames, oldest first, zero-initialized.
#[derive(Debug, Clone)]
pub struct FrameHistory {
    frames: VecDeque<Vec<f32>>,
}

impl FrameHistory {
    pub fn new(len: usize, frame_size: usize) -> Self {
        Self {
            frames: (0..len).map(|_| vec![0.0; frame_size]).collect(),
        }
    }

    /// Append `x` and return the window of `len + 1` frames ending at `x`.
    fn window_with(&mut self, x: &[f32]) -> Vec<&[f32]> {
        self.frames.push_back(x.to_vec());
        self.frames.iter().map(Vec::as_slice).collect()
    }

    fn pop_oldest(&mut self) {
        self.frames.pop_front();
    }
}

/// 2-D convolution over `(time, frequency)`, causal in time (past taps only)
/// and zero-padded symmetrically in frequency. Weight layout
/// `[out][in][kt][kf]`; tap `kt - 1` is the current frame.
#[derive(Debug, Clone)]
pub struct CausalConv2d {
    pub inputs: usize,
    pub outputs: usize,
    pub kt: usize,
    pub kf: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl CausalConv2d {
    pub fn load(w: &ModelWeights, prefix: &str, inputs: usize, outputs: usize, kt: usize, kf: usize) -> Result<Self> {
        Ok(Self {
            inputs,
            outputs,
            kt,
            kf,
            weight: fetch(w, &format!("{prefix}.weight"), &[outputs, inputs, kt, kf])?,
            bias: fetch(w, &format!("{prefix}.bias"), &[outputs])?,
        })
    }

    pub fn new_state(&self, bins: usize) -> FrameHistory {
        FrameHistory::new(self.kt - 1, self.inputs * bins)
    }

    pub fn step(&self, state: &mut FrameHistory, x: &[f32], bins: usize) -> Vec<f32> {
        let window = state.window_with(x);
        let half = (self.kf / 2) as isize;
        let mut y = vec![0.0; self.outputs * bins];
        for o in 0..self.outputs {
            let out = &mut y[o * bins..(o + 1) * bins];
            out.fill(self.bias[o]);
            for (a, frame) in window.iter().enumerate() {
                for i in 0..self.inputs {
                    let inp = &frame[i * bins..(i + 1) * bins];
                    for b in 0..self.kf {
                        let w = self.weight[((o * self.inputs + i) * self.kt + a) * self.kf + b];
                        shifted_axpy(out, inp, w, b as isize - half);
                    }
                }
            }
        }
        state.pop_oldest();
        y
    }
}

/// Transposed 2-D convolution, stride 1, causal in time. Weight layout
/// `[in][out][kt][kf]`; tap `kt = a` spreads input frame `t` to output frame
/// `t + a`.
#[derive(Debug, Clone)]
pub struct CausalConvTranspose2d {
    pub inputs: usize,
    pub outputs: usize,
    pub kt: usize,
    pub kf: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl CausalConvTranspose2d {
    pub fn load(w: &ModelWeights, prefix: &str, inputs: usize, outputs: usize, kt: usize, kf: usize) -> Result<Self> {
        Ok(Self {
            inputs,
            outputs,
            kt,
            kf,
            weight: fetch(w, &format!("{prefix}.weight"), &[inputs, outputs, kt, kf])?,
            bias: fetch(w, &format!("{prefix}.bias"), &[outputs])?,
        })
    }

    pub fn new_state(&self, bins: usize) -> FrameHistory {
        FrameHistory::new(self.kt - 1, self.inputs * bins)
    }

    pub fn step(&self, state: &mut FrameHistory, x: &[f32], bins: usize) -> Vec<f32> {
        let window = state.window_with(x);
        let half = (self.kf / 2) as isize;
        let newest = window.len() - 1;
        let mut y = vec![0.0; self.outputs * bins];
        for o in 0..self.outputs {
            let out = &mut y[o * bins..(o + 1) * bins];
            out.fill(self.bias[o]);
            for a in 0..self.kt {
                let frame = window[newest - a];
                for i in 0..self.inputs {
                    let inp = &frame[i * bins..(i + 1) * bins];
                    for b in 0..self.kf {
                        let w = self.weight[((i * self.outputs + o) * self.kt + a) * self.kf + b];
                        // out[f] += w * x[f - b + half]
                        shifted_axpy(out, inp, w, half - b as isize);
                    }
                }
            }
        }
        state.pop_oldest();
        y
    }
}

/// `out[f] += w * inp[f + shift]` where the index is in range.
#[inline]
fn shifted_axpy(out: &mut [f32], inp: &[f32], w: f32, shift: isize) {
    if w == 0.0 {
        return;
    }
    let n = out.len() as isize;
    let lo = (-shift).max(0);
    let hi = (n - shift).min(n);
    if lo >= hi {
        return;
    }
    let (lo, hi) = (lo as usize, hi as usize);
    let src = &inp[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
    for (a, b) in out[lo..hi].iter_mut().zip(src) {
        *a += w * b;
    }
}

/// Single-layer LSTM cell (gate order input, forget, cell, output).
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub inputs: usize,
    pub hidden: usize,
    pub w_ih: Vec<f32>,
    pub w_hh: Vec<f32>,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct LstmState {
    pub h: Vec<f32>,
    pub c: Vec<f32>,
}

impl LstmCell {
    pub fn load(w: &ModelWeights, prefix: &str, inputs: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            inputs,
            hidden,
            w_ih: fetch(w, &format!("{prefix}.weight_ih"), &[4 * hidden, inputs])?,
            w_hh: fetch(w, &format!("{prefix}.weight_hh"), &[4 * hidden, hidden])?,
            bias: fetch(w, &format!("{prefix}.bias"), &[4 * hidden])?,
        })
    }

    pub fn new_state(&self) -> LstmState {
        LstmState {
            h: vec![0.0; self.hidden],
            c: vec![0.0; self.hidden],
        }
    }

    pub fn step(&self, s: &mut LstmState, x: &[f32]) {
        let h = self.hidden;
        let mut gates = self.bias.clone();
        for (g, acc) in gates.iter_mut().enumerate() {
            let wi = &self.w_ih[g * self.inputs..(g + 1) * self.inputs];
            let wh = &self.w_hh[g * h..(g + 1) * h];
            *acc += wi.iter().zip(x).map(|(a, b)| a * b).sum::<f32>();
            *acc += wh.iter().zip(&s.h).map(|(a, b)| a * b).sum::<f32>();
        }
        for k in 0..h {
            let i = sigmoid(gates[k]);
            let f = sigmoid(gates[h + k]);
            let g = gates[2 * h + k].tanh();
            let o = sigmoid(gates[3 * h + k]);
            s.c[k] = f * s.c[k] + i * g;
            s.h[k] = o * s.c[k].tanh();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::weights::WeightTensor;

    fn weights_with(entries: &[(&str, Vec<usize>, Vec<f32>)]) -> ModelWeights {
        let mut w = ModelWeights::new("test", None);
        for (p, s, d) in entries {
            w.insert(*p, WeightTensor::new(s.clone(), d.clone()).unwrap());
        }
        w
    }

    #[test]
    fn causal_conv_uses_only_past_frames() {
        // kernel picks x[t-1] at the same bin
        let mut k = vec![0.0; 9];
        k[1 * 3 + 1] = 1.0;
        let w = weights_with(&[("c.weight", vec![1, 1, 3, 3], k), ("c.bias", vec![1], vec![0.0])]);
        let conv = CausalConv2d::load(&w, "c", 1, 1, 3, 3).unwrap();
        let mut st = conv.new_state(4);
        let y0 = conv.step(&mut st, &[1.0, 2.0, 3.0, 4.0], 4);
        let y1 = conv.step(&mut st, &[5.0, 6.0, 7.0, 8.0], 4);
        assert_eq!(y0, vec![0.0; 4]);
        assert_eq!(y1, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn conv_frequency_taps_shift_correctly() {
        // current frame, tap b=2 reads x[f+1]
        let mut k = vec![0.0; 9];
        k[2 * 3 + 2] = 1.0;
        let w = weights_with(&[("c.weight", vec![1, 1, 3, 3], k), ("c.bias", vec![1], vec![0.5])]);
        let conv = CausalConv2d::load(&w, "c", 1, 1, 3, 3).unwrap();
        let mut st = conv.new_state(4);
        let y = conv.step(&mut st, &[1.0, 2.0, 3.0, 4.0], 4);
        assert_eq!(y, vec![2.5, 3.5, 4.5, 0.5]);
    }

    #[test]
    fn transposed_conv_spreads_forward_in_time() {
        // tap a=1, b=0 : out[t+1][f-0+1]... x[t-1][f+1]
        let mut k = vec![0.0; 9];
        k[1 * 3] = 1.0;
        let w = weights_with(&[("d.weight", vec![1, 1, 3, 3], k), ("d.bias", vec![1], vec![0.0])]);
        let de = CausalConvTranspose2d::load(&w, "d", 1, 1, 3, 3).unwrap();
        let mut st = de.new_state(4);
        let y0 = de.step(&mut st, &[1.0, 2.0, 3.0, 4.0], 4);
        let y1 = de.step(&mut st, &[0.0; 4], 4);
        assert_eq!(y0, vec![0.0; 4]);
        assert_eq!(y1, vec![2.0, 3.0, 4.0, 0.0]);
    }

    #[test]
    fn zero_lstm_outputs_zero() {
        let w = weights_with(&[
            ("l.weight_ih", vec![8, 3], vec![0.0; 24]),
            ("l.weight_hh", vec![8, 2], vec![0.0; 16]),
            ("l.bias", vec![8], vec![0.0; 8]),
        ]);
        let cell = LstmCell::load(&w, "l", 3, 2).unwrap();
        let mut s = cell.new_state();
        cell.step(&mut s, &[1.0, -2.0, 3.0]);
        assert_eq!(s.h, vec![0.0, 0.0]);
    }

    #[test]
    fn pointwise_matches_per_bin_linear() {
        let w = weights_with(&[
            ("p.weight", vec![2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]),
            ("p.bias", vec![2], vec![0.1, 0.2]),
        ]);
        let lin = Linear::load(&w, "p", 3, 2).unwrap();
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 3 channels x 2 bins
        let y = lin.pointwise(&x, 2);
        for f in 0..2 {
            let col = [x[f], x[2 + f], x[4 + f]];
            let expect = lin.forward(&col);
            assert!((y[f] - expect[0]).abs() < 1e-6);
            assert!((y[2 + f] - expect[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_or_misshapen_weights_error() {
        let w = weights_with(&[("p.weight", vec![2, 2], vec![0.0; 4])]);
        assert!(matches!(Linear::load(&w, "p", 3, 2), Err(Error::WeightShape(_))));
        assert!(matches!(Linear::load(&w, "p", 2, 2), Err(Error::WeightShape(_))));
    }
}
