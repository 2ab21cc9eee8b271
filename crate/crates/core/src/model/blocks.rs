//! Full-band LSTM, transform-average-concatenate (TAC) and the stride-2
//! time-skip around it.

use super::config::ModelConfig;
use super::layers::{relu, Linear, LstmCell, LstmState};
use super::weights::ModelWeights;
use crate::error::{invalid_input, Result};
use crate::tensor::Tensor3;

/// Per step: project the flattened `C x F` frame to the recurrent width, run
/// one LSTM step, project back and add the input.
#[derive(Debug, Clone)]
pub struct FullBandLstm {
    channels: usize,
    bins: usize,
    in_proj: Linear,
    cell: LstmCell,
    out_proj: Linear,
}

impl FullBandLstm {
    pub fn load(w: &ModelWeights, prefix: &str, cfg: &ModelConfig) -> Result<Self> {
        let flat = cfg.embed_channels * cfg.num_bins();
        let h = cfg.fullband_hidden;
        Ok(Self {
            channels: cfg.embed_channels,
            bins: cfg.num_bins(),
            in_proj: Linear::load(w, &format!("{prefix}.in_proj"), flat, h)?,
            cell: LstmCell::load(w, &format!("{prefix}.lstm"), h, h)?,
            out_proj: Linear::load(w, &format!("{prefix}.out_proj"), h, flat)?,
        })
    }

    pub fn new_state(&self) -> LstmState {
        self.cell.new_state()
    }

    pub fn step(&self, s: &mut LstmState, x: &[f32]) -> Vec<f32> {
        let p = self.in_proj.forward(x);
        self.cell.step(s, &p);
        let mut y = self.out_proj.forward(&s.h);
        for (a, b) in y.iter_mut().zip(x) {
            *a += b;
        }
        y
    }

    pub fn forward(&self, e: &Tensor3) -> Result<Tensor3> {
        check_shape(e, self.channels, self.bins)?;
        let mut s = self.new_state();
        let frames: Vec<_> = (0..e.num_frames()).map(|t| self.step(&mut s, &e.frame(t))).collect();
        Ok(Tensor3::from_frames(self.channels, self.bins, &frames))
    }
}

#[derive(Debug, Clone)]
pub struct Tac {
    channels: usize,
    compressed: usize,
    linear_a: Linear,
    linear_b: Linear,
    linear_c: Linear,
}

impl Tac {
    pub fn load(w: &ModelWeights, prefix: &str, cfg: &ModelConfig) -> Result<Self> {
        let c = cfg.embed_channels;
        let k = cfg.tac_channels();
        Ok(Self {
            channels: c,
            compressed: k,
            linear_a: Linear::load(w, &format!("{prefix}.linear_a"), c, k)?,
            linear_b: Linear::load(w, &format!("{prefix}.linear_b"), c, k)?,
            linear_c: Linear::load(w, &format!("{prefix}.linear_c"), 2 * k, c)?,
        })
    }

    /// `ReLU(Linear_A x)` and the channel-mean of `ReLU(Linear_B x)` stacked
    /// back to C/d channels, both `[C/d][F]`.
    pub fn branches(&self, x: &[f32], bins: usize) -> (Vec<f32>, Vec<f32>) {
        let mut a = self.linear_a.pointwise(x, bins);
        a.iter_mut().for_each(|v| *v = relu(*v));
        let b = self.linear_b.pointwise(x, bins);
        let k = self.compressed;
        let mut mean = vec![0.0f32; bins];
        for ch in 0..k {
            for f in 0..bins {
                mean[f] += relu(b[ch * bins + f]);
            }
        }
        mean.iter_mut().for_each(|v| *v /= k as f32);
        let stacked = (0..k).flat_map(|_| mean.iter().copied()).collect();
        (a, stacked)
    }

    pub fn step(&self, x: &[f32], bins: usize) -> Vec<f32> {
        let (mut cat, avg) = self.branches(x, bins);
        cat.extend(avg);
        let mut y = self.linear_c.pointwise(&cat, bins);
        for (a, b) in y.iter_mut().zip(x) {
            *a += b;
        }
        y
    }

    pub fn forward(&self, e: &Tensor3) -> Result<Tensor3> {
        if e.num_channels() != self.channels {
            return Err(invalid_input(format!(
                "tac expects {} channels, got {}",
                self.channels,
                e.num_channels()
            )));
        }
        let bins = e.num_bins();
        let frames: Vec<_> = (0..e.num_frames()).map(|t| self.step(&e.frame(t), bins)).collect();
        Ok(Tensor3::from_frames(self.channels, bins, &frames))
    }
}

/// Whether frame `t` is processed by TAC under time skip from `start`.
#[inline]
pub fn is_skip_frame_selected(t: usize, start: usize) -> bool {
    t >= start && (t - start) % 2 == 0
}

/// Number of frames kept by [`time_skip_select`].
pub fn skip_count(frames: usize, start: usize) -> usize {
    frames.saturating_sub(start).div_ceil(2)
}

/// Frames `start, start + 2, start + 4, ...`.
pub fn time_skip_select(e: &Tensor3, start: usize) -> Result<Tensor3> {
    if start > 1 {
        return Err(invalid_input(format!("time-skip start must be 0 or 1, got {start}")));
    }
    let frames: Vec<_> = (start..e.num_frames()).step_by(2).map(|t| e.frame(t)).collect();
    Ok(Tensor3::from_frames(e.num_channels(), e.num_bins(), &frames))
}

/// Put processed frames back at their original positions.
pub fn time_skip_merge(processed: &Tensor3, original: &Tensor3, start: usize) -> Result<Tensor3> {
    if start > 1 {
        return Err(invalid_input(format!("time-skip start must be 0 or 1, got {start}")));
    }
    let expected = skip_count(original.num_frames(), start);
    if processed.num_frames() != expected
        || processed.num_channels() != original.num_channels()
        || processed.num_bins() != original.num_bins()
    {
        return Err(invalid_input(format!(
            "processed tensor {:?} does not match {expected} selected frames of {:?}",
            processed.shape(),
            original.shape()
        )));
    }
    let mut out = original.clone();
    for (k, t) in (start..original.num_frames()).step_by(2).enumerate() {
        out.set_frame(t, &processed.frame(k));
    }
    Ok(out)
}

fn check_shape(e: &Tensor3, channels: usize, bins: usize) -> Result<()> {
    if e.num_channels() != channels || e.num_bins() != bins {
        return Err(invalid_input(format!(
            "expected {channels} x T x {bins} embedding, got {:?}",
            e.shape()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::weights::{init_zeros, WeightTensor};

    fn ramp(c: usize, t: usize, f: usize) -> Tensor3 {
        Tensor3::from_fn(c, t, f, |a, b, k| (a * 100 + b * 10 + k) as f32)
    }

    #[test]
    fn select_counts_and_frames() {
        let e = ramp(2, 10, 3);
        let s0 = time_skip_select(&e, 0).unwrap();
        assert_eq!(s0.num_frames(), 5);
        assert_eq!(s0.frame(2), e.frame(4));
        let s1 = time_skip_select(&e, 1).unwrap();
        assert_eq!(s1.num_frames(), 5);
        assert_eq!(s1.frame(0), e.frame(1));
        assert_eq!(s1.frame(4), e.frame(9));
        assert_eq!(time_skip_select(&ramp(1, 11, 1), 1).unwrap().num_frames(), 5);
        assert!(time_skip_select(&e, 2).is_err());
    }

    #[test]
    fn merge_places_processed_frames() {
        let e = ramp(2, 4, 3);
        let ones = Tensor3::from_fn(2, 2, 3, |_, _, _| 1.0);
        let m = time_skip_merge(&ones, &e, 1).unwrap();
        assert_eq!(m.frame(0), e.frame(0));
        assert_eq!(m.frame(2), e.frame(2));
        assert!(m.frame(1).iter().all(|&v| v == 1.0));
        assert!(m.frame(3).iter().all(|&v| v == 1.0));
        assert!(time_skip_merge(&ones, &ramp(2, 6, 3), 1).is_err());
    }

    #[test]
    fn merge_of_select_is_identity_for_all_lengths() {
        for t in 1..=64 {
            for start in 0..2 {
                let e = ramp(3, t, 2);
                let m = time_skip_merge(&time_skip_select(&e, start).unwrap(), &e, start).unwrap();
                assert_eq!(m, e);
                assert_eq!(m.num_frames(), t);
            }
        }
    }

    #[test]
    fn tac_channel_bookkeeping_and_zero_case() {
        let cfg = ModelConfig::s();
        assert_eq!(cfg.tac_channels(), 6);
        let w = init_zeros(&cfg).unwrap();
        let tac = Tac::load(&w, "blocks.0.tac", &cfg).unwrap();
        assert_eq!(tac.linear_c.inputs, 12);
        assert_eq!(tac.linear_c.outputs, 24);
        let zero = Tensor3::zeros(24, 3, 5);
        assert_eq!(tac.forward(&zero).unwrap(), zero);
    }

    #[test]
    fn tac_mean_branch_on_constant_input() {
        let cfg = ModelConfig::s();
        let mut w = init_zeros(&cfg).unwrap();
        // Linear_B copies input channel k to output channel k
        let mut eye = vec![0.0; 6 * 24];
        for k in 0..6 {
            eye[k * 24 + k] = 1.0;
        }
        *w.get_mut("blocks.0.tac.linear_b.weight").unwrap() = WeightTensor::new(vec![6, 24], eye).unwrap();
        let tac = Tac::load(&w, "blocks.0.tac", &cfg).unwrap();
        for value in [2.5f32, -1.0] {
            let x = vec![value; 24 * 4];
            let (_, avg) = tac.branches(&x, 4);
            assert!(avg.iter().all(|&v| (v - value.max(0.0)).abs() < 1e-6));
        }
    }

    #[test]
    fn zero_fullband_is_identity() {
        let cfg = ModelConfig::s();
        let w = init_zeros(&cfg).unwrap();
        let fb = FullBandLstm::load(&w, "blocks.0.fullband", &cfg).unwrap();
        let e = Tensor3::from_fn(24, 5, 257, |c, t, f| ((c + t * f) % 7) as f32 - 3.0);
        assert_eq!(fb.forward(&e).unwrap(), e);
    }
}
