use crate::error::{invalid_input, Result};

/// Dense real tensor laid out `[c][t][f]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    frames: usize,
    bins: usize,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, frames: usize, bins: usize) -> Self {
        Self {
            channels,
            frames,
            bins,
            data: vec![0.0; channels * frames * bins],
        }
    }

    pub fn from_vec(channels: usize, frames: usize, bins: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * frames * bins {
            return Err(invalid_input(format!(
                "tensor data has {} values, expected {channels}x{frames}x{bins}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            frames,
            bins,
            data,
        })
    }

    pub fn from_fn(channels: usize, frames: usize, bins: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(channels * frames * bins);
        for c in 0..channels {
            for t in 0..frames {
                for k in 0..bins {
                    data.push(f(c, t, k));
                }
            }
        }
        Self {
            channels,
            frames,
            bins,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.frames, self.bins)
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
    pub fn get(&self, c: usize, t: usize, f: usize) -> f32 {
        self.data[(c * self.frames + t) * self.bins + f]
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: usize, f: usize, v: f32) {
        self.data[(c * self.frames + t) * self.bins + f] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Frame `t` as a `[c][f]` block.
    pub fn frame(&self, t: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.channels * self.bins);
        for c in 0..self.channels {
            let o = (c * self.frames + t) * self.bins;
            out.extend_from_slice(&self.data[o..o + self.bins]);
        }
        out
    }

    /// Overwrite frame `t` from a `[c][f]` block.
    pub fn set_frame(&mut self, t: usize, frame: &[f32]) {
        debug_assert_eq!(frame.len(), self.channels * self.bins);
        for c in 0..self.channels {
            let o = (c * self.frames + t) * self.bins;
            self.data[o..o + self.bins].copy_from_slice(&frame[c * self.bins..(c + 1) * self.bins]);
        }
    }

    /// Stack `[c][f]` frames back into a tensor.
    pub fn from_frames(channels: usize, bins: usize, frames: &[Vec<f32>]) -> Self {
        let mut out = Self::zeros(channels, frames.len(), bins);
        for (t, fr) in frames.iter().enumerate() {
            out.set_frame(t, fr);
        }
        out
    }

    /// Concatenate along the channel axis.
    pub fn concat_channels(parts: &[&Tensor3]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| invalid_input("nothing to concatenate"))?;
        let (t, f) = (first.frames, first.bins);
        if parts.iter().any(|p| p.frames != t || p.bins != f) {
            return Err(invalid_input("concatenated tensors must share frames and bins"));
        }
        let channels = parts.iter().map(|p| p.channels).sum();
        let data = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        Ok(Self {
            channels,
            frames: t,
            bins: f,
            data,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
