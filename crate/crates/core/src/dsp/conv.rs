use num_complex::Complex64;
use rustfft::FftPlanner;

use super::waveform::MultichannelWaveform;
use crate::error::{invalid_input, Result};
use crate::irlab::ImpulseResponse;

// Below this many multiply-adds the direct sum is faster than three FFTs.
const DIRECT_LIMIT: usize = 1 << 15;

/// Full linear convolution, length `x.len() + h.len() - 1`.
pub fn convolve_slices(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() || h.is_empty() {
        return Err(invalid_input("convolution operands must be non-empty"));
    }
    if x.len().min(h.len()) < 64 || x.len() * h.len() <= DIRECT_LIMIT {
        Ok(direct(x, h))
    } else {
        Ok(fft_convolve(x, h))
    }
}

fn direct(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (j, &hj) in h.iter().enumerate() {
            y[i + j] += xi * hj;
        }
    }
    y
}

fn fft_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    let out_len = x.len() + h.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a = to_complex(x, n);
    let mut b = to_complex(h, n);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (ai, bi) in a.iter_mut().zip(&b) {
        *ai *= bi;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a[..out_len].iter().map(|c| c.re * scale).collect()
}

fn to_complex(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for (o, &s) in v.iter_mut().zip(x) {
        o.re = s;
    }
    v
}

/// Convolve every channel of `x` with the impulse response.
pub fn convolve(x: &MultichannelWaveform, h: &ImpulseResponse) -> Result<MultichannelWaveform> {
    if x.is_empty() {
        return Err(invalid_input("cannot convolve an empty waveform"));
    }
    let channels = x
        .channels()
        .iter()
        .map(|c| convolve_slices(c, h.taps()))
        .collect::<Result<Vec<_>>>()?;
    MultichannelWaveform::new(channels, x.sample_rate())
}

/// Full-length forward DFT of a real sequence zero-padded to `n`.
pub fn dft_real(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf = to_complex(x, n);
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

/// Inverse DFT (scaled by 1/n), keeping the real part.
pub fn idft_real(spectrum: &[Complex64]) -> Vec<f64> {
    let n = spectrum.len();
    let mut buf = spectrum.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Circular convolution of two equal-length sequences.
pub fn circular_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = x.len().max(h.len());
    let a = dft_real(x, n);
    let b = dft_real(h, n);
    idft_real(&a.iter().zip(&b).map(|(p, q)| p * q).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_impulse_is_identity() {
        let s = vec![0.3, -1.0, 2.5, 0.0, 7.0];
        assert_eq!(convolve_slices(&s, &[1.0]).unwrap(), s);
    }

    #[test]
    fn delayed_impulse_delays() {
        let s = vec![1.0, 2.0, 3.0];
        let y = convolve_slices(&s, &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn empty_operand_errors() {
        assert!(convolve_slices(&[], &[1.0]).is_err());
        assert!(convolve_slices(&[1.0], &[]).is_err());
    }

    #[test]
    fn circular_with_delta() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = circular_convolve(&x, &[0.0, 1.0, 0.0, 0.0]);
        let expect = [4.0, 1.0, 2.0, 3.0];
        for (a, b) in y.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
