//! Spectral (log power) and spatial (inter-mic phase difference) input
//! features, plus the stacked real/imaginary view of the spectrum.

use num_complex::Complex64;

use crate::dsp::ComplexSpectrogram;
use crate::error::{invalid_config, invalid_input, Result};
use crate::tensor::Tensor3;

pub type FeatureTensor = Tensor3;

pub const DEFAULT_LPS_FLOOR: f64 = 1e-10;

/// Channels `[0, Z)` hold real parts, `[Z, 2Z)` imaginary parts.
pub fn stack_real_imag(y: &ComplexSpectrogram) -> FeatureTensor {
    let z = y.num_channels();
    Tensor3::from_fn(2 * z, y.num_frames(), y.num_bins(), |c, t, f| {
        if c < z {
            y.get(c, t, f).re as f32
        } else {
            y.get(c - z, t, f).im as f32
        }
    })
}

/// `log(max(|Y|^2, floor))` per channel.
pub fn compute_lps(y: &ComplexSpectrogram, floor: f64) -> Result<FeatureTensor> {
    if !(floor > 0.0) {
        return Err(invalid_config(format!("lps floor must be positive, got {floor}")));
    }
    Ok(Tensor3::from_fn(
        y.num_channels(),
        y.num_frames(),
        y.num_bins(),
        |c, t, f| lps_value(y.get(c, t, f), floor) as f32,
    ))
}

#[inline]
pub(crate) fn lps_value(v: Complex64, floor: f64) -> f64 {
    v.norm_sqr().max(floor).ln()
}

/// `[cos(theta), sin(theta)]` with `theta = arg(Y_a) - arg(Y_b)`. The phase
/// of an exactly zero bin is taken as zero.
pub fn compute_ipd(y: &ComplexSpectrogram, mic_a: usize, mic_b: usize) -> Result<FeatureTensor> {
    let z = y.num_channels();
    if mic_a >= z || mic_b >= z || mic_a == mic_b {
        return Err(invalid_input(format!(
            "ipd mic pair ({mic_a}, {mic_b}) invalid for {z} channels"
        )));
    }
    let (t_n, f_n) = (y.num_frames(), y.num_bins());
    let mut out = Tensor3::zeros(2, t_n, f_n);
    for t in 0..t_n {
        for f in 0..f_n {
            let (c, s) = ipd_value(y.get(mic_a, t, f), y.get(mic_b, t, f));
            out.set(0, t, f, c as f32);
            out.set(1, t, f, s as f32);
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn ipd_value(a: Complex64, b: Complex64) -> (f64, f64) {
    let theta = phase(a) - phase(b);
    (theta.cos(), theta.sin())
}

#[inline]
fn phase(v: Complex64) -> f64 {
    if v.re == 0.0 && v.im == 0.0 {
        0.0
    } else {
        v.arg()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{analyze, MultichannelWaveform, StftConfig};
    use std::f64::consts::{E, PI};

    fn spec_from(values: &[Vec<Complex64>], frames: usize, bins: usize) -> ComplexSpectrogram {
        let data = values.iter().flatten().copied().collect();
        ComplexSpectrogram::from_vec(values.len(), frames, bins, data).unwrap()
    }

    fn random_spec(z: usize, t: usize, f: usize, seed: u64) -> ComplexSpectrogram {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..z * t * f)
            .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
            .collect();
        ComplexSpectrogram::from_vec(z, t, f, data).unwrap()
    }

    #[test]
    fn stacking_shape_and_bijection() {
        let y = random_spec(4, 5, 7, 1);
        let s = stack_real_imag(&y);
        assert_eq!(s.shape(), (8, 5, 7));
        for z in 0..4 {
            for t in 0..5 {
                for f in 0..7 {
                    let v = y.get(z, t, f);
                    assert_eq!(s.get(z, t, f), v.re as f32);
                    assert_eq!(s.get(z + 4, t, f), v.im as f32);
                }
            }
        }
    }

    #[test]
    fn stacking_real_spectrum_has_zero_imag_half() {
        let mut y = random_spec(3, 4, 5, 2);
        for v in y.data_mut() {
            v.im = 0.0;
        }
        let s = stack_real_imag(&y);
        for c in 3..6 {
            for t in 0..4 {
                for f in 0..5 {
                    assert_eq!(s.get(c, t, f), 0.0);
                }
            }
        }
    }

    #[test]
    fn lps_closed_forms() {
        let ones = spec_from(&[vec![Complex64::from_polar(1.0, 0.7); 6]], 2, 3);
        assert!(compute_lps(&ones, 1e-10)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v.abs() < 1e-6));

        let zeros = ComplexSpectrogram::zeros(2, 2, 3);
        let l = compute_lps(&zeros, 1e-10).unwrap();
        assert!(l
            .data()
            .iter()
            .all(|&v| (v as f64 - (-23.025850929940457)).abs() < 1e-4));

        let e = spec_from(&[vec![Complex64::from_polar(E, -1.3); 6]], 2, 3);
        assert!(compute_lps(&e, 1e-10)
            .unwrap()
            .data()
            .iter()
            .all(|&v| (v - 2.0).abs() < 1e-6));

        assert!(matches!(compute_lps(&zeros, 0.0), Err(crate::Error::InvalidConfig(_))));
        assert!(matches!(compute_lps(&zeros, -1.0), Err(crate::Error::InvalidConfig(_))));
    }

    #[test]
    fn ipd_identical_and_inverted() {
        let y = random_spec(1, 4, 9, 3);
        let mut both = y.data().to_vec();
        both.extend_from_slice(y.data());
        let same = ComplexSpectrogram::from_vec(2, 4, 9, both).unwrap();
        let i = compute_ipd(&same, 0, 1).unwrap();
        for t in 0..4 {
            for f in 0..9 {
                assert!((i.get(0, t, f) - 1.0).abs() < 1e-6);
                assert!(i.get(1, t, f).abs() < 1e-6);
            }
        }
        let mut flipped = y.data().to_vec();
        flipped.extend(y.data().iter().map(|v| -v));
        let neg = ComplexSpectrogram::from_vec(2, 4, 9, flipped).unwrap();
        let i = compute_ipd(&neg, 0, 1).unwrap();
        for t in 0..4 {
            for f in 0..9 {
                assert!((i.get(0, t, f) + 1.0).abs() < 1e-6);
                assert!(i.get(1, t, f).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ipd_rejects_bad_pairs() {
        let y = random_spec(2, 1, 3, 4);
        assert!(compute_ipd(&y, 0, 0).is_err());
        assert!(compute_ipd(&y, 0, 2).is_err());
    }

    #[test]
    fn ipd_zero_bins_are_in_phase() {
        let y = ComplexSpectrogram::zeros(2, 3, 4);
        let i = compute_ipd(&y, 0, 1).unwrap();
        assert!((0..3).all(|t| (0..4).all(|f| i.get(0, t, f) == 1.0 && i.get(1, t, f) == 0.0)));
    }

    #[test]
    fn ipd_tracks_analytic_delay_ramp() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 8192;
        let k = 3usize;
        let src: Vec<f64> = (0..n + k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = src[k..].to_vec();
        let b = src[..n].to_vec(); // b[n] = a[n - k]
        let w = MultichannelWaveform::new(vec![a, b], 16000).unwrap();
        let y = analyze(&w, &StftConfig::default()).unwrap();
        let ipd = compute_ipd(&y, 0, 1).unwrap();
        // Y_b = Y_a * exp(-j 2 pi f k / N)  =>  theta = +2 pi f k / N
        // averaged over interior frames to wash out the window edge effect
        for f in [5usize, 40, 100, 200] {
            let expect = (2.0 * PI * f as f64 * k as f64 / 512.0).cos();
            let frames = 4..y.num_frames() - 4;
            let mean: f64 = frames.clone().map(|t| ipd.get(0, t, f) as f64).sum::<f64>() / frames.len() as f64;
            assert!((mean - expect).abs() < 0.05, "bin {f}: {mean} vs {expect}");
        }
    }
}
