use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{ImpulseResponse, IrMetadata, IrOrigin};
use crate::dsp::convolve_slices;
use crate::error::{invalid_config, invalid_input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExcitationKind {
    /// Exponential sine sweep from `f_start` to `f_end` Hz.
    Ess { f_start: f64, f_end: f64, duration: f64 },
    /// Maximum length sequence of order `order`, played `periods` times back to back.
    Mls { order: u32, periods: usize },
    /// Time-stretched pulse of `length` samples (power of two), played `periods` times.
    Tsp {
        length: usize,
        stretch: usize,
        periods: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    #[serde(flatten)]
    pub kind: ExcitationKind,
    pub sample_rate: u32,
}

impl ExcitationSpec {
    pub fn ess(f_start: f64, f_end: f64, duration: f64, sample_rate: u32) -> Self {
        Self {
            kind: ExcitationKind::Ess {
                f_start,
                f_end,
                duration,
            },
            sample_rate,
        }
    }

    pub fn mls(order: u32) -> Self {
        Self {
            kind: ExcitationKind::Mls { order, periods: 2 },
            sample_rate: 16000,
        }
    }

    pub fn tsp(length: usize, stretch: usize) -> Self {
        Self {
            kind: ExcitationKind::Tsp {
                length,
                stretch,
                periods: 2,
            },
            sample_rate: 16000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nyq = self.sample_rate as f64 / 2.0;
        match self.kind {
            ExcitationKind::Ess {
                f_start,
                f_end,
                duration,
            } => {
                if !(f_start > 0.0 && f_start < f_end && f_end <= nyq) {
                    return Err(invalid_config(format!(
                        "sweep band must satisfy 0 < {f_start} < {f_end} <= {nyq}"
                    )));
                }
                if !(duration > 0.0) || (duration * self.sample_rate as f64) < 2.0 {
                    return Err(invalid_config(format!("sweep duration {duration} s is too short")));
                }
            }
            ExcitationKind::Mls { order, periods } => {
                if mls_taps(order).is_none() {
                    return Err(invalid_config(format!("MLS order must be in 2..=24, got {order}")));
                }
                if periods < 2 {
                    return Err(invalid_config("MLS playback needs at least 2 periods"));
                }
            }
            ExcitationKind::Tsp {
                length,
                stretch,
                periods,
            } => {
                if !length.is_power_of_two() || length < 4 {
                    return Err(invalid_config(format!(
                        "TSP length must be a power of two >= 4, got {length}"
                    )));
                }
                if stretch == 0 || stretch >= length / 2 {
                    return Err(invalid_config(format!(
                        "TSP stretch must be in 1..{}, got {stretch}",
                        length / 2
                    )));
                }
                if periods < 2 {
                    return Err(invalid_config("TSP playback needs at least 2 periods"));
                }
            }
        }
        Ok(())
    }
}

fn ess_params(f_start: f64, f_end: f64, duration: f64) -> (f64, f64) {
    let l = duration / (f_end / f_start).ln();
    (2.0 * PI * f_start * l, l)
}

/// `sin(K1 (exp(t / L) - 1))` with `K1 = 2 pi f_start L`, `L = T / ln(f_end / f_start)`.
pub fn gen_ess(spec: &ExcitationSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let ExcitationKind::Ess {
        f_start,
        f_end,
        duration,
    } = spec.kind
    else {
        return Err(invalid_config("not a sweep spec"));
    };
    let fs = spec.sample_rate as f64;
    let (k1, l) = ess_params(f_start, f_end, duration);
    let n = (duration * fs).round() as usize;
    Ok((0..n).map(|i| (k1 * ((i as f64 / fs / l).exp() - 1.0)).sin()).collect())
}

/// Time-reversed sweep with an `exp(-t / L)` envelope along the reversed
/// time axis (-6 dB per octave), scaled so the sweep convolved with it
/// peaks at exactly 1.
pub fn inverse_filter_ess(spec: &ExcitationSpec) -> Result<Vec<f64>> {
    let x = gen_ess(spec)?;
    let ExcitationKind::Ess {
        f_start,
        f_end,
        duration,
    } = spec.kind
    else {
        unreachable!()
    };
    let fs = spec.sample_rate as f64;
    let (_, l) = ess_params(f_start, f_end, duration);
    let n = x.len();
    let mut inv: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            x[n - 1 - i] * (-t / l).exp()
        })
        .collect();
    // the peak of x * inv sits at lag n - 1
    let peak: f64 = x.iter().zip(inv.iter().rev()).map(|(a, b)| a * b).sum();
    inv.iter_mut().for_each(|v| *v /= peak);
    Ok(inv)
}

/// Feedback taps of a maximal-length Fibonacci LFSR for orders 2 to 24.
pub fn mls_taps(order: u32) -> Option<&'static [u32]> {
    const TAPS: [&[u32]; 23] = [
        &[2, 1],
        &[3, 2],
        &[4, 3],
        &[5, 3],
        &[6, 5],
        &[7, 6],
        &[8, 6, 5, 4],
        &[9, 5],
        &[10, 7],
        &[11, 9],
        &[12, 6, 4, 1],
        &[13, 4, 3, 1],
        &[14, 5, 3, 1],
        &[15, 14],
        &[16, 15, 13, 4],
        &[17, 14],
        &[18, 11],
        &[19, 6, 2, 1],
        &[20, 17],
        &[21, 19],
        &[22, 21],
        &[23, 18],
        &[24, 23, 22, 17],
    ];
    (2..=24).contains(&order).then(|| TAPS[order as usize - 2])
}

/// One period (2^m - 1 samples) of a +-1 maximum length sequence.
pub fn gen_mls(order: u32) -> Result<Vec<f64>> {
    let taps = mls_taps(order).ok_or_else(|| invalid_config(format!("MLS order must be in 2..=24, got {order}")))?;
    let len = (1usize << order) - 1;
    let mut state: u32 = 1;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(if state & 1 == 1 { -1.0 } else { 1.0 });
        let fb = taps.iter().fold(0, |acc, &t| acc ^ (state >> (order - t)) & 1);
        state = (state >> 1) | (fb << (order - 1));
    }
    Ok(out)
}

fn tsp_spectrum(length: usize, stretch: usize) -> Vec<Complex64> {
    let n = length as f64;
    let m = stretch as f64;
    let mut spec = vec![Complex64::new(0.0, 0.0); length];
    for k in 0..=length / 2 {
        let kf = k as f64;
        spec[k] = Complex64::from_polar(1.0, -4.0 * PI * m * kf * kf / (n * n));
    }
    for k in length / 2 + 1..length {
        spec[k] = spec[length - k].conj();
    }
    // Nyquist is exp(-j pi m), real for integer m; drop rounding residue
    spec[length / 2].im = 0.0;
    spec
}

fn real_ifft(mut spec: Vec<Complex64>) -> Vec<f64> {
    let n = spec.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    spec.iter().map(|c| c.re / n as f64).collect()
}

fn tsp_shift(length: usize, stretch: usize) -> usize {
    length / 2 - stretch
}

/// Quadratic-phase all-pass pulse, rotated so its energy is contiguous.
pub fn gen_tsp(length: usize, stretch: usize) -> Result<Vec<f64>> {
    ExcitationSpec::tsp(length, stretch).validate()?;
    let mut x = real_ifft(tsp_spectrum(length, stretch));
    x.rotate_right(tsp_shift(length, stretch));
    Ok(x)
}

/// Circular inverse of [`gen_tsp`]: `tsp (*) inverse = delta`.
pub fn inverse_tsp(length: usize, stretch: usize) -> Result<Vec<f64>> {
    ExcitationSpec::tsp(length, stretch).validate()?;
    let spec = tsp_spectrum(length, stretch).iter().map(|c| c.conj()).collect();
    let mut x = real_ifft(spec);
    x.rotate_left(tsp_shift(length, stretch));
    Ok(x)
}

/// Signal to play through the system under test.
pub fn playback_signal(spec: &ExcitationSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(match spec.kind {
        ExcitationKind::Ess { .. } => gen_ess(spec)?,
        ExcitationKind::Mls { order, periods } => gen_mls(order)?.repeat(periods),
        ExcitationKind::Tsp {
            length,
            stretch,
            periods,
        } => gen_tsp(length, stretch)?.repeat(periods),
    })
}

fn circular_xcorr(y: &[f64], s: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let mut a: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut b: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    let prod: Vec<Complex64> = a.iter().zip(&b).map(|(p, q)| p * q.conj()).collect();
    real_ifft(prod)
}

fn circular_conv(y: &[f64], s: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let mut a: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut b: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    real_ifft(a.iter().zip(&b).map(|(p, q)| p * q).collect())
}

/// Deconvolve a recording of [`playback_signal`] into `ir_length` taps,
/// lag 0 at index 0.
///
/// The recording must start when playback starts and cover at least the
/// whole playback.
pub fn extract_ir(recording: &[f64], spec: &ExcitationSpec, ir_length: usize) -> Result<ImpulseResponse> {
    spec.validate()?;
    if ir_length == 0 {
        return Err(invalid_input("IR length must be positive"));
    }
    let played = playback_signal(spec)?.len();
    if recording.len() < played {
        return Err(invalid_input(format!(
            "recording has {} samples, the excitation needs at least {played}",
            recording.len()
        )));
    }
    let taps = match spec.kind {
        ExcitationKind::Ess { .. } => {
            let inv = inverse_filter_ess(spec)?;
            let full = convolve_slices(recording, &inv)?;
            let start = inv.len() - 1;
            (0..ir_length)
                .map(|i| full.get(start + i).copied().unwrap_or(0.0))
                .collect()
        }
        ExcitationKind::Mls { order, periods } => {
            let s = gen_mls(order)?;
            let l = s.len();
            if ir_length > l {
                return Err(invalid_input(format!(
                    "MLS of length {l} cannot resolve {ir_length} taps"
                )));
            }
            let y = &recording[(periods - 1) * l..periods * l];
            let r = circular_xcorr(y, &s);
            // autocorrelation is (L+1) delta - 1, so R = (L+1) h - sum(h) and sum(R) = sum(h)
            let total: f64 = r.iter().sum();
            r[..ir_length].iter().map(|v| (v + total) / (l + 1) as f64).collect()
        }
        ExcitationKind::Tsp {
            length,
            stretch,
            periods,
        } => {
            if ir_length > length {
                return Err(invalid_input(format!(
                    "TSP of length {length} cannot resolve {ir_length} taps"
                )));
            }
            let y = &recording[(periods - 1) * length..periods * length];
            let h = circular_conv(y, &inverse_tsp(length, stretch)?);
            h[..ir_length].to_vec()
        }
    };
    ImpulseResponse::new(
        taps,
        spec.sample_rate,
        IrMetadata {
            origin: IrOrigin::Recorded,
            ..IrMetadata::synthetic()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irlab::normalized_correlation;
    use rand::{Rng, SeedableRng};

    fn known_ir(seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..128)
            .map(|i| rng.gen_range(-1.0..1.0) * (-(i as f64) / 30.0).exp())
            .collect()
    }

    #[test]
    fn mls_period_and_autocorrelation() {
        for order in 2..=12 {
            let s = gen_mls(order).unwrap();
            let l = s.len();
            assert_eq!(l, (1 << order) - 1);
            let sum: f64 = s.iter().sum();
            assert_eq!(sum.abs(), 1.0);
            for lag in 0..l {
                let r: f64 = (0..l).map(|n| s[n] * s[(n + lag) % l]).sum();
                assert_eq!(r, if lag == 0 { l as f64 } else { -1.0 }, "order {order} lag {lag}");
            }
        }
    }

    #[test]
    fn lfsr_taps_are_maximal() {
        // brute-force state period for every tabulated order up to 20
        for order in 2..=20u32 {
            let taps = mls_taps(order).unwrap();
            let mut state = 1u32;
            let mut period = 0usize;
            loop {
                let fb = taps.iter().fold(0, |acc, &t| acc ^ (state >> (order - t)) & 1);
                state = (state >> 1) | (fb << (order - 1));
                period += 1;
                if state == 1 {
                    break;
                }
            }
            assert_eq!(period, (1 << order) - 1, "order {order}");
        }
        assert!(mls_taps(1).is_none() && mls_taps(25).is_none());
    }

    #[test]
    fn ess_starts_at_f_start_with_unit_envelope() {
        let spec = ExcitationSpec::ess(50.0, 8000.0, 2.0, 16000);
        let x = gen_ess(&spec).unwrap();
        assert!(x.iter().all(|v| v.abs() <= 1.0));
        // phase derivative K1/L * exp(t/L) at t = 0
        let (k1, l) = ess_params(50.0, 8000.0, 2.0);
        let f0 = k1 / l / (2.0 * PI);
        assert!((f0 - 50.0).abs() / 50.0 < 0.01);
        // numeric check from the first two samples' phase increment
        let phase = |t: f64| k1 * ((t / l).exp() - 1.0);
        let inst = (phase(1.0 / 16000.0) - phase(0.0)) * 16000.0 / (2.0 * PI);
        assert!((inst - 50.0).abs() / 50.0 < 0.01);
    }

    #[test]
    fn ess_self_deconvolution_peak_to_sidelobe() {
        let spec = ExcitationSpec::ess(50.0, 8000.0, 2.0, 16000);
        let x = gen_ess(&spec).unwrap();
        let inv = inverse_filter_ess(&spec).unwrap();
        let c = convolve_slices(&x, &inv).unwrap();
        let p = x.len() - 1;
        assert!((c[p] - 1.0).abs() < 1e-12);
        let side = c
            .iter()
            .enumerate()
            .filter(|(i, _)| i.abs_diff(p) > 160)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        let psr = 20.0 * (1.0 / side).log10();
        assert!(psr > 40.0, "psr {psr:.1} dB");
    }

    #[test]
    fn ess_rejects_bad_band() {
        assert!(gen_ess(&ExcitationSpec::ess(100.0, 50.0, 1.0, 16000)).is_err());
        assert!(gen_ess(&ExcitationSpec::ess(100.0, 9000.0, 1.0, 16000)).is_err());
        assert!(gen_ess(&ExcitationSpec::ess(0.0, 900.0, 1.0, 16000)).is_err());
    }

    #[test]
    fn tsp_is_flat_real_and_invertible() {
        let (n, m) = (1024, 256);
        let x = gen_tsp(n, m).unwrap();
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        assert!(buf.iter().all(|c| (c.norm() - 1.0).abs() < 1e-6));
        let d = circular_conv(&x, &inverse_tsp(n, m).unwrap());
        for (i, v) in d.iter().enumerate() {
            assert!((v - if i == 0 { 1.0 } else { 0.0 }).abs() < 1e-6);
        }
    }

    #[test]
    fn round_trips_recover_known_ir() {
        let h = known_ir(5);
        for spec in [
            ExcitationSpec::ess(20.0, 8000.0, 2.0, 16000),
            ExcitationSpec::mls(12),
            ExcitationSpec::tsp(4096, 1024),
        ] {
            let rec = convolve_slices(&playback_signal(&spec).unwrap(), &h).unwrap();
            let got = extract_ir(&rec, &spec, 128).unwrap();
            let r = normalized_correlation(got.taps(), &h);
            assert!(r > 0.99, "{:?}: {r}", spec.kind);
        }
    }

    #[test]
    fn mls_and_tsp_are_exact() {
        let h = known_ir(8);
        for spec in [ExcitationSpec::mls(10), ExcitationSpec::tsp(1024, 200)] {
            let rec = convolve_slices(&playback_signal(&spec).unwrap(), &h).unwrap();
            let got = extract_ir(&rec, &spec, 128).unwrap();
            for (a, b) in got.taps().iter().zip(&h) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn excitation_itself_gives_delta() {
        let spec = ExcitationSpec::ess(20.0, 8000.0, 1.0, 16000);
        let x = playback_signal(&spec).unwrap();
        let got = extract_ir(&x, &spec, 64).unwrap();
        assert!((got.taps()[0] - 1.0).abs() < 1e-9);
        let rest = got.taps()[8..].iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(rest < 0.05);
    }

    #[test]
    fn short_recording_rejected() {
        let spec = ExcitationSpec::mls(8);
        assert!(matches!(
            extract_ir(&[0.0; 100], &spec, 16),
            Err(crate::Error::InvalidInput(_))
        ));
    }
}
