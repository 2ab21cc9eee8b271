//! Seeded test signals: voiced speech-like tones, car cabin noise, transient
//! bumps and white noise. They stand in for corpus audio in examples, tests
//! and sampled scenes.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Speech,
    Car,
    Transient,
    White,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "speech" => Ok(Self::Speech),
            "car" => Ok(Self::Car),
            "transient" => Ok(Self::Transient),
            "white" => Ok(Self::White),
            _ => Err(invalid_input(format!("unknown synthetic signal {s:?}"))),
        }
    }
}

fn samples(seconds: f64, sample_rate: u32) -> Result<usize> {
    if !(seconds > 0.0) || !seconds.is_finite() || sample_rate == 0 {
        return Err(invalid_input(format!(
            "cannot synthesize {seconds} s at {sample_rate} Hz"
        )));
    }
    Ok(((seconds * sample_rate as f64).round() as usize).max(1))
}

/// Voiced harmonic source with a wandering pitch, two resonances and
/// syllable-rate gating, peak-normalized to 0.5.
pub fn speech_like(seconds: f64, sample_rate: u32, seed: u64) -> Result<Vec<f64>> {
    let n = samples(seconds, sample_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let f0_base = rng.gen_range(95.0..230.0);
    let formants = [rng.gen_range(350.0..850.0), rng.gen_range(1000.0..2400.0)];
    let syll_rate = rng.gen_range(3.0..5.5);
    let vib_rate = rng.gen_range(0.3..1.2);

    // syllables: each on or off with its own loudness, the first always on
    let syll_len = (fs / syll_rate) as usize;
    let syllables: Vec<f64> = (0..n / syll_len.max(1) + 2)
        .map(|k| {
            if k == 0 || rng.gen_bool(0.8) {
                rng.gen_range(0.5..1.0)
            } else {
                0.0
            }
        })
        .collect();

    let harmonics = ((fs / 2.0 - 200.0) / f0_base).floor().min(30.0) as usize;
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let f0 = f0_base * (1.0 + 0.12 * (2.0 * PI * vib_rate * t).sin());
        phase += 2.0 * PI * f0 / fs;
        let mut v = 0.0;
        for h in 1..=harmonics {
            let f = f0 * h as f64;
            let res: f64 = formants.iter().map(|&c| 1.0 / (1.0 + ((f - c) / 180.0).powi(2))).sum();
            v += (0.15 + res) / h as f64 * (phase * h as f64).sin();
        }
        let s = (i / syll_len.max(1)).min(syllables.len() - 1);
        let gate_phase = (i % syll_len.max(1)) as f64 / syll_len.max(1) as f64;
        let env = syllables[s] * (PI * gate_phase).sin().powi(2);
        out.push(v * env);
    }
    normalize_peak(&mut out, 0.5);
    Ok(out)
}

/// Low-frequency rumble with an engine order and a little broadband hiss.
pub fn car_noise(seconds: f64, sample_rate: u32, seed: u64) -> Result<Vec<f64>> {
    let n = samples(seconds, sample_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let rpm_hz = rng.gen_range(25.0..45.0);
    let mut lp = [0.0f64; 2];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let w: f64 = StandardNormal.sample(&mut rng);
        // two cascaded one-pole low-passes
        lp[0] += 0.05 * (w - lp[0]);
        lp[1] += 0.05 * (lp[0] - lp[1]);
        let t = i as f64 / fs;
        let engine = 0.3 * (2.0 * PI * rpm_hz * t).sin() + 0.15 * (4.0 * PI * rpm_hz * t).sin();
        out.push(4.0 * lp[1] + 0.05 * engine + 0.02 * w);
    }
    normalize_rms(&mut out, 0.1);
    Ok(out)
}

/// Car noise at each of `channels` mics: a shared component plus
/// per-mic independent noise.
pub fn car_noise_multichannel(seconds: f64, sample_rate: u32, channels: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let common = car_noise(seconds, sample_rate, seed)?;
    (0..channels)
        .map(|c| {
            let own = car_noise(seconds, sample_rate, seed.wrapping_add(1 + c as u64))?;
            Ok(common.iter().zip(&own).map(|(a, b)| 0.6 * a + 0.8 * b).collect())
        })
        .collect()
}

/// Spherically isotropic noise at `mics` (meters), built from one
/// independent `base` signal per mic. Each frequency is mixed by the
/// Cholesky factor of the coherence `sin(k d) / (k d)`, which keeps every
/// channel's spectrum equal to the average of the bases.
pub fn diffuse_noise(
    base: &[Vec<f64>],
    mics: &[[f64; 3]],
    sample_rate: u32,
    speed_of_sound: f64,
) -> Result<Vec<Vec<f64>>> {
    let m = mics.len();
    if m == 0 || base.len() != m {
        return Err(invalid_input(format!(
            "need one base signal per mic, got {} for {m} mics",
            base.len()
        )));
    }
    let n = base[0].len();
    if n == 0 || base.iter().any(|b| b.len() != n) {
        return Err(invalid_input("base signals must be non-empty and equally long"));
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectra: Vec<Vec<Complex64>> = base
        .iter()
        .map(|b| {
            let mut v: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            fwd.process(&mut v);
            v
        })
        .collect();
    let dist: Vec<f64> = (0..m * m)
        .map(|ab| {
            let (a, b) = (mics[ab / m], mics[ab % m]);
            (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; m];
    let mut l = vec![0.0; m * m];
    for k in 0..n {
        let f = k.min(n - k) as f64 * sample_rate as f64 / n as f64;
        l.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for j in 0..=i {
                let x = 2.0 * PI * f * dist[i * m + j] / speed_of_sound;
                let mut g = if x.abs() < 1e-9 { 1.0 } else { x.sin() / x };
                if i == j {
                    // a hair of loading keeps the factor defined for coincident mics
                    g += 1e-9;
                }
                let s: f64 = (0..j).map(|q| l[i * m + q] * l[j * m + q]).sum();
                l[i * m + j] = if i == j {
                    (g - s).max(0.0).sqrt()
                } else if l[j * m + j] > 0.0 {
                    (g - s) / l[j * m + j]
                } else {
                    0.0
                };
            }
        }
        for i in 0..m {
            out[i][k] = (0..=i).map(|j| spectra[j][k] * l[i * m + j]).sum();
        }
    }
    Ok(out
        .into_iter()
        .map(|mut v| {
            inv.process(&mut v);
            v.iter().map(|c| c.re / n as f64).collect()
        })
        .collect())
}

/// [`car_noise`] as a diffuse field over `mics`.
pub fn car_noise_diffuse(seconds: f64, sample_rate: u32, mics: &[[f64; 3]], seed: u64) -> Result<Vec<Vec<f64>>> {
    let base = (0..mics.len())
        .map(|c| car_noise(seconds, sample_rate, seed.wrapping_add(c as u64)))
        .collect::<Result<Vec<_>>>()?;
    diffuse_noise(&base, mics, sample_rate, 343.0)
}

/// Decaying noise burst: a door slam or road bump.
pub fn transient(seconds: f64, sample_rate: u32, seed: u64) -> Result<Vec<f64>> {
    let n = samples(seconds, sample_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = rng.gen_range(0.02..0.08) * sample_rate as f64;
    let mut lp = 0.0;
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let w: f64 = StandardNormal.sample(&mut rng);
            lp += 0.3 * (w - lp);
            lp * (-(i as f64) / tau).exp()
        })
        .collect();
    normalize_peak(&mut out, 0.8);
    Ok(out)
}

pub fn white_noise(seconds: f64, sample_rate: u32, seed: u64) -> Result<Vec<f64>> {
    let n = samples(seconds, sample_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
}

pub fn generate(kind: SynthKind, seconds: f64, sample_rate: u32, seed: u64) -> Result<Vec<f64>> {
    match kind {
        SynthKind::Speech => speech_like(seconds, sample_rate, seed),
        SynthKind::Car => car_noise(seconds, sample_rate, seed),
        SynthKind::Transient => transient(seconds, sample_rate, seed),
        SynthKind::White => white_noise(seconds, sample_rate, seed),
    }
}

fn normalize_peak(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / m);
    }
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let r = crate::dsp::rms(x);
    if r > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / r);
    }
}
