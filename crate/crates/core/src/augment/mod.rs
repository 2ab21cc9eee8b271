//! Scene synthesis: reverberant speech per zone plus background and
//! transient noise at set SNRs, with per-zone speech labels and per-mic
//! noise labels that add up to the mixture exactly.

mod manifest;
mod sampler;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use manifest::{AudioRef, BackgroundEntry, IrRef, IrSetRef, SceneManifest, SpeakerEntry, TransientEntry};
pub use sampler::{sample_manifest, SamplerConfig};

use crate::dsp::wav::{write_wav, WavFormat};
use crate::dsp::{convolve_slices, power, MultichannelWaveform};
use crate::error::{invalid_input, Error, Result};
use crate::irlab::ImpulseResponse;

/// Allowed SNR windows in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrRanges {
    pub background: (f64, f64),
    pub transient: (f64, f64),
}

impl Default for SnrRanges {
    fn default() -> Self {
        Self {
            background: (-20.0, 25.0),
            transient: (-5.0, 5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpeaker {
    pub zone: usize,
    pub speech: Vec<f64>,
    /// One IR per microphone.
    pub irs: Vec<ImpulseResponse>,
    pub gain: f64,
}

/// Noise with one channel per microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSource {
    pub signal: Vec<Vec<f64>>,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientEvent {
    pub signal: Vec<Vec<f64>>,
    pub onset: usize,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub sample_rate: u32,
    pub zones: usize,
    pub speakers: Vec<SceneSpeaker>,
    pub background: Option<NoiseSource>,
    pub transients: Vec<TransientEvent>,
    pub ranges: SnrRanges,
}

impl Scene {
    pub fn new(zones: usize, sample_rate: u32) -> Self {
        Self {
            sample_rate,
            zones,
            speakers: Vec::new(),
            background: None,
            transients: Vec::new(),
            ranges: SnrRanges::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let z = self.zones;
        if z == 0 {
            return Err(Error::InvalidManifest("scene needs at least one zone".into()));
        }
        if self.speakers.is_empty() || self.speakers.len() > z {
            return Err(Error::InvalidManifest(format!(
                "scene needs between 1 and {z} speakers, got {}",
                self.speakers.len()
            )));
        }
        let mut taken = vec![false; z];
        for sp in &self.speakers {
            if sp.zone >= z {
                return Err(Error::InvalidManifest(format!("speaker zone {} out of range", sp.zone)));
            }
            if std::mem::replace(&mut taken[sp.zone], true) {
                return Err(Error::InvalidManifest(format!("two speakers in zone {}", sp.zone)));
            }
            if sp.irs.len() != z {
                return Err(invalid_input(format!(
                    "speaker in zone {} has {} IRs, need {z}",
                    sp.zone,
                    sp.irs.len()
                )));
            }
            if sp.speech.is_empty() || !sp.gain.is_finite() {
                return Err(invalid_input(format!(
                    "speaker in zone {} has no audio or a bad gain",
                    sp.zone
                )));
            }
        }
        let in_range = |v: f64, (lo, hi): (f64, f64)| v.is_finite() && v >= lo && v <= hi;
        if let Some(b) = &self.background {
            if b.signal.len() != z || b.signal.iter().any(|c| c.is_empty()) {
                return Err(invalid_input(format!(
                    "background noise must have {z} non-empty channels"
                )));
            }
            if !in_range(b.snr_db, self.ranges.background) {
                return Err(Error::InvalidManifest(format!(
                    "background SNR {} dB outside {:?}",
                    b.snr_db, self.ranges.background
                )));
            }
        }
        for tr in &self.transients {
            if tr.signal.len() != z || tr.signal.iter().any(|c| c.is_empty()) {
                return Err(invalid_input(format!(
                    "transient noise must have {z} non-empty channels"
                )));
            }
            if !in_range(tr.snr_db, self.ranges.transient) {
                return Err(Error::InvalidManifest(format!(
                    "transient SNR {} dB outside {:?}",
                    tr.snr_db, self.ranges.transient
                )));
            }
        }
        Ok(())
    }

    /// Scene length in samples: the longest speaker.
    pub fn len(&self) -> usize {
        self.speakers.iter().map(|s| s.speech.len()).max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Convolve `s` with each mic's IR; every channel keeps `s.len()` samples.
pub fn render_reverberant(s: &[f64], irs: &[ImpulseResponse], sample_rate: u32) -> Result<MultichannelWaveform> {
    if irs.is_empty() {
        return Err(invalid_input("need at least one IR"));
    }
    if s.is_empty() {
        return Err(invalid_input("cannot render empty speech"));
    }
    let channels = irs
        .iter()
        .map(|h| {
            let mut y = convolve_slices(s, h.taps())?;
            y.truncate(s.len());
            Ok(y)
        })
        .collect::<Result<Vec<_>>>()?;
    MultichannelWaveform::new(channels, sample_rate)
}

/// Gain that brings `noise_power` to `target_snr_db` below `signal_power`.
pub fn snr_gain(signal_power: f64, noise_power: f64, target_snr_db: f64) -> Result<f64> {
    if !(signal_power > 0.0) || !(noise_power > 0.0) {
        return Err(invalid_input("SNR scaling needs non-silent signal and noise"));
    }
    if !target_snr_db.is_finite() {
        return Err(invalid_input("target SNR must be finite"));
    }
    Ok((signal_power / (noise_power * 10f64.powf(target_snr_db / 10.0))).sqrt())
}

/// `noise` scaled so `10 log10(P_signal / P_noise) = target_snr_db`.
pub fn snr_scale(signal: &[f64], noise: &[f64], target_snr_db: f64) -> Result<Vec<f64>> {
    let g = snr_gain(power(signal), power(noise), target_snr_db)?;
    Ok(noise.iter().map(|v| v * g).collect())
}

/// A rendered scene. `mixture = sum(zone_images) + noise` per mic.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub mixture: MultichannelWaveform,
    /// Reverberant speech of each zone at every mic (zeros for empty zones).
    pub zone_images: Vec<MultichannelWaveform>,
    /// Total noise at each mic.
    pub noise: MultichannelWaveform,
    pub active_zones: Vec<usize>,
}

impl RenderedScene {
    /// Channel `z` is zone `z`'s speech at its own mic.
    pub fn speech_labels(&self) -> MultichannelWaveform {
        let channels = self
            .zone_images
            .iter()
            .enumerate()
            .map(|(z, im)| im.channel(z).to_vec())
            .collect();
        MultichannelWaveform::new(channels, self.mixture.sample_rate()).expect("labels share the mixture shape")
    }

    pub fn noise_labels(&self) -> &MultichannelWaveform {
        &self.noise
    }

    /// `mixture.wav`, `label_zone{k}.wav` (k from 1), `noise.wav`, all float32.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_wav(dir.join("mixture.wav"), &self.mixture, WavFormat::Float32)?;
        let labels = self.speech_labels();
        for z in 0..labels.num_channels() {
            write_wav(
                dir.join(format!("label_zone{}.wav", z + 1)),
                &labels.select(z),
                WavFormat::Float32,
            )?;
        }
        write_wav(dir.join("noise.wav"), &self.noise, WavFormat::Float32)?;
        Ok(())
    }
}

fn tiled(x: &[f64], len: usize) -> Vec<f64> {
    x.iter().copied().cycle().take(len).collect()
}

/// Render a scene. The SNR reference is the summed speech at mic 0 against
/// the noise at mic 0; a transient's power is taken over its own samples.
pub fn mix_scene(scene: &Scene) -> Result<RenderedScene> {
    scene.validate()?;
    let (z, len, sr) = (scene.zones, scene.len(), scene.sample_rate);
    let mut zone_images = vec![MultichannelWaveform::zeros(z, len, sr); z];
    for sp in &scene.speakers {
        let r = render_reverberant(&sp.speech, &sp.irs, sr)?;
        let img = &mut zone_images[sp.zone];
        for m in 0..z {
            for (o, v) in img.channel_mut(m).iter_mut().zip(r.channel(m)) {
                *o = v * sp.gain;
            }
        }
    }
    let mut speech_sum = vec![0.0; len];
    for img in &zone_images {
        for (o, v) in speech_sum.iter_mut().zip(img.channel(0)) {
            *o += v;
        }
    }
    let speech_power = power(&speech_sum);

    let mut noise = MultichannelWaveform::zeros(z, len, sr);
    if let Some(bg) = &scene.background {
        let chans: Vec<Vec<f64>> = bg.signal.iter().map(|c| tiled(c, len)).collect();
        let g = snr_gain(speech_power, power(&chans[0]), bg.snr_db)?;
        for (m, c) in chans.iter().enumerate() {
            for (o, v) in noise.channel_mut(m).iter_mut().zip(c) {
                *o += v * g;
            }
        }
    }
    for tr in &scene.transients {
        if tr.onset >= len {
            return Err(invalid_input(format!(
                "transient onset {} beyond scene length {len}",
                tr.onset
            )));
        }
        let g = snr_gain(speech_power, power(&tr.signal[0]), tr.snr_db)?;
        for m in 0..z {
            for (o, v) in noise.channel_mut(m)[tr.onset..].iter_mut().zip(&tr.signal[m]) {
                *o += v * g;
            }
        }
    }

    let mut mixture = noise.clone();
    for img in &zone_images {
        for m in 0..z {
            for (o, v) in mixture.channel_mut(m).iter_mut().zip(img.channel(m)) {
                *o += v;
            }
        }
    }
    let mut active_zones: Vec<usize> = scene.speakers.iter().map(|s| s.zone).collect();
    active_zones.sort_unstable();
    Ok(RenderedScene {
        mixture,
        zone_images,
        noise,
        active_zones,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irlab::IrMetadata;
    use crate::synth;

    fn deltas(z: usize, delays: &[usize]) -> Vec<ImpulseResponse> {
        (0..z).map(|m| ImpulseResponse::delta(delays[m], 16000)).collect()
    }

    fn speaker(zone: usize, seed: u64, irs: Vec<ImpulseResponse>) -> SceneSpeaker {
        SceneSpeaker {
            zone,
            speech: synth::speech_like(0.5, 16000, seed).unwrap(),
            irs,
            gain: 1.0,
        }
    }

    #[test]
    fn unit_impulses_copy_speech() {
        let s = synth::speech_like(0.2, 16000, 1).unwrap();
        let r = render_reverberant(&s, &deltas(4, &[0, 0, 0, 0]), 16000).unwrap();
        for m in 0..4 {
            assert_eq!(r.channel(m), &s[..]);
        }
        let d = render_reverberant(&s, &deltas(2, &[0, 5]), 16000).unwrap();
        assert_eq!(&d.channel(1)[5..], &s[..s.len() - 5]);
        assert!(d.channel(1)[..5].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_speaker_no_noise() {
        let mut sc = Scene::new(4, 16000);
        sc.speakers.push(speaker(2, 1, deltas(4, &[3, 2, 0, 4])));
        let r = mix_scene(&sc).unwrap();
        assert_eq!(r.mixture, r.zone_images[2]);
        assert_eq!(r.speech_labels().channel(2), r.mixture.channel(2));
        assert!(r.noise.channels().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn zone_collision_rejected() {
        let mut sc = Scene::new(4, 16000);
        sc.speakers.push(speaker(1, 1, deltas(4, &[0; 4])));
        sc.speakers.push(speaker(1, 2, deltas(4, &[0; 4])));
        assert!(matches!(mix_scene(&sc), Err(Error::InvalidManifest(_))));
        let empty = Scene::new(4, 16000);
        assert!(matches!(mix_scene(&empty), Err(Error::InvalidManifest(_))));
    }

    #[test]
    fn ir_count_checked() {
        let mut sc = Scene::new(4, 16000);
        sc.speakers.push(speaker(0, 1, deltas(3, &[0; 3])));
        assert!(matches!(mix_scene(&sc), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn background_snr_zero_db() {
        let mut sc = Scene::new(2, 16000);
        sc.speakers.push(speaker(0, 4, deltas(2, &[0, 1])));
        sc.speakers.push(speaker(1, 5, deltas(2, &[2, 0])));
        let n = synth::car_noise_multichannel(0.3, 16000, 2, 9).unwrap();
        sc.background = Some(NoiseSource { signal: n, snr_db: 0.0 });
        let r = mix_scene(&sc).unwrap();
        let speech: Vec<f64> = (0..r.mixture.len())
            .map(|i| r.zone_images[0].channel(0)[i] + r.zone_images[1].channel(0)[i])
            .collect();
        let snr = 10.0 * (power(&speech) / power(r.noise.channel(0))).log10();
        assert!(snr.abs() < 0.1);
    }

    #[test]
    fn out_of_range_snr_rejected() {
        let mut sc = Scene::new(1, 16000);
        sc.speakers.push(speaker(0, 1, deltas(1, &[0])));
        sc.background = Some(NoiseSource {
            signal: vec![synth::white_noise(0.1, 16000, 1).unwrap()],
            snr_db: 30.0,
        });
        assert!(matches!(mix_scene(&sc), Err(Error::InvalidManifest(_))));
        sc.ranges.background = (-20.0, 40.0);
        assert!(mix_scene(&sc).is_ok());
    }

    #[test]
    fn snr_scale_factors() {
        let a = vec![1.0, -1.0, 1.0, -1.0];
        let b = vec![-1.0, 1.0, 1.0, -1.0];
        assert_eq!(snr_scale(&a, &b, 0.0).unwrap(), b);
        let s20 = snr_scale(&a, &b, 20.0).unwrap();
        assert!((power(&s20) - 0.01).abs() < 1e-15);
        assert!(snr_scale(&a, &[0.0; 4], 0.0).is_err());
        assert!(snr_scale(&[0.0; 4], &b, 0.0).is_err());
    }

    #[test]
    fn ir_metadata_does_not_affect_render() {
        let s = synth::speech_like(0.1, 16000, 2).unwrap();
        let mut h = ImpulseResponse::delta(1, 16000);
        let a = render_reverberant(&s, std::slice::from_ref(&h), 16000).unwrap();
        h.meta = IrMetadata {
            zone: Some(3),
            ..IrMetadata::synthetic()
        };
        assert_eq!(a, render_reverberant(&s, &[h], 16000).unwrap());
    }
}
