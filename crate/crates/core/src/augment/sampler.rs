use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{AudioRef, BackgroundEntry, IrRef, SceneManifest, SpeakerEntry, TransientEntry};
use super::SnrRanges;
use crate::error::{invalid_config, Result};
use crate::synth::SynthKind;

/// Recipe for drawing synthetic cabin scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub zones: usize,
    pub min_speakers: usize,
    pub max_speakers: usize,
    pub seconds: f64,
    pub ranges: SnrRanges,
    /// Chance of adding one transient event.
    pub transient_probability: f64,
    pub sample_rate: u32,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            zones: 4,
            min_speakers: 1,
            max_speakers: 2,
            seconds: 3.0,
            ranges: SnrRanges::default(),
            transient_probability: 0.3,
            sample_rate: 16000,
        }
    }
}

/// Draw a manifest with synthetic audio, cabin ISM IRs and uniform SNRs
/// inside the configured ranges.
pub fn sample_manifest(cfg: &SamplerConfig, rng: &mut impl Rng) -> Result<SceneManifest> {
    if cfg.min_speakers == 0 || cfg.min_speakers > cfg.max_speakers || cfg.max_speakers > cfg.zones {
        return Err(invalid_config(format!(
            "speaker count range {}..={} invalid for {} zones",
            cfg.min_speakers, cfg.max_speakers, cfg.zones
        )));
    }
    if !(cfg.seconds > 0.0) || !(0.0..=1.0).contains(&cfg.transient_probability) {
        return Err(invalid_config(
            "sampler needs positive duration and a probability in [0, 1]",
        ));
    }
    let (blo, bhi) = cfg.ranges.background;
    let (tlo, thi) = cfg.ranges.transient;
    if !(blo <= bhi) || !(tlo <= thi) {
        return Err(invalid_config("SNR ranges must be ordered"));
    }
    let p = rng.gen_range(cfg.min_speakers..=cfg.max_speakers);
    let mut zones: Vec<usize> = (0..cfg.zones).collect();
    zones.shuffle(rng);
    zones.truncate(p);
    zones.sort_unstable();
    let speakers = zones
        .iter()
        .map(|&zone| SpeakerEntry {
            zone,
            audio: AudioRef::Synth {
                kind: SynthKind::Speech,
                seconds: cfg.seconds,
                seed: rng.gen(),
            },
            ir: IrRef::Ism {
                position: None,
                beta: Some(rng.gen_range(0.2..0.6)),
                max_order: None,
                room: None,
            },
            gain: 1.0,
        })
        .collect();
    let background = Some(BackgroundEntry {
        audio: AudioRef::Synth {
            kind: SynthKind::Car,
            seconds: cfg.seconds,
            seed: rng.gen(),
        },
        snr_db: rng.gen_range(blo..=bhi),
    });
    let mut transients = Vec::new();
    if rng.gen_bool(cfg.transient_probability) {
        transients.push(TransientEntry {
            audio: AudioRef::Synth {
                kind: SynthKind::Transient,
                seconds: (0.3f64).min(cfg.seconds),
                seed: rng.gen(),
            },
            onset_seconds: rng.gen_range(0.0..cfg.seconds * 0.9),
            snr_db: rng.gen_range(tlo..=thi),
        });
    }
    Ok(SceneManifest {
        sample_rate: cfg.sample_rate,
        zones: cfg.zones,
        seed: rng.gen(),
        speakers,
        background,
        transients,
        snr_ranges: Some(cfg.ranges),
    })
}
