//! JSON scene description. Audio and IRs are referenced either by file
//! (relative paths resolve against the manifest's directory) or by a
//! seeded recipe, so a manifest plus its files fully determines a scene.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NoiseSource, Scene, SceneSpeaker, SnrRanges, TransientEvent};
use crate::dsp::wav::read_wav;
use crate::error::{invalid_input, Error, Result};
use crate::irlab::{
    mix_ir_sets, simulate_ism_all, ImpulseResponse, IrMetadata, IrOrigin, IrSet, MixStrategy, RoomSpec,
};
use crate::synth::{self, SynthKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum AudioRef {
    File {
        path: PathBuf,
        #[serde(default)]
        channel: Option<usize>,
    },
    Synth {
        kind: SynthKind,
        seconds: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrSetRef {
    pub zone: usize,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum IrRef {
    /// Image-source simulation in the cabin preset (or `room`), talker at
    /// `position` or at the zone's seat.
    Ism {
        #[serde(default)]
        position: Option<[f64; 3]>,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        max_order: Option<usize>,
        #[serde(default)]
        room: Option<RoomSpec>,
    },
    /// One IR file per mic.
    Files(Vec<PathBuf>),
    /// Recorded/simulated assignment by strategy. Without `simulated`, the
    /// zone's simulated IRs come from the cabin preset.
    Mix {
        strategy: MixStrategy,
        recorded: Vec<IrSetRef>,
        #[serde(default)]
        simulated: Option<Vec<IrSetRef>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerEntry {
    pub zone: usize,
    pub audio: AudioRef,
    pub ir: IrRef,
    #[serde(default = "unit_gain")]
    pub gain: f64,
}

fn unit_gain() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundEntry {
    pub audio: AudioRef,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientEntry {
    pub audio: AudioRef,
    pub onset_seconds: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    #[serde(default = "default_rate")]
    pub sample_rate: u32,
    #[serde(default = "default_zones")]
    pub zones: usize,
    pub seed: u64,
    pub speakers: Vec<SpeakerEntry>,
    #[serde(default)]
    pub background: Option<BackgroundEntry>,
    #[serde(default)]
    pub transients: Vec<TransientEntry>,
    #[serde(default)]
    pub snr_ranges: Option<SnrRanges>,
}

fn default_rate() -> u32 {
    16000
}

fn default_zones() -> usize {
    4
}

fn manifest_err(msg: impl Into<String>) -> Error {
    Error::InvalidManifest(msg.into())
}

impl SceneManifest {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| manifest_err(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        let z = self.zones;
        if z == 0 || self.sample_rate == 0 {
            return Err(manifest_err("zones and sample_rate must be positive"));
        }
        if self.speakers.is_empty() || self.speakers.len() > z {
            return Err(manifest_err(format!(
                "need between 1 and {z} speakers, got {}",
                self.speakers.len()
            )));
        }
        let mut seen = vec![false; z];
        for sp in &self.speakers {
            if sp.zone >= z {
                return Err(manifest_err(format!(
                    "speaker zone {} out of range for {z} zones",
                    sp.zone
                )));
            }
            if std::mem::replace(&mut seen[sp.zone], true) {
                return Err(manifest_err(format!("two speakers in zone {}", sp.zone)));
            }
            if let IrRef::Files(f) = &sp.ir {
                if f.len() != z {
                    return Err(manifest_err(format!(
                        "zone {} lists {} IR files, need {z}",
                        sp.zone,
                        f.len()
                    )));
                }
            }
        }
        let ranges = self.snr_ranges.unwrap_or_default();
        let check = |v: f64, (lo, hi): (f64, f64), what: &str| {
            if v.is_finite() && v >= lo && v <= hi {
                Ok(())
            } else {
                Err(manifest_err(format!("{what} SNR {v} dB outside [{lo}, {hi}]")))
            }
        };
        if let Some(b) = &self.background {
            check(b.snr_db, ranges.background, "background")?;
        }
        for t in &self.transients {
            check(t.snr_db, ranges.transient, "transient")?;
            if !(t.onset_seconds >= 0.0) {
                return Err(manifest_err("transient onset must be >= 0"));
            }
        }
        Ok(())
    }

    /// Force `strategy` on every mixed IR reference.
    pub fn set_strategy(&mut self, strategy: MixStrategy) {
        for sp in &mut self.speakers {
            if let IrRef::Mix { strategy: s, .. } = &mut sp.ir {
                *s = strategy;
            }
        }
    }

    /// Load or synthesize everything the manifest references.
    pub fn to_scene(&self, base_dir: Option<&Path>) -> Result<Scene> {
        self.validate()?;
        let (z, sr) = (self.zones, self.sample_rate);
        let resolve = |p: &Path| match base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        };
        let mut scene = Scene::new(z, sr);
        scene.ranges = self.snr_ranges.unwrap_or_default();
        for (k, sp) in self.speakers.iter().enumerate() {
            let speech = load_mono(&sp.audio, sr, &resolve)?;
            let irs = self.load_irs(sp, k, &resolve)?;
            scene.speakers.push(SceneSpeaker {
                zone: sp.zone,
                speech,
                irs,
                gain: sp.gain,
            });
        }
        if let Some(b) = &self.background {
            scene.background = Some(NoiseSource {
                signal: load_multichannel(&b.audio, z, sr, &resolve)?,
                snr_db: b.snr_db,
            });
        }
        for t in &self.transients {
            scene.transients.push(TransientEvent {
                signal: load_multichannel(&t.audio, z, sr, &resolve)?,
                onset: (t.onset_seconds * sr as f64).round() as usize,
                snr_db: t.snr_db,
            });
        }
        Ok(scene)
    }

    fn load_irs(
        &self,
        sp: &SpeakerEntry,
        index: usize,
        resolve: &dyn Fn(&Path) -> PathBuf,
    ) -> Result<Vec<ImpulseResponse>> {
        let z = self.zones;
        let irs = match &sp.ir {
            IrRef::Ism {
                position,
                beta,
                max_order,
                room,
            } => {
                let mut r = match room {
                    Some(r) => r.clone(),
                    None => cabin_for(z, sp.zone)?,
                };
                if let Some(p) = position {
                    r.source = *p;
                }
                if let Some(b) = beta {
                    r = r.with_beta(*b);
                }
                if let Some(k) = max_order {
                    r.max_order = *k;
                }
                r.sample_rate = self.sample_rate;
                simulate_ism_all(&r)?
            }
            IrRef::Files(files) => files
                .iter()
                .map(|f| ImpulseResponse::load(resolve(f)))
                .collect::<Result<Vec<_>>>()?,
            IrRef::Mix {
                strategy,
                recorded,
                simulated,
            } => {
                let load_set = |refs: &[IrSetRef], origin: IrOrigin| -> Result<IrSet> {
                    let mut set = IrSet::default();
                    for r in refs {
                        let irs = r
                            .files
                            .iter()
                            .map(|f| {
                                let mut ir = ImpulseResponse::load(resolve(f))?;
                                ir.meta.origin = origin;
                                Ok(ir)
                            })
                            .collect::<Result<Vec<_>>>()?;
                        set.push(r.zone, irs);
                    }
                    Ok(set)
                };
                let rec = load_set(recorded, IrOrigin::Recorded)?;
                let sim = match simulated {
                    Some(s) => load_set(s, IrOrigin::Simulated)?,
                    None => {
                        let mut room = cabin_for(z, sp.zone)?;
                        room.sample_rate = self.sample_rate;
                        let mut set = IrSet::default();
                        set.push(sp.zone, simulate_ism_all(&room)?);
                        set
                    }
                };
                let mut rng = ChaCha8Rng::seed_from_u64(
                    self.seed
                        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1)),
                );
                mix_ir_sets(&sim, &rec, *strategy, sp.zone, &mut rng)?
            }
        };
        if irs.len() != z {
            return Err(invalid_input(format!(
                "zone {} resolved to {} IRs, need {z}",
                sp.zone,
                irs.len()
            )));
        }
        Ok(irs
            .into_iter()
            .map(|mut ir| {
                if ir.meta == IrMetadata::synthetic() || ir.meta.zone.is_none() {
                    ir.meta.zone = Some(sp.zone);
                }
                ir
            })
            .collect())
    }
}

fn cabin_for(zones: usize, zone: usize) -> Result<RoomSpec> {
    if zones != 4 {
        return Err(manifest_err(format!(
            "the cabin preset has 4 mics; give an explicit room for {zones} zones"
        )));
    }
    RoomSpec::cabin_seat(zone)
}

fn load_mono(a: &AudioRef, sr: u32, resolve: &dyn Fn(&Path) -> PathBuf) -> Result<Vec<f64>> {
    match a {
        AudioRef::Synth { kind, seconds, seed } => synth::generate(*kind, *seconds, sr, *seed),
        AudioRef::File { path, channel } => {
            let w = read_wav(resolve(path))?;
            check_rate(w.sample_rate(), sr, path)?;
            let c = channel.unwrap_or(0);
            if c >= w.num_channels() {
                return Err(invalid_input(format!("{} has no channel {c}", path.display())));
            }
            Ok(w.channel(c).to_vec())
        }
    }
}

fn load_multichannel(a: &AudioRef, z: usize, sr: u32, resolve: &dyn Fn(&Path) -> PathBuf) -> Result<Vec<Vec<f64>>> {
    match a {
        AudioRef::Synth {
            kind: SynthKind::Car,
            seconds,
            seed,
        } if z == RoomSpec::CABIN_MICS.len() => synth::car_noise_diffuse(*seconds, sr, &RoomSpec::CABIN_MICS, *seed),
        AudioRef::Synth {
            kind: SynthKind::Car,
            seconds,
            seed,
        } => synth::car_noise_multichannel(*seconds, sr, z, *seed),
        AudioRef::Synth {
            kind: SynthKind::White,
            seconds,
            seed,
        } => (0..z)
            .map(|c| synth::white_noise(*seconds, sr, seed.wrapping_add(c as u64)))
            .collect(),
        AudioRef::Synth { .. } => Ok(vec![load_mono(a, sr, resolve)?; z]),
        AudioRef::File { path, channel } => {
            let w = read_wav(resolve(path))?;
            check_rate(w.sample_rate(), sr, path)?;
            match (channel, w.num_channels()) {
                (Some(c), n) if *c < n => Ok(vec![w.channel(*c).to_vec(); z]),
                (None, 1) => Ok(vec![w.channel(0).to_vec(); z]),
                (None, n) if n == z => Ok(w.into_channels()),
                (_, n) => Err(invalid_input(format!(
                    "{} has {n} channels; noise needs 1 or {z}",
                    path.display()
                ))),
            }
        }
    }
}

fn check_rate(got: u32, want: u32, path: &Path) -> Result<()> {
    if got != want {
        return Err(invalid_input(format!(
            "{} is {got} Hz, scene is {want} Hz",
            path.display()
        )));
    }
    Ok(())
}
