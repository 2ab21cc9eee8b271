//! Impulse responses: shoebox image-source simulation, measurement
//! excitations (ESS, MLS, TSP) with matching deconvolution, and the rules
//! for assigning recorded and simulated IRs to microphones.

mod excitation;
mod ism;
mod mixing;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use excitation::{
    extract_ir, gen_ess, gen_mls, gen_tsp, inverse_filter_ess, inverse_tsp, mls_taps, playback_signal, ExcitationKind,
    ExcitationSpec,
};
pub use ism::{image_sources, simulate_ism, simulate_ism_all, ImageSource, Interpolation, RoomSpec, SPEED_OF_SOUND};
pub use mixing::{mix_ir_sets, IrSet, IrSetEntry, MixStrategy, ADDED_RECORDED_PROBABILITY};

use crate::dsp::wav::{read_wav, write_wav, WavFormat};
use crate::dsp::MultichannelWaveform;
use crate::error::{invalid_input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrOrigin {
    Simulated,
    Recorded,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrMetadata {
    pub zone: Option<usize>,
    pub source: Option<[f64; 3]>,
    pub mic: Option<[f64; 3]>,
    pub origin: IrOrigin,
}

impl IrMetadata {
    pub fn synthetic() -> Self {
        Self {
            zone: None,
            source: None,
            mic: None,
            origin: IrOrigin::Synthetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    taps: Vec<f64>,
    sample_rate: u32,
    pub meta: IrMetadata,
}

impl ImpulseResponse {
    pub fn new(taps: Vec<f64>, sample_rate: u32, meta: IrMetadata) -> Result<Self> {
        if taps.is_empty() {
            return Err(invalid_input("impulse response needs at least one tap"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(invalid_input("impulse response has non-finite taps"));
        }
        if sample_rate == 0 {
            return Err(invalid_input("sample rate must be positive"));
        }
        Ok(Self {
            taps,
            sample_rate,
            meta,
        })
    }

    /// Unit impulse delayed by `delay` samples.
    pub fn delta(delay: usize, sample_rate: u32) -> Self {
        let mut taps = vec![0.0; delay + 1];
        taps[delay] = 1.0;
        Self {
            taps,
            sample_rate,
            meta: IrMetadata::synthetic(),
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn origin(&self) -> IrOrigin {
        self.meta.origin
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Float32 WAV plus a JSON sidecar next to it (`<name>.json`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let w = MultichannelWaveform::mono(self.taps.clone(), self.sample_rate);
        write_wav(path, &w, WavFormat::Float32)?;
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    /// Reads an IR WAV. Without a sidecar the IR is treated as recorded.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let w = read_wav(path)?;
        if w.num_channels() != 1 {
            return Err(invalid_input(format!(
                "{} has {} channels, an IR file must be mono",
                path.display(),
                w.num_channels()
            )));
        }
        let side = sidecar_path(path);
        let meta = if side.exists() {
            serde_json::from_str(&std::fs::read_to_string(side)?)?
        } else {
            IrMetadata {
                origin: IrOrigin::Recorded,
                ..IrMetadata::synthetic()
            }
        };
        let sr = w.sample_rate();
        Self::new(w.into_channels().remove(0), sr, meta)
    }
}

pub fn sidecar_path(wav: &Path) -> PathBuf {
    wav.with_extension("json")
}

/// Normalized cross-correlation at zero lag over the common length.
pub fn normalized_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let dot: f64 = a[..n].iter().zip(&b[..n]).map(|(x, y)| x * y).sum();
    let ea: f64 = a[..n].iter().map(|x| x * x).sum();
    let eb: f64 = b[..n].iter().map(|x| x * x).sum();
    if ea == 0.0 || eb == 0.0 {
        return 0.0;
    }
    dot / (ea * eb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_nan() {
        assert!(ImpulseResponse::new(vec![], 16000, IrMetadata::synthetic()).is_err());
        assert!(ImpulseResponse::new(vec![f64::NAN], 16000, IrMetadata::synthetic()).is_err());
    }

    #[test]
    fn save_load_keeps_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ir.wav");
        let meta = IrMetadata {
            zone: Some(2),
            source: Some([1.0, 0.5, 0.9]),
            mic: Some([0.8, 0.6, 1.1]),
            origin: IrOrigin::Simulated,
        };
        let ir = ImpulseResponse::new(vec![0.5, -0.25, 0.125], 16000, meta.clone()).unwrap();
        ir.save(&p).unwrap();
        let back = ImpulseResponse::load(&p).unwrap();
        assert_eq!(back.taps(), ir.taps());
        assert_eq!(back.meta, meta);
    }
}
