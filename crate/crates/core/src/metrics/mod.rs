//! Separation quality, training losses, zone positioning and real-time
//! factor measurement.

mod fbank;
mod positioning;
mod rtf;

use serde::{Deserialize, Serialize};

pub use fbank::{fbank_mae, fbank_mae_with, MelFilterbank, FBANK_LOG_FLOOR, FBANK_MEL_BANDS};
pub use positioning::{zone_positioning, PositioningEntry, PositioningResult};
pub use rtf::{rtf_benchmark, RtfReport};

use crate::dsp::MultichannelWaveform;
use crate::error::{invalid_config, invalid_input, Result};

/// Reported SI-SNR values are clamped to +-60 dB.
pub const SI_SNR_CLAMP_DB: f64 = 60.0;

/// Scale-invariant SNR in dB, no mean removal.
pub fn si_snr(estimate: &[f64], target: &[f64]) -> Result<f64> {
    if estimate.len() != target.len() {
        return Err(invalid_input(format!(
            "SI-SNR needs equal lengths, got {} and {}",
            estimate.len(),
            target.len()
        )));
    }
    let tt: f64 = target.iter().map(|v| v * v).sum();
    if !(tt > 0.0) {
        return Err(invalid_input("SI-SNR target is silent"));
    }
    let et: f64 = estimate.iter().zip(target).map(|(e, t)| e * t).sum();
    let a = et / tt;
    let (mut sig, mut res) = (0.0, 0.0);
    for (e, t) in estimate.iter().zip(target) {
        let s = a * t;
        sig += s * s;
        res += (e - s) * (e - s);
    }
    let db = if sig == 0.0 {
        -SI_SNR_CLAMP_DB
    } else if res == 0.0 {
        SI_SNR_CLAMP_DB
    } else {
        10.0 * (sig / res).log10()
    };
    Ok(db.clamp(-SI_SNR_CLAMP_DB, SI_SNR_CLAMP_DB))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 1.0,
            gamma: 0.01,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.gamma]
            .iter()
            .any(|w| !(*w >= 0.0) || !w.is_finite())
        {
            return Err(invalid_config(format!("loss weights must be >= 0, got {self:?}")));
        }
        Ok(())
    }
}

/// `alpha * fbank(S, S_label) - beta * si_snr(S, S_label) + gamma * fbank(N, N_label)`.
pub fn combined_loss(s: &[f64], s_label: &[f64], n: &[f64], n_label: &[f64], w: &LossWeights) -> Result<f64> {
    w.validate()?;
    Ok(w.alpha * fbank_mae(s, s_label)? - w.beta * si_snr(s, s_label)? + w.gamma * fbank_mae(n, n_label)?)
}

/// Mean of the per-zone speech terms plus the mean per-mic noise term.
/// Zones with a silent speech label contribute only their FBank term.
pub fn combined_loss_multichannel(
    s: &MultichannelWaveform,
    s_label: &MultichannelWaveform,
    n: &MultichannelWaveform,
    n_label: &MultichannelWaveform,
    w: &LossWeights,
) -> Result<f64> {
    w.validate()?;
    let z = s.num_channels();
    if s_label.num_channels() != z || n.num_channels() != z || n_label.num_channels() != z {
        return Err(invalid_input("loss inputs must share the channel count"));
    }
    let mut speech = 0.0;
    let mut noise = 0.0;
    for k in 0..z {
        let label = s_label.channel(k);
        speech += w.alpha * fbank_mae(s.channel(k), label)?;
        if label.iter().any(|v| *v != 0.0) {
            speech -= w.beta * si_snr(s.channel(k), label)?;
        }
        noise += w.gamma * fbank_mae(n.channel(k), n_label.channel(k))?;
    }
    Ok((speech + noise) / z as f64)
}
