//! Analytic multiply-accumulate count, one entry per component.

use std::collections::BTreeMap;

use super::config::ModelConfig;
use crate::error::{invalid_input, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MacReport {
    pub seconds: f64,
    pub frames: usize,
    pub total: u64,
    pub components: BTreeMap<String, u64>,
}

impl MacReport {
    /// Giga-MACs per second of audio.
    pub fn gmacs_per_second(&self) -> f64 {
        self.total as f64 / self.seconds / 1e9
    }
}

/// MACs needed to run the model over `seconds` of audio.
pub fn count_macs(cfg: &ModelConfig, seconds: f64) -> Result<MacReport> {
    cfg.validate()?;
    if !(seconds > 0.0) || !seconds.is_finite() {
        return Err(invalid_input(format!("duration must be positive, got {seconds}")));
    }
    let frames = (seconds / cfg.hop_seconds).ceil() as usize;
    let t = frames as u64;
    let f = cfg.num_bins() as u64;
    let (z, ce, c, h) = (
        cfg.zones as u64,
        cfg.encoder_channels as u64,
        cfg.embed_channels as u64,
        cfg.subband_hidden as u64,
    );
    let fb = cfg.fullband_hidden as u64;
    let k = cfg.tac_channels() as u64;
    let ff = cfg.ff_dim as u64;
    let n = cfg.n_full_sub as u64;
    let layers = cfg.conformer_layers as u64;

    let mut m = BTreeMap::new();
    let conv = |i: u64, o: u64| i * o * 9 * f * t;
    m.insert("encoder.spec".into(), conv(2 * z, ce) + conv(ce, ce));
    m.insert("encoder.lps".into(), conv(z, ce) + conv(ce, ce));
    m.insert("encoder.ipd".into(), conv(2, ce) + conv(ce, ce));
    m.insert("encoder.merge".into(), 3 * ce * c * f * t);

    m.insert("fullband_lstm".into(), n * t * (2 * c * f * fb + 8 * fb * fb));

    let tac_frames = if cfg.time_skip { t.div_ceil(2) } else { t };
    m.insert("tac".into(), n * tac_frames * f * (2 * c * k + 2 * k * c));

    let ctx_sum: u64 = (0..frames)
        .map(|i| match cfg.lookback_frames() {
            Some(w) => (i + 1).min(w + 1) as u64,
            None => (i + 1) as u64,
        })
        .sum();
    let per_layer_frame = 4 * h * ff + 3 * h * h + h * h + 2 * h * h + h * cfg.conv_kernel as u64 + h * h;
    m.insert("subband.projections".into(), n * t * f * (3 * c * h + h * c));
    m.insert("subband.conformer".into(), n * layers * f * t * per_layer_frame);
    m.insert("subband.attention".into(), n * layers * f * 2 * h * ctx_sum);

    m.insert("decoder".into(), c * z * 9 * f * t);
    m.insert("heads".into(), 2 * z * z * f * t);

    Ok(MacReport {
        seconds,
        frames,
        total: m.values().sum(),
        components: m,
    })
}
