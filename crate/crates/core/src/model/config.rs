use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Error, Result};
use crate::features::DEFAULT_LPS_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    S,
    M,
    L,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::S, Variant::M, Variant::L];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::S => "S",
            Variant::M => "M",
            Variant::L => "L",
        };
        f.write_str(s)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S" => Ok(Variant::S),
            "M" => Ok(Variant::M),
            "L" => Ok(Variant::L),
            other => Err(invalid_config(format!("unknown variant {other:?}, expected S, M or L"))),
        }
    }
}

/// Architecture and streaming options of the mask estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub zones: usize,
    /// Number of full-sub refinement modules.
    pub n_full_sub: usize,
    /// Embedding channels C after the encoder merge convolution.
    pub embed_channels: usize,
    /// Hidden channels of each of the three encoders.
    pub encoder_channels: usize,
    /// Sub-band conformer width H.
    pub subband_hidden: usize,
    /// TAC channel compression ratio d.
    pub tac_compression: usize,
    pub conformer_layers: usize,
    pub attn_heads: usize,
    pub ff_dim: usize,
    /// Depthwise kernel of the conformer convolution module (time taps).
    pub conv_kernel: usize,
    /// Recurrent width of the full-band LSTM.
    pub fullband_hidden: usize,
    pub fft_size: usize,
    pub hop_seconds: f64,
    /// Limit conformer attention to this much history (seconds).
    pub chunk_lookback_seconds: Option<f64>,
    /// Run TAC on every other frame only.
    pub time_skip: bool,
    pub ipd_pair: (usize, usize),
    pub lps_floor: f64,
}

impl ModelConfig {
    pub fn preset(variant: Variant) -> Self {
        let (n_full_sub, tac_compression, conformer_layers) = match variant {
            Variant::S => (1, 4, 4),
            Variant::M => (2, 4, 2),
            Variant::L => (3, 2, 2),
        };
        let embed_channels = 24;
        let subband_hidden = 16;
        Self {
            variant,
            zones: 4,
            n_full_sub,
            embed_channels,
            encoder_channels: 8,
            subband_hidden,
            tac_compression,
            conformer_layers,
            attn_heads: 4,
            ff_dim: subband_hidden / 2,
            conv_kernel: 3,
            fullband_hidden: 4 * embed_channels,
            fft_size: 512,
            hop_seconds: 0.016,
            chunk_lookback_seconds: None,
            time_skip: false,
            ipd_pair: (0, 1),
            lps_floor: DEFAULT_LPS_FLOOR,
        }
    }

    pub fn s() -> Self {
        Self::preset(Variant::S)
    }

    pub fn m() -> Self {
        Self::preset(Variant::M)
    }

    pub fn l() -> Self {
        Self::preset(Variant::L)
    }

    pub fn with_zones(mut self, zones: usize) -> Self {
        self.zones = zones;
        self
    }

    pub fn with_time_skip(mut self, on: bool) -> Self {
        self.time_skip = on;
        self
    }

    pub fn with_chunk_lookback(mut self, seconds: Option<f64>) -> Self {
        self.chunk_lookback_seconds = seconds;
        self
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn tac_channels(&self) -> usize {
        self.embed_channels / self.tac_compression
    }

    /// Past frames visible to attention besides the current one.
    pub fn lookback_frames(&self) -> Option<usize> {
        self.chunk_lookback_seconds
            .map(|s| (s / self.hop_seconds + 1e-9).floor() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(invalid_config(msg)) };
        check(self.zones >= 1, "zones must be at least 1")?;
        check(self.n_full_sub >= 1, "need at least one full-sub module")?;
        check(self.embed_channels >= 1, "embed_channels must be positive")?;
        check(self.encoder_channels >= 1, "encoder_channels must be positive")?;
        check(self.tac_compression >= 1, "tac_compression must be positive")?;
        check(
            self.embed_channels % self.tac_compression == 0,
            "embed_channels must be divisible by tac_compression",
        )?;
        check(self.attn_heads >= 1, "attn_heads must be positive")?;
        check(
            self.subband_hidden % self.attn_heads == 0,
            "subband_hidden must be divisible by attn_heads",
        )?;
        check(self.ff_dim >= 1, "ff_dim must be positive")?;
        check(self.conv_kernel >= 1, "conv_kernel must be positive")?;
        check(self.fullband_hidden >= 1, "fullband_hidden must be positive")?;
        check(self.fft_size >= 2, "fft_size must be at least 2")?;
        check(self.hop_seconds > 0.0, "hop_seconds must be positive")?;
        check(self.lps_floor > 0.0, "lps_floor must be positive")?;
        if let Some(s) = self.chunk_lookback_seconds {
            check(s >= 0.0, "chunk lookback must be non-negative")?;
        }
        if self.zones >= 2 {
            let (a, b) = self.ipd_pair;
            check(
                a < self.zones && b < self.zones && a != b,
                "ipd_pair must name two distinct mics",
            )?;
        }
        Ok(())
    }

    /// Canonical description of every field that affects weight shapes.
    pub fn fingerprint(&self) -> String {
        format!(
            "zones={};n_full_sub={};embed={};encoder={};hidden={};d={};layers={};heads={};ff={};kernel={};fullband={};fft={}",
            self.zones,
            self.n_full_sub,
            self.embed_channels,
            self.encoder_channels,
            self.subband_hidden,
            self.tac_compression,
            self.conformer_layers,
            self.attn_heads,
            self.ff_dim,
            self.conv_kernel,
            self.fullband_hidden,
            self.fft_size
        )
    }

    /// Parse a key/value config. `variant` selects the preset, every other
    /// key overrides it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawModelConfig = toml::from_str(text)?;
        let cfg = raw.apply()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model config serializes")
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawModelConfig {
    variant: Option<Variant>,
    zones: Option<usize>,
    n_full_sub: Option<usize>,
    embed_channels: Option<usize>,
    encoder_channels: Option<usize>,
    subband_hidden: Option<usize>,
    tac_compression: Option<usize>,
    conformer_layers: Option<usize>,
    attn_heads: Option<usize>,
    ff_dim: Option<usize>,
    conv_kernel: Option<usize>,
    fullband_hidden: Option<usize>,
    fft_size: Option<usize>,
    hop_seconds: Option<f64>,
    chunk_lookback_seconds: Option<f64>,
    time_skip: Option<bool>,
    ipd_pair: Option<(usize, usize)>,
    lps_floor: Option<f64>,
}

impl RawModelConfig {
    pub(crate) fn apply(self) -> Result<ModelConfig> {
        let mut c = ModelConfig::preset(self.variant.unwrap_or(Variant::S));
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            zones,
            n_full_sub,
            embed_channels,
            encoder_channels,
            subband_hidden,
            tac_compression,
            conformer_layers,
            attn_heads,
            ff_dim,
            conv_kernel,
            fullband_hidden,
            fft_size,
            hop_seconds,
            time_skip,
            ipd_pair,
            lps_floor
        );
        if self.chunk_lookback_seconds.is_some() {
            c.chunk_lookback_seconds = self.chunk_lookback_seconds;
        }
        Ok(c)
    }
}
