//! RIFF WAV I/O. Multichannel files are interleaved; channel `i` is zone `i + 1`.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::waveform::MultichannelWaveform;
use crate::error::{invalid_input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<MultichannelWaveform> {
    let mut reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if n_ch == 0 {
        return Err(invalid_input("wav file declares zero channels"));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(invalid_input(format!(
                "unsupported wav sample format {fmt:?} at {bits} bits"
            )))
        }
    };
    let frames = interleaved.len() / n_ch;
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &s) in channels.iter_mut().zip(frame) {
            c.push(s);
        }
    }
    MultichannelWaveform::new(channels, spec.sample_rate)
}

pub fn write_wav(path: impl AsRef<Path>, w: &MultichannelWaveform, format: WavFormat) -> Result<()> {
    let spec = WavSpec {
        channels: w.num_channels() as u16,
        sample_rate: w.sample_rate(),
        bits_per_sample: match format {
            WavFormat::Pcm16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Pcm16 => SampleFormat::Int,
            WavFormat::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path.as_ref(), spec)?;
    for n in 0..w.len() {
        for c in w.channels() {
            match format {
                WavFormat::Pcm16 => {
                    let v = (c[n] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(v)?;
                }
                WavFormat::Float32 => writer.write_sample(c[n] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_is_exact_for_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let w = MultichannelWaveform::new(vec![vec![0.25, -0.5, 0.125], vec![1.0, 0.0, -1.0]], 16000).unwrap();
        write_wav(&path, &w, WavFormat::Float32).unwrap();
        assert_eq!(read_wav(&path).unwrap(), w);
    }

    #[test]
    fn pcm16_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.wav");
        let w = MultichannelWaveform::mono(vec![0.1, -0.3, 0.7, -0.99], 16000);
        write_wav(&path, &w, WavFormat::Pcm16).unwrap();
        let r = read_wav(&path).unwrap();
        for (a, b) in w.channel(0).iter().zip(r.channel(0)) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }
}
