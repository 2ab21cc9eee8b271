//! Batch and streaming STFT round trip on a synthetic utterance.

use cabinsep::dsp::{FrameAnalyzer, MultichannelWaveform, OverlapAdd, Stft, StftConfig};
use cabinsep::synth;

fn main() -> cabinsep::Result<()> {
    let x = MultichannelWaveform::mono(synth::speech_like(1.0, 16000, 1)?, 16000);
    let stft = Stft::new(StftConfig::default())?;
    let spec = stft.analyze(&x)?;
    println!("{} frames x {} bins", spec.num_frames(), spec.num_bins());

    let y = stft.synthesize(&spec, Some(x.len()), 16000)?;
    let err = y
        .channel(0)
        .iter()
        .zip(x.channel(0))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("batch round trip max error {err:.2e}");

    let mut analyzer = FrameAnalyzer::new(stft.clone(), 1);
    let mut ola = OverlapAdd::new(stft.clone());
    let mut streamed = Vec::new();
    for block in x.channel(0).chunks(100) {
        for frame in analyzer.push(&[block]) {
            streamed.extend(ola.push(&frame));
        }
    }
    for frame in analyzer.finish() {
        streamed.extend(ola.push(&frame));
    }
    streamed.extend(ola.flush());
    streamed.truncate(x.len());
    println!("streaming equals batch: {}", streamed == y.channel(0));
    Ok(())
}
