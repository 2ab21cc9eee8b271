//! Mask estimation with random weights, batch and frame by frame.

use cabinsep::dsp::MultichannelWaveform;
use cabinsep::model::{count_macs, init_random, Model, ModelConfig, Variant};
use cabinsep::pipeline::stft_for;
use cabinsep::synth;

fn main() -> cabinsep::Result<()> {
    for v in [Variant::S, Variant::M, Variant::L] {
        let cfg = ModelConfig::preset(v);
        let macs = count_macs(&cfg, 1.0)?;
        println!(
            "{v}: {:.3} GMACs/s, {} parameters",
            macs.gmacs_per_second(),
            cabinsep::model::num_parameters(&cfg)
        );
    }

    let cfg = ModelConfig::s();
    let model = Model::new(cfg.clone(), &init_random(&cfg, 5)?)?;
    let ch = (0..4)
        .map(|c| synth::speech_like(0.3, 16000, c))
        .collect::<Result<Vec<_>, _>>()?;
    let y = stft_for(&cfg, 16000)?.analyze(&MultichannelWaveform::new(ch, 16000)?)?;

    let masks = model.forward(&y, 0)?;
    println!("masks {:?}", masks.shape());

    let mut stream = model.stream(0)?;
    let mut same = true;
    for t in 0..y.num_frames() {
        let (s, n) = stream.step(&y.snapshot(t))?;
        same &= s == masks.speech.frame(t) && n == masks.noise.frame(t);
    }
    println!("frame-by-frame equals batch: {same}");
    Ok(())
}
