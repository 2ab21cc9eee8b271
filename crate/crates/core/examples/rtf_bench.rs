//! Real-time factor of the streaming separator for each model size.

use cabinsep::dsp::MultichannelWaveform;
use cabinsep::metrics::rtf_benchmark;
use cabinsep::model::{init_random, ModelConfig, Variant};
use cabinsep::mvdr::MvdrConfig;
use cabinsep::pipeline::Separator;
use cabinsep::synth;

fn main() -> cabinsep::Result<()> {
    let ch = (0..4)
        .map(|c| synth::speech_like(2.0, 16000, c))
        .collect::<Result<Vec<_>, _>>()?;
    let x = MultichannelWaveform::new(ch, 16000)?;
    for v in [Variant::S, Variant::M, Variant::L] {
        let cfg = ModelConfig::preset(v);
        let sep = Separator::new(cfg.clone(), &init_random(&cfg, 0)?, MvdrConfig::default(), 16000)?;
        let r = rtf_benchmark(2.0, 5, || sep.separate_streaming(&x, 256).map(|_| ()))?;
        println!("{v}: median RTF {:.3} (min {:.3}, max {:.3})", r.median, r.min, r.max);
    }
    Ok(())
}
