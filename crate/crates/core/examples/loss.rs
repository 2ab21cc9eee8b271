//! The training objective on a clean, a noisy and a wrong estimate.

use cabinsep::metrics::{combined_loss, fbank_mae, si_snr, LossWeights};
use cabinsep::synth;

fn main() -> cabinsep::Result<()> {
    let s = synth::speech_like(1.0, 16000, 1)?;
    let n = synth::car_noise(1.0, 16000, 2)?;
    let other = synth::speech_like(1.0, 16000, 3)?;
    let noisy: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + 0.3 * b).collect();
    let w = LossWeights::default();
    for (name, est) in [("clean", &s), ("noisy", &noisy), ("other talker", &other)] {
        println!(
            "{name:>12}: si-snr {:7.2} dB, fbank mae {:.3}, loss {:8.3}",
            si_snr(est, &s)?,
            fbank_mae(est, &s)?,
            combined_loss(est, &s, &n, &n, &w)?
        );
    }
    Ok(())
}
