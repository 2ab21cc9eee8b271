//! Log power spectra and inter-mic phase differences of a 4-mic recording.

use cabinsep::dsp::{MultichannelWaveform, Stft, StftConfig};
use cabinsep::features::{compute_ipd, compute_lps, stack_real_imag, DEFAULT_LPS_FLOOR};
use cabinsep::synth;

fn main() -> cabinsep::Result<()> {
    let ch = synth::car_noise_multichannel(0.5, 16000, 4, 3)?;
    let y = Stft::new(StftConfig::default())?.analyze(&MultichannelWaveform::new(ch, 16000)?)?;

    let ri = stack_real_imag(&y);
    let lps = compute_lps(&y, DEFAULT_LPS_FLOOR)?;
    let ipd = compute_ipd(&y, 0, 1)?;
    println!("real/imag {:?}", ri.shape());
    println!("lps       {:?}", lps.shape());
    println!("ipd 0-1   {:?}", ipd.shape());

    let mean = lps.data().iter().map(|v| *v as f64).sum::<f64>() / lps.data().len() as f64;
    println!("mean log power {mean:.2}");
    Ok(())
}
