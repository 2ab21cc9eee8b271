//! Measure a known IR with each excitation type and compare.

use cabinsep::dsp::convolve_slices;
use cabinsep::irlab::{extract_ir, normalized_correlation, playback_signal, ExcitationSpec};

fn main() -> cabinsep::Result<()> {
    let truth: Vec<f64> = (0..256)
        .map(|i| (-(i as f64) / 30.0).exp() * if i % 3 == 0 { 1.0 } else { -0.4 })
        .collect();
    for spec in [
        ExcitationSpec::ess(10.0, 8000.0, 2.0, 16000),
        ExcitationSpec::mls(14),
        ExcitationSpec::tsp(8192, 2048),
    ] {
        let played = playback_signal(&spec)?;
        let recorded = convolve_slices(&played, &truth)?;
        let h = extract_ir(&recorded, &spec, truth.len())?;
        println!(
            "{:?}: correlation {:.5}",
            spec.kind,
            normalized_correlation(h.taps(), &truth)
        );
    }
    Ok(())
}
