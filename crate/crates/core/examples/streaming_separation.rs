//! Separate a simulated two-talker cabin scene block by block, with model
//! masks and with oracle masks from the clean images.

use cabinsep::augment::{mix_scene, sample_manifest, SamplerConfig};
use cabinsep::metrics::si_snr;
use cabinsep::model::{init_random, ModelConfig};
use cabinsep::mvdr::MvdrConfig;
use cabinsep::pipeline::{beamform_with_masks, ideal_ratio_masks, Separator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cabinsep::Result<()> {
    let cfg = SamplerConfig {
        seconds: 3.0,
        ..SamplerConfig::default()
    };
    let manifest = sample_manifest(&cfg, &mut ChaCha8Rng::seed_from_u64(3))?;
    let scene = mix_scene(&manifest.to_scene(None)?)?;
    let labels = scene.speech_labels();
    println!("active zones {:?}", scene.active_zones);

    let model = ModelConfig::s();
    let sep = Separator::new(model.clone(), &init_random(&model, 1)?, MvdrConfig::default(), 16000)?;
    let mut stream = sep.stream()?;
    let mut out = vec![Vec::new(); 4];
    for start in (0..scene.mixture.len()).step_by(256) {
        let end = (start + 256).min(scene.mixture.len());
        let block: Vec<&[f64]> = (0..4).map(|c| &scene.mixture.channel(c)[start..end]).collect();
        for (o, v) in out.iter_mut().zip(stream.push(&block)?) {
            o.extend(v);
        }
    }
    for (o, v) in out.iter_mut().zip(stream.finish()?) {
        o.extend(v);
    }

    let (oracle, _) = beamform_with_masks(
        &scene.mixture,
        &ideal_ratio_masks(&scene, sep.stft())?,
        sep.stft(),
        &MvdrConfig::default(),
    )?;
    for &z in &scene.active_zones {
        println!(
            "zone {z}: mixture {:6.2} dB, random weights {:6.2} dB, oracle masks {:6.2} dB",
            si_snr(scene.mixture.channel(z), labels.channel(z))?,
            si_snr(&out[z], labels.channel(z))?,
            si_snr(oracle.channel(z), labels.channel(z))?,
        );
    }
    Ok(())
}
