//! Sample cabin scenes and write one to disk.

use cabinsep::augment::{mix_scene, sample_manifest, SamplerConfig};
use cabinsep::dsp::power;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cabinsep::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = SamplerConfig::default();
    for k in 0..5 {
        let m = sample_manifest(&cfg, &mut rng)?;
        let r = mix_scene(&m.to_scene(None)?)?;
        let speech: f64 = (0..4).map(|c| power(r.speech_labels().channel(c))).sum();
        let noise: f64 = (0..4).map(|c| power(r.noise.channel(c))).sum();
        println!(
            "scene {k}: zones {:?}, speech/noise {:.1} dB",
            r.active_zones,
            10.0 * (speech / noise).log10()
        );
        if k == 0 {
            let dir = std::env::temp_dir().join("cabinsep_scene");
            r.write(&dir)?;
            std::fs::write(dir.join("manifest.json"), m.to_json())?;
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}
