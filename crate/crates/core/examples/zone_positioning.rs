//! Which zone does a lone talker end up in after oracle-mask MVDR?

use cabinsep::augment::{mix_scene, Scene, SceneSpeaker};
use cabinsep::irlab::{simulate_ism_all, RoomSpec};
use cabinsep::metrics::{zone_positioning, PositioningResult};
use cabinsep::model::ModelConfig;
use cabinsep::mvdr::MvdrConfig;
use cabinsep::pipeline::{beamform_with_masks, ideal_ratio_masks, stft_for};
use cabinsep::synth;

fn main() -> cabinsep::Result<()> {
    let stft = stft_for(&ModelConfig::s(), 16000)?;
    let mut entries = Vec::new();
    for zone in 0..4 {
        let mut scene = Scene::new(4, 16000);
        scene.speakers.push(SceneSpeaker {
            zone,
            speech: synth::speech_like(2.0, 16000, zone as u64)?,
            irs: simulate_ism_all(&RoomSpec::cabin_seat(zone)?)?,
            gain: 1.0,
        });
        let r = mix_scene(&scene)?;
        let (y, _) = beamform_with_masks(
            &r.mixture,
            &ideal_ratio_masks(&r, &stft)?,
            &stft,
            &MvdrConfig::default(),
        )?;
        let outs: Vec<&[f64]> = (0..4).map(|c| y.channel(c)).collect();
        let e = zone_positioning(&outs, zone)?;
        println!("talker in zone {zone} -> {:?}", e.predicted);
        entries.push(e);
    }
    println!("accuracy {:.2}", PositioningResult::from_entries(entries).accuracy);
    Ok(())
}
