//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::time::Instant;

use cabinsep::augment::{mix_scene, NoiseSource, RenderedScene, Scene, SceneSpeaker};
use cabinsep::dsp::{convolve_slices, power, MultichannelWaveform, Stft, StftConfig};
use cabinsep::irlab::{
    extract_ir, image_sources, mix_ir_sets, normalized_correlation, playback_signal, simulate_ism, simulate_ism_all,
    ExcitationSpec, ImpulseResponse, Interpolation, IrMetadata, IrOrigin, IrSet, MixStrategy, RoomSpec, SPEED_OF_SOUND,
};
use cabinsep::metrics::{rtf_benchmark, si_snr, zone_positioning, PositioningEntry, PositioningResult};
use cabinsep::model::{count_macs, init_random, Model, ModelConfig, Variant};
use cabinsep::mvdr::{load_diagonal, mvdr_weights, separate_stream, MvdrConfig};
use cabinsep::pipeline::{beamform_with_masks, ideal_ratio_masks, Separator};
use cabinsep::synth;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn rank1(d: &[Complex64]) -> Vec<Complex64> {
    let z = d.len();
    let mut m = vec![Complex64::new(0.0, 0.0); z * z];
    for r in 0..z {
        for c in 0..z {
            m[r * z + c] = d[r] * d[c].conj();
        }
    }
    m
}

/// Sum of `k` random outer products: Hermitian PSD, full rank when k >= z.
fn random_psd(z: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); z * z];
    for _ in 0..k {
        let v: Vec<Complex64> = (0..z).map(|_| cgauss(rng)).collect();
        for (a, b) in m.iter_mut().zip(rank1(&v)) {
            *a += b;
        }
    }
    m
}

fn stft_roundtrip() -> Outcome {
    let stft = Stft::new(StftConfig::default()).map_err(|e| e.to_string())?;
    let cfg = *stft.config();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2 * cfg.window_length..24_000);
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let w = MultichannelWaveform::mono(x.clone(), 16000);
        let y = stft.synthesize(&stft.analyze(&w).unwrap(), Some(n), 16000).unwrap();
        // interior: samples covered by a full complement of overlapping frames
        for i in cfg.window_length..n - cfg.window_length {
            worst = worst.max((y.channel(0)[i] - x[i]).abs());
        }
    }
    check(worst < 1e-6, format!("max interior error {worst:.2e} over 50 signals"))
}

fn mvdr_distortionless() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let z = 2 + trial % 5;
        let d: Vec<Complex64> = (0..z).map(|_| cgauss(&mut rng)).collect();
        let psi = load_diagonal(&random_psd(z, z + 2, &mut rng), z, 1e-4);
        let reference = trial % z;
        let w = mvdr_weights(&rank1(&d), &psi, z, reference).map_err(|e| e.to_string())?;
        let resp: Complex64 = w.iter().zip(&d).map(|(a, b)| a.conj() * b).sum();
        worst = worst.max((resp - d[reference]).norm() / d[reference].norm());
    }
    check(
        worst < 1e-6,
        format!("max relative |W^H d - d_ref| {worst:.2e} over 100 trials"),
    )
}

fn trace_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let z = 2 + trial % 5;
        let phi = random_psd(z, 1 + trial % 3, &mut rng);
        let psi = load_diagonal(&random_psd(z, z + 1, &mut rng), z, 1e-4);
        let w = mvdr_weights(&phi, &psi, z, 0).map_err(|e| e.to_string())?;
        let norm: f64 = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for c in [1e-3, 1e3] {
            let scaled: Vec<Complex64> = phi.iter().map(|v| v * c).collect();
            let wc = mvdr_weights(&scaled, &psi, z, 0).map_err(|e| e.to_string())?;
            let diff: f64 = w.iter().zip(&wc).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(diff / norm);
        }
    }
    check(
        worst < 1e-8,
        format!("max relative weight change {worst:.2e} over 100 trials"),
    )
}

fn cabin_irs(zone: usize) -> Vec<ImpulseResponse> {
    simulate_ism_all(&RoomSpec::cabin_seat(zone).unwrap()).unwrap()
}

fn oracle_scene(zones: &[usize], irs: &[Vec<ImpulseResponse>], seconds: f64, seed: u64) -> RenderedScene {
    let mut scene = Scene::new(4, 16000);
    for (k, &z) in zones.iter().enumerate() {
        scene.speakers.push(SceneSpeaker {
            zone: z,
            speech: synth::speech_like(seconds, 16000, seed * 31 + k as u64).unwrap(),
            irs: irs[z].clone(),
            gain: 1.0,
        });
    }
    scene.background = Some(NoiseSource {
        signal: synth::car_noise_diffuse(seconds, 16000, &RoomSpec::CABIN_MICS, seed * 31 + 17).unwrap(),
        snr_db: 5.0,
    });
    mix_scene(&scene).unwrap()
}

/// Oracle masks computed from the scene, then streaming MVDR.
fn oracle_separate(scene: &RenderedScene, stft: &Stft) -> MultichannelWaveform {
    let masks = ideal_ratio_masks(scene, stft).unwrap();
    beamform_with_masks(&scene.mixture, &masks, stft, &MvdrConfig::default())
        .unwrap()
        .0
}

fn oracle_gain() -> Outcome {
    let stft = Stft::new(StftConfig::default()).unwrap();
    let irs: Vec<_> = (0..4).map(cabin_irs).collect();
    let mut gains = Vec::new();
    for seed in 0..20 {
        let scene = oracle_scene(&[0, 2], &irs, 3.0, seed);
        let out = oracle_separate(&scene, &stft);
        let labels = scene.speech_labels();
        for &z in &scene.active_zones {
            let before = si_snr(scene.mixture.channel(z), labels.channel(z)).unwrap();
            let after = si_snr(out.channel(z), labels.channel(z)).unwrap();
            gains.push(after - before);
        }
    }
    let lo = gains.iter().cloned().fold(f64::INFINITY, f64::min);
    let med = median(&mut gains);
    check(
        med >= 5.0,
        format!("median SI-SNR gain {med:.2} dB (min {lo:.2}) over 40 zone outputs"),
    )
}

fn causality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for v in Variant::ALL {
        let cfg = ModelConfig::preset(v).with_time_skip(v == Variant::S);
        let w = init_random(&cfg, 7).unwrap();
        let sep = Separator::new(cfg.clone(), &w, MvdrConfig::default(), 16000).unwrap();
        let win = sep.stft().config().window_length;
        let x = MultichannelWaveform::new(
            (0..4)
                .map(|c| synth::speech_like(1.0, 16000, 40 + c).unwrap())
                .collect(),
            16000,
        )
        .unwrap();
        let y = sep.stft().analyze(&x).unwrap();
        let full_masks = sep.model().forward(&y, 0).unwrap();
        let (full_bf, _) = separate_stream(&y, &full_masks, &MvdrConfig::default()).unwrap();
        let full = sep.separate_streaming(&x, 160).unwrap();
        for _ in 0..10 {
            let len = rng.gen_range(win + 1..x.len());
            let prefix = x.truncated(len);
            let yp = sep.stft().analyze(&prefix).unwrap();
            // frames lying fully inside the prefix
            let tf = (len - win) / sep.stft().config().hop + 1;
            let masks = sep.model().forward(&yp.truncated(tf), 0).unwrap();
            for t in 0..tf {
                if masks.speech.frame(t) != full_masks.speech.frame(t)
                    || masks.noise.frame(t) != full_masks.noise.frame(t)
                {
                    return Err(format!("{v:?}: model frame {t} differs for prefix of {tf} frames"));
                }
            }
            let (bf, _) = separate_stream(&yp.truncated(tf), &masks, &MvdrConfig::default()).unwrap();
            for t in 0..tf {
                if bf.snapshot(t) != full_bf.snapshot(t) {
                    return Err(format!("{v:?}: MVDR frame {t} differs for prefix of {tf} frames"));
                }
            }
            let out = sep.separate_streaming(&prefix, 160).unwrap();
            for z in 0..4 {
                if out.channel(z)[..len - win] != full.channel(z)[..len - win] {
                    return Err(format!("{v:?}: waveform prefix of {len} samples differs in zone {z}"));
                }
            }
        }
    }
    Ok("model, MVDR and waveform prefixes bit-exact at 10 cuts for S, M, L".into())
}

fn macs() -> Outcome {
    let base = count_macs(&ModelConfig::s(), 1.0).map_err(|e| e.to_string())?;
    let skip = count_macs(&ModelConfig::s().with_time_skip(true), 1.0).map_err(|e| e.to_string())?;
    let g = base.gmacs_per_second();
    let (tac, tac_skip) = (base.components["tac"], skip.components["tac"]);
    let per_frame = tac / base.frames as u64;
    let odd = base.frames % 2;
    let ok = (0.2..=0.8).contains(&g) && tac_skip * 2 == tac + odd as u64 * per_frame;
    check(
        ok,
        format!(
            "S = {g:.3} GMACs/s; TAC {tac} -> {tac_skip} with time skip over {} frames",
            base.frames
        ),
    )
}

fn masks() -> Outcome {
    for v in Variant::ALL {
        let cfg = ModelConfig::preset(v);
        let w = init_random(&cfg, 3).unwrap();
        let model = Model::new(cfg.clone(), &w).unwrap();
        let stft = Stft::new(StftConfig::default()).unwrap();
        for t in [1usize, 7, 100] {
            let n = t * 256;
            let x = MultichannelWaveform::new(
                (0..4)
                    .map(|c| synth::white_noise(n as f64 / 16000.0, 16000, c).unwrap())
                    .collect(),
                16000,
            )
            .unwrap();
            let y = stft.analyze(&x).unwrap();
            if y.num_frames() != t {
                return Err(format!("expected {t} frames, got {}", y.num_frames()));
            }
            let a = model.forward(&y, 0).unwrap();
            let b = model.forward(&y, 0).unwrap();
            if a.shape() != (4, t, 257) || a != b {
                return Err(format!("{v:?} T={t}: shape {:?} or nondeterministic", a.shape()));
            }
            let in_range = |m: &[f32]| m.iter().all(|x| (0.0..=1.0).contains(x));
            if !in_range(a.speech.data()) || !in_range(a.noise.data()) {
                return Err(format!("{v:?} T={t}: mask outside [0, 1]"));
            }
        }
    }
    Ok("S, M, L give deterministic 4 x T x 257 masks in [0, 1] for T = 1, 7, 100".into())
}

fn known_ir(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..128)
        .map(|i| rng.sample::<f64, _>(StandardNormal) * (-(i as f64) / 25.0).exp())
        .collect()
}

fn ir_round_trips() -> Outcome {
    let h = known_ir(9);
    let mut lines = Vec::new();
    let specs = [
        ExcitationSpec::ess(10.0, 8000.0, 2.0, 16000),
        ExcitationSpec::mls(14),
        ExcitationSpec::tsp(8192, 2048),
    ];
    for spec in specs {
        let rec = convolve_slices(&playback_signal(&spec).unwrap(), &h).unwrap();
        let r = normalized_correlation(extract_ir(&rec, &spec, 128).unwrap().taps(), &h);
        if !(r > 0.99) {
            return Err(format!("{:?}: correlation {r:.4}", spec.kind));
        }
        lines.push(format!("{r:.4}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let spec = specs[0];
    let mut rec = convolve_slices(&playback_signal(&spec).unwrap(), &h).unwrap();
    let noise: Vec<f64> = (0..rec.len()).map(|_| rng.sample(StandardNormal)).collect();
    let g = (power(&rec) / (power(&noise) * 100.0)).sqrt();
    for (r, n) in rec.iter_mut().zip(&noise) {
        *r += g * n;
    }
    let r20 = normalized_correlation(extract_ir(&rec, &spec, 128).unwrap().taps(), &h);
    if !(r20 > 0.95) {
        return Err(format!("ESS at 20 dB SNR: correlation {r20:.4}"));
    }

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let dims = [
            rng.gen_range(2.0..6.0),
            rng.gen_range(1.5..5.0),
            rng.gen_range(1.0..3.0),
        ];
        let pt = |rng: &mut ChaCha8Rng| [0, 1, 2].map(|k| rng.gen_range(0.1..dims[k] - 0.1));
        let mut room = RoomSpec::cabin(pt(&mut rng)).with_max_order(0);
        room.dims = dims;
        room.mics = vec![pt(&mut rng)];
        room.interpolation = Interpolation::Sinc;
        let d: f64 = (0..3)
            .map(|k| (room.source[k] - room.mics[0][k]).powi(2))
            .sum::<f64>()
            .sqrt();
        let expect = d * 16000.0 / SPEED_OF_SOUND;
        room.ir_length = expect as usize + 64;
        let direct = &image_sources(&room, 0).unwrap()[0];
        let ir = simulate_ism(&room, 0).unwrap();
        let peak = ir
            .taps()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        worst = worst
            .max((direct.delay - expect).abs())
            .max((peak as f64 - expect).abs());
    }
    check(
        worst <= 0.5,
        format!(
            "ESS/MLS/TSP correlation {}; ESS @20 dB {r20:.4}; ISM worst direct delay error {worst:.3} samples",
            lines.join("/")
        ),
    )
}

fn tagged(origin: IrOrigin, zones: usize) -> IrSet {
    let mut s = IrSet::default();
    for zone in 0..zones {
        let irs = (0..zones)
            .map(|_| {
                let meta = IrMetadata {
                    zone: Some(zone),
                    origin,
                    ..IrMetadata::synthetic()
                };
                ImpulseResponse::new(vec![1.0], 16000, meta).unwrap()
            })
            .collect();
        s.push(zone, irs);
    }
    s
}

fn augmentation() -> Outcome {
    let (sim, rec) = (tagged(IrOrigin::Simulated, 4), tagged(IrOrigin::Recorded, 4));
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for zone in 0..4 {
        let irs = mix_ir_sets(&sim, &rec, MixStrategy::Mixed, zone, &mut rng).unwrap();
        for (m, ir) in irs.iter().enumerate() {
            let want = if m == zone {
                IrOrigin::Recorded
            } else {
                IrOrigin::Simulated
            };
            if ir.origin() != want {
                return Err(format!("mixed: zone {zone} mic {m} got {:?}", ir.origin()));
            }
        }
    }
    let mut recorded = 0;
    for _ in 0..10_000 {
        let irs = mix_ir_sets(&sim, &rec, MixStrategy::Added, rng.gen_range(0..4), &mut rng).unwrap();
        recorded += irs.iter().all(|h| h.origin() == IrOrigin::Recorded) as usize;
    }
    let frac = recorded as f64 / 10_000.0;
    if (frac - 0.25).abs() > 0.02 {
        return Err(format!("added: recorded fraction {frac:.4}"));
    }

    let irs: Vec<_> = (0..4).map(cabin_irs).collect();
    let mut worst_add = 0.0f64;
    let mut worst_snr = 0.0f64;
    for seed in 0..10u64 {
        let target = rng.gen_range(-20.0..25.0);
        let mut scene = Scene::new(4, 16000);
        for (k, z) in [(0usize, seed as usize % 4), (1, (seed as usize + 2) % 4)] {
            scene.speakers.push(SceneSpeaker {
                zone: z,
                speech: synth::speech_like(1.0, 16000, seed * 7 + k as u64).unwrap(),
                irs: irs[z].clone(),
                gain: 1.0,
            });
        }
        scene.background = Some(NoiseSource {
            signal: synth::car_noise_multichannel(1.0, 16000, 4, seed).unwrap(),
            snr_db: target,
        });
        let r = mix_scene(&scene).unwrap();
        for m in 0..4 {
            for i in 0..r.mixture.len() {
                let sum: f64 = r.zone_images.iter().map(|im| im.channel(m)[i]).sum::<f64>() + r.noise.channel(m)[i];
                worst_add = worst_add.max((r.mixture.channel(m)[i] - sum).abs());
            }
        }
        let speech: Vec<f64> = (0..r.mixture.len())
            .map(|i| r.zone_images.iter().map(|im| im.channel(0)[i]).sum())
            .collect();
        let realized = 10.0 * (power(&speech) / power(r.noise.channel(0))).log10();
        worst_snr = worst_snr.max((realized - target).abs());
    }
    check(
        worst_add < 1e-6 && worst_snr < 1e-3,
        format!(
            "mixed exact; added fraction {frac:.4}; additivity residual {worst_add:.1e}; SNR error {worst_snr:.1e} dB"
        ),
    )
}

fn positioning() -> Outcome {
    let stft = Stft::new(StftConfig::default()).unwrap();
    let irs: Vec<_> = (0..4).map(cabin_irs).collect();
    let mut entries = Vec::new();
    for seed in 0..50u64 {
        let zone = (seed % 4) as usize;
        let scene = oracle_scene(&[zone], &irs, 2.0, 100 + seed);
        let out = oracle_separate(&scene, &stft);
        let refs: Vec<&[f64]> = (0..4).map(|z| out.channel(z)).collect();
        entries.push(zone_positioning(&refs, zone).unwrap());
    }
    let standard = PositioningResult::from_entries(entries);

    // talker midway between the two front zones; counted toward either
    let mid = [0.9, 0.75, 0.9];
    let mid_irs = simulate_ism_all(&RoomSpec::cabin(mid)).unwrap();
    let mut boundary: Vec<PositioningEntry> = Vec::new();
    for seed in 0..10u64 {
        let mut scene = Scene::new(4, 16000);
        scene.speakers.push(SceneSpeaker {
            zone: 0,
            speech: synth::speech_like(2.0, 16000, 500 + seed).unwrap(),
            irs: mid_irs.clone(),
            gain: 1.0,
        });
        scene.background = Some(NoiseSource {
            signal: synth::car_noise_diffuse(2.0, 16000, &RoomSpec::CABIN_MICS, 600 + seed).unwrap(),
            snr_db: 5.0,
        });
        let r = mix_scene(&scene).unwrap();
        let out = oracle_separate(&r, &stft);
        let refs: Vec<&[f64]> = (0..4).map(|z| out.channel(z)).collect();
        let mut e = zone_positioning(&refs, 0).unwrap();
        if e.predicted == Some(1) {
            e.true_zone = 1;
        }
        e.nonstandard = true;
        boundary.push(e);
    }
    let nspa = PositioningResult::from_entries(boundary).nspa.unwrap_or(0.0);
    check(
        standard.accuracy == 1.0 && standard.undecided == 0,
        format!(
            "standard accuracy {:.3} over 50 scenes; boundary NSPA {nspa:.3} (reported only)",
            standard.accuracy
        ),
    )
}

fn rtf() -> Outcome {
    let x = MultichannelWaveform::new(
        (0..4).map(|c| synth::speech_like(2.0, 16000, c).unwrap()).collect(),
        16000,
    )
    .unwrap();
    let mut medians = Vec::new();
    for v in Variant::ALL {
        let cfg = ModelConfig::preset(v);
        let w = init_random(&cfg, 1).unwrap();
        let sep = Separator::new(cfg, &w, MvdrConfig::default(), 16000).unwrap();
        let r = rtf_benchmark(x.duration_seconds(), 5, || sep.separate_streaming(&x, 256).map(|_| ())).unwrap();
        medians.push(r.median);
    }
    check(
        medians[0] <= medians[1] && medians[1] <= medians[2],
        format!(
            "single-thread median RTF S {:.3}, M {:.3}, L {:.3}",
            medians[0], medians[1], medians[2]
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 STFT round trip", stft_roundtrip),
        ("2 MVDR distortionless", mvdr_distortionless),
        ("3 trace-normalization invariance", trace_invariance),
        ("4 oracle-mask SI-SNR gain", oracle_gain),
        ("5 causality", causality),
        ("6 MAC accounting", macs),
        ("7 mask shapes", masks),
        ("8 IR round trips", ir_round_trips),
        ("9 augmentation strategies", augmentation),
        ("10 zone positioning", positioning),
        ("11 RTF ordering", rtf),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t0 = Instant::now();
        let res = f();
        let secs = t0.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{secs:.1} s]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
