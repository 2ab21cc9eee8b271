use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cabinsep::augment::{mix_scene, sample_manifest, SamplerConfig, SceneManifest};
use cabinsep::dsp::wav::{read_wav, write_wav, WavFormat};
use cabinsep::dsp::MultichannelWaveform;
use cabinsep::irlab::{
    extract_ir, playback_signal, simulate_ism_all, ExcitationKind, ExcitationSpec, MixStrategy, RoomSpec,
};
use cabinsep::metrics::{rtf_benchmark, si_snr, zone_positioning};
use cabinsep::model::{count_macs, init_random, ModelWeights, Variant};
use cabinsep::pipeline::Separator;
use cabinsep::run::RunConfig;
use cabinsep::{synth, Error, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

/// Streaming multi-zone speech separation for car cabins.
#[derive(Parser)]
#[command(name = "cabinsep", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Separate Z-channel recordings into one WAV per zone.
    Separate(SeparateArgs),
    /// Render a scene manifest (or a sampled one) to mixture and labels.
    Simulate(SimulateArgs),
    /// Excitation signals, IR extraction and image-source simulation.
    Ir {
        #[command(subcommand)]
        cmd: IrCmd,
    },
    /// SI-SNR and zone positioning of separated outputs.
    Eval(EvalArgs),
    /// Real-time factor and MAC count of a model variant.
    Bench(BenchArgs),
    /// Write seeded random weights for a variant.
    InitWeights(InitArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// MVDR forgetting factor.
    #[arg(long)]
    lambda: Option<f64>,
    /// MVDR diagonal loading relative to tr(Psi)/Z.
    #[arg(long)]
    loading: Option<f64>,
    #[arg(long)]
    chunk_seconds: Option<f64>,
    #[arg(long)]
    time_skip: bool,
}

impl ModelArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.variant {
            c.variant = v;
        }
        if let Some(w) = &self.weights {
            c.weights = Some(w.clone());
        }
        if let Some(l) = self.lambda {
            c.mvdr.forgetting = l;
        }
        if let Some(d) = self.loading {
            c.mvdr.loading = d;
        }
        if self.chunk_seconds.is_some() {
            c.chunk_seconds = self.chunk_seconds;
        }
        c.time_skip |= self.time_skip;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SeparateArgs {
    /// Z-channel WAV files; several are processed in parallel.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene manifest (JSON).
    #[arg(long, conflicts_with = "sample")]
    manifest: Option<PathBuf>,
    /// Draw a random cabin scene instead of reading a manifest.
    #[arg(long, requires = "seed")]
    sample: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 3.0)]
    seconds: f64,
    /// Override the IR mixing strategy of every mixed IR reference.
    #[arg(long)]
    strategy: Option<MixStrategy>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum IrCmd {
    /// Write an excitation signal and its JSON description.
    Gen {
        #[command(flatten)]
        exc: ExcitationArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deconvolve a recording of a generated excitation.
    Extract {
        #[arg(long)]
        recording: PathBuf,
        /// JSON written next to the excitation by `ir gen`.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 2048)]
        length: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Image-source IRs from a talker to every cabin microphone.
    Ism {
        /// Seat of this zone (0-based).
        #[arg(long, conflicts_with = "source")]
        zone: Option<usize>,
        /// Talker position x,y,z in meters.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        source: Option<Vec<f64>>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct ExcitationArgs {
    /// ess, mls or tsp.
    #[arg(long, default_value = "ess")]
    kind: String,
    #[arg(long, default_value_t = 10.0)]
    f_start: f64,
    #[arg(long, default_value_t = 8000.0)]
    f_end: f64,
    #[arg(long, default_value_t = 2.0)]
    duration: f64,
    #[arg(long, default_value_t = 14)]
    order: u32,
    #[arg(long, default_value_t = 8192)]
    length: usize,
    #[arg(long, default_value_t = 2048)]
    stretch: usize,
    #[arg(long, default_value_t = 16000)]
    sample_rate: u32,
}

impl ExcitationArgs {
    fn spec(&self) -> Result<ExcitationSpec> {
        let mut spec = match self.kind.to_ascii_lowercase().as_str() {
            "ess" => ExcitationSpec::ess(self.f_start, self.f_end, self.duration, self.sample_rate),
            "mls" => ExcitationSpec::mls(self.order),
            "tsp" => ExcitationSpec::tsp(self.length, self.stretch),
            k => {
                return Err(Error::InvalidInput(format!(
                    "unknown excitation {k:?} (ess, mls or tsp)"
                )))
            }
        };
        spec.sample_rate = self.sample_rate;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Separated outputs: one Z-channel WAV or a directory of zone{k}.wav.
    #[arg(long)]
    estimates: PathBuf,
    /// Clean references: one Z-channel WAV or a directory of label_zone{k}.wav.
    #[arg(long)]
    labels: PathBuf,
    /// Mixture for SI-SNR improvement.
    #[arg(long)]
    mixture: Option<PathBuf>,
    /// Talker zone (0-based) for the positioning check.
    #[arg(long)]
    true_zone: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "S")]
    variant: Variant,
    #[arg(long, default_value_t = 2.0)]
    seconds: f64,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    time_skip: bool,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long, default_value = "S")]
    variant: Variant,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    zones: usize,
    #[arg(long)]
    time_skip: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Separate(a) => separate(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Ir { cmd } => ir(cmd),
        Cmd::Eval(a) => eval(a),
        Cmd::Bench(a) => bench(a),
        Cmd::InitWeights(a) => init_weights(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("CABINSEP_THREADS") {
        let n: usize =
            v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
                Error::InvalidConfig(format!("CABINSEP_THREADS must be a positive integer, got {v:?}"))
            })?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn separate(a: SeparateArgs) -> Result<()> {
    let cfg = a.model.run_config()?;
    let weights_path = cfg
        .weights
        .clone()
        .ok_or_else(|| Error::InvalidConfig("separate needs --weights (or weights in --config)".into()))?;
    let weights = ModelWeights::load(&weights_path)?;
    let inputs = a
        .inputs
        .iter()
        .map(|p| read_wav(p).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>>>()?;
    let zones = inputs[0].num_channels();
    for (p, x) in a.inputs.iter().zip(&inputs) {
        if x.num_channels() != zones || x.sample_rate() != cfg.sample_rate || x.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{}: expected non-empty {zones}-channel audio at {} Hz",
                p.display(),
                cfg.sample_rate
            )));
        }
    }
    let sep = Separator::new(cfg.model_config(zones), &weights, cfg.mvdr, cfg.sample_rate)?;
    let sep = &sep;
    let block = cfg.block_samples();

    let pool = thread_pool()?;
    let results: Vec<Result<(MultichannelWaveform, f64)>> = pool.install(|| {
        inputs
            .par_iter()
            .map(|x| {
                let t0 = Instant::now();
                let y = sep.separate_streaming(x, block)?;
                Ok((y, t0.elapsed().as_secs_f64()))
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    for ((path, x), (y, secs)) in a.inputs.iter().zip(&inputs).zip(results) {
        let dir = if a.inputs.len() == 1 {
            a.out_dir.clone()
        } else {
            a.out_dir.join(path.file_stem().unwrap_or_default())
        };
        std::fs::create_dir_all(&dir)?;
        for z in 0..zones {
            write_wav(dir.join(format!("zone{}.wav", z + 1)), &y.select(z), WavFormat::Float32)?;
        }
        let report = json!({
            "input": path,
            "variant": cfg.variant,
            "zones": zones,
            "samples": x.len(),
            "seconds": x.duration_seconds(),
            "block_samples": block,
            "rtf": secs / x.duration_seconds(),
            "output_rms": (0..zones).map(|z| cabinsep::dsp::rms(y.channel(z))).collect::<Vec<_>>(),
            "mvdr": cfg.mvdr,
        });
        std::fs::write(dir.join("separation.json"), serde_json::to_string_pretty(&report)?)?;
        print_json(&report);
        eprintln!(
            "{}: {zones} zones -> {} (RTF {:.3})",
            path.display(),
            dir.display(),
            secs / x.duration_seconds()
        );
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let (mut manifest, base) = match (&a.manifest, a.sample) {
        (Some(p), false) => (SceneManifest::from_file(p)?, p.parent().map(Path::to_path_buf)),
        (None, true) => {
            let seed = a.seed.expect("clap enforces --seed with --sample");
            let cfg = SamplerConfig {
                seconds: a.seconds,
                ..SamplerConfig::default()
            };
            (sample_manifest(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))?, None)
        }
        _ => {
            return Err(Error::InvalidInput(
                "give either --manifest or --sample --seed N".into(),
            ))
        }
    };
    if let Some(s) = a.strategy {
        manifest.set_strategy(s);
    }
    let rendered = mix_scene(&manifest.to_scene(base.as_deref())?)?;
    rendered.write(&a.out_dir)?;
    std::fs::write(a.out_dir.join("manifest.json"), manifest.to_json())?;
    print_json(&json!({
        "out_dir": a.out_dir,
        "samples": rendered.mixture.len(),
        "active_zones": rendered.active_zones,
    }));
    Ok(())
}

fn ir(cmd: IrCmd) -> Result<()> {
    match cmd {
        IrCmd::Gen { exc, out } => {
            let spec = exc.spec()?;
            let x = playback_signal(&spec)?;
            let sidecar = out.with_extension("json");
            write_wav(
                &out,
                &MultichannelWaveform::mono(x, spec.sample_rate),
                WavFormat::Float32,
            )?;
            std::fs::write(&sidecar, serde_json::to_string_pretty(&spec)?)?;
            print_json(&json!({ "excitation": out, "spec": sidecar }));
        }
        IrCmd::Extract {
            recording,
            spec,
            length,
            out,
        } => {
            let text =
                std::fs::read_to_string(&spec).map_err(|e| Error::InvalidInput(format!("{}: {e}", spec.display())))?;
            let spec: ExcitationSpec = serde_json::from_str(&text)?;
            let rec = read_wav(&recording)?;
            if rec.sample_rate() != spec.sample_rate {
                return Err(Error::InvalidInput(format!(
                    "recording is {} Hz, excitation is {} Hz",
                    rec.sample_rate(),
                    spec.sample_rate
                )));
            }
            let irs = (0..rec.num_channels())
                .map(|c| extract_ir(rec.channel(c), &spec, length))
                .collect::<Result<Vec<_>>>()?;
            let stem = out.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let mut written = Vec::new();
            for (c, h) in irs.iter().enumerate() {
                let p = if irs.len() == 1 {
                    out.clone()
                } else {
                    out.with_file_name(format!("{stem}_mic{}.wav", c + 1))
                };
                h.save(&p)?;
                written.push(p);
            }
            let kind = match spec.kind {
                ExcitationKind::Ess { .. } => "ess",
                ExcitationKind::Mls { .. } => "mls",
                ExcitationKind::Tsp { .. } => "tsp",
            };
            print_json(&json!({ "kind": kind, "taps": length, "irs": written }));
        }
        IrCmd::Ism {
            zone,
            source,
            beta,
            order,
            out_dir,
        } => {
            let mut room = match (zone, source) {
                (Some(z), None) => RoomSpec::cabin_seat(z)?,
                (None, Some(s)) => RoomSpec::cabin([s[0], s[1], s[2]]),
                _ => return Err(Error::InvalidInput("give --zone or --source x,y,z".into())),
            };
            if let Some(b) = beta {
                room = room.with_beta(b);
            }
            if let Some(k) = order {
                room = room.with_max_order(k);
            }
            room.validate()?;
            let irs = simulate_ism_all(&room)?;
            std::fs::create_dir_all(&out_dir)?;
            let mut written = Vec::new();
            for (m, h) in irs.iter().enumerate() {
                let p = out_dir.join(format!("mic{}.wav", m + 1));
                h.save(&p)?;
                written.push(p);
            }
            print_json(&json!({ "source": room.source, "irs": written }));
        }
    }
    Ok(())
}

/// A Z-channel WAV, or `dir/{prefix}{k}.wav` for k = 1, 2, ...
fn read_zone_set(path: &Path, prefix: &str) -> Result<MultichannelWaveform> {
    if path.is_file() {
        return read_wav(path);
    }
    let mut chans = Vec::new();
    let mut rate = 0;
    for k in 1.. {
        let p = path.join(format!("{prefix}{k}.wav"));
        if !p.is_file() {
            break;
        }
        let w = read_wav(&p)?;
        rate = w.sample_rate();
        chans.push(w.channel(0).to_vec());
    }
    if chans.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no {prefix}*.wav files in {}",
            path.display()
        )));
    }
    MultichannelWaveform::new(chans, rate)
}

fn eval(a: EvalArgs) -> Result<()> {
    let est = read_zone_set(&a.estimates, "zone")?;
    let lab = read_zone_set(&a.labels, "label_zone")?;
    if est.num_channels() != lab.num_channels() || est.len() != lab.len() {
        return Err(Error::InvalidInput(format!(
            "estimates are {}x{}, labels are {}x{}",
            est.num_channels(),
            est.len(),
            lab.num_channels(),
            lab.len()
        )));
    }
    let mix = a.mixture.as_deref().map(read_wav).transpose()?;
    let mut zones = Vec::new();
    for z in 0..est.num_channels() {
        if lab.channel(z).iter().all(|v| *v == 0.0) {
            zones.push(json!({ "zone": z, "si_snr": null }));
            continue;
        }
        let s = si_snr(est.channel(z), lab.channel(z))?;
        let improvement = match &mix {
            Some(m) if m.num_channels() > z && m.len() == lab.len() => Some(s - si_snr(m.channel(z), lab.channel(z))?),
            _ => None,
        };
        zones.push(json!({ "zone": z, "si_snr": s, "si_snr_improvement": improvement }));
    }
    let positioning = match a.true_zone {
        Some(t) => {
            let refs: Vec<&[f64]> = (0..est.num_channels()).map(|z| est.channel(z)).collect();
            Some(zone_positioning(&refs, t)?)
        }
        None => None,
    };
    print_json(&json!({ "zones": zones, "positioning": positioning }));
    for v in &zones {
        if let Some(s) = v["si_snr"].as_f64() {
            eprintln!("zone {}: SI-SNR {s:.2} dB", v["zone"]);
        }
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let cfg = cabinsep::model::ModelConfig::preset(a.variant).with_time_skip(a.time_skip);
    let macs = count_macs(&cfg, 1.0)?;
    let weights = init_random(&cfg, a.seed)?;
    let sep = Separator::new(cfg.clone(), &weights, Default::default(), 16000)?;
    let chans = (0..cfg.zones)
        .map(|c| synth::speech_like(a.seconds, 16000, a.seed.wrapping_add(c as u64)))
        .collect::<Result<Vec<_>>>()?;
    let x = MultichannelWaveform::new(chans, 16000)?;
    let hop = sep.stft().config().hop;
    let rtf = rtf_benchmark(x.duration_seconds(), a.runs, || {
        sep.separate_streaming(&x, hop).map(|_| ())
    })?;
    print_json(&json!({
        "variant": a.variant,
        "time_skip": a.time_skip,
        "gmacs_per_second": macs.gmacs_per_second(),
        "macs": macs,
        "rtf": rtf,
    }));
    eprintln!(
        "{}: {:.3} GMACs/s, median RTF {:.3}",
        a.variant,
        macs.gmacs_per_second(),
        rtf.median
    );
    Ok(())
}

fn init_weights(a: InitArgs) -> Result<()> {
    let cfg = cabinsep::model::ModelConfig::preset(a.variant)
        .with_zones(a.zones)
        .with_time_skip(a.time_skip);
    let w = init_random(&cfg, a.seed)?;
    w.save(&a.out)?;
    print_json(&json!({
        "variant": a.variant,
        "zones": a.zones,
        "parameters": w.num_parameters(),
        "out": a.out,
    }));
    eprintln!(
        "{} weights, {} parameters -> {}",
        a.variant,
        w.num_parameters(),
        a.out.display()
    );
    Ok(())
}
