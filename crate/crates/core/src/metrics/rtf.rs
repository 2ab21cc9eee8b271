use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtfReport {
    pub audio_seconds: f64,
    /// Wall-clock seconds / audio seconds for each timed run.
    pub runs: Vec<f64>,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub variance: f64,
}

/// Time `run` (one full pass over `audio_seconds` of audio) after one
/// untimed warmup. The closure is called on the current thread only.
pub fn rtf_benchmark(audio_seconds: f64, runs: usize, mut run: impl FnMut() -> Result<()>) -> Result<RtfReport> {
    if !(audio_seconds > 0.0) {
        return Err(invalid_input("audio duration must be positive"));
    }
    if runs < 5 {
        return Err(invalid_input(format!("need at least 5 timed runs, got {runs}")));
    }
    run()?;
    let mut rtf = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t0 = Instant::now();
        run()?;
        rtf.push(t0.elapsed().as_secs_f64() / audio_seconds);
    }
    let mut sorted = rtf.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mean = rtf.iter().sum::<f64>() / n as f64;
    let variance = rtf.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(RtfReport {
        audio_seconds,
        median,
        min: sorted[0],
        max: sorted[n - 1],
        variance,
        runs: rtf,
    })
}
