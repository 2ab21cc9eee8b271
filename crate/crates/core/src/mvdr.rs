//! Mask-driven MVDR beamforming, one beam per zone.
//!
//! For zone `i` the target covariance accumulates snapshots weighted by the
//! zone's speech mask; the interference covariance uses the other zones'
//! speech masks plus the zone's own noise mask, clipped to [0, 1]. Weights
//! are `W = inv(Psi~) Phi e_i / tr(inv(Psi~) Phi)` with diagonally loaded
//! `Psi~`, and the output is `W^H y`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::ComplexSpectrogram;
use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::model::MaskPair;

/// Traces below this fall back to passing the reference mic through.
pub const TRACE_EPS: f64 = 1e-10;

/// Added to the loaded diagonal so an all-zero interference estimate stays invertible.
pub const ABS_LOADING_FLOOR: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MvdrConfig {
    /// Exponential forgetting factor in (0, 1]; 1 keeps a cumulative sum.
    pub forgetting: f64,
    /// Diagonal loading relative to the average eigenvalue `tr(Psi) / Z`.
    pub loading: f64,
    /// Recompute weights every this many frames.
    pub recompute_every: usize,
}

impl Default for MvdrConfig {
    fn default() -> Self {
        Self {
            forgetting: 1.0,
            loading: 1e-4,
            recompute_every: 1,
        }
    }
}

impl MvdrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(invalid_config(format!(
                "forgetting factor must be in (0, 1], got {}",
                self.forgetting
            )));
        }
        if !(self.loading >= 0.0) || !self.loading.is_finite() {
            return Err(invalid_config(format!("loading must be >= 0, got {}", self.loading)));
        }
        if self.recompute_every == 0 {
            return Err(invalid_config("weight recompute cadence must be at least 1"));
        }
        Ok(())
    }
}

/// Row-major Z x Z helpers.
fn trace(a: &[Complex64], z: usize) -> Complex64 {
    (0..z).map(|k| a[k * z + k]).sum()
}

fn hermitize(a: &mut [Complex64], z: usize) {
    for r in 0..z {
        a[r * z + r].im = 0.0;
        for c in r + 1..z {
            let m = (a[r * z + c] + a[c * z + r].conj()) * 0.5;
            a[r * z + c] = m;
            a[c * z + r] = m.conj();
        }
    }
}

/// `psi + (loading * tr(psi) / Z + ABS_LOADING_FLOOR) I`.
pub fn load_diagonal(psi: &[Complex64], z: usize, loading: f64) -> Vec<Complex64> {
    let mut out = psi.to_vec();
    let add = loading * trace(psi, z).re / z as f64 + ABS_LOADING_FLOOR;
    for k in 0..z {
        out[k * z + k] += add;
    }
    out
}

/// Lower-triangular `L` with `A = L L^H`.
fn cholesky(a: &[Complex64], z: usize) -> Option<Vec<Complex64>> {
    let mut l = vec![ZERO; z * z];
    for j in 0..z {
        let mut d = a[j * z + j].re;
        for k in 0..j {
            d -= l[j * z + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * z + j] = Complex64::new(djj, 0.0);
        for i in j + 1..z {
            let mut s = a[i * z + j];
            for k in 0..j {
                s -= l[i * z + k] * l[j * z + k].conj();
            }
            l[i * z + j] = s / djj;
        }
    }
    Some(l)
}

/// Solve `L L^H x = b` in place.
fn cholesky_solve(l: &[Complex64], z: usize, b: &mut [Complex64]) {
    for i in 0..z {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * z + k] * b[k];
        }
        b[i] = s / l[i * z + i];
    }
    for i in (0..z).rev() {
        let mut s = b[i];
        for k in i + 1..z {
            s -= l[k * z + i].conj() * b[k];
        }
        b[i] = s / l[i * z + i];
    }
}

/// `inv(A)` through its Cholesky factor, or `None` when `A` is not positive definite.
pub fn hermitian_inverse(a: &[Complex64], z: usize) -> Option<Vec<Complex64>> {
    let l = cholesky(a, z)?;
    let mut inv = vec![ZERO; z * z];
    let mut col = vec![ZERO; z];
    for c in 0..z {
        col.iter_mut()
            .enumerate()
            .for_each(|(k, v)| *v = if k == c { Complex64::new(1.0, 0.0) } else { ZERO });
        cholesky_solve(&l, z, &mut col);
        for r in 0..z {
            inv[r * z + c] = col[r];
        }
    }
    Some(inv)
}

fn unit(z: usize, reference: usize) -> Vec<Complex64> {
    let mut e = vec![ZERO; z];
    e[reference] = Complex64::new(1.0, 0.0);
    e
}

/// Weight vector for one bin from `phi` and an already loaded `psi`.
///
/// Returns the reference selector when `|tr(inv(psi) phi)| < TRACE_EPS` and a
/// numerical error when `psi` is not positive definite.
pub fn mvdr_weights(phi: &[Complex64], psi_loaded: &[Complex64], z: usize, reference: usize) -> Result<Vec<Complex64>> {
    if phi.len() != z * z || psi_loaded.len() != z * z || reference >= z {
        return Err(invalid_input(format!("expected {z}x{z} matrices and reference < {z}")));
    }
    Ok(solve_weights(phi, psi_loaded, z, reference)?.unwrap_or_else(|| unit(z, reference)))
}

// Ok(None) means the trace was degenerate.
fn solve_weights(phi: &[Complex64], psi: &[Complex64], z: usize, reference: usize) -> Result<Option<Vec<Complex64>>> {
    let l = cholesky(psi, z)
        .ok_or_else(|| Error::Numerical("loaded interference covariance is not positive definite".into()))?;
    // X = inv(psi) phi, column by column
    let mut x = vec![ZERO; z * z];
    let mut col = vec![ZERO; z];
    for c in 0..z {
        for r in 0..z {
            col[r] = phi[r * z + c];
        }
        cholesky_solve(&l, z, &mut col);
        for r in 0..z {
            x[r * z + c] = col[r];
        }
    }
    let tr = trace(&x, z);
    if tr.norm() < TRACE_EPS || !tr.is_finite() {
        return Ok(None);
    }
    Ok(Some((0..z).map(|r| x[r * z + reference] / tr).collect()))
}

/// `W^H y`.
pub fn apply(w: &[Complex64], y: &[Complex64]) -> Complex64 {
    w.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MvdrReport {
    pub frames: usize,
    /// Bin solves that fell back to passthrough because of a vanishing trace.
    pub passthrough_bins: usize,
    /// Bin solves where the loaded covariance could not be factored.
    pub singular_bins: usize,
    pub weight_updates: usize,
}

/// Per-zone, per-bin covariance and weight state of one stream.
#[derive(Debug, Clone)]
pub struct BeamformerState {
    zones: usize,
    bins: usize,
    cfg: MvdrConfig,
    // [zone][bin][Z*Z]
    phi: Vec<Complex64>,
    psi: Vec<Complex64>,
    // [zone][bin][Z]
    weights: Vec<Complex64>,
    frame_count: usize,
    report: MvdrReport,
}

impl BeamformerState {
    pub fn new(zones: usize, bins: usize, cfg: MvdrConfig) -> Result<Self> {
        cfg.validate()?;
        if zones == 0 || bins == 0 {
            return Err(invalid_input("beamformer needs at least one zone and one bin"));
        }
        let zz = zones * zones;
        let mut weights = vec![ZERO; zones * bins * zones];
        for i in 0..zones {
            for f in 0..bins {
                weights[(i * bins + f) * zones + i] = Complex64::new(1.0, 0.0);
            }
        }
        Ok(Self {
            zones,
            bins,
            cfg,
            phi: vec![ZERO; zones * bins * zz],
            psi: vec![ZERO; zones * bins * zz],
            weights,
            frame_count: 0,
            report: MvdrReport::default(),
        })
    }

    pub fn zones(&self) -> usize {
        self.zones
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn report(&self) -> &MvdrReport {
        &self.report
    }

    fn mat<'a>(&self, which: &'a [Complex64], zone: usize, bin: usize) -> &'a [Complex64] {
        let zz = self.zones * self.zones;
        let o = (zone * self.bins + bin) * zz;
        &which[o..o + zz]
    }

    /// Target covariance of `zone` at `bin`, row-major.
    pub fn phi(&self, zone: usize, bin: usize) -> &[Complex64] {
        self.mat(&self.phi, zone, bin)
    }

    /// Interference covariance of `zone` at `bin`, row-major.
    pub fn psi(&self, zone: usize, bin: usize) -> &[Complex64] {
        self.mat(&self.psi, zone, bin)
    }

    /// Current weights of `zone` at `bin`.
    pub fn weights(&self, zone: usize, bin: usize) -> &[Complex64] {
        let o = (zone * self.bins + bin) * self.zones;
        &self.weights[o..o + self.zones]
    }

    /// Fold one snapshot (`[z][f]`) into the covariances using `[zone][f]` masks.
    pub fn update_covariances(&mut self, y: &[Complex64], speech: &[f32], noise: &[f32]) -> Result<()> {
        let (z, bins) = (self.zones, self.bins);
        if y.len() != z * bins || speech.len() != z * bins || noise.len() != z * bins {
            return Err(invalid_input(format!(
                "snapshot and masks must have {} values, got {}, {}, {}",
                z * bins,
                y.len(),
                speech.len(),
                noise.len()
            )));
        }
        if let Some(v) = speech.iter().chain(noise).find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid_input(format!("mask value {v} outside [0, 1]")));
        }
        let lam = self.cfg.forgetting;
        let zz = z * z;
        let mut outer = vec![ZERO; zz];
        for f in 0..bins {
            for r in 0..z {
                let yr = y[r * bins + f];
                for c in 0..z {
                    outer[r * z + c] = yr * y[c * bins + f].conj();
                }
            }
            let speech_sum: f64 = (0..z).map(|j| speech[j * bins + f] as f64).sum();
            for i in 0..z {
                let ms = speech[i * bins + f] as f64;
                let mi = (speech_sum - ms + noise[i * bins + f] as f64).clamp(0.0, 1.0);
                let o = (i * bins + f) * zz;
                let phi = &mut self.phi[o..o + zz];
                for (p, q) in phi.iter_mut().zip(&outer) {
                    *p = *p * lam + q * ms;
                }
                hermitize(phi, z);
                let psi = &mut self.psi[o..o + zz];
                for (p, q) in psi.iter_mut().zip(&outer) {
                    *p = *p * lam + q * mi;
                }
                hermitize(psi, z);
            }
        }
        self.frame_count += 1;
        Ok(())
    }

    /// Weights for `zone` from the current covariances, with per-bin outcome counts.
    pub fn compute_weights(&self, zone: usize) -> Result<(Vec<Complex64>, MvdrReport)> {
        if zone >= self.zones {
            return Err(invalid_input(format!("zone {zone} out of range")));
        }
        if self.frame_count == 0 {
            return Err(invalid_input("no frames accumulated yet"));
        }
        let z = self.zones;
        let mut out = Vec::with_capacity(self.bins * z);
        let mut rep = MvdrReport::default();
        for f in 0..self.bins {
            let loaded = load_diagonal(self.psi(zone, f), z, self.cfg.loading);
            match solve_weights(self.phi(zone, f), &loaded, z, zone) {
                Ok(Some(w)) => out.extend(w),
                Ok(None) => {
                    rep.passthrough_bins += 1;
                    out.extend(unit(z, zone));
                }
                Err(_) => {
                    rep.singular_bins += 1;
                    out.extend(unit(z, zone));
                }
            }
        }
        Ok((out, rep))
    }

    /// Update, refresh weights on the configured cadence, and beamform one
    /// snapshot. Returns `[zone][f]` outputs.
    pub fn process_frame(&mut self, y: &[Complex64], speech: &[f32], noise: &[f32]) -> Result<Vec<Complex64>> {
        self.update_covariances(y, speech, noise)?;
        let (z, bins) = (self.zones, self.bins);
        if (self.frame_count - 1) % self.cfg.recompute_every == 0 {
            for i in 0..z {
                let (w, rep) = self.compute_weights(i)?;
                self.weights[i * bins * z..(i + 1) * bins * z].copy_from_slice(&w);
                self.report.passthrough_bins += rep.passthrough_bins;
                self.report.singular_bins += rep.singular_bins;
            }
            self.report.weight_updates += 1;
        }
        self.report.frames = self.frame_count;
        let mut out = vec![ZERO; z * bins];
        let mut snap = vec![ZERO; z];
        for f in 0..bins {
            for (k, s) in snap.iter_mut().enumerate() {
                *s = y[k * bins + f];
            }
            for i in 0..z {
                out[i * bins + f] = apply(self.weights(i, f), &snap);
            }
        }
        Ok(out)
    }
}

/// Frame-ordered MVDR over a whole spectrogram.
pub fn separate_stream(
    y: &ComplexSpectrogram,
    masks: &MaskPair,
    cfg: &MvdrConfig,
) -> Result<(ComplexSpectrogram, MvdrReport)> {
    let (z, t_n, bins) = (y.num_channels(), y.num_frames(), y.num_bins());
    if masks.speech.shape() != (z, t_n, bins) || masks.noise.shape() != (z, t_n, bins) {
        return Err(invalid_input(format!(
            "masks {:?} / {:?} do not match spectrogram {:?}",
            masks.speech.shape(),
            masks.noise.shape(),
            (z, t_n, bins)
        )));
    }
    let mut st = BeamformerState::new(z, bins, *cfg)?;
    let mut out = ComplexSpectrogram::zeros(z, t_n, bins);
    for t in 0..t_n {
        let frame = st.process_frame(&y.snapshot(t), &masks.speech.frame(t), &masks.noise.frame(t))?;
        for i in 0..z {
            out.frame_mut(i, t).copy_from_slice(&frame[i * bins..(i + 1) * bins]);
        }
    }
    Ok((out, st.report().clone()))
}
