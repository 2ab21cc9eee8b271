use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ImpulseResponse, IrMetadata, IrOrigin};
use crate::error::{invalid_config, invalid_input, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;
const SINC_TAPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// 16-tap Hann-windowed sinc, fractional delays kept.
    #[default]
    Sinc,
    /// Each arrival rounded to the nearest sample.
    Nearest,
}

/// Shoebox room with one source and a set of microphones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Lx, Ly, Lz in meters.
    pub dims: [f64; 3],
    /// Reflection coefficients for walls x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
    pub beta: [f64; 6],
    pub source: [f64; 3],
    pub mics: Vec<[f64; 3]>,
    pub max_order: usize,
    pub speed_of_sound: f64,
    pub sample_rate: u32,
    pub ir_length: usize,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl RoomSpec {
    pub const CABIN_DIMS: [f64; 3] = [2.8, 1.5, 1.2];

    /// Microphone per zone: front-left, front-right, rear-left, rear-right.
    pub const CABIN_MICS: [[f64; 3]; 4] = [[0.8, 0.6, 1.1], [0.8, 0.9, 1.1], [1.9, 0.25, 1.1], [1.9, 1.25, 1.1]];

    /// Mouth position of a seated talker in each zone.
    pub const CABIN_SEATS: [[f64; 3]; 4] = [[0.9, 0.4, 0.9], [0.9, 1.1, 0.9], [1.9, 0.35, 0.9], [1.9, 1.15, 0.9]];

    /// Four-zone car cabin stand-in with a talker at `source`.
    pub fn cabin(source: [f64; 3]) -> Self {
        Self {
            dims: Self::CABIN_DIMS,
            beta: [0.4; 6],
            source,
            mics: Self::CABIN_MICS.to_vec(),
            max_order: 6,
            speed_of_sound: SPEED_OF_SOUND,
            sample_rate: 16000,
            ir_length: 2048,
            interpolation: Interpolation::Sinc,
        }
    }

    /// Cabin preset with the talker seated in `zone`.
    pub fn cabin_seat(zone: usize) -> Result<Self> {
        let seat = Self::CABIN_SEATS
            .get(zone)
            .ok_or_else(|| invalid_input(format!("cabin has 4 zones, got zone index {zone}")))?;
        Ok(Self::cabin(*seat))
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = [beta; 6];
        self
    }

    pub fn with_max_order(mut self, k: usize) -> Self {
        self.max_order = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(invalid_config(format!(
                "room dimensions must be positive, got {:?}",
                self.dims
            )));
        }
        if self.beta.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(invalid_config(format!(
                "reflection coefficients must be in [0, 1), got {:?}",
                self.beta
            )));
        }
        if !(self.speed_of_sound > 0.0) || self.sample_rate == 0 || self.ir_length == 0 {
            return Err(invalid_config(
                "speed of sound, sample rate and IR length must be positive",
            ));
        }
        if self.mics.is_empty() {
            return Err(invalid_config("room has no microphones"));
        }
        let inside = |p: &[f64; 3]| p.iter().zip(&self.dims).all(|(x, l)| *x > 0.0 && x < l);
        if !inside(&self.source) {
            return Err(invalid_input(format!(
                "source {:?} is not inside the room",
                self.source
            )));
        }
        if let Some(m) = self.mics.iter().find(|m| !inside(m)) {
            return Err(invalid_input(format!("microphone {m:?} is not inside the room")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: [f64; 3],
    pub distance: f64,
    pub amplitude: f64,
    /// Arrival time in samples, fractional.
    pub delay: f64,
    pub order: usize,
}

/// All images of order at most K with non-zero amplitude, as seen from `mic`.
pub fn image_sources(room: &RoomSpec, mic: usize) -> Result<Vec<ImageSource>> {
    room.validate()?;
    let m = *room
        .mics
        .get(mic)
        .ok_or_else(|| invalid_input(format!("mic index {mic} out of range for {} mics", room.mics.len())))?;
    let k = room.max_order as i64;
    let fs = room.sample_rate as f64;

    // per axis: (coordinate, reflections, amplitude factor)
    let axis = |a: usize| -> Vec<(f64, usize, f64)> {
        let mut v = Vec::new();
        for n in -k..=k {
            for q in 0..2i64 {
                let lo = (n - q).unsigned_abs() as usize;
                let hi = n.unsigned_abs() as usize;
                if lo + hi > room.max_order {
                    continue;
                }
                let x = (1 - 2 * q) as f64 * room.source[a] + 2.0 * n as f64 * room.dims[a];
                let g = room.beta[2 * a].powi(lo as i32) * room.beta[2 * a + 1].powi(hi as i32);
                v.push((x, lo + hi, g));
            }
        }
        v
    };
    let (ax, ay, az) = (axis(0), axis(1), axis(2));
    let mut out = Vec::new();
    for &(x, ox, gx) in &ax {
        for &(y, oy, gy) in &ay {
            if ox + oy > room.max_order {
                continue;
            }
            for &(z, oz, gz) in &az {
                let order = ox + oy + oz;
                let g = gx * gy * gz;
                if order > room.max_order || g == 0.0 {
                    continue;
                }
                let d = ((x - m[0]).powi(2) + (y - m[1]).powi(2) + (z - m[2]).powi(2)).sqrt();
                out.push(ImageSource {
                    position: [x, y, z],
                    distance: d,
                    amplitude: g / (4.0 * PI * d),
                    delay: d / room.speed_of_sound * fs,
                    order,
                });
            }
        }
    }
    Ok(out)
}

fn hann_sinc(x: f64) -> f64 {
    let half = SINC_TAPS as f64 / 2.0;
    if x.abs() >= half {
        return 0.0;
    }
    let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
    sinc * 0.5 * (1.0 + (PI * x / half).cos())
}

fn add_arrival(h: &mut [f64], delay: f64, amp: f64, interp: Interpolation) {
    match interp {
        Interpolation::Nearest => {
            let i = delay.round() as usize;
            if i < h.len() {
                h[i] += amp;
            }
        }
        Interpolation::Sinc => {
            let base = delay.floor() as i64;
            let first = base - SINC_TAPS as i64 / 2 + 1;
            let kernel: Vec<f64> = (0..SINC_TAPS as i64)
                .map(|j| hann_sinc((first + j) as f64 - delay))
                .collect();
            let norm: f64 = kernel.iter().sum();
            for (j, kv) in kernel.iter().enumerate() {
                let n = first + j as i64;
                if n >= 0 && (n as usize) < h.len() {
                    h[n as usize] += amp * kv / norm;
                }
            }
        }
    }
}

/// Impulse response from the source to microphone `mic`.
pub fn simulate_ism(room: &RoomSpec, mic: usize) -> Result<ImpulseResponse> {
    let images = image_sources(room, mic)?;
    let mut h = vec![0.0; room.ir_length];
    for im in &images {
        add_arrival(&mut h, im.delay, im.amplitude, room.interpolation);
    }
    ImpulseResponse::new(
        h,
        room.sample_rate,
        IrMetadata {
            zone: None,
            source: Some(room.source),
            mic: Some(room.mics[mic]),
            origin: IrOrigin::Simulated,
        },
    )
}

/// One IR per microphone.
pub fn simulate_ism_all(room: &RoomSpec) -> Result<Vec<ImpulseResponse>> {
    (0..room.mics.len()).map(|m| simulate_ism(room, m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn free_field(src: [f64; 3], mic: [f64; 3]) -> RoomSpec {
        RoomSpec {
            dims: [10.0, 10.0, 10.0],
            beta: [0.5; 6],
            source: src,
            mics: vec![mic],
            max_order: 0,
            speed_of_sound: SPEED_OF_SOUND,
            sample_rate: 16000,
            ir_length: 256,
            interpolation: Interpolation::Sinc,
        }
    }

    #[test]
    fn direct_path_one_meter() {
        let room = free_field([5.0, 5.0, 5.0], [6.0, 5.0, 5.0]);
        let im = image_sources(&room, 0).unwrap();
        assert_eq!(im.len(), 1);
        assert!((im[0].delay - 16000.0 / 343.0).abs() < 1e-9);
        assert!((im[0].amplitude - 1.0 / (4.0 * PI)).abs() < 1e-12);
        let h = simulate_ism(&room, 0).unwrap();
        let peak = h.taps().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak, 47);
        // the DC-normalized kernel keeps the arrival's area
        let area: f64 = h.taps().iter().sum();
        assert!((area - 1.0 / (4.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn nearest_mode_places_single_tap() {
        let mut room = free_field([5.0, 5.0, 5.0], [7.0, 5.0, 5.0]);
        room.interpolation = Interpolation::Nearest;
        let h = simulate_ism(&room, 0).unwrap();
        let nz: Vec<_> = h.taps().iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert_eq!(nz[0].0, (2.0 * 16000.0 / 343.0_f64).round() as usize);
        assert!((nz[0].1 - 1.0 / (8.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn zero_beta_has_one_arrival() {
        let room = RoomSpec::cabin_seat(0).unwrap().with_beta(0.0).with_max_order(8);
        assert_eq!(image_sources(&room, 0).unwrap().len(), 1);
    }

    #[test]
    fn image_count_matches_order_bound() {
        // number of lattice points with |n-q|+|n| summed over axes <= K
        let room = RoomSpec::cabin_seat(1).unwrap().with_max_order(3);
        let brute = {
            let mut c = 0;
            let per_axis: Vec<usize> = (-3i64..=3)
                .flat_map(|n| (0..2i64).map(move |q| ((n - q).abs() + n.abs()) as usize))
                .collect();
            for a in &per_axis {
                for b in &per_axis {
                    for d in &per_axis {
                        if a + b + d <= 3 {
                            c += 1;
                        }
                    }
                }
            }
            c
        };
        assert_eq!(image_sources(&room, 0).unwrap().len(), brute);
    }

    #[test]
    fn first_order_wall_image() {
        let room = RoomSpec::cabin([1.0, 0.7, 0.6]).with_max_order(1);
        let im = image_sources(&room, 0).unwrap();
        // mirror in the x=0 wall
        let wall = im.iter().find(|i| (i.position[0] + 1.0).abs() < 1e-12).unwrap();
        assert_eq!(wall.order, 1);
        assert_eq!(wall.position[1], 0.7);
        assert!((wall.amplitude - 0.4 / (4.0 * PI * wall.distance)).abs() < 1e-15);
    }

    #[test]
    fn rejects_outside_positions() {
        let mut room = RoomSpec::cabin([3.0, 0.5, 0.5]);
        assert!(matches!(simulate_ism(&room, 0), Err(crate::Error::InvalidInput(_))));
        room.source = [1.0, 0.5, 0.5];
        room.mics[2] = [1.0, -0.1, 0.5];
        assert!(simulate_ism(&room, 0).is_err());
        assert!(simulate_ism(&RoomSpec::cabin([1.0, 0.5, 0.5]), 4).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn doubling_distance_halves_amplitude(d in 0.2f64..2.0) {
            let a = image_sources(&free_field([5.0, 5.0, 5.0], [5.0 + d, 5.0, 5.0]), 0).unwrap()[0].amplitude;
            let b = image_sources(&free_field([5.0, 5.0, 5.0], [5.0 + 2.0 * d, 5.0, 5.0]), 0).unwrap()[0].amplitude;
            prop_assert!((a / b - 2.0).abs() < 1e-6);
        }

        #[test]
        fn energy_grows_with_beta(
            sx in 0.1f64..2.7, sy in 0.1f64..1.4, sz in 0.1f64..1.1,
            b in 0.05f64..0.8, extra in 0.01f64..0.15,
        ) {
            let room = RoomSpec::cabin([sx, sy, sz]).with_max_order(4).with_beta(b);
            let lo = simulate_ism(&room, 1).unwrap().energy();
            let hi = simulate_ism(&room.clone().with_beta(b + extra), 1).unwrap().energy();
            prop_assert!(hi >= lo);
        }
    }
}
