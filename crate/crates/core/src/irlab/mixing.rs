use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ImpulseResponse;
use crate::error::{invalid_input, Error, Result};

/// Share of scenes that use recorded IRs on every channel under [`MixStrategy::Added`].
pub const ADDED_RECORDED_PROBABILITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MixStrategy {
    /// Recorded IR on the speaker's own zone mic, simulated on the rest.
    #[default]
    Mixed,
    /// All recorded with probability 0.25, otherwise all simulated.
    Added,
    Only,
    Simulated,
}

impl FromStr for MixStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mixed" => Ok(Self::Mixed),
            "added" => Ok(Self::Added),
            "only" => Ok(Self::Only),
            "simulated" => Ok(Self::Simulated),
            _ => Err(invalid_input(format!(
                "unknown IR strategy {s:?} (expected mixed, added, only or simulated)"
            ))),
        }
    }
}

/// Z IRs (one per mic) for a talker in `zone`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrSetEntry {
    pub zone: usize,
    pub irs: Vec<ImpulseResponse>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IrSet {
    pub entries: Vec<IrSetEntry>,
}

impl IrSet {
    pub fn new(entries: Vec<IrSetEntry>) -> Self {
        Self { entries }
    }

    pub fn push(&mut self, zone: usize, irs: Vec<ImpulseResponse>) {
        self.entries.push(IrSetEntry { zone, irs });
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn pick(&self, zone: usize, what: &str, rng: &mut impl Rng) -> Result<&IrSetEntry> {
        let candidates: Vec<_> = self.entries.iter().filter(|e| e.zone == zone).collect();
        if candidates.is_empty() {
            return Err(invalid_input(format!("no {what} IRs for a speaker in zone {zone}")));
        }
        Ok(candidates[rng.gen_range(0..candidates.len())])
    }
}

/// Per-mic IRs for a talker in `speaker_zone` under `strategy`.
///
/// Randomness (which entry, and the draw for `Added`) comes only from `rng`.
pub fn mix_ir_sets(
    simulated: &IrSet,
    recorded: &IrSet,
    strategy: MixStrategy,
    speaker_zone: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ImpulseResponse>> {
    let all_recorded = match strategy {
        MixStrategy::Added => rng.gen_bool(ADDED_RECORDED_PROBABILITY),
        MixStrategy::Only => true,
        MixStrategy::Simulated | MixStrategy::Mixed => false,
    };
    let out = if strategy == MixStrategy::Mixed {
        let sim = simulated.pick(speaker_zone, "simulated", rng)?;
        let rec = recorded.pick(speaker_zone, "recorded", rng)?;
        if sim.irs.len() != rec.irs.len() {
            return Err(invalid_input(format!(
                "simulated set has {} mics, recorded set has {}",
                sim.irs.len(),
                rec.irs.len()
            )));
        }
        let mut irs = sim.irs.clone();
        let slot = irs
            .get_mut(speaker_zone)
            .ok_or_else(|| invalid_input(format!("speaker zone {speaker_zone} has no mic")))?;
        *slot = rec.irs[speaker_zone].clone();
        irs
    } else if all_recorded {
        recorded.pick(speaker_zone, "recorded", rng)?.irs.clone()
    } else {
        simulated.pick(speaker_zone, "simulated", rng)?.irs.clone()
    };
    Ok(out)
}
