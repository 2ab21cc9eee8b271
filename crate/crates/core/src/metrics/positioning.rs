use serde::{Deserialize, Serialize};

use crate::dsp::rms;
use crate::error::{invalid_input, Result};

/// One single-talker utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositioningEntry {
    pub true_zone: usize,
    /// `None` when every zone output is silent.
    pub predicted: Option<usize>,
    pub energies: Vec<f64>,
    /// Talker outside a standard seat position.
    pub nonstandard: bool,
}

impl PositioningEntry {
    pub fn correct(&self) -> bool {
        self.predicted == Some(self.true_zone)
    }
}

/// Zone whose output has the largest RMS; ties go to the lowest index.
pub fn zone_positioning(separated: &[&[f64]], true_zone: usize) -> Result<PositioningEntry> {
    if separated.is_empty() {
        return Err(invalid_input("no zone outputs"));
    }
    if true_zone >= separated.len() {
        return Err(invalid_input(format!("true zone {true_zone} out of range")));
    }
    let energies: Vec<f64> = separated.iter().map(|x| rms(x)).collect();
    let mut best: Option<usize> = None;
    for (k, &e) in energies.iter().enumerate() {
        if e > 0.0 && best.map_or(true, |b| e > energies[b]) {
            best = Some(k);
        }
    }
    Ok(PositioningEntry {
        true_zone,
        predicted: best,
        energies,
        nonstandard: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositioningResult {
    pub entries: Vec<PositioningEntry>,
    /// Correct / decided over all entries.
    pub accuracy: f64,
    /// Accuracy over decided non-standard-posture entries, if any.
    pub nspa: Option<f64>,
    pub undecided: usize,
}

impl PositioningResult {
    pub fn from_entries(entries: Vec<PositioningEntry>) -> Self {
        let acc = |it: &mut dyn Iterator<Item = &PositioningEntry>| {
            let (mut decided, mut correct) = (0usize, 0usize);
            for e in it {
                if e.predicted.is_some() {
                    decided += 1;
                    correct += e.correct() as usize;
                }
            }
            (decided > 0).then(|| correct as f64 / decided as f64)
        };
        let accuracy = acc(&mut entries.iter()).unwrap_or(0.0);
        let nspa = acc(&mut entries.iter().filter(|e| e.nonstandard));
        let undecided = entries.iter().filter(|e| e.predicted.is_none()).count();
        Self {
            entries,
            accuracy,
            nspa,
            undecided,
        }
    }
}
