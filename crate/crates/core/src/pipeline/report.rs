//! Distribution statistics, histograms and composition shifts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::dream::{DreamTrajectory, StepRecord};
use crate::molgraph::{composition, parse_smiles, Element, MolecularGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

/// Equal-width bins over `[lo, hi]`, each left-closed and right-open except
/// the last, which is closed. Values outside the range land in the end bins.
pub fn histogram(values: &[f64], bins: usize, range: (f64, f64)) -> Result<Vec<HistogramBin>, PipelineError> {
    let (lo, hi) = range;
    if bins == 0 {
        return Err(PipelineError::BadRange("at least one bin is required".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(PipelineError::BadRange(format!(
            "need finite lo < hi, got ({lo}, {hi})"
        )));
    }
    if let Some(v) = values.iter().find(|v| v.is_nan()) {
        return Err(PipelineError::BadRange(format!("cannot bin {v}")));
    }
    let width = (hi - lo) / bins as f64;
    let edge = |i: usize| if i == bins { hi } else { lo + width * i as f64 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            bin_lo: edge(i),
            bin_hi: edge(i + 1),
            count: 0,
        })
        .collect();
    for &v in values {
        let mut idx = if v <= lo {
            0
        } else {
            (((v - lo) / width).floor() as usize).min(bins - 1)
        };
        // Settle rounding at the edges against the reported boundaries.
        while idx > 0 && v < edge(idx) {
            idx -= 1;
        }
        while idx + 1 < bins && v >= edge(idx + 1) {
            idx += 1;
        }
        out[idx].count += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementShift {
    /// Element symbol, or `H` for implicit hydrogens.
    pub symbol: String,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionShift {
    pub label: String,
    pub molecules: usize,
    pub elements: Vec<ElementShift>,
}

impl CompositionShift {
    pub fn element(&self, symbol: &str) -> Option<&ElementShift> {
        self.elements.iter().find(|e| e.symbol == symbol)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{} ({} molecules)\nelement\tbefore\tafter\tdelta\n",
            self.label, self.molecules
        );
        for e in &self.elements {
            out.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:+.4}\n",
                e.symbol, e.before, e.after, e.delta
            ));
        }
        out
    }
}

fn counts(g: &MolecularGraph) -> [f64; 5] {
    let c = composition(g);
    [
        c.count(Element::C) as f64,
        c.count(Element::N) as f64,
        c.count(Element::O) as f64,
        c.count(Element::F) as f64,
        c.hydrogens as f64,
    ]
}

/// Mean per-element atom counts (and implicit hydrogens) of the first and
/// last molecule of each pair.
pub fn composition_shift(
    label: &str,
    pairs: &[(&MolecularGraph, &MolecularGraph)],
) -> Result<CompositionShift, PipelineError> {
    if pairs.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let mut before = [0.0; 5];
    let mut after = [0.0; 5];
    for (a, b) in pairs {
        for (s, v) in before.iter_mut().zip(counts(a)) {
            *s += v;
        }
        for (s, v) in after.iter_mut().zip(counts(b)) {
            *s += v;
        }
    }
    let n = pairs.len() as f64;
    let elements = ["C", "N", "O", "F", "H"]
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (b, a) = (before[i] / n, after[i] / n);
            ElementShift {
                symbol: s.to_string(),
                before: b,
                after: a,
                delta: a - b,
            }
        })
        .collect();
    Ok(CompositionShift {
        label: label.to_string(),
        molecules: pairs.len(),
        elements,
    })
}

/// Composition shift between the epoch-0 and final molecule of each run.
pub fn trajectory_composition_shift(
    label: &str,
    trajectories: &[&DreamTrajectory],
) -> Result<CompositionShift, PipelineError> {
    let pairs: Vec<(&MolecularGraph, &MolecularGraph)> = trajectories
        .iter()
        .map(|t| (&t.initial().graph, &t.last().graph))
        .collect();
    composition_shift(label, &pairs)
}

/// Reads a trajectory export and returns one composition shift per arm
/// (records without an arm are grouped under `dream`).
pub fn probe_trajectories(text: &str) -> Result<Vec<CompositionShift>, PipelineError> {
    let mut runs: BTreeMap<(String, usize), (String, String)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: StepRecord = serde_json::from_str(line).map_err(|e| PipelineError::Trajectory {
            line: i + 1,
            message: e.to_string(),
        })?;
        let arm = r.arm.unwrap_or_else(|| "dream".to_string());
        runs.entry((arm, r.trajectory))
            .and_modify(|(_, last)| *last = r.smiles.clone())
            .or_insert((r.smiles.clone(), r.smiles));
    }
    let mut arms: BTreeMap<String, Vec<(MolecularGraph, MolecularGraph)>> = BTreeMap::new();
    for ((arm, _), (first, last)) in runs {
        let parse = |s: &str| {
            parse_smiles(s).map_err(|e| PipelineError::Trajectory {
                line: 0,
                message: format!("{s:?}: {e}"),
            })
        };
        arms.entry(arm).or_default().push((parse(&first)?, parse(&last)?));
    }
    if arms.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    arms.iter()
        .map(|(arm, pairs)| {
            let refs: Vec<(&MolecularGraph, &MolecularGraph)> = pairs.iter().map(|(a, b)| (a, b)).collect();
            composition_shift(arm, &refs)
        })
        .collect()
}
