//! Ground-truth property labels.
//!
//! The default oracle is an additive lipophilicity surrogate: a per-element
//! contribution, a per-implicit-hydrogen term and a correction for each
//! double or triple bond. Carbon and hydrogen push the value up, hetero
//! atoms pull it down. The constants are configuration, not fitted values.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keyvalue::{self, KeyValueError};
use crate::molgraph::{canonical_key, composition, parse_smiles, CanonicalKey, Element, MolecularGraph};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Format(#[from] KeyValueError),
    #[error("line {line}: unknown key {key}")]
    UnknownKey { line: usize, key: String },
    #[error("missing key {0}")]
    MissingKey(&'static str),
    #[error("line {line}: {value:?} is not a finite number")]
    BadValue { line: usize, value: String },
    #[error("line {line}: {message}")]
    BadLabelLine { line: usize, message: String },
    #[error("no label for molecule {0}")]
    Unlabeled(String),
    #[error("statistics of an empty list")]
    EmptyInput,
}

/// Anything that can label a molecule with a real property value.
pub trait PropertyOracle: Send + Sync {
    fn evaluate(&self, g: &MolecularGraph) -> Result<f64, OracleError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyTable {
    pub carbon: f64,
    pub nitrogen: f64,
    pub oxygen: f64,
    pub fluorine: f64,
    pub hydrogen: f64,
    pub double_bond: f64,
    pub triple_bond: f64,
}

impl Default for PropertyTable {
    fn default() -> Self {
        PropertyTable {
            carbon: 0.20,
            nitrogen: -0.70,
            oxygen: -0.40,
            fluorine: -0.20,
            hydrogen: 0.10,
            double_bond: -0.05,
            triple_bond: -0.10,
        }
    }
}

const TABLE_KEYS: [&str; 7] = ["C", "N", "O", "F", "H", "bond2", "bond3"];

fn parse_number(line: usize, value: &str) -> Result<f64, OracleError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| OracleError::BadValue {
            line,
            value: value.to_string(),
        })
}

impl PropertyTable {
    pub fn contribution(&self, element: Element) -> f64 {
        match element {
            Element::C => self.carbon,
            Element::N => self.nitrogen,
            Element::O => self.oxygen,
            Element::F => self.fluorine,
        }
    }

    /// Parses the `key = value` table format with keys
    /// `C, N, O, F, H, bond2, bond3`, all required.
    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let mut found: [Option<f64>; 7] = [None; 7];
        for (line, key, value) in keyvalue::parse(text)? {
            let slot = TABLE_KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or(OracleError::UnknownKey { line, key })?;
            found[slot] = Some(parse_number(line, &value)?);
        }
        let get = |i: usize| found[i].ok_or(OracleError::MissingKey(TABLE_KEYS[i]));
        Ok(PropertyTable {
            carbon: get(0)?,
            nitrogen: get(1)?,
            oxygen: get(2)?,
            fluorine: get(3)?,
            hydrogen: get(4)?,
            double_bond: get(5)?,
            triple_bond: get(6)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let text = fs::read_to_string(path).map_err(|source| OracleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        format!(
            "C = {:?}\nN = {:?}\nO = {:?}\nF = {:?}\nH = {:?}\nbond2 = {:?}\nbond3 = {:?}\n",
            self.carbon, self.nitrogen, self.oxygen, self.fluorine, self.hydrogen, self.double_bond, self.triple_bond
        )
    }
}

pub fn surrogate_logp(g: &MolecularGraph, t: &PropertyTable) -> f64 {
    let mut total = 0.0;
    for &element in g.atoms() {
        total += t.contribution(element);
    }
    total += composition(g).hydrogens as f64 * t.hydrogen;
    for bond in g.bonds() {
        match bond.order {
            2 => total += t.double_bond,
            3 => total += t.triple_bond,
            _ => {}
        }
    }
    total
}

impl PropertyOracle for PropertyTable {
    fn evaluate(&self, g: &MolecularGraph) -> Result<f64, OracleError> {
        Ok(surrogate_logp(g, self))
    }
}

/// Externally computed labels keyed by molecule identity.
#[derive(Debug, Clone, Default)]
pub struct LabelFile {
    labels: HashMap<CanonicalKey, f64>,
}

impl LabelFile {
    /// Parses `SMILES<TAB>value` lines; `#` comments and blank lines skipped.
    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let mut labels = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (smiles, value) = raw.split_once('\t').ok_or_else(|| OracleError::BadLabelLine {
                line,
                message: "expected SMILES<TAB>value".to_string(),
            })?;
            let g = parse_smiles(smiles.trim()).map_err(|e| OracleError::BadLabelLine {
                line,
                message: e.to_string(),
            })?;
            labels.insert(canonical_key(&g), parse_number(line, value.trim())?);
        }
        Ok(LabelFile { labels })
    }

    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let text = fs::read_to_string(path).map_err(|source| OracleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl PropertyOracle for LabelFile {
    fn evaluate(&self, g: &MolecularGraph) -> Result<f64, OracleError> {
        let key = canonical_key(g);
        self.labels
            .get(&key)
            .copied()
            .ok_or_else(|| OracleError::Unlabeled(key.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

pub fn dataset_stats(values: &[f64]) -> Result<Stats, OracleError> {
    if values.is_empty() {
        return Err(OracleError::EmptyInput);
    }
    let n = values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Rounding can push the mean of near-constant data a hair outside its range.
    let mean = (values.iter().sum::<f64>() / n).clamp(min, max);
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(Stats {
        mean,
        std: var.sqrt(),
        min,
        max,
        count: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn logp(s: &str) -> f64 {
        surrogate_logp(&parse_smiles(s).unwrap(), &PropertyTable::default())
    }

    #[test]
    fn empty_graph_scores_zero() {
        assert_eq!(surrogate_logp(&MolecularGraph::empty(), &PropertyTable::default()), 0.0);
    }

    #[test]
    fn ethanol_hand_sum() {
        // 2 C + 1 O + 6 H
        let expected = 2.0 * 0.20 + -0.40 + 6.0 * 0.10;
        assert!((logp("CCO") - expected).abs() < 1e-12);
    }

    #[test]
    fn carbonyl_difference() {
        // C=O vs CO: one double-bond correction, two fewer hydrogens.
        let diff = logp("C=O") - logp("CO");
        assert!((diff - (-0.05 - 2.0 * 0.10)).abs() < 1e-12);
    }

    #[test]
    fn nitrogen_lowers_value() {
        for (carbon, nitrogen) in [("CCC", "CNC"), ("CC", "CN"), ("C1CC1", "C1NC1"), ("C=CC", "C=NC")] {
            assert!(logp(nitrogen) < logp(carbon), "{carbon} vs {nitrogen}");
        }
    }

    #[test]
    fn parses_table_file() {
        let shipped = include_str!("../../../data/logp_surrogate.conf");
        assert_eq!(PropertyTable::parse(shipped).unwrap(), PropertyTable::default());
        let t = PropertyTable::default();
        assert_eq!(PropertyTable::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn rejects_bad_tables() {
        let t = PropertyTable::default().to_text();
        assert!(matches!(
            PropertyTable::parse(&t.replace("F = -0.2\n", "")),
            Err(OracleError::MissingKey("F"))
        ));
        assert!(matches!(
            PropertyTable::parse(&format!("{t}S = 1.0\n")),
            Err(OracleError::UnknownKey { .. })
        ));
        assert!(matches!(
            PropertyTable::parse(&t.replace("H = 0.1", "H = inf")),
            Err(OracleError::BadValue { .. })
        ));
        assert!(matches!(
            PropertyTable::parse(&t.replace("H = 0.1", "H = x")),
            Err(OracleError::BadValue { .. })
        ));
    }

    #[test]
    fn label_file_lookup_is_isomorphism_invariant() {
        let labels = LabelFile::parse("# comment\nCCO\t-0.31\nC#N\t0.5\n").unwrap();
        assert_eq!(labels.len(), 2);
        assert_eq!(labels.evaluate(&parse_smiles("OCC").unwrap()).unwrap(), -0.31);
        assert!(matches!(
            labels.evaluate(&parse_smiles("CCC").unwrap()),
            Err(OracleError::Unlabeled(_))
        ));
        assert!(LabelFile::parse("CCO -0.3\n").is_err());
        assert!(LabelFile::parse("c1ccccc1\t1.0\n").is_err());
    }

    #[test]
    fn stats_examples() {
        let s = dataset_stats(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max, s.count), (2.0, 1.0, 3.0, 3));
        assert!((s.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let s = dataset_stats(&[5.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max, s.std), (5.0, 5.0, 5.0, 0.0));
        assert!(matches!(dataset_stats(&[]), Err(OracleError::EmptyInput)));
    }

    proptest! {
        #[test]
        fn stats_are_ordered(values in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let s = dataset_stats(&values).unwrap();
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
            prop_assert!(s.std >= 0.0);
            prop_assert_eq!(s.count, values.len());
        }
    }
}
