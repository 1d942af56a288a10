//! Dataset ingestion: parse, filter, deduplicate, size-order and label.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::molgraph::{canonical_key, parse_smiles, CanonicalKey, MolecularGraph, SmilesError};
use crate::oracle::PropertyOracle;
use crate::selfies::{encode, to_onehot, EncodeError, OneHotMatrix, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipKind {
    UnsupportedFeature,
    Syntax,
    UnclosedRing,
    ValenceExceeded,
    Unencodable,
    TooLong,
    Duplicate,
    Unlabeled,
}

impl SkipKind {
    pub fn name(self) -> &'static str {
        match self {
            SkipKind::UnsupportedFeature => "unsupported_feature",
            SkipKind::Syntax => "syntax",
            SkipKind::UnclosedRing => "unclosed_ring",
            SkipKind::ValenceExceeded => "valence_exceeded",
            SkipKind::Unencodable => "unencodable",
            SkipKind::TooLong => "too_long",
            SkipKind::Duplicate => "duplicate",
            SkipKind::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for SkipKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub line: usize,
    pub text: String,
    pub kind: SkipKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    /// 1-based line of the source file.
    pub line: usize,
    pub graph: MolecularGraph,
    pub tokens: TokenSequence,
    pub key: CanonicalKey,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
    pub skips: Vec<Skip>,
    pub max_len: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.label).collect()
    }

    /// Network inputs paired with labels, in entry order.
    pub fn training_data(&self) -> Vec<(OneHotMatrix, f64)> {
        self.entries
            .iter()
            .map(|e| {
                let x = to_onehot(&e.tokens, self.max_len).expect("entries fit max_len by construction");
                (x, e.label)
            })
            .collect()
    }

    /// `line<TAB>kind<TAB>text<TAB>message` per skipped line.
    pub fn skips_text(&self) -> String {
        let mut out = String::from("line\tkind\ttext\tmessage\n");
        for s in &self.skips {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", s.line, s.kind, s.text, s.message));
        }
        out
    }
}

fn smiles_kind(e: &SmilesError) -> SkipKind {
    match e {
        SmilesError::UnsupportedFeature { .. } => SkipKind::UnsupportedFeature,
        SmilesError::Syntax { .. } => SkipKind::Syntax,
        SmilesError::UnclosedRing { .. } => SkipKind::UnclosedRing,
        SmilesError::ValenceExceeded { .. } => SkipKind::ValenceExceeded,
    }
}

/// Ingests dataset text: one SMILES per line (anything after the first
/// whitespace is ignored; blank and `#` lines are not records). Invalid and
/// unencodable lines are skipped with a reason, duplicates by canonical key
/// keep their first occurrence, and the survivors are ordered by heavy-atom
/// count, token length and canonical key text before the first `n_smallest`
/// are kept and labelled.
pub fn ingest_str(
    text: &str,
    n_smallest: usize,
    max_len: usize,
    oracle: &dyn PropertyOracle,
) -> Result<Dataset, PipelineError> {
    let mut skips = Vec::new();
    let mut seen: HashMap<CanonicalKey, usize> = HashMap::new();
    let mut candidates = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let smiles = trimmed.split_whitespace().next().expect("non-empty line");
        let mut skip = |kind: SkipKind, message: String| {
            skips.push(Skip {
                line,
                text: smiles.to_string(),
                kind,
                message,
            })
        };
        let graph = match parse_smiles(smiles) {
            Ok(g) => g,
            Err(e) => {
                skip(smiles_kind(&e), e.to_string());
                continue;
            }
        };
        let tokens = match encode(&graph, max_len) {
            Ok(t) => t,
            Err(e) => {
                let kind = match e {
                    EncodeError::TooLong { .. } => SkipKind::TooLong,
                    EncodeError::Unencodable(_) => SkipKind::Unencodable,
                };
                skip(kind, e.to_string());
                continue;
            }
        };
        let key = canonical_key(&graph);
        if let Some(&first) = seen.get(&key) {
            skip(SkipKind::Duplicate, format!("same molecule as line {first}"));
            continue;
        }
        seen.insert(key.clone(), line);
        candidates.push((line, graph, tokens, key));
    }

    candidates
        .sort_by(|a, b| (a.1.atom_count(), a.2.len(), a.3.as_str()).cmp(&(b.1.atom_count(), b.2.len(), b.3.as_str())));

    let mut entries = Vec::new();
    for (line, graph, tokens, key) in candidates {
        if entries.len() == n_smallest {
            break;
        }
        match oracle.evaluate(&graph) {
            Ok(label) if label.is_finite() => entries.push(DatasetEntry {
                line,
                graph,
                tokens,
                key,
                label,
            }),
            Ok(label) => skips.push(Skip {
                line,
                text: key.to_string(),
                kind: SkipKind::Unlabeled,
                message: format!("non-finite label {label}"),
            }),
            Err(e) => skips.push(Skip {
                line,
                text: key.to_string(),
                kind: SkipKind::Unlabeled,
                message: e.to_string(),
            }),
        }
    }
    skips.sort_by_key(|s| s.line);
    if entries.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    Ok(Dataset {
        entries,
        skips,
        max_len,
    })
}

pub fn ingest(
    path: &Path,
    n_smallest: usize,
    max_len: usize,
    oracle: &dyn PropertyOracle,
) -> Result<Dataset, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::FileUnreadable {
        path: path.display().to_string(),
        source,
    })?;
    ingest_str(&text, n_smallest, max_len, oracle)
}
