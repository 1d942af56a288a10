//! Canonical keys by colour refinement with exhaustive tie-breaking.
//!
//! Atoms are partitioned by an invariant colouring that is refined until
//! stable. Any remaining non-singleton cell is split by individualising each
//! of its members in turn; every discrete leaf fixes a labelling, and the
//! key is the lexicographically smallest SMILES over all leaves.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{write_smiles, MolecularGraph};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalKey(String);

impl CanonicalKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Replaces arbitrary sortable signatures by dense ranks.
fn rank<T: Ord + Clone>(signatures: &[T]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<T> = signatures.to_vec();
    distinct.sort();
    distinct.dedup();
    let colors = signatures
        .iter()
        .map(|s| distinct.binary_search(s).expect("present"))
        .collect();
    (colors, distinct.len())
}

fn refine(g: &MolecularGraph, mut colors: Vec<usize>) -> Vec<usize> {
    let n = colors.len();
    let mut classes = {
        let mut c = colors.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    };
    loop {
        if classes == n {
            return colors;
        }
        let signatures: Vec<(usize, Vec<(u8, usize)>)> = (0..n)
            .map(|v| {
                let mut around: Vec<(u8, usize)> =
                    g.neighbors(v).iter().map(|&(u, order)| (order, colors[u])).collect();
                around.sort_unstable();
                (colors[v], around)
            })
            .collect();
        let (next, next_classes) = rank(&signatures);
        if next_classes == classes {
            return colors;
        }
        colors = next;
        classes = next_classes;
    }
}

fn search(g: &MolecularGraph, colors: Vec<usize>, best: &mut Option<String>) {
    let colors = refine(g, colors);
    let n = colors.len();
    let mut sizes = vec![0usize; n];
    for &c in &colors {
        sizes[c] += 1;
    }
    match (0..n).find(|&c| sizes[c] > 1) {
        None => {
            let candidate = write_smiles(&g.relabel(&colors));
            if best.as_ref().is_none_or(|b| candidate < *b) {
                *best = Some(candidate);
            }
        }
        Some(cell) => {
            for v in (0..n).filter(|&v| colors[v] == cell) {
                let split: Vec<(usize, bool)> = (0..n).map(|u| (colors[u], colors[u] == cell && u != v)).collect();
                let (individualized, _) = rank(&split);
                search(g, individualized, best);
            }
        }
    }
}

pub fn canonical_key(g: &MolecularGraph) -> CanonicalKey {
    if g.is_empty() {
        return CanonicalKey(String::new());
    }
    let initial: Vec<(usize, usize, u8)> = (0..g.atom_count())
        .map(|v| (g.atoms()[v].index(), g.neighbors(v).len(), g.bonded_valence(v)))
        .collect();
    let (colors, _) = rank(&initial);
    let mut best = None;
    search(g, colors, &mut best);
    CanonicalKey(best.expect("at least one leaf"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn key(s: &str) -> CanonicalKey {
        canonical_key(&parse_smiles(s).unwrap())
    }

    #[test]
    fn equal_for_same_molecule() {
        assert_eq!(key("OCC"), key("CCO"));
        assert_eq!(key("C(C)(C)C"), key("CC(C)C"));
        assert_eq!(key("C1CCCCC1"), key("C1CCCCC1"));
        assert_eq!(key("C1=CCCCC1"), key("C1CCC=CC1"));
        assert_eq!(key("N#CC(F)O"), key("OC(F)C#N"));
    }

    #[test]
    fn differs_for_different_molecules() {
        assert_ne!(key("CCO"), key("CCN"));
        assert_ne!(key("C1CC1"), key("CCC"));
        assert_ne!(key("C=CC"), key("C#CC"));
        assert_ne!(key("CC(C)CC"), key("CCCCC"));
        assert_ne!(key("C1CCCCC1"), key("C1CC1C1CC1"));
    }

    #[test]
    fn empty_graph_key_is_empty() {
        assert_eq!(canonical_key(&MolecularGraph::empty()).as_str(), "");
    }

    #[test]
    fn key_reparses_to_same_molecule() {
        for s in ["CC(=O)N", "C1CC2CC1C2", "FC(F)(F)C#N", "C12CC1CC2"] {
            let k = key(s);
            assert_eq!(key(k.as_str()), k, "{s}");
        }
    }
}
