//! A restricted SMILES codec: unbracketed C/N/O/F atoms, `-`/`=`/`#`
//! bonds, parenthesised branches and ring labels 1-9.

use thiserror::Error;

use super::{Element, GraphError, MolecularGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("unsupported feature at byte {position}: {feature}")]
    UnsupportedFeature { position: usize, feature: String },
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("ring label {label} opened but never closed")]
    UnclosedRing { label: u8 },
    #[error("atom {atom} ({element}) exceeds its valence")]
    ValenceExceeded { atom: usize, element: Element },
}

fn unsupported(position: usize, feature: impl Into<String>) -> SmilesError {
    SmilesError::UnsupportedFeature {
        position,
        feature: feature.into(),
    }
}

fn syntax(position: usize, message: impl Into<String>) -> SmilesError {
    SmilesError::Syntax {
        position,
        message: message.into(),
    }
}

#[derive(Clone, Copy)]
struct OpenRing {
    atom: usize,
    order: Option<u8>,
}

pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut atoms: Vec<Element> = Vec::new();
    let mut bonds: Vec<(usize, usize, u8)> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<u8> = None;
    // (branch root, atom count when the branch opened, byte position)
    let mut branches: Vec<(usize, usize, usize)> = Vec::new();
    let mut rings: [Option<OpenRing>; 10] = [None; 10];

    let has_bond = |bonds: &[(usize, usize, u8)], a: usize, b: usize| {
        bonds.iter().any(|&(x, y, _)| (x == a && y == b) || (x == b && y == a))
    };

    let mut i = 0;
    while i < bytes.len() {
        let (pos, ch) = bytes[i];
        match ch {
            'C' | 'N' | 'O' | 'F' => {
                // Cl is the only organic-subset symbol that extends one of ours.
                if ch == 'C' && matches!(bytes.get(i + 1), Some(&(_, 'l'))) {
                    return Err(unsupported(pos, "element Cl".to_string()));
                }
                let element = Element::from_symbol(&ch.to_string()).expect("matched above");
                let idx = atoms.len();
                atoms.push(element);
                if let Some(p) = prev {
                    bonds.push((p, idx, pending.take().unwrap_or(1)));
                }
                prev = Some(idx);
            }
            'A'..='Z' => return Err(unsupported(pos, format!("element {ch}"))),
            'a'..='z' => return Err(unsupported(pos, format!("aromatic atom {ch}"))),
            '-' | '=' | '#' => {
                if prev.is_none() {
                    return Err(syntax(pos, "bond symbol without a preceding atom"));
                }
                if pending.is_some() {
                    return Err(syntax(pos, "consecutive bond symbols"));
                }
                pending = Some(match ch {
                    '-' => 1,
                    '=' => 2,
                    _ => 3,
                });
            }
            '(' => {
                let Some(root) = prev else {
                    return Err(syntax(pos, "branch without a preceding atom"));
                };
                if pending.is_some() {
                    return Err(syntax(pos, "bond symbol before branch"));
                }
                branches.push((root, atoms.len(), pos));
            }
            ')' => {
                let Some((root, opened_at, _)) = branches.pop() else {
                    return Err(syntax(pos, "unbalanced ')'"));
                };
                if pending.is_some() {
                    return Err(syntax(pos, "dangling bond symbol"));
                }
                if atoms.len() == opened_at {
                    return Err(syntax(pos, "empty branch"));
                }
                prev = Some(root);
            }
            '1'..='9' => {
                let Some(here) = prev else {
                    return Err(syntax(pos, "ring label without a preceding atom"));
                };
                let label = ch as usize - '0' as usize;
                match rings[label].take() {
                    Some(open) => {
                        let order = match (open.order, pending.take()) {
                            (Some(a), Some(b)) if a != b => return Err(syntax(pos, "conflicting ring bond orders")),
                            (Some(a), _) | (None, Some(a)) => a,
                            (None, None) => 1,
                        };
                        if open.atom == here {
                            return Err(syntax(pos, "ring closes on its own atom"));
                        }
                        if has_bond(&bonds, open.atom, here) {
                            return Err(syntax(pos, "ring closure duplicates an existing bond"));
                        }
                        bonds.push((open.atom, here, order));
                    }
                    None => {
                        rings[label] = Some(OpenRing {
                            atom: here,
                            order: pending.take(),
                        });
                    }
                }
            }
            '0' => return Err(unsupported(pos, "ring label 0")),
            '%' => return Err(unsupported(pos, "two-digit ring label")),
            '[' => return Err(unsupported(pos, "bracket atom")),
            '.' => return Err(unsupported(pos, "multi-fragment input")),
            '/' | '\\' | '@' => return Err(unsupported(pos, "stereochemistry")),
            ':' => return Err(unsupported(pos, "aromatic bond")),
            '*' => return Err(unsupported(pos, "wildcard atom")),
            '$' => return Err(unsupported(pos, "quadruple bond")),
            other => return Err(syntax(pos, format!("unexpected character {other:?}"))),
        }
        i += 1;
    }

    if pending.is_some() {
        return Err(syntax(text.len(), "dangling bond symbol"));
    }
    if let Some(&(_, _, pos)) = branches.last() {
        return Err(syntax(pos, "unbalanced '('"));
    }
    if let Some(label) = rings.iter().position(Option::is_some) {
        return Err(SmilesError::UnclosedRing { label: label as u8 });
    }

    MolecularGraph::new(atoms, bonds).map_err(|e| match e {
        GraphError::ValenceExceeded { atom, element, .. } => SmilesError::ValenceExceeded { atom, element },
        other => syntax(text.len(), other.to_string()),
    })
}

fn bond_symbol(order: u8) -> &'static str {
    match order {
        2 => "=",
        3 => "#",
        _ => "",
    }
}

pub(crate) struct Traversal {
    pub(crate) preorder: Vec<usize>,
    pub(crate) children: Vec<Vec<(usize, u8)>>,
    // (ancestor, descendant, order)
    pub(crate) ring_bonds: Vec<(usize, usize, u8)>,
}

/// Depth-first traversal from atom 0 with neighbours in ascending order.
pub(crate) fn traverse(g: &MolecularGraph) -> Traversal {
    let n = g.atom_count();
    let mut t = Traversal {
        preorder: vec![usize::MAX; n],
        children: vec![Vec::new(); n],
        ring_bonds: Vec::new(),
    };
    let mut parent = vec![usize::MAX; n];
    let mut counter = 0;
    fn visit(g: &MolecularGraph, v: usize, t: &mut Traversal, parent: &mut [usize], counter: &mut usize) {
        t.preorder[v] = *counter;
        *counter += 1;
        for &(u, order) in g.neighbors(v) {
            if t.preorder[u] == usize::MAX {
                parent[u] = v;
                t.children[v].push((u, order));
                visit(g, u, t, parent, counter);
            } else if u != parent[v] && t.preorder[u] < t.preorder[v] {
                t.ring_bonds.push((u, v, order));
            }
        }
    }
    if n > 0 {
        visit(g, 0, &mut t, &mut parent, &mut counter);
    }
    t
}

/// Writes `g` depth-first from atom 0, visiting neighbours in ascending
/// index order. Ring bond orders are written on the opening label.
pub fn write_smiles(g: &MolecularGraph) -> String {
    if g.is_empty() {
        return String::new();
    }
    let t = traverse(g);
    let mut out = String::new();
    let mut labels: Vec<Option<usize>> = vec![None; t.ring_bonds.len()];
    let mut in_use: Vec<bool> = Vec::new();

    fn label_text(label: usize) -> String {
        if label < 10 {
            label.to_string()
        } else {
            format!("%{label}")
        }
    }

    fn emit(
        g: &MolecularGraph,
        v: usize,
        incoming: u8,
        t: &Traversal,
        labels: &mut Vec<Option<usize>>,
        in_use: &mut Vec<bool>,
        out: &mut String,
    ) {
        out.push_str(bond_symbol(incoming));
        out.push_str(g.atoms()[v].symbol());

        let mut closings: Vec<usize> = (0..t.ring_bonds.len()).filter(|&r| t.ring_bonds[r].1 == v).collect();
        closings.sort_by_key(|&r| t.preorder[t.ring_bonds[r].0]);
        for r in closings {
            let label = labels[r].expect("ring opened at ancestor");
            in_use[label] = false;
            out.push_str(&label_text(label));
        }

        let mut openings: Vec<usize> = (0..t.ring_bonds.len()).filter(|&r| t.ring_bonds[r].0 == v).collect();
        openings.sort_by_key(|&r| t.preorder[t.ring_bonds[r].1]);
        for r in openings {
            let label = match (1..in_use.len()).find(|&l| !in_use[l]) {
                Some(l) => l,
                None => {
                    if in_use.is_empty() {
                        in_use.push(true);
                    }
                    in_use.push(false);
                    in_use.len() - 1
                }
            };
            in_use[label] = true;
            labels[r] = Some(label);
            out.push_str(bond_symbol(t.ring_bonds[r].2));
            out.push_str(&label_text(label));
        }

        let children = &t.children[v];
        for (k, &(child, order)) in children.iter().enumerate() {
            if k + 1 < children.len() {
                out.push('(');
                emit(g, child, order, t, labels, in_use, out);
                out.push(')');
            } else {
                emit(g, child, order, t, labels, in_use, out);
            }
        }
    }

    emit(g, 0, 1, &t, &mut labels, &mut in_use, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{canonical_key, Bond};

    fn bonds(g: &MolecularGraph) -> Vec<(usize, usize, u8)> {
        g.bonds().iter().map(|b| (b.a, b.b, b.order)).collect()
    }

    #[test]
    fn parses_chain_and_ring() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(g.atoms(), &[Element::C, Element::C, Element::O]);
        assert_eq!(bonds(&g), vec![(0, 1, 1), (1, 2, 1)]);

        let g = parse_smiles("C1CC1").unwrap();
        assert_eq!(g.atoms(), &[Element::C; 3]);
        assert_eq!(bonds(&g), vec![(0, 1, 1), (0, 2, 1), (1, 2, 1)]);
    }

    #[test]
    fn parses_branches_and_bond_orders() {
        let g = parse_smiles("CC(=O)N").unwrap();
        assert_eq!(bonds(&g), vec![(0, 1, 1), (1, 2, 2), (1, 3, 1)]);
        let g = parse_smiles("C#N").unwrap();
        assert_eq!(g.bonds(), &[Bond { a: 0, b: 1, order: 3 }]);
        let g = parse_smiles("C=1CCC1").unwrap();
        assert_eq!(g.bond_order(0, 3), Some(2));
        let g = parse_smiles("C1CCC=1").unwrap();
        assert_eq!(g.bond_order(0, 3), Some(2));
    }

    #[test]
    fn empty_string_is_empty_graph() {
        assert!(parse_smiles("").unwrap().is_empty());
    }

    #[test]
    fn unclosed_ring_from_interrupted_transition() {
        assert_eq!(parse_smiles("CCCC1CCCCCC"), Err(SmilesError::UnclosedRing { label: 1 }));
    }

    #[test]
    fn rejects_unsupported_features() {
        for s in [
            "c1ccccc1",
            "C[NH4+]",
            "CCl",
            "Oc1ccncc1",
            "CBr",
            "S",
            "C%10CC%10",
            "CC.O",
            "F/C=C/F",
            "C0CC0",
            "C:C",
            "[13C]",
        ] {
            assert!(
                matches!(parse_smiles(s), Err(SmilesError::UnsupportedFeature { .. })),
                "{s}"
            );
        }
    }

    #[test]
    fn rejects_syntax_errors() {
        for s in [
            "CC(", "CC)", "C=", "=C", "C==C", "C()C", "(C)", "C(=)C", "C11", "C12CC12", "1CC", "C C", "C=1CC-1",
        ] {
            assert!(matches!(parse_smiles(s), Err(SmilesError::Syntax { .. })), "{s}");
        }
    }

    #[test]
    fn rejects_valence_violations() {
        assert!(matches!(
            parse_smiles("C(C)(C)(C)(C)C"),
            Err(SmilesError::ValenceExceeded { atom: 0, .. })
        ));
        assert!(matches!(
            parse_smiles("O=C=O=C"),
            Err(SmilesError::ValenceExceeded { .. })
        ));
        assert!(matches!(
            parse_smiles("FF=C"),
            Err(SmilesError::ValenceExceeded { atom: 1, .. })
        ));
    }

    #[test]
    fn writes_in_dfs_order() {
        assert_eq!(write_smiles(&MolecularGraph::empty()), "");
        assert_eq!(write_smiles(&parse_smiles("CCO").unwrap()), "CCO");
        let cyclopropane = MolecularGraph::new(vec![Element::C; 3], vec![(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        assert_eq!(write_smiles(&cyclopropane), "C1CC1");
        assert_eq!(write_smiles(&parse_smiles("CC(=O)N").unwrap()), "CC(=O)N");
    }

    #[test]
    fn ring_labels_are_reused() {
        // Two fused rings: the first label closes before the second opens.
        let g = parse_smiles("C1CC1C2CC2").unwrap();
        assert_eq!(write_smiles(&g), "C1CC1C1CC1");
        let back = parse_smiles(&write_smiles(&g)).unwrap();
        assert_eq!(canonical_key(&g), canonical_key(&back));
    }

    #[test]
    fn round_trips_ring_bond_orders() {
        for s in ["C=1CCC1", "C1=CC1", "C12CC1CC2", "N#CC1(F)OC1", "C1CC2CC1C2"] {
            let g = parse_smiles(s).unwrap();
            let w = write_smiles(&g);
            let back = parse_smiles(&w).unwrap_or_else(|e| panic!("{s} -> {w}: {e}"));
            assert_eq!(canonical_key(&g), canonical_key(&back), "{s} -> {w}");
        }
    }
}
