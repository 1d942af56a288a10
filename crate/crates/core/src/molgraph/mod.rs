//! Heavy-atom molecular graphs over the C/N/O/F alphabet.
//!
//! Hydrogens are never stored; every atom carries as many implicit
//! hydrogens as its unused valence allows.

mod canon;
mod smiles;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::{canonical_key, CanonicalKey};
pub use smiles::{parse_smiles, write_smiles, SmilesError};
pub(crate) use smiles::{traverse, Traversal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    C,
    N,
    O,
    F,
}

impl Element {
    pub const ALL: [Element; 4] = [Element::C, Element::N, Element::O, Element::F];

    pub fn max_valence(self) -> u8 {
        match self {
            Element::C => 4,
            Element::N => 3,
            Element::O => 2,
            Element::F => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        match s {
            "C" => Some(Element::C),
            "N" => Some(Element::N),
            "O" => Some(Element::O),
            "F" => Some(Element::F),
            _ => None,
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// An undirected bond with `a < b` and order in 1..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond references atom {0}, which does not exist")]
    AtomOutOfRange(usize),
    #[error("self-bond on atom {0}")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("bond order {0} is not 1, 2 or 3")]
    BadBondOrder(u8),
    #[error("atom {atom} ({element}) carries bond order {used} > {max}")]
    ValenceExceeded {
        atom: usize,
        element: Element,
        used: u8,
        max: u8,
    },
    #[error("graph has {0} disconnected fragments")]
    Disconnected(usize),
}

/// A validated, connected (or empty) heavy-atom graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MolecularGraph {
    atoms: Vec<Element>,
    bonds: Vec<Bond>,
    // Sorted by neighbour index.
    adjacency: Vec<Vec<(usize, u8)>>,
}

impl MolecularGraph {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a graph, normalising each bond to `a < b` and checking every
    /// structural invariant.
    pub fn new(atoms: Vec<Element>, bonds: Vec<(usize, usize, u8)>) -> Result<Self, GraphError> {
        let n = atoms.len();
        let mut adjacency: Vec<Vec<(usize, u8)>> = vec![Vec::new(); n];
        let mut normalized = Vec::with_capacity(bonds.len());
        for (a, b, order) in bonds {
            if a >= n {
                return Err(GraphError::AtomOutOfRange(a));
            }
            if b >= n {
                return Err(GraphError::AtomOutOfRange(b));
            }
            if a == b {
                return Err(GraphError::SelfBond(a));
            }
            if !(1..=3).contains(&order) {
                return Err(GraphError::BadBondOrder(order));
            }
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            if adjacency[a].iter().any(|&(x, _)| x == b) {
                return Err(GraphError::DuplicateBond(a, b));
            }
            adjacency[a].push((b, order));
            adjacency[b].push((a, order));
            normalized.push(Bond { a, b, order });
        }
        for (i, element) in atoms.iter().enumerate() {
            let used: u8 = adjacency[i].iter().map(|&(_, o)| o).sum();
            if used > element.max_valence() {
                return Err(GraphError::ValenceExceeded {
                    atom: i,
                    element: *element,
                    used,
                    max: element.max_valence(),
                });
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        normalized.sort_unstable();
        let graph = MolecularGraph {
            atoms,
            bonds: normalized,
            adjacency,
        };
        let fragments = graph.fragment_count();
        if fragments > 1 {
            return Err(GraphError::Disconnected(fragments));
        }
        Ok(graph)
    }

    pub fn atoms(&self) -> &[Element] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Neighbours of `atom` with bond orders, ascending by index.
    pub fn neighbors(&self, atom: usize) -> &[(usize, u8)] {
        &self.adjacency[atom]
    }

    pub fn bond_order(&self, a: usize, b: usize) -> Option<u8> {
        self.adjacency[a].iter().find(|&&(x, _)| x == b).map(|&(_, o)| o)
    }

    /// Sum of bond orders incident on `atom`.
    pub fn bonded_valence(&self, atom: usize) -> u8 {
        self.adjacency[atom].iter().map(|&(_, o)| o).sum()
    }

    pub fn implicit_hydrogens(&self, atom: usize) -> u8 {
        self.atoms[atom].max_valence() - self.bonded_valence(atom)
    }

    /// Returns the same molecule with atom `i` moved to position `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> MolecularGraph {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let mut atoms = vec![Element::C; self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old];
        }
        let bonds = self.bonds.iter().map(|b| (perm[b.a], perm[b.b], b.order)).collect();
        MolecularGraph::new(atoms, bonds).expect("relabeling preserves validity")
    }

    fn fragment_count(&self) -> usize {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut fragments = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            fragments += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &(u, _) in &self.adjacency[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        fragments
    }

    /// Graph builder used by the token decoder, which maintains the
    /// invariants itself.
    pub(crate) fn from_decoder(atoms: Vec<Element>, bonds: Vec<(usize, usize, u8)>) -> Self {
        MolecularGraph::new(atoms, bonds).expect("decoder produced an invalid graph")
    }
}

/// Heavy-atom counts plus the implicit hydrogen total.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Composition {
    pub counts: BTreeMap<Element, usize>,
    pub hydrogens: usize,
}

impl Composition {
    pub fn count(&self, element: Element) -> usize {
        self.counts.get(&element).copied().unwrap_or(0)
    }
}

pub fn composition(g: &MolecularGraph) -> Composition {
    let mut counts = BTreeMap::new();
    let mut hydrogens = 0usize;
    for (i, &element) in g.atoms().iter().enumerate() {
        *counts.entry(element).or_insert(0) += 1;
        hydrogens += g.implicit_hydrogens(i) as usize;
    }
    Composition { counts, hydrogens }
}
