//! Oracles shared by the integration tests, written against the raw atom
//! and bond lists rather than the library's own canonicalisation.
#![allow(dead_code)]

use moldream::molgraph::{Element, MolecularGraph};

/// Maximum valence per element, written out independently of the library.
pub fn valence_limit(e: Element) -> u32 {
    match e {
        Element::C => 4,
        Element::N => 3,
        Element::O => 2,
        Element::F => 1,
    }
}

/// Checks chemical validity from the raw atom and bond lists.
pub fn check_valid(g: &MolecularGraph) -> Result<(), String> {
    let n = g.atom_count();
    let mut used = vec![0u32; n];
    let mut seen = std::collections::HashSet::new();
    for b in g.bonds() {
        if b.a >= n || b.b >= n || b.a == b.b {
            return Err(format!("bad bond endpoints {}-{}", b.a, b.b));
        }
        if !(1..=3).contains(&b.order) {
            return Err(format!("bond order {}", b.order));
        }
        if !seen.insert((b.a.min(b.b), b.a.max(b.b))) {
            return Err("duplicate bond".into());
        }
        used[b.a] += u32::from(b.order);
        used[b.b] += u32::from(b.order);
    }
    for (i, &e) in g.atoms().iter().enumerate() {
        if used[i] > valence_limit(e) {
            return Err(format!("atom {i} ({e:?}) has valence {}", used[i]));
        }
    }
    // Connected.
    if n > 0 {
        let mut reached = vec![false; n];
        let mut stack = vec![0];
        reached[0] = true;
        while let Some(a) = stack.pop() {
            for b in g.bonds() {
                for (x, y) in [(b.a, b.b), (b.b, b.a)] {
                    if x == a && !reached[y] {
                        reached[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        if reached.contains(&false) {
            return Err("disconnected".into());
        }
    }
    Ok(())
}

pub fn adjacency(g: &MolecularGraph) -> Vec<Vec<u8>> {
    let n = g.atom_count();
    let mut m = vec![vec![0u8; n]; n];
    for b in g.bonds() {
        m[b.a][b.b] = b.order;
        m[b.b][b.a] = b.order;
    }
    m
}

/// Backtracking isomorphism test on labelled, bond-ordered graphs.
pub fn isomorphic(g: &MolecularGraph, h: &MolecularGraph) -> bool {
    let n = g.atom_count();
    if n != h.atom_count() || g.bonds().len() != h.bonds().len() {
        return false;
    }
    let (ag, ah) = (adjacency(g), adjacency(h));
    let signature = |adj: &Vec<Vec<u8>>, atoms: &[Element], i: usize| {
        let mut orders: Vec<u8> = adj[i].iter().copied().filter(|&o| o > 0).collect();
        orders.sort_unstable();
        (atoms[i], orders)
    };
    let sg: Vec<_> = (0..n).map(|i| signature(&ag, g.atoms(), i)).collect();
    let sh: Vec<_> = (0..n).map(|i| signature(&ah, h.atoms(), i)).collect();
    let mut m = Matcher {
        ag: &ag,
        ah: &ah,
        sg: &sg,
        sh: &sh,
        map: vec![usize::MAX; n],
        used: vec![false; n],
    };
    m.extend(0)
}

struct Matcher<'a> {
    ag: &'a [Vec<u8>],
    ah: &'a [Vec<u8>],
    sg: &'a [(Element, Vec<u8>)],
    sh: &'a [(Element, Vec<u8>)],
    map: Vec<usize>,
    used: Vec<bool>,
}

impl Matcher<'_> {
    /// Maps atom `i` onward, given a consistent mapping of atoms `0..i`.
    fn extend(&mut self, i: usize) -> bool {
        let n = self.map.len();
        if i == n {
            return true;
        }
        for j in 0..n {
            if self.used[j] || self.sg[i] != self.sh[j] {
                continue;
            }
            if (0..i).any(|k| self.ag[i][k] != self.ah[j][self.map[k]]) {
                continue;
            }
            self.map[i] = j;
            self.used[j] = true;
            if self.extend(i + 1) {
                return true;
            }
            self.used[j] = false;
        }
        false
    }
}

pub fn count_element(g: &MolecularGraph, e: Element) -> usize {
    g.atoms().iter().filter(|&&a| a == e).count()
}

/// Implicit hydrogens per atom, from the raw bond list.
pub fn hydrogens(g: &MolecularGraph) -> Vec<u32> {
    let mut used = vec![0u32; g.atom_count()];
    for b in g.bonds() {
        used[b.a] += u32::from(b.order);
        used[b.b] += u32::from(b.order);
    }
    g.atoms().iter().zip(used).map(|(&e, u)| valence_limit(e) - u).collect()
}

/// Surrogate lipophilicity re-summed term by term with the shipped
/// default constants.
pub fn hand_logp(g: &MolecularGraph) -> f64 {
    let atoms: f64 = g
        .atoms()
        .iter()
        .map(|e| match e {
            Element::C => 0.20,
            Element::N => -0.70,
            Element::O => -0.40,
            Element::F => -0.20,
        })
        .sum();
    let h: u32 = hydrogens(g).iter().sum();
    let bonds: f64 = g
        .bonds()
        .iter()
        .map(|b| match b.order {
            2 => -0.05,
            3 => -0.10,
            _ => 0.0,
        })
        .sum();
    atoms + 0.10 * f64::from(h) + bonds
}

/// Strategy for arbitrary token sequences of up to `max_len` tokens,
/// padding included.
pub fn token_sequences(max_len: usize) -> impl proptest::strategy::Strategy<Value = moldream::selfies::TokenSequence> {
    use moldream::selfies::{TokenSequence, ALPHABET};
    use proptest::prelude::*;
    prop::collection::vec(0..ALPHABET.len(), 0..=max_len)
        .prop_map(|ix| TokenSequence::new(ix.into_iter().map(|i| ALPHABET[i]).collect()))
}

/// Strategy for valid molecules: every token sequence decodes to one.
pub fn molecules() -> impl proptest::strategy::Strategy<Value = MolecularGraph> {
    use proptest::strategy::Strategy;
    token_sequences(20).prop_map(|t| moldream::selfies::decode(&t))
}

/// Strategy for a molecule together with a permutation of its atoms.
pub fn relabeled_molecules() -> impl proptest::strategy::Strategy<Value = (MolecularGraph, Vec<usize>)> {
    use proptest::prelude::*;
    molecules().prop_flat_map(|g| {
        let n = g.atom_count();
        (Just(g), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
    })
}
