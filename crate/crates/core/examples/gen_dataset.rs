//! Generates a reproducible QM9-like corpus: small neutral molecules over
//! C, N, O and F with at most nine heavy atoms, written one SMILES per line.
//!
//! Molecules come from decoding random carbon-weighted token strings, so
//! every one is valid; a few lines the ingester must skip (aromatic,
//! bracketed, malformed, duplicated) are mixed in on purpose.
//!
//! ```text
//! cargo run --release --example gen_dataset -- 6000 > data/qm9_like.smi
//! ```

use std::collections::HashSet;

use moldream::molgraph::{canonical_key, parse_smiles, write_smiles, Element, MolecularGraph};
use moldream::selfies::{decode, encode, Token, TokenSequence, DEFAULT_MAX_LEN};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_HEAVY_ATOMS: usize = 9;

/// O-O, O-F, F-F and N-F bonds are essentially absent from QM9.
fn has_unusual_bond(g: &MolecularGraph) -> bool {
    g.bonds().iter().any(|b| {
        let (x, y) = (g.atoms()[b.a], g.atoms()[b.b]);
        let electronegative = |e: Element| matches!(e, Element::O | Element::F);
        (electronegative(x) && electronegative(y))
            || matches!((x, y), (Element::N, Element::F) | (Element::F, Element::N))
    })
}

const WEIGHTS: [(Token, u32); 11] = [
    (Token::C, 45),
    (Token::DoubleC, 5),
    (Token::TripleC, 2),
    (Token::N, 12),
    (Token::DoubleN, 3),
    (Token::TripleN, 2),
    (Token::O, 12),
    (Token::DoubleO, 4),
    (Token::F, 4),
    (Token::Branch1, 7),
    (Token::Ring1, 5),
];

/// Lines the ingester is expected to reject, with the line they follow.
const AWKWARD: [(usize, &str); 8] = [
    (3, "c1ccccc1"),
    (40, "[NH4+]"),
    (95, "CC(C"),
    (150, "C1CC"),
    (222, "CCl"),
    (300, "Oc1ccncc1"),
    (410, "C%10CC%10"),
    (505, "C=1CC-1"),
];

fn main() {
    let count: usize = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("count must be a positive integer"))
        .unwrap_or(6000);
    let mut rng = ChaCha8Rng::seed_from_u64(20181113);
    let dist = WeightedIndex::new(WEIGHTS.iter().map(|(_, w)| *w)).expect("positive weights");

    let mut seen = HashSet::new();
    let mut lines: Vec<String> = Vec::with_capacity(count);
    while lines.len() < count {
        let len = rng.gen_range(3..=16);
        let tokens: Vec<Token> = (0..len).map(|_| WEIGHTS[dist.sample(&mut rng)].0).collect();
        let g = decode(&TokenSequence::new(tokens));
        if g.is_empty()
            || g.atom_count() > MAX_HEAVY_ATOMS
            || has_unusual_bond(&g)
            || encode(&g, DEFAULT_MAX_LEN).is_err()
        {
            continue;
        }
        let smiles = write_smiles(&g);
        if parse_smiles(&smiles).is_err() || !seen.insert(canonical_key(&g)) {
            continue;
        }
        lines.push(smiles);
    }

    let mut awkward = AWKWARD.iter().peekable();
    for (i, line) in lines.iter().enumerate() {
        println!("{line}");
        while let Some((_, extra)) = awkward.next_if(|(after, _)| *after == i) {
            println!("{extra}");
        }
        // An occasional repeat of an earlier molecule, spelled differently
        // when the writer's choice of start atom allows it.
        if i % 250 == 249 {
            println!("{}", lines[i / 2]);
        }
    }
}
