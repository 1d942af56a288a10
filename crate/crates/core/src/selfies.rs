//! A robust token grammar for molecules.
//!
//! Every token sequence decodes to a valid [`MolecularGraph`]: atom tokens
//! request a bond order that the decoder lowers to whatever valence is left,
//! and branch/ring tokens that cannot be honoured are dropped. The grammar
//! uses a fixed twelve-token alphabet with single-level index tokens:
//!
//! | index | token       | index | token       |
//! |-------|-------------|-------|-------------|
//! | 0     | `[PAD]`     | 6     | `[#N]`      |
//! | 1     | `[C]`       | 7     | `[O]`       |
//! | 2     | `[=C]`      | 8     | `[=O]`      |
//! | 3     | `[#C]`      | 9     | `[F]`       |
//! | 4     | `[N]`       | 10    | `[Branch1]` |
//! | 5     | `[=N]`      | 11    | `[Ring1]`   |
//!
//! `[Branch1]` and `[Ring1]` consume the following token as a number (its
//! alphabet index `i`). A branch spans the next `i + 1` tokens and hangs off
//! the current atom; a ring bond joins the current atom to the atom created
//! `i + 2` creation steps before the next one would be.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::molgraph::{traverse, Element, MolecularGraph};

pub const ALPHABET_SIZE: usize = 12;
pub const DEFAULT_MAX_LEN: usize = 20;

/// Largest number an index token can express.
const MAX_INDEX: usize = ALPHABET_SIZE - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Token {
    Pad = 0,
    C,
    DoubleC,
    TripleC,
    N,
    DoubleN,
    TripleN,
    O,
    DoubleO,
    F,
    Branch1,
    Ring1,
}

pub const ALPHABET: [Token; ALPHABET_SIZE] = [
    Token::Pad,
    Token::C,
    Token::DoubleC,
    Token::TripleC,
    Token::N,
    Token::DoubleN,
    Token::TripleN,
    Token::O,
    Token::DoubleO,
    Token::F,
    Token::Branch1,
    Token::Ring1,
];

impl Token {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Token> {
        ALPHABET.get(index).copied()
    }

    pub fn text(self) -> &'static str {
        match self {
            Token::Pad => "[PAD]",
            Token::C => "[C]",
            Token::DoubleC => "[=C]",
            Token::TripleC => "[#C]",
            Token::N => "[N]",
            Token::DoubleN => "[=N]",
            Token::TripleN => "[#N]",
            Token::O => "[O]",
            Token::DoubleO => "[=O]",
            Token::F => "[F]",
            Token::Branch1 => "[Branch1]",
            Token::Ring1 => "[Ring1]",
        }
    }

    /// Element and requested bond order for atom tokens.
    pub fn atom(self) -> Option<(Element, u8)> {
        match self {
            Token::C => Some((Element::C, 1)),
            Token::DoubleC => Some((Element::C, 2)),
            Token::TripleC => Some((Element::C, 3)),
            Token::N => Some((Element::N, 1)),
            Token::DoubleN => Some((Element::N, 2)),
            Token::TripleN => Some((Element::N, 3)),
            Token::O => Some((Element::O, 1)),
            Token::DoubleO => Some((Element::O, 2)),
            Token::F => Some((Element::F, 1)),
            _ => None,
        }
    }

    fn for_atom(element: Element, order: u8) -> Option<Token> {
        ALPHABET.iter().copied().find(|t| t.atom() == Some((element, order)))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenParseError {
    #[error("expected '[' at byte {0}")]
    ExpectedOpen(usize),
    #[error("unterminated token starting at byte {0}")]
    Unterminated(usize),
    #[error("unknown token {0}")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("encoding needs {len} tokens, more than the limit of {max}")]
    TooLong { len: usize, max: usize },
    #[error("cannot encode: {0}")]
    Unencodable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OneHotError {
    #[error("sequence of {len} tokens does not fit in {max} rows")]
    TooLong { len: usize, max: usize },
    #[error("matrix has {len} values, expected a multiple of {ALPHABET_SIZE}")]
    BadShape { len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct TokenSequence(Vec<Token>);

impl TokenSequence {
    pub fn new(tokens: Vec<Token>) -> Self {
        TokenSequence(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<Token>> for TokenSequence {
    fn from(tokens: Vec<Token>) -> Self {
        TokenSequence(tokens)
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.0 {
            f.write_str(t.text())?;
        }
        Ok(())
    }
}

impl FromStr for TokenSequence {
    type Err = TokenParseError;

    /// Parses concatenated bracketed tokens such as `[C][=O]`. Whitespace
    /// between tokens is ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut tokens = Vec::new();
        let mut rest = s;
        let mut offset = 0;
        loop {
            let trimmed = rest.trim_start();
            offset += rest.len() - trimmed.len();
            rest = trimmed;
            if rest.is_empty() {
                break;
            }
            if !rest.starts_with('[') {
                return Err(TokenParseError::ExpectedOpen(offset));
            }
            let end = rest.find(']').ok_or(TokenParseError::Unterminated(offset))?;
            let text = &rest[..=end];
            let token = ALPHABET
                .iter()
                .copied()
                .find(|t| t.text() == text)
                .ok_or_else(|| TokenParseError::Unknown(text.to_string()))?;
            tokens.push(token);
            rest = &rest[end + 1..];
            offset += end + 1;
        }
        Ok(TokenSequence(tokens))
    }
}

struct Derivation {
    atoms: Vec<Element>,
    bonds: Vec<(usize, usize, u8)>,
    remaining: Vec<u8>,
}

impl Derivation {
    fn add_atom(&mut self, element: Element) -> usize {
        self.atoms.push(element);
        self.remaining.push(element.max_valence());
        self.atoms.len() - 1
    }

    fn add_bond(&mut self, a: usize, b: usize, order: u8) {
        self.bonds.push((a, b, order));
        self.remaining[a] -= order;
        self.remaining[b] -= order;
    }

    fn bonded(&self, a: usize, b: usize) -> bool {
        self.bonds
            .iter()
            .any(|&(x, y, _)| (x == a && y == b) || (x == b && y == a))
    }

    /// Derives `tokens` starting from `current` (`None` only at the top level
    /// before the first atom). Termination ends this derivation only; an
    /// enclosing branch carries on after the branch body.
    fn derive(&mut self, tokens: &[Token], mut current: Option<usize>) {
        let mut i = 0;
        while i < tokens.len() {
            let token = tokens[i];
            match token {
                Token::Pad => return,
                Token::Branch1 => {
                    let Some(index_token) = tokens.get(i + 1) else {
                        return;
                    };
                    let start = i + 2;
                    let end = (start + index_token.index() + 1).min(tokens.len());
                    if let Some(root) = current {
                        if self.remaining[root] >= 2 {
                            self.derive(&tokens[start..end], Some(root));
                        }
                    }
                    i = end;
                }
                Token::Ring1 => {
                    let Some(index_token) = tokens.get(i + 1) else {
                        return;
                    };
                    let span = index_token.index() + 2;
                    if let Some(here) = current {
                        if let Some(target) = self.atoms.len().checked_sub(span) {
                            if target != here
                                && self.remaining[here] >= 1
                                && self.remaining[target] >= 1
                                && !self.bonded(here, target)
                            {
                                self.add_bond(target, here, 1);
                            }
                        }
                    }
                    i += 2;
                }
                _ => {
                    let (element, requested) = token.atom().expect("atom token");
                    match current {
                        None => current = Some(self.add_atom(element)),
                        Some(prev) => {
                            let left = self.remaining[prev];
                            if left == 0 {
                                return;
                            }
                            let order = requested.min(left).min(element.max_valence());
                            let new = self.add_atom(element);
                            self.add_bond(prev, new, order);
                            current = Some(new);
                        }
                    }
                    i += 1;
                }
            }
        }
    }
}

/// Decodes any token sequence to a valid molecular graph.
pub fn decode(tokens: &TokenSequence) -> MolecularGraph {
    let mut d = Derivation {
        atoms: Vec::new(),
        bonds: Vec::new(),
        remaining: Vec::new(),
    };
    d.derive(tokens.tokens(), None);
    MolecularGraph::from_decoder(d.atoms, d.bonds)
}

/// Encodes `g` along its depth-first spanning tree from atom 0.
pub fn encode(g: &MolecularGraph, max_len: usize) -> Result<TokenSequence, EncodeError> {
    if g.is_empty() {
        return Ok(TokenSequence::default());
    }
    let t = traverse(g);
    if let Some(&(a, b, order)) = t.ring_bonds.iter().find(|r| r.2 != 1) {
        return Err(EncodeError::Unencodable(format!("ring bond {a}-{b} has order {order}")));
    }

    fn emit(
        g: &MolecularGraph,
        v: usize,
        incoming: u8,
        t: &crate::molgraph::Traversal,
        out: &mut Vec<Token>,
    ) -> Result<(), EncodeError> {
        let element = g.atoms()[v];
        let token = Token::for_atom(element, incoming)
            .ok_or_else(|| EncodeError::Unencodable(format!("no token for {element} with bond order {incoming}")))?;
        out.push(token);

        let created = t.preorder[v] + 1;
        let mut spans: Vec<usize> = t
            .ring_bonds
            .iter()
            .filter(|r| r.1 == v)
            .map(|r| created - t.preorder[r.0])
            .collect();
        spans.sort_unstable();
        for span in spans {
            let index = span - 2;
            if index > MAX_INDEX {
                return Err(EncodeError::Unencodable(format!(
                    "ring spans {span} atoms, at most {} expressible",
                    MAX_INDEX + 2
                )));
            }
            out.push(Token::Ring1);
            out.push(ALPHABET[index]);
        }

        let children = &t.children[v];
        for (k, &(child, order)) in children.iter().enumerate() {
            if k + 1 < children.len() {
                let mut body = Vec::new();
                emit(g, child, order, t, &mut body)?;
                if body.len() > MAX_INDEX + 1 {
                    return Err(EncodeError::Unencodable(format!(
                        "branch of {} tokens, at most {} expressible",
                        body.len(),
                        MAX_INDEX + 1
                    )));
                }
                out.push(Token::Branch1);
                out.push(ALPHABET[body.len() - 1]);
                out.extend(body);
            } else {
                emit(g, child, order, t, out)?;
            }
        }
        Ok(())
    }

    let mut out = Vec::new();
    emit(g, 0, 1, &t, &mut out)?;
    if out.len() > max_len {
        return Err(EncodeError::TooLong {
            len: out.len(),
            max: max_len,
        });
    }
    Ok(TokenSequence(out))
}

/// A row-major `rows x ALPHABET_SIZE` matrix, exactly one-hot when built by
/// [`to_onehot`] and arbitrary reals once dreaming has moved it.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotMatrix {
    rows: usize,
    values: Vec<f64>,
}

impl OneHotMatrix {
    pub fn from_values(values: Vec<f64>) -> Result<Self, OneHotError> {
        if !values.len().is_multiple_of(ALPHABET_SIZE) {
            return Err(OneHotError::BadShape { len: values.len() });
        }
        Ok(OneHotMatrix {
            rows: values.len() / ALPHABET_SIZE,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * ALPHABET_SIZE..(r + 1) * ALPHABET_SIZE]
    }

    /// True when every entry is 0 or 1 and every row holds exactly one 1.
    pub fn is_exact_onehot(&self) -> bool {
        (0..self.rows).all(|r| {
            let row = self.row(r);
            row.iter().all(|&v| v == 0.0 || v == 1.0) && row.iter().filter(|&&v| v == 1.0).count() == 1
        })
    }
}

pub fn to_onehot(tokens: &TokenSequence, max_len: usize) -> Result<OneHotMatrix, OneHotError> {
    if tokens.len() > max_len {
        return Err(OneHotError::TooLong {
            len: tokens.len(),
            max: max_len,
        });
    }
    let mut values = vec![0.0; max_len * ALPHABET_SIZE];
    for r in 0..max_len {
        let token = tokens.tokens().get(r).copied().unwrap_or(Token::Pad);
        values[r * ALPHABET_SIZE + token.index()] = 1.0;
    }
    Ok(OneHotMatrix { rows: max_len, values })
}

/// Per-row argmax (lowest index wins ties), trailing `[PAD]` rows dropped.
pub fn from_onehot_argmax(m: &OneHotMatrix) -> TokenSequence {
    let mut tokens: Vec<Token> = (0..m.rows())
        .map(|r| {
            let row = m.row(r);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            ALPHABET[best]
        })
        .collect();
    while tokens.last() == Some(&Token::Pad) {
        tokens.pop();
    }
    TokenSequence(tokens)
}
