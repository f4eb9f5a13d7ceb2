//! Symbol codes and the textual word format.

use crate::error::{Error, Result};

/// A symbol code. Base symbols are small integers; `B` and `E` are reserved spacers.
pub type Sym = u32;

/// The spacer `b`.
pub const B: Sym = u32::MAX - 1;
/// The spacer `e`.
pub const E: Sym = u32::MAX;

pub fn is_spacer(s: Sym) -> bool {
    s >= B
}

/// The alphabet `Σ ∪ {b, e}` with `Σ = {0, .., size-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alphabet {
    pub size: u32,
}

impl Alphabet {
    pub fn new(size: u32) -> Result<Self> {
        if size == 0 || size >= B {
            return Err(Error::Invalid(format!("alphabet size {size}")));
        }
        Ok(Self { size })
    }

    pub fn contains(&self, s: Sym) -> bool {
        s < self.size || is_spacer(s)
    }

    pub fn validate(&self, word: &[Sym]) -> Result<()> {
        match word.iter().find(|&&s| !self.contains(s)) {
            Some(&s) => Err(Error::BadSymbol(s.to_string())),
            None => Ok(()),
        }
    }
}

fn token(s: Sym) -> String {
    match s {
        B => "b".into(),
        E => "e".into(),
        x => x.to_string(),
    }
}

/// Render a word. Single-digit alphabets use one character per symbol;
/// otherwise symbols are separated by `.`.
pub fn format_word(word: &[Sym]) -> String {
    if word.iter().all(|&s| is_spacer(s) || s < 10) {
        word.iter().map(|&s| token(s)).collect()
    } else {
        word.iter().map(|&s| token(s)).collect::<Vec<_>>().join(".")
    }
}

/// Parse the format produced by [`format_word`].
pub fn parse_word(text: &str) -> Result<Vec<Sym>> {
    let text = text.trim();
    let parse_tok = |t: &str| -> Result<Sym> {
        match t {
            "b" => Ok(B),
            "e" => Ok(E),
            _ => t
                .parse::<u32>()
                .ok()
                .filter(|&v| v < B)
                .ok_or_else(|| Error::BadSymbol(t.to_string())),
        }
    };
    if text.contains('.') {
        text.split('.').map(parse_tok).collect()
    } else {
        text.chars().map(|c| parse_tok(&c.to_string())).collect()
    }
}
