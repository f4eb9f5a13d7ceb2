//! Unique readability checks and multi-pattern scanning.

use std::collections::HashMap;

use serde::Serialize;

const MOD: u64 = (1 << 61) - 1;
const BASE: u64 = 1_000_003;

fn mul(a: u64, b: u64) -> u64 {
    let p = a as u128 * b as u128;
    let lo = (p as u64 & MOD) + (p >> 61) as u64;
    if lo >= MOD {
        lo - MOD
    } else {
        lo
    }
}

fn add(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MOD {
        s - MOD
    } else {
        s
    }
}

fn fold(x: u64) -> u64 {
    (x % (MOD - 1)) + 1
}

fn hash(seq: &[u64]) -> u64 {
    seq.iter().fold(0, |h, &x| add(mul(h, BASE), fold(x)))
}

/// All `(position, pattern index)` pairs where one of the equal-length `patterns` occurs in `text`.
pub fn find_all(text: &[u64], patterns: &[Vec<u64>]) -> Vec<(usize, usize)> {
    let Some(len) = patterns.first().map(Vec::len) else {
        return Vec::new();
    };
    if len == 0 || text.len() < len {
        return Vec::new();
    }
    let mut table: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, p) in patterns.iter().enumerate() {
        table.entry(hash(p)).or_default().push(i);
    }
    let mut top = 1u64;
    for _ in 1..len {
        top = mul(top, BASE);
    }
    let mut out = Vec::new();
    let mut h = hash(&text[..len]);
    for start in 0..=text.len() - len {
        if start > 0 {
            let drop = mul(fold(text[start - 1]), top);
            h = add(h, MOD - drop);
            h = add(mul(h, BASE), fold(text[start + len - 1]));
        }
        if let Some(cands) = table.get(&h) {
            for &c in cands {
                if patterns[c][..] == text[start..start + len] {
                    out.push((start, c));
                }
            }
        }
    }
    out
}

/// A violation of unique readability: `w` occurs inside `u v` at `offset`, with `0 < offset < len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReadabilityWitness {
    pub u: usize,
    pub v: usize,
    pub w: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReadabilityReport {
    pub readable: bool,
    pub witness: Option<ReadabilityWitness>,
}

/// Check that for all `u, v, w` in the family, `uv = pws` forces `p` or `s` to be empty.
pub fn check_unique_readability(words: &[Vec<u64>]) -> ReadabilityReport {
    let Some(len) = words.first().map(Vec::len) else {
        return ReadabilityReport { readable: true, witness: None };
    };
    assert!(words.iter().all(|w| w.len() == len), "words must have equal length");
    for (u, wu) in words.iter().enumerate() {
        for (v, wv) in words.iter().enumerate() {
            let joined: Vec<u64> = wu.iter().chain(wv.iter()).copied().collect();
            if let Some(&(offset, w)) = find_all(&joined, words).iter().find(|(o, _)| *o > 0 && *o < len) {
                return ReadabilityReport {
                    readable: false,
                    witness: Some(ReadabilityWitness { u, v, w, offset }),
                };
            }
        }
    }
    ReadabilityReport { readable: true, witness: None }
}

/// Re-verify a witness directly.
pub fn verify_witness(words: &[Vec<u64>], wit: &ReadabilityWitness) -> bool {
    let len = words[0].len();
    if wit.offset == 0 || wit.offset >= len {
        return false;
    }
    let joined: Vec<u64> = words[wit.u].iter().chain(words[wit.v].iter()).copied().collect();
    joined[wit.offset..wit.offset + len] == words[wit.w][..]
}
