//! Sample windows: parsing, principal blocks, boundary, subscales, maturity, rotation, d̄.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::readability::find_all;
use super::sequence::{ConstructionSequence, Kind, StepCoord};
use super::symbols::{is_spacer, Sym};
use crate::coeff::CoefficientSystem;
use crate::error::{Error, Result};

/// A finite piece of a bi-infinite sequence on `[start, start + len)`, containing the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleWindow {
    pub start: i64,
    pub symbols: Vec<Sym>,
}

impl SampleWindow {
    pub fn new(start: i64, symbols: Vec<Sym>) -> Result<Self> {
        let end = start + symbols.len() as i64;
        if start > 0 || end <= 0 {
            return Err(Error::Invalid(format!("window [{start}, {end}) does not contain the origin")));
        }
        Ok(Self { start, symbols })
    }

    /// A word placed so that the origin sits at offset `r` inside it.
    pub fn around(word: &[Sym], r: usize) -> Result<Self> {
        Self::new(-(r as i64), word.to_vec())
    }

    pub fn end(&self) -> i64 {
        self.start + self.symbols.len() as i64
    }

    pub fn get(&self, pos: i64) -> Option<Sym> {
        if pos < self.start || pos >= self.end() {
            None
        } else {
            Some(self.symbols[(pos - self.start) as usize])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Occurrence {
    pub pos: i64,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseResult {
    pub level: usize,
    pub occurrences: Vec<Occurrence>,
    /// Half-open intervals not covered by any occurrence.
    pub uncovered: Vec<(i64, i64)>,
}

fn uncovered(start: i64, end: i64, occ: &[Occurrence], len: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let mut cur = start;
    for o in occ {
        if o.pos > cur {
            out.push((cur, o.pos));
        }
        cur = cur.max(o.pos + len);
    }
    if cur < end {
        out.push((cur, end));
    }
    out
}

/// Content-driven parse of a window of a circular sequence into level-`n` occurrences.
/// Occurrences cut by the window edge are reported as uncovered.
pub fn parse(window: &SampleWindow, seq: &ConstructionSequence, n: usize) -> Result<ParseResult> {
    seq.alphabet().validate(&window.symbols)?;
    if seq.kind() != Kind::Circular {
        return Err(Error::Invalid("content parsing needs a circular sequence; use parse_anchored".into()));
    }
    let len = seq.word_len_usize(n)?;
    let mut occurrences = Vec::new();
    if n == 0 {
        for (i, &s) in window.symbols.iter().enumerate() {
            if !is_spacer(s) {
                occurrences.push(Occurrence { pos: window.start + i as i64, index: s as usize });
            }
        }
    } else {
        let patterns: Vec<Vec<u64>> = seq.words(n)?.iter().map(|w| w.iter().map(|&s| s as u64).collect()).collect();
        let text: Vec<u64> = window.symbols.iter().map(|&s| s as u64).collect();
        let mut last_end = i64::MIN;
        for (p, idx) in find_all(&text, &patterns) {
            let pos = window.start + p as i64;
            if pos >= last_end {
                occurrences.push(Occurrence { pos, index: idx });
                last_end = pos + len as i64;
            }
        }
    }
    let uncovered = uncovered(window.start, window.end(), &occurrences, len as i64);
    Ok(ParseResult { level: n, occurrences, uncovered })
}

/// Parse a window of an odometer-based sequence given the start `anchor` of some block of
/// level `>= n`.
pub fn parse_anchored(window: &SampleWindow, seq: &ConstructionSequence, n: usize, anchor: i64) -> Result<ParseResult> {
    seq.alphabet().validate(&window.symbols)?;
    let len = seq.word_len_usize(n)? as i64;
    let lookup: HashMap<&[Sym], usize> =
        seq.words(n)?.iter().enumerate().map(|(i, w)| (&w[..], i)).collect();
    let mut pos = anchor + (window.start - anchor).div_euclid(len) * len;
    if pos < window.start {
        pos += len;
    }
    let mut occurrences = Vec::new();
    while pos + len <= window.end() {
        let a = (pos - window.start) as usize;
        if let Some(&index) = lookup.get(&window.symbols[a..a + len as usize]) {
            occurrences.push(Occurrence { pos, index });
        }
        pos += len;
    }
    let uncovered = uncovered(window.start, window.end(), &occurrences, len);
    Ok(ParseResult { level: n, occurrences, uncovered })
}

/// Location `r_n` of the origin inside its principal `n`-block, and that block's word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Principal {
    pub r: i64,
    pub index: usize,
}

/// Per-level principal data, `levels[n]` for `n = 0..=up_to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrincipalData {
    pub levels: Vec<Option<Principal>>,
}

impl PrincipalData {
    pub fn get(&self, n: usize) -> Option<Principal> {
        self.levels.get(n).copied().flatten()
    }

    /// Positional coherence: each defined level-`n` block lies inside each defined higher block.
    pub fn coherent(&self, seq: &ConstructionSequence) -> bool {
        let defined: Vec<(usize, Principal)> =
            self.levels.iter().enumerate().filter_map(|(n, p)| p.map(|p| (n, p))).collect();
        defined.windows(2).all(|w| {
            let (n, lo) = w[0];
            let (m, hi) = w[1];
            let Ok(lo_len) = seq.word_len_usize(n) else { return false };
            let Ok(hi_len) = seq.word_len_usize(m) else { return false };
            let inner = hi.r - lo.r;
            inner >= 0 && inner as usize + lo_len <= hi_len
        })
    }
}

fn principal_from(parse: &ParseResult, len: usize) -> Option<Principal> {
    parse
        .occurrences
        .iter()
        .find(|o| o.pos <= 0 && 0 < o.pos + len as i64)
        .map(|o| Principal { r: -o.pos, index: o.index })
}

/// Principal blocks of a circular window for levels `0..=up_to`.
pub fn principal_blocks(window: &SampleWindow, seq: &ConstructionSequence, up_to: usize) -> Result<PrincipalData> {
    let mut levels = Vec::with_capacity(up_to + 1);
    for n in 0..=up_to {
        let parsed = parse(window, seq, n)?;
        levels.push(principal_from(&parsed, seq.word_len_usize(n)?));
    }
    Ok(PrincipalData { levels })
}

/// Principal blocks of an odometer window, given the start of a level-`up_to` block.
pub fn principal_blocks_anchored(
    window: &SampleWindow,
    seq: &ConstructionSequence,
    up_to: usize,
    anchor: i64,
) -> Result<PrincipalData> {
    let mut levels = Vec::with_capacity(up_to + 1);
    for n in 0..=up_to {
        let parsed = parse_anchored(window, seq, n, anchor)?;
        levels.push(principal_from(&parsed, seq.word_len_usize(n)?));
    }
    Ok(PrincipalData { levels })
}

/// Boundary and interior positions relative to level-`n` structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundaryReport {
    pub level: usize,
    pub boundary: Vec<usize>,
    pub interior: Vec<usize>,
}

impl BoundaryReport {
    /// Number of positions at distance less than `radius` from the boundary.
    pub fn near_boundary(&self, len: usize, radius: usize) -> usize {
        let mut mark = vec![false; len];
        for &b in &self.boundary {
            let lo = b.saturating_sub(radius - 1);
            let hi = (b + radius).min(len);
            for m in &mut mark[lo..hi] {
                *m = true;
            }
        }
        mark.iter().filter(|&&m| m).count()
    }
}

/// Classify positions of the level-`m` circular word `idx` (with `m > n`): the boundary
/// `∂_n` is the spacer part of level-`(n+1)` blocks, the interior is the union of `n`-blocks.
pub fn classify_boundary(seq: &ConstructionSequence, m: usize, idx: usize, n: usize) -> Result<BoundaryReport> {
    if n >= m {
        return Err(Error::Invalid(format!("boundary level {n} needs a word of level above it, got {m}")));
    }
    let len = seq.word_len_usize(m)?;
    let qn = seq.word_len_usize(n)?;
    let qn1 = seq.word_len_usize(n + 1)?;
    let mut state = vec![0u8; len];
    for b in seq.blocks(m, idx, n + 1)? {
        state[b.pos..b.pos + qn1].iter_mut().for_each(|s| *s = 1);
    }
    for b in seq.blocks(m, idx, n)? {
        state[b.pos..b.pos + qn].iter_mut().for_each(|s| *s = 2);
    }
    let boundary = (0..len).filter(|&i| state[i] == 1).collect();
    let interior = (0..len).filter(|&i| state[i] == 2).collect();
    Ok(BoundaryReport { level: n, boundary, interior })
}

/// Content-driven boundary classification of a window.
pub fn classify_boundary_window(window: &SampleWindow, seq: &ConstructionSequence, n: usize) -> Result<BoundaryReport> {
    let upper = parse(window, seq, n + 1)?;
    let lower = parse(window, seq, n)?;
    let len = window.symbols.len();
    let qn = seq.word_len_usize(n)?;
    let qn1 = seq.word_len_usize(n + 1)?;
    let mut state = vec![0u8; len];
    for o in &upper.occurrences {
        let a = (o.pos - window.start) as usize;
        state[a..a + qn1].iter_mut().for_each(|s| *s = 1);
    }
    for o in &lower.occurrences {
        let a = (o.pos - window.start) as usize;
        state[a..a + qn].iter_mut().for_each(|s| *s = 2);
    }
    Ok(BoundaryReport {
        level: n,
        boundary: (0..len).filter(|&i| state[i] == 1).collect(),
        interior: (0..len).filter(|&i| state[i] == 2).collect(),
    })
}

/// Subscale of a level-`(n+1)` circular word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// The powers `w_j^{l-1}`.
    Zero,
    /// The terms `b^{q-j_i} w_j^{l-1} e^{j_i}`.
    One,
    /// The products over `j` for fixed `i`.
    Two,
}

/// Subsection intervals `[start, end)` of a level-`(n+1)` circular word.
pub fn subsections(cs: &CoefficientSystem, n: usize, scale: Scale) -> Result<Vec<(usize, usize)>> {
    let q = cs.q_usize(n)?;
    let k = cs.k(n) as usize;
    let l = cs.l(n) as usize;
    let sub1 = l * q;
    let sub2 = k * sub1;
    let mut out = Vec::new();
    for i in 0..q {
        match scale {
            Scale::Two => out.push((i * sub2, (i + 1) * sub2)),
            _ => {
                let lead = q - cs.j_small(n, i)?;
                for j in 0..k {
                    let a = i * sub2 + j * sub1;
                    match scale {
                        Scale::One => out.push((a, a + sub1)),
                        _ => out.push((a + lead, a + lead + (l - 1) * q)),
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Membership of the origin in the sets `E_n`, `E^0_n`, `E^1_n`, `E^2_n`.
/// `None` means the window does not decide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Maturity {
    pub level: usize,
    pub boundary: Option<bool>,
    pub power_edge: Option<bool>,
    pub one_edge: Option<bool>,
    pub two_edge: Option<bool>,
}

impl Maturity {
    /// The level is mature when the origin is in none of the sets.
    pub fn mature(&self) -> Option<bool> {
        if self.boundary? {
            return Some(false);
        }
        Some(!(self.power_edge? || self.one_edge? || self.two_edge?))
    }
}

fn near_edge(idx: usize, count: usize, eps: &BigRational) -> bool {
    let lim = eps * BigRational::from_integer(BigInt::from(count));
    let lo = BigRational::from_integer(BigInt::from(idx));
    let hi = BigRational::from_integer(BigInt::from(count - 1 - idx));
    lo < lim || hi < lim
}

/// Maturity of level `n` at the origin of a circular window, with edge fraction `eps`
/// (pass `1/l_n` for the default).
pub fn maturity(window: &SampleWindow, seq: &ConstructionSequence, n: usize, eps: &BigRational) -> Result<Maturity> {
    let cs = seq.coeffs();
    let undecided = Maturity { level: n, boundary: None, power_edge: None, one_edge: None, two_edge: None };
    let pd = principal_blocks(window, seq, n + 1)?;
    let Some(up) = pd.get(n + 1) else {
        if pd.get(n).is_none() && window.get(0).is_some_and(is_spacer) {
            // no principal n-block at all
            let q = seq.word_len_usize(n)? as i64;
            if window.start <= -q && window.end() >= q {
                return Ok(Maturity { boundary: Some(true), ..undecided });
            }
        }
        return Ok(undecided);
    };
    match seq.decode_step(n, up.r as usize)? {
        StepCoord::Spacer { .. } => Ok(Maturity {
            level: n,
            boundary: Some(true),
            power_edge: Some(false),
            one_edge: Some(false),
            two_edge: Some(false),
        }),
        StepCoord::Inside { i, j, t, .. } => Ok(Maturity {
            level: n,
            boundary: Some(false),
            power_edge: Some(near_edge(t, cs.l(n) as usize - 1, eps)),
            one_edge: Some(near_edge(j, cs.k(n) as usize, eps)),
            two_edge: Some(near_edge(i, cs.q_usize(n)?, eps)),
        }),
    }
}

/// `ρ_n = (p_n r_n mod q_n) / q_n`.
pub fn rotation_coordinate(cs: &CoefficientSystem, n: usize, r: i64) -> Result<BigRational> {
    if n > cs.levels() {
        return Err(Error::LevelOutOfRange { level: n, max: cs.levels() });
    }
    let q = BigInt::from(cs.q(n).clone());
    let num = (BigInt::from(cs.p(n).clone()) * BigInt::from(r)).modulo(&q);
    Ok(BigRational::new(num, q))
}

trait Modulo {
    fn modulo(&self, m: &BigInt) -> BigInt;
}

impl Modulo for BigInt {
    fn modulo(&self, m: &BigInt) -> BigInt {
        use num_integer::Integer;
        self.mod_floor(m)
    }
}

/// `d̄` distance: fraction of positions where the words differ.
pub fn dbar(u: &[Sym], v: &[Sym]) -> Result<BigRational> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { expected: u.len().to_string(), got: v.len().to_string() });
    }
    if u.is_empty() {
        return Ok(BigRational::zero());
    }
    let diff = u.iter().zip(v).filter(|(a, b)| a != b).count();
    Ok(BigRational::new(BigInt::from(diff), BigInt::from(u.len())))
}

/// `d̄` restricted to `[a, b)`.
pub fn dbar_on(u: &[Sym], v: &[Sym], a: usize, b: usize) -> Result<BigRational> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { expected: u.len().to_string(), got: v.len().to_string() });
    }
    if a > b || b > u.len() {
        return Err(Error::IndexOutOfRange { index: format!("[{a}, {b})"), limit: u.len().to_string() });
    }
    dbar(&u[a..b], &v[a..b])
}

/// Big-integer conversion helper.
pub fn to_usize(x: &BigUint) -> Result<usize> {
    x.to_usize().ok_or_else(|| Error::TooLong(x.to_string()))
}
