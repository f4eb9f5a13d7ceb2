//! Construction sequences, the circular operator and structural addressing.

use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::symbols::{Alphabet, Sym, B, E};
use crate::coeff::CoefficientSystem;
use crate::error::{Error, Result};

/// Default materialization cap in symbols.
pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Odometer,
    Circular,
}

/// The serialized form of a construction sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceDoc {
    pub alphabet: u32,
    pub k: Vec<u64>,
    pub l: Vec<u64>,
    pub prewords: Vec<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
}

/// Apply the circular operator `C_n` to materialized arguments.
///
/// The output is `∏_{i<q} ∏_{j<k} b^{q-j_i} w_j^{l-1} e^{j_i}`.
pub fn circular_op(cs: &CoefficientSystem, n: usize, args: &[&[Sym]]) -> Result<Vec<Sym>> {
    if n >= cs.levels() {
        return Err(Error::LevelOutOfRange { level: n, max: cs.levels().saturating_sub(1) });
    }
    let k = cs.k(n) as usize;
    let l = cs.l(n) as usize;
    if args.len() != k {
        return Err(Error::Arity { expected: k, got: args.len() });
    }
    let q = cs.q_usize(n)?;
    if let Some(bad) = args.iter().find(|a| a.len() != q) {
        return Err(Error::LengthMismatch { expected: q.to_string(), got: bad.len().to_string() });
    }
    let total = cs.q_usize(n + 1)?;
    let mut out = Vec::with_capacity(total);
    for i in 0..q {
        let ji = cs.j_small(n, i)?;
        for w in args {
            out.extend(std::iter::repeat(B).take(q - ji));
            for _ in 0..l - 1 {
                out.extend_from_slice(w);
            }
            out.extend(std::iter::repeat(E).take(ji));
        }
    }
    Ok(out)
}

/// The closed form for the reverse of `C_n(w_0, .., w_{k-1})`, built from the reversed arguments:
/// `∏_{i<q} ∏_{j<k} e^{q-j_{i+1}} rev(w_{k-j-1})^{l-1} b^{j_{i+1}}`, where the last factor
/// takes `j_q = q` so that the word ends with the reversed leading `b^q`.
pub fn reverse_closed_form(cs: &CoefficientSystem, n: usize, args: &[&[Sym]]) -> Result<Vec<Sym>> {
    let k = cs.k(n) as usize;
    if args.len() != k {
        return Err(Error::Arity { expected: k, got: args.len() });
    }
    let l = cs.l(n) as usize;
    let q = cs.q_usize(n)?;
    let reversed: Vec<Vec<Sym>> = args.iter().map(|a| a.iter().rev().copied().collect()).collect();
    let mut out = Vec::with_capacity(cs.q_usize(n + 1)?);
    for i in 0..q {
        let jn = if i + 1 == q { q } else { cs.j_small(n, i + 1)? };
        for j in 0..k {
            out.extend(std::iter::repeat(E).take(q - jn));
            for _ in 0..l - 1 {
                out.extend_from_slice(&reversed[k - j - 1]);
            }
            out.extend(std::iter::repeat(B).take(jn));
        }
    }
    Ok(out)
}

/// A level-`n` block inside a longer word: start position, word index and genetic marker
/// (most junior level first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub pos: usize,
    pub index: usize,
    pub marker: Vec<usize>,
}

/// One location inside a level-`(n+1)` circular word, decoded against `C_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepCoord {
    /// A spacer symbol, with the 2-subsection `i` and 1-subsection `j` it sits in.
    Spacer { i: usize, j: usize, sym: Sym },
    /// Inside copy `t` of argument `j` of 2-subsection `i`, at `offset`.
    Inside { i: usize, j: usize, t: usize, offset: usize },
}

/// Leveled word families generated from prewords.
#[derive(Debug)]
pub struct ConstructionSequence {
    kind: Kind,
    coeffs: CoefficientSystem,
    alphabet: Alphabet,
    prewords: Vec<Vec<Vec<usize>>>,
    cap: usize,
    cache: Vec<OnceLock<Vec<Arc<[Sym]>>>>,
}

impl ConstructionSequence {
    /// Build and validate. `prewords[n]` lists the level-`(n+1)` words as `k_n`-tuples of
    /// level-`n` indices; level-0 words are the base symbols.
    pub fn new(kind: Kind, coeffs: CoefficientSystem, alphabet: u32, prewords: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let alphabet = Alphabet::new(alphabet)?;
        if prewords.len() > coeffs.levels() {
            return Err(Error::Document(format!(
                "{} preword levels but only {} coefficient levels",
                prewords.len(),
                coeffs.levels()
            )));
        }
        let mut count = alphabet.size as usize;
        for (n, level) in prewords.iter().enumerate() {
            if level.is_empty() {
                return Err(Error::Document(format!("prewords[{n}] is empty")));
            }
            for (w, tuple) in level.iter().enumerate() {
                if tuple.len() != coeffs.k(n) as usize {
                    return Err(Error::Document(format!(
                        "prewords[{n}][{w}] has {} entries, expected k_{n} = {}",
                        tuple.len(),
                        coeffs.k(n)
                    )));
                }
                if let Some(&bad) = tuple.iter().find(|&&x| x >= count) {
                    return Err(Error::Document(format!(
                        "prewords[{n}][{w}] refers to word {bad} but level {n} has {count} words"
                    )));
                }
            }
            count = level.len();
        }
        let cache = (0..=prewords.len()).map(|_| OnceLock::new()).collect();
        Ok(Self { kind, coeffs, alphabet, prewords, cap: DEFAULT_CAP, cache })
    }

    pub fn from_doc(doc: &SequenceDoc, kind: Kind) -> Result<Self> {
        let levels = doc.prewords.len();
        let coeffs = CoefficientSystem::derive(&doc.k, &doc.l, levels)?;
        Self::new(kind, coeffs, doc.alphabet, doc.prewords.clone())
    }

    pub fn to_doc(&self) -> SequenceDoc {
        SequenceDoc {
            alphabet: self.alphabet.size,
            k: self.coeffs.ks().to_vec(),
            l: self.coeffs.ls().to_vec(),
            prewords: self.prewords.clone(),
            kind: Some(self.kind),
        }
    }

    /// Same prewords, other kind.
    pub fn with_kind(&self, kind: Kind) -> Self {
        let mut s = Self::new(kind, self.coeffs.clone(), self.alphabet.size, self.prewords.clone())
            .expect("already validated");
        s.cap = self.cap;
        s
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self.cache = (0..=self.prewords.len()).map(|_| OnceLock::new()).collect();
        self
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn coeffs(&self) -> &CoefficientSystem {
        &self.coeffs
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Highest level with words.
    pub fn top(&self) -> usize {
        self.prewords.len()
    }

    pub fn prewords(&self, n: usize) -> &[Vec<usize>] {
        &self.prewords[n]
    }

    /// Number of words at level `n`.
    pub fn count(&self, n: usize) -> usize {
        if n == 0 {
            self.alphabet.size as usize
        } else {
            self.prewords[n - 1].len()
        }
    }

    fn check(&self, n: usize, idx: usize) -> Result<()> {
        if n > self.top() {
            return Err(Error::LevelOutOfRange { level: n, max: self.top() });
        }
        if idx >= self.count(n) {
            return Err(Error::IndexOutOfRange { index: idx.to_string(), limit: self.count(n).to_string() });
        }
        Ok(())
    }

    /// Length of level-`n` words: `q_n` (circular) or `K_n` (odometer).
    pub fn word_len(&self, n: usize) -> &BigUint {
        match self.kind {
            Kind::Circular => self.coeffs.q(n),
            Kind::Odometer => self.coeffs.odometer_len(n),
        }
    }

    pub fn word_len_usize(&self, n: usize) -> Result<usize> {
        match self.kind {
            Kind::Circular => self.coeffs.q_usize(n),
            Kind::Odometer => self.coeffs.odometer_len_usize(n),
        }
    }

    pub fn is_materializable(&self, n: usize) -> bool {
        self.word_len(n).to_usize().is_some_and(|len| len <= self.cap)
    }

    /// All materialized words of level `n`.
    pub fn words(&self, n: usize) -> Result<&[Arc<[Sym]>]> {
        if n > self.top() {
            return Err(Error::LevelOutOfRange { level: n, max: self.top() });
        }
        if !self.is_materializable(n) {
            return Err(Error::TooLong(self.word_len(n).to_string()));
        }
        if let Some(ws) = self.cache[n].get() {
            return Ok(ws);
        }
        let built: Vec<Arc<[Sym]>> = if n == 0 {
            (0..self.alphabet.size).map(|s| Arc::from(vec![s])).collect()
        } else {
            let lower = self.words(n - 1)?;
            let mut out = Vec::with_capacity(self.count(n));
            for tuple in &self.prewords[n - 1] {
                let args: Vec<&[Sym]> = tuple.iter().map(|&i| &*lower[i]).collect();
                let w = match self.kind {
                    Kind::Circular => circular_op(&self.coeffs, n - 1, &args)?,
                    Kind::Odometer => args.concat(),
                };
                out.push(Arc::from(w));
            }
            out
        };
        let _ = self.cache[n].set(built);
        Ok(self.cache[n].get().expect("just set"))
    }

    pub fn word(&self, n: usize, idx: usize) -> Result<Arc<[Sym]>> {
        self.check(n, idx)?;
        Ok(self.words(n)?[idx].clone())
    }

    /// Decode a position of a level-`(n+1)` circular word against `C_n`.
    pub fn decode_step(&self, n: usize, pos: usize) -> Result<StepCoord> {
        let cs = &self.coeffs;
        let q = cs.q_usize(n)?;
        let k = cs.k(n) as usize;
        let l = cs.l(n) as usize;
        let sub1 = l * q;
        let sub2 = k * sub1;
        if pos >= q * sub2 {
            return Err(Error::IndexOutOfRange { index: pos.to_string(), limit: (q * sub2).to_string() });
        }
        let i = pos / sub2;
        let r = pos % sub2;
        let j = r / sub1;
        let r = r % sub1;
        let lead = q - cs.j_small(n, i)?;
        if r < lead {
            return Ok(StepCoord::Spacer { i, j, sym: B });
        }
        let r = r - lead;
        if r >= (l - 1) * q {
            return Ok(StepCoord::Spacer { i, j, sym: E });
        }
        Ok(StepCoord::Inside { i, j, t: r / q, offset: r % q })
    }

    /// Start positions and argument slots of the level-`n` blocks of a level-`(n+1)` word.
    pub fn step_offsets(&self, n: usize) -> Result<Vec<(usize, usize)>> {
        let cs = &self.coeffs;
        let k = cs.k(n) as usize;
        match self.kind {
            Kind::Odometer => {
                let len = cs.odometer_len_usize(n)?;
                Ok((0..k).map(|j| (j * len, j)).collect())
            }
            Kind::Circular => {
                let q = cs.q_usize(n)?;
                let l = cs.l(n) as usize;
                let mut out = Vec::with_capacity(q * k * (l - 1));
                for i in 0..q {
                    let lead = q - cs.j_small(n, i)?;
                    for j in 0..k {
                        for t in 0..l - 1 {
                            out.push((i * k * l * q + j * l * q + lead + t * q, j));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// All level-`n` blocks of the level-`m` word `idx`, in position order.
    pub fn blocks(&self, m: usize, idx: usize, n: usize) -> Result<Vec<Block>> {
        self.check(m, idx)?;
        if n > m {
            return Err(Error::Invalid(format!("sub-level {n} above level {m}")));
        }
        self.word_len_usize(m)?;
        let mut cur = vec![Block { pos: 0, index: idx, marker: Vec::new() }];
        for s in (n..m).rev() {
            let offs = self.step_offsets(s)?;
            let mut next = Vec::with_capacity(cur.len() * offs.len());
            for b in &cur {
                let tuple = &self.prewords[s][b.index];
                for &(off, j) in &offs {
                    let mut marker = Vec::with_capacity(b.marker.len() + 1);
                    marker.push(j);
                    marker.extend_from_slice(&b.marker);
                    next.push(Block { pos: b.pos + off, index: tuple[j], marker });
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Position of the first occurrence of an `(n, n + marker.len())` marker.
    pub fn first_occurrence(&self, n: usize, marker: &[usize]) -> Result<usize> {
        let cs = &self.coeffs;
        let mut pos = 0usize;
        for (r, &j) in marker.iter().enumerate() {
            let lvl = n + r;
            pos += match self.kind {
                Kind::Odometer => j * cs.odometer_len_usize(lvl)?,
                Kind::Circular => {
                    let q = cs.q_usize(lvl)?;
                    q + j * cs.l(lvl) as usize * q
                }
            };
        }
        Ok(pos)
    }

    /// Genetic marker of the level-`n` block starting at `pos` in the level-`m` word `idx`.
    pub fn marker_at(&self, m: usize, idx: usize, n: usize, pos: usize) -> Result<(Vec<usize>, usize)> {
        self.check(m, idx)?;
        let mut marker = Vec::with_capacity(m - n);
        let mut p = pos;
        let mut word = idx;
        for s in (n..m).rev() {
            let j = match self.kind {
                Kind::Odometer => {
                    let len = self.coeffs.odometer_len_usize(s)?;
                    let j = p / len;
                    if j >= self.coeffs.k(s) as usize {
                        return Err(Error::NotAnOccurrence(pos.to_string()));
                    }
                    p %= len;
                    j
                }
                Kind::Circular => match self.decode_step(s, p)? {
                    StepCoord::Spacer { .. } => return Err(Error::NotAnOccurrence(pos.to_string())),
                    StepCoord::Inside { j, offset, .. } => {
                        p = offset;
                        j
                    }
                },
            };
            word = self.prewords[s][word][j];
            marker.push(j);
        }
        if p != 0 {
            return Err(Error::NotAnOccurrence(pos.to_string()));
        }
        marker.reverse();
        Ok((marker, word))
    }

    /// Symbol at `pos` of the level-`n` word `idx`, descending lazily through the construction.
    pub fn symbol_at(&self, n: usize, idx: usize, pos: &BigUint) -> Result<Sym> {
        self.check(n, idx)?;
        if pos >= self.word_len(n) {
            return Err(Error::IndexOutOfRange { index: pos.to_string(), limit: self.word_len(n).to_string() });
        }
        let cs = &self.coeffs;
        let mut level = n;
        let mut word = idx;
        let mut pos = pos.clone();
        while level > 0 {
            if self.is_materializable(level) {
                if let Some(ws) = self.cache[level].get() {
                    return Ok(ws[word][pos.to_usize().expect("fits")]);
                }
            }
            let s = level - 1;
            let (j, next) = match self.kind {
                Kind::Odometer => {
                    let (j, r) = pos.div_rem(cs.odometer_len(s));
                    (j.to_usize().expect("j < k"), r)
                }
                Kind::Circular => {
                    let q = cs.q(s);
                    let sub1 = q * cs.l(s);
                    let sub2 = &sub1 * cs.k(s);
                    let (i, r) = pos.div_rem(&sub2);
                    let (j, r) = r.div_rem(&sub1);
                    let lead = q - cs.j_index(s, &i)?;
                    if r < lead {
                        return Ok(B);
                    }
                    let r = r - lead;
                    if r >= q * (cs.l(s) - 1) {
                        return Ok(E);
                    }
                    (j.to_usize().expect("j < k"), r % q)
                }
            };
            word = self.prewords[s][word][j];
            pos = next;
            level = s;
        }
        debug_assert!(pos.is_zero());
        Ok(word as Sym)
    }
}

/// A word given explicitly or as a lazy handle into a construction sequence.
#[derive(Debug, Clone)]
pub enum WordRef {
    Explicit(Arc<[Sym]>),
    Lazy { seq: Arc<ConstructionSequence>, level: usize, index: usize },
    Reversed(Box<WordRef>),
}

impl WordRef {
    pub fn explicit(word: Vec<Sym>) -> Self {
        WordRef::Explicit(Arc::from(word))
    }

    pub fn lazy(seq: &Arc<ConstructionSequence>, level: usize, index: usize) -> Result<Self> {
        seq.check(level, index)?;
        Ok(WordRef::Lazy { seq: seq.clone(), level, index })
    }

    pub fn len(&self) -> BigUint {
        match self {
            WordRef::Explicit(w) => BigUint::from(w.len()),
            WordRef::Lazy { seq, level, .. } => seq.word_len(*level).clone(),
            WordRef::Reversed(inner) => inner.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len().is_zero()
    }

    pub fn symbol_at(&self, pos: &BigUint) -> Result<Sym> {
        match self {
            WordRef::Explicit(w) => pos
                .to_usize()
                .and_then(|p| w.get(p).copied())
                .ok_or_else(|| Error::IndexOutOfRange { index: pos.to_string(), limit: w.len().to_string() }),
            WordRef::Lazy { seq, level, index } => seq.symbol_at(*level, *index, pos),
            WordRef::Reversed(inner) => {
                let len = inner.len();
                if pos >= &len {
                    return Err(Error::IndexOutOfRange { index: pos.to_string(), limit: len.to_string() });
                }
                inner.symbol_at(&(len - 1u32 - pos))
            }
        }
    }

    /// Materialize, subject to the sequence's cap.
    pub fn materialize(&self) -> Result<Arc<[Sym]>> {
        match self {
            WordRef::Explicit(w) => Ok(w.clone()),
            WordRef::Lazy { seq, level, index } => seq.word(*level, *index),
            WordRef::Reversed(inner) => Ok(Arc::from(reverse_word(&inner.materialize()?))),
        }
    }

    /// The reversed word; reversing twice returns the original handle.
    pub fn reversed(self) -> Self {
        match self {
            WordRef::Reversed(inner) => *inner,
            other => WordRef::Reversed(Box::new(other)),
        }
    }
}

/// Literal reversal.
pub fn reverse_word(word: &[Sym]) -> Vec<Sym> {
    word.iter().rev().copied().collect()
}
