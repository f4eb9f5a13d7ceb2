//! Empirical distributions of words and shifted tuples, and finite-range checks of
//! genericity, ergodicity and relative independence.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::Q;
use crate::words::{is_spacer, parse, parse_anchored, ConstructionSequence, Kind, SampleWindow, Sym};

/// Rational masses on tuples of word indices. An empty distribution stands for an empty
/// occurrence set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Distribution {
    pub masses: BTreeMap<Vec<usize>, BigRational>,
}

impl Distribution {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Normalize nonnegative counts.
    pub fn from_counts<N: Into<BigInt> + Clone>(counts: impl IntoIterator<Item = (Vec<usize>, N)>) -> Self {
        let counts: Vec<(Vec<usize>, BigInt)> =
            counts.into_iter().map(|(k, c)| (k, c.into())).filter(|(_, c)| !c.is_zero()).collect();
        let total: BigInt = counts.iter().map(|(_, c)| c).sum();
        if total.is_zero() {
            return Self::empty();
        }
        let mut masses = BTreeMap::new();
        for (k, c) in counts {
            *masses.entry(k).or_insert_with(BigRational::zero) += BigRational::new(c, total.clone());
        }
        Self { masses }
    }

    /// Rendered keys mapped to rendered masses.
    pub fn table(&self, key: impl Fn(&[usize]) -> String, mass: impl Fn(&BigRational) -> String) -> BTreeMap<String, String> {
        self.masses.iter().map(|(k, v)| (key(k), mass(v))).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total(&self) -> BigRational {
        self.masses.values().sum()
    }

    pub fn get(&self, key: &[usize]) -> BigRational {
        self.masses.get(key).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Total variation: half the L1 distance over the union of supports.
    pub fn tv(&self, other: &Distribution) -> BigRational {
        let keys: BTreeSet<&Vec<usize>> = self.masses.keys().chain(other.masses.keys()).collect();
        let sum: BigRational = keys.into_iter().map(|k| (self.get(k) - other.get(k)).abs()).sum();
        sum / BigRational::from_integer(2.into())
    }

    /// Keys concatenated, masses multiplied.
    pub fn product(&self, other: &Distribution) -> Distribution {
        let mut masses = BTreeMap::new();
        for (a, x) in &self.masses {
            for (b, y) in &other.masses {
                let mut k = a.clone();
                k.extend_from_slice(b);
                masses.insert(k, x * y);
            }
        }
        Distribution { masses }
    }

    /// Image under a key map, summing collisions.
    pub fn map_keys(&self, f: impl Fn(&[usize]) -> Vec<usize>) -> Distribution {
        let mut masses: BTreeMap<Vec<usize>, BigRational> = BTreeMap::new();
        for (k, v) in &self.masses {
            *masses.entry(f(k)).or_insert_with(BigRational::zero) += v;
        }
        Distribution { masses }
    }

    /// Weighted sum of distributions.
    pub fn weighted_sum<'a>(parts: impl IntoIterator<Item = (&'a BigRational, &'a Distribution)>) -> Distribution {
        let mut masses: BTreeMap<Vec<usize>, BigRational> = BTreeMap::new();
        for (w, d) in parts {
            for (k, v) in &d.masses {
                *masses.entry(k.clone()).or_insert_with(BigRational::zero) += w * v;
            }
        }
        masses.retain(|_, v| !v.is_zero());
        Distribution { masses }
    }
}

/// Counts of each level-`k` word among the level-`k` blocks of the level-`m` word `idx`.
pub fn word_counts(seq: &ConstructionSequence, m: usize, idx: usize, k: usize) -> Result<BTreeMap<usize, BigUint>> {
    if k > m || m > seq.top() {
        return Err(Error::LevelOutOfRange { level: k.max(m), max: seq.top() });
    }
    if idx >= seq.count(m) {
        return Err(Error::IndexOutOfRange { index: idx.to_string(), limit: seq.count(m).to_string() });
    }
    // counts[i] for level `lvl` words, built bottom-up from level k
    let mut table: Vec<BTreeMap<usize, BigUint>> =
        (0..seq.count(k)).map(|i| BTreeMap::from([(i, BigUint::one())])).collect();
    for lvl in k..m {
        let mult = match seq.kind() {
            Kind::Odometer => BigUint::one(),
            Kind::Circular => seq.coeffs().q(lvl) * BigUint::from(seq.coeffs().l(lvl) - 1),
        };
        table = seq
            .prewords(lvl)
            .iter()
            .map(|t| {
                let mut acc: BTreeMap<usize, BigUint> = BTreeMap::new();
                for &j in t {
                    for (w, c) in &table[j] {
                        *acc.entry(*w).or_default() += c * &mult;
                    }
                }
                acc
            })
            .collect();
    }
    Ok(table.swap_remove(idx))
}

/// `EmpDist_k` of the level-`m` word `idx`, from the construction.
pub fn empdist(seq: &ConstructionSequence, m: usize, idx: usize, k: usize) -> Result<Distribution> {
    if k >= m {
        return Err(Error::Invalid(format!("sub-level {k} must be below level {m}")));
    }
    let counts = word_counts(seq, m, idx, k)?;
    Ok(Distribution::from_counts(counts.into_iter().map(|(w, c)| (vec![w], BigInt::from(c)))))
}

/// `EmpDist_k` of arbitrary content, parsed into level-`k` words. Odometer content is read
/// from position 0; circular content may only leave spacers unparsed.
pub fn empdist_content(seq: &ConstructionSequence, word: &[Sym], k: usize) -> Result<Distribution> {
    let track = Track::parsed(seq, word, k)?;
    Ok(Distribution::from_counts(track.blocks.values().map(|&i| (vec![i], 1))))
}

/// Level-`n` blocks of a word placed in a common frame. A word at frame shift `s` is read as
/// `sh^s(v)`: its own position `p` sits at frame position `p - s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Track {
    pub level: usize,
    pub block_len: usize,
    pub blocks: BTreeMap<i64, usize>,
}

impl Track {
    /// From the construction of the level-`m` word `idx`.
    pub fn structural(seq: &ConstructionSequence, m: usize, idx: usize, n: usize) -> Result<Self> {
        let blocks = seq.blocks(m, idx, n)?.into_iter().map(|b| (b.pos as i64, b.index)).collect();
        Ok(Self { level: n, block_len: seq.word_len_usize(n)?, blocks })
    }

    /// From content. Fails if anything other than spacers is left uncovered.
    pub fn parsed(seq: &ConstructionSequence, word: &[Sym], n: usize) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::Invalid("empty word".into()));
        }
        let window = SampleWindow::new(0, word.to_vec())?;
        let parsed = match seq.kind() {
            Kind::Circular => parse(&window, seq, n)?,
            Kind::Odometer => parse_anchored(&window, seq, n, 0)?,
        };
        for &(a, b) in &parsed.uncovered {
            if (a..b).any(|p| !is_spacer(word[p as usize])) {
                return Err(Error::Invalid(format!("content at [{a}, {b}) does not parse into level-{n} words")));
            }
        }
        let blocks = parsed.occurrences.iter().map(|o| (o.pos, o.index)).collect();
        Ok(Self { level: n, block_len: seq.word_len_usize(n)?, blocks })
    }

    /// Each symbol as a block of length one, keyed by its code.
    pub fn symbols(word: &[Sym]) -> Self {
        let blocks = word.iter().enumerate().filter(|(_, s)| !is_spacer(**s)).map(|(i, &s)| (i as i64, s as usize)).collect();
        Self { level: 0, block_len: 1, blocks }
    }

    /// Apply `sh^s`.
    pub fn shifted(&self, s: i64) -> Self {
        Self {
            level: self.level,
            block_len: self.block_len,
            blocks: self.blocks.iter().map(|(&p, &i)| (p - s, i)).collect(),
        }
    }

    pub fn frequency(&self, key: usize) -> BigRational {
        if self.blocks.is_empty() {
            return BigRational::zero();
        }
        let hits = self.blocks.values().filter(|&&i| i == key).count();
        BigRational::new(hits.into(), self.blocks.len().into())
    }
}

/// Joint counts anchored at the blocks of `anchor` (optionally only those carrying
/// `condition`). Each counted track must have a block at the anchor position plus its offset.
/// Keys are the anchor word (when unconditioned) followed by the counted words.
pub fn joint(anchor: &Track, condition: Option<usize>, counted: &[(&Track, i64)]) -> Distribution {
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    'outer: for (&x, &a) in &anchor.blocks {
        if condition.is_some_and(|c| c != a) {
            continue;
        }
        let mut key = Vec::with_capacity(counted.len() + 1);
        if condition.is_none() {
            key.push(a);
        }
        for (t, off) in counted {
            match t.blocks.get(&(x + off)) {
                Some(&i) => key.push(i),
                None => continue 'outer,
            }
        }
        *counts.entry(key).or_default() += 1;
    }
    Distribution::from_counts(counts)
}

/// `EmpDist_{n,n',s'}(w, sh^s(v))`: pairs `(w', v')` with `w'` a block of `w` at `x` and `v'`
/// a block of `sh^s(v)` at `x + s'`. The shift `s` is applied to `v` here.
pub fn empdist_pair(w: &Track, v: &Track, s: i64, rel: i64) -> Distribution {
    joint(w, None, &[(&v.shifted(s), rel)])
}

/// `EmpDist_{n,s'}(w, sh^s(v) | w*)`: distribution of `v'` over blocks of `w` carrying `w*`.
pub fn empdist_conditional(w: &Track, condition: usize, v: &Track, s: i64, rel: i64) -> Distribution {
    joint(w, Some(condition), &[(&v.shifted(s), rel)])
}

/// Conditional distribution of a tuple of tracks at offsets relative to the conditioning
/// track. All tracks are taken as already placed in the common frame.
pub fn empdist_conditional_multi(condition_track: &Track, condition: usize, counted: &[(&Track, i64)]) -> Distribution {
    joint(condition_track, Some(condition), counted)
}

/// Largest divergence found for one sub-level, with the pair of chain positions attaining it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub sub_level: usize,
    pub eps: Q,
    pub max: Q,
    pub between: Option<(usize, usize)>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenericReport {
    pub generic: bool,
    /// Levels of the chain actually compared.
    pub range: Vec<usize>,
    pub table: Vec<Divergence>,
}

/// Finite-range genericity of a chain of words `(level, index)`: for each sub-level `k` with
/// tolerance `eps`, every two chain words above `k` have `EmpDist_k` within `eps`.
pub fn is_generic(
    seq: &ConstructionSequence,
    chain: &[(usize, usize)],
    schedule: &[(usize, BigRational)],
) -> Result<GenericReport> {
    let mut table = Vec::new();
    for (k, eps) in schedule {
        let above: Vec<(usize, Distribution)> = chain
            .iter()
            .filter(|(m, _)| m > k)
            .map(|&(m, i)| empdist(seq, m, i, *k).map(|d| (m, d)))
            .collect::<Result<_>>()?;
        let mut max = BigRational::zero();
        let mut between = None;
        for a in 0..above.len() {
            for b in a + 1..above.len() {
                let d = above[a].1.tv(&above[b].1);
                if d > max || between.is_none() {
                    max = d;
                    between = Some((above[a].0, above[b].0));
                }
            }
        }
        let ok = max < *eps;
        table.push(Divergence { sub_level: *k, eps: eps.clone().into(), max: max.into(), between, ok });
    }
    Ok(GenericReport {
        generic: table.iter().all(|d| d.ok),
        range: chain.iter().map(|c| c.0).collect(),
        table,
    })
}

/// Index set for one chain word in an ergodicity witness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErgodicChoice {
    pub level: usize,
    /// Level-`n_0` words whose blocks form `I`.
    pub words: Vec<usize>,
    pub fraction: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErgodicReport {
    pub ergodic: bool,
    pub n0: Option<usize>,
    pub m0: Option<usize>,
    pub choices: Vec<ErgodicChoice>,
    pub range: Vec<usize>,
}

/// Heaviest set of word indices with pairwise divergence `< eps`. Exhaustive up to 16
/// candidates, otherwise the heaviest ball of radius `eps / 2`.
fn heaviest_cluster(dists: &[(usize, Distribution)], weight: &BTreeMap<usize, BigRational>, eps: &BigRational) -> Vec<usize> {
    let n = dists.len();
    let close = |a: usize, b: usize| dists[a].1.tv(&dists[b].1) < *eps;
    let w = |set: &[usize]| -> BigRational { set.iter().map(|&i| weight[&dists[i].0].clone()).sum() };
    let mut best: Vec<usize> = Vec::new();
    if n <= 16 {
        let adj: Vec<Vec<bool>> = (0..n).map(|a| (0..n).map(|b| a == b || close(a, b)).collect()).collect();
        for mask in 1u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            if set.iter().all(|&a| set.iter().all(|&b| adj[a][b])) && w(&set) > w(&best) {
                best = set;
            }
        }
    } else {
        let half = eps / BigRational::from_integer(2.into());
        for c in 0..n {
            let set: Vec<usize> = (0..n).filter(|&i| dists[c].1.tv(&dists[i].1) < half).collect();
            if w(&set) > w(&best) {
                best = set;
            }
        }
    }
    best.into_iter().map(|i| dists[i].0).collect()
}

/// Finite-range ergodicity of a chain at sub-level `k`: find `n_0 > k` such that in every
/// chain word of level above `n_0`, a `(1 - eps)` fraction of the `n_0`-blocks have pairwise
/// `EmpDist_k` within `eps`.
pub fn is_ergodic_sequence(
    seq: &ConstructionSequence,
    chain: &[(usize, usize)],
    k: usize,
    eps: &BigRational,
) -> Result<ErgodicReport> {
    let range: Vec<usize> = chain.iter().map(|c| c.0).collect();
    let top = range.iter().copied().max().unwrap_or(0);
    let floor = BigRational::one() - eps;
    for n0 in k + 1..top {
        let dists: Vec<(usize, Distribution)> =
            (0..seq.count(n0)).map(|i| empdist(seq, n0, i, k).map(|d| (i, d))).collect::<Result<_>>()?;
        let mut choices = Vec::new();
        let mut ok = true;
        for &(m, idx) in chain.iter().filter(|(m, _)| *m > n0) {
            let counts = word_counts(seq, m, idx, n0)?;
            let total: BigUint = counts.values().sum();
            let weight: BTreeMap<usize, BigRational> = (0..seq.count(n0))
                .map(|i| {
                    let c = counts.get(&i).cloned().unwrap_or_default();
                    (i, BigRational::new(c.into(), total.clone().into()))
                })
                .collect();
            let present: Vec<(usize, Distribution)> =
                dists.iter().filter(|(i, _)| !weight[i].is_zero()).cloned().collect();
            let words = heaviest_cluster(&present, &weight, eps);
            let fraction: BigRational = words.iter().map(|i| weight[i].clone()).sum();
            ok &= fraction > floor;
            choices.push(ErgodicChoice { level: m, words, fraction: fraction.into() });
        }
        if ok && !choices.is_empty() {
            let m0 = choices.iter().map(|c| c.level).min();
            return Ok(ErgodicReport { ergodic: true, n0: Some(n0), m0, choices, range });
        }
    }
    Ok(ErgodicReport { ergodic: false, n0: None, m0: None, choices: Vec::new(), range })
}

/// One term `(u_n, v_n, w_n, s_n, t_n)` of a triple sequence, as tracks: `u` and `w` at the
/// counted level, `v` at the conditioning level, each already placed with its frame shift.
#[derive(Debug, Clone)]
pub struct RelindTerm {
    pub u: Track,
    pub v: Track,
    pub w: Track,
}

impl RelindTerm {
    /// Place `v` at `sh^{s_n}` and `w` at `sh^{t_n}` relative to `u`.
    pub fn new(u: Track, v: Track, w: Track, s_n: i64, t_n: i64) -> Self {
        Self { u, v: v.shifted(s_n), w: w.shifted(t_n) }
    }

    /// Divergence between the conditional triple and the product of the two conditional
    /// pairs, or `None` when no conditioning occurrence sees both counted blocks.
    pub fn divergence(&self, condition: usize, s: i64, star: i64) -> Option<BigRational> {
        let triple = joint(&self.v, Some(condition), &[(&self.u, s), (&self.w, s + star)]);
        if triple.is_empty() {
            return None;
        }
        let left = joint(&self.v, Some(condition), &[(&self.u, s)]);
        let right = joint(&self.v, Some(condition), &[(&self.w, s + star)]);
        Some(triple.tv(&left.product(&right)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoodWord {
    pub word: usize,
    pub offsets: Vec<i64>,
}

/// `(G, I_v)` certificate for the relative-independence hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelindCertificate {
    pub conditioning_level: usize,
    pub span: usize,
    pub good: Vec<GoodWord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelindReport {
    pub pass: bool,
    pub certificate: RelindCertificate,
    /// Mass of `G` in each term's conditioning word.
    pub good_mass: Vec<Q>,
    pub max_divergence: Q,
    pub vacuous_offsets: usize,
}

fn good_mass(term: &RelindTerm, good: &[GoodWord]) -> BigRational {
    good.iter().map(|g| term.v.frequency(g.word)).sum()
}

/// Check the hypothesis over the supplied terms: an offset `s in [0, span)` belongs to `I_v`
/// when the triple/product divergence is `< eps` for every term and every `s*` in `stars`;
/// `v` is good when `|I_v| > (1 - eps) span`; the check passes when the good words carry
/// mass `> 1 - eps` in every term. Offsets where no conditioning occurrence sees both counted
/// blocks impose no constraint and are counted as vacuous.
pub fn check_relind(terms: &[RelindTerm], eps: &BigRational, stars: &[i64], span: usize) -> Result<RelindReport> {
    let first = terms.first().ok_or_else(|| Error::Invalid("no terms".into()))?;
    let level = first.v.level;
    if terms.iter().any(|t| t.v.level != level || t.u.level != first.u.level || t.w.level != first.w.level) {
        return Err(Error::Invalid("terms mix levels".into()));
    }
    let words: BTreeSet<usize> = terms.iter().flat_map(|t| t.v.blocks.values().copied()).collect();
    let floor = BigRational::one() - eps;
    let mut good = Vec::new();
    let mut max = BigRational::zero();
    let mut vacuous = 0;
    for &v in &words {
        let mut offsets = Vec::new();
        for s in 0..span as i64 {
            let mut ok = true;
            let mut seen = false;
            for t in terms {
                for &star in stars {
                    if let Some(d) = t.divergence(v, s, star) {
                        seen = true;
                        ok &= d < *eps;
                        if d > max {
                            max = d;
                        }
                    }
                }
            }
            if !seen {
                vacuous += 1;
            }
            if ok {
                offsets.push(s);
            }
        }
        if BigRational::new(offsets.len().into(), span.into()) > floor {
            good.push(GoodWord { word: v, offsets });
        }
    }
    let masses: Vec<BigRational> = terms.iter().map(|t| good_mass(t, &good)).collect();
    let pass = masses.iter().all(|m| *m > floor);
    Ok(RelindReport {
        pass,
        certificate: RelindCertificate { conditioning_level: level, span, good },
        good_mass: masses.into_iter().map(Q).collect(),
        max_divergence: max.into(),
        vacuous_offsets: vacuous,
    })
}

/// Re-run the counts on a certificate's `(G, I_v)` only.
pub fn verify_relind(terms: &[RelindTerm], eps: &BigRational, stars: &[i64], cert: &RelindCertificate) -> bool {
    let floor = BigRational::one() - eps;
    let sizes_ok = cert.good.iter().all(|g| BigRational::new(g.offsets.len().into(), cert.span.into()) > floor);
    let counts_ok = cert.good.iter().all(|g| {
        g.offsets.iter().all(|&s| {
            terms.iter().all(|t| stars.iter().all(|&star| t.divergence(g.word, s, star).is_none_or(|d| d < *eps)))
        })
    });
    sizes_ok && counts_ok && terms.iter().all(|t| good_mass(t, &cert.good) > floor)
}

/// Words of one level with probability weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedWordFamily {
    pub level: usize,
    pub entries: Vec<(usize, BigRational)>,
}

impl WeightedWordFamily {
    pub fn new(level: usize, entries: Vec<(usize, BigRational)>) -> Result<Self> {
        if entries.iter().any(|(_, w)| w.is_negative()) {
            return Err(Error::Invalid("negative weight".into()));
        }
        let total: BigRational = entries.iter().map(|(_, w)| w).sum();
        if !total.is_one() {
            return Err(Error::Invalid(format!("weights sum to {total}")));
        }
        Ok(Self { level, entries })
    }
}

/// `Σ α(p) EmpDist_k(w^p)`.
pub fn mixture_empdist(seq: &ConstructionSequence, fam: &WeightedWordFamily, k: usize) -> Result<Distribution> {
    let parts: Vec<(BigRational, Distribution)> = fam
        .entries
        .iter()
        .map(|(i, w)| empdist(seq, fam.level, *i, k).map(|d| (w.clone(), d)))
        .collect::<Result<_>>()?;
    Ok(Distribution::weighted_sum(parts.iter().map(|(w, d)| (w, d))))
}
