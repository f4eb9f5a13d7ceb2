//! Matches between level-`n` subwords of level-`m` words under a shift, perfect matches,
//! the scale of a shift and match improvement.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::coeff::CoefficientSystem;
use crate::error::{Error, Result};
use crate::words::{Block, ConstructionSequence, Kind};

fn one() -> u64 {
    1
}

/// A pair of level-`m` words `(w_0, w_1)` with a natural-number weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub w0: usize,
    pub w1: usize,
    #[serde(default = "one")]
    pub weight: u64,
}

/// Target pairs of level-`n` words, searched inside weighted pairs of level-`m` words at shift `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchProblem {
    pub level: usize,
    pub sub_level: usize,
    pub contexts: Vec<Context>,
    pub pairs: Vec<(usize, usize)>,
    pub k: i64,
}

/// Scale rational weights to the smallest integer weights with the same proportions.
pub fn normalize_weights(weights: &[BigRational]) -> Result<Vec<u64>> {
    if weights.iter().any(|w| w.is_negative()) {
        return Err(Error::Invalid("negative weight".into()));
    }
    let lcm = weights.iter().fold(num_bigint::BigInt::from(1), |acc, w| acc.lcm(w.denom()));
    let ints: Vec<_> = weights.iter().map(|w| (w * BigRational::from(lcm.clone())).to_integer()).collect();
    let gcd = ints.iter().fold(num_bigint::BigInt::from(0), |acc, x| acc.gcd(x));
    ints.iter()
        .map(|x| {
            let x = if gcd == 0.into() { x.clone() } else { x / &gcd };
            x.to_u64().ok_or_else(|| Error::Invalid(format!("weight {x} too large")))
        })
        .collect()
}

impl MatchProblem {
    pub fn validate(&self, seq: &ConstructionSequence) -> Result<()> {
        if self.sub_level >= self.level {
            return Err(Error::Invalid(format!("sub-level {} must be below level {}", self.sub_level, self.level)));
        }
        if self.level > seq.top() {
            return Err(Error::LevelOutOfRange { level: self.level, max: seq.top() });
        }
        let words = seq.count(self.level);
        for (i, c) in self.contexts.iter().enumerate() {
            for w in [c.w0, c.w1] {
                if w >= words {
                    return Err(Error::IndexOutOfRange { index: format!("contexts[{i}] word {w}"), limit: words.to_string() });
                }
            }
        }
        let subs = seq.count(self.sub_level);
        for (i, &(u, v)) in self.pairs.iter().enumerate() {
            for w in [u, v] {
                if w >= subs {
                    return Err(Error::IndexOutOfRange { index: format!("pairs[{i}] word {w}"), limit: subs.to_string() });
                }
            }
        }
        seq.word_len_usize(self.level)?;
        Ok(())
    }

    /// The same problem with the roles of the two words exchanged and the shift negated.
    pub fn swapped(&self) -> Self {
        Self {
            level: self.level,
            sub_level: self.sub_level,
            contexts: self.contexts.iter().map(|c| Context { w0: c.w1, w1: c.w0, weight: c.weight }).collect(),
            pairs: self.pairs.iter().map(|&(u, v)| (v, u)).collect(),
            k: -self.k,
        }
    }

    pub fn with_k(&self, k: i64) -> Self {
        Self { k, ..self.clone() }
    }
}

/// One `k`-match: `u` at `pos` in `w_0` and `v` at `pos + k` in `w_1`, with their genetic markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KMatch {
    pub context: usize,
    pub pair: usize,
    pub pos: usize,
    pub u_marker: Vec<usize>,
    pub v_marker: Vec<usize>,
}

/// Position of the first occurrence of a marker, as a signed offset.
pub fn marker_offset(seq: &ConstructionSequence, n: usize, marker: &[usize]) -> Result<i64> {
    Ok(seq.first_occurrence(n, marker)? as i64)
}

/// The shift aligning all occurrences of marker `a` with those of marker `b`.
pub fn perfect_shift(seq: &ConstructionSequence, n: usize, a: &[usize], b: &[usize]) -> Result<i64> {
    Ok(marker_offset(seq, n, b)? - marker_offset(seq, n, a)?)
}

/// Block tables of the words named by a problem, reused across shifts.
pub struct MatchIndex<'a> {
    seq: &'a ConstructionSequence,
    problem: MatchProblem,
    len: usize,
    blocks: HashMap<usize, Vec<Block>>,
    slots: HashMap<usize, Vec<Option<u32>>>,
    offsets: HashMap<Vec<usize>, i64>,
}

impl<'a> MatchIndex<'a> {
    pub fn new(seq: &'a ConstructionSequence, problem: &MatchProblem) -> Result<Self> {
        problem.validate(seq)?;
        let (m, n) = (problem.level, problem.sub_level);
        let len = seq.word_len_usize(m)?;
        let mut blocks = HashMap::new();
        let mut slots = HashMap::new();
        let mut offsets = HashMap::new();
        for c in &problem.contexts {
            for w in [c.w0, c.w1] {
                if blocks.contains_key(&w) {
                    continue;
                }
                let bs = seq.blocks(m, w, n)?;
                let mut slot = vec![None; len];
                for (i, b) in bs.iter().enumerate() {
                    slot[b.pos] = Some(i as u32);
                    if !offsets.contains_key(&b.marker) {
                        offsets.insert(b.marker.clone(), marker_offset(seq, n, &b.marker)?);
                    }
                }
                blocks.insert(w, bs);
                slots.insert(w, slot);
            }
        }
        Ok(Self { seq, problem: problem.clone(), len, blocks, slots, offsets })
    }

    pub fn problem(&self) -> &MatchProblem {
        &self.problem
    }

    pub fn word_len(&self) -> usize {
        self.len
    }

    /// All `k`-matches of target pairs, by context, then position, then pair.
    pub fn matches(&self, k: i64) -> Vec<KMatch> {
        let mut by_u: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for (i, &(u, v)) in self.problem.pairs.iter().enumerate() {
            by_u.entry(u).or_default().push((i, v));
        }
        let mut out = Vec::new();
        for (ci, c) in self.problem.contexts.iter().enumerate() {
            let other = &self.blocks[&c.w1];
            let slot = &self.slots[&c.w1];
            for b in &self.blocks[&c.w0] {
                let Some(targets) = by_u.get(&b.index) else { continue };
                let at = b.pos as i64 + k;
                if at < 0 || at >= self.len as i64 {
                    continue;
                }
                let Some(j) = slot[at as usize] else { continue };
                let ob = &other[j as usize];
                for &(pair, v) in targets {
                    if ob.index == v {
                        out.push(KMatch {
                            context: ci,
                            pair,
                            pos: b.pos,
                            u_marker: b.marker.clone(),
                            v_marker: ob.marker.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    pub fn is_perfect_match(&self, m: &KMatch, k: i64) -> bool {
        self.offsets[&m.v_marker] - self.offsets[&m.u_marker] == k
    }

    /// Weighted number of `k`-matches.
    pub fn count(&self, k: i64) -> u128 {
        self.weighted(&self.matches(k))
    }

    fn weighted(&self, ms: &[KMatch]) -> u128 {
        ms.iter().map(|m| self.problem.contexts[m.context].weight as u128).sum()
    }

    /// Weighted count at `k` and the first imperfect `k`-match, if any.
    pub fn evaluate(&self, k: i64) -> (u128, Option<KMatch>) {
        let ms = self.matches(k);
        let bad = ms.iter().find(|m| !self.is_perfect_match(m, k)).cloned();
        (self.weighted(&ms), bad)
    }

    /// Perfectness of one target pair at shift `k`.
    pub fn is_perfect(&self, pair: usize, k: i64) -> PerfectVerdict {
        let ms: Vec<_> = self.matches(k).into_iter().filter(|m| m.pair == pair).collect();
        if ms.is_empty() {
            return PerfectVerdict {
                pair,
                k,
                matches: 0,
                perfect: false,
                markers: None,
                witness: None,
                reason: Some(format!("pair {pair} has no match at shift {k}")),
            };
        }
        let good = ms.iter().find(|m| self.is_perfect_match(m, k));
        let bad = ms.iter().find(|m| !self.is_perfect_match(m, k));
        PerfectVerdict {
            pair,
            k,
            matches: ms.len(),
            perfect: good.is_some(),
            markers: good.map(|m| (m.u_marker.clone(), m.v_marker.clone())),
            witness: bad.cloned(),
            reason: if good.is_some() { None } else { Some("no marker pair is aligned by this shift".into()) },
        }
    }
}

/// Whether a shift perfectly matches a target pair. `markers` names an aligned marker pair;
/// `witness` is a match at this shift that is not perfect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PerfectVerdict {
    pub pair: usize,
    pub k: i64,
    pub matches: usize,
    pub perfect: bool,
    pub markers: Option<(Vec<usize>, Vec<usize>)>,
    pub witness: Option<KMatch>,
    pub reason: Option<String>,
}

pub fn enumerate_matches(seq: &ConstructionSequence, problem: &MatchProblem) -> Result<Vec<KMatch>> {
    Ok(MatchIndex::new(seq, problem)?.matches(problem.k))
}

pub fn is_perfect(seq: &ConstructionSequence, problem: &MatchProblem, pair: usize, k: i64) -> Result<PerfectVerdict> {
    if pair >= problem.pairs.len() {
        return Err(Error::IndexOutOfRange { index: pair.to_string(), limit: problem.pairs.len().to_string() });
    }
    Ok(MatchIndex::new(seq, problem)?.is_perfect(pair, k))
}

/// Least level `M` with `k < q_M`.
pub fn scale_of(cs: &CoefficientSystem, k: u64) -> Result<usize> {
    let k = BigUint::from(k);
    (0..=cs.levels())
        .find(|&n| &k < cs.q(n))
        .ok_or(Error::LevelOutOfRange { level: cs.levels() + 1, max: cs.levels() })
}

fn digit_unit(cs: &CoefficientSystem, kind: Kind, r: usize) -> Result<i64> {
    let v = match kind {
        Kind::Circular => cs.l(r) as usize * cs.q_usize(r)?,
        Kind::Odometer => cs.odometer_len_usize(r)?,
    };
    Ok(v as i64)
}

/// Write `x` as `sum c_r u_r` over levels `n..m` with `|c_r| < k_r`, where `u_r = l_r q_r`
/// (circular) or `K_r` (odometer). The representation is unique when it exists.
pub fn balanced_digits(cs: &CoefficientSystem, kind: Kind, n: usize, m: usize, x: i64) -> Result<Option<Vec<i64>>> {
    let mut units = Vec::new();
    for r in n..m {
        units.push(digit_unit(cs, kind, r)?);
    }
    let mut reach = vec![0i64; units.len() + 1];
    for (i, u) in units.iter().enumerate() {
        reach[i + 1] = reach[i] + (cs.k(n + i) as i64 - 1) * u;
    }
    let mut rest = x;
    let mut digits = vec![0i64; units.len()];
    for i in (0..units.len()).rev() {
        let u = units[i];
        let k = cs.k(n + i) as i64;
        let lo = rest.div_euclid(u);
        let Some(c) = [lo, lo + 1].into_iter().find(|&c| c.abs() < k && (rest - c * u).abs() <= reach[i]) else {
            return Ok(None);
        };
        digits[i] = c;
        rest -= c * u;
    }
    Ok((rest == 0).then_some(digits))
}

fn all_markers(cs: &CoefficientSystem, n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for r in n..m {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..cs.k(r) as usize).map(move |j| {
                    let mut q = p.clone();
                    q.push(j);
                    q
                })
            })
            .collect();
    }
    out
}

/// Odometer shift corresponding to a circular perfect-match shift, with the check that both
/// shifts select the same marker pairs. On the odometer side a pair `(a, b)` counts when the
/// shift carries `a` onto `b` with `b_r >= a_r` at every level (a left match, no borrow).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Translation {
    pub circular_shift: i64,
    pub odometer_shift: i64,
    pub digits: Vec<i64>,
    pub marker_pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub checked: usize,
    pub agree: bool,
}

pub fn translate_match(seq: &ConstructionSequence, n: usize, m: usize, circular_shift: i64) -> Result<Translation> {
    let cs = seq.coeffs();
    if n >= m || m > cs.levels() {
        return Err(Error::Invalid(format!("levels {n} < {m} required within 0..={}", cs.levels())));
    }
    let circ = seq.with_kind(Kind::Circular);
    let odo = seq.with_kind(Kind::Odometer);
    let Some(digits) = balanced_digits(cs, Kind::Circular, n, m, circular_shift)? else {
        return Err(Error::Invalid(format!("shift {circular_shift} is not a perfect match of any marker pair")));
    };
    let mut odometer_shift = 0i64;
    for (i, c) in digits.iter().enumerate() {
        odometer_shift += c * digit_unit(cs, Kind::Odometer, n + i)?;
    }
    let markers = all_markers(cs, n, m);
    let mut circ_off = Vec::with_capacity(markers.len());
    let mut odo_off = Vec::with_capacity(markers.len());
    for mk in &markers {
        circ_off.push(marker_offset(&circ, n, mk)?);
        odo_off.push(marker_offset(&odo, n, mk)?);
    }
    let mut marker_pairs = Vec::new();
    let mut agree = true;
    let mut checked = 0;
    for (a, ma) in markers.iter().enumerate() {
        for (b, mb) in markers.iter().enumerate() {
            checked += 1;
            let c = circ_off[b] - circ_off[a] == circular_shift;
            let o = odo_off[b] - odo_off[a] == odometer_shift && mb.iter().zip(ma).all(|(y, x)| y >= x);
            agree &= c == o;
            if c {
                marker_pairs.push((ma.clone(), mb.clone()));
            }
        }
    }
    Ok(Translation { circular_shift, odometer_shift, digits, marker_pairs, checked, agree })
}

/// Candidate shift values for first occurrences of `(n, top)` markers, under two readings:
/// the lattice `{sum c_r l_r q_r}` taken as positions, and taken as differences from the
/// first occurrence of the all-zero marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpectrumReport {
    pub sub_level: usize,
    pub level: usize,
    pub lattice: Vec<i64>,
    pub first_occurrences: Vec<(Vec<usize>, i64)>,
    pub leading_offset: i64,
    pub as_positions: bool,
    pub as_differences: bool,
}

pub fn shift_spectrum(seq: &ConstructionSequence, n: usize, top: usize) -> Result<SpectrumReport> {
    let cs = seq.coeffs();
    if n > top || top > cs.levels() {
        return Err(Error::Invalid(format!("levels {n} <= {top} required within 0..={}", cs.levels())));
    }
    let circ = seq.with_kind(Kind::Circular);
    let mut lattice = BTreeSet::from([0i64]);
    for r in n..top {
        let u = digit_unit(cs, Kind::Circular, r)?;
        lattice = lattice.iter().flat_map(|&x| (0..cs.k(r) as i64).map(move |c| x + c * u)).collect();
    }
    let mut first: BTreeMap<Vec<usize>, i64> = BTreeMap::new();
    for b in circ.blocks(top, 0, n)? {
        first.entry(b.marker).or_insert(b.pos as i64);
    }
    let zero = vec![0usize; top - n];
    let base = *first.get(&zero).unwrap_or(&0);
    let positions: BTreeSet<i64> = first.values().copied().collect();
    let differences: BTreeSet<i64> = first.values().map(|p| p - base).collect();
    let mut leading_offset = 0i64;
    for r in n..top {
        leading_offset += cs.q_usize(r)? as i64;
    }
    Ok(SpectrumReport {
        sub_level: n,
        level: top,
        as_positions: positions == lattice,
        as_differences: differences == lattice,
        lattice: lattice.into_iter().collect(),
        first_occurrences: first.into_iter().collect(),
        leading_offset,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// The input shift already satisfies both postconditions.
    Fixed,
    /// Level-by-level census of marker digit differences.
    Census,
    /// Best candidate among perfect-shift lattice points near the input.
    Lattice,
    /// No candidate met both postconditions; the best attempt is reported.
    Unresolved,
}

/// Digit-difference weights at one level, and the digit kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelCensus {
    pub level: usize,
    pub weights: BTreeMap<i64, u128>,
    pub chosen: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Improvement {
    pub k: i64,
    pub k_prime: i64,
    pub count_before: u128,
    pub count_after: u128,
    pub all_perfect: bool,
    pub within_window: bool,
    pub route: Route,
    pub digits: Vec<i64>,
    pub census: Vec<LevelCensus>,
    pub candidates_checked: usize,
}

impl Improvement {
    pub fn holds(&self) -> bool {
        self.all_perfect && self.within_window && self.count_after >= self.count_before
    }
}

/// Move `k` to a nearby shift whose matches of the target pairs are all perfect without losing
/// weighted matches.
pub fn improve_match(seq: &ConstructionSequence, problem: &MatchProblem) -> Result<Improvement> {
    let index = MatchIndex::new(seq, problem)?;
    improve_with(&index)
}

pub fn improve_with(index: &MatchIndex) -> Result<Improvement> {
    let problem = index.problem();
    if problem.k < 0 {
        let swapped = MatchIndex::new(index.seq, &problem.swapped())?;
        let mut out = improve_with(&swapped)?;
        out.k = problem.k;
        out.k_prime = -out.k_prime;
        out.digits.iter_mut().for_each(|d| *d = -*d);
        for c in &mut out.census {
            c.chosen = -c.chosen;
            c.weights = c.weights.iter().map(|(d, w)| (-d, *w)).collect();
        }
        return Ok(out);
    }
    let seq = index.seq;
    let cs = seq.coeffs();
    let (m, n, k) = (problem.level, problem.sub_level, problem.k);
    let q_m = index.word_len() as i64;
    if k >= q_m {
        return Err(Error::Invalid(format!("shift {k} is not below q_{m} = {q_m}")));
    }
    let (before, bad) = index.evaluate(k);
    let digits_of = |x: i64| balanced_digits(cs, seq.kind(), n, m, x).map(|d| d.unwrap_or_default());
    let done = |k_prime: i64, after: u128, route, census, checked, digits| Improvement {
        k,
        k_prime,
        count_before: before,
        count_after: after,
        all_perfect: true,
        within_window: (k_prime - k).abs() < q_m,
        route,
        digits,
        census,
        candidates_checked: checked,
    };
    if bad.is_none() {
        return Ok(done(k, before, Route::Fixed, Vec::new(), 1, digits_of(k)?));
    }

    let matches = index.matches(k);
    let mut alive: Vec<&KMatch> = matches.iter().collect();
    let mut census = Vec::new();
    let mut digits = vec![0i64; m - n];
    for r in (0..m - n).rev() {
        let mut weights: BTreeMap<i64, u128> = BTreeMap::new();
        for mt in &alive {
            let d = mt.v_marker[r] as i64 - mt.u_marker[r] as i64;
            *weights.entry(d).or_default() += problem.contexts[mt.context].weight as u128;
        }
        let best = weights.values().copied().max().unwrap_or(0);
        let chosen = weights.iter().rev().find(|(_, &w)| w == best).map(|(&d, _)| d).unwrap_or(0);
        alive.retain(|mt| mt.v_marker[r] as i64 - mt.u_marker[r] as i64 == chosen);
        digits[r] = chosen;
        census.push(LevelCensus { level: n + r, weights, chosen });
    }
    let mut k_prime = 0i64;
    for (r, d) in digits.iter().enumerate() {
        k_prime += d * digit_unit(cs, seq.kind(), n + r)?;
    }
    let (after, bad) = index.evaluate(k_prime);
    if bad.is_none() && after >= before && (k_prime - k).abs() < q_m {
        return Ok(done(k_prime, after, Route::Census, census, 1, digits));
    }

    let mut lattice = vec![(0i64, Vec::new())];
    for r in n..m {
        let u = digit_unit(cs, seq.kind(), r)?;
        let kr = cs.k(r) as i64;
        lattice = lattice
            .into_iter()
            .flat_map(|(x, ds): (i64, Vec<i64>)| {
                (1 - kr..kr).map(move |c| {
                    let mut ds = ds.clone();
                    ds.push(c);
                    (x + c * u, ds)
                })
            })
            .collect();
    }
    let mut best: Option<(u128, i64, Vec<i64>)> = None;
    let mut checked = 0;
    for (x, ds) in lattice {
        if (x - k).abs() >= q_m {
            continue;
        }
        checked += 1;
        let (cnt, bad) = index.evaluate(x);
        if bad.is_some() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bc, bx, _)) => cnt > *bc || (cnt == *bc && ((x - k).abs(), x) < ((bx - k).abs(), *bx)),
        };
        if better {
            best = Some((cnt, x, ds));
        }
    }
    match best {
        Some((cnt, x, ds)) if cnt >= before => Ok(done(x, cnt, Route::Lattice, census, checked + 1, ds)),
        Some((cnt, x, ds)) => Ok(done(x, cnt, Route::Unresolved, census, checked + 1, ds)),
        None => {
            let mut out = done(k_prime, after, Route::Unresolved, census, checked + 1, digits);
            out.all_perfect = false;
            Ok(out)
        }
    }
}
