//! Finite-scale machinery around the natural map: the codes `Λ̄_n`, paired circular words
//! `(u, rev v)^c`, alignment, slippage and the transfer of joining cylinders.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functor::{boundary_factor, ratio, transfer_factor, CylinderTable, Direction, GeneticMarker};
use crate::report::Q;
use crate::statistics::{Distribution, Track};
use crate::words::{find_all, parse, principal_blocks, reverse_word, ConstructionSequence, Kind, SampleWindow, Sym, B};

/// Output of a stationary code at one position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Symbol(Sym),
    /// No block contains the position, so the code emits `b`.
    Default,
    /// The window does not determine the output.
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeOutput {
    pub start: i64,
    pub cells: Vec<Cell>,
}

impl CodeOutput {
    pub fn get(&self, pos: i64) -> Cell {
        if pos < self.start || pos >= self.start + self.cells.len() as i64 {
            return Cell::Undecided;
        }
        self.cells[(pos - self.start) as usize]
    }

    /// The longest decided stretch around the origin, with defaults written as `b`.
    pub fn decided_window(&self) -> Option<SampleWindow> {
        let origin = usize::try_from(-self.start).ok().filter(|&o| o < self.cells.len())?;
        let decided = |c: &Cell| *c != Cell::Undecided;
        if !decided(&self.cells[origin]) {
            return None;
        }
        let lo = (0..=origin).rev().take_while(|&i| decided(&self.cells[i])).last()?;
        let hi = (origin..self.cells.len()).take_while(|&i| decided(&self.cells[i])).last()?;
        let symbols = self.cells[lo..=hi]
            .iter()
            .map(|c| match c {
                Cell::Symbol(s) => *s,
                _ => B,
            })
            .collect();
        SampleWindow::new(self.start + lo as i64, symbols).ok()
    }
}

/// Apply the block-reflection code with offset `shift`: a position `k` in the block
/// `[a, a + q)` reads the window at `2a + q - 1 - shift - k`.
pub fn apply_code(window: &SampleWindow, blocks: &Track, shift: i64) -> CodeOutput {
    let q = blocks.block_len as i64;
    let cells = (window.start..window.end())
        .map(|k| {
            let owner = blocks.blocks.range(k - q + 1..=k).next_back().map(|(&a, _)| a);
            match owner {
                Some(a) => window.get(2 * a + q - 1 - shift - k).map_or(Cell::Undecided, Cell::Symbol),
                None if k - q + 1 >= window.start && k + q <= window.end() => Cell::Default,
                None => Cell::Undecided,
            }
        })
        .collect();
    CodeOutput { start: window.start, cells }
}

/// `Λ̄_n` on a window of a circular system whose level-`n` blocks are `blocks`.
pub fn lambda_code(seq: &ConstructionSequence, window: &SampleWindow, blocks: &Track) -> Result<CodeOutput> {
    let a = seq.coeffs().a_i64(blocks.level)?;
    Ok(apply_code(window, blocks, a))
}

/// The matching code on the reversed system, taking `rev K` back to `K`.
pub fn lambda_code_reversed(seq: &ConstructionSequence, window: &SampleWindow, blocks: &Track) -> Result<CodeOutput> {
    let a = seq.coeffs().a_i64(blocks.level)?;
    Ok(apply_code(window, blocks, -a))
}

/// Level-`n` blocks of a window found from content, optionally looking for reversed words.
/// Blocks cut by the window edge are not reported.
pub fn content_blocks(seq: &ConstructionSequence, window: &SampleWindow, n: usize, reversed: bool) -> Result<Track> {
    let len = seq.word_len_usize(n)?;
    let blocks = if !reversed {
        parse(window, seq, n)?.occurrences.into_iter().map(|o| (o.pos, o.index)).collect()
    } else {
        let patterns: Vec<Vec<u64>> =
            seq.words(n)?.iter().map(|w| reverse_word(w).into_iter().map(u64::from).collect()).collect();
        let text: Vec<u64> = window.symbols.iter().map(|&s| u64::from(s)).collect();
        let mut out = BTreeMap::new();
        let mut last_end = i64::MIN;
        for (p, idx) in find_all(&text, &patterns) {
            let pos = window.start + p as i64;
            if pos >= last_end {
                out.insert(pos, idx);
                last_end = pos + len as i64;
            }
        }
        out
    };
    Ok(Track { level: n, block_len: len, blocks })
}

/// Level-`n` blocks of the level-`m` word `idx` placed with the origin at offset `r`.
pub fn placed_blocks(seq: &ConstructionSequence, m: usize, idx: usize, n: usize, r: usize) -> Result<Track> {
    Ok(Track::structural(seq, m, idx, n)?.shifted(r as i64))
}

/// Positions of `[lo, hi)` where both outputs are symbols and differ, and where both are
/// symbols at all.
pub fn code_disagreement(a: &CodeOutput, b: &CodeOutput, lo: i64, hi: i64) -> (usize, usize) {
    let mut differ = 0;
    let mut compared = 0;
    for k in lo..hi {
        let (x, y) = (a.get(k), b.get(k));
        if x == Cell::Undecided || y == Cell::Undecided {
            continue;
        }
        compared += 1;
        if x != y {
            differ += 1;
        }
    }
    (differ, compared)
}

/// The pair `(u^c, sh^{A_m}(rev v^c))`: `u^c` on `[0, q_m)` and `rev v^c` on
/// `[-A_m, -A_m + q_m)`.
#[derive(Debug, Clone)]
pub struct PairedWord {
    pub level: usize,
    pub u_seq: Arc<ConstructionSequence>,
    pub u: usize,
    pub v_seq: Arc<ConstructionSequence>,
    pub v: usize,
}

/// An `n`-block of `u^c` and what faces it in the reversed word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Facing {
    pub pos: usize,
    pub u_word: usize,
    pub u_marker: Vec<usize>,
    /// The reversed `n`-block of `v^c` starting at `pos - A_n`, with its marker in `v^c`.
    pub v_word: Option<usize>,
    pub v_marker: Option<Vec<usize>>,
    /// No reversed `n`-block of `v^c` meets `[pos - A_n, pos - A_n + q_n)`.
    pub faces_boundary: bool,
}

impl PairedWord {
    pub fn new(
        u_seq: &Arc<ConstructionSequence>,
        u: usize,
        v_seq: &Arc<ConstructionSequence>,
        v: usize,
        level: usize,
    ) -> Result<Self> {
        if u_seq.kind() != Kind::Circular || v_seq.kind() != Kind::Circular {
            return Err(Error::Invalid("paired words need circular sequences".into()));
        }
        let (a, b) = (u_seq.coeffs(), v_seq.coeffs());
        if a.ks()[..level.min(a.levels())] != b.ks()[..level.min(b.levels())]
            || a.ls()[..level.min(a.levels())] != b.ls()[..level.min(b.levels())]
        {
            return Err(Error::Invalid("paired words need the same coefficients".into()));
        }
        u_seq.word_len_usize(level)?;
        if u >= u_seq.count(level) || v >= v_seq.count(level) {
            return Err(Error::IndexOutOfRange { index: format!("({u}, {v})"), limit: level.to_string() });
        }
        Ok(Self { level, u_seq: u_seq.clone(), u, v_seq: v_seq.clone(), v })
    }

    pub fn a_shift(&self, n: usize) -> Result<i64> {
        self.u_seq.coeffs().a_i64(n)
    }

    /// Frame interval of `rev v^c`.
    pub fn v_interval(&self) -> Result<(i64, i64)> {
        let q = self.u_seq.coeffs().q_usize(self.level)? as i64;
        let a = self.a_shift(self.level)?;
        Ok((-a, -a + q))
    }

    /// Frame positions of the reversed `n`-blocks of `v^c`, with word index and marker.
    pub fn reversed_v_blocks(&self, n: usize) -> Result<BTreeMap<i64, (usize, Vec<usize>)>> {
        let c = self.v_seq.coeffs();
        let (qm, qn) = (c.q_usize(self.level)? as i64, c.q_usize(n)? as i64);
        let base = -self.a_shift(self.level)?;
        Ok(self
            .v_seq
            .blocks(self.level, self.v, n)?
            .into_iter()
            .map(|b| (base + qm - b.pos as i64 - qn, (b.index, b.marker)))
            .collect())
    }

    /// Every `n`-block of `u^c` with what faces it.
    pub fn facings(&self, n: usize) -> Result<Vec<Facing>> {
        if n >= self.level {
            return Err(Error::Invalid(format!("level {n} is not below {}", self.level)));
        }
        let rev = self.reversed_v_blocks(n)?;
        let qn = self.u_seq.coeffs().q_usize(n)? as i64;
        let an = self.a_shift(n)?;
        Ok(self
            .u_seq
            .blocks(self.level, self.u, n)?
            .into_iter()
            .map(|b| {
                let at = b.pos as i64 - an;
                let hit = rev.get(&at);
                let faces_boundary = rev.range(at - qn + 1..at + qn).next().is_none();
                Facing {
                    pos: b.pos,
                    u_word: b.index,
                    u_marker: b.marker,
                    v_word: hit.map(|h| h.0),
                    v_marker: hit.map(|h| h.1.clone()),
                    faces_boundary,
                }
            })
            .collect())
    }

    /// `EmpDist_{n,n,A_n}((u, rev v)^c)` keyed by `(u', v')`.
    pub fn empdist(&self, n: usize) -> Result<Distribution> {
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for f in self.facings(n)? {
            if let Some(v) = f.v_word {
                *counts.entry(vec![f.u_word, v]).or_default() += 1;
            }
        }
        Ok(Distribution::from_counts(counts))
    }
}

/// `EmpDist(u, rev v)` on the odometer side: `n`-blocks of `u` against the reversed
/// `n`-blocks of `v`, with no shift.
pub fn odometer_pair_empdist(
    u_seq: &ConstructionSequence,
    u: usize,
    v_seq: &ConstructionSequence,
    v: usize,
    m: usize,
    n: usize,
) -> Result<Distribution> {
    if u_seq.kind() != Kind::Odometer || v_seq.kind() != Kind::Odometer {
        return Err(Error::Invalid("odometer pair needs odometer-based sequences".into()));
    }
    let (km, kn) = (u_seq.word_len_usize(m)?, u_seq.word_len_usize(n)?);
    let rev: BTreeMap<usize, usize> = v_seq.blocks(m, v, n)?.into_iter().map(|b| (km - b.pos - kn, b.index)).collect();
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    for b in u_seq.blocks(m, u, n)? {
        if let Some(&w) = rev.get(&b.pos) {
            *counts.entry(vec![b.index, w]).or_default() += 1;
        }
    }
    Ok(Distribution::from_counts(counts))
}

/// Componentwise `k_r - j_r - 1`.
pub fn conjugate(marker: &GeneticMarker, ks: &[u64]) -> Result<GeneticMarker> {
    marker.conjugate(ks)
}

fn all_conjugate(facings: &[Facing], ks: &[u64], n: usize) -> bool {
    facings.iter().all(|f| match &f.v_marker {
        Some(vm) => f.u_marker.iter().zip(vm).enumerate().all(|(r, (a, b))| a + b + 1 == ks[n + r] as usize),
        None => true,
    })
}

/// How the `n`-blocks of a level-`(n+1)` word line up against `sh^{-j_1}` of a reversed one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignReport {
    pub level: usize,
    pub aligned: usize,
    pub misaligned: usize,
    /// `2 k_n q_n`.
    pub misaligned_bound: usize,
    pub aligned_fraction: Q,
    /// `1 - 2 / (l_n - 1)`.
    pub fraction_bound: Q,
    /// Aligned count per argument slot.
    pub per_argument: Vec<usize>,
    pub conjugate: bool,
    pub misaligned_face_boundary: bool,
}

/// Alignment of the level-`(n+1)` word `w` with the reversed level-`(n+1)` word `other`.
pub fn align_count(seq: &Arc<ConstructionSequence>, w: usize, other: usize, n: usize) -> Result<AlignReport> {
    let pair = PairedWord::new(seq, w, seq, other, n + 1)?;
    let facings = pair.facings(n)?;
    let c = seq.coeffs();
    let (k, q, l) = (c.k(n) as usize, c.q_usize(n)?, c.l(n) as usize);
    let aligned = facings.iter().filter(|f| f.v_word.is_some()).count();
    let mut per_argument = vec![0; k];
    for f in facings.iter().filter(|f| f.v_word.is_some()) {
        per_argument[f.u_marker[0]] += 1;
    }
    let fraction_bound = if l > 1 {
        BigRational::one() - BigRational::new(2.into(), BigInt::from(l - 1))
    } else {
        BigRational::zero()
    };
    Ok(AlignReport {
        level: n,
        aligned,
        misaligned: facings.len() - aligned,
        misaligned_bound: 2 * k * q,
        aligned_fraction: ratio(aligned, facings.len()).into(),
        fraction_bound: fraction_bound.into(),
        per_argument,
        conjugate: all_conjugate(&facings, c.ks(), n),
        misaligned_face_boundary: facings.iter().all(|f| f.v_word.is_some() || f.faces_boundary),
    })
}

/// Slippage of `n`-blocks in a paired word, with the per-step ratios that should multiply up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlippageReport {
    pub n: usize,
    pub m: usize,
    pub slipped: Vec<usize>,
    pub blocks: usize,
    pub varpi: Q,
    /// `ϖ_i^{i+1}` for `i = n..m`.
    pub per_step: Vec<Q>,
    pub product_law: bool,
    /// `∏ (1 - 2/(l_i - 1))`.
    pub lower_bound: Q,
    pub bound_holds: bool,
    pub faces_boundary: bool,
    pub per_marker_equal: bool,
    pub conjugate: bool,
}

fn slip_ratio(facings: &[Facing]) -> BigRational {
    ratio(facings.iter().filter(|f| f.v_word.is_none()).count(), facings.len())
}

/// `ϖ_i^{i+1}` from the first words of level `i + 1`; slippage depends only on the coefficients.
pub fn step_slippage(seq: &Arc<ConstructionSequence>, i: usize) -> Result<BigRational> {
    let pair = PairedWord::new(seq, 0, seq, 0, i + 1)?;
    Ok(slip_ratio(&pair.facings(i)?))
}

pub fn slippage(pair: &PairedWord, n: usize) -> Result<SlippageReport> {
    let m = pair.level;
    let facings = pair.facings(n)?;
    let varpi = slip_ratio(&facings);
    let per_step: Vec<BigRational> = (n..m).map(|i| step_slippage(&pair.u_seq, i)).collect::<Result<_>>()?;
    let product: BigRational = per_step.iter().map(|w| BigRational::one() - w).product();
    let c = pair.u_seq.coeffs();
    let lower: BigRational = (n..m)
        .map(|i| {
            let l = c.l(i) as i64;
            if l > 1 {
                BigRational::one() - BigRational::new(2.into(), (l - 1).into())
            } else {
                BigRational::zero()
            }
        })
        .product();
    let mut per_marker: BTreeMap<&Vec<usize>, usize> = BTreeMap::new();
    for f in &facings {
        per_marker.entry(&f.u_marker).or_default();
        if f.v_word.is_none() {
            *per_marker.entry(&f.u_marker).or_default() += 1;
        }
    }
    let per_marker_equal = per_marker.values().collect::<BTreeSet<_>>().len() <= 1;
    let slipped: Vec<usize> = facings.iter().filter(|f| f.v_word.is_none()).map(|f| f.pos).collect();
    let one_minus = BigRational::one() - &varpi;
    Ok(SlippageReport {
        n,
        m,
        blocks: facings.len(),
        product_law: one_minus == product,
        bound_holds: one_minus >= lower,
        faces_boundary: facings.iter().all(|f| f.v_word.is_some() || f.faces_boundary),
        per_marker_equal,
        conjugate: all_conjugate(&facings, c.ks(), n),
        slipped,
        varpi: varpi.into(),
        per_step: per_step.into_iter().map(Q).collect(),
        lower_bound: lower.into(),
    })
}

/// `(K_n / q_n) ∏ (1 - 1/l_p) ∏ (1 - ϖ_i^{i+1})`, both products truncated at `horizon`.
pub fn joining_factor(seq: &Arc<ConstructionSequence>, n: usize, horizon: usize) -> Result<BigRational> {
    let mut f = transfer_factor(seq, n, horizon)?;
    for i in n..horizon {
        f *= BigRational::one() - step_slippage(seq, i)?;
    }
    Ok(f)
}

/// Transferred pair cylinders. Keys are `(u', v')` word indices; on the circular side they
/// name `(u', rev v')^c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoiningTransfer {
    pub level: usize,
    pub horizon: usize,
    pub factor: BigRational,
    pub table: BTreeMap<(usize, usize), BigRational>,
}

/// Move pair-cylinder weights between `ρ` and `ρ^c`. `Up` takes a probability table.
pub fn transfer_joining(
    seq: &Arc<ConstructionSequence>,
    n: usize,
    horizon: usize,
    table: &BTreeMap<(usize, usize), BigRational>,
    direction: Direction,
) -> Result<JoiningTransfer> {
    if horizon < n || horizon > seq.top() {
        return Err(Error::LevelOutOfRange { level: horizon, max: seq.top() });
    }
    let factor = joining_factor(seq, n, horizon)?;
    let expected = match direction {
        Direction::Up => BigRational::one(),
        Direction::Down => factor.clone(),
    };
    if table.values().any(|v| v < &BigRational::zero()) {
        return Err(Error::Invalid("negative weight".into()));
    }
    let total: BigRational = table.values().sum();
    if total != expected {
        return Err(Error::Invalid(format!("weights sum to {total}, expected {expected}")));
    }
    let table = table
        .iter()
        .map(|(k, v)| {
            let w = match direction {
                Direction::Up => v * &factor,
                Direction::Down => v / &factor,
            };
            (*k, w)
        })
        .collect();
    Ok(JoiningTransfer { level: n, horizon, factor, table })
}

/// The single-coordinate transfer, for comparison with `transfer_joining`.
pub fn measure_table(seq: &ConstructionSequence, n: usize, horizon: usize, table: &CylinderTable) -> Result<CylinderTable> {
    let f = transfer_factor(seq, n, horizon)?;
    Ok(table.iter().map(|(k, v)| (*k, v * &f)).collect())
}

/// Densities of marker-selected aligned pairs in a paired word against the closed forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairDensityReport {
    pub odometer_density: Q,
    pub circular_density: Q,
    pub formula: Q,
    pub holds: bool,
}

pub fn pair_density(pair: &PairedWord, n: usize, selected: &[GeneticMarker]) -> Result<PairDensityReport> {
    let set: BTreeSet<&Vec<usize>> = selected.iter().map(|g| &g.digits).collect();
    let m = pair.level;
    let c = pair.u_seq.coeffs();
    let ks = c.ks();
    let g: usize = ks[n..m].iter().map(|&k| k as usize).product();
    let d = ratio(set.len(), g);
    let ac = pair.facings(n)?.iter().filter(|f| f.v_word.is_some() && set.contains(&f.u_marker)).count();
    let circ = ratio(ac, c.q_usize(m)?);
    let odo = &d / BigRational::from_integer(c.odometer_len_usize(n)?.into());
    let mut formula = &d / BigRational::from_integer(c.q_usize(n)?.into()) * boundary_factor(&pair.u_seq, n, m);
    for i in n..m {
        formula *= BigRational::one() - step_slippage(&pair.u_seq, i)?;
    }
    let fourth = &odo * boundary_factor(&pair.u_seq, n, m) * ratio(c.odometer_len_usize(n)?, c.q_usize(n)?)
        * (n..m).map(|i| step_slippage(&pair.u_seq, i).map(|w| BigRational::one() - w)).product::<Result<BigRational>>()?;
    Ok(PairDensityReport {
        holds: circ == formula && circ == fourth,
        odometer_density: odo.into(),
        circular_density: circ.into(),
        formula: formula.into(),
    })
}

/// Placement of `rev v_N^c` in `t̂`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct THat {
    pub level: usize,
    /// Location of the origin in the principal block of the circle-factor window.
    pub r: i64,
    pub v_word: usize,
    pub window: SampleWindow,
}

/// Read `v_N^c` from the `v`-side window and `r_N` from the circle-factor window, then place
/// `rev v_N^c` on `[-r_N - A_N, -r_N - A_N + q_N)`.
pub fn t_hat_window(
    v_seq: &ConstructionSequence,
    v_window: &SampleWindow,
    circle: &ConstructionSequence,
    circle_window: &SampleWindow,
    level: usize,
) -> Result<THat> {
    let v = principal_blocks(v_window, v_seq, level)?
        .get(level)
        .ok_or_else(|| Error::Undecidable(format!("no principal {level}-block in the v-side window")))?;
    let r = principal_blocks(circle_window, circle, level)?
        .get(level)
        .ok_or_else(|| Error::Undecidable(format!("no principal {level}-block in the circle-factor window")))?
        .r;
    t_hat_place(v_seq, v.index, r, level)
}

/// Place `rev v^c` for the level-`level` word `v` given the circle-factor location `r`.
pub fn t_hat_place(v_seq: &ConstructionSequence, v: usize, r: i64, level: usize) -> Result<THat> {
    let a = v_seq.coeffs().a_i64(level)?;
    let word = reverse_word(&v_seq.word(level, v)?);
    let window = SampleWindow::new(-r - a, word)
        .map_err(|_| Error::Undecidable(format!("shifted level-{level} block misses the origin")))?;
    Ok(THat { level, r, v_word: v, window })
}
