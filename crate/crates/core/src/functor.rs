//! The correspondence between odometer-based and circular construction sequences.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::Q;
use crate::words::{
    as_keys, check_unique_readability, principal_blocks, principal_blocks_anchored, ConstructionSequence, Kind,
    Principal, PrincipalData, ReadabilityReport, SampleWindow,
};

pub(crate) fn ratio(a: usize, b: usize) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

fn big_ratio(a: &num_bigint::BigUint, b: &num_bigint::BigUint) -> BigRational {
    BigRational::new(BigInt::from(a.clone()), BigInt::from(b.clone()))
}

/// An `(n, m)` genetic marker `<j_n, .., j_{m-1}>`, most junior level first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GeneticMarker {
    pub n: usize,
    pub digits: Vec<usize>,
}

impl GeneticMarker {
    pub fn new(n: usize, digits: Vec<usize>, ks: &[u64]) -> Result<Self> {
        for (r, &j) in digits.iter().enumerate() {
            let k = *ks.get(n + r).ok_or(Error::LevelOutOfRange { level: n + r, max: ks.len() })?;
            if j as u64 >= k {
                return Err(Error::IndexOutOfRange { index: j.to_string(), limit: k.to_string() });
            }
        }
        Ok(Self { n, digits })
    }

    pub fn m(&self) -> usize {
        self.n + self.digits.len()
    }

    /// All `(n, m)` markers in lexicographic order of the senior digits.
    pub fn all(n: usize, m: usize, ks: &[u64]) -> Vec<GeneticMarker> {
        let mut out = vec![Vec::new()];
        for r in n..m {
            out = out
                .into_iter()
                .flat_map(|d: Vec<usize>| {
                    (0..ks[r] as usize).map(move |j| {
                        let mut d = d.clone();
                        d.push(j);
                        d
                    })
                })
                .collect();
        }
        out.into_iter().map(|digits| GeneticMarker { n, digits }).collect()
    }

    /// Componentwise `k_r - j_r - 1`.
    pub fn conjugate(&self, ks: &[u64]) -> Result<GeneticMarker> {
        let mut digits = Vec::with_capacity(self.digits.len());
        for (r, &j) in self.digits.iter().enumerate() {
            let k = ks[self.n + r] as usize;
            if j >= k {
                return Err(Error::IndexOutOfRange { index: j.to_string(), limit: k.to_string() });
            }
            digits.push(k - j - 1);
        }
        Ok(GeneticMarker { n: self.n, digits })
    }

    /// Position in an odometer word: `Σ j_r K_r`.
    pub fn odometer_position(&self, seq: &ConstructionSequence) -> Result<usize> {
        let mut pos = 0;
        for (r, &j) in self.digits.iter().enumerate() {
            pos += j * seq.coeffs().odometer_len_usize(self.n + r)?;
        }
        Ok(pos)
    }
}

/// Number of `(n, m)` markers, `∏ k_i`.
pub fn marker_count(ks: &[u64], n: usize, m: usize) -> usize {
    ks[n..m].iter().map(|&k| k as usize).product()
}

/// Occurrences of one marker inside a circular level-`m` word, `∏ q_i (l_i - 1)`.
pub fn marker_multiplicity(seq: &ConstructionSequence, n: usize, m: usize) -> Result<usize> {
    let mut out = 1;
    for i in n..m {
        out *= seq.coeffs().q_usize(i)? * (seq.coeffs().l(i) as usize - 1);
    }
    Ok(out)
}

/// The marker of the level-`n` block starting at `pos` in the level-`m` word `idx`.
pub fn marker_of(seq: &ConstructionSequence, m: usize, idx: usize, n: usize, pos: usize) -> Result<GeneticMarker> {
    let (digits, _) = seq.marker_at(m, idx, n, pos)?;
    Ok(GeneticMarker { n, digits })
}

/// Start positions of the level-`n` blocks carrying `marker` in any level-`m` word of `seq`.
pub fn occurrences_of_marker(seq: &ConstructionSequence, marker: &GeneticMarker) -> Result<Vec<usize>> {
    let mut positions = vec![0usize];
    for (r, &j) in marker.digits.iter().enumerate() {
        let lvl = marker.n + r;
        let offs: Vec<usize> = seq.step_offsets(lvl)?.into_iter().filter(|&(_, a)| a == j).map(|(o, _)| o).collect();
        positions = offs.iter().flat_map(|&o| positions.iter().map(move |&p| p + o)).collect();
    }
    positions.sort_unstable();
    Ok(positions)
}

/// An odometer-based sequence and its circular counterpart, sharing preword indices so that
/// `c_n` is the identity on word indices.
#[derive(Debug, Clone)]
pub struct FunctorPair {
    pub odometer: Arc<ConstructionSequence>,
    pub circular: Arc<ConstructionSequence>,
    /// Content-level readability of each circular level `1..=top`.
    pub circular_readability: Vec<ReadabilityReport>,
    /// Readability of the prewords over the alphabet of lower-level indices.
    pub preword_readability: Vec<ReadabilityReport>,
}

fn preword_reports(seq: &ConstructionSequence) -> Vec<ReadabilityReport> {
    (0..seq.top())
        .map(|n| {
            let fam: Vec<Vec<u64>> =
                seq.prewords(n).iter().map(|t| t.iter().map(|&x| x as u64).collect()).collect();
            check_unique_readability(&fam)
        })
        .collect()
}

fn circular_reports(seq: &ConstructionSequence) -> Result<Vec<ReadabilityReport>> {
    (1..=seq.top())
        .map(|n| {
            if !seq.is_materializable(n) {
                return Ok(ReadabilityReport { readable: true, witness: None });
            }
            let fam: Vec<Vec<u64>> = seq.words(n)?.iter().map(|w| as_keys(w)).collect();
            Ok(check_unique_readability(&fam))
        })
        .collect()
}

impl FunctorPair {
    fn build(odometer: ConstructionSequence, circular: ConstructionSequence, strict: bool) -> Result<Self> {
        let preword_readability = preword_reports(&circular);
        let circular_readability = circular_reports(&circular)?;
        if strict {
            if let Some((n, rep)) = preword_readability.iter().enumerate().find(|(_, r)| !r.readable) {
                return Err(Error::Readability(format!("prewords of level {} ({:?})", n + 1, rep.witness)));
            }
        }
        Ok(Self {
            odometer: Arc::new(odometer),
            circular: Arc::new(circular),
            circular_readability,
            preword_readability,
        })
    }

    /// `F`: odometer-based sequence to circular sequence. With `strict`, prewords that are not
    /// uniquely readable are rejected.
    pub fn lift(odometer: &ConstructionSequence, strict: bool) -> Result<Self> {
        if odometer.kind() != Kind::Odometer {
            return Err(Error::Invalid("lift expects an odometer-based sequence".into()));
        }
        Self::build(odometer.with_kind(Kind::Odometer), odometer.with_kind(Kind::Circular), strict)
    }

    /// `F^{-1}`: circular sequence back to its odometer-based sequence.
    pub fn drop(circular: &ConstructionSequence, strict: bool) -> Result<Self> {
        if circular.kind() != Kind::Circular {
            return Err(Error::Invalid("drop expects a circular sequence".into()));
        }
        Self::build(circular.with_kind(Kind::Odometer), circular.with_kind(Kind::Circular), strict)
    }

    /// `c_n` on word indices.
    pub fn c(&self, n: usize, idx: usize) -> Result<usize> {
        if idx >= self.odometer.count(n) {
            return Err(Error::IndexOutOfRange { index: idx.to_string(), limit: self.odometer.count(n).to_string() });
        }
        Ok(idx)
    }

    /// `c_n^{-1}` on word indices.
    pub fn c_inv(&self, n: usize, idx: usize) -> Result<usize> {
        if idx >= self.circular.count(n) {
            return Err(Error::IndexOutOfRange { index: idx.to_string(), limit: self.circular.count(n).to_string() });
        }
        Ok(idx)
    }

    pub fn fully_readable(&self) -> bool {
        self.circular_readability.iter().all(|r| r.readable)
    }
}

/// Exact densities of marker-selected block starts in an odometer word and its circular image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DensityReport {
    pub n: usize,
    pub m: usize,
    pub selected: usize,
    pub markers: usize,
    pub d: Q,
    pub odometer_density: Q,
    pub circular_density: Q,
    pub odometer_formula: Q,
    pub circular_formula: Q,
    /// `(|A^c| / q_m) K_m / |S*|`, the quantity squeezed between `K^L_n` and `K^U_n`.
    pub normalized: Q,
    pub identities_hold: bool,
}

/// `∏_{p=n}^{m-1} (1 - 1/l_p)`.
pub fn boundary_factor(seq: &ConstructionSequence, n: usize, m: usize) -> BigRational {
    (n..m).fold(BigRational::one(), |acc, p| {
        let l = seq.coeffs().l(p) as usize;
        acc * ratio(l - 1, l)
    })
}

/// Scan densities of `A` (odometer) and `A^c` (circular) for the word `idx` at level `m`.
pub fn density_report(
    pair: &FunctorPair,
    m: usize,
    idx: usize,
    n: usize,
    selected: &[GeneticMarker],
) -> Result<DensityReport> {
    let odo = &pair.odometer;
    let circ = &pair.circular;
    let ks = circ.coeffs().ks();
    let set: std::collections::BTreeSet<&Vec<usize>> = selected.iter().map(|g| &g.digits).collect();
    for g in selected {
        if g.n != n || g.m() != m {
            return Err(Error::Invalid(format!("marker {g:?} is not an ({n},{m}) marker")));
        }
    }
    let a = odo.blocks(m, idx, n)?.iter().filter(|b| set.contains(&b.marker)).count();
    let ac = circ.blocks(m, idx, n)?.iter().filter(|b| set.contains(&b.marker)).count();
    let g = marker_count(ks, n, m);
    let d = ratio(set.len(), g);
    let km = odo.coeffs().odometer_len_usize(m)?;
    let qm = circ.coeffs().q_usize(m)?;
    let kn = odo.coeffs().odometer_len_usize(n)?;
    let qn = circ.coeffs().q_usize(n)?;
    let dm = ratio(a, km);
    let dmc = ratio(ac, qm);
    let second = &d / BigRational::from_integer(kn.into());
    let bf = boundary_factor(circ, n, m);
    let first = &d / BigRational::from_integer(qn.into()) * &bf;
    let third = (&dmc / &bf) * ratio(qn, kn);
    let fourth = &dm * &bf * ratio(kn, qn);
    let identities_hold = dm == second && dmc == first && dm == third && dmc == fourth;
    let normalized = if set.is_empty() {
        BigRational::zero()
    } else {
        &dmc * BigRational::from_integer(km.into()) / BigRational::from_integer(set.len().into())
    };
    Ok(DensityReport {
        n,
        m,
        selected: set.len(),
        markers: g,
        d: d.into(),
        odometer_density: dm.into(),
        circular_density: dmc.into(),
        odometer_formula: second.into(),
        circular_formula: first.into(),
        normalized: normalized.into(),
        identities_hold,
    })
}

/// Direction of a transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// Cylinder weights indexed by word index.
pub type CylinderTable = BTreeMap<usize, BigRational>;

/// A transferred table with the factor used. The factor truncates the boundary product at the
/// horizon level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer {
    pub level: usize,
    pub horizon: usize,
    pub factor: BigRational,
    pub table: CylinderTable,
}

fn check_table(table: &CylinderTable, total: &BigRational, count: usize) -> Result<()> {
    if let Some((k, v)) = table.iter().find(|(k, v)| **k >= count || v < &&BigRational::zero()) {
        return Err(Error::Invalid(format!("entry {k} -> {v} is not a valid weight")));
    }
    let sum: BigRational = table.values().sum();
    if &sum != total {
        return Err(Error::Invalid(format!("weights sum to {sum}, expected {total}")));
    }
    Ok(())
}

/// The factor `(K_n / q_n) ∏_{p=n}^{horizon-1} (1 - 1/l_p)`.
pub fn transfer_factor(seq: &ConstructionSequence, n: usize, horizon: usize) -> Result<BigRational> {
    let c = seq.coeffs();
    Ok(big_ratio(c.odometer_len(n), c.q(n)) * boundary_factor(seq, n, horizon))
}

/// Move cylinder weights on level-`n` words between the two sides. `Up` takes a probability
/// vector and scales it by the transfer factor; `Down` inverts that.
pub fn transfer_measure(
    pair: &FunctorPair,
    n: usize,
    horizon: usize,
    table: &CylinderTable,
    direction: Direction,
) -> Result<Transfer> {
    if horizon < n || horizon > pair.circular.top() {
        return Err(Error::LevelOutOfRange { level: horizon, max: pair.circular.top() });
    }
    let factor = transfer_factor(&pair.circular, n, horizon)?;
    let count = pair.circular.count(n);
    let table = match direction {
        Direction::Up => {
            check_table(table, &BigRational::one(), count)?;
            table.iter().map(|(&k, v)| (pair.c(n, k).unwrap(), v * &factor)).collect()
        }
        Direction::Down => {
            check_table(table, &factor, count)?;
            table.iter().map(|(&k, v)| (pair.c_inv(n, k).unwrap(), v / &factor)).collect()
        }
    };
    Ok(Transfer { level: n, horizon, factor, table })
}

/// Build circular principal data from odometer principal data (the finite `TU` map).
pub fn tu(pair: &FunctorPair, odo: &PrincipalData) -> Result<PrincipalData> {
    let top = odo.levels.len().checked_sub(1).ok_or_else(|| Error::Invalid("empty principal data".into()))?;
    let c = pair.circular.coeffs();
    let mut levels = Vec::with_capacity(top + 1);
    let first = odo.get(0).ok_or_else(|| Error::Undecidable("principal 0-block missing".into()))?;
    levels.push(Some(Principal { r: 0, index: pair.c(0, first.index)? }));
    let mut rc = 0i64;
    for n in 0..top {
        let lo = odo.get(n).ok_or_else(|| Error::Undecidable(format!("principal {n}-block missing")))?;
        let hi = odo.get(n + 1).ok_or_else(|| Error::Undecidable(format!("principal {}-block missing", n + 1)))?;
        let kn = c.odometer_len_usize(n)? as i64;
        let diff = hi.r - lo.r;
        if diff < 0 || diff % kn != 0 {
            return Err(Error::Invalid(format!("incoherent odometer locations at level {n}")));
        }
        let j = (diff / kn) as usize;
        if pair.odometer.prewords(n)[hi.index][j] != lo.index {
            return Err(Error::Invalid(format!("level-{n} principal word is not slot {j} of its parent")));
        }
        rc += pair.circular.first_occurrence(n, &[j])? as i64;
        levels.push(Some(Principal { r: rc, index: pair.c(n + 1, hi.index)? }));
    }
    Ok(PrincipalData { levels })
}

/// Build odometer principal data from circular principal data (the finite `UT` map).
pub fn ut(pair: &FunctorPair, circ: &PrincipalData) -> Result<PrincipalData> {
    let top = circ.levels.len().checked_sub(1).ok_or_else(|| Error::Invalid("empty principal data".into()))?;
    let c = pair.odometer.coeffs();
    let mut levels = Vec::with_capacity(top + 1);
    let first = circ.get(0).ok_or_else(|| Error::Undecidable("principal 0-block missing".into()))?;
    levels.push(Some(Principal { r: 0, index: pair.c_inv(0, first.index)? }));
    let mut r = 0i64;
    for n in 0..top {
        let lo = circ.get(n).ok_or_else(|| Error::Undecidable(format!("principal {n}-block missing")))?;
        let hi = circ.get(n + 1).ok_or_else(|| Error::Undecidable(format!("principal {}-block missing", n + 1)))?;
        let pos = hi.r - lo.r;
        if pos < 0 {
            return Err(Error::Invalid(format!("incoherent circular locations at level {n}")));
        }
        let (digits, word) = pair.circular.marker_at(n + 1, hi.index, n, pos as usize)?;
        if word != lo.index {
            return Err(Error::Invalid(format!("level-{n} principal word disagrees with its parent")));
        }
        r += (digits[0] * c.odometer_len_usize(n)?) as i64;
        levels.push(Some(Principal { r, index: pair.c_inv(n + 1, hi.index)? }));
    }
    Ok(PrincipalData { levels })
}

/// `TU` on windows: read the odometer window's principal data up to `top` (given the start
/// `anchor` of its level-`top` block) and return the circular level-`top` word around `r^c_top`.
pub fn tu_window(
    pair: &FunctorPair,
    window: &SampleWindow,
    anchor: i64,
    top: usize,
) -> Result<(SampleWindow, PrincipalData)> {
    let odo = principal_blocks_anchored(window, &pair.odometer, top, anchor)?;
    let circ = tu(pair, &odo)?;
    let p = circ.get(top).expect("tu fills every level");
    let word = pair.circular.word(top, p.index)?;
    Ok((SampleWindow::around(&word, p.r as usize)?, circ))
}

/// `UT` on windows: parse the circular window up to `top` and return the odometer
/// level-`top` word around `r_top`.
pub fn ut_window(pair: &FunctorPair, window: &SampleWindow, top: usize) -> Result<(SampleWindow, PrincipalData)> {
    let circ = principal_blocks(window, &pair.circular, top)?;
    let odo = ut(pair, &circ)?;
    let p = odo.get(top).expect("ut fills every level");
    let word = pair.odometer.word(top, p.index)?;
    Ok((SampleWindow::around(&word, p.r as usize)?, odo))
}
