//! Exact arithmetic for circular coefficient sequences.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// The coefficient sequence `<k_n, l_n>` together with the quantities derived from it.
///
/// All per-level vectors are indexed by level `0..=levels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientSystem {
    k: Vec<u64>,
    l: Vec<u64>,
    q: Vec<BigUint>,
    p: Vec<BigUint>,
    p_inv: Vec<BigUint>,
    odometer_len: Vec<BigUint>,
    a: Vec<BigInt>,
}

/// Inverse of `a` modulo `m` via the extended Euclidean algorithm.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    if m.is_one() {
        return Some(BigUint::zero());
    }
    let a = BigInt::from(a.clone());
    let m = BigInt::from(m.clone());
    let eg = a.extended_gcd(&m);
    if !eg.gcd.is_one() {
        return None;
    }
    eg.x.mod_floor(&m).to_biguint()
}

impl CoefficientSystem {
    /// Derive levels `0..=levels` from the first `levels` entries of `k` and `l`.
    pub fn derive(k: &[u64], l: &[u64], levels: usize) -> Result<Self> {
        for (index, &value) in k.iter().enumerate() {
            if value < 2 {
                return Err(Error::BadCoefficient { which: "k", index, value });
            }
        }
        for (index, &value) in l.iter().enumerate() {
            if value < 2 {
                return Err(Error::BadCoefficient { which: "l", index, value });
            }
        }
        let max = k.len().min(l.len());
        if levels > max {
            return Err(Error::LevelOutOfRange { level: levels, max });
        }
        let k = k[..levels].to_vec();
        let l = l[..levels].to_vec();
        let mut q = vec![BigUint::one()];
        let mut p = vec![BigUint::zero()];
        let mut p_inv = vec![BigUint::zero()];
        let mut odometer_len = vec![BigUint::one()];
        let mut a = vec![BigInt::zero()];
        for n in 0..levels {
            let kl = BigUint::from(k[n]) * BigUint::from(l[n]);
            let qn = &q[n];
            let next_q = &kl * qn * qn;
            let next_p = &p[n] * qn * &kl + 1u32;
            let next_inv = mod_inverse(&next_p, &next_q)
                .ok_or_else(|| Error::Invalid(format!("p_{} not invertible", n + 1)))?;
            let next_a = &a[n] - BigInt::from(p_inv[n].clone());
            odometer_len.push(&odometer_len[n] * k[n]);
            q.push(next_q);
            p.push(next_p);
            p_inv.push(next_inv);
            a.push(next_a);
        }
        Ok(Self { k, l, q, p, p_inv, odometer_len, a })
    }

    /// Highest derived level.
    pub fn levels(&self) -> usize {
        self.k.len()
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.levels() {
            Err(Error::LevelOutOfRange { level: n, max: self.levels() })
        } else {
            Ok(())
        }
    }

    fn check_step(&self, n: usize) -> Result<()> {
        if n >= self.levels() {
            Err(Error::LevelOutOfRange { level: n, max: self.levels().saturating_sub(1) })
        } else {
            Ok(())
        }
    }

    pub fn k(&self, n: usize) -> u64 {
        self.k[n]
    }

    pub fn l(&self, n: usize) -> u64 {
        self.l[n]
    }

    pub fn ks(&self) -> &[u64] {
        &self.k
    }

    pub fn ls(&self) -> &[u64] {
        &self.l
    }

    pub fn q(&self, n: usize) -> &BigUint {
        &self.q[n]
    }

    pub fn p(&self, n: usize) -> &BigUint {
        &self.p[n]
    }

    pub fn p_inv(&self, n: usize) -> &BigUint {
        &self.p_inv[n]
    }

    /// `K_n`, the product of `k_i` for `i < n`.
    pub fn odometer_len(&self, n: usize) -> &BigUint {
        &self.odometer_len[n]
    }

    /// `A_n`.
    pub fn a_shift(&self, n: usize) -> Result<&BigInt> {
        self.check(n)?;
        Ok(&self.a[n])
    }

    /// `q_n` as a machine integer, if it fits.
    pub fn q_usize(&self, n: usize) -> Result<usize> {
        self.check(n)?;
        self.q[n].to_usize().ok_or_else(|| Error::TooLong(self.q[n].to_string()))
    }

    pub fn odometer_len_usize(&self, n: usize) -> Result<usize> {
        self.check(n)?;
        self.odometer_len[n]
            .to_usize()
            .ok_or_else(|| Error::TooLong(self.odometer_len[n].to_string()))
    }

    pub fn p_usize(&self, n: usize) -> Result<usize> {
        self.check(n)?;
        self.p[n].to_usize().ok_or_else(|| Error::TooLong(self.p[n].to_string()))
    }

    pub fn p_inv_usize(&self, n: usize) -> Result<usize> {
        self.check(n)?;
        self.p_inv[n].to_usize().ok_or_else(|| Error::TooLong(self.p_inv[n].to_string()))
    }

    pub fn a_i64(&self, n: usize) -> Result<i64> {
        self.a_shift(n)?
            .to_i64()
            .ok_or_else(|| Error::TooLong(self.a[n].to_string()))
    }

    /// `j_i = (p_n)^{-1} i mod q_n`, defined for `0 <= i <= q_n`.
    pub fn j_index(&self, n: usize, i: &BigUint) -> Result<BigUint> {
        self.check(n)?;
        if i > &self.q[n] {
            return Err(Error::IndexOutOfRange { index: i.to_string(), limit: self.q[n].to_string() });
        }
        Ok((&self.p_inv[n] * i) % &self.q[n])
    }

    /// Machine-integer version of [`Self::j_index`] for materializable levels.
    pub fn j_small(&self, n: usize, i: usize) -> Result<usize> {
        let q = self.q_usize(n)?;
        if i > q {
            return Err(Error::IndexOutOfRange { index: i.to_string(), limit: q.to_string() });
        }
        let inv = self.p_inv_usize(n)? as u128;
        Ok(((inv * i as u128) % q as u128) as usize)
    }

    /// Length `k_n l_n q_n` of a 2-subsection of a level-`(n+1)` word.
    pub fn two_subsection_len(&self, n: usize) -> Result<BigUint> {
        self.check_step(n)?;
        Ok(BigUint::from(self.k[n] * self.l[n]) * &self.q[n])
    }

    /// Verify every invariant of the derived quantities.
    pub fn verify(&self) -> Result<()> {
        for n in 0..self.levels() {
            let kl = BigUint::from(self.k[n]) * BigUint::from(self.l[n]);
            if self.q[n + 1] != &kl * &self.q[n] * &self.q[n] {
                return Err(Error::Invalid(format!("q_{} recursion", n + 1)));
            }
            if self.p[n + 1] != &self.p[n] * &self.q[n] * &kl + 1u32 {
                return Err(Error::Invalid(format!("p_{} recursion", n + 1)));
            }
            if (&self.p[n + 1] * &self.p_inv[n + 1]) % &self.q[n + 1] != BigUint::one() % &self.q[n + 1] {
                return Err(Error::Invalid(format!("p_inv_{}", n + 1)));
            }
            if self.p[n + 1].gcd(&self.q[n + 1]) != BigUint::one() {
                return Err(Error::Invalid(format!("gcd(p_{0}, q_{0})", n + 1)));
            }
            let bound = BigInt::from(&self.q[n] * 2u32);
            if self.a[n + 1].magnitude() >= bound.magnitude() {
                return Err(Error::Invalid(format!("|A_{}| >= 2 q_{}", n + 1, n)));
            }
            if self.a[n + 1] != &self.a[n] - BigInt::from(self.p_inv[n].clone()) {
                return Err(Error::Invalid(format!("A_{} recursion", n + 1)));
            }
        }
        Ok(())
    }
}
