//! Exact rationals in reports.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A rational that always renders as `num/den`, including integers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Q(pub BigRational);

impl Q {
    pub fn new(num: i64, den: i64) -> Self {
        Q(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }
}

impl From<BigRational> for Q {
    fn from(r: BigRational) -> Self {
        Q(r)
    }
}

impl Deref for Q {
    type Target = BigRational;
    fn deref(&self) -> &BigRational {
        &self.0
    }
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Q {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let n: BigInt = n.trim().parse().map_err(|_| format!("bad rational {s:?}"))?;
        let d: BigInt = d.trim().parse().map_err(|_| format!("bad rational {s:?}"))?;
        if d == BigInt::from(0) {
            return Err(format!("zero denominator in {s:?}"));
        }
        Ok(Q(BigRational::new(n, d)))
    }
}

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Render with `places` digits after the point, rounding half away from zero.
pub fn to_decimal(r: &BigRational, places: usize) -> String {
    use num_traits::{Signed, Zero};
    let scale = BigInt::from(10).pow(places as u32);
    let scaled = r.abs() * BigRational::from_integer(scale.clone());
    let mut int = scaled.floor().to_integer();
    if (scaled - BigRational::from_integer(int.clone())) * BigRational::from_integer(2.into())
        >= BigRational::from_integer(1.into())
    {
        int += 1;
    }
    let digits = int.to_string();
    let body = if places == 0 {
        digits
    } else {
        let padded = format!("{digits:0>width$}", width = places + 1);
        let (a, b) = padded.split_at(padded.len() - places);
        format!("{a}.{b}")
    };
    if r.is_negative() && !int.is_zero() {
        format!("-{body}")
    } else {
        body
    }
}
