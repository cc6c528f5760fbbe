//! Exact rational arithmetic with a point at infinity.
//!
//! All grades, probabilities and quantitative assertion values in this crate
//! are exact rationals; `ExtRat` adds the absorbing element `∞` used by the
//! quantitative assertion semantics and by grades.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

pub fn rat_u64(n: u64) -> Rat {
    Rat::from(BigInt::from(n))
}

/// Parse `p`, `-p`, or `p/q`.
pub fn parse_rat(s: &str) -> Option<Rat> {
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        Some(Rat::new(p, q))
    } else {
        let p: BigInt = s.trim().parse().ok()?;
        Some(Rat::from(p))
    }
}

pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A nonnegative-or-infinite extended rational. Addition and scaling absorb ∞.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtRat {
    Fin(Rat),
    Inf,
}

impl ExtRat {
    pub fn zero() -> Self {
        ExtRat::Fin(Rat::zero())
    }

    pub fn one() -> Self {
        ExtRat::Fin(Rat::one())
    }

    pub fn from_int(n: i64) -> Self {
        ExtRat::Fin(rat_int(n))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtRat::Fin(r) if r.is_zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtRat::Fin(_))
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, ExtRat::Fin(r) if r.is_negative())
    }

    pub fn as_fin(&self) -> Option<&Rat> {
        match self {
            ExtRat::Fin(r) => Some(r),
            ExtRat::Inf => None,
        }
    }

    /// max(self, 0)
    pub fn clamp_nonneg(self) -> ExtRat {
        match self {
            ExtRat::Fin(r) if r.is_negative() => ExtRat::zero(),
            x => x,
        }
    }

    pub fn min(self, other: ExtRat) -> ExtRat {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: ExtRat) -> ExtRat {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn parse(s: &str) -> Option<ExtRat> {
        if s.trim() == "inf" {
            Some(ExtRat::Inf)
        } else {
            parse_rat(s).map(ExtRat::Fin)
        }
    }
}

impl fmt::Display for ExtRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRat::Fin(r) => write!(f, "{}", fmt_rat(r)),
            ExtRat::Inf => write!(f, "inf"),
        }
    }
}

impl PartialOrd for ExtRat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRat::Inf, ExtRat::Inf) => Ordering::Equal,
            (ExtRat::Inf, _) => Ordering::Greater,
            (_, ExtRat::Inf) => Ordering::Less,
            (ExtRat::Fin(a), ExtRat::Fin(b)) => a.cmp(b),
        }
    }
}

impl Add for ExtRat {
    type Output = ExtRat;
    fn add(self, rhs: ExtRat) -> ExtRat {
        match (self, rhs) {
            (ExtRat::Fin(a), ExtRat::Fin(b)) => ExtRat::Fin(a + b),
            _ => ExtRat::Inf,
        }
    }
}

impl Sub for ExtRat {
    type Output = ExtRat;
    /// Subtraction on the finite fragment; `∞ - x = ∞` for finite x.
    /// `x - ∞` is not meaningful and saturates to 0.
    fn sub(self, rhs: ExtRat) -> ExtRat {
        match (self, rhs) {
            (ExtRat::Fin(a), ExtRat::Fin(b)) => ExtRat::Fin(a - b),
            (ExtRat::Inf, ExtRat::Fin(_)) => ExtRat::Inf,
            (_, ExtRat::Inf) => ExtRat::zero(),
        }
    }
}

impl Neg for ExtRat {
    type Output = ExtRat;
    fn neg(self) -> ExtRat {
        match self {
            ExtRat::Fin(a) => ExtRat::Fin(-a),
            ExtRat::Inf => ExtRat::Inf,
        }
    }
}

impl Mul for ExtRat {
    type Output = ExtRat;
    /// ∞ absorbs multiplication except `0 · ∞ = 0` (the convention used for
    /// expectations of quantities).
    fn mul(self, rhs: ExtRat) -> ExtRat {
        match (self, rhs) {
            (ExtRat::Fin(a), ExtRat::Fin(b)) => ExtRat::Fin(a * b),
            (ExtRat::Fin(a), ExtRat::Inf) | (ExtRat::Inf, ExtRat::Fin(a)) => {
                if a.is_zero() {
                    ExtRat::zero()
                } else {
                    ExtRat::Inf
                }
            }
            (ExtRat::Inf, ExtRat::Inf) => ExtRat::Inf,
        }
    }
}

/// base^exp with integer (possibly negative) exponent; base must be nonzero
/// when exp < 0.
pub fn rat_pow(base: &Rat, exp: i64) -> Option<Rat> {
    if exp >= 0 {
        Some(num_traits::pow::pow(base.clone(), exp as usize))
    } else {
        if base.is_zero() {
            return None;
        }
        let p = num_traits::pow::pow(base.clone(), (-exp) as usize);
        Some(p.recip())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ext_rat_ops() {
        let half = ExtRat::Fin(rat(1, 2));
        assert_eq!(half.clone() + half.clone(), ExtRat::one());
        assert_eq!(half.clone() + ExtRat::Inf, ExtRat::Inf);
        assert_eq!(ExtRat::zero() * ExtRat::Inf, ExtRat::zero());
        assert!(half < ExtRat::Inf);
        assert_eq!(ExtRat::parse("3/4"), Some(ExtRat::Fin(rat(3, 4))));
        assert_eq!(ExtRat::parse("inf"), Some(ExtRat::Inf));
    }

    #[test]
    fn pow_negative_exponent() {
        assert_eq!(rat_pow(&rat(3, 4), -2), Some(rat(16, 9)));
        assert_eq!(rat_pow(&rat(3, 4), 0), Some(rat_int(1)));
        assert_eq!(rat_pow(&rat_int(0), -1), None);
    }
}
