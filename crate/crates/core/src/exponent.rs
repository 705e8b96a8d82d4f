use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponents below `1 + P_CLAMP` are treated as exactly 1; their conjugate would overflow.
const P_CLAMP: f64 = 1e-12;

/// An exponent `p ∈ [1, ∞]`, its conjugate `p*` and the constant
/// `m = (p* + 1)^{-1/p*}` (`m = 1` when `p* = ∞`).
///
/// `m` is the value of `∫ h(t)(1 - t) dt` for the unit-norm `h ∈ L_p(0,1)`
/// that is extremal in Hölder's inequality against `1 - t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentPair {
    p: f64,
    p_star: f64,
    m: f64,
}

impl ExponentPair {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidInput(format!("p must lie in [1, inf], got {p}")));
        }
        if p < 1.0 + P_CLAMP {
            return Ok(ExponentPair::one());
        }
        if p.is_infinite() {
            return Ok(ExponentPair::infinity());
        }
        let p_star = p / (p - 1.0);
        let m = if p_star.is_infinite() {
            1.0
        } else {
            (p_star + 1.0).powf(-1.0 / p_star)
        };
        Ok(ExponentPair { p, p_star, m })
    }

    pub fn one() -> Self {
        ExponentPair {
            p: 1.0,
            p_star: f64::INFINITY,
            m: 1.0,
        }
    }

    pub fn infinity() -> Self {
        ExponentPair {
            p: f64::INFINITY,
            p_star: 1.0,
            m: 0.5,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `1/p` with `1/∞ = 0`.
    pub fn inv_p(&self) -> f64 {
        if self.p.is_infinite() {
            0.0
        } else {
            1.0 / self.p
        }
    }

    /// `1/p*` with `1/∞ = 0`.
    pub fn inv_p_star(&self) -> f64 {
        if self.p_star.is_infinite() {
            0.0
        } else {
            1.0 / self.p_star
        }
    }

    pub fn is_one(&self) -> bool {
        self.p == 1.0
    }

    pub fn is_infinite(&self) -> bool {
        self.p.is_infinite()
    }

    pub fn is_interior(&self) -> bool {
        !self.is_one() && !self.is_infinite()
    }
}

impl FromStr for ExponentPair {
    type Err = Error;

    /// Accepts decimals, fractions such as `3/2`, and `inf`.
    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(ExponentPair::infinity());
        }
        let bad = || Error::InvalidInput(format!("cannot parse exponent '{text}'"));
        let p = match t.split_once('/') {
            Some((num, den)) => {
                let num: f64 = num.trim().parse().map_err(|_| bad())?;
                let den: f64 = den.trim().parse().map_err(|_| bad())?;
                if den == 0.0 {
                    return Err(bad());
                }
                num / den
            }
            None => t.parse().map_err(|_| bad())?,
        };
        ExponentPair::new(p)
    }
}

impl fmt::Display for ExponentPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.p)
        }
    }
}

/// Serialized as a number, or the string `"inf"`.
impl Serialize for ExponentPair {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.p.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugates_and_constants() {
        let two = ExponentPair::new(2.0).unwrap();
        assert_eq!(two.p_star(), 2.0);
        assert!((two.m() - 3f64.sqrt().recip()).abs() < 1e-15);

        let one = ExponentPair::new(1.0).unwrap();
        assert!(one.p_star().is_infinite());
        assert_eq!(one.m(), 1.0);

        let inf = ExponentPair::infinity();
        assert_eq!(inf.p_star(), 1.0);
        assert_eq!(inf.m(), 0.5);

        for p in [1.25, 1.5, 3.0, 7.0, 1e6] {
            let e = ExponentPair::new(p).unwrap();
            assert!((e.inv_p() + e.inv_p_star() - 1.0).abs() < 1e-12);
            assert!(e.m() > 0.0 && e.m() < 1.0);
        }
    }

    #[test]
    fn m_is_one_only_at_p_one() {
        assert!(ExponentPair::new(1.0 + 1e-9).unwrap().m() < 1.0);
        assert_eq!(ExponentPair::new(1.0 + 1e-13).unwrap(), ExponentPair::one());
    }

    #[test]
    fn parsing() {
        assert_eq!("inf".parse::<ExponentPair>().unwrap(), ExponentPair::infinity());
        assert_eq!("3/2".parse::<ExponentPair>().unwrap().p(), 1.5);
        assert_eq!("2.5".parse::<ExponentPair>().unwrap().p(), 2.5);
        assert!("0.5".parse::<ExponentPair>().is_err());
        assert!("abc".parse::<ExponentPair>().is_err());
        assert!("1/0".parse::<ExponentPair>().is_err());
    }
}
