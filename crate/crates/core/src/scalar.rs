//! Real scalars: plain `f64` and a ~57 digit binary float.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, RoundingMode, Sign, Word};
use serde::{Deserialize, Serialize};

/// Working precision of [`Hp`] in bits.
pub const HP_BITS: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    High,
}

impl Precision {
    /// Default relative PSD tolerance for Hankel tests.
    pub fn default_tol(self) -> f64 {
        match self {
            Precision::Double => 1e-9,
            Precision::High => 1e-30,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "double" => Ok(Precision::Double),
            "high" => Ok(Precision::High),
            other => Err(format!("unknown precision `{other}` (expected double|high)")),
        }
    }
}

pub trait Real:
    Clone
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;
    /// Unit roundoff of the representation.
    fn epsilon() -> f64;

    fn powi(&self, n: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    fn is_negative(&self) -> bool {
        *self < Self::zero()
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn epsilon() -> f64 {
        f64::EPSILON / 2.0
    }
    fn powi(&self, n: u32) -> Self {
        f64::powi(*self, n as i32)
    }
}

/// High precision real ([`HP_BITS`] bits of mantissa).
#[derive(Clone)]
pub struct Hp(BigFloat);

impl Hp {
    pub fn inner(&self) -> &BigFloat {
        &self.0
    }
}

impl fmt::Debug for Hp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hp({:e})", self.to_f64())
    }
}

impl PartialEq for Hp {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Hp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.cmp(&other.0).map(|c| c.cmp(&0))
    }
}

macro_rules! hp_binop {
    ($tr:ident, $f:ident) => {
        impl $tr for Hp {
            type Output = Hp;
            fn $f(self, rhs: Hp) -> Hp {
                Hp(self.0.$f(&rhs.0, HP_BITS, RM))
            }
        }
    };
}
hp_binop!(Add, add);
hp_binop!(Sub, sub);
hp_binop!(Mul, mul);
hp_binop!(Div, div);

impl Neg for Hp {
    type Output = Hp;
    fn neg(self) -> Hp {
        Hp(self.0.neg())
    }
}

impl Real for Hp {
    fn from_f64(x: f64) -> Self {
        Hp(BigFloat::from_f64(x, HP_BITS))
    }

    fn to_f64(&self) -> f64 {
        if self.0.is_nan() {
            return f64::NAN;
        }
        if self.0.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.0.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        let Some((words, _bits, sign, exp, _)) = self.0.as_raw_parts() else {
            return f64::NAN;
        };
        if words.iter().all(|w| *w == 0) {
            return 0.0;
        }
        // value = 0.m × 2^exp with the mantissa's top bit in the last word
        let wbits = Word::BITS as i32;
        let mut acc = 0.0f64;
        let mut scale = 1.0f64;
        for w in words.iter().rev().take(128 / wbits as usize + 1) {
            scale /= 2f64.powi(wbits);
            acc += (*w as f64) * scale;
        }
        let mut v = acc;
        let mut e = exp as i64;
        // apply 2^e in steps that stay inside the f64 exponent range
        while e > 0 {
            let s = e.min(1000);
            v *= 2f64.powi(s as i32);
            e -= s;
        }
        while e < 0 {
            let s = (-e).min(1000);
            v /= 2f64.powi(s as i32);
            e += s;
        }
        if sign == Sign::Neg {
            -v
        } else {
            v
        }
    }

    fn abs(&self) -> Self {
        Hp(self.0.abs())
    }

    fn sqrt(&self) -> Self {
        Hp(self.0.sqrt(HP_BITS, RM))
    }

    fn epsilon() -> f64 {
        2f64.powi(-(HP_BITS as i32))
    }

    fn powi(&self, n: u32) -> Self {
        Hp(self.0.powi(n as usize, HP_BITS, RM))
    }

    fn is_negative(&self) -> bool {
        self.0.is_negative() && !self.0.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hp_round_trips_doubles() {
        for x in [1.0, -2.5, 3.0e-200, 7.25e250, 0.1, 0.0, 1.0 / 3.0] {
            assert_eq!(Hp::from_f64(x).to_f64(), x, "{x}");
        }
    }

    #[test]
    fn hp_carries_more_digits() {
        let third = Hp::one() / Hp::from_f64(3.0);
        let back = third.clone() * Hp::from_f64(3.0) - Hp::one();
        assert!(back.abs().to_f64() < 1e-50);
        let s = Hp::from_f64(2.0).sqrt();
        let err = (s.clone() * s - Hp::from_f64(2.0)).abs().to_f64();
        assert!(err < 1e-50);
        // 1 + 1e-30 is distinguishable from 1
        let tiny = Hp::one() + Hp::from_f64(1e-30) - Hp::one();
        assert!((tiny.to_f64() - 1e-30).abs() < 1e-45);
    }

    #[test]
    fn powi_matches_f64() {
        let x = 1.37f64;
        assert!((Hp::from_f64(x).powi(11).to_f64() - x.powi(11)).abs() < 1e-12);
        assert_eq!(Real::powi(&x, 0), 1.0);
    }
}
