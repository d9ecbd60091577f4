//! Fixed-point decimal arithmetic on `BigInt` mantissas.
//!
//! A [`Fixed`] holds `mantissa / 10^SCALE_DIGITS`. The scale gives 30
//! significant digits of working precision plus guard digits, which is what
//! the rank backend and the scalar evaluator need; shifts and comparisons are
//! exact, multiplication and division round to nearest.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Total decimal digits carried after the point: 30 significant + 10 guard.
pub const SCALE_DIGITS: u32 = 40;

fn scale() -> &'static BigInt {
    static SCALE: OnceLock<BigInt> = OnceLock::new();
    SCALE.get_or_init(|| BigInt::from(10u32).pow(SCALE_DIGITS))
}

/// Round-to-nearest division, ties away from zero. `d` must be positive.
fn div_round(n: &BigInt, d: &BigInt) -> BigInt {
    debug_assert!(d.is_positive());
    let two_n: BigInt = n << 1;
    let num: BigInt = if n.is_negative() { two_n - d } else { two_n + d };
    num.div_floor(&(d << 1))
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct Fixed {
    mantissa: BigInt,
}

impl Fixed {
    pub fn zero() -> Self {
        Fixed { mantissa: BigInt::zero() }
    }

    pub fn one() -> Self {
        Fixed { mantissa: scale().clone() }
    }

    pub fn from_i64(v: i64) -> Self {
        Fixed { mantissa: BigInt::from(v) * scale() }
    }

    /// `10^e` for signed `e`; `e < -(SCALE_DIGITS)` underflows to zero.
    pub fn pow10(e: i32) -> Self {
        let shifted = e + SCALE_DIGITS as i32;
        if shifted < 0 {
            return Fixed::zero();
        }
        Fixed { mantissa: BigInt::from(10u32).pow(shifted as u32) }
    }

    pub fn from_ratio(num: &BigInt, den: &BigInt) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let (num, den) = if den.is_negative() {
            (-num, -den)
        } else {
            (num.clone(), den.clone())
        };
        Fixed { mantissa: div_round(&(num * scale()), &den) }
    }

    pub fn from_rational(r: &BigRational) -> Self {
        Fixed::from_ratio(r.numer(), r.denom())
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn abs(&self) -> Self {
        Fixed { mantissa: self.mantissa.abs() }
    }

    pub fn div(&self, other: &Fixed) -> Fixed {
        assert!(!other.mantissa.is_zero(), "division by zero");
        let (num, den) = if other.mantissa.is_negative() {
            (-&self.mantissa, -&other.mantissa)
        } else {
            (self.mantissa.clone(), other.mantissa.clone())
        };
        Fixed { mantissa: div_round(&(num * scale()), &den) }
    }

    /// Floor square root at full working precision; requires `self >= 0`.
    pub fn sqrt(&self) -> Fixed {
        assert!(
            !self.mantissa.is_negative(),
            "square root of negative fixed-point value"
        );
        Fixed { mantissa: (&self.mantissa * scale()).sqrt() }
    }

    pub fn to_f64(&self) -> f64 {
        let r = BigRational::new(self.mantissa.clone(), scale().clone());
        r.to_f64().unwrap_or(f64::NAN)
    }
}

impl Add for &Fixed {
    type Output = Fixed;
    fn add(self, rhs: &Fixed) -> Fixed {
        Fixed { mantissa: &self.mantissa + &rhs.mantissa }
    }
}

impl Sub for &Fixed {
    type Output = Fixed;
    fn sub(self, rhs: &Fixed) -> Fixed {
        Fixed { mantissa: &self.mantissa - &rhs.mantissa }
    }
}

impl Neg for &Fixed {
    type Output = Fixed;
    fn neg(self) -> Fixed {
        Fixed { mantissa: -&self.mantissa }
    }
}

impl Mul for &Fixed {
    type Output = Fixed;
    fn mul(self, rhs: &Fixed) -> Fixed {
        Fixed { mantissa: div_round(&(&self.mantissa * &rhs.mantissa), scale()) }
    }
}
