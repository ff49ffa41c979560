//! Numeric back-ends: `f64` for speed, `BigRational` for exact verification.
//!
//! Code that is generic over [`Scalar`] runs unchanged in both modes. Tolerances
//! are expressed as `f64` and collapse to zero in exact mode.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number.
pub type Rational = BigRational;

/// Arithmetic required by the generic algorithms.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Signed
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
    + for<'a> DivAssign<&'a Self>
{
    /// True when arithmetic is exact and all tolerances are zero.
    const EXACT: bool;

    fn from_int(v: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// Converts a float. Exact for rationals (the binary value of `v`).
    fn from_f64(v: f64) -> Self;

    fn to_f64(&self) -> f64;

    /// A tolerance in this scalar type: `t` for floats, zero for exact types.
    fn tol(t: f64) -> Self {
        if Self::EXACT {
            Self::zero()
        } else {
            Self::from_f64(t)
        }
    }

    /// Normalized scale whose consecutive ratios are `lambda^signs[i]`.
    fn scale_from_signs(signs: &[i8], lambda: &Self) -> Vec<Self> {
        let mut s = Vec::with_capacity(signs.len() + 1);
        s.push(Self::one());
        for &p in signs {
            let last = s.last().unwrap().clone();
            s.push(if p > 0 { last * lambda } else { last / lambda });
        }
        normalize(&mut s);
        s
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn scale_from_signs(signs: &[i8], lambda: &Self) -> Vec<Self> {
        if signs.len() < 64 {
            let mut s = Vec::with_capacity(signs.len() + 1);
            s.push(1.0);
            for &p in signs {
                let last = *s.last().unwrap();
                s.push(if p > 0 { last * lambda } else { last / lambda });
            }
            normalize(&mut s);
            return s;
        }
        let eps = lambda.ln();
        let mut logs = Vec::with_capacity(signs.len() + 1);
        let mut h = 0.0f64;
        logs.push(h);
        for &p in signs {
            h += f64::from(p) * eps;
            logs.push(h);
        }
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        normalize(&mut s);
        s
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_int(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(v: f64) -> Self {
        <Rational as FromPrimitive>::from_f64(v).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

fn normalize<S: Scalar>(s: &mut [S]) {
    let mut total = S::zero();
    for v in s.iter() {
        total += v;
    }
    for v in s.iter_mut() {
        *v /= &total;
    }
}

/// Sum of a slice.
pub fn sum<S: Scalar>(v: &[S]) -> S {
    let mut total = S::zero();
    for x in v {
        total += x;
    }
    total
}

/// Inner product of two slices of equal length.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut total = S::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            total += &(x.clone() * y);
        }
    }
    total
}

/// Strictly greater than zero. `Signed::is_positive` accepts `+0.0` for floats.
pub fn positive<S: Scalar>(x: &S) -> bool {
    *x > S::zero()
}

/// Largest absolute value in a slice (zero for an empty slice).
pub fn max_abs<S: Scalar>(v: &[S]) -> S {
    let mut best = S::zero();
    for x in v {
        let a = x.abs();
        if a > best {
            best = a;
        }
    }
    best
}

/// `a <= b + slack`.
pub fn le_tol<S: Scalar>(a: &S, b: &S, slack: &S) -> bool {
    if slack.is_zero() {
        a <= b
    } else {
        *a <= b.clone() + slack
    }
}

/// `|a - b| <= slack`.
pub fn eq_tol<S: Scalar>(a: &S, b: &S, slack: &S) -> bool {
    if slack.is_zero() {
        a == b
    } else {
        (a.clone() - b).abs() <= *slack
    }
}

/// Parses `p/q`, an integer, or a finite decimal into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    let bad = || Error::InvalidInput(format!("cannot parse rational from {text:?}"));
    if let Some((p, q)) = t.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        let negative = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), frac);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let num = BigInt::from_str(&digits).map_err(|_| bad())?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(num, den);
        return Ok(if negative { -r } else { r });
    }
    let p = BigInt::from_str(t).map_err(|_| bad())?;
    Ok(Rational::from_integer(p))
}

/// Formats a rational as `p/q` (denominator always present).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Rational shorthand used throughout tests and examples.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::from_ratio(num, den)
}

/// Largest rational with denominator `2^bits` that does not exceed `x`.
pub fn rational_floor(x: f64, bits: u32) -> Rational {
    let scale = 2f64.powi(bits as i32);
    let num = (x * scale).floor();
    Rational::new(
        BigInt::from_f64(num).expect("finite float"),
        num_traits::pow(BigInt::from(2), bits as usize),
    )
}
