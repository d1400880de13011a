//! Reward scalars.
//!
//! Every reward-carrying type in the crate is generic over [`Reward`]. The
//! engine only ever adds rewards and compares them, so the trait asks for a
//! total order plus an exact decimal text form for the DSL. `f32`/`f64`
//! cover the usual case; [`Rational64`] gives exact accumulation for any
//! decimal reward values.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::iter::Sum;

use num_rational::Rational64;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Scalar used for rule rewards and accumulated returns.
pub trait Reward:
    Num + Signed + Copy + PartialOrd + Debug + FromPrimitive + ToPrimitive + Sum + Send + Sync + 'static
{
    /// Total order used by search priorities. For floats this is
    /// `total_cmp`, so `-0.0 < 0.0`; callers never produce NaN.
    fn total_cmp(&self, other: &Self) -> Ordering;

    /// Parse a decimal literal such as `-1`, `0.25` or `+3`.
    fn parse_decimal(text: &str) -> Option<Self>;

    /// Shortest decimal text that [`Reward::parse_decimal`] maps back to `self`.
    fn to_decimal(&self) -> String;

    /// Lossy view used for reporting.
    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

fn is_decimal_literal(text: &str) -> bool {
    let body = text.strip_prefix(['-', '+']).unwrap_or(text);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    match frac {
        None => !int.is_empty() && digits(int),
        Some(f) => (!int.is_empty() || !f.is_empty()) && digits(int) && digits(f),
    }
}

macro_rules! float_reward {
    ($t:ty) => {
        impl Reward for $t {
            fn total_cmp(&self, other: &Self) -> Ordering {
                <$t>::total_cmp(self, other)
            }

            fn parse_decimal(text: &str) -> Option<Self> {
                if !is_decimal_literal(text) {
                    return None;
                }
                text.parse::<$t>().ok().filter(|v| v.is_finite())
            }

            fn to_decimal(&self) -> String {
                if *self == 0.0 {
                    // -0 and 0 compare equal; keep one spelling
                    "0".to_string()
                } else {
                    format!("{}", self)
                }
            }
        }
    };
}

float_reward!(f32);
float_reward!(f64);

impl Reward for Rational64 {
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        if !is_decimal_literal(text) {
            return None;
        }
        let (negative, body) = match text.as_bytes()[0] {
            b'-' => (true, &text[1..]),
            b'+' => (false, &text[1..]),
            _ => (false, text),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        let mut numer: i64 = 0;
        let mut denom: i64 = 1;
        for b in int.bytes().chain(frac.bytes()) {
            numer = numer.checked_mul(10)?.checked_add(i64::from(b - b'0'))?;
        }
        for _ in 0..frac.len() {
            denom = denom.checked_mul(10)?;
        }
        let value = Rational64::new(numer, denom);
        Some(if negative { -value } else { value })
    }

    fn to_decimal(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        if self.is_negative() {
            out.push('-');
        }
        let numer = self.numer().unsigned_abs();
        let denom = self.denom().unsigned_abs();
        out.push_str(&(numer / denom).to_string());
        let mut rem = numer % denom;
        if rem == 0 {
            return out;
        }
        out.push('.');
        // Terminates when the reduced denominator is 2^a 5^b, which holds for
        // every value produced by `parse_decimal`. Other ratios are cut at 18
        // digits.
        let mut digits = 0;
        while rem != 0 && digits < 18 {
            rem *= 10;
            out.push(char::from(b'0' + (rem / denom) as u8));
            rem %= denom;
            digits += 1;
        }
        out
    }
}

/// The discrete reward alphabet mutation draws from.
pub fn unit_rewards<R: Reward>() -> [R; 3] {
    [-R::one(), R::zero(), R::one()]
}
