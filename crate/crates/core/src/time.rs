//! Integer time and exact rational arithmetic.
//!
//! Every ceiling and floor that appears in an analysis term goes through this
//! module so that no floating-point rounding reaches a response time.

use core::fmt;
use core::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::ModelError;

/// Time in integer ticks.
pub type Time = u64;

/// Exact non-negative rational used for interference terms.
pub type Rational = Ratio<u128>;

/// `⌈a / b⌉` on integers.
#[inline]
pub fn ceil_div(a: Time, b: Time) -> Time {
    a.div_ceil(b)
}

/// Smallest integer not below `r`.
#[inline]
pub fn ceil_ratio(r: &Rational) -> Time {
    let (q, rem) = r.numer().div_rem(r.denom());
    let q = if rem.is_zero() { q } else { q + 1 };
    q as Time
}

/// Largest integer not above `r`.
#[inline]
pub fn floor_ratio(r: &Rational) -> Time {
    (r.numer() / r.denom()) as Time
}

#[inline]
pub fn time_ratio(t: Time) -> Rational {
    Rational::from_integer(t as u128)
}

/// A utilization in `(0, 1]`, kept as a reduced fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Util(Ratio<u64>);

impl Util {
    pub fn new(numer: u64, denom: u64) -> Result<Self, ModelError> {
        if numer == 0 || denom == 0 || numer > denom {
            return Err(ModelError::InvalidUtil { numer, denom });
        }
        Ok(Util(Ratio::new(numer, denom)))
    }

    pub const ONE: Util = Util(Ratio::new_raw(1, 1));

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn as_rational(&self) -> Rational {
        Rational::new_raw(self.numer() as u128, self.denom() as u128)
    }

    /// Exact `U · t`.
    pub fn mul_time(&self, t: Time) -> Rational {
        self.as_rational() * time_ratio(t)
    }

    /// `⌈U · t⌉`, computed on integers.
    pub fn ceil_mul(&self, t: Time) -> Time {
        let n = self.numer() as u128 * t as u128;
        n.div_ceil(self.denom() as u128) as Time
    }

    /// `⌊U · t⌋`, computed on integers.
    pub fn floor_mul(&self, t: Time) -> Time {
        (self.numer() as u128 * t as u128 / self.denom() as u128) as Time
    }

    /// `⌈c / U⌉`: ticks needed to earn `c` ticks of budget at rate `U`.
    pub fn ceil_div_time(&self, c: Time) -> Time {
        let n = c as u128 * self.denom() as u128;
        n.div_ceil(self.numer() as u128) as Time
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(0.0)
    }

    /// Nearest utilization with denominator `denom`, clamped into `[1/denom, 1]`.
    pub fn approximate(value: f64, denom: u64) -> Util {
        let scaled = libm::round(value * denom as f64);
        let n = if scaled < 1.0 {
            1
        } else if scaled > denom as f64 {
            denom
        } else {
            scaled as u64
        };
        Util(Ratio::new(n, denom))
    }
}

impl fmt::Display for Util {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl FromStr for Util {
    type Err = ModelError;

    /// Parses `"p/q"` or a bare integer (`"1"`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::UtilSyntax;
        let (n, d) = match s.trim().split_once('/') {
            Some((n, d)) => (
                n.trim().parse::<u64>().map_err(|_| bad())?,
                d.trim().parse::<u64>().map_err(|_| bad())?,
            ),
            None => (s.trim().parse::<u64>().map_err(|_| bad())?, 1),
        };
        Util::new(n, d)
    }
}
