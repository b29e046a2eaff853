//! Scalar abstraction shared by the allocation math.
//!
//! Everything in this crate that is pure arithmetic is written against
//! [`Scalar`], so the same code runs on `f32`, `f64` and on exact
//! [`BigRational`] values. The rational instance is exact for field
//! operations; transcendental functions fall back to an `f64` round trip
//! except where an exact answer exists (perfect powers, `alpha == 1`).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive};

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Converts a literal. Panics on non-finite input for exact types.
    fn lit(v: f64) -> Self;

    fn sqrt(&self) -> Self;

    fn ln(&self) -> Self;

    fn exp(&self) -> Self;

    fn powf(&self, exponent: &Self) -> Self;

    fn is_finite(&self) -> bool;

    /// `self^(1/alpha)` for `self > 0`, evaluated as `exp(ln(self) / alpha)`.
    fn alpha_root(&self, alpha: &Self) -> Self {
        if alpha.is_one() {
            return self.clone();
        }
        (self.ln() / alpha.clone()).exp()
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn from_bytes(n: u64) -> Self {
        Self::from_u64(n).expect("byte count representable in scalar type")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        self.max_of(lo).min_of(hi)
    }
}

macro_rules! float_scalar {
    ($($t:ty),+) => {
        $(
            impl Scalar for $t {
                fn lit(v: f64) -> Self {
                    v as $t
                }

                fn sqrt(&self) -> Self {
                    <$t>::sqrt(*self)
                }

                fn ln(&self) -> Self {
                    <$t>::ln(*self)
                }

                fn exp(&self) -> Self {
                    <$t>::exp(*self)
                }

                fn powf(&self, exponent: &Self) -> Self {
                    <$t>::powf(*self, *exponent)
                }

                fn is_finite(&self) -> bool {
                    <$t>::is_finite(*self)
                }
            }
        )+
    };
}

float_scalar!(f32, f64);

fn rational_from_f64(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap_or_else(|| panic!("non-finite value {v} has no rational form"))
}

/// Exact integer k-th root of a non-negative big integer, if it exists.
fn exact_nth_root(v: &BigInt, k: u32) -> Option<BigInt> {
    if v.is_negative() {
        return None;
    }
    let r = v.nth_root(k);
    if num_traits::pow::pow(r.clone(), k as usize) == *v {
        Some(r)
    } else {
        None
    }
}

fn exact_rational_root(v: &BigRational, k: u32) -> Option<BigRational> {
    let n = exact_nth_root(v.numer(), k)?;
    let d = exact_nth_root(v.denom(), k)?;
    Some(BigRational::new(n, d))
}

impl Scalar for BigRational {
    fn lit(v: f64) -> Self {
        rational_from_f64(v)
    }

    fn sqrt(&self) -> Self {
        exact_rational_root(self, 2).unwrap_or_else(|| rational_from_f64(self.to_f64_lossy().sqrt()))
    }

    fn ln(&self) -> Self {
        rational_from_f64(self.to_f64_lossy().ln())
    }

    fn exp(&self) -> Self {
        rational_from_f64(self.to_f64_lossy().exp())
    }

    fn powf(&self, exponent: &Self) -> Self {
        if exponent.is_integer() {
            if let Some(e) = exponent.to_integer().to_i32() {
                return num_traits::pow::checked_pow(self.clone(), e.unsigned_abs() as usize)
                    .map(|p| if e < 0 { p.recip() } else { p })
                    .expect("rational power");
            }
        }
        rational_from_f64(self.to_f64_lossy().powf(exponent.to_f64_lossy()))
    }

    fn is_finite(&self) -> bool {
        true
    }

    fn alpha_root(&self, alpha: &Self) -> Self {
        if alpha.is_one() {
            return self.clone();
        }
        if alpha.is_integer() && alpha.is_positive() {
            if let Some(k) = alpha.to_integer().to_u32() {
                if let Some(r) = exact_rational_root(self, k) {
                    return r;
                }
            }
        }
        rational_from_f64((self.to_f64_lossy().ln() / alpha.to_f64_lossy()).exp())
    }
}

/// Shorthand for building a rational from a numerator and denominator.
pub fn ratio(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}
