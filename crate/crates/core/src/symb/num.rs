//! Numeric constants of the expression engine.
//!
//! Constants stay exact rationals for as long as the arithmetic allows and
//! degrade to `f64` on overflow or on contact with a transcendental value.

use core::cmp::Ordering;
use core::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, Float, One, Signed, ToPrimitive, Zero};

#[derive(Clone, Copy, Debug)]
pub enum Num {
    Rat(Ratio<i64>),
    Float(f64),
}

impl Num {
    pub const ZERO: Num = Num::Rat(Ratio::new_raw(0, 1));
    pub const ONE: Num = Num::Rat(Ratio::new_raw(1, 1));

    pub fn int(v: i64) -> Num {
        Num::Rat(Ratio::from_integer(v))
    }

    /// `p / q`; panics on `q == 0` like `Ratio::new`.
    pub fn ratio(p: i64, q: i64) -> Num {
        Num::Rat(Ratio::new(p, q))
    }

    pub fn float(v: f64) -> Num {
        Num::Float(v)
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Num::Rat(r) => *r.numer() as f64 / *r.denom() as f64,
            Num::Float(f) => f,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Num::Rat(r) => r.is_zero(),
            Num::Float(f) => f == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Num::Rat(r) => r.is_one(),
            Num::Float(f) => f == 1.0,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Num::Rat(_))
    }

    pub fn is_negative(self) -> bool {
        match self {
            Num::Rat(r) => r.is_negative(),
            Num::Float(f) => f < 0.0,
        }
    }

    pub fn add(self, other: Num) -> Num {
        match (self, other) {
            (Num::Rat(a), Num::Rat(b)) => match a.checked_add(&b) {
                Some(r) => Num::Rat(r),
                None => Num::Float(self.to_f64() + other.to_f64()),
            },
            _ => Num::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(self, other: Num) -> Num {
        match (self, other) {
            (Num::Rat(a), Num::Rat(b)) => match a.checked_mul(&b) {
                Some(r) => Num::Rat(r),
                None => Num::Float(self.to_f64() * other.to_f64()),
            },
            _ => Num::Float(self.to_f64() * other.to_f64()),
        }
    }

    pub fn neg(self) -> Num {
        match self {
            Num::Rat(r) => match r.numer().checked_neg() {
                Some(n) => Num::Rat(Ratio::new_raw(n, *r.denom())),
                None => Num::Float(-self.to_f64()),
            },
            Num::Float(f) => Num::Float(-f),
        }
    }

    /// Multiplicative inverse; `None` for an exact zero.
    pub fn recip(self) -> Option<Num> {
        match self {
            Num::Rat(r) => {
                if r.is_zero() {
                    None
                } else if *r.numer() == i64::MIN {
                    Some(Num::Float(1.0 / self.to_f64()))
                } else {
                    Some(Num::Rat(r.recip()))
                }
            }
            Num::Float(f) => Some(Num::Float(1.0 / f)),
        }
    }

    /// Integer power. `None` when raising an exact zero to a negative power.
    pub fn powi(self, n: i32) -> Option<Num> {
        if n < 0 {
            return self.recip()?.powi(n.checked_neg()?);
        }
        let mut base = self;
        let mut e = n as u32;
        let mut acc = Num::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(base);
            }
        }
        Some(acc)
    }

    /// Total order used for canonical term sorting.
    pub fn total_cmp(&self, other: &Num) -> Ordering {
        match (self, other) {
            (Num::Rat(a), Num::Rat(b)) => a.cmp(b),
            (Num::Rat(_), Num::Float(_)) => Ordering::Less,
            (Num::Float(_), Num::Rat(_)) => Ordering::Greater,
            (Num::Float(a), Num::Float(b)) => a.total_cmp(b),
        }
    }

    /// Exact numerator/denominator, if rational.
    pub fn as_ratio(self) -> Option<(i64, i64)> {
        match self {
            Num::Rat(r) => Some((*r.numer(), *r.denom())),
            Num::Float(_) => None,
        }
    }

    /// Absolute value as `f64`, for magnitude comparisons.
    pub fn abs_f64(self) -> f64 {
        match self {
            Num::Rat(r) => r.abs().to_f64().unwrap_or(f64::INFINITY),
            Num::Float(f) => f.abs(),
        }
    }
}

impl PartialEq for Num {
    fn eq(&self, other: &Num) -> bool {
        self.total_cmp(other) == Ordering::Equal
    }
}

impl Eq for Num {}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Rat(r) => {
                if r.is_integer() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Num::Float(v) => {
                if v.is_finite() && *v == Float::trunc(*v) && v.abs() < 1e15 {
                    // keep the float visible as a float literal
                    write!(f, "{v:.1}")
                } else {
                    write!(f, "{v:?}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overflow_degrades_to_float() {
        let big = Num::int(i64::MAX / 2);
        let s = big.mul(Num::int(4));
        assert!(!s.is_exact());
        assert!((s.to_f64() - 2.0 * i64::MAX as f64).abs() / s.to_f64() < 1e-12);
    }

    #[test]
    fn exact_arithmetic() {
        let a = Num::ratio(1, 3).add(Num::ratio(1, 6));
        assert_eq!(a, Num::ratio(1, 2));
        assert_eq!(Num::ratio(2, 3).powi(-2), Some(Num::ratio(9, 4)));
        assert_eq!(Num::ZERO.powi(-1), None);
        assert!(Num::ratio(-1, 2).is_negative());
    }
}
