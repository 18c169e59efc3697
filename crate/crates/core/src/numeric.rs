//! Small numeric helpers shared by every module: compensated summation,
//! extended reals and grid-rounded comparisons.

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use std::fmt;

/// Spacing of the grid used before strict index comparisons.
pub const GRID: f64 = 1e-12;

/// Masses below this are treated as exactly zero inside `eta`.
pub const ETA_CUTOFF: f64 = 1e-300;

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum of an iterator of floats.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Compensated prefix sums: `out[k]` is the sum of the first `k` entries, so
/// `out` has one more element than `values`.
pub fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    let mut acc = KahanSum::new();
    out.push(0.0);
    for &v in values {
        acc.add(v);
        out.push(acc.value());
    }
    out
}

fn on_grid(x: f64) -> f64 {
    (x / GRID).round()
}

/// `a < b` after rounding both sides to the 1e-12 grid.
pub fn grid_lt(a: f64, b: f64) -> bool {
    on_grid(a) < on_grid(b)
}

/// `a <= b` after rounding both sides to the 1e-12 grid.
pub fn grid_le(a: f64, b: f64) -> bool {
    on_grid(a) <= on_grid(b)
}

/// The entropy kernel `-u ln u` with `eta(0) = 0`.
pub fn eta(u: f64) -> f64 {
    if u < ETA_CUTOFF {
        0.0
    } else {
        -u * u.ln()
    }
}

/// A value in `[-inf, +inf]` where positive infinity is a tag rather than a
/// float. Serialized as a JSON number, or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    /// Wraps a float, mapping `+inf` to the tag.
    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            Extended::Infinite
        } else {
            Extended::Finite(x)
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(*x),
            Extended::Infinite => None,
        }
    }

    /// Float view with the tag mapped back to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        match self {
            Extended::Finite(x) => *x,
            Extended::Infinite => f64::INFINITY,
        }
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Self {
        match self {
            Extended::Finite(x) => Extended::from_f64(f(x)),
            Extended::Infinite => Extended::Infinite,
        }
    }
}

impl std::ops::Add for Extended {
    type Output = Extended;
    fn add(self, rhs: Extended) -> Extended {
        match (self, rhs) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::from_f64(a + b),
            _ => Extended::Infinite,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(x) => write!(f, "{x}"),
            Extended::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(x) => s.serialize_f64(*x),
            Extended::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct ExtendedVisitor;
        impl Visitor<'_> for ExtendedVisitor {
            type Value = Extended;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Extended, E> {
                if v == "inf" {
                    Ok(Extended::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(ExtendedVisitor)
    }
}
