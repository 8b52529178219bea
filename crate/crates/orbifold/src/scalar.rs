//! Dual-mode scalars.
//!
//! Every quantity in a group or quotient computation is either an exact
//! rational (arbitrary precision) or a 64-bit float compared against an
//! explicit tolerance. A whole object (matrix, group, presentation) lives in
//! one mode; mixing modes in arithmetic is a programming error and panics.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Numeric regime for a computation: exact rationals or floats with a
/// comparison tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarMode {
    Exact,
    Approx { tolerance: f64 },
}

impl ScalarMode {
    pub const DEFAULT_TOLERANCE: f64 = 1e-9;

    pub fn approx_default() -> Self {
        ScalarMode::Approx {
            tolerance: Self::DEFAULT_TOLERANCE,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ScalarMode::Exact)
    }

    /// Comparison tolerance: zero in exact mode.
    pub fn tolerance(&self) -> f64 {
        match self {
            ScalarMode::Exact => 0.0,
            ScalarMode::Approx { tolerance } => *tolerance,
        }
    }
}

/// A number in one of the two modes.
#[derive(Debug, Clone)]
pub enum Scalar {
    Exact(BigRational),
    Approx(f64),
}

impl Scalar {
    pub fn zero(mode: ScalarMode) -> Self {
        match mode {
            ScalarMode::Exact => Scalar::Exact(BigRational::zero()),
            ScalarMode::Approx { .. } => Scalar::Approx(0.0),
        }
    }

    pub fn one(mode: ScalarMode) -> Self {
        Scalar::from_int(1, mode)
    }

    pub fn from_int(v: i64, mode: ScalarMode) -> Self {
        match mode {
            ScalarMode::Exact => Scalar::Exact(BigRational::from_integer(BigInt::from(v))),
            ScalarMode::Approx { .. } => Scalar::Approx(v as f64),
        }
    }

    pub fn from_ratio(num: i64, den: i64, mode: ScalarMode) -> Self {
        assert!(den != 0, "zero denominator");
        match mode {
            ScalarMode::Exact => {
                Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
            }
            ScalarMode::Approx { .. } => Scalar::Approx(num as f64 / den as f64),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Scalar::Approx(x) => *x,
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.abs()),
            Scalar::Approx(x) => Scalar::Approx(x.abs()),
        }
    }

    pub fn is_zero_within(&self, tol: f64) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Approx(x) => x.abs() <= tol,
        }
    }

    pub fn eq_within(&self, other: &Scalar, tol: f64) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            (Scalar::Approx(a), Scalar::Approx(b)) => (a - b).abs() <= tol,
            _ => panic!("mixed exact/approx scalars in comparison"),
        }
    }

    /// Exact ordering in exact mode, raw float ordering otherwise.
    pub fn raw_cmp(&self, other: &Scalar) -> Ordering {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp(b),
            (Scalar::Approx(a), Scalar::Approx(b)) => {
                a.partial_cmp(b).expect("NaN in scalar comparison")
            }
            _ => panic!("mixed exact/approx scalars in comparison"),
        }
    }

    /// Parse one number field: decimal (`-1.25`, `3e-2`) or, in exact mode
    /// only, a rational `p/q` or plain integer. Exact mode rejects decimal
    /// points and exponents so that file data cannot silently lose precision.
    pub fn parse(text: &str, mode: ScalarMode) -> Result<Scalar> {
        let s = text.trim();
        match mode {
            ScalarMode::Exact => {
                if let Some((num, den)) = s.split_once('/') {
                    let n = BigInt::from_str(num.trim()).map_err(|_| bad(s, "rational"))?;
                    let d = BigInt::from_str(den.trim()).map_err(|_| bad(s, "rational"))?;
                    if d.is_zero() {
                        return Err(bad(s, "rational with nonzero denominator"));
                    }
                    Ok(Scalar::Exact(BigRational::new(n, d)))
                } else {
                    let n = BigInt::from_str(s).map_err(|_| {
                        Error::Parse {
                            path: String::new(),
                            detail: format!(
                                "exact mode requires integer or p/q rational, got `{s}`"
                            ),
                        }
                    })?;
                    Ok(Scalar::Exact(BigRational::from_integer(n)))
                }
            }
            ScalarMode::Approx { .. } => {
                if s.contains('/') {
                    let (num, den) = s.split_once('/').unwrap();
                    let n: f64 = num.trim().parse().map_err(|_| bad(s, "number"))?;
                    let d: f64 = den.trim().parse().map_err(|_| bad(s, "number"))?;
                    if d == 0.0 {
                        return Err(bad(s, "rational with nonzero denominator"));
                    }
                    return Ok(Scalar::Approx(n / d));
                }
                let x: f64 = s.parse().map_err(|_| bad(s, "number"))?;
                if !x.is_finite() {
                    return Err(bad(s, "finite number"));
                }
                Ok(Scalar::Approx(x))
            }
        }
    }

    /// Render so that `parse` round-trips in the same mode.
    pub fn render(&self) -> String {
        match self {
            Scalar::Exact(r) => {
                if r.is_integer() {
                    r.numer().to_string()
                } else {
                    format!("{}/{}", r.numer(), r.denom())
                }
            }
            Scalar::Approx(x) => format_f64(*x),
        }
    }

    pub fn from_f64(x: f64) -> Scalar {
        Scalar::Approx(x)
    }

    /// Exact conversion of a float into a rational (used when planting
    /// float-derived data into exact fixtures).
    pub fn exact_from_f64(x: f64) -> Option<Scalar> {
        BigRational::from_f64(x).map(Scalar::Exact)
    }
}

fn bad(s: &str, wanted: &str) -> Error {
    Error::Parse {
        path: String::new(),
        detail: format!("expected {wanted}, got `{s}`"),
    }
}

/// Shortest decimal form that round-trips through `f64`.
pub fn format_f64(x: f64) -> String {
    let mut s = format!("{x}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a $op b),
                    (Scalar::Approx(a), Scalar::Approx(b)) => Scalar::Approx(a $op b),
                    _ => panic!("mixed exact/approx scalars in arithmetic"),
                }
            }
        }
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
    };
}

scalar_binop!(Add, add, +);
scalar_binop!(Sub, sub, -);
scalar_binop!(Mul, mul, *);

impl Div for &Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => {
                assert!(!b.is_zero(), "exact division by zero");
                Scalar::Exact(a / b)
            }
            (Scalar::Approx(a), Scalar::Approx(b)) => Scalar::Approx(a / b),
            _ => panic!("mixed exact/approx scalars in arithmetic"),
        }
    }
}

impl Div for Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        (&self).div(&rhs)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(-r),
            Scalar::Approx(x) => Scalar::Approx(-x),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals_in_exact_mode() {
        let s = Scalar::parse("-3/4", ScalarMode::Exact).unwrap();
        assert_eq!(s.render(), "-3/4");
        assert_eq!(s.to_f64(), -0.75);
        let i = Scalar::parse("7", ScalarMode::Exact).unwrap();
        assert_eq!(i.render(), "7");
    }

    #[test]
    fn exact_mode_rejects_decimal_strings() {
        let err = Scalar::parse("0.5", ScalarMode::Exact).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("exact mode requires"), "got: {msg}");
    }

    #[test]
    fn approx_mode_accepts_decimals_and_fractions() {
        let mode = ScalarMode::approx_default();
        assert_eq!(Scalar::parse("0.5", mode).unwrap().to_f64(), 0.5);
        assert_eq!(Scalar::parse("1/2", mode).unwrap().to_f64(), 0.5);
        assert!(Scalar::parse("inf", mode).is_err());
    }

    #[test]
    fn arithmetic_stays_in_mode() {
        let a = Scalar::from_ratio(1, 3, ScalarMode::Exact);
        let b = Scalar::from_ratio(1, 6, ScalarMode::Exact);
        assert_eq!((&a + &b).render(), "1/2");
        assert_eq!((&a - &b).render(), "1/6");
        assert_eq!((&a * &b).render(), "1/18");
        assert_eq!((&a / &b).render(), "2");
    }

    #[test]
    fn equality_uses_tolerance_in_approx_mode() {
        let a = Scalar::Approx(1.0);
        let b = Scalar::Approx(1.0 + 5e-10);
        assert!(a.eq_within(&b, 1e-9));
        assert!(!a.eq_within(&b, 1e-12));
    }

    #[test]
    fn render_round_trips() {
        for text in ["0.1", "-2.5", "1e-9", "123456.789"] {
            let mode = ScalarMode::approx_default();
            let s = Scalar::parse(text, mode).unwrap();
            let again = Scalar::parse(&s.render(), mode).unwrap();
            assert_eq!(s.to_f64(), again.to_f64());
        }
    }
}
