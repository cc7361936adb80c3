//! Exact versus floating evaluation of the dynamic cost.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::control::PiecewiseControl;
use crate::dynamics;
use crate::error::Result;
use crate::numeric::{self, Quadrature};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arithmetic {
    #[default]
    Exact,
    Float,
}

impl Arithmetic {
    /// `J(t, α)` in this arithmetic.
    pub fn cost(&self, t: &Rational, control: &PiecewiseControl) -> Result<Scalar> {
        match self {
            Arithmetic::Exact => Ok(Scalar::Exact(dynamics::cost_j(t, control)?)),
            Arithmetic::Float => {
                let q = Quadrature::default();
                Ok(Scalar::Float(numeric::y2_f64(control, rational::to_f64(t), &q)))
            }
        }
    }
}

/// A value computed in one of the two arithmetics.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Exact(Rational),
    Float(f64),
}

impl Scalar {
    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => rational::to_f64(r),
            Scalar::Float(f) => *f,
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Float(_) => None,
        }
    }

    /// `(self - other) / delta`.
    pub fn difference_quotient(&self, other: &Scalar, delta: &Rational) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact((a - b) / delta),
            _ => Scalar::Float((self.to_f64() - other.to_f64()) / rational::to_f64(delta)),
        }
    }

    /// `self < -tol`, compared exactly when both sides are exact.
    pub fn below_negative(&self, tol: &Rational) -> bool {
        match self {
            Scalar::Exact(r) => *r < -tol,
            Scalar::Float(f) => *f < -rational::to_f64(tol),
        }
    }

    pub fn total_cmp(&self, other: &Scalar) -> Ordering {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp(b),
            _ => self.to_f64().total_cmp(&other.to_f64()),
        }
    }

    pub fn min(self, other: Scalar) -> Scalar {
        if other.total_cmp(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => write!(f, "{}", rational::format(r)),
            Scalar::Float(x) => write!(f, "{x:e}"),
        }
    }
}

/// Exact values serialize as `"p/q"` strings, float values as JSON numbers.
impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Scalar::Exact(r) => s.serialize_str(&rational::format(r)),
            Scalar::Float(x) => s.serialize_f64(*x),
        }
    }
}
