//! Dense univariate polynomials with exact rational coefficients.

use std::ops::{Add, Mul, Neg, Sub};

use num_traits::Zero;

use crate::rational::{int, Rational};

/// Coefficients in increasing degree: `coeffs[k]` multiplies `t^k`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly {
    coeffs: Vec<Rational>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Rational) -> Self {
        Poly::new(vec![c])
    }

    /// `c0 + c1 t`.
    pub fn linear(c0: Rational, c1: Rational) -> Self {
        Poly::new(vec![c0, c1])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * t + c)
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + crate::rational::to_f64(c))
    }

    pub fn scale(&self, k: &Rational) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Antiderivative vanishing at `t = 0`.
    pub fn antiderivative(&self) -> Poly {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(Rational::zero());
        for (k, c) in self.coeffs.iter().enumerate() {
            out.push(c / int(k as i64 + 1));
        }
        Poly::new(out)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c * int(k as i64)).collect())
    }

    /// `∫_a^b p(t) dt`.
    pub fn integrate(&self, a: &Rational, b: &Rational) -> Rational {
        if self.is_zero() {
            return Rational::zero();
        }
        let anti = self.antiderivative();
        anti.eval(b) - anti.eval(a)
    }

    /// Re-expands `p(t)` in the variable `w = 1 - t`; returns `q` with
    /// `q(w) = p(1 - w)`.
    pub fn reflect_about_one(&self) -> Poly {
        // p(1 - w) by Horner in the polynomial ring.
        let one_minus_w = Poly::linear(int(1), int(-1));
        self.coeffs
            .iter()
            .rev()
            .fold(Poly::zero(), |acc, c| &(&acc * &one_minus_w) + &Poly::constant(c.clone()))
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn arithmetic_and_integration() {
        let p = Poly::linear(int(1), int(2)); // 1 + 2t
        let q = Poly::linear(int(-1), int(1)); // t - 1
        let pq = &p * &q; // -1 - t + 2t^2
        assert_eq!(pq.coeffs(), &[int(-1), int(-1), int(2)]);
        assert_eq!(pq.integrate(&int(0), &int(1)), ratio(-5, 6));
        assert_eq!(pq.derivative(), Poly::linear(int(-1), int(4)));
        assert_eq!((&p - &p), Poly::zero());
    }

    #[test]
    fn reflection_round_trips() {
        let p = Poly::new(vec![ratio(1, 3), int(-2), ratio(5, 7), int(4)]);
        let q = p.reflect_about_one();
        for t in [int(0), ratio(1, 3), ratio(7, 8), int(2)] {
            let w = int(1) - &t;
            assert_eq!(p.eval(&t), q.eval(&w));
        }
        assert_eq!(q.reflect_about_one(), p);
    }
}
