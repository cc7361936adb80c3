//! Dyadic breakpoint schedule `t_n = 1 - 2^{-n}`, `s_n = (t_n + 3 t_{n+1}) / 4`
//! and the piecewise-constant kernel `c`, equal to 1 on `[t_n, s_n)` and 6 on
//! `[s_n, t_{n+1})`.
//!
//! The schedule is conceptually infinite and accumulates at the horizon 1.
//! [`DyadicSchedule`] only fixes how many generations are materialized as an
//! explicit breakpoint list; [`locate`], [`kernel_value`] and
//! [`Weight::integrate`] work for every `t < 1`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::rational::{self, int, pow2_neg, Rational};

pub const DEFAULT_DEPTH: u32 = 24;

/// Kernel value on `[t_n, s_n)`.
pub const KERNEL_A: i64 = 1;
/// Kernel value on `[s_n, t_{n+1})`.
pub const KERNEL_B: i64 = 6;

/// `t_n = 1 - 2^{-n}`.
pub fn t_n(n: u32) -> Rational {
    int(1) - pow2_neg(n)
}

/// `s_n = (t_n + 3 t_{n+1}) / 4`.
pub fn s_n(n: u32) -> Rational {
    (t_n(n) + int(3) * t_n(n + 1)) / int(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// `[t_n, s_n)`, kernel 1.
    A,
    /// `[s_n, t_{n+1})`, kernel 6.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub generation: u32,
    pub phase: Phase,
}

impl Location {
    /// Half-open interval `[start, end)` this location names.
    pub fn interval(&self) -> (Rational, Rational) {
        let n = self.generation;
        match self.phase {
            Phase::A => (t_n(n), s_n(n)),
            Phase::B => (s_n(n), t_n(n + 1)),
        }
    }

    pub fn next(&self) -> Location {
        match self.phase {
            Phase::A => Location { generation: self.generation, phase: Phase::B },
            Phase::B => Location { generation: self.generation + 1, phase: Phase::A },
        }
    }

    pub fn kernel(&self) -> Rational {
        match self.phase {
            Phase::A => int(KERNEL_A),
            Phase::B => int(KERNEL_B),
        }
    }
}

fn check_time(t: &Rational) -> Result<()> {
    if *t < Rational::zero() || *t >= Rational::one() {
        return Err(Error::Domain(format!("time {} outside [0, 1)", rational::format(t))));
    }
    Ok(())
}

/// Generation `n` with `t_n <= t < t_{n+1}`.
pub fn generation(t: &Rational) -> Result<u32> {
    check_time(t)?;
    let gap = Rational::one() - t;
    // largest n with 2^{-n} >= gap
    let mut n = 0u32;
    while pow2_neg(n + 1) >= gap {
        n += 1;
    }
    Ok(n)
}

/// Interval membership of `t` in the schedule.
pub fn locate(t: &Rational) -> Result<Location> {
    let generation = generation(t)?;
    let phase = if *t < s_n(generation) { Phase::A } else { Phase::B };
    Ok(Location { generation, phase })
}

/// `c(t)`; right-continuous, so a breakpoint takes the value of the
/// interval starting there.
pub fn kernel_value(t: &Rational) -> Result<Rational> {
    Ok(locate(t)?.kernel())
}

/// Float version of [`kernel_value`] for the numeric backend.
pub fn kernel_value_f64(t: f64) -> f64 {
    let gap = 1.0 - t;
    if gap <= 0.0 {
        return KERNEL_A as f64;
    }
    // scale = 2^{-n} with scale / 2 < gap <= scale
    let mut scale = (-(-gap.log2()).floor()).exp2();
    while gap > scale {
        scale *= 2.0;
    }
    while gap <= scale / 2.0 {
        scale /= 2.0;
    }
    if gap > scale * 5.0 / 8.0 {
        KERNEL_A as f64
    } else {
        KERNEL_B as f64
    }
}

/// Materialized prefix of the schedule: `t_0, s_0, t_1, …, s_{N-1}, t_N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicSchedule {
    #[serde(with = "rational::serde_str")]
    horizon: Rational,
    depth: u32,
    #[serde(with = "rational::serde_vec")]
    breakpoints: Vec<Rational>,
}

impl Default for DyadicSchedule {
    fn default() -> Self {
        DyadicSchedule::new(DEFAULT_DEPTH).expect("default depth is valid")
    }
}

impl DyadicSchedule {
    pub fn new(depth: u32) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Configuration("schedule depth must be at least 1".into()));
        }
        let mut breakpoints = Vec::with_capacity(2 * depth as usize + 1);
        for n in 0..depth {
            breakpoints.push(t_n(n));
            breakpoints.push(s_n(n));
        }
        breakpoints.push(t_n(depth));
        Ok(DyadicSchedule { horizon: int(1), depth, breakpoints })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn horizon(&self) -> &Rational {
        &self.horizon
    }

    /// `u_0 < u_1 < … < u_{2N}`.
    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    /// Last materialized breakpoint `t_N`.
    pub fn last(&self) -> &Rational {
        self.breakpoints.last().expect("non-empty")
    }

    pub fn locate(&self, t: &Rational) -> Result<Location> {
        locate(t)
    }

    pub fn kernel_value(&self, t: &Rational) -> Result<Rational> {
        kernel_value(t)
    }

    /// Parses and validates a serialized schedule.
    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: DyadicSchedule = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let rebuilt = DyadicSchedule::new(parsed.depth)?;
        if rebuilt != parsed {
            return Err(Error::Parse("breakpoints do not match the dyadic schedule".into()));
        }
        Ok(rebuilt)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schedule serializes")
    }
}

/// Integration weight: the kernel `c`, or the constant 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    Kernel,
    Unit,
}

impl Weight {
    /// `∫_a^b w(t) p(t) dt` exactly, for `0 <= a <= b <= 1`. The upper limit
    /// may be the accumulation point 1, where the infinitely many kernel
    /// pieces are summed in closed form.
    pub fn integrate(&self, p: &Poly, a: &Rational, b: &Rational) -> Result<Rational> {
        if *a < Rational::zero() || b > &Rational::one() || a > b {
            return Err(Error::Domain(format!(
                "integration range [{}, {}] not inside [0, 1]",
                rational::format(a),
                rational::format(b)
            )));
        }
        if a == b || p.is_zero() {
            return Ok(Rational::zero());
        }
        match self {
            Weight::Unit => Ok(p.integrate(a, b)),
            Weight::Kernel if b < &Rational::one() => Ok(kernel_integral_finite(p, a, b)),
            Weight::Kernel => {
                let loc = locate(a)?;
                let g = if *a == t_n(loc.generation) { loc.generation } else { loc.generation + 1 };
                let head = kernel_integral_finite(p, a, &t_n(g));
                Ok(head + kernel_tail_sum(p, g))
            }
        }
    }
}

/// Kernel-weighted integral over `[a, b]` with `b < 1`.
fn kernel_integral_finite(p: &Poly, a: &Rational, b: &Rational) -> Rational {
    let mut total = Rational::zero();
    if a >= b {
        return total;
    }
    let mut loc = locate(a).expect("a < b < 1");
    let mut lo = a.clone();
    loop {
        let (_, end) = loc.interval();
        let hi = if end < *b { end } else { b.clone() };
        total += loc.kernel() * p.integrate(&lo, &hi);
        if hi == *b {
            return total;
        }
        lo = hi;
        loc = loc.next();
    }
}

/// `Σ_{n >= g} ∫_{t_n}^{t_{n+1}} c(t) p(t) dt` in closed form.
///
/// With `w = 1 - t`, generation `n` spans `w ∈ (h/2, h]`, `h = 2^{-n}`, and
/// `s_n` sits at `w = (5/8) h`, so each monomial `w^k` contributes a fixed
/// multiple of `h^{k+1}` and the generations form a geometric series.
fn kernel_tail_sum(p: &Poly, g: u32) -> Rational {
    let q = p.reflect_about_one();
    let w_s = int(1) - s_n(0);
    let w_end = int(1) - t_n(1);
    let mut total = Rational::zero();
    for (k, d) in q.coeffs().iter().enumerate() {
        if d.is_zero() {
            continue;
        }
        let e = k as i32 + 1;
        let w_s_e = num_traits::pow(w_s.clone(), e as usize);
        let w_end_e = num_traits::pow(w_end.clone(), e as usize);
        let per_generation = int(KERNEL_A) * (int(1) - &w_s_e) + int(KERNEL_B) * (w_s_e - w_end_e);
        let ratio_e = pow2_neg(e as u32);
        let series = pow2_neg(g * e as u32) / (int(1) - ratio_e);
        total += d / int(e as i64) * per_generation * series;
    }
    total
}
