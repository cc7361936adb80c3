//! Floating-point backend: adaptive Simpson quadrature of the same
//! functionals the exact engine computes. It shares no integration code
//! with [`crate::dynamics`]; it only reads the control's coefficients.

use crate::control::PiecewiseControl;
use crate::rational::{to_f64, Rational};
use crate::schedule::{self, kernel_value_f64};

/// Generations of a dyadic tail unrolled before the remainder is dropped;
/// the neglected part of `Y²` is below `6 · 4^{-45}`.
pub const TAIL_GENERATIONS: u32 = 45;

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub tol: f64,
    pub max_depth: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { tol: 1e-13, max_depth: 48 }
    }
}

impl Quadrature {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        simpson_step(&f, a, b, fa, fm, fb, whole, self.tol, self.max_depth)
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Float copy of a control with any dyadic tail unrolled.
#[derive(Debug, Clone)]
pub struct FloatControl {
    starts: Vec<f64>,
    c0: Vec<f64>,
    c1: Vec<f64>,
    horizon: f64,
}

impl FloatControl {
    pub fn new(control: &PiecewiseControl) -> Self {
        let unrolled = match control.tail() {
            Some(t) => control.materialize(t.generation.max(TAIL_GENERATIONS)),
            None => control.clone(),
        };
        let segs = unrolled.segments();
        let mut out = FloatControl {
            starts: segs.iter().map(|s| to_f64(&s.start)).collect(),
            c0: segs.iter().map(|s| to_f64(&s.c0)).collect(),
            c1: segs.iter().map(|s| to_f64(&s.c1)).collect(),
            horizon: to_f64(control.horizon()),
        };
        if unrolled.tail().is_some() {
            // unrolled remainder is dropped
            out.starts.push(to_f64(&unrolled.segments_end()));
            out.c0.push(0.0);
            out.c1.push(0.0);
        }
        out
    }

    fn index(&self, t: f64) -> usize {
        self.starts.partition_point(|s| *s <= t).max(1) - 1
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.index(t);
        self.c0[i] + self.c1[i] * t
    }

    /// Value of the segment covering `[a, b]`'s midpoint, as a function.
    fn piece(&self, a: f64, b: f64) -> (f64, f64) {
        let i = self.index(0.5 * (a + b));
        (self.c0[i], self.c1[i])
    }
}

/// Breakpoints of control and kernel in `(from, horizon)`, with both ends.
fn partition(control: &FloatControl, from: f64, with_schedule: bool) -> Vec<f64> {
    let mut cuts: Vec<f64> =
        control.starts.iter().copied().filter(|s| *s > from && *s < control.horizon).collect();
    if with_schedule {
        for n in 0..=TAIL_GENERATIONS {
            for u in [to_f64(&schedule::t_n(n)), to_f64(&schedule::s_n(n))] {
                if u > from && u < control.horizon {
                    cuts.push(u);
                }
            }
        }
    }
    cuts.push(from);
    cuts.push(control.horizon);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    cuts
}

/// `∫_t^T α` by quadrature.
pub fn y1_f64(control: &PiecewiseControl, t: f64, quad: &Quadrature) -> f64 {
    let fc = FloatControl::new(control);
    let cuts = partition(&fc, t, false);
    cuts.windows(2)
        .map(|w| {
            let (c0, c1) = fc.piece(w[0], w[1]);
            quad.integrate(|s| c0 + c1 * s, w[0], w[1])
        })
        .sum()
}

/// `∫_t^1 w(s) α_s Y¹_s ds` by nested quadrature, with `w = c` or `w = 1`.
fn weighted_self_product(control: &PiecewiseControl, t: f64, kernel: bool, quad: &Quadrature) -> f64 {
    let fc = FloatControl::new(control);
    let cuts = partition(&fc, t, kernel);
    let mut y1_right = 0.0;
    let mut total = 0.0;
    for w in cuts.windows(2).rev() {
        let (a, b) = (w[0], w[1]);
        let (c0, c1) = fc.piece(a, b);
        let alpha = |s: f64| c0 + c1 * s;
        let weight = if kernel { kernel_value_f64(0.5 * (a + b)) } else { 1.0 };
        let y1_b = y1_right;
        let y1 = |s: f64| y1_b + quad.integrate(alpha, s, b);
        total += quad.integrate(|s| weight * alpha(s) * y1(s), a, b);
        y1_right = y1(a);
    }
    total
}

/// Float `Y²_t = J(t, α)`.
pub fn y2_f64(control: &PiecewiseControl, t: f64, quad: &Quadrature) -> f64 {
    weighted_self_product(control, t, true, quad)
}

/// Float version of `∫_0^1 α Y¹ − (1/2)(∫ α)²`.
pub fn self_interaction_residual_f64(control: &PiecewiseControl, quad: &Quadrature) -> f64 {
    let total = y1_f64(control, 0.0, quad);
    weighted_self_product(control, 0.0, false, quad) - 0.5 * total * total
}

/// `∫_t^T |α_s - slope (s - t)| ds` by quadrature.
pub fn naive_cost_f64(control: &PiecewiseControl, t: f64, slope: f64, quad: &Quadrature) -> f64 {
    let fc = FloatControl::new(control);
    let cuts = partition(&fc, t, false);
    cuts.windows(2)
        .map(|w| {
            let (c0, c1) = fc.piece(w[0], w[1]);
            quad.integrate(|s| (c0 + c1 * s - slope * (s - t)).abs(), w[0], w[1])
        })
        .sum()
}

pub fn rational_to_f64(value: &Rational) -> f64 {
    to_f64(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;
    use crate::schedule::DyadicSchedule;

    #[test]
    fn simpson_integrates_smooth_and_kinked() {
        let q = Quadrature::default();
        assert!((q.integrate(|x| x.sin(), 0.0, std::f64::consts::PI) - 2.0).abs() < 1e-11);
        assert!((q.integrate(|x| (x - 0.3).abs(), 0.0, 1.0) - 0.29).abs() < 1e-11);
    }

    #[test]
    fn float_alpha_hat_matches_closed_forms() {
        let h = PiecewiseControl::alpha_hat(&DyadicSchedule::new(4).unwrap());
        let q = Quadrature::default();
        assert!((y1_f64(&h, 0.0, &q) - 0.5).abs() < 1e-12);
        assert!((y2_f64(&h, 0.0, &q) + 1.0 / 32.0).abs() < 1e-12);
        assert!((y2_f64(&h, 0.375, &q) + 19.0 / 128.0).abs() < 1e-12);
    }

    #[test]
    fn float_constant_control() {
        let one = PiecewiseControl::constant(int(1));
        let q = Quadrature::default();
        assert!((y2_f64(&one, 0.0, &q) - 31.0 / 32.0).abs() < 1e-12);
        assert!(self_interaction_residual_f64(&one, &q).abs() < 1e-12);
    }
}
