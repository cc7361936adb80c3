//! Exact evaluation of the backward system
//!
//! ```text
//! Y¹_t = ∫_t^1 α_s ds,    Y²_t = ∫_t^1 c(s) α_s Y¹_s ds,    J(t, α) = Y²_t
//! ```
//!
//! On every piece where the control is one polynomial and the kernel is
//! constant, `Y¹` is a polynomial of degree ≤ 2 and `Y²` one of degree ≤ 3,
//! so a backward sweep of exact antiderivatives gives both. The part of the
//! horizon the sweep does not cover is closed in one of two ways: a dyadic
//! tail pattern is self-similar (generation `m` is generation 0 scaled by
//! `2^{-m}` in time and value), and a finite control's last polynomial is
//! integrated against the kernel by the geometric series in
//! [`Weight::integrate`].

use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::control::{DyadicTail, PiecewiseControl, Segment};
use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::rational::{self, int, pow4_neg, Rational};
use crate::schedule::{self, t_n, DyadicSchedule, Location, Weight};

/// Exact `Y¹`, `Y²` on one piece of the merged partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryPiece {
    pub start: Rational,
    pub end: Rational,
    pub weight: Rational,
    pub alpha: Poly,
    pub y1: Poly,
    pub y2: Poly,
}

/// Piecewise-polynomial solution of the backward system on `[from, cutoff]`
/// with exact anchors at `cutoff = t_N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pieces: Vec<TrajectoryPiece>,
    from: Rational,
    cutoff: Rational,
    truncation_depth: u32,
    tail_y1: Rational,
    tail_y2: Rational,
}

impl Trajectory {
    /// Solves on `[from, 1]`, materializing at least `min_depth` generations.
    pub fn solve(
        control: &PiecewiseControl,
        from: &Rational,
        min_depth: u32,
        weight: Weight,
    ) -> Result<Trajectory> {
        if *control.horizon() != int(1) {
            return Err(Error::Domain("the backward system is posed on [0, 1]".into()));
        }
        if from.is_negative() || *from > int(1) {
            return Err(Error::Domain(format!("time {} outside [0, 1]", rational::format(from))));
        }
        if *from == int(1) {
            return Ok(Trajectory {
                pieces: Vec::new(),
                from: from.clone(),
                cutoff: int(1),
                truncation_depth: 0,
                tail_y1: Rational::zero(),
                tail_y2: Rational::zero(),
            });
        }
        let from_generation = schedule::generation(from)?;
        let control = control.compact_tail();
        let (control, depth, tail_y1, tail_y2) = match control.tail().cloned() {
            Some(tail) => {
                let depth = min_depth.max(tail.generation).max(from_generation + 1);
                let control = control.materialize(depth);
                let y1 = tail.integral_from(depth);
                let y2 = pattern_y2_from(&tail, depth, weight)?;
                (control, depth, y1, y2)
            }
            None => {
                let last = control.segments().last().expect("finite control has segments");
                let last_generation = schedule::generation(&last.start)?;
                let depth = min_depth.max(from_generation + 1).max(last_generation + 1);
                let (y1, y2) = last_segment_tail(last, depth, weight)?;
                (control, depth, y1, y2)
            }
        };
        let cutoff = t_n(depth);
        let pieces = sweep(&control, from, &cutoff, &tail_y1, &tail_y2, weight)?;
        Ok(Trajectory { pieces, from: from.clone(), cutoff, truncation_depth: depth, tail_y1, tail_y2 })
    }

    pub fn pieces(&self) -> &[TrajectoryPiece] {
        &self.pieces
    }

    pub fn truncation_depth(&self) -> u32 {
        self.truncation_depth
    }

    pub fn cutoff(&self) -> &Rational {
        &self.cutoff
    }

    /// Exact `Y¹` at the truncation point `t_N`.
    pub fn tail_y1(&self) -> &Rational {
        &self.tail_y1
    }

    /// Exact `Y²` at the truncation point `t_N`.
    pub fn tail_y2(&self) -> &Rational {
        &self.tail_y2
    }

    fn piece_at(&self, t: &Rational) -> Result<Option<&TrajectoryPiece>> {
        if *t < self.from || *t > int(1) {
            return Err(Error::Domain(format!("time {} outside the solved range", rational::format(t))));
        }
        if *t >= self.cutoff {
            if *t == self.cutoff || *t == int(1) {
                return Ok(None);
            }
            return Err(Error::Domain(format!(
                "time {} lies beyond the truncation point",
                rational::format(t)
            )));
        }
        let idx = self.pieces.partition_point(|p| p.start <= *t);
        Ok(Some(&self.pieces[idx - 1]))
    }

    pub fn y1(&self, t: &Rational) -> Result<Rational> {
        Ok(match self.piece_at(t)? {
            Some(p) => p.y1.eval(t),
            None if *t == int(1) => Rational::zero(),
            None => self.tail_y1.clone(),
        })
    }

    pub fn y2(&self, t: &Rational) -> Result<Rational> {
        Ok(match self.piece_at(t)? {
            Some(p) => p.y2.eval(t),
            None if *t == int(1) => Rational::zero(),
            None => self.tail_y2.clone(),
        })
    }

    /// Value at the left end of the solved range.
    pub fn y2_start(&self) -> Rational {
        match self.pieces.first() {
            Some(p) => p.y2.eval(&p.start),
            None => self.tail_y2.clone(),
        }
    }

    pub fn y1_start(&self) -> Rational {
        match self.pieces.first() {
            Some(p) => p.y1.eval(&p.start),
            None => self.tail_y1.clone(),
        }
    }

    /// CSV rows `t,Y1,Y2` on `grid`; with `precision`, decimal columns are
    /// followed by the exact `p/q` columns.
    pub fn to_csv(&self, grid: &[Rational], precision: Option<usize>) -> Result<String> {
        let mut out = String::new();
        match precision {
            Some(_) => out.push_str("t,Y1,Y2,t_exact,Y1_exact,Y2_exact\n"),
            None => out.push_str("t,Y1,Y2\n"),
        }
        for t in grid {
            let row = [t.clone(), self.y1(t)?, self.y2(t)?];
            let exact: Vec<String> = row.iter().map(rational::format).collect();
            match precision {
                Some(digits) => {
                    let dec: Vec<String> = row.iter().map(|v| rational::to_decimal(v, digits)).collect();
                    writeln!(out, "{},{}", dec.join(","), exact.join(",")).expect("string write");
                }
                None => writeln!(out, "{}", exact.join(",")).expect("string write"),
            }
        }
        Ok(out)
    }
}

/// Backward sweep over the merged partition of `[from, cutoff]`.
fn sweep(
    control: &PiecewiseControl,
    from: &Rational,
    cutoff: &Rational,
    tail_y1: &Rational,
    tail_y2: &Rational,
    weight: Weight,
) -> Result<Vec<TrajectoryPiece>> {
    let mut cuts: Vec<Rational> =
        control.segments().iter().map(|s| s.start.clone()).filter(|s| s > from && s < cutoff).collect();
    let mut loc = schedule::locate(from)?;
    loop {
        let (_, end) = loc.interval();
        if end >= *cutoff {
            break;
        }
        cuts.push(end);
        loc = loc.next();
    }
    cuts.push(from.clone());
    cuts.push(cutoff.clone());
    cuts.sort();
    cuts.dedup();

    let mut pieces = Vec::with_capacity(cuts.len() - 1);
    let mut y1_right = tail_y1.clone();
    let mut y2_right = tail_y2.clone();
    for w in cuts.windows(2).rev() {
        let (a, b) = (&w[0], &w[1]);
        let seg = &control.segments()[control.segment_index(a).expect("a >= 0")];
        let alpha = seg.poly();
        let kernel = match weight {
            Weight::Kernel => schedule::kernel_value(a)?,
            Weight::Unit => Rational::one(),
        };
        let anti = alpha.antiderivative();
        // Y¹(s) = Y¹(b) + A(b) - A(s)
        let y1 = &Poly::constant(&y1_right + anti.eval(b)) - &anti;
        let integrand = (&alpha * &y1).scale(&kernel);
        let anti2 = integrand.antiderivative();
        let y2 = &Poly::constant(&y2_right + anti2.eval(b)) - &anti2;
        y1_right = y1.eval(a);
        y2_right = y2.eval(a);
        pieces.push(TrajectoryPiece { start: a.clone(), end: b.clone(), weight: kernel, alpha, y1, y2 });
    }
    pieces.reverse();
    Ok(pieces)
}

/// `(Y¹, Y²)` at `t_depth` for a finite control whose last segment runs to 1.
fn last_segment_tail(last: &Segment, depth: u32, weight: Weight) -> Result<(Rational, Rational)> {
    let start = t_n(depth);
    let alpha = last.poly();
    let anti = alpha.antiderivative();
    let y1 = &Poly::constant(anti.eval(&int(1))) - &anti;
    let integrand = &alpha * &y1;
    let y2 = weight.integrate(&integrand, &start, &int(1))?;
    Ok((y1.eval(&start), y2))
}

/// `Y²` at `t_depth` for a pure dyadic pattern.
///
/// Generation `m` of the pattern contributes `4^{-m} G₀`, where `G₀` is the
/// generation-0 contribution with `Y¹(t_1)` taken from the pattern itself.
fn pattern_y2_from(tail: &DyadicTail, depth: u32, weight: Weight) -> Result<Rational> {
    let generation_zero = PiecewiseControl::dyadic_pattern(tail.a_value.clone(), tail.b_value.clone(), 1);
    let anchor_y1 = tail.integral_from(1);
    let pieces = sweep(&generation_zero, &Rational::zero(), &t_n(1), &anchor_y1, &Rational::zero(), weight)?;
    let g0 = pieces[0].y2.eval(&Rational::zero());
    // Σ_{m >= depth} 4^{-m} = 4^{-depth} · 4/3
    Ok(g0 * pow4_neg(depth) * rational::ratio(4, 3))
}

/// `Y¹_t = ∫_t^T α_s ds`, exact. Works for any horizon.
pub fn y1(control: &PiecewiseControl, t: &Rational) -> Result<Rational> {
    let horizon = control.horizon().clone();
    if t.is_negative() || *t > horizon {
        return Err(Error::Domain(format!("time {} outside [0, T]", rational::format(t))));
    }
    if *t == horizon {
        return Ok(Rational::zero());
    }
    let control = control.covering(t);
    let end = control.segments_end();
    let segs = control.segments();
    let mut total = control.tail().map(|tl| tl.integral_from(tl.generation)).unwrap_or_default();
    let first = control.segment_index(t).expect("t >= 0");
    for (i, seg) in segs.iter().enumerate().skip(first) {
        let lo = if i == first { t.clone() } else { seg.start.clone() };
        let hi = segs.get(i + 1).map(|s| s.start.clone()).unwrap_or_else(|| end.clone());
        total += seg.poly().integrate(&lo, &hi);
    }
    Ok(total)
}

/// `Y²_t = ∫_t^1 c(s) α_s Y¹_s ds`, exact.
pub fn y2(control: &PiecewiseControl, t: &Rational) -> Result<Rational> {
    Ok(Trajectory::solve(control, t, 0, Weight::Kernel)?.y2_start())
}

/// The dynamic cost `J(t, α) = Y²_t`.
pub fn cost_j(t: &Rational, control: &PiecewiseControl) -> Result<Rational> {
    y2(control, t)
}

/// `∫_0^1 α_t Y¹_t dt`, the unweighted self-interaction.
pub fn self_interaction(control: &PiecewiseControl) -> Result<Rational> {
    Ok(Trajectory::solve(control, &Rational::zero(), 0, Weight::Unit)?.y2_start())
}

/// `∫_0^1 α Y¹ dt − (1/2)(∫_0^1 α dt)²`; zero for every control.
pub fn self_interaction_residual(control: &PiecewiseControl) -> Result<Rational> {
    let total = y1(control, &Rational::zero())?;
    Ok(self_interaction(control)? - &total * &total / int(2))
}

/// Breakpoint values `X(u_k)` of a path `X ∈ 𝒳`: 1-Lipschitz with `X_1 = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LipschitzPath {
    depth: u32,
    values: Vec<Rational>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathPoint {
    #[serde(with = "rational::serde_str")]
    pub u: Rational,
    #[serde(with = "rational::serde_str")]
    pub x: Rational,
}

impl LipschitzPath {
    /// Values aligned with `DyadicSchedule::new(depth).breakpoints()`.
    pub fn new(depth: u32, values: Vec<Rational>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Shape("path depth must be at least 1".into()));
        }
        let expected = 2 * depth as usize + 1;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "path of depth {depth} needs {expected} breakpoint values, got {}",
                values.len()
            )));
        }
        let path = LipschitzPath { depth, values };
        path.check_feasible()?;
        Ok(path)
    }

    /// Skips the feasibility check; used by the optimizer's inner loop.
    pub(crate) fn from_raw(depth: u32, values: Vec<Rational>) -> Self {
        LipschitzPath { depth, values }
    }

    pub fn zero(depth: u32) -> Self {
        LipschitzPath { depth, values: vec![Rational::zero(); 2 * depth as usize + 1] }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn times(&self) -> Vec<Rational> {
        breakpoint_times(self.depth)
    }

    pub fn at_t(&self, n: u32) -> &Rational {
        &self.values[2 * n as usize]
    }

    pub fn at_s(&self, n: u32) -> &Rational {
        &self.values[2 * n as usize + 1]
    }

    pub fn check_feasible(&self) -> Result<()> {
        let times = self.times();
        for k in 0..self.values.len() - 1 {
            let gap = &times[k + 1] - &times[k];
            if (&self.values[k + 1] - &self.values[k]).abs() > gap {
                return Err(Error::Admissibility(format!(
                    "path slope exceeds 1 between {} and {}",
                    rational::format(&times[k]),
                    rational::format(&times[k + 1])
                )));
            }
        }
        let last = self.values.last().expect("non-empty");
        if last.abs() > int(1) - times.last().expect("non-empty") {
            return Err(Error::Admissibility(
                "terminal value cannot reach X_1 = 0 with slope at most 1".into(),
            ));
        }
        Ok(())
    }

    /// The control `α = -X'` of the piecewise-linear interpolation, with the
    /// constant slope `X(t_N) / (1 - t_N)` on `[t_N, 1]`.
    pub fn to_control(&self) -> Result<PiecewiseControl> {
        let times = self.times();
        let mut segments = Vec::with_capacity(times.len());
        for k in 0..times.len() - 1 {
            let slope = (&self.values[k + 1] - &self.values[k]) / (&times[k + 1] - &times[k]);
            segments.push(Segment::constant(times[k].clone(), -slope));
        }
        let last_t = times.last().expect("non-empty");
        let last_x = self.values.last().expect("non-empty");
        segments.push(Segment::constant(last_t.clone(), last_x / (int(1) - last_t)));
        PiecewiseControl::new(int(1), Some(int(1)), segments, None)
    }

    pub fn points(&self) -> Vec<PathPoint> {
        self.times().into_iter().zip(self.values.iter().cloned()).map(|(u, x)| PathPoint { u, x }).collect()
    }
}

/// `t_0, s_0, t_1, …, t_depth`.
pub fn breakpoint_times(depth: u32) -> Vec<Rational> {
    let mut out = Vec::with_capacity(2 * depth as usize + 1);
    let mut loc = Location { generation: 0, phase: schedule::Phase::A };
    for _ in 0..2 * depth {
        out.push(loc.interval().0);
        loc = loc.next();
    }
    out.push(t_n(depth));
    out
}

/// `X(u) = Y¹_u` at every schedule breakpoint.
pub fn to_path(control: &PiecewiseControl, schedule: &DyadicSchedule) -> Result<LipschitzPath> {
    control.clone().with_bound(Some(int(1)))?;
    let traj = Trajectory::solve(control, &Rational::zero(), schedule.depth(), Weight::Unit)?;
    let values = schedule.breakpoints().iter().map(|u| traj.y1(u)).collect::<Result<Vec<_>>>()?;
    LipschitzPath::new(schedule.depth(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{pow2_neg, ratio};
    use crate::schedule::s_n;

    fn hat() -> PiecewiseControl {
        PiecewiseControl::alpha_hat(&DyadicSchedule::default())
    }

    #[test]
    fn y1_examples() {
        let zero = PiecewiseControl::zero();
        assert_eq!(y1(&zero, &ratio(1, 3)).unwrap(), int(0));
        assert_eq!(y1(&hat(), &int(0)).unwrap(), ratio(1, 2));
        assert_eq!(y1(&hat(), &ratio(11, 16)).unwrap(), ratio(1, 16));
        assert!(y1(&hat(), &ratio(3, 2)).is_err());
    }

    #[test]
    fn y2_examples() {
        assert_eq!(y2(&PiecewiseControl::zero(), &ratio(1, 5)).unwrap(), int(0));
        assert_eq!(y2(&hat(), &int(0)).unwrap(), ratio(-1, 32));
        assert_eq!(y2(&hat(), &ratio(3, 8)).unwrap(), ratio(-19, 128));
        assert!(y2(&hat(), &ratio(-1, 8)).is_err());
    }

    #[test]
    fn cost_examples() {
        assert_eq!(cost_j(&int(0), &PiecewiseControl::zero()).unwrap(), int(0));
        assert_eq!(cost_j(&ratio(1, 2), &hat()).unwrap(), ratio(-1, 128));
        let spliced =
            PiecewiseControl::constant(int(1)).concat(&PiecewiseControl::zero(), &ratio(1, 4)).unwrap();
        assert_eq!(cost_j(&int(0), &spliced).unwrap(), ratio(1, 32));
    }

    #[test]
    fn y2_matches_closed_form_at_every_generation() {
        let h = hat();
        for n in 0..30 {
            assert_eq!(y2(&h, &t_n(n)).unwrap(), -pow2_neg(2 * n + 5), "n={n}");
        }
    }

    #[test]
    fn shallow_and_deep_alpha_hat_agree() {
        let shallow = PiecewiseControl::alpha_hat(&DyadicSchedule::new(1).unwrap());
        let deep = hat();
        for t in [int(0), ratio(3, 8), ratio(9, 10), ratio(999, 1000)] {
            assert_eq!(y2(&shallow, &t).unwrap(), y2(&deep, &t).unwrap());
            assert_eq!(y1(&shallow, &t).unwrap(), y1(&deep, &t).unwrap());
        }
    }

    #[test]
    fn terminal_conditions() {
        for c in [hat(), PiecewiseControl::constant(int(1)), PiecewiseControl::zero()] {
            assert_eq!(y1(&c, &int(1)).unwrap(), int(0));
            assert_eq!(y2(&c, &int(1)).unwrap(), int(0));
        }
    }

    #[test]
    fn constant_control_matches_hand_integral() {
        // α ≡ 1: Y¹ = 1 - t, Y²_0 = ∫ c (1 - t) = 31/32
        let one = PiecewiseControl::constant(int(1));
        assert_eq!(y2(&one, &int(0)).unwrap(), ratio(31, 32));
        assert_eq!(self_interaction_residual(&one).unwrap(), int(0));
        assert_eq!(self_interaction_residual(&hat()).unwrap(), int(0));
    }

    #[test]
    fn trajectory_pieces_are_continuous() {
        let traj = Trajectory::solve(&hat(), &int(0), 6, Weight::Kernel).unwrap();
        for w in traj.pieces().windows(2) {
            assert_eq!(w[0].y1.eval(&w[0].end), w[1].y1.eval(&w[1].start));
            assert_eq!(w[0].y2.eval(&w[0].end), w[1].y2.eval(&w[1].start));
        }
        let last = traj.pieces().last().unwrap();
        assert_eq!(last.y2.eval(&last.end), *traj.tail_y2());
        assert_eq!(traj.truncation_depth(), 6);
        assert_eq!(traj.tail_y2(), &-pow2_neg(2 * 6 + 5));
        assert_eq!(traj.tail_y1(), &pow2_neg(7));
        assert_eq!(traj.y1(&s_n(2)).unwrap(), y1(&hat(), &s_n(2)).unwrap());
    }

    #[test]
    fn to_path_examples() {
        let sched = DyadicSchedule::new(6).unwrap();
        let zero = to_path(&PiecewiseControl::zero(), &sched).unwrap();
        assert!(zero.values().iter().all(|v| v.is_zero()));
        let h = to_path(&hat(), &sched).unwrap();
        assert_eq!(h.at_t(1), &ratio(1, 4));
        let one = to_path(&PiecewiseControl::constant(int(1)), &sched).unwrap();
        for (u, x) in sched.breakpoints().iter().zip(one.values()) {
            assert_eq!(*x, int(1) - u);
        }
        let two = PiecewiseControl::constant(int(2));
        assert!(matches!(to_path(&two, &sched), Err(Error::Admissibility(_))));
    }

    #[test]
    fn path_round_trip() {
        let sched = DyadicSchedule::new(5).unwrap();
        let path = to_path(&hat(), &sched).unwrap();
        let control = path.to_control().unwrap();
        let again = to_path(&control, &sched).unwrap();
        assert_eq!(again, path);
    }

    #[test]
    fn path_shape_errors() {
        assert!(matches!(LipschitzPath::new(2, vec![int(0); 4]), Err(Error::Shape(_))));
        let steep = vec![int(0), int(1), int(0), int(0), int(0)];
        assert!(matches!(LipschitzPath::new(2, steep), Err(Error::Admissibility(_))));
    }

    #[test]
    fn csv_export() {
        let traj = Trajectory::solve(&hat(), &int(0), 4, Weight::Kernel).unwrap();
        let csv = traj.to_csv(&[int(0), ratio(1, 2), int(1)], Some(6)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,Y1,Y2,t_exact,Y1_exact,Y2_exact");
        assert_eq!(lines[1], "0.000000,0.500000,-0.031250,0/1,1/2,-1/32");
        assert_eq!(lines[3], "1.000000,0.000000,0.000000,1/1,0/1,0/1");
        let plain = traj.to_csv(&[ratio(1, 2)], None).unwrap();
        assert_eq!(plain, "t,Y1,Y2\n1/2,1/4,-1/128\n");
    }
}
