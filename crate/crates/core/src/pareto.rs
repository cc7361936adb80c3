//! Pareto dominance of one control over another:
//! `J(t, cand) < J(t, inc)` for every `t < 1`, with equality at `t = 1`.
//!
//! On every piece of the merged partition both costs are polynomials of
//! degree ≤ 4, so the margin `m = J(·, cand) − J(·, inc)` is bounded on the
//! whole piece, not only at sample points. When the derivative of `m` keeps
//! one sign the supremum is an endpoint value; otherwise the piece is
//! bisected and closed with the bound `m(a) + (b − a) max m'`. Past the
//! last checked generation a dyadic pattern is self-similar, so the margin
//! on generation `n` is `4^{-(n-G)}` times the margin on generation `G` and
//! its sign is settled by generation `G`.

use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::control::{DyadicTail, PiecewiseControl};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::poly::Poly;
use crate::rational::{self, int, pow2_neg, Rational};
use crate::schedule::{self, s_n, t_n, Phase, Weight};

/// Closed form of `Y¹_t` for the alternating control `α̂`:
/// `2^{-(n+3)} + (s_n − t)` on `[t_n, s_n)` and `2^{-(n+2)} − (t_{n+1} − t)`
/// on `[s_n, t_{n+1})`; 0 at `t = 1`.
pub fn y1_hat_closed(t: &Rational) -> Result<Rational> {
    if *t == int(1) {
        return Ok(Rational::zero());
    }
    let loc = schedule::locate(t)?;
    let n = loc.generation;
    Ok(match loc.phase {
        Phase::A => pow2_neg(n + 3) + (s_n(n) - t),
        Phase::B => pow2_neg(n + 2) - (t_n(n + 1) - t),
    })
}

/// `J(t_n, α̂) = −2^{-(2n+5)}`.
pub fn y2_hat_closed(n: i64) -> Result<Rational> {
    if n < 0 {
        return Err(Error::Domain(format!("generation must be non-negative, got {n}")));
    }
    let n = u32::try_from(n).map_err(|_| Error::Domain(format!("generation {n} too large")))?;
    Ok(-pow2_neg(2 * n + 5))
}

/// Upper bound of a polynomial on `[a, b]`. `at` is set when the bound is
/// the exact maximum, attained at that point.
#[derive(Debug, Clone)]
struct Bound {
    value: Rational,
    at: Option<Rational>,
}

const BISECTIONS: u32 = 24;

/// Enclosure `[lo, hi]` of a polynomial's values on `[a, b]`. Exact for
/// degree ≤ 2 (endpoints and vertex); higher degrees recurse on the
/// derivative and fall back to the mean value bound.
fn range(p: &Poly, a: &Rational, b: &Rational) -> (Rational, Rational) {
    let mut points = vec![a.clone(), b.clone()];
    if p.degree() <= 2 {
        if p.degree() == 2 {
            let vertex = -p.coeff(1) / (int(2) * p.coeff(2));
            if vertex > *a && vertex < *b {
                points.push(vertex);
            }
        }
    } else {
        let (lo, hi) = range(&p.derivative(), a, b);
        if lo.is_negative() && hi.is_positive() {
            let pa = p.eval(a);
            let width = b - a;
            return (&pa + &width * lo, pa + width * hi);
        }
    }
    let values: Vec<Rational> = points.iter().map(|t| p.eval(t)).collect();
    let lo = values.iter().min().expect("non-empty").clone();
    let hi = values.iter().max().expect("non-empty").clone();
    (lo, hi)
}

fn supremum(p: &Poly, a: &Rational, b: &Rational, depth: u32) -> Bound {
    let (lo, hi) = range(&p.derivative(), a, b);
    if !lo.is_negative() {
        return Bound { value: p.eval(b), at: Some(b.clone()) };
    }
    if !hi.is_positive() {
        return Bound { value: p.eval(a), at: Some(a.clone()) };
    }
    if depth == 0 {
        return Bound { value: p.eval(a) + (b - a) * hi, at: None };
    }
    let mid = (a + b) / int(2);
    let left = supremum(p, a, &mid, depth - 1);
    let right = supremum(p, &mid, b, depth - 1);
    match left.value.cmp(&right.value) {
        std::cmp::Ordering::Greater => left,
        std::cmp::Ordering::Less => right,
        std::cmp::Ordering::Equal if left.at.is_some() => left,
        std::cmp::Ordering::Equal => right,
    }
}

/// One schedule interval and the certified bound of the margin on it.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalSupremum {
    pub generation: u32,
    pub phase: Phase,
    #[serde(with = "rational::serde_str")]
    pub start: Rational,
    #[serde(with = "rational::serde_str")]
    pub end: Rational,
    #[serde(with = "rational::serde_str")]
    pub supremum: Rational,
    /// True when `supremum` is the exact maximum rather than an upper bound.
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginRow {
    #[serde(with = "rational::serde_str")]
    pub t: Rational,
    #[serde(with = "rational::serde_str")]
    pub j_candidate: Rational,
    #[serde(with = "rational::serde_str")]
    pub j_incumbent: Rational,
    #[serde(with = "rational::serde_str")]
    pub margin: Rational,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailCertificate {
    /// Both controls repeat one dyadic pattern from this generation on.
    pub self_similar_from: Option<u32>,
    /// Margins on generations past the last checked one are `4^{-k}` times
    /// the checked ones, so the checked sign carries over.
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DominanceVerdict {
    Dominates,
    Fails,
    /// No counterexample found, but the margin past the checked generations
    /// could not be certified.
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceWitness {
    #[serde(with = "rational::serde_str")]
    pub t: Rational,
    #[serde(with = "rational::serde_str")]
    pub margin: Rational,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceReport {
    pub generations: u32,
    pub checked_through_generation: u32,
    pub rows: Vec<MarginRow>,
    pub interval_suprema: Vec<IntervalSupremum>,
    pub tail: TailCertificate,
    pub equal_at_horizon: bool,
    pub verdict: DominanceVerdict,
    pub witness: Option<DominanceWitness>,
}

impl DominanceReport {
    pub fn dominates(&self) -> bool {
        self.verdict == DominanceVerdict::Dominates
    }

    /// CSV rows `t,J_hat,J_star,margin`; with `precision`, decimal columns
    /// are followed by the exact `p/q` columns.
    pub fn to_csv(&self, precision: Option<usize>) -> String {
        let mut out = String::from(match precision {
            Some(_) => "t,J_hat,J_star,margin,t_exact,J_hat_exact,J_star_exact,margin_exact\n",
            None => "t,J_hat,J_star,margin\n",
        });
        for row in &self.rows {
            let vals = [&row.t, &row.j_candidate, &row.j_incumbent, &row.margin];
            let exact: Vec<String> = vals.iter().map(|v| rational::format(v)).collect();
            match precision {
                Some(digits) => {
                    let dec: Vec<String> = vals.iter().map(|v| rational::to_decimal(v, digits)).collect();
                    writeln!(out, "{},{}", dec.join(","), exact.join(",")).expect("string write");
                }
                None => writeln!(out, "{}", exact.join(",")).expect("string write"),
            }
        }
        out
    }
}

/// The dyadic pattern a control follows on some `[t_g, 1)`, if any.
fn pattern_tail(control: &PiecewiseControl) -> Option<DyadicTail> {
    let compact = control.compact_tail();
    if let Some(tail) = compact.tail() {
        return Some(tail.clone());
    }
    let last = compact.segments().last()?;
    if !last.c1.is_zero() {
        return None;
    }
    let g = schedule::generation(&last.start).ok()?;
    let generation = if last.start == t_n(g) { g } else { g + 1 };
    Some(DyadicTail { generation, a_value: last.c0.clone(), b_value: last.c0.clone() })
}

fn piece_poly<'a>(traj: &'a Trajectory, t: &Rational) -> &'a Poly {
    let pieces = traj.pieces();
    let idx = pieces.partition_point(|p| p.start <= *t);
    &pieces[idx - 1].y2
}

/// Checks that `candidate` Pareto-dominates `incumbent`, generations
/// `0..generations` at least, on the default execution.
pub fn dominance_check(
    candidate: &PiecewiseControl,
    incumbent: &PiecewiseControl,
    generations: u32,
) -> Result<DominanceReport> {
    dominance_check_with(candidate, incumbent, generations, Execution::default())
}

pub fn dominance_check_with(
    candidate: &PiecewiseControl,
    incumbent: &PiecewiseControl,
    generations: u32,
    execution: Execution,
) -> Result<DominanceReport> {
    if generations == 0 {
        return Err(Error::Configuration("dominance check needs at least one generation".into()));
    }
    for c in [candidate, incumbent] {
        if *c.horizon() != int(1) {
            return Err(Error::Domain("dominance is checked on [0, 1]".into()));
        }
    }
    let patterns = (pattern_tail(candidate), pattern_tail(incumbent));
    let self_similar_from = match &patterns {
        (Some(a), Some(b)) => Some(a.generation.max(b.generation)),
        _ => None,
    };
    // Check generations 0..=last explicitly.
    let last = match self_similar_from {
        Some(g) => g.max(generations - 1),
        None => generations - 1,
    };
    let cutoff = t_n(last + 1);
    let zero = Rational::zero();
    let cand = Trajectory::solve(candidate, &zero, last + 1, Weight::Kernel)?;
    let inc = Trajectory::solve(incumbent, &zero, last + 1, Weight::Kernel)?;

    let mut cuts: Vec<Rational> =
        cand.pieces().iter().chain(inc.pieces()).map(|p| p.start.clone()).filter(|s| *s < cutoff).collect();
    cuts.push(cutoff.clone());
    cuts.sort();
    cuts.dedup();
    let windows: Vec<(Rational, Rational)> = cuts.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    let bounds = par::map(execution, &windows, |(a, b)| {
        let margin = piece_poly(&cand, a) - piece_poly(&inc, a);
        supremum(&margin, a, b, BISECTIONS)
    });

    // Fold sub-pieces into their schedule interval.
    let mut interval_suprema: Vec<IntervalSupremum> = Vec::new();
    let mut witness: Option<DominanceWitness> = None;
    let mut uncertain = false;
    for ((a, _), bound) in windows.iter().zip(bounds) {
        let loc = schedule::locate(a)?;
        if !bound.value.is_negative() {
            match &bound.at {
                Some(t) if witness.is_none() => {
                    witness = Some(DominanceWitness { t: t.clone(), margin: bound.value.clone() })
                }
                Some(_) => {}
                None => uncertain = true,
            }
        }
        match interval_suprema.last_mut() {
            Some(last) if last.generation == loc.generation && last.phase == loc.phase => {
                if bound.value > last.supremum {
                    last.supremum = bound.value;
                    last.exact = bound.at.is_some();
                } else if bound.value == last.supremum {
                    last.exact |= bound.at.is_some();
                }
            }
            _ => {
                let (start, end) = loc.interval();
                interval_suprema.push(IntervalSupremum {
                    generation: loc.generation,
                    phase: loc.phase,
                    start,
                    end,
                    supremum: bound.value,
                    exact: bound.at.is_some(),
                });
            }
        }
    }

    let mut grid: Vec<Rational> = (0..=last).flat_map(|n| [t_n(n), s_n(n)]).collect();
    grid.push(cutoff.clone());
    let mut rows = Vec::with_capacity(grid.len() + 1);
    for t in &grid {
        let jc = cand.y2(t)?;
        let ji = inc.y2(t)?;
        let margin = &jc - &ji;
        if !margin.is_negative() && witness.is_none() {
            witness = Some(DominanceWitness { t: t.clone(), margin: margin.clone() });
        }
        rows.push(MarginRow { t: t.clone(), j_candidate: jc, j_incumbent: ji, margin });
    }
    let horizon = int(1);
    let (jc, ji) = (cand.y2(&horizon)?, inc.y2(&horizon)?);
    let equal_at_horizon = jc == ji;
    rows.push(MarginRow { t: horizon, margin: &jc - &ji, j_candidate: jc, j_incumbent: ji });

    // Earliest counterexample is the most useful one.
    if let Some(w) = &witness {
        let earliest = rows.iter().filter(|r| r.t < int(1) && !r.margin.is_negative()).map(|r| &r.t).min();
        if let Some(t) = earliest.filter(|t| **t < w.t) {
            let row = rows.iter().find(|r| r.t == *t).expect("row exists");
            witness = Some(DominanceWitness { t: t.clone(), margin: row.margin.clone() });
        }
    }

    let certified = self_similar_from.is_some();
    let verdict = if witness.is_some() || !equal_at_horizon {
        DominanceVerdict::Fails
    } else if uncertain || !certified {
        DominanceVerdict::Undetermined
    } else {
        DominanceVerdict::Dominates
    };
    Ok(DominanceReport {
        generations,
        checked_through_generation: last,
        rows,
        interval_suprema,
        tail: TailCertificate { self_similar_from, certified },
        equal_at_horizon,
        verdict,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics;
    use crate::rational::ratio;
    use crate::schedule::DyadicSchedule;

    fn hat() -> PiecewiseControl {
        PiecewiseControl::alpha_hat(&DyadicSchedule::default())
    }

    #[test]
    fn closed_form_y1_examples() {
        assert_eq!(y1_hat_closed(&int(0)).unwrap(), ratio(1, 2));
        assert_eq!(y1_hat_closed(&ratio(3, 8)).unwrap(), ratio(1, 8));
        assert_eq!(y1_hat_closed(&ratio(3, 4)).unwrap(), ratio(1, 8));
        assert_eq!(y1_hat_closed(&int(1)).unwrap(), int(0));
        assert!(y1_hat_closed(&int(2)).is_err());
        let h = hat();
        for k in 0..64 {
            let t = ratio(k, 64);
            assert_eq!(y1_hat_closed(&t).unwrap(), dynamics::y1(&h, &t).unwrap());
        }
    }

    #[test]
    fn closed_form_y2_examples() {
        assert_eq!(y2_hat_closed(0).unwrap(), ratio(-1, 32));
        assert_eq!(y2_hat_closed(1).unwrap(), ratio(-1, 128));
        assert_eq!(y2_hat_closed(5).unwrap(), ratio(-1, 32768));
        assert!(y2_hat_closed(-1).is_err());
    }

    #[test]
    fn supremum_of_cubic() {
        // t(1 - t)(t - 1/2) has interior extrema; the bound must cover them.
        let p = &(&Poly::linear(int(0), int(1)) * &Poly::linear(int(1), int(-1)))
            * &Poly::linear(ratio(-1, 2), int(1));
        let b = supremum(&p, &int(0), &int(1), BISECTIONS);
        let true_max = 3f64.sqrt() / 36.0;
        let v = rational::to_f64(&b.value);
        assert!(v >= true_max - 1e-15 && v < true_max + 1e-6, "{v}");
        let mono = Poly::linear(int(0), int(1));
        let b = supremum(&mono, &int(0), &int(1), 0);
        assert_eq!(b.value, int(1));
        assert_eq!(b.at, Some(int(1)));
    }

    #[test]
    fn alpha_hat_dominates_zero() {
        let r = dominance_check(&hat(), &PiecewiseControl::zero(), 10).unwrap();
        assert_eq!(r.verdict, DominanceVerdict::Dominates);
        assert!(r.equal_at_horizon);
        assert!(r.tail.certified);
        assert!(r.interval_suprema.iter().all(|s| s.supremum.is_negative()));
        for n in 0..10u32 {
            let row = r.rows.iter().find(|row| row.t == t_n(n)).unwrap();
            assert_eq!(row.margin, y2_hat_closed(n as i64).unwrap());
        }
        // sup on [t_n, s_n) is at t_n
        let a0 = &r.interval_suprema[0];
        assert_eq!((a0.phase, a0.supremum.clone(), a0.exact), (Phase::A, ratio(-1, 32), true));
    }

    #[test]
    fn zero_does_not_dominate_itself() {
        let z = PiecewiseControl::zero();
        let r = dominance_check(&z, &z, 4).unwrap();
        assert_eq!(r.verdict, DominanceVerdict::Fails);
        assert_eq!(r.witness.unwrap().t, int(0));
    }

    #[test]
    fn flipped_pattern_fails_with_positive_margin() {
        let flipped = hat().flip_b_intervals().unwrap();
        let r = dominance_check(&flipped, &PiecewiseControl::zero(), 5).unwrap();
        assert_eq!(r.verdict, DominanceVerdict::Fails);
        assert!(r.witness.unwrap().margin.is_positive());
    }

    #[test]
    fn non_pattern_tail_is_undetermined() {
        let ramp = PiecewiseControl::new(
            int(1),
            Some(int(1)),
            vec![
                crate::control::Segment::constant(int(0), int(1)),
                crate::control::Segment::constant(ratio(3, 8), int(-1)),
                crate::control::Segment { start: ratio(1, 2), c0: ratio(-1, 100), c1: ratio(1, 100) },
            ],
            None,
        )
        .unwrap();
        let r = dominance_check(&ramp, &PiecewiseControl::zero(), 3).unwrap();
        assert!(!r.tail.certified);
        assert_ne!(r.verdict, DominanceVerdict::Dominates);
    }

    #[test]
    fn csv_header_and_rows() {
        let r = dominance_check(&hat(), &PiecewiseControl::zero(), 1).unwrap();
        let csv = r.to_csv(None);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,J_hat,J_star,margin"));
        assert_eq!(lines.next(), Some("0/1,-1/32,0/1,-1/32"));
        assert_eq!(csv.lines().last(), Some("1/1,0/1,0/1,0/1"));
    }
}
