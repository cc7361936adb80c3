//! Absolute-deviation cost with a moving target,
//!
//! ```text
//! J(t, α) = ∫_t^T |α_s − K(t, s)| ds,    K(t, s) = 2 (s − t),
//! ```
//!
//! where the naive strategy (play the time-`t` optimum at time `t`) is the
//! zero control and is beaten at every `t < T` by `α_s = T − s`.

use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::control::{PiecewiseControl, Segment};
use crate::error::{Error, Result};
use crate::rational::{self, int, ratio, Rational};

/// Target `K(t, s) = slope · (s − t)` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviationKernel {
    #[serde(with = "rational::serde_str")]
    pub horizon: Rational,
    #[serde(with = "rational::serde_str")]
    pub slope: Rational,
}

impl Default for DeviationKernel {
    fn default() -> Self {
        DeviationKernel { horizon: int(1), slope: int(2) }
    }
}

impl DeviationKernel {
    pub fn new(horizon: Rational) -> Result<Self> {
        if !horizon.is_positive() {
            return Err(Error::Domain("horizon must be positive".into()));
        }
        Ok(DeviationKernel { horizon, slope: int(2) })
    }

    pub fn target(&self, t: &Rational, s: &Rational) -> Rational {
        &self.slope * (s - t)
    }

    fn check_time(&self, t: &Rational) -> Result<()> {
        if t.is_negative() || *t > self.horizon {
            return Err(Error::Domain(format!(
                "time {} outside [0, {}]",
                rational::format(t),
                rational::format(&self.horizon)
            )));
        }
        Ok(())
    }
}

/// `∫_a^b |p + q s| ds`, split at the root when it lies inside `(a, b)`.
fn abs_affine_integral(p: &Rational, q: &Rational, a: &Rational, b: &Rational) -> Rational {
    let integral = |lo: &Rational, hi: &Rational| p * (hi - lo) + q * (hi * hi - lo * lo) / int(2);
    if !q.is_zero() {
        let root = -p / q;
        if root > *a && root < *b {
            return integral(a, &root).abs() + integral(&root, b).abs();
        }
    }
    integral(a, b).abs()
}

/// Exact `J(t, α) = ∫_t^T |α_s − K(t, s)| ds`.
pub fn cost_naive_j(t: &Rational, control: &PiecewiseControl, kernel: &DeviationKernel) -> Result<Rational> {
    kernel.check_time(t)?;
    if *control.horizon() != kernel.horizon {
        return Err(Error::Domain(format!(
            "control horizon {} does not match kernel horizon {}",
            rational::format(control.horizon()),
            rational::format(&kernel.horizon)
        )));
    }
    if control.tail().is_some() {
        return Err(Error::Domain("deviation cost needs a finite piecewise-linear control".into()));
    }
    let segs = control.segments();
    let mut total = Rational::zero();
    for (i, seg) in segs.iter().enumerate() {
        let end = segs.get(i + 1).map(|s| &s.start).unwrap_or(&kernel.horizon);
        if *end <= *t {
            continue;
        }
        let start = rational::max(&seg.start, t);
        // α_s − K(t, s) = (c0 + slope·t) + (c1 − slope) s
        let p = &seg.c0 + &kernel.slope * t;
        let q = &seg.c1 - &kernel.slope;
        total += abs_affine_integral(&p, &q, &start, end);
    }
    Ok(total)
}

/// The time-`t` optimum `s ↦ K(t, s)`, extended affinely to `[0, T]`.
pub fn pointwise_optimal(t: &Rational, kernel: &DeviationKernel) -> Result<PiecewiseControl> {
    kernel.check_time(t)?;
    let seg = Segment { start: Rational::zero(), c0: -&kernel.slope * t, c1: kernel.slope.clone() };
    PiecewiseControl::new(kernel.horizon.clone(), None, vec![seg], None)
}

/// `α*_t = K(t, t) = 0`.
pub fn naive_strategy(kernel: &DeviationKernel) -> PiecewiseControl {
    PiecewiseControl::new(
        kernel.horizon.clone(),
        None,
        vec![Segment::constant(Rational::zero(), Rational::zero())],
        None,
    )
    .expect("zero control is valid")
}

/// `α̂_t = T − t`.
pub fn dominating_strategy(kernel: &DeviationKernel) -> PiecewiseControl {
    let seg = Segment { start: Rational::zero(), c0: kernel.horizon.clone(), c1: int(-1) };
    PiecewiseControl::new(kernel.horizon.clone(), None, vec![seg], None).expect("affine control is valid")
}

/// `(T − t)²`.
pub fn naive_cost_closed(t: &Rational, kernel: &DeviationKernel) -> Rational {
    let rest = &kernel.horizon - t;
    &rest * &rest
}

/// `(5/6)(T − t)²`.
pub fn dominating_cost_closed(t: &Rational, kernel: &DeviationKernel) -> Rational {
    ratio(5, 6) * naive_cost_closed(t, kernel)
}

#[derive(Debug, Clone, Serialize)]
pub struct InconsistencyReport {
    #[serde(with = "rational::serde_str")]
    pub t1: Rational,
    #[serde(with = "rational::serde_str")]
    pub t2: Rational,
    #[serde(with = "rational::serde_str")]
    pub s: Rational,
    #[serde(with = "rational::serde_str")]
    pub target_from_t1: Rational,
    #[serde(with = "rational::serde_str")]
    pub target_from_t2: Rational,
    /// `K(t1, s) − K(t2, s) = 2 (t2 − t1)`, never 0.
    #[serde(with = "rational::serde_str")]
    pub difference: Rational,
}

/// The plan made at `t1` for time `s` differs from the plan made at `t2`.
pub fn inconsistency_check(
    t1: &Rational,
    t2: &Rational,
    s: &Rational,
    kernel: &DeviationKernel,
) -> Result<InconsistencyReport> {
    if !(t1 < t2 && t2 <= s && *s <= kernel.horizon && !t1.is_negative()) {
        return Err(Error::Domain(format!(
            "need 0 <= t1 < t2 <= s <= T, got t1 = {}, t2 = {}, s = {}",
            rational::format(t1),
            rational::format(t2),
            rational::format(s)
        )));
    }
    let a = kernel.target(t1, s);
    let b = kernel.target(t2, s);
    Ok(InconsistencyReport {
        t1: t1.clone(),
        t2: t2.clone(),
        s: s.clone(),
        difference: &a - &b,
        target_from_t1: a,
        target_from_t2: b,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NaiveRow {
    #[serde(with = "rational::serde_str")]
    pub t: Rational,
    #[serde(with = "rational::serde_str")]
    pub j_naive: Rational,
    #[serde(with = "rational::serde_str")]
    pub j_dominating: Rational,
    /// `J(t, α̂) − J(t, α*)`.
    #[serde(with = "rational::serde_str")]
    pub margin: Rational,
    /// `J(t, α̂) / J(t, α*)`; absent at `t = T`.
    #[serde(with = "rational::serde_opt")]
    pub ratio: Option<Rational>,
    /// Both evaluations equal their closed forms.
    pub closed_form_match: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NaiveTable {
    pub kernel: DeviationKernel,
    pub rows: Vec<NaiveRow>,
    /// Every margin with `t < T` is negative and the margin at `T` is 0.
    pub dominates: bool,
    pub closed_forms_match: bool,
}

impl NaiveTable {
    /// CSV rows `t,J_naive,J_dominating,margin,ratio`; with `precision`,
    /// decimal columns are followed by the exact `p/q` columns.
    pub fn to_csv(&self, precision: Option<usize>) -> String {
        let mut out = String::from(match precision {
            Some(_) => "t,J_naive,J_dominating,margin,ratio,t_exact,J_naive_exact,J_dominating_exact,margin_exact,ratio_exact\n",
            None => "t,J_naive,J_dominating,margin,ratio\n",
        });
        for row in &self.rows {
            let vals = [
                Some(&row.t),
                Some(&row.j_naive),
                Some(&row.j_dominating),
                Some(&row.margin),
                row.ratio.as_ref(),
            ];
            let exact: Vec<String> =
                vals.iter().map(|v| v.map(rational::format).unwrap_or_default()).collect();
            match precision {
                Some(digits) => {
                    let dec: Vec<String> = vals
                        .iter()
                        .map(|v| v.map(|r| rational::to_decimal(r, digits)).unwrap_or_default())
                        .collect();
                    writeln!(out, "{},{}", dec.join(","), exact.join(",")).expect("string write");
                }
                None => writeln!(out, "{}", exact.join(",")).expect("string write"),
            }
        }
        out
    }
}

/// Evaluates both strategies exactly at `times` and checks them against
/// the closed forms.
pub fn naive_table(kernel: &DeviationKernel, times: &[Rational]) -> Result<NaiveTable> {
    let naive = naive_strategy(kernel);
    let dominating = dominating_strategy(kernel);
    let mut rows = Vec::with_capacity(times.len());
    for t in times {
        let j_naive = cost_naive_j(t, &naive, kernel)?;
        let j_dominating = cost_naive_j(t, &dominating, kernel)?;
        let closed_form_match =
            j_naive == naive_cost_closed(t, kernel) && j_dominating == dominating_cost_closed(t, kernel);
        let ratio = (!j_naive.is_zero()).then(|| &j_dominating / &j_naive);
        rows.push(NaiveRow {
            t: t.clone(),
            margin: &j_dominating - &j_naive,
            j_naive,
            j_dominating,
            ratio,
            closed_form_match,
        });
    }
    let dominates =
        rows.iter().all(|r| if r.t < kernel.horizon { r.margin.is_negative() } else { r.margin.is_zero() });
    let closed_forms_match = rows.iter().all(|r| r.closed_form_match);
    Ok(NaiveTable { kernel: kernel.clone(), rows, dominates, closed_forms_match })
}

/// `T · k / 2^depth` for `k = 0, …, 2^depth`.
pub fn uniform_times(kernel: &DeviationKernel, depth: u32) -> Vec<Rational> {
    let n = 1i64 << depth;
    (0..=n).map(|k| &kernel.horizon * ratio(k, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_examples() {
        let k = DeviationKernel::default();
        for t in [int(0), ratio(1, 3), ratio(7, 8)] {
            assert_eq!(cost_naive_j(&t, &pointwise_optimal(&t, &k).unwrap(), &k).unwrap(), int(0));
            assert_eq!(cost_naive_j(&t, &naive_strategy(&k), &k).unwrap(), naive_cost_closed(&t, &k));
        }
        assert_eq!(cost_naive_j(&int(0), &dominating_strategy(&k), &k).unwrap(), ratio(5, 6));
        assert!(cost_naive_j(&int(2), &naive_strategy(&k), &k).is_err());
        let hat = PiecewiseControl::alpha_hat(&crate::schedule::DyadicSchedule::new(2).unwrap());
        assert!(cost_naive_j(&int(0), &hat, &k).is_err());
    }

    #[test]
    fn strategy_examples() {
        let k = DeviationKernel::default();
        let opt = pointwise_optimal(&int(0), &k).unwrap();
        assert_eq!(opt.evaluate(&ratio(1, 4)).unwrap(), ratio(1, 2));
        assert_eq!(cost_naive_j(&int(1), &pointwise_optimal(&int(1), &k).unwrap(), &k).unwrap(), int(0));
        assert_eq!(naive_strategy(&k).evaluate(&ratio(2, 3)).unwrap(), int(0));
        assert_eq!(naive_strategy(&k).bound(), None);
        let half = ratio(1, 2);
        assert_eq!(cost_naive_j(&half, &naive_strategy(&k), &k).unwrap(), ratio(1, 4));
        assert_eq!(cost_naive_j(&half, &dominating_strategy(&k), &k).unwrap(), ratio(5, 24));
        let k2 = DeviationKernel::new(int(2)).unwrap();
        assert_eq!(cost_naive_j(&int(1), &naive_strategy(&k2), &k2).unwrap(), int(1));
        assert_eq!(cost_naive_j(&int(1), &dominating_strategy(&k2), &k2).unwrap(), ratio(5, 6));
    }

    #[test]
    fn inconsistency_examples() {
        let k = DeviationKernel::default();
        let r = inconsistency_check(&int(0), &ratio(1, 2), &ratio(3, 4), &k).unwrap();
        assert_eq!(r.difference, int(1));
        let r = inconsistency_check(&int(0), &ratio(1, 4), &ratio(1, 4), &k).unwrap();
        assert_eq!((r.target_from_t1, r.target_from_t2), (ratio(1, 2), int(0)));
        let t = ratio(1, 3);
        assert!(inconsistency_check(&t, &t, &ratio(1, 2), &k).is_err());
    }

    #[test]
    fn table_and_csv() {
        let k = DeviationKernel::default();
        let table = naive_table(&k, &uniform_times(&k, 2)).unwrap();
        assert!(table.dominates && table.closed_forms_match);
        let first = &table.rows[0];
        assert_eq!((first.j_naive.clone(), first.j_dominating.clone()), (int(1), ratio(5, 6)));
        assert_eq!(first.margin, ratio(-1, 6));
        let last = table.rows.last().unwrap();
        assert_eq!((last.margin.clone(), last.ratio.clone()), (int(0), None));
        let csv = table.to_csv(None);
        assert!(csv.starts_with("t,J_naive,J_dominating,margin,ratio\n0/1,1/1,5/6,-1/6,5/6\n"));
        assert!(csv.ends_with("1/1,0/1,0/1,0/1,\n"));
    }
}
