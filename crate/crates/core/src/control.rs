//! Admissible controls as piecewise-linear functions with an optional
//! schedule-aligned tail, and the splice `α ⊕_τ β` used by spike variations.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::rational::{self, int, Rational};
use crate::schedule::{self, s_n, t_n, DyadicSchedule, Phase};

/// One piece `c0 + c1 t` of a control, valid from `start` to the next piece.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(with = "rational::serde_str")]
    pub start: Rational,
    #[serde(with = "rational::serde_str")]
    pub c0: Rational,
    #[serde(with = "rational::serde_str")]
    pub c1: Rational,
}

impl Segment {
    pub fn constant(start: Rational, value: Rational) -> Self {
        Segment { start, c0: value, c1: Rational::zero() }
    }

    pub fn poly(&self) -> Poly {
        Poly::linear(self.c0.clone(), self.c1.clone())
    }

    pub fn value(&self, t: &Rational) -> Rational {
        &self.c0 + &self.c1 * t
    }
}

/// Infinite pattern beyond `t_generation`: `a_value` on every `[t_n, s_n)`
/// and `b_value` on every `[s_n, t_{n+1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicTail {
    pub generation: u32,
    pub a_value: Rational,
    pub b_value: Rational,
}

impl DyadicTail {
    pub fn is_alpha_hat(&self) -> bool {
        self.a_value == int(1) && self.b_value == int(-1)
    }

    pub fn start(&self) -> Rational {
        t_n(self.generation)
    }

    /// `∫_{t_0}^{t_1}` of the generation-0 copy of the pattern.
    pub fn net_generation_zero(&self) -> Rational {
        &self.a_value * (s_n(0) - t_n(0)) + &self.b_value * (t_n(1) - s_n(0))
    }

    /// Exact `∫_{t_n}^1` of the pattern for `n >= generation`. Generation
    /// `m` contributes `2^{-m}` times the generation-0 integral.
    pub fn integral_from(&self, n: u32) -> Rational {
        self.net_generation_zero() * rational::pow2_neg(n) * int(2)
    }

    fn value(&self, t: &Rational) -> Rational {
        match schedule::locate(t).map(|l| l.phase) {
            Ok(Phase::A) => self.a_value.clone(),
            Ok(Phase::B) => self.b_value.clone(),
            Err(_) => Rational::zero(),
        }
    }
}

/// Piecewise-linear control on `[0, horizon]`.
///
/// Segments are right-open: segment `i` covers `[start_i, start_{i+1})`, and
/// the last one runs to the tail start `t_N` (when a tail is present) or to
/// the horizon. `bound = None` means the admissible set is unbounded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseControl {
    horizon: Rational,
    bound: Option<Rational>,
    segments: Vec<Segment>,
    tail: Option<DyadicTail>,
}

impl PiecewiseControl {
    pub fn new(
        horizon: Rational,
        bound: Option<Rational>,
        segments: Vec<Segment>,
        tail: Option<DyadicTail>,
    ) -> Result<Self> {
        if !horizon.is_positive() {
            return Err(Error::Domain("horizon must be positive".into()));
        }
        if tail.is_some() && horizon != int(1) {
            return Err(Error::Domain("a dyadic tail requires horizon 1".into()));
        }
        let end = match &tail {
            Some(t) => t.start(),
            None => horizon.clone(),
        };
        match segments.first() {
            Some(first) if !first.start.is_zero() => {
                return Err(Error::Domain("first segment must start at 0".into()))
            }
            None if !matches!(&tail, Some(t) if t.generation == 0) => {
                return Err(Error::Domain("a control needs at least one segment".into()))
            }
            _ => {}
        }
        if segments.windows(2).any(|w| w[0].start >= w[1].start) {
            return Err(Error::Domain("segment starts must be strictly increasing".into()));
        }
        if segments.last().is_some_and(|s| s.start >= end) {
            return Err(Error::Domain("segment starts beyond the end of the control".into()));
        }
        let control = PiecewiseControl { horizon, bound, segments, tail };
        control.check_admissible()?;
        Ok(control)
    }

    pub fn constant(value: Rational) -> Self {
        let bound = Some(rational::max(&int(1), &value.abs()));
        PiecewiseControl {
            horizon: int(1),
            bound,
            segments: vec![Segment::constant(Rational::zero(), value)],
            tail: None,
        }
    }

    pub fn zero() -> Self {
        PiecewiseControl::constant(Rational::zero())
    }

    /// Piecewise-constant control from `(start, value)` pairs on `[0, 1]`.
    pub fn piecewise_constant(pieces: &[(Rational, Rational)]) -> Result<Self> {
        let bound = pieces.iter().fold(int(1), |acc, (_, v)| rational::max(&acc, &v.abs()));
        let segments = pieces.iter().map(|(s, v)| Segment::constant(s.clone(), v.clone())).collect();
        PiecewiseControl::new(int(1), Some(bound), segments, None)
    }

    /// `+1` on every `[t_n, s_n)`, `-1` on every `[s_n, t_{n+1})`;
    /// the schedule's generations are explicit, the rest symbolic.
    pub fn alpha_hat(schedule: &DyadicSchedule) -> Self {
        PiecewiseControl::dyadic_pattern(int(1), int(-1), schedule.depth())
    }

    /// Schedule-aligned two-valued pattern with `materialized` explicit generations.
    pub fn dyadic_pattern(a_value: Rational, b_value: Rational, materialized: u32) -> Self {
        let bound = Some(rational::max(&int(1), &rational::max(&a_value.abs(), &b_value.abs())));
        let control = PiecewiseControl {
            horizon: int(1),
            bound,
            segments: Vec::new(),
            tail: Some(DyadicTail { generation: 0, a_value, b_value }),
        };
        control.materialize(materialized)
    }

    pub fn horizon(&self) -> &Rational {
        &self.horizon
    }

    pub fn bound(&self) -> Option<&Rational> {
        self.bound.as_ref()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn tail(&self) -> Option<&DyadicTail> {
        self.tail.as_ref()
    }

    /// Where the explicit segments stop: the tail start, or the horizon.
    pub fn segments_end(&self) -> Rational {
        match &self.tail {
            Some(t) => t.start(),
            None => self.horizon.clone(),
        }
    }

    pub fn with_bound(mut self, bound: Option<Rational>) -> Result<Self> {
        self.bound = bound;
        self.check_admissible()?;
        Ok(self)
    }

    /// Same control with horizon `horizon`; only valid without a tail.
    pub fn with_horizon(mut self, horizon: Rational) -> Result<Self> {
        if self.tail.is_some() {
            return Err(Error::Domain("a dyadic tail requires horizon 1".into()));
        }
        if self.segments.last().is_some_and(|s| s.start >= horizon) {
            return Err(Error::Domain("segments extend beyond the horizon".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn check_admissible(&self) -> Result<()> {
        let Some(bound) = &self.bound else {
            return Ok(());
        };
        let end = self.segments_end();
        for (i, seg) in self.segments.iter().enumerate() {
            let right = self.segments.get(i + 1).map(|s| s.start.clone()).unwrap_or(end.clone());
            for v in [seg.value(&seg.start), seg.value(&right)] {
                if v.abs() > *bound {
                    return Err(Error::Admissibility(format!(
                        "value {} on segment starting at {} exceeds bound {}",
                        rational::format(&v),
                        rational::format(&seg.start),
                        rational::format(bound)
                    )));
                }
            }
        }
        if let Some(t) = &self.tail {
            if t.a_value.abs() > *bound || t.b_value.abs() > *bound {
                return Err(Error::Admissibility("tail pattern exceeds bound".into()));
            }
        }
        Ok(())
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

    /// Index of the segment covering `t`, for `t` below [`Self::segments_end`].
    pub fn segment_index(&self, t: &Rational) -> Option<usize> {
        let idx = self.segments.partition_point(|s| s.start <= *t);
        idx.checked_sub(1)
    }

    /// Right-continuous value at `t`. At the horizon the last segment's
    /// limit is returned; a dyadic tail has no limit at 1 and evaluates to 0 there.
    pub fn evaluate(&self, t: &Rational) -> Result<Rational> {
        self.check_time(t)?;
        if let Some(tail) = &self.tail {
            if *t >= tail.start() {
                return Ok(tail.value(t));
            }
        }
        let idx = self.segment_index(t).expect("t >= 0 = first start");
        Ok(self.segments[idx].value(t))
    }

    /// Explicit segments through generation `generation` (tail start moves to
    /// `t_generation`). No-op for finite controls or already-explicit generations.
    pub fn materialize(&self, generation: u32) -> Self {
        let mut out = self.clone();
        if let Some(tail) = &mut out.tail {
            for n in tail.generation..generation {
                out.segments.push(Segment::constant(t_n(n), tail.a_value.clone()));
                out.segments.push(Segment::constant(s_n(n), tail.b_value.clone()));
            }
            tail.generation = tail.generation.max(generation);
        }
        out
    }

    /// Folds trailing explicit generations that repeat the tail pattern back
    /// into the tail.
    pub fn compact_tail(&self) -> Self {
        let mut out = self.clone();
        if let Some(tail) = &mut out.tail {
            while tail.generation > 0 && out.segments.len() >= 2 {
                let n = tail.generation - 1;
                let len = out.segments.len();
                let a = Segment::constant(t_n(n), tail.a_value.clone());
                let b = Segment::constant(s_n(n), tail.b_value.clone());
                if out.segments[len - 2] != a || out.segments[len - 1] != b {
                    break;
                }
                out.segments.truncate(len - 2);
                tail.generation = n;
            }
        }
        out
    }

    /// Ensures the explicit segments cover `t`.
    pub(crate) fn covering(&self, t: &Rational) -> Self {
        match &self.tail {
            Some(tail) if *t >= tail.start() && *t < int(1) => {
                let g = schedule::generation(t).expect("t in [0, 1)");
                self.materialize(g + 1)
            }
            _ => self.clone(),
        }
    }

    /// `α ⊕_τ β`: `self` on `[0, τ)`, `other` on `[τ, horizon]`.
    pub fn concat(&self, other: &PiecewiseControl, tau: &Rational) -> Result<Self> {
        if self.horizon != other.horizon {
            return Err(Error::Domain("cannot splice controls with different horizons".into()));
        }
        self.check_time(tau)?;
        let bound = match (&self.bound, &other.bound) {
            (Some(a), Some(b)) => Some(rational::max(a, b)),
            _ => None,
        };
        if tau.is_zero() {
            return Ok(PiecewiseControl { bound, ..other.clone() });
        }
        if *tau == self.horizon {
            return Ok(PiecewiseControl { bound, ..self.clone() });
        }
        let head = self.covering(tau);
        let rest = other.covering(tau);
        let mut segments: Vec<Segment> = head.segments.iter().filter(|s| s.start < *tau).cloned().collect();
        let j = rest.segment_index(tau).expect("tau > 0");
        let seg = &rest.segments[j];
        segments.push(Segment { start: tau.clone(), c0: seg.c0.clone(), c1: seg.c1.clone() });
        segments.extend(rest.segments[j + 1..].iter().cloned());
        Ok(PiecewiseControl { horizon: self.horizon.clone(), bound, segments, tail: rest.tail })
    }

    pub fn scaled(&self, k: &Rational) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment { start: s.start.clone(), c0: &s.c0 * k, c1: &s.c1 * k })
            .collect();
        let tail = self.tail.as_ref().map(|t| DyadicTail {
            generation: t.generation,
            a_value: &t.a_value * k,
            b_value: &t.b_value * k,
        });
        let bound = self.bound.as_ref().map(|b| rational::max(b, &(b * k.abs())));
        PiecewiseControl { horizon: self.horizon.clone(), bound, segments, tail }
    }

    /// Pointwise `a·self + b·other` for two controls without tails.
    pub fn combine(&self, a: &Rational, other: &PiecewiseControl, b: &Rational) -> Result<Self> {
        if self.tail.is_some() || other.tail.is_some() {
            return Err(Error::Domain("linear combination needs finite controls".into()));
        }
        if self.horizon != other.horizon {
            return Err(Error::Domain("horizons differ".into()));
        }
        let mut starts: Vec<Rational> =
            self.segments.iter().chain(other.segments.iter()).map(|s| s.start.clone()).collect();
        starts.sort();
        starts.dedup();
        let segments = starts
            .into_iter()
            .map(|start| {
                let p = &self.segments[self.segment_index(&start).unwrap()];
                let q = &other.segments[other.segment_index(&start).unwrap()];
                Segment { c0: a * &p.c0 + b * &q.c0, c1: a * &p.c1 + b * &q.c1, start }
            })
            .collect();
        let bound = match (&self.bound, &other.bound) {
            (Some(x), Some(y)) => Some(x * a.abs() + y * b.abs()),
            _ => None,
        };
        PiecewiseControl::new(self.horizon.clone(), bound, segments, None)
    }

    /// Every segment start, followed by the tail start if any.
    pub fn breakpoints(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = self.segments.iter().map(|s| s.start.clone()).collect();
        if let Some(t) = &self.tail {
            out.push(t.start());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ControlJson::from(self)).expect("control serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: ControlJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        parsed.try_into()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum TailJson {
    Named(String),
    Pattern {
        #[serde(with = "rational::serde_str")]
        a: Rational,
        #[serde(with = "rational::serde_str")]
        b: Rational,
    },
}

/// Wire form: `{bound, segments: [{start, c0, c1}], tail}` plus the
/// horizon and tail generation when they differ from the defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlJson {
    bound: String,
    segments: Vec<Segment>,
    tail: Option<TailJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_generation: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<String>,
}

impl From<&PiecewiseControl> for ControlJson {
    fn from(c: &PiecewiseControl) -> Self {
        let bound = c.bound.as_ref().map(rational::format).unwrap_or_else(|| "inf".into());
        let tail = c.tail.as_ref().map(|t| {
            if t.is_alpha_hat() {
                TailJson::Named("alpha_hat".into())
            } else {
                TailJson::Pattern { a: t.a_value.clone(), b: t.b_value.clone() }
            }
        });
        ControlJson {
            bound,
            segments: c.segments.clone(),
            tail,
            tail_generation: c.tail.as_ref().map(|t| t.generation),
            horizon: (c.horizon != int(1)).then(|| rational::format(&c.horizon)),
        }
    }
}

impl TryFrom<ControlJson> for PiecewiseControl {
    type Error = Error;

    fn try_from(j: ControlJson) -> Result<Self> {
        let bound = match j.bound.as_str() {
            "inf" | "infinity" => None,
            text => Some(rational::parse(text)?),
        };
        let horizon = j.horizon.as_deref().map(rational::parse).transpose()?.unwrap_or_else(|| int(1));
        let tail = match j.tail {
            None => None,
            Some(kind) => {
                let (a_value, b_value) = match kind {
                    TailJson::Named(name) if name == "alpha_hat" => (int(1), int(-1)),
                    TailJson::Named(name) => {
                        return Err(Error::Parse(format!("unknown tail pattern {name:?}")))
                    }
                    TailJson::Pattern { a, b } => (a, b),
                };
                let generation = match j.tail_generation {
                    Some(g) => g,
                    None => infer_tail_generation(&j.segments)?,
                };
                Some(DyadicTail { generation, a_value, b_value })
            }
        };
        PiecewiseControl::new(horizon, bound, j.segments, tail)
    }
}

/// Smallest generation whose start lies beyond the last segment start.
fn infer_tail_generation(segments: &[Segment]) -> Result<u32> {
    match segments.last() {
        None => Ok(0),
        Some(last) => {
            let g = schedule::generation(&last.start)?;
            Ok(g + 1)
        }
    }
}

impl Default for PiecewiseControl {
    fn default() -> Self {
        PiecewiseControl::zero()
    }
}

impl PiecewiseControl {
    pub fn negated(&self) -> Self {
        self.scaled(&-Rational::one())
    }

    /// Replaces every value `v` on B-intervals `[s_n, t_{n+1})` by `-v`.
    /// Only defined for pure dyadic patterns (the explicit generations and
    /// the tail); used to build a tampered competitor in the CLI.
    pub fn flip_b_intervals(&self) -> Result<Self> {
        let tail = self
            .tail
            .as_ref()
            .ok_or_else(|| Error::Domain("B-interval flip needs a dyadic pattern".into()))?;
        let mut segments = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let loc = schedule::locate(&seg.start)?;
            let aligned = seg.start == loc.interval().0 && seg.c1.is_zero();
            if !aligned {
                return Err(Error::Domain("B-interval flip needs schedule-aligned segments".into()));
            }
            let c0 = if loc.phase == Phase::B { -&seg.c0 } else { seg.c0.clone() };
            segments.push(Segment::constant(seg.start.clone(), c0));
        }
        let tail = DyadicTail {
            generation: tail.generation,
            a_value: tail.a_value.clone(),
            b_value: -&tail.b_value,
        };
        PiecewiseControl::new(self.horizon.clone(), self.bound.clone(), segments, Some(tail))
    }
}
