//! The precommitted problem through Lipschitz paths.
//!
//! With `X = Y¹` the cost at time 0 becomes `J(0, α) = −F_∞(X)` where
//! `F_∞(X) = ∫_0^1 c X X' dt`. The kernel is constant on every schedule
//! interval, so the part of `F_∞` before `t_N` depends on the breakpoint
//! values only:
//!
//! ```text
//! F_N(X) = Σ_{m<N} c(t_m)/2 (X_{s_m}² − X_{t_m}²) + c(s_m)/2 (X_{t_{m+1}}² − X_{s_m}²)
//! ```
//!
//! which telescopes to `Σ w_u X(u)²` with `w = −1/2` at `t_0`, `−5/2` at each
//! `s_m`, `+5/2` at each interior `t_m` and `+3` at `t_N`. Maximizing this
//! indefinite quadratic over the chain polytope `|ΔX| ≤ Δu`, `|X(t_N)| ≤ 1 − t_N`
//! gives lower bounds on `sup F_∞ = −V_0`.

use std::cmp::Ordering;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::PiecewiseControl;
use crate::dynamics::{self, breakpoint_times, LipschitzPath, PathPoint};
use crate::equilibrium::{self, EquilibriumCheck, Perturbation, Witness};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rational::{self, int, pow2_neg, pow4_neg, ratio, Rational};
use crate::schedule::{DyadicSchedule, KERNEL_A, KERNEL_B};

/// `F_N(X) = Σ weights[k] · X(u_k)²` over the breakpoints `t_0, s_0, …, t_N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadraticObjective {
    depth: u32,
    weights: Vec<Rational>,
}

impl QuadraticObjective {
    pub fn new(depth: u32) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Configuration("objective depth must be at least 1".into()));
        }
        let half = |c: i64| ratio(c, 2);
        let mut weights = Vec::with_capacity(2 * depth as usize + 1);
        weights.push(-half(KERNEL_A));
        for m in 0..depth {
            weights.push(half(KERNEL_A) - half(KERNEL_B));
            if m + 1 < depth {
                weights.push(half(KERNEL_B) - half(KERNEL_A));
            }
        }
        weights.push(half(KERNEL_B));
        Ok(QuadraticObjective { depth, weights })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    /// `F_N` of the first `2N + 1` breakpoint values of `path`.
    pub fn evaluate(&self, path: &LipschitzPath) -> Result<Rational> {
        let needed = self.weights.len();
        if path.values().len() < needed {
            return Err(Error::Shape(format!(
                "F_{} needs {needed} breakpoint values, path has {}",
                self.depth,
                path.values().len()
            )));
        }
        Ok(weighted_squares(&self.weights, &path.values()[..needed]))
    }
}

fn weighted_squares(weights: &[Rational], values: &[Rational]) -> Rational {
    weights.iter().zip(values).map(|(w, x)| w * x * x).sum()
}

/// `F_N(X)` in telescoped weight form.
pub fn objective_f(path: &LipschitzPath, depth: u32) -> Result<Rational> {
    QuadraticObjective::new(depth)?.evaluate(path)
}

/// `F_N(X)` summed interval by interval, without telescoping.
pub fn objective_f_direct(path: &LipschitzPath, depth: u32) -> Result<Rational> {
    let needed = 2 * depth as usize + 1;
    if depth == 0 || path.values().len() < needed {
        return Err(Error::Shape(format!("F_{depth} needs {needed} breakpoint values")));
    }
    let x = path.values();
    let mut total = Rational::zero();
    for k in 0..needed - 1 {
        let c = if k % 2 == 0 { int(KERNEL_A) } else { int(KERNEL_B) };
        total += c * (&x[k + 1] * &x[k + 1] - &x[k] * &x[k]) / int(2);
    }
    Ok(total)
}

/// `3 · 4^{-N}`: with `c ≤ 6`, `|X| ≤ 1 − t` and `|X'| ≤ 1`, the part of
/// `F_∞` past `t_N` is at most `6 ∫_{t_N}^1 (1 − t) dt`.
pub fn tail_bound(depth: u32) -> Rational {
    int(3) * pow4_neg(depth)
}

/// Bound on `sup F_∞` from the positive weights alone: every `X(t_m)²` is at
/// most `(1 − t_m)²`, plus the tail bound.
pub fn value_upper_bound(depth: u32) -> Rational {
    let objective = QuadraticObjective::new(depth.max(1)).expect("depth >= 1");
    let extremal: Vec<Rational> = breakpoint_times(objective.depth).iter().map(|u| int(1) - u).collect();
    let positive: Rational = objective
        .weights
        .iter()
        .zip(&extremal)
        .filter(|(w, _)| w.is_positive())
        .map(|(w, x)| w * x * x)
        .sum();
    positive + tail_bound(objective.depth)
}

/// The path `X♦`: 0 at `t_0` and every `s_m`, `2^{-(m+2)}` at `t_m`, `m ≥ 1`.
/// `F_N(X♦) = 5/96 − 4^{-N}/48`.
pub fn analytic_start(depth: u32) -> Result<LipschitzPath> {
    let mut values = Vec::with_capacity(2 * depth as usize + 1);
    values.push(Rational::zero());
    for m in 0..depth {
        values.push(Rational::zero());
        values.push(pow2_neg(m + 3));
    }
    LipschitzPath::new(depth, values)
}

fn gaps(depth: u32) -> (Vec<Rational>, Vec<Rational>) {
    let times = breakpoint_times(depth);
    let gaps = times.windows(2).map(|w| &w[1] - &w[0]).collect();
    let radius = times.iter().map(|u| int(1) - u).collect();
    (gaps, radius)
}

/// Nearest feasible path, built backward from `t_N` by clamping each value
/// into the range its right neighbour allows.
pub fn project_to_feasible(depth: u32, mut values: Vec<Rational>) -> Result<LipschitzPath> {
    let expected = 2 * depth as usize + 1;
    if depth == 0 || values.len() != expected {
        return Err(Error::Shape(format!("expected {expected} breakpoint values")));
    }
    let (gaps, radius) = gaps(depth);
    let last = expected - 1;
    values[last] = clamp(&values[last], &-&radius[last], &radius[last]);
    for k in (0..last).rev() {
        let lo = &values[k + 1] - &gaps[k];
        let hi = &values[k + 1] + &gaps[k];
        values[k] = clamp(&values[k], &lo, &hi);
    }
    LipschitzPath::new(depth, values)
}

fn clamp(x: &Rational, lo: &Rational, hi: &Rational) -> Rational {
    if x < lo {
        lo.clone()
    } else if x > hi {
        hi.clone()
    } else {
        x.clone()
    }
}

/// Random feasible path: `X(t_N)` uniform on its range, then steps of
/// slope uniform in `[-1, 1]` backward, on a grid of `2^{-10}`.
pub fn random_feasible_path(depth: u32, rng: &mut impl Rng) -> Result<LipschitzPath> {
    const STEPS: i64 = 1 << 10;
    let (gaps, radius) = gaps(depth);
    let n = 2 * depth as usize + 1;
    let mut values = vec![Rational::zero(); n];
    let mut draw = || ratio(rng.gen_range(-STEPS..=STEPS), STEPS);
    values[n - 1] = draw() * &radius[n - 1];
    for k in (0..n - 1).rev() {
        values[k] = &values[k + 1] + draw() * &gaps[k];
    }
    LipschitzPath::new(depth, values)
}

/// One run of coordinate ascent.
#[derive(Debug, Clone)]
pub struct AscentRun {
    pub path: LipschitzPath,
    pub value: Rational,
    /// Objective value at the start and after every sweep; non-decreasing.
    pub history: Vec<Rational>,
}

/// Projected coordinate ascent. Each coordinate carries `w x²` on the
/// interval its neighbours allow; `w > 0` moves to the endpoint of larger
/// magnitude and `w < 0` to the point nearest 0. Only strict improvements
/// are taken, so ties keep the current value.
pub fn coordinate_ascent(
    objective: &QuadraticObjective,
    start: &LipschitzPath,
    iterations: u32,
) -> Result<AscentRun> {
    let depth = objective.depth;
    if start.depth() != depth {
        return Err(Error::Shape(format!("start path has depth {}, objective {depth}", start.depth())));
    }
    let (gaps, radius) = gaps(depth);
    let mut x = start.values().to_vec();
    let mut value = weighted_squares(&objective.weights, &x);
    let mut history = vec![value.clone()];
    let last = x.len() - 1;
    for _ in 0..iterations {
        let before = value.clone();
        for k in 0..=last {
            let w = &objective.weights[k];
            if w.is_zero() {
                continue;
            }
            let mut lo = -&radius[k];
            let mut hi = radius[k].clone();
            if k > 0 {
                lo = rational::max(&lo, &(&x[k - 1] - &gaps[k - 1]));
                hi = rational::min(&hi, &(&x[k - 1] + &gaps[k - 1]));
            }
            if k < last {
                lo = rational::max(&lo, &(&x[k + 1] - &gaps[k]));
                hi = rational::min(&hi, &(&x[k + 1] + &gaps[k]));
            }
            let target = if w.is_positive() {
                match lo.abs().cmp(&hi.abs()) {
                    Ordering::Greater => lo,
                    Ordering::Less => hi,
                    Ordering::Equal if x[k].is_negative() => lo,
                    Ordering::Equal => hi,
                }
            } else {
                clamp(&Rational::zero(), &lo, &hi)
            };
            let gain = w * (&target * &target - &x[k] * &x[k]);
            if gain.is_positive() {
                value += gain;
                x[k] = target;
            }
        }
        history.push(value.clone());
        if value == before {
            break;
        }
    }
    let path = LipschitzPath::from_raw(depth, x);
    debug_assert!(path.check_feasible().is_ok());
    Ok(AscentRun { path, value, history })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSet {
    /// Zero path, `X♦`, then `restarts` random paths.
    #[default]
    All,
    ZeroOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub depth: u32,
    pub restarts: u32,
    pub iterations: u32,
    pub seed: u64,
    pub starts: StartSet,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            depth: 8,
            restarts: 8,
            iterations: 200,
            seed: 42,
            starts: StartSet::All,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StartOutcome {
    pub start: String,
    #[serde(with = "rational::serde_str")]
    pub initial_value: Rational,
    #[serde(with = "rational::serde_str")]
    pub final_value: Rational,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueInterval {
    /// `F_∞` of the best path's control, computed exactly.
    #[serde(with = "rational::serde_str")]
    pub lower: Rational,
    /// Crude bound from the positive weights; no optimality is claimed.
    #[serde(with = "rational::serde_str")]
    pub upper: Rational,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult {
    pub depth: u32,
    #[serde(skip)]
    pub best_path: LipschitzPath,
    pub path: Vec<PathPoint>,
    pub best_start: String,
    #[serde(with = "rational::serde_str")]
    pub best_value: Rational,
    #[serde(with = "rational::serde_str")]
    pub truncation_bound: Rational,
    /// `best_value − truncation_bound`, a lower bound on `sup F_∞`.
    #[serde(with = "rational::serde_str")]
    pub truncated_lower_bound: Rational,
    pub value_interval: ValueInterval,
    pub history: Vec<String>,
    pub starts: Vec<StartOutcome>,
}

fn start_paths(settings: &OptimizerSettings) -> Result<Vec<(String, LipschitzPath)>> {
    let depth = settings.depth;
    let mut starts = vec![("zero".to_string(), LipschitzPath::zero(depth))];
    if settings.starts == StartSet::All {
        starts.push(("analytic".to_string(), analytic_start(depth)?));
        for r in 0..settings.restarts {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(u64::from(r));
            starts.push((format!("random-{r}"), random_feasible_path(depth, &mut rng)?));
        }
    }
    Ok(starts)
}

/// Multi-start maximization of `F_N`. Deterministic for a given seed: the
/// winner is the largest value, ties broken by the lexicographically
/// smallest path.
pub fn maximize_f(settings: &OptimizerSettings) -> Result<OptimizationResult> {
    if settings.depth < 2 {
        return Err(Error::Configuration(format!(
            "optimizer depth must be at least 2, got {}",
            settings.depth
        )));
    }
    let objective = QuadraticObjective::new(settings.depth)?;
    let starts = start_paths(settings)?;
    let runs = par::map(settings.execution, &starts, |(_, path)| {
        coordinate_ascent(&objective, path, settings.iterations)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let best = (0..runs.len())
        .max_by(|&i, &j| {
            runs[i].value.cmp(&runs[j].value).then_with(|| runs[j].path.values().cmp(runs[i].path.values()))
        })
        .expect("at least the zero start");
    let outcomes = starts
        .iter()
        .zip(&runs)
        .map(|((name, _), run)| StartOutcome {
            start: name.clone(),
            initial_value: run.history[0].clone(),
            final_value: run.value.clone(),
            sweeps: run.history.len() - 1,
        })
        .collect();
    let run = &runs[best];
    let truncation_bound = tail_bound(settings.depth);
    let exact = f_infinity(&run.path)?;
    Ok(OptimizationResult {
        depth: settings.depth,
        path: run.path.points(),
        best_path: run.path.clone(),
        best_start: starts[best].0.clone(),
        best_value: run.value.clone(),
        truncated_lower_bound: &run.value - &truncation_bound,
        truncation_bound,
        value_interval: ValueInterval { lower: exact, upper: value_upper_bound(settings.depth) },
        history: run.history.iter().map(rational::format).collect(),
        starts: outcomes,
    })
}

/// Exact `F_∞` of the path's interpolating control: `−J(0, α)`.
pub fn f_infinity(path: &LipschitzPath) -> Result<Rational> {
    Ok(-dynamics::cost_j(&Rational::zero(), &path.to_control()?)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct InconsistencyWitness {
    pub depth: u32,
    /// `J(0, 0)`, the equilibrium's value.
    #[serde(with = "rational::serde_str")]
    pub equilibrium_value: Rational,
    /// `J(0, α̂)`.
    #[serde(with = "rational::serde_str")]
    pub alpha_hat_value: Rational,
    /// `F_N` of the best path found.
    #[serde(with = "rational::serde_str")]
    pub best_value: Rational,
    /// `J(0, ᾱ) ≥ V_0` for the optimizer's control `ᾱ`.
    #[serde(with = "rational::serde_str")]
    pub precommitted_bound: Rational,
    /// `V_0 ≤ −5/96 + tol` holds for `tol = 10^{-9}`.
    pub bound_below_target: bool,
    /// `V_0 < J(0, α̂) < J(0, 0)`.
    pub strict_chain: bool,
    /// α̂ fails the spike test at `t = 0`.
    pub alpha_hat_refutation: Option<Witness>,
    /// The optimizer's control fails the spike test at some `t > 0`.
    pub optimizer_refutation: Option<Witness>,
    pub complete: bool,
    #[serde(skip)]
    pub optimization: OptimizationResult,
}

/// Spike-test grid for a control: dyadic points of depth 6 and every
/// segment start and midpoint before the truncation point, all `> 0`.
fn refutation_grid(control: &PiecewiseControl) -> Vec<Rational> {
    let mut grid: Vec<Rational> = equilibrium::dyadic_grid(6);
    let segs = control.segments();
    for (i, seg) in segs.iter().enumerate() {
        grid.push(seg.start.clone());
        let end = segs.get(i + 1).map(|s| s.start.clone()).unwrap_or_else(|| int(1));
        grid.push((&seg.start + end) / int(2));
    }
    grid.retain(|t| t.is_positive() && *t < int(1));
    grid.sort();
    grid.dedup();
    grid
}

/// Assembles the time-inconsistency chain: the equilibrium is worth 0, α̂
/// is worth `−1/32`, the precommitted value is at most `−5/96`, and the
/// control achieving that bound is refuted by a spike at some `t > 0`.
pub fn inconsistency_witness(settings: &OptimizerSettings) -> Result<InconsistencyWitness> {
    if settings.depth < 4 {
        return Err(Error::Configuration(format!("witness needs depth at least 4, got {}", settings.depth)));
    }
    let zero = Rational::zero();
    let hat = PiecewiseControl::alpha_hat(&DyadicSchedule::new(settings.depth)?);
    let equilibrium_value = dynamics::cost_j(&zero, &PiecewiseControl::zero())?;
    let alpha_hat_value = dynamics::cost_j(&zero, &hat)?;
    let optimization = maximize_f(settings)?;
    let precommitted_bound = -optimization.value_interval.lower.clone();
    let target = ratio(-5, 96) + ratio(1, 1_000_000_000);
    let bound_below_target = precommitted_bound <= target;
    let strict_chain = precommitted_bound < alpha_hat_value && alpha_hat_value < equilibrium_value;

    let check = EquilibriumCheck {
        perturbations: Perturbation::default_family(),
        k_max: 20,
        tol: Rational::zero(),
        execution: settings.execution,
        ..EquilibriumCheck::default()
    };
    let alpha_hat_refutation =
        equilibrium::verify_equilibrium(&hat, &[zero], &check)?.witnesses.into_iter().next();
    let control = optimization.best_path.to_control()?;
    let grid = refutation_grid(&control);
    let optimizer_refutation = equilibrium::verify_equilibrium(&control, &grid, &check)?
        .witnesses
        .into_iter()
        .find(|w| w.t.is_positive());
    let complete = equilibrium_value.is_zero()
        && alpha_hat_value == ratio(-1, 32)
        && optimization.best_value >= ratio(5, 96) - ratio(1, 1_000_000_000)
        && bound_below_target
        && strict_chain
        && optimizer_refutation.is_some();
    Ok(InconsistencyWitness {
        depth: settings.depth,
        equilibrium_value,
        alpha_hat_value,
        best_value: optimization.best_value.clone(),
        precommitted_bound,
        bound_below_target,
        strict_chain,
        alpha_hat_refutation,
        optimizer_refutation,
        complete,
        optimization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_telescope() {
        let obj = QuadraticObjective::new(3).unwrap();
        let w: Vec<Rational> = obj.weights().to_vec();
        let expected =
            [ratio(-1, 2), ratio(-5, 2), ratio(5, 2), ratio(-5, 2), ratio(5, 2), ratio(-5, 2), int(3)];
        assert_eq!(w, expected);
    }

    #[test]
    fn objective_examples() {
        assert_eq!(objective_f(&LipschitzPath::zero(5), 5).unwrap(), int(0));
        let x = analytic_start(8).unwrap();
        let v = objective_f(&x, 8).unwrap();
        assert_eq!(v, ratio(5, 96) - pow4_neg(8) / int(48));
        assert_eq!(v, objective_f_direct(&x, 8).unwrap());
        assert!(objective_f(&LipschitzPath::zero(3), 4).is_err());
    }

    #[test]
    fn alpha_hat_path_objective() {
        let sched = DyadicSchedule::new(8).unwrap();
        let hat = PiecewiseControl::alpha_hat(&sched);
        let path = dynamics::to_path(&hat, &sched).unwrap();
        let v = objective_f(&path, 8).unwrap();
        // F_8 misses exactly the tail: −J(t_8, α̂) = 2^{-21}
        assert_eq!(v, ratio(1, 32) - pow2_neg(21));
        // the interpolant closes with X = (1 − t)/2 past t_8, which
        // contributes −(1/4) ∫_{t_8}^1 c (1 − t) dt = −(31/128) 4^{-8}
        assert_eq!(f_infinity(&path).unwrap(), v - ratio(31, 128) * pow4_neg(8));
        assert_eq!(-dynamics::cost_j(&int(0), &hat).unwrap(), ratio(1, 32));
    }

    #[test]
    fn tail_bound_examples() {
        assert_eq!(tail_bound(0), int(3));
        assert_eq!(tail_bound(4), ratio(3, 256));
    }

    #[test]
    fn zero_start_without_iterations_is_zero() {
        let settings = OptimizerSettings {
            depth: 2,
            iterations: 0,
            starts: StartSet::ZeroOnly,
            ..OptimizerSettings::default()
        };
        let r = maximize_f(&settings).unwrap();
        assert_eq!(r.best_value, int(0));
        assert!(maximize_f(&OptimizerSettings { depth: 1, ..settings }).is_err());
    }

    #[test]
    fn analytic_start_is_a_coordinatewise_maximum() {
        let obj = QuadraticObjective::new(8).unwrap();
        let run = coordinate_ascent(&obj, &analytic_start(8).unwrap(), 50).unwrap();
        assert_eq!(run.value, ratio(5, 96) - pow4_neg(8) / int(48));
        assert_eq!(run.history.len(), 2);
    }

    #[test]
    fn multistart_beats_targets_and_is_deterministic() {
        let settings = OptimizerSettings::default();
        let a = maximize_f(&settings).unwrap();
        assert!(a.best_value >= ratio(5, 96) - ratio(1, 1_000_000_000));
        assert!(a.best_value >= ratio(1, 32));
        assert!(a.best_path.check_feasible().is_ok());
        assert!(a.value_interval.lower <= a.value_interval.upper);
        for w in a.history.windows(2) {
            assert!(rational::parse(&w[0]).unwrap() <= rational::parse(&w[1]).unwrap());
        }
        for s in &a.starts {
            assert!(s.final_value >= s.initial_value);
            assert!(a.best_value >= s.final_value);
        }
        let seq = OptimizerSettings { execution: Execution::Sequential, ..settings };
        let b = maximize_f(&seq).unwrap();
        assert_eq!(a.best_path, b.best_path);
    }

    #[test]
    fn projection_makes_paths_feasible() {
        let wild: Vec<Rational> = (0..9).map(|k| int(if k % 2 == 0 { 1 } else { -1 })).collect();
        let p = project_to_feasible(4, wild).unwrap();
        assert!(p.check_feasible().is_ok());
        let x = analytic_start(4).unwrap();
        assert_eq!(project_to_feasible(4, x.values().to_vec()).unwrap(), x);
    }

    #[test]
    fn witness_chain_completes() {
        let w = inconsistency_witness(&OptimizerSettings::default()).unwrap();
        assert!(w.complete, "{w:?}");
        assert_eq!(w.alpha_hat_value, ratio(-1, 32));
        let hat = w.alpha_hat_refutation.unwrap();
        assert_eq!(hat.t, int(0));
        assert!((hat.rate.to_f64() + 1.0).abs() < 1e-3);
        assert!(w.optimizer_refutation.unwrap().t.is_positive());
    }
}
