//! Spike-variation equilibrium test.
//!
//! A control `α*` is an equilibrium when, for every `t < 1` and every
//! admissible `α`,
//!
//! ```text
//! lim inf_{δ↓0} (1/δ) [J(t, α ⊕_{t+δ} α*) − J(t, α*)] ≥ 0.
//! ```
//!
//! Inside one kernel piece the difference is first order in `δ` with
//! coefficient `c(t) Y¹_t(α*) (α_t − α*_t)` plus an `O(δ²)` remainder, so
//! the lim inf is estimated on a geometric δ-sequence capped at the next
//! schedule breakpoint.

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::arith::{Arithmetic, Scalar};
use crate::control::PiecewiseControl;
use crate::dynamics;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rational::{self, int, pow2_neg, Rational};
use crate::schedule;

/// `J(t, α ⊕_{t+δ} α*)`.
pub fn perturbed_cost(
    t: &Rational,
    delta: &Rational,
    perturbation: &PiecewiseControl,
    candidate: &PiecewiseControl,
) -> Result<Rational> {
    perturbed_cost_in(Arithmetic::Exact, t, delta, perturbation, candidate).map(|s| match s {
        Scalar::Exact(r) => r,
        Scalar::Float(_) => unreachable!("exact arithmetic"),
    })
}

fn perturbed_cost_in(
    arith: Arithmetic,
    t: &Rational,
    delta: &Rational,
    perturbation: &PiecewiseControl,
    candidate: &PiecewiseControl,
) -> Result<Scalar> {
    let splice = t + delta;
    if t.is_negative() || !delta.is_positive() || splice > int(1) {
        return Err(Error::Domain(format!(
            "spike needs 0 <= t < t + δ <= 1, got t = {}, δ = {}",
            rational::format(t),
            rational::format(delta)
        )));
    }
    let spliced = perturbation.concat(candidate, &splice)?;
    arith.cost(t, &spliced)
}

/// Finite-δ rates `(1/δ)[J(t, α ⊕_{t+δ} α*) − J(t, α*)]` at one time.
#[derive(Debug, Clone, Serialize)]
pub struct SpikeProbe {
    #[serde(with = "rational::serde_str")]
    pub t: Rational,
    #[serde(with = "rational::serde_vec")]
    pub deltas: Vec<Rational>,
    pub rates: Vec<Scalar>,
    /// Minimum over the tail half of the sequence; the lim inf estimate.
    pub estimate: Scalar,
}

/// Distance from `t` to the next schedule breakpoint.
pub fn breakpoint_gap(t: &Rational) -> Result<Rational> {
    let loc = schedule::locate(t)?;
    Ok(loc.interval().1 - t)
}

/// Lim-inf estimate of the spike rate with `δ_k = min(δ_t, 2^{-k})`,
/// `k = K/2, …, K`.
pub fn spike_rate(
    t: &Rational,
    perturbation: &PiecewiseControl,
    candidate: &PiecewiseControl,
    k_max: u32,
) -> Result<SpikeProbe> {
    spike_rate_in(Arithmetic::Exact, t, perturbation, candidate, k_max)
}

pub fn spike_rate_in(
    arith: Arithmetic,
    t: &Rational,
    perturbation: &PiecewiseControl,
    candidate: &PiecewiseControl,
    k_max: u32,
) -> Result<SpikeProbe> {
    if k_max < 4 {
        return Err(Error::Configuration(format!("K must be at least 4, got {k_max}")));
    }
    let gap = breakpoint_gap(t)?;
    // explicit generations that repeat the tail only slow down every splice
    let candidate = &candidate.compact_tail();
    let base = arith.cost(t, candidate)?;
    let deltas: Vec<Rational> = (k_max / 2..=k_max).map(|k| rational::min(&gap, &pow2_neg(k))).collect();
    let rates = deltas
        .iter()
        .map(|d| {
            let cost = perturbed_cost_in(arith, t, d, perturbation, candidate)?;
            Ok(cost.difference_quotient(&base, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let estimate = rates.iter().cloned().reduce(Scalar::min).expect("non-empty");
    Ok(SpikeProbe { t: t.clone(), deltas, rates, estimate })
}

/// Analytic δ → 0 rate `c(t) · Y¹_t(α*) · (α_t − α*_t)`.
pub fn first_order_coeff(
    t: &Rational,
    perturbation: &PiecewiseControl,
    candidate: &PiecewiseControl,
) -> Result<Rational> {
    let c = schedule::kernel_value(t)?;
    let y1 = dynamics::y1(candidate, t)?;
    Ok(c * y1 * (perturbation.evaluate(t)? - candidate.evaluate(t)?))
}

/// A named perturbation control.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub id: String,
    pub control: PiecewiseControl,
}

impl Perturbation {
    pub fn new(id: impl Into<String>, control: PiecewiseControl) -> Self {
        Perturbation { id: id.into(), control }
    }

    /// The constants `+1` and `-1`.
    pub fn default_family() -> Vec<Perturbation> {
        vec![
            Perturbation::new("plus_one", PiecewiseControl::constant(int(1))),
            Perturbation::new("minus_one", PiecewiseControl::constant(int(-1))),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    #[serde(with = "rational::serde_str")]
    pub t: Rational,
    pub perturbation_id: String,
    pub rate: Scalar,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSettings {
    pub grid_size: usize,
    pub perturbations: Vec<String>,
    pub k_max: u32,
    #[serde(with = "rational::serde_str")]
    pub tol: Rational,
    pub arithmetic: Arithmetic,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub settings: EquilibriumSettings,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// `{k / 2^depth : 0 <= k < 2^depth}`.
pub fn dyadic_grid(depth: u32) -> Vec<Rational> {
    let n = 1i64 << depth;
    (0..n).map(|k| rational::ratio(k, n)).collect()
}

/// Options for [`verify_equilibrium`].
#[derive(Debug, Clone)]
pub struct EquilibriumCheck {
    pub perturbations: Vec<Perturbation>,
    pub k_max: u32,
    pub tol: Rational,
    pub arithmetic: Arithmetic,
    pub execution: Execution,
}

impl Default for EquilibriumCheck {
    fn default() -> Self {
        EquilibriumCheck {
            perturbations: Perturbation::default_family(),
            k_max: 20,
            tol: Rational::zero(),
            arithmetic: Arithmetic::Exact,
            execution: Execution::default(),
        }
    }
}

/// Runs the spike test on every `(t, perturbation)` pair. PASS iff every
/// lim-inf estimate is at least `-tol`; otherwise every failing pair is
/// reported, ordered by time.
pub fn verify_equilibrium(
    candidate: &PiecewiseControl,
    grid: &[Rational],
    check: &EquilibriumCheck,
) -> Result<VerificationReport> {
    if grid.is_empty() {
        return Err(Error::Configuration("equilibrium grid is empty".into()));
    }
    if check.perturbations.is_empty() {
        return Err(Error::Configuration("no perturbations given".into()));
    }
    if let Some(t) = grid.iter().find(|t| t.is_negative() || **t >= int(1)) {
        return Err(Error::Domain(format!("grid point {} outside [0, 1)", rational::format(t))));
    }
    let jobs: Vec<(usize, usize)> =
        (0..grid.len()).flat_map(|i| (0..check.perturbations.len()).map(move |j| (i, j))).collect();
    let probes = par::map(check.execution, &jobs, |&(i, j)| {
        spike_rate_in(check.arithmetic, &grid[i], &check.perturbations[j].control, candidate, check.k_max)
    });
    let mut witnesses = Vec::new();
    for (&(_, j), probe) in jobs.iter().zip(probes) {
        let probe = probe?;
        if probe.estimate.below_negative(&check.tol) {
            witnesses.push(Witness {
                t: probe.t,
                perturbation_id: check.perturbations[j].id.clone(),
                rate: probe.estimate,
            });
        }
    }
    witnesses.sort_by(|a, b| a.t.cmp(&b.t));
    Ok(VerificationReport {
        verdict: if witnesses.is_empty() { Verdict::Pass } else { Verdict::Fail },
        witnesses,
        settings: EquilibriumSettings {
            grid_size: grid.len(),
            perturbations: check.perturbations.iter().map(|p| p.id.clone()).collect(),
            k_max: check.k_max,
            tol: check.tol.clone(),
            arithmetic: check.arithmetic,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SignViolation {
    #[serde(with = "rational::serde_str")]
    pub t: Rational,
    #[serde(with = "rational::serde_str")]
    pub y1: Rational,
    #[serde(with = "rational::serde_str")]
    pub alpha: Rational,
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessaryConditionReport {
    /// Grid points where `Y¹ ≠ 0` but `α* ≠ -sign(Y¹)`.
    pub violations: Vec<SignViolation>,
    /// `∫_0^1 α* Y¹ dt − (1/2)(∫_0^1 α* dt)²`; always 0.
    #[serde(with = "rational::serde_str")]
    pub identity_residual: Rational,
}

/// Necessary conditions every equilibrium must meet: `α* = -sign(Y¹)`
/// wherever `Y¹ ≠ 0`, and the self-interaction identity.
pub fn necessary_condition_check(
    candidate: &PiecewiseControl,
    grid: &[Rational],
) -> Result<NecessaryConditionReport> {
    let mut violations = Vec::new();
    for t in grid {
        let y1 = dynamics::y1(candidate, t)?;
        if y1.is_zero() {
            continue;
        }
        let alpha = candidate.evaluate(t)?;
        let required = if y1.is_positive() { -Rational::one() } else { Rational::one() };
        if alpha != required {
            violations.push(SignViolation { t: t.clone(), y1, alpha });
        }
    }
    Ok(NecessaryConditionReport {
        violations,
        identity_residual: dynamics::self_interaction_residual(candidate)?,
    })
}
