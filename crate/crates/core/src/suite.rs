//! Seeded property suites over random controls and paths: algebraic
//! identities, closed forms, truncation bounds and agreement between the
//! exact and floating backends. Shared by the `verify` command, the
//! acceptance tests and the benches.

use num_traits::{Signed, Zero};
use rand::Rng;
use serde::Serialize;

use crate::arith::Arithmetic;
use crate::control::PiecewiseControl;
use crate::dynamics;
use crate::equilibrium;
use crate::error::Result;
use crate::naive::{self, DeviationKernel};
use crate::numeric::{self, Quadrature};
use crate::par::{self, Execution};
use crate::pareto;
use crate::precommit;
use crate::rational::{self, int, pow2_neg, ratio, Rational};
use crate::sampling::{case_rng, random_control, random_time, ControlShape};
use crate::schedule::{t_n, DyadicSchedule};

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub arithmetic: Arithmetic,
    /// Residual tolerance for float-mode identities; exact mode demands 0.
    pub tol: f64,
    /// Cross-backend tolerance for the exact-versus-quadrature check.
    pub oracle_tol: f64,
    pub controls: usize,
    pub paths: usize,
    pub execution: Execution,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 42,
            arithmetic: Arithmetic::Exact,
            tol: 0.0,
            oracle_tol: 1e-9,
            controls: 200,
            paths: 100,
            execution: Execution::default(),
        }
    }
}

/// Outcome of one property over all its cases.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyOutcome {
    pub name: String,
    pub cases: usize,
    pub passed: bool,
    /// Largest residual seen, as a decimal.
    pub max_residual: f64,
    /// Up to five failing cases.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub arithmetic: Arithmetic,
    pub tol: f64,
    pub properties: Vec<PropertyOutcome>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn failed(&self) -> Vec<&PropertyOutcome> {
        self.properties.iter().filter(|p| !p.passed).collect()
    }
}

/// One case: residual and whether it is acceptable, or a description.
struct Case {
    residual: f64,
    ok: bool,
    label: String,
}

impl Case {
    fn exact(residual: &Rational, label: String) -> Case {
        Case { residual: rational::to_f64(&residual.abs()), ok: residual.is_zero(), label }
    }

    fn within(residual: f64, tol: f64, label: String) -> Case {
        Case { residual: residual.abs(), ok: residual.abs() <= tol, label }
    }
}

fn collect(name: &str, cases: Vec<Result<Case>>) -> PropertyOutcome {
    let mut max_residual = 0f64;
    let mut failures = Vec::new();
    let mut passed = true;
    let total = cases.len();
    for case in cases {
        match case {
            Ok(c) => {
                max_residual = max_residual.max(c.residual);
                if !c.ok {
                    passed = false;
                    if failures.len() < 5 {
                        failures.push(format!("{}: residual {:e}", c.label, c.residual));
                    }
                }
            }
            Err(e) => {
                passed = false;
                if failures.len() < 5 {
                    failures.push(e.to_string());
                }
            }
        }
    }
    PropertyOutcome { name: name.to_string(), cases: total, passed, max_residual, failures }
}

fn indices(n: usize) -> Vec<u64> {
    (0..n as u64).collect()
}

fn control_for(config: &SuiteConfig, tag: u64, i: u64) -> (PiecewiseControl, rand_chacha::ChaCha8Rng) {
    let mut rng = case_rng(config.seed, tag, i);
    let control = random_control(&mut rng, ControlShape::default());
    (control, rng)
}

/// `∫_0^1 α Y¹ − (1/2)(∫_0^1 α)² = 0`.
pub fn self_interaction_identity(config: &SuiteConfig) -> PropertyOutcome {
    let quad = Quadrature::default();
    let cases = par::map(config.execution, &indices(config.controls), |&i| {
        let (control, _) = control_for(config, 1, i);
        let label = format!("control #{i}");
        Ok(match config.arithmetic {
            Arithmetic::Exact => Case::exact(&dynamics::self_interaction_residual(&control)?, label),
            Arithmetic::Float => {
                Case::within(numeric::self_interaction_residual_f64(&control, &quad), config.tol, label)
            }
        })
    });
    collect("self_interaction_identity", cases)
}

/// Telescoped weights reproduce the interval-by-interval sum of `F_N`.
pub fn weight_telescoping(config: &SuiteConfig, depth: u32) -> PropertyOutcome {
    let cases = par::map(config.execution, &indices(config.paths), |&i| {
        let mut rng = case_rng(config.seed, 2, i);
        let path = precommit::random_feasible_path(depth, &mut rng)?;
        let telescoped = precommit::objective_f(&path, depth)?;
        let direct = precommit::objective_f_direct(&path, depth)?;
        let label = format!("path #{i}");
        Ok(match config.arithmetic {
            Arithmetic::Exact => Case::exact(&(telescoped - direct), label),
            Arithmetic::Float => {
                let w = precommit::QuadraticObjective::new(depth)?;
                let float: f64 = w
                    .weights()
                    .iter()
                    .zip(path.values())
                    .map(|(w, x)| rational::to_f64(w) * rational::to_f64(x).powi(2))
                    .sum();
                Case::within(float - rational::to_f64(&direct), config.tol, label)
            }
        })
    });
    collect(&format!("weight_telescoping_n{depth}"), cases)
}

/// `|F_{N+4}(X) − F_N(X)| ≤ 3 · 4^{-N}` on random paths of depth `N + 4`.
pub fn truncation_bound(config: &SuiteConfig, depth: u32) -> PropertyOutcome {
    let bound = precommit::tail_bound(depth);
    let cases = par::map(config.execution, &indices(config.paths), |&i| {
        let mut rng = case_rng(config.seed, 3 + u64::from(depth), i);
        let path = precommit::random_feasible_path(depth + 4, &mut rng)?;
        let gap = (precommit::objective_f(&path, depth + 4)? - precommit::objective_f(&path, depth)?).abs();
        Ok(Case { residual: rational::to_f64(&gap), ok: gap <= bound, label: format!("path #{i}") })
    });
    collect(&format!("truncation_bound_n{depth}"), cases)
}

/// Exact `Y²_t` against nested adaptive quadrature.
pub fn oracle_equivalence(config: &SuiteConfig, count: usize) -> PropertyOutcome {
    let quad = Quadrature::default();
    let cases = par::map(config.execution, &indices(count), |&i| {
        let (control, mut rng) = control_for(config, 20, i);
        let t = if i % 2 == 0 { Rational::zero() } else { random_time(&mut rng, 8) };
        let exact = rational::to_f64(&dynamics::y2(&control, &t)?);
        let float = numeric::y2_f64(&control, rational::to_f64(&t), &quad);
        Ok(Case::within(exact - float, config.oracle_tol, format!("control #{i} at t={t}")))
    });
    collect("exact_vs_quadrature", cases)
}

/// `J(t_n, α̂) = −2^{-(2n+5)}` and the closed form of `Y¹` for α̂.
pub fn alpha_hat_closed_forms(config: &SuiteConfig, generations: u32) -> PropertyOutcome {
    let hat = PiecewiseControl::alpha_hat(&DyadicSchedule::default());
    let quad = Quadrature::default();
    let mut cases = Vec::new();
    for n in 0..generations {
        let t = t_n(n);
        let expected = -pow2_neg(2 * n + 5);
        cases.push((|| {
            let label = format!("Y² at t_{n}");
            Ok(match config.arithmetic {
                Arithmetic::Exact => Case::exact(&(dynamics::y2(&hat, &t)? - &expected), label),
                Arithmetic::Float => Case::within(
                    numeric::y2_f64(&hat, rational::to_f64(&t), &quad) - rational::to_f64(&expected),
                    config.tol,
                    label,
                ),
            })
        })());
    }
    for k in 0..64 {
        let t = ratio(k, 64);
        cases.push((|| {
            let diff = pareto::y1_hat_closed(&t)? - dynamics::y1(&hat, &t)?;
            Ok(Case::exact(&diff, format!("Y¹ at {t}")))
        })());
    }
    collect("alpha_hat_closed_forms", cases)
}

/// `(T − t)²` and `(5/6)(T − t)²` reproduced exactly, ratio exactly 5/6.
pub fn naive_closed_forms(config: &SuiteConfig, samples: usize) -> PropertyOutcome {
    let mut cases = Vec::new();
    for horizon in [int(1), int(2)] {
        let kernel = DeviationKernel::new(horizon.clone()).expect("positive horizon");
        let naive = naive::naive_strategy(&kernel);
        let dominating = naive::dominating_strategy(&kernel);
        for i in 0..samples as u64 {
            let mut rng = case_rng(config.seed, 30, i);
            let t = &horizon * random_time(&mut rng, 16);
            cases.push((|| {
                let jn = naive::cost_naive_j(&t, &naive, &kernel)?;
                let jd = naive::cost_naive_j(&t, &dominating, &kernel)?;
                let residual = (&jn - naive::naive_cost_closed(&t, &kernel)).abs()
                    + (&jd - naive::dominating_cost_closed(&t, &kernel)).abs()
                    + (&jd / &jn - ratio(5, 6)).abs();
                Ok(Case::exact(&residual, format!("T={horizon}, t={t}")))
            })());
        }
    }
    collect("naive_closed_forms", cases)
}

/// `J(t, −α) = J(t, α)`: the cost is quadratic in the control.
pub fn negation_invariance(config: &SuiteConfig) -> PropertyOutcome {
    let n = config.controls / 4;
    let cases = par::map(config.execution, &indices(n), |&i| {
        let (control, mut rng) = control_for(config, 40, i);
        let t = random_time(&mut rng, 8);
        let diff = dynamics::cost_j(&t, &control)? - dynamics::cost_j(&t, &control.negated())?;
        Ok(Case::exact(&diff, format!("control #{i} at t={t}")))
    });
    collect("negation_invariance", cases)
}

/// `Y¹` is linear: `Y¹(aα + bβ) = a Y¹(α) + b Y¹(β)`.
pub fn y1_linearity(config: &SuiteConfig) -> PropertyOutcome {
    let shape = ControlShape { tail_probability: 0.0, ..ControlShape::default() };
    let n = config.controls / 4;
    let cases = par::map(config.execution, &indices(n), |&i| {
        let mut rng = case_rng(config.seed, 50, i);
        let alpha = random_control(&mut rng, shape);
        let beta = random_control(&mut rng, shape);
        let (a, b) = (ratio(rng.gen_range(-8..=8), 4), ratio(rng.gen_range(-8..=8), 4));
        let t = random_time(&mut rng, 8);
        let mix = alpha.combine(&a, &beta, &b)?;
        let diff = dynamics::y1(&mix, &t)? - (&a * dynamics::y1(&alpha, &t)? + &b * dynamics::y1(&beta, &t)?);
        Ok(Case::exact(&diff, format!("pair #{i} at t={t}")))
    });
    collect("y1_linearity", cases)
}

/// Splicing a control with itself changes nothing: `α ⊕_τ α = α`.
pub fn splice_idempotence(config: &SuiteConfig) -> PropertyOutcome {
    let n = config.controls / 4;
    let cases = par::map(config.execution, &indices(n), |&i| {
        let (control, mut rng) = control_for(config, 60, i);
        let tau = random_time(&mut rng, 8);
        let t = random_time(&mut rng, 8);
        let spliced = control.concat(&control, &tau)?;
        let diff = dynamics::cost_j(&t, &spliced)? - dynamics::cost_j(&t, &control)?;
        Ok(Case::exact(&diff, format!("control #{i}, τ={tau}, t={t}")))
    });
    collect("splice_idempotence", cases)
}

/// `F_N(path of α)` is within `3 · 4^{-N}` of `−J(0, α)`.
pub fn sign_convention(config: &SuiteConfig, depth: u32) -> PropertyOutcome {
    let schedule = DyadicSchedule::new(depth).expect("depth >= 1");
    let bound = precommit::tail_bound(depth);
    let n = config.controls / 4;
    let cases = par::map(config.execution, &indices(n), |&i| {
        let (control, _) = control_for(config, 70, i);
        let path = dynamics::to_path(&control, &schedule)?;
        let gap =
            (precommit::objective_f(&path, depth)? + dynamics::cost_j(&Rational::zero(), &control)?).abs();
        Ok(Case { residual: rational::to_f64(&gap), ok: gap <= bound, label: format!("control #{i}") })
    });
    collect(&format!("f_matches_minus_j_n{depth}"), cases)
}

/// Small-δ spike rate matches `c(t) Y¹_t (α_t − α*_t)`.
pub fn first_order_slope(config: &SuiteConfig) -> PropertyOutcome {
    let n = config.controls / 10;
    let cases = par::map(config.execution, &indices(n), |&i| {
        let (candidate, mut rng) = control_for(config, 80, i);
        let (perturbation, _) = control_for(config, 81, i);
        let t = random_time(&mut rng, 6);
        let probe = equilibrium::spike_rate(&t, &perturbation, &candidate, 24)?;
        let coeff = equilibrium::first_order_coeff(&t, &perturbation, &candidate)?;
        let last = probe.rates.last().expect("non-empty").to_f64();
        Ok(Case::within(last - rational::to_f64(&coeff), 1e-4, format!("pair #{i} at t={t}")))
    });
    collect("first_order_slope", cases)
}

/// Runs every property.
pub fn run(config: &SuiteConfig) -> SuiteReport {
    let mut properties = vec![self_interaction_identity(config), weight_telescoping(config, 8)];
    for depth in [4, 8, 12] {
        properties.push(truncation_bound(config, depth));
    }
    properties.push(oracle_equivalence(config, config.paths));
    properties.push(alpha_hat_closed_forms(config, 12));
    properties.push(naive_closed_forms(config, config.paths));
    properties.push(negation_invariance(config));
    properties.push(y1_linearity(config));
    properties.push(splice_idempotence(config));
    properties.push(sign_convention(config, 8));
    properties.push(first_order_slope(config));
    let passed = properties.iter().all(|p| p.passed);
    SuiteReport { seed: config.seed, arithmetic: config.arithmetic, tol: config.tol, properties, passed }
}
