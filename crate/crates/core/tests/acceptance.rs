//! Acceptance checks, run in sequence so each runtime budget is measured
//! without competing tests. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::{Signed, Zero};
use rand::Rng;
use ticlab::equilibrium::{dyadic_grid, EquilibriumCheck, Verdict};
use ticlab::naive::{self, DeviationKernel};
use ticlab::pareto::{self, DominanceVerdict};
use ticlab::precommit::{self, OptimizerSettings, StartSet};
use ticlab::rational::{int, pow2_neg, ratio};
use ticlab::sampling::case_rng;
use ticlab::schedule::t_n;
use ticlab::suite::{self, SuiteConfig};
use ticlab::{dynamics, verify_equilibrium, DyadicSchedule, PiecewiseControl};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn hat() -> PiecewiseControl {
    PiecewiseControl::alpha_hat(&DyadicSchedule::default())
}

fn closed_form_reproduction() -> Check {
    let h = hat();
    for n in 0..=11u32 {
        let got = dynamics::y2(&h, &t_n(n)).map_err(|e| e.to_string())?;
        ensure(got == -pow2_neg(2 * n + 5), format!("n = {n}: got {got}"))?;
    }
    Ok("J(t_n, α̂) = −2^{−(2n+5)} exactly for n = 0..=11".into())
}

fn pareto_domination() -> Check {
    let r = pareto::dominance_check(&hat(), &PiecewiseControl::zero(), 12).map_err(|e| e.to_string())?;
    ensure(r.verdict == DominanceVerdict::Dominates, format!("verdict {:?}", r.verdict))?;
    ensure(
        r.interval_suprema.iter().all(|s| s.supremum.is_negative()),
        "an interval supremum is not negative",
    )?;
    ensure(r.equal_at_horizon, "costs differ at the horizon")?;
    let last = r.rows.last().expect("rows");
    ensure(last.t == int(1) && last.j_candidate.is_zero() && last.j_incumbent.is_zero(), "terminal row")?;
    ensure(r.tail.certified, "tail not certified")?;
    Ok(format!(
        "DOMINATES over {} intervals through generation {}, tail certified",
        r.interval_suprema.len(),
        r.checked_through_generation
    ))
}

fn equilibrium_verification() -> Check {
    let check = EquilibriumCheck::default();
    let grid = dyadic_grid(8);
    let zero = verify_equilibrium(&PiecewiseControl::zero(), &grid, &check).map_err(|e| e.to_string())?;
    ensure(zero.verdict == Verdict::Pass, "zero control failed")?;
    let h = verify_equilibrium(&hat(), &grid, &check).map_err(|e| e.to_string())?;
    ensure(h.verdict == Verdict::Fail, "α̂ passed")?;
    let w = h.witnesses.iter().find(|w| w.t.is_zero()).ok_or("no witness at t = 0")?;
    let rate = w.rate.to_f64();
    ensure((rate + 1.0).abs() <= 1e-3, format!("rate {rate}"))?;
    Ok(format!("0-control PASS on {} points; α̂ FAIL at t = 0 with rate {rate:.6}", grid.len()))
}

fn naive_example() -> Check {
    for horizon in [int(1), int(2)] {
        let kernel = DeviationKernel::new(horizon.clone()).map_err(|e| e.to_string())?;
        let naive_c = naive::naive_strategy(&kernel);
        let dom = naive::dominating_strategy(&kernel);
        let mut rng = case_rng(2024, 1, 0);
        for _ in 0..100 {
            let q: i64 = rng.gen_range(1..=997);
            let p: i64 = rng.gen_range(0..q);
            let t = &horizon * ratio(p, q);
            let jn = naive::cost_naive_j(&t, &naive_c, &kernel).map_err(|e| e.to_string())?;
            let jd = naive::cost_naive_j(&t, &dom, &kernel).map_err(|e| e.to_string())?;
            let rest = &horizon - &t;
            ensure(jn == &rest * &rest, format!("naive at t = {t}"))?;
            ensure(jd == ratio(5, 6) * &rest * &rest, format!("dominating at t = {t}"))?;
            ensure(&jd / &jn == ratio(5, 6), format!("ratio at t = {t}"))?;
        }
    }
    Ok("(T−t)² and (5/6)(T−t)² with zero residual at 100 times for T = 1, 2".into())
}

fn precommitted_bound() -> Check {
    let settings = OptimizerSettings { depth: 8, starts: StartSet::All, ..OptimizerSettings::default() };
    let w = precommit::inconsistency_witness(&settings).map_err(|e| e.to_string())?;
    let target = ratio(5, 96) - ratio(1, 1_000_000_000);
    ensure(w.best_value >= target, format!("best value {}", w.best_value))?;
    ensure(w.equilibrium_value.is_zero(), "J(0, 0) ≠ 0")?;
    ensure(w.alpha_hat_value == ratio(-1, 32), "J(0, α̂) ≠ −1/32")?;
    ensure(w.precommitted_bound < w.alpha_hat_value, "bound not below J(0, α̂)")?;
    ensure(w.optimizer_refutation.as_ref().is_some_and(|r| r.t.is_positive()), "no refutation at t > 0")?;
    ensure(w.complete, "witness chain incomplete")?;
    Ok(format!(
        "best F_8 = {:.6}, V_0 ≤ {:.6} < −1/32 < 0, optimizer control refuted at t = {}",
        ticlab::rational::to_f64(&w.best_value),
        ticlab::rational::to_f64(&w.precommitted_bound),
        w.optimizer_refutation.expect("checked").t
    ))
}

fn identity_suite() -> Check {
    let config = SuiteConfig { controls: 200, paths: 100, ..SuiteConfig::default() };
    let mut outcomes = vec![suite::self_interaction_identity(&config), suite::weight_telescoping(&config, 8)];
    for n in [4, 8, 12] {
        outcomes.push(suite::truncation_bound(&config, n));
    }
    for o in &outcomes {
        ensure(o.passed, format!("{} failed: {:?}", o.name, o.failures))?;
    }
    ensure(outcomes[0].cases == 200 && outcomes[1].cases == 100, "case counts")?;
    Ok("identity on 200 controls, telescoping on 100 paths, truncation for N = 4, 8, 12".into())
}

fn oracle_equivalence() -> Check {
    let config = SuiteConfig::default();
    let o = suite::oracle_equivalence(&config, 100);
    ensure(o.cases == 100 && o.passed, format!("{:?}", o.failures))?;
    Ok(format!("100 controls, max |exact − quadrature| = {:.2e}", o.max_residual))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 closed-form reproduction", Duration::from_secs(1), closed_form_reproduction),
        ("2 pareto domination", Duration::from_secs(1), pareto_domination),
        ("3 equilibrium verification", Duration::from_secs(5), equilibrium_verification),
        ("4 naive example", Duration::from_secs(1), naive_example),
        ("5 precommitted bound and witness", Duration::from_secs(30), precommitted_bound),
        ("6 algebraic identity suite", Duration::from_secs(30), identity_suite),
        ("7 oracle equivalence", Duration::from_secs(30), oracle_equivalence),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let line = match result {
            Ok(detail) if elapsed <= budget => format!("PASS criterion {name} ({elapsed:.2?}): {detail}"),
            Ok(detail) => format!("FAIL criterion {name}: over budget {elapsed:.2?} > {budget:?} ({detail})"),
            Err(why) => format!("FAIL criterion {name} ({elapsed:.2?}): {why}"),
        };
        if line.starts_with("FAIL") {
            failed += 1;
        }
        println!("{line}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
