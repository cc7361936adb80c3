use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use num_traits::Signed;
use serde::Serialize;
use serde_json::{json, Value};
use ticlab::equilibrium::{self, dyadic_grid, EquilibriumCheck, Perturbation};
use ticlab::naive::{self, DeviationKernel};
use ticlab::pareto;
use ticlab::precommit::{self, OptimizerSettings, StartSet};
use ticlab::rational::{self, int, pow2_neg, ratio, Rational};
use ticlab::schedule::t_n;
use ticlab::suite::{self, SuiteConfig};
use ticlab::{dynamics, Arithmetic, DyadicSchedule, Execution, PiecewiseControl};

use crate::output;
use crate::{Command, Common, Format};

/// A finished command: the JSON report body, its CSV rendering and
/// whether every check passed.
struct Outcome {
    report: Value,
    csv: String,
    passed: bool,
}

struct Settings {
    arithmetic: Arithmetic,
    tol: Rational,
    digits: usize,
}

fn validate(common: &Common) -> Result<Settings> {
    if common.depth < 2 {
        bail!("--depth must be at least 2, got {}", common.depth);
    }
    if common.depth > 60 {
        bail!("--depth must be at most 60, got {}", common.depth);
    }
    if !(1..=16).contains(&common.grid_depth) {
        bail!("--grid-depth must lie in 1..=16, got {}", common.grid_depth);
    }
    let tol = rational::parse(&common.tol).with_context(|| format!("--tol {:?}", common.tol))?;
    if tol.is_negative() {
        bail!("--tol must be non-negative, got {}", common.tol);
    }
    Ok(Settings { arithmetic: common.arithmetic.into(), tol, digits: common.precision })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).context("serializing report")
}

/// Header plus rows; every rational column appears as a decimal and then
/// again as the exact `p/q` string. `label` adds a leading plain column.
fn csv_table(
    label: Option<(&str, &[String])>,
    columns: &[&str],
    rows: &[Vec<Rational>],
    digits: usize,
) -> String {
    let mut out = String::new();
    let exact: Vec<String> = columns.iter().map(|c| format!("{c}_exact")).collect();
    let lead = label.map(|(name, _)| format!("{name},")).unwrap_or_default();
    writeln!(out, "{lead}{},{}", columns.join(","), exact.join(",")).expect("string write");
    for (i, row) in rows.iter().enumerate() {
        let lead = label.map(|(_, values)| format!("{},", values[i])).unwrap_or_default();
        let dec: Vec<String> = row.iter().map(|v| rational::to_decimal(v, digits)).collect();
        let ex: Vec<String> = row.iter().map(rational::format).collect();
        writeln!(out, "{lead}{},{}", dec.join(","), ex.join(",")).expect("string write");
    }
    out
}

fn example1(common: &Common, s: &Settings, tamper: bool) -> Result<Outcome> {
    let hat = PiecewiseControl::alpha_hat(&DyadicSchedule::new(common.depth)?);
    let candidate = if tamper { hat.flip_b_intervals()? } else { hat };
    let zero = PiecewiseControl::zero();
    let dominance = pareto::dominance_check(&candidate, &zero, common.depth)?;
    let check =
        EquilibriumCheck { tol: s.tol.clone(), arithmetic: s.arithmetic, ..EquilibriumCheck::default() };
    let equilibrium = equilibrium::verify_equilibrium(&zero, &dyadic_grid(common.grid_depth), &check)?;

    let mut table = Vec::new();
    let mut rows = Vec::new();
    let mut table_matches = true;
    for n in 0..=common.depth {
        let t = t_n(n);
        let j_hat = dynamics::y2(&candidate, &t)?;
        let closed = -pow2_neg(2 * n + 5);
        let j_star = dynamics::y2(&zero, &t)?;
        let matches = j_hat == closed;
        table_matches &= matches;
        rows.push(vec![t.clone(), j_hat.clone(), closed.clone(), j_star.clone(), &j_hat - &j_star]);
        table.push(json!({
            "n": n,
            "t": rational::format(&t),
            "j_hat": rational::format(&j_hat),
            "closed_form": rational::format(&closed),
            "j_star": rational::format(&j_star),
            "margin": rational::format(&(&j_hat - &j_star)),
            "matches": matches,
        }));
    }
    let labels: Vec<String> = (0..=common.depth).map(|n| n.to_string()).collect();
    let passed = dominance.dominates() && equilibrium.passed() && table_matches;
    Ok(Outcome {
        report: json!({
            "tampered": tamper,
            "closed_form_table": table,
            "closed_form_matches": table_matches,
            "dominance": to_value(&dominance)?,
            "equilibrium": to_value(&equilibrium)?,
        }),
        csv: csv_table(
            Some(("n", &labels)),
            &["t", "J_hat", "closed_form", "J_star", "margin"],
            &rows,
            s.digits,
        ),
        passed,
    })
}

fn example2(common: &Common, s: &Settings, horizon: &str) -> Result<Outcome> {
    let horizon = rational::parse(horizon).with_context(|| format!("--horizon {horizon:?}"))?;
    let kernel = DeviationKernel::new(horizon.clone())?;
    let table = naive::naive_table(&kernel, &naive::uniform_times(&kernel, common.grid_depth))?;
    let inconsistency =
        naive::inconsistency_check(&int(0), &(&horizon / int(2)), &(&horizon * ratio(3, 4)), &kernel)?;
    Ok(Outcome {
        passed: table.dominates && table.closed_forms_match,
        csv: table.to_csv(Some(s.digits)),
        report: json!({
            "table": to_value(&table)?,
            "inconsistency": to_value(&inconsistency)?,
        }),
    })
}

fn optimize(
    common: &Common,
    s: &Settings,
    restarts: u32,
    iterations: u32,
    zero_start_only: bool,
) -> Result<Outcome> {
    let settings = OptimizerSettings {
        depth: common.depth,
        restarts,
        iterations,
        seed: common.seed,
        starts: if zero_start_only { StartSet::ZeroOnly } else { StartSet::All },
        execution: Execution::default(),
    };
    // The witness needs N >= 4; shallower runs report the optimizer alone.
    let (result, witness) = if common.depth >= 4 {
        let w = precommit::inconsistency_witness(&settings)?;
        (w.optimization.clone(), Some(w))
    } else {
        (precommit::maximize_f(&settings)?, None)
    };
    let complete = witness.as_ref().is_some_and(|w| w.complete);
    let passed = result.best_value >= ratio(5, 96) - &s.tol && complete;
    let rows: Vec<Vec<Rational>> = result.path.iter().map(|p| vec![p.u.clone(), p.x.clone()]).collect();
    Ok(Outcome {
        csv: csv_table(None, &["u", "x"], &rows, s.digits),
        report: json!({
            "N": result.depth,
            "best_value": rational::format(&result.best_value),
            "truncation_bound": rational::format(&result.truncation_bound),
            "target": rational::format(&ratio(5, 96)),
            "path": to_value(&result.path)?,
            "optimization": to_value(&result)?,
            "witness": to_value(&witness)?,
        }),
        passed,
    })
}

fn load_control(which: &str, depth: u32) -> Result<(String, PiecewiseControl)> {
    Ok(match which {
        "zero" => ("zero".into(), PiecewiseControl::zero()),
        "alpha-hat" => ("alpha-hat".into(), PiecewiseControl::alpha_hat(&DyadicSchedule::new(depth)?)),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading control {path}"))?;
            (path.to_string(), PiecewiseControl::from_json(&text)?)
        }
    })
}

fn verify_equilibrium(common: &Common, s: &Settings, control: &str, k_max: u32) -> Result<Outcome> {
    let (name, control) = load_control(control, common.depth)?;
    if *control.horizon() != int(1) {
        bail!(
            "the spike test is posed on [0, 1]; control horizon is {}",
            rational::format(control.horizon())
        );
    }
    let grid = dyadic_grid(common.grid_depth);
    let check = EquilibriumCheck {
        perturbations: Perturbation::default_family(),
        k_max,
        tol: s.tol.clone(),
        arithmetic: s.arithmetic,
        execution: Execution::default(),
    };
    let report = equilibrium::verify_equilibrium(&control, &grid, &check)?;
    let necessary = equilibrium::necessary_condition_check(&control, &grid)?;
    let mut csv = String::from("t,perturbation_id,rate,t_exact\n");
    for w in &report.witnesses {
        let rate = match w.rate.as_exact() {
            Some(r) => rational::to_decimal(r, s.digits),
            None => format!("{:e}", w.rate.to_f64()),
        };
        writeln!(
            csv,
            "{},{},{},{}",
            rational::to_decimal(&w.t, s.digits),
            w.perturbation_id,
            rate,
            rational::format(&w.t)
        )
        .expect("string write");
    }
    Ok(Outcome {
        passed: report.passed(),
        csv,
        report: json!({
            "control": name,
            "equilibrium": to_value(&report)?,
            "necessary_conditions": to_value(&necessary)?,
        }),
    })
}

fn verify(common: &Common, s: &Settings) -> Result<Outcome> {
    let config = SuiteConfig {
        seed: common.seed,
        arithmetic: s.arithmetic,
        tol: rational::to_f64(&s.tol),
        ..SuiteConfig::default()
    };
    let report = suite::run(&config);
    let failed: Vec<&str> = report.failed().iter().map(|p| p.name.as_str()).collect();
    let mut csv = String::from("property,cases,passed,max_residual\n");
    for p in &report.properties {
        writeln!(csv, "{},{},{},{:e}", p.name, p.cases, p.passed, p.max_residual).expect("string write");
    }
    Ok(Outcome {
        report: json!({ "suite": to_value(&report)?, "failed": failed }),
        csv,
        passed: report.passed,
    })
}

/// Runs one command, writes its report and returns whether it passed.
pub fn run(common: &Common, command: &Command) -> Result<bool> {
    let s = validate(common)?;
    let outcome = match command {
        Command::ReproduceExample1 { tamper } => example1(common, &s, *tamper)?,
        Command::ReproduceExample2 { horizon } => example2(common, &s, horizon)?,
        Command::Optimize { restarts, iterations, zero_start_only } => {
            optimize(common, &s, *restarts, *iterations, *zero_start_only)?
        }
        Command::VerifyEquilibrium { control, k_max } => verify_equilibrium(common, &s, control, *k_max)?,
        Command::Verify => verify(common, &s)?,
    };
    let name = command.name();
    let body = match common.format {
        Format::Csv => outcome.csv,
        Format::Json => {
            let envelope = json!({
                "command": name,
                "config": {
                    "depth": common.depth,
                    "grid_depth": common.grid_depth,
                    "arithmetic": s.arithmetic,
                    "tol": rational::format(&s.tol),
                    "seed": common.seed,
                    "precision": common.precision,
                },
                "passed": outcome.passed,
                "exit_code": if outcome.passed { 0 } else { 2 },
                "report": outcome.report,
            });
            let decorated = output::with_decimals(envelope, s.digits);
            let mut text = serde_json::to_string_pretty(&decorated).context("rendering JSON")?;
            text.push('\n');
            text
        }
    };
    let target = output::emit(common, name, &body)?;
    eprintln!("{name}: {} ({target})", if outcome.passed { "PASS" } else { "FAIL" });
    Ok(outcome.passed)
}
