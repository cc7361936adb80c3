//! Exact verification toolkit for a time-inconsistent deterministic control
//! problem: the backward system `Y¹, Y²`, spike-variation equilibrium tests,
//! Pareto-dominance certificates, the Lipschitz-path reformulation of the
//! precommitted problem, and the absolute-deviation naive-strategy example.
//!
//! Everything runs in exact rational arithmetic; [`numeric`] is an
//! independent floating-point backend used as a cross-check. Independent
//! work items go through [`par::map`], which uses rayon when the `parallel`
//! feature is on.

pub mod arith;
pub mod control;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod naive;
pub mod numeric;
pub mod par;
pub mod pareto;
pub mod poly;
pub mod precommit;
pub mod rational;
pub mod sampling;
pub mod schedule;
pub mod suite;

pub use arith::{Arithmetic, Scalar};
pub use control::{DyadicTail, PiecewiseControl, Segment};
pub use dynamics::{cost_j, to_path, y1, y2, LipschitzPath, Trajectory};
pub use equilibrium::{verify_equilibrium, EquilibriumCheck, Perturbation, VerificationReport};
pub use error::{Error, Result};
pub use naive::DeviationKernel;
pub use par::Execution;
pub use pareto::{dominance_check, DominanceReport, DominanceVerdict};
pub use precommit::{inconsistency_witness, maximize_f, OptimizationResult, OptimizerSettings};
pub use rational::Rational;
pub use schedule::{DyadicSchedule, Location, Phase, Weight};
