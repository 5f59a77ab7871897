//! Optimal unambiguous discrimination of linearly independent pure states.
//!
//! The mean-efficiency maximization under the positivity constraint is reduced to
//! minimizing the top eigenvalue of `Ξ Y(t)² Ξ†` over the positive orthant of an
//! ellipsoid; the resulting weights define the POVM, which is then dilated into a
//! projective measurement on a larger space.

pub mod analytic;
pub mod families;
pub mod geometry;
pub mod linalg;
pub mod neumark;
pub mod optimizer;
pub mod povm;
pub mod simplex;
pub mod simulator;
pub mod tolerances;

pub use analytic::{AnalyticVerdict, GramMatrix, StateSet, Theorem};
pub use geometry::{AnglePoint, Priors, WeightDiag};
pub use linalg::{CMatrix, C64};
pub use neumark::NeumarkUnitary;
pub use optimizer::{OptimizationResult, OptimizerConfig};
pub use povm::PovmSet;
pub use tolerances::Tolerances;
