//! Numerical thresholds shared by every module.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max entry of `H - H^†` (relative to `max(1, ‖H‖_max)`) accepted as Hermitian.
    pub hermitian: f64,
    /// Two eigenvalues are equal when `|a - b| <= degeneracy * max(1, |a|)`.
    pub degeneracy: f64,
    /// Negative eigenvalues above `-psd_clamp` are treated as zero.
    pub psd_clamp: f64,
    /// PSD tolerance for the two equivalent feasibility forms.
    pub feasibility: f64,
    /// Eigenvalue threshold for the numerical rank of the complement operator.
    pub rank: f64,
    /// Condition-number ceiling for inverses.
    pub max_condition: f64,
    /// Post-check on `‖M M^{-1} - I‖_max`.
    pub inverse_residual: f64,
    /// Unit-norm check on state vectors.
    pub unit_norm: f64,
    /// Smallest admissible singular value of a state set.
    pub min_singular: f64,
    /// Entry tolerance when testing a Gram matrix for circulant structure.
    pub circulant: f64,
    /// Modulus tolerance for equal-coordinate eigenvector tests.
    pub equal_modulus: f64,
    /// Floor for eigenvalues inside `(Ξ Ξ^†)^{-1/2}`.
    pub inv_sqrt_floor: f64,
    /// Completion check `‖Ξ Ξ^† + Ξ̃ Ξ̃^† - I‖_max`.
    pub completion: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        hermitian: 1e-10,
        degeneracy: 1e-8,
        psd_clamp: 1e-10,
        feasibility: 1e-8,
        rank: 1e-8,
        max_condition: 1e12,
        inverse_residual: 1e-8,
        unit_norm: 1e-10,
        min_singular: 1e-10,
        circulant: 1e-8,
        equal_modulus: 1e-8,
        inv_sqrt_floor: 1e-12,
        completion: 1e-9,
    };

    pub fn eigenvalues_equal(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.degeneracy * a.abs().max(1.0)
    }

    /// Multiplies every threshold by `factor` (>1 loosens, <1 tightens).
    pub fn scaled(&self, factor: f64) -> Tolerances {
        Tolerances {
            hermitian: self.hermitian * factor,
            degeneracy: self.degeneracy * factor,
            psd_clamp: self.psd_clamp * factor,
            feasibility: self.feasibility * factor,
            rank: self.rank * factor,
            max_condition: self.max_condition / factor,
            inverse_residual: self.inverse_residual * factor,
            unit_norm: self.unit_norm * factor,
            min_singular: self.min_singular * factor,
            circulant: self.circulant * factor,
            equal_modulus: self.equal_modulus * factor,
            inv_sqrt_floor: self.inv_sqrt_floor * factor,
            completion: self.completion * factor,
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::DEFAULT
    }
}
