//! Detection operators, the inconclusive element and its ancilla vectors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::StateSet;
use crate::geometry::{GeometryError, WeightDiag};
use crate::linalg::{self, CMatrix, LinalgError};
use crate::optimizer::{self, FeasibilityReport, OptimizerError};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PovmError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("weights are infeasible: min eigenvalues {} (Gram form) and {} (reciprocal form)",
        .0.gram_form_min_eigenvalue, .0.reciprocal_form_min_eigenvalue)]
    Infeasible(FeasibilityReport),
    #[error("complement has rank {rank} < {n}; use the reduced ancilla construction")]
    RankDeficient { rank: usize, n: usize },
    #[error("ancilla rotation must be a {expected}x{expected} unitary")]
    BadRotation { expected: usize },
}

impl From<OptimizerError> for PovmError {
    fn from(e: OptimizerError) -> Self {
        match e {
            OptimizerError::Linalg(l) => PovmError::Linalg(l),
            OptimizerError::Geometry(g) => PovmError::Geometry(g),
            other => PovmError::Linalg(LinalgError::DimensionMismatch {
                expected: "consistent optimizer input".into(),
                got: other.to_string(),
            }),
        }
    }
}

/// `Π_j = x_j² |ξ_j⟩⟨ξ_j|`, `Π̃ = I - Σ_j Π_j = Ξ̃ Ξ̃†`.
#[derive(Debug, Clone)]
pub struct PovmSet {
    pub detectors: Vec<CMatrix>,
    pub complement: CMatrix,
    pub ancilla_dim: usize,
    /// `N × N_a`; zero columns when the detectors already resolve the identity.
    pub ancilla_vectors: CMatrix,
    /// `Ξ_x = Ξ X`.
    pub xi_x: CMatrix,
    pub weights: WeightDiag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovmResiduals {
    /// `max |Σ Π_j + Π̃ - I|`.
    pub completeness: f64,
    pub complement_min_eigenvalue: f64,
    /// `max |Ξ̃ Ξ̃† - Π̃|`.
    pub ancilla: f64,
    /// Largest `⟨ψ_j|Π_k|ψ_j⟩`, `j ≠ k`.
    pub cross_probability: f64,
    /// Largest `|⟨ψ_j|Π_j|ψ_j⟩ - x_j²|`.
    pub diagonal: f64,
}

impl PovmSet {
    pub fn n(&self) -> usize {
        self.detectors.len()
    }

    pub fn residuals(&self, psi: &StateSet) -> Result<PovmResiduals, PovmError> {
        let n = self.n();
        let mut total = self.complement.clone();
        for d in &self.detectors {
            total = &total + d;
        }
        let completeness = total.identity_residual();
        let complement_min_eigenvalue = linalg::herm_eigenvalues(&self.complement.hermitian_part())?[0];
        let ancilla = (&self.ancilla_vectors * &self.ancilla_vectors.adjoint())
            .max_abs_diff(&self.complement);
        let mut cross: f64 = 0.0;
        let mut diagonal: f64 = 0.0;
        let table = born_probabilities(psi, &self.xi_x);
        let squares = self.weights.squares();
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    diagonal = diagonal.max((table[j][k] - squares[j]).abs());
                } else {
                    cross = cross.max(table[j][k]);
                }
            }
        }
        Ok(PovmResiduals {
            completeness,
            complement_min_eigenvalue,
            ancilla,
            cross_probability: cross,
            diagonal,
        })
    }
}

/// `|⟨ξ_k|ψ_j⟩|²` for every state `j` (rows) and detector vector `k` (columns).
pub fn born_probabilities(psi: &StateSet, detector_vectors: &CMatrix) -> Vec<Vec<f64>> {
    let amp = &detector_vectors.adjoint() * psi.psi();
    let n = psi.n();
    (0..n)
        .map(|j| (0..detector_vectors.ncols()).map(|k| amp[(k, j)].norm_sqr()).collect())
        .collect()
}

fn weighted_reciprocal(psi: &StateSet, x: &WeightDiag) -> Result<CMatrix, PovmError> {
    if x.len() != psi.n() {
        return Err(GeometryError::DimensionMismatch {
            expected: psi.n(),
            got: x.len(),
        }
        .into());
    }
    Ok(psi.xi().scale_columns(x.values()))
}

fn require_feasible(psi: &StateSet, x: &WeightDiag, tol: &Tolerances) -> Result<(), PovmError> {
    let rep = optimizer::feasibility_check_with(psi, x, tol)?;
    if !rep.feasible {
        return Err(PovmError::Infeasible(rep));
    }
    Ok(())
}

fn outer(v: &[crate::linalg::C64]) -> CMatrix {
    let n = v.len();
    CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

pub fn detection_operators(psi: &StateSet, x: &WeightDiag) -> Result<Vec<CMatrix>, PovmError> {
    detection_operators_with(psi, x, &Tolerances::default())
}

pub fn detection_operators_with(
    psi: &StateSet,
    x: &WeightDiag,
    tol: &Tolerances,
) -> Result<Vec<CMatrix>, PovmError> {
    let xx = weighted_reciprocal(psi, x)?;
    require_feasible(psi, x, tol)?;
    Ok((0..psi.n()).map(|j| outer(&xx.column(j))).collect())
}

fn complement_matrix(xx: &CMatrix) -> CMatrix {
    (&CMatrix::identity(xx.nrows()) - &(xx * &xx.adjoint())).hermitian_part()
}

/// Complete POVM for feasible weights; the ancilla construction follows the rank of `Π̃`.
pub fn complement(psi: &StateSet, x: &WeightDiag) -> Result<PovmSet, PovmError> {
    complement_with(psi, x, &Tolerances::default())
}

pub fn complement_with(psi: &StateSet, x: &WeightDiag, tol: &Tolerances) -> Result<PovmSet, PovmError> {
    let detectors = detection_operators_with(psi, x, tol)?;
    let xx = weighted_reciprocal(psi, x)?;
    let comp = complement_matrix(&xx);
    let rank = linalg::numerical_rank(&comp, tol.rank)?;
    let ancilla_vectors = if rank == psi.n() {
        ancilla_full_with(psi, x, tol)?
    } else {
        ancilla_reduced_with(psi, x, None, tol)?
    };
    Ok(PovmSet {
        detectors,
        complement: comp,
        ancilla_dim: ancilla_vectors.ncols(),
        ancilla_vectors,
        xi_x: xx,
        weights: x.clone(),
    })
}

/// `N × N` ancilla matrix for a complement of full rank.
///
/// Uses `[(Ξ_x Ξ_x†)⁻¹ - I]^{1/2} Ξ_x` when `Ξ_x` is invertible and
/// `(I - Ξ_x Ξ_x†)^{1/2}` otherwise.
pub fn ancilla_full(psi: &StateSet, x: &WeightDiag) -> Result<CMatrix, PovmError> {
    ancilla_full_with(psi, x, &Tolerances::default())
}

pub fn ancilla_full_with(psi: &StateSet, x: &WeightDiag, tol: &Tolerances) -> Result<CMatrix, PovmError> {
    let xx = weighted_reciprocal(psi, x)?;
    let n = psi.n();
    let comp = complement_matrix(&xx);
    let eig = linalg::herm_eig_with(&comp, tol)?;
    if eig.min() <= tol.rank {
        let rank = eig.values.iter().filter(|v| **v >= tol.rank).count();
        return Err(PovmError::RankDeficient { rank, n });
    }
    let invertible = x.values().iter().all(|v| *v > 0.0)
        && linalg::svd(&xx)?.condition() < tol.max_condition;
    if invertible {
        canonical_completion(&xx, tol)
    } else {
        Ok(eig.apply(|l| l.max(0.0).sqrt()))
    }
}

/// `[(Ξ Ξ†)⁻¹ - I]^{1/2} Ξ` for invertible `Ξ` with `Ξ Ξ† ≤ I`.
pub fn canonical_completion(xi: &CMatrix, tol: &Tolerances) -> Result<CMatrix, PovmError> {
    let b = (xi * &xi.adjoint()).hermitian_part();
    let eig = linalg::herm_eig_with(&b, tol)?;
    if eig.min() <= 0.0 {
        return Err(LinalgError::Singular {
            condition: f64::INFINITY,
        }
        .into());
    }
    let a = eig.apply(|s| (1.0 / s - 1.0).max(0.0).sqrt());
    Ok(&a * xi)
}

/// `N × N_a` ancilla matrix built from the nonzero columns of `U (I - S_d)^{1/2}`.
pub fn ancilla_reduced(
    psi: &StateSet,
    x: &WeightDiag,
    v: Option<&CMatrix>,
) -> Result<CMatrix, PovmError> {
    ancilla_reduced_with(psi, x, v, &Tolerances::default())
}

pub fn ancilla_reduced_with(
    psi: &StateSet,
    x: &WeightDiag,
    v: Option<&CMatrix>,
    tol: &Tolerances,
) -> Result<CMatrix, PovmError> {
    let xx = weighted_reciprocal(psi, x)?;
    reduced_from_reciprocal(&xx, v, tol)
}

/// The reduced construction for an arbitrary `Ξ` with `Ξ Ξ† ≤ I`.
pub fn reduced_from_reciprocal(
    xi: &CMatrix,
    v: Option<&CMatrix>,
    tol: &Tolerances,
) -> Result<CMatrix, PovmError> {
    let b = (xi * &xi.adjoint()).hermitian_part();
    // Ascending order puts the unit eigenvalues last.
    let eig = linalg::herm_eig_with(&b, tol)?;
    let gaps: Vec<f64> = eig.values.iter().map(|s| (1.0 - s).max(0.0)).collect();
    let n_a = gaps.iter().filter(|g| **g >= tol.rank).count();
    let scaled = eig.vectors.scale_columns(&gaps.iter().map(|g| g.sqrt()).collect::<Vec<_>>());
    let base = scaled.leading_columns(n_a);
    match v {
        None => Ok(base),
        Some(v) => {
            if v.shape() != (n_a, n_a) || (n_a > 0 && linalg::unitarity_residual(v) > 1e-10) {
                return Err(PovmError::BadRotation { expected: n_a });
            }
            if n_a == 0 {
                return Ok(base);
            }
            Ok(&base * v)
        }
    }
}
