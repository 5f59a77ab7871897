//! Dilation of the POVM into a unitary on the direct sum of system and ancilla.
//!
//! States and ancilla vectors occupy the columns of the top blocks:
//!
//! ```text
//! U = | Ξ  Ξ̃ |
//!     | Z  Y |
//! ```
//!
//! with `Z = V Ξ̃† (ΞΞ†)^{-1/2} Ξ` and `Y = -V (Ξ̃†Ξ̃)⁻¹ Ξ̃† (ΞΞ†)^{1/2} Ξ̃`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::StateSet;
use crate::linalg::{self, CMatrix, LinalgError};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeumarkError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("Ξ Ξ† + Ξ̃ Ξ̃† differs from the identity by {residual:e}")]
    NotCompletion { residual: f64 },
    #[error("ancilla vectors are linearly dependent (condition {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("tensor layout needs the canonical completion (deviation {deviation:e})")]
    NonCanonicalCompletion { deviation: f64 },
    #[error("rotation V must be unitary of size {expected}")]
    BadRotation { expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    /// Closed-form `Z`, `Y` blocks.
    Formula,
    /// Tensor layout `σ_z ⊗ Ξ + σ_x ⊗ Ξ̃`.
    Tensor,
    /// Orthonormal completion of the top rows; used when `Ξ` is singular.
    RowComplement,
}

#[derive(Debug, Clone)]
pub struct NeumarkUnitary {
    pub u: CMatrix,
    pub n: usize,
    pub n_a: usize,
    pub tensor_form: bool,
    pub construction: Construction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockResiduals {
    pub unitarity: f64,
    /// `Ξ†Ξ + Z†Z = I`.
    pub xy1: f64,
    /// `Ξ̃†Ξ̃ + Y†Y = I`.
    pub xy2: f64,
    /// `Ξ†Ξ̃ + Z†Y = 0`.
    pub xy5: f64,
}

impl NeumarkUnitary {
    pub fn xi(&self) -> CMatrix {
        self.u.block(0, 0, self.n, self.n)
    }

    pub fn xi_tilde(&self) -> CMatrix {
        self.u.block(0, self.n, self.n, self.n_a)
    }

    pub fn z(&self) -> CMatrix {
        self.u.block(self.n, 0, self.n_a, self.n)
    }

    pub fn y(&self) -> CMatrix {
        self.u.block(self.n, self.n, self.n_a, self.n_a)
    }

    pub fn dim(&self) -> usize {
        self.n + self.n_a
    }

    pub fn residuals(&self) -> BlockResiduals {
        let xi = self.xi();
        let xt = self.xi_tilde();
        let z = self.z();
        let y = self.y();
        let xy1 = (&(&xi.adjoint() * &xi) + &(&z.adjoint() * &z)).identity_residual();
        let xy2 = if self.n_a == 0 {
            0.0
        } else {
            (&(&xt.adjoint() * &xt) + &(&y.adjoint() * &y)).identity_residual()
        };
        let xy5 = if self.n_a == 0 {
            0.0
        } else {
            (&(&xi.adjoint() * &xt) + &(&z.adjoint() * &y)).max_abs()
        };
        BlockResiduals {
            unitarity: linalg::unitarity_residual(&self.u),
            xy1,
            xy2,
            xy5,
        }
    }
}

fn completion_residual(xi: &CMatrix, xi_tilde: &CMatrix) -> f64 {
    let mut s = xi * &xi.adjoint();
    if xi_tilde.ncols() > 0 {
        s = &s + &(xi_tilde * &xi_tilde.adjoint());
    }
    s.identity_residual()
}

fn check_shapes(xi: &CMatrix, xi_tilde: &CMatrix) -> Result<usize, NeumarkError> {
    let n = xi.nrows();
    if !xi.is_square() {
        return Err(NeumarkError::DimensionMismatch(format!(
            "Ξ must be square, got {}x{}",
            xi.nrows(),
            xi.ncols()
        )));
    }
    if xi_tilde.nrows() != n || xi_tilde.ncols() > n {
        return Err(NeumarkError::DimensionMismatch(format!(
            "Ξ̃ must be {n}xN_a with N_a <= {n}, got {}x{}",
            xi_tilde.nrows(),
            xi_tilde.ncols()
        )));
    }
    Ok(n)
}

fn assemble(xi: &CMatrix, xi_tilde: &CMatrix, z: &CMatrix, y: &CMatrix) -> CMatrix {
    let n = xi.nrows();
    let n_a = xi_tilde.ncols();
    let mut u = CMatrix::zeros(n + n_a, n + n_a);
    u.set_block(0, 0, xi);
    if n_a > 0 {
        u.set_block(0, n, xi_tilde);
        u.set_block(n, 0, z);
        u.set_block(n, n, y);
    }
    u
}

/// Unitary extension with the closed-form bottom blocks; `v` defaults to the identity.
pub fn extend(
    xi: &CMatrix,
    xi_tilde: &CMatrix,
    v: Option<&CMatrix>,
) -> Result<NeumarkUnitary, NeumarkError> {
    extend_with(xi, xi_tilde, v, &Tolerances::default())
}

pub fn extend_with(
    xi: &CMatrix,
    xi_tilde: &CMatrix,
    v: Option<&CMatrix>,
    tol: &Tolerances,
) -> Result<NeumarkUnitary, NeumarkError> {
    let n = check_shapes(xi, xi_tilde)?;
    let n_a = xi_tilde.ncols();
    let residual = completion_residual(xi, xi_tilde);
    if residual > tol.completion {
        return Err(NeumarkError::NotCompletion { residual });
    }
    if let Some(v) = v {
        if v.shape() != (n_a, n_a) || (n_a > 0 && linalg::unitarity_residual(v) > 1e-10) {
            return Err(NeumarkError::BadRotation { expected: n_a });
        }
    }
    if n_a == 0 {
        return Ok(NeumarkUnitary {
            u: xi.clone(),
            n,
            n_a,
            tensor_form: false,
            construction: Construction::Formula,
        });
    }
    let gram_t = &xi_tilde.adjoint() * xi_tilde;
    let condition = linalg::svd(&gram_t)?.condition();
    if !condition.is_finite() || condition >= tol.max_condition {
        return Err(NeumarkError::RankDeficient { condition });
    }
    let b = (xi * &xi.adjoint()).hermitian_part();
    let eig = linalg::herm_eig_with(&b, tol)?;
    let xi_singular = eig.min() <= tol.inv_sqrt_floor.sqrt();
    if xi_singular {
        return row_complement(xi, xi_tilde, v, tol);
    }
    let inv_sqrt = eig.apply(|l| 1.0 / l.max(tol.inv_sqrt_floor).sqrt());
    let sqrt = eig.apply(|l| l.max(0.0).sqrt());
    let gram_t_inv = linalg::inverse_with(&gram_t, tol)?;
    let mut z = &(&xi_tilde.adjoint() * &inv_sqrt) * xi;
    let mut y = -&(&(&gram_t_inv * &xi_tilde.adjoint()) * &(&sqrt * xi_tilde));
    if let Some(v) = v {
        z = v * &z;
        y = v * &y;
    }
    Ok(NeumarkUnitary {
        u: assemble(xi, xi_tilde, &z, &y),
        n,
        n_a,
        tensor_form: false,
        construction: Construction::Formula,
    })
}

/// Bottom rows spanning the orthogonal complement of the top rows `[Ξ Ξ̃]`.
fn row_complement(
    xi: &CMatrix,
    xi_tilde: &CMatrix,
    v: Option<&CMatrix>,
    tol: &Tolerances,
) -> Result<NeumarkUnitary, NeumarkError> {
    let n = xi.nrows();
    let n_a = xi_tilde.ncols();
    let mut top = CMatrix::zeros(n, n + n_a);
    top.set_block(0, 0, xi);
    top.set_block(0, n, xi_tilde);
    let proj = (&CMatrix::identity(n + n_a) - &(&top.adjoint() * &top)).hermitian_part();
    let eig = linalg::herm_eig_with(&proj, tol)?;
    // Eigenvalue 1 spans the complement; ascending order puts it last.
    let basis = eig.vectors.block(0, n, n + n_a, n_a);
    let mut bottom = basis.adjoint();
    if let Some(v) = v {
        bottom = v * &bottom;
    }
    let z = bottom.block(0, 0, n_a, n);
    let y = bottom.block(0, n, n_a, n_a);
    Ok(NeumarkUnitary {
        u: assemble(xi, xi_tilde, &z, &y),
        n,
        n_a,
        tensor_form: false,
        construction: Construction::RowComplement,
    })
}

/// `Φ = (ΞΞ†)^{-1/2} Ξ`, the unitary polar factor of `Ξ`.
pub fn polar_factor(xi: &CMatrix, tol: &Tolerances) -> Result<CMatrix, NeumarkError> {
    let b = (xi * &xi.adjoint()).hermitian_part();
    let eig = linalg::herm_eig_with(&b, tol)?;
    Ok(&eig.apply(|l| 1.0 / l.max(tol.inv_sqrt_floor).sqrt()) * xi)
}

/// Tensor layout `U = σ_z ⊗ Ξ + σ_x ⊗ Ξ̃` for the canonical full-rank completion.
pub fn extend_tensor(xi: &CMatrix, xi_tilde: &CMatrix) -> Result<NeumarkUnitary, NeumarkError> {
    extend_tensor_with(xi, xi_tilde, &Tolerances::default())
}

pub fn extend_tensor_with(
    xi: &CMatrix,
    xi_tilde: &CMatrix,
    tol: &Tolerances,
) -> Result<NeumarkUnitary, NeumarkError> {
    let n = check_shapes(xi, xi_tilde)?;
    if xi_tilde.ncols() != n {
        return Err(NeumarkError::DimensionMismatch(format!(
            "tensor layout needs N_a = N = {n}, got N_a = {}",
            xi_tilde.ncols()
        )));
    }
    let residual = completion_residual(xi, xi_tilde);
    if residual > tol.completion {
        return Err(NeumarkError::NotCompletion { residual });
    }
    // Z = Ξ̃ and Y = -Ξ hold only when Φ†Ξ̃ is Hermitian, i.e. for the canonical Ξ̃.
    let canonical = crate::povm::canonical_completion(xi, tol).map_err(|_| {
        NeumarkError::NonCanonicalCompletion {
            deviation: f64::INFINITY,
        }
    })?;
    let deviation = canonical.max_abs_diff(xi_tilde);
    if deviation > tol.completion.sqrt() * 1e-1 {
        return Err(NeumarkError::NonCanonicalCompletion { deviation });
    }
    let y = -xi;
    Ok(NeumarkUnitary {
        u: assemble(xi, xi_tilde, xi_tilde, &y),
        n,
        n_a: n,
        tensor_form: true,
        construction: Construction::Tensor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedStatistics {
    /// `success[j][k]`: probability of outcome `k < N` for state `j`.
    pub success: Vec<Vec<f64>>,
    /// Total probability of the ancilla outcomes for each state.
    pub inconclusive: Vec<f64>,
}

/// Outcome statistics of `U†(ψ_j; 0)` in the computational basis.
pub fn project_statistics(u: &NeumarkUnitary, psi: &StateSet) -> ProjectedStatistics {
    let n = u.n;
    let dim = u.dim();
    let ud = u.u.adjoint();
    let mut success = Vec::with_capacity(n);
    let mut inconclusive = Vec::with_capacity(n);
    for j in 0..psi.n() {
        let state = psi.psi().column(j);
        let amp: Vec<f64> = (0..dim)
            .map(|k| {
                (0..n)
                    .map(|i| ud[(k, i)] * state[i])
                    .sum::<crate::linalg::C64>()
                    .norm_sqr()
            })
            .collect();
        success.push(amp[..n].to_vec());
        inconclusive.push(amp[n..].iter().sum());
    }
    ProjectedStatistics {
        success,
        inconclusive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn block_rotation() {
        let th: f64 = 0.7;
        let xi = CMatrix::identity(3).scale(th.cos());
        let xt = CMatrix::identity(3).scale(th.sin());
        let u = extend(&xi, &xt, None).unwrap();
        assert!(u.residuals().unitarity < 1e-14);
        assert_eq!(u.construction, Construction::Formula);
    }

    #[test]
    fn tensor_layout_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let xi = CMatrix::identity(2).scale(h);
        let u = extend_tensor(&xi, &xi).unwrap();
        assert!(u.residuals().unitarity < 1e-14);
        assert!(u.tensor_form);

        let xi = CMatrix::identity(3).scale(0.6);
        let xt = CMatrix::identity(3).scale(0.8);
        let u = extend_tensor(&xi, &xt).unwrap();
        assert!(u.z().max_abs_diff(&xt) < 1e-15);
        assert!(u.y().max_abs_diff(&xi.scale(-1.0)) < 1e-15);
        assert!(u.residuals().unitarity < 1e-14);
    }

    #[test]
    fn tensor_layout_rejects_bad_shapes_and_rotated_completion() {
        let xi = CMatrix::identity(2).scale(0.6);
        let xt = CMatrix::from_fn(2, 1, |_, _| C64::new(0.8, 0.0));
        assert!(matches!(
            extend_tensor(&xi, &xt),
            Err(NeumarkError::DimensionMismatch(_)) | Err(NeumarkError::NotCompletion { .. })
        ));
        // A rotated completion is still a completion, but not the canonical one.
        let swap = CMatrix::from_rows(&[
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ])
        .unwrap();
        let xt = &CMatrix::identity(2).scale(0.8) * &swap;
        assert!(matches!(
            extend_tensor(&xi, &xt),
            Err(NeumarkError::NonCanonicalCompletion { .. })
        ));
        assert!(extend(&xi, &xt, None).unwrap().residuals().unitarity < 1e-14);
    }

    #[test]
    fn not_a_completion() {
        let xi = CMatrix::identity(2).scale(0.6);
        let xt = CMatrix::identity(2).scale(0.6);
        assert!(matches!(
            extend(&xi, &xt, None),
            Err(NeumarkError::NotCompletion { .. })
        ));
    }

    #[test]
    fn singular_xi_uses_row_complement() {
        // One vanishing weight: Ξ = diag(1, 0) with Ξ̃ = e_2.
        let xi = CMatrix::from_real_diagonal(&[1.0, 0.0]);
        let xt = CMatrix::from_fn(2, 1, |i, _| C64::new(if i == 1 { 1.0 } else { 0.0 }, 0.0));
        let u = extend(&xi, &xt, None).unwrap();
        assert_eq!(u.construction, Construction::RowComplement);
        let r = u.residuals();
        assert!(r.unitarity < 1e-14 && r.xy1 < 1e-14 && r.xy5 < 1e-14);
    }

    #[test]
    fn identity_statistics() {
        let psi = StateSet::new(CMatrix::identity(3)).unwrap();
        let u = extend(&CMatrix::identity(3), &CMatrix::zeros(3, 0), None).unwrap();
        let st = project_statistics(&u, &psi);
        for j in 0..3 {
            for k in 0..3 {
                let e = if j == k { 1.0 } else { 0.0 };
                assert!((st.success[j][k] - e).abs() < 1e-15);
            }
            assert!(st.inconclusive[j].abs() < 1e-15);
        }
    }
}
