//! State sets, Gram matrices and the closed-form optima.
//!
//! The closed forms cover: sets whose Hermitian form has a lowest eigenvector
//! with equal-modulus coordinates, sets with a two-level Gram spectrum, the
//! equal-overlap family, two states with arbitrary priors, and symmetric
//! (circulant-Gram) sets. All equal-prior shortcuts report `X = sqrt(P_M) I`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, WeightDiag};
use crate::linalg::{self, CMatrix, HermEig, LinalgError, C64};
use crate::simplex::{self, SimplexOptions};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("state {column} has norm {norm}, expected 1")]
    NotNormalized { column: usize, norm: f64 },
    #[error("states are linearly dependent (smallest singular value {min_singular:e})")]
    Singular { min_singular: f64 },
    #[error("parameter outside its domain: {0}")]
    Domain(String),
}

impl AnalyticError {
    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            AnalyticError::Singular { .. } | AnalyticError::Linalg(LinalgError::Singular { .. })
        )
    }
}

/// `N` linearly independent unit vectors stored as the columns of `Ψ`,
/// together with the reciprocal states `Ξ = (Ψ†)⁻¹`.
#[derive(Debug, Clone)]
pub struct StateSet {
    psi: CMatrix,
    xi: CMatrix,
    tag: Option<String>,
}

impl StateSet {
    pub fn new(psi: CMatrix) -> Result<Self, AnalyticError> {
        Self::with_tolerances(psi, &Tolerances::default())
    }

    pub fn with_tolerances(psi: CMatrix, tol: &Tolerances) -> Result<Self, AnalyticError> {
        let n = psi.nrows();
        if !psi.is_square() {
            return Err(LinalgError::NotSquare {
                rows: n,
                cols: psi.ncols(),
            }
            .into());
        }
        if n < 2 {
            return Err(GeometryError::TooFewStates(n).into());
        }
        for column in 0..n {
            let norm = psi.column_norm(column);
            if (norm - 1.0).abs() > tol.unit_norm {
                return Err(AnalyticError::NotNormalized { column, norm });
            }
        }
        let min_singular = linalg::min_singular_value(&psi)?;
        if min_singular < tol.min_singular {
            return Err(AnalyticError::Singular { min_singular });
        }
        let xi = linalg::inverse_with(&psi.adjoint(), tol).map_err(|e| match e {
            LinalgError::Singular { .. } => AnalyticError::Singular { min_singular },
            other => other.into(),
        })?;
        Ok(StateSet {
            psi,
            xi,
            tag: None,
        })
    }

    /// Rescales every column to unit norm before validating.
    pub fn normalized(psi: CMatrix) -> Result<Self, AnalyticError> {
        let norms: Vec<f64> = (0..psi.ncols()).map(|j| psi.column_norm(j)).collect();
        if let Some(j) = norms.iter().position(|v| *v == 0.0) {
            return Err(AnalyticError::NotNormalized { column: j, norm: 0.0 });
        }
        let inv: Vec<f64> = norms.iter().map(|v| 1.0 / v).collect();
        Self::new(psi.scale_columns(&inv))
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn psi(&self) -> &CMatrix {
        &self.psi
    }

    /// Reciprocal states, `⟨ξ_k|ψ_j⟩ = δ_kj`.
    pub fn xi(&self) -> &CMatrix {
        &self.xi
    }

    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn tag(&self) -> Option<&str> {
        self.tag.as_deref()
    }

    /// The rotated set `U Ψ`.
    pub fn rotated(&self, u: &CMatrix) -> Result<StateSet, AnalyticError> {
        let mut out = StateSet::new(u * &self.psi)?;
        out.tag = self.tag.clone();
        Ok(out)
    }
}

/// Overlap matrix `A = Ψ†Ψ`, unit diagonal.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    a: CMatrix,
}

impl GramMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Entry `⟨ψ_i|ψ_j⟩`.
    pub fn overlap(&self, i: usize, j: usize) -> C64 {
        self.a[(i, j)]
    }

    /// First column `(A_0, …, A_{N-1})` when `A` is circulant within `tol`.
    pub fn circulant_column(&self, tol: f64) -> Option<Vec<C64>> {
        let n = self.n();
        let col: Vec<C64> = (0..n).map(|k| self.a[(k, 0)]).collect();
        for i in 0..n {
            for j in 0..n {
                if (self.a[(i, j)] - col[(i + n - j) % n]).norm() > tol {
                    return None;
                }
            }
        }
        Some(col)
    }
}

pub fn gram(psi: &StateSet) -> GramMatrix {
    let a = (&psi.psi().adjoint() * psi.psi()).hermitian_part();
    GramMatrix { a }
}

/// Hermitian positive definite representative `Ψ₁ = W†Ψ` with `W` unitary.
///
/// `Ψ = L S R` gives `Ψ = (L R)(R† S R)`; the right factor is returned. Column
/// norms and the Gram matrix are unchanged.
pub fn hermitize(psi: &StateSet) -> Result<CMatrix, AnalyticError> {
    let dec = linalg::svd(psi.psi())?;
    let smin = *dec.singulars.last().expect("non-empty spectrum");
    if smin <= 0.0 {
        return Err(AnalyticError::Singular { min_singular: smin });
    }
    let r = &dec.right;
    let p = &r.adjoint().scale_columns(&dec.singulars) * r;
    Ok(p.hermitian_part())
}

/// [`hermitize`] packaged as a state set.
pub fn hermitized(psi: &StateSet) -> Result<StateSet, AnalyticError> {
    let h = hermitize(psi)?;
    let norms: Vec<f64> = (0..h.ncols()).map(|j| 1.0 / h.column_norm(j)).collect();
    let mut out = StateSet::new(h.scale_columns(&norms))?;
    out.tag = psi.tag.clone();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Simple lowest eigenvalue with an equal-modulus eigenvector.
    Th3Nondegenerate,
    /// Degenerate lowest eigenspace containing an equal-modulus vector.
    Th3Degenerate,
    /// Two distinct Gram eigenvalues, one `(N-1)`-fold.
    Th4TwoEigenvalue,
    Circulant,
    TwoState,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticVerdict {
    pub applicable: bool,
    pub p_m: Option<f64>,
    pub weights: Option<WeightDiag>,
    pub theorem: Theorem,
    pub certificate: String,
    /// Rank of the complementary POVM element at the reported weights.
    pub ancilla_dim: Option<usize>,
}

impl AnalyticVerdict {
    pub fn not_applicable(certificate: impl Into<String>) -> Self {
        AnalyticVerdict {
            applicable: false,
            p_m: None,
            weights: None,
            theorem: Theorem::None,
            certificate: certificate.into(),
            ancilla_dim: None,
        }
    }

    fn uniform(theorem: Theorem, n: usize, p_m: f64, ancilla_dim: usize, cert: String) -> Self {
        AnalyticVerdict {
            applicable: true,
            p_m: Some(p_m),
            weights: Some(WeightDiag::uniform(n, p_m.sqrt())),
            theorem,
            certificate: cert,
            ancilla_dim: Some(ancilla_dim),
        }
    }
}

/// Restarts and iteration cap of the equal-modulus search in a degenerate eigenspace.
const SUBSPACE_RESTARTS: usize = 50;
const SUBSPACE_MAX_ITER: usize = 4000;

fn equal_modulus_defect(v: &[C64]) -> f64 {
    let target = 1.0 / (v.len() as f64).sqrt();
    v.iter()
        .map(|z| (z.norm() - target).abs())
        .fold(0.0, f64::max)
}

/// Multiplies by the global phase that makes the first coordinate real nonnegative.
fn gauge_fixed(v: &[C64]) -> Vec<C64> {
    let phase = if v[0].norm() > 0.0 {
        v[0].conj() / v[0].norm()
    } else {
        C64::new(1.0, 0.0)
    };
    v.iter().map(|z| z * phase).collect()
}

fn format_vector(v: &[C64]) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|z| format!("{:.6}{:+.6}i", z.re, z.im))
        .collect();
    format!("({})", parts.join(", "))
}

/// Searches the span of `basis` (columns) for a unit vector whose coordinates
/// all have modulus `N^{-1/2}`.
fn equal_modulus_in_span(basis: &CMatrix, seed: u64, tol: f64) -> Option<Vec<C64>> {
    let n = basis.nrows();
    let k = basis.ncols();
    let combine = |c: &[f64]| -> Vec<C64> {
        let coeffs: Vec<C64> = (0..k).map(|i| C64::new(c[2 * i], c[2 * i + 1])).collect();
        let norm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (0..n)
            .map(|r| {
                (0..k)
                    .map(|i| basis[(r, i)] * coeffs[i])
                    .sum::<C64>()
                    / norm.max(f64::MIN_POSITIVE)
            })
            .collect()
    };
    let inv_n = 1.0 / n as f64;
    let objective = |c: &[f64]| -> f64 {
        let norm_sq: f64 = c.iter().map(|v| v * v).sum();
        if norm_sq < 1e-12 {
            return f64::INFINITY;
        }
        combine(c)
            .iter()
            .map(|z| (z.norm_sqr() - inv_n).powi(2))
            .sum()
    };
    let opts = SimplexOptions {
        initial_step: 0.3,
        tol_x: 1e-13,
        tol_f: 1e-30,
        max_iter: SUBSPACE_MAX_ITER,
        rebuilds: 3,
        lower: vec![-2.0; 2 * k],
        upper: vec![2.0; 2 * k],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SUBSPACE_RESTARTS {
        let x0: Vec<f64> = (0..2 * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let res = simplex::minimize(objective, &x0, &opts);
        let v = combine(&res.x);
        if equal_modulus_defect(&v) <= tol {
            return Some(v);
        }
    }
    None
}

/// Default seed for the degenerate-eigenspace search.
pub const VERDICT_SEED: u64 = 0x5eed_0003;

/// Equal-prior optimality test of the symmetric point.
pub fn symmetric_point_verdict(psi: &StateSet) -> AnalyticVerdict {
    symmetric_point_verdict_with(psi, &Tolerances::default(), VERDICT_SEED)
}

pub fn symmetric_point_verdict_with(psi: &StateSet, tol: &Tolerances, seed: u64) -> AnalyticVerdict {
    let n = psi.n();
    let psi1 = match hermitize(psi) {
        Ok(h) => h,
        Err(e) => return AnalyticVerdict::not_applicable(format!("hermitization failed: {e}")),
    };
    let eig: HermEig = match linalg::herm_eig_with(&psi1, tol) {
        Ok(e) => e,
        Err(e) => return AnalyticVerdict::not_applicable(format!("eigensolver failed: {e}")),
    };
    // Eigenvalues of Ψ₁ are the singular numbers λ_j; compare their squares.
    let squares: Vec<f64> = eig.values.iter().map(|l| l * l).collect();
    let sq_eig = HermEig {
        values: squares.clone(),
        vectors: eig.vectors.clone(),
    };
    let clusters = sq_eig.clusters(tol);
    let lowest = squares[0];
    let lowest_mult = clusters[0].1;
    let ancilla_dim = n - lowest_mult;

    if clusters.len() == 1 {
        return AnalyticVerdict::uniform(
            Theorem::Th3Nondegenerate,
            n,
            lowest,
            ancilla_dim,
            format!("all {n} Gram eigenvalues equal {lowest:.12}; states are orthonormal"),
        );
    }
    if clusters.len() == 2 && (clusters[0].1 == n - 1 || clusters[1].1 == n - 1) {
        return AnalyticVerdict::uniform(
            Theorem::Th4TwoEigenvalue,
            n,
            lowest,
            ancilla_dim,
            format!(
                "Gram spectrum has two levels {:.12} (x{}) and {:.12} (x{})",
                clusters[0].0, clusters[0].1, clusters[1].0, clusters[1].1
            ),
        );
    }
    if lowest_mult == 1 {
        let v = gauge_fixed(&eig.vector(0));
        let defect = equal_modulus_defect(&v);
        if defect <= tol.equal_modulus {
            return AnalyticVerdict::uniform(
                Theorem::Th3Nondegenerate,
                n,
                lowest,
                ancilla_dim,
                format!(
                    "lowest eigenvalue {:.12} is simple; eigenvector {} has equal moduli (defect {defect:.1e})",
                    eig.values[0],
                    format_vector(&v)
                ),
            );
        }
        return AnalyticVerdict::not_applicable(format!(
            "lowest eigenvector moduli differ by {defect:.3e}"
        ));
    }
    let basis = eig.vectors.leading_columns(lowest_mult);
    match equal_modulus_in_span(&basis, seed, tol.equal_modulus) {
        Some(v) => {
            let v = gauge_fixed(&v);
            AnalyticVerdict::uniform(
                Theorem::Th3Degenerate,
                n,
                lowest,
                ancilla_dim,
                format!(
                    "lowest eigenvalue {:.12} has multiplicity {lowest_mult}; equal-modulus vector {} (defect {:.1e})",
                    eig.values[0],
                    format_vector(&v),
                    equal_modulus_defect(&v)
                ),
            )
        }
        None => AnalyticVerdict::not_applicable(format!(
            "no equal-modulus vector found in the {lowest_mult}-dimensional lowest eigenspace"
        )),
    }
}

/// Optimal efficiency of `N` equiprobable states with common real overlap `s`.
pub fn equal_overlap_pm(n: usize, s: f64) -> Result<f64, AnalyticError> {
    if n < 2 {
        return Err(AnalyticError::Domain(format!("need N >= 2, got {n}")));
    }
    let lower = -1.0 / (n as f64 - 1.0);
    if !(s > lower && s < 1.0) {
        return Err(AnalyticError::Domain(format!(
            "overlap s = {s} outside ({lower}, 1)"
        )));
    }
    Ok(1.0 - s + n as f64 * (s - s.abs()) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwoStateRegime {
    Povm,
    VonNeumann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStateSolution {
    pub verdict: AnalyticVerdict,
    pub regime: TwoStateRegime,
    /// Optimal angle in the ellipsoid chart with priors `(η₁, 1-η₁)`.
    pub t: f64,
    /// Top eigenvalue at the optimum.
    pub mu_sq: f64,
}

/// Prior above which the optimal two-state measurement is projective.
pub fn von_neumann_threshold(r: f64) -> f64 {
    let r2 = r * r;
    1.0 / (1.0 + 4.0 * r2 - 4.0 * r2 * r2)
}

/// Top eigenvalue of `Ξ Y²(t) Ξ†` for the two-state set with parameter `r`
/// and `Y = diag(η₁^{-1/2} sin t, η₂^{-1/2} cos t)`.
pub fn two_state_mu_sq(r: f64, eta1: f64, t: f64) -> f64 {
    let eta2 = 1.0 - eta1;
    let d2 = (1.0 - 2.0 * r * r).powi(2);
    let c = (2.0 * t).cos();
    let s = (2.0 * t).sin();
    let a = 0.5 + (eta1 - 0.5) * c;
    let g = (a * a - eta1 * eta2 * d2 * s * s).max(0.0);
    (a + g.sqrt()) / (2.0 * eta1 * eta2 * d2)
}

/// Derivative of [`two_state_mu_sq`] in `t`, up to a positive factor.
fn two_state_slope(r: f64, eta1: f64, t: f64) -> f64 {
    let eta2 = 1.0 - eta1;
    let d2 = (1.0 - 2.0 * r * r).powi(2);
    let c = (2.0 * t).cos();
    let s = (2.0 * t).sin();
    let a = 0.5 + (eta1 - 0.5) * c;
    let da = -2.0 * (eta1 - 0.5) * s;
    let g = (a * a - eta1 * eta2 * d2 * s * s).max(1e-300);
    let dg = 2.0 * a * da - 4.0 * eta1 * eta2 * d2 * s * c;
    da + dg / (2.0 * g.sqrt())
}

/// Equal-prior top eigenvalue on the unit circle, `Y = diag(sin t, cos t)`.
pub fn two_state_mu_sq_uniform_sphere(r: f64, t: f64) -> f64 {
    let r2 = r * r;
    let d2 = (1.0 - 2.0 * r2).powi(2);
    let inner = 1.0 + 4.0 * r2 - 4.0 * r2 * r2 + d2 * (4.0 * t).cos();
    (2.0 + 2f64.sqrt() * inner.max(0.0).sqrt()) / (4.0 * d2)
}

const BRACKET_SAMPLES: usize = 256;
const BISECTION_TOL: f64 = 1e-12;

/// Two states `(√(1-r²), r e^{iα})`, `(r e^{-iα}, √(1-r²))` with priors `(η₁, 1-η₁)`.
pub fn two_state_solve(r: f64, alpha: f64, eta1: f64) -> Result<TwoStateSolution, AnalyticError> {
    if !(r > 0.0 && r < std::f64::consts::FRAC_1_SQRT_2) {
        return Err(AnalyticError::Domain(format!(
            "r = {r} outside (0, 1/sqrt(2))"
        )));
    }
    if !(0.5..1.0).contains(&eta1) {
        return Err(AnalyticError::Domain(format!("eta1 = {eta1} outside [1/2, 1)")));
    }
    if !alpha.is_finite() {
        return Err(AnalyticError::Domain("alpha must be finite".into()));
    }
    let eta2 = 1.0 - eta1;
    let d = 1.0 - 2.0 * r * r;
    let threshold = von_neumann_threshold(r);
    let (regime, t) = if eta1 > threshold {
        (TwoStateRegime::VonNeumann, FRAC_PI_2)
    } else {
        (TwoStateRegime::Povm, interior_minimum(r, eta1))
    };
    let mu_sq = match regime {
        TwoStateRegime::VonNeumann => 1.0 / (eta1 * d * d),
        TwoStateRegime::Povm => two_state_mu_sq(r, eta1, t),
    };
    let p_m = 1.0 / mu_sq;
    let scale = p_m.sqrt();
    let x = match regime {
        TwoStateRegime::VonNeumann => vec![d, 0.0],
        TwoStateRegime::Povm => vec![
            scale * t.sin() / eta1.sqrt(),
            scale * t.cos() / eta2.sqrt(),
        ],
    };
    let weights = WeightDiag::new(x)?;
    let ancilla_dim = match regime {
        TwoStateRegime::VonNeumann => 1,
        TwoStateRegime::Povm => 1,
    };
    let certificate = match regime {
        TwoStateRegime::VonNeumann => format!(
            "eta1 = {eta1} exceeds threshold {threshold:.12}; projective optimum at t = pi/2"
        ),
        TwoStateRegime::Povm => format!(
            "interior stationary point t = {t:.12} (threshold {threshold:.12})"
        ),
    };
    Ok(TwoStateSolution {
        verdict: AnalyticVerdict {
            applicable: true,
            p_m: Some(p_m),
            weights: Some(weights),
            theorem: Theorem::TwoState,
            certificate,
            ancilla_dim: Some(ancilla_dim),
        },
        regime,
        t,
        mu_sq,
    })
}

fn interior_minimum(r: f64, eta1: f64) -> f64 {
    if eta1 == 0.5 {
        return PI / 4.0;
    }
    // The slope changes sign once on (0, pi/2); locate it on a coarse scan, then bisect.
    let h = FRAC_PI_2 / BRACKET_SAMPLES as f64;
    let mut lo = h * 1e-3;
    let mut hi = FRAC_PI_2 - h * 1e-3;
    let mut prev_t = lo;
    let mut prev = two_state_slope(r, eta1, prev_t);
    for i in 1..=BRACKET_SAMPLES {
        let t = (i as f64 * h).min(hi);
        let s = two_state_slope(r, eta1, t);
        if prev < 0.0 && s >= 0.0 {
            lo = prev_t;
            hi = t;
            break;
        }
        prev_t = t;
        prev = s;
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if two_state_slope(r, eta1, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    // Guard against a bracket that never closed: fall back to the better endpoint.
    let candidates = [t, FRAC_PI_2];
    candidates
        .into_iter()
        .min_by(|a, b| two_state_mu_sq(r, eta1, *a).total_cmp(&two_state_mu_sq(r, eta1, *b)))
        .expect("non-empty")
}

/// Eigenvalues `F(ε^k) = Σ_m a_m ε^{mk}` of the circulant with first column `a`.
pub fn circulant_eigenvalues(a: &[C64]) -> Vec<C64> {
    let n = a.len();
    (0..n)
        .map(|k| {
            a.iter()
                .enumerate()
                .map(|(m, am)| am * C64::from_polar(1.0, 2.0 * PI * ((m * k) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Optimal efficiency of equiprobable states given as the columns of the
/// circulant matrix with first column `a` (`Σ|a_k|² = 1`): `min_k |F(ε^k)|²`.
pub fn circulant_state_pm(a: &[C64]) -> Result<f64, AnalyticError> {
    let norm: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(AnalyticError::Domain(format!(
            "circulant state columns have squared norm {norm}, expected 1"
        )));
    }
    Ok(circulant_eigenvalues(a)
        .iter()
        .map(|z| z.norm_sqr())
        .fold(f64::INFINITY, f64::min))
}

/// Symmetric-state shortcut: circulant Gram matrix.
pub fn circulant_solve(psi: &StateSet) -> AnalyticVerdict {
    circulant_solve_with(psi, &Tolerances::default())
}

pub fn circulant_solve_with(psi: &StateSet, tol: &Tolerances) -> AnalyticVerdict {
    let n = psi.n();
    let g = gram(psi);
    let Some(col) = g.circulant_column(tol.circulant) else {
        return AnalyticVerdict::not_applicable("Gram matrix is not circulant");
    };
    // Gram eigenvalues are N|c_k|² = λ_k².
    let spectrum: Vec<f64> = circulant_eigenvalues(&col).iter().map(|z| z.re).collect();
    let p_m = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    if !(p_m > 0.0) {
        return AnalyticVerdict::not_applicable(format!(
            "circulant Gram matrix is singular (min eigenvalue {p_m:e})"
        ));
    }
    let at_min = spectrum
        .iter()
        .filter(|v| tol.eigenvalues_equal(p_m, **v))
        .count();
    let parts: Vec<String> = spectrum.iter().map(|v| format!("{v:.12}")).collect();
    AnalyticVerdict::uniform(
        Theorem::Circulant,
        n,
        p_m.min(1.0),
        n - at_min,
        format!("circulant Gram matrix with eigenvalues ({})", parts.join(", ")),
    )
}

/// Second route for symmetric states: the Hermitian square root of a circulant
/// Gram matrix is itself a circulant state matrix, whose `min |F|²` is `P_M`.
pub fn circulant_root_pm(psi: &StateSet) -> Result<Option<f64>, AnalyticError> {
    let tol = Tolerances::default();
    let g = gram(psi);
    if g.circulant_column(tol.circulant).is_none() {
        return Ok(None);
    }
    let root = linalg::herm_sqrt(g.matrix())?;
    let first: Vec<C64> = (0..psi.n()).map(|k| root[(k, 0)]).collect();
    circulant_state_pm(&first).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn two_state(r: f64, alpha: f64) -> StateSet {
        let d = (1.0 - r * r).sqrt();
        StateSet::new(
            CMatrix::from_rows(&[
                vec![c(d, 0.0), C64::from_polar(r, -alpha)],
                vec![C64::from_polar(r, alpha), c(d, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn state_set_validation() {
        let bad = CMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert!(matches!(
            StateSet::new(bad),
            Err(AnalyticError::NotNormalized { column: 1, .. })
        ));
        let dependent = CMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let err = StateSet::new(dependent).unwrap_err();
        assert!(err.is_singular(), "{err:?}");
        let s = two_state(0.5, 0.0);
        assert!((&s.xi().adjoint() * s.psi()).identity_residual() < 1e-13);
    }

    #[test]
    fn gram_examples() {
        let g = gram(&StateSet::new(CMatrix::identity(3)).unwrap());
        assert!(g.matrix().identity_residual() < 1e-15);
        let r: f64 = 0.35;
        let g = gram(&two_state(r, 0.0));
        assert!((g.overlap(0, 1).re - 2.0 * r * (1.0 - r * r).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hermitize_examples() {
        let s = two_state(0.4, 0.0);
        let h = hermitize(&s).unwrap();
        assert!(h.max_abs_diff(s.psi()) < 1e-10);

        let s = two_state(0.4, 1.1);
        let h = hermitize(&s).unwrap();
        assert!(h.hermitian_defect() < 1e-12);
        let sv = linalg::svd(&h).unwrap().singulars;
        let d = (1.0 - 0.16f64).sqrt();
        assert!((sv[0] - (d + 0.4)).abs() < 1e-12);
        assert!((sv[1] - (d - 0.4)).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_states_are_perfectly_discriminable() {
        let v = symmetric_point_verdict(&StateSet::new(CMatrix::identity(4)).unwrap());
        assert!(v.applicable);
        assert!((v.p_m.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(v.ancilla_dim, Some(0));
    }

    #[test]
    fn two_state_verdict_is_theorem_four() {
        let r: f64 = 0.5;
        let v = symmetric_point_verdict(&two_state(r, 0.7));
        assert_eq!(v.theorem, Theorem::Th4TwoEigenvalue);
        let expected = 1.0 - 2.0 * r * (1.0 - r * r).sqrt();
        assert!((v.p_m.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn equal_overlap_examples() {
        assert!((equal_overlap_pm(2, 0.4).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(equal_overlap_pm(5, 0.0).unwrap(), 1.0);
        assert!((equal_overlap_pm(4, -0.2).unwrap() - 0.4).abs() < 1e-15);
        assert!(equal_overlap_pm(3, -0.5).is_err());
        assert!(equal_overlap_pm(3, 1.0).is_err());
    }

    #[test]
    fn two_state_examples() {
        let sol = two_state_solve(0.5, 0.0, 0.5).unwrap();
        assert_eq!(sol.regime, TwoStateRegime::Povm);
        assert!((sol.verdict.p_m.unwrap() - (1.0 - 0.75f64.sqrt())).abs() < 1e-12);

        let sol = two_state_solve(0.5, 0.0, 0.9).unwrap();
        assert_eq!(sol.regime, TwoStateRegime::VonNeumann);
        assert!((sol.verdict.p_m.unwrap() - 0.225).abs() < 1e-12);
        assert_eq!(sol.verdict.weights.unwrap().values()[1], 0.0);

        let sol = two_state_solve(1e-6, 0.0, 0.7).unwrap();
        assert!((sol.verdict.p_m.unwrap() - 1.0).abs() < 1e-5);

        assert!(two_state_solve(0.71, 0.0, 0.5).is_err());
        assert!(two_state_solve(0.3, 0.0, 0.4).is_err());
    }

    #[test]
    fn two_state_closed_form_matches_equal_prior_circle_formula() {
        for &r in &[0.1, 0.3, 0.5, 0.65] {
            let sol = two_state_solve(r, 0.0, 0.5).unwrap();
            let mu = two_state_mu_sq_uniform_sphere(r, PI / 4.0);
            assert!((sol.verdict.p_m.unwrap() - 1.0 / (2.0 * mu)).abs() < 1e-10);
            // The circle formula is the ellipsoid one scaled by the equal prior.
            for &t in &[0.2, 0.7, 1.3] {
                let a = two_state_mu_sq_uniform_sphere(r, t);
                let b = 0.5 * two_state_mu_sq(r, 0.5, t);
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_state_interior_optimum_matches_independent_formula() {
        // Below threshold the optimum is 1 - 2 sqrt(η₁η₂) |⟨ψ₁|ψ₂⟩|.
        let r: f64 = 0.3;
        let overlap = 2.0 * r * (1.0 - r * r).sqrt();
        let threshold = von_neumann_threshold(r);
        for &eta1 in &[0.5, 0.55, 0.6, threshold - 1e-3] {
            let sol = two_state_solve(r, 0.0, eta1).unwrap();
            let expected = 1.0 - 2.0 * (eta1 * (1.0 - eta1)).sqrt() * overlap;
            assert!((sol.verdict.p_m.unwrap() - expected).abs() < 1e-10, "{eta1}");
        }
    }

    #[test]
    fn circulant_examples() {
        let third = 1.0 / 3f64.sqrt();
        let cs = [c(third, 0.0), c(third, 0.0), c(third, 0.0)];
        let psi = symmetric_states(&cs);
        let v = circulant_solve(&psi);
        assert!(v.applicable);
        assert!((v.p_m.unwrap() - 1.0).abs() < 1e-12);

        let cs = [c(0.2f64.sqrt(), 0.0), c(0.8f64.sqrt(), 0.0)];
        let psi = symmetric_states(&cs);
        let v = circulant_solve(&psi);
        assert!((v.p_m.unwrap() - 0.4).abs() < 1e-12);
        assert!((circulant_root_pm(&psi).unwrap().unwrap() - 0.4).abs() < 1e-12);
    }

    fn symmetric_states(cs: &[C64]) -> StateSet {
        let n = cs.len();
        let m = CMatrix::from_fn(n, n, |j, k| {
            cs[j] * C64::from_polar(1.0, 2.0 * PI * (j * k) as f64 / n as f64)
        });
        StateSet::new(m).unwrap()
    }
}
