//! Maximal mean efficiency as an eigenvalue minimization over the orthant.
//!
//! For a point `t` of the closed orthant, `μ²(t)` is the top eigenvalue of
//! `Ξ Y²(t) Ξ†` with `Y(t)` on the prior ellipsoid `Σ η_j y_j² = 1`. The
//! optimum is `P_M = 1 / min_t μ²(t)` with weights `X_M = sqrt(P_M) Y(t_M)`,
//! which sit exactly on the boundary of the feasible cone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{self, AnalyticError, StateSet, Theorem};
use crate::geometry::{self, AnglePoint, GeometryError, Priors, WeightDiag};
use crate::linalg::{self, CMatrix, LinalgError};
use crate::simplex::{self, SimplexOptions};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("budget exceeded: {reason}")]
    BudgetExceeded {
        reason: String,
        best: Option<Box<OptimizationResult>>,
    },
}

impl OptimizerError {
    pub fn is_singular(&self) -> bool {
        match self {
            OptimizerError::Linalg(LinalgError::Singular { .. }) => true,
            OptimizerError::Analytic(e) => e.is_singular(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    Numerical,
    GridOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub p_m: f64,
    pub t_m: AnglePoint,
    /// `X_M = sqrt(P_M) Y(t_M)`.
    pub weights: WeightDiag,
    /// `μ²(t_M) = 1 / P_M`.
    pub mu_sq: f64,
    pub method: Method,
    pub theorem: Option<Theorem>,
    pub iterations: usize,
    pub restarts_used: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Angles sitting on 0 or pi/2.
    pub pinned_angles: Vec<usize>,
    /// States whose weight vanishes at the optimum.
    pub zero_weights: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Points per angle of the seeding grid; `None` picks by dimension.
    pub grid_density: Option<usize>,
    pub restarts: usize,
    pub tol_t: f64,
    pub tol_f: f64,
    pub seed: u64,
    pub max_iter: usize,
    /// Try closed forms before searching.
    pub use_analytic: bool,
    pub tolerances: Tolerances,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            grid_density: None,
            restarts: 8,
            tol_t: 1e-10,
            tol_f: 1e-10,
            seed: 0,
            max_iter: 2000,
            use_analytic: true,
            tolerances: Tolerances::default(),
        }
    }
}

/// Angle pinning threshold reported in results.
const PIN_TOL: f64 = 1e-9;
/// Weights below this are reported as vanishing.
const ZERO_WEIGHT: f64 = 1e-7;
/// Relative mismatch allowed between a closed form and a direct evaluation at its point.
const ANALYTIC_CROSSCHECK: f64 = 1e-8;
/// Ceiling on grid points for the exhaustive oracle.
const ORACLE_MAX_POINTS: usize = 20_000_000;
const ORACLE_MAX_N: usize = 5;

/// Default grid density for `n` states.
pub fn default_density(n: usize) -> usize {
    match n {
        0..=4 => 24,
        5..=6 => 10,
        _ => 6,
    }
}

impl OptimizerConfig {
    pub fn density_for(&self, n: usize) -> usize {
        self.grid_density.unwrap_or_else(|| default_density(n))
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if matches!(self.grid_density, Some(d) if d < 2) {
            return Err(OptimizerError::Config("grid density must be at least 2".into()));
        }
        if self.restarts == 0 || self.max_iter == 0 {
            return Err(OptimizerError::Config(
                "restarts and max_iter must be positive".into(),
            ));
        }
        if !(self.tol_t > 0.0) || !(self.tol_f >= 1e-12) {
            return Err(OptimizerError::Config(
                "tol_t must be positive and tol_f at least 1e-12".into(),
            ));
        }
        Ok(())
    }
}

/// Top eigenvalue of `Ξ diag(y²) Ξ†`.
pub fn top_eigenvalue_at(psi: &StateSet, y: &[f64]) -> Result<f64, OptimizerError> {
    let xy = psi.xi().scale_columns(y);
    Ok(linalg::herm_max_eigenvalue(&(&xy * &xy.adjoint()))?)
}

/// `μ²(t)` for the prior ellipsoid.
pub fn mu_m_sq(psi: &StateSet, eta: &Priors, t: &AnglePoint) -> Result<f64, OptimizerError> {
    check_dims(psi, eta)?;
    let y = geometry::ellipsoid_point(t, eta)?;
    top_eigenvalue_at(psi, y.values())
}

/// Mean efficiency achievable along the ray through `t`, `1 / μ²(t)`.
pub fn efficiency_at(psi: &StateSet, eta: &Priors, t: &AnglePoint) -> Result<f64, OptimizerError> {
    Ok(1.0 / mu_m_sq(psi, eta, t)?)
}

/// Efficiency at the symmetric point.
pub fn symmetric_point_pm(psi: &StateSet, eta: &Priors) -> Result<f64, OptimizerError> {
    efficiency_at(psi, eta, &geometry::symmetric_point(psi.n()))
}

fn check_dims(psi: &StateSet, eta: &Priors) -> Result<(), OptimizerError> {
    if psi.n() != eta.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: psi.n(),
            got: eta.len(),
        }
        .into());
    }
    Ok(())
}

fn finish(
    eta: &Priors,
    t: AnglePoint,
    mu_sq: f64,
    method: Method,
) -> Result<OptimizationResult, OptimizerError> {
    let p_m = 1.0 / mu_sq;
    let y = geometry::ellipsoid_point(&t, eta)?;
    let weights = y.scaled(p_m.sqrt());
    let zero_weights = weights
        .values()
        .iter()
        .enumerate()
        .filter(|(_, x)| **x < ZERO_WEIGHT)
        .map(|(j, _)| j)
        .collect();
    Ok(OptimizationResult {
        p_m,
        pinned_angles: t.pinned(PIN_TOL),
        t_m: t,
        weights,
        mu_sq,
        method,
        theorem: None,
        iterations: 0,
        restarts_used: 0,
        evaluations: 0,
        converged: true,
        zero_weights,
    })
}

/// Overlap parameter `r` of the standard two-state form with `|⟨ψ₁|ψ₂⟩| = o`.
fn two_state_r(overlap: f64) -> f64 {
    ((1.0 - (1.0 - overlap * overlap).max(0.0).sqrt()) / 2.0).sqrt()
}

fn analytic_attempt(
    psi: &StateSet,
    eta: &Priors,
    cfg: &OptimizerConfig,
) -> Result<Option<OptimizationResult>, OptimizerError> {
    let n = psi.n();
    let tol = &cfg.tolerances;
    let (theorem, claimed, t) = if eta.is_uniform() {
        let mut verdict = analytic::circulant_solve_with(psi, tol);
        if !verdict.applicable {
            verdict = analytic::symmetric_point_verdict_with(psi, tol, cfg.seed);
        }
        if !verdict.applicable {
            return Ok(None);
        }
        (verdict.theorem, verdict.p_m, geometry::symmetric_point(n))
    } else if n == 2 {
        let g = analytic::gram(psi);
        let overlap = g.overlap(0, 1).norm();
        let r = two_state_r(overlap);
        if !(r > 0.0 && r < std::f64::consts::FRAC_1_SQRT_2) {
            return Ok(None);
        }
        let eta1 = eta.values()[0];
        let flipped = eta1 < 0.5;
        let sol = analytic::two_state_solve(r, 0.0, if flipped { 1.0 - eta1 } else { eta1 })?;
        let t = if flipped {
            std::f64::consts::FRAC_PI_2 - sol.t
        } else {
            sol.t
        };
        (Theorem::TwoState, sol.verdict.p_m, AnglePoint::clamped(&[t]))
    } else {
        return Ok(None);
    };
    // Re-evaluate at the claimed point; closed forms must agree with the definition.
    let mu_sq = mu_m_sq(psi, eta, &t)?;
    let claimed = claimed.unwrap_or(f64::NAN);
    if !((claimed * mu_sq - 1.0).abs() <= ANALYTIC_CROSSCHECK) {
        return Ok(None);
    }
    let mut res = finish(eta, t, mu_sq, Method::Analytic)?;
    res.theorem = Some(theorem);
    res.evaluations = 1;
    Ok(Some(res))
}

/// Ordering used for every reduction: value, then lexicographic angles.
fn better(a: &(f64, AnglePoint), b: &(f64, AnglePoint)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.lex_cmp(&b.1))
}

fn evaluate_grid(
    psi: &StateSet,
    eta: &Priors,
    grid: Vec<AnglePoint>,
) -> Result<Vec<(f64, AnglePoint)>, OptimizerError> {
    grid.into_par_iter()
        .map(|t| mu_m_sq(psi, eta, &t).map(|v| (v, t)))
        .collect()
}

/// Full pipeline: closed forms, then grid seeding and bounded simplex refinement.
pub fn optimize(
    psi: &StateSet,
    eta: &Priors,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult, OptimizerError> {
    cfg.validate()?;
    check_dims(psi, eta)?;
    if cfg.use_analytic {
        if let Some(res) = analytic_attempt(psi, eta, cfg)? {
            return Ok(res);
        }
    }
    optimize_numerical(psi, eta, cfg)
}

/// Grid seeding plus simplex refinement, without closed forms.
pub fn optimize_numerical(
    psi: &StateSet,
    eta: &Priors,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult, OptimizerError> {
    cfg.validate()?;
    check_dims(psi, eta)?;
    let n = psi.n();
    let dim = n - 1;
    let density = cfg.density_for(n);
    let grid = geometry::orthant_grid(n, density);
    let grid_evals = grid.len();
    let mut scored = evaluate_grid(psi, eta, grid)?;
    scored.sort_by(better);
    let seeds: Vec<AnglePoint> = scored
        .iter()
        .take(cfg.restarts)
        .map(|(_, t)| t.clone())
        .collect();
    let restarts_used = seeds.len();
    let step = std::f64::consts::FRAC_PI_2 / (density - 1) as f64;
    let opts = SimplexOptions {
        initial_step: 0.5 * step,
        tol_x: cfg.tol_t,
        tol_f: cfg.tol_f * 1e-4,
        max_iter: cfg.max_iter,
        rebuilds: 2,
        lower: vec![0.0; dim],
        upper: vec![std::f64::consts::FRAC_PI_2; dim],
    };
    let runs: Vec<(f64, AnglePoint, usize, usize, bool)> = seeds
        .par_iter()
        .map(|t0| {
            let res = simplex::minimize(
                |x| mu_m_sq(psi, eta, &AnglePoint::clamped(x)).unwrap_or(f64::INFINITY),
                t0.angles(),
                &opts,
            );
            (
                res.f,
                AnglePoint::clamped(&res.x),
                res.iterations,
                res.evaluations,
                res.converged,
            )
        })
        .collect();
    let iterations: usize = runs.iter().map(|r| r.2).sum();
    let evaluations: usize = grid_evals + runs.iter().map(|r| r.3).sum::<usize>();
    let best_run = runs
        .iter()
        .min_by(|a, b| better(&(a.0, a.1.clone()), &(b.0, b.1.clone())))
        .expect("at least one restart");
    let (best_value, best_t) = {
        let grid_best = &scored[0];
        if better(grid_best, &(best_run.0, best_run.1.clone())).is_lt() {
            grid_best.clone()
        } else {
            (best_run.0, best_run.1.clone())
        }
    };
    if !best_value.is_finite() {
        return Err(LinalgError::NonFinite.into());
    }
    let mut res = finish(eta, best_t, best_value, Method::Numerical)?;
    res.iterations = iterations;
    res.restarts_used = restarts_used;
    res.evaluations = evaluations;
    res.converged = best_run.4;
    if !res.converged {
        return Err(OptimizerError::BudgetExceeded {
            reason: format!("simplex refinement hit max_iter = {}", cfg.max_iter),
            best: Some(Box::new(res)),
        });
    }
    Ok(res)
}

/// Exhaustive evaluation on the closed grid with `density` points per angle
/// plus the symmetric point.
pub fn grid_oracle(
    psi: &StateSet,
    eta: &Priors,
    density: usize,
) -> Result<OptimizationResult, OptimizerError> {
    check_dims(psi, eta)?;
    let n = psi.n();
    if density < 2 {
        return Err(OptimizerError::Config("grid density must be at least 2".into()));
    }
    let points = (density as f64).powi(n as i32 - 1);
    if n > ORACLE_MAX_N || points > ORACLE_MAX_POINTS as f64 {
        return Err(OptimizerError::BudgetExceeded {
            reason: format!(
                "grid oracle limited to N <= {ORACLE_MAX_N} and {ORACLE_MAX_POINTS} points (N = {n}, {points} points)"
            ),
            best: None,
        });
    }
    let grid = geometry::orthant_grid(n, density);
    let count = grid.len();
    let scored = evaluate_grid(psi, eta, grid)?;
    let (value, t) = scored
        .into_iter()
        .min_by(better)
        .expect("non-empty grid");
    let mut res = finish(eta, t, value, Method::GridOracle)?;
    res.evaluations = count;
    Ok(res)
}

/// Samples of `1 / μ²(t)` on the grid, for plotting.
pub fn efficiency_samples(
    psi: &StateSet,
    eta: &Priors,
    density: usize,
) -> Result<Vec<(AnglePoint, f64)>, OptimizerError> {
    check_dims(psi, eta)?;
    let grid = geometry::orthant_grid(psi.n(), density);
    Ok(evaluate_grid(psi, eta, grid)?
        .into_iter()
        .map(|(v, t)| (t, 1.0 / v))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Smallest eigenvalue of `Ψ†Ψ - X²`.
    pub gram_form_min_eigenvalue: f64,
    /// Smallest eigenvalue of `I - Ξ_x Ξ_x†`.
    pub reciprocal_form_min_eigenvalue: f64,
}

/// Positivity of `Ψ†Ψ - X²` and of `I - Ξ X² Ξ†`, both at `tol.feasibility`.
pub fn feasibility_check(psi: &StateSet, x: &WeightDiag) -> Result<FeasibilityReport, OptimizerError> {
    feasibility_check_with(psi, x, &Tolerances::default())
}

pub fn feasibility_check_with(
    psi: &StateSet,
    x: &WeightDiag,
    tol: &Tolerances,
) -> Result<FeasibilityReport, OptimizerError> {
    if x.len() != psi.n() {
        return Err(GeometryError::DimensionMismatch {
            expected: psi.n(),
            got: x.len(),
        }
        .into());
    }
    let g = analytic::gram(psi);
    let dg = g.matrix() - &CMatrix::from_real_diagonal(&x.squares());
    let a = linalg::is_psd(&dg.hermitian_part(), tol.feasibility)?;
    let xx = psi.xi().scale_columns(x.values());
    let comp = &CMatrix::identity(psi.n()) - &(&xx * &xx.adjoint());
    let b = linalg::is_psd(&comp.hermitian_part(), tol.feasibility)?;
    Ok(FeasibilityReport {
        feasible: a.psd && b.psd,
        gram_form_min_eigenvalue: a.min_eigenvalue,
        reciprocal_form_min_eigenvalue: b.min_eigenvalue,
    })
}

/// `λ_max(Ξ X² Ξ†) - 1`; zero at an optimum.
pub fn chefles_residual(psi: &StateSet, x: &WeightDiag) -> Result<f64, OptimizerError> {
    Ok(top_eigenvalue_at(psi, x.values())? - 1.0)
}
