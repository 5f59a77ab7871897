//! Parametric state families with known optima, plus random samplers for property tests.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{self, AnalyticError, StateSet};
use crate::geometry::{Priors, WeightDiag};
use crate::linalg::{self, CMatrix, C64};
use crate::optimizer::{self, OptimizerConfig};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

fn domain<T>(msg: impl Into<String>) -> Result<T, FamilyError> {
    Err(FamilyError::Domain(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    /// Columns `(√(1-r²), r e^{iα})` and `(r e^{-iα}, √(1-r²))`, priors `(η₁, 1-η₁)`.
    TwoState {
        r: f64,
        #[serde(default)]
        alpha: f64,
        #[serde(default = "half")]
        eta1: f64,
    },
    /// All pairwise overlaps equal to the real number `s`.
    EqualOverlap { n: usize, s: f64 },
    /// Real circulant N=3 set with `λ₁ = λ₂`.
    ThreeSym { lambda3: f64 },
    /// Complex circulant N=3 set with eigenvalues `λ_j`, `Σ λ_j² = 3`.
    ThreeSymComplex { lambda_sq: [f64; 3] },
    /// SU₂-rotated N=3 family; `λ₁²`, `λ₂²` follow from `λ₃²`.
    ThreeGeneral {
        k_xy: C64,
        k_za: C64,
        lambda3_sq: f64,
    },
    /// One-parameter subset `K_xy = 0`, `K_zα = e^{iπ/4}`.
    ThreeSub { lambda3_sq: f64 },
    /// N=4 family with `λ₄² < λ₂² < λ₃² < λ₁²` and `Σ λ² = 4`.
    FourParam {
        lambda_sq: [f64; 4],
        #[serde(default)]
        lower_sign: bool,
    },
    /// `ψ_k = Σ_j c_j ε^{jk} |j⟩`, `ε = e^{2πi/N}`.
    SymmetricN { c: Vec<C64> },
}

fn half() -> f64 {
    0.5
}

impl FamilySpec {
    pub fn n(&self) -> usize {
        match self {
            FamilySpec::TwoState { .. } => 2,
            FamilySpec::EqualOverlap { n, .. } => *n,
            FamilySpec::ThreeSym { .. }
            | FamilySpec::ThreeSymComplex { .. }
            | FamilySpec::ThreeGeneral { .. }
            | FamilySpec::ThreeSub { .. } => 3,
            FamilySpec::FourParam { .. } => 4,
            FamilySpec::SymmetricN { c } => c.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::TwoState { .. } => "two-state",
            FamilySpec::EqualOverlap { .. } => "equal-overlap",
            FamilySpec::ThreeSym { .. } => "three-sym",
            FamilySpec::ThreeSymComplex { .. } => "three-sym-complex",
            FamilySpec::ThreeGeneral { .. } => "three-general",
            FamilySpec::ThreeSub { .. } => "three-sub",
            FamilySpec::FourParam { .. } => "four-param",
            FamilySpec::SymmetricN { .. } => "symmetric-n",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub states: StateSet,
    pub priors: Priors,
    pub known_pm: Option<f64>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn gen(spec: &FamilySpec) -> Result<Generated, FamilyError> {
    let (psi, priors, known_pm) = match spec {
        FamilySpec::TwoState { r: rr, alpha, eta1 } => two_state(*rr, *alpha, *eta1)?,
        FamilySpec::EqualOverlap { n, s } => {
            let psi = equal_overlap_matrix(*n, *s)?;
            (psi, Priors::uniform(*n), Some(analytic::equal_overlap_pm(*n, *s)?))
        }
        FamilySpec::ThreeSym { lambda3 } => {
            let l3 = *lambda3;
            if !(l3 > 0.0 && l3 < 3f64.sqrt()) {
                return domain(format!("lambda3 = {l3} outside (0, sqrt(3))"));
            }
            let l1 = ((3.0 - l3 * l3) / 2.0).sqrt();
            let a0 = (2.0 * l1 + l3) / 3.0;
            let a1 = (l3 - l1) / 3.0;
            let psi = CMatrix::from_fn(3, 3, |i, j| r(if i == j { a0 } else { a1 }));
            let known = (l3 * l3).min((3.0 - l3 * l3) / 2.0);
            (psi, Priors::uniform(3), Some(known))
        }
        FamilySpec::ThreeSymComplex { lambda_sq } => {
            let psi = three_sym_complex_matrix(lambda_sq)?;
            let known = lambda_sq.iter().cloned().fold(f64::INFINITY, f64::min);
            (psi, Priors::uniform(3), Some(known))
        }
        FamilySpec::ThreeGeneral {
            k_xy,
            k_za,
            lambda3_sq,
        } => (three_general_matrix(*k_xy, *k_za, *lambda3_sq)?, Priors::uniform(3), None),
        FamilySpec::ThreeSub { lambda3_sq } => {
            check_three_sub(*lambda3_sq)?;
            let psi = three_general_matrix(r(0.0), C64::from_polar(1.0, FRAC_PI_4), *lambda3_sq)?;
            (psi, Priors::uniform(3), None)
        }
        FamilySpec::FourParam {
            lambda_sq,
            lower_sign,
        } => {
            let psi = four_param_matrix(lambda_sq, *lower_sign)?;
            (psi, Priors::uniform(4), Some(lambda_sq[3]))
        }
        FamilySpec::SymmetricN { c: coeffs } => {
            let psi = symmetric_matrix(coeffs)?;
            let n = coeffs.len();
            let min = coeffs.iter().map(|v| v.norm_sqr()).fold(f64::INFINITY, f64::min);
            (psi, Priors::uniform(n), Some(n as f64 * min))
        }
    };
    let states = StateSet::new(psi)?.with_tag(spec.name());
    Ok(Generated {
        states,
        priors,
        known_pm,
    })
}

type Built = (CMatrix, Priors, Option<f64>);

fn two_state(rr: f64, alpha: f64, eta1: f64) -> Result<Built, FamilyError> {
    if !(rr > 0.0 && rr < std::f64::consts::FRAC_1_SQRT_2) {
        return domain(format!("r = {rr} outside (0, 1/sqrt(2))"));
    }
    if !alpha.is_finite() {
        return domain("alpha must be finite");
    }
    if !(eta1 > 0.0 && eta1 < 1.0) {
        return domain(format!("eta1 = {eta1} outside (0, 1)"));
    }
    let d = (1.0 - rr * rr).sqrt();
    let e = C64::from_polar(rr, alpha);
    let psi = CMatrix::from_rows(&[vec![r(d), e.conj()], vec![e, r(d)]])
        .map_err(|e| FamilyError::Analytic(e.into()))?;
    let priors = Priors::new(vec![eta1, 1.0 - eta1]).map_err(|e| FamilyError::Domain(e.to_string()))?;
    let known = if (eta1 - 0.5).abs() < 1e-15 {
        1.0 - 2.0 * rr * d
    } else {
        // Relabel so that the larger prior comes first; the optimum is label-independent.
        analytic::two_state_solve(rr, alpha, eta1.max(1.0 - eta1))?
            .verdict
            .p_m
            .expect("closed form always yields a value")
    };
    Ok((psi, priors, Some(known)))
}

/// `ψ_jk = (λ_N - λ₁)/N` off the diagonal and `(λ_N + (N-1)λ₁)/N` on it.
pub fn equal_overlap_matrix(n: usize, s: f64) -> Result<CMatrix, FamilyError> {
    if n < 2 {
        return domain(format!("need at least two states, got {n}"));
    }
    let lo = -1.0 / (n as f64 - 1.0);
    if !(s > lo && s < 1.0) {
        return domain(format!("s = {s} outside ({lo}, 1)"));
    }
    let (l1, ln) = equal_overlap_eigenvalues(n, s);
    let nf = n as f64;
    let off = (ln - l1) / nf;
    let diag = (ln + (nf - 1.0) * l1) / nf;
    Ok(CMatrix::from_fn(n, n, |i, j| r(if i == j { diag } else { off })))
}

/// `(λ₁, λ_N)` with `λ₁² = 1 - s` and `λ_N² = 1 + (N-1)s`.
pub fn equal_overlap_eigenvalues(n: usize, s: f64) -> (f64, f64) {
    ((1.0 - s).sqrt(), (1.0 + (n as f64 - 1.0) * s).sqrt())
}

fn three_sym_complex_matrix(lambda_sq: &[f64; 3]) -> Result<CMatrix, FamilyError> {
    if lambda_sq.iter().any(|v| !(*v > 0.0)) {
        return domain("all lambda_j^2 must be positive");
    }
    let sum: f64 = lambda_sq.iter().sum();
    if (sum - 3.0).abs() > 1e-12 {
        return domain(format!("lambda_1^2 + lambda_2^2 + lambda_3^2 = {sum}, expected 3"));
    }
    let [l1, l2, l3] = lambda_sq.map(f64::sqrt);
    let a0 = r((l1 + l2 + l3) / 3.0);
    let a2 = (r(l3) - C64::from_polar(l2, FRAC_PI_3) - C64::from_polar(l1, -FRAC_PI_3)) / 3.0;
    let rows = [[a0, a2, a2.conj()], [a2.conj(), a0, a2], [a2, a2.conj(), a0]];
    Ok(CMatrix::from_fn(3, 3, |i, j| rows[i][j]))
}

/// The SU₂ rotation `M` in the gauge `u₁ = (-2,1,1)/√6`, `u₂ = (0,1,-1)/√2`.
pub fn su2_rotation(k_xy: C64, k_za: C64) -> CMatrix {
    let s2 = 2f64.sqrt();
    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();
    let i = c(0.0, 1.0);
    let rows = [
        [-k_za * (2.0 / 3.0f64).sqrt(), -i * k_xy.conj() * (2.0 / 3.0f64).sqrt(), r(1.0 / s3)],
        [k_za / s6 + i * k_xy / s2, i * k_xy.conj() / s6 + k_za.conj() / s2, r(1.0 / s3)],
        [k_za / s6 - i * k_xy / s2, i * k_xy.conj() / s6 - k_za.conj() / s2, r(1.0 / s3)],
    ];
    CMatrix::from_fn(3, 3, |a, b| rows[a][b])
}

/// `(λ₁², λ₂²)` forced by unit column norms once `λ₃²` and the rotation are fixed.
pub fn three_general_lambdas(k_xy: C64, k_za: C64, lambda3_sq: f64) -> Result<(f64, f64), FamilyError> {
    let m = su2_rotation(k_xy, k_za);
    let u = |a: usize, b: usize| m[(a, b)].norm_sqr();
    let den = u(0, 1) - u(1, 1);
    if den.abs() < 1e-12 {
        return domain("rotation leaves lambda_1^2 undetermined (|M_01|^2 = |M_11|^2)");
    }
    let l1s = (1.0 - 3.0 * u(1, 1) + lambda3_sq * (u(1, 1) - u(2, 1))) / den;
    Ok((l1s, 3.0 - l1s - lambda3_sq))
}

fn three_general_matrix(k_xy: C64, k_za: C64, lambda3_sq: f64) -> Result<CMatrix, FamilyError> {
    let norm = k_xy.norm_sqr() + k_za.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return domain(format!("|K_xy|^2 + |K_za|^2 = {norm}, expected 1"));
    }
    if !(lambda3_sq > 0.0 && lambda3_sq < 3.0) {
        return domain(format!("lambda3^2 = {lambda3_sq} outside (0, 3)"));
    }
    let (l1s, l2s) = three_general_lambdas(k_xy, k_za, lambda3_sq)?;
    if !(l1s > 0.0 && l2s > 0.0) {
        return domain(format!(
            "derived lambda_1^2 = {l1s}, lambda_2^2 = {l2s} must both be positive"
        ));
    }
    let m = su2_rotation(k_xy, k_za);
    let d = CMatrix::from_real_diagonal(&[l1s.sqrt(), l2s.sqrt(), lambda3_sq.sqrt()]);
    Ok(&(&m.adjoint() * &d) * &m)
}

fn check_three_sub(lambda3_sq: f64) -> Result<(), FamilyError> {
    if !(lambda3_sq > 0.0 && lambda3_sq < 2.0) {
        return domain(format!("lambda3^2 = {lambda3_sq} outside (0, 2)"));
    }
    Ok(())
}

/// Closed-form entries of the one-parameter subset, independent of the rotation route.
pub fn three_sub_matrix(lambda3_sq: f64) -> Result<CMatrix, FamilyError> {
    check_three_sub(lambda3_sq)?;
    let l3 = lambda3_sq.sqrt();
    let l2 = (2.0 - lambda3_sq).sqrt();
    let lp = l2 + l3 - 2.0;
    let lm = l2 - l3;
    let s3 = 3f64.sqrt();
    let rows = [
        [r(6.0 + lp), c(0.0, -s3 * lm), c(lp, -lp)],
        [c(0.0, s3 * lm), r(3.0 * (2.0 + lp)), c(s3 * lm, s3 * lm)],
        [c(lp, lp), c(s3 * lm, -s3 * lm), r(2.0 * (3.0 + lp))],
    ];
    Ok(CMatrix::from_fn(3, 3, |i, j| rows[i][j] / 6.0))
}

fn four_param_domain(lambda_sq: &[f64; 4]) -> Result<(), FamilyError> {
    let [l1, l2, l3, l4] = *lambda_sq;
    if !(l4 > 0.0 && l4 < l2 && l2 < l3 && l3 < l1) {
        return domain(format!(
            "ordering lambda_4^2 < lambda_2^2 < lambda_3^2 < lambda_1^2 violated by {lambda_sq:?}"
        ));
    }
    let sum: f64 = lambda_sq.iter().sum();
    if (sum - 4.0).abs() > 1e-12 {
        return domain(format!("sum of lambda_j^2 = {sum}, expected 4"));
    }
    Ok(())
}

/// `√((λ₃² - λ₂²)(λ₁² - λ₃²) / 2)`.
pub fn four_param_b1(lambda_sq: &[f64; 4]) -> f64 {
    ((lambda_sq[2] - lambda_sq[1]) * (lambda_sq[0] - lambda_sq[2]) / 2.0).sqrt()
}

fn four_param_matrix(lambda_sq: &[f64; 4], lower_sign: bool) -> Result<CMatrix, FamilyError> {
    four_param_domain(lambda_sq)?;
    let [l1, l2, l3, l4] = lambda_sq.map(f64::sqrt);
    let b1 = four_param_b1(lambda_sq);
    let sign = if lower_sign { -1.0 } else { 1.0 };
    let p11 = r(l1 + l4 + 2.0 * l3 + (l2 * l2 - l3 * l3) / (l1 + l2));
    let p22 = p11 + 2.0 * (l1 - l3) * (l2 - l3) / (l1 + l2);
    let p33 = p11;
    let p44 = p22;
    let p12 = r(2.0 * (l3 + l4)) - p11 + c(0.0, sign * 2.0 * b1 / (l1 + l2));
    let p13 = p11 - 4.0 * l3;
    let p14 = r(4.0 * (l3 + l4)) - p11 * 2.0 - p12;
    let p23 = p12.conj();
    let p24 = p11 - p22 + p13 + p14.conj() - p12.conj();
    let p34 = p14;
    let upper = [
        [p11, p12, p13, p14],
        [r(0.0), p22, p23, p24],
        [r(0.0), r(0.0), p33, p34],
        [r(0.0), r(0.0), r(0.0), p44],
    ];
    Ok(CMatrix::from_fn(4, 4, |i, j| {
        let v = if i <= j { upper[i][j] } else { upper[j][i].conj() };
        v / 4.0
    }))
}

/// Expected Gram pattern of the four-state family, built from `B₁`, `B₂`, `B₃`.
pub fn four_param_gram_pattern(lambda_sq: &[f64; 4]) -> CMatrix {
    let b1 = four_param_b1(lambda_sq);
    let b2 = c(2.0 - lambda_sq[0] - lambda_sq[1], -b1) / 2.0;
    let b3 = r(1.0 - lambda_sq[2]);
    let one = r(1.0);
    let rows = [
        [one, b2.conj(), b3, b2],
        [b2, one, b2, b3 + c(0.0, b1)],
        [b3, b2.conj(), one, b2],
        [b2.conj(), b3 - c(0.0, b1), b2.conj(), one],
    ];
    CMatrix::from_fn(4, 4, |i, j| rows[i][j])
}

fn symmetric_matrix(coeffs: &[C64]) -> Result<CMatrix, FamilyError> {
    let n = coeffs.len();
    if n < 2 {
        return domain(format!("need at least two coefficients, got {n}"));
    }
    if coeffs.iter().any(|v| v.norm_sqr() == 0.0 || !v.norm().is_finite()) {
        return domain("every coefficient c_k must be finite and nonzero");
    }
    let sum: f64 = coeffs.iter().map(|v| v.norm_sqr()).sum();
    if (sum - 1.0).abs() > 1e-12 {
        return domain(format!("sum of |c_k|^2 = {sum}, expected 1"));
    }
    Ok(CMatrix::from_fn(n, n, |j, k| {
        let phase = 2.0 * PI * ((j * k) % n) as f64 / n as f64;
        coeffs[j] * C64::from_polar(1.0, phase)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: String,
    pub n: usize,
    pub known_pm: Option<f64>,
    pub optimizer_pm: Option<f64>,
    pub analytic_pm: Option<f64>,
    pub checks: Vec<Check>,
}

impl FamilyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Cross-checks the generated set against the optimizer, the closed forms and the
/// family's own structural identities. Tolerances match the unit tests.
pub fn verify_family(spec: &FamilySpec) -> Result<FamilyReport, FamilyError> {
    let g = gen(spec)?;
    let psi = &g.states;
    let tol = Tolerances::default();
    let mut checks = Vec::new();

    let norm = psi
        .psi()
        .columns()
        .iter()
        .map(|col| (col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new("unit-norm", norm, 1e-12));
    let smin = linalg::min_singular_value(psi.psi()).unwrap_or(0.0);
    checks.push(Check {
        name: "nonsingular".into(),
        residual: smin,
        tolerance: tol.min_singular,
        passed: smin > tol.min_singular,
    });

    let cfg = OptimizerConfig::default();
    let opt = match optimizer::optimize(psi, &g.priors, &cfg) {
        Ok(o) => Some(o),
        Err(optimizer::OptimizerError::BudgetExceeded { best: Some(b), .. }) => Some(*b),
        Err(_) => None,
    };
    let optimizer_pm = opt.as_ref().map(|o| o.p_m);
    let numerical_cfg = OptimizerConfig {
        use_analytic: false,
        ..cfg.clone()
    };
    let numerical_pm = match optimizer::optimize_numerical(psi, &g.priors, &numerical_cfg) {
        Ok(o) => Some(o.p_m),
        Err(optimizer::OptimizerError::BudgetExceeded { best: Some(b), .. }) => Some(b.p_m),
        Err(_) => None,
    };
    let analytic_pm = if g.priors.is_uniform() {
        analytic::symmetric_point_verdict(psi).p_m
    } else {
        None
    };

    if let Some(known) = g.known_pm {
        let diff = |v: Option<f64>| v.map_or(f64::INFINITY, |p| (p - known).abs());
        checks.push(Check::new("known-vs-optimizer", diff(optimizer_pm), 1e-6));
        checks.push(Check::new("known-vs-numerical", diff(numerical_pm), 1e-6));
        if let Some(a) = analytic_pm {
            checks.push(Check::new("known-vs-analytic", (a - known).abs(), 1e-8));
        }
    } else if let (Some(a), Some(b)) = (optimizer_pm, numerical_pm) {
        checks.push(Check::new("optimizer-vs-numerical", (a - b).abs(), 1e-6));
    }
    if let Some(o) = &opt {
        let chefles = optimizer::chefles_residual(psi, &o.weights).map_or(f64::INFINITY, f64::abs);
        checks.push(Check::new("chefles", chefles, 1e-8));
    }

    match spec {
        FamilySpec::EqualOverlap { n, s } => {
            let (l1, ln) = equal_overlap_eigenvalues(*n, *s);
            let link = (ln * ln + (*n as f64 - 1.0) * l1 * l1 - *n as f64).abs();
            checks.push(Check::new("eigenvalue-link", link, 1e-12));
            let gm = analytic::gram(psi);
            let mut dev: f64 = 0.0;
            for i in 0..*n {
                for j in 0..*n {
                    if i != j {
                        dev = dev.max((gm.overlap(i, j) - r(*s)).norm());
                    }
                }
            }
            checks.push(Check::new("equal-overlaps", dev, 1e-12));
        }
        FamilySpec::ThreeSub { lambda3_sq } => {
            let explicit = three_sub_matrix(*lambda3_sq)?;
            checks.push(Check::new(
                "explicit-entries",
                explicit.max_abs_diff(psi.psi()),
                1e-12,
            ));
        }
        FamilySpec::FourParam { lambda_sq, lower_sign } => {
            let gm = analytic::gram(psi);
            if !lower_sign {
                let pattern = four_param_gram_pattern(lambda_sq);
                checks.push(Check::new("gram-pattern", pattern.max_abs_diff(gm.matrix()), 1e-10));
            }
            let circulant = gm.circulant_column(tol.circulant).is_some();
            checks.push(Check {
                name: "non-circulant".into(),
                residual: if circulant { 1.0 } else { 0.0 },
                tolerance: 0.0,
                passed: !circulant,
            });
        }
        FamilySpec::SymmetricN { .. } | FamilySpec::ThreeSym { .. } | FamilySpec::ThreeSymComplex { .. } => {
            let circulant = analytic::gram(psi).circulant_column(tol.circulant).is_some();
            checks.push(Check {
                name: "circulant".into(),
                residual: if circulant { 0.0 } else { 1.0 },
                tolerance: 0.0,
                passed: circulant,
            });
        }
        _ => {}
    }

    Ok(FamilyReport {
        family: spec.name().into(),
        n: psi.n(),
        known_pm: g.known_pm,
        optimizer_pm,
        analytic_pm,
        checks,
    })
}

// Random samplers.

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) / 2f64.sqrt()
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of `diag(R)` removed.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = gaussian_matrix(n, n, rng).into_nalgebra();
    let qr = g.qr();
    let q = qr.q();
    let rr = qr.r();
    let mut u = CMatrix::from_nalgebra(q).expect("finite Gaussian draw");
    for j in 0..n {
        let d = rr[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { r(1.0) };
        for i in 0..n {
            u[(i, j)] *= phase;
        }
    }
    u
}

fn normalize_columns(m: &CMatrix) -> CMatrix {
    let norms: Vec<f64> = (0..m.ncols()).map(|j| 1.0 / m.column_norm(j)).collect();
    m.scale_columns(&norms)
}

/// Random linearly independent set: Hermitian positive matrix with eigenvalues in
/// `[0.2, 1.8]`, then alternating column normalization and Hermitian projection.
/// The final set has unit columns and is generally not Hermitian.
pub fn random_state_set<R: Rng + ?Sized>(n: usize, rng: &mut R) -> StateSet {
    loop {
        let u = random_unitary(n, rng);
        let eig: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..=1.8)).collect();
        let mut p = &(&u * &CMatrix::from_real_diagonal(&eig)) * &u.adjoint();
        for _ in 0..20 {
            p = normalize_columns(&p);
            if p.hermitian_defect() < 1e-12 {
                break;
            }
            p = p.hermitian_part();
        }
        if let Ok(s) = StateSet::normalized(p) {
            return s;
        }
    }
}

/// Random coefficients with `Σ|c_k|² = 1` and `|c_k|² ≥ floor / n`.
pub fn random_symmetric_coefficients<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    let floor = 0.05;
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(floor..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter()
        .map(|v| C64::from_polar((v / total).sqrt(), rng.random_range(0.0..2.0 * PI)))
        .collect()
}

/// Feasible weights `X² = u Y² / λ_max(Ξ Y² Ξ†)` for random `Y > 0` and `u ∈ (0, 1]`.
/// A quarter of the draws sit on the boundary `u = 1`.
pub fn random_feasible_weights<R: Rng + ?Sized>(psi: &StateSet, rng: &mut R) -> WeightDiag {
    let n = psi.n();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let top = optimizer::top_eigenvalue_at(psi, &y).expect("finite weights");
    let u = if rng.random_bool(0.25) {
        1.0
    } else {
        rng.random_range(0.05..1.0)
    };
    let scale = (u / top).sqrt();
    WeightDiag::new(y.iter().map(|v| v * scale).collect()).expect("nonnegative weights")
}

/// A random completion pair: `Ξ Ξ† + Ξ̃ Ξ̃† = I` with `Ξ` invertible and `Ξ̃` of rank `n_a`.
pub fn random_completion<R: Rng + ?Sized>(n: usize, n_a: usize, rng: &mut R) -> (CMatrix, CMatrix) {
    assert!(n_a >= 1 && n_a <= n, "ancilla dimension out of range");
    let w = random_unitary(n, rng);
    let rot = random_unitary(n, rng);
    let v = random_unitary(n_a, rng);
    let s: Vec<f64> = (0..n)
        .map(|k| if k < n_a { rng.random_range(0.05..0.95) } else { 1.0 })
        .collect();
    let root: Vec<f64> = s.iter().map(|v| v.sqrt()).collect();
    let xi = &w.scale_columns(&root) * &rot;
    let gap: Vec<f64> = s[..n_a].iter().map(|v| (1.0 - v).sqrt()).collect();
    let xi_tilde = &w.leading_columns(n_a).scale_columns(&gap) * &v;
    (xi, xi_tilde)
}

/// States and weights whose reciprocal matrix `Ξ X` equals `xi`.
pub fn states_from_reciprocal(xi: &CMatrix) -> Result<(StateSet, WeightDiag), FamilyError> {
    let raw = linalg::inverse(&xi.adjoint()).map_err(|e| FamilyError::Analytic(e.into()))?;
    let weights: Vec<f64> = (0..raw.ncols()).map(|j| 1.0 / raw.column_norm(j)).collect();
    let states = StateSet::new(raw.scale_columns(&weights))?;
    Ok((
        states,
        WeightDiag::new(weights).map_err(|e| FamilyError::Domain(e.to_string()))?,
    ))
}
