//! Angular chart on the positive orthant of the unit sphere and of the prior ellipsoid.
//!
//! Coordinates follow one fixed ordering throughout the crate: the first angle
//! controls the last coordinate,
//!
//! ```text
//! y_N     = cos t_1
//! y_{N-1} = sin t_1 cos t_2
//! ...
//! y_2     = sin t_1 ... sin t_{N-2} cos t_{N-1}
//! y_1     = sin t_1 ... sin t_{N-1}
//! ```
//!
//! and the ellipsoid version divides coordinate `j` by `sqrt(eta_j)`.
//! The orthant is closed: every angle lies in `[0, pi/2]`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("angle {index} = {value} lies outside [0, pi/2]")]
    AngleOutOfRange { index: usize, value: f64 },
    #[error("invalid priors: {0}")]
    InvalidPriors(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("need at least two states, got {0}")]
    TooFewStates(usize),
}

/// Angles snapped into range when they overshoot by less than this.
const ANGLE_SLACK: f64 = 1e-12;
const PRIOR_SUM_TOL: f64 = 1e-12;

/// Point of the closed orthant, `N - 1` angles in radians.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AnglePoint(Vec<f64>);

impl AnglePoint {
    pub fn new(angles: Vec<f64>) -> Result<Self, GeometryError> {
        let mut angles = angles;
        for (index, a) in angles.iter_mut().enumerate() {
            if !a.is_finite() || *a < -ANGLE_SLACK || *a > FRAC_PI_2 + ANGLE_SLACK {
                return Err(GeometryError::AngleOutOfRange { index, value: *a });
            }
            *a = a.clamp(0.0, FRAC_PI_2);
        }
        Ok(AnglePoint(angles))
    }

    /// Clamps each angle into `[0, pi/2]`.
    pub fn clamped(angles: &[f64]) -> Self {
        AnglePoint(angles.iter().map(|a| a.clamp(0.0, FRAC_PI_2)).collect())
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }

    /// Number of states this point parameterizes.
    pub fn dimension(&self) -> usize {
        self.0.len() + 1
    }

    /// Indices of angles pinned to 0 or pi/2 within `tol`.
    pub fn pinned(&self, tol: f64) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, a)| **a <= tol || **a >= FRAC_PI_2 - tol)
            .map(|(i, _)| i)
            .collect()
    }

    /// Lexicographic comparison, used for deterministic tie-breaking.
    pub fn lex_cmp(&self, other: &AnglePoint) -> std::cmp::Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

/// Prior probabilities of the states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors(Vec<f64>);

impl Priors {
    pub fn new(eta: Vec<f64>) -> Result<Self, GeometryError> {
        if eta.len() < 2 {
            return Err(GeometryError::TooFewStates(eta.len()));
        }
        if let Some((j, v)) = eta
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v <= 0.0)
        {
            return Err(GeometryError::InvalidPriors(format!(
                "eta[{j}] = {v} is not strictly positive"
            )));
        }
        let sum: f64 = eta.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(GeometryError::InvalidPriors(format!(
                "priors sum to {sum}, expected 1"
            )));
        }
        Ok(Priors(eta))
    }

    pub fn uniform(n: usize) -> Self {
        Priors(vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.0.len() as f64;
        self.0.iter().all(|v| (v - u).abs() <= PRIOR_SUM_TOL)
    }
}

/// Diagonal of the weight matrix `X`; `x_j^2` is the success probability of state `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDiag(Vec<f64>);

impl WeightDiag {
    pub fn new(weights: Vec<f64>) -> Result<Self, GeometryError> {
        if let Some((j, v)) = weights
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(GeometryError::InvalidWeights(format!(
                "x[{j}] = {v} is negative or non-finite"
            )));
        }
        Ok(WeightDiag(weights))
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        WeightDiag(vec![value.max(0.0); n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> WeightDiag {
        WeightDiag(self.0.iter().map(|x| x * factor.abs()).collect())
    }

    pub fn squares(&self) -> Vec<f64> {
        self.0.iter().map(|x| x * x).collect()
    }

    /// Mean efficiency `sum_j eta_j x_j^2`.
    pub fn mean_efficiency(&self, eta: &Priors) -> f64 {
        self.0
            .iter()
            .zip(eta.values())
            .map(|(x, e)| e * x * x)
            .sum()
    }
}

/// Unit-sphere coordinates for the given angles.
fn sphere_coordinates(t: &[f64], n: usize) -> Vec<f64> {
    let mut y = vec![0.0; n];
    let mut sines = 1.0;
    for (i, &a) in t.iter().enumerate() {
        y[n - 1 - i] = sines * a.cos();
        sines *= a.sin();
    }
    y[0] = sines;
    y
}

fn check_angles(t: &AnglePoint, n: usize) -> Result<(), GeometryError> {
    if n < 2 {
        return Err(GeometryError::TooFewStates(n));
    }
    if t.angles().len() != n - 1 {
        return Err(GeometryError::DimensionMismatch {
            expected: n - 1,
            got: t.angles().len(),
        });
    }
    Ok(())
}

/// Point on the positive part of the ellipsoid `sum_j eta_j y_j^2 = 1`.
pub fn ellipsoid_point(t: &AnglePoint, eta: &Priors) -> Result<WeightDiag, GeometryError> {
    let n = eta.len();
    check_angles(t, n)?;
    let y = sphere_coordinates(t.angles(), n)
        .into_iter()
        .zip(eta.values())
        .map(|(s, e)| (s / e.sqrt()).max(0.0))
        .collect();
    Ok(WeightDiag(y))
}

/// Point on the positive part of the unit sphere.
pub fn uniform_sphere_point(t: &AnglePoint, n: usize) -> Result<WeightDiag, GeometryError> {
    check_angles(t, n)?;
    Ok(WeightDiag(
        sphere_coordinates(t.angles(), n)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect(),
    ))
}

/// The point where all sphere coordinates equal `N^{-1/2}`.
pub fn symmetric_point(n: usize) -> AnglePoint {
    assert!(n >= 2, "symmetric point needs N >= 2");
    // y_N = cos t_1 = N^{-1/2}; then each remaining factor peels one coordinate off.
    AnglePoint(
        (0..n - 1)
            .map(|i| (1.0 / ((n - i) as f64).sqrt()).acos())
            .collect(),
    )
}

/// Angles of a sphere point with nonnegative coordinates (inverse chart).
pub fn angles_of(y: &[f64]) -> Result<AnglePoint, GeometryError> {
    let n = y.len();
    if n < 2 {
        return Err(GeometryError::TooFewStates(n));
    }
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || y.iter().any(|v| *v < 0.0) {
        return Err(GeometryError::InvalidWeights(
            "need a nonzero point with nonnegative coordinates".into(),
        ));
    }
    let mut t = Vec::with_capacity(n - 1);
    let mut rest = 1.0;
    for i in 0..n - 1 {
        let c = y[n - 1 - i] / norm;
        let a = if rest <= 0.0 {
            0.0
        } else {
            (c / rest).clamp(-1.0, 1.0).acos()
        };
        t.push(a);
        rest *= a.sin();
    }
    Ok(AnglePoint::clamped(&t))
}

/// Closed lattice of `density` points per angle (endpoints included) plus the
/// symmetric point, in lexicographic order of the lattice indices.
pub fn orthant_grid(n: usize, density: usize) -> Vec<AnglePoint> {
    assert!(n >= 2 && density >= 2, "grid needs N >= 2 and density >= 2");
    let dim = n - 1;
    let step = FRAC_PI_2 / (density - 1) as f64;
    let total = density.pow(dim as u32);
    let mut out = Vec::with_capacity(total + 1);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        out.push(AnglePoint(idx.iter().map(|&k| k as f64 * step).collect()));
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < density {
                break;
            }
            *slot = 0;
        }
    }
    out.push(symmetric_point(n));
    out
}
