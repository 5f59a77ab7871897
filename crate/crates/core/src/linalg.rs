//! Dense complex linear algebra kernel.
//!
//! Thin layer over `nalgebra` that fixes the conventions used everywhere else in the
//! crate: Hermitian eigenvalues ascending, singular values descending, PSD square roots
//! with a small clamping window, and condition-checked inverses.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::tolerances::Tolerances;

pub type C64 = Complex64;

const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("iteration did not converge")]
    NoConvergence,
    #[error("matrix has non-finite entries")]
    NonFinite,
}

/// Dense complex matrix.
///
/// Rows are always at least one. A zero column count is permitted so that an
/// empty ancilla block (no complement needed) can be represented.
#[derive(Clone, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        CMatrix(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if nrows == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(LinalgError::DimensionMismatch {
                expected: "rectangular row data".into(),
                got: format!("{nrows} ragged rows"),
            });
        }
        Self::checked(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, Vec::len);
        if ncols == 0 || nrows == 0 || cols.iter().any(|c| c.len() != nrows) {
            return Err(LinalgError::DimensionMismatch {
                expected: "equal-length column vectors".into(),
                got: format!("{ncols} columns"),
            });
        }
        Self::checked(DMatrix::from_fn(nrows, ncols, |i, j| cols[j][i]))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        CMatrix(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_nalgebra(m: DMatrix<C64>) -> Result<Self, LinalgError> {
        Self::checked(m)
    }

    fn checked(m: DMatrix<C64>) -> Result<Self, LinalgError> {
        if m.nrows() == 0 {
            return Err(LinalgError::DimensionMismatch {
                expected: "at least one row".into(),
                got: "0 rows".into(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(CMatrix(m))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.0.nrows() == self.0.ncols()
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix(self.0.transpose())
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        CMatrix(self.0.map(|z| z * s))
    }

    pub fn scale_complex(&self, s: C64) -> CMatrix {
        CMatrix(self.0.map(|z| z * s))
    }

    /// `self * diag(d)`: scales column `j` by `d[j]`.
    pub fn scale_columns(&self, d: &[f64]) -> CMatrix {
        assert_eq!(d.len(), self.ncols());
        let mut out = self.0.clone();
        for (j, s) in d.iter().enumerate() {
            out.column_mut(j).scale_mut(*s);
        }
        CMatrix(out)
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.0.column(j).iter().copied().collect()
    }

    pub fn columns(&self) -> Vec<Vec<C64>> {
        (0..self.ncols()).map(|j| self.column(j)).collect()
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        self.0.column(j).norm()
    }

    /// Sub-matrix copy starting at `(r0, c0)` with the given shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMatrix {
        CMatrix(self.0.view((r0, c0), (rows, cols)).into_owned())
    }

    /// Copies `src` into `self` starting at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, src: &CMatrix) {
        self.0
            .view_mut((r0, c0), (src.nrows(), src.ncols()))
            .copy_from(&src.0);
    }

    /// Keeps the first `count` columns.
    pub fn leading_columns(&self, count: usize) -> CMatrix {
        self.block(0, 0, self.nrows(), count)
    }

    pub fn diagonal(&self) -> Vec<C64> {
        let k = self.nrows().min(self.ncols());
        (0..k).map(|i| self.0[(i, i)]).collect()
    }

    pub fn trace(&self) -> C64 {
        self.diagonal().into_iter().sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |self - other|` over entries.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in max_abs_diff");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |self - I|` over entries.
    pub fn identity_residual(&self) -> f64 {
        self.max_abs_diff(&CMatrix::identity(self.nrows()))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    /// `max |H - H^†|`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint())
    }

    /// Hermitian part `(H + H^†) / 2`.
    pub fn hermitian_part(&self) -> CMatrix {
        CMatrix((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Conjugate-linear inner product `<u|v>` of two columns.
    pub fn column_inner(&self, i: usize, j: usize) -> C64 {
        self.0.column(i).dotc(&self.0.column(j))
    }

    /// `U^† M U` for square `M`.
    pub fn conjugate_by(&self, u: &CMatrix) -> CMatrix {
        &(&u.adjoint() * self) * u
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.nrows(), self.ncols())?;
        for i in 0..self.nrows() {
            write!(f, "  ")?;
            for j in 0..self.ncols() {
                let z = self.0[(i, j)];
                write!(f, "{:>10.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermEig {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// `V diag(f(lambda)) V^†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        &self.vectors.scale_columns(&mapped) * &self.vectors.adjoint()
    }

    /// Size of the cluster of eigenvalues equal to `values[k]` under `tol`.
    pub fn multiplicity_of(&self, k: usize, tol: &Tolerances) -> usize {
        let v = self.values[k];
        self.values
            .iter()
            .filter(|&&w| tol.eigenvalues_equal(v, w))
            .count()
    }

    /// Groups eigenvalues into clusters of numerically equal values, ascending.
    pub fn clusters(&self, tol: &Tolerances) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &v in &self.values {
            match out.last_mut() {
                Some((rep, count)) if tol.eigenvalues_equal(*rep, v) => *count += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }
}

/// Singular value decomposition `M = left * diag(singulars) * right`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: CMatrix,
    pub singulars: Vec<f64>,
    pub right: CMatrix,
}

impl SvdResult {
    pub fn condition(&self) -> f64 {
        let smax = self.singulars[0];
        let smin = *self.singulars.last().expect("non-empty spectrum");
        if smin == 0.0 {
            f64::INFINITY
        } else {
            smax / smin
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub psd: bool,
    pub min_eigenvalue: f64,
}

fn require_square(m: &CMatrix) -> Result<usize, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn require_hermitian(h: &CMatrix, tol: &Tolerances) -> Result<(), LinalgError> {
    require_square(h)?;
    let defect = h.hermitian_defect();
    if defect > tol.hermitian * h.max_abs().max(1.0) {
        return Err(LinalgError::NotHermitian { asymmetry: defect });
    }
    Ok(())
}

pub fn herm_eig(h: &CMatrix) -> Result<HermEig, LinalgError> {
    herm_eig_with(h, &Tolerances::default())
}

pub fn herm_eig_with(h: &CMatrix, tol: &Tolerances) -> Result<HermEig, LinalgError> {
    require_hermitian(h, tol)?;
    let sym = h.hermitian_part().0;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, MAX_SWEEPS)
        .ok_or(LinalgError::NoConvergence)?;
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix(DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]));
    Ok(HermEig { values, vectors })
}

/// Eigenvalues only, ascending. Cheaper than [`herm_eig`] inside hot loops.
pub fn herm_eigenvalues(h: &CMatrix) -> Result<Vec<f64>, LinalgError> {
    let tol = Tolerances::default();
    require_hermitian(h, &tol)?;
    let mut vals: Vec<f64> = h.hermitian_part().0.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn herm_max_eigenvalue(h: &CMatrix) -> Result<f64, LinalgError> {
    herm_eigenvalues(h).map(|v| *v.last().expect("non-empty spectrum"))
}

pub fn svd(m: &CMatrix) -> Result<SvdResult, LinalgError> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Err(LinalgError::DimensionMismatch {
            expected: "non-empty matrix".into(),
            got: format!("{rows}x{cols}"),
        });
    }
    let dec = m
        .0
        .clone()
        .try_svd(true, true, f64::EPSILON, MAX_SWEEPS)
        .ok_or(LinalgError::NoConvergence)?;
    let u = dec.u.ok_or(LinalgError::NoConvergence)?;
    let vt = dec.v_t.ok_or(LinalgError::NoConvergence)?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let singulars = order.iter().map(|&i| dec.singular_values[i].max(0.0)).collect();
    let left = CMatrix(DMatrix::from_fn(rows, k, |i, j| u[(i, order[j])]));
    let right = CMatrix(DMatrix::from_fn(k, cols, |i, j| vt[(order[i], j)]));
    Ok(SvdResult {
        left,
        singulars,
        right,
    })
}

/// Smallest singular value.
pub fn min_singular_value(m: &CMatrix) -> Result<f64, LinalgError> {
    svd(m).map(|s| *s.singulars.last().expect("non-empty spectrum"))
}

/// Hermitian PSD square root. Eigenvalues in `[-psd_clamp, 0)` are clamped to zero.
pub fn herm_sqrt(h: &CMatrix) -> Result<CMatrix, LinalgError> {
    herm_sqrt_with(h, &Tolerances::default())
}

pub fn herm_sqrt_with(h: &CMatrix, tol: &Tolerances) -> Result<CMatrix, LinalgError> {
    let eig = herm_eig_with(h, tol)?;
    if eig.min() < -tol.psd_clamp {
        return Err(LinalgError::NotPsd {
            min_eigenvalue: eig.min(),
        });
    }
    Ok(eig.apply(|l| l.max(0.0).sqrt()))
}

/// `H^{-1/2}` for Hermitian PD `H`, with eigenvalues floored at `floor`.
pub fn herm_inv_sqrt(h: &CMatrix, floor: f64) -> Result<CMatrix, LinalgError> {
    let eig = herm_eig(h)?;
    if eig.min() < -Tolerances::default().psd_clamp {
        return Err(LinalgError::NotPsd {
            min_eigenvalue: eig.min(),
        });
    }
    Ok(eig.apply(|l| 1.0 / l.max(floor).sqrt()))
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix, LinalgError> {
    inverse_with(m, &Tolerances::default())
}

pub fn inverse_with(m: &CMatrix, tol: &Tolerances) -> Result<CMatrix, LinalgError> {
    let n = require_square(m)?;
    let condition = svd(m)?.condition();
    if !condition.is_finite() || condition >= tol.max_condition {
        return Err(LinalgError::Singular { condition });
    }
    let inv = m
        .0
        .clone()
        .try_inverse()
        .ok_or(LinalgError::Singular { condition })?;
    let inv = CMatrix(inv);
    let residual = (m * &inv).max_abs_diff(&CMatrix::identity(n));
    if residual > tol.inverse_residual {
        return Err(LinalgError::Singular { condition });
    }
    Ok(inv)
}

pub fn is_psd(h: &CMatrix, tol: f64) -> Result<PsdReport, LinalgError> {
    let min_eigenvalue = herm_eigenvalues(h)?[0];
    Ok(PsdReport {
        psd: min_eigenvalue >= -tol,
        min_eigenvalue,
    })
}

/// Number of eigenvalues of a Hermitian PSD matrix at or above `threshold`.
pub fn numerical_rank(h: &CMatrix, threshold: f64) -> Result<usize, LinalgError> {
    Ok(herm_eigenvalues(h)?
        .into_iter()
        .filter(|&l| l >= threshold)
        .count())
}

/// `max |U^† U - I|` for a matrix with orthonormal columns.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    (&u.adjoint() * u).identity_residual()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn n2_matrix(r: f64) -> CMatrix {
        let d = (1.0 - r * r).sqrt();
        CMatrix::from_rows(&[vec![c(d, 0.0), c(r, 0.0)], vec![c(r, 0.0), c(d, 0.0)]]).unwrap()
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = herm_eig(&CMatrix::identity(3)).unwrap();
        assert_eq!(e.values.len(), 3);
        for v in &e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let e = herm_eig(&CMatrix::from_real_diagonal(&[2.0, -1.0])).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eig_of_two_state_square() {
        let r: f64 = 0.5;
        let psi = n2_matrix(r);
        let sq = &psi * &psi;
        let e = herm_eig(&sq).unwrap();
        let d = 0.75f64.sqrt();
        assert!((e.values[0] - (d - r).powi(2)).abs() < 1e-13);
        assert!((e.values[1] - (d + r).powi(2)).abs() < 1e-13);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]])
            .unwrap();
        assert!(matches!(herm_eig(&m), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn svd_examples() {
        let s = svd(&CMatrix::identity(4)).unwrap();
        assert!(s.singulars.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let m = CMatrix::from_rows(&[vec![c(3.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 4.0)]])
            .unwrap();
        let s = svd(&m).unwrap();
        assert!((s.singulars[0] - 4.0).abs() < 1e-14);
        assert!((s.singulars[1] - 3.0).abs() < 1e-14);
        let r: f64 = 0.3;
        let s = svd(&n2_matrix(r)).unwrap();
        assert!((s.singulars[0] - (0.91f64.sqrt() + r)).abs() < 1e-13);
        assert!((s.singulars[1] - (0.91f64.sqrt() - r)).abs() < 1e-13);
    }

    #[test]
    fn sqrt_examples() {
        assert!(herm_sqrt(&CMatrix::identity(3)).unwrap().identity_residual() < 1e-14);
        let r = herm_sqrt(&CMatrix::from_real_diagonal(&[4.0, 9.0])).unwrap();
        assert!(r.max_abs_diff(&CMatrix::from_real_diagonal(&[2.0, 3.0])) < 1e-14);
        let clamped = herm_sqrt(&CMatrix::from_real_diagonal(&[1.0, -5e-11])).unwrap();
        assert!(clamped.max_abs_diff(&CMatrix::from_real_diagonal(&[1.0, 0.0])) < 1e-14);
        assert!(matches!(
            herm_sqrt(&CMatrix::from_real_diagonal(&[1.0, -1e-6])),
            Err(LinalgError::NotPsd { .. })
        ));
    }

    #[test]
    fn inverse_examples() {
        assert!(inverse(&CMatrix::identity(3)).unwrap().identity_residual() < 1e-15);
        let m = CMatrix::from_rows(&[vec![c(2.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]])
            .unwrap();
        let inv = inverse(&m).unwrap();
        let expected =
            CMatrix::from_rows(&[vec![c(0.5, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, -1.0)]])
                .unwrap();
        assert!(inv.max_abs_diff(&expected) < 1e-15);

        // reciprocal states are biorthogonal to the originals
        let psi = n2_matrix(0.5);
        let xi = inverse(&psi.adjoint()).unwrap();
        assert!((&xi.adjoint() * &psi).identity_residual() < 1e-14);

        let singular =
            CMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]])
                .unwrap();
        assert!(matches!(inverse(&singular), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn psd_examples() {
        let rep = is_psd(&CMatrix::identity(2), 1e-10).unwrap();
        assert!(rep.psd);
        let rep = is_psd(&CMatrix::from_real_diagonal(&[1.0, -0.5]), 1e-10).unwrap();
        assert!(!rep.psd);
        assert!((rep.min_eigenvalue + 0.5).abs() < 1e-14);
    }

    #[test]
    fn clusters_group_degenerate_values() {
        let e = herm_eig(&CMatrix::from_real_diagonal(&[1.0, 2.0, 1.0 + 1e-12, 2.0])).unwrap();
        let tol = Tolerances::default();
        assert_eq!(e.clusters(&tol), vec![(1.0, 2), (2.0, 2)]);
        assert_eq!(e.multiplicity_of(0, &tol), 2);
    }

    #[test]
    fn from_rows_rejects_non_finite() {
        assert!(matches!(
            CMatrix::from_rows(&[vec![c(f64::NAN, 0.0)]]),
            Err(LinalgError::NonFinite)
        ));
    }
}
