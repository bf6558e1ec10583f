//! Dense linear-algebra kernels shared by the operator, SAT, and assembly layers.
//!
//! Everything here works on `nalgebra` dense matrices. The operators in this
//! library are small (a few thousand rows at most), so dense factorizations
//! are the right tool; sparsity is not worth the bookkeeping at these sizes.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative singular-value cutoff used when no explicit tolerance is given.
pub const DEFAULT_PINV_RTOL: f64 = 1e-10;

/// Relative eigenvalue tolerance for positive-semidefiniteness decisions.
pub const DEFAULT_PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("system is numerically singular (pivot {pivot:.3e} below {threshold:.3e})")]
    SingularSystem { pivot: f64, threshold: f64 },
    #[error("SVD failed to converge")]
    SvdFailed,
}

fn check_finite(m: &DMatrix<f64>) -> Result<(), NumericsError> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFinite)
    }
}

/// Largest absolute entry, used as the scale for relative tolerances.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// Moore-Penrose pseudoinverse via SVD.
///
/// Singular values at or below `rel_tol * sigma_max` are truncated to zero,
/// so rank-deficient inputs (including the zero matrix) are handled exactly.
pub fn pseudoinverse(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>, NumericsError> {
    if !(rel_tol > 0.0) {
        return Err(NumericsError::InvalidTolerance(rel_tol));
    }
    check_finite(m)?;
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let vt = svd.v_t.as_ref().expect("svd computed with v_t");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let cut = rel_tol * smax;
    let sinv = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values.iter().map(|&s| if s > cut { 1.0 / s } else { 0.0 }),
    );
    // pinv = V * S^+ * U^T, assembled without forming the diagonal matrix
    let mut vs = vt.transpose();
    for (j, mut col) in vs.column_iter_mut().enumerate() {
        col *= sinv[j];
    }
    Ok(vs * u.transpose())
}

/// Eigenvalues of the symmetric part of `m`, sorted ascending.
///
/// The input is symmetrized as `(m + m^T)/2` first, so callers may pass
/// matrices that are symmetric only up to rounding.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<DVector<f64>, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    check_finite(m)?;
    if m.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(DVector::from_vec(ev))
}

/// Compensated accumulator: Neumaier summation with exact FMA-split
/// products. The running error term keeps the accumulated value accurate to
/// O(eps) of the *final* sum rather than of the largest intermediate, so
/// differences of nearly equal quantities survive later multiplication by
/// penalty weights that are many orders of magnitude larger.
#[derive(Debug, Clone, Copy)]
pub struct CompAcc {
    sum: f64,
    comp: f64,
}

impl CompAcc {
    #[inline]
    pub fn new(init: f64) -> CompAcc {
        CompAcc { sum: init, comp: 0.0 }
    }

    /// Add a single value, carrying the TwoSum rounding error.
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        let z = t - self.sum;
        self.comp += (self.sum - (t - z)) + (v - z);
        self.sum = t;
    }

    /// Add the product `a * b` exactly: the FMA recovers the rounding error
    /// of the product, the TwoSum the rounding error of the addition.
    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        self.add(p);
        self.comp += e;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Residual `b - a x` with each entry accumulated in compensated arithmetic,
/// accurate to O(eps) of the residual rather than of the large intermediate
/// terms. This is what lets iterative refinement push LU solutions of
/// ill-conditioned penalty systems down to the accuracy of the stored matrix.
fn residual_compensated(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    b: &DVector<f64>,
) -> DVector<f64> {
    let n = b.len();
    let mut acc: Vec<CompAcc> = b.iter().map(|&v| CompAcc::new(v)).collect();
    // column-major traversal keeps memory access contiguous
    for j in 0..n {
        let xj = x[j];
        let col = a.column(j);
        for i in 0..n {
            acc[i].add_product(-col[i], xj);
        }
    }
    DVector::from_fn(n, |i, _| acc[i].value())
}

/// LU factorization with partial pivoting plus the finiteness and pivot
/// checks of `solve_dense`, kept as a handle so iterative refinement can
/// reuse one factorization across sweeps.
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    min_pivot: f64,
    threshold: f64,
}

impl DenseLu {
    pub fn factor(a: &DMatrix<f64>) -> Result<DenseLu, NumericsError> {
        if !a.is_square() {
            return Err(NumericsError::NotSquare { rows: a.nrows(), cols: a.ncols() });
        }
        check_finite(a)?;
        let scale = max_abs(a);
        let lu = a.clone().lu();
        let threshold = 1e-14 * scale;
        let min_pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |acc, &d| acc.min(d.abs()));
        if !(min_pivot > threshold) {
            return Err(NumericsError::SingularSystem { pivot: min_pivot, threshold });
        }
        Ok(DenseLu { lu, min_pivot, threshold })
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>, NumericsError> {
        self.lu.solve(b).ok_or(NumericsError::SingularSystem {
            pivot: self.min_pivot,
            threshold: self.threshold,
        })
    }
}

/// Solve the dense square system `a x = b` by LU with partial pivoting,
/// followed by iterative refinement with compensated residuals. Refinement
/// costs O(n^2) per sweep and recovers near-machine-precision solutions even
/// when large interface penalties make the system ill-conditioned.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, NumericsError> {
    if a.nrows() != b.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "matrix is {}x{} but rhs has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let lu = DenseLu::factor(a)?;
    let mut x = lu.solve(b)?;
    for _ in 0..4 {
        let r = residual_compensated(a, &x, b);
        let dx = match lu.solve(&r) {
            Ok(dx) => dx,
            Err(_) => break,
        };
        let step = dx.amax();
        x += &dx;
        if step <= f64::EPSILON * x.amax() {
            break;
        }
    }
    Ok(x)
}

/// Outcome of the block positive-semidefiniteness test.
#[derive(Debug, Clone)]
pub struct PsdReport {
    /// smallest eigenvalue of Y22 (symmetrized)
    pub y22_min_eig: f64,
    pub y22_psd: bool,
    /// max abs entry of (I - Y22 Y22^+) Y12^T, which must vanish for Y >= 0
    pub range_residual: f64,
    pub range_ok: bool,
    /// smallest eigenvalue of the generalized Schur complement Y11 - Y12 Y22^+ Y12^T
    pub schur_min_eig: f64,
    pub schur_psd: bool,
    pub is_psd: bool,
}

/// Decide whether the symmetric block matrix `[[Y11, Y12], [Y12^T, Y22]]` is
/// positive semidefinite without forming it, using the generalized Schur
/// complement: Y >= 0 iff Y22 >= 0, (I - Y22 Y22^+) Y12^T = 0, and
/// Y11 - Y12 Y22^+ Y12^T >= 0.
///
/// All thresholds are `tol` relative to the largest block entry (with a floor
/// of 1), so the test is scale-invariant for non-degenerate inputs.
pub fn psd_schur_test(
    y11: &DMatrix<f64>,
    y12: &DMatrix<f64>,
    y22: &DMatrix<f64>,
    tol: f64,
) -> Result<PsdReport, NumericsError> {
    if !(tol > 0.0) {
        return Err(NumericsError::InvalidTolerance(tol));
    }
    if !y11.is_square() {
        return Err(NumericsError::NotSquare { rows: y11.nrows(), cols: y11.ncols() });
    }
    if !y22.is_square() {
        return Err(NumericsError::NotSquare { rows: y22.nrows(), cols: y22.ncols() });
    }
    if y12.nrows() != y11.nrows() || y12.ncols() != y22.nrows() {
        return Err(NumericsError::DimensionMismatch(format!(
            "Y12 is {}x{}, expected {}x{}",
            y12.nrows(),
            y12.ncols(),
            y11.nrows(),
            y22.nrows()
        )));
    }
    let scale = max_abs(y11).max(max_abs(y12)).max(max_abs(y22)).max(1.0);
    let thresh = tol * scale;

    let ev22 = symmetric_eigenvalues(y22)?;
    let y22_min_eig = if ev22.is_empty() { 0.0 } else { ev22[0] };
    let y22_psd = y22_min_eig >= -thresh;

    let y22_pinv = pseudoinverse(y22, DEFAULT_PINV_RTOL)?;
    let proj_defect = DMatrix::identity(y22.nrows(), y22.ncols()) - y22 * &y22_pinv;
    let range_residual = max_abs(&(proj_defect * y12.transpose()));
    let range_ok = range_residual <= thresh;

    let schur = y11 - y12 * &y22_pinv * y12.transpose();
    let evs = symmetric_eigenvalues(&schur)?;
    let schur_min_eig = if evs.is_empty() { 0.0 } else { evs[0] };
    let schur_psd = schur_min_eig >= -thresh;

    Ok(PsdReport {
        y22_min_eig,
        y22_psd,
        range_residual,
        range_ok,
        schur_min_eig,
        schur_psd,
        is_psd: y22_psd && range_ok && schur_psd,
    })
}
