//! Construction of generalized summation-by-parts operators.
//!
//! A first-derivative operator is the tuple (nodes, H, Q, E, Rl, Rr) with
//! D = H^-1 Q, Q + Q^T = E, and E = Rr^T Rr - Rl^T Rl. A second-derivative
//! operator adds D2 = H^-1 (-M + E L Db) together with the boundary-derivative
//! matrix Db, the diffusivity values L = diag(lambda), and the borrowing
//! matrix V = Db^-T (M + M^T) Db^-1 used by the penalty-size bounds.

mod collocation;
mod csbp;
mod io;
mod tables;
mod verify;

pub use collocation::{build_lg_op, build_lgl_op};
pub use csbp::{build_csbp_d1, build_csbp_narrow_d2, csbp_min_nodes};
pub use io::{load_operator, save_operator};
pub use verify::{
    verify_first_deriv, verify_first_deriv_slack, verify_second_deriv, verify_second_deriv_slack,
    CheckResult, VerificationReport,
};

use crate::numerics::{self, NumericsError};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("degree {degree} is not supported for {family} operators")]
    UnsupportedDegree { family: String, degree: usize },
    #[error("{family} operator of degree {degree} needs at least {min} nodes, got {n}")]
    TooFewNodes { family: String, degree: usize, min: usize, n: usize },
    #[error("diffusivity values must be strictly positive (found {0})")]
    NonPositiveLambda(f64),
    #[error("lambda has {got} entries but the operator has {want} nodes")]
    LambdaSize { got: usize, want: usize },
    #[error("element interval is empty or reversed: [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error("boundary-derivative rows require nodes at both interval ends")]
    BoundaryNodesRequired,
    #[error("boundary-derivative matrix is not invertible (sigma_min/sigma_max = {0:.3e})")]
    SingularDb(f64),
    #[error("operator file: {0}")]
    Parse(String),
    #[error("cannot serialize operator: {0}")]
    Serialize(String),
    #[error("loaded operator failed verification:\n{0}")]
    VerificationFailed(VerificationReport),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Which second-derivative construction an operator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilKind {
    /// D2 = D L D, the first-derivative operator applied twice
    Wide,
    /// minimal-bandwidth D2 with its own boundary closure
    Narrow,
}

impl std::fmt::Display for StencilKind {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str(match self {
            StencilKind::Wide => "wide",
            StencilKind::Narrow => "narrow",
        })
    }
}

/// Node family an operator was built from (`External` for loaded files).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorFamily {
    Csbp,
    Lgl,
    Lg,
    External,
}

impl std::fmt::Display for OperatorFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str(match self {
            OperatorFamily::Csbp => "csbp",
            OperatorFamily::Lgl => "lgl",
            OperatorFamily::Lg => "lg",
            OperatorFamily::External => "external",
        })
    }
}

/// Strictly ascending node coordinates on the reference interval [0, 1].
#[derive(Debug, Clone)]
pub struct NodeSet {
    pub coords: DVector<f64>,
    pub includes_left_boundary: bool,
    pub includes_right_boundary: bool,
}

impl NodeSet {
    /// Boundary-inclusion flags are inferred from the end coordinates.
    pub fn on_reference(coords: DVector<f64>) -> Result<Self, OperatorError> {
        if coords.is_empty() {
            return Err(OperatorError::Parse("empty node set".into()));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(OperatorError::Parse("non-finite node coordinate".into()));
        }
        for i in 1..coords.len() {
            if coords[i] <= coords[i - 1] {
                return Err(OperatorError::Parse(format!(
                    "nodes must be strictly ascending (node {} = {}, node {} = {})",
                    i - 1,
                    coords[i - 1],
                    i,
                    coords[i]
                )));
            }
        }
        let n = coords.len();
        if coords[0] < -1e-14 || coords[n - 1] > 1.0 + 1e-14 {
            return Err(OperatorError::Parse(format!(
                "nodes must lie in [0, 1] (got [{}, {}])",
                coords[0],
                coords[n - 1]
            )));
        }
        let includes_left_boundary = coords[0].abs() <= 1e-14;
        let includes_right_boundary = (coords[n - 1] - 1.0).abs() <= 1e-14;
        Ok(NodeSet { coords, includes_left_boundary, includes_right_boundary })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// First-derivative SBP operator on a fixed node set.
#[derive(Debug, Clone)]
pub struct FirstDerivOp {
    pub family: OperatorFamily,
    /// polynomial degree p up to which D differentiates exactly
    pub degree: usize,
    pub nodes: NodeSet,
    /// SPD norm/quadrature matrix
    pub h: DMatrix<f64>,
    /// Q = H D, with Q + Q^T = E
    pub q: DMatrix<f64>,
    /// boundary operator E = Rr^T Rr - Rl^T Rl
    pub e: DMatrix<f64>,
    /// extrapolation row to the left interval end (1 x n)
    pub rl: DMatrix<f64>,
    /// extrapolation row to the right interval end (1 x n)
    pub rr: DMatrix<f64>,
    /// D = H^-1 Q
    pub d: DMatrix<f64>,
}

impl FirstDerivOp {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }
}

/// Second-derivative SBP operator wrapping a compatible first-derivative one.
#[derive(Debug, Clone)]
pub struct SecondDerivOp {
    pub first: FirstDerivOp,
    pub stencil: StencilKind,
    /// diffusivity values at the nodes
    pub lambda: DVector<f64>,
    /// D2 approximating d/dx (lambda d/dx)
    pub d2: DMatrix<f64>,
    /// boundary-derivative matrix: rows 0 and n-1 approximate d/dx to degree
    /// >= p+1 and the rest keep Db invertible (narrow), or Db = D (wide)
    pub db: DMatrix<f64>,
    /// M = -H D2 + E L Db, the dissipation part of the decomposition
    pub m: DMatrix<f64>,
    /// borrowing matrix: Db^-T (M + M^T) Db^-1 (narrow), H L + L H (wide)
    pub v: DMatrix<f64>,
    /// pseudoinverse of `v` (true inverse in the wide diagonal-norm case)
    pub v_pinv: DMatrix<f64>,
}

impl SecondDerivOp {
    pub fn n(&self) -> usize {
        self.first.nodes.len()
    }

    pub fn degree(&self) -> usize {
        self.first.degree
    }

    pub fn lambda_is_constant(&self) -> bool {
        let first = self.lambda[0];
        self.lambda.iter().all(|&l| (l - first).abs() <= 1e-14 * first.abs().max(1.0))
    }
}

/// An operator mapped onto a physical element [x_left, x_right].
#[derive(Debug, Clone)]
pub struct ElementOp {
    pub op: SecondDerivOp,
    pub x_left: f64,
    pub x_right: f64,
    /// element length (the Jacobian of the affine map from [0, 1])
    pub h_elem: f64,
}

/// Replace the first and last rows of `db_raw` (normally the identity) with
/// one-sided derivative stencils of degree >= p+1 and verify the result is
/// invertible.
///
/// Applied to the identity, the result maps constants to the vector v0 with
/// zeros at the two derivative rows and ones elsewhere — the null vector of
/// the borrowing matrix V.
pub fn make_db_invertible(
    db_raw: &DMatrix<f64>,
    degree: usize,
    nodes: &NodeSet,
) -> Result<DMatrix<f64>, OperatorError> {
    if !nodes.includes_left_boundary || !nodes.includes_right_boundary {
        return Err(OperatorError::BoundaryNodesRequired);
    }
    let n = nodes.len();
    let width = degree + 2;
    if n < width {
        return Err(OperatorError::TooFewNodes {
            family: "boundary-derivative".into(),
            degree,
            min: width,
            n,
        });
    }
    let mut db = db_raw.clone();
    let left = derivative_row(&nodes.coords.as_slice()[..width], nodes.coords[0]);
    let right = derivative_row(&nodes.coords.as_slice()[n - width..], nodes.coords[n - 1]);
    db.row_mut(0).fill(0.0);
    db.row_mut(n - 1).fill(0.0);
    for j in 0..width {
        db[(0, j)] = left[j];
        db[(n - 1, n - width + j)] = right[j];
    }
    let sv = db.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-10 * smax) {
        return Err(OperatorError::SingularDb(if smax > 0.0 { smin / smax } else { 0.0 }));
    }
    Ok(db)
}

/// Weights w with sum_j w_j f(x_j) = f'(x), exact for polynomials of degree
/// < xs.len(), from the Vandermonde moment system on the shifted nodes.
pub(crate) fn derivative_row(xs: &[f64], x: f64) -> Vec<f64> {
    let m = xs.len();
    let a = DMatrix::from_fn(m, m, |i, j| (xs[j] - x).powi(i as i32));
    let rhs = DVector::from_fn(m, |i, _| if i == 1 { 1.0 } else { 0.0 });
    let w = a.lu().solve(&rhs).expect("distinct nodes give a nonsingular Vandermonde system");
    w.as_slice().to_vec()
}

/// Recover M from the decomposition H D2 = -M + E L Db.
pub fn recover_m(
    d2: &DMatrix<f64>,
    h: &DMatrix<f64>,
    e: &DMatrix<f64>,
    lambda: &DVector<f64>,
    db: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut ldb = db.clone();
    for (i, mut row) in ldb.row_iter_mut().enumerate() {
        row *= lambda[i];
    }
    -(h * d2) + e * ldb
}

/// Borrowing matrix V = Db^-T (M + M^T) Db^-1 and its pseudoinverse.
pub fn compute_v(
    m: &DMatrix<f64>,
    db: &DMatrix<f64>,
    rel_tol: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), OperatorError> {
    let sv = db.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-10 * smax) {
        return Err(OperatorError::SingularDb(if smax > 0.0 { smin / smax } else { 0.0 }));
    }
    let db_inv = db.clone().lu().try_inverse().ok_or(OperatorError::SingularDb(smin / smax))?;
    let v = db_inv.transpose() * (m + m.transpose()) * &db_inv;
    // symmetrize away rounding from the two inverse applications
    let v = (&v + v.transpose()) * 0.5;
    let v_pinv = numerics::pseudoinverse(&v, rel_tol)?;
    Ok((v, v_pinv))
}

/// Build a wide-stencil second-derivative operator D2 = D L D on top of a
/// first-derivative one.
///
/// M = D^T H L D is symmetric PSD by construction, and for a diagonal norm
/// the borrowing matrix has the closed form V = H L + L H (D itself sits in
/// the Db slot and may be singular, so V is not computed through it).
pub fn build_wide_d2(
    first: &FirstDerivOp,
    lambda: &DVector<f64>,
) -> Result<SecondDerivOp, OperatorError> {
    let n = first.n();
    if lambda.len() != n {
        return Err(OperatorError::LambdaSize { got: lambda.len(), want: n });
    }
    if let Some(&bad) = lambda.iter().find(|&&l| !(l > 0.0)) {
        return Err(OperatorError::NonPositiveLambda(bad));
    }
    let mut ld = first.d.clone();
    for (i, mut row) in ld.row_iter_mut().enumerate() {
        row *= lambda[i];
    }
    let d2 = &first.d * &ld;
    let db = first.d.clone();
    let m = recover_m(&d2, &first.h, &first.e, lambda, &db);
    let lam = DMatrix::from_diagonal(lambda);
    let v = &first.h * &lam + &lam * &first.h;
    let v = (&v + v.transpose()) * 0.5;
    let v_pinv = numerics::pseudoinverse(&v, numerics::DEFAULT_PINV_RTOL)?;
    Ok(SecondDerivOp {
        first: first.clone(),
        stencil: StencilKind::Wide,
        lambda: lambda.clone(),
        d2,
        db,
        m,
        v,
        v_pinv,
    })
}

/// Map a reference operator on [0, 1] to the element [x_left, x_right].
///
/// With element length h: H -> hH, D -> D/h, D2 -> D2/h^2, Db -> Db/h,
/// M -> M/h, V -> hV, V^+ -> V^+/h; Q, E, and the extrapolation rows are
/// scale-invariant.
pub fn map_to_element(
    op: &SecondDerivOp,
    x_left: f64,
    x_right: f64,
) -> Result<ElementOp, OperatorError> {
    if !x_left.is_finite() || !x_right.is_finite() || !(x_right > x_left) {
        return Err(OperatorError::BadInterval(x_left, x_right));
    }
    let h = x_right - x_left;
    let first = &op.first;
    let nodes = NodeSet {
        coords: first.nodes.coords.map(|x| x_left + h * x),
        includes_left_boundary: first.nodes.includes_left_boundary,
        includes_right_boundary: first.nodes.includes_right_boundary,
    };
    let mapped_first = FirstDerivOp {
        family: first.family,
        degree: first.degree,
        nodes,
        h: &first.h * h,
        q: first.q.clone(),
        e: first.e.clone(),
        rl: first.rl.clone(),
        rr: first.rr.clone(),
        d: &first.d / h,
    };
    Ok(ElementOp {
        op: SecondDerivOp {
            first: mapped_first,
            stencil: op.stencil,
            lambda: op.lambda.clone(),
            d2: &op.d2 / (h * h),
            db: &op.db / h,
            m: &op.m / h,
            v: &op.v * h,
            v_pinv: &op.v_pinv / h,
        },
        x_left,
        x_right,
        h_elem: h,
    })
}
