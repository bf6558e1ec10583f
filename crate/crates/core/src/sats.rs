//! Interface and boundary penalty (SAT) coefficients and their algebraic
//! checks.
//!
//! Four built-in coefficient families are provided — BR2, LDG, Baumann-Oden
//! (BO), and Carpenter-Nordstrom-Gottlieb (CNG) — together with checkers for
//! the adjoint-consistency and conservation identities and for energy
//! stability. Stability is certified two ways: through the generalized Schur
//! complement test on the quadratic-form matrix of the interface energy
//! estimate, and through the scalar penalty-size inequalities, both reported
//! with signed margins.

use crate::numerics::{self, NumericsError, PsdReport};
use crate::operators::{ElementOp, StencilKind};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SatError {
    #[error("interface weight alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("elements do not share a face: left ends at {0}, right starts at {1}")]
    DisjointElements(f64, f64),
    #[error("coefficient line: {0}")]
    Parse(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatFamily {
    Br2,
    Ldg,
    Bo,
    Cng,
    Custom,
}

impl std::fmt::Display for SatFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        f.write_str(match self {
            SatFamily::Br2 => "br2",
            SatFamily::Ldg => "ldg",
            SatFamily::Bo => "bo",
            SatFamily::Cng => "cng",
            SatFamily::Custom => "custom",
        })
    }
}

impl std::str::FromStr for SatFamily {
    type Err = SatError;
    fn from_str(s: &str) -> Result<Self, SatError> {
        match s {
            "br2" => Ok(SatFamily::Br2),
            "ldg" => Ok(SatFamily::Ldg),
            "bo" => Ok(SatFamily::Bo),
            "cng" => Ok(SatFamily::Cng),
            "custom" => Ok(SatFamily::Custom),
            other => Err(SatError::Parse(format!("unknown SAT family `{other}`"))),
        }
    }
}

/// Penalty coefficients for one interface (sides k and v) plus the Dirichlet
/// penalty TD used when the k-side element touches a Dirichlet boundary.
#[derive(Debug, Clone, Copy)]
pub struct SatCoeffs {
    pub family: SatFamily,
    pub t1_k: f64,
    pub t1_v: f64,
    pub t2_k: f64,
    pub t2_v: f64,
    pub t3_k: f64,
    pub t3_v: f64,
    pub t4_k: f64,
    pub t4_v: f64,
    pub td: f64,
    pub alpha_k: f64,
    pub alpha_v: f64,
}

impl SatCoeffs {
    pub fn sigma_k(&self) -> f64 {
        self.t2_k + self.t3_k - 1.0
    }

    pub fn sigma_v(&self) -> f64 {
        self.t2_v + self.t3_v - 1.0
    }
}

/// One side of an interface: the face extrapolation row and the matrices the
/// penalty sizes are measured against.
#[derive(Debug, Clone)]
pub struct FaceData {
    /// +1 when the face is the element's right end, -1 when it is the left
    pub n_sign: f64,
    /// extrapolation row R to the face (1 x n)
    pub r: DMatrix<f64>,
    /// C = n R Lambda (1 x n)
    pub c: DMatrix<f64>,
    /// D_gamma = n R Lambda Db, the normal derivative row (1 x n)
    pub d_gamma: DMatrix<f64>,
    /// borrowing matrix of the element and its pseudoinverse
    pub v: DMatrix<f64>,
    pub v_pinv: DMatrix<f64>,
    /// borrowing scalar q = R Lambda V+ Lambda R^T
    pub q_scalar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceSide {
    Left,
    Right,
}

impl FaceData {
    /// Face rows of a mapped element operator. For wide-stencil operators the
    /// stored V is already the closed form H L + L H, so the borrowing scalar
    /// automatically uses (H L + L H)^-1 in place of the Db-based V+.
    pub fn from_element(el: &ElementOp, side: FaceSide) -> FaceData {
        let op = &el.op;
        let (r, n_sign) = match side {
            FaceSide::Left => (op.first.rl.clone(), -1.0),
            FaceSide::Right => (op.first.rr.clone(), 1.0),
        };
        let mut r_lam = r.clone();
        for (j, mut col) in r_lam.column_iter_mut().enumerate() {
            col *= op.lambda[j];
        }
        let c = &r_lam * n_sign;
        let d_gamma = &c * &op.db;
        let q_scalar = (&r_lam * &op.v_pinv * r_lam.transpose())[(0, 0)];
        FaceData {
            n_sign,
            r,
            c,
            d_gamma,
            v: op.v.clone(),
            v_pinv: op.v_pinv.clone(),
            q_scalar,
        }
    }

    pub fn n(&self) -> usize {
        self.r.ncols()
    }
}

/// Both sides of an interior interface: side k is the element left of the
/// face (its right end), side v the element right of it (its left end).
#[derive(Debug, Clone)]
pub struct InterfaceContext {
    pub k: FaceData,
    pub v: FaceData,
    pub alpha_k: f64,
    pub alpha_v: f64,
}

fn check_alpha(alpha: f64) -> Result<f64, SatError> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
        Ok(alpha)
    } else {
        Err(SatError::BadAlpha(alpha))
    }
}

impl InterfaceContext {
    pub fn between(
        left: &ElementOp,
        right: &ElementOp,
        alpha_k: f64,
        alpha_v: f64,
    ) -> Result<InterfaceContext, SatError> {
        let gap = (left.x_right - right.x_left).abs();
        if gap > 1e-12 * left.h_elem.max(right.h_elem) {
            return Err(SatError::DisjointElements(left.x_right, right.x_left));
        }
        Ok(InterfaceContext {
            k: FaceData::from_element(left, FaceSide::Right),
            v: FaceData::from_element(right, FaceSide::Left),
            alpha_k: check_alpha(alpha_k)?,
            alpha_v: check_alpha(alpha_v)?,
        })
    }
}

/// BR2: symmetric, adjoint consistent, with the interface penalty sitting
/// exactly on the stability bound T1 = q_k/(2 a_k) + q_v/(2 a_v).
pub fn br2_coeffs(ctx: &InterfaceContext) -> SatCoeffs {
    let t1 = ctx.k.q_scalar / (2.0 * ctx.alpha_k) + ctx.v.q_scalar / (2.0 * ctx.alpha_v);
    SatCoeffs {
        family: SatFamily::Br2,
        t1_k: t1,
        t1_v: t1,
        t2_k: -0.5,
        t2_v: -0.5,
        t3_k: 0.5,
        t3_v: 0.5,
        t4_k: 0.0,
        t4_v: 0.0,
        td: 2.0 / ctx.alpha_k * ctx.k.q_scalar,
        alpha_k: ctx.alpha_k,
        alpha_v: ctx.alpha_v,
    }
}

/// LDG with switch value 1/2 and the +x global direction: side k carries the
/// full solution jump (T2_k = -1), side v the full flux jump (T3_v = 1).
pub fn ldg_coeffs(ctx: &InterfaceContext) -> SatCoeffs {
    let t1 = 2.0 / ctx.alpha_k * ctx.k.q_scalar;
    SatCoeffs {
        family: SatFamily::Ldg,
        t1_k: t1,
        t1_v: t1,
        t2_k: -1.0,
        t2_v: 0.0,
        t3_k: 0.0,
        t3_v: 1.0,
        t4_k: 0.0,
        t4_v: 0.0,
        td: t1,
        alpha_k: ctx.alpha_k,
        alpha_v: ctx.alpha_v,
    }
}

/// Baumann-Oden: no solution penalty at all (T1 = 0); conservative and
/// stable but adjoint inconsistent.
pub fn bo_coeffs(ctx: &InterfaceContext) -> SatCoeffs {
    SatCoeffs {
        family: SatFamily::Bo,
        t1_k: 0.0,
        t1_v: 0.0,
        t2_k: 0.5,
        t2_v: 0.5,
        t3_k: 0.5,
        t3_v: 0.5,
        t4_k: 0.0,
        t4_v: 0.0,
        td: 2.0 / ctx.alpha_k * ctx.k.q_scalar,
        alpha_k: ctx.alpha_k,
        alpha_v: ctx.alpha_v,
    }
}

/// Carpenter-Nordstrom-Gottlieb: one-quarter of the BR2 penalty with no
/// T2 term; conservative, stable, adjoint inconsistent.
pub fn cng_coeffs(ctx: &InterfaceContext) -> SatCoeffs {
    let t1 = ctx.k.q_scalar / (8.0 * ctx.alpha_k) + ctx.v.q_scalar / (8.0 * ctx.alpha_v);
    SatCoeffs {
        family: SatFamily::Cng,
        t1_k: t1,
        t1_v: t1,
        t2_k: 0.0,
        t2_v: 0.0,
        t3_k: 0.5,
        t3_v: 0.5,
        t4_k: 0.0,
        t4_v: 0.0,
        td: 2.0 / ctx.alpha_k * ctx.k.q_scalar,
        alpha_k: ctx.alpha_k,
        alpha_v: ctx.alpha_v,
    }
}

pub fn family_coeffs(family: SatFamily, ctx: &InterfaceContext) -> Option<SatCoeffs> {
    match family {
        SatFamily::Br2 => Some(br2_coeffs(ctx)),
        SatFamily::Ldg => Some(ldg_coeffs(ctx)),
        SatFamily::Bo => Some(bo_coeffs(ctx)),
        SatFamily::Cng => Some(cng_coeffs(ctx)),
        SatFamily::Custom => None,
    }
}

/// Parse a coefficient override line: `sat custom T1_k=<r> T2_k=<r> ...
/// alpha=<r>`. Omitted penalty entries default to 0; omitted alphas to 1/2.
pub fn parse_custom_coeffs(line: &str) -> Result<SatCoeffs, SatError> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("sat") || tokens.next() != Some("custom") {
        return Err(SatError::Parse(format!(
            "expected a line starting with `sat custom`, got `{line}`"
        )));
    }
    let mut c = SatCoeffs {
        family: SatFamily::Custom,
        t1_k: 0.0,
        t1_v: 0.0,
        t2_k: 0.0,
        t2_v: 0.0,
        t3_k: 0.0,
        t3_v: 0.0,
        t4_k: 0.0,
        t4_v: 0.0,
        td: 0.0,
        alpha_k: 0.5,
        alpha_v: 0.5,
    };
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| SatError::Parse(format!("expected key=value, got `{tok}`")))?;
        let value: f64 = value
            .parse()
            .map_err(|e| SatError::Parse(format!("bad value for `{key}`: {e}")))?;
        match key {
            "T1_k" => c.t1_k = value,
            "T1_v" => c.t1_v = value,
            "T2_k" => c.t2_k = value,
            "T2_v" => c.t2_v = value,
            "T3_k" => c.t3_k = value,
            "T3_v" => c.t3_v = value,
            "T4_k" => c.t4_k = value,
            "T4_v" => c.t4_v = value,
            "TD" => c.td = value,
            "alpha" => {
                c.alpha_k = value;
                c.alpha_v = value;
            }
            "alpha_k" => c.alpha_k = value,
            "alpha_v" => c.alpha_v = value,
            other => return Err(SatError::Parse(format!("unknown coefficient `{other}`"))),
        }
    }
    check_alpha(c.alpha_k)?;
    check_alpha(c.alpha_v)?;
    Ok(c)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// The five adjoint-consistency conditions; `m_symmetric` carries the
/// operator-side requirement M = M^T.
#[derive(Debug, Clone, Copy)]
pub struct AdjointConsistency {
    pub t1_equal: bool,
    pub t2_condition: bool,
    pub t3_condition: bool,
    pub t4_equal: bool,
    pub m_symmetric: bool,
    pub satisfied: bool,
}

pub fn check_adjoint_consistency(c: &SatCoeffs, m_symmetric: bool) -> AdjointConsistency {
    let t1_equal = close(c.t1_k, c.t1_v);
    let t2_condition = close(c.t2_k + 1.0, -c.t2_v);
    let t3_condition = close(c.t3_k - 1.0, -c.t3_v);
    let t4_equal = close(c.t4_k, c.t4_v);
    AdjointConsistency {
        t1_equal,
        t2_condition,
        t3_condition,
        t4_equal,
        m_symmetric,
        satisfied: t1_equal && t2_condition && t3_condition && t4_equal && m_symmetric,
    }
}

/// The conservation conditions; `m_rowsum_zero` carries 1^T M = 0.
#[derive(Debug, Clone, Copy)]
pub struct Conservation {
    pub t1_equal: bool,
    pub t3_condition: bool,
    pub m_rowsum_zero: bool,
    pub satisfied: bool,
}

pub fn check_conservation(c: &SatCoeffs, m_rowsum_zero: bool) -> Conservation {
    let t1_equal = close(c.t1_k, c.t1_v);
    let t3_condition = close(c.t3_k - 1.0, -c.t3_v);
    Conservation {
        t1_equal,
        t3_condition,
        m_rowsum_zero,
        satisfied: t1_equal && t3_condition && m_rowsum_zero,
    }
}

/// Quadratic-form matrix of the interface part of the energy estimate,
/// acting on [R_k u_k; R_v u_v; Db_k u_k; Db_v u_v]:
///
/// ```text
/// [  2T1_k   -2T1_k  | s_k C_k  -s_v C_v ]
/// [ -2T1_k    2T1_v  |-s_k C_k   s_v C_v ]
/// [ s_k C_k^T  -s_k C_k^T | a_k V_k      0    ]
/// [-s_v C_v^T   s_v C_v^T |    0      a_v V_v ]
/// ```
///
/// with s = T2 + T3 - 1 (equal to 2 T2 when the symmetry condition
/// T3 - T2 = 1 holds).
pub fn assemble_interface_a(ctx: &InterfaceContext, c: &SatCoeffs) -> DMatrix<f64> {
    let nk = ctx.k.n();
    let nv = ctx.v.n();
    let dim = 2 + nk + nv;
    let mut a = DMatrix::zeros(dim, dim);
    a[(0, 0)] = 2.0 * c.t1_k;
    a[(0, 1)] = -2.0 * c.t1_k;
    a[(1, 0)] = -2.0 * c.t1_k;
    a[(1, 1)] = 2.0 * c.t1_v;
    let sk = c.sigma_k();
    let sv = c.sigma_v();
    for j in 0..nk {
        let ck = sk * ctx.k.c[(0, j)];
        a[(0, 2 + j)] = ck;
        a[(1, 2 + j)] = -ck;
        a[(2 + j, 0)] = ck;
        a[(2 + j, 1)] = -ck;
    }
    for j in 0..nv {
        let cv = sv * ctx.v.c[(0, j)];
        a[(0, 2 + nk + j)] = -cv;
        a[(1, 2 + nk + j)] = cv;
        a[(2 + nk + j, 0)] = -cv;
        a[(2 + nk + j, 1)] = cv;
    }
    a.view_mut((2, 2), (nk, nk)).copy_from(&(&ctx.k.v * c.alpha_k));
    a.view_mut((2 + nk, 2 + nk), (nv, nv)).copy_from(&(&ctx.v.v * c.alpha_v));
    a
}

/// Energy-stability verdict for one interface (plus the Dirichlet boundary
/// block evaluated with the side-k face unless another face is supplied).
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// Schur-complement test of the interface quadratic-form matrix
    pub a_psd: PsdReport,
    /// the T4 block is PSD iff T4_k = T4_v >= 0
    pub neumann_block_psd: bool,
    /// Schur-complement test of [[2TD, -2C], [-2C^T, a V]]
    pub dirichlet_psd: PsdReport,
    /// signed margins of the three scalar penalty inequalities
    pub t1_margin: f64,
    pub td_margin: f64,
    pub t4_margin: f64,
    pub overall: bool,
}

impl std::fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        writeln!(
            f,
            "interface matrix PSD: {} (Y22 min eig {:.3e}, range residual {:.3e}, schur min eig {:.3e})",
            self.a_psd.is_psd, self.a_psd.y22_min_eig, self.a_psd.range_residual, self.a_psd.schur_min_eig
        )?;
        writeln!(f, "Neumann (T4) block PSD: {}", self.neumann_block_psd)?;
        writeln!(
            f,
            "Dirichlet block PSD: {} (schur min eig {:.3e})",
            self.dirichlet_psd.is_psd, self.dirichlet_psd.schur_min_eig
        )?;
        writeln!(
            f,
            "penalty margins: T1 {:+.6e}, TD {:+.6e}, T4 {:+.6e}",
            self.t1_margin, self.td_margin, self.t4_margin
        )?;
        write!(f, "overall: {}", if self.overall { "stable" } else { "NOT STABLE" })
    }
}

/// Evaluate the three positive-semidefiniteness requirements of the energy
/// estimate and the scalar penalty-size margins.
pub fn check_stability(
    ctx: &InterfaceContext,
    c: &SatCoeffs,
    dirichlet_face: Option<&FaceData>,
    psd_tol: f64,
) -> Result<StabilityReport, SatError> {
    let nk = ctx.k.n();
    let nv = ctx.v.n();
    let a = assemble_interface_a(ctx, c);
    let y11 = a.view((0, 0), (2, 2)).into_owned();
    let y12 = a.view((0, 2), (2, nk + nv)).into_owned();
    let y22 = a.view((2, 2), (nk + nv, nk + nv)).into_owned();
    let a_psd = numerics::psd_schur_test(&y11, &y12, &y22, psd_tol)?;

    // the T4 quadratic form 2 T4 [[1,1],[1,1]] is PSD iff T4_k = T4_v >= 0
    let t4_scale = c.t4_k.abs().max(c.t4_v.abs()).max(1.0);
    let neumann_block_psd =
        (c.t4_k - c.t4_v).abs() <= psd_tol * t4_scale && c.t4_k >= -psd_tol * t4_scale;

    let dface = dirichlet_face.unwrap_or(&ctx.k);
    let d11 = DMatrix::from_element(1, 1, 2.0 * c.td);
    let d12 = &dface.c * -2.0;
    let d22 = &dface.v * c.alpha_k;
    let dirichlet_psd = numerics::psd_schur_test(&d11, &d12, &d22, psd_tol)?;

    let t1_bound = 2.0 / c.alpha_k * c.t2_k * c.t2_k * ctx.k.q_scalar
        + 2.0 / c.alpha_v * c.t2_v * c.t2_v * ctx.v.q_scalar;
    let t1_margin = c.t1_k.min(c.t1_v) - t1_bound;
    let td_margin = c.td - 2.0 / c.alpha_k * dface.q_scalar;
    let t4_margin = c.t4_k.min(c.t4_v);

    let overall = a_psd.is_psd && neumann_block_psd && dirichlet_psd.is_psd;
    Ok(StabilityReport {
        a_psd,
        neumann_block_psd,
        dirichlet_psd,
        t1_margin,
        td_margin,
        t4_margin,
        overall,
    })
}

/// True when the element's stored V matches the wide-stencil closed form
/// the stability bounds assume (H L + L H).
pub fn uses_wide_borrowing(el: &ElementOp) -> bool {
    el.op.stencil == StencilKind::Wide
}
