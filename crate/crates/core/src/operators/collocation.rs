//! Legendre collocation SBP operators on p+1 nodes, mapped to [0, 1].
//!
//! Nodes and quadrature weights come from Newton iteration on the Legendre
//! recurrences; the differentiation matrix and the extrapolation rows use the
//! barycentric Lagrange formulas, so both families are driven by the same
//! small set of helpers.

use super::{FirstDerivOp, NodeSet, OperatorError, OperatorFamily};
use nalgebra::{DMatrix, DVector};

const MAX_COLLOCATION_DEGREE: usize = 10;

/// Legendre polynomial value and derivative at x by the three-term and
/// derivative recurrences (stable at the interval ends).
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p_prev, mut dp_prev) = (1.0, 0.0);
    if m == 0 {
        return (p_prev, dp_prev);
    }
    let (mut p, mut dp) = (x, 1.0);
    for k in 1..m {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        let dp_next = dp_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
    }
    (p, dp)
}

/// Gauss-Lobatto nodes and weights on [-1, 1] for p+1 points: the interior
/// nodes are the roots of P_p', found by Newton on (1-x^2) P_p'(x) whose
/// derivative simplifies to -p(p+1) P_p(x).
fn gauss_lobatto(p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = p + 1;
    let pf = p as f64;
    let mut nodes = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[p] = 1.0;
    for i in 1..p {
        let mut x = -(std::f64::consts::PI * i as f64 / pf).cos();
        for _ in 0..60 {
            let (pp, dpp) = legendre(p, x);
            let step = (1.0 - x * x) * dpp / (pf * (pf + 1.0) * pp);
            x += step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
    }
    // Newton's iterates for symmetric guesses differ in the last bit; pin the
    // symmetry so reflected nodes are exact mirrors
    for i in 0..n / 2 {
        let s = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -s;
        nodes[n - 1 - i] = s;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (pp, _) = legendre(p, x);
            2.0 / (pf * (pf + 1.0) * pp * pp)
        })
        .collect();
    (nodes, weights)
}

/// Gauss nodes and weights on [-1, 1] for p+1 points: roots of P_{p+1}.
fn gauss(p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = p + 1;
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..60 {
            let (pp, dpp) = legendre(n, x);
            let step = pp / dpp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
    }
    for i in 0..n / 2 {
        let s = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -s;
        nodes[n - 1 - i] = s;
    }
    for i in 0..n {
        let (_, dpp) = legendre(n, nodes[i]);
        weights[i] = 2.0 / ((1.0 - nodes[i] * nodes[i]) * dpp * dpp);
    }
    (nodes, weights)
}

/// Barycentric weights 1 / prod_{k != j} (x_j - x_k).
fn barycentric_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                w[j] *= xs[j] - xs[k];
            }
        }
        w[j] = 1.0 / w[j];
    }
    w
}

/// Lagrange differentiation matrix; diagonal entries are the negated row
/// sums so that constants are annihilated exactly.
fn differentiation_matrix(xs: &[f64]) -> DMatrix<f64> {
    let n = xs.len();
    let w = barycentric_weights(xs);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                d[(i, j)] = (w[j] / w[i]) / (xs[i] - xs[j]);
                diag -= d[(i, j)];
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Row of Lagrange basis values l_j(x) for an evaluation point off the nodes.
fn lagrange_row(xs: &[f64], x: f64) -> Vec<f64> {
    let n = xs.len();
    let w = barycentric_weights(xs);
    if let Some(j) = xs.iter().position(|&xj| xj == x) {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        return row;
    }
    let terms: Vec<f64> = (0..n).map(|j| w[j] / (x - xs[j])).collect();
    let total: f64 = terms.iter().sum();
    terms.iter().map(|t| t / total).collect()
}

fn check_degree(family: &str, p: usize) -> Result<(), OperatorError> {
    if !(1..=MAX_COLLOCATION_DEGREE).contains(&p) {
        return Err(OperatorError::UnsupportedDegree { family: family.into(), degree: p });
    }
    Ok(())
}

fn assemble(
    family: OperatorFamily,
    degree: usize,
    std_nodes: Vec<f64>,
    std_weights: Vec<f64>,
) -> Result<FirstDerivOp, OperatorError> {
    let n = std_nodes.len();
    // map [-1, 1] -> [0, 1]: x = (s+1)/2, weights halve, derivatives double
    let mapped: Vec<f64> = std_nodes.iter().map(|s| 0.5 * (s + 1.0)).collect();
    let nodes = NodeSet::on_reference(DVector::from_vec(mapped.clone()))?;
    let h = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        std_weights.iter().map(|w| 0.5 * w),
    ));
    let d = differentiation_matrix(&mapped);
    let rl = DMatrix::from_row_slice(1, n, &lagrange_row(&mapped, 0.0));
    let rr = DMatrix::from_row_slice(1, n, &lagrange_row(&mapped, 1.0));
    let e = rr.transpose() * &rr - rl.transpose() * &rl;
    let q = &h * &d;
    Ok(FirstDerivOp { family, degree, nodes, h, q, e, rl, rr, d })
}

/// Legendre-Gauss-Lobatto operator of degree p on p+1 nodes (both interval
/// ends are nodes, so the extrapolation rows are unit selectors).
pub fn build_lgl_op(p: usize) -> Result<FirstDerivOp, OperatorError> {
    check_degree("lgl", p)?;
    let (nodes, weights) = gauss_lobatto(p);
    assemble(OperatorFamily::Lgl, p, nodes, weights)
}

/// Legendre-Gauss operator of degree p on p+1 strictly interior nodes;
/// boundary coupling happens through the dense extrapolation rows.
pub fn build_lg_op(p: usize) -> Result<FirstDerivOp, OperatorError> {
    check_degree("lg", p)?;
    let (nodes, weights) = gauss(p);
    assemble(OperatorFamily::Lg, p, nodes, weights)
}
