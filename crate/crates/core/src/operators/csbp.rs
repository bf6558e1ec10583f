//! Classical finite-difference SBP operators on uniform nodes.
//!
//! Interior rows use the order-2p centered stencils; boundary closures come
//! from the embedded coefficient tables (see `tables`). The reference grid is
//! n uniform nodes on [0, 1], so all tabulated stencils are divided by the
//! node spacing (or its square) here.

use super::tables as t;
use super::{
    compute_v, make_db_invertible, recover_m, FirstDerivOp, NodeSet, OperatorError,
    OperatorFamily, SecondDerivOp, StencilKind,
};
use crate::numerics::DEFAULT_PINV_RTOL;
use nalgebra::{DMatrix, DVector};

struct CsbpTables {
    h_boundary: &'static [f64],
    q_closure: Vec<&'static [f64]>,
    hd2_closure: Vec<&'static [f64]>,
    d1_interior: &'static [f64],
    d2_interior: &'static [f64],
}

fn rows<const W: usize, const B: usize>(a: &'static [[f64; W]; B]) -> Vec<&'static [f64]> {
    a.iter().map(|r| r.as_slice()).collect()
}

fn lookup(degree: usize) -> Option<CsbpTables> {
    Some(match degree {
        1 => CsbpTables {
            h_boundary: &t::H_BOUNDARY_1,
            q_closure: rows(&t::Q_CLOSURE_1),
            hd2_closure: rows(&t::HD2_CLOSURE_1),
            d1_interior: &t::D1_INTERIOR_1,
            d2_interior: &t::D2_INTERIOR_1,
        },
        2 => CsbpTables {
            h_boundary: &t::H_BOUNDARY_2,
            q_closure: rows(&t::Q_CLOSURE_2),
            hd2_closure: rows(&t::HD2_CLOSURE_2),
            d1_interior: &t::D1_INTERIOR_2,
            d2_interior: &t::D2_INTERIOR_2,
        },
        3 => CsbpTables {
            h_boundary: &t::H_BOUNDARY_3,
            q_closure: rows(&t::Q_CLOSURE_3),
            hd2_closure: rows(&t::HD2_CLOSURE_3),
            d1_interior: &t::D1_INTERIOR_3,
            d2_interior: &t::D2_INTERIOR_3,
        },
        4 => CsbpTables {
            h_boundary: &t::H_BOUNDARY_4,
            q_closure: rows(&t::Q_CLOSURE_4),
            hd2_closure: rows(&t::HD2_CLOSURE_4),
            d1_interior: &t::D1_INTERIOR_4,
            d2_interior: &t::D2_INTERIOR_4,
        },
        _ => return None,
    })
}

/// Smallest node count for which the left and right boundary closures of a
/// degree-p operator occupy disjoint rows with at least one interior row.
pub fn csbp_min_nodes(degree: usize) -> Result<usize, OperatorError> {
    if (1..=4).contains(&degree) {
        Ok(4 * degree + 1)
    } else {
        Err(OperatorError::UnsupportedDegree { family: "csbp".into(), degree })
    }
}

fn check_size(degree: usize, n: usize) -> Result<(), OperatorError> {
    let min = csbp_min_nodes(degree)?;
    if n < min {
        return Err(OperatorError::TooFewNodes { family: "csbp".into(), degree, min, n });
    }
    Ok(())
}

fn norm_diagonal(tab: &CsbpTables, n: usize, spacing: f64) -> DVector<f64> {
    let mut hdiag = DVector::from_element(n, spacing);
    for (i, &w) in tab.h_boundary.iter().enumerate() {
        hdiag[i] = w * spacing;
        hdiag[n - 1 - i] = w * spacing;
    }
    hdiag
}

/// Diagonal-norm first-derivative operator of degree p on n uniform nodes.
pub fn build_csbp_d1(degree: usize, n: usize) -> Result<FirstDerivOp, OperatorError> {
    check_size(degree, n)?;
    let tab = lookup(degree).expect("check_size vets the degree");
    let spacing = 1.0 / (n - 1) as f64;
    let nodes =
        NodeSet::on_reference(DVector::from_fn(n, |i, _| i as f64 * spacing))?;

    let b = tab.q_closure.len();
    let mut q = DMatrix::zeros(n, n);
    for (i, row) in tab.q_closure.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            q[(i, j)] = c;
            // Q is persymmetric-skew: the right closure mirrors the left
            q[(n - 1 - i, n - 1 - j)] = -c;
        }
    }
    for i in b..n - b {
        for (k, &c) in tab.d1_interior.iter().enumerate() {
            q[(i, i - degree + k)] = c;
        }
    }

    let hdiag = norm_diagonal(&tab, n, spacing);
    let h = DMatrix::from_diagonal(&hdiag);
    let mut e = DMatrix::zeros(n, n);
    e[(0, 0)] = -1.0;
    e[(n - 1, n - 1)] = 1.0;
    let mut rl = DMatrix::zeros(1, n);
    rl[(0, 0)] = 1.0;
    let mut rr = DMatrix::zeros(1, n);
    rr[(0, n - 1)] = 1.0;
    let mut d = q.clone();
    for (i, mut row) in d.row_iter_mut().enumerate() {
        row /= hdiag[i];
    }

    Ok(FirstDerivOp { family: OperatorFamily::Csbp, degree, nodes, h, q, e, rl, rr, d })
}

/// Narrow-stencil second-derivative operator of degree p+1 (unit diffusivity)
/// on n uniform nodes, decomposed as H D2 = -M + E Db with M + M^T PSD.
pub fn build_csbp_narrow_d2(degree: usize, n: usize) -> Result<SecondDerivOp, OperatorError> {
    let first = build_csbp_d1(degree, n)?;
    let tab = lookup(degree).expect("build_csbp_d1 vets the degree");
    let spacing = 1.0 / (n - 1) as f64;

    // z = H * D2; tabulated entries are for unit spacing and scale as 1/h
    let b2 = tab.hd2_closure.len();
    let mut z = DMatrix::zeros(n, n);
    for (i, row) in tab.hd2_closure.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            z[(i, j)] = c / spacing;
            z[(n - 1 - i, n - 1 - j)] = c / spacing;
        }
    }
    for i in b2..n - b2 {
        for (k, &c) in tab.d2_interior.iter().enumerate() {
            z[(i, i - degree + k)] = c / spacing;
        }
    }
    let hdiag = norm_diagonal(&tab, n, spacing);
    let mut d2 = z;
    for (i, mut row) in d2.row_iter_mut().enumerate() {
        row /= hdiag[i];
    }

    let db = make_db_invertible(&DMatrix::identity(n, n), degree, &first.nodes)?;
    let lambda = DVector::from_element(n, 1.0);
    let m = recover_m(&d2, &first.h, &first.e, &lambda, &db);
    let (v, v_pinv) = compute_v(&m, &db, DEFAULT_PINV_RTOL)?;
    Ok(SecondDerivOp { first, stencil: StencilKind::Narrow, lambda, d2, db, m, v, v_pinv })
}
