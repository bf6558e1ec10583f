//! The four subcommands. Each returns the process exit code: 0 on success,
//! 1 when a property or assertion fails, 2 on usage or construction errors.

use crate::config::{default_nodes, RunConfig};
use sbp_sat_core::assembly::{
    assemble_primal, discrete_functional, residual_form_primal, solve_refined, BoundarySpec,
    Mesh1D, SatChoice, SystemKind,
};
use sbp_sat_core::numerics::{max_abs, pseudoinverse, DEFAULT_PINV_RTOL};
use sbp_sat_core::operators::{
    load_operator, map_to_element, verify_second_deriv_slack, OperatorError, OperatorFamily,
    SecondDerivOp, StencilKind, VerificationReport,
};
use sbp_sat_core::sats::{
    check_adjoint_consistency, check_conservation, check_stability, family_coeffs,
    InterfaceContext, SatFamily,
};
use sbp_sat_core::study::{
    build_reference_op, run_convergence, solution_error_h, OperatorChoice, StudyConfig,
};
use std::path::Path;
use std::str::FromStr;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

fn fail_usage(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

/// Construction failure split by how the command should exit: a loaded
/// operator failing its checks is a verification failure (exit 1), anything
/// else is a usage/construction problem (exit 2).
enum BuildFailure {
    Verification(Box<VerificationReport>),
    Usage(String),
}

/// Build the configured reference operator or load it from a file.
fn reference_operator(cfg: &RunConfig) -> Result<SecondDerivOp, BuildFailure> {
    let mut op = if cfg.family == OperatorFamily::External {
        let path = cfg.load_path.as_ref().expect("checked during resolution");
        match load_operator(path, cfg.accuracy_slack) {
            Ok(op) => op,
            Err(OperatorError::VerificationFailed(report)) => {
                return Err(BuildFailure::Verification(Box::new(report)))
            }
            Err(e) => return Err(BuildFailure::Usage(e.to_string())),
        }
    } else {
        build_reference_op(&OperatorChoice {
            family: cfg.family,
            degree: cfg.degree,
            n_per_element: cfg.nodes,
            stencil: cfg.stencil,
        })
        .map_err(|e| BuildFailure::Usage(e.to_string()))?
    };
    if cfg.pinv_tol != DEFAULT_PINV_RTOL {
        op.v_pinv =
            pseudoinverse(&op.v, cfg.pinv_tol).map_err(|e| BuildFailure::Usage(e.to_string()))?;
    }
    Ok(op)
}

fn describe(cfg: &RunConfig) -> String {
    format!(
        "family={} degree={} nodes={} stencil={} sat={} alpha={}",
        cfg.family, cfg.degree, cfg.nodes, cfg.stencil, cfg.sat_name, cfg.alpha
    )
}

/// Obtain the operator or emit the appropriate failure output, yielding the
/// exit code to return.
fn build_or_report(cfg: &RunConfig) -> Result<SecondDerivOp, u8> {
    match reference_operator(cfg) {
        Ok(op) => Ok(op),
        Err(BuildFailure::Verification(report)) => {
            println!("{report}");
            println!("verification: FAIL");
            Err(EXIT_CHECK_FAILED)
        }
        Err(BuildFailure::Usage(e)) => Err(fail_usage(e)),
    }
}

pub fn cmd_verify(cfg: &RunConfig) -> u8 {
    println!("verify {}", describe(cfg));
    let op = match build_or_report(cfg) {
        Ok(op) => op,
        Err(code) => return code,
    };
    let report = verify_second_deriv_slack(&op, cfg.accuracy_slack);
    println!("{report}");
    if report.all_passed() {
        println!("verification: PASS");
        EXIT_OK
    } else {
        println!("verification: FAIL");
        EXIT_CHECK_FAILED
    }
}

pub fn cmd_stability(cfg: &RunConfig) -> u8 {
    println!("stability {}", describe(cfg));
    let op = match build_or_report(cfg) {
        Ok(op) => op,
        Err(code) => return code,
    };
    let (left, right) = match (map_to_element(&op, 0.0, 0.5), map_to_element(&op, 0.5, 1.0)) {
        (Ok(l), Ok(r)) => (l, r),
        (Err(e), _) | (_, Err(e)) => return fail_usage(e),
    };
    let ctx = match InterfaceContext::between(&left, &right, cfg.alpha, cfg.alpha) {
        Ok(ctx) => ctx,
        Err(e) => return fail_usage(e),
    };
    let coeffs = match &cfg.sat {
        SatChoice::Custom(c) => *c,
        SatChoice::Family { family, .. } => match family_coeffs(*family, &ctx) {
            Some(c) => c,
            None => return fail_usage("custom coefficients require --coeffs"),
        },
    };

    let m_asym = max_abs(&(&op.m - op.m.transpose()));
    let m_scale = max_abs(&op.m).max(1.0);
    let m_symmetric = m_asym <= 1e-12 * m_scale;
    let ones = sbp_sat_core::DVector::from_element(op.n(), 1.0);
    let m_rowsum_zero = (op.m.transpose() * &ones).amax() <= 1e-12 * m_scale;

    let adjoint = check_adjoint_consistency(&coeffs, m_symmetric);
    let conservation = check_conservation(&coeffs, m_rowsum_zero);
    println!("conservative={}", conservation.satisfied);
    println!("adjoint_consistent={}", adjoint.satisfied);

    match check_stability(&ctx, &coeffs, None, cfg.psd_tol) {
        Ok(report) => {
            println!("{report}");
            if report.overall {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => fail_usage(e),
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> u8 {
    println!("solve case={} {}", cfg.case.name, describe(cfg));
    let op = match build_or_report(cfg) {
        Ok(op) => op,
        Err(code) => return code,
    };
    let n_elements = *cfg.elements.last().unwrap();
    let mesh = match Mesh1D::uniform(&op, 0.0, 1.0, n_elements) {
        Ok(m) => m,
        Err(e) => return fail_usage(e),
    };
    let bc = BoundarySpec {
        left: cfg.bc_left.unwrap_or(cfg.case.bc.left),
        right: cfg.bc_right.unwrap_or(cfg.case.bc.right),
    };
    let sys = match assemble_primal(&mesh, &bc, &cfg.sat, &*cfg.case.f) {
        Ok(s) => s,
        Err(e) => return fail_usage(e),
    };
    let form = match residual_form_primal(&mesh, &bc, &cfg.sat, &*cfg.case.f) {
        Ok(f) => f,
        Err(e) => return fail_usage(e),
    };
    let u_h = match solve_refined(&sys, &form) {
        Ok(u) => u,
        Err(e) => return fail_usage(e),
    };

    let nodes = mesh.global_nodes();
    let exact = nodes.map(|x| (cfg.case.u_exact)(x));
    let err_h = solution_error_h(&u_h, &exact, &mesh);
    println!("n_elements={n_elements} dof={}", mesh.total_dof());
    println!("h_norm_error={err_h:.6e}");

    match discrete_functional(
        &u_h,
        &mesh,
        &cfg.case.functional,
        &bc,
        &cfg.sat,
        SystemKind::Primal,
        None,
    ) {
        Ok(i_h) => {
            println!("functional_value={i_h:.12e}");
            if let Some(exact) = cfg.case.functional.exact_value {
                println!("functional_error={:.6e}", (i_h - exact).abs());
            }
        }
        Err(e) => return fail_usage(e),
    }

    let path = cfg.output.clone().unwrap_or_else(|| "solution.csv".into());
    let mut csv = String::from("x,u_h,u_exact,error\n");
    for i in 0..nodes.len() {
        csv.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e}\n",
            nodes[i],
            u_h[i],
            exact[i],
            u_h[i] - exact[i]
        ));
    }
    if let Err(e) = std::fs::write(&path, csv) {
        return fail_usage(format!("cannot write {}: {e}", path.display()));
    }
    println!("wrote {}", path.display());
    EXIT_OK
}

/// Expected convergence-rate targets where the underlying analysis and
/// experiments make a definite claim; combinations without a definite
/// claim are reported but not asserted.
enum RateTarget {
    Near(f64),
    AtLeast(f64),
    Unchecked,
}

fn expected_rates(
    family: OperatorFamily,
    stencil: StencilKind,
    sat: SatFamily,
    p: usize,
) -> (RateTarget, RateTarget) {
    use RateTarget::*;
    let pf = p as f64;
    let adjoint_consistent = matches!(sat, SatFamily::Br2 | SatFamily::Ldg);
    match (family, stencil) {
        (OperatorFamily::Csbp, StencilKind::Narrow) => {
            if adjoint_consistent {
                let sol = if p == 1 { AtLeast(pf + 1.0) } else { Near(pf + 2.0) };
                (sol, Near(2.0 * pf))
            } else {
                // BO/CNG: solution p+2 except degrees 1 and 3 (p+1);
                // functional 2p only for degrees 1 and 2
                let sol = if p == 1 || p == 3 { Near(pf + 1.0) } else { Near(pf + 2.0) };
                let fun = if p <= 2 { Near(2.0 * pf) } else { Unchecked };
                (sol, fun)
            }
        }
        (OperatorFamily::Lgl | OperatorFamily::Lg, StencilKind::Wide) => {
            if adjoint_consistent {
                (Near(pf + 1.0), Near(2.0 * pf))
            } else {
                // even-odd behavior: p+1 for odd p, p for even p
                let sol = if p % 2 == 1 { Near(pf + 1.0) } else { Near(pf) };
                let fun = if p == 1 { Near(2.0) } else { Unchecked };
                (sol, fun)
            }
        }
        _ => (Unchecked, Unchecked),
    }
}

fn rate_ok(target: &RateTarget, measured: f64, tol: f64) -> bool {
    match target {
        RateTarget::Near(t) => (measured - t).abs() <= tol,
        RateTarget::AtLeast(t) => measured >= t - tol,
        RateTarget::Unchecked => true,
    }
}

pub fn cmd_converge(cfg: &RunConfig) -> u8 {
    let out_dir = cfg.output.clone().unwrap_or_else(|| "results".into());
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return fail_usage(format!("cannot create {}: {e}", out_dir.display()));
    }

    let mut all_ok = true;
    for &degree in &cfg.degrees {
        for sat_name in &cfg.sat_names {
            let code = converge_cell(cfg, degree, sat_name, &out_dir, &mut all_ok);
            if code != EXIT_OK {
                return code;
            }
        }
    }
    if cfg.assert_rates && !all_ok {
        println!("rate assertions: FAIL");
        return EXIT_CHECK_FAILED;
    }
    if cfg.assert_rates {
        println!("rate assertions: PASS");
    }
    EXIT_OK
}

fn converge_cell(
    cfg: &RunConfig,
    degree: usize,
    sat_name: &str,
    out_dir: &Path,
    all_ok: &mut bool,
) -> u8 {
    let nodes = if cfg.nodes_explicit { cfg.nodes } else { default_nodes(cfg.family, degree) };
    let sat_family = match SatFamily::from_str(sat_name) {
        Ok(f) => f,
        Err(e) => return fail_usage(e),
    };
    let sat = match (&cfg.sat, sat_family) {
        (SatChoice::Custom(c), SatFamily::Custom) => SatChoice::Custom(*c),
        (_, SatFamily::Custom) => return fail_usage("--sat custom requires --coeffs"),
        (_, family) => SatChoice::Family { family, alpha: cfg.alpha },
    };

    let mut study = StudyConfig::new(
        OperatorChoice {
            family: cfg.family,
            degree,
            n_per_element: nodes,
            stencil: cfg.stencil,
        },
        sat,
    );
    study.element_counts = cfg.elements.clone();

    let table = match run_convergence(&cfg.case, &study) {
        Ok(t) => t,
        Err(e) => return fail_usage(e),
    };

    let stem = format!(
        "{}_{}_p{}_{}_{}",
        cfg.family, cfg.stencil, degree, sat_name, cfg.case.name
    );
    let csv_path = out_dir.join(format!("{stem}.csv"));
    if let Err(e) = std::fs::write(&csv_path, table.to_csv()) {
        return fail_usage(format!("cannot write {}: {e}", csv_path.display()));
    }
    for (suffix, functional) in [("solution", false), ("functional", true)] {
        let path = out_dir.join(format!("{stem}_{suffix}.dat"));
        if let Err(e) = std::fs::write(&path, table.plot_data(functional)) {
            return fail_usage(format!("cannot write {}: {e}", path.display()));
        }
    }

    let (sol_target, fun_target) = expected_rates(cfg.family, cfg.stencil, sat_family, degree);
    let sol_ok = rate_ok(&sol_target, table.solution_rate, 0.3);
    let fun_ok = rate_ok(&fun_target, table.functional_rate, 0.3);
    if cfg.assert_rates {
        *all_ok &= sol_ok && fun_ok;
    }
    println!(
        "cell family={} stencil={} p={} sat={}: solution_rate={:.3}{} functional_rate={:.3}{} -> {}",
        cfg.family,
        cfg.stencil,
        degree,
        sat_name,
        table.solution_rate,
        if sol_ok { "" } else { " [off target]" },
        table.functional_rate,
        if fun_ok { "" } else { " [off target]" },
        csv_path.display()
    );
    EXIT_OK
}
