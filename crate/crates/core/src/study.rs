//! Manufactured-solution convergence studies: case definitions, H-norm
//! errors, log-log rate fitting, and the mesh-refinement driver with CSV
//! emission.

use crate::assembly::{
    assemble_adjoint, assemble_primal, discrete_functional, residual_form_adjoint,
    residual_form_primal, solve_refined, AssemblyError, BcKind, BoundarySpec, FunctionalSpec,
    Mesh1D, SatChoice, SourceFn, SystemKind,
};
use crate::operators::{
    build_csbp_d1, build_csbp_narrow_d2, build_lg_op, build_lgl_op, build_wide_d2,
    OperatorError, OperatorFamily, SecondDerivOp, StencilKind,
};
use nalgebra::DVector;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("rate fit needs at least two usable rows, got {0}")]
    FitNeedsTwoPoints(usize),
    #[error("rate fit window must contain at least two rows")]
    WindowTooSmall,
    #[error("rate fit requires positive errors, got {0} (machine-precision floor reached?)")]
    NonPositiveError(f64),
    #[error("all {0} error values sit at the machine-precision floor; no rate to fit")]
    AllAtFloor(usize),
    #[error("element counts must be ascending and nonempty")]
    BadElementCounts,
    #[error("the functional has no exact value to compare against")]
    MissingExactFunctional,
    #[error("the case defines no exact adjoint solution")]
    MissingExactAdjoint,
    #[error("unsupported operator combination: {0}")]
    UnsupportedCombination(String),
    #[error("refinement level with {n_elements} elements: {source}")]
    Level {
        n_elements: usize,
        #[source]
        source: Box<AssemblyError>,
    },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// A steady diffusion problem with known exact solution, its data, and the
/// compatible functional (all on [0, 1] with unit diffusivity).
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub u_exact: SourceFn,
    /// lambda u', the exact flux (data for Neumann conditions and oracles)
    pub du_exact: SourceFn,
    pub f: SourceFn,
    pub bc: BoundarySpec,
    pub functional: FunctionalSpec,
    /// exact adjoint solution and flux, when available in closed form
    pub psi_exact: Option<SourceFn>,
    pub dpsi_exact: Option<SourceFn>,
}

/// The oscillatory benchmark: U = cos(30x) on [0, 1], F = 900 cos(30x),
/// Dirichlet U(0) = 1, Neumann U'(1) = -30 sin(30), and the compatible
/// functional I(U) = int cos^2(30x) + psi_N cos(30) with
/// psi_N = (1 - 30 sin(30) - cos(30))/900.
pub fn poisson_cos30_case() -> ManufacturedCase {
    let s30 = 30.0_f64.sin();
    let c30 = 30.0_f64.cos();
    let psi_n = (1.0 - 30.0 * s30 - c30) / 900.0;
    let exact_functional = 0.5 + 60.0_f64.sin() / 120.0 + psi_n * c30;
    ManufacturedCase {
        name: "cos30".to_string(),
        u_exact: Arc::new(|x| (30.0 * x).cos()),
        du_exact: Arc::new(|x| -30.0 * (30.0 * x).sin()),
        f: Arc::new(|x| 900.0 * (30.0 * x).cos()),
        bc: BoundarySpec {
            left: BcKind::Dirichlet(1.0),
            right: BcKind::Neumann(-30.0 * s30),
        },
        functional: FunctionalSpec {
            g: Arc::new(|x| (30.0 * x).cos()),
            psi_d: 0.0,
            psi_n,
            exact_value: Some(exact_functional),
        },
        // -psi'' = cos(30x), psi(0) = 0, psi'(1) = psi_N
        psi_exact: Some(Arc::new(move |x| {
            ((30.0 * x).cos() - 1.0 + (1.0 - c30) * x) / 900.0
        })),
        dpsi_exact: Some(Arc::new(move |x| {
            (-30.0 * (30.0 * x).sin() + 1.0 - c30) / 900.0
        })),
    }
}

/// Smooth sanity case: U = x, F = 0, functional I = int x dx = 1/2 with
/// adjoint psi = x - x^2/2 (so both boundary weights vanish).
pub fn linear_case() -> ManufacturedCase {
    ManufacturedCase {
        name: "linear".to_string(),
        u_exact: Arc::new(|x| x),
        du_exact: Arc::new(|_| 1.0),
        f: Arc::new(|_| 0.0),
        bc: BoundarySpec { left: BcKind::Dirichlet(0.0), right: BcKind::Neumann(1.0) },
        functional: FunctionalSpec {
            g: Arc::new(|_| 1.0),
            psi_d: 0.0,
            psi_n: 0.0,
            exact_value: Some(0.5),
        },
        psi_exact: Some(Arc::new(|x| x - 0.5 * x * x)),
        dpsi_exact: Some(Arc::new(|x| 1.0 - x)),
    }
}

/// Composite Simpson quadrature on [a, b] with n subintervals (n even).
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Reference operator selection for a study or CLI run.
#[derive(Debug, Clone, Copy)]
pub struct OperatorChoice {
    pub family: OperatorFamily,
    pub degree: usize,
    pub n_per_element: usize,
    pub stencil: StencilKind,
}

/// Build the reference operator on [0, 1] with unit diffusivity.
pub fn build_reference_op(choice: &OperatorChoice) -> Result<SecondDerivOp, StudyError> {
    let unsupported = |msg: &str| StudyError::UnsupportedCombination(msg.to_string());
    match (choice.family, choice.stencil) {
        (OperatorFamily::Csbp, StencilKind::Narrow) => {
            Ok(build_csbp_narrow_d2(choice.degree, choice.n_per_element)?)
        }
        (OperatorFamily::Csbp, StencilKind::Wide) => {
            let first = build_csbp_d1(choice.degree, choice.n_per_element)?;
            let lambda = DVector::from_element(first.n(), 1.0);
            Ok(build_wide_d2(&first, &lambda)?)
        }
        (OperatorFamily::Lgl, StencilKind::Wide) => {
            let first = build_lgl_op(choice.degree)?;
            let lambda = DVector::from_element(first.n(), 1.0);
            Ok(build_wide_d2(&first, &lambda)?)
        }
        (OperatorFamily::Lg, StencilKind::Wide) => {
            let first = build_lg_op(choice.degree)?;
            let lambda = DVector::from_element(first.n(), 1.0);
            Ok(build_wide_d2(&first, &lambda)?)
        }
        (OperatorFamily::Lgl, StencilKind::Narrow) | (OperatorFamily::Lg, StencilKind::Narrow) => {
            Err(unsupported("collocation operators are built wide-stencil only"))
        }
        (OperatorFamily::External, _) => {
            Err(unsupported("external operators must be loaded from a file"))
        }
    }
}

/// Five doubling element counts starting at the smallest power of two that
/// puts at least 100 degrees of freedom on the coarsest mesh.
pub fn default_element_counts(n_per_element: usize) -> Vec<usize> {
    let mut start = 8usize;
    while start * n_per_element < 100 {
        start *= 2;
    }
    (0..5).map(|i| start << i).collect()
}

/// H-norm of the difference between a discrete solution and the exact
/// solution sampled on the mesh nodes.
pub fn solution_error_h(u_h: &DVector<f64>, u_exact: &DVector<f64>, mesh: &Mesh1D) -> f64 {
    let n = mesh.n_per_element();
    let mut acc = 0.0;
    for (k, el) in mesh.elements.iter().enumerate() {
        let diff = u_h.rows(k * n, n) - u_exact.rows(k * n, n);
        acc += (diff.transpose() * &el.op.first.h * &diff)[(0, 0)];
    }
    acc.sqrt()
}

/// Least-squares slope of log(error) against log(h) over the last `window`
/// rows. Errors must be strictly positive.
pub fn fit_rate(rows: &[(f64, f64)], window: usize) -> Result<f64, StudyError> {
    if window < 2 {
        return Err(StudyError::WindowTooSmall);
    }
    if rows.len() < 2 {
        return Err(StudyError::FitNeedsTwoPoints(rows.len()));
    }
    let tail = &rows[rows.len().saturating_sub(window)..];
    let mut pts = Vec::with_capacity(tail.len());
    for &(h, e) in tail {
        if !(e > 0.0) {
            return Err(StudyError::NonPositiveError(e));
        }
        pts.push((h.ln(), e.ln()));
    }
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in &pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    Ok(num / den)
}

/// Fit over the last `window` rows whose error exceeds `floor`, shrinking
/// away levels that have hit the roundoff plateau.
pub fn fit_rate_above_floor(
    rows: &[(f64, f64)],
    window: usize,
    floor: f64,
) -> Result<f64, StudyError> {
    let usable: Vec<(f64, f64)> = rows.iter().copied().filter(|&(_, e)| e > floor).collect();
    if usable.is_empty() {
        return Err(StudyError::AllAtFloor(rows.len()));
    }
    if usable.len() < 2 {
        return Err(StudyError::FitNeedsTwoPoints(usable.len()));
    }
    fit_rate(&usable, window)
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub n_elements: usize,
    pub dof: usize,
    pub h: f64,
    pub solution_error: f64,
    pub functional_error: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub solution_rate: f64,
    pub functional_rate: f64,
    /// number of trailing rows requested for the fits
    pub fit_window: usize,
}

impl ConvergenceTable {
    /// CSV with one row per refinement level and the fitted rates appended
    /// as comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_elements,dof,h,solution_error,functional_error\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e}",
                r.n_elements, r.dof, r.h, r.solution_error, r.functional_error
            )
            .unwrap();
        }
        writeln!(out, "# solution_rate={:.6}", self.solution_rate).unwrap();
        writeln!(out, "# functional_rate={:.6}", self.functional_rate).unwrap();
        out
    }

    /// Two-column plot data (dof, error); `functional` selects the column.
    pub fn plot_data(&self, functional: bool) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let e = if functional { r.functional_error } else { r.solution_error };
            writeln!(out, "{} {:.17e}", r.dof, e).unwrap();
        }
        out
    }
}

/// Study configuration: the reference operator, penalty choice, refinement
/// levels, and which of the two problems (primal or adjoint) to solve.
#[derive(Clone)]
pub struct StudyConfig {
    pub op: OperatorChoice,
    pub sat: SatChoice,
    pub element_counts: Vec<usize>,
    pub fit_window: usize,
    pub which: SystemKind,
    /// errors at or below this value are treated as roundoff floor when
    /// fitting rates
    pub error_floor: f64,
}

impl StudyConfig {
    pub fn new(op: OperatorChoice, sat: SatChoice) -> StudyConfig {
        StudyConfig {
            op,
            sat,
            element_counts: default_element_counts(op.n_per_element),
            fit_window: 3,
            which: SystemKind::Primal,
            error_floor: 5e-12,
        }
    }
}

fn run_level(
    case: &ManufacturedCase,
    cfg: &StudyConfig,
    ref_op: &SecondDerivOp,
    n_elements: usize,
    exact_functional: f64,
) -> Result<ConvergenceRow, StudyError> {
    let lift = |source: AssemblyError| StudyError::Level {
        n_elements,
        source: Box::new(source),
    };
    let (a, b) = (0.0, 1.0);
    let mesh = Mesh1D::uniform(ref_op, a, b, n_elements).map_err(lift)?;
    let (solution_error, functional_error) = match cfg.which {
        SystemKind::Primal => {
            let sys = assemble_primal(&mesh, &case.bc, &cfg.sat, &*case.f).map_err(lift)?;
            let form = residual_form_primal(&mesh, &case.bc, &cfg.sat, &*case.f).map_err(lift)?;
            let u_h = solve_refined(&sys, &form).map_err(lift)?;
            let exact = mesh.global_nodes().map(|x| (case.u_exact)(x));
            let i_h = discrete_functional(
                &u_h,
                &mesh,
                &case.functional,
                &case.bc,
                &cfg.sat,
                SystemKind::Primal,
                None,
            )
            .map_err(lift)?;
            (solution_error_h(&u_h, &exact, &mesh), (i_h - exact_functional).abs())
        }
        SystemKind::Adjoint => {
            let psi_exact = case.psi_exact.as_ref().ok_or(StudyError::MissingExactAdjoint)?;
            let sys = assemble_adjoint(
                &mesh,
                &case.bc,
                &cfg.sat,
                &*case.functional.g,
                case.functional.psi_d,
                case.functional.psi_n,
            )
            .map_err(lift)?;
            let form = residual_form_adjoint(
                &mesh,
                &case.bc,
                &cfg.sat,
                &*case.functional.g,
                case.functional.psi_d,
                case.functional.psi_n,
            )
            .map_err(lift)?;
            let psi_h = solve_refined(&sys, &form).map_err(lift)?;
            let exact = mesh.global_nodes().map(|x| psi_exact(x));
            let i_h = discrete_functional(
                &psi_h,
                &mesh,
                &case.functional,
                &case.bc,
                &cfg.sat,
                SystemKind::Adjoint,
                Some(&*case.f),
            )
            .map_err(lift)?;
            (solution_error_h(&psi_h, &exact, &mesh), (i_h - exact_functional).abs())
        }
    };
    let n_p = mesh.n_per_element();
    Ok(ConvergenceRow {
        n_elements,
        dof: n_elements * n_p,
        h: (b - a) / (n_elements * (n_p - 1)) as f64,
        solution_error,
        functional_error,
    })
}

/// Solve the case over every refinement level (levels run in parallel) and
/// fit both convergence rates over the trailing window, skipping levels
/// that sit at the roundoff floor.
pub fn run_convergence(
    case: &ManufacturedCase,
    cfg: &StudyConfig,
) -> Result<ConvergenceTable, StudyError> {
    if cfg.element_counts.is_empty() || cfg.element_counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(StudyError::BadElementCounts);
    }
    let exact_functional = case
        .functional
        .exact_value
        .ok_or(StudyError::MissingExactFunctional)?;
    let ref_op = build_reference_op(&cfg.op)?;

    let rows: Result<Vec<ConvergenceRow>, StudyError> = cfg
        .element_counts
        .par_iter()
        .map(|&n_e| run_level(case, cfg, &ref_op, n_e, exact_functional))
        .collect();
    let rows = rows?;

    let sol: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.solution_error)).collect();
    let fun: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.functional_error)).collect();
    let solution_rate = fit_rate_above_floor(&sol, cfg.fit_window, cfg.error_floor)?;
    let functional_rate = fit_rate_above_floor(&fun, cfg.fit_window, cfg.error_floor)?;
    Ok(ConvergenceTable { rows, solution_rate, functional_rate, fit_window: cfg.fit_window })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sats::SatFamily;

    fn csbp_choice(degree: usize, n: usize) -> OperatorChoice {
        OperatorChoice {
            family: OperatorFamily::Csbp,
            degree,
            n_per_element: n,
            stencil: StencilKind::Narrow,
        }
    }

    #[test]
    fn cos30_case_is_internally_consistent() {
        let case = poisson_cos30_case();
        // data identities at the boundaries
        assert_eq!((case.f)(0.0), 900.0);
        assert_eq!((case.u_exact)(0.0), 1.0);
        match case.bc.left {
            BcKind::Dirichlet(v) => assert_eq!(v, (case.u_exact)(0.0)),
            _ => panic!("left boundary should be Dirichlet"),
        }
        match case.bc.right {
            BcKind::Neumann(v) => assert_eq!(v, (case.du_exact)(1.0)),
            _ => panic!("right boundary should be Neumann"),
        }

        // the PDE and flux definitions agree with the fundamental theorem
        // of calculus: int f = -(du(1) - du(0)), int du = u(1) - u(0)
        let int_f = simpson(&*case.f, 0.0, 1.0, 100_000);
        let flux_drop = -((case.du_exact)(1.0) - (case.du_exact)(0.0));
        assert!((int_f - flux_drop).abs() <= 1e-9, "int f = {int_f} vs {flux_drop}");
        let int_du = simpson(&*case.du_exact, 0.0, 1.0, 100_000);
        let u_drop = (case.u_exact)(1.0) - (case.u_exact)(0.0);
        assert!((int_du - u_drop).abs() <= 1e-9);

        // exact functional against a quadrature oracle
        let g = case.functional.g.clone();
        let u = case.u_exact.clone();
        let volume = simpson(&move |x| g(x) * u(x), 0.0, 1.0, 100_000);
        let oracle = volume + case.functional.psi_n * (case.u_exact)(1.0);
        let exact = case.functional.exact_value.unwrap();
        assert!((exact - oracle).abs() <= 1e-10, "exact {exact} vs quadrature {oracle}");
        assert!((exact - 0.5026850).abs() <= 1e-6, "expected about 0.5026850, got {exact}");

        // the exact adjoint satisfies its boundary data and PDE
        let psi = case.psi_exact.clone().unwrap();
        let dpsi = case.dpsi_exact.clone().unwrap();
        assert!(psi(0.0).abs() <= 1e-15);
        assert!((dpsi(1.0) - case.functional.psi_n).abs() <= 1e-15);
        let g = case.functional.g.clone();
        let int_g = simpson(&move |x| g(x), 0.0, 1.0, 100_000);
        let adj_flux_drop = -(dpsi(1.0) - dpsi(0.0));
        assert!((int_g - adj_flux_drop).abs() <= 1e-9);
        let int_dpsi = simpson(&*dpsi, 0.0, 1.0, 100_000);
        assert!((int_dpsi - (psi(1.0) - psi(0.0))).abs() <= 1e-9);
    }

    #[test]
    fn linear_case_is_internally_consistent() {
        let case = linear_case();
        let g = case.functional.g.clone();
        let u = case.u_exact.clone();
        let volume = simpson(&move |x| g(x) * u(x), 0.0, 1.0, 1000);
        assert!((volume - 0.5).abs() <= 1e-12);
        assert_eq!(case.functional.exact_value, Some(0.5));
        let psi = case.psi_exact.clone().unwrap();
        let dpsi = case.dpsi_exact.clone().unwrap();
        assert_eq!(psi(0.0), 0.0);
        assert_eq!(dpsi(1.0), case.functional.psi_n);
    }

    #[test]
    fn solution_error_norm_behaves_like_a_weighted_norm() {
        let op = crate::operators::build_csbp_narrow_d2(1, 6).unwrap();
        let mesh = Mesh1D::uniform(&op, 0.0, 1.0, 3).unwrap();
        let exact = mesh.global_nodes();
        assert_eq!(solution_error_h(&exact, &exact, &mesh), 0.0);

        // constant offset c: H integrates constants to the domain length 1
        let offset = exact.map(|_| 0.25);
        let shifted = &exact + &offset;
        let e = solution_error_h(&shifted, &exact, &mesh);
        assert!((e - 0.25).abs() <= 1e-13, "offset norm {e}");

        // homogeneity
        let double = &exact + &offset * 2.0;
        let e2 = solution_error_h(&double, &exact, &mesh);
        assert!((e2 - 2.0 * e).abs() <= 1e-13);
    }

    #[test]
    fn rate_fit_recovers_exact_geometric_sequences() {
        let rows2: Vec<(f64, f64)> = vec![(1.0, 1e-2), (0.5, 2.5e-3), (0.25, 6.25e-4)];
        assert!((fit_rate(&rows2, 3).unwrap() - 2.0).abs() <= 1e-12);

        let rows4: Vec<(f64, f64)> =
            (0..5).map(|i| (0.5f64.powi(i), 1e-1 * 0.5f64.powi(4 * i))).collect();
        assert!((fit_rate(&rows4, 3).unwrap() - 4.0).abs() <= 1e-12);

        // slope is invariant under uniform scaling of the errors
        let scaled: Vec<(f64, f64)> = rows4.iter().map(|&(h, e)| (h, 7.3 * e)).collect();
        assert!((fit_rate(&scaled, 3).unwrap() - fit_rate(&rows4, 3).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn rate_fit_rejects_degenerate_input() {
        assert!(matches!(
            fit_rate(&[(1.0, 1e-3)], 3),
            Err(StudyError::FitNeedsTwoPoints(1))
        ));
        assert!(matches!(fit_rate(&[(1.0, 1e-3), (0.5, 1e-4)], 1), Err(StudyError::WindowTooSmall)));
        assert!(matches!(
            fit_rate(&[(1.0, 1e-3), (0.5, 0.0)], 2),
            Err(StudyError::NonPositiveError(_))
        ));

        // the floor-aware variant drops plateau rows instead of failing
        let rows: Vec<(f64, f64)> =
            vec![(1.0, 1e-2), (0.5, 2.5e-3), (0.25, 6.25e-4), (0.125, 1e-15), (0.0625, 1e-15)];
        let rate = fit_rate_above_floor(&rows, 3, 1e-12).unwrap();
        assert!((rate - 2.0).abs() <= 1e-12);
        assert!(matches!(
            fit_rate_above_floor(&[(1.0, 1e-15)], 3, 1e-12),
            Err(StudyError::AllAtFloor(1))
        ));
    }

    #[test]
    fn default_element_counts_keep_the_coarsest_mesh_above_100_dof() {
        assert_eq!(default_element_counts(20), vec![8, 16, 32, 64, 128]);
        assert_eq!(default_element_counts(2), vec![64, 128, 256, 512, 1024]);
        assert_eq!(default_element_counts(5), vec![32, 64, 128, 256, 512]);
        for n_p in [2usize, 3, 5, 13, 20] {
            let counts = default_element_counts(n_p);
            assert!(counts[0] * n_p >= 100);
            assert!(counts[0] / 2 * n_p < 100 || counts[0] == 8);
        }
    }

    #[test]
    fn convergence_driver_reproduces_second_degree_rates() {
        let case = poisson_cos30_case();
        let mut cfg = StudyConfig::new(
            csbp_choice(2, 20),
            SatChoice::family(SatFamily::Br2),
        );
        cfg.element_counts = vec![8, 16, 32, 64];
        let table = run_convergence(&case, &cfg).unwrap();
        assert_eq!(table.rows.len(), 4);
        for w in table.rows.windows(2) {
            assert!(w[1].h < w[0].h);
            assert!(
                w[1].solution_error < w[0].solution_error,
                "solution error must decay monotonically"
            );
        }
        assert!(
            (table.solution_rate - 4.0).abs() <= 0.5,
            "p = 2 narrow + BR2 solution rate: {}",
            table.solution_rate
        );
        assert!(
            (table.functional_rate - 4.0).abs() <= 0.7,
            "p = 2 narrow + BR2 functional rate: {}",
            table.functional_rate
        );
    }

    #[test]
    fn adjoint_study_converges_to_the_exact_adjoint() {
        let case = poisson_cos30_case();
        let mut cfg = StudyConfig::new(
            csbp_choice(2, 20),
            SatChoice::family(SatFamily::Br2),
        );
        cfg.element_counts = vec![8, 16, 32, 64];
        cfg.which = SystemKind::Adjoint;
        let table = run_convergence(&case, &cfg).unwrap();
        for w in table.rows.windows(2) {
            assert!(w[1].solution_error < w[0].solution_error);
        }
        assert!(
            table.solution_rate >= 3.0,
            "adjoint solution rate: {}",
            table.solution_rate
        );
    }

    #[test]
    fn csv_output_is_stable_and_well_formed() {
        let case = poisson_cos30_case();
        let mut cfg = StudyConfig::new(
            csbp_choice(1, 9),
            SatChoice::family(SatFamily::Ldg),
        );
        cfg.element_counts = vec![4, 8, 16];
        let table = run_convergence(&case, &cfg).unwrap();
        let csv = table.to_csv();
        let csv2 = run_convergence(&case, &cfg).unwrap().to_csv();
        assert_eq!(csv, csv2, "identical configs must give identical output");
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n_elements,dof,h,solution_error,functional_error"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("4,36,"));
        assert_eq!(csv.lines().filter(|l| l.starts_with('#')).count(), 2);
        assert!(csv.contains("# solution_rate="));
        assert!(csv.contains("# functional_rate="));

        let plot = table.plot_data(false);
        assert_eq!(plot.lines().count(), 3);
        assert!(plot.lines().next().unwrap().starts_with("36 "));
    }

    #[test]
    fn exact_polynomial_cases_hit_the_floor_and_are_reported() {
        let case = linear_case();
        let mut cfg = StudyConfig::new(
            csbp_choice(1, 9),
            SatChoice::family(SatFamily::Br2),
        );
        cfg.element_counts = vec![4, 8];
        let err = run_convergence(&case, &cfg).unwrap_err();
        assert!(
            matches!(err, StudyError::AllAtFloor(_) | StudyError::FitNeedsTwoPoints(_)),
            "expected a floor report, got {err}"
        );
    }

    #[test]
    fn bad_element_lists_are_rejected() {
        let case = poisson_cos30_case();
        let mut cfg = StudyConfig::new(
            csbp_choice(1, 9),
            SatChoice::family(SatFamily::Br2),
        );
        cfg.element_counts = vec![];
        assert!(matches!(run_convergence(&case, &cfg), Err(StudyError::BadElementCounts)));
        cfg.element_counts = vec![8, 8];
        assert!(matches!(run_convergence(&case, &cfg), Err(StudyError::BadElementCounts)));
    }

    #[test]
    fn reference_operator_builder_covers_the_supported_grid() {
        assert!(build_reference_op(&csbp_choice(2, 12)).is_ok());
        let wide_csbp = OperatorChoice {
            family: OperatorFamily::Csbp,
            degree: 2,
            n_per_element: 12,
            stencil: StencilKind::Wide,
        };
        assert!(build_reference_op(&wide_csbp).is_ok());
        for family in [OperatorFamily::Lgl, OperatorFamily::Lg] {
            let choice = OperatorChoice {
                family,
                degree: 3,
                n_per_element: 4,
                stencil: StencilKind::Wide,
            };
            assert!(build_reference_op(&choice).is_ok());
            let narrow = OperatorChoice { stencil: StencilKind::Narrow, ..choice };
            assert!(matches!(
                build_reference_op(&narrow),
                Err(StudyError::UnsupportedCombination(_))
            ));
        }
    }
}
