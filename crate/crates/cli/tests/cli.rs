//! End-to-end tests running the installed binary: exit-code contract,
//! output formats, and the documented flag/config behavior.

use sbp_sat_core::operators::{build_csbp_narrow_d2, save_operator};
use std::path::Path;
use std::process::{Command, Output};

const EXIT_CHECK_FAILED: i32 = 1;
const EXIT_USAGE: i32 = 2;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbp-sat-lab"))
        .args(args)
        .output()
        .expect("binary should launch")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbp-sat-lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should launch")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

/// Grab the number following `key=` on the line that starts with `key=`.
fn scalar_after(text: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("missing `{prefix}` line in:\n{text}"))
        .trim()
        .parse()
        .expect("value should parse as a float")
}

#[test]
fn help_lists_the_four_subcommands() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for sub in ["verify", "stability", "solve", "converge"] {
        assert!(text.contains(sub), "help should mention `{sub}`");
    }
}

#[test]
fn verify_passes_for_a_built_operator() {
    let out = run(&["verify", "--family", "csbp", "--degree", "2", "--nodes", "12"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("verification: PASS"));
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn verify_rejects_an_unsupported_degree() {
    let out = run(&["verify", "--family", "csbp", "--degree", "7"]);
    assert_eq!(code(&out), EXIT_USAGE);
    assert!(stderr(&out).contains("degree 7"));
}

#[test]
fn verify_accepts_a_saved_operator_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.sbp");
    let op = build_csbp_narrow_d2(2, 12).unwrap();
    save_operator(&op, &path).unwrap();

    let out = run(&["verify", "--family", "load", "--load", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("verification: PASS"));
}

#[test]
fn verify_flags_a_tampered_operator_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.sbp");
    let op = build_csbp_narrow_d2(2, 12).unwrap();
    save_operator(&op, &path).unwrap();

    // negate the first diagonal entry of H: symmetry survives, positive
    // definiteness does not
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let h_row = lines.iter().position(|l| l == "H").expect("H section") + 1;
    let mut entries: Vec<f64> =
        lines[h_row].split_whitespace().map(|t| t.parse().unwrap()).collect();
    entries[0] = -entries[0];
    lines[h_row] =
        entries.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(" ");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let out = run(&["verify", "--family", "load", "--load", path.to_str().unwrap()]);
    assert_eq!(code(&out), EXIT_CHECK_FAILED);
    let text = stdout(&out);
    assert!(text.contains("[FAIL] H positive definite"), "got:\n{text}");
    assert!(text.contains("verification: FAIL"));
}

#[test]
fn load_family_requires_a_path() {
    let out = run(&["verify", "--family", "load"]);
    assert_eq!(code(&out), EXIT_USAGE);
    assert!(stderr(&out).contains("--load"));
}

#[test]
fn stability_br2_is_stable_and_adjoint_consistent() {
    let out = run(&["stability", "--family", "csbp", "--degree", "3", "--sat", "br2"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("conservative=true"));
    assert!(text.contains("adjoint_consistent=true"));
    assert!(text.contains("overall: stable"));
}

#[test]
fn stability_bo_is_stable_but_not_adjoint_consistent() {
    let out = run(&["stability", "--family", "lgl", "--degree", "2", "--sat", "bo"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("conservative=true"));
    assert!(text.contains("adjoint_consistent=false"));
    assert!(text.contains("overall: stable"));
}

#[test]
fn stability_flags_a_zero_dirichlet_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = dir.path().join("coeffs.txt");
    std::fs::write(
        &coeffs,
        "# adjoint-consistent coefficients with no Dirichlet penalty\n\
         sat custom T1_k=10 T1_v=10 T2_k=-0.5 T2_v=-0.5 T3_k=0.5 T3_v=0.5 TD=0\n",
    )
    .unwrap();
    let out = run(&[
        "stability",
        "--family",
        "csbp",
        "--degree",
        "2",
        "--sat",
        "custom",
        "--coeffs",
        coeffs.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), EXIT_CHECK_FAILED);
    assert!(stdout(&out).contains("overall: NOT STABLE"));
}

#[test]
fn custom_sat_requires_a_coefficient_file() {
    let out = run(&["stability", "--sat", "custom"]);
    assert_eq!(code(&out), EXIT_USAGE);
    assert!(stderr(&out).contains("--coeffs"));
}

#[test]
fn solve_reproduces_the_linear_case_to_roundoff() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("sol.csv");
    let out = run(&[
        "solve",
        "--case",
        "linear",
        "--family",
        "csbp",
        "--degree",
        "1",
        "--nodes",
        "6",
        "--elements",
        "4",
        "--output",
        out_file.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(scalar_after(&text, "h_norm_error") < 1e-10);
    assert!(scalar_after(&text, "functional_error") < 1e-10);
    let csv = std::fs::read_to_string(&out_file).unwrap();
    assert!(csv.starts_with("x,u_h,u_exact,error\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 6);
}

#[test]
fn solve_reaches_small_functional_error_on_the_oscillatory_case() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("sol.csv");
    let out = run(&[
        "solve",
        "--case",
        "cos30",
        "--family",
        "csbp",
        "--degree",
        "2",
        "--elements",
        "64",
        "--sat",
        "ldg",
        "--output",
        out_file.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(scalar_after(&stdout(&out), "functional_error") < 1e-5);
}

#[test]
fn solve_requires_a_dirichlet_boundary() {
    let out = run(&[
        "solve",
        "--case",
        "cos30",
        "--elements",
        "4",
        "--bc-left",
        "neumann:0",
        "--bc-right",
        "neumann:1",
    ]);
    assert_eq!(code(&out), EXIT_USAGE);
    assert!(stderr(&out).contains("Dirichlet"));
}

#[test]
fn converge_meets_rate_targets_on_an_asymptotic_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "converge",
        "--family",
        "lgl",
        "--degree",
        "2",
        "--sat",
        "br2",
        "--output",
        dir.path().to_str().unwrap(),
        "--assert-rates",
    ]);
    assert_eq!(code(&out), 0, "stdout: {}\nstderr: {}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("rate assertions: PASS"));

    let csv_path = dir.path().join("lgl_wide_p2_br2_cos30.csv");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("n_elements,dof,h,solution_error,functional_error\n"));
    assert!(csv.contains("# solution_rate="));
    assert!(csv.contains("# functional_rate="));
    for suffix in ["solution", "functional"] {
        assert!(dir.path().join(format!("lgl_wide_p2_br2_cos30_{suffix}.dat")).exists());
    }
}

#[test]
fn converge_fails_rate_assertions_on_a_preasymptotic_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "converge",
        "--family",
        "lgl",
        "--degree",
        "2",
        "--sat",
        "br2",
        "--elements",
        "8,16,32",
        "--output",
        dir.path().to_str().unwrap(),
        "--assert-rates",
    ]);
    assert_eq!(code(&out), EXIT_CHECK_FAILED);
    assert!(stdout(&out).contains("rate assertions: FAIL"));
}

#[test]
fn converge_output_is_bitwise_reproducible() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "converge",
            "--family",
            "lgl",
            "--degree",
            "3",
            "--sat",
            "cng",
            "--elements",
            "8,16,32",
            "--output",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }
    let name = "lgl_wide_p3_cng_cos30.csv";
    let a = std::fs::read(dir_a.path().join(name)).unwrap();
    let b = std::fs::read(dir_b.path().join(name)).unwrap();
    assert_eq!(a, b, "repeated runs should produce identical bytes");
}

#[test]
fn converge_rejects_a_malformed_element_list() {
    for bad in ["", "32,16", "8,8"] {
        let out = run(&["converge", "--elements", bad]);
        assert_eq!(code(&out), EXIT_USAGE, "elements list {bad:?} should be rejected");
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# lab defaults\nfamily = lgl\ndegree = 3\nsat = ldg\n").unwrap();

    let from_file = run(&["stability", "--config", conf.to_str().unwrap()]);
    assert_eq!(code(&from_file), 0);
    let line = stdout(&from_file);
    assert!(line.contains("family=lgl degree=3"), "got: {line}");
    assert!(line.contains("sat=ldg"));

    let overridden =
        run(&["stability", "--config", conf.to_str().unwrap(), "--degree", "4", "--sat", "cng"]);
    assert_eq!(code(&overridden), 0);
    let line = stdout(&overridden);
    assert!(line.contains("family=lgl degree=4"), "got: {line}");
    assert!(line.contains("sat=cng"));
}

#[test]
fn thread_cap_env_var_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sbp-sat-lab"))
        .env("SBP_SAT_LAB_THREADS", "1")
        .args([
            "converge",
            "--family",
            "lgl",
            "--degree",
            "1",
            "--sat",
            "br2",
            "--elements",
            "16,32,64",
            "--output",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .expect("binary should launch");
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
}

#[test]
fn solve_writes_relative_output_into_the_working_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "solve",
            "--case",
            "linear",
            "--family",
            "lgl",
            "--degree",
            "1",
            "--elements",
            "4",
        ],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(dir.path().join("solution.csv").exists());
}
