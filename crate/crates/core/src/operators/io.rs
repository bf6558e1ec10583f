//! Text serialization of second-derivative operators.
//!
//! Layout: a header `sbp-op v1 <family> degree=<p> n=<n> stencil=<kind>`,
//! then the sections `nodes`, `H`, `Q`, `E`, `Rl`, `Rr`, `D2`, `Db` in that
//! order, each holding whitespace-separated decimal entries (row-major) and
//! closed by a line reading `end`. Entries carry 18 significant digits, so a
//! round trip reproduces every f64 bit-exactly. M, V, and the pseudoinverse
//! are not stored; they are recovered on load, and the loaded operator must
//! pass the full verification suite before it is handed to the caller.
//!
//! Only unit-diffusivity operators are serializable: the format has no
//! lambda section and loaders assume lambda = 1.

use super::{
    compute_v, recover_m, verify_second_deriv_slack, FirstDerivOp, NodeSet, OperatorError,
    OperatorFamily, SecondDerivOp, StencilKind,
};
use crate::numerics::{pseudoinverse, DEFAULT_PINV_RTOL};
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::path::Path;

const SECTION_ORDER: [&str; 8] = ["nodes", "H", "Q", "E", "Rl", "Rr", "D2", "Db"];

pub fn save_operator(op: &SecondDerivOp, path: &Path) -> Result<(), OperatorError> {
    if !op.lambda_is_constant() || (op.lambda[0] - 1.0).abs() > 1e-14 {
        return Err(OperatorError::Serialize(
            "operator files carry no diffusivity section; only lambda = 1 operators can be \
             saved"
                .into(),
        ));
    }
    let n = op.n();
    let mut out = String::new();
    writeln!(
        out,
        "sbp-op v1 {} degree={} n={} stencil={}",
        op.first.family,
        op.degree(),
        n,
        op.stencil
    )
    .expect("writing to a String cannot fail");
    let vector_line = |v: &[f64]| {
        v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(" ")
    };
    let mut section = |name: &str, rows: Vec<Vec<f64>>| {
        out.push_str(name);
        out.push('\n');
        for row in rows {
            out.push_str(&vector_line(&row));
            out.push('\n');
        }
        out.push_str("end\n");
    };
    let matrix_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    };
    section("nodes", vec![op.first.nodes.coords.iter().copied().collect()]);
    section("H", matrix_rows(&op.first.h));
    section("Q", matrix_rows(&op.first.q));
    section("E", matrix_rows(&op.first.e));
    section("Rl", matrix_rows(&op.first.rl));
    section("Rr", matrix_rows(&op.first.rr));
    section("D2", matrix_rows(&op.d2));
    section("Db", matrix_rows(&op.db));
    std::fs::write(path, out)?;
    Ok(())
}

struct Header {
    family: OperatorFamily,
    degree: usize,
    n: usize,
    stencil: StencilKind,
}

fn parse_header(line: &str, lineno: usize) -> Result<Header, OperatorError> {
    let bad = |msg: String| OperatorError::Parse(format!("line {lineno}: {msg}"));
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 6 || tokens[0] != "sbp-op" || tokens[1] != "v1" {
        return Err(bad(format!(
            "expected header `sbp-op v1 <family> degree=<p> n=<n> stencil=<kind>`, got `{line}`"
        )));
    }
    let family = match tokens[2] {
        "csbp" => OperatorFamily::Csbp,
        "lgl" => OperatorFamily::Lgl,
        "lg" => OperatorFamily::Lg,
        "external" => OperatorFamily::External,
        other => return Err(bad(format!("unknown operator family `{other}`"))),
    };
    let field = |token: &str, key: &str| -> Result<String, OperatorError> {
        token
            .strip_prefix(&format!("{key}="))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected `{key}=<value>`, got `{token}`")))
    };
    let degree: usize = field(tokens[3], "degree")?
        .parse()
        .map_err(|e| bad(format!("bad degree: {e}")))?;
    let n: usize =
        field(tokens[4], "n")?.parse().map_err(|e| bad(format!("bad node count: {e}")))?;
    let stencil = match field(tokens[5], "stencil")?.as_str() {
        "wide" => StencilKind::Wide,
        "narrow" => StencilKind::Narrow,
        other => return Err(bad(format!("stencil must be wide or narrow, got `{other}`"))),
    };
    if degree == 0 || n < 2 {
        return Err(bad(format!("degree {degree} / node count {n} out of range")));
    }
    Ok(Header { family, degree, n, stencil })
}

/// Load an operator file, recover M and V, and run the full verification
/// suite; `accuracy_slack` (>= 1) multiplies the accuracy tolerances to admit
/// operators that meet their order conditions only approximately.
pub fn load_operator(path: &Path, accuracy_slack: f64) -> Result<SecondDerivOp, OperatorError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().peekable();

    let (header_no, header_line) = lines
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| OperatorError::Parse("empty file".into()))?;
    let header = parse_header(header_line.trim(), header_no + 1)?;
    let n = header.n;

    let mut sections: Vec<Vec<f64>> = Vec::with_capacity(SECTION_ORDER.len());
    for &name in &SECTION_ORDER {
        let expected = if name == "nodes" || name == "Rl" || name == "Rr" { n } else { n * n };
        let (no, line) = loop {
            match lines.next() {
                Some((no, l)) if l.trim().is_empty() => {
                    let _ = no;
                    continue;
                }
                Some((no, l)) => break (no, l.trim()),
                None => {
                    return Err(OperatorError::Parse(format!(
                        "unexpected end of file: section `{name}` missing"
                    )))
                }
            }
        };
        if line != name {
            return Err(OperatorError::Parse(format!(
                "line {}: expected section `{name}`, got `{line}`",
                no + 1
            )));
        }
        let mut entries = Vec::with_capacity(expected);
        let mut closed = false;
        let mut last_no = no;
        for (no, l) in lines.by_ref() {
            last_no = no;
            let l = l.trim();
            if l == "end" {
                closed = true;
                break;
            }
            for tok in l.split_whitespace() {
                let v: f64 = tok.parse().map_err(|e| {
                    OperatorError::Parse(format!(
                        "line {}: bad entry `{tok}` in section `{name}`: {e}",
                        no + 1
                    ))
                })?;
                entries.push(v);
            }
        }
        if !closed {
            return Err(OperatorError::Parse(format!(
                "section `{name}` is not terminated by `end`"
            )));
        }
        if entries.len() != expected {
            return Err(OperatorError::Parse(format!(
                "line {}: section `{name}` has {} entries, expected {expected}",
                last_no + 1,
                entries.len()
            )));
        }
        sections.push(entries);
    }
    if let Some((no, l)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(OperatorError::Parse(format!(
            "line {}: unexpected trailing content `{}`",
            no + 1,
            l.trim()
        )));
    }

    let mut it = sections.into_iter();
    let nodes = NodeSet::on_reference(DVector::from_vec(it.next().unwrap()))?;
    let take_matrix =
        |data: Vec<f64>, rows: usize, cols: usize| DMatrix::from_row_slice(rows, cols, &data);
    let h = take_matrix(it.next().unwrap(), n, n);
    let q = take_matrix(it.next().unwrap(), n, n);
    let e = take_matrix(it.next().unwrap(), n, n);
    let rl = take_matrix(it.next().unwrap(), 1, n);
    let rr = take_matrix(it.next().unwrap(), 1, n);
    let d2 = take_matrix(it.next().unwrap(), n, n);
    let db = take_matrix(it.next().unwrap(), n, n);

    let d = h
        .clone()
        .lu()
        .solve(&q)
        .ok_or_else(|| OperatorError::Parse("H is singular, cannot form D = H^-1 Q".into()))?;
    let first = FirstDerivOp {
        family: header.family,
        degree: header.degree,
        nodes,
        h,
        q,
        e,
        rl,
        rr,
        d,
    };
    let lambda = DVector::from_element(n, 1.0);
    let m = recover_m(&d2, &first.h, &first.e, &lambda, &db);
    let (v, v_pinv) = match header.stencil {
        StencilKind::Narrow => compute_v(&m, &db, DEFAULT_PINV_RTOL)?,
        StencilKind::Wide => {
            // Db = D may be singular for wide operators; with lambda = 1 the
            // borrowing matrix reduces to the closed form H L + L H = 2H
            let v = &first.h * 2.0;
            let v_pinv = pseudoinverse(&v, DEFAULT_PINV_RTOL)?;
            (v, v_pinv)
        }
    };
    let op = SecondDerivOp { first, stencil: header.stencil, lambda, d2, db, m, v, v_pinv };

    let report = verify_second_deriv_slack(&op, accuracy_slack);
    if !report.all_passed() {
        return Err(OperatorError::VerificationFailed(report));
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_abs;
    use crate::operators::{build_csbp_narrow_d2, build_lgl_op, build_wide_d2};

    fn roundtrip(op: &SecondDerivOp) -> SecondDerivOp {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("op.txt");
        save_operator(op, &path).unwrap();
        load_operator(&path, 1.0).unwrap()
    }

    #[test]
    fn narrow_operator_roundtrips_bit_exactly() {
        let op = build_csbp_narrow_d2(1, 5).unwrap();
        let back = roundtrip(&op);
        assert!(max_abs(&(&back.first.h - &op.first.h)) <= 1e-15);
        assert!(max_abs(&(&back.first.q - &op.first.q)) <= 1e-15);
        assert!(max_abs(&(&back.first.e - &op.first.e)) <= 1e-15);
        assert!(max_abs(&(&back.first.rl - &op.first.rl)) <= 1e-15);
        assert!(max_abs(&(&back.first.rr - &op.first.rr)) <= 1e-15);
        assert!(max_abs(&(&back.d2 - &op.d2)) <= 1e-15);
        assert!(max_abs(&(&back.db - &op.db)) <= 1e-15);
        assert!((&back.first.nodes.coords - &op.first.nodes.coords).amax() <= 1e-15);
        // recovered pieces agree because their inputs are identical
        assert!(max_abs(&(&back.m - &op.m)) <= 1e-13);
        assert!(max_abs(&(&back.v - &op.v)) <= 1e-13);
        assert_eq!(back.stencil, StencilKind::Narrow);
        assert_eq!(back.degree(), 1);
    }

    #[test]
    fn wide_operator_roundtrips() {
        let first = build_lgl_op(3).unwrap();
        let lambda = DVector::from_element(4, 1.0);
        let op = build_wide_d2(&first, &lambda).unwrap();
        let back = roundtrip(&op);
        assert_eq!(back.stencil, StencilKind::Wide);
        assert!(max_abs(&(&back.d2 - &op.d2)) <= 1e-15);
        assert!(max_abs(&(&back.v - &op.v)) <= 1e-13);
    }

    #[test]
    fn variable_lambda_operators_are_not_serializable() {
        let first = build_lgl_op(2).unwrap();
        let lambda = first.nodes.coords.map(|x| 1.0 + x);
        let op = build_wide_d2(&first, &lambda).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = save_operator(&op, &dir.path().join("op.txt")).unwrap_err();
        assert!(matches!(err, OperatorError::Serialize(_)));
    }

    #[test]
    fn tampered_h_fails_verification_with_named_check() {
        let op = build_csbp_narrow_d2(1, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("op.txt");
        save_operator(&op, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let h_start = lines.iter().position(|l| l == "H").unwrap();
        // flip the sign of the first H row: H stops being positive definite
        lines[h_start + 1] = lines[h_start + 1]
            .split_whitespace()
            .map(|t| format!("{:.17e}", -t.parse::<f64>().unwrap()))
            .collect::<Vec<_>>()
            .join(" ");
        std::fs::write(&path, lines.join("\n")).unwrap();
        match load_operator(&path, 1.0) {
            Err(OperatorError::VerificationFailed(report)) => {
                assert!(!report.find("H positive definite").unwrap().passed, "{report}");
            }
            other => panic!("expected verification failure, got {other:?}"),
        }
    }

    #[test]
    fn truncated_section_is_a_parse_error_naming_the_line() {
        let op = build_csbp_narrow_d2(1, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("op.txt");
        save_operator(&op, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let q_start = lines.iter().position(|l| l == "Q").unwrap();
        // drop the last entry of the first Q row
        let row: Vec<&str> = lines[q_start + 1].split_whitespace().collect();
        lines[q_start + 1] = row[..row.len() - 1].join(" ");
        std::fs::write(&path, lines.join("\n")).unwrap();
        match load_operator(&path, 1.0) {
            Err(OperatorError::Parse(msg)) => {
                assert!(msg.contains("line"), "{msg}");
                assert!(msg.contains('Q'), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("op.txt");
        std::fs::write(&path, "sbp-op v2 csbp degree=1 n=5 stencil=narrow\n").unwrap();
        assert!(matches!(load_operator(&path, 1.0), Err(OperatorError::Parse(_))));
    }
}
