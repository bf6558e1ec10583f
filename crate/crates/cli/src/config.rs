//! Resolution of run configuration from flags, an optional key=value config
//! file, and defaults — in that precedence order.

use crate::CommonArgs;
use sbp_sat_core::assembly::{BcKind, SatChoice};
use sbp_sat_core::operators::{OperatorFamily, StencilKind};
use sbp_sat_core::sats::{parse_custom_coeffs, SatFamily};
use sbp_sat_core::study::{default_element_counts, linear_case, poisson_cos30_case, ManufacturedCase};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

/// Usage-level failure: bad flags, bad config file, inconsistent settings.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

pub struct RunConfig {
    pub family: OperatorFamily,
    pub degree: usize,
    pub nodes: usize,
    pub nodes_explicit: bool,
    pub stencil: StencilKind,
    pub load_path: Option<PathBuf>,
    pub sat: SatChoice,
    pub sat_name: String,
    pub alpha: f64,
    pub elements: Vec<usize>,
    pub case: ManufacturedCase,
    pub bc_left: Option<BcKind>,
    pub bc_right: Option<BcKind>,
    pub output: Option<PathBuf>,
    pub assert_rates: bool,
    pub psd_tol: f64,
    pub pinv_tol: f64,
    pub accuracy_slack: f64,
    pub degrees: Vec<usize>,
    pub sat_names: Vec<String>,
}

fn read_config_file(path: &PathBuf) -> Result<BTreeMap<String, String>, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            usage(format!(
                "config file {} line {}: expected key=value, got `{line}`",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parsed<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, UsageError>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|e| usage(format!("config key `{key}`: bad value `{raw}`: {e}"))),
    }
}

pub fn parse_bc(text: &str) -> Result<BcKind, UsageError> {
    let (kind, value) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("boundary condition `{text}`: expected kind:value")))?;
    let value: f64 = value
        .parse()
        .map_err(|e| usage(format!("boundary condition `{text}`: bad value: {e}")))?;
    match kind {
        "dirichlet" => Ok(BcKind::Dirichlet(value)),
        "neumann" => Ok(BcKind::Neumann(value)),
        other => Err(usage(format!("unknown boundary condition kind `{other}`"))),
    }
}

fn parse_elements(text: &str) -> Result<Vec<usize>, UsageError> {
    let counts: Result<Vec<usize>, _> =
        text.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect();
    let counts = counts.map_err(|e| usage(format!("bad element list `{text}`: {e}")))?;
    if counts.is_empty() {
        return Err(usage("element list is empty"));
    }
    if counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage(format!("element list `{text}` must be strictly ascending")));
    }
    Ok(counts)
}

fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>, UsageError>
where
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>, _> =
        text.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect();
    let items = items.map_err(|e| usage(format!("bad {what} list `{text}`: {e}")))?;
    if items.is_empty() {
        return Err(usage(format!("{what} list is empty")));
    }
    Ok(items)
}

/// Per-element node count when not set explicitly: 20 for the uniform-grid
/// family, p+1 for collocation operators.
pub fn default_nodes(family: OperatorFamily, degree: usize) -> usize {
    match family {
        OperatorFamily::Csbp | OperatorFamily::External => 20,
        OperatorFamily::Lgl | OperatorFamily::Lg => degree + 1,
    }
}

fn family_from(name: &str) -> Result<OperatorFamily, UsageError> {
    match name {
        "csbp" => Ok(OperatorFamily::Csbp),
        "lgl" => Ok(OperatorFamily::Lgl),
        "lg" => Ok(OperatorFamily::Lg),
        "load" => Ok(OperatorFamily::External),
        other => Err(usage(format!("unknown operator family `{other}` (csbp|lgl|lg|load)"))),
    }
}

fn stencil_from(name: &str) -> Result<StencilKind, UsageError> {
    match name {
        "wide" => Ok(StencilKind::Wide),
        "narrow" => Ok(StencilKind::Narrow),
        other => Err(usage(format!("unknown stencil `{other}` (wide|narrow)"))),
    }
}

fn case_from(name: &str) -> Result<ManufacturedCase, UsageError> {
    match name {
        "cos30" => Ok(poisson_cos30_case()),
        "linear" => Ok(linear_case()),
        other => Err(usage(format!("unknown case `{other}` (cos30|linear)"))),
    }
}

fn sat_choice_from(
    name: &str,
    alpha: f64,
    coeffs: Option<&PathBuf>,
) -> Result<SatChoice, UsageError> {
    let family =
        SatFamily::from_str(name).map_err(|e| usage(format!("--sat {name}: {e}")))?;
    if family == SatFamily::Custom {
        let path = coeffs
            .ok_or_else(|| usage("--sat custom requires --coeffs <file>"))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read coefficient file {}: {e}", path.display())))?;
        let line = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .ok_or_else(|| usage(format!("coefficient file {} is empty", path.display())))?;
        let coeffs = parse_custom_coeffs(line)
            .map_err(|e| usage(format!("coefficient file {}: {e}", path.display())))?;
        Ok(SatChoice::Custom(coeffs))
    } else {
        Ok(SatChoice::Family { family, alpha })
    }
}

pub fn resolve(args: &CommonArgs) -> Result<RunConfig, UsageError> {
    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };

    let family_name = args
        .family
        .clone()
        .or_else(|| file.get("family").cloned())
        .unwrap_or_else(|| "csbp".to_string());
    let family = family_from(&family_name)?;

    let degree_text = args
        .degree
        .clone()
        .or_else(|| file.get("degree").cloned())
        .unwrap_or_else(|| "2".to_string());
    let degrees = parse_list::<usize>(&degree_text, "degree")?;
    let degree = degrees[0];

    let load_path = args.load.clone().or_else(|| file.get("load").map(PathBuf::from));
    if family == OperatorFamily::External && load_path.is_none() {
        return Err(usage("--family load requires --load <operator file>"));
    }

    let nodes_explicit = args.nodes.is_some() || file.contains_key("nodes");
    let nodes = match args.nodes.or(parsed(&file, "nodes")?) {
        Some(n) => n,
        None => default_nodes(family, degree),
    };

    let stencil_name = args.stencil.clone().or_else(|| file.get("stencil").cloned());
    let stencil = match stencil_name {
        Some(name) => stencil_from(&name)?,
        None => match family {
            OperatorFamily::Csbp => StencilKind::Narrow,
            _ => StencilKind::Wide,
        },
    };

    let alpha = match args.alpha.or(parsed(&file, "alpha")?) {
        Some(a) if a > 0.0 && a <= 1.0 => a,
        Some(a) => return Err(usage(format!("alpha must lie in (0, 1], got {a}"))),
        None => 0.5,
    };

    let sat_name = args
        .sat
        .clone()
        .or_else(|| file.get("sat").cloned())
        .unwrap_or_else(|| "br2".to_string());
    let coeffs_path = args.coeffs.clone().or_else(|| file.get("coeffs").map(PathBuf::from));
    let sat_names = parse_list::<String>(&sat_name, "sat")?;
    let sat = sat_choice_from(&sat_names[0], alpha, coeffs_path.as_ref())?;

    let elements = match args.elements.clone().or_else(|| file.get("elements").cloned()) {
        Some(text) => parse_elements(&text)?,
        None => default_element_counts(nodes.max(2)),
    };

    let case_name = args
        .case
        .clone()
        .or_else(|| file.get("case").cloned())
        .unwrap_or_else(|| "cos30".to_string());
    let case = case_from(&case_name)?;

    let bc_left = match args.bc_left.clone().or_else(|| file.get("bc_left").cloned()) {
        Some(text) => Some(parse_bc(&text)?),
        None => None,
    };
    let bc_right = match args.bc_right.clone().or_else(|| file.get("bc_right").cloned()) {
        Some(text) => Some(parse_bc(&text)?),
        None => None,
    };

    let assert_rates = args.assert_rates
        || matches!(file.get("assert_rates").map(String::as_str), Some("true") | Some("1"));

    let psd_tol = args.psd_tol.or(parsed(&file, "psd_tol")?).unwrap_or(1e-10);
    let pinv_tol = args.pinv_tol.or(parsed(&file, "pinv_tol")?).unwrap_or(1e-10);
    let accuracy_slack =
        args.accuracy_slack.or(parsed(&file, "accuracy_slack")?).unwrap_or(1.0);
    if accuracy_slack < 1.0 {
        return Err(usage(format!("accuracy slack must be >= 1, got {accuracy_slack}")));
    }

    Ok(RunConfig {
        family,
        degree,
        nodes,
        nodes_explicit,
        stencil,
        load_path,
        sat,
        sat_name: sat_names[0].clone(),
        alpha,
        elements,
        case,
        bc_left,
        bc_right,
        output: args.output.clone().or_else(|| file.get("output").map(PathBuf::from)),
        assert_rates,
        psd_tol,
        pinv_tol,
        accuracy_slack,
        degrees,
        sat_names,
    })
}
