//! Problem files.
//!
//! A problem file is UTF-8 text with one `key = value` entry per line.
//! `#` starts a comment; a line starting with whitespace continues the value
//! of the previous key, which is how multi-piece targets are written:
//!
//! ```text
//! form      = multiplicative
//! exponents = [3/4, 1/4]
//! target    = on (0,1]: 1
//!             on [1,e]: exp((1+log(x))*log(x)/2)
//!             on [e,inf): e
//! interval  = [1, e]
//! delta     = 2/3
//! M         = 2
//! ```
//!
//! Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `name` | free-form label |
//! | `form` | `multiplicative`, `polynomial_like` or `root` |
//! | `exponents` | `[a1, ..., an]` for `multiplicative`; `[l1, ..., l(n-1)]` for `polynomial_like` |
//! | `order` | `n` for `root` |
//! | `target` | piecewise expression for `G` (positive half-line forms) or `F` (`polynomial_like`) |
//! | `interval` | `J` for the positive half-line forms, `I` for `polynomial_like` |
//! | `delta`, `M` | class parameters for the contraction solver |
//! | `anchor` | `left` or `right` for the constructive solvers |
//! | `solver` | `auto`, `contraction`, `construct-left`, `construct-right`, `verify-only` |
//! | `grid`, `tol`, `max_iter`, `probes` | numerical options |
//! | `x0`, `seeds`, `initial` | construction options; `initial` is a list of piece shapes |
//! | `iterate0` | `identity` or `target`, the contraction starting point |
//! | `window` | probe window `[lo, hi]` |
//! | `candidate` | piecewise expression checked by `verify-only` |
//!
//! Numbers accept constant expressions such as `2/3` or `e`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::construction::{Shape, Side};
use crate::contraction::{InitialIterate, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::expr::{parse_constant, parse_expression, PiecewiseExpr};
use crate::funcrep::{Interval, DEFAULT_GRID, DEFAULT_PROBES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// `prod_k (g^k)^{alpha_k} = G` on the positive half-line.
    Multiplicative,
    /// `f^n = sum_k lambda_k f^k + F` on the line.
    PolynomialLike,
    /// `g^n = G` on the positive half-line.
    Root,
}

impl Form {
    fn as_str(self) -> &'static str {
        match self {
            Form::Multiplicative => "multiplicative",
            Form::PolynomialLike => "polynomial_like",
            Form::Root => "root",
        }
    }

    /// Whether the problem lives on the positive half-line.
    pub fn is_positive(self) -> bool {
        !matches!(self, Form::PolynomialLike)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    #[default]
    Auto,
    Contraction,
    ConstructLeft,
    ConstructRight,
    VerifyOnly,
}

impl SolverChoice {
    fn as_str(self) -> &'static str {
        match self {
            SolverChoice::Auto => "auto",
            SolverChoice::Contraction => "contraction",
            SolverChoice::ConstructLeft => "construct-left",
            SolverChoice::ConstructRight => "construct-right",
            SolverChoice::VerifyOnly => "verify-only",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(match text.trim() {
            "auto" => SolverChoice::Auto,
            "contraction" => SolverChoice::Contraction,
            "construct-left" => SolverChoice::ConstructLeft,
            "construct-right" => SolverChoice::ConstructRight,
            "verify-only" => SolverChoice::VerifyOnly,
            other => return Err(Error::schema("solver", format!("unknown solver `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub probes: usize,
    pub x0: Option<f64>,
    pub seeds: Option<Vec<f64>>,
    /// Piece shapes for the construction, as written (`linear`, `bend:0.5`,
    /// `power:2`, or a CSV path).
    pub initial: Vec<String>,
    pub iterate0: InitialIterate,
    pub window: Option<Interval>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            grid: DEFAULT_GRID,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            probes: DEFAULT_PROBES,
            x0: None,
            seeds: None,
            initial: vec!["linear".into()],
            iterate0: InitialIterate::Identity,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub form: Form,
    pub exponents: Vec<f64>,
    pub order: Option<usize>,
    pub target: PiecewiseExpr,
    pub interval: Interval,
    pub delta: Option<f64>,
    pub m: Option<f64>,
    pub side: Option<Side>,
    pub solver: SolverChoice,
    pub options: SolverOptions,
    pub candidate: Option<PiecewiseExpr>,
}

impl ProblemSpec {
    /// Coefficients `alpha_1..alpha_n` of `sum_k alpha_k f^k = F` in log
    /// coordinates (or directly, for the polynomial-like form).
    pub fn line_coefficients(&self) -> Vec<f64> {
        match self.form {
            Form::Multiplicative => self.exponents.clone(),
            Form::PolynomialLike => {
                let mut a: Vec<f64> = self.exponents.iter().map(|l| -l).collect();
                a.push(1.0);
                a
            }
            Form::Root => {
                let n = self.order.unwrap_or(2);
                let mut a = vec![0.0; n];
                a[n - 1] = 1.0;
                a
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.form {
            Form::Multiplicative => {
                if self.exponents.is_empty() {
                    return Err(Error::schema("exponents", "at least one exponent is required"));
                }
                if self.exponents.last() == Some(&0.0) {
                    return Err(Error::schema("exponents", "the last exponent must be nonzero"));
                }
            }
            Form::PolynomialLike => {}
            Form::Root => match self.order {
                Some(n) if n >= 2 => {
                    if !self.exponents.is_empty() {
                        return Err(Error::schema("exponents", "a root problem has no exponents; use `order`"));
                    }
                }
                _ => return Err(Error::schema("order", "a root problem needs `order = n` with n >= 2")),
            },
        }
        if self.form.is_positive() && self.interval.lo <= 0.0 {
            return Err(Error::schema("interval", "J must lie inside (0, inf)"));
        }
        if self.exponents.iter().any(|v| !v.is_finite()) {
            return Err(Error::schema("exponents", "exponents must be finite"));
        }
        if let Some(w) = self.options.window {
            if self.form.is_positive() && w.lo <= 0.0 {
                return Err(Error::schema("window", "the probe window must lie inside (0, inf)"));
            }
        }
        if self.options.grid < 2 {
            return Err(Error::schema("grid", "at least two knots are required"));
        }
        if self.options.probes < 2 {
            return Err(Error::schema("probes", "at least two probes are required"));
        }
        if !(self.options.tol > 0.0) {
            return Err(Error::schema("tol", "must be positive"));
        }
        for s in &self.options.initial {
            if !s.ends_with(".csv") {
                Shape::parse(s)?;
            }
        }
        Ok(())
    }
}

fn parse_number(field: &str, text: &str) -> Result<f64> {
    parse_constant(text).map_err(|e| Error::schema(field, e.to_string()))
}

fn parse_list(field: &str, text: &str) -> Result<Vec<String>> {
    let t = text.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::schema(field, format!("expected a bracketed list, got `{t}`")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    Ok(inner.split(',').map(|s| s.trim().to_string()).collect())
}

fn parse_numbers(field: &str, text: &str) -> Result<Vec<f64>> {
    parse_list(field, text)?
        .iter()
        .map(|s| {
            if s.is_empty() {
                Err(Error::schema(field, "empty list entry"))
            } else {
                parse_number(field, s)
            }
        })
        .collect()
}

fn parse_interval(field: &str, text: &str) -> Result<Interval> {
    let v = parse_numbers(field, text)?;
    if v.len() != 2 {
        return Err(Error::schema(field, format!("expected [lo, hi], got {} entries", v.len())));
    }
    Interval::new(v[0], v[1]).map_err(|e| Error::schema(field, e.to_string()))
}

fn parse_count(field: &str, text: &str) -> Result<usize> {
    text.trim()
        .parse::<usize>()
        .map_err(|e| Error::schema(field, format!("`{}`: {e}", text.trim())))
}

fn read_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with(char::is_whitespace) {
            match entries.last_mut() {
                Some((_, v)) => {
                    v.push('\n');
                    v.push_str(line.trim());
                }
                None => {
                    return Err(Error::schema("file", format!("line {}: continuation without a key", lineno + 1)))
                }
            }
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::schema("file", format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = k.trim().to_string();
        if entries.iter().any(|(e, _)| *e == key) {
            return Err(Error::schema(key, "duplicate key"));
        }
        entries.push((key, v.trim().to_string()));
    }
    Ok(entries)
}

/// Parses problem-file text.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    from_entries(&read_entries(text)?)
}

/// Parses problem-file text, then replaces or adds the given `key = value`
/// entries before validation.
pub fn parse_problem_with(text: &str, overrides: &[(String, String)]) -> Result<ProblemSpec> {
    let mut entries = read_entries(text)?;
    for (k, v) in overrides {
        match entries.iter_mut().find(|(e, _)| e == k) {
            Some(slot) => slot.1 = v.clone(),
            None => entries.push((k.clone(), v.clone())),
        }
    }
    from_entries(&entries)
}

fn from_entries(entries: &[(String, String)]) -> Result<ProblemSpec> {
    let mut name = None;
    let mut form = None;
    let mut exponents = None;
    let mut order = None;
    let mut target = None;
    let mut interval = None;
    let mut delta = None;
    let mut m = None;
    let mut side = None;
    let mut solver = SolverChoice::Auto;
    let mut options = SolverOptions::default();
    let mut candidate = None;

    for (key, value) in entries {
        let v = value.as_str();
        match key.as_str() {
            "name" => name = Some(v.to_string()),
            "form" => {
                form = Some(match v {
                    "multiplicative" => Form::Multiplicative,
                    "polynomial_like" | "polynomial-like" => Form::PolynomialLike,
                    "root" => Form::Root,
                    other => return Err(Error::schema("form", format!("unknown form `{other}`"))),
                })
            }
            "exponents" => exponents = Some(parse_numbers("exponents", v)?),
            "order" => order = Some(parse_count("order", v)?),
            "target" => target = Some(parse_expression(v)?),
            "candidate" => candidate = Some(parse_expression(v)?),
            "interval" => interval = Some(parse_interval("interval", v)?),
            "delta" => delta = Some(parse_number("delta", v)?),
            "M" => m = Some(parse_number("M", v)?),
            "anchor" => {
                side = Some(match v {
                    "left" => Side::AtLeft,
                    "right" => Side::AtRight,
                    other => return Err(Error::schema("anchor", format!("expected `left` or `right`, got `{other}`"))),
                })
            }
            "solver" => solver = SolverChoice::parse(v)?,
            "grid" => options.grid = parse_count("grid", v)?,
            "tol" => options.tol = parse_number("tol", v)?,
            "max_iter" => options.max_iter = parse_count("max_iter", v)?,
            "probes" => options.probes = parse_count("probes", v)?,
            "x0" => options.x0 = Some(parse_number("x0", v)?),
            "seeds" => options.seeds = Some(parse_numbers("seeds", v)?),
            "initial" => options.initial = parse_list("initial", v)?,
            "iterate0" => {
                options.iterate0 = match v {
                    "identity" => InitialIterate::Identity,
                    "target" => InitialIterate::TargetInterpolant,
                    other => return Err(Error::schema("iterate0", format!("expected `identity` or `target`, got `{other}`"))),
                }
            }
            "window" => options.window = Some(parse_interval("window", v)?),
            other => return Err(Error::schema(other, "unknown key")),
        }
    }

    let form = form.ok_or_else(|| Error::schema("form", "missing"))?;
    let spec = ProblemSpec {
        name,
        form,
        exponents: match (exponents, form) {
            (Some(e), _) => e,
            (None, Form::Root) => Vec::new(),
            (None, _) => return Err(Error::schema("exponents", "missing")),
        },
        order,
        target: target.ok_or_else(|| Error::schema("target", "missing"))?,
        interval: interval.ok_or_else(|| Error::schema("interval", "missing"))?,
        delta,
        m,
        side,
        solver,
        options,
        candidate,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<ProblemSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_problem(&text)
}

fn write_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    format!("[{}]", parts.join(", "))
}

fn write_pieces(e: &PiecewiseExpr) -> String {
    e.pieces()
        .iter()
        .map(|p| format!("on {}: {}", p.guard, p.body))
        .collect::<Vec<_>>()
        .join("\n    ")
}

/// Renders a problem in the file format; [`parse_problem`] reads it back.
pub fn write_problem(spec: &ProblemSpec) -> String {
    let mut out = String::new();
    if let Some(n) = &spec.name {
        let _ = writeln!(out, "name = {n}");
    }
    let _ = writeln!(out, "form = {}", spec.form.as_str());
    if spec.form != Form::Root || !spec.exponents.is_empty() {
        let _ = writeln!(out, "exponents = {}", write_list(&spec.exponents));
    }
    if let Some(n) = spec.order {
        let _ = writeln!(out, "order = {n}");
    }
    let _ = writeln!(out, "target = {}", write_pieces(&spec.target));
    let _ = writeln!(out, "interval = {}", write_list(&[spec.interval.lo, spec.interval.hi]));
    if let Some(d) = spec.delta {
        let _ = writeln!(out, "delta = {d:?}");
    }
    if let Some(m) = spec.m {
        let _ = writeln!(out, "M = {m:?}");
    }
    if let Some(s) = spec.side {
        let _ = writeln!(out, "anchor = {}", if s == Side::AtLeft { "left" } else { "right" });
    }
    let _ = writeln!(out, "solver = {}", spec.solver.as_str());
    let o = &spec.options;
    let _ = writeln!(out, "grid = {}", o.grid);
    let _ = writeln!(out, "tol = {:?}", o.tol);
    let _ = writeln!(out, "max_iter = {}", o.max_iter);
    let _ = writeln!(out, "probes = {}", o.probes);
    if let Some(x0) = o.x0 {
        let _ = writeln!(out, "x0 = {x0:?}");
    }
    if let Some(s) = &o.seeds {
        let _ = writeln!(out, "seeds = {}", write_list(s));
    }
    let _ = writeln!(out, "initial = [{}]", o.initial.join(", "));
    let _ = writeln!(
        out,
        "iterate0 = {}",
        if o.iterate0 == InitialIterate::Identity { "identity" } else { "target" }
    );
    if let Some(w) = o.window {
        let _ = writeln!(out, "window = {}", write_list(&[w.lo, w.hi]));
    }
    if let Some(c) = &spec.candidate {
        let _ = writeln!(out, "candidate = {}", write_pieces(c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    const EX1: &str = "\
# example
form = multiplicative
exponents = [3/4, 1/4]
target = on (0,1]: 1
         on [1,e]: exp((1+log(x))*log(x)/2)
         on [e,inf): e
interval = [1, e]
delta = 2/3
M = 2
";

    #[test]
    fn parses_example_one() {
        let p = parse_problem(EX1).unwrap();
        assert_eq!(p.form, Form::Multiplicative);
        assert_eq!(p.exponents, vec![0.75, 0.25]);
        assert_eq!(p.interval, Interval::new(1.0, E).unwrap());
        assert_eq!(p.delta, Some(2.0 / 3.0));
        assert_eq!(p.m, Some(2.0));
        assert_eq!(p.target.eval(E).unwrap(), E);
        assert_eq!(p.target.pieces().len(), 3);
    }

    #[test]
    fn round_trip() {
        let mut p = parse_problem(EX1).unwrap();
        p.options.seeds = Some(vec![0.6, 0.1]);
        p.options.window = Some(Interval::new(0.5, 2.0 * E).unwrap());
        p.side = Some(Side::AtRight);
        p.candidate = Some(parse_expression("on (0,inf): x^(1/3)").unwrap());
        let text = write_problem(&p);
        assert_eq!(parse_problem(&text).unwrap(), p);
    }

    #[test]
    fn malformed_exponents_name_the_field() {
        let bad = EX1.replace("[3/4, 1/4]", "[3/4, ]");
        match parse_problem(&bad) {
            Err(Error::Schema { field, .. }) => assert_eq!(field, "exponents"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = EX1.replace("[3/4, 1/4]", "3/4, 1/4");
        assert!(matches!(parse_problem(&bad), Err(Error::Schema { field, .. }) if field == "exponents"));
    }

    #[test]
    fn missing_and_unknown_keys() {
        assert!(matches!(parse_problem("form = root\n"), Err(Error::Schema { .. })));
        let extra = format!("{EX1}colour = red\n");
        assert!(matches!(parse_problem(&extra), Err(Error::Schema { field, .. }) if field == "colour"));
    }

    #[test]
    fn io_error_is_reported() {
        assert!(matches!(load_problem("/nonexistent/x.problem"), Err(Error::Io { .. })));
    }

    #[test]
    fn overrides_replace_and_extend() {
        let o = vec![("grid".to_string(), "65".to_string()), ("window".to_string(), "[1, 2]".to_string())];
        let p = parse_problem_with(EX1, &o).unwrap();
        assert_eq!(p.options.grid, 65);
        assert_eq!(p.options.window, Some(Interval::new(1.0, 2.0).unwrap()));
        let bad = vec![("gird".to_string(), "65".to_string())];
        assert!(matches!(parse_problem_with(EX1, &bad), Err(Error::Schema { .. })));
    }
}
