//! Membership certificates for the function classes used by the solvers.
//!
//! Every check works on knot pairs of a piecewise-linear candidate, which is
//! exact for such functions: difference quotients between arbitrary points
//! are convex combinations of the consecutive-knot slopes, and the sign
//! conditions involve piecewise-linear expressions whose sign on a segment is
//! decided at its ends.

use serde::{Deserialize, Serialize};

use crate::conjugation::conj_explog_fn;
use crate::error::{Error, Result};
use crate::funcrep::{GridFunction, Interval};

/// Tolerance for endpoint equalities such as `f(a) = a`.
pub const ENDPOINT_TOL: f64 = 1e-10;
/// Tolerance on difference quotients in the Lipschitz-type inequalities.
pub const SLOPE_TOL: f64 = 1e-9;
/// Relative margin for the strict sign conditions.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Witness lists are truncated to this many entries.
pub const MAX_WITNESSES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    /// `F_I(delta, M)` on the line.
    #[serde(rename = "F_I")]
    FI,
    /// `G_J(delta, M)` on the positive half-line.
    #[serde(rename = "G_J")]
    GJ,
    /// `R_{zeta,lambda}` sign classes on the line.
    #[serde(rename = "R_zeta_lambda")]
    R,
    /// `S_{eta,lambda}` sign classes on the positive half-line.
    #[serde(rename = "S_eta_lambda")]
    S,
    /// `A_lambda` endpoint classes on the line.
    #[serde(rename = "A_lambda")]
    A,
    /// `B_lambda` endpoint classes on the positive half-line.
    #[serde(rename = "B_lambda")]
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub kind: ClassKind,
    pub interval: Interval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Member,
    NotMember,
    /// The class itself is empty for these parameters.
    Degenerate,
}

/// Outcome of the degeneracy rule for `(delta, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    Empty,
    IdentityOnly,
    Proper,
}

/// A violated condition found while probing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    pub condition: String,
    pub value: f64,
    pub bound: f64,
    /// Set when the violation is within the strictness margin.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCertificate {
    pub spec: ClassSpec,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degeneracy: Option<Degeneracy>,
    pub witnesses: Vec<Witness>,
    /// Violations found, before truncation of `witnesses`.
    pub violations: usize,
    pub probes: usize,
}

impl ClassCertificate {
    pub fn is_member(&self) -> bool {
        self.verdict == Verdict::Member
    }

    fn from_witnesses(spec: ClassSpec, witnesses: Vec<Witness>, probes: usize) -> Self {
        let violations = witnesses.len();
        let verdict = if violations == 0 {
            Verdict::Member
        } else {
            Verdict::NotMember
        };
        let mut witnesses = witnesses;
        witnesses.truncate(MAX_WITNESSES);
        ClassCertificate {
            spec,
            verdict,
            degeneracy: None,
            witnesses,
            violations,
            probes,
        }
    }

    /// One-line summary suitable for warnings.
    pub fn summary(&self) -> String {
        match (self.verdict, self.witnesses.first()) {
            (Verdict::Member, _) => format!("{:?}: member", self.spec.kind),
            (v, Some(w)) => format!(
                "{:?}: {:?}; first witness at x = {} ({}: {} vs {})",
                self.spec.kind, v, w.x, w.condition, w.value, w.bound
            ),
            (v, None) => format!("{:?}: {:?}", self.spec.kind, v),
        }
    }
}

pub fn degenerate_rule(delta: f64, m: f64) -> Degeneracy {
    if m < 1.0 || delta > 1.0 {
        Degeneracy::Empty
    } else if m == 1.0 || delta == 1.0 {
        Degeneracy::IdentityOnly
    } else {
        Degeneracy::Proper
    }
}

/// Points of `f`'s grid inside `interval`, with the interval ends added.
fn restricted_points(f: &GridFunction, interval: Interval) -> Result<Vec<(f64, f64)>> {
    let mut pts = Vec::with_capacity(f.len() + 2);
    pts.push((interval.lo, f.eval(interval.lo)?));
    for (&k, &v) in f.knots().iter().zip(f.values()) {
        if k > interval.lo && k < interval.hi {
            pts.push((k, v));
        }
    }
    pts.push((interval.hi, f.eval(interval.hi)?));
    Ok(pts)
}

fn endpoint_witness(x: f64, value: f64, expected: f64, condition: &str) -> Option<Witness> {
    ((value - expected).abs() > ENDPOINT_TOL * expected.abs().max(1.0)).then(|| Witness {
        x,
        y: None,
        condition: condition.to_string(),
        value,
        bound: expected,
        boundary: false,
    })
}

/// Membership in `F_I(delta, M)`: fixed endpoints, range `I` under the
/// clamp extension, and `delta (x-y) <= f(x)-f(y) <= M (x-y)` on `I`.
pub fn check_f_class(f: &GridFunction, delta: f64, m: f64, interval: Interval) -> Result<ClassCertificate> {
    let spec = ClassSpec {
        kind: ClassKind::FI,
        interval,
        delta: Some(delta),
        m: Some(m),
        lambda: None,
        anchor: None,
    };
    if delta < 0.0 || m < 0.0 {
        return Err(Error::ClassParameter(format!("delta = {delta}, M = {m} must be nonnegative")));
    }
    let degeneracy = degenerate_rule(delta, m);
    if degeneracy == Degeneracy::Empty {
        return Ok(ClassCertificate {
            spec,
            verdict: Verdict::Degenerate,
            degeneracy: Some(degeneracy),
            witnesses: vec![Witness {
                x: interval.lo,
                y: None,
                condition: if m < 1.0 { "class empty: M < 1" } else { "class empty: delta > 1" }.into(),
                value: if m < 1.0 { m } else { delta },
                bound: 1.0,
                boundary: false,
            }],
            violations: 1,
            probes: 0,
        });
    }

    let pts = restricted_points(f, interval)?;
    let mut witnesses = Vec::new();
    let (a, b) = (interval.lo, interval.hi);
    witnesses.extend(endpoint_witness(a, pts[0].1, a, "f(a) = a"));
    witnesses.extend(endpoint_witness(b, pts[pts.len() - 1].1, b, "f(b) = b"));

    let span = f.value_span();
    let tol = ENDPOINT_TOL * a.abs().max(b.abs()).max(1.0);
    if span.lo < a - tol {
        witnesses.push(Witness { x: f.domain_lo(), y: None, condition: "range inside I (below a)".into(), value: span.lo, bound: a, boundary: false });
    }
    if span.hi > b + tol {
        witnesses.push(Witness { x: f.domain_hi(), y: None, condition: "range inside I (above b)".into(), value: span.hi, bound: b, boundary: false });
    }

    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let slope = (y1 - y0) / (x1 - x0);
        if slope < delta - SLOPE_TOL {
            witnesses.push(Witness { x: x0, y: Some(x1), condition: "delta (x-y) <= f(x)-f(y)".into(), value: slope, bound: delta, boundary: false });
        } else if slope > m + SLOPE_TOL {
            witnesses.push(Witness { x: x0, y: Some(x1), condition: "f(x)-f(y) <= M (x-y)".into(), value: slope, bound: m, boundary: false });
        }
    }
    let mut cert = ClassCertificate::from_witnesses(spec, witnesses, pts.len());
    cert.degeneracy = Some(degeneracy);
    Ok(cert)
}

/// Membership in `G_J(delta, M)`, decided in log coordinates where the
/// multiplicative bounds become additive ones.
pub fn check_g_class(g: &GridFunction, delta: f64, m: f64, j: Interval) -> Result<ClassCertificate> {
    let i = j.ln()?;
    let f = conj_explog_fn(g)?;
    let mut cert = check_f_class(&f, delta, m, i)?;
    cert.spec.kind = ClassKind::GJ;
    cert.spec.interval = j;
    for w in &mut cert.witnesses {
        w.x = w.x.exp();
        w.y = w.y.map(f64::exp);
        w.condition = w
            .condition
            .replace("f(a) = a", "g(c) = c")
            .replace("f(b) = b", "g(d) = d")
            .replace("range inside I", "range inside J");
    }
    Ok(cert)
}

fn check_strictly_increasing(pts: &[(f64, f64)], witnesses: &mut Vec<Witness>) {
    for w in pts.windows(2) {
        if w[1].1 <= w[0].1 {
            witnesses.push(Witness {
                x: w[0].0,
                y: Some(w[1].0),
                condition: "strictly increasing".into(),
                value: w[1].1 - w[0].1,
                bound: 0.0,
                boundary: w[1].1 == w[0].1,
            });
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::ClassParameter(format!(
            "lambda = {lambda} must lie in [0, 1); for lambda >= 1 the sign classes can be empty"
        )));
    }
    Ok(())
}

/// Membership in `R_{zeta,lambda}` on `interval`:
/// strictly increasing, `(f(x) - (1-lambda) x)(zeta - x) > 0` and
/// `(f(x) - (1-lambda) zeta)(zeta - x) < 0` for `x != zeta`.
pub fn check_r_class(f: &GridFunction, anchor: f64, lambda: f64, interval: Interval) -> Result<ClassCertificate> {
    check_lambda(lambda)?;
    let slack = 1e-12 * interval.width();
    if anchor < interval.lo - slack || anchor > interval.hi + slack {
        return Err(Error::ClassParameter(format!(
            "anchor {anchor} outside [{}, {}]",
            interval.lo, interval.hi
        )));
    }
    let spec = ClassSpec {
        kind: ClassKind::R,
        interval,
        delta: None,
        m: None,
        lambda: Some(lambda),
        anchor: Some(anchor),
    };
    let mut pts = restricted_points(f, interval)?;
    if anchor > interval.lo && anchor < interval.hi && !pts.iter().any(|p| p.0 == anchor) {
        let idx = pts.partition_point(|p| p.0 < anchor);
        pts.insert(idx, (anchor, f.eval(anchor)?));
    }
    let mut witnesses = Vec::new();
    check_strictly_increasing(&pts, &mut witnesses);
    let c = 1.0 - lambda;
    for &(x, y) in &pts {
        let d = anchor - x;
        if d.abs() <= slack {
            continue;
        }
        let margin = STRICT_MARGIN * d * d;
        let p1 = (y - c * x) * d;
        if p1 <= margin {
            witnesses.push(Witness {
                x,
                y: None,
                condition: "(f(x) - (1-lambda) x)(zeta - x) > 0".into(),
                value: p1,
                bound: 0.0,
                boundary: p1.abs() <= margin,
            });
        }
        let p2 = (y - c * anchor) * d;
        if p2 >= -margin {
            witnesses.push(Witness {
                x,
                y: None,
                condition: "(f(x) - (1-lambda) zeta)(zeta - x) < 0".into(),
                value: p2,
                bound: 0.0,
                boundary: p2.abs() <= margin,
            });
        }
    }
    Ok(ClassCertificate::from_witnesses(spec, witnesses, pts.len()))
}

/// Membership in `S_{eta,lambda}`, decided as `R_{log eta, lambda}` in log
/// coordinates.
pub fn check_s_class(g: &GridFunction, anchor: f64, lambda: f64, j: Interval) -> Result<ClassCertificate> {
    check_lambda(lambda)?;
    if anchor <= 0.0 {
        return Err(Error::NonPositiveValues(format!("anchor {anchor}")));
    }
    let f = conj_explog_fn(g)?;
    let mut cert = check_r_class(&f, anchor.ln(), lambda, j.ln()?)?;
    cert.spec.kind = ClassKind::S;
    cert.spec.interval = j;
    cert.spec.anchor = Some(anchor);
    for w in &mut cert.witnesses {
        w.x = w.x.exp();
        w.y = w.y.map(f64::exp);
    }
    Ok(cert)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignClass {
    R,
    S,
}

/// Dispatches to [`check_r_class`] or [`check_s_class`].
pub fn check_rs_class(f: &GridFunction, anchor: f64, lambda: f64, interval: Interval, which: SignClass) -> Result<ClassCertificate> {
    match which {
        SignClass::R => check_r_class(f, anchor, lambda, interval),
        SignClass::S => check_s_class(f, anchor, lambda, interval),
    }
}

/// Membership in `A_lambda` (`f(a) = lambda a`, `f(b) = lambda b`) or
/// `B_lambda` (`g(c) = c^lambda`, `g(d) = d^lambda`), plus strict
/// monotonicity on the interval.
pub fn check_ab_class(f: &GridFunction, lambda: f64, interval: Interval, kind: ClassKind) -> Result<ClassCertificate> {
    let (lo_target, hi_target, names) = match kind {
        ClassKind::A => (lambda * interval.lo, lambda * interval.hi, ["f(a) = lambda a", "f(b) = lambda b"]),
        ClassKind::B => {
            if interval.lo <= 0.0 {
                return Err(Error::NonPositiveValues(format!("interval starts at {}", interval.lo)));
            }
            (interval.lo.powf(lambda), interval.hi.powf(lambda), ["g(c) = c^lambda", "g(d) = d^lambda"])
        }
        other => return Err(Error::ClassParameter(format!("{other:?} is not an endpoint class"))),
    };
    let spec = ClassSpec {
        kind,
        interval,
        delta: None,
        m: None,
        lambda: Some(lambda),
        anchor: None,
    };
    let pts = restricted_points(f, interval)?;
    let mut witnesses = Vec::new();
    check_strictly_increasing(&pts, &mut witnesses);
    witnesses.extend(endpoint_witness(interval.lo, pts[0].1, lo_target, names[0]));
    witnesses.extend(endpoint_witness(interval.hi, pts[pts.len() - 1].1, hi_target, names[1]));
    Ok(ClassCertificate::from_witnesses(spec, witnesses, pts.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::funcrep::{Extension, DEFAULT_GRID};
    use std::f64::consts::E;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn sampled(f: impl Fn(f64) -> f64, interval: Interval, n: usize) -> GridFunction {
        GridFunction::sample_uniform(interval, n, |x| Ok(f(x)), Extension::ClampToEndpointValues).unwrap()
    }

    #[test]
    fn identity_is_member_and_nesting_holds() {
        let id = GridFunction::identity(unit());
        assert!(check_f_class(&id, 1.0, 1.0, unit()).unwrap().is_member());
        assert!(check_f_class(&id, 0.5, 2.0, unit()).unwrap().is_member());
    }

    #[test]
    fn square_fails_lower_slope_near_zero() {
        let sq = sampled(|x| x * x, unit(), DEFAULT_GRID);
        let cert = check_f_class(&sq, 0.5, 2.0, unit()).unwrap();
        assert_eq!(cert.verdict, Verdict::NotMember);
        let w = &cert.witnesses[0];
        assert!(w.x < 0.25, "witness at {}", w.x);
        assert!(w.condition.starts_with("delta"));
    }

    #[test]
    fn degeneracy_table() {
        assert_eq!(degenerate_rule(0.5, 0.9), Degeneracy::Empty);
        assert_eq!(degenerate_rule(1.0, 3.0), Degeneracy::IdentityOnly);
        assert_eq!(degenerate_rule(0.5, 2.0), Degeneracy::Proper);
        assert_eq!(degenerate_rule(2.0, 2.0), Degeneracy::Empty);
    }

    #[test]
    fn g_class_cases() {
        let j = Interval::new(1.0, E).unwrap();
        let id = GridFunction::identity(j);
        assert!(check_g_class(&id, 1.0, 1.0, j).unwrap().is_member());

        let sq = sampled(|x| x * x, j, 65);
        let cert = check_g_class(&sq, 2.0, 2.0, j).unwrap();
        assert_eq!(cert.verdict, Verdict::Degenerate);
        assert_eq!(cert.degeneracy, Some(Degeneracy::Empty));
        assert!(!cert.witnesses.is_empty());

        let bad = GridFunction::identity(Interval::new(-1.0, 1.0).unwrap());
        assert!(check_g_class(&bad, 0.5, 2.0, Interval::new(-1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn example_two_lcp_target_is_in_sign_class() {
        let h = parse_expression("on (-inf,0]: 0 ; on [0,1]: x/9 ; on [1,inf): 1/(9*x)").unwrap();
        let hs = h.sample(unit(), DEFAULT_GRID, Extension::ClampToEndpointValues).unwrap();
        assert!(check_r_class(&hs, 0.0, 2.0 / 3.0, unit()).unwrap().is_member());
    }

    #[test]
    fn sign_class_boundary_case() {
        let lambda = 0.25;
        let line = sampled(|x| (1.0 - lambda) * x, unit(), 33);
        let left = check_r_class(&line, 0.0, lambda, unit()).unwrap();
        let right = check_r_class(&line, 1.0, lambda, unit()).unwrap();
        assert_eq!(left.verdict, Verdict::NotMember);
        assert_eq!(right.verdict, Verdict::NotMember);
        assert!(left.witnesses.iter().any(|w| w.boundary));
    }

    #[test]
    fn sign_class_rejects_large_lambda() {
        let g = GridFunction::identity(Interval::new(1.0, 2.0).unwrap());
        assert!(matches!(
            check_s_class(&g, 1.0, 3.0, Interval::new(1.0, 2.0).unwrap()),
            Err(Error::ClassParameter(_))
        ));
    }

    #[test]
    fn endpoint_classes() {
        let g3 = parse_expression("on (0,1]: 1 ; on [1,2]: x^3 ; on [2,inf): (7*x+2)/x").unwrap();
        let j = Interval::new(1.0, 2.0).unwrap();
        let gs = g3.sample(j, 257, Extension::ClampToEndpointValues).unwrap();
        assert!(check_ab_class(&gs, 3.0, j, ClassKind::B).unwrap().is_member());

        let id = GridFunction::identity(Interval::new(-2.0, 5.0).unwrap());
        assert!(check_ab_class(&id, 1.0, Interval::new(-2.0, 5.0).unwrap(), ClassKind::A).unwrap().is_member());

        let idj = GridFunction::identity(j);
        let cert = check_ab_class(&idj, 3.0, j, ClassKind::B).unwrap();
        assert_eq!(cert.verdict, Verdict::NotMember);
        assert_eq!(cert.witnesses[0].x, 2.0);
    }
}
