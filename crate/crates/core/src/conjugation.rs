//! Changes of variables between equation forms.
//!
//! * `exp`/`log`: a map `g` on the positive half-line corresponds to
//!   `f = log ∘ g ∘ exp` on the line, turning products of iterates into sums.
//! * negation: `h(x) = -g(-x)` moves solutions from the positive to the
//!   negative half-line when the exponents are integers with odd sum.
//! * exponent normalization: divide the exponents by their sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Guard, Piece, PiecewiseExpr};
use crate::funcrep::{Evaluate, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugationKind {
    ExpLog,
    Negation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// `g` on the positive half-line to `log ∘ g ∘ exp` on the line.
pub fn conj_explog_fn(g: &GridFunction) -> Result<GridFunction> {
    if g.domain_lo() <= 0.0 {
        return Err(Error::NonPositiveValues(format!(
            "domain [{}, {}] is not inside (0, inf)",
            g.domain_lo(),
            g.domain_hi()
        )));
    }
    if let Some(v) = g.values().iter().find(|&&v| v <= 0.0) {
        return Err(Error::NonPositiveValues(format!("value {v}")));
    }
    GridFunction::new(
        g.knots().iter().map(|k| k.ln()).collect(),
        g.values().iter().map(|v| v.ln()).collect(),
        g.extension(),
    )
}

/// Inverse of [`conj_explog_fn`].
pub fn conj_explog_fn_back(f: &GridFunction) -> Result<GridFunction> {
    GridFunction::new(
        f.knots().iter().map(|k| k.exp()).collect(),
        f.values().iter().map(|v| v.exp()).collect(),
        f.extension(),
    )
}

pub fn conj_explog(g: &GridFunction, direction: Direction) -> Result<GridFunction> {
    match direction {
        Direction::Forward => conj_explog_fn(g),
        Direction::Backward => conj_explog_fn_back(g),
    }
}

/// Evaluates `exp(inner(log x))` for `x > 0`.
#[derive(Debug, Clone)]
pub struct ExpConjugate<E>(pub E);

impl<E: Evaluate> Evaluate for ExpConjugate<E> {
    fn eval(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(Error::OutOfDomain {
                x,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(self.0.eval(x.ln())?.exp())
    }
}

/// Evaluates `log(inner(exp x))`.
#[derive(Debug, Clone)]
pub struct LogConjugate<E>(pub E);

impl<E: Evaluate> Evaluate for LogConjugate<E> {
    fn eval(&self, x: f64) -> Result<f64> {
        let v = self.0.eval(x.exp())?;
        if v <= 0.0 {
            return Err(Error::NonPositiveValues(format!(
                "value {v} at {}",
                x.exp()
            )));
        }
        Ok(v.ln())
    }
}

/// Evaluates `-inner(-x)`.
#[derive(Debug, Clone)]
pub struct Mirror<E>(pub E);

impl<E: Evaluate> Evaluate for Mirror<E> {
    fn eval(&self, x: f64) -> Result<f64> {
        Ok(-self.0.eval(-x)?)
    }
}

fn log_bound(b: f64) -> f64 {
    if b <= 0.0 {
        f64::NEG_INFINITY
    } else {
        b.ln()
    }
}

/// `F(x) = log G(exp x)` at the expression level. Pieces are restricted to
/// the positive half-line first.
pub fn conj_explog_target(g: &PiecewiseExpr) -> Result<PiecewiseExpr> {
    let exp_x = Expr::Exp(Box::new(Expr::Var));
    let mut pieces = Vec::with_capacity(g.pieces().len());
    for p in g.pieces() {
        if p.guard.hi <= 0.0 {
            continue;
        }
        let lo = log_bound(p.guard.lo);
        let hi = log_bound(p.guard.hi);
        if let Expr::Const(c) = p.body {
            if c <= 0.0 {
                return Err(Error::MathDomain(format!("constant piece {c} is not positive")));
            }
        }
        let body = Expr::Log(Box::new(p.body.substitute(&exp_x))).simplify();
        pieces.push(Piece {
            guard: Guard {
                lo,
                hi,
                lo_closed: p.guard.lo_closed && lo.is_finite(),
                hi_closed: p.guard.hi_closed && hi.is_finite(),
            },
            body,
        });
    }
    if pieces.is_empty() {
        return Err(Error::MathDomain("no piece of the target meets (0, inf)".into()));
    }
    Ok(PiecewiseExpr::from_pieces_unchecked(pieces))
}

/// `G^(power)` piecewise, for target renormalization.
pub fn power_target(g: &PiecewiseExpr, power: f64) -> PiecewiseExpr {
    if power == 1.0 {
        return g.clone();
    }
    g.map_bodies(|b| Expr::Pow(Box::new(b.clone()), Box::new(Expr::Const(power))).simplify())
}

/// `H(x) = -G(-x)` at the expression level.
pub fn mirror_target(g: &PiecewiseExpr) -> PiecewiseExpr {
    let neg_x = Expr::Neg(Box::new(Expr::Var));
    let pieces = g
        .pieces()
        .iter()
        .rev()
        .map(|p| Piece {
            guard: Guard {
                lo: -p.guard.hi,
                hi: -p.guard.lo,
                lo_closed: p.guard.hi_closed,
                hi_closed: p.guard.lo_closed,
            },
            body: Expr::Neg(Box::new(p.body.substitute(&neg_x))).simplify(),
        })
        .collect();
    PiecewiseExpr::from_pieces_unchecked(pieces)
}

/// Exponents must all be integers with an odd sum.
pub fn check_negation_parity(exponents: &[f64]) -> Result<()> {
    if let Some(a) = exponents.iter().find(|a| a.fract() != 0.0 || !a.is_finite()) {
        return Err(Error::ParityViolation(format!(
            "exponent {a} is not an integer; products of iterates are multi-valued on the negative half-line"
        )));
    }
    let sum: f64 = exponents.iter().sum();
    if (sum as i64).rem_euclid(2) != 1 {
        return Err(Error::ParityViolation(format!("exponent sum {sum} is even")));
    }
    Ok(())
}

/// `h(x) = -g(-x)` on the mirrored domain.
pub fn conj_negation(g: &GridFunction, exponents: &[f64]) -> Result<GridFunction> {
    check_negation_parity(exponents)?;
    GridFunction::new(
        g.knots().iter().rev().map(|k| -k).collect(),
        g.values().iter().rev().map(|v| -v).collect(),
        g.extension(),
    )
}

/// Divides the exponents by their sum. Returns `(normalized, sum)`; the
/// caller must replace the target `G` by `G^(1/sum)`.
pub fn normalize_exponents(alpha: &[f64]) -> Result<(Vec<f64>, f64)> {
    let sum: f64 = alpha.iter().sum();
    if sum.abs() < 1e-15 {
        return Err(Error::ZeroSum);
    }
    if sum == 1.0 {
        return Ok((alpha.to_vec(), 1.0));
    }
    Ok((alpha.iter().map(|a| a / sum).collect(), sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::funcrep::{sup_norm_diff, Extension, Interval};
    use std::f64::consts::E;

    #[test]
    fn identity_conjugates_to_identity() {
        let g = GridFunction::identity(Interval::new(1.0, E).unwrap());
        let f = conj_explog_fn(&g).unwrap();
        assert_eq!(f.knots(), &[0.0, 1.0]);
        assert_eq!(f.values(), &[0.0, 1.0]);
    }

    #[test]
    fn example_one_target_conjugates_to_quadratic() {
        let g = parse_expression("on (0,1]: 1 ; on [1,e]: exp((1+log(x))*log(x)/2) ; on [e,inf): e").unwrap();
        let f = conj_explog_target(&g).unwrap();
        for &x in &[-2.0, 0.0, 0.25, 0.5, 1.0, 3.0] {
            let expect = if x <= 0.0 { 0.0 } else if x >= 1.0 { 1.0 } else { (x * x + x) / 2.0 };
            assert!((f.eval(x).unwrap() - expect).abs() < 1e-15, "x = {x}");
        }
        // grid route agrees
        let gs = g.sample(Interval::new(1.0, E).unwrap(), 1025, Extension::ClampToEndpointValues).unwrap();
        let fs = conj_explog_fn(&gs).unwrap();
        assert!((fs.eval(0.5).unwrap() - 0.375).abs() < 1e-6);
    }

    #[test]
    fn example_two_piece_becomes_linear() {
        let g = parse_expression("on (0,1]: 1 ; on [1,e]: x^(1/3) ; on [e,inf): exp(1/(3*log(x)))").unwrap();
        let f = conj_explog_target(&g).unwrap();
        assert_eq!(f.pieces()[1].body, Expr::Mul(Box::new(Expr::Const(1.0 / 3.0)), Box::new(Expr::Var)));
        assert!((f.eval(2.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(f.eval(-1.0).unwrap(), 0.0);
    }

    #[test]
    fn explog_round_trip() {
        let g = GridFunction::sample_uniform(Interval::new(1.0, E).unwrap(), 1025, |x| Ok(x.sqrt() * E.sqrt()), Extension::ClampToEndpointValues).unwrap();
        let back = conj_explog_fn_back(&conj_explog_fn(&g).unwrap()).unwrap();
        let probes = Interval::new(1.0, E).unwrap().linspace(333);
        assert!(sup_norm_diff(&g, &back, &probes).unwrap() <= 1e-12);
    }

    #[test]
    fn negation_cases() {
        let g = GridFunction::identity(Interval::new(1.0, 2.0).unwrap());
        let h = conj_negation(&g, &[1.0]).unwrap();
        assert_eq!(h.knots(), &[-2.0, -1.0]);
        assert_eq!(h.values(), &[-2.0, -1.0]);
        assert!(matches!(conj_negation(&g, &[0.75, 0.25]), Err(Error::ParityViolation(_))));
        assert!(matches!(conj_negation(&g, &[2.0, 2.0]), Err(Error::ParityViolation(_))));
        assert!(conj_negation(&g, &[6.0, 3.0]).is_ok());
        assert!(conj_negation(&g, &[-2.0, 3.0]).is_ok());
    }

    #[test]
    fn negation_is_an_involution() {
        let g = GridFunction::sample_uniform(Interval::new(1.0, 2.0).unwrap(), 65, |x| Ok(x * x / 2.0 + 0.5), Extension::ClampToEndpointValues).unwrap();
        let twice = conj_negation(&conj_negation(&g, &[1.0]).unwrap(), &[1.0]).unwrap();
        assert_eq!(twice, g);
    }

    #[test]
    fn normalization_cases() {
        assert_eq!(normalize_exponents(&[0.75, 0.25]).unwrap(), (vec![0.75, 0.25], 1.0));
        let (a, s) = normalize_exponents(&[6.0, 3.0]).unwrap();
        assert_eq!(s, 9.0);
        assert!((a[0] - 2.0 / 3.0).abs() < 1e-16 && (a[1] - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(normalize_exponents(&[-2.0, 3.0]).unwrap(), (vec![-2.0, 3.0], 1.0));
        assert!(matches!(normalize_exponents(&[1.0, -1.0]), Err(Error::ZeroSum)));
    }

    #[test]
    fn mirror_target_matches_definition() {
        let g = parse_expression("on (0,1]: 1 ; on [1,2]: x^3 ; on [2,inf): (7*x+2)/x").unwrap();
        let h = mirror_target(&g);
        for &x in &[-0.5, -1.5, -2.0, -5.0] {
            assert!((h.eval(x).unwrap() + g.eval(-x).unwrap()).abs() < 1e-14);
        }
    }
}
