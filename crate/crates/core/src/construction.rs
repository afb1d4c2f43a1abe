//! Piecewise construction of solutions of
//! `f^n = lambda_1 f + ... + lambda_{n-1} f^{n-1} + F` for `lambda in [0, 1)`.
//!
//! Starting from `x_0` and seeds `x_1 > ... > x_{n-1}` the anchor sequence
//! `x_{n+m} = sum_j lambda_j x_{j+m} + F(x_m)` decreases to the anchor `a`.
//! The solution maps `[x_m, x_{m-1}]` onto `[x_{m+1}, x_m]`; the first `n-1`
//! pieces are free homeomorphisms and the rest follow from the equation.
//!
//! Every piece carries the same number of knots and the knots of `f_m` are
//! the values of `f_{m-1}`, so the inverses in the recursion are index
//! lookups.
//!
//! The right-anchored variant is obtained by reflecting `x -> -x`.

use serde::{Deserialize, Serialize};

use crate::classes::{check_ab_class, check_r_class, ClassCertificate, ClassKind};
use crate::conjugation::{ExpConjugate, LogConjugate};
use crate::error::{Error, Result};
use crate::funcrep::{iterate_at, linspace, Evaluate, Extension, GridFunction, Interval, Target};

/// Distance to the anchor below which the sequence is truncated.
pub const DEFAULT_EPS_SEQ: f64 = 1e-8;
/// Knots per piece.
pub const DEFAULT_PIECE_KNOTS: usize = 1025;
/// Cap on the number of sequence terms.
pub const DEFAULT_MAX_TERMS: usize = 100_000;
/// Points per seed coordinate in the default seed search.
pub const DEFAULT_SEED_MESH: usize = 24;
/// Ratio of the geometric seed mesh.
pub const SEED_MESH_RATIO: f64 = 0.85;
/// Tolerance on piece endpoints and seams.
pub const SEAM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Fixed point at the left end `a`; sequence decreasing.
    AtLeft,
    /// Fixed point at the right end `b`; sequence increasing.
    AtRight,
}

/// Increasing homeomorphism of `[0, 1]` used for the free initial pieces.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Linear,
    /// `t + c t (1 - t)` with `|c| < 1`.
    Bend(f64),
    /// `t^p` with `p > 0`.
    Power(f64),
    /// Tabulated shape with `phi(0) = 0`, `phi(1) = 1`.
    Table(GridFunction),
}

impl Shape {
    pub fn parse(text: &str) -> Result<Shape> {
        let t = text.trim();
        let (name, arg) = match t.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (t, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::schema("initial", format!("`{name}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::schema("initial", format!("`{t}`: {e}")))
        };
        let shape = match name {
            "linear" => Shape::Linear,
            "bend" => Shape::Bend(num(arg)?),
            "power" => Shape::Power(num(arg)?),
            _ => return Err(Error::schema("initial", format!("unknown piece shape `{t}`"))),
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Linear => Ok(()),
            Shape::Bend(c) if c.abs() < 1.0 => Ok(()),
            Shape::Bend(c) => Err(Error::schema("initial", format!("bend parameter {c} must satisfy |c| < 1"))),
            Shape::Power(p) if *p > 0.0 && p.is_finite() => Ok(()),
            Shape::Power(p) => Err(Error::schema("initial", format!("power {p} must be positive"))),
            Shape::Table(g) => {
                let ok = g.is_monotone()
                    && g.values().windows(2).all(|w| w[1] > w[0])
                    && g.domain_lo() == 0.0
                    && g.domain_hi() == 1.0
                    && g.first_value().abs() <= SEAM_TOL
                    && (g.last_value() - 1.0).abs() <= SEAM_TOL;
                if ok {
                    Ok(())
                } else {
                    Err(Error::schema("initial", "tabulated shape must increase strictly from (0,0) to (1,1)"))
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(match self {
            Shape::Linear => t,
            Shape::Bend(c) => t + c * t * (1.0 - t),
            Shape::Power(p) => t.powf(*p),
            Shape::Table(g) => g.eval(t)?,
        })
    }

    /// `1 - phi(1 - t)`, the shape seen after reflecting both axes.
    pub fn reflected(&self) -> Shape {
        match self {
            Shape::Linear => Shape::Linear,
            Shape::Bend(c) => Shape::Bend(-c),
            Shape::Power(_) | Shape::Table(_) => {
                let knots = linspace(0.0, 1.0, DEFAULT_PIECE_KNOTS);
                let values = knots.iter().map(|&t| 1.0 - self.eval(1.0 - t).unwrap_or(t)).collect();
                Shape::Table(GridFunction::new(knots, values, Extension::ClampToEndpointValues).expect("reflected shape"))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Shape::Linear => "linear".into(),
            Shape::Bend(c) => format!("bend:{c}"),
            Shape::Power(p) => format!("power:{p}"),
            Shape::Table(g) => format!("table({} knots)", g.len()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SewingPlan {
    /// `lambda_1 .. lambda_{n-1}`; `n` is one more than the length.
    pub lambdas: Vec<f64>,
    pub side: Side,
    /// Core interval `I = [a, b]`.
    pub interval: Interval,
    /// Start of the sequence; defaults to the end opposite the anchor.
    pub x0: Option<f64>,
    pub seeds: Option<Vec<f64>>,
    /// Shapes of the initial pieces; a single entry is reused for all.
    pub shapes: Vec<Shape>,
    pub piece_knots: usize,
    pub eps_seq: f64,
    pub max_terms: usize,
    pub seed_mesh: usize,
}

impl SewingPlan {
    pub fn new(lambdas: Vec<f64>, side: Side, interval: Interval) -> Self {
        SewingPlan {
            lambdas,
            side,
            interval,
            x0: None,
            seeds: None,
            shapes: vec![Shape::Linear],
            piece_knots: DEFAULT_PIECE_KNOTS,
            eps_seq: DEFAULT_EPS_SEQ,
            max_terms: DEFAULT_MAX_TERMS,
            seed_mesh: DEFAULT_SEED_MESH,
        }
    }

    pub fn order(&self) -> usize {
        self.lambdas.len() + 1
    }

    pub fn lambda(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    pub fn anchor(&self) -> f64 {
        match self.side {
            Side::AtLeft => self.interval.lo,
            Side::AtRight => self.interval.hi,
        }
    }

    pub fn start(&self) -> f64 {
        self.x0.unwrap_or(match self.side {
            Side::AtLeft => self.interval.hi,
            Side::AtRight => self.interval.lo,
        })
    }

    fn validate(&self) -> Result<()> {
        let lambda = self.lambda();
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::hypothesis(format!(
                "the construction needs lambda = sum lambda_k in [0, 1), got {lambda}"
            )));
        }
        if self.shapes.is_empty() {
            return Err(Error::schema("initial", "at least one piece shape is required"));
        }
        for s in &self.shapes {
            s.validate()?;
        }
        if self.piece_knots < 2 {
            return Err(Error::schema("grid", "pieces need at least two knots"));
        }
        if !(self.eps_seq > 0.0) {
            return Err(Error::schema("eps_seq", "must be positive"));
        }
        let (a, b, x0) = (self.interval.lo, self.interval.hi, self.start());
        let ok = match self.side {
            Side::AtLeft => x0 > a && x0 <= b,
            Side::AtRight => x0 >= a && x0 < b,
        };
        if !ok {
            return Err(Error::schema("x0", format!("x0 = {x0} must lie in the half-open core away from the anchor")));
        }
        Ok(())
    }

    /// The same problem seen through `x -> -x`, which swaps the sides.
    fn reflected(&self) -> SewingPlan {
        SewingPlan {
            lambdas: self.lambdas.clone(),
            side: match self.side {
                Side::AtLeft => Side::AtRight,
                Side::AtRight => Side::AtLeft,
            },
            interval: self.interval.negated(),
            x0: Some(-self.start()),
            seeds: self.seeds.as_ref().map(|s| s.iter().map(|v| -v).collect()),
            shapes: self.shapes.iter().map(Shape::reflected).collect(),
            ..self.clone()
        }
    }

    fn shape(&self, j: usize) -> &Shape {
        &self.shapes[j.min(self.shapes.len() - 1)]
    }
}

/// `-F(-x)`.
struct Reflect<'a>(&'a dyn Evaluate);

impl Evaluate for Reflect<'_> {
    fn eval(&self, x: f64) -> Result<f64> {
        Ok(-self.0.eval(-x)?)
    }
}

fn recursion_term(lambdas: &[f64], later: impl Fn(usize) -> f64, f_first: f64) -> f64 {
    let mut acc = 0.0;
    for (j, &l) in lambdas.iter().enumerate() {
        acc += l * later(j + 1);
    }
    acc + f_first
}

/// Sequence for a left-anchored plan.
fn sequence_left(plan: &SewingPlan, f: &dyn Evaluate, seeds: &[f64], max_terms: usize, require_anchor: bool) -> Result<Vec<f64>> {
    let n = plan.order();
    let a = plan.interval.lo;
    let x0 = plan.start();
    if seeds.len() != n - 1 {
        return Err(Error::schema("seeds", format!("{} seeds given, {} required", seeds.len(), n - 1)));
    }
    let mut xs = Vec::with_capacity(64);
    xs.push(x0);
    for (i, &s) in seeds.iter().enumerate() {
        let prev = xs[xs.len() - 1];
        if !(s > a && s < prev) {
            return Err(Error::SeedRejected {
                index: i + 1,
                message: format!("seed x_{} = {s} must lie in ({a}, {prev})", i + 1),
            });
        }
        xs.push(s);
    }
    while xs[xs.len() - 1] - a > plan.eps_seq {
        if xs.len() >= max_terms {
            if require_anchor {
                return Err(Error::AnchorNotApproached {
                    terms: xs.len(),
                    distance: xs[xs.len() - 1] - a,
                });
            }
            break;
        }
        let m = xs.len() - n;
        let next = recursion_term(&plan.lambdas, |j| xs[j + m], f.eval(xs[m])?);
        let prev = xs[xs.len() - 1];
        if !(next > a && next < prev) {
            return Err(Error::SeedRejected {
                index: xs.len(),
                message: format!("x_{} = {next} leaves ({a}, {prev})", xs.len()),
            });
        }
        xs.push(next);
    }
    Ok(xs)
}

/// The anchor sequence `x_0, x_1, ...` until it is within `eps_seq` of the
/// anchor.
pub fn generate_sequence(plan: &SewingPlan, f: &dyn Evaluate, seeds: &[f64], max_terms: usize) -> Result<Vec<f64>> {
    plan.validate()?;
    match plan.side {
        Side::AtLeft => sequence_left(plan, f, seeds, max_terms, true),
        Side::AtRight => {
            let r = plan.reflected();
            let neg: Vec<f64> = seeds.iter().map(|v| -v).collect();
            let xs = sequence_left(&r, &Reflect(f), &neg, max_terms, true)?;
            Ok(xs.into_iter().map(|v| -v).collect())
        }
    }
}

fn seeds_left(plan: &SewingPlan, f: &dyn Evaluate) -> Result<Vec<f64>> {
    let n = plan.order();
    let (a, x0) = (plan.interval.lo, plan.start());
    let mesh: Vec<f64> = (1..=plan.seed_mesh.max(1))
        .map(|i| a + (x0 - a) * SEED_MESH_RATIO.powi(i as i32))
        .collect();
    let depth = 5 * n;
    let mut idx = vec![0usize; n - 1];
    // strictly increasing mesh indices give strictly decreasing seeds
    for (i, v) in idx.iter_mut().enumerate() {
        *v = i;
    }
    if idx.last().copied().unwrap_or(0) >= mesh.len() {
        return Err(Error::NoValidSeeds { mesh: mesh.len() });
    }
    loop {
        let seeds: Vec<f64> = idx.iter().map(|&i| mesh[i]).collect();
        if sequence_left(plan, f, &seeds, depth.max(n + 1), false).is_ok() {
            return Ok(seeds);
        }
        // next strictly increasing index tuple
        let k = idx.len();
        let mut pos = k;
        loop {
            if pos == 0 {
                return Err(Error::NoValidSeeds { mesh: mesh.len() });
            }
            pos -= 1;
            if idx[pos] < mesh.len() - (k - pos) {
                idx[pos] += 1;
                for q in pos + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
        }
    }
}

/// First seed tuple on a geometric mesh toward the anchor whose sequence
/// stays admissible for `5 n` terms.
pub fn default_seeds(plan: &SewingPlan, f: &dyn Evaluate) -> Result<Vec<f64>> {
    plan.validate()?;
    match plan.side {
        Side::AtLeft => seeds_left(plan, f),
        Side::AtRight => Ok(seeds_left(&plan.reflected(), &Reflect(f))?.into_iter().map(|v| -v).collect()),
    }
}

/// Summary of a construction, without the piece data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SewingSummary {
    pub order: usize,
    pub lambdas: Vec<f64>,
    pub side: Side,
    pub anchor: f64,
    pub seeds: Vec<f64>,
    pub shapes: Vec<String>,
    pub sequence: Vec<f64>,
    pub pieces: usize,
    pub knots_per_piece: usize,
    pub eps_seq: f64,
    pub refined: bool,
}

/// Solution on the core interval, assembled from pieces.
#[derive(Debug, Clone)]
pub struct SewnSolution {
    /// Left-anchored data; reflected back on evaluation when `mirrored`.
    xs: Vec<f64>,
    pieces: Vec<GridFunction>,
    anchor: f64,
    mirrored: bool,
    summary: SewingSummary,
}

impl SewnSolution {
    pub fn summary(&self) -> &SewingSummary {
        &self.summary
    }

    /// The anchor sequence in original coordinates.
    pub fn sequence(&self) -> Vec<f64> {
        self.summary.sequence.clone()
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    /// Piece `m` (1-based) and its domain in original coordinates.
    pub fn piece(&self, m: usize) -> Option<(Interval, GridFunction)> {
        let p = self.pieces.get(m.checked_sub(1)?)?;
        if !self.mirrored {
            return Some((p.domain(), p.clone()));
        }
        let knots: Vec<f64> = p.knots().iter().rev().map(|v| -v).collect();
        let values: Vec<f64> = p.values().iter().rev().map(|v| -v).collect();
        let g = GridFunction::new(knots, values, Extension::Undefined).ok()?;
        Some((g.domain(), g))
    }

    /// Closed core `[a, x_0]` (or `[x_0, b]`).
    pub fn core(&self) -> Interval {
        let (lo, hi) = (self.anchor, self.xs[0]);
        if self.mirrored {
            Interval { lo: -hi, hi: -lo }
        } else {
            Interval { lo, hi }
        }
    }

    pub fn anchor(&self) -> f64 {
        if self.mirrored {
            -self.anchor
        } else {
            self.anchor
        }
    }

    fn eval_left(&self, x: f64) -> Result<f64> {
        let a = self.anchor;
        let x0 = self.xs[0];
        let slack = 1e-12 * a.abs().max(x0.abs()).max(1.0);
        if !(x >= a - slack && x <= x0 + slack) {
            return Err(Error::OutOfDomain { x, lo: a, hi: x0 });
        }
        let x = x.clamp(a, x0);
        let last = self.pieces.len();
        // closure on [a, x_{last}]
        let edge = self.xs[last];
        if x <= edge {
            let target = self.xs[last + 1];
            return Ok(a + (x - a) * ((target - a) / (edge - a)));
        }
        let idx = self.xs.partition_point(|&v| v > x).max(1);
        self.pieces[idx - 1].eval(x)
    }

    /// Resamples the solution onto one grid function over the core.
    pub fn to_grid(&self) -> Result<GridFunction> {
        let mut knots = vec![self.anchor];
        let mut values = vec![self.anchor];
        for p in self.pieces.iter().rev() {
            for (&k, &v) in p.knots().iter().zip(p.values()) {
                if k > knots[knots.len() - 1] {
                    knots.push(k);
                    values.push(v);
                }
            }
        }
        if self.mirrored {
            let k: Vec<f64> = knots.iter().rev().map(|v| -v).collect();
            let v: Vec<f64> = values.iter().rev().map(|v| -v).collect();
            GridFunction::new(k, v, Extension::ClampToEndpointValues)
        } else {
            GridFunction::new(knots, values, Extension::ClampToEndpointValues)
        }
    }
}

impl Evaluate for SewnSolution {
    fn eval(&self, x: f64) -> Result<f64> {
        if self.mirrored {
            Ok(-self.eval_left(-x)?)
        } else {
            self.eval_left(x)
        }
    }
}

fn initial_piece(plan: &SewingPlan, xs: &[f64], j: usize, knots: usize) -> Result<GridFunction> {
    let (lo, hi) = (xs[j], xs[j - 1]);
    let (vlo, vhi) = (xs[j + 1], xs[j]);
    let shape = plan.shape(j - 1);
    let mut ks = linspace(lo, hi, knots);
    ks[0] = lo;
    ks[knots - 1] = hi;
    let mut vs = Vec::with_capacity(knots);
    for &k in &ks {
        let t = ((k - lo) / (hi - lo)).clamp(0.0, 1.0);
        vs.push(vlo + (vhi - vlo) * shape.eval(t)?);
    }
    vs[0] = vlo;
    vs[knots - 1] = vhi;
    if vs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::PieceNotMonotone(j));
    }
    GridFunction::new(ks, vs, Extension::Undefined)
}

/// Pieces `f_1 .. f_{L-1}` for a left-anchored plan and its sequence.
#[allow(clippy::needless_range_loop)]
fn pieces_left(plan: &SewingPlan, f: &dyn Evaluate, xs: &[f64], knots: usize) -> Result<Vec<GridFunction>> {
    let n = plan.order();
    let count = xs.len().saturating_sub(2);
    if count < n - 1 {
        return Err(Error::RangeMismatch {
            index: count,
            message: "sequence reached the anchor before all initial pieces were placed; lower eps_seq".into(),
        });
    }
    let mut pieces: Vec<GridFunction> = Vec::with_capacity(count);
    for j in 1..n {
        pieces.push(initial_piece(plan, xs, j, knots)?);
    }
    for m in n..=count {
        let prev = &pieces[m - 2];
        let ks = prev.values().to_vec();
        if ks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::PieceNotMonotone(m - 1));
        }
        let mut vs = Vec::with_capacity(knots);
        for i in 0..knots {
            // u_j = knot i of f_{m-j}; u_0 = knot i of f_m
            let u = |j: usize| if j == 0 { ks[i] } else { pieces[m - 1 - j].knots()[i] };
            let first = f.eval(u(n - 1))?;
            vs.push(recursion_term(&plan.lambdas, |k| u(n - 1 - k), first));
        }
        let (lo_t, hi_t) = (xs[m + 1], xs[m]);
        let tol = SEAM_TOL * lo_t.abs().max(hi_t.abs()).max(1.0);
        if (vs[0] - lo_t).abs() > tol || (vs[knots - 1] - hi_t).abs() > tol {
            return Err(Error::RangeMismatch {
                index: m,
                message: format!(
                    "endpoint values {} and {} differ from x_{} = {lo_t} and x_{m} = {hi_t}",
                    vs[0],
                    vs[knots - 1],
                    m + 1
                ),
            });
        }
        vs[0] = lo_t;
        vs[knots - 1] = hi_t;
        if vs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::PieceNotMonotone(m));
        }
        pieces.push(GridFunction::new(ks, vs, Extension::Undefined)?);
    }
    Ok(pieces)
}

/// Pieces for a given sequence (in original coordinates).
pub fn build_pieces(plan: &SewingPlan, f: &dyn Evaluate, sequence: &[f64]) -> Result<SewnSolution> {
    plan.validate()?;
    let n = plan.order();
    let seeds = sequence.get(1..n).map(<[f64]>::to_vec).unwrap_or_default();
    let (left_plan, xs, mirrored): (SewingPlan, Vec<f64>, bool) = match plan.side {
        Side::AtLeft => (plan.clone(), sequence.to_vec(), false),
        Side::AtRight => (plan.reflected(), sequence.iter().map(|v| -v).collect(), true),
    };
    let reflect = Reflect(f);
    let fl: &dyn Evaluate = if mirrored { &reflect } else { f };
    let mut knots = plan.piece_knots;
    let mut refined = false;
    let pieces = loop {
        match pieces_left(&left_plan, fl, &xs, knots) {
            Ok(p) => break p,
            Err(Error::PieceNotMonotone(m)) if !refined => {
                log::warn!("piece {m} not strictly increasing; refining to {} knots per piece", 2 * knots - 1);
                refined = true;
                knots = 2 * knots - 1;
            }
            Err(e) => return Err(e),
        }
    };
    let summary = SewingSummary {
        order: n,
        lambdas: plan.lambdas.clone(),
        side: plan.side,
        anchor: plan.anchor(),
        seeds,
        shapes: (0..n - 1).map(|j| plan.shape(j).label()).collect(),
        sequence: sequence.to_vec(),
        pieces: pieces.len(),
        knots_per_piece: knots,
        eps_seq: plan.eps_seq,
        refined,
    };
    Ok(SewnSolution {
        anchor: left_plan.interval.lo,
        xs,
        pieces,
        mirrored,
        summary,
    })
}

/// Certificate of the target for the sign class of the plan's anchor.
pub fn certify_target(plan: &SewingPlan, f: &dyn Evaluate) -> Result<ClassCertificate> {
    let core = match plan.side {
        Side::AtLeft => Interval::new(plan.interval.lo, plan.start())?,
        Side::AtRight => Interval::new(plan.start(), plan.interval.hi)?,
    };
    let knots = plan.piece_knots.max(2049);
    let sample = GridFunction::sample_uniform(core, knots, |x| f.eval(x), Extension::ClampToEndpointValues)?;
    check_r_class(&sample, plan.anchor(), plan.lambda(), core)
}

/// Seeds, sequence and pieces. The target must lie in the sign class of
/// the anchor.
pub fn sew(plan: &SewingPlan, f: &dyn Evaluate) -> Result<SewnSolution> {
    plan.validate()?;
    let cert = certify_target(plan, f)?;
    if !cert.is_member() {
        return Err(Error::hypothesis(format!(
            "target is not in the sign class of anchor {} with lambda = {}: {}",
            plan.anchor(),
            plan.lambda(),
            cert.summary()
        )));
    }
    let seeds = match &plan.seeds {
        Some(s) => s.clone(),
        None => default_seeds(plan, f)?,
    };
    let xs = generate_sequence(plan, f, &seeds, plan.max_terms)?;
    build_pieces(plan, f, &xs)
}

/// Sup over `probes` of `|f^n - sum_k lambda_k f^k - F|`.
pub fn residual_lcp(f: &dyn Evaluate, lambdas: &[f64], target: &dyn Evaluate, probes: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in probes {
        let mut u = x;
        let mut acc = 0.0;
        for &l in lambdas {
            u = f.eval(u)?;
            acc += l * u;
        }
        let top = f.eval(u)?;
        worst = worst.max((top - acc - target.eval(x)?).abs());
    }
    Ok(worst)
}

/// Probes on the core with an `eps_seq` neighborhood of the anchor removed.
pub fn core_probes(sewn: &SewnSolution, count: usize) -> Vec<f64> {
    let core = sewn.core();
    let eps = sewn.summary.eps_seq;
    match sewn.summary.side {
        Side::AtLeft => linspace(core.lo + eps, core.hi, count.max(2)),
        Side::AtRight => linspace(core.lo, core.hi - eps, count.max(2)),
    }
}

/// Increasing bisection for `F(z) = y` on `[lo, hi]`.
fn bisect_increasing(f: &dyn Evaluate, y: f64, lo: f64, hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let (mut flo, mut fhi) = (f.eval(lo)?, f.eval(hi)?);
    if y <= flo {
        return Ok(lo);
    }
    if y >= fhi {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f.eval(mid)?;
        if fm == y {
            return Ok(mid);
        }
        if fm < y {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    Ok(if fhi > flo { (lo + (hi - lo) * ((y - flo) / (fhi - flo))).clamp(lo, hi) } else { lo })
}

/// Solution on the whole line: the sewn solution on its core and
/// `phi_1 ∘ F_1^{-1} ∘ F` elsewhere, with `F_1` the restriction of `F` to
/// the core.
#[derive(Clone)]
pub struct LineExtension {
    core_fn: Target,
    pub target: Target,
    core: Interval,
    span: Interval,
}

impl std::fmt::Debug for LineExtension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LineExtension").field("core", &self.core).field("span", &self.span).finish()
    }
}

impl LineExtension {
    pub fn core(&self) -> Interval {
        self.core
    }

    pub fn target_span(&self) -> Interval {
        self.span
    }
}

impl Evaluate for LineExtension {
    fn eval(&self, x: f64) -> Result<f64> {
        if self.core.contains(x) {
            return self.core_fn.eval(x);
        }
        let y = self.target.eval(x)?;
        let slack = 1e-12 * self.span.lo.abs().max(self.span.hi.abs()).max(1.0);
        if y < self.span.lo - slack || y > self.span.hi + slack {
            return Err(Error::RangeHypothesisViolated { x, value: y, lo: self.span.lo, hi: self.span.hi });
        }
        let z = bisect_increasing(self.target.as_ref(), y, self.core.lo, self.core.hi)?;
        self.core_fn.eval(z)
    }
}

/// Extends the sewn solution to the line after checking, on `probes`, that
/// `F` is strictly increasing on the core and takes no values outside
/// `F(core)`.
pub fn extend_to_line(sewn: &SewnSolution, target: Target, probes: &[f64]) -> Result<LineExtension> {
    extend_core(std::sync::Arc::new(sewn.clone()), sewn.core(), target, probes)
}

/// [`extend_to_line`] for any evaluator of the solution on `core`.
pub fn extend_core(core_fn: Target, core: Interval, target: Target, probes: &[f64]) -> Result<LineExtension> {
    let (flo, fhi) = (target.eval(core.lo)?, target.eval(core.hi)?);
    let inner = linspace(core.lo, core.hi, 4097);
    let mut prev = f64::NEG_INFINITY;
    for &x in &inner {
        let v = target.eval(x)?;
        if v <= prev {
            return Err(Error::hypothesis(format!("F is not strictly increasing on the core near x = {x}")));
        }
        prev = v;
    }
    let span = Interval { lo: flo, hi: fhi };
    let slack = 1e-12 * flo.abs().max(fhi.abs()).max(1.0);
    for &x in probes {
        let v = target.eval(x)?;
        if v < flo - slack || v > fhi + slack {
            return Err(Error::RangeHypothesisViolated { x, value: v, lo: flo, hi: fhi });
        }
    }
    Ok(LineExtension { core_fn, target, core, span })
}

/// Root solution `g` with `g^n = G` on the positive half-line.
#[derive(Debug, Clone)]
pub struct RootSolution {
    pub line: LineExtension,
    pub order: usize,
    pub residual: f64,
    pub probes: usize,
}

impl RootSolution {
    pub fn g(&self) -> ExpConjugate<&LineExtension> {
        ExpConjugate(&self.line)
    }
}

/// Options for [`solve_root`].
#[derive(Debug, Clone)]
pub struct RootOptions {
    pub seeds: Option<Vec<f64>>,
    pub shapes: Vec<Shape>,
    pub piece_knots: usize,
    pub eps_seq: f64,
    pub probes: usize,
    /// Probe window on the positive half-line; defaults to `[c/2, 2d]`.
    pub window: Option<Interval>,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            seeds: None,
            shapes: vec![Shape::Linear],
            piece_knots: DEFAULT_PIECE_KNOTS,
            eps_seq: DEFAULT_EPS_SEQ,
            probes: 4096,
            window: None,
        }
    }
}

/// Checks that `G` is strictly increasing on `J = [c, d]` and, for the left
/// anchor, `G(c) = c` and `G(x) < x` on `(c, d]`; for the right anchor,
/// `G(d) = d` and `G(x) > x` on `[c, d)`.
pub fn check_root_hypotheses(big_g: &dyn Evaluate, side: Side, j: Interval) -> Result<()> {
    let (c, d) = (j.lo, j.hi);
    let tol = 1e-10 * d.max(1.0);
    let mesh = linspace(c, d, 4097);
    let gv = mesh.iter().map(|&x| big_g.eval(x)).collect::<Result<Vec<_>>>()?;
    if let Some(i) = (1..gv.len()).find(|&i| gv[i] <= gv[i - 1]) {
        return Err(Error::hypothesis(format!("G is not strictly increasing on J near x = {}", mesh[i])));
    }
    match side {
        Side::AtLeft => {
            if (gv[0] - c).abs() > tol {
                return Err(Error::hypothesis(format!("G(c) = c fails: G({c}) = {}", gv[0])));
            }
            if let Some(i) = (1..gv.len()).find(|&i| gv[i] >= mesh[i]) {
                return Err(Error::hypothesis(format!("G(x) < x on (c, d] fails at x = {}", mesh[i])));
            }
        }
        Side::AtRight => {
            let last = gv.len() - 1;
            if (gv[last] - d).abs() > tol {
                return Err(Error::hypothesis(format!("G(d) = d fails: G({d}) = {}", gv[last])));
            }
            if let Some(i) = (0..last).find(|&i| gv[i] <= mesh[i]) {
                return Err(Error::hypothesis(format!("G(x) > x on [c, d) fails at x = {}", mesh[i])));
            }
        }
    }
    Ok(())
}

/// Iterative root `g^n = G` with `J = [c, d]`: anchored at `c` when
/// `G(c) = c` and `G(x) < x` on `(c, d]`, or at `d` when `G(d) = d` and
/// `G(x) > x` on `[c, d)`.
pub fn solve_root(big_g: Target, n: usize, side: Side, j: Interval, opts: &RootOptions) -> Result<RootSolution> {
    if n < 2 {
        return Err(Error::hypothesis("the root order n must be at least 2"));
    }
    let (c, d) = (j.lo, j.hi);
    if c <= 0.0 {
        return Err(Error::NonPositiveValues(format!("J = [{c}, {d}]")));
    }
    check_root_hypotheses(big_g.as_ref(), side, j)?;
    let f: Target = std::sync::Arc::new(LogConjugate(big_g.clone()));
    let i = j.ln()?;
    let plan = SewingPlan {
        seeds: opts.seeds.as_ref().map(|s| s.iter().map(|v| v.ln()).collect()),
        shapes: opts.shapes.clone(),
        piece_knots: opts.piece_knots,
        eps_seq: opts.eps_seq,
        ..SewingPlan::new(vec![0.0; n - 1], side, i)
    };
    let sewn = sew(&plan, f.as_ref())?;
    let window = opts.window.unwrap_or(Interval { lo: 0.5 * c, hi: 2.0 * d });
    let wl = window.ln()?;
    let line = extend_to_line(&sewn, f, &linspace(wl.lo, wl.hi, opts.probes.max(2)))?;
    let g = ExpConjugate(&line);
    let probes = linspace(window.lo, window.hi, opts.probes.max(2));
    let mut worst = 0.0f64;
    for &x in &probes {
        worst = worst.max((iterate_at(&g, n, x)? - big_g.eval(x)?).abs());
    }
    Ok(RootSolution { line, order: n, residual: worst, probes: probes.len() })
}

/// Certificate for a user-supplied solution when `lambda <= 0`.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateCertificate {
    pub lambda: f64,
    pub class: ClassCertificate,
    pub residual: f64,
    pub probes: usize,
}

/// Checks a candidate for `A_1` membership on `interval` and its residual in
/// the equation on `probes`.
pub fn verify_candidate_lambda_nonpos(
    candidate: &GridFunction,
    lambdas: &[f64],
    target: &dyn Evaluate,
    interval: Interval,
    probes: &[f64],
) -> Result<CandidateCertificate> {
    let lambda: f64 = lambdas.iter().sum();
    if lambda > 0.0 {
        return Err(Error::hypothesis(format!("candidate verification applies to lambda <= 0, got {lambda}")));
    }
    let class = check_ab_class(candidate, 1.0, interval, ClassKind::A)?;
    let residual = residual_lcp(candidate, lambdas, target, probes)?;
    Ok(CandidateCertificate { lambda, class, residual, probes: probes.len() })
}
