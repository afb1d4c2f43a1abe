//! Monotone piecewise-linear functions on a compact core interval.
//!
//! [`GridFunction`] is the carrier for every sampled function in the crate:
//! solutions, targets, iterates and their conjugates. Between knots it
//! interpolates linearly; outside the core it either clamps to the endpoint
//! values or refuses to evaluate.
//!
//! Clamping realizes a bounded continuous map on the whole line whose range
//! is exactly the value span of the core, which is the setting of the
//! `F_I(delta, M)` classes.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of knots for solver grids.
pub const DEFAULT_GRID: usize = 1025;
/// Default number of probe points for sup-norm estimates.
pub const DEFAULT_PROBES: usize = 8193;
/// Slack allowed between consecutive values of a monotone function.
pub const MONOTONE_TOL: f64 = 1e-13;

/// Relative slack for points that sit on a domain boundary up to rounding.
const EDGE_SLACK: f64 = 1e-12;

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidGrid(format!(
                "interval [{lo}, {hi}] must be finite with lo < hi"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// `n` equally spaced points covering the interval, endpoints included.
    pub fn linspace(&self, n: usize) -> Vec<f64> {
        linspace(self.lo, self.hi, n)
    }

    /// Elementwise logarithm; requires `lo > 0`.
    pub fn ln(&self) -> Result<Interval> {
        if self.lo <= 0.0 {
            return Err(Error::NonPositiveValues(format!(
                "interval [{}, {}] is not inside (0, inf)",
                self.lo, self.hi
            )));
        }
        Interval::new(self.lo.ln(), self.hi.ln())
    }

    pub fn exp(&self) -> Interval {
        Interval {
            lo: self.lo.exp(),
            hi: self.hi.exp(),
        }
    }

    pub fn negated(&self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    fn slack(&self) -> f64 {
        EDGE_SLACK * self.lo.abs().max(self.hi.abs()).max(1.0)
    }
}

/// The pair `(I, J)` with `J` inside the positive half-line and `I = log J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalPair {
    pub line: Interval,
    pub positive: Interval,
}

impl IntervalPair {
    pub fn from_positive(j: Interval) -> Result<Self> {
        Ok(IntervalPair {
            line: j.ln()?,
            positive: j,
        })
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            let mut out: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
            out[n - 1] = hi;
            out
        }
    }
}

/// Anything that can be evaluated at a real point.
pub trait Evaluate {
    fn eval(&self, x: f64) -> Result<f64>;
}

/// Shared, thread-safe evaluable target.
pub type Target = Arc<dyn Evaluate + Send + Sync>;

impl<T: Evaluate + ?Sized> Evaluate for &T {
    fn eval(&self, x: f64) -> Result<f64> {
        (**self).eval(x)
    }
}

impl<T: Evaluate + ?Sized> Evaluate for Arc<T> {
    fn eval(&self, x: f64) -> Result<f64> {
        (**self).eval(x)
    }
}

impl<T: Evaluate + ?Sized> Evaluate for Box<T> {
    fn eval(&self, x: f64) -> Result<f64> {
        (**self).eval(x)
    }
}

/// Adapter for plain closures.
pub struct FnEval<F>(pub F);

impl<F: Fn(f64) -> f64> Evaluate for FnEval<F> {
    fn eval(&self, x: f64) -> Result<f64> {
        let y = (self.0)(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::MathDomain(format!("non-finite value at x = {x}")))
        }
    }
}

/// Behavior of a grid function outside its core interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    ClampToEndpointValues,
    Undefined,
}

impl Extension {
    fn as_str(&self) -> &'static str {
        match self {
            Extension::ClampToEndpointValues => "clamp",
            Extension::Undefined => "undefined",
        }
    }
}

/// Piecewise-linear function sampled on strictly increasing knots.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    extension: Extension,
    monotone: bool,
}

impl GridFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, extension: Extension) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(Error::InvalidGrid("at least two knots are required".into()));
        }
        if let Some(bad) = knots.iter().chain(values.iter()).find(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite entry {bad}")));
        }
        if let Some(w) = knots.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "knots not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        let monotone = values.windows(2).all(|w| w[1] - w[0] > -MONOTONE_TOL)
            && values[values.len() - 1] > values[0];
        Ok(GridFunction {
            knots,
            values,
            extension,
            monotone,
        })
    }

    /// Samples `f` at the given knots.
    pub fn from_samples(
        knots: Vec<f64>,
        f: impl Fn(f64) -> Result<f64>,
        extension: Extension,
    ) -> Result<Self> {
        let values = knots.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
        GridFunction::new(knots, values, extension)
    }

    /// Samples `f` on `n` uniform knots over `interval`.
    pub fn sample_uniform(
        interval: Interval,
        n: usize,
        f: impl Fn(f64) -> Result<f64>,
        extension: Extension,
    ) -> Result<Self> {
        GridFunction::from_samples(interval.linspace(n.max(2)), f, extension)
    }

    /// Identity on `interval`, two knots, clamped.
    pub fn identity(interval: Interval) -> Self {
        GridFunction::identity_on(vec![interval.lo, interval.hi])
    }

    /// Identity sampled at the given knots, clamped.
    pub fn identity_on(knots: Vec<f64>) -> Self {
        let values = knots.clone();
        GridFunction::new(knots, values, Extension::ClampToEndpointValues)
            .expect("identity knots must be strictly increasing")
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn with_extension(mut self, extension: Extension) -> Self {
        self.extension = extension;
        self
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn domain_lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn domain_hi(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn domain(&self) -> Interval {
        Interval {
            lo: self.domain_lo(),
            hi: self.domain_hi(),
        }
    }

    pub fn first_value(&self) -> f64 {
        self.values[0]
    }

    pub fn last_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Range of the clamp extension over the whole line.
    pub fn value_span(&self) -> Interval {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }

    /// Linear interpolation with the extension rule outside the core.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::OutOfDomain {
                x,
                lo: self.domain_lo(),
                hi: self.domain_hi(),
            });
        }
        let (lo, hi) = (self.domain_lo(), self.domain_hi());
        if x <= lo || x >= hi {
            let slack = self.domain().slack();
            let inside = x >= lo - slack && x <= hi + slack;
            if !inside && self.extension == Extension::Undefined {
                return Err(Error::OutOfDomain { x, lo, hi });
            }
            return Ok(if x <= lo {
                self.first_value()
            } else {
                self.last_value()
            });
        }
        let i = self.knots.partition_point(|&k| k <= x) - 1;
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        if x == x0 {
            return Ok(y0);
        }
        Ok(y0 + (y1 - y0) * ((x - x0) / (x1 - x0)))
    }

    /// The unique core point mapped to `y`.
    pub fn inverse_eval(&self, y: f64) -> Result<f64> {
        if !self.monotone {
            return Err(Error::NotMonotone);
        }
        let (vlo, vhi) = (self.first_value(), self.last_value());
        let slack = EDGE_SLACK * vlo.abs().max(vhi.abs()).max(1.0);
        if !(y >= vlo - slack && y <= vhi + slack) {
            return Err(Error::OutOfRange { y, lo: vlo, hi: vhi });
        }
        if y <= vlo {
            return Ok(self.domain_lo());
        }
        if y >= vhi {
            return Ok(self.domain_hi());
        }
        // first index whose value exceeds y; segment is [j-1, j]
        let j = self.values.partition_point(|&v| v <= y);
        let i = j - 1;
        let (y0, y1) = (self.values[i], self.values[j]);
        let (x0, x1) = (self.knots[i], self.knots[j]);
        if y == y0 || y1 <= y0 {
            return Ok(x0);
        }
        Ok(x0 + (x1 - x0) * ((y - y0) / (y1 - y0)))
    }

    /// Exact inverse of a strictly increasing grid function: knots and
    /// values swap roles.
    pub fn inverse(&self) -> Result<GridFunction> {
        if !self.monotone || self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NotMonotone);
        }
        GridFunction::new(self.values.clone(), self.knots.clone(), self.extension)
    }

    /// Min and max of the consecutive difference quotients on the core.
    pub fn lipschitz_bounds(&self) -> Result<(f64, f64)> {
        if !self.monotone {
            return Err(Error::NotMonotone);
        }
        Ok(self.slopes().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s), hi.max(s))
        }))
    }

    pub(crate) fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
    }

    /// Serializes to the two-column CSV format with a metadata comment line.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 48);
        let _ = writeln!(
            out,
            "# domain=[{},{}] extension={} monotone={}",
            self.domain_lo(),
            self.domain_hi(),
            self.extension.as_str(),
            self.monotone
        );
        out.push_str("x,value\n");
        for (x, y) in self.knots.iter().zip(&self.values) {
            let _ = writeln!(out, "{x},{y}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut extension = Extension::ClampToEndpointValues;
        let mut declared_monotone = None;
        let mut knots = Vec::new();
        let mut values = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for token in meta.split_whitespace() {
                    match token.split_once('=') {
                        Some(("extension", "clamp")) => {
                            extension = Extension::ClampToEndpointValues
                        }
                        Some(("extension", "undefined")) => extension = Extension::Undefined,
                        Some(("extension", other)) => {
                            return Err(Error::schema(
                                "extension",
                                format!("unknown extension rule `{other}`"),
                            ))
                        }
                        Some(("monotone", v)) => declared_monotone = Some(v == "true"),
                        _ => {}
                    }
                }
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| {
                Error::schema("csv", format!("line {}: expected `x,value`", lineno + 1))
            })?;
            if knots.is_empty() && a.trim().parse::<f64>().is_err() {
                // header row
                continue;
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| {
                    Error::schema("csv", format!("line {}: {e}", lineno + 1))
                })
            };
            knots.push(parse(a)?);
            values.push(parse(b)?);
        }
        let f = GridFunction::new(knots, values, extension)?;
        if declared_monotone == Some(true) && !f.monotone {
            return Err(Error::NotMonotone);
        }
        Ok(f)
    }
}

impl Evaluate for GridFunction {
    fn eval(&self, x: f64) -> Result<f64> {
        GridFunction::eval(self, x)
    }
}

/// Samples `outer ∘ inner` at `resample_knots`.
pub fn compose(
    outer: &GridFunction,
    inner: &GridFunction,
    resample_knots: &[f64],
) -> Result<GridFunction> {
    let values = resample_knots
        .iter()
        .map(|&x| {
            let u = inner.eval(x)?;
            outer.eval(u).map_err(|e| match e {
                Error::OutOfDomain { lo, hi, .. } => Error::DomainMismatch { value: u, lo, hi },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(resample_knots.to_vec(), values, inner.extension())
}

/// Default resampling knots for `outer ∘ inner`: inner knots plus preimages
/// of outer knots under `inner`, thinned to at most `4 * DEFAULT_GRID`.
pub fn default_compose_knots(outer: &GridFunction, inner: &GridFunction) -> Vec<f64> {
    let mut knots = inner.knots().to_vec();
    if inner.is_monotone() {
        let span = (inner.first_value(), inner.last_value());
        knots.extend(
            outer
                .knots()
                .iter()
                .filter(|&&k| k > span.0 && k < span.1)
                .filter_map(|&k| inner.inverse_eval(k).ok()),
        );
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    thin(knots, 4 * DEFAULT_GRID)
}

fn thin(knots: Vec<f64>, cap: usize) -> Vec<f64> {
    if knots.len() <= cap {
        return knots;
    }
    let last = knots.len() - 1;
    let mut out: Vec<f64> = (0..cap - 1)
        .map(|i| knots[i * last / (cap - 1)])
        .collect();
    out.push(knots[last]);
    out.dedup();
    out
}

/// `f^k` sampled at `resample_knots`; `f^0` is the identity on those knots.
pub fn iterate_k(f: &GridFunction, k: usize, resample_knots: &[f64]) -> Result<GridFunction> {
    let mut current = GridFunction::identity_on(resample_knots.to_vec())
        .with_extension(f.extension());
    for _ in 0..k {
        current = compose(f, &current, resample_knots)?;
    }
    Ok(current)
}

/// Applies `f` to `x` repeatedly, `k` times.
pub fn iterate_at(f: &impl Evaluate, k: usize, x: f64) -> Result<f64> {
    (0..k).try_fold(x, |acc, _| f.eval(acc))
}

/// Largest absolute difference over the probe points. A lower bound on the
/// true sup-norm distance.
pub fn sup_norm_diff(f: &impl Evaluate, g: &impl Evaluate, probes: &[f64]) -> Result<f64> {
    probes.iter().try_fold(0.0f64, |acc, &x| {
        Ok(acc.max((f.eval(x)? - g.eval(x)?).abs()))
    })
}

/// Sup over probes of `|f(x)|`.
pub fn sup_norm(f: &impl Evaluate, probes: &[f64]) -> Result<f64> {
    probes
        .iter()
        .try_fold(0.0f64, |acc, &x| Ok(acc.max(f.eval(x)?.abs())))
}

/// Merges sorted knot lists and drops exact duplicates.
pub fn merge_knots(parts: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}
