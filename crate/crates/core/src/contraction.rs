//! Fixed-point solver for `sum_k alpha_k f^k = F` on the line.
//!
//! With `L_f = sum_k alpha_k f^{k-1}` the equation reads `L_f ∘ f = F`, so a
//! solution is a fixed point of `T f = L_f^{-1} ∘ F`. On `F_I(delta, M)` the
//! operator `T` contracts with factor `K2 / K0`.

use serde::{Deserialize, Serialize};

use crate::classes::{check_f_class, ClassCertificate, Verdict};
use crate::error::{Error, Result};
use crate::funcrep::{
    iterate_at, sup_norm_diff, Evaluate, Extension, GridFunction, Interval, Target, DEFAULT_GRID,
    DEFAULT_PROBES,
};

/// Default stopping tolerance on successive iterates.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 200;
/// Tolerance on the endpoint and monotonicity checks that decide whether an
/// iterate left its class.
pub const DRIFT_TOL: f64 = 1e-9;

const EXACT_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    pub contraction_factor: f64,
}

/// `K0 = sum alpha_k delta^{k-1}`, `K1 = sum alpha_k M^{k-1}`,
/// `K2 = sum_{k>=2} alpha_k sum_{j=0}^{k-2} M^j`.
pub fn compute_constants(alpha: &[f64], delta: f64, m: f64) -> Result<Constants> {
    if alpha.is_empty() {
        return Err(Error::hypothesis("at least one exponent alpha_1 is required"));
    }
    if let Some((k, a)) = alpha.iter().enumerate().find(|(_, a)| !a.is_finite() || **a < 0.0) {
        return Err(Error::hypothesis(format!("alpha_{} = {a} must be nonnegative", k + 1)));
    }
    let sum: f64 = alpha.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::hypothesis(format!("sum of alpha_k is {sum}, expected 1")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::hypothesis(format!("delta = {delta} must satisfy 0 < delta <= 1")));
    }
    if !(m >= 1.0) || !m.is_finite() {
        return Err(Error::hypothesis(format!("M = {m} must satisfy M >= 1")));
    }
    let mut k0 = 0.0;
    let mut k1 = 0.0;
    let mut k2 = 0.0;
    let mut dpow = 1.0;
    let mut mpow = 1.0;
    let mut geometric = 0.0;
    for (k, &a) in alpha.iter().enumerate() {
        if k >= 1 {
            geometric += mpow;
            dpow *= delta;
            mpow *= m;
            k2 += a * geometric;
        }
        k0 += a * dpow;
        k1 += a * mpow;
    }
    Ok(Constants {
        k0,
        k1,
        k2,
        contraction_factor: k2 / k0,
    })
}

/// `L_f(x) = sum_k alpha_k f^{k-1}(x)`.
pub fn apply_lf(f: &impl Evaluate, alpha: &[f64], x: f64) -> Result<f64> {
    let mut acc = 0.0;
    let mut u = x;
    for (k, &a) in alpha.iter().enumerate() {
        if k > 0 {
            u = f.eval(u)?;
        }
        acc += a * u;
    }
    Ok(acc)
}

/// The unique `x` in `interval` with `L_f(x) = y`, by bisection followed by
/// one linear interpolation step on the final bracket.
pub fn invert_lf(f: &impl Evaluate, alpha: &[f64], y: f64, interval: Interval) -> Result<f64> {
    let (mut lo, mut hi) = (interval.lo, interval.hi);
    let (mut flo, mut fhi) = (apply_lf(f, alpha, lo)?, apply_lf(f, alpha, hi)?);
    let slack = 1e-12 * flo.abs().max(fhi.abs()).max(1.0);
    if y < flo - slack || y > fhi + slack || flo > fhi {
        return Err(Error::NotBracketed(y));
    }
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
        let fm = apply_lf(f, alpha, mid)?;
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
    if fhi > flo {
        Ok((lo + (hi - lo) * ((y - flo) / (fhi - flo))).clamp(lo, hi))
    } else {
        Ok(0.5 * (lo + hi))
    }
}

/// Starting point of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialIterate {
    #[default]
    Identity,
    /// Piecewise-linear interpolant of the target on the core interval.
    TargetInterpolant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionOptions {
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub probes: usize,
    pub initial: InitialIterate,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        ContractionOptions {
            grid: DEFAULT_GRID,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            probes: DEFAULT_PROBES,
            initial: InitialIterate::Identity,
        }
    }
}

/// Solution on the whole line: the converged grid function on `I`, and
/// `L_f^{-1}(F(x))` outside `I`.
#[derive(Clone)]
pub struct LineSolution {
    pub core: GridFunction,
    pub alpha: Vec<f64>,
    pub target: Target,
    pub interval: Interval,
}

impl Evaluate for LineSolution {
    fn eval(&self, x: f64) -> Result<f64> {
        if self.interval.contains(x) {
            self.core.eval(x)
        } else {
            invert_lf(&self.core, &self.alpha, self.target.eval(x)?, self.interval)
        }
    }
}

impl std::fmt::Debug for LineSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LineSolution")
            .field("interval", &self.interval)
            .field("alpha", &self.alpha)
            .field("knots", &self.core.len())
            .finish()
    }
}

/// Outcome of [`picard_solve`].
#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    #[serde(skip)]
    pub solution: Option<LineSolution>,
    pub constants: Constants,
    pub iterations: usize,
    pub iterate_gap_trace: Vec<f64>,
    pub gap_ratios: Vec<f64>,
    pub residual_poly: f64,
    /// Certificate of the target for `F_I(K1 delta, K0 M)`.
    pub target_certificate: Option<ClassCertificate>,
    /// Certificate of the final iterate for `F_I(delta, M)`.
    pub solution_certificate: Option<ClassCertificate>,
    /// Verdict of each sweep's iterate for `F_I(delta, M)`.
    pub sweep_verdicts: Vec<Verdict>,
    pub grid: usize,
    pub refined: bool,
    pub warnings: Vec<String>,
}

impl PicardReport {
    pub fn line_solution(&self) -> &LineSolution {
        self.solution.as_ref().expect("solution is set by picard_solve")
    }
}

/// Sup over `probes` of `|sum_k alpha_k f^k(x) - F(x)|`.
pub fn residual_poly(f: &impl Evaluate, alpha: &[f64], target: &impl Evaluate, probes: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in probes {
        let mut u = x;
        let mut acc = 0.0;
        for &a in alpha {
            u = f.eval(u)?;
            acc += a * u;
        }
        worst = worst.max((acc - target.eval(x)?).abs());
    }
    Ok(worst)
}

/// Probe points covering `I` and a margin of half its width on each side.
pub fn line_probes(interval: Interval, count: usize) -> Vec<f64> {
    let w = interval.width();
    crate::funcrep::linspace(interval.lo - 0.5 * w, interval.hi + 0.5 * w, count.max(2))
}

fn obstruction(alpha: &[f64]) -> Option<Error> {
    if alpha.first().copied().unwrap_or(0.0) == 0.0 {
        Some(Error::hypothesis(
            "alpha_1 = 0: K2 < K0 fails for every delta <= 1 <= M, so the contraction \
             theorem cannot solve this equation (the iterative root problem g^n = G is \
             out of its reach); use the root construction instead",
        ))
    } else {
        None
    }
}

fn drift(f: &GridFunction, interval: Interval) -> Option<String> {
    let tol = DRIFT_TOL * interval.lo.abs().max(interval.hi.abs()).max(1.0);
    if !f.is_monotone() {
        return Some("iterate is not monotone".into());
    }
    let (fa, fb) = (f.first_value(), f.last_value());
    if (fa - interval.lo).abs() > tol || (fb - interval.hi).abs() > tol {
        return Some(format!(
            "iterate endpoints drifted to f(a) = {fa}, f(b) = {fb} on [{}, {}]",
            interval.lo, interval.hi
        ));
    }
    None
}

/// Picard iteration `f_{m+1} = L_{f_m}^{-1} ∘ F` on `interval`.
pub fn picard_solve(
    target: Target,
    alpha: &[f64],
    delta: f64,
    m: f64,
    interval: Interval,
    opts: &ContractionOptions,
) -> Result<PicardReport> {
    if let Some(e) = obstruction(alpha) {
        return Err(e);
    }
    let constants = compute_constants(alpha, delta, m)?;
    let grid = opts.grid.max(2);
    let probes = line_probes(interval, opts.probes);
    let mut warnings = Vec::new();

    // alpha_1 = 1: the equation is f = F.
    if (alpha[0] - 1.0).abs() <= EXACT_TOL {
        let core = GridFunction::sample_uniform(interval, grid, |x| target.eval(x), Extension::ClampToEndpointValues)?;
        let solution = LineSolution {
            core,
            alpha: vec![1.0],
            target: target.clone(),
            interval,
        };
        let residual = residual_poly(&solution, alpha, &target, &probes)?;
        return Ok(PicardReport {
            solution: Some(solution),
            constants,
            iterations: 0,
            iterate_gap_trace: Vec::new(),
            gap_ratios: Vec::new(),
            residual_poly: residual,
            target_certificate: None,
            solution_certificate: None,
            sweep_verdicts: Vec::new(),
            grid,
            refined: false,
            warnings: vec!["alpha_1 = 1: the unique solution is the target itself".into()],
        });
    }

    if constants.k2 >= constants.k0 {
        return Err(Error::hypothesis(format!(
            "K2 = {} is not below K0 = {}; the Picard operator is not a contraction",
            constants.k2, constants.k0
        )));
    }

    let target_sample = GridFunction::sample_uniform(interval, grid, |x| target.eval(x), Extension::ClampToEndpointValues)?;
    let target_certificate = check_f_class(&target_sample, constants.k1 * delta, constants.k0 * m, interval)?;
    if !target_certificate.is_member() {
        let msg = format!("target certificate for F_I(K1 delta, K0 M): {}", target_certificate.summary());
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let mut knots = interval.linspace(grid);
    let mut targets: Vec<f64> = knots.iter().map(|&x| target.eval(x)).collect::<Result<_>>()?;
    let mut f = match opts.initial {
        InitialIterate::Identity => GridFunction::identity_on(knots.clone()),
        InitialIterate::TargetInterpolant => {
            GridFunction::new(knots.clone(), targets.clone(), Extension::ClampToEndpointValues)?
        }
    };

    let mut trace = Vec::new();
    let mut verdicts = Vec::new();
    let mut refined = false;
    let mut last_cert = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let values = targets
            .iter()
            .map(|&y| invert_lf(&f, alpha, y, interval))
            .collect::<Result<Vec<_>>>()?;
        let next = GridFunction::new(knots.clone(), values, Extension::ClampToEndpointValues)?;
        if let Some(why) = drift(&next, interval) {
            if refined {
                return Err(Error::CertificateLost(format!("{why} after grid refinement")));
            }
            log::warn!("{why}; refining the grid once");
            warnings.push(format!("{why}; grid refined to {} knots", 2 * knots.len() - 1));
            refined = true;
            knots = interval.linspace(2 * knots.len() - 1);
            targets = knots.iter().map(|&x| target.eval(x)).collect::<Result<_>>()?;
            f = GridFunction::from_samples(knots.clone(), |x| f.eval(x), Extension::ClampToEndpointValues)?;
            continue;
        }
        let gap = next
            .values()
            .iter()
            .zip(knots.iter())
            .map(|(&v, &x)| f.eval(x).map(|u| (v - u).abs()))
            .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)))?;
        trace.push(gap);
        let cert = check_f_class(&next, delta, m, interval)?;
        verdicts.push(cert.verdict);
        last_cert = Some(cert);
        f = next;
        log::debug!("sweep {iterations}: gap {gap:e}");
        if gap <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            last_gap: trace.last().copied().unwrap_or(f64::NAN),
            trace,
        });
    }
    if let Some(cert) = &last_cert {
        if !cert.is_member() {
            let msg = format!("solution certificate for F_I(delta, M): {}", cert.summary());
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let gap_ratios = trace.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    let solution = LineSolution {
        core: f,
        alpha: alpha.to_vec(),
        target: target.clone(),
        interval,
    };
    let residual = residual_poly(&solution, alpha, &target, &probes)?;
    Ok(PicardReport {
        solution: Some(solution),
        constants,
        iterations,
        iterate_gap_trace: trace,
        gap_ratios,
        residual_poly: residual,
        target_certificate: Some(target_certificate),
        solution_certificate: last_cert,
        sweep_verdicts: verdicts,
        grid: knots.len(),
        refined,
        warnings,
    })
}

/// `d / (c (K0 - K2))`: the Lipschitz constant of the map from targets to
/// solutions on the positive half-line with `J = [c, d]`.
pub fn stability_bound(c: f64, d: f64, constants: &Constants) -> Result<f64> {
    if !(c > 0.0 && d > c) {
        return Err(Error::hypothesis(format!("J = [{c}, {d}] must satisfy 0 < c < d")));
    }
    let gap = constants.k0 - constants.k2;
    if gap <= 0.0 {
        return Err(Error::hypothesis(format!("K0 - K2 = {gap} must be positive")));
    }
    Ok(d / (c * gap))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: f64,
    pub solution_gap: f64,
    pub target_gap: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Compares `sup |g - g1|` with `bound * sup |G - G1|` on `probes`.
pub fn stability_check(
    g: &impl Evaluate,
    g1: &impl Evaluate,
    big_g: &impl Evaluate,
    big_g1: &impl Evaluate,
    bound: f64,
    probes: &[f64],
) -> Result<BoundCheck> {
    let solution_gap = sup_norm_diff(g, g1, probes)?;
    let target_gap = sup_norm_diff(big_g, big_g1, probes)?;
    let rhs = bound * target_gap;
    Ok(BoundCheck {
        bound,
        solution_gap,
        target_gap,
        lhs: solution_gap,
        rhs,
        pass: solution_gap <= rhs + 1e-8,
    })
}

/// `f^k(x)` for a line solution, exposed for diagnostics.
pub fn iterate_solution(f: &LineSolution, k: usize, x: f64) -> Result<f64> {
    iterate_at(f, k, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcrep::FnEval;
    use std::sync::Arc;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn ex1_target() -> Target {
        Arc::new(FnEval(|x: f64| {
            let t = x.clamp(0.0, 1.0);
            0.5 * (t * t + t)
        }))
    }

    #[test]
    fn constants_of_example_one() {
        let c = compute_constants(&[0.75, 0.25], 2.0 / 3.0, 2.0).unwrap();
        assert!((c.k0 - 11.0 / 12.0).abs() <= 1e-15);
        assert_eq!(c.k2, 0.25);
        assert!((c.k1 - 1.25).abs() <= 1e-15);
        assert!((c.contraction_factor - 3.0 / 11.0).abs() <= 1e-15);
    }

    #[test]
    fn constants_trivial_and_errors() {
        let c = compute_constants(&[1.0], 0.3, 7.0).unwrap();
        assert_eq!((c.k0, c.k1, c.k2), (1.0, 1.0, 0.0));
        assert!(compute_constants(&[0.5, 0.6], 0.5, 2.0).is_err());
        assert!(compute_constants(&[1.5, -0.5], 0.5, 2.0).is_err());
        assert!(compute_constants(&[0.5, 0.5], 1.5, 2.0).is_err());
        assert!(compute_constants(&[0.5, 0.5], 0.5, 0.5).is_err());
    }

    #[test]
    fn lf_and_inverse_on_square() {
        let sq = GridFunction::sample_uniform(unit(), 1025, |x| Ok(x * x), Extension::ClampToEndpointValues).unwrap();
        let alpha = [0.75, 0.25];
        let y = apply_lf(&sq, &alpha, 0.5).unwrap();
        assert!((y - 0.4375).abs() < 1e-12);
        let x = invert_lf(&sq, &alpha, 0.4375, unit()).unwrap();
        assert!((x - 0.5).abs() < 1e-12);
        assert_eq!(apply_lf(&sq, &alpha, 0.0).unwrap(), 0.0);
        assert_eq!(apply_lf(&sq, &alpha, 1.0).unwrap(), 1.0);
        assert_eq!(invert_lf(&sq, &alpha, 0.0, unit()).unwrap(), 0.0);
        assert!(matches!(invert_lf(&sq, &alpha, 1.5, unit()), Err(Error::NotBracketed(_))));
    }

    #[test]
    fn identity_target_converges_immediately() {
        let id: Target = Arc::new(FnEval(|x: f64| x.clamp(0.0, 1.0)));
        let r = picard_solve(id, &[0.75, 0.25], 2.0 / 3.0, 2.0, unit(), &ContractionOptions::default()).unwrap();
        assert!(r.iterations <= 2);
        assert!(r.residual_poly <= 1e-12);
    }

    #[test]
    fn example_one_contracts() {
        let opts = ContractionOptions::default();
        let r = picard_solve(ex1_target(), &[0.75, 0.25], 2.0 / 3.0, 2.0, unit(), &opts).unwrap();
        assert!(r.residual_poly <= 1e-6, "residual {}", r.residual_poly);
        for ratio in r.gap_ratios.iter().skip(1) {
            assert!(*ratio <= 3.0 / 11.0 + 0.05, "ratio {ratio}");
        }
        // slope of the exact solution at 0 solves 3s/4 + s^2/4 = 1/2
        let s = (-3.0 + 17f64.sqrt()) / 2.0;
        let f = &r.line_solution().core;
        let h = 1.0 / 1024.0;
        assert!((f.eval(h).unwrap() / h - s).abs() < 1e-2);
    }

    #[test]
    fn root_problem_is_refused() {
        let err = picard_solve(ex1_target(), &[0.0, 1.0], 0.5, 2.0, unit(), &ContractionOptions::default()).unwrap_err();
        assert!(err.to_string().contains("alpha_1 = 0"));
    }

    #[test]
    fn stability_constant_of_example_one() {
        let c = compute_constants(&[0.75, 0.25], 2.0 / 3.0, 2.0).unwrap();
        let b = stability_bound(1.0, std::f64::consts::E, &c).unwrap();
        assert!((b - 1.5 * std::f64::consts::E).abs() < 1e-12);
    }
}
