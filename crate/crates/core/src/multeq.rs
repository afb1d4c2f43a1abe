//! End-to-end solution of `prod_k (g^k)^{alpha_k} = G` on the positive
//! half-line, of its line form `f^n = sum_k lambda_k f^k + F`, and of
//! iterative roots.
//!
//! Stages: normalize, conjugate to the line with `exp`/`log`, pick and run a
//! solver, extend to the line, conjugate back, verify, and mirror to the
//! negative half-line when the exponents allow it.

use std::path::Path;
use std::sync::Arc;

use crate::classes::{check_ab_class, check_g_class, check_s_class, ClassKind};
use crate::conjugation::{check_negation_parity, conj_explog_fn_back, conj_explog_target, conj_negation, ExpConjugate, Mirror};
use crate::construction::{
    certify_target, check_root_hypotheses, extend_core, sew, verify_candidate_lambda_nonpos, Shape, Side, SewingPlan,
    DEFAULT_EPS_SEQ,
};
use crate::contraction::{
    compute_constants, picard_solve, stability_bound, stability_check, Constants, ContractionOptions, LineSolution,
};
use crate::error::{Error, Result, Stage, StageExt};
use crate::expr::PiecewiseExpr;
use crate::funcrep::{linspace, Evaluate, Extension, GridFunction, Interval, Target};
use crate::problem::{Form, ProblemSpec, SolverChoice};
use crate::report::{
    NamedCertificate, NegationRecord, ReportFiles, Route, SolveReport, StabilityReport, VerifyReport, CORE_CSV,
    REPORT_FILE,
};

/// Rows of `plot.csv`.
const PLOT_ROWS: usize = 1025;

/// `inner(x) / factor`.
struct Scaled {
    inner: Target,
    factor: f64,
}

impl Evaluate for Scaled {
    fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.inner.eval(x)? / self.factor)
    }
}

/// `inner(x) + eps * bump(x)` with `bump(t) = 4 (t - a)(b - t) / (b - a)^2`
/// on `[a, b]` and zero elsewhere.
struct Bumped {
    inner: Target,
    eps: f64,
    interval: Interval,
}

pub fn bump(interval: Interval, t: f64) -> f64 {
    if interval.contains(t) {
        let w = interval.width();
        4.0 * (t - interval.lo) * (interval.hi - t) / (w * w)
    } else {
        0.0
    }
}

impl Evaluate for Bumped {
    fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.inner.eval(x)? + self.eps * bump(self.interval, x))
    }
}

/// `max_x |prod_k (g^k(x))^{alpha_k} - G(x)|` over `probes`, with iterates
/// computed by repeated evaluation.
pub fn residual_multiplicative(g: &dyn Evaluate, alpha: &[f64], big_g: &dyn Evaluate, probes: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in probes {
        worst = worst.max((product_of_iterates(g, alpha, x)? - big_g.eval(x)?).abs());
    }
    Ok(worst)
}

/// [`residual_multiplicative`] divided pointwise by `|G(x)|`.
pub fn residual_multiplicative_relative(
    g: &dyn Evaluate,
    alpha: &[f64],
    big_g: &dyn Evaluate,
    probes: &[f64],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in probes {
        let target = big_g.eval(x)?;
        worst = worst.max((product_of_iterates(g, alpha, x)? - target).abs() / target.abs());
    }
    Ok(worst)
}

/// `prod_k (g^k(x))^{alpha_k}`.
pub fn product_of_iterates(g: &dyn Evaluate, alpha: &[f64], x: f64) -> Result<f64> {
    let mut u = x;
    let mut prod = 1.0;
    for (k, &a) in alpha.iter().enumerate() {
        u = g.eval(u)?;
        if a == 0.0 {
            continue;
        }
        if a.fract() == 0.0 && a.abs() < i32::MAX as f64 {
            prod *= u.powi(a as i32);
        } else if u > 0.0 {
            prod *= u.powf(a);
        } else {
            return Err(Error::NonPositiveIterate { k: k + 1, x, value: u });
        }
    }
    Ok(prod)
}

/// `sum_k alpha_k f^k(x) - F(x)`.
fn poly_defect(f: &dyn Evaluate, alpha: &[f64], target: &dyn Evaluate, x: f64) -> Result<f64> {
    let mut u = x;
    let mut acc = 0.0;
    for &a in alpha {
        u = f.eval(u)?;
        acc += a * u;
    }
    Ok(acc - target.eval(x)?)
}

fn residual_poly(f: &dyn Evaluate, alpha: &[f64], target: &dyn Evaluate, probes: &[f64]) -> Result<f64> {
    probes
        .iter()
        .try_fold(0.0f64, |acc, &x| poly_defect(f, alpha, target, x).map(|d| acc.max(d.abs())))
}

/// `h(x) = -g(-x)` for integer exponents with odd sum.
pub fn extend_to_negative(g: &GridFunction, exponents: &[f64]) -> Result<GridFunction> {
    conj_negation(g, exponents)
}

/// The problem after normalization and conjugation to the line.
struct Prepared {
    positive: bool,
    /// Line coefficients before normalization.
    coefficients: Vec<f64>,
    line_interval: Interval,
    line_target_expr: PiecewiseExpr,
    line_target: Target,
    window: Interval,
    line_window: Interval,
}

fn prepare(spec: &ProblemSpec) -> Result<Prepared> {
    spec.validate().stage(Stage::Normalize)?;
    let coefficients = spec.line_coefficients();
    let positive = spec.form.is_positive();
    let (line_interval, line_target_expr) = if positive {
        let i = spec.interval.ln().stage(Stage::ConjugateExpLog)?;
        let f = conj_explog_target(&spec.target).stage(Stage::ConjugateExpLog)?;
        (i, f)
    } else {
        (spec.interval, spec.target.clone())
    };
    let window = match spec.options.window {
        Some(w) => w,
        None if positive => Interval::new(0.5 * spec.interval.lo, 2.0 * spec.interval.hi)?,
        None => {
            let w = spec.interval.width();
            Interval::new(spec.interval.lo - 0.5 * w, spec.interval.hi + 0.5 * w)?
        }
    };
    let line_window = if positive { window.ln()? } else { window };
    Ok(Prepared {
        positive,
        coefficients,
        line_interval,
        line_target: Arc::new(line_target_expr.clone()),
        line_target_expr,
        window,
        line_window,
    })
}

fn contraction_normalization(prep: &Prepared) -> Result<(Vec<f64>, f64)> {
    let sum: f64 = prep.coefficients.iter().sum();
    if sum.abs() < 1e-15 {
        return Err(Error::ZeroSum);
    }
    Ok((prep.coefficients.iter().map(|a| a / sum).collect(), sum))
}

fn sew_normalization(prep: &Prepared) -> Result<(Vec<f64>, f64)> {
    let lead = *prep.coefficients.last().expect("validated");
    if lead == 0.0 {
        return Err(Error::hypothesis("the leading coefficient is zero"));
    }
    Ok((prep.coefficients.iter().map(|a| a / lead).collect(), lead))
}

fn lambdas_of(coefficients: &[f64]) -> Vec<f64> {
    coefficients[..coefficients.len() - 1].iter().map(|a| -a).collect()
}

fn contraction_applicable(spec: &ProblemSpec, prep: &Prepared) -> std::result::Result<(), String> {
    let (alpha, _) = contraction_normalization(prep).map_err(|e| e.to_string())?;
    if alpha[0] == 0.0 {
        return Err("alpha_1 = 0, so K2 < K0 cannot hold".into());
    }
    if alpha.iter().any(|a| *a < 0.0) {
        return Err("normalized exponents must be nonnegative".into());
    }
    let (delta, m) = match (spec.delta, spec.m) {
        (Some(d), Some(m)) => (d, m),
        _ => return Err("no class parameters delta, M given".into()),
    };
    let c = compute_constants(&alpha, delta, m).map_err(|e| e.to_string())?;
    if (alpha[0] - 1.0).abs() > 1e-15 && c.k2 >= c.k0 {
        return Err(format!("K2 = {} is not below K0 = {}", c.k2, c.k0));
    }
    Ok(())
}

fn sew_side(spec: &ProblemSpec, prep: &Prepared) -> std::result::Result<Side, String> {
    let (alpha, lead) = sew_normalization(prep).map_err(|e| e.to_string())?;
    let lambdas = lambdas_of(&alpha);
    let lambda: f64 = lambdas.iter().sum();
    if !(0.0..1.0).contains(&lambda) {
        return Err(format!("lambda = {lambda} is outside [0, 1)"));
    }
    let target = Scaled { inner: prep.line_target.clone(), factor: lead };
    let sides = match spec.side {
        Some(s) => vec![s],
        None => vec![Side::AtLeft, Side::AtRight],
    };
    let mut last = String::new();
    for side in sides {
        let plan = SewingPlan::new(lambdas.clone(), side, prep.line_interval);
        match certify_target(&plan, &target) {
            Ok(c) if c.is_member() => return Ok(side),
            Ok(c) => last = c.summary(),
            Err(e) => last = e.to_string(),
        }
    }
    Err(format!("target is not in a sign class: {last}"))
}

fn choose_route(spec: &ProblemSpec, prep: &Prepared) -> Result<Route> {
    Ok(match spec.solver {
        SolverChoice::Contraction => Route::Contraction,
        SolverChoice::ConstructLeft => Route::ConstructLeft,
        SolverChoice::ConstructRight => Route::ConstructRight,
        SolverChoice::VerifyOnly => Route::VerifyOnly,
        SolverChoice::Auto => {
            let mut reasons = Vec::new();
            match contraction_applicable(spec, prep) {
                Ok(()) => return Ok(Route::Contraction),
                Err(why) => reasons.push(format!("contraction: {why}")),
            }
            match sew_side(spec, prep) {
                Ok(Side::AtLeft) => return Ok(Route::ConstructLeft),
                Ok(Side::AtRight) => return Ok(Route::ConstructRight),
                Err(why) => reasons.push(format!("construction: {why}")),
            }
            if spec.candidate.is_some() {
                return Ok(Route::VerifyOnly);
            }
            return Err(Error::hypothesis(format!("no applicable solver; {}", reasons.join("; "))));
        }
    })
}

/// Evaluator of the line solution rebuilt from its core grid.
fn line_evaluator(route: Route, core: &GridFunction, alpha: &[f64], target: Target, interval: Interval, probes: &[f64]) -> Result<Target> {
    match route {
        Route::Contraction => {
            let alpha = if (alpha[0] - 1.0).abs() <= 1e-15 { vec![1.0] } else { alpha.to_vec() };
            Ok(Arc::new(LineSolution { core: core.clone(), alpha, target, interval }))
        }
        Route::ConstructLeft | Route::ConstructRight => {
            Ok(Arc::new(extend_core(Arc::new(core.clone()), core.domain(), target, probes)?))
        }
        Route::VerifyOnly => Err(Error::schema("route", "verify-only solutions have no stored core")),
    }
}

/// Resolves piece-shape strings; entries ending in `.csv` are read as tables.
pub fn resolve_shapes(texts: &[String]) -> Result<Vec<Shape>> {
    texts
        .iter()
        .map(|t| {
            if t.ends_with(".csv") {
                let text = std::fs::read_to_string(t).map_err(|source| Error::Io { path: t.clone(), source })?;
                let shape = Shape::Table(GridFunction::from_csv(&text)?);
                shape.validate()?;
                Ok(shape)
            } else {
                Shape::parse(t)
            }
        })
        .collect()
}

/// Solver output in line coordinates.
struct LineModel {
    alpha: Vec<f64>,
    normalization: f64,
    target: Target,
    core: Option<GridFunction>,
    eval: Target,
}

/// A solved problem: the report plus evaluators of the solution.
pub struct Solution {
    pub report: SolveReport,
    pub files: ReportFiles,
    line: Target,
    solution: Target,
}

impl Solution {
    /// The solution in line coordinates (`log ∘ g ∘ exp` for the positive
    /// half-line forms).
    pub fn line(&self) -> &Target {
        &self.line
    }

    /// The solution in the problem's coordinates.
    pub fn solution(&self) -> &Target {
        &self.solution
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.solution.eval(x)
    }

    /// Writes `report.json` and the CSV files into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        crate::report::write_report(&self.report, &self.files, dir)
    }
}

impl std::fmt::Debug for Solution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solution").field("report", &self.report).finish()
    }
}

struct Residuals {
    poly: f64,
    mult: Option<f64>,
    mult_relative: Option<f64>,
    negation: Option<NegationRecord>,
    plot: Vec<(f64, f64, f64)>,
    solution_sample: GridFunction,
    negative_sample: Option<GridFunction>,
}

fn candidate_eval(spec: &ProblemSpec, prep: &Prepared) -> Result<(Target, Target)> {
    let cand = spec
        .candidate
        .clone()
        .ok_or_else(|| Error::schema("candidate", "verify-only needs a candidate solution"))?;
    let problem: Target = Arc::new(cand.clone());
    let line: Target = if prep.positive {
        Arc::new(conj_explog_target(&cand).stage(Stage::ConjugateExpLog)?)
    } else {
        problem.clone()
    };
    Ok((line, problem))
}

/// Residuals, negation extension and output samples.
fn evaluate(spec: &ProblemSpec, prep: &Prepared, model: &LineModel, stages: &mut Vec<Stage>) -> Result<(Target, Residuals)> {
    let n_probes = spec.options.probes;
    let line_probes = linspace(prep.line_window.lo, prep.line_window.hi, n_probes);
    let poly = residual_poly(model.eval.as_ref(), &model.alpha, model.target.as_ref(), &line_probes)
        .stage(Stage::VerifyMultiplicative)?;

    let solution: Target = if prep.positive {
        stages.push(Stage::ConjugateBack);
        Arc::new(ExpConjugate(model.eval.clone()))
    } else {
        model.eval.clone()
    };
    let big_g: Target = Arc::new(spec.target.clone());
    let probes = linspace(prep.window.lo, prep.window.hi, n_probes);
    let (mult, mult_relative) = if prep.positive {
        stages.push(Stage::VerifyMultiplicative);
        let alpha = &prep.coefficients;
        (
            Some(residual_multiplicative(solution.as_ref(), alpha, big_g.as_ref(), &probes).stage(Stage::VerifyMultiplicative)?),
            Some(
                residual_multiplicative_relative(solution.as_ref(), alpha, big_g.as_ref(), &probes)
                    .stage(Stage::VerifyMultiplicative)?,
            ),
        )
    } else {
        (None, None)
    };

    let plot_x = linspace(prep.window.lo, prep.window.hi, PLOT_ROWS);
    let mut plot = Vec::with_capacity(plot_x.len());
    for &x in &plot_x {
        let v = solution.eval(x)?;
        let r = if prep.positive {
            product_of_iterates(solution.as_ref(), &prep.coefficients, x)? - big_g.eval(x)?
        } else {
            poly_defect(solution.as_ref(), &model.alpha, model.target.as_ref(), x)?
        };
        plot.push((x, v, r));
    }
    let solution_sample = GridFunction::from_samples(
        linspace(prep.window.lo, prep.window.hi, spec.options.grid),
        |x| solution.eval(x),
        Extension::ClampToEndpointValues,
    )?;

    let mut negative_sample = None;
    let negation = if prep.positive {
        Some(match check_negation_parity(&prep.coefficients) {
            Ok(()) => {
                stages.push(Stage::NegationExtend);
                let h = Mirror(solution.clone());
                let big_h = Mirror(big_g.clone());
                let neg = prep.window.negated();
                let probes = linspace(neg.lo, neg.hi, n_probes);
                let r = residual_multiplicative(&h, &prep.coefficients, &big_h, &probes).stage(Stage::NegationExtend)?;
                let rr = residual_multiplicative_relative(&h, &prep.coefficients, &big_h, &probes)
                    .stage(Stage::NegationExtend)?;
                negative_sample = Some(extend_to_negative(&solution_sample, &prep.coefficients).stage(Stage::NegationExtend)?);
                NegationRecord {
                    applied: true,
                    note: "h(x) = -g(-x) on the negative half-line".into(),
                    window: Some(neg),
                    residual_mult: Some(r),
                    residual_mult_relative: Some(rr),
                }
            }
            Err(e) => NegationRecord {
                applied: false,
                note: e.to_string(),
                window: None,
                residual_mult: None,
                residual_mult_relative: None,
            },
        })
    } else {
        None
    };
    Ok((
        solution,
        Residuals { poly, mult, mult_relative, negation, plot, solution_sample, negative_sample },
    ))
}

fn plan_for(spec: &ProblemSpec, prep: &Prepared, lambdas: Vec<f64>, side: Side) -> Result<SewingPlan> {
    let to_line = |v: f64| if prep.positive { v.ln() } else { v };
    Ok(SewingPlan {
        x0: spec.options.x0.map(to_line),
        seeds: spec.options.seeds.as_ref().map(|s| s.iter().map(|&v| to_line(v)).collect()),
        shapes: resolve_shapes(&spec.options.initial)?,
        piece_knots: spec.options.grid,
        eps_seq: DEFAULT_EPS_SEQ,
        ..SewingPlan::new(lambdas, side, prep.line_interval)
    })
}

/// Solves a problem end to end.
pub fn solve(spec: &ProblemSpec) -> Result<Solution> {
    solve_perturbed(spec, 0.0)
}

fn solve_perturbed(spec: &ProblemSpec, eps: f64) -> Result<Solution> {
    let mut stages = vec![Stage::Normalize];
    let mut prep = prepare(spec)?;
    if prep.positive {
        stages.push(Stage::ConjugateExpLog);
    }
    if eps != 0.0 {
        prep.line_target = Arc::new(Bumped { inner: prep.line_target.clone(), eps, interval: prep.line_interval });
    }
    let route = choose_route(spec, &prep)?;
    let mut certificates = Vec::new();
    let mut warnings = Vec::new();
    let mut constants: Option<Constants> = None;
    let mut iterations = None;
    let mut trace = Vec::new();
    let mut ratios = Vec::new();
    let mut sewing = None;
    let mut candidate = None;
    let line_probes = linspace(prep.line_window.lo, prep.line_window.hi, spec.options.probes);

    let model = match route {
        Route::Contraction => {
            let (alpha, sum) = contraction_normalization(&prep).stage(Stage::Normalize)?;
            let delta = spec.delta.ok_or_else(|| Error::schema("delta", "the contraction solver needs delta"))?;
            let m = spec.m.ok_or_else(|| Error::schema("M", "the contraction solver needs M"))?;
            let target: Target = Arc::new(Scaled { inner: prep.line_target.clone(), factor: sum });
            let opts = ContractionOptions {
                grid: spec.options.grid,
                tol: spec.options.tol,
                max_iter: spec.options.max_iter,
                probes: spec.options.probes,
                initial: spec.options.iterate0,
            };
            stages.push(Stage::CertifyClasses);
            stages.push(Stage::Solve);
            let r = picard_solve(target.clone(), &alpha, delta, m, prep.line_interval, &opts).stage(Stage::Solve)?;
            if let Some(c) = &r.target_certificate {
                certificates.push(NamedCertificate { role: "target F_I(K1 delta, K0 M)".into(), certificate: c.clone() });
                if prep.positive {
                    let gs = spec.target.sample(spec.interval, spec.options.grid, Extension::ClampToEndpointValues)?;
                    let gc = check_g_class(&gs, c.spec.delta.unwrap_or(0.0), c.spec.m.unwrap_or(0.0), spec.interval)
                        .stage(Stage::CertifyClasses)?;
                    certificates.push(NamedCertificate { role: "target G_J(K1 delta, K0 M)".into(), certificate: gc });
                }
            }
            if let Some(c) = &r.solution_certificate {
                certificates.push(NamedCertificate { role: "solution F_I(delta, M)".into(), certificate: c.clone() });
            }
            warnings.extend(r.warnings.iter().cloned());
            constants = Some(r.constants);
            iterations = Some(r.iterations);
            trace = r.iterate_gap_trace.clone();
            ratios = r.gap_ratios.clone();
            let core = r.line_solution().core.clone();
            let eval = line_evaluator(route, &core, &alpha, target.clone(), prep.line_interval, &line_probes)?;
            LineModel { alpha, normalization: sum, target, core: Some(core), eval }
        }
        Route::ConstructLeft | Route::ConstructRight => {
            let side = if route == Route::ConstructLeft { Side::AtLeft } else { Side::AtRight };
            let (alpha, lead) = sew_normalization(&prep).stage(Stage::Normalize)?;
            let target: Target = Arc::new(Scaled { inner: prep.line_target.clone(), factor: lead });
            let plan = plan_for(spec, &prep, lambdas_of(&alpha), side)?;
            stages.push(Stage::CertifyClasses);
            if spec.form == Form::Root {
                let g_norm = ExpConjugate(target.clone());
                check_root_hypotheses(&g_norm, side, spec.interval).stage(Stage::CertifyClasses)?;
            }
            let cert = certify_target(&plan, target.as_ref()).stage(Stage::CertifyClasses)?;
            certificates.push(NamedCertificate { role: "target R_{anchor, lambda}".into(), certificate: cert });
            if prep.positive {
                let gs = GridFunction::sample_uniform(spec.interval, spec.options.grid.max(2049), |x| ExpConjugate(target.clone()).eval(x), Extension::ClampToEndpointValues)?;
                let eta = if side == Side::AtLeft { spec.interval.lo } else { spec.interval.hi };
                let sc = check_s_class(&gs, eta, plan.lambda(), spec.interval).stage(Stage::CertifyClasses)?;
                certificates.push(NamedCertificate { role: "target S_{anchor, lambda}".into(), certificate: sc });
            }
            stages.push(Stage::Solve);
            let sewn = sew(&plan, target.as_ref()).stage(Stage::Solve)?;
            sewing = Some(sewn.summary().clone());
            stages.push(Stage::ExtendToLine);
            let core = sewn.to_grid().stage(Stage::ExtendToLine)?;
            let eval = line_evaluator(route, &core, &alpha, target.clone(), prep.line_interval, &line_probes)
                .stage(Stage::ExtendToLine)?;
            LineModel { alpha, normalization: lead, target, core: Some(core), eval }
        }
        Route::VerifyOnly => {
            let (alpha, lead) = sew_normalization(&prep).stage(Stage::Normalize)?;
            let target: Target = Arc::new(Scaled { inner: prep.line_target.clone(), factor: lead });
            let (line, _) = candidate_eval(spec, &prep)?;
            stages.push(Stage::CertifyClasses);
            let lambdas = lambdas_of(&alpha);
            let lambda: f64 = lambdas.iter().sum();
            let sample = GridFunction::sample_uniform(prep.line_interval, spec.options.grid, |x| line.eval(x), Extension::ClampToEndpointValues)?;
            if lambda <= 0.0 {
                let probes = linspace(prep.line_interval.lo, prep.line_interval.hi, spec.options.probes);
                let c = verify_candidate_lambda_nonpos(&sample, &lambdas, target.as_ref(), prep.line_interval, &probes)
                    .stage(Stage::CertifyClasses)?;
                certificates.push(NamedCertificate { role: "candidate A_1".into(), certificate: c.class.clone() });
                candidate = Some(c);
            } else {
                let c = check_ab_class(&sample, 1.0, prep.line_interval, ClassKind::A).stage(Stage::CertifyClasses)?;
                certificates.push(NamedCertificate { role: "candidate A_1".into(), certificate: c });
            }
            LineModel { alpha, normalization: lead, target, core: None, eval: line }
        }
    };

    let (solution, res) = evaluate(spec, &prep, &model, &mut stages)?;
    if let (Route::Contraction, Some(core)) = (route, &model.core) {
        if prep.positive {
            if let (Some(d), Some(m)) = (spec.delta, spec.m) {
                let g = conj_explog_fn_back(core)?;
                let c = check_g_class(&g, d, m, spec.interval).stage(Stage::CertifyClasses)?;
                certificates.push(NamedCertificate { role: "solution G_J(delta, M)".into(), certificate: c });
            }
        }
    }
    let stability_constant = match (constants, prep.positive) {
        (Some(c), true) if c.k2 < c.k0 => stability_bound(spec.interval.lo, spec.interval.hi, &c).ok(),
        _ => None,
    };
    let report = SolveReport {
        name: spec.name.clone(),
        form: spec.form,
        route,
        stages,
        exponents: spec.exponents.clone(),
        coefficients: model.alpha.clone(),
        normalization: model.normalization,
        interval: spec.interval,
        line_interval: prep.line_interval,
        line_target: prep.line_target_expr.to_string(),
        constants,
        stability_constant,
        iterations,
        iterate_gap_trace: trace,
        gap_ratios: ratios,
        probe_window: prep.window,
        probes: spec.options.probes,
        residual_poly: res.poly,
        residual_mult: res.mult,
        residual_mult_relative: res.mult_relative,
        negation: res.negation,
        certificates,
        sewing,
        candidate,
        warnings,
    };
    let files = ReportFiles {
        core: model.core.clone(),
        solution: Some(res.solution_sample),
        plot: res.plot,
        negative: res.negative_sample,
    };
    Ok(Solution { report, files, line: model.eval, solution })
}

/// Recomputes the residuals of a stored solution from the problem and the
/// files in `dir`.
pub fn verify_stored(spec: &ProblemSpec, dir: impl AsRef<Path>) -> Result<VerifyReport> {
    let dir = dir.as_ref();
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|source| Error::Io { path: p.display().to_string(), source })
    };
    let json: serde_json::Value =
        serde_json::from_str(&read(REPORT_FILE)?).map_err(|e| Error::schema("report", e.to_string()))?;
    let route: Route = serde_json::from_value(json["route"].clone()).map_err(|e| Error::schema("route", e.to_string()))?;
    let recorded_poly = json["residual_poly"].as_f64();
    let recorded_mult = json["residual_mult"].as_f64();

    let prep = prepare(spec)?;
    let line_probes = linspace(prep.line_window.lo, prep.line_window.hi, spec.options.probes);
    let model = match route {
        Route::VerifyOnly => {
            let (alpha, lead) = sew_normalization(&prep)?;
            let target: Target = Arc::new(Scaled { inner: prep.line_target.clone(), factor: lead });
            let (line, _) = candidate_eval(spec, &prep)?;
            LineModel { alpha, normalization: lead, target, core: None, eval: line }
        }
        _ => {
            let (alpha, factor) = if route == Route::Contraction {
                contraction_normalization(&prep)?
            } else {
                sew_normalization(&prep)?
            };
            let target: Target = Arc::new(Scaled { inner: prep.line_target.clone(), factor });
            let core = GridFunction::from_csv(&read(CORE_CSV)?)?;
            let eval = line_evaluator(route, &core, &alpha, target.clone(), prep.line_interval, &line_probes)?;
            LineModel { alpha, normalization: factor, target, core: Some(core), eval }
        }
    };
    let mut stages = Vec::new();
    let (_, res) = evaluate(spec, &prep, &model, &mut stages)?;
    let mut gap: Option<f64> = None;
    if let Some(p) = recorded_poly {
        gap = Some((p - res.poly).abs());
    }
    if let (Some(a), Some(b)) = (recorded_mult, res.mult) {
        gap = Some(gap.unwrap_or(0.0).max((a - b).abs()));
    }
    Ok(VerifyReport {
        route,
        probes: spec.options.probes,
        residual_poly: res.poly,
        residual_mult: res.mult,
        recorded_residual_poly: recorded_poly,
        recorded_residual_mult: recorded_mult,
        reproduction_gap: gap,
    })
}

/// Solves the problem and its perturbation `G * exp(eps * bump(log x))` and
/// compares the solutions with the stability bound.
pub fn stability(spec: &ProblemSpec, eps: f64) -> Result<StabilityReport> {
    if !spec.form.is_positive() {
        return Err(Error::schema("form", "the stability check applies to the positive half-line forms"));
    }
    let base = solve_perturbed(spec, 0.0)?;
    if base.report.route != Route::Contraction {
        return Err(Error::hypothesis("the stability bound applies to the contraction route only"));
    }
    let pert = solve_perturbed(spec, eps)?;
    let constants = base.report.constants.expect("contraction route records constants");
    let (c, d) = (spec.interval.lo, spec.interval.hi);
    let bound = stability_bound(c, d, &constants)?;
    let prep = prepare(spec)?;
    let sum = base.report.normalization;
    let f: Target = Arc::new(Scaled { inner: prep.line_target.clone(), factor: sum });
    let f1: Target = Arc::new(Bumped { inner: f.clone(), eps, interval: prep.line_interval });
    let big_g = ExpConjugate(f);
    let big_g1 = ExpConjugate(f1);
    let probes = linspace(prep.window.lo, prep.window.hi, spec.options.probes);
    let check = stability_check(base.solution(), pert.solution(), &big_g, &big_g1, bound, &probes)?;
    Ok(StabilityReport { epsilon: eps, c, d, constants, check })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcrep::FnEval;

    #[test]
    fn identity_residual_is_zero() {
        let id = FnEval(|x: f64| x);
        let r = residual_multiplicative(&id, &[1.0], &id, &linspace(0.5, 3.0, 11)).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn fractional_exponents_need_positive_iterates() {
        let neg = FnEval(|x: f64| -x);
        let err = residual_multiplicative(&neg, &[0.5], &neg, &[1.0]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveIterate { k: 1, .. }));
        assert!(residual_multiplicative(&neg, &[1.0, 2.0], &FnEval(|x: f64| -x * x * x), &[1.0, 2.0]).is_ok());
    }

    #[test]
    fn negation_refuses_even_sum() {
        let g = GridFunction::identity(Interval::new(1.0, 2.0).unwrap());
        assert!(matches!(extend_to_negative(&g, &[1.0, 1.0]), Err(Error::ParityViolation(_))));
        assert!(matches!(extend_to_negative(&g, &[0.75, 0.25]), Err(Error::ParityViolation(_))));
        let h = extend_to_negative(&g, &[1.0]).unwrap();
        assert_eq!(h.eval(-1.5).unwrap(), -1.5);
    }

    #[test]
    fn bump_vanishes_off_interval() {
        let i = Interval::new(0.0, 1.0).unwrap();
        assert_eq!(bump(i, 0.5), 1.0);
        assert_eq!(bump(i, 0.0), 0.0);
        assert_eq!(bump(i, 2.0), 0.0);
    }
}
