//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on failure.

use std::f64::consts::E;
use std::sync::Arc;
use std::time::{Duration, Instant};

use iterfunc::cases;
use iterfunc::classes::{check_f_class, check_g_class, degenerate_rule, Degeneracy, Verdict};
use iterfunc::conjugation::{conj_explog_fn, conj_explog_fn_back, conj_explog_target, ExpConjugate};
use iterfunc::construction::{
    core_probes, extend_to_line, generate_sequence, residual_lcp, sew, SewingPlan, Shape, Side,
};
use iterfunc::contraction::compute_constants;
use iterfunc::error::{Error, ErrorCategory};
use iterfunc::funcrep::{iterate_at, linspace, sup_norm_diff, Evaluate, Extension, GridFunction, Interval, Target};
use iterfunc::multeq::{extend_to_negative, residual_multiplicative, solve, stability};
use iterfunc::problem::parse_problem;
use iterfunc::InitialIterate;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn constants_reproduction() -> Outcome {
    let t = Instant::now();
    let c = compute_constants(&[0.75, 0.25], 2.0 / 3.0, 2.0).map_err(err)?;
    let elapsed = t.elapsed();
    let detail = format!(
        "K0 = {} (err {:.1e}), K2 = {}, K1 = {} so K1*delta = {:.6} and K0*M = {:.6}, {:?}",
        c.k0,
        (c.k0 - 11.0 / 12.0).abs(),
        c.k2,
        c.k1,
        c.k1 * 2.0 / 3.0,
        c.k0 * 2.0,
        elapsed
    );
    check(
        (c.k0 - 11.0 / 12.0).abs() <= 1e-15 && c.k2 == 0.25 && c.k2 < c.k0 && elapsed < Duration::from_millis(1),
        detail,
    )
}

fn example_one() -> Outcome {
    let spec = parse_problem(cases::EXAMPLE_1).map_err(err)?;
    let t = Instant::now();
    let a = solve(&spec).map_err(err)?;
    let elapsed = t.elapsed();
    let mut spec_b = spec.clone();
    spec_b.options.iterate0 = InitialIterate::TargetInterpolant;
    let b = solve(&spec_b).map_err(err)?;
    let probes = linspace(0.5, 2.0 * E, 8193);
    let mult = iterfunc::multeq::residual_multiplicative(a.solution().as_ref(), &[0.75, 0.25], &spec.target, &probes)
        .map_err(err)?;
    let ratios = &a.report.gap_ratios;
    let worst_ratio = ratios.iter().skip(1).cloned().fold(0.0, f64::max);
    let unique = sup_norm_diff(a.solution(), b.solution(), &probes).map_err(err)?;
    let detail = format!(
        "residual_mult {mult:.2e} on 8193 probes, {} and {} iterations, worst gap ratio {worst_ratio:.4} (bound {:.4}), \
         initial iterates agree to {unique:.1e}, {:?}",
        a.report.iterations.unwrap_or(0),
        b.report.iterations.unwrap_or(0),
        3.0 / 11.0 + 0.05,
        elapsed
    );
    check(
        mult <= 1e-6 && worst_ratio <= 3.0 / 11.0 + 0.05 && unique <= 1e-8 && elapsed < Duration::from_secs(10),
        detail,
    )
}

fn identity_case() -> Outcome {
    let spec = parse_problem(cases::IDENTITY).map_err(err)?;
    let s = solve(&spec).map_err(err)?;
    let probes = linspace(1.0, E, 8193);
    let id = iterfunc::FnEval(|x: f64| x);
    let d = sup_norm_diff(s.solution(), &id, &probes).map_err(err)?;
    let it = s.report.iterations.unwrap_or(usize::MAX);
    check(d <= 1e-10 && it <= 2, format!("sup |g - id| on J = {d:.1e} after {it} iteration(s)"))
}

fn stability_bound_check() -> Outcome {
    let spec = parse_problem(cases::EXAMPLE_1).map_err(err)?;
    let t = Instant::now();
    let r = stability(&spec, 1e-3).map_err(err)?;
    let elapsed = t.elapsed();
    let c = r.check;
    check(
        c.pass && (c.bound - 1.5 * E).abs() <= 1e-12 && elapsed < Duration::from_secs(20),
        format!(
            "||g - g1|| = {:.3e} <= {:.4} * ||G - G1|| = {:.3e} (constant 3e/2 = {:.4}), {:?}",
            c.lhs,
            c.bound,
            c.rhs,
            1.5 * E,
            elapsed
        ),
    )
}

/// `H = F/3` with `F = log G(exp x)` from the second bundled problem.
fn example_two_h() -> Result<Target, String> {
    let spec = parse_problem(cases::EXAMPLE_2).map_err(err)?;
    let f = conj_explog_target(&spec.target).map_err(err)?;
    Ok(Arc::new(iterfunc::FnEval(move |x: f64| f.eval(x).unwrap_or(f64::NAN) / 3.0)))
}

fn example_two_plan() -> SewingPlan {
    SewingPlan {
        seeds: Some(vec![0.6]),
        ..SewingPlan::new(vec![2.0 / 3.0], Side::AtLeft, Interval::new(0.0, 1.0).unwrap())
    }
}

fn example_two() -> Outcome {
    let h = example_two_h()?;
    let plan = example_two_plan();
    let sewn = sew(&plan, h.as_ref()).map_err(err)?;
    let probes = core_probes(&sewn, 4096);
    let core_res = residual_lcp(&sewn, &plan.lambdas, h.as_ref(), &probes).map_err(err)?;
    let xs = sewn.sequence();
    let ratio = xs[xs.len() - 1] / xs[xs.len() - 2];
    let root = (1.0 + 2f64.sqrt()) / 3.0;
    let rejected = matches!(
        generate_sequence(&plan, h.as_ref(), &[0.3], 100_000),
        Err(Error::SeedRejected { .. })
    );
    let accepted = generate_sequence(&plan, h.as_ref(), &[0.6], 100_000).is_ok();
    let window = linspace(-2.0, 3.0, 4096);
    let line = extend_to_line(&sewn, h.clone(), &window).map_err(err)?;
    let line_res = residual_lcp(&line, &plan.lambdas, h.as_ref(), &window).map_err(err)?;
    check(
        core_res <= 1e-6 && (ratio - root).abs() <= 0.01 && rejected && accepted && line_res <= 1e-6,
        format!(
            "core residual {core_res:.1e} on 4096 probes, {} terms, ratio {ratio:.5} vs {root:.5}, \
             seed 0.3 rejected: {rejected}, seed 0.6 accepted: {accepted}, residual on [-2, 3] {line_res:.1e}",
            xs.len()
        ),
    )
}

fn multiplicity() -> Outcome {
    let h = example_two_h()?;
    let a = example_two_plan();
    let b = SewingPlan { shapes: vec![Shape::Bend(0.5)], ..example_two_plan() };
    let sa = sew(&a, h.as_ref()).map_err(err)?;
    let sb = sew(&b, h.as_ref()).map_err(err)?;
    let probes = core_probes(&sa, 4096);
    let ra = residual_lcp(&sa, &a.lambdas, h.as_ref(), &probes).map_err(err)?;
    let rb = residual_lcp(&sb, &b.lambdas, h.as_ref(), &probes).map_err(err)?;
    let diff = sup_norm_diff(&sa, &sb, &probes).map_err(err)?;
    check(
        ra <= 1e-6 && rb <= 1e-6 && diff > 1e-3,
        format!("residuals {ra:.1e} (linear) and {rb:.1e} (bend 0.5), sup difference {diff:.3e}"),
    )
}

fn iterative_root() -> Outcome {
    let spec = parse_problem(cases::ROOT).map_err(err)?;
    let s = solve(&spec).map_err(err)?;
    let g = s.solution();
    let probes = linspace(spec.options.window.map_or(0.5, |w| w.lo), 2.0 * E, 8193);
    let mut worst = 0.0f64;
    for &x in &probes {
        worst = worst.max((iterate_at(g, 2, x).map_err(err)? - spec.target.eval(x).map_err(err)?).abs());
    }
    let refused = parse_problem(
        "form = multiplicative\nexponents = [0, 1]\n\
         target = on (0,1]: 1 ; on [1,e]: exp(log(x)^2/2) ; on [e,inf): exp(1/2)\n\
         interval = [1, e]\ndelta = 1/2\nM = 2\nsolver = contraction\n",
    )
    .map_err(err)
    .and_then(|p| match solve(&p) {
        Err(e) if e.category() == ErrorCategory::Hypothesis && e.to_string().contains("alpha_1 = 0") => Ok(e.to_string()),
        Err(e) => Err(format!("wrong error: {e}")),
        Ok(_) => Err("contraction route accepted alpha = [0, 1]".into()),
    });
    let detail = format!(
        "sup |g^2 - G| = {worst:.1e} on 8193 probes; contraction refusal: {}",
        match &refused {
            Ok(m) => m.clone(),
            Err(m) => m.clone(),
        }
    );
    check(worst <= 1e-6 && refused.is_ok(), detail)
}

/// Random strictly increasing PL map of `I` onto itself with slopes in
/// `[lo, hi]`.
fn random_member(rng: &mut StdRng, interval: Interval, knots: usize, lo: f64, hi: f64) -> Option<GridFunction> {
    // slopes 1 + theta (u_i - mean u), theta chosen to stay strictly inside [lo, hi]
    let u: Vec<f64> = (0..knots - 1).map(|_| rng.gen_range(lo..hi)).collect();
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    let mut theta = 1.0f64;
    for v in &u {
        let dv = v - mean;
        if dv > 0.0 {
            theta = theta.min(0.99 * (hi - 1.0) / dv);
        } else if dv < 0.0 {
            theta = theta.min(0.99 * (1.0 - lo) / -dv);
        }
    }
    let xs = interval.linspace(knots);
    let h = interval.width() / (knots - 1) as f64;
    let mut ys = vec![interval.lo];
    for v in &u {
        let last = ys[ys.len() - 1];
        ys.push(last + (1.0 + theta * (v - mean)) * h);
    }
    ys[knots - 1] = interval.hi;
    GridFunction::new(xs, ys, Extension::ClampToEndpointValues).ok()
}

fn degeneracy_suite() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0008);
    let j = Interval::new(1.0, E).unwrap();
    let i = j.ln().unwrap();
    let mut cases = 0;
    let mut identity_only = 0;
    for k in 0..2000 {
        let mut delta: f64 = rng.gen_range(0.0..2.0);
        let mut m: f64 = rng.gen_range(0.0..3.0);
        match k % 5 {
            0 => delta = 1.0,
            1 => m = 1.0,
            _ => {}
        }
        let expected_empty = m < 1.0 || delta > 1.0;
        let rule = degenerate_rule(delta, m);
        if (rule == Degeneracy::Empty) != expected_empty {
            return Err(format!("rule disagrees at delta = {delta}, M = {m}: {rule:?}"));
        }
        let id = GridFunction::identity_on(j.linspace(33));
        let cert_id = check_g_class(&id, delta, m, j).map_err(err)?;
        match rule {
            Degeneracy::Empty => {
                if cert_id.verdict == Verdict::Member {
                    return Err(format!("identity certified in an empty class ({delta}, {m})"));
                }
            }
            Degeneracy::IdentityOnly => {
                identity_only += 1;
                if cert_id.verdict != Verdict::Member {
                    return Err(format!("identity rejected for ({delta}, {m})"));
                }
                let f = random_member(&mut rng, i, 17, 0.5, 1.5).ok_or("no random member")?;
                let g = conj_explog_fn_back(&f).map_err(err)?;
                let cert = check_g_class(&g, delta, m, j).map_err(err)?;
                let far = sup_norm_diff(&g, &iterfunc::FnEval(|x: f64| x), &j.linspace(257)).map_err(err)?;
                if cert.verdict == Verdict::Member && far > 1e-9 {
                    return Err(format!("non-identity map certified for ({delta}, {m})"));
                }
            }
            Degeneracy::Proper => {}
        }
        cases += 1;
    }
    check(true, format!("{cases} random (delta, M) pairs, {identity_only} identity-only regimes checked"))
}

fn conjugation_coherence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0009);
    let mut worst_up = 0.0f64;
    let mut worst_down = 0.0f64;
    let mut verdicts = 0;
    for trial in 0..100 {
        let c: f64 = rng.gen_range(0.5..2.0);
        let d: f64 = c * rng.gen_range(1.5..4.0);
        let j = Interval::new(c, d).unwrap();
        let i = j.ln().unwrap();
        let delta = rng.gen_range(0.2..0.9);
        let m = rng.gen_range(1.1..3.0);
        let knots = rng.gen_range(5..40);
        let f = random_member(&mut rng, i, knots, delta, m).ok_or("no random member")?;
        let g = conj_explog_fn_back(&f).map_err(err)?;
        // verdicts agree for the defining class, a tighter one and a looser one
        for (dd, mm) in [(delta, m), (0.5 * (1.0 + delta), 0.5 * (1.0 + m)), (0.5 * delta, 2.0 * m)] {
            let vg = check_g_class(&g, dd, mm, j).map_err(err)?.verdict;
            let vf = check_f_class(&conj_explog_fn(&g).map_err(err)?, dd, mm, i).map_err(err)?.verdict;
            let vf0 = check_f_class(&f, dd, mm, i).map_err(err)?.verdict;
            if vg != vf || vf != vf0 {
                return Err(format!("trial {trial}: verdicts differ ({vg:?}, {vf:?}, {vf0:?})"));
            }
            verdicts += 1;
        }
        // residual transport for a perturbed candidate
        let a1 = rng.gen_range(0.3..0.9);
        let alpha = [a1, 1.0 - a1];
        let fc = f.clone();
        let big_f = Arc::new(iterfunc::FnEval(move |x: f64| {
            let u = fc.eval(x).unwrap();
            a1 * u + (1.0 - a1) * fc.eval(u).unwrap()
        }));
        let eps = 10f64.powf(rng.gen_range(-6.0..-2.0));
        let width = i.width();
        let cand = GridFunction::from_samples(
            i.linspace(65),
            |x| Ok(f.eval(x)? + eps * (std::f64::consts::PI * (x - i.lo) / width).sin()),
            Extension::ClampToEndpointValues,
        )
        .map_err(err)?;
        let probes_j = j.linspace(2049);
        let probes_i: Vec<f64> = probes_j.iter().map(|x| x.ln()).collect();
        let poly = residual_lcp_form(&cand, &alpha, big_f.as_ref(), &probes_i)?;
        let g_c = ExpConjugate(cand.clone());
        let big_g = ExpConjugate(big_f.clone());
        let mult = residual_multiplicative(&g_c, &alpha, &big_g, &probes_j).map_err(err)?;
        let slack = 1e-12;
        if mult > d * poly + slack || poly > mult / c + slack {
            return Err(format!("trial {trial}: mult {mult:e} vs poly {poly:e} with c = {c}, d = {d}"));
        }
        worst_up = worst_up.max(mult / (d * poly));
        worst_down = worst_down.max(c * poly / mult);
    }
    check(
        true,
        format!(
            "100 random members, {verdicts} verdict pairs equal; max mult/(e^b poly) = {worst_up:.3}, \
             max c poly/mult = {worst_down:.3}"
        ),
    )
}

fn residual_lcp_form(f: &GridFunction, alpha: &[f64], target: &dyn Evaluate, probes: &[f64]) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for &x in probes {
        let mut u = x;
        let mut acc = 0.0;
        for a in alpha {
            u = f.eval(u).map_err(err)?;
            acc += a * u;
        }
        worst = worst.max((acc - target.eval(x).map_err(err)?).abs());
    }
    Ok(worst)
}

fn negation_extension() -> Outcome {
    let cubed = "form = multiplicative\nexponents = [2, 1]\n\
                 target = on (0,1]: 1 ; on [1,e]: exp(3*(1+log(x))*log(x)/2) ; on [e,inf): e^3\n\
                 interval = [1, e]\ndelta = 2/3\nM = 2\n";
    let spec = parse_problem(cubed).map_err(err)?;
    let s = solve(&spec).map_err(err)?;
    let neg = s.report.negation.clone().ok_or("no negation record")?;
    let rel = neg.residual_mult_relative.ok_or("negation not applied")?;
    let ex3 = solve(&parse_problem(cases::EXAMPLE_3).map_err(err)?).map_err(err)?;
    let rel3 = ex3
        .report
        .negation
        .and_then(|n| n.residual_mult_relative)
        .ok_or("negation not applied to [6, 3]")?;
    let g = GridFunction::identity(Interval::new(1.0, 2.0).unwrap());
    let even = matches!(extend_to_negative(&g, &[1.0, 1.0]), Err(Error::ParityViolation(_)));
    let frac = matches!(extend_to_negative(&g, &[0.75, 0.25]), Err(Error::ParityViolation(_)));
    let ex1 = solve(&parse_problem(cases::EXAMPLE_1).map_err(err)?).map_err(err)?;
    let ex1_skipped = ex1.report.negation.is_some_and(|n| !n.applied);
    check(
        rel <= 1e-6 && rel3 <= 1e-6 && even && frac && ex1_skipped,
        format!(
            "alpha = [2, 1]: relative residual on the negative half-line {rel:.1e}; alpha = [6, 3]: {rel3:.1e}; \
             even sum refused: {even}; fractional refused: {frac}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("constants K0 = 11/12, K2 = 1/4", constants_reproduction),
        ("example 1 end to end", example_one),
        ("identity target returns the identity", identity_case),
        ("stability bound 3e/2", stability_bound_check),
        ("example 2 construction", example_two),
        ("multiplicity of constructed solutions", multiplicity),
        ("iterative root and contraction refusal", iterative_root),
        ("degeneracy rule", degeneracy_suite),
        ("conjugation coherence", conjugation_coherence),
        ("negative half-line extension", negation_extension),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
