use std::f64::consts::E;

use iterfunc::cases;
use iterfunc::error::ErrorCategory;
use iterfunc::funcrep::{linspace, Evaluate};
use iterfunc::multeq::residual_multiplicative;
use iterfunc::{parse_problem, solve, verify_stored, Route};

fn route_of(text: &str) -> Route {
    solve(&parse_problem(text).unwrap()).unwrap().report.route
}

#[test]
fn bundled_cases_take_expected_routes() {
    assert_eq!(route_of(cases::EXAMPLE_1), Route::Contraction);
    assert_eq!(route_of(cases::EXAMPLE_2), Route::ConstructLeft);
    assert_eq!(route_of(cases::EXAMPLE_3), Route::VerifyOnly);
    assert_eq!(route_of(cases::IDENTITY), Route::Contraction);
}

#[test]
fn bundled_cases_have_small_residuals() {
    for (name, text) in cases::ALL {
        let sol = solve(&parse_problem(text).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let r = &sol.report;
        assert!(r.residual_poly <= 1e-6, "{name}: poly {}", r.residual_poly);
        if let Some(m) = r.residual_mult {
            assert!(m <= 1e-6, "{name}: mult {m}");
        }
    }
}

#[test]
fn stored_solutions_reverify_identically() {
    for (name, text) in cases::ALL {
        let spec = parse_problem(text).unwrap();
        let sol = solve(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = sol.write(dir.path()).unwrap();
        assert!(written.iter().any(|p| p.ends_with("report.json")), "{name}");
        let v = verify_stored(&spec, dir.path()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(v.route, sol.report.route);
        let gap = v.reproduction_gap.unwrap();
        assert!(gap <= 1e-12, "{name}: reproduction gap {gap}");
    }
}

#[test]
fn example_one_records_certificate_warnings() {
    let sol = solve(&parse_problem(cases::EXAMPLE_1).unwrap()).unwrap();
    let r = &sol.report;
    let c = r.constants.unwrap();
    assert!((c.k0 - 11.0 / 12.0).abs() < 1e-15);
    assert!((r.stability_constant.unwrap() - 1.5 * E).abs() < 1e-12);
    assert!(!r.warnings.is_empty());
    assert!(r.gap_ratios.iter().skip(1).all(|&q| q <= 3.0 / 11.0 + 0.05));
}

#[test]
fn example_one_solution_matches_target_outside_core() {
    let spec = parse_problem(cases::EXAMPLE_1).unwrap();
    let sol = solve(&spec).unwrap();
    // below J the target is 1 and the solution must be 1 too
    for x in [0.1, 0.5, 0.9] {
        assert!((sol.eval(x).unwrap() - 1.0).abs() < 1e-12);
    }
    let probes = linspace(3.0, 10.0, 257);
    let r = residual_multiplicative(sol.solution().as_ref(), &spec.exponents, &spec.target, &probes).unwrap();
    assert!(r <= 1e-9, "{r}");
}

#[test]
fn root_solution_squares_to_target() {
    let spec = parse_problem(cases::ROOT).unwrap();
    let sol = solve(&spec).unwrap();
    for x in linspace(1.0, E, 101) {
        let g = sol.solution();
        let gg = g.eval(g.eval(x).unwrap()).unwrap();
        assert!((gg - spec.target.eval(x).unwrap()).abs() <= 1e-6);
    }
}

#[test]
fn hypothesis_failures_are_categorized() {
    let text = "form = multiplicative\nexponents = [0, 1]\ntarget = x\ninterval = [1, e]\n\
                delta = 1/2\nM = 2\nsolver = contraction\n";
    let e = solve(&parse_problem(text).unwrap()).err().unwrap();
    assert_eq!(e.category(), ErrorCategory::Hypothesis, "{e}");
    assert!(e.to_string().contains("alpha_1 = 0"));
}

#[test]
fn negation_record_follows_exponent_parity() {
    let ex1 = solve(&parse_problem(cases::EXAMPLE_1).unwrap()).unwrap();
    assert!(!ex1.report.negation.unwrap().applied);
    let ex3 = solve(&parse_problem(cases::EXAMPLE_3).unwrap()).unwrap();
    let n = ex3.report.negation.unwrap();
    assert!(n.applied);
    assert!(n.residual_mult_relative.unwrap() <= 1e-9);
}
