//! Fixtures shared by the solver benchmarks.

use std::sync::Arc;

use iterfunc::{cases, conj_explog_target, parse_problem, FnEval, Interval, ProblemSpec, SewingPlan, Side, Target};

pub fn problem(text: &str) -> ProblemSpec {
    parse_problem(text).expect("bundled problem parses")
}

/// Line target `F(x) = log G(exp x)` of the first example on `[0, 1]`.
pub fn example_one_line_target() -> Target {
    Arc::new(conj_explog_target(&problem(cases::EXAMPLE_1).target).expect("positive target"))
}

/// `H = F/3` and the sewing plan of the second example.
pub fn example_two_setup() -> (Target, SewingPlan) {
    let f = conj_explog_target(&problem(cases::EXAMPLE_2).target).expect("positive target");
    let h: Target = Arc::new(FnEval(move |x: f64| iterfunc::Evaluate::eval(&f, x).unwrap_or(f64::NAN) / 3.0));
    let plan = SewingPlan {
        seeds: Some(vec![0.6]),
        ..SewingPlan::new(vec![2.0 / 3.0], Side::AtLeft, Interval::new(0.0, 1.0).expect("valid interval"))
    };
    (h, plan)
}
