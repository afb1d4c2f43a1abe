//! Numerical solution of iterative functional equations
//! `prod_k (g^k(x))^{alpha_k} = G(x)` on the positive half-line and their
//! line form `sum_k alpha_k f^k(x) = F(x)`.
//!
//! * [`contraction`]: Picard iteration `f = L_f^{-1} ∘ F` for nonnegative
//!   coefficients with `0 < alpha_1`.
//! * [`construction`]: piecewise construction of solutions anchored at a
//!   fixed point, including iterative roots.
//! * [`multeq`]: the end-to-end pipeline over problem files.

pub mod classes;
pub mod conjugation;
pub mod construction;
pub mod contraction;
pub mod error;
pub mod expr;
pub mod funcrep;
pub mod multeq;
pub mod problem;
pub mod report;

pub use classes::{
    check_ab_class, check_f_class, check_g_class, check_r_class, check_rs_class, check_s_class, degenerate_rule,
    ClassCertificate, ClassKind, ClassSpec, Degeneracy, SignClass, Verdict, Witness,
};
pub use conjugation::{
    check_negation_parity, conj_explog, conj_explog_fn, conj_explog_fn_back, conj_explog_target, conj_negation,
    normalize_exponents, ExpConjugate, LogConjugate, Mirror,
};
pub use construction::{
    build_pieces, default_seeds, extend_to_line, generate_sequence, residual_lcp, sew, solve_root,
    verify_candidate_lambda_nonpos, LineExtension, RootOptions, RootSolution, Shape, Side, SewingPlan, SewnSolution,
};
pub use contraction::{
    apply_lf, compute_constants, invert_lf, picard_solve, stability_bound, stability_check, BoundCheck, Constants,
    ContractionOptions, InitialIterate, LineSolution, PicardReport,
};
pub use error::{Error, ErrorCategory, Result, Stage};
pub use expr::{parse_constant, parse_expression, Expr, PiecewiseExpr};
pub use funcrep::{
    compose, iterate_at, iterate_k, sup_norm, sup_norm_diff, Evaluate, Extension, FnEval, GridFunction, Interval,
    IntervalPair, Target, DEFAULT_GRID, DEFAULT_PROBES,
};
pub use multeq::{extend_to_negative, residual_multiplicative, resolve_shapes, solve, stability, verify_stored, Solution};
pub use problem::{load_problem, parse_problem, parse_problem_with, write_problem, Form, ProblemSpec, SolverChoice, SolverOptions};
pub use report::{write_report, Route, SolveReport, VerifyReport};

/// Bundled problem files.
pub mod cases {
    pub const EXAMPLE_1: &str = include_str!("../problems/ex1.problem");
    pub const EXAMPLE_2: &str = include_str!("../problems/ex2.problem");
    pub const EXAMPLE_3: &str = include_str!("../problems/ex3.problem");
    pub const IDENTITY: &str = include_str!("../problems/identity.problem");
    pub const ROOT: &str = include_str!("../problems/root.problem");

    /// `(name, text)` for every bundled problem.
    pub const ALL: [(&str, &str); 5] = [
        ("ex1", EXAMPLE_1),
        ("ex2", EXAMPLE_2),
        ("ex3", EXAMPLE_3),
        ("identity", IDENTITY),
        ("root", ROOT),
    ];
}
