//! `iterfunc`: solve, verify and certify iterative functional equations.
//!
//! Exit codes: 0 success, 1 hypothesis violation, 2 numerical failure,
//! 3 input or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use iterfunc::{
    cases, check_ab_class, check_f_class, check_g_class, check_r_class, check_s_class, compute_constants,
    parse_constant, parse_problem_with, resolve_shapes, solve, solve_root, stability, stability_bound,
    verify_stored, ClassCertificate, ClassKind, Error, ErrorCategory, Evaluate, Extension, Form, GridFunction,
    Interval, ProblemSpec, RootOptions, Side, Target,
};
use log::info;

#[derive(Parser)]
#[command(name = "iterfunc", version, about = "Numerical solver for iterative functional equations")]
#[command(after_help = "Set ITERFUNC_LOG (error, warn, info, debug, trace) to control diagnostics on stderr.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write the report directory.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory [default: out/<problem file stem>]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify a stored solution against its problem file.
    Verify {
        problem: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Directory written by `solve`
        #[arg(long)]
        out: PathBuf,
        /// Fail with exit code 2 when a recomputed residual exceeds this
        #[arg(long, default_value_t = 1e-6)]
        max_residual: f64,
    },
    /// Check class membership of a piecewise-linear function stored as CSV.
    Certify {
        /// CSV with `x,y` rows
        csv: PathBuf,
        #[arg(long, value_enum)]
        class: ClassArg,
        #[arg(long, value_parser = number)]
        delta: Option<f64>,
        #[arg(long = "M", value_parser = number)]
        m: Option<f64>,
        /// Interval `lo,hi` [default: the CSV domain]
        #[arg(long, value_parser = interval)]
        interval: Option<Interval>,
        /// Anchor for the R and S classes
        #[arg(long, value_parser = number)]
        anchor: Option<f64>,
        /// Lambda for the R, S, A and B classes
        #[arg(long, value_parser = number)]
        lambda: Option<f64>,
    },
    /// Print K0, K1, K2 and the contraction factor.
    Constants {
        /// Exponents `a1,...,an`
        #[arg(long, value_parser = numbers)]
        alpha: Numbers,
        #[arg(long, value_parser = number)]
        delta: f64,
        #[arg(long = "M", value_parser = number)]
        m: f64,
        /// `c,d` to also print the stability constant
        #[arg(long, value_parser = interval)]
        interval: Option<Interval>,
    },
    /// Solve a problem and a multiplicatively perturbed copy and check the stability bound.
    Stability {
        problem: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        /// Write `stability.json` here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the bundled example problems end to end.
    Examples {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Iterative root g^n = G from a `form = root` problem file.
    Roots {
        problem: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory [default: out/<problem file stem>]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    #[value(name = "FI", alias = "F_I")]
    Fi,
    #[value(name = "GJ", alias = "G_J")]
    Gj,
    R,
    S,
    A,
    B,
}

/// Problem-file entries replaced from the command line.
#[derive(Args, Default)]
struct Overrides {
    /// Knots of the working grid
    #[arg(long)]
    grid: Option<usize>,
    /// Stopping tolerance of the contraction solver
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Number of residual probes
    #[arg(long)]
    probes: Option<usize>,
    /// Probe window `lo,hi`
    #[arg(long)]
    window: Option<String>,
    /// Sequence seeds `x1,...` for the construction
    #[arg(long)]
    seeds: Option<String>,
    /// Piece shapes `linear`, `bend:c`, `power:p` or CSV paths, comma separated
    #[arg(long)]
    initial_pieces: Option<String>,
}

type Numbers = Vec<f64>;

fn number(s: &str) -> Result<f64, String> {
    parse_constant(s).map_err(|e| e.to_string())
}

fn numbers(s: &str) -> Result<Numbers, String> {
    s.trim_matches(|c| c == '[' || c == ']').split(',').map(|p| number(p.trim())).collect()
}

fn interval(s: &str) -> Result<Interval, String> {
    match numbers(s)?.as_slice() {
        [lo, hi] => Interval::new(*lo, *hi).map_err(|e| e.to_string()),
        _ => Err(format!("expected `lo,hi`, got `{s}`")),
    }
}

fn bracketed(s: &str) -> String {
    let t = s.trim();
    if t.starts_with('[') {
        t.to_string()
    } else {
        format!("[{t}]")
    }
}

impl Overrides {
    fn entries(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        if let Some(v) = self.grid {
            put("grid", v.to_string());
        }
        if let Some(v) = &self.tol {
            put("tol", v.clone());
        }
        if let Some(v) = self.max_iter {
            put("max_iter", v.to_string());
        }
        if let Some(v) = self.probes {
            put("probes", v.to_string());
        }
        if let Some(v) = &self.window {
            put("window", bracketed(v));
        }
        if let Some(v) = &self.seeds {
            put("seeds", bracketed(v));
        }
        if let Some(v) = &self.initial_pieces {
            put("initial", bracketed(v));
        }
        out
    }
}

fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<ProblemSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let spec = parse_problem_with(&text, &overrides.entries()).with_context(|| format!("reading {}", path.display()))?;
    Ok(spec)
}

fn default_out(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "problem".into(), |s| s.to_string_lossy().into_owned());
    PathBuf::from("out").join(stem)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3e}"))
}

fn run_solve(spec: &ProblemSpec, out: &Path) -> anyhow::Result<()> {
    let sol = solve(spec)?;
    sol.write(out)?;
    let r = &sol.report;
    println!("route:            {}", serde_json::to_string(&r.route)?.trim_matches('"'));
    if let Some(c) = &r.constants {
        println!("constants:        K0 = {}, K1 = {}, K2 = {}", c.k0, c.k1, c.k2);
    }
    if let Some(n) = r.iterations {
        println!("iterations:       {n}");
    }
    println!("residual (line):  {:.3e}", r.residual_poly);
    println!("residual (mult):  {}", fmt_opt(r.residual_mult));
    if let Some(n) = &r.negation {
        if n.applied {
            println!("negative side:    relative residual {}", fmt_opt(n.residual_mult_relative));
        }
    }
    for w in &r.warnings {
        println!("warning:          {w}");
    }
    println!("report:           {}", out.display());
    Ok(())
}

fn certify(
    csv: &Path,
    class: ClassArg,
    delta: Option<f64>,
    m: Option<f64>,
    interval: Option<Interval>,
    anchor: Option<f64>,
    lambda: Option<f64>,
) -> anyhow::Result<ClassCertificate> {
    let text = std::fs::read_to_string(csv).map_err(|source| Error::Io {
        path: csv.display().to_string(),
        source,
    })?;
    let f = GridFunction::from_csv(&text)?;
    let interval = interval.unwrap_or_else(|| f.domain());
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::schema(name, "required for this class"));
    let cert = match class {
        ClassArg::Fi => check_f_class(&f, need(delta, "delta")?, need(m, "M")?, interval)?,
        ClassArg::Gj => check_g_class(&f, need(delta, "delta")?, need(m, "M")?, interval)?,
        ClassArg::R => check_r_class(&f, need(anchor, "anchor")?, need(lambda, "lambda")?, interval)?,
        ClassArg::S => check_s_class(&f, need(anchor, "anchor")?, need(lambda, "lambda")?, interval)?,
        ClassArg::A => check_ab_class(&f, need(lambda, "lambda")?, interval, ClassKind::A)?,
        ClassArg::B => check_ab_class(&f, need(lambda, "lambda")?, interval, ClassKind::B)?,
    };
    Ok(cert)
}

fn roots(spec: &ProblemSpec, out: &Path) -> anyhow::Result<()> {
    if spec.form != Form::Root {
        return Err(Error::schema("form", "`roots` needs a `form = root` problem").into());
    }
    let order = spec.order.unwrap_or(2);
    let side = spec.side.unwrap_or(Side::AtLeft);
    let opts = RootOptions {
        seeds: spec.options.seeds.clone(),
        shapes: resolve_shapes(&spec.options.initial)?,
        probes: spec.options.probes,
        window: spec.options.window,
        ..RootOptions::default()
    };
    let target: Target = Arc::new(spec.target.clone());
    let root = solve_root(target, order, side, spec.interval, &opts)?;
    let window = spec.options.window.unwrap_or(Interval::new(0.5 * spec.interval.lo, 2.0 * spec.interval.hi)?);
    let g = root.g();
    let sampled = GridFunction::from_samples(window.linspace(spec.options.probes), |x| g.eval(x), Extension::ClampToEndpointValues)?;
    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })?;
    let summary = serde_json::json!({
        "order": order,
        "interval": spec.interval,
        "window": window,
        "probes": root.probes,
        "residual": root.residual,
    });
    let write = |name: &str, text: String| {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        })
    };
    write("root.json", serde_json::to_string_pretty(&summary)? + "\n")?;
    write("solution.csv", sampled.to_csv())?;
    println!("sup |g^{order} - G| = {:.3e} on {} probes", root.residual, root.probes);
    println!("report:           {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve { problem, overrides, out } => {
            let spec = load(&problem, &overrides)?;
            let out = out.unwrap_or_else(|| default_out(&problem));
            run_solve(&spec, &out)
        }
        Command::Verify {
            problem,
            overrides,
            out,
            max_residual,
        } => {
            let spec = load(&problem, &overrides)?;
            let v = verify_stored(&spec, &out)?;
            println!("{}", serde_json::to_string_pretty(&v)?);
            let worst = v.residual_mult.unwrap_or(0.0).max(v.residual_poly);
            if worst > max_residual {
                return Err(Error::CertificateLost(format!(
                    "stored solution residual {worst:e} exceeds {max_residual:e}"
                ))
                .into());
            }
            Ok(())
        }
        Command::Certify {
            csv,
            class,
            delta,
            m,
            interval,
            anchor,
            lambda,
        } => {
            let cert = certify(&csv, class, delta, m, interval, anchor, lambda)?;
            println!("{}", serde_json::to_string_pretty(&cert)?);
            info!("{}", cert.summary());
            Ok(())
        }
        Command::Constants { alpha, delta, m, interval } => {
            let c = compute_constants(&alpha, delta, m)?;
            let mut value = serde_json::to_value(c)?;
            if let Some(j) = interval {
                value["stability_constant"] = stability_bound(j.lo, j.hi, &c)?.into();
            }
            println!("{}", serde_json::to_string_pretty(&value)?);
            Ok(())
        }
        Command::Stability {
            problem,
            overrides,
            eps,
            out,
        } => {
            let spec = load(&problem, &overrides)?;
            let r = stability(&spec, eps)?;
            let json = serde_json::to_string_pretty(&r)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
                    path: dir.display().to_string(),
                    source,
                })?;
                let p = dir.join("stability.json");
                std::fs::write(&p, json.clone() + "\n").map_err(|source| Error::Io {
                    path: p.display().to_string(),
                    source,
                })?;
            }
            println!("{json}");
            if !r.check.pass {
                return Err(Error::CertificateLost(format!(
                    "stability bound fails: {:e} > {:e}",
                    r.check.lhs, r.check.rhs
                ))
                .into());
            }
            Ok(())
        }
        Command::Examples { out, overrides } => {
            for (name, text) in cases::ALL.iter().take(3) {
                println!("== {name}");
                let spec = parse_problem_with(text, &overrides.entries())?;
                run_solve(&spec, &out.join(name))?;
            }
            Ok(())
        }
        Command::Roots { problem, overrides, out } => {
            let spec = load(&problem, &overrides)?;
            let out = out.unwrap_or_else(|| default_out(&problem));
            roots(&spec, &out)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>().map(Error::category) {
        Some(ErrorCategory::Hypothesis) => 1,
        Some(ErrorCategory::Numerical) => 2,
        Some(ErrorCategory::Input) | None => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ITERFUNC_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let kind = match code {
                1 => "hypothesis violated",
                2 => "numerical failure",
                _ => "input error",
            };
            let mut message = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !message.contains(&c) {
                    message = format!("{message}: {c}");
                }
            }
            eprintln!("error ({kind}): {message}");
            ExitCode::from(code)
        }
    }
}
