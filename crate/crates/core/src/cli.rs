//! The `rdiag` command line.
//!
//! [`run`] does all the work and returns the process exit code, so the
//! binary is a thin wrapper and tests can drive commands in-process.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Signed;

use crate::circular;
use crate::cumulants::{Builtin, ModelSpec, OperatorModel};
use crate::error::Error;
use crate::measure::{fmt17, pushforward_inverse_sqrt};
use crate::nc::enumerate_nc;
use crate::psd::{self, count_quadrangulations, profile_count};
use crate::resolvent::{self, NormOptions, DEFAULT_TRUNCATION_GUARD};
use crate::ring::{parse_rational, rational_to_f64, rational_to_string};
use crate::series::{asymptotic_negative_moment, negative_moments_at};
use crate::verify::{self, Faults, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Grid size used by the quadrature route of `moments`.
const QUADRATURE_POINTS: usize = 512;

#[derive(Parser, Debug)]
#[command(name = "rdiag", version, about = "Resolvents of R-diagonal operators: densities, negative moments, norms and counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Density of |λ − c|² for the circular operator, as a `t,rho` CSV.
    Density {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 512)]
        points: usize,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the density of |λ − c|^{−1} instead.
        #[arg(long)]
        inverse: bool,
    },
    /// Negative moments m₋₂ … m₋₂ₖ₋₂ of |λ − a|² by one or more routes.
    Moments {
        /// Builtin name (circular, haar, two-atom) or a JSON model file.
        #[arg(long)]
        model: String,
        /// Exact rational, as `p/q` or a finite decimal.
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = RouteArg::Lagrange)]
        route: RouteArg,
    },
    /// Resolvent norm sweep as a `lambda,norm,asymptotic,ratio,route` CSV.
    Norm {
        #[arg(long)]
        model: String,
        #[arg(long)]
        lambda_start: f64,
        #[arg(long)]
        lambda_end: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Smallest λ − 1 accepted for models with a truncated R-transform.
        #[arg(long, default_value_t = DEFAULT_TRUNCATION_GUARD)]
        guard: f64,
    },
    /// Exact counts of partitions, diagrams and tilings.
    Count {
        #[arg(long, value_enum)]
        what: CountArg,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Diagram profile `s₁,s₂,…` (number of 2-gons, 4-gons, …).
        #[arg(long, value_delimiter = ',')]
        profile: Option<Vec<usize>>,
    },
    /// Runs invariant suites and prints a JSON report.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RouteArg {
    Lagrange,
    Psd,
    Quadrature,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CountArg {
    Nc,
    Psd,
    Tilings,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    All,
    Combinatorial,
    Analytic,
    Asymptotic,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::All => Suite::All,
            SuiteArg::Combinatorial => Suite::Combinatorial,
            SuiteArg::Analytic => Suite::Analytic,
            SuiteArg::Asymptotic => Suite::Asymptotic,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Library(Error),
    Io(std::io::Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Density { lambda, points, out: path, inverse } => density(lambda, points, path.as_deref(), inverse, out),
        Command::Moments { model, lambda, k, route } => moments(&model, &lambda, k, route, out),
        Command::Norm { model, lambda_start, lambda_end, steps, out: path, guard } => {
            norm(&model, lambda_start, lambda_end, steps, guard, path.as_deref(), out)
        }
        Command::Count { what, n, k, profile } => count(what, n, k, profile, out),
        Command::Verify { suite, out: path, inject_fault } => verify_cmd(suite.into(), path.as_deref(), inject_fault, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Verification) => EXIT_VERIFY_FAILED,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Library(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// A builtin name, or else a path to a JSON model description.
fn load_model(arg: &str) -> std::result::Result<OperatorModel, Failure> {
    if let Ok(b) = arg.parse::<Builtin>() {
        return Ok(OperatorModel::builtin(b));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(Failure::Usage(format!("'{arg}' is neither a builtin model (circular, haar, two-atom) nor a file")));
    }
    let text = std::fs::read_to_string(path)?;
    Ok(ModelSpec::from_json(&text)?.into_model()?)
}

/// Runs `f` against the file at `path`, or against `out` when there is none.
fn with_sink(path: Option<&Path>, out: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Outcome {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => f(out)?,
    }
    Ok(())
}

fn density(lambda: f64, points: usize, path: Option<&Path>, inverse: bool, out: &mut dyn Write) -> Outcome {
    if !(lambda > 1.0) {
        return Err(Failure::Usage(format!("--lambda must exceed 1, got {lambda}")));
    }
    if points < 2 {
        return Err(Failure::Usage("--points must be at least 2".into()));
    }
    let mut meas = circular::density_measure(lambda, points)?;
    if inverse {
        meas = pushforward_inverse_sqrt(&meas)?;
    }
    with_sink(path, out, |w| meas.write_density_csv(w))
}

fn moments(model_arg: &str, lambda_arg: &str, k: usize, route: RouteArg, out: &mut dyn Write) -> Outcome {
    let model = load_model(model_arg)?;
    let lambda: BigRational =
        parse_rational(lambda_arg).ok_or_else(|| Failure::Usage(format!("--lambda '{lambda_arg}' is not a rational number")))?;
    let lf = rational_to_f64(&lambda);
    if !(lf > 1.0) {
        return Err(Failure::Usage(format!("--lambda must exceed 1, got {lambda_arg}")));
    }
    let want = |r: RouteArg| route == r || route == RouteArg::All;
    if want(RouteArg::Psd) && k > psd::PSD_ENUMERATION_BOUND {
        return Err(Failure::Usage(format!("the psd route needs k ≤ {}, got {k}", psd::PSD_ENUMERATION_BOUND)));
    }
    if want(RouteArg::Quadrature) && model.builtin_kind() != Some(Builtin::Circular) {
        return Err(Failure::Usage(format!("the quadrature route needs the circular model, got {}", model.name())));
    }

    let lagrange = if want(RouteArg::Lagrange) { Some(negative_moments_at(&model, k, &lambda)?) } else { None };
    let psd_vals = if want(RouteArg::Psd) {
        Some((0..=k).map(|j| psd::negative_moment_psd(&model, &lambda, j)).collect::<crate::Result<Vec<_>>>()?)
    } else {
        None
    };
    let quad = if want(RouteArg::Quadrature) {
        let meas = circular::density_measure(lf, QUADRATURE_POINTS)?;
        Some((0..=k).map(|j| meas.moment(-(j as i32 + 1))).collect::<Vec<f64>>())
    } else {
        None
    };
    let v = resolvent::variance_v(&model)?;

    let mut header = vec!["k", "moment"];
    if lagrange.is_some() {
        header.push("lagrange");
    }
    if psd_vals.is_some() {
        header.push("psd");
    }
    if quad.is_some() {
        header.push("quadrature");
    }
    header.push("asymptotic");
    writeln!(out, "{}", header.join(","))?;
    for j in 0..=k {
        let mut row = vec![j.to_string(), format!("m_-{}", 2 * j + 2)];
        if let Some(l) = &lagrange {
            row.push(rational_to_string(&l[j]));
        }
        if let Some(p) = &psd_vals {
            row.push(rational_to_string(&p[j]));
        }
        if let Some(q) = &quad {
            row.push(fmt17(q[j]));
        }
        row.push(match asymptotic_negative_moment(v, j, lf) {
            Ok(a) => fmt17(a),
            Err(_) => "undefined".into(),
        });
        writeln!(out, "{}", row.join(","))?;
    }
    if route == RouteArg::All {
        let (l, p, q) = (lagrange.unwrap(), psd_vals.unwrap(), quad.unwrap());
        let exact = l.iter().zip(&p).map(|(a, b)| (a - b).abs()).max().expect("k + 1 ≥ 1 rows");
        let rel = l
            .iter()
            .zip(&q)
            .map(|(a, b)| {
                let a = rational_to_f64(a);
                (b - a).abs() / a.abs()
            })
            .fold(0.0, f64::max);
        writeln!(out, "max_discrepancy_exact,{}", rational_to_string(&exact))?;
        writeln!(out, "max_discrepancy_quadrature_relative,{}", fmt17(rel))?;
    }
    Ok(())
}

fn norm(model_arg: &str, start: f64, end: f64, steps: usize, guard: f64, path: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let model = load_model(model_arg)?;
    let lambdas = resolvent::sweep_lambdas(start, end, steps).map_err(|e| Failure::Usage(e.to_string()))?;
    let rows = resolvent::norm_sweep(&model, &lambdas, &NormOptions { truncation_guard: guard })?;
    with_sink(path, out, |w| resolvent::write_sweep_csv(&rows, w))
}

fn count(what: CountArg, n: Option<usize>, k: Option<usize>, profile: Option<Vec<usize>>, out: &mut dyn Write) -> Outcome {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| Failure::Usage(format!("--what {what:?} needs {flag}").to_lowercase()));
    match what {
        CountArg::Nc => {
            let n = need(n, "--n")?;
            writeln!(out, "{}", enumerate_nc(n)?.len())?;
        }
        CountArg::Tilings => {
            writeln!(out, "{}", count_quadrangulations(need(k, "--k")?)?)?;
        }
        CountArg::Psd => {
            let k = need(k, "--k")?;
            let total: BigUint = match profile {
                Some(s) => profile_count(k, &s)?,
                None => psd::shape_histogram(k)?.values().map(|&c| BigUint::from(c)).sum(),
            };
            writeln!(out, "{total}")?;
        }
    }
    Ok(())
}

fn verify_cmd(suite: Suite, path: Option<&Path>, inject_fault: bool, out: &mut dyn Write) -> Outcome {
    let report = verify::run_with_faults(suite, Faults { corrupt_r_coefficient: inject_fault });
    let json = report.to_json();
    writeln!(out, "{json}")?;
    if let Some(p) = path {
        std::fs::write(p, format!("{json}\n"))?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}
