use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use embednorm::bounds::{fit_growth_rate, BoundReport};
use embednorm::pnorm::PowerOptions;
use embednorm::verify::{run_suites, Suite, SuiteReport, VerifyConfig};
use embednorm::weights::ExplicitTable;
use embednorm::{Error, ExponentPair, WeightScheme};

/// Norms of the embedding between weighted anchored and ANOVA spaces.
#[derive(Parser, Debug)]
#[command(name = "embednorm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bounds for a single dimension.
    Compute {
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long)]
        p: ExponentPair,
        #[arg(long)]
        s: usize,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        out: OutputFormat,
        #[command(flatten)]
        power: PowerArgs,
    },
    /// Bounds over a range of dimensions, one row per s.
    Scan {
        #[command(flatten)]
        weights: WeightArgs,
        #[arg(long)]
        p: ExponentPair,
        /// `a:b`, `a:b:lin` (every integer) or `a:b:log` (four points per doubling)
        #[arg(long = "s-range")]
        s_range: SRange,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        out: OutputFormat,
        #[command(flatten)]
        power: PowerArgs,
    },
    /// Run the oracle suites.
    Verify {
        #[arg(long = "max-s", default_value_t = 10)]
        max_s: usize,
        /// Restrict to some suites (endpoint, kronecker, eqell, witness).
        #[arg(long, value_delimiter = ',')]
        suite: Vec<Suite>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        out: OutputFormat,
        #[command(flatten)]
        power: PowerArgs,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SchemeKind {
    Product,
    Fow,
    Fdw,
    Pod,
    Explicit,
}

#[derive(Args, Debug)]
struct WeightArgs {
    #[arg(long, value_enum)]
    weights: SchemeKind,
    /// Product weights; a single value is used for every coordinate.
    #[arg(long, value_delimiter = ',')]
    gammas: Vec<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// Weight table, one `<coords|empty> <weight>` entry per line.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PowerArgs {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
}

impl PowerArgs {
    fn options(&self) -> Result<PowerOptions, Error> {
        let mut opts = PowerOptions {
            seed: self.seed,
            ..PowerOptions::default()
        };
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::InvalidInput(format!("--tol must be positive, got {tol}")));
            }
            opts.tol = tol;
        }
        if let Some(n) = self.max_iters {
            if n == 0 {
                return Err(Error::InvalidInput("--max-iters must be positive".into()));
            }
            opts.max_iters = n;
        }
        Ok(opts)
    }
}

#[derive(Clone, Debug)]
struct SRange {
    values: Vec<usize>,
}

impl std::str::FromStr for SRange {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, String> {
        let parts: Vec<&str> = text.split(':').collect();
        let (a, b, log) = match parts.as_slice() {
            [a, b] => (a, b, false),
            [a, b, "lin"] => (a, b, false),
            [a, b, "log"] => (a, b, true),
            _ => return Err(format!("expected a:b[:log|:lin], got '{text}'")),
        };
        let a: usize = a.parse().map_err(|_| format!("bad start '{a}'"))?;
        let b: usize = b.parse().map_err(|_| format!("bad end '{b}'"))?;
        if a == 0 || a > b {
            return Err(format!("s-range must satisfy 1 <= a <= b, got {a}:{b}"));
        }
        let values = if log {
            let steps = (4.0 * (b as f64 / a as f64).log2()).ceil() as usize;
            let mut v: Vec<usize> = (0..=steps)
                .map(|k| (a as f64 * 2f64.powf(k as f64 / 4.0)).round() as usize)
                .map(|s| s.min(b))
                .collect();
            v.push(b);
            v.dedup();
            v
        } else {
            (a..=b).collect()
        };
        Ok(SRange { values })
    }
}

fn build_scheme(args: &WeightArgs) -> Result<WeightScheme, Error> {
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| Error::InvalidInput(format!("--{flag} is required for --weights {:?}", args.weights).to_lowercase()))
    };
    let need_q = || {
        args.q
            .ok_or_else(|| Error::InvalidInput("--q is required for finite-order and finite-diameter weights".into()))
    };
    match args.weights {
        SchemeKind::Product => {
            if args.gammas.is_empty() {
                return Err(Error::InvalidInput("--gammas is required for product weights".into()));
            }
            WeightScheme::product(args.gammas.clone())
        }
        SchemeKind::Fow => WeightScheme::finite_order(need(args.omega, "omega")?, need_q()?),
        SchemeKind::Fdw => WeightScheme::finite_diameter(need(args.omega, "omega")?, need_q()?),
        SchemeKind::Pod => WeightScheme::pod(
            need(args.c, "c")?,
            need(args.beta1, "beta1")?,
            need(args.beta2, "beta2")?,
        ),
        SchemeKind::Explicit => {
            let path = args
                .file
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("--file is required for explicit weights".into()))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
            Ok(WeightScheme::explicit(ExplicitTable::parse(&text)?))
        }
    }
}

/// A single gamma stands for a constant sequence of length `s`.
fn scheme_for(base: &WeightScheme, s: usize) -> WeightScheme {
    match base {
        WeightScheme::Product { gammas } if gammas.len() == 1 && s > 1 => WeightScheme::Product {
            gammas: vec![gammas[0]; s],
        },
        _ => base.clone(),
    }
}

fn report_for(base: &WeightScheme, s: usize, exps: &ExponentPair, opts: &PowerOptions) -> Result<BoundReport, Error> {
    let scheme = scheme_for(base, s);
    let report = BoundReport::compute(&scheme, s, exps, opts)?;
    report.check_ordering()?;
    Ok(report)
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

const CSV_HEADER: &str = "s,p,lower_bound,lower_bound_simple,upper_bound,exact,method";

fn csv_row(r: &BoundReport) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.s,
        r.p,
        num(r.lower_bound),
        num(r.lower_bound_simple),
        opt_num(r.upper_bound),
        opt_num(r.exact),
        r.method.as_str()
    )
}

fn text_report(r: &BoundReport) -> String {
    let rows = [
        ("scheme", r.scheme.clone()),
        ("s", r.s.to_string()),
        ("p", r.p.to_string()),
        ("lower_bound", num(r.lower_bound)),
        ("lower_bound_simple", num(r.lower_bound_simple)),
        ("exact", r.exact.map(num).unwrap_or_else(|| "-".into())),
        ("upper_bound", r.upper_bound.map(num).unwrap_or_else(|| "-".into())),
        ("method", r.method.as_str().to_string()),
        ("iterations", r.iterations.to_string()),
        ("residual", format!("{:.3e}", r.residual)),
        ("route", r.route.as_str().to_string()),
        ("witness", r.witness_summary.clone()),
        ("simple_candidate", r.simple_candidate.clone()),
    ];
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<20}{v}");
    }
    out
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Internal(format!("json encoding failed: {e}")))
}

fn cmd_compute(
    weights: &WeightArgs,
    p: &ExponentPair,
    s: usize,
    out: OutputFormat,
    power: &PowerArgs,
) -> Result<String, Error> {
    if s == 0 {
        return Err(Error::InvalidInput("--s must be at least 1".into()));
    }
    let scheme = build_scheme(weights)?;
    let report = report_for(&scheme, s, p, &power.options()?)?;
    Ok(match out {
        OutputFormat::Json => to_json(&report)? + "\n",
        OutputFormat::Csv => format!("{CSV_HEADER}\n{}\n", csv_row(&report)),
        OutputFormat::Text => text_report(&report),
    })
}

fn growth_line(reports: &[BoundReport]) -> String {
    let pairs: Vec<(f64, f64)> = reports.iter().map(|r| (r.s as f64, r.lower_bound)).collect();
    match fit_growth_rate(&pairs) {
        Ok(rate) => format!("{rate:.6}"),
        Err(_) => "NA".into(),
    }
}

fn cmd_scan(
    weights: &WeightArgs,
    p: &ExponentPair,
    range: &SRange,
    out: OutputFormat,
    power: &PowerArgs,
) -> Result<String, Error> {
    let scheme = build_scheme(weights)?;
    let opts = power.options()?;
    // collect() on an indexed parallel iterator keeps the input order
    let reports = range
        .values
        .par_iter()
        .map(|&s| report_for(&scheme, s, p, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let growth = growth_line(&reports);
    let mut text = String::new();
    match out {
        OutputFormat::Csv => {
            text.push_str(CSV_HEADER);
            text.push('\n');
            for r in &reports {
                text.push_str(&csv_row(r));
                text.push('\n');
            }
            let _ = writeln!(text, "# growth_exponent={growth}");
        }
        OutputFormat::Json => {
            let value = serde_json::json!({ "reports": reports, "growth_exponent": growth });
            text = to_json(&value)? + "\n";
        }
        OutputFormat::Text => {
            let _ = writeln!(
                text,
                "{:>6}  {:>24}  {:>24}  {:>24}  {:>24}  {}",
                "s", "lower_bound", "lower_bound_simple", "upper_bound", "exact", "method"
            );
            for r in &reports {
                let _ = writeln!(
                    text,
                    "{:>6}  {:>24}  {:>24}  {:>24}  {:>24}  {}",
                    r.s,
                    num(r.lower_bound),
                    num(r.lower_bound_simple),
                    r.upper_bound.map(num).unwrap_or_else(|| "-".into()),
                    r.exact.map(num).unwrap_or_else(|| "-".into()),
                    r.method.as_str()
                );
            }
            let _ = writeln!(text, "growth exponent: {growth}");
        }
    }
    Ok(text)
}

fn cmd_verify(max_s: usize, suites: &[Suite], out: OutputFormat, power: &PowerArgs) -> Result<(String, bool), Error> {
    let config = VerifyConfig {
        max_s,
        seed: power.seed,
        power: power.options()?,
    };
    let suites = if suites.is_empty() { &Suite::ALL[..] } else { suites };
    let reports = run_suites(suites, &config)?;
    let all_passed = reports.iter().all(|r| r.passed);
    let text = match out {
        OutputFormat::Json => to_json(&reports)? + "\n",
        OutputFormat::Csv => {
            let mut t = String::from("suite,passed,checks,worst_residual\n");
            for r in &reports {
                let _ = writeln!(t, "{},{},{},{}", r.suite, r.passed, r.checks, num(r.worst_residual));
            }
            t
        }
        OutputFormat::Text => verify_text(&reports, all_passed),
    };
    Ok((text, all_passed))
}

fn verify_text(reports: &[SuiteReport], all_passed: bool) -> String {
    let mut t = String::new();
    for r in reports {
        let _ = writeln!(
            t,
            "{:<10} {}  checks={:<6} worst_residual={:.3e}  ({})",
            r.suite.as_str(),
            if r.passed { "PASS" } else { "FAIL" },
            r.checks,
            r.worst_residual,
            r.worst_case
        );
        for f in &r.failures {
            let _ = writeln!(t, "    {f}");
        }
    }
    let _ = writeln!(t, "{}", if all_passed { "all suites passed" } else { "some suites failed" });
    t
}

fn run(cli: &Cli) -> Result<(String, bool), Error> {
    match &cli.command {
        Command::Compute { weights, p, s, out, power } => Ok((cmd_compute(weights, p, *s, *out, power)?, true)),
        Command::Scan { weights, p, s_range, out, power } => Ok((cmd_scan(weights, p, s_range, *out, power)?, true)),
        Command::Verify { max_s, suite, out, power } => cmd_verify(*max_s, suite, *out, power),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((text, ok)) => {
            print!("{text}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
