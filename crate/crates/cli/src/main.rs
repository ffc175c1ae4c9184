use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use confym_core::canon::canonicalize;
use confym_core::numeric::spec::MetricSpec;
use confym_core::parse::parse;
use confym_core::print::to_text;
use confym_core::rules::RuleSet;
use confym_core::tractor::expand_tractor;
use confym_core::verify::{emit_obstruction, run_checks, run_numeric, torus_spec, CheckReport, Format, NumericConfig};

#[derive(Parser)]
#[command(name = "confym", version, about = "Symbolic tensor engine and jet oracle for the conformal Yang–Mills operator")]
struct Cli {
    /// `6` or `symbolic` (keeps the dimension as n).
    #[arg(long, global = true, default_value = "6", value_parser = parse_dimension)]
    dimension: Dimension,
    /// Jet truncation degree for numeric checks.
    #[arg(long, global = true, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..))]
    jet_degree: u64,
    /// Relative tolerance for numeric checks (default per check).
    #[arg(long, global = true, value_parser = parse_tolerance)]
    tolerance: Option<f64>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Report::Text)]
    report: Report,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    parallelism: usize,
    /// Print the registered rewrite rules as JSON and exit.
    #[arg(long)]
    dump_rules: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical form of an expression (file or stdin).
    Canon { file: Option<PathBuf> },
    /// Expand tractors and splitting operators, then canonicalize.
    Expand { file: Option<PathBuf> },
    /// Run named checks, or `all`.
    Verify {
        #[arg(required = true)]
        names: Vec<String>,
    },
    /// Run an oracle check (action-invariance, divergence-theorem) on a torus metric.
    Numeric {
        check: String,
        /// MetricSpec JSON; missing gauge and conformal factor are drawn from the seed.
        #[arg(long)]
        metric: Option<PathBuf>,
        /// Coarse grid points per coordinate.
        #[arg(long, default_value_t = 16)]
        grid: usize,
    },
    /// Print the obstruction tensor.
    EmitObstruction {
        #[arg(long, value_enum, default_value_t = OutFormat::Text)]
        format: OutFormat,
    },
    /// Print the registered rewrite rules as JSON.
    DumpRules,
}

#[derive(Clone, Copy, ValueEnum)]
enum Report {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Text,
    Latex,
    Json,
}

#[derive(Clone, Copy)]
enum Dimension {
    Fixed(i64),
    Symbolic,
}

impl Dimension {
    fn apply(self, e: confym_core::expr::Expr) -> confym_core::expr::Expr {
        match self {
            Dimension::Fixed(n) => e.specialize(n),
            Dimension::Symbolic => e,
        }
    }
}

fn parse_dimension(s: &str) -> Result<Dimension, String> {
    match s {
        "symbolic" | "n" => Ok(Dimension::Symbolic),
        _ => match s.parse::<i64>() {
            Ok(n) if n >= 3 => Ok(Dimension::Fixed(n)),
            _ => Err(format!("expected an integer ≥ 3 or `symbolic`, got {s:?}")),
        },
    }
}

fn parse_tolerance(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t > 0.0 => Ok(t),
        _ => Err(format!("tolerance must be a positive number, got {s:?}")),
    }
}

enum Failure {
    Check,
    Usage(String),
}

fn read_input(file: Option<&Path>) -> Result<String, Failure> {
    let mut s = String::new();
    match file {
        Some(p) => s = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => {
            std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::Usage(e.to_string()))?;
        }
    }
    Ok(s)
}

fn emit(reports: &[CheckReport], format: Report) -> Result<(), Failure> {
    if let Ok(dir) = std::env::var("CONFYM_REPORT_DIR") {
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("{dir}: {e}")))?;
        for r in reports {
            let path = Path::new(&dir).join(format!("{}.json", r.name));
            let body = serde_json::to_string_pretty(r).expect("serializable");
            std::fs::write(&path, body).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        }
    }
    match format {
        Report::Json => {
            let body = if reports.len() == 1 { serde_json::to_string_pretty(&reports[0]) } else { serde_json::to_string_pretty(reports) };
            println!("{}", body.expect("serializable"));
        }
        Report::Text => {
            for r in reports {
                let status = if r.passed() { "PASS" } else { "FAIL" };
                let cert = serde_json::to_value(r.certificate).expect("serializable");
                println!("{status} {} [{}] residual {} ({:.2}s)", r.name, cert.as_str().unwrap_or_default(), r.residual_repr, r.elapsed_s);
                for s in &r.steps {
                    println!("    {s}");
                }
            }
        }
    }
    if reports.iter().all(CheckReport::passed) {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.dump_rules {
        println!("{}", RuleSet::standard().to_json());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Failure::Usage("no subcommand given; see --help".into()));
    };
    match command {
        Command::Canon { file } => {
            let e = parse(&read_input(file.as_deref())?).map_err(|e| Failure::Usage(e.to_string()))?;
            let e = cli.dimension.apply(e);
            println!("{}", to_text(&canonicalize(&e)));
        }
        Command::Expand { file } => {
            let e = parse(&read_input(file.as_deref())?).map_err(|e| Failure::Usage(e.to_string()))?;
            let e = expand_tractor(&e);
            let e = cli.dimension.apply(e);
            println!("{}", to_text(&canonicalize(&e)));
        }
        Command::Verify { names } => {
            let reports = run_checks(&names).map_err(|e| Failure::Usage(e.to_string()))?;
            emit(&reports, cli.report)?;
        }
        Command::Numeric { check, metric, grid } => {
            let base = match metric {
                None => None,
                Some(p) => {
                    let text = read_input(Some(&p))?;
                    let m: MetricSpec = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
                    Some(m)
                }
            };
            let spec = torus_spec(base, cli.seed);
            let cfg = NumericConfig { jet_degree: cli.jet_degree as usize, grid, tolerance: cli.tolerance };
            let report = run_numeric(&check, &spec, &cfg).map_err(|e| Failure::Usage(e.to_string()))?;
            emit(&[report], cli.report)?;
        }
        Command::EmitObstruction { format } => {
            let f = match format {
                OutFormat::Text => Format::Text,
                OutFormat::Latex => Format::Latex,
                OutFormat::Json => Format::Json,
            };
            println!("{}", emit_obstruction(f));
        }
        Command::DumpRules => println!("{}", RuleSet::standard().to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.parallelism > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.parallelism).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("confym: {msg}");
            ExitCode::from(2)
        }
    }
}
