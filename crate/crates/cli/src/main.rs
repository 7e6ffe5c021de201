//! `dimcheck`: dimension checking, unit conversion, currency scenarios and
//! the randomized self test from the command line.
//!
//! Exit status is 0 on success, 1 when a check, assertion, scenario or self
//! test fails, and 2 for usage, input and registry errors.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dimcheck_core::currency::{run_scenario, Scenario};
use dimcheck_core::decvalue::render_rational;
use dimcheck_core::measure::convert;
use dimcheck_core::quantlang::{
    check_program, check_source, evaluate, parse, parse_expr, run_source, tokenize, Decl, Item, Pos, Program, Stmt,
    StmtKind, Value, Verdict,
};
use dimcheck_core::selftest::selftest;
use dimcheck_core::{DecValue, PrecisionContext, Rational, UnitRegistry};

#[derive(Parser, Debug)]
#[command(name = "dimcheck", version, about = "Units, dimensions and exact measurements")]
struct Cli {
    /// Unit registry file; the built-in SI registry when absent.
    #[arg(long, global = true, env = "DIMCHECK_REGISTRY")]
    registry: Option<PathBuf>,

    /// Significant digits for rounded results.
    #[arg(long, global = true, default_value_t = 34, value_parser = clap::value_parser!(u32).range(1..))]
    precision: u32,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Statically check a program; with --bind, also evaluate it.
    Check(CheckArgs),
    /// Evaluate one expression, e.g. `100 gram + 2 pound`.
    Eval {
        expr: String,
        /// Express the result in this unit.
        #[arg(long = "in")]
        target: Option<String>,
    },
    /// Convert a value between units.
    Convert { value: String, from: String, to: String },
    /// List the registered units.
    Units {
        /// Print the registry in its file format instead of a table.
        #[arg(long)]
        source: bool,
    },
    /// Currency settlement scenarios.
    Currency {
        #[command(subcommand)]
        command: CurrencyCommand,
    },
    /// Run the randomized property suite.
    Selftest {
        /// Cases per property.
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        iterations: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand, Debug)]
enum CurrencyCommand {
    /// Replay a scenario file, checking invariants after every event.
    Run {
        scenario: PathBuf,
        /// Seed for `random` directives.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print a state digest after every event.
        #[arg(long)]
        trace: bool,
    },
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Program file.
    file: PathBuf,
    /// Bind a declared variable, `name=value`, in its declared unit.
    #[arg(long = "bind", value_name = "NAME=VALUE")]
    bind: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Plain)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Plain,
    Machine,
}

/// A failure that ends the command with the given exit status.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("dimcheck: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let ctx = PrecisionContext::new(cli.precision).map_err(|e| usage(e.to_string()))?;
    let reg = load_registry(cli.registry.as_deref())?;
    match cli.command {
        Command::Check(args) => cmd_check(&args, &reg, &ctx),
        Command::Eval { expr, target } => cmd_eval(&expr, target.as_deref(), &reg, &ctx),
        Command::Convert { value, from, to } => cmd_convert(&value, &from, &to, &reg, &ctx),
        Command::Units { source } => cmd_units(&reg, source),
        Command::Currency {
            command: CurrencyCommand::Run { scenario, seed, trace },
        } => cmd_currency(&scenario, seed, trace, &ctx),
        Command::Selftest { iterations, seed } => {
            let report = selftest(&reg, &reg, iterations, seed, &ctx);
            println!("{report}");
            Ok(exit(report.is_ok()))
        }
    }
}

fn exit(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_registry(path: Option<&Path>) -> Result<UnitRegistry, Failure> {
    match path {
        None => Ok(UnitRegistry::builtin()),
        Some(p) => UnitRegistry::parse(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display()))),
    }
}

fn cmd_check(args: &CheckArgs, reg: &UnitRegistry, ctx: &PrecisionContext) -> CmdResult {
    let source = read(&args.file)?;
    let file = args.file.display().to_string();
    let report = if args.bind.is_empty() {
        check_source(&source, reg)
    } else {
        run_source(&source, reg, &parse_bindings(&args.bind, &source)?, ctx)
    };
    for entry in &report.entries {
        match (args.format, &entry.verdict) {
            (Format::Machine, _) => println!("{}", entry.machine()),
            (Format::Plain, Verdict::Ok { .. }) => println!("{}", entry.plain(&file)),
            (Format::Plain, Verdict::Error(_)) => eprintln!("{}", entry.plain(&file)),
        }
    }
    let errors = report.errors().count();
    if args.format == Format::Plain && errors > 0 {
        eprintln!("{file}: {errors} error(s)");
    }
    Ok(exit(errors == 0))
}

fn parse_bindings(raw: &[String], source: &str) -> Result<HashMap<String, DecValue>, Failure> {
    // declarations survive parse errors elsewhere, so recover what we can
    let program = tokenize(source).map(|t| parse(&t).program).unwrap_or_default();
    let declared: Vec<&str> = program
        .items
        .iter()
        .filter_map(|i| match i {
            Item::Decl(Decl::Var { name, .. }, _) => Some(name.name.as_str()),
            _ => None,
        })
        .collect();
    let mut out = HashMap::new();
    for b in raw {
        let (name, value) = b
            .split_once('=')
            .ok_or_else(|| usage(format!("--bind expects NAME=VALUE, got `{b}`")))?;
        let (name, value) = (name.trim(), value.trim());
        if !declared.contains(&name) {
            return Err(usage(format!("`{name}` is not a declared variable")));
        }
        let v = DecValue::parse(value).map_err(|e| usage(format!("--bind {name}: {e}")))?;
        if out.insert(name.to_string(), v).is_some() {
            return Err(usage(format!("`{name}` is bound twice")));
        }
    }
    Ok(out)
}

fn cmd_eval(expr: &str, target: Option<&str>, reg: &UnitRegistry, ctx: &PrecisionContext) -> CmdResult {
    let e = parse_expr(expr).map_err(|e| usage(format!("{}: {}: {e}", e.pos(), e.kind())))?;
    // static check first so a mismatch is reported as such, with a position
    let program = Program {
        items: vec![Item::Stmt(Stmt {
            kind: StmtKind::Eval,
            expr: e.clone(),
            pos: Pos { line: 1, col: 1 },
        })],
    };
    if let Some(d) = check_program(&program, reg).errors().next() {
        eprintln!("<expr>:{}: {}: {}", d.pos, d.kind, d.message);
        return Ok(ExitCode::from(1));
    }
    let value = evaluate(&e, &HashMap::new(), reg, ctx).map_err(|e| Failure {
        code: 1,
        message: e.to_string(),
    })?;
    match (value, target) {
        (Value::Quantity(m), Some(t)) => {
            let unit = reg.unit(t).map_err(|e| usage(e.to_string()))?;
            let m = convert(&m, &unit, ctx).map_err(|e| Failure {
                code: 1,
                message: e.to_string(),
            })?;
            println!("{m}");
        }
        (Value::Bool(_), Some(_)) => return Err(usage("--in needs a quantity, not a comparison")),
        (v, None) => println!("{v}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_convert(value: &str, from: &str, to: &str, reg: &UnitRegistry, ctx: &PrecisionContext) -> CmdResult {
    let v = DecValue::parse(value).map_err(|e| usage(format!("`{value}`: {e}")))?;
    let m = reg.make(v, from).map_err(|e| usage(e.to_string()))?;
    let target = reg.unit(to).map_err(|e| usage(e.to_string()))?;
    let out = convert(&m, &target, ctx).map_err(|e| usage(e.to_string()))?;
    println!("{out}");
    Ok(ExitCode::SUCCESS)
}

/// Terminating decimal when exact, fraction otherwise.
fn decimal(r: &Rational) -> String {
    DecValue::from_rational_exact(r).map_or_else(|| render_rational(r), |d| d.to_string())
}

fn cmd_units(reg: &UnitRegistry, source: bool) -> CmdResult {
    let mut out = String::new();
    if source {
        out = reg.render();
    }
    for u in reg.units().filter(|_| !source) {
        let mut line = format!("{}\t{}\tscale {}", u.name(), u.dimension(), decimal(u.scale()));
        if u.is_affine() {
            line.push_str(&format!("\toffset {}", decimal(u.offset())));
        }
        if u.is_canonical() {
            line.push_str("\tcanonical");
        }
        out.push_str(&line);
        out.push('\n');
    }
    // a closed pipe (`| head`) is not an error worth reporting
    let _ = io::stdout().write_all(out.as_bytes());
    Ok(ExitCode::SUCCESS)
}

fn cmd_currency(path: &Path, seed: u64, trace: bool, ctx: &PrecisionContext) -> CmdResult {
    let file = path.display().to_string();
    let scenario = Scenario::parse(&read(path)?).map_err(|e| usage(format!("{file}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = run_scenario(&scenario, &mut rng, *ctx).map_err(|e| usage(format!("{file}: {e}")))?;
    let (mut refused, mut violated) = (0, 0);
    for step in &report.steps {
        if trace {
            let status = match &step.result {
                Ok(()) => "ok".to_string(),
                Err(e) => format!("refused: {e}"),
            };
            println!("{}\t{}\t{status}\t{}", step.line, step.event, step.digest);
        }
        if let Err(e) = &step.result {
            refused += 1;
            eprintln!("{file}:{}: GuardFailed: `{}`: {e}", step.line, step.event);
        }
        for v in &step.violations {
            violated += 1;
            eprintln!("{file}:{}: InvariantViolated: after `{}`: {v}", step.line, step.event);
        }
    }
    println!(
        "{} events, {refused} refused, {violated} invariant violations, final state {}",
        report.steps.len(),
        report.final_state.digest()
    );
    Ok(exit(report.is_ok()))
}
