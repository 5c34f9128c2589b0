use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sbp_core::engine::Termination;
use sbp_core::models::{build_with, CATALOG};
use sbp_core::sexp::parse_formula_file;
use sbp_core::smt::{smt_solve, SmtResult};
use sbp_core::trace::run_to_trace;

#[derive(Parser)]
#[command(
    name = "sbp",
    version,
    about = "Run scenario models driven by embedded solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a catalog model and write its JSONL trace.
    Run {
        model: String,
        /// Composition rule overriding the model's default.
        #[arg(long)]
        rule: Option<String>,
        /// Maximum number of solved steps.
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        /// Tick count for simulator models; overrides --steps.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        ticks: Option<u64>,
        /// Trace file; stdout if omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Model setting as key=value; repeatable.
        #[arg(long = "set", value_parser = parse_key_value)]
        settings: Vec<(String, String)>,
    },
    /// List catalog models with their default rules.
    List,
    /// Solve an s-expression formula file.
    Solve { file: PathBuf },
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(format!("expected key=value, got `{s}`")),
    }
}

fn run(
    model: &str,
    rule: Option<&str>,
    steps: usize,
    ticks: Option<usize>,
    trace: Option<PathBuf>,
    settings: &[(String, String)],
) -> Result<ExitCode, String> {
    let model = build_with(model, settings).map_err(|e| e.to_string())?;
    let steps = match ticks {
        Some(t) if model.plant.is_some() => t,
        _ => steps,
    };
    let mut out: Box<dyn Write> = match trace {
        Some(path) => Box::new(BufWriter::new(
            File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let summary = run_to_trace(model, rule, steps, &mut out).map_err(|e| e.to_string())?;
    out.flush().map_err(|e| e.to_string())?;
    Ok(
        if summary.steps == 0 && summary.termination == Termination::Deadlock {
            ExitCode::from(2)
        } else {
            ExitCode::SUCCESS
        },
    )
}

fn solve(file: &PathBuf) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let parsed = parse_formula_file(&text).map_err(|e| format!("{}:{e}", file.display()))?;
    let line = match smt_solve(&parsed.formula, &parsed.registry).map_err(|e| e.to_string())? {
        SmtResult::Sat(a) => serde_json::json!({
            "status": "sat",
            "assignment": a.to_json(&parsed.registry),
        }),
        SmtResult::Unsat => serde_json::json!({ "status": "unsat" }),
    };
    println!("{line}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::List => {
            for (name, rule) in CATALOG {
                println!("{name}\t{rule}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            model,
            rule,
            steps,
            ticks,
            trace,
            settings,
        } => run(
            &model,
            rule.as_deref(),
            steps as usize,
            ticks.map(|t| t as usize),
            trace,
            &settings,
        ),
        Command::Solve { file } => solve(&file),
    };
    result.unwrap_or_else(|message| {
        eprintln!("sbp: {message}");
        ExitCode::from(1)
    })
}
