use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use inctab::em::EmOptions;
use inctab::inference::compare_models;
use inctab::report;
use inctab::sim::{simulate, SimParams};
use inctab::{fit_with, FitOptions, GuardMode, IncompleteTable, MechanismSpec};

/// Missing-data-mechanism models for incomplete contingency tables.
#[derive(Parser, Debug)]
#[command(name = "inctab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one mechanism model and report estimates, G² and expected counts.
    Fit {
        #[command(flatten)]
        io: Io,
        /// Mechanisms, e.g. "Y1:Y2,Y2:self" (self = NMAR, const = MCAR)
        #[arg(long)]
        model: String,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Fit every mechanism assignment and rank them by G².
    Compare {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Write the fitted expected table (table schema, real-valued counts).
    Expected {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        model: String,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Keep only the listed variables as missing-capable.
    Subtable {
        #[command(flatten)]
        io: Io,
        /// Comma-separated variable names
        #[arg(long, value_delimiter = ',', required = true)]
        keep: Vec<String>,
    },
    /// Draw a Poisson table from a model and parameter file.
    Simulate {
        /// JSON with variables, odds, optional baseline weights and associations
        #[arg(long)]
        params: PathBuf,
        /// Overrides the "model" entry of the parameter file
        #[arg(long)]
        model: Option<String>,
        /// Expected total count
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Args, Debug)]
struct Io {
    /// Table file (JSON or long-format CSV); stdin when omitted
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// text: aligned tables rounded to 2 decimals (tables as CSV)
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// EM relative convergence tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Skip closed forms and fit by EM
    #[arg(long)]
    force_em: bool,
    /// What to do when EM improves on a three-missing closed form
    #[arg(long, value_enum, default_value_t = Guard::Warn)]
    guard: Guard,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Guard {
    Off,
    Warn,
    Replace,
}

impl FitArgs {
    fn options(&self) -> Result<FitOptions> {
        if !(self.tol > 0.0) {
            bail!("--tol must be positive");
        }
        if self.max_iter == 0 {
            bail!("--max-iter must be at least 1");
        }
        let guard = match self.guard {
            Guard::Off => GuardMode::Off,
            Guard::Warn => GuardMode::Warn,
            Guard::Replace => GuardMode::Replace,
        };
        Ok(FitOptions {
            em: EmOptions { tol: self.tol, max_iter: self.max_iter, ..Default::default() },
            guard,
            force_em: self.force_em,
        })
    }
}

fn read_table(input: &Option<PathBuf>) -> Result<IncompleteTable> {
    let text = match input {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("reading stdin")?;
            s
        }
    };
    let table = IncompleteTable::parse(&text).context("parsing table")?;
    for w in table.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(table)
}

fn emit(output: &Option<PathBuf>, mut text: String) -> Result<()> {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn table_text(t: &IncompleteTable, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => t.to_json_string(),
        Format::Text => t.to_csv_string()?,
    })
}

/// Returns the process exit code on success.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Fit { io, model, fit } => {
            let table = read_table(&io.input)?;
            let spec = MechanismSpec::parse(&model, &table)?;
            let r = fit_with(&table, &spec, &fit.options()?)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            let out = match io.format {
                Format::Json => serde_json::to_string_pretty(&report::fit_json(&table, &r)?)?,
                Format::Text => report::fit_text(&table, &r)?,
            };
            emit(&io.output, out)?;
            Ok(if r.is_boundary() { 2 } else { 0 })
        }
        Command::Compare { io, fit } => {
            let table = read_table(&io.input)?;
            let rep = compare_models(&table, &fit.options()?)?;
            let out = match io.format {
                Format::Json => serde_json::to_string_pretty(&rep)?,
                Format::Text => report::comparison_text(&rep),
            };
            emit(&io.output, out)?;
            Ok(0)
        }
        Command::Expected { io, model, fit } => {
            let table = read_table(&io.input)?;
            let spec = MechanismSpec::parse(&model, &table)?;
            let r = fit_with(&table, &spec, &fit.options()?)?;
            let out = match io.format {
                Format::Json => serde_json::to_string_pretty(&report::expected_document(&table, &r))?,
                Format::Text => report::expected_text(&table, &r),
            };
            emit(&io.output, out)?;
            Ok(if r.is_boundary() { 2 } else { 0 })
        }
        Command::Subtable { io, keep } => {
            let table = read_table(&io.input)?;
            let vars = keep
                .iter()
                .map(|name| table.var_index(name.trim()).with_context(|| format!("unknown variable {name:?}")))
                .collect::<Result<Vec<_>>>()?;
            let sub = table.extract_subtable(&vars)?;
            emit(&io.output, table_text(&sub, io.format)?)?;
            Ok(0)
        }
        Command::Simulate { params, model, n, seed, output, format } => {
            let text = fs::read_to_string(&params).with_context(|| format!("reading {}", params.display()))?;
            let sp: SimParams = serde_json::from_str(&text).context("parsing parameter file")?;
            let Some(model) = model.or_else(|| sp.model.clone()) else {
                bail!("no model given (use --model or a \"model\" entry in the parameter file)");
            };
            if n == 0 {
                bail!("--n must be positive");
            }
            let table = simulate(&model, &sp, n as f64, seed)?;
            emit(&output, table_text(&table, format)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
