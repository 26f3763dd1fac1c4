//! `gotm` command-line frontend.
//!
//! Exit codes: 0 success, 2 file or syntax error, 3 validation error,
//! 4 unknown symbol or flag misuse. Reports go to standard output; every
//! failure writes exactly one diagnostic line to standard error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, Read, Write};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use crate::engine::{self, EngineError, SatisfactionAssignment};
use crate::grammar_io::{self, format_weight, ParseError};
use crate::model::{self, ModelError, SymbolKind, TreatmentModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "gotm",
    version,
    about = "Analyze fuzzy AND/OR treatment goal models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model and list errors and warnings
    Validate {
        /// Model file, or `-` for standard input
        file: String,
    },
    /// Print impact values (one value, a row, a column or the full matrix)
    Impact {
        file: String,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, value_enum, default_value_t = MatrixFormat::Table)]
        format: MatrixFormat,
    },
    /// List every derivation chain between two symbols, strongest first
    Chains {
        file: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    /// Propagate intervention employment degrees up to the goals
    Satisfy {
        file: String,
        /// Comma-separated `name` (degree 1) or `name=degree` items
        #[arg(long, value_delimiter = ',')]
        employ: Vec<String>,
    },
    /// Emit the model as DOT or JSON
    Export {
        file: String,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Include the impact matrix (JSON only)
        #[arg(long)]
        with_impact: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MatrixFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Dot,
    Json,
}

#[derive(Debug)]
enum Failure {
    Io {
        path: String,
        err: io::Error,
    },
    Parse {
        path: String,
        err: ParseError,
    },
    /// Validation report already printed.
    Invalid(usize),
    Usage(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Io { .. } => EXIT_INPUT,
            Failure::Parse { err, .. } if err.is_syntax() => EXIT_INPUT,
            Failure::Parse { .. } | Failure::Invalid(_) => EXIT_INVALID,
            Failure::Usage(_) => EXIT_USAGE,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io { path, err } if err.kind() == io::ErrorKind::NotFound => {
                format!("{path}: file not found")
            }
            Failure::Io { path, err } => format!("{path}: {err}"),
            Failure::Parse { path, err } => {
                format!("{path}:{}:{}: {}", err.line, err.column, err.kind)
            }
            Failure::Invalid(n) => format!(
                "model has {n} validation error{}",
                if *n == 1 { "" } else { "s" }
            ),
            Failure::Usage(msg) => msg.clone(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(err: EngineError) -> Self {
        Failure::Usage(err.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(err: ModelError) -> Self {
        Failure::Usage(err.to_string())
    }
}

/// Runs the tool against the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdin = io::stdin();
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(
        args,
        &mut stdin.lock(),
        &mut stdout.lock(),
        &mut stderr.lock(),
    )
}

/// Runs the tool against the given streams and returns the exit code.
pub fn run_with<I, T>(
    args: I,
    stdin: &mut dyn Read,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            let _ = writeln!(err, "gotm: {first}");
            return EXIT_USAGE;
        }
    };

    let mut report = String::new();
    let result = dispatch(cli.command, stdin, &mut report);
    // Reports are buffered so a failure never leaves partial output behind,
    // except validation reports which are printed before the failure.
    let _ = out.write_all(report.as_bytes());
    match result {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            let _ = writeln!(err, "gotm: {}", failure.message());
            failure.exit_code()
        }
    }
}

fn load(path: &str, stdin: &mut dyn Read) -> Result<TreatmentModel, Failure> {
    let (name, text) = read_source(path, stdin)?;
    grammar_io::parse_model(&text).map_err(|err| Failure::Parse { path: name, err })
}

fn read_source(path: &str, stdin: &mut dyn Read) -> Result<(String, String), Failure> {
    if path == "-" {
        let mut text = String::new();
        stdin.read_to_string(&mut text).map_err(|err| Failure::Io {
            path: "<stdin>".into(),
            err,
        })?;
        Ok(("<stdin>".into(), text))
    } else {
        let text = std::fs::read_to_string(path).map_err(|err| Failure::Io {
            path: path.to_string(),
            err,
        })?;
        Ok((path.to_string(), text))
    }
}

fn dispatch(command: Command, stdin: &mut dyn Read, out: &mut String) -> Result<(), Failure> {
    match command {
        Command::Validate { file } => cmd_validate(&file, stdin, out),
        Command::Impact {
            file,
            from,
            to,
            format,
        } => {
            let model = load(&file, stdin)?;
            cmd_impact(&model, from.as_deref(), to.as_deref(), format, out)
        }
        Command::Chains { file, from, to } => {
            let model = load(&file, stdin)?;
            cmd_chains(&model, &from, &to, out)
        }
        Command::Satisfy { file, employ } => {
            let model = load(&file, stdin)?;
            cmd_satisfy(&model, &employ, out)
        }
        Command::Export {
            file,
            format,
            with_impact,
        } => {
            if with_impact && format == ExportFormat::Dot {
                return Err(Failure::Usage(
                    "--with-impact requires --format json".into(),
                ));
            }
            let model = load(&file, stdin)?;
            match format {
                ExportFormat::Dot => out.push_str(&grammar_io::export_dot(&model)),
                ExportFormat::Json => {
                    let matrix = with_impact.then(|| engine::impact_matrix(&model));
                    let doc = grammar_io::export_json(&model, matrix.as_ref())
                        .expect("matrix computed from this model");
                    out.push_str(&doc);
                }
            }
            Ok(())
        }
    }
}

fn cmd_validate(file: &str, stdin: &mut dyn Read, out: &mut String) -> Result<(), Failure> {
    let (name, text) = read_source(file, stdin)?;
    let model = match grammar_io::parse_model(&text) {
        Ok(model) => model,
        Err(err) if err.is_syntax() => return Err(Failure::Parse { path: name, err }),
        Err(err) => {
            let finding = match &err.kind {
                grammar_io::ParseErrorKind::Model(e) => model::Finding::from(e),
                grammar_io::ParseErrorKind::Syntax { .. } => unreachable!(),
            };
            writeln!(
                out,
                "error[{}] {}:{}:{}: {}",
                finding.code, name, err.line, err.column, finding.message
            )
            .unwrap();
            out.push_str("1 error, 0 warnings\n");
            return Err(Failure::Invalid(1));
        }
    };

    let report = model::validate(&model);
    for e in &report.errors {
        writeln!(out, "error[{}] {}: {}", e.code, e.subject, e.message).unwrap();
    }
    for w in &report.warnings {
        writeln!(out, "warning[{}] {}: {}", w.code, w.subject, w.message).unwrap();
    }
    let plural = |n: usize, word: &str| format!("{n} {word}{}", if n == 1 { "" } else { "s" });
    writeln!(
        out,
        "{}, {}",
        plural(report.errors.len(), "error"),
        plural(report.warnings.len(), "warning")
    )
    .unwrap();
    if report.errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invalid(report.errors.len()))
    }
}

fn require_goal(model: &TreatmentModel, name: &str) -> Result<(), Failure> {
    match model.kind(name) {
        Some(SymbolKind::Goal) => Ok(()),
        Some(SymbolKind::Intervention) => Err(ModelError::NotAGoal(
            model::SymbolId::new(name).expect("known symbols are tokens"),
        )
        .into()),
        None => Err(ModelError::UnknownSymbol(name.to_string()).into()),
    }
}

fn require_symbol(model: &TreatmentModel, name: &str) -> Result<(), Failure> {
    model
        .kind(name)
        .map(|_| ())
        .ok_or_else(|| ModelError::UnknownSymbol(name.to_string()).into())
}

struct Grid {
    rows: Vec<String>,
    cols: Vec<String>,
    values: Vec<Vec<f64>>,
}

fn cmd_impact(
    model: &TreatmentModel,
    from: Option<&str>,
    to: Option<&str>,
    format: MatrixFormat,
    out: &mut String,
) -> Result<(), Failure> {
    if let Some(from) = from {
        require_goal(model, from)?;
    }
    if let Some(to) = to {
        require_symbol(model, to)?;
    }

    if let (Some(from), Some(to)) = (from, to) {
        let value = engine::impact(model, from, to)?;
        match format {
            MatrixFormat::Json => {
                let mut obj = Map::new();
                obj.insert("from".into(), Value::from(from));
                obj.insert("to".into(), Value::from(to));
                obj.insert("impact".into(), grammar_io::json_number(value));
                writeln!(out, "{}", Value::Object(obj)).unwrap();
            }
            _ => writeln!(out, "{}", format_weight(value)).unwrap(),
        }
        return Ok(());
    }

    if from.is_none() && to.is_none() && format == MatrixFormat::Csv {
        out.push_str(&grammar_io::export_csv(&engine::impact_matrix(model)));
        return Ok(());
    }

    let grid = match to {
        None => {
            let matrix = engine::impact_matrix(model);
            let picked: Vec<usize> = (0..matrix.goals().len())
                .filter(|&r| from.is_none_or(|f| matrix.goals()[r].as_str() == f))
                .collect();
            Grid {
                rows: picked
                    .iter()
                    .map(|&r| matrix.goals()[r].to_string())
                    .collect(),
                cols: matrix
                    .interventions()
                    .iter()
                    .map(|i| i.to_string())
                    .collect(),
                values: picked.iter().map(|&r| matrix.row(r).to_vec()).collect(),
            }
        }
        Some(to) => {
            let rows: Vec<String> = model
                .goals_root_first()
                .iter()
                .map(|g| g.to_string())
                .collect();
            let values = rows
                .iter()
                .map(|g| engine::impact(model, g, to).map(|v| vec![v]))
                .collect::<Result<_, _>>()?;
            Grid {
                rows,
                cols: vec![to.to_string()],
                values,
            }
        }
    };

    match format {
        MatrixFormat::Table => render_table(&grid, out),
        MatrixFormat::Csv => {
            writeln!(out, "goal,{}", grid.cols.join(",")).unwrap();
            for (row, values) in grid.rows.iter().zip(&grid.values) {
                let cells: Vec<String> = values.iter().map(|&v| format_weight(v)).collect();
                writeln!(out, "{row},{}", cells.join(",")).unwrap();
            }
        }
        MatrixFormat::Json => {
            let mut obj = Map::new();
            for (row, values) in grid.rows.iter().zip(&grid.values) {
                let cells: Map<String, Value> = grid
                    .cols
                    .iter()
                    .zip(values)
                    .map(|(c, &v)| (c.clone(), grammar_io::json_number(v)))
                    .collect();
                obj.insert(row.clone(), Value::Object(cells));
            }
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&Value::Object(obj)).unwrap()
            )
            .unwrap();
        }
    }
    Ok(())
}

/// Fixed-width table: left-aligned row labels, right-aligned values.
fn render_table(grid: &Grid, out: &mut String) {
    let cells: Vec<Vec<String>> = grid
        .values
        .iter()
        .map(|row| row.iter().map(|&v| format_weight(v)).collect())
        .collect();
    let label_width = grid
        .rows
        .iter()
        .map(String::len)
        .chain(std::iter::once("goal".len()))
        .max()
        .unwrap_or(4);
    let widths: Vec<usize> = grid
        .cols
        .iter()
        .enumerate()
        .map(|(c, name)| {
            cells
                .iter()
                .map(|row| row[c].len())
                .chain(std::iter::once(name.len()))
                .max()
                .unwrap_or(0)
        })
        .collect();

    let mut line = format!("{:<label_width$}", "goal");
    for (name, w) in grid.cols.iter().zip(&widths) {
        write!(line, "  {name:>w$}").unwrap();
    }
    writeln!(out, "{}", line.trim_end()).unwrap();
    for (row, values) in grid.rows.iter().zip(&cells) {
        let mut line = format!("{row:<label_width$}");
        for (v, w) in values.iter().zip(&widths) {
            write!(line, "  {v:>w$}").unwrap();
        }
        writeln!(out, "{}", line.trim_end()).unwrap();
    }
}

fn cmd_chains(
    model: &TreatmentModel,
    from: &str,
    to: &str,
    out: &mut String,
) -> Result<(), Failure> {
    require_goal(model, from)?;
    require_symbol(model, to)?;
    let mut chains = engine::enumerate_chains(model, from, to)?;
    chains.sort_by(|a, b| {
        b.membership
            .total_cmp(&a.membership)
            .then_with(|| a.chain.cmp(&b.chain))
    });
    for c in chains {
        writeln!(out, "{} [{}]", c.chain, format_weight(c.membership)).unwrap();
    }
    Ok(())
}

fn parse_employ(
    model: &TreatmentModel,
    items: &[String],
) -> Result<SatisfactionAssignment, Failure> {
    let mut assignment = SatisfactionAssignment::new();
    for item in items.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let (name, degree) = match item.split_once('=') {
            Some((name, deg)) => {
                let deg: f64 = deg
                    .trim()
                    .parse()
                    .map_err(|_| Failure::Usage(format!("invalid degree in `{item}`")))?;
                (name.trim(), deg)
            }
            None => (item, 1.0),
        };
        if model.kind(name) != Some(SymbolKind::Intervention) {
            return Err(EngineError::UnknownIntervention(name.to_string()).into());
        }
        assignment.set(name, degree)?;
    }
    Ok(assignment)
}

fn cmd_satisfy(model: &TreatmentModel, employ: &[String], out: &mut String) -> Result<(), Failure> {
    let assignment = parse_employ(model, employ)?;
    let sat = engine::satisfaction(model, &assignment)?;
    let goals = model.goals_root_first();
    let width = goals.iter().map(|g| g.as_str().len()).max().unwrap_or(0);
    for goal in goals {
        writeln!(
            out,
            "{:<width$}  {}",
            goal.as_str(),
            format_weight(sat[goal])
        )
        .unwrap();
    }
    Ok(())
}
