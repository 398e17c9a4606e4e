use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use conebvp::config::{ProblemConfig, Resolved};
use conebvp::corpus::{corpus_entry, corpus_names};
use conebvp::report::{envelope_table, run_check, run_constants, run_solve, RunReport, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "conebvp", version, about = "Cone fixed-point analysis for (k, n-k) boundary value problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the normalized kernel and its envelope
    Envelope(Common),
    /// Compute the cone constants
    Constants(Common),
    /// Check the hypotheses of the selected theorem
    Check(Common),
    /// Locate fixed points and certify the predicted multiplicity
    Solve(Common),
    /// List the built-in problems, or print one as a config file
    Corpus(Common),
}

#[derive(Args)]
struct Common {
    /// Problem configuration (TOML or JSON)
    #[arg(long, conflicts_with = "corpus")]
    config: Option<PathBuf>,
    /// Built-in problem name
    #[arg(long)]
    corpus: Option<String>,
    /// Sampling grid: lattice size for `envelope`, points per axis for `check`/`solve`
    #[arg(long)]
    grid: Option<usize>,
    /// Solver tolerance for `solve`, quadrature tolerance otherwise
    #[arg(long)]
    tol: Option<f64>,
    /// Directory for report and CSV files
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Failure carrying the process exit code.
struct Exit(i32, anyhow::Error);

fn config_error(e: impl Into<anyhow::Error>) -> Exit {
    Exit(EXIT_CONFIG, e.into())
}

fn load(common: &Common, cmd: &str) -> Result<(ProblemConfig, Resolved), Exit> {
    let mut cfg = match (&common.config, &common.corpus) {
        (Some(path), _) => ProblemConfig::load(path).map_err(config_error)?,
        (None, Some(name)) => corpus_entry(name).ok_or_else(|| {
            config_error(anyhow::anyhow!("unknown corpus entry `{name}`; available: {}", corpus_names().join(", ")))
        })?,
        (None, None) => return Err(config_error(anyhow::anyhow!("one of --config or --corpus is required"))),
    };
    if let Some(tol) = common.tol {
        if cmd == "solve" {
            cfg.solver.tol = tol;
        } else {
            cfg.check.tol = tol;
        }
    }
    if let (Some(grid), true) = (common.grid, cmd == "check" || cmd == "solve") {
        cfg.check.grid = grid;
    }
    let resolved = cfg.resolve().map_err(config_error)?;
    Ok((cfg, resolved))
}

fn write_csv(path: Option<&Path>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn prepare_out(out: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(out.clone())
}

fn emit_report(rep: &RunReport, common: &Common) -> Result<()> {
    let out = prepare_out(&common.out)?;
    let json = rep.to_json();
    if let Some(dir) = &out {
        fs::write(dir.join("report.json"), &json)?;
    }
    match common.format {
        Format::Json if out.is_none() => println!("{json}"),
        Format::Json => {}
        Format::Csv => {
            if let Some(sol) = &rep.solve {
                let rows = sol.solutions.iter().enumerate().map(|(i, s)| {
                    [i as f64, s.gamma, s.alpha, s.theta, s.fixed_point_residual, s.ode_residual, s.cone_margin]
                        .iter()
                        .map(|v| v.to_string())
                        .collect()
                });
                let header = ["index", "gamma", "alpha", "theta", "fixed_point_residual", "ode_residual", "cone_margin"];
                write_csv(out.as_ref().map(|d| d.join("solutions.csv")).as_deref(), &header, rows)?;
            } else if !rep.hypotheses.is_empty() {
                let rows = rep.hypotheses.iter().map(|h| {
                    vec![h.id.to_string(), format!("{:?}", h.verdict).to_lowercase(), h.margin.to_string(), h.condition.clone()]
                });
                write_csv(out.as_ref().map(|d| d.join("hypotheses.csv")).as_deref(), &["id", "verdict", "margin", "condition"], rows)?;
            } else if let Some(c) = &rep.constants {
                let value = serde_json::to_value(c)?;
                let rows = value
                    .as_object()
                    .into_iter()
                    .flatten()
                    .filter(|(_, v)| v.is_number())
                    .map(|(k, v)| vec![k.clone(), v.to_string()]);
                write_csv(out.as_ref().map(|d| d.join("constants.csv")).as_deref(), &["name", "value"], rows)?;
            }
        }
    }
    if let (Some(dir), Some(sol)) = (&out, &rep.solve) {
        for (i, s) in sol.solutions.iter().enumerate() {
            let rows = s.nodes.iter().zip(&s.values).map(|(t, u)| vec![t.to_string(), u.to_string()]);
            write_csv(Some(&dir.join(format!("solution_{i}.csv"))), &["t", "u"], rows)?;
        }
    }
    Ok(())
}

fn cmd_envelope(common: &Common) -> Result<i32, Exit> {
    let (cfg, r) = load(common, "envelope")?;
    let fail = |e: anyhow::Error| Exit(EXIT_CONFIG, e);
    let grid = common.grid.unwrap_or(101);
    if grid < 2 {
        return Err(config_error(anyhow::anyhow!("--grid must be at least 2")));
    }
    let rep = run_constants(&cfg, &r).map_err(|e| fail(e.into()))?;
    let out = prepare_out(&common.out).map_err(fail)?;
    let rows = envelope_table(&r.envelope, grid).into_iter().map(|row| row.iter().map(|v| v.to_string()).collect());
    let header = ["t", "s", "u_tilde", "k1", "k2"];
    let io_err = |e: anyhow::Error| Exit(2, e);
    match (&out, common.format) {
        (Some(dir), _) => {
            write_csv(Some(&dir.join("envelope.csv")), &header, rows).map_err(io_err)?;
            fs::write(dir.join("report.json"), rep.to_json()).map_err(|e| io_err(e.into()))?;
        }
        (None, Format::Csv) => write_csv(None, &header, rows).map_err(io_err)?,
        (None, Format::Json) => println!("{}", rep.to_json()),
    }
    Ok(0)
}

fn cmd_corpus(common: &Common) -> Result<i32, Exit> {
    match &common.corpus {
        None => {
            for name in corpus_names() {
                println!("{name}");
            }
        }
        Some(name) => {
            let cfg = corpus_entry(name)
                .ok_or_else(|| config_error(anyhow::anyhow!("unknown corpus entry `{name}`")))?;
            match common.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&cfg).map_err(config_error)?),
                Format::Csv => print!("{}", cfg.to_toml()),
            }
        }
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<i32, Exit> {
    let pipeline = |common: &Common, cmd: &str| -> Result<i32, Exit> {
        let (cfg, r) = load(common, cmd)?;
        let rep = match cmd {
            "constants" => run_constants(&cfg, &r),
            "check" => run_check(&cfg, &r),
            _ => run_solve(&cfg, &r),
        }
        .map_err(config_error)?;
        emit_report(&rep, common).map_err(|e| Exit(2, e))?;
        for h in rep.hypotheses.iter().filter(|h| !h.verdict.passed()) {
            eprintln!("FAIL {}: {} (margin {:e})", h.id, h.condition, h.margin);
        }
        if let Some(c) = rep.certificate.as_ref().and_then(|c| c.failure.as_ref()) {
            eprintln!("certificate failed: {c:?}");
        }
        Ok(rep.exit_code)
    };
    match &cli.command {
        Command::Envelope(c) => cmd_envelope(c),
        Command::Constants(c) => pipeline(c, "constants"),
        Command::Check(c) => pipeline(c, "check"),
        Command::Solve(c) => pipeline(c, "solve"),
        Command::Corpus(c) => cmd_corpus(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Exit(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}
