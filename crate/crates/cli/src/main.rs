use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use subconv_core::delta_method::{build_g, export_g_csv};
use subconv_core::forms::export_coeffs_csv;
use subconv_core::oscillatory::Bump;
use subconv_core::pipeline::{run_suite, write_csv, ExperimentConfig, SweepSpec, SUITES};
use subconv_core::suites::{gl3_instance, onset_setup};
use subconv_core::voronoi::truncation_sweeps;
use subconv_core::Error;

#[derive(Parser)]
#[command(name = "subconv", version, about = "Desk-scale checks of a GL(3)xGL(2) subconvexity argument")]
struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set n=100.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Lift the desk-scale caps.
    #[arg(long, global = true)]
    unsafe_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named suite and write its JSON report.
    Suite {
        name: String,
        /// Report path; defaults to the config's `report`, else none.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a sweep file and write a CSV table.
    Sweep {
        grid: PathBuf,
        /// Output path; defaults to the config's `csv`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a table as CSV.
    Export {
        what: Export,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Export {
    /// g(q, x) of the delta expansion at L = 1000.
    GTable,
    /// A(m, n) of the configured model on a 30 x 30 grid.
    Coefficients,
    /// The truncation onset sweeps on the cross-validation instance.
    Onsets,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &cli.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if cli.unsafe_scale {
        cfg.unsafe_scale = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(File::create(p)?)
        }
        None => Box::new(io::stdout()),
    })
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Suite { name, json } => {
            if !SUITES.contains(&name.as_str()) {
                return Err(Failure::Usage(format!(
                    "unknown suite {name:?}; expected one of {}",
                    SUITES.join(", ")
                )));
            }
            let rep = run_suite(name, &cfg)?;
            print!("{}", rep.table());
            if let Some(path) = json.as_ref().or(cfg.report_path.as_ref()) {
                let mut w = output(Some(path))?;
                writeln!(w, "{}", rep.to_json()?)?;
            }
            Ok(rep.pass)
        }
        Command::Sweep { grid, out } => {
            let text = std::fs::read_to_string(grid)
                .map_err(|e| Failure::Usage(format!("{}: {e}", grid.display())))?;
            let mut spec = SweepSpec::parse(&text)?;
            spec.base.unsafe_scale |= cfg.unsafe_scale;
            let rows = spec.run()?;
            let path = out.as_ref().or(spec.base.csv_path.as_ref()).or(cfg.csv_path.as_ref());
            write_csv(&spec.header(), &rows, output(path.map(|p| p.as_path()))?)?;
            Ok(true)
        }
        Command::Export { what, out } => {
            let w = output(out.as_deref())?;
            match what {
                Export::GTable => {
                    let e = build_g(1000, Bump::new(0.0, 1.0).with_power(4.0))?;
                    let xs: Vec<f64> = (0..=200).map(|i| i as f64 * 0.025).collect();
                    export_g_csv(&e, &[1, 2, 5, 10, 31, 63], &xs, w)?;
                }
                Export::Coefficients => {
                    export_coeffs_csv(&cfg.coeffs(1000)?, 30, w)?;
                }
                Export::Onsets => {
                    let p = gl3_instance()?;
                    let (_, sweeps) = truncation_sweeps(&p, &onset_setup())?;
                    let mut rows = Vec::new();
                    for (i, s) in sweeps.iter().enumerate() {
                        for (x, y) in &s.points {
                            rows.push(vec![i as f64, *x, *y, s.reference, s.level]);
                        }
                    }
                    let names: Vec<String> = sweeps.iter().map(|s| s.name.clone()).collect();
                    eprintln!("sweep index: {}", names.join(", "));
                    write_csv(&["sweep", "param", "value", "reference", "level"], &rows, w)?;
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
