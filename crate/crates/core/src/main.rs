use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use grstokes::cli::{run_study, CliError, RunConfig, EXIT_CONFIG, EXIT_OK, EXIT_PROPERTY};
use grstokes::manufactured::Domain;
use grstokes::mesh::write_mesh;
use grstokes::verify::{run_properties, results_csv, Property, DEFAULT_INSTANCES};

#[derive(Parser)]
#[command(name = "grstokes", version, about = "Hybrid DG solvers for the 2D compressible Stokes equations")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshCase {
    Square,
    Mountain,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study described by a JSON file.
    Run {
        config: PathBuf,
        /// Run even when the projected problem size exceeds the cap.
        #[arg(long)]
        force: bool,
    },
    /// Run the randomized property suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_INSTANCES)]
        instances: usize,
        /// Restrict to these properties (repeatable).
        #[arg(long = "property")]
        properties: Vec<Property>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a benchmark mesh.
    Mesh {
        #[arg(long = "case", value_enum)]
        case: MeshCase,
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Run { config, force } => {
            let config = RunConfig::load(&config)?;
            let outcome = run_study(&config, force)?;
            for r in &outcome.results {
                let status = if r.ok() { "ok" } else { "FAILED" };
                eprintln!("{:<60} {status}", r.cell.stem(config.case));
            }
            eprintln!("wrote {} files to {}", outcome.files.len(), config.output_dir.display());
            Ok(outcome.exit_code())
        }
        Command::Verify { seed, instances, properties, out } => {
            let selected = if properties.is_empty() { Property::ALL.to_vec() } else { properties };
            let results = run_properties(&selected, seed, instances);
            output(&out)?.write_all(results_csv(&results).as_bytes())?;
            for p in selected {
                let of: Vec<_> = results.iter().filter(|r| r.property == p).collect();
                let failed = of.iter().filter(|r| !r.passed).count();
                let worst = of.iter().map(|r| r.violation).fold(0.0, f64::max);
                eprintln!("{p:<24} {}/{} passed, worst violation {worst:.3e}", of.len() - failed, of.len());
            }
            Ok(if results.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_PROPERTY })
        }
        Command::Mesh { case, level, out } => {
            let domain = match case {
                MeshCase::Square => Domain::UnitSquare,
                MeshCase::Mountain => Domain::Mountain,
            };
            let mesh = domain.mesh(level)?;
            write_mesh(&mesh, output(&out)?)?;
            eprintln!(
                "{} cells, {} facets, h_max {:.4e}, h_min {:.4e}",
                mesh.num_cells(),
                mesh.num_facets(),
                mesh.h_max(),
                mesh.h_min()
            );
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(args.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    };
    ExitCode::from(code as u8)
}
