use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sddr_cli::config::{read_config_file, RunConfig};
use sddr_cli::run::{execute, Outcome, RunError};

const EXIT_SOLVER: u8 = 2;
const EXIT_PROPERTY: u8 = 3;
const EXIT_CONFIG: u8 = 4;

/// Convergence, robustness and pressure-flux studies of the serendipity
/// discrete de Rham Navier-Stokes scheme, plus the property suite and
/// discrete constant estimates. Flags override entries of the config file.
#[derive(Parser, Debug)]
#[command(name = "sddr", version)]
struct Cli {
    /// `key = value` file with any of the settings below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// convergence | robustness | pressflux | properties | constants
    #[arg(long)]
    cmd: Option<String>,
    /// cubic | tet | file:<path>
    #[arg(long)]
    mesh: Option<String>,
    /// Comma-separated ascending refinement levels, e.g. 2,4,8.
    #[arg(long)]
    levels: Option<String>,
    /// Polynomial degree.
    #[arg(long)]
    k: Option<String>,
    /// Reynolds number; the viscosity is its inverse.
    #[arg(long)]
    re: Option<String>,
    /// Pressure scaling of the manufactured solution.
    #[arg(long)]
    lambda: Option<String>,
    /// natural | essential | pressflux
    #[arg(long)]
    bc: Option<String>,
    /// Relative Newton tolerance.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Seed of the random property samples.
    #[arg(long)]
    seed: Option<String>,
    /// Solve the levels concurrently.
    #[arg(long)]
    parallel_levels: bool,
}

impl Cli {
    fn flags(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("cmd", &self.cmd),
            ("mesh", &self.mesh),
            ("levels", &self.levels),
            ("k", &self.k),
            ("re", &self.re),
            ("lambda", &self.lambda),
            ("bc", &self.bc),
            ("tol", &self.tol),
            ("max_iter", &self.max_iter),
            ("out", &self.out),
            ("seed", &self.seed),
        ];
        let mut map: BTreeMap<String, String> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v)))
            .collect();
        if self.parallel_levels {
            map.insert("parallel_levels".into(), "true".into());
        }
        map
    }
}

fn config(cli: &Cli) -> Result<RunConfig, Box<dyn std::error::Error>> {
    let mut entries = match &cli.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let flags = cli.flags();
    if flags.contains_key("re") {
        // an explicit Reynolds number replaces a viscosity from the file
        entries.remove("nu");
    }
    entries.extend(flags);
    Ok(RunConfig::from_entries(&entries)?)
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
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cfg = match config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match execute(&cfg) {
        Ok((outcome, log)) => {
            print!("{log}");
            match outcome {
                Outcome::Success => ExitCode::SUCCESS,
                Outcome::SolverFailure => ExitCode::from(EXIT_SOLVER),
                Outcome::PropertyFailure => ExitCode::from(EXIT_PROPERTY),
            }
        }
        Err(e @ RunError::Mesh(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}
