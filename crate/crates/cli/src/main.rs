use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use potentia_cli::builtin::{builtin, NAMES};
use potentia_cli::output::{sha256_hex, to_json_bytes, write_bytes, write_run, write_tables, Manifest};
use potentia_cli::refine::refine;
use potentia_cli::runner::{run, RunOptions};
use potentia_cli::scenario::{parse_scenario, Scenario};
use potentia_cli::CliError;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "potentia", version, about = "Sweep measures onto point-cloud regions and check the results")]
struct Cli {
    /// Multiply every report tolerance by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a built-in scenario by name.
    Run {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a sphere scenario at several grid sizes.
    Refine {
        config: String,
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every built-in scenario.
    Suite {
        #[arg(long, default_value = "out/suite")]
        out: PathBuf,
    },
    /// List built-in scenarios.
    List,
}

fn load(config: &str) -> Result<(Scenario, Vec<u8>), CliError> {
    if let Some(text) = builtin(config) {
        return Ok((parse_scenario(text)?, text.as_bytes().to_vec()));
    }
    let bytes = fs::read(config).map_err(|source| CliError::Io {
        path: config.to_string(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Config(format!("{config}: {e}")))?;
    let scenario = parse_scenario(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{config}: {msg}")),
        other => other,
    })?;
    Ok((scenario, bytes))
}

fn out_dir(scenario: &Scenario, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| scenario.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&scenario.name))
}

/// Runs one scenario into `dir`, returning whether all reports passed and
/// the hash of `results.json`.
fn run_into(scenario: &Scenario, config: &[u8], dir: &Path, opts: &RunOptions) -> Result<(bool, String), CliError> {
    let output = run(scenario, opts)?;
    let bytes = to_json_bytes(&output.results);
    let manifest = Manifest::new(
        &scenario.name,
        config,
        &bytes,
        output.results.kernel.epsilon,
        output.results.grid_spacing,
    );
    let path = write_run(dir, &bytes, &output.tables, &manifest)?;
    for r in &output.results.reports {
        println!(
            "{:<6} {:<40} worst {:>12.4e}  tol {:>12.4e}",
            if r.pass { "pass" } else { "FAIL" },
            r.theorem_id,
            r.worst_residual,
            r.tolerance
        );
    }
    println!("wrote {}", path.display());
    Ok((output.results.all_pass, manifest.results_sha256))
}

#[derive(Serialize)]
struct SuiteEntry {
    scenario: String,
    all_pass: bool,
    results_sha256: String,
}

#[derive(Serialize)]
struct SuiteResults {
    all_pass: bool,
    scenarios: Vec<SuiteEntry>,
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let opts = RunOptions { tol_scale: cli.tol_scale };
    if !(cli.tol_scale > 0.0 && cli.tol_scale.is_finite()) {
        return Err(CliError::Config(format!("--tol-scale must be positive, got {}", cli.tol_scale)));
    }
    match cli.command {
        Command::Run { config, out } => {
            let (scenario, bytes) = load(&config)?;
            let dir = out_dir(&scenario, out);
            Ok(run_into(&scenario, &bytes, &dir, &opts)?.0)
        }
        Command::Refine { config, levels, out } => {
            let (scenario, bytes) = load(&config)?;
            let dir = out_dir(&scenario, out);
            let (mut results, table) = refine(&scenario, &levels)?;
            for r in &mut results.reports {
                r.tolerance *= opts.tol_scale;
                r.pass = r.worst_residual <= r.tolerance;
            }
            results.all_pass = results.reports.iter().all(|r| r.pass);
            let json = to_json_bytes(&results);
            write_bytes(&dir.join("results.json"), &json)?;
            write_tables(&dir, &[table])?;
            let first = results.levels.first().expect("at least one level");
            let manifest = Manifest::new(&scenario.name, &bytes, &json, first.epsilon, Some(first.spacing));
            write_bytes(&dir.join("manifest.json"), &to_json_bytes(&manifest))?;
            for l in &results.levels {
                println!(
                    "{:>6} points  h {:.4e}  capacity {:.6}  domination {:.3e}  mass formula {:.3e}",
                    l.points, l.spacing, l.capacity, l.domination_residual, l.mass_formula_residual
                );
            }
            for r in &results.reports {
                println!("{:<6} {}", if r.pass { "pass" } else { "FAIL" }, r.theorem_id);
            }
            Ok(results.all_pass)
        }
        Command::Suite { out } => {
            let mut entries = Vec::new();
            for name in NAMES {
                let text = builtin(name).expect("registered");
                let scenario = parse_scenario(text)?;
                println!("== {name}");
                let (pass, hash) = run_into(&scenario, text.as_bytes(), &out.join(name), &opts)?;
                entries.push(SuiteEntry {
                    scenario: name.to_string(),
                    all_pass: pass,
                    results_sha256: hash,
                });
            }
            let summary = SuiteResults {
                all_pass: entries.iter().all(|e| e.all_pass),
                scenarios: entries,
            };
            let bytes = to_json_bytes(&summary);
            write_bytes(&out.join("results.json"), &bytes)?;
            println!("suite results sha256 {}", sha256_hex(&bytes));
            Ok(summary.all_pass)
        }
        Command::List => {
            for name in NAMES {
                println!("{name}");
            }
            Ok(true)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("POTENTIA_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("POTENTIA_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Config("POTENTIA_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| execute(cli));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
