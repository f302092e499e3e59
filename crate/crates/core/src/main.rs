use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use interval_conjugacy::report::{
    export_plot_data, run_scenario, validate_config, Diagnostic, ReportBundle, ReportError, ScenarioConfig, BUNDLE_FILE,
};
use interval_conjugacy::Precision;

#[derive(Parser)]
#[command(name = "ivconj", version, about = "Conjugacies between interval maps and their regularity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the refinement depth of the conjugacy.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Override the sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (for `export`, defaults to the bundle's directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    precision: Option<PrecisionArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the report bundle.
    Run { config: PathBuf },
    /// Write the CSV plot data of one diagnostic from a bundle.
    Export { bundle: PathBuf, diagnostic: String },
    /// Check a scenario config and the maps it declares.
    Validate { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Double,
    Extended,
}

const EXIT_ERROR: u8 = 1;
const EXIT_VIOLATION: u8 = 2;

fn load(cli: &Cli, path: &Path) -> Result<ScenarioConfig, ReportError> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(d) = cli.depth {
        cfg.depth = d;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(p) = cli.precision {
        cfg.precision = match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Extended => Precision::Extended,
        };
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<u8, ReportError> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(cli, config)?;
            let bundle = run_scenario(&cfg)?;
            println!("verdict: {}", serde_json::to_string(&bundle.summary.verdict)?.trim_matches('"'));
            println!("bundle: {}", cfg.out.join(BUNDLE_FILE).display());
            if let Some(reason) = &bundle.summary.hypothesis_violation {
                eprintln!("hypothesis violation: {reason}");
                return Ok(EXIT_VIOLATION);
            }
            Ok(0)
        }
        Command::Export { bundle, diagnostic } => {
            let which = Diagnostic::parse(diagnostic)
                .ok_or_else(|| ReportError::Config(format!("unknown diagnostic `{diagnostic}`")))?;
            let b = ReportBundle::load(bundle)?;
            let dir = match &cli.out {
                Some(o) => o.clone(),
                None => bundle.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            for p in export_plot_data(&b, which, &dir)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::Validate { config } => {
            let cfg = load(cli, config)?;
            let mut ok = true;
            for r in validate_config(&cfg)? {
                for c in &r.checks {
                    println!("{} {:<28} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
                }
                for l in &r.limitations {
                    println!("note {l}");
                }
                ok &= r.passed();
            }
            Ok(if ok { 0 } else { EXIT_ERROR })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
