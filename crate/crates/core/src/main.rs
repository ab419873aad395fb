use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use irskg::error::{Error, Result};
use irskg::harness::{self, ExperimentConfig, ExperimentReport, OutputFormat, Preset, Scheme};

#[derive(Parser)]
#[command(name = "irskg", version, about = "IRS-assisted key generation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML config file; overrides --preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "desk")]
    preset: Preset,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; without it the report is printed as a table.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "csv")]
    format: OutputFormat,
    /// Cut Monte-Carlo counts for a fast look.
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the RGM protocol once and trace the per-round singular values.
    Simulate,
    /// Colluded-Eve NRMSE over the SNR and Eve-count grid.
    Attack,
    /// Key MI, leakage and secret-key rate over the SNR and Eve-count grid.
    Skr {
        #[arg(long, default_value = "rgm")]
        scheme: Scheme,
    },
    /// Moment checks, the singular-value trace and SKR versus probe length.
    Validate,
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::preset(c.preset),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if c.quick {
        cfg = cfg.quick();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(&cli.common)?;
    let report: ExperimentReport = match cli.command {
        Command::Simulate => harness::run_simulation(&cfg)?,
        Command::Attack => harness::run_nrmse_sweep(&cfg)?,
        Command::Skr { scheme } => harness::run_skr_sweep(&cfg, scheme)?,
        Command::Validate => harness::run_validation_suite(&cfg)?,
    };
    match &cli.common.out {
        Some(dir) => {
            for path in report.write(dir, cli.common.format)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => match cli.common.format {
            OutputFormat::Csv => print!("{}", report.table()),
            OutputFormat::Json => println!("{}", report.json()?),
        },
    }
    Ok(())
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => return fail("usage", e.render().to_string().trim_end().to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
