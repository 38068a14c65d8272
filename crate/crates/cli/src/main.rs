use clap::{Parser, Subcommand};
use qho_kam_cli::commands::{
    cmd_evolve, cmd_kam, cmd_measure, cmd_perturbation, cmd_verify, EXIT_CONFIG, EXIT_NUMERICAL,
};
use qho_kam_cli::config::{parse_config_str, ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Batch driver for the oscillator reducibility engine.
#[derive(Parser)]
#[command(name = "qho-kam", version, about)]
struct Cli {
    /// TOML run configuration (required by every command except `verify`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (0 = library default). Outputs are identical for
    /// any thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Seed override for sampler-driven commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Escalate aliasing diagnostics to hard errors.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the perturbation Fourier family and its decay report.
    Perturbation,
    /// Run the KAM iteration for one frequency vector.
    Kam,
    /// Estimate excluded-frequency fractions over sampled frequencies.
    Measure,
    /// Run the verification suites and emit a pass/fail report.
    Verify,
    /// Evolve an initial state through the reduced system.
    Evolve,
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| "--config is required for this command".to_string())?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut cfg = parse_config_str(&text).map_err(|e: ConfigError| e.to_string())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.strict {
        cfg.strict_aliasing = true;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if cli.threads > 0 {
        pool = pool.num_threads(cli.threads);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    let code = pool.install(|| dispatch(&cli));
    ExitCode::from(code as u8)
}

fn dispatch(cli: &Cli) -> i32 {
    let out = cli.out.clone();
    let result = match &cli.command {
        Command::Verify => {
            let seed = cli.seed.unwrap_or_else(|| {
                cli.config
                    .as_ref()
                    .and_then(|p| std::fs::read_to_string(p).ok())
                    .and_then(|t| parse_config_str(&t).ok())
                    .map(|c| c.seed)
                    .unwrap_or(1)
            });
            cmd_verify(seed, &out)
        }
        other => {
            let cfg = match load_config(cli) {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("config error: {msg}");
                    return EXIT_CONFIG;
                }
            };
            match other {
                Command::Perturbation => cmd_perturbation(&cfg, &out, cli.strict),
                Command::Kam => cmd_kam(&cfg, &out),
                Command::Measure => cmd_measure(&cfg, &out, cfg.seed),
                Command::Evolve => cmd_evolve(&cfg, &out),
                Command::Verify => unreachable!(),
            }
        }
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let numerical = err.chain().any(|cause| {
                let s = cause.to_string();
                s.contains("residual")
                    || s.contains("unitar")
                    || s.contains("underresolved")
                    || s.contains("aliasing")
                    || s.contains("small divisor")
                    || s.contains("generator norm")
            });
            if numerical {
                EXIT_NUMERICAL
            } else {
                1
            }
        }
    }
}
