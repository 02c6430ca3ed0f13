use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qfel_cli::{config, jobs, parse_max_dim, DEFAULT_MAX_DIM};

#[derive(Parser)]
#[command(name = "qfel", version, about = "Quantum FEL gain, photon statistics and dynamics jobs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a job and write its outputs plus report.json.
    Run(JobArgs),
    /// Check a config and print it with defaults filled in.
    Validate(JobArgs),
}

#[derive(Args)]
struct JobArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
    /// Run extended audits; raised audit flags fail the run.
    #[arg(long)]
    audit: bool,
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate(args) => match config::load(&args.config) {
            Ok(cfg) => {
                println!("{}", serde_json::to_string_pretty(&cfg.echo()).expect("echo serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => config_failure(&e),
        },
        Command::Run(args) => run(args),
    }
}

fn config_failure(e: &config::ConfigError) -> ExitCode {
    eprintln!("qfel: config error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn run(args: JobArgs) -> ExitCode {
    let cfg = match config::load(&args.config) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    let max_dim = match std::env::var("QFEL_MAX_DIM") {
        Ok(raw) => match parse_max_dim(&raw) {
            Ok(n) => n,
            Err(msg) => {
                eprintln!("qfel: config error: {msg}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        Err(_) => DEFAULT_MAX_DIM,
    };
    let out_dir = args.out.or_else(|| cfg.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("qfel-out"));
    let opts = jobs::RunOptions { out_dir, svg: args.svg, audit: args.audit, max_dim };
    match jobs::run(&cfg, &opts) {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {} ({} bytes, sha256 {})", opts.out_dir.join(&f.path).display(), f.bytes, f.sha256);
            }
            for c in &report.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.message);
            }
            for flag in &report.audit.flags {
                println!("audit flag: {flag}");
            }
            if report.succeeded() {
                ExitCode::SUCCESS
            } else {
                eprintln!("qfel: run finished with status {}", report.status);
                ExitCode::from(EXIT_RUNTIME)
            }
        }
        Err(e) => {
            eprintln!("qfel: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
