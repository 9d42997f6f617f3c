use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use pam_cli::config::Format;
use pam_cli::{parse_config_with, render, run, summary, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

/// Runs one moment-asymptotics computation described by a JSON config.
#[derive(Debug, Parser)]
#[command(name = "pam", version)]
struct Args {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Result document path; printed to stdout after the summary when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out.as_ref().map(|p| p.display().to_string()),
        format: args.format.map(|f| match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }),
    };
    let cfg = match parse_config_with(&text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
        eprintln!("cannot start worker pool: {e}");
        return ExitCode::from(1);
    }
    if args.verbose {
        eprintln!("running {} with {} worker threads", cfg.command.as_str(), rayon::current_num_threads());
    }
    let result = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{} failed: {e}", cfg.command.as_str());
            return ExitCode::from(1);
        }
    };
    if args.verbose {
        eprint!("{}", pam_cli::runner::warnings(&result));
    }
    println!("{}", summary(&result));
    let doc = render(&result, cfg.output.format);
    match &cfg.output.path {
        Some(p) => {
            if let Err(e) = std::fs::write(p, doc) {
                eprintln!("cannot write {p}: {e}");
                return ExitCode::from(1);
            }
        }
        None => print!("{doc}"),
    }
    ExitCode::SUCCESS
}
