use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sgps_core::harness::{self, pgm, Mode};
use sgps_core::{PatchConfig, SgpsError};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUN: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "sgps", version, about = "SURE-guided posterior sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the base configuration of an experiment file.
    Run { config: PathBuf },
    /// Run every point of the experiment's [sweep] section.
    Sweep { config: PathBuf },
    /// Print the patch-PCA noise estimate of a PGM image.
    Estimate {
        image: PathBuf,
        #[arg(long, default_value_t = 7)]
        patch: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Write a smooth synthetic image with white Gaussian noise as PGM.
    Synth {
        #[arg(long)]
        sigma: f64,
        /// HEIGHTxWIDTH
        #[arg(long, value_parser = parse_size)]
        size: (usize, usize),
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        bits: u8,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    if h == 0 || w == 0 {
        return Err("size must be positive".into());
    }
    Ok((h, w))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run { config } => experiment(&config, Mode::Single),
        Command::Sweep { config } => experiment(&config, Mode::Sweep),
        Command::Estimate { image, patch, stride } => {
            let cfg = PatchConfig {
                size: patch,
                stride,
                ..PatchConfig::default()
            };
            match harness::estimate_image(&image, &cfg) {
                Ok(v) => {
                    println!("{}", harness::format_sig6(v));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Synth { sigma, size, out, seed, bits } => {
            let result = harness::synth_image(sigma, size.0, size.1, seed).and_then(|img| pgm::write_pgm(&out, &img, bits));
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&e),
            }
        }
    }
}

fn experiment(config: &std::path::Path, mode: Mode) -> ExitCode {
    let outcome = match harness::run_experiment(config, mode) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let failed = outcome.failures();
    let total = outcome.jobs.len();
    for f in &outcome.files {
        println!("{}", f.display());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else if failed == total {
        eprintln!("error: all {total} runs failed");
        ExitCode::from(EXIT_RUN)
    } else {
        eprintln!("error: {failed} of {total} runs failed");
        ExitCode::from(EXIT_PARTIAL)
    }
}

fn fail(e: &SgpsError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        SgpsError::Config(_) | SgpsError::Image(_) | SgpsError::InvalidArgument(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_RUN),
    }
}
