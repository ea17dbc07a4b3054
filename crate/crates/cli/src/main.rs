//! `dimer-forge`: dimer graphs, T-graphs and their tilings from the command
//! line.
//!
//! Exit codes: 0 when every check passed, 1 when a check failed, 2 when the
//! input could not be used.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ConvertArgs, PeriodicArgs, SampleArgs, SpectralArgs, Status, TileArgs, VerifyArgs};

#[derive(Parser)]
#[command(name = "dimer-forge", version, about = "Dimers, T-graphs and spanning forests")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "DIMER_FORGE_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the Kasteleyn identity and degeneracy of a graph, or the
    /// forest/matching bijection of a segment file.
    Verify {
        input: PathBuf,
        /// Treat the input as a segment file and check the bijection.
        #[arg(long)]
        bijection: bool,
        /// Fail unless the graph has no 1-cuts.
        #[arg(long = "require-2-nondegenerate")]
        require_2_nondegenerate: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw the T-graph of a plane graph, or of a segment file, as SVG.
    Tile {
        input: PathBuf,
        #[arg(long)]
        polygon_seed: Option<u64>,
        /// Id of the black vertex whose segment ends at the first corner.
        #[arg(long)]
        b0: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Machine-readable tiling; defaults to the SVG path with `.json`.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Draw a window of the almost periodic T-graph of a torus graph.
    TilePeriodic {
        input: PathBuf,
        /// Window size in fundamental domains, as `JxK`.
        #[arg(long, default_value = "10x10", value_parser = parse_window)]
        window: [usize; 2],
        /// Which unit-torus root to use.
        #[arg(long, default_value_t = 0)]
        root: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Draw dimer configurations with Wilson's algorithm, one per line.
    Sample {
        input: PathBuf,
        #[arg(short = 'n', default_value_t = 1)]
        n: usize,
        #[arg(long)]
        polygon_seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral polynomial, unit-torus roots and nullvectors of a torus graph.
    Spectral {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment file to derived graph file, or plane graph to segment file.
    Convert {
        input: PathBuf,
        #[arg(long)]
        polygon_seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_window(s: &str) -> Result<[usize; 2], String> {
    let (j, k) = s.split_once(['x', 'X']).ok_or("expected JxK")?;
    let j: usize = j.trim().parse().map_err(|_| format!("bad width {j:?}"))?;
    let k: usize = k.trim().parse().map_err(|_| format!("bad height {k:?}"))?;
    if j == 0 || k == 0 {
        return Err("window must be at least 1x1".into());
    }
    Ok([j, k])
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let seed = cli.seed;
    let result = match cli.command {
        Command::Verify {
            input,
            bijection,
            require_2_nondegenerate,
            out,
        } => commands::verify(&VerifyArgs {
            input,
            bijection,
            require_2_nondegenerate,
            out,
            seed,
        }),
        Command::Tile {
            input,
            polygon_seed,
            b0,
            out,
            json,
        } => commands::tile(&TileArgs {
            input,
            polygon_seed,
            b0,
            out,
            json,
            seed,
        }),
        Command::TilePeriodic {
            input,
            window,
            root,
            out,
            json,
        } => commands::tile_periodic(&PeriodicArgs {
            input,
            window,
            root,
            out,
            json,
            seed,
        }),
        Command::Sample {
            input,
            n,
            polygon_seed,
            out,
        } => commands::sample(&SampleArgs {
            input,
            n,
            polygon_seed,
            out,
            seed,
        }),
        Command::Spectral { input, out } => commands::spectral(&SpectralArgs { input, out, seed }),
        Command::Convert {
            input,
            polygon_seed,
            out,
        } => commands::convert(&ConvertArgs {
            input,
            polygon_seed,
            out,
            seed,
        }),
    };
    match result {
        Ok(Status::Passed) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.0);
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_parsing() {
        assert_eq!(parse_window("10x20"), Ok([10, 20]));
        assert!(parse_window("0x3").is_err());
        assert!(parse_window("7").is_err());
    }
}
