use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use wscadl::bench::{bench_posterior, fig7_json, to_csv, BenchGrid};
use wscadl::io::write_json;

use crate::util::{display, sidecar, usage, RunLog};

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    /// A few small cells, seconds to run.
    Quick,
    /// The three one-axis sweeps: length, label-set size and cap ratio.
    Fig7,
    /// Every combination of lengths, label counts and ratios; slow.
    Full,
}

#[derive(Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Grid::Quick)]
    grid: Grid,
    /// Timed repetitions per cell; the median is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timings CSV.
    #[arg(long)]
    out: PathBuf,
    /// Plot-ready series; defaults to `<out stem>.fig7.json`.
    #[arg(long)]
    fig7_json: Option<PathBuf>,
}

pub fn run(a: BenchArgs) -> Result<()> {
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let log = RunLog::start();
    let mut grid = match a.grid {
        Grid::Quick => BenchGrid::quick(),
        Grid::Fig7 => BenchGrid::fig7(),
        Grid::Full => BenchGrid::full(),
    };
    grid.reps = a.reps;
    grid.seed = a.seed;
    let total = grid.cells.len();
    let mut done = 0;
    let rows = bench_posterior(&grid, |r| {
        done += 1;
        eprintln!(
            "[{done}/{total}] {} T'={} |Y|={} ratio={}: {:.3e} s",
            r.backend, r.len, r.labels, r.ratio, r.median_seconds
        );
    })?;
    std::fs::write(&a.out, to_csv(&rows)).with_context(|| format!("writing {}", a.out.display()))?;
    let fig = a.fig7_json.clone().unwrap_or_else(|| sidecar(&a.out, "fig7", "json"));
    write_json(&fig, &fig7_json(&rows)).with_context(|| format!("writing {}", fig.display()))?;
    log.finish("bench", &a, Some(a.seed), vec![], display(&[&a.out, &fig]))
}
