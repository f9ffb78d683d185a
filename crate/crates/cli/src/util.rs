use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use wscadl::ExecMode;

/// A problem with the command line itself (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Runs `f` with `threads` workers: 0 keeps the global pool, 1 runs
/// sequentially, `k > 1` uses a dedicated pool of `k` threads.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce(ExecMode) -> R + Send) -> Result<R> {
    match threads {
        0 => Ok(f(ExecMode::Parallel)),
        1 => Ok(f(ExecMode::Sequential)),
        #[cfg(feature = "parallel")]
        k => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build()?;
            Ok(pool.install(|| f(ExecMode::Parallel)))
        }
        #[cfg(not(feature = "parallel"))]
        _ => Ok(f(ExecMode::Sequential)),
    }
}

/// `data.jsonl` + `truth` + `jsonl` -> `data.truth.jsonl`.
pub fn sidecar(path: &Path, tag: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

pub fn display(paths: &[&Path]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    subcommand: &'a str,
    config: &'a C,
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    version: &'static str,
    wall_seconds: f64,
}

/// Run record written to `<primary output>.manifest.json`.
pub struct RunLog {
    start: Instant,
}

impl RunLog {
    pub fn start() -> Self {
        Self { start: Instant::now() }
    }

    pub fn finish<C: Serialize>(
        self,
        subcommand: &str,
        config: &C,
        seed: Option<u64>,
        inputs: Vec<String>,
        outputs: Vec<String>,
    ) -> Result<()> {
        let Some(primary) = outputs.first() else {
            return Ok(());
        };
        let path = PathBuf::from(format!("{primary}.manifest.json"));
        let m = Manifest {
            subcommand,
            config,
            seed,
            inputs,
            outputs: outputs.clone(),
            version: env!("CARGO_PKG_VERSION"),
            wall_seconds: self.start.elapsed().as_secs_f64(),
        };
        wscadl::io::write_json(path, &m)?;
        Ok(())
    }
}
