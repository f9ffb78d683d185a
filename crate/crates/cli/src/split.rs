use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::Serialize;
use wscadl::io::{read_jsonl, write_jsonl, DatasetRecord, TruthRecord};

use crate::util::{display, usage, RunLog};

#[derive(Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Fraction of records, taken from the front, that go to the train file.
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    /// Writes `<prefix>.train.jsonl`, `<prefix>.test.jsonl` and matching
    /// `.truth.jsonl` files.
    #[arg(long)]
    out_prefix: PathBuf,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn split_file<T: DeserializeOwned + Serialize>(src: &Path, frac: f64, train: &Path, test: &Path) -> Result<usize> {
    let items: Vec<T> = read_jsonl(src).with_context(|| format!("reading {}", src.display()))?;
    let n = ((items.len() as f64) * frac).round() as usize;
    write_jsonl(train, &items[..n])?;
    write_jsonl(test, &items[n..])?;
    Ok(items.len())
}

pub fn run(a: SplitArgs) -> Result<()> {
    if !(a.train_frac > 0.0 && a.train_frac < 1.0) {
        return Err(usage("--train-frac must lie in (0, 1)"));
    }
    let log = RunLog::start();
    let train = with_suffix(&a.out_prefix, ".train.jsonl");
    let test = with_suffix(&a.out_prefix, ".test.jsonl");
    let n = split_file::<DatasetRecord>(&a.data, a.train_frac, &train, &test)?;
    let mut outputs = vec![train, test];
    let mut inputs = vec![a.data.clone()];
    if let Some(truth) = &a.truth {
        let tt = with_suffix(&a.out_prefix, ".train.truth.jsonl");
        let ts = with_suffix(&a.out_prefix, ".test.truth.jsonl");
        let m = split_file::<TruthRecord>(truth, a.train_frac, &tt, &ts)?;
        if m != n {
            anyhow::bail!("{} has {m} records but {} has {n}", truth.display(), a.data.display());
        }
        outputs.extend([tt, ts]);
        inputs.push(truth.clone());
    }
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let outputs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    log.finish("split", &a, None, display(&inputs), display(&outputs))
}
