use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use wscadl::io::{read_dataset, read_model, write_jsonl, PredictionRecord};
use wscadl::parallel::map_ordered;
use wscadl::predict::predict_record;

use crate::util::{display, with_threads, RunLog};

#[derive(Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Predictions JSONL to write.
    #[arg(long)]
    out: PathBuf,
    /// Cap for the MAP rule on records without one; vacuous when omitted.
    #[arg(long)]
    nbar: Option<usize>,
    /// Also write per-instance class probabilities.
    #[arg(long)]
    instance_probs: bool,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

pub fn run(a: PredictArgs) -> Result<()> {
    let log = RunLog::start();
    let params = read_model(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let records = read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let preds = with_threads(a.threads, |exec| {
        map_ordered(exec, &records, |_, r| -> Result<PredictionRecord> {
            let signal = r.signal()?;
            let cap = r
                .cap
                .or(a.nbar)
                .unwrap_or(signal.num_instances(params.window_len()));
            predict_record(&r.id, &signal, &params, cap, a.instance_probs)
                .with_context(|| format!("predicting `{}`", r.id))
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    write_jsonl(&a.out, &preds).with_context(|| format!("writing {}", a.out.display()))?;
    log.finish("predict", &a, None, display(&[&a.model, &a.data]), display(&[&a.out]))
}
