use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use wscadl::io::{read_jsonl, write_json, PredictionRecord, TruthRecord};
use wscadl::metrics::{calibrate_lags, evaluate_with_lags, ScoredSignal};
use wscadl::ClassSet;

use crate::util::{display, usage, RunLog};

#[derive(Args, Serialize)]
pub struct EvalArgs {
    /// Predictions JSONL; instance AUCs need `--instance-probs` predictions.
    #[arg(long)]
    pred: PathBuf,
    /// Instance-label truth JSONL. Signal label sets are the nonzero labels in `y`.
    #[arg(long)]
    truth: PathBuf,
    /// Predictions used to pick a per-class lag (typically on training signals).
    #[arg(long, requires = "calibrate_truth")]
    calibrate_pred: Option<PathBuf>,
    #[arg(long, requires = "calibrate_pred")]
    calibrate_truth: Option<PathBuf>,
    /// Largest lag tried during calibration.
    #[arg(long, default_value_t = 0)]
    max_lag: usize,
    /// CSV report; printed to stdout either way.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full report as JSON, including warnings.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn scored(pred: &Path, truth: &Path) -> Result<Vec<ScoredSignal>> {
    let preds: Vec<PredictionRecord> = read_jsonl(pred).with_context(|| format!("reading {}", pred.display()))?;
    let truths: Vec<TruthRecord> = read_jsonl(truth).with_context(|| format!("reading {}", truth.display()))?;
    let mut by_id: HashMap<&str, &TruthRecord> = HashMap::with_capacity(truths.len());
    for t in &truths {
        if by_id.insert(&t.id, t).is_some() {
            bail!("duplicate id `{}` in {}", t.id, truth.display());
        }
    }
    if preds.is_empty() {
        bail!("{} holds no predictions", pred.display());
    }
    let c = preds[0].scores.len();
    preds
        .iter()
        .map(|p| {
            let t = by_id
                .get(p.id.as_str())
                .with_context(|| format!("no truth for `{}`", p.id))?;
            if p.scores.len() != c {
                bail!("`{}` has {} scores, expected {c}", p.id, p.scores.len());
            }
            let offset = p.instance_offset.unwrap_or(0);
            let instances = match &p.instance_probs {
                Some(probs) if probs.len() == t.y.len() + 2 * offset => Some((probs.clone(), t.y.clone())),
                Some(probs) => bail!(
                    "`{}` has {} instance rows but {} truth labels with offset {offset}",
                    p.id,
                    probs.len(),
                    t.y.len()
                ),
                None => None,
            };
            if let Some(&bad) = t.y.iter().find(|&&y| y > c) {
                bail!("`{}` has truth label {bad} beyond {c} classes", p.id);
            }
            Ok(ScoredSignal {
                scores: p.scores.clone(),
                labels: ClassSet::new(t.y.iter().copied().filter(|&y| y != 0))?,
                instances,
                instance_offset: offset,
            })
        })
        .collect()
}

pub fn run(a: EvalArgs) -> Result<()> {
    let log = RunLog::start();
    let signals = scored(&a.pred, &a.truth)?;
    let c = signals[0].scores.len();
    let mut inputs = vec![a.pred.as_path(), a.truth.as_path()];
    let lags = match (&a.calibrate_pred, &a.calibrate_truth) {
        (Some(p), Some(t)) => {
            let cal = scored(p, t)?;
            if cal[0].scores.len() != c {
                return Err(usage("calibration predictions have a different class count"));
            }
            if cal.iter().any(|s| s.instances.is_none()) {
                return Err(usage("calibration predictions lack instance probabilities"));
            }
            inputs.extend([p.as_path(), t.as_path()]);
            Some(calibrate_lags(&cal, c, a.max_lag))
        }
        _ => None,
    };
    let report = evaluate_with_lags(&signals, lags.as_deref())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let csv = report.to_csv();
    print!("{csv}");
    let mut outputs: Vec<&Path> = Vec::new();
    if let Some(out) = &a.out {
        std::fs::write(out, &csv).with_context(|| format!("writing {}", out.display()))?;
        outputs.push(out);
    }
    if let Some(json) = &a.json {
        write_json(json, &report).with_context(|| format!("writing {}", json.display()))?;
        outputs.push(json);
    }
    log.finish("eval", &a, None, display(&inputs), display(&outputs))
}
