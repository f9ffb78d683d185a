use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use serde::Serialize;
use wscadl::datagen::{gen_binary_dataset, gen_gabor_dataset, template_bits, GaborConfig, GeneratedSignal};
use wscadl::io::{write_json, write_jsonl, DatasetRecord, TruthRecord};

use crate::util::{display, sidecar, usage, RunLog};

#[derive(Subcommand)]
pub enum DatagenCommand {
    /// 1-D superpositions of nine Gabor templates in white noise.
    Gabor(GaborArgs),
    /// Random binary 3xT signals labeled by their three most frequent 3x3 patterns.
    Binary(BinaryArgs),
}

#[derive(Args, Serialize)]
pub struct OutputArgs {
    /// Dataset JSONL to write.
    #[arg(long)]
    out: PathBuf,
    /// Instance-label sidecar; defaults to `<out stem>.truth.jsonl`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct GaborArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    len: usize,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    snr_db: f64,
    /// Emit clean superpositions.
    #[arg(long)]
    no_noise: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
pub struct BinaryArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
struct Templates {
    /// Row-major 3x3 bit patterns for classes 1..=3.
    templates: Vec<[[u8; 3]; 3]>,
}

fn write_dataset(signals: &[GeneratedSignal], output: &OutputArgs) -> Result<PathBuf> {
    let records: Vec<DatasetRecord> = signals
        .iter()
        .map(|s| DatasetRecord::from_parts(&s.id, &s.signal, &s.labels, None))
        .collect();
    let truth: Vec<TruthRecord> = signals
        .iter()
        .map(|s| TruthRecord {
            id: s.id.clone(),
            y: s.truth.clone(),
        })
        .collect();
    write_jsonl(&output.out, &records).with_context(|| format!("writing {}", output.out.display()))?;
    let truth_path = output.truth.clone().unwrap_or_else(|| sidecar(&output.out, "truth", "jsonl"));
    write_jsonl(&truth_path, &truth).with_context(|| format!("writing {}", truth_path.display()))?;
    Ok(truth_path)
}

pub fn run(cmd: DatagenCommand) -> Result<()> {
    let log = RunLog::start();
    match cmd {
        DatagenCommand::Gabor(a) => {
            if a.len == 0 {
                return Err(usage("--len must be positive"));
            }
            let cfg = GaborConfig {
                num_signals: a.n,
                len: a.len,
                snr_db: (!a.no_noise).then_some(a.snr_db),
                seed: a.seed,
                ..GaborConfig::default()
            };
            let signals = gen_gabor_dataset(&cfg)?;
            let truth = write_dataset(&signals, &a.output)?;
            log.finish("datagen gabor", &a, Some(a.seed), vec![], display(&[&a.output.out, &truth]))
        }
        DatagenCommand::Binary(a) => {
            let data = gen_binary_dataset(a.seed, a.n, a.len)?;
            let truth = write_dataset(&data.signals, &a.output)?;
            let tpath = sidecar(&a.output.out, "templates", "json");
            let templates = Templates {
                templates: data.templates.iter().map(|&c| template_bits(c)).collect(),
            };
            write_json(&tpath, &templates).with_context(|| format!("writing {}", tpath.display()))?;
            log.finish(
                "datagen binary",
                &a,
                Some(a.seed),
                vec![],
                display(&[&a.output.out, &truth, &tpath]),
            )
        }
    }
}
