use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use wscadl::em::{em_fit_best_of, init_params};
use wscadl::init::{seeded_init, SeededInit};
use wscadl::io::{read_dataset, write_json, write_model, TraceFile};
use wscadl::{Backend, TrainConfig, WeakExample};

use crate::util::{display, sidecar, usage, with_threads, RunLog};

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Chain,
    Tree,
    Auto,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    /// Small uniform random words, zero biases.
    Random,
    /// Class words seeded from data windows that separate the weak labels.
    Seeded,
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Model JSON to write; the trace goes to `<out stem>.trace.json`.
    #[arg(long)]
    out: PathBuf,
    /// Number of nonzero classes; defaults to the largest label in the data.
    #[arg(long)]
    classes: Option<usize>,
    /// Window length. Even values are rounded up to the next odd length.
    #[arg(long, default_value_t = 5)]
    tw: usize,
    #[arg(long, default_value_t = 0.0)]
    lambda_r: f64,
    /// Cardinality cap for records without one; vacuous when omitted.
    #[arg(long)]
    nbar: Option<usize>,
    /// Initial M-step size.
    #[arg(long, default_value_t = 1e-3)]
    gamma: f64,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    backend: BackendArg,
    /// `T' * N̄` above which `auto` uses the tree engine.
    #[arg(long, default_value_t = wscadl::inference::DEFAULT_AUTO_THRESHOLD)]
    auto_threshold: usize,
    /// Worker threads; 1 is the sequential reference, 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Gradient steps per E-step.
    #[arg(long, default_value_t = 1)]
    m_steps: usize,
    /// Relative objective change that stops training.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Start every M-step at `--gamma` instead of twice the last accepted step.
    #[arg(long)]
    fixed_step: bool,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    init: InitArg,
    /// Independent starts (seeds `seed..seed+R`); the best final objective wins.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Candidate windows per class for `--init seeded`.
    #[arg(long, default_value_t = 300)]
    init_candidates: usize,
}

fn load(a: &TrainArgs, window_len: usize) -> Result<Vec<WeakExample>> {
    let records = read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    if records.is_empty() {
        anyhow::bail!("{} holds no records", a.data.display());
    }
    records
        .iter()
        .map(|r| {
            let vacuous = r.len + window_len - 1;
            Ok(r.to_example(a.nbar.unwrap_or(vacuous))?)
        })
        .collect()
}

pub fn run(a: TrainArgs) -> Result<()> {
    if a.tw == 0 {
        return Err(usage("--tw must be positive"));
    }
    if a.restarts == 0 {
        return Err(usage("--restarts must be at least 1"));
    }
    let window_len = if a.tw % 2 == 0 { a.tw + 1 } else { a.tw };
    if window_len != a.tw {
        eprintln!("note: window length {} is even; using {window_len}", a.tw);
    }
    let log = RunLog::start();
    let data = load(&a, window_len)?;
    let max_label = data.iter().filter_map(|e| e.labels.classes().last().copied()).max().unwrap_or(0);
    let num_classes = a.classes.unwrap_or(max_label);
    if num_classes == 0 {
        return Err(usage("no class labels in the data; pass --classes"));
    }
    if max_label > num_classes {
        return Err(usage(format!("data has label {max_label} but --classes is {num_classes}")));
    }
    let freq_bins = data[0].signal.freq_bins();
    if let Some(e) = data.iter().find(|e| e.signal.freq_bins() != freq_bins) {
        anyhow::bail!("signal `{}` has {} frequency bins, expected {freq_bins}", e.id, e.signal.freq_bins());
    }

    let backend = match a.backend {
        BackendArg::Chain => Backend::Chain,
        BackendArg::Tree => Backend::Tree,
        BackendArg::Auto => Backend::Auto(a.auto_threshold),
    };
    let (best, state) = with_threads(a.threads, |exec| -> Result<_> {
        let config = TrainConfig {
            learning_rate: a.gamma,
            l2_lambda: a.lambda_r,
            max_iters: a.iters,
            backend,
            m_steps_per_e: a.m_steps,
            seed: a.seed,
            tolerance: a.tol,
            adapt_step: !a.fixed_step,
            exec,
            ..TrainConfig::default()
        };
        config.validate()?;
        let inits = (0..a.restarts as u64)
            .map(|r| {
                let seed = a.seed.wrapping_add(r);
                match a.init {
                    InitArg::Random => init_params(num_classes, window_len, freq_bins, seed),
                    InitArg::Seeded => seeded_init(
                        &data,
                        num_classes,
                        window_len,
                        &SeededInit {
                            candidates: a.init_candidates,
                            seed,
                            ..SeededInit::default()
                        },
                        exec,
                    ),
                }
            })
            .collect::<wscadl::Result<Vec<_>>>()?;
        Ok(em_fit_best_of(&data, &config, inits)?)
    })??;

    write_model(&a.out, &state.params).with_context(|| format!("writing {}", a.out.display()))?;
    let trace_path = sidecar(&a.out, "trace", "json");
    let trace = TraceFile {
        iteration: state.iteration,
        loglik_trace: state.log_likelihood_trace.clone(),
    };
    write_json(&trace_path, &trace).with_context(|| format!("writing {}", trace_path.display()))?;
    eprintln!(
        "trained {} iterations (start {best}), objective {}",
        state.iteration,
        state.final_objective()
    );
    log.finish("train", &a, Some(a.seed), display(&[&a.data]), display(&[&a.out, &trace_path]))
}
