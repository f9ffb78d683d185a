//! EM training: exact posteriors in the E-step, gradient ascent on the
//! auxiliary function in the M-step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::{correlate_direct, FftConvolver};
use crate::error::{Error, Result};
use crate::inference::{Backend, Posterior};
use crate::parallel::{map_ordered, pairwise_sum, pairwise_sum_vecs, ExecMode};
use crate::prior::{analyze, log_sum_exp, prior_field, DEFAULT_PRIOR_FFT_CROSSOVER};
use crate::types::{ModelParams, WeakExample};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub max_iters: usize,
    pub backend: Backend,
    pub m_steps_per_e: usize,
    pub seed: u64,
    /// Stop once the relative change of the objective drops below this.
    pub tolerance: f64,
    /// Step halvings tried before an M-step gives up for this iteration.
    pub max_backoff: usize,
    /// Start each M-step from twice the last accepted step instead of
    /// `learning_rate`.
    pub adapt_step: bool,
    pub exec: ExecMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            l2_lambda: 0.0,
            max_iters: 100,
            backend: Backend::default(),
            m_steps_per_e: 1,
            seed: 0,
            tolerance: 1e-12,
            max_backoff: 50,
            adapt_step: true,
            exec: ExecMode::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParams("learning rate must be positive".into()));
        }
        if !(self.l2_lambda >= 0.0) || !self.l2_lambda.is_finite() {
            return Err(Error::InvalidParams("regularization must be non-negative".into()));
        }
        if self.m_steps_per_e == 0 {
            return Err(Error::InvalidParams("need at least one M-step per E-step".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParams("tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmState {
    pub params: ModelParams,
    /// EM iterations performed.
    pub iteration: usize,
    /// Regularized incomplete log-likelihood before each iteration and after
    /// the last one.
    pub log_likelihood_trace: Vec<f64>,
    /// Auxiliary function after each M-step.
    pub q_trace: Vec<f64>,
}

impl EmState {
    /// Last entry of the objective trace.
    pub fn final_objective(&self) -> f64 {
        self.log_likelihood_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Seeded initialization: words uniform in `±0.01/sqrt(F*T_w)`, biases zero.
pub fn init_params(num_classes: usize, window_len: usize, freq_bins: usize, seed: u64) -> Result<ModelParams> {
    let mut p = ModelParams::zeros(num_classes, window_len, freq_bins)?;
    let eps = 0.01 / ((freq_bins * window_len) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for w in p.words_mut() {
        *w = rng.random_range(-eps..eps);
    }
    Ok(p)
}

fn reg_term(params: &ModelParams, lambda: f64) -> f64 {
    0.5 * lambda * params.word_sq_norm()
}

/// Posteriors for every signal at `params`.
pub fn e_step(params: &ModelParams, data: &[WeakExample], backend: Backend, exec: ExecMode) -> Result<Vec<Posterior>> {
    map_ordered(exec, data, |_, ex| {
        let prior = prior_field(&analyze(&ex.signal, params)?);
        backend.posterior(&prior, &ex.labels, ex.cap).map_err(|e| match e {
            Error::ZeroEvidence => Error::EvidenceImpossible { id: ex.id.clone() },
            other => other,
        })
    })
    .into_iter()
    .collect()
}

/// `Σ_n log P(Y_n, I_n = 1 | x_n)` (no regularization).
pub fn incomplete_log_likelihood(
    params: &ModelParams,
    data: &[WeakExample],
    backend: Backend,
    exec: ExecMode,
) -> Result<f64> {
    let terms: Result<Vec<f64>> = map_ordered(exec, data, |_, ex| {
        let prior = prior_field(&analyze(&ex.signal, params)?);
        backend.log_evidence(&prior, &ex.labels, ex.cap).map_err(|e| match e {
            Error::ZeroEvidence => Error::EvidenceImpossible { id: ex.id.clone() },
            other => other,
        })
    })
    .into_iter()
    .collect();
    Ok(pairwise_sum(&terms?))
}

/// Incomplete log-likelihood minus `λ/2 Σ ||w_c||²`.
pub fn objective(params: &ModelParams, data: &[WeakExample], backend: Backend, lambda: f64, exec: ExecMode) -> Result<f64> {
    Ok(incomplete_log_likelihood(params, data, backend, exec)? - reg_term(params, lambda))
}

fn signal_q(params: &ModelParams, ex: &WeakExample, post: &Posterior) -> Result<f64> {
    let a = analyze(&ex.signal, params)?;
    let terms: Vec<f64> = (0..a.num_instances())
        .map(|u| {
            let s = a.row(u);
            let fit: f64 = s.iter().zip(post.row(u)).map(|(x, p)| x * p).sum();
            fit - log_sum_exp(s)
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Auxiliary function `Q(θ, θ_i)` for posteriors computed at the anchor `θ_i`.
pub fn auxiliary_q(
    params: &ModelParams,
    data: &[WeakExample],
    posteriors: &[Posterior],
    lambda: f64,
    exec: ExecMode,
) -> Result<f64> {
    let terms: Result<Vec<f64>> = map_ordered(exec, data, |n, ex| signal_q(params, ex, &posteriors[n]))
        .into_iter()
        .collect();
    Ok(pairwise_sum(&terms?) - reg_term(params, lambda))
}

/// Gradient of `Q` with the same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub words: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradient {
    pub fn is_finite(&self) -> bool {
        self.words.iter().chain(&self.biases).all(|v| v.is_finite())
    }
}

fn signal_gradient(params: &ModelParams, ex: &WeakExample, post: &Posterior) -> Result<Vec<f64>> {
    let a = analyze(&ex.signal, params)?;
    let prior = prior_field(&a);
    let ncls = params.num_classes() + 1;
    let n_inst = a.num_instances();
    let tw = params.window_len();
    let f_bins = params.freq_bins();
    // a_c(u) = posterior - prior, per class.
    let resid: Vec<Vec<f64>> = (0..ncls)
        .map(|c| (0..n_inst).map(|u| post.prob(u, c) - prior.prob(u, c)).collect())
        .collect();
    let use_fft = ex.signal.len() * tw > DEFAULT_PRIOR_FFT_CROSSOVER;
    let mut fft = FftConvolver::new();
    let mut out = Vec::with_capacity(ncls * f_bins * tw + ncls);
    for r in &resid {
        for f in 0..f_bins {
            let x = ex.signal.row(f);
            if use_fft {
                out.extend(fft.correlate(x, r, tw));
            } else {
                out.extend(correlate_direct(x, r, tw));
            }
        }
    }
    for r in &resid {
        out.push(pairwise_sum(r));
    }
    Ok(out)
}

/// `∂Q/∂w` and `∂Q/∂b` at `params`, with per-signal contributions reduced in
/// signal order.
pub fn gradient(
    params: &ModelParams,
    data: &[WeakExample],
    posteriors: &[Posterior],
    lambda: f64,
    exec: ExecMode,
) -> Result<Gradient> {
    let parts: Result<Vec<Vec<f64>>> = map_ordered(exec, data, |n, ex| signal_gradient(params, ex, &posteriors[n]))
        .into_iter()
        .collect();
    let total = pairwise_sum_vecs(&parts?);
    let nw = params.words().len();
    let mut words = total[..nw].to_vec();
    for (g, w) in words.iter_mut().zip(params.words()) {
        *g -= lambda * w;
    }
    Ok(Gradient {
        words,
        biases: total[nw..].to_vec(),
    })
}

fn stepped(params: &ModelParams, g: &Gradient, step: f64) -> ModelParams {
    let mut p = params.clone();
    for (w, d) in p.words_mut().iter_mut().zip(&g.words) {
        *w += step * d;
    }
    for (b, d) in p.biases_mut().iter_mut().zip(&g.biases) {
        *b += step * d;
    }
    p
}

/// Result of one M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct MStep {
    pub params: ModelParams,
    pub q: f64,
    /// Accepted step size, or `None` if no tried step improved `Q`.
    pub step: Option<f64>,
}

/// One gradient-ascent step on `Q` starting at step size `start`, halving
/// until `Q` improves. Returns the parameters unchanged if no tried step
/// improves `Q`.
pub fn m_step(
    params: &ModelParams,
    data: &[WeakExample],
    posteriors: &[Posterior],
    config: &TrainConfig,
    start: f64,
) -> Result<MStep> {
    let q0 = auxiliary_q(params, data, posteriors, config.l2_lambda, config.exec)?;
    let g = gradient(params, data, posteriors, config.l2_lambda, config.exec)?;
    if !g.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    let mut step = start;
    for _ in 0..=config.max_backoff {
        let cand = stepped(params, &g, step);
        if cand.is_finite() {
            let q = auxiliary_q(&cand, data, posteriors, config.l2_lambda, config.exec)?;
            if q > q0 {
                return Ok(MStep {
                    params: cand,
                    q,
                    step: Some(step),
                });
            }
        }
        step *= 0.5;
    }
    Ok(MStep {
        params: params.clone(),
        q: q0,
        step: None,
    })
}

/// Runs EM from `init` for up to `config.max_iters` iterations.
pub fn em_fit(data: &[WeakExample], config: &TrainConfig, init: ModelParams) -> Result<EmState> {
    em_fit_with(data, config, init, |_, _| {})
}

/// [`em_fit`] with a callback invoked after each iteration with the
/// iteration number and the current objective.
pub fn em_fit_with(
    data: &[WeakExample],
    config: &TrainConfig,
    init: ModelParams,
    mut on_iter: impl FnMut(usize, f64),
) -> Result<EmState> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let mut params = init;
    let mut trace = Vec::with_capacity(config.max_iters + 1);
    let mut q_trace = Vec::with_capacity(config.max_iters);
    let mut iteration = 0;
    let mut start = config.learning_rate;
    let mut posts = e_step(&params, data, config.backend, config.exec)?;
    let mut current = pairwise_sum(&posts.iter().map(|p| p.log_evidence).collect::<Vec<_>>())
        - reg_term(&params, config.l2_lambda);
    trace.push(current);

    while iteration < config.max_iters {
        for _ in 0..config.m_steps_per_e {
            let m = m_step(&params, data, &posts, config, start)?;
            params = m.params;
            q_trace.push(m.q);
            if config.adapt_step {
                if let Some(step) = m.step {
                    start = 2.0 * step;
                }
            }
        }
        iteration += 1;
        posts = e_step(&params, data, config.backend, config.exec)?;
        let next = pairwise_sum(&posts.iter().map(|p| p.log_evidence).collect::<Vec<_>>())
            - reg_term(&params, config.l2_lambda);
        trace.push(next);
        on_iter(iteration, next);
        let change = (next - current).abs() / current.abs().max(f64::MIN_POSITIVE);
        current = next;
        if change < config.tolerance {
            break;
        }
    }
    Ok(EmState {
        params,
        iteration,
        log_likelihood_trace: trace,
        q_trace,
    })
}

/// Runs [`em_fit`] from each initialization and keeps the run with the
/// highest final objective; the first one wins ties. Returns its index too.
pub fn em_fit_best_of(
    data: &[WeakExample],
    config: &TrainConfig,
    inits: Vec<ModelParams>,
) -> Result<(usize, EmState)> {
    let mut best: Option<(usize, EmState)> = None;
    for (i, init) in inits.into_iter().enumerate() {
        let state = em_fit(data, config, init)?;
        let better = match &best {
            None => true,
            Some((_, b)) => state.final_objective() > b.final_objective(),
        };
        if better {
            best = Some((i, state));
        }
    }
    best.ok_or_else(|| Error::InvalidParams("no initializations given".into()))
}
