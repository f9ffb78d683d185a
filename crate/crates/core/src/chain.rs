//! Exact posterior inference on the chain reformulation.
//!
//! The state after instance `u` is the running label subset (restricted to
//! `Y`) and the running count of nonzero labels. Forward messages hold
//! `P(subset, count | x)`, backward messages `P(Y, I = 1 | subset, count, x)`.
//! Counts are stored up to `min(N̄, u + 1)`; larger counts can never satisfy
//! the cap and carry no mass that reaches an output.

use crate::error::{Error, Result};
use crate::inference::{assemble_posterior, check_labels, count_tilt, Posterior};
use crate::types::{ClassSet, LabelState, MessageTable, PriorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainOptions {
    /// Rescale every message to max entry 1 and track the log normalizer.
    pub normalize: bool,
    /// Count tilt for [`chain_posterior_with`] and [`chain_log_evidence`]; see
    /// [`count_tilt`].
    pub tilt: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            normalize: true,
            tilt: true,
        }
    }
}

/// Forward and backward messages for every instance.
#[derive(Debug, Clone)]
pub struct ChainMessages {
    pub forward: Vec<MessageTable>,
    pub backward: Vec<MessageTable>,
}

/// Stored count width after instance `u`.
fn width(u: usize, cap: usize) -> usize {
    cap.min(u + 1) + 1
}

fn class_probs(prior: &PriorField, labels: &ClassSet, u: usize) -> Vec<f64> {
    labels.classes().iter().map(|&c| prior.prob(u, c)).collect()
}

fn first_forward(prior: &PriorField, labels: &ClassSet, cap: usize) -> MessageTable {
    let mut t = MessageTable::zeros(labels.num_subsets(), width(0, cap));
    t.set(0, 0, prior.prob(0, 0));
    if cap >= 1 {
        for (k, &c) in labels.classes().iter().enumerate() {
            t.set(1 << k, 1, prior.prob(0, c));
        }
    }
    t
}

fn forward_step(prev: &MessageTable, p0: f64, ps: &[f64], out_width: usize) -> MessageTable {
    let nsub = prev.num_subsets();
    let wp = prev.width();
    let mut out = MessageTable::zeros(nsub, out_width);
    out.log_scale = prev.log_scale;
    for mask in 0..nsub as u32 {
        let prev_row = prev.row(mask);
        let row = out.row_mut(mask);
        let n = wp.min(out_width);
        for (o, &a) in row[..n].iter_mut().zip(prev_row) {
            *o = a * p0;
        }
        // A nonzero label c ∈ subset either repeats (subset unchanged) or
        // introduces c (coming from subset \ {c}); the count grows by one.
        let shift = (out_width - 1).min(wp);
        for (k, &pk) in ps.iter().enumerate() {
            if mask >> k & 1 == 0 || pk == 0.0 {
                continue;
            }
            let sub_row = prev.row(mask ^ (1 << k));
            for l in 0..shift {
                row[l + 1] += pk * (prev_row[l] + sub_row[l]);
            }
        }
    }
    out
}

fn backward_step(next: &MessageTable, p0: f64, ps: &[f64], out_width: usize) -> MessageTable {
    let nsub = next.num_subsets();
    let wn = next.width();
    let mut out = MessageTable::zeros(nsub, out_width);
    out.log_scale = next.log_scale;
    for mask in 0..nsub as u32 {
        let row = out.row_mut(mask);
        let next_row = next.row(mask);
        let n = wn.min(out_width);
        for (o, &b) in row[..n].iter_mut().zip(next_row) {
            *o = b * p0;
        }
        let m = out_width.min(wn.saturating_sub(1));
        for (k, &pk) in ps.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            let up = next.row(mask | 1 << k);
            for l in 0..m {
                row[l] += pk * up[l + 1];
            }
        }
    }
    out
}

fn last_backward(labels: &ClassSet, cap: usize, n: usize) -> MessageTable {
    let w = width(n - 1, cap);
    let mut t = MessageTable::zeros(labels.num_subsets(), w);
    t.row_mut(labels.full_mask()).iter_mut().for_each(|v| *v = 1.0);
    t
}

/// Prior with the classes of `labels` scaled by `r = exp(log_tilt)`. Running
/// the recursions on it multiplies every forward entry by `r^l`; a backward
/// initialization of `r^-l` cancels the factor in every joint.
fn tilted_prior(prior: &PriorField, labels: &ClassSet, log_tilt: f64) -> PriorField {
    if log_tilt == 0.0 {
        return prior.clone();
    }
    let r = log_tilt.exp();
    let ncls = prior.num_classes() + 1;
    let mut probs = prior.probs().to_vec();
    for row in probs.chunks_mut(ncls) {
        for &c in labels.classes() {
            row[c] *= r;
        }
    }
    PriorField::from_raw(prior.num_instances(), prior.num_classes(), probs)
}

fn tilted_last_backward(labels: &ClassSet, cap: usize, n: usize, log_tilt: f64) -> MessageTable {
    let mut t = last_backward(labels, cap, n);
    if log_tilt != 0.0 {
        let top = t.width() - 1;
        for (l, v) in t.row_mut(labels.full_mask()).iter_mut().enumerate() {
            *v = ((top - l) as f64 * log_tilt).exp();
        }
        t.log_scale = -(top as f64) * log_tilt;
    }
    t
}

/// Label-set log likelihood from a forward table tilted by `r^l`.
fn tilted_label_set_likelihood(last_forward: &MessageTable, subset: u32, cap: usize, log_tilt: f64) -> f64 {
    if log_tilt == 0.0 {
        return chain_label_set_likelihood(last_forward, subset, cap);
    }
    let w = last_forward.width().min(cap + 1);
    let logs: Vec<f64> = last_forward.row(subset)[..w]
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(l, &v)| v.ln() - l as f64 * log_tilt)
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + logs.iter().map(|v| (v - m).exp()).sum::<f64>().ln() + last_forward.log_scale
}

/// Forward messages `α_u` for `u = 0..T'`.
pub fn chain_forward(prior: &PriorField, labels: &ClassSet, cap: usize) -> Vec<MessageTable> {
    chain_forward_with(prior, labels, cap, ChainOptions::default())
}

pub fn chain_forward_with(
    prior: &PriorField,
    labels: &ClassSet,
    cap: usize,
    opts: ChainOptions,
) -> Vec<MessageTable> {
    let n = prior.num_instances();
    let mut out = Vec::with_capacity(n);
    let mut cur = first_forward(prior, labels, cap);
    if opts.normalize {
        cur.normalize();
    }
    out.push(cur);
    for u in 1..n {
        let ps = class_probs(prior, labels, u);
        let mut next = forward_step(&out[u - 1], prior.prob(u, 0), &ps, width(u, cap));
        if opts.normalize {
            next.normalize();
        }
        out.push(next);
    }
    out
}

/// Backward messages `β_u` for `u = 0..T'`.
pub fn chain_backward(prior: &PriorField, labels: &ClassSet, cap: usize) -> Vec<MessageTable> {
    chain_backward_with(prior, labels, cap, ChainOptions::default())
}

pub fn chain_backward_with(
    prior: &PriorField,
    labels: &ClassSet,
    cap: usize,
    opts: ChainOptions,
) -> Vec<MessageTable> {
    let n = prior.num_instances();
    let mut rev = Vec::with_capacity(n);
    rev.push(last_backward(labels, cap, n));
    for u in (1..n).rev() {
        let ps = class_probs(prior, labels, u);
        let mut prev = backward_step(rev.last().unwrap(), prior.prob(u, 0), &ps, width(u - 1, cap));
        if opts.normalize {
            prev.normalize();
        }
        rev.push(prev);
    }
    rev.reverse();
    rev
}

pub fn chain_messages(prior: &PriorField, labels: &ClassSet, cap: usize) -> ChainMessages {
    ChainMessages {
        forward: chain_forward(prior, labels, cap),
        backward: chain_backward(prior, labels, cap),
    }
}

/// `log P(Y = subset, I = 1 | x)` read off the final forward message.
pub fn chain_label_set_likelihood(last_forward: &MessageTable, subset: u32, cap: usize) -> f64 {
    let w = last_forward.width().min(cap + 1);
    let s: f64 = last_forward.row(subset)[..w].iter().sum();
    s.ln() + last_forward.log_scale
}

/// `log P(Y, I = 1 | x)` from a forward pass only.
pub fn chain_log_evidence(prior: &PriorField, labels: &ClassSet, cap: usize) -> Result<f64> {
    check_labels(prior, labels)?;
    let n = prior.num_instances();
    let log_tilt = count_tilt(prior, labels, cap);
    let prior = &tilted_prior(prior, labels, log_tilt);
    let mut cur = first_forward(prior, labels, cap);
    cur.normalize();
    for u in 1..n {
        let ps = class_probs(prior, labels, u);
        cur = forward_step(&cur, prior.prob(u, 0), &ps, width(u, cap));
        cur.normalize();
    }
    let le = tilted_label_set_likelihood(&cur, labels.full_mask(), cap, log_tilt);
    if le == f64::NEG_INFINITY || le.is_nan() {
        return Err(Error::ZeroEvidence);
    }
    Ok(le)
}

/// `log P(Y = A, I = 1 | x)` for every subset `A` of `labels`, indexed by mask.
pub fn chain_label_set_log_likelihoods(prior: &PriorField, labels: &ClassSet, cap: usize) -> Result<Vec<f64>> {
    check_labels(prior, labels)?;
    let log_tilt = count_tilt(prior, labels, cap);
    let tilted = tilted_prior(prior, labels, log_tilt);
    let n = prior.num_instances();
    let mut cur = first_forward(&tilted, labels, cap);
    cur.normalize();
    for u in 1..n {
        let ps = class_probs(&tilted, labels, u);
        cur = forward_step(&cur, tilted.prob(u, 0), &ps, width(u, cap));
        cur.normalize();
    }
    Ok((0..labels.num_subsets() as u32)
        .map(|m| tilted_label_set_likelihood(&cur, m, cap, log_tilt))
        .collect())
}

/// Unscaled `Σ_L Σ_l β_u(L ∪ {c}, l + 1[c≠0]) α_{u-1}(L, l)` for class 0 (`bit = None`)
/// or the class at bit `k`.
fn pair_sum(alpha: &MessageTable, beta: &MessageTable, bit: Option<usize>) -> f64 {
    let shift = usize::from(bit.is_some());
    let n = alpha.width().min(beta.width().saturating_sub(shift));
    let mut s = 0.0;
    for mask in 0..alpha.num_subsets() as u32 {
        let target = match bit {
            Some(k) => mask | 1 << k,
            None => mask,
        };
        let a = &alpha.row(mask)[..n];
        let b = &beta.row(target)[shift..shift + n];
        s += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    }
    s
}

/// Unnormalized joints for class 0 then each class in `labels`, sharing the
/// log factor returned alongside.
fn joint_weights(
    prior: &PriorField,
    labels: &ClassSet,
    u: usize,
    alpha_prev: Option<&MessageTable>,
    beta: &MessageTable,
) -> (Vec<f64>, f64) {
    let mut w = Vec::with_capacity(labels.len() + 1);
    match alpha_prev {
        None => {
            w.push(prior.prob(u, 0) * beta.get(0, 0));
            for (k, &c) in labels.classes().iter().enumerate() {
                w.push(prior.prob(u, c) * beta.get(1 << k, 1));
            }
            (w, beta.log_scale)
        }
        Some(alpha) => {
            w.push(prior.prob(u, 0) * pair_sum(alpha, beta, None));
            for (k, &c) in labels.classes().iter().enumerate() {
                w.push(prior.prob(u, c) * pair_sum(alpha, beta, Some(k)));
            }
            (w, alpha.log_scale + beta.log_scale)
        }
    }
}

/// `P(y(u) = c, Y, I = 1 | x)`; exactly zero for classes outside `Y ∪ {0}`.
pub fn chain_joint(
    prior: &PriorField,
    labels: &ClassSet,
    messages: &ChainMessages,
    u: usize,
    c: usize,
) -> f64 {
    let slot = if c == 0 {
        0
    } else {
        match labels.position(c) {
            Some(k) => k + 1,
            None => return 0.0,
        }
    };
    let alpha = if u == 0 {
        None
    } else {
        Some(&messages.forward[u - 1])
    };
    let (w, ls) = joint_weights(prior, labels, u, alpha, &messages.backward[u]);
    if w[slot] == 0.0 {
        0.0
    } else {
        w[slot] * ls.exp()
    }
}

/// Posterior instance-label probabilities via the chain engine.
pub fn chain_posterior(prior: &PriorField, labels: &ClassSet, cap: usize) -> Result<Posterior> {
    chain_posterior_with(prior, labels, cap, ChainOptions::default())
}

pub fn chain_posterior_with(
    prior: &PriorField,
    labels: &ClassSet,
    cap: usize,
    opts: ChainOptions,
) -> Result<Posterior> {
    check_labels(prior, labels)?;
    let n = prior.num_instances();
    let log_tilt = if opts.tilt {
        count_tilt(prior, labels, cap)
    } else {
        0.0
    };
    let original = prior;
    let prior = &tilted_prior(prior, labels, log_tilt);
    let forward = chain_forward_with(prior, labels, cap, opts);
    let log_evidence = tilted_label_set_likelihood(&forward[n - 1], labels.full_mask(), cap, log_tilt);
    if log_evidence == f64::NEG_INFINITY || log_evidence.is_nan() {
        return Err(Error::ZeroEvidence);
    }

    // Backward sweep fused with the joint computation; only the current β is kept.
    let mut weights = vec![Vec::new(); n];
    let mut beta = tilted_last_backward(labels, cap, n, log_tilt);
    for u in (1..n).rev() {
        weights[u] = joint_weights(prior, labels, u, Some(&forward[u - 1]), &beta).0;
        let ps = class_probs(prior, labels, u);
        beta = backward_step(&beta, prior.prob(u, 0), &ps, width(u - 1, cap));
        if opts.normalize {
            beta.normalize();
        }
    }
    weights[0] = joint_weights(prior, labels, 0, None, &beta).0;
    assemble_posterior(original, labels, &weights, log_evidence)
}

/// Represented value of a forward/backward entry, convenience for callers
/// that index by state.
pub fn table_value(table: &MessageTable, subset: u32, count: usize) -> f64 {
    table.value(LabelState { subset, count })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_prior(n: usize, c: usize) -> PriorField {
        PriorField::new(n, c, vec![1.0 / (c + 1) as f64; n * (c + 1)]).unwrap()
    }

    #[test]
    fn single_instance_forward_is_init() {
        let p = PriorField::new(1, 2, vec![0.5, 0.3, 0.2]).unwrap();
        let y = ClassSet::new([1, 2]).unwrap();
        let f = chain_forward_with(&p, &y, 2, ChainOptions { normalize: false, tilt: false });
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].get(0, 0), 0.5);
        assert_eq!(f[0].get(0b01, 1), 0.3);
        assert_eq!(f[0].get(0b10, 1), 0.2);
        assert_eq!(f[0].get(0b11, 1), 0.0);
    }

    #[test]
    fn three_uniform_instances_cap_one() {
        let p = uniform_prior(3, 1);
        let y = ClassSet::new([1]).unwrap();
        let f = chain_forward(&p, &y, 1);
        let last = &f[2];
        assert!((chain_label_set_likelihood(last, 1, 1).exp() - 0.375).abs() < 1e-15);
        assert!((chain_label_set_likelihood(last, 0, 1).exp() - 0.125).abs() < 1e-15);

        let b = chain_backward(&p, &y, 1);
        // Exactly one of the two remaining instances must be nonzero.
        assert!((table_value(&b[0], 0, 0) - 0.5).abs() < 1e-15);
        assert_eq!(table_value(&b[2], 1, 1), 1.0);
        assert_eq!(table_value(&b[2], 0, 0), 0.0);

        let m = ChainMessages {
            forward: f,
            backward: b,
        };
        assert!((chain_joint(&p, &y, &m, 1, 1) - 0.125).abs() < 1e-15);
        for u in 0..3 {
            let s: f64 = (0..=1).map(|c| chain_joint(&p, &y, &m, u, c)).sum();
            assert!((s - 0.375).abs() < 1e-15);
        }
        assert_eq!(chain_joint(&p, &y, &m, 1, 2), 0.0);

        let post = chain_posterior(&p, &y, 1).unwrap();
        for u in 0..3 {
            assert!((post.prob(u, 1) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn vacuous_cap_sums_to_one() {
        let p = PriorField::new(4, 2, [0.2, 0.5, 0.3].repeat(4)).unwrap();
        let y = ClassSet::all(2);
        let f = chain_forward(&p, &y, 4);
        let total: f64 = (0..4).map(|m| chain_label_set_likelihood(&f[3], m, 4).exp()).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unreachable_label_is_zero_evidence() {
        let p = PriorField::new(3, 1, [1.0, 0.0].repeat(3)).unwrap();
        let y = ClassSet::new([1]).unwrap();
        let b = chain_backward(&p, &y, 2);
        assert_eq!(table_value(&b[0], 0, 0), 0.0);
        assert!(matches!(chain_posterior(&p, &y, 2), Err(Error::ZeroEvidence)));
        assert!(matches!(chain_posterior(&uniform_prior(3, 1), &y, 0), Err(Error::ZeroEvidence)));
    }

    #[test]
    fn normalization_does_not_change_posteriors() {
        let probs: Vec<f64> = (0..6)
            .flat_map(|u| {
                let a = 0.1 + 0.1 * u as f64;
                [a, 0.6 - a / 2.0, 0.4 - a / 2.0]
            })
            .collect();
        let p = PriorField::new(6, 2, probs).unwrap();
        let y = ClassSet::all(2);
        let a = chain_posterior_with(&p, &y, 3, ChainOptions::default()).unwrap();
        let b = chain_posterior_with(&p, &y, 3, ChainOptions { normalize: false, tilt: false }).unwrap();
        for (x, z) in a.probs().iter().zip(b.probs()) {
            assert!((x - z).abs() <= 1e-14 * x.abs().max(1e-300));
        }
        assert!((a.log_evidence - b.log_evidence).abs() < 1e-13);
    }

    #[test]
    fn class_outside_prior_rejected() {
        let p = uniform_prior(3, 1);
        assert!(chain_posterior(&p, &ClassSet::new([2]).unwrap(), 2).is_err());
    }
}
