//! Instance and signal label prediction for unseen signals.

use crate::chain::chain_label_set_log_likelihoods;
use crate::error::{Error, Result};
use crate::io::PredictionRecord;
use crate::prior::compute_prior;
use crate::types::{ClassSet, ModelParams, PriorField, Signal};

/// Largest class count accepted by [`predict_map`] by default.
pub const DEFAULT_MAP_MAX_CLASSES: usize = 16;

/// Argmax class per instance, ties toward the smaller class id.
pub fn argmax_labels(prior: &PriorField) -> Vec<usize> {
    (0..prior.num_instances())
        .map(|u| {
            let row = prior.row(u);
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Per-instance argmax labels (rows `u = t + Δ`) and the prior they come from.
pub fn predict_instances(signal: &Signal, params: &ModelParams) -> Result<(Vec<usize>, PriorField)> {
    let prior = compute_prior(signal, params)?;
    Ok((argmax_labels(&prior), prior))
}

/// Union of the nonzero instance labels.
pub fn predict_union(instance_labels: &[usize]) -> ClassSet {
    ClassSet::new(instance_labels.iter().copied().filter(|&c| c != 0)).expect("labels are class ids")
}

/// Subset `A ⊆ {1..C}` maximizing `P(Y = A, I = 1 | x)`; ties go to the
/// smaller subset, then the lexicographically smaller one.
pub fn predict_map(prior: &PriorField, cap: usize, max_classes: usize) -> Result<ClassSet> {
    let c = prior.num_classes();
    if c > max_classes {
        return Err(Error::Infeasible(format!(
            "MAP over {c} classes needs 2^{c} subsets (limit {max_classes})"
        )));
    }
    let all = ClassSet::all(c);
    let lls = chain_label_set_log_likelihoods(prior, &all, cap)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (mask, &ll) in lls.iter().enumerate() {
        if ll == f64::NEG_INFINITY || ll.is_nan() {
            continue;
        }
        let set = all.subset(mask as u32);
        let better = match &best {
            None => true,
            Some((b, bs)) => ll > *b || (ll == *b && (set.len(), &set) < (bs.len(), bs)),
        };
        if better {
            best = Some((ll, set));
        }
    }
    match best {
        Some((_, set)) => ClassSet::new(set),
        None => Ok(ClassSet::empty()),
    }
}

/// `1 - Π_u (1 - P(y(u) = c))`.
pub fn signal_score(prior: &PriorField, c: usize) -> f64 {
    let s: f64 = (0..prior.num_instances()).map(|u| (-prior.prob(u, c)).ln_1p()).sum();
    1.0 - s.exp()
}

/// Full prediction for one signal. `instance_labels` cover `t = 0..T`;
/// `instance_probs` cover every instance, including the `Δ` on each side.
pub fn predict_record(
    id: &str,
    signal: &Signal,
    params: &ModelParams,
    cap: usize,
    with_probs: bool,
) -> Result<PredictionRecord> {
    let (labels, prior) = predict_instances(signal, params)?;
    let delta = params.half_window();
    let map = predict_map(&prior, cap, DEFAULT_MAP_MAX_CLASSES)?;
    let c = params.num_classes();
    Ok(PredictionRecord {
        id: id.to_string(),
        instance_labels: labels[delta..delta + signal.len()].to_vec(),
        union: predict_union(&labels).classes().to_vec(),
        map: map.classes().to_vec(),
        scores: (1..=c).map(|k| signal_score(&prior, k)).collect(),
        instance_probs: with_probs.then(|| (0..prior.num_instances()).map(|u| prior.row(u)[1..].to_vec()).collect()),
        instance_offset: with_probs.then_some(delta),
    })
}
