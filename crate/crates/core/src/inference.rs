//! Backend selection and the posterior type shared by the chain and tree engines.

use crate::chain;
use crate::error::{Error, Result};
use crate::tree;
use crate::types::{ClassSet, PriorField};

/// Default `T' * N̄` above which [`Backend::Auto`] picks the tree engine.
pub const DEFAULT_AUTO_THRESHOLD: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Chain,
    Tree,
    /// Tree when `T' * N̄` exceeds the threshold, chain otherwise.
    Auto(usize),
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Auto(DEFAULT_AUTO_THRESHOLD)
    }
}

impl Backend {
    /// The concrete engine used for a signal of `num_instances` with cap `cap`.
    pub fn resolve(self, num_instances: usize, cap: usize) -> Backend {
        match self {
            Backend::Auto(threshold) => {
                if num_instances.saturating_mul(cap) > threshold {
                    Backend::Tree
                } else {
                    Backend::Chain
                }
            }
            b => b,
        }
    }

    pub fn posterior(self, prior: &PriorField, labels: &ClassSet, cap: usize) -> Result<Posterior> {
        match self.resolve(prior.num_instances(), cap) {
            Backend::Tree => tree::tree_posterior(prior, labels, cap),
            _ => chain::chain_posterior(prior, labels, cap),
        }
    }

    /// `log P(Y, I = 1 | x)` without computing posteriors.
    pub fn log_evidence(self, prior: &PriorField, labels: &ClassSet, cap: usize) -> Result<f64> {
        match self.resolve(prior.num_instances(), cap) {
            Backend::Tree => tree::tree_log_evidence(prior, labels, cap),
            _ => chain::chain_log_evidence(prior, labels, cap),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Chain => f.write_str("chain"),
            Backend::Tree => f.write_str("tree"),
            Backend::Auto(_) => f.write_str("auto"),
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(Backend::Chain),
            "tree" => Ok(Backend::Tree),
            "auto" => Ok(Backend::default()),
            other => Err(Error::InvalidParams(format!("unknown backend `{other}`"))),
        }
    }
}

/// Posterior instance-label probabilities `P(y(t) = c | Y, I = 1, x)` together
/// with the evidence `log P(Y, I = 1 | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    num_instances: usize,
    num_classes: usize,
    probs: Vec<f64>,
    pub log_evidence: f64,
}

impl Posterior {
    pub(crate) fn new(num_instances: usize, num_classes: usize, probs: Vec<f64>, log_evidence: f64) -> Self {
        Self {
            num_instances,
            num_classes,
            probs,
            log_evidence,
        }
    }

    /// Posterior that equals the given prior, as if there were no evidence.
    pub fn from_prior(prior: &PriorField) -> Self {
        Self::new(
            prior.num_instances(),
            prior.num_classes(),
            prior.probs().to_vec(),
            0.0,
        )
    }

    pub fn num_instances(&self) -> usize {
        self.num_instances
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn prob(&self, u: usize, c: usize) -> f64 {
        self.probs[u * (self.num_classes + 1) + c]
    }

    pub fn row(&self, u: usize) -> &[f64] {
        let n = self.num_classes + 1;
        &self.probs[u * n..(u + 1) * n]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Tilt `ln r` making the expected nonzero count equal `N̄` when the prior
/// alone would exceed it; zero otherwise.
pub fn count_tilt(prior: &PriorField, labels: &ClassSet, cap: usize) -> f64 {
    let stats: Vec<(f64, f64)> = (0..prior.num_instances())
        .map(|u| {
            let q: f64 = labels.classes().iter().map(|&c| prior.prob(u, c)).sum();
            (prior.prob(u, 0), q)
        })
        .collect();
    let expected = |theta: f64| -> f64 {
        let r = theta.exp();
        stats
            .iter()
            .map(|&(p0, q)| {
                let d = p0 + r * q;
                if d > 0.0 {
                    r * q / d
                } else {
                    0.0
                }
            })
            .sum()
    };
    let target = cap as f64;
    if cap == 0 || expected(0.0) <= target {
        return 0.0;
    }
    let mut lo = -1.0;
    while expected(lo) > target && lo > -700.0 {
        lo *= 2.0;
    }
    let mut hi = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Checks that every class in `labels` indexes into the prior.
pub(crate) fn check_labels(prior: &PriorField, labels: &ClassSet) -> Result<()> {
    match labels.classes().last() {
        Some(&c) if c > prior.num_classes() => Err(Error::Shape(format!(
            "label {c} exceeds the prior's {} classes",
            prior.num_classes()
        ))),
        _ => Ok(()),
    }
}

/// Normalizes per-instance joint weights into a posterior matrix.
///
/// `weights[u]` holds the unnormalized joint for class 0 followed by the
/// classes of `labels` in ascending order.
pub(crate) fn assemble_posterior(
    prior: &PriorField,
    labels: &ClassSet,
    weights: &[Vec<f64>],
    log_evidence: f64,
) -> Result<Posterior> {
    let ncls = prior.num_classes() + 1;
    let mut probs = vec![0.0; prior.num_instances() * ncls];
    for (u, w) in weights.iter().enumerate() {
        let z: f64 = w.iter().sum();
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::ZeroEvidence);
        }
        let row = &mut probs[u * ncls..(u + 1) * ncls];
        row[0] = w[0] / z;
        for (k, &c) in labels.classes().iter().enumerate() {
            row[c] = w[k + 1] / z;
        }
    }
    Ok(Posterior::new(
        prior.num_instances(),
        prior.num_classes(),
        probs,
        log_evidence,
    ))
}
