#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wscadl::{ClassSet, PriorField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random prior with rows drawn from a flat Dirichlet.
pub fn random_prior(rng: &mut ChaCha8Rng, n: usize, c: usize) -> PriorField {
    let mut probs = Vec::with_capacity(n * (c + 1));
    for _ in 0..n {
        let row: Vec<f64> = (0..=c).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let z: f64 = row.iter().sum();
        probs.extend(row.iter().map(|v| v / z));
    }
    PriorField::new(n, c, probs).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Exhaustive enumeration over all (C+1)^T' label sequences.
pub struct Oracle {
    pub num_classes: usize,
    pub num_instances: usize,
    /// `P(Y = A, I = 1)` indexed by subset mask over the classes of `labels`.
    pub label_set: Vec<f64>,
    /// `P(y(u) = c, Y = labels, I = 1)`, row-major over `(u, c)`.
    pub joint: Vec<f64>,
}

impl Oracle {
    pub fn new(prior: &PriorField, labels: &ClassSet, cap: usize) -> Self {
        let n = prior.num_instances();
        let c = prior.num_classes();
        let mut label_set = vec![0.0; labels.num_subsets()];
        let mut joint = vec![0.0; n * (c + 1)];
        let mut seq = vec![0usize; n];
        loop {
            let mut p = 1.0;
            let mut mask = 0u32;
            let mut count = 0;
            let mut inside = true;
            for (u, &y) in seq.iter().enumerate() {
                p *= prior.prob(u, y);
                if y != 0 {
                    count += 1;
                    match labels.position(y) {
                        Some(k) => mask |= 1 << k,
                        None => inside = false,
                    }
                }
            }
            if inside && count <= cap {
                label_set[mask as usize] += p;
                if mask == labels.full_mask() {
                    for (u, &y) in seq.iter().enumerate() {
                        joint[u * (c + 1) + y] += p;
                    }
                }
            }
            // Odometer increment.
            let mut i = 0;
            while i < n {
                seq[i] += 1;
                if seq[i] <= c {
                    break;
                }
                seq[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
        Self {
            num_classes: c,
            num_instances: n,
            label_set,
            joint,
        }
    }

    pub fn evidence(&self) -> f64 {
        *self.label_set.last().unwrap()
    }

    pub fn joint(&self, u: usize, c: usize) -> f64 {
        self.joint[u * (self.num_classes + 1) + c]
    }

    pub fn posterior(&self, u: usize, c: usize) -> f64 {
        self.joint(u, c) / self.evidence()
    }
}

/// Random label set of size at most `max_len` drawn from `1..=c`.
pub fn random_labels(rng: &mut ChaCha8Rng, c: usize, max_len: usize) -> ClassSet {
    let mut ids: Vec<usize> = (1..=c).filter(|_| rng.random_bool(0.5)).collect();
    ids.truncate(max_len);
    ClassSet::new(ids).unwrap()
}
