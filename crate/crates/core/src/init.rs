//! Data-driven initialization from weak labels.
//!
//! Random small words put every class at the same saddle, and on data with
//! overlapping class patterns EM can settle with a class word that mixes
//! partial detectors. Seeding each class word with a centered data window
//! that already separates positive from negative signals avoids that.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::em::init_params;
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::parallel::{map_ordered, pairwise_sum, ExecMode};
use crate::prior::analyze;
use crate::types::{window_extract, ModelParams, WeakExample};

#[derive(Debug, Clone, PartialEq)]
pub struct SeededInit {
    /// Candidate windows drawn per class.
    pub candidates: usize,
    /// Score gain: a seeded word scores `gain * (r - threshold)` where `r` is
    /// the window's correlation with the seed, normalized to 1 at the seed.
    pub gain: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for SeededInit {
    fn default() -> Self {
        Self {
            candidates: 300,
            gain: 8.0,
            threshold: 0.8,
            seed: 0,
        }
    }
}

/// Per-bin mean over every sample of every signal.
pub fn feature_means(data: &[WeakExample]) -> Vec<f64> {
    let Some(first) = data.first() else {
        return Vec::new();
    };
    let total: usize = data.iter().map(|e| e.signal.len()).sum();
    (0..first.signal.freq_bins())
        .map(|f| {
            let rows: Vec<f64> = data.iter().map(|e| e.signal.row(f).iter().sum()).collect();
            pairwise_sum(&rows) / total.max(1) as f64
        })
        .collect()
}

/// Largest response of word `v` over every window of the signal.
fn max_response(ex: &WeakExample, probe: &ModelParams) -> Result<f64> {
    let a = analyze(&ex.signal, probe)?;
    Ok((0..a.num_instances())
        .map(|u| a.row(u)[1])
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Starts from [`init_params`] and replaces each class word `c >= 1` with the
/// best of `candidates` centered windows drawn from signals labeled with `c`,
/// ranked by signal-level AUC of the max-correlation detector. Classes with
/// no positive or no negative signal keep their random word.
pub fn seeded_init(
    data: &[WeakExample],
    num_classes: usize,
    window_len: usize,
    cfg: &SeededInit,
    exec: ExecMode,
) -> Result<ModelParams> {
    let Some(first) = data.first() else {
        return Err(Error::InsufficientData("empty training set".into()));
    };
    if cfg.candidates == 0 || !(cfg.gain > 0.0) {
        return Err(Error::InvalidParams(
            "seeded init needs candidates > 0 and a positive gain".into(),
        ));
    }
    let freq_bins = first.signal.freq_bins();
    let mut params = init_params(num_classes, window_len, freq_bins, cfg.seed)?;
    let means = feature_means(data);

    for c in 1..=num_classes {
        let positive: Vec<bool> = data.iter().map(|e| e.labels.contains(c)).collect();
        let pos: Vec<&WeakExample> = data.iter().filter(|e| e.labels.contains(c)).collect();
        if pos.is_empty() || pos.len() == data.len() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(c as u64);
        let draws: Vec<Vec<f64>> = (0..cfg.candidates)
            .map(|_| {
                let ex = pos[rng.random_range(0..pos.len())];
                let t = rng.random_range(0..ex.signal.len()) as isize;
                let mut v = window_extract(&ex.signal, t, window_len)?;
                for (i, x) in v.iter_mut().enumerate() {
                    *x -= means[i / window_len];
                }
                Ok(v)
            })
            .collect::<Result<_>>()?;

        let scores: Vec<Option<f64>> = map_ordered(exec, &draws, |_, v| {
            let norm: f64 = v.iter().map(|x| x * x).sum();
            if !(norm > 0.0) {
                return None;
            }
            let mut probe = ModelParams::zeros(1, window_len, freq_bins).ok()?;
            probe.word_mut(1).copy_from_slice(v);
            let responses: Option<Vec<f64>> = data.iter().map(|e| max_response(e, &probe).ok()).collect();
            auc(&responses?, &positive)
        });
        // First best candidate wins ties so the choice is order-stable.
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in scores.iter().enumerate() {
            if let Some(s) = *s {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
        }
        let Some((i, _)) = best else {
            continue;
        };
        let v = &draws[i];
        let norm: f64 = v.iter().map(|x| x * x).sum();
        // Undo the centering in the bias: Σ v·(x - m) = Σ v·x - Σ_f m_f Σ_k v(f, k).
        let offset: f64 = v
            .iter()
            .enumerate()
            .map(|(j, x)| x * means[j / window_len])
            .sum::<f64>();
        let scale = cfg.gain / norm;
        for (w, x) in params.word_mut(c).iter_mut().zip(v) {
            *w = scale * x;
        }
        params.biases_mut()[c] = -scale * offset - cfg.gain * cfg.threshold;
    }
    Ok(params)
}
