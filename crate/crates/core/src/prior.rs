//! Instance-label prior: per-class analysis convolutions followed by a
//! multinomial-logistic link.

use crate::conv::{convolve_direct, FftConvolver};
use crate::error::{Error, Result};
use crate::types::{ModelParams, PriorField, Signal};

/// Default crossover, in multiply-adds per class (`T * T_w`), above which the
/// FFT path is used.
pub const DEFAULT_PRIOR_FFT_CROSSOVER: usize = 1 << 16;

/// Convolution strategy for [`analyze_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvPath {
    Direct,
    Fft,
    /// FFT once `T * T_w` exceeds the given number of multiply-adds.
    Auto(usize),
}

impl Default for ConvPath {
    fn default() -> Self {
        ConvPath::Auto(DEFAULT_PRIOR_FFT_CROSSOVER)
    }
}

/// Scores `w_c · x_t + b_c`, rows indexed by `u = t + Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisField {
    num_instances: usize,
    num_classes: usize,
    scores: Vec<f64>,
}

impl AnalysisField {
    pub fn num_instances(&self) -> usize {
        self.num_instances
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn score(&self, u: usize, c: usize) -> f64 {
        self.scores[u * (self.num_classes + 1) + c]
    }

    pub fn row(&self, u: usize) -> &[f64] {
        let n = self.num_classes + 1;
        &self.scores[u * n..(u + 1) * n]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn from_scores(num_instances: usize, num_classes: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != num_instances * (num_classes + 1) {
            return Err(Error::Shape("analysis score matrix size".into()));
        }
        Ok(Self {
            num_instances,
            num_classes,
            scores,
        })
    }
}

pub fn analyze(signal: &Signal, params: &ModelParams) -> Result<AnalysisField> {
    analyze_with(signal, params, ConvPath::default())
}

pub fn analyze_with(signal: &Signal, params: &ModelParams, path: ConvPath) -> Result<AnalysisField> {
    if signal.freq_bins() != params.freq_bins() {
        return Err(Error::Shape(format!(
            "signal has {} frequency bins, model expects {}",
            signal.freq_bins(),
            params.freq_bins()
        )));
    }
    let tw = params.window_len();
    let n_inst = signal.num_instances(tw);
    let ncls = params.num_classes() + 1;
    let use_fft = match path {
        ConvPath::Direct => false,
        ConvPath::Fft => true,
        ConvPath::Auto(crossover) => signal.len() * tw > crossover,
    };

    let mut scores = vec![0.0; n_inst * ncls];
    if use_fft {
        let mut fft = FftConvolver::new();
        let n = FftConvolver::size_for(signal.len(), tw);
        let spectra: Vec<_> = (0..signal.freq_bins())
            .map(|f| fft.spectrum(signal.row(f), n))
            .collect();
        for c in 0..ncls {
            let word = params.word(c);
            let mut acc = vec![Default::default(); n];
            for (f, xs) in spectra.iter().enumerate() {
                let ws = fft.spectrum(&word[f * tw..(f + 1) * tw], n);
                for ((a, x), w) in acc.iter_mut().zip(xs).zip(&ws) {
                    *a += x * w;
                }
            }
            let full = fft.inverse_real(acc);
            for u in 0..n_inst {
                scores[u * ncls + c] = full[u] + params.biases()[c];
            }
        }
    } else {
        for c in 0..ncls {
            let word = params.word(c);
            let mut full = vec![params.biases()[c]; n_inst];
            for f in 0..signal.freq_bins() {
                let part = convolve_direct(signal.row(f), &word[f * tw..(f + 1) * tw]);
                for (o, p) in full.iter_mut().zip(part) {
                    *o += p;
                }
            }
            for (u, v) in full.into_iter().enumerate() {
                scores[u * ncls + c] = v;
            }
        }
    }
    Ok(AnalysisField {
        num_instances: n_inst,
        num_classes: params.num_classes(),
        scores,
    })
}

/// Stable `log Σ exp(row)`.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + row.iter().map(|&s| (s - m).exp()).sum::<f64>().ln()
}

/// Row-wise softmax of the analysis scores.
pub fn prior_field(analysis: &AnalysisField) -> PriorField {
    let ncls = analysis.num_classes() + 1;
    let mut probs = vec![0.0; analysis.scores().len()];
    for (row, out) in analysis.scores().chunks(ncls).zip(probs.chunks_mut(ncls)) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (o, &s) in out.iter_mut().zip(row) {
            *o = (s - m).exp();
            z += *o;
        }
        let inv = 1.0 / z;
        out.iter_mut().for_each(|o| *o *= inv);
    }
    PriorField::from_raw(analysis.num_instances(), analysis.num_classes(), probs)
}

/// `prior_field(analyze(signal, params))`.
pub fn compute_prior(signal: &Signal, params: &ModelParams) -> Result<PriorField> {
    Ok(prior_field(&analyze(signal, params)?))
}
