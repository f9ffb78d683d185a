//! Shared data model: signals, weakly-labelled examples, model parameters,
//! and the (label-subset, count) state space used by both inference engines.

use crate::error::{Error, Result};

/// A real-valued `F × T` signal stored row-major by frequency bin.
///
/// Samples outside `0..T` are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    freq_bins: usize,
    len: usize,
    samples: Vec<f64>,
}

impl Signal {
    pub fn new(freq_bins: usize, len: usize, samples: Vec<f64>) -> Result<Self> {
        if freq_bins == 0 || len == 0 {
            return Err(Error::Shape(format!(
                "signal must be non-empty, got {freq_bins}x{len}"
            )));
        }
        if samples.len() != freq_bins * len {
            return Err(Error::Shape(format!(
                "expected {} samples for {freq_bins}x{len}, got {}",
                freq_bins * len,
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("signal sample {i}")));
        }
        Ok(Self {
            freq_bins,
            len,
            samples,
        })
    }

    /// Convenience constructor for a 1-D signal.
    pub fn from_1d(samples: Vec<f64>) -> Result<Self> {
        let len = samples.len();
        Self::new(1, len, samples)
    }

    /// Builds a signal from one row per frequency bin.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let freq_bins = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::Shape("ragged signal rows".into()));
        }
        Self::new(freq_bins, len, rows.concat())
    }

    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn row(&self, f: usize) -> &[f64] {
        &self.samples[f * self.len..(f + 1) * self.len]
    }

    /// Sample at `(f, t)` with zero outside the support.
    pub fn at(&self, f: usize, t: isize) -> f64 {
        if t < 0 || t as usize >= self.len {
            0.0
        } else {
            self.samples[f * self.len + t as usize]
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.freq_bins).map(|f| self.row(f).to_vec()).collect()
    }

    /// Number of time instances `T + T_w - 1` seen by a window of width `window_len`.
    pub fn num_instances(&self, window_len: usize) -> usize {
        self.len + window_len - 1
    }
}

/// Sorted set of nonzero class ids. Bit `k` of a subset mask refers to `classes()[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ClassSet(Vec<usize>);

impl ClassSet {
    /// Builds a set from arbitrary ids; duplicates are merged. Class 0 is rejected.
    pub fn new(ids: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.first() == Some(&0) {
            return Err(Error::InvalidParams(
                "class 0 cannot appear in a label set".into(),
            ));
        }
        if v.len() > 30 {
            return Err(Error::Infeasible(format!(
                "label set of size {} exceeds the 30-class subset encoding",
                v.len()
            )));
        }
        Ok(Self(v))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// `{1, ..., num_classes}`.
    pub fn all(num_classes: usize) -> Self {
        Self((1..=num_classes).collect())
    }

    pub fn classes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, class: usize) -> bool {
        self.0.binary_search(&class).is_ok()
    }

    /// Bit position of `class`, if present.
    pub fn position(&self, class: usize) -> Option<usize> {
        self.0.binary_search(&class).ok()
    }

    /// Number of subsets, `2^|Y|`.
    pub fn num_subsets(&self) -> usize {
        1usize << self.0.len()
    }

    /// Mask of the full set.
    pub fn full_mask(&self) -> u32 {
        ((1u64 << self.0.len()) - 1) as u32
    }

    /// Class ids selected by `mask`, ascending.
    pub fn subset(&self, mask: u32) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &c)| c)
            .collect()
    }

    /// Mask for a subset given as class ids; `None` if some id is not a member.
    pub fn mask_of(&self, ids: &[usize]) -> Option<u32> {
        ids.iter()
            .try_fold(0u32, |m, &c| self.position(c).map(|k| m | 1 << k))
    }
}

/// A signal with its weak label set and cardinality cap.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakExample {
    pub id: String,
    pub signal: Signal,
    pub labels: ClassSet,
    pub cap: usize,
}

impl WeakExample {
    /// Rejects examples whose label set cannot be produced under the cap.
    pub fn new(id: impl Into<String>, signal: Signal, labels: ClassSet, cap: usize) -> Result<Self> {
        let id = id.into();
        if labels.len() > cap {
            return Err(Error::InvalidExample {
                reason: format!(
                    "cardinality cap {cap} is smaller than label set size {}",
                    labels.len()
                ),
                id,
            });
        }
        Ok(Self {
            id,
            signal,
            labels,
            cap,
        })
    }
}

/// Analysis words `w_0..w_C` and biases `b_0..b_C`.
///
/// Word `c` is stored as `F × T_w` row-major, entry `(f, k)` multiplying the
/// sample at lag `k - Δ`, so `w_c · x_t = Σ_f Σ_k w_c(f, k) x(f, t - (k - Δ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    num_classes: usize,
    window_len: usize,
    freq_bins: usize,
    words: Vec<f64>,
    biases: Vec<f64>,
}

impl ModelParams {
    pub fn new(
        num_classes: usize,
        window_len: usize,
        freq_bins: usize,
        words: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if num_classes == 0 || freq_bins == 0 {
            return Err(Error::InvalidParams(
                "need at least one class and one frequency bin".into(),
            ));
        }
        if window_len % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "window length must be odd, got {window_len}"
            )));
        }
        let word_len = window_len * freq_bins;
        if words.len() != (num_classes + 1) * word_len || biases.len() != num_classes + 1 {
            return Err(Error::Shape(format!(
                "expected {} words of length {word_len} and {} biases",
                num_classes + 1,
                num_classes + 1
            )));
        }
        if words.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(Self {
            num_classes,
            window_len,
            freq_bins,
            words,
            biases,
        })
    }

    pub fn zeros(num_classes: usize, window_len: usize, freq_bins: usize) -> Result<Self> {
        let n = (num_classes + 1) * window_len * freq_bins;
        Self::new(
            num_classes,
            window_len,
            freq_bins,
            vec![0.0; n],
            vec![0.0; num_classes + 1],
        )
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Half window `Δ = (T_w - 1) / 2`.
    pub fn half_window(&self) -> usize {
        (self.window_len - 1) / 2
    }

    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    pub fn word_len(&self) -> usize {
        self.window_len * self.freq_bins
    }

    pub fn word(&self, c: usize) -> &[f64] {
        let n = self.word_len();
        &self.words[c * n..(c + 1) * n]
    }

    pub fn word_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.word_len();
        &mut self.words[c * n..(c + 1) * n]
    }

    pub fn words(&self) -> &[f64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [f64] {
        &mut self.words
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn is_finite(&self) -> bool {
        self.words.iter().chain(&self.biases).all(|v| v.is_finite())
    }

    /// `Σ_c ||w_c||²`.
    pub fn word_sq_norm(&self) -> f64 {
        self.words.iter().map(|w| w * w).sum()
    }
}

/// The window vector `x_t` for `t ∈ {-Δ, ..., T-1+Δ}`, ordered
/// `[x(1, t+Δ), x(1, t+Δ-1), ..., x(F, t-Δ)]`.
pub fn window_extract(signal: &Signal, t: isize, window_len: usize) -> Result<Vec<f64>> {
    if window_len % 2 == 0 {
        return Err(Error::InvalidParams(format!(
            "window length must be odd, got {window_len}"
        )));
    }
    let delta = ((window_len - 1) / 2) as isize;
    let last = signal.len() as isize - 1 + delta;
    if t < -delta || t > last {
        return Err(Error::Range(format!(
            "window position {t} outside [{}, {last}]",
            -delta
        )));
    }
    let mut out = Vec::with_capacity(window_len * signal.freq_bins());
    for f in 0..signal.freq_bins() {
        for k in 0..window_len as isize {
            out.push(signal.at(f, t + delta - k));
        }
    }
    Ok(out)
}

/// A joint state of a running label subset (bitmask over a [`ClassSet`]) and
/// a count of nonzero instance labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelState {
    pub subset: u32,
    pub count: usize,
}

/// All `(subset, count)` states with `count <= cap`, subset-major ascending.
pub fn state_enumerate(labels: &ClassSet, cap: usize) -> Vec<LabelState> {
    (0..labels.num_subsets() as u32)
        .flat_map(|subset| (0..=cap).map(move |count| LabelState { subset, count }))
        .collect()
}

/// Dense `(subset, count)` table with an accumulated log normalizer.
///
/// The represented value of an entry is `entry * exp(log_scale)`. Counts at or
/// beyond `width` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageTable {
    num_subsets: usize,
    width: usize,
    data: Vec<f64>,
    pub log_scale: f64,
}

impl MessageTable {
    pub fn zeros(num_subsets: usize, width: usize) -> Self {
        Self {
            num_subsets,
            width,
            data: vec![0.0; num_subsets * width],
            log_scale: 0.0,
        }
    }

    pub fn num_subsets(&self) -> usize {
        self.num_subsets
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Stored entry, zero outside the stored range.
    pub fn get(&self, subset: u32, count: usize) -> f64 {
        if count >= self.width || subset as usize >= self.num_subsets {
            0.0
        } else {
            self.data[subset as usize * self.width + count]
        }
    }

    pub fn set(&mut self, subset: u32, count: usize, value: f64) {
        self.data[subset as usize * self.width + count] = value;
    }

    pub fn row(&self, subset: u32) -> &[f64] {
        let w = self.width;
        &self.data[subset as usize * w..(subset as usize + 1) * w]
    }

    pub fn row_mut(&mut self, subset: u32) -> &mut [f64] {
        let w = self.width;
        &mut self.data[subset as usize * w..(subset as usize + 1) * w]
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    /// `entry * exp(log_scale)`.
    pub fn value(&self, state: LabelState) -> f64 {
        let e = self.get(state.subset, state.count);
        if e == 0.0 {
            0.0
        } else {
            e * self.log_scale.exp()
        }
    }

    /// Natural log of the represented value.
    pub fn log_value(&self, state: LabelState) -> f64 {
        self.get(state.subset, state.count).ln() + self.log_scale
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| if v > m { v } else { m })
    }

    /// Rescales entries to max 1, folding the factor into `log_scale`, and
    /// flushes subnormal entries to zero. An all-zero table gets
    /// `log_scale = -inf`.
    pub fn normalize(&mut self) {
        let m = self.max_entry();
        if m > 0.0 {
            let inv = 1.0 / m;
            self.data.iter_mut().for_each(|v| {
                *v *= inv;
                if *v < f64::MIN_POSITIVE {
                    *v = 0.0;
                }
            });
            if m != 1.0 {
                self.log_scale += m.ln();
            }
        } else {
            self.log_scale = f64::NEG_INFINITY;
        }
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row_is_zero(&self, subset: u32) -> bool {
        self.row(subset).iter().all(|&v| v == 0.0)
    }
}

/// Per-instance class probabilities, rows indexed by `u = t + Δ ∈ 0..T'`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorField {
    num_instances: usize,
    num_classes: usize,
    probs: Vec<f64>,
}

impl PriorField {
    /// Builds a field from `T' × (C+1)` row-major probabilities. Rows must be
    /// non-negative and sum to one within `1e-9`.
    pub fn new(num_instances: usize, num_classes: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_instances * (num_classes + 1) || num_instances == 0 {
            return Err(Error::Shape(format!(
                "prior field expects {num_instances}x{} entries, got {}",
                num_classes + 1,
                probs.len()
            )));
        }
        for (u, row) in probs.chunks(num_classes + 1).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParams(format!(
                    "prior row {u} is not a probability vector"
                )));
            }
        }
        Ok(Self {
            num_instances,
            num_classes,
            probs,
        })
    }

    pub(crate) fn from_raw(num_instances: usize, num_classes: usize, probs: Vec<f64>) -> Self {
        Self {
            num_instances,
            num_classes,
            probs,
        }
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

    /// Restricts to the first `len` instances, used by tests and benchmarks.
    pub fn truncated(&self, len: usize) -> Self {
        let n = self.num_classes + 1;
        Self::from_raw(len, self.num_classes, self.probs[..len * n].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_outside_support_is_zero_filled() {
        let s = Signal::from_1d(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(window_extract(&s, -1, 3).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(window_extract(&s, 1, 3).unwrap(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn window_2d_is_row_major_by_frequency() {
        let s = Signal::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(
            window_extract(&s, 0, 3).unwrap(),
            vec![2.0, 1.0, 0.0, 4.0, 3.0, 0.0]
        );
    }

    #[test]
    fn window_range_checked() {
        let s = Signal::from_1d(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(window_extract(&s, -2, 3), Err(Error::Range(_))));
        assert!(matches!(window_extract(&s, 4, 3), Err(Error::Range(_))));
        assert!(window_extract(&s, 3, 3).is_ok());
        assert!(window_extract(&s, 0, 4).is_err());
    }

    #[test]
    fn enumerate_states() {
        let one = ClassSet::new([1]).unwrap();
        let states = state_enumerate(&one, 1);
        let pairs: Vec<_> = states.iter().map(|s| (s.subset, s.count)).collect();
        assert_eq!(pairs, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(state_enumerate(&ClassSet::empty(), 0).len(), 1);
        assert_eq!(state_enumerate(&ClassSet::new([2, 6]).unwrap(), 2).len(), 12);
    }

    #[test]
    fn class_set_masks() {
        let y = ClassSet::new([6, 2, 2]).unwrap();
        assert_eq!(y.classes(), &[2, 6]);
        assert_eq!(y.mask_of(&[6]), Some(0b10));
        assert_eq!(y.mask_of(&[3]), None);
        assert_eq!(y.subset(0b11), vec![2, 6]);
        assert_eq!(y.full_mask(), 3);
        assert!(ClassSet::new([0, 1]).is_err());
    }

    #[test]
    fn cap_below_label_count_rejected() {
        let s = Signal::from_1d(vec![0.0; 4]).unwrap();
        let y = ClassSet::new([1, 2]).unwrap();
        let err = WeakExample::new("sig-7", s.clone(), y.clone(), 1).unwrap_err();
        assert!(err.to_string().contains("sig-7"));
        assert!(WeakExample::new("ok", s.clone(), y, 2).is_ok());
        assert!(WeakExample::new("empty", s, ClassSet::empty(), 0).is_ok());
    }

    #[test]
    fn signal_rejects_non_finite() {
        assert!(Signal::from_1d(vec![1.0, f64::NAN]).is_err());
        assert!(Signal::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn params_require_odd_window() {
        assert!(ModelParams::zeros(2, 4, 1).is_err());
        let p = ModelParams::zeros(2, 5, 3).unwrap();
        assert_eq!(p.word_len(), 15);
        assert_eq!(p.half_window(), 2);
    }

    #[test]
    fn table_normalize_tracks_scale() {
        let mut t = MessageTable::zeros(2, 3);
        t.set(1, 2, 0.25);
        t.set(0, 0, 0.125);
        t.normalize();
        assert_eq!(t.get(1, 2), 1.0);
        let v = t.value(LabelState { subset: 0, count: 0 });
        assert!((v - 0.125).abs() < 1e-15);
        assert_eq!(t.get(1, 5), 0.0);
    }
}
