//! Exact posterior inference on the binary-tree reformulation.
//!
//! Leaves hold the per-instance states `(∅, 0)` or `({c}, 1)`; an inner node
//! aggregates the label-set union and count sum of its two children. A merge
//! is a set-union over subset pairs combined with a convolution along the
//! count axis, which switches to FFT once the count vectors get long.
//!
//! All tables are stored in an exponentially tilted form: forward entries are
//! multiplied by `r^l` and backward entries by `r^-l`, where `l` is the count.
//! Tilting commutes with convolution and cancels in every forward/backward
//! product, so outputs are unchanged; it keeps the count states that matter
//! near the top of each table when the cardinality cap binds, which is what
//! FFT round-off is relative to.

use rustfft::num_complex::Complex64;

use crate::conv::FftConvolver;
use crate::error::{Error, Result};
use crate::inference::{assemble_posterior, check_labels, count_tilt, Posterior};
use crate::types::{ClassSet, MessageTable, PriorField};

/// Default count-vector length above which merges use the FFT.
pub const DEFAULT_COUNT_FFT_CROSSOVER: usize = 64;

/// How many count states each node stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// `min(N̄, real leaves below the node)`.
    Tight,
    /// `min(N̄, 2^(L-j) + 1)` for a node on level `j`.
    Stated,
    /// Every reachable count, ignoring `N̄`.
    Untruncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeOptions {
    pub fft_crossover: usize,
    pub truncation: Truncation,
    pub tilt: bool,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self {
            fft_crossover: DEFAULT_COUNT_FFT_CROSSOVER,
            truncation: Truncation::Tight,
            tilt: true,
        }
    }
}

/// Complete binary tree over `2^L` leaves; leaves `T'..2^L` are padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeLayout {
    pub depth: usize,
    pub num_leaves: usize,
    pub num_real: usize,
}

impl TreeLayout {
    pub fn new(num_real: usize) -> Self {
        let num_leaves = num_real.max(1).next_power_of_two();
        Self {
            depth: num_leaves.trailing_zeros() as usize,
            num_leaves,
            num_real,
        }
    }

    pub fn nodes(&self, level: usize) -> usize {
        1 << level
    }

    /// Leaves below a node on `level`.
    pub fn span(&self, level: usize) -> usize {
        self.num_leaves >> level
    }

    /// Non-padding leaves below node `idx` on `level`.
    pub fn real_leaves(&self, level: usize, idx: usize) -> usize {
        let span = self.span(level);
        self.num_real.saturating_sub(idx * span).min(span)
    }

    fn width(&self, level: usize, idx: usize, cap: usize, trunc: Truncation) -> usize {
        match trunc {
            Truncation::Tight => cap.min(self.real_leaves(level, idx)) + 1,
            Truncation::Stated => cap.min(self.span(level) + 1) + 1,
            Truncation::Untruncated => self.span(level) + 1,
        }
    }
}

/// Forward messages for every node, `levels[j][i]` for level `j`, node `i`.
#[derive(Debug, Clone)]
pub struct TreeForward {
    pub layout: TreeLayout,
    pub levels: Vec<Vec<MessageTable>>,
    /// `ln r` of the count tilt applied to every stored table.
    pub log_tilt: f64,
    opts: TreeOptions,
    cap: usize,
}

impl TreeForward {
    pub fn root(&self) -> &MessageTable {
        &self.levels[0][0]
    }

    pub fn options(&self) -> TreeOptions {
        self.opts
    }

    /// Untilted `α(subset, count)` at a node.
    pub fn value(&self, level: usize, idx: usize, subset: u32, count: usize) -> f64 {
        let t = &self.levels[level][idx];
        let e = t.get(subset, count);
        if e == 0.0 {
            return 0.0;
        }
        (e.ln() + t.log_scale - count as f64 * self.log_tilt).exp()
    }

    /// `log P(Y = subset, I = 1 | x)` from the root.
    pub fn label_set_log_likelihood(&self, subset: u32) -> f64 {
        let root = self.root();
        let w = root.width().min(self.cap + 1);
        let logs: Vec<f64> = root.row(subset)[..w]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(l, &v)| v.ln() - l as f64 * self.log_tilt)
            .collect();
        log_sum(&logs) + root.log_scale
    }
}

fn log_sum(logs: &[f64]) -> f64 {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + logs.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

struct CountConvolver {
    fft: FftConvolver,
    crossover: usize,
}

/// Entries below this (relative to the table maximum) are dropped so that
/// products of two entries never fall into the subnormal range, where
/// arithmetic is very slow.
const FLUSH_BELOW: f64 = 1.5e-154;

fn normalize(t: &mut MessageTable) {
    t.normalize();
    for v in t.entries_mut().iter_mut() {
        if *v < FLUSH_BELOW {
            *v = 0.0;
        }
    }
}

fn nonzero_rows(t: &MessageTable) -> Vec<u32> {
    (0..t.num_subsets() as u32)
        .filter(|&m| !t.row_is_zero(m))
        .collect()
}

fn clamp_into(dst: &mut [f64], src: impl Iterator<Item = f64>) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = if s > 0.0 { s } else { 0.0 };
    }
}

impl CountConvolver {
    fn new(crossover: usize) -> Self {
        Self {
            fft: FftConvolver::new(),
            crossover,
        }
    }

    /// Parent table: `out(A ∪ B, a + b) += left(A, a) * right(B, b)`, counts
    /// truncated below `out_width`.
    fn merge(&mut self, left: &MessageTable, right: &MessageTable, out_width: usize) -> MessageTable {
        let nsub = left.num_subsets();
        let mut out = MessageTable::zeros(nsub, out_width);
        out.log_scale = left.log_scale + right.log_scale;
        let nzl = nonzero_rows(left);
        let nzr = nonzero_rows(right);
        let (wl, wr) = (left.width(), right.width());

        if wl.max(wr) > self.crossover && out_width > 1 {
            let n = FftConvolver::size_for(wl, wr);
            let sl = self.spectra(left, &nzl, n, false);
            let sr = self.spectra(right, &nzr, n, false);
            let mut acc: Vec<Option<Vec<Complex64>>> = vec![None; nsub];
            for &a in &nzl {
                for &b in &nzr {
                    let (fa, fb) = (sl[a as usize].as_ref().unwrap(), sr[b as usize].as_ref().unwrap());
                    let slot = acc[(a | b) as usize].get_or_insert_with(|| vec![Complex64::default(); n]);
                    for ((s, x), y) in slot.iter_mut().zip(fa).zip(fb) {
                        *s += x * y;
                    }
                }
            }
            for (p, spec) in acc.into_iter().enumerate() {
                if let Some(spec) = spec {
                    let full = self.fft.inverse_real(spec);
                    clamp_into(out.row_mut(p as u32), full.into_iter());
                }
            }
        } else {
            for &a in &nzl {
                let ra = left.row(a);
                for &b in &nzr {
                    let rb = right.row(b);
                    let row = out.row_mut(a | b);
                    for (i, &x) in ra.iter().enumerate().take(out_width) {
                        if x == 0.0 {
                            continue;
                        }
                        let m = wr.min(out_width - i);
                        for (o, &y) in row[i..i + m].iter_mut().zip(&rb[..m]) {
                            *o += x * y;
                        }
                    }
                }
            }
        }
        normalize(&mut out);
        out
    }

    /// Child backward table: `out(A, a) = Σ_E Σ_e parent(A ∪ E, a + e) * sibling(E, e)`.
    fn descend(&mut self, parent: &MessageTable, sibling: &MessageTable, out_width: usize) -> MessageTable {
        let nsub = parent.num_subsets();
        let mut out = MessageTable::zeros(nsub, out_width);
        out.log_scale = parent.log_scale + sibling.log_scale;
        let nzs = nonzero_rows(sibling);
        let nzp = nonzero_rows(parent);
        let (wp, ws) = (parent.width(), sibling.width());
        debug_assert!(out_width <= wp);

        if wp.max(ws) > self.crossover && out_width > 1 {
            let n = FftConvolver::size_for(wp, ws);
            let sp = self.spectra(parent, &nzp, n, true);
            let ss = self.spectra(sibling, &nzs, n, false);
            for a in 0..nsub as u32 {
                let mut acc: Option<Vec<Complex64>> = None;
                for &e in &nzs {
                    let Some(fp) = sp[(a | e) as usize].as_ref() else {
                        continue;
                    };
                    let fe = ss[e as usize].as_ref().unwrap();
                    let slot = acc.get_or_insert_with(|| vec![Complex64::default(); n]);
                    for ((s, x), y) in slot.iter_mut().zip(fp).zip(fe) {
                        *s += x * y;
                    }
                }
                if let Some(spec) = acc {
                    let full = self.fft.inverse_real(spec);
                    clamp_into(out.row_mut(a), (0..out_width).map(|i| full[wp - 1 - i]));
                }
            }
        } else {
            for a in 0..nsub as u32 {
                for &e in &nzs {
                    let rp = parent.row(a | e);
                    if rp.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let rs = sibling.row(e);
                    let row = out.row_mut(a);
                    for (i, o) in row.iter_mut().enumerate() {
                        let m = ws.min(wp - i);
                        *o += rp[i..i + m].iter().zip(&rs[..m]).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            }
        }
        normalize(&mut out);
        out
    }

    fn spectra(&mut self, t: &MessageTable, rows: &[u32], n: usize, reversed: bool) -> Vec<Option<Vec<Complex64>>> {
        let mut out = vec![None; t.num_subsets()];
        for &m in rows {
            let spec = if reversed {
                let rev: Vec<f64> = t.row(m).iter().rev().copied().collect();
                self.fft.spectrum(&rev, n)
            } else {
                self.fft.spectrum(t.row(m), n)
            };
            out[m as usize] = Some(spec);
        }
        out
    }
}

/// Count-axis merge of two child tables into a parent of width `out_width`,
/// using the FFT when either input is longer than `crossover`.
pub fn count_axis_convolve(
    left: &MessageTable,
    right: &MessageTable,
    out_width: usize,
    crossover: usize,
) -> MessageTable {
    CountConvolver::new(crossover).merge(left, right, out_width)
}

fn leaf_table(prior: &PriorField, labels: &ClassSet, u: usize, width: usize, log_tilt: f64) -> MessageTable {
    let nsub = labels.num_subsets();
    let mut t = MessageTable::zeros(nsub, width);
    let mut logs = vec![(0u32, 0usize, prior.prob(u, 0).ln())];
    if width > 1 {
        for (k, &c) in labels.classes().iter().enumerate() {
            logs.push((1 << k, 1, prior.prob(u, c).ln() + log_tilt));
        }
    }
    let m = logs.iter().map(|v| v.2).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        t.log_scale = f64::NEG_INFINITY;
        return t;
    }
    for (mask, count, lv) in logs {
        t.set(mask, count, (lv - m).exp());
    }
    t.log_scale = m;
    t
}

pub fn tree_forward(prior: &PriorField, labels: &ClassSet, cap: usize) -> TreeForward {
    tree_forward_with(prior, labels, cap, TreeOptions::default())
}

pub fn tree_forward_with(prior: &PriorField, labels: &ClassSet, cap: usize, opts: TreeOptions) -> TreeForward {
    let layout = TreeLayout::new(prior.num_instances());
    let log_tilt = if opts.tilt {
        count_tilt(prior, labels, cap)
    } else {
        0.0
    };
    let nsub = labels.num_subsets();
    let depth = layout.depth;

    let leaves: Vec<MessageTable> = (0..layout.num_leaves)
        .map(|i| {
            let w = layout.width(depth, i, cap, opts.truncation);
            if i < layout.num_real {
                leaf_table(prior, labels, i, w, log_tilt)
            } else {
                let mut t = MessageTable::zeros(nsub, w);
                t.set(0, 0, 1.0);
                t
            }
        })
        .collect();

    let mut conv = CountConvolver::new(opts.fft_crossover);
    let mut levels = vec![Vec::new(); depth + 1];
    levels[depth] = leaves;
    for level in (0..depth).rev() {
        let children = &levels[level + 1];
        let parents: Vec<MessageTable> = (0..layout.nodes(level))
            .map(|i| {
                let w = layout.width(level, i, cap, opts.truncation);
                conv.merge(&children[2 * i], &children[2 * i + 1], w)
            })
            .collect();
        levels[level] = parents;
    }
    TreeForward {
        layout,
        levels,
        log_tilt,
        opts,
        cap,
    }
}

fn root_backward(fwd: &TreeForward, labels: &ClassSet, cap: usize) -> MessageTable {
    let root = fwd.root();
    let w = root.width();
    let mut t = MessageTable::zeros(root.num_subsets(), w);
    let top = cap.min(w - 1);
    // Tilted indicator 1[l <= N̄] r^-l, scaled so the largest entry is 1.
    let logs: Vec<f64> = (0..=top).map(|l| -(l as f64) * fwd.log_tilt).collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let row = t.row_mut(labels.full_mask());
    for (l, lv) in logs.into_iter().enumerate() {
        row[l] = (lv - m).exp();
    }
    t.log_scale = m;
    t
}

fn backward_levels(fwd: &TreeForward, labels: &ClassSet, cap: usize, keep_all: bool) -> Vec<Vec<MessageTable>> {
    let layout = fwd.layout;
    let nsub = labels.num_subsets();
    let mut conv = CountConvolver::new(fwd.opts.fft_crossover);
    let mut done = Vec::new();
    let mut current = vec![root_backward(fwd, labels, cap)];
    for level in 0..layout.depth {
        let child_level = &fwd.levels[level + 1];
        let mut next = Vec::with_capacity(layout.nodes(level + 1));
        for (i, parent) in current.iter().enumerate() {
            for side in 0..2 {
                let child = 2 * i + side;
                let w = layout.width(level + 1, child, cap, fwd.opts.truncation);
                if layout.real_leaves(level + 1, child) == 0 {
                    // Padding-only subtree: never read by any output.
                    let mut t = MessageTable::zeros(nsub, w);
                    t.log_scale = f64::NEG_INFINITY;
                    next.push(t);
                    continue;
                }
                let sibling = &child_level[child ^ 1];
                next.push(conv.descend(parent, sibling, w));
            }
        }
        let prev = std::mem::replace(&mut current, next);
        if keep_all {
            done.push(prev);
        }
    }
    done.push(current);
    done
}

/// Backward messages for every level (level 0 first), in the same tilted form
/// as the forward tables.
pub fn tree_backward(fwd: &TreeForward, labels: &ClassSet, cap: usize) -> Vec<Vec<MessageTable>> {
    backward_levels(fwd, labels, cap, true)
}

/// Log joint weights at a leaf for class 0 then each class in `labels`.
fn leaf_log_weights(prior: &PriorField, labels: &ClassSet, beta: &MessageTable, u: usize, log_tilt: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(labels.len() + 1);
    let b0 = beta.get(0, 0);
    w.push(prior.prob(u, 0).ln() + b0.ln());
    for (k, &c) in labels.classes().iter().enumerate() {
        let b = beta.get(1 << k, 1);
        w.push(prior.prob(u, c).ln() + b.ln() + log_tilt);
    }
    w
}

/// `P(y(u) = c, Y, I = 1 | x)` from the leaf-level backward messages.
pub fn tree_joint(
    prior: &PriorField,
    labels: &ClassSet,
    fwd: &TreeForward,
    leaf_backward: &[MessageTable],
    u: usize,
    c: usize,
) -> Result<f64> {
    if u >= fwd.layout.num_real {
        return Err(Error::Range(format!(
            "leaf {u} is padding (signal has {} instances)",
            fwd.layout.num_real
        )));
    }
    let slot = if c == 0 {
        0
    } else {
        match labels.position(c) {
            Some(k) => k + 1,
            None => return Ok(0.0),
        }
    };
    let beta = &leaf_backward[u];
    let lw = leaf_log_weights(prior, labels, beta, u, fwd.log_tilt)[slot];
    Ok((lw + beta.log_scale).exp())
}

pub fn tree_log_evidence(prior: &PriorField, labels: &ClassSet, cap: usize) -> Result<f64> {
    check_labels(prior, labels)?;
    let fwd = tree_forward(prior, labels, cap);
    let le = fwd.label_set_log_likelihood(labels.full_mask());
    if le == f64::NEG_INFINITY || le.is_nan() {
        return Err(Error::ZeroEvidence);
    }
    Ok(le)
}

pub fn tree_posterior(prior: &PriorField, labels: &ClassSet, cap: usize) -> Result<Posterior> {
    tree_posterior_with(prior, labels, cap, TreeOptions::default())
}

pub fn tree_posterior_with(prior: &PriorField, labels: &ClassSet, cap: usize, opts: TreeOptions) -> Result<Posterior> {
    check_labels(prior, labels)?;
    let fwd = tree_forward_with(prior, labels, cap, opts);
    let log_evidence = fwd.label_set_log_likelihood(labels.full_mask());
    if log_evidence == f64::NEG_INFINITY || log_evidence.is_nan() {
        return Err(Error::ZeroEvidence);
    }
    let leaves = backward_levels(&fwd, labels, cap, false).pop().unwrap();
    let weights: Vec<Vec<f64>> = (0..prior.num_instances())
        .map(|u| {
            let lw = leaf_log_weights(prior, labels, &leaves[u], u, fwd.log_tilt);
            let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                vec![0.0; lw.len()]
            } else {
                lw.iter().map(|v| (v - m).exp()).collect()
            }
        })
        .collect();
    assemble_posterior(prior, labels, &weights, log_evidence)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_prior(n: usize, c: usize) -> PriorField {
        PriorField::new(n, c, vec![1.0 / (c + 1) as f64; n * (c + 1)]).unwrap()
    }

    fn single_set(v: &[f64]) -> MessageTable {
        let mut t = MessageTable::zeros(1, v.len());
        t.row_mut(0).copy_from_slice(v);
        t
    }

    #[test]
    fn layout_counts() {
        let l = TreeLayout::new(5);
        assert_eq!((l.depth, l.num_leaves), (3, 8));
        assert_eq!(l.real_leaves(1, 0), 4);
        assert_eq!(l.real_leaves(1, 1), 1);
        assert_eq!(l.real_leaves(2, 3), 0);
        let one = TreeLayout::new(1);
        assert_eq!((one.depth, one.num_leaves), (0, 1));
    }

    #[test]
    fn single_leaf_root_is_leaf() {
        let p = PriorField::new(1, 1, vec![0.3, 0.7]).unwrap();
        let y = ClassSet::new([1]).unwrap();
        let f = tree_forward(&p, &y, 1);
        assert_eq!(f.levels.len(), 1);
        assert!((f.value(0, 0, 0, 0) - 0.3).abs() < 1e-15);
        assert!((f.value(0, 0, 1, 1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn three_uniform_instances_cap_one() {
        let p = uniform_prior(3, 1);
        let y = ClassSet::new([1]).unwrap();
        let f = tree_forward(&p, &y, 1);
        assert!((f.label_set_log_likelihood(1).exp() - 0.375).abs() < 1e-15);
        let b = tree_backward(&f, &y, 1);
        let leaves = b.last().unwrap();
        assert!((tree_joint(&p, &y, &f, leaves, 1, 1).unwrap() - 0.125).abs() < 1e-15);
        assert!(matches!(tree_joint(&p, &y, &f, leaves, 3, 0), Err(Error::Range(_))));
        assert_eq!(tree_joint(&p, &y, &f, leaves, 0, 2).unwrap(), 0.0);
        let post = tree_posterior(&p, &y, 1).unwrap();
        for u in 0..3 {
            assert!((post.prob(u, 1) - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn vacuous_cap_root_sums_to_one() {
        let p = PriorField::new(5, 2, [0.2, 0.5, 0.3].repeat(5)).unwrap();
        let y = ClassSet::all(2);
        let f = tree_forward(&p, &y, 5);
        let total: f64 = (0..4).map(|m| f.label_set_log_likelihood(m).exp()).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn empty_label_set_forces_zero_labels() {
        let p = PriorField::new(4, 1, [0.4, 0.6].repeat(4)).unwrap();
        let post = tree_posterior(&p, &ClassSet::empty(), 0).unwrap();
        for u in 0..4 {
            assert_eq!(post.prob(u, 0), 1.0);
            assert_eq!(post.prob(u, 1), 0.0);
        }
        assert!((post.log_evidence - 4.0 * 0.4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn count_convolution_basics() {
        let l = single_set(&[0.5, 0.5]);
        let out = count_axis_convolve(&l, &l, 3, 64);
        let vals: Vec<f64> = (0..3).map(|i| out.get(0, i) * out.log_scale.exp()).collect();
        for (v, w) in vals.iter().zip([0.25, 0.5, 0.25]) {
            assert!((v - w).abs() < 1e-15);
        }
        let delta = single_set(&[1.0, 0.0, 0.0]);
        let r = single_set(&[0.1, 0.7, 0.2]);
        let out = count_axis_convolve(&r, &delta, 3, 64);
        for i in 0..3 {
            assert!((out.get(0, i) * out.log_scale.exp() - r.get(0, i)).abs() < 1e-15);
        }
    }

    #[test]
    fn fft_merge_matches_direct() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut a = MessageTable::zeros(4, 128);
        let mut b = MessageTable::zeros(4, 128);
        for m in 0..4 {
            for i in 0..128 {
                a.set(m, i, rng.random());
                b.set(m, i, rng.random());
            }
        }
        let d = count_axis_convolve(&a, &b, 200, usize::MAX);
        let f = count_axis_convolve(&a, &b, 200, 0);
        assert!((d.log_scale - f.log_scale).abs() < 1e-12);
        for (x, y) in d.entries().iter().zip(f.entries()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn tilt_is_zero_when_cap_slack() {
        let p = uniform_prior(10, 1);
        let y = ClassSet::new([1]).unwrap();
        assert_eq!(count_tilt(&p, &y, 10), 0.0);
        let t = count_tilt(&p, &y, 2);
        assert!(t < 0.0);
        // Expected count under the tilt equals the cap.
        let r = t.exp();
        assert!((10.0 * r * 0.5 / (0.5 + r * 0.5) - 2.0).abs() < 1e-9);
    }
}
