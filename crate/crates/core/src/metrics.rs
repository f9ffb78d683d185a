//! Detection AUCs and multi-instance multi-label evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ClassSet;

/// Mann–Whitney AUC with midranks for ties; `None` unless there is at least
/// one positive and one negative.
pub fn auc(scores: &[f64], truths: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), truths.len());
    let pos = truths.iter().filter(|&&t| t).count();
    let neg = truths.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| truths[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimlMetrics {
    pub hamming_loss: f64,
    pub rank_loss: f64,
    /// Fraction of (relevant, irrelevant) pairs with equal scores; not
    /// counted in `rank_loss`.
    pub rank_tie_fraction: f64,
    pub average_precision: f64,
    pub one_error: f64,
    pub coverage: f64,
}

/// `ranks[k]` = number of classes scoring at least as high as class `k + 1`.
fn pessimistic_ranks(scores: &[f64]) -> Vec<usize> {
    scores
        .iter()
        .map(|&s| scores.iter().filter(|&&o| o >= s).count())
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// MIML metrics for `scores[n][k]` (class `k + 1`) against label sets.
///
/// Hamming loss thresholds scores at 0.5 and covers every signal. Signals with
/// an empty label set are left out of the ranking metrics, and signals whose
/// label set holds every class are also left out of the rank loss.
pub fn miml_metrics(scores: &[Vec<f64>], labels: &[ClassSet]) -> Result<MimlMetrics> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Shape("score matrix and label sets differ in length".into()));
    }
    let c = scores[0].len();
    if c == 0 || scores.iter().any(|r| r.len() != c) {
        return Err(Error::Shape("ragged score matrix".into()));
    }
    let mut wrong = 0usize;
    let (mut rl, mut ties, mut ap, mut oe, mut cov) = (vec![], vec![], vec![], vec![], vec![]);
    for (row, y) in scores.iter().zip(labels) {
        if y.classes().iter().any(|&k| k > c) {
            return Err(Error::Range(format!("label outside 1..={c}")));
        }
        let rel: Vec<bool> = (1..=c).map(|k| y.contains(k)).collect();
        wrong += row.iter().zip(&rel).filter(|(&s, &r)| (s >= 0.5) != r).count();
        if y.is_empty() {
            continue;
        }
        let ranks = pessimistic_ranks(row);
        let relevant: Vec<usize> = (0..c).filter(|&k| rel[k]).collect();
        let irrelevant: Vec<usize> = (0..c).filter(|&k| !rel[k]).collect();
        if !irrelevant.is_empty() {
            let pairs = (relevant.len() * irrelevant.len()) as f64;
            let mut bad = 0usize;
            let mut tied = 0usize;
            for &a in &relevant {
                for &b in &irrelevant {
                    if row[a] < row[b] {
                        bad += 1;
                    } else if row[a] == row[b] {
                        tied += 1;
                    }
                }
            }
            rl.push(bad as f64 / pairs);
            ties.push(tied as f64 / pairs);
        }
        let mut top = 0;
        for k in 1..c {
            if row[k] > row[top] {
                top = k;
            }
        }
        oe.push(if rel[top] { 0.0 } else { 1.0 });
        cov.push(relevant.iter().map(|&k| ranks[k]).max().unwrap() as f64 - 1.0);
        let prec: Vec<f64> = relevant
            .iter()
            .map(|&k| relevant.iter().filter(|&&j| ranks[j] <= ranks[k]).count() as f64 / ranks[k] as f64)
            .collect();
        ap.push(mean(&prec));
    }
    Ok(MimlMetrics {
        hamming_loss: wrong as f64 / (scores.len() * c) as f64,
        rank_loss: mean(&rl),
        rank_tie_fraction: mean(&ties),
        average_precision: mean(&ap),
        one_error: mean(&oe),
        coverage: mean(&cov),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: usize,
    pub instance_auc: Option<f64>,
    pub signal_auc: Option<f64>,
    /// Offset applied to the instance scores: truth at `t` is scored by the
    /// probability at `t + lag`.
    pub lag: isize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassRow>,
    pub mean_instance_auc: Option<f64>,
    pub mean_signal_auc: Option<f64>,
    pub miml: MimlMetrics,
    pub warnings: Vec<String>,
}

/// Per-signal evaluation inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSignal {
    /// Signal scores for classes `1..=C`.
    pub scores: Vec<f64>,
    pub labels: ClassSet,
    /// Instance probabilities `[u][k]` for class `k + 1`, with truth `y[t]`.
    pub instances: Option<(Vec<Vec<f64>>, Vec<usize>)>,
    /// Row of the instance probabilities that lines up with `t = 0`.
    pub instance_offset: usize,
}

fn mean_defined(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

/// Instance AUC of class `k + 1` when truth at `t` is scored by the
/// probability at `t + lag`, clamped to the available rows. `None` without
/// instance data or with one-sided truth.
pub fn instance_auc_at_lag(signals: &[ScoredSignal], k: usize, lag: isize) -> Option<f64> {
    let mut s = Vec::new();
    let mut t = Vec::new();
    for x in signals {
        let (probs, y) = x.instances.as_ref()?;
        let last = probs.len() as isize - 1;
        for (i, &yy) in y.iter().enumerate() {
            let j = (i as isize + x.instance_offset as isize + lag).clamp(0, last);
            s.push(probs[j as usize][k]);
            t.push(yy == k + 1);
        }
    }
    auc(&s, &t)
}

/// Per-class lag in `-max_lag..=max_lag` that maximizes instance AUC on
/// `calibration`, which should be disjoint from the evaluated signals.
///
/// Weak labels do not pin where inside the window a learned word responds,
/// so a detector may be exact but offset from the truth convention by a few
/// samples. Ties go to the smaller `|lag|`, then to the negative one.
/// Classes with undefined AUC get lag 0.
pub fn calibrate_lags(calibration: &[ScoredSignal], num_classes: usize, max_lag: usize) -> Vec<isize> {
    let mut order = vec![0isize];
    for l in 1..=max_lag as isize {
        order.push(-l);
        order.push(l);
    }
    (0..num_classes)
        .map(|k| {
            let mut best: Option<(isize, f64)> = None;
            for &lag in &order {
                if let Some(a) = instance_auc_at_lag(calibration, k, lag) {
                    if best.is_none_or(|(_, b)| a > b) {
                        best = Some((lag, a));
                    }
                }
            }
            best.map_or(0, |(l, _)| l)
        })
        .collect()
}

/// Per-class instance and signal AUCs plus the MIML metrics. Classes without
/// both positives and negatives get no AUC and a warning.
pub fn evaluate(signals: &[ScoredSignal]) -> Result<EvalReport> {
    evaluate_with_lags(signals, None)
}

/// [`evaluate`] with instance scores shifted per class, as found by
/// [`calibrate_lags`].
pub fn evaluate_with_lags(signals: &[ScoredSignal], lags: Option<&[isize]>) -> Result<EvalReport> {
    if signals.is_empty() {
        return Err(Error::InsufficientData("nothing to evaluate".into()));
    }
    let c = signals[0].scores.len();
    if let Some(l) = lags {
        if l.len() != c {
            return Err(Error::Shape(format!("{} lags for {c} classes", l.len())));
        }
    }
    let mut warnings = Vec::new();
    let mut classes = Vec::with_capacity(c);
    for k in 0..c {
        let s: Vec<f64> = signals.iter().map(|x| x.scores[k]).collect();
        let t: Vec<bool> = signals.iter().map(|x| x.labels.contains(k + 1)).collect();
        let signal_auc = auc(&s, &t);
        if signal_auc.is_none() {
            warnings.push(format!("class {}: signal AUC undefined (one-sided truth)", k + 1));
        }
        let lag = lags.map_or(0, |l| l[k]);
        let have_instances = signals.iter().all(|x| x.instances.is_some());
        let instance_auc = if have_instances {
            let a = instance_auc_at_lag(signals, k, lag);
            if a.is_none() {
                warnings.push(format!("class {}: instance AUC undefined (one-sided truth)", k + 1));
            }
            a
        } else {
            None
        };
        classes.push(ClassRow {
            class: k + 1,
            instance_auc,
            signal_auc,
            lag,
        });
    }
    let scores: Vec<Vec<f64>> = signals.iter().map(|x| x.scores.clone()).collect();
    let labels: Vec<ClassSet> = signals.iter().map(|x| x.labels.clone()).collect();
    Ok(EvalReport {
        mean_instance_auc: mean_defined(classes.iter().map(|r| r.instance_auc)),
        mean_signal_auc: mean_defined(classes.iter().map(|r| r.signal_auc)),
        classes,
        miml: miml_metrics(&scores, &labels)?,
        warnings,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvalReport {
    /// One row per class plus an `all` row carrying the means and MIML metrics.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "class,instance_auc,signal_auc,lag,hamming_loss,rank_loss,average_precision,one_error,coverage\n",
        );
        for r in &self.classes {
            out += &format!(
                "{},{},{},{},,,,,\n",
                r.class,
                opt(r.instance_auc),
                opt(r.signal_auc),
                r.lag
            );
        }
        let m = &self.miml;
        out += &format!(
            "all,{},{},,{},{},{},{},{}\n",
            opt(self.mean_instance_auc),
            opt(self.mean_signal_auc),
            m.hamming_loss,
            m.rank_loss,
            m.average_precision,
            m.one_error,
            m.coverage
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[0.1, 0.9], &[false, true]), Some(1.0));
        assert_eq!(auc(&[0.3; 4], &[true, false, true, false]), Some(0.5));
        assert_eq!(auc(&[0.9, 0.4, 0.6], &[true, false, true]), Some(1.0));
        assert_eq!(auc(&[0.9, 0.4], &[true, true]), None);
    }

    #[test]
    fn inverted_single_signal() {
        let m = miml_metrics(&[vec![0.1, 0.5, 0.9]], &[ClassSet::new([1]).unwrap()]).unwrap();
        assert_eq!(m.rank_loss, 1.0);
        assert_eq!(m.one_error, 1.0);
        assert_eq!(m.coverage, 2.0);
        assert!((m.average_precision - 1.0 / 3.0).abs() < 1e-15);
    }
}
