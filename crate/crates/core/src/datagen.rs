//! Synthetic datasets: Gabor-template superpositions in white noise, and
//! random binary matrices labeled by their most frequent 3x3 patterns.
//!
//! Every signal draws from its own ChaCha8 stream (`2n` for structure,
//! `2n + 1` for noise) of the configured seed, so output does not depend on
//! generation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::conv::convolve_direct;
use crate::error::{Error, Result};
use crate::parallel::{map_ordered, ExecMode};
use crate::types::{ClassSet, Signal};

/// Template half-width; templates are evaluated on `-20..=20`.
pub const GABOR_HALF_SUPPORT: usize = 20;
pub const GABOR_WIDTHS: [f64; 3] = [1.0, 2.0, 3.0];
pub const GABOR_FREQS: [f64; 3] = [0.1, 0.2, 0.3];

/// `cos(2π f t) exp(-t² / 2a²)` on `t = -20..=20`.
pub fn gabor_template(a: f64, f: f64) -> Vec<f64> {
    let h = GABOR_HALF_SUPPORT as isize;
    (-h..=h)
        .map(|t| {
            let t = t as f64;
            (2.0 * std::f64::consts::PI * f * t).cos() * (-t * t / (2.0 * a * a)).exp()
        })
        .collect()
}

/// Templates for classes `1..=9`, width-major: `(1, 0.1), (1, 0.2), ..., (3, 0.3)`.
pub fn gabor_templates() -> Vec<Vec<f64>> {
    GABOR_WIDTHS
        .iter()
        .flat_map(|&a| GABOR_FREQS.iter().map(move |&f| gabor_template(a, f)))
        .collect()
}

/// A generated signal with its weak labels and latent instance labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSignal {
    pub id: String,
    pub signal: Signal,
    pub labels: ClassSet,
    /// Instance label per time step `t = 0..T`.
    pub truth: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborConfig {
    pub num_signals: usize,
    pub len: usize,
    /// `None` disables the noise.
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// Probabilities of label sets of size 1, 2, 3 and 0.
    pub mixture: [f64; 4],
}

impl Default for GaborConfig {
    fn default() -> Self {
        Self {
            num_signals: 100,
            len: 200,
            snr_db: Some(20.0),
            seed: 0,
            mixture: [0.5, 0.2, 0.2, 0.1],
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct Planted {
    labels: ClassSet,
    truth: Vec<usize>,
    clean: Vec<f64>,
}

fn plant(cfg: &GaborConfig, templates: &[Vec<f64>], n: usize) -> Result<Planted> {
    let mut rng = stream(cfg.seed, 2 * n as u64);
    let num_classes = templates.len();
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut size = 0;
    for (i, &p) in cfg.mixture.iter().enumerate() {
        acc += p;
        if u < acc {
            size = [1, 2, 3, 0][i];
            break;
        }
    }
    let mut classes: Vec<usize> = Vec::new();
    while classes.len() < size {
        let c = rng.random_range(1..=num_classes);
        if !classes.contains(&c) {
            classes.push(c);
        }
    }
    let m = match size {
        0 => 0,
        1 | 2 => size + rng.random_range(0..=1),
        _ => rng.random_range(size..=10),
    }
    .min(cfg.len);

    // Distinct locations in 0..T.
    let locs = rand::seq::index::sample(&mut rng, cfg.len, m).into_vec();
    let mut truth = vec![0; cfg.len];
    let mut impulses = vec![vec![0.0; cfg.len]; num_classes];
    for (k, &t) in locs.iter().enumerate() {
        // The first |Y| instances cover every class of the label set.
        let c = if k < classes.len() {
            classes[k]
        } else {
            classes[rng.random_range(0..classes.len())]
        };
        let amp = rng.random_range(1.0..2.0);
        truth[t] = c;
        impulses[c - 1][t] = amp;
    }
    let mut clean = vec![0.0; cfg.len];
    for (y, s) in impulses.iter().zip(templates) {
        if y.iter().all(|&v| v == 0.0) {
            continue;
        }
        let full = convolve_direct(y, s);
        for (t, x) in clean.iter_mut().enumerate() {
            *x += full[t + GABOR_HALF_SUPPORT];
        }
    }
    Ok(Planted {
        labels: ClassSet::new(classes)?,
        truth,
        clean,
    })
}

/// Noise variance `E / (T 10^(snr/10))` for mean clean energy `E`.
pub fn noise_variance(mean_energy: f64, len: usize, snr_db: f64) -> f64 {
    mean_energy / (len as f64 * 10f64.powf(snr_db / 10.0))
}

pub fn gen_gabor_dataset(cfg: &GaborConfig) -> Result<Vec<GeneratedSignal>> {
    let total: f64 = cfg.mixture.iter().sum();
    if cfg.mixture.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParams("label-set mixture must be a distribution".into()));
    }
    if cfg.len == 0 {
        return Err(Error::InvalidParams("signal length must be positive".into()));
    }
    let templates = gabor_templates();
    let ids: Vec<usize> = (0..cfg.num_signals).collect();
    let planted: Vec<Planted> = map_ordered(ExecMode::Parallel, &ids, |_, &n| plant(cfg, &templates, n))
        .into_iter()
        .collect::<Result<_>>()?;

    let sigma = match cfg.snr_db {
        Some(db) if !planted.is_empty() => {
            let energies: Vec<f64> = planted.iter().map(|p| p.clean.iter().map(|v| v * v).sum()).collect();
            let mean = crate::parallel::pairwise_sum(&energies) / planted.len() as f64;
            noise_variance(mean, cfg.len, db).sqrt()
        }
        _ => 0.0,
    };

    planted
        .into_iter()
        .enumerate()
        .map(|(n, p)| {
            let mut x = p.clean;
            if sigma > 0.0 {
                let mut rng = stream(cfg.seed, 2 * n as u64 + 1);
                let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParams(e.to_string()))?;
                for v in x.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
            Ok(GeneratedSignal {
                id: format!("gabor-{n:05}"),
                signal: Signal::from_1d(x)?,
                labels: p.labels,
                truth: p.truth,
            })
        })
        .collect()
}

pub const BINARY_ROWS: usize = 3;
pub const PATTERN_WIDTH: usize = 3;

/// Binary dataset plus the class templates (row-major 3x3 bit codes, class
/// `k + 1` at index `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    pub signals: Vec<GeneratedSignal>,
    pub templates: Vec<u16>,
}

/// Row-major code of the 3x3 window starting at `t`, first element as the
/// most significant bit.
pub fn window_code(rows: &[Vec<f64>], t: usize) -> u16 {
    let mut code = 0u16;
    for row in rows.iter().take(BINARY_ROWS) {
        for j in 0..PATTERN_WIDTH {
            code = code << 1 | u16::from(row[t + j] != 0.0);
        }
    }
    code
}

/// Decodes a template code into its 3x3 bit matrix.
pub fn template_bits(code: u16) -> [[u8; PATTERN_WIDTH]; BINARY_ROWS] {
    let mut out = [[0; PATTERN_WIDTH]; BINARY_ROWS];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, b) in row.iter_mut().enumerate() {
            let shift = (BINARY_ROWS * PATTERN_WIDTH - 1) - (i * PATTERN_WIDTH + j);
            *b = (code >> shift & 1) as u8;
        }
    }
    out
}

/// Occurrence counts of each 9-bit window code over a corpus.
pub fn pattern_counts(rows: &[Vec<Vec<f64>>]) -> Vec<usize> {
    let mut counts = vec![0usize; 1 << (BINARY_ROWS * PATTERN_WIDTH)];
    for r in rows {
        let len = r[0].len();
        for t in 0..=len.saturating_sub(PATTERN_WIDTH) {
            if t + PATTERN_WIDTH <= len {
                counts[window_code(r, t) as usize] += 1;
            }
        }
    }
    counts
}

/// `num_signals` random binary `3 x len` signals labeled by the three most
/// frequent 3x3 windows (ties toward the smaller code). Instance `t` gets the
/// class of the window starting at `t`; windows must lie fully inside.
pub fn gen_binary_dataset(seed: u64, num_signals: usize, len: usize) -> Result<BinaryDataset> {
    if len < PATTERN_WIDTH {
        return Err(Error::InvalidParams(format!("binary signals need length >= {PATTERN_WIDTH}")));
    }
    let ids: Vec<usize> = (0..num_signals).collect();
    let rows: Vec<Vec<Vec<f64>>> = map_ordered(ExecMode::Parallel, &ids, |_, &n| {
        let mut rng = stream(seed, 2 * n as u64);
        (0..BINARY_ROWS)
            .map(|_| (0..len).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect())
            .collect()
    });
    let counts = pattern_counts(&rows);
    let mut order: Vec<u16> = (0..counts.len() as u16).collect();
    order.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
    let templates: Vec<u16> = order[..3].to_vec();

    let signals = rows
        .into_iter()
        .enumerate()
        .map(|(n, r)| {
            let mut truth = vec![0; len];
            for (t, y) in truth.iter_mut().enumerate().take(len - PATTERN_WIDTH + 1) {
                let code = window_code(&r, t);
                if let Some(k) = templates.iter().position(|&c| c == code) {
                    *y = k + 1;
                }
            }
            Ok(GeneratedSignal {
                id: format!("binary-{n:05}"),
                signal: Signal::from_rows(&r)?,
                labels: ClassSet::new(truth.iter().copied().filter(|&c| c != 0))?,
                truth,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BinaryDataset { signals, templates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_shape() {
        for s in gabor_templates() {
            assert_eq!(s.len(), 41);
            assert_eq!(s[20], 1.0);
            for k in 0..20 {
                assert_eq!(s[k], s[40 - k]);
            }
        }
        assert!(gabor_template(1.0, 0.1)[0].abs() < 1e-80);
    }

    #[test]
    fn noiseless_signals_are_clean_superpositions() {
        let cfg = GaborConfig {
            num_signals: 20,
            snr_db: None,
            seed: 3,
            ..GaborConfig::default()
        };
        let data = gen_gabor_dataset(&cfg).unwrap();
        for g in &data {
            // Samples farther than the template half-width from every planted
            // instance are exactly zero.
            for (t, &x) in g.signal.samples().iter().enumerate() {
                let near = g.truth.iter().enumerate().any(|(k, &c)| c != 0 && k.abs_diff(t) <= 20);
                if !near {
                    assert_eq!(x, 0.0);
                }
            }
            // Amplitudes are in [1, 2): the clean signal is a positive
            // combination, so zero truth means zero signal.
            if g.truth.iter().all(|&c| c == 0) {
                assert!(g.signal.samples().iter().all(|&v| v == 0.0));
                assert!(g.labels.is_empty());
            }
            let planted: Vec<usize> = g.truth.iter().copied().filter(|&c| c != 0).collect();
            assert_eq!(ClassSet::new(planted).unwrap(), g.labels);
        }
    }

    #[test]
    fn snr_zero_noise_variance() {
        assert_eq!(noise_variance(400.0, 200, 0.0), 2.0);
        assert!((noise_variance(400.0, 200, 20.0) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn template_codes_round_trip() {
        let rows = vec![vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]];
        let code = window_code(&rows, 0);
        assert_eq!(code, 0b101_000_111);
        assert_eq!(template_bits(code), [[1, 0, 1], [0, 0, 0], [1, 1, 1]]);
    }
}
