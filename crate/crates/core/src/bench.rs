//! Posterior runtime sweeps over random priors and log-log scaling fits.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::inference::Backend;
use crate::types::{ClassSet, PriorField};

/// Random prior with flat-Dirichlet rows.
pub fn random_prior(rng: &mut impl Rng, num_instances: usize, num_classes: usize) -> PriorField {
    let mut probs = Vec::with_capacity(num_instances * (num_classes + 1));
    for _ in 0..num_instances {
        let row: Vec<f64> = (0..=num_classes)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let z: f64 = row.iter().sum();
        probs.extend(row.iter().map(|v| v / z));
    }
    PriorField::new(num_instances, num_classes, probs).expect("rows are normalized")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub backend: Backend,
    pub len: usize,
    pub labels: usize,
    pub ratio: f64,
}

impl BenchCell {
    pub fn cap(&self) -> usize {
        ((self.len as f64 * self.ratio).round() as usize).max(self.labels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchGrid {
    pub cells: Vec<BenchCell>,
    pub reps: usize,
    pub seed: u64,
}

const BACKENDS: [Backend; 2] = [Backend::Chain, Backend::Tree];
const FIG7_LENS: [usize; 11] = [5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000];
const RATIOS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

fn product(lens: &[usize], labels: &[usize], ratios: &[f64]) -> Vec<BenchCell> {
    let mut out = Vec::new();
    for &backend in &BACKENDS {
        for &len in lens {
            for &l in labels {
                for &ratio in ratios {
                    out.push(BenchCell {
                        backend,
                        len,
                        labels: l,
                        ratio,
                    });
                }
            }
        }
    }
    out
}

impl BenchGrid {
    /// Small Cartesian grid for smoke runs.
    pub fn quick() -> Self {
        Self {
            cells: product(&[50, 100, 200, 500], &[1, 2], &[0.2, 0.5]),
            reps: 3,
            seed: 0,
        }
    }

    /// The three runtime panels: length sweep (ratio 0.2, |Y| = 2), label-set
    /// size sweep (length 1000, ratio 0.2) and ratio sweep (length 5000, |Y| = 2).
    pub fn fig7() -> Self {
        let mut cells = product(&FIG7_LENS, &[2], &[0.2]);
        cells.extend(product(&[1000], &[1, 3, 4, 5], &[0.2]));
        cells.extend(product(&[5000], &[2], &RATIOS).into_iter().filter(|c| c.ratio != 0.2));
        Self { cells, reps: 3, seed: 0 }
    }

    /// Full Cartesian sweep; slow.
    pub fn full() -> Self {
        Self {
            cells: product(&FIG7_LENS, &[1, 2, 3, 4, 5], &RATIOS),
            reps: 3,
            seed: 0,
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "quick" => Ok(Self::quick()),
            "fig7" => Ok(Self::fig7()),
            "full" => Ok(Self::full()),
            other => Err(Error::InvalidParams(format!("unknown grid `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub backend: Backend,
    pub len: usize,
    pub labels: usize,
    pub ratio: f64,
    pub median_seconds: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median wall time of the posterior computation for one cell; one warm-up
/// run is discarded. Prior generation is not timed.
pub fn time_cell(cell: &BenchCell, reps: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = random_prior(&mut rng, cell.len, cell.labels);
    let labels = ClassSet::all(cell.labels);
    let cap = cell.cap();
    cell.backend.posterior(&prior, &labels, cap)?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let post = cell.backend.posterior(&prior, &labels, cap)?;
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(post);
    }
    Ok(median(times))
}

/// Runs every cell sequentially.
pub fn bench_posterior(grid: &BenchGrid, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    if grid.reps < 1 {
        return Err(Error::InvalidParams("need at least one repetition".into()));
    }
    let mut rows = Vec::with_capacity(grid.cells.len());
    for (i, cell) in grid.cells.iter().enumerate() {
        let t = time_cell(cell, grid.reps, grid.seed.wrapping_add(i as u64))?;
        let row = BenchRow {
            backend: cell.backend,
            len: cell.len,
            labels: cell.labels,
            ratio: cell.ratio,
            median_seconds: t,
        };
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("backend,T_prime,labels,ratio,median_seconds\n");
    for r in rows {
        out += &format!("{},{},{},{},{}\n", r.backend, r.len, r.labels, r.ratio, r.median_seconds);
    }
    out
}

/// Series for the three runtime panels, one per backend.
pub fn fig7_json(rows: &[BenchRow]) -> serde_json::Value {
    let series = |f: &dyn Fn(&BenchRow) -> Option<f64>| {
        let mut out = serde_json::Map::new();
        for b in BACKENDS {
            let pts: Vec<_> = rows
                .iter()
                .filter(|r| r.backend == b)
                .filter_map(|r| f(r).map(|x| json!([x, r.median_seconds])))
                .collect();
            out.insert(b.to_string(), json!(pts));
        }
        serde_json::Value::Object(out)
    };
    json!({
        "length": {
            "x": "T_prime", "y": "seconds", "fixed": {"labels": 2, "ratio": 0.2},
            "series": series(&|r| (r.labels == 2 && r.ratio == 0.2).then_some(r.len as f64)),
        },
        "labels": {
            "x": "labels", "y": "seconds", "fixed": {"T_prime": 1000, "ratio": 0.2},
            "series": series(&|r| (r.len == 1000 && r.ratio == 0.2).then_some(r.labels as f64)),
        },
        "ratio": {
            "x": "ratio", "y": "seconds", "fixed": {"T_prime": 5000, "labels": 2},
            "series": series(&|r| (r.len == 5000 && r.labels == 2).then_some(r.ratio)),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 points for a scaling fit, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::Range("scaling fit needs positive values".into()));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Range("scaling fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ScalingFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Points `(x, seconds)` of one backend with the other axes held fixed.
pub fn select_axis(rows: &[BenchRow], backend: Backend, axis: &str, len: usize, labels: usize, ratio: f64) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.backend == backend)
        .filter_map(|r| match axis {
            "len" if r.labels == labels && r.ratio == ratio => Some((r.len as f64, r.median_seconds)),
            "labels" if r.len == len && r.ratio == ratio => Some((r.labels as f64, r.median_seconds)),
            "ratio" if r.len == len && r.labels == labels => Some((r.ratio, r.median_seconds)),
            _ => None,
        })
        .collect()
}
