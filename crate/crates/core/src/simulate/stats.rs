//! Summary statistics over simulated paths: percentile bootstrap bands,
//! terminal moments with standard errors, and the two-sample distribution
//! and roughness statistics used by the scheme cross-checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Mean curve with percentile bootstrap bands. The bands are widened to
/// include the sample mean on the rare resample draws where the percentile
/// estimate would exclude it, so lower <= mean <= upper always holds.
#[derive(Debug, Clone)]
pub struct McSummary {
    times: Vec<f64>,
    mean: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    level: f64,
    n_resamples: usize,
}

impl McSummary {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn n_resamples(&self) -> usize {
        self.n_resamples
    }
}

/// Terminal-node sample moments with standard errors, including the mean
/// square distance to a reference target.
#[derive(Debug, Clone, Copy)]
pub struct TerminalStats {
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub mean_square_gap: f64,
    pub se_gap: f64,
    pub target: f64,
    pub n: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap of the mean curve: resample whole paths with
/// replacement, average each resample, and take per-node percentiles at
/// the requested coverage level. The seed drives a dedicated RNG stream
/// per resample, so results are thread-count independent.
pub fn bootstrap_bands(
    matrix: &[Vec<f64>],
    times: &[f64],
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<McSummary> {
    let n_paths = matrix.len();
    if n_paths < 2 {
        return Err(Error::InvalidParameter(
            "bootstrap bands need at least two paths".into(),
        ));
    }
    let n_nodes = times.len();
    if n_nodes == 0 || matrix.iter().any(|row| row.len() != n_nodes) {
        return Err(Error::GridMismatch(
            "every path must have one value per time node".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) || n_resamples < 2 {
        return Err(Error::InvalidParameter(format!(
            "need coverage in (0, 1) and at least two resamples, got {level} and {n_resamples}"
        )));
    }
    let mut mean = vec![0.0f64; n_nodes];
    for row in matrix {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_paths as f64;
    }
    let resample_means: Vec<Vec<f64>> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut acc = vec![0.0f64; n_nodes];
            for _ in 0..n_paths {
                let row = &matrix[rng.random_range(0..n_paths)];
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
            for a in &mut acc {
                *a /= n_paths as f64;
            }
            acc
        })
        .collect();
    let alpha = 0.5 * (1.0 - level);
    let mut lower = Vec::with_capacity(n_nodes);
    let mut upper = Vec::with_capacity(n_nodes);
    let mut column = vec![0.0f64; n_resamples];
    for node in 0..n_nodes {
        for (c, row) in column.iter_mut().zip(&resample_means) {
            *c = row[node];
        }
        column.sort_unstable_by(f64::total_cmp);
        lower.push(quantile(&column, alpha).min(mean[node]));
        upper.push(quantile(&column, 1.0 - alpha).max(mean[node]));
    }
    Ok(McSummary {
        times: times.to_vec(),
        mean,
        lower,
        upper,
        level,
        n_resamples,
    })
}

pub fn terminal_stats(sample: &[f64], target: f64) -> Result<TerminalStats> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "terminal statistics need at least two observations".into(),
        ));
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let variance = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let gaps: Vec<f64> = sample.iter().map(|x| (x - target).powi(2)).collect();
    let mean_square_gap = gaps.iter().sum::<f64>() / nf;
    let gap_var = gaps
        .iter()
        .map(|g| (g - mean_square_gap).powi(2))
        .sum::<f64>()
        / (nf - 1.0);
    Ok(TerminalStats {
        mean,
        variance,
        se_mean: (variance / nf).sqrt(),
        mean_square_gap,
        se_gap: (gap_var / nf).sqrt(),
        target,
        n,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic: the sup distance between the
/// empirical distribution functions, tie-safe.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter(
            "the distribution comparison needs two nonempty samples".into(),
        ));
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_unstable_by(f64::total_cmp);
    xb.sort_unstable_by(f64::total_cmp);
    let (n, m) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let v = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= v {
            i += 1;
        }
        while j < xb.len() && xb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Sum of |increment|^p along a sampled path; larger values at fixed step
/// size indicate rougher paths.
pub fn p_variation(path: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "variation order must be positive and finite, got {p}"
        )));
    }
    if path.len() < 2 {
        return Err(Error::InvalidParameter(
            "variation needs at least two nodes".into(),
        ));
    }
    Ok(path
        .windows(2)
        .map(|w| (w[1] - w[0]).abs().powf(p))
        .sum())
}
