//! Small statistical toolbox: summaries, homogeneity and uniformity tests,
//! least squares and ratio bootstrap.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn from_slice(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: 0.0, se: 0.0, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }

    /// Standard deviation of the sample.
    pub fn sd(&self) -> f64 {
        self.se * (self.n as f64).sqrt()
    }
}

/// Result of a two-sample chi-squared homogeneity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of categories before pooling.
    pub categories: usize,
    /// Number of buckets after pooling sparse categories.
    pub buckets: usize,
}

/// Chi-squared test that two categorical samples share one distribution.
///
/// Categories are pooled smallest-first until every bucket's expected count is
/// at least 5 on both sides.
pub fn chi_squared_homogeneity(a: &BTreeMap<u64, u64>, b: &BTreeMap<u64, u64>) -> Result<ChiSquaredTest> {
    let n_a: u64 = a.values().sum();
    let n_b: u64 = b.values().sum();
    if n_a < 10 || n_b < 10 {
        return Err(Error::InsufficientData(format!(
            "chi-squared needs at least 10 observations per sample (got {n_a}, {n_b})"
        )));
    }
    let mut keys: Vec<u64> = a.keys().chain(b.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let categories = keys.len();
    let mut buckets: Vec<(u64, u64)> = keys
        .iter()
        .map(|k| (a.get(k).copied().unwrap_or(0), b.get(k).copied().unwrap_or(0)))
        .collect();
    let total = (n_a + n_b) as f64;
    let (frac_a, frac_b) = (n_a as f64 / total, n_b as f64 / total);
    let min_expected = |(x, y): (u64, u64)| ((x + y) as f64) * frac_a.min(frac_b);
    // Stable order: ascending total, ties by original key order.
    buckets.sort_by_key(|&(x, y)| x + y);
    while buckets.len() > 1 && min_expected(buckets[0]) < 5.0 {
        let (x0, y0) = buckets.remove(0);
        buckets[0].0 += x0;
        buckets[0].1 += y0;
        let first = buckets.remove(0);
        let pos = buckets.partition_point(|&(x, y)| x + y < first.0 + first.1);
        buckets.insert(pos, first);
    }
    if buckets.len() < 2 {
        return Ok(ChiSquaredTest { statistic: 0.0, dof: 0, p_value: 1.0, categories, buckets: buckets.len() });
    }
    let statistic: f64 = buckets
        .iter()
        .map(|&(x, y)| {
            let t = (x + y) as f64;
            let (ea, eb) = (t * frac_a, t * frac_b);
            (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb
        })
        .sum();
    let dof = buckets.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::numeric(e.to_string()))?;
    let p_value = dist.sf(statistic);
    Ok(ChiSquaredTest { statistic, dof, p_value, categories, buckets: buckets.len() })
}

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1).
/// Returns `(D, p_value)` using the asymptotic law with Stephens' correction.
pub fn ks_uniform(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 5 {
        return Err(Error::InsufficientData("KS test needs at least 5 samples".into()));
    }
    let mut u = samples.to_vec();
    u.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / nf - x).max(x - i as f64 / nf))
        .fold(0.0, f64::max);
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok((d, kolmogorov_sf(lambda)))
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Ordinary least squares fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub points: usize,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::InsufficientData("least squares needs two or more paired points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::numeric("degenerate abscissae in least squares"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum::<f64>() / nf).sqrt();
    Ok(LinearFit { slope, intercept, residual, points: n })
}

/// Ratio-of-sums estimator `sum(num) / sum(den)` with a nonparametric
/// bootstrap standard error over the paired observations.
pub fn bootstrap_ratio(num: &[f64], den: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let n = num.len();
    let point = num.iter().sum::<f64>() / den.iter().sum::<f64>();
    if n < 2 {
        return (point, f64::INFINITY);
    }
    let mut rng = rng::stream(seed, Domain::Bootstrap, n as u64);
    let mut draws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let (mut sn, mut sd) = (0.0, 0.0);
        for _ in 0..n {
            let i = rng.random_range(0..n);
            sn += num[i];
            sd += den[i];
        }
        draws.push(sn / sd);
    }
    (point, MeanSe::from_slice(&draws).sd())
}
