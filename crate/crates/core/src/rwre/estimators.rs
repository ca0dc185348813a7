use super::{escapes, Trajectory};
use crate::error::{Error, Result};
use crate::gw_env::{EnvTree, VertexId};
use crate::rng::{combine, stream, Domain};
use crate::stats::{bootstrap_ratio, least_squares, MeanSe};
use serde::{Deserialize, Serialize};

/// Censored regeneration times: `k >= 1` with `k <= len - 1 - buffer` such
/// that `eta_k` is in a fresh generation, has at least two children, and the
/// walk stays at generation `>= |eta_k|` for the rest of the observed run.
pub fn detect_regenerations(tr: &Trajectory, buffer: usize) -> Vec<usize> {
    let gens = tr.generations();
    let len = gens.len();
    if len < 2 || buffer >= len - 1 {
        return Vec::new();
    }
    let limit = len - 1 - buffer;
    let mut suffix_min = vec![i32::MAX; len + 1];
    for k in (0..len).rev() {
        suffix_min[k] = suffix_min[k + 1].min(gens[k]);
    }
    let kids = tr.child_counts();
    let mut best = gens[0];
    let mut out = Vec::new();
    for k in 1..=limit {
        let g = gens[k];
        if g > best {
            best = g;
            if kids[k] >= 2 && suffix_min[k + 1] >= g {
                out.push(k);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedMethod {
    EndpointRatio,
    RegenerationRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    pub estimate: f64,
    pub se: f64,
    pub method: SpeedMethod,
    /// Steps (endpoint) or regeneration blocks (regeneration) used.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub endpoint: SpeedEstimate,
    pub regeneration: Option<SpeedEstimate>,
    pub regenerations: usize,
    /// Fewer than two regeneration blocks were found.
    pub no_regeneration: bool,
}

const MIN_STEPS: usize = 1000;
const BATCHES: usize = 20;
const BOOTSTRAP: usize = 200;

/// Endpoint estimator `|eta_n| / n` with a batch-means standard error, and the
/// regeneration ratio (generation gain per block over block length) with a
/// bootstrap standard error. The default 20% tail buffer applies.
pub fn estimate_speed(tr: &Trajectory) -> Result<SpeedReport> {
    estimate_speed_with_buffer(tr, tr.steps() / 5)
}

pub fn estimate_speed_with_buffer(tr: &Trajectory, buffer: usize) -> Result<SpeedReport> {
    let n = tr.steps();
    if n < MIN_STEPS {
        return Err(Error::InsufficientData(format!("speed estimation needs {MIN_STEPS} steps, got {n}")));
    }
    let gens = tr.generations();
    let batch = n / BATCHES;
    let batch_speeds: Vec<f64> = (0..BATCHES)
        .map(|b| (gens[(b + 1) * batch] - gens[b * batch]) as f64 / batch as f64)
        .collect();
    let endpoint = SpeedEstimate {
        estimate: (gens[n].unsigned_abs() as f64 / n as f64).clamp(0.0, 1.0),
        se: MeanSe::from_slice(&batch_speeds).se,
        method: SpeedMethod::EndpointRatio,
        n,
    };

    let regen = detect_regenerations(tr, buffer);
    let regeneration = if regen.len() >= 3 {
        let (gain, length): (Vec<f64>, Vec<f64>) = regen
            .windows(2)
            .map(|w| ((gens[w[1]] - gens[w[0]]) as f64, (w[1] - w[0]) as f64))
            .unzip();
        let (estimate, se) = bootstrap_ratio(&gain, &length, BOOTSTRAP, combine(n as u64, regen.len() as u64));
        Some(SpeedEstimate { estimate, se, method: SpeedMethod::RegenerationRatio, n: gain.len() })
    } else {
        None
    };
    Ok(SpeedReport { endpoint, no_regeneration: regeneration.is_none(), regeneration, regenerations: regen.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points: usize,
}

/// Least-squares slope of `log |eta_n|` against `log n` over the last two
/// decades of the run, sampled at 50 geometrically spaced times per decade.
pub fn estimate_exponent(tr: &Trajectory) -> Result<ExponentFit> {
    let n_max = tr.steps();
    if n_max < 100 {
        return Err(Error::InsufficientData(format!("exponent fit needs two decades of steps, got {n_max}")));
    }
    let gens = tr.generations();
    let lo = (n_max as f64 / 100.0).ln();
    let hi = (n_max as f64).ln();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut last = 0usize;
    for j in 0..=100 {
        let n = ((lo + (hi - lo) * j as f64 / 100.0).exp().round() as usize).clamp(1, n_max);
        if n == last {
            continue;
        }
        last = n;
        let g = gens[n];
        if g > 0 {
            xs.push((n as f64).ln());
            ys.push((g as f64).ln());
        }
    }
    let fit = least_squares(&xs, &ys)?;
    Ok(ExponentFit { slope: fit.slope, intercept: fit.intercept, residual: fit.residual, points: fit.points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub p: f64,
    pub se: f64,
    pub n: usize,
}

impl Proportion {
    fn from_counts(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self { p, se: (p * (1.0 - p) / n as f64).sqrt(), n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    /// Escape frequency from `v` itself.
    pub direct: Proportion,
    /// `S / (1 + S)` with `S = A_v sum_y A_y beta(y)` from child estimates;
    /// absent for a leaf.
    pub recursion: Option<Proportion>,
    /// No escape was observed; the configuration looks recurrent.
    pub warning: bool,
}

fn escape_frequency(tree: &mut EnvTree, v: VertexId, replicas: usize, horizon: u64, seed: u64) -> Result<Proportion> {
    let key = tree.digest(v)?;
    let mut hits = 0;
    for r in 0..replicas {
        let mut rng = stream(seed, Domain::Beta, combine(key, r as u64));
        if escapes(tree, v, horizon, &mut rng)? {
            hits += 1;
        }
    }
    Ok(Proportion::from_counts(hits, replicas))
}

/// Monte Carlo estimate of `beta(v) = P_v(never hit parent(v))`, truncated at
/// `horizon` steps, together with the value implied by the children's
/// estimates through the one-level recursion.
pub fn estimate_beta(tree: &mut EnvTree, v: VertexId, replicas: usize, horizon: u64, seed: u64) -> Result<BetaEstimate> {
    if replicas == 0 || horizon == 0 {
        return Err(Error::domain("beta estimation needs replicas and a horizon"));
    }
    let direct = escape_frequency(tree, v, replicas, horizon, seed)?;
    let kids: Vec<VertexId> = tree.children(v)?.iter().collect();
    let recursion = if kids.is_empty() {
        None
    } else {
        let av = tree.env_value(v)?;
        let mut s = 0.0;
        let mut var_s = 0.0;
        for y in kids {
            let ay = tree.env_value(y)?;
            let b = escape_frequency(tree, y, replicas, horizon, seed)?;
            s += av * ay * b.p;
            var_s += (av * ay * b.se).powi(2);
        }
        let p = s / (1.0 + s);
        Some(Proportion { p, se: var_s.sqrt() / (1.0 + s).powi(2), n: replicas })
    };
    Ok(BetaEstimate { warning: direct.p == 0.0, direct, recursion })
}
