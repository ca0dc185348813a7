//! Replica execution, result records and their persistence.

use crate::error::{Error, Result};
use crate::gw_env::EnvTree;
use crate::halfline::{oracle, HalflineEnv};
use crate::lab::classify::{classify, Classification};
use crate::lab::spec::{ExperimentKind, ExperimentSpec, DEFAULT_SITES, DEFAULT_SKELETON};
use crate::moments::{IgParams, MomentEngine};
use crate::rng::{combine, derive_seed, replica_stream, Domain};
use crate::rwre::{estimate_exponent, estimate_speed_with_buffer};
use crate::rwre::{run_walk, Trajectory, WalkConfig};
use crate::stats::{ks_uniform, MeanSe};
use crate::vrjp::{mixture_equivalence_test, MixingLaw};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Summary of one replica; the variant matches the experiment kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum ReplicaSummary {
    Speed {
        steps: usize,
        truncated: bool,
        endpoint: f64,
        endpoint_se: f64,
        regeneration: Option<f64>,
        regeneration_se: Option<f64>,
        regenerations: usize,
        max_generation: i32,
        final_generation: i32,
    },
    Exponent {
        steps: usize,
        truncated: bool,
        slope: f64,
        intercept: f64,
        residual: f64,
        max_generation: i32,
        /// `(n, |eta_n|)` at geometrically spaced times.
        trace: Vec<(u64, i32)>,
    },
    Equivalence {
        p_value: f64,
        statistic: f64,
        dof: usize,
        distinct_direct: usize,
        distinct_mixture: usize,
    },
    Oracle {
        sites: usize,
        max_hit_error: f64,
        max_green_rel_error: f64,
        max_exit_rel_error: f64,
        min_bound_margin: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaEntry {
    pub point: usize,
    pub index: u64,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<ReplicaSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub min: f64,
    pub max: f64,
}

impl Estimate {
    pub fn from_values(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let m = MeanSe::from_slice(xs);
        Some(Self {
            n: m.n,
            mean: m.mean,
            se: m.se,
            ci_low: m.mean - 1.96 * m.se,
            ci_high: m.mean + 1.96 * m.se,
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAggregate {
    pub point: usize,
    pub c: f64,
    pub ok: usize,
    pub failed: usize,
    pub metrics: BTreeMap<String, Estimate>,
    /// KS uniformity p-value of the equivalence p-values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_uniform_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema: u32,
    pub spec_hash: String,
    pub build: String,
    pub kind: ExperimentKind,
    pub spec: ExperimentSpec,
    pub classifications: Vec<Classification>,
    /// Sorted by `(point, index)`.
    pub replicas: Vec<ReplicaEntry>,
    pub aggregates: Vec<PointAggregate>,
}

impl ResultRecord {
    /// A record with no classifications and no replicas.
    pub fn empty(spec: ExperimentSpec) -> Result<Self> {
        Ok(Self {
            schema: spec.schema,
            spec_hash: spec.hash()?,
            build: BUILD_ID.to_string(),
            kind: spec.kind,
            spec,
            classifications: Vec::new(),
            replicas: Vec::new(),
            aggregates: Vec::new(),
        })
    }

    pub fn failed(&self) -> usize {
        self.replicas.iter().filter(|e| e.error.is_some()).count()
    }

    pub fn entry(&self, point: usize, index: u64) -> Option<&ReplicaEntry> {
        self.replicas.iter().find(|e| e.point == point && e.index == index)
    }

    pub fn aggregate(&self, point: usize) -> Option<&PointAggregate> {
        self.aggregates.iter().find(|a| a.point == point)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::usage(format!("cannot read record {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Directory of this record below `root`: the first 16 hex digits of the spec hash.
    pub fn directory(&self, root: impl AsRef<Path>) -> PathBuf {
        root.as_ref().join(&self.spec_hash[..16])
    }

    /// Writes `<root>/<hash16>/record.json`, replacing any previous record of the same spec.
    pub fn persist(&self, root: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = self.directory(root);
        std::fs::create_dir_all(&dir)?;
        let path = dir.join("record.json");
        let tmp = dir.join("record.json.tmp");
        std::fs::write(&tmp, self.to_json()?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }

    fn recompute_aggregates(&mut self) -> Result<()> {
        self.replicas.sort_by_key(|e| (e.point, e.index));
        self.aggregates = match self.kind {
            ExperimentKind::Classify | ExperimentKind::PhaseScan => Vec::new(),
            _ => {
                let cs = self.spec.c_values()?;
                cs.iter().enumerate().map(|(p, &c)| aggregate_point(p, c, &self.replicas)).collect()
            }
        };
        Ok(())
    }
}

fn aggregate_point(point: usize, c: f64, entries: &[ReplicaEntry]) -> PointAggregate {
    let mine: Vec<&ReplicaEntry> = entries.iter().filter(|e| e.point == point).collect();
    let failed = mine.iter().filter(|e| e.error.is_some()).count();
    let mut series: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut push = |k: &'static str, v: f64| series.entry(k).or_default().push(v);
    for s in mine.iter().filter_map(|e| e.summary.as_ref()) {
        match s {
            ReplicaSummary::Speed { endpoint, regeneration, .. } => {
                push("endpoint-speed", *endpoint);
                if let Some(r) = regeneration {
                    push("regeneration-speed", *r);
                }
            }
            ReplicaSummary::Exponent { slope, .. } => push("slope", *slope),
            ReplicaSummary::Equivalence { p_value, .. } => push("p-value", *p_value),
            ReplicaSummary::Oracle { max_hit_error, max_green_rel_error, max_exit_rel_error, min_bound_margin, .. } => {
                push("hit-error", *max_hit_error);
                push("green-rel-error", *max_green_rel_error);
                push("exit-rel-error", *max_exit_rel_error);
                push("bound-margin", *min_bound_margin);
            }
        }
    }
    let ks_uniform_p = series.get("p-value").filter(|p| p.len() >= 2).and_then(|p| ks_uniform(p).ok()).map(|r| r.1);
    let metrics = series
        .iter()
        .filter_map(|(k, v)| Estimate::from_values(v).map(|e| (k.to_string(), e)))
        .collect();
    PointAggregate { point, c, ok: mine.len() - failed, failed, metrics, ks_uniform_p }
}

/// Combines records of the same spec holding disjoint (or identical) replicas.
/// The result does not depend on the order of merging.
pub fn merge(a: &ResultRecord, b: &ResultRecord) -> Result<ResultRecord> {
    if a.spec_hash != b.spec_hash {
        return Err(Error::usage(format!("cannot merge records of different specs ({} vs {})", a.spec_hash, b.spec_hash)));
    }
    let mut out = a.clone();
    if out.classifications.is_empty() {
        out.classifications = b.classifications.clone();
    }
    let mut by_key: BTreeMap<(usize, u64), ReplicaEntry> =
        a.replicas.iter().map(|e| ((e.point, e.index), e.clone())).collect();
    for e in &b.replicas {
        match by_key.get(&(e.point, e.index)) {
            Some(prev) if prev != e => {
                return Err(Error::usage(format!("replica ({}, {}) differs between records", e.point, e.index)));
            }
            Some(_) => {}
            None => {
                by_key.insert((e.point, e.index), e.clone());
            }
        }
    }
    out.replicas = by_key.into_values().collect();
    out.recompute_aggregates()?;
    Ok(out)
}

/// Number of replica entries per point for this spec.
pub fn replica_count(spec: &ExperimentSpec) -> Result<u64> {
    Ok(match spec.kind {
        ExperimentKind::Classify | ExperimentKind::PhaseScan => 0,
        ExperimentKind::VrjpEquivalence => spec.repetitions.unwrap_or(1) as u64,
        _ => spec.replicas()? as u64,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultRecord> {
    let n = replica_count(spec)?;
    run_replicas(spec, 0..n)
}

/// Runs the given replica indices at every point of the spec. Replica `i` of
/// point `p` draws only from streams keyed by `(seed, p, i)`.
pub fn run_replicas(spec: &ExperimentSpec, indices: std::ops::Range<u64>) -> Result<ResultRecord> {
    spec.validate()?;
    let mut record = ResultRecord::empty(spec.clone())?;
    match spec.kind {
        ExperimentKind::Classify | ExperimentKind::PhaseScan => {
            record.classifications =
                spec.scan_points()?.iter().map(|(c, law)| classify(law, *c)).collect::<Result<Vec<_>>>()?;
        }
        _ => {
            let cs = spec.c_values()?;
            if matches!(spec.kind, ExperimentKind::RwreSpeed | ExperimentKind::Exponent) {
                record.classifications =
                    cs.iter().map(|&c| classify(&spec.law()?, c)).collect::<Result<Vec<_>>>()?;
            }
            let jobs: Vec<(usize, f64, u64)> =
                cs.iter().enumerate().flat_map(|(p, &c)| indices.clone().map(move |i| (p, c, i))).collect();
            record.replicas = jobs
                .par_iter()
                .map(|&(point, c, index)| {
                    let (summary, error) = match run_one(spec, point, c, index) {
                        Ok(s) => (Some(s), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    ReplicaEntry { point, index, c, summary, error }
                })
                .collect();
        }
    }
    record.recompute_aggregates()?;
    Ok(record)
}

/// The environment, trajectory and regeneration buffer of one walk replica,
/// exactly as [`run_experiment`] draws them.
pub fn replica_walk(spec: &ExperimentSpec, point: usize, c: f64, index: u64) -> Result<(EnvTree, Trajectory, u64)> {
    if !matches!(spec.kind, ExperimentKind::RwreSpeed | ExperimentKind::Exponent) {
        return Err(Error::usage(format!("{} experiments have no walk replicas", spec.kind.as_str())));
    }
    let key = combine(point as u64, index);
    let steps = spec.steps()?;
    let buffer = spec.horizon.unwrap_or(steps / 5);
    let mut tree = EnvTree::new(spec.law()?, IgParams::new(c)?, derive_seed(spec.seed, Domain::Tree, key));
    let cfg = WalkConfig { max_steps: steps, buffer, seed: derive_seed(spec.seed, Domain::Walk, key) };
    let tr = run_walk(&mut tree, &cfg)?;
    Ok((tree, tr, buffer))
}

fn run_one(spec: &ExperimentSpec, point: usize, c: f64, index: u64) -> Result<ReplicaSummary> {
    let key = combine(point as u64, index);
    match spec.kind {
        ExperimentKind::RwreSpeed | ExperimentKind::Exponent => {
            let (_, tr, buffer) = replica_walk(spec, point, c, index)?;
            if spec.kind == ExperimentKind::RwreSpeed {
                let r = estimate_speed_with_buffer(&tr, buffer as usize)?;
                Ok(ReplicaSummary::Speed {
                    steps: tr.steps(),
                    truncated: tr.is_truncated(),
                    endpoint: r.endpoint.estimate,
                    endpoint_se: r.endpoint.se,
                    regeneration: r.regeneration.map(|e| e.estimate),
                    regeneration_se: r.regeneration.map(|e| e.se),
                    regenerations: r.regenerations,
                    max_generation: tr.max_generation(),
                    final_generation: tr.generations()[tr.steps()],
                })
            } else {
                let fit = estimate_exponent(&tr)?;
                Ok(ReplicaSummary::Exponent {
                    steps: tr.steps(),
                    truncated: tr.is_truncated(),
                    slope: fit.slope,
                    intercept: fit.intercept,
                    residual: fit.residual,
                    max_generation: tr.max_generation(),
                    trace: geometric_trace(tr.generations()),
                })
            }
        }
        ExperimentKind::VrjpEquivalence => {
            let tree = spec.fixed_tree()?;
            let r = mixture_equivalence_test(
                &tree,
                c,
                spec.skeleton.unwrap_or(DEFAULT_SKELETON),
                spec.replicas()?,
                spec.mixing.unwrap_or(MixingLaw::InverseGaussian),
                derive_seed(spec.seed, Domain::Mixture, key),
            )?;
            Ok(ReplicaSummary::Equivalence {
                p_value: r.test.p_value,
                statistic: r.test.statistic,
                dof: r.test.dof,
                distinct_direct: r.distinct_direct,
                distinct_mixture: r.distinct_mixture,
            })
        }
        ExperimentKind::HalflineOracle => {
            let engine = MomentEngine::for_c(c)?;
            let mut rng = replica_stream(spec.seed, Domain::Halfline, key);
            oracle_replica(&engine, spec.sites.unwrap_or(DEFAULT_SITES), &mut rng)
        }
        ExperimentKind::Classify | ExperimentKind::PhaseScan => Err(Error::usage("classification has no replicas")),
    }
}

/// `(n, |eta_n|)` at 20 points per decade, plus the final time.
fn geometric_trace(gens: &[i32]) -> Vec<(u64, i32)> {
    let last = gens.len() as u64 - 1;
    let mut out: Vec<(u64, i32)> = Vec::new();
    let mut k = 0;
    loop {
        let n = 10f64.powf(k as f64 / 20.0).round() as u64;
        if n > last {
            break;
        }
        if out.last().is_none_or(|p| p.0 != n) {
            out.push((n, gens[n as usize].abs()));
        }
        k += 1;
    }
    if out.last().is_none_or(|p| p.0 != last) {
        out.push((last, gens[last as usize].abs()));
    }
    out
}

fn rel_error(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

/// Closed forms against tridiagonal solves on a random environment with
/// `3..=max_sites` sites, plus the exit-time bound margins.
fn oracle_replica<R: Rng + ?Sized>(engine: &MomentEngine, max_sites: usize, rng: &mut R) -> Result<ReplicaSummary> {
    let sites = rng.random_range(3..=max_sites);
    let env = HalflineEnv::sample(engine, sites, rng)?;
    let n = sites as i64;
    let left = rng.random_range(-1..n - 1);
    let right = rng.random_range(left + 2..=n);
    let (mut hit, mut green, mut exit) = (0f64, 0f64, 0f64);
    for (l, r) in [(-1, n), (left, right)] {
        let h = oracle::hit_probabilities(&env, l, r)?;
        let t = oracle::exit_times(&env, l, r)?;
        for i in l + 1..r {
            let k = (i - l - 1) as usize;
            hit = hit.max((env.hit_prob_interval(i, l, r)? - h[k]).abs());
            exit = exit.max(rel_error(env.expected_exit_time(i, l, r)?, t[k]));
            green = green.max(rel_error(env.green_function(i, l, r)?, oracle::green(&env, i, l, r)?));
        }
    }
    let mut ys = [0usize; 3];
    loop {
        for y in ys.iter_mut() {
            *y = rng.random_range(0..=sites);
        }
        ys.sort_unstable();
        if ys[0] < ys[1] && ys[1] < ys[2] {
            break;
        }
    }
    let lambda: f64 = rng.random();
    let margin = env.s_lambda_bound_check(lambda, ys[0], ys[1], ys[2])?.min_margin();
    Ok(ReplicaSummary::Oracle {
        sites,
        max_hit_error: hit,
        max_green_rel_error: green,
        max_exit_rel_error: exit,
        min_bound_margin: margin,
    })
}
