//! The reinforced process `Y` (VRJP(c): jump to a neighbour `u` at rate
//! `L_u(t)`), its time change `D(t) = sum_x (L_x(t)^2 - c^2)`, and the quenched
//! jump process `Z` with rates `1/(2 A_x)` towards the parent and `A_z / 2`
//! towards a child `z`.

mod mixture;

pub use mixture::{
    mixture_equivalence_test, skeleton_y, skeleton_z, EquivalenceReport, FixedTree, MixingLaw, MAX_SKELETON,
};

use crate::error::{Error, Result};
use crate::gw_env::{EnvTree, VertexId};
use crate::rng::exponential;
use crate::stats::MeanSe;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

/// A rooted tree seen as a graph; the root has no parent.
pub trait Topology {
    type Node: Copy + Eq + Hash + Debug;
    fn root(&self) -> Self::Node;
    fn parent(&self, v: Self::Node) -> Result<Option<Self::Node>>;
    /// Appends the children of `v` to `out`.
    fn children_into(&mut self, v: Self::Node, out: &mut Vec<Self::Node>) -> Result<()>;
    fn depth(&self, v: Self::Node) -> Result<i32>;
}

impl Topology for EnvTree {
    type Node = VertexId;

    fn root(&self) -> VertexId {
        VertexId::ROOT
    }

    fn parent(&self, v: VertexId) -> Result<Option<VertexId>> {
        if v == VertexId::ROOT {
            return Ok(None);
        }
        EnvTree::parent(self, v)
    }

    fn children_into(&mut self, v: VertexId, out: &mut Vec<VertexId>) -> Result<()> {
        out.extend(self.children(v)?.iter());
        Ok(())
    }

    fn depth(&self, v: VertexId) -> Result<i32> {
        self.generation(v)
    }
}

/// Local times `L_x(t) = c + occupation time of x`, stored for visited
/// vertices only.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeState<N: Eq + Hash> {
    c: f64,
    visited: HashMap<N, f64>,
    current: N,
    time: f64,
}

impl<N: Copy + Eq + Hash> LocalTimeState<N> {
    pub fn new(c: f64, start: N) -> Self {
        Self { c, visited: HashMap::new(), current: start, time: 0.0 }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn local_time(&self, v: N) -> f64 {
        self.visited.get(&v).copied().unwrap_or(self.c)
    }

    pub fn current(&self) -> N {
        self.current
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn visited(&self) -> impl Iterator<Item = (&N, &f64)> {
        self.visited.iter()
    }

    /// Stays at the current vertex for `s`; returns the local time before.
    fn occupy(&mut self, s: f64) -> f64 {
        let c = self.c;
        let l = self.visited.entry(self.current).or_insert(c);
        let before = *l;
        *l += s;
        self.time += s;
        before
    }

    /// `sum_x (L_x^2 - c^2)` recomputed from the table.
    pub fn recompute_d(&self) -> f64 {
        self.visited.values().map(|l| (l - self.c) * (l + self.c)).sum()
    }
}

/// Incremental `D(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeChangeAccumulator {
    d: f64,
}

impl TimeChangeAccumulator {
    pub fn value(&self) -> f64 {
        self.d
    }

    /// A sojourn of length `s` at a vertex whose local time was `l`.
    pub fn add_sojourn(&mut self, l: f64, s: f64) {
        self.d += s * (2.0 * l + s);
    }
}

/// A continuous-time nearest-neighbour path: the process sits at `nodes[k]`
/// on `[times[k], times[k+1])`, and the last position until `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPath<N> {
    pub times: Vec<f64>,
    pub nodes: Vec<N>,
    pub depths: Vec<i32>,
    pub t_end: f64,
    /// Stopped by the jump cap rather than by `t_end`.
    pub truncated: bool,
}

impl<N: Copy> ContinuousPath<N> {
    pub fn jumps(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn depth_at(&self, t: f64) -> i32 {
        let k = self.times.partition_point(|&s| s <= t).max(1);
        self.depths[k - 1]
    }

    /// `|X_T| / T` with a batch-means standard error over 20 equal time windows.
    pub fn speed(&self) -> MeanSe {
        let batches = 20;
        let w = self.t_end / batches as f64;
        let rates: Vec<f64> = (0..batches)
            .map(|b| (self.depth_at(w * (b + 1) as f64) - self.depth_at(w * b as f64)) as f64 / w)
            .collect();
        let se = MeanSe::from_slice(&rates).se;
        let end = *self.depths.last().unwrap_or(&0);
        MeanSe { mean: end.max(0) as f64 / self.t_end, se, n: self.jumps() }
    }
}

/// Output of a direct VRJP simulation.
#[derive(Debug, Clone)]
pub struct VrjpRun<N: Eq + Hash> {
    pub path: ContinuousPath<N>,
    /// `D` at each entry of `path.times`, then at `t_end`.
    pub d_at_jumps: Vec<f64>,
    pub state: LocalTimeState<N>,
    pub d: TimeChangeAccumulator,
    /// Smallest `D(t) / t` over the jump times.
    pub min_d_ratio: f64,
}

impl<N: Copy + Eq + Hash> VrjpRun<N> {
    /// The path of `Z_t = Y_{D^{-1}(t)}`; the same positions with times `D(t_k)`.
    pub fn time_changed(&self) -> ContinuousPath<N> {
        ContinuousPath {
            times: self.d_at_jumps[..self.path.times.len()].to_vec(),
            nodes: self.path.nodes.clone(),
            depths: self.path.depths.clone(),
            t_end: self.d.value(),
            truncated: self.path.truncated,
        }
    }
}

fn neighbours<T: Topology>(topo: &mut T, v: T::Node, out: &mut Vec<T::Node>) -> Result<()> {
    out.clear();
    if let Some(p) = topo.parent(v)? {
        out.push(p);
    }
    topo.children_into(v, out)
}

/// Event-driven VRJP(c) from the root until `t_max` (or `max_jumps` jumps).
/// Between jumps the neighbours' local times are frozen, so the holding time
/// is exactly exponential with rate `sum_u L_u`.
pub fn simulate_vrjp<T: Topology, R: Rng + ?Sized>(
    topo: &mut T,
    c: f64,
    t_max: f64,
    max_jumps: usize,
    rng: &mut R,
) -> Result<VrjpRun<T::Node>> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("VRJP needs c > 0, got {c}")));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::domain(format!("VRJP needs a positive finite horizon, got {t_max}")));
    }
    let root = topo.root();
    let mut state = LocalTimeState::new(c, root);
    let mut acc = TimeChangeAccumulator::default();
    let mut path = ContinuousPath { times: vec![0.0], nodes: vec![root], depths: vec![topo.depth(root)?], t_end: t_max, truncated: false };
    let mut d_at_jumps = vec![0.0];
    let mut min_ratio = f64::INFINITY;
    let mut nbrs = Vec::new();
    let mut rates = Vec::new();
    loop {
        let v = state.current;
        neighbours(topo, v, &mut nbrs)?;
        rates.clear();
        rates.extend(nbrs.iter().map(|&u| state.local_time(u)));
        let total: f64 = rates.iter().sum();
        let s = if total > 0.0 { exponential(rng, total) } else { f64::INFINITY };
        if state.time + s >= t_max || path.jumps() >= max_jumps {
            let rest = t_max - state.time;
            if path.jumps() >= max_jumps {
                path.truncated = true;
                path.t_end = state.time;
            } else {
                let l = state.occupy(rest);
                acc.add_sojourn(l, rest);
            }
            break;
        }
        let l = state.occupy(s);
        acc.add_sojourn(l, s);
        let mut u = rng.random::<f64>() * total;
        let mut next = *nbrs.last().expect("positive total rate implies a neighbour");
        for (k, &r) in rates.iter().enumerate() {
            if u < r {
                next = nbrs[k];
                break;
            }
            u -= r;
        }
        state.current = next;
        path.times.push(state.time);
        path.nodes.push(next);
        path.depths.push(topo.depth(next)?);
        d_at_jumps.push(acc.value());
        min_ratio = min_ratio.min(acc.value() / state.time);
    }
    d_at_jumps.push(acc.value());
    Ok(VrjpRun { path, d_at_jumps, state, d: acc, min_d_ratio: min_ratio })
}

/// Quenched jump rates of `Z` on the enlarged tree: towards the parent
/// `1/(2 A_v)` and towards each child `A_z / 2`; the super-root jumps to the
/// root at rate `A_root / 2`.
pub fn quenched_rates(tree: &mut EnvTree, v: VertexId) -> Result<Vec<(VertexId, f64)>> {
    if v == VertexId::SUPER_ROOT {
        return Ok(vec![(VertexId::ROOT, 0.5 * tree.env_value(VertexId::ROOT)?)]);
    }
    let kids = tree.children(v)?;
    let mut out = Vec::with_capacity(kids.len() + 1);
    out.push((EnvTree::parent(tree, v)?.expect("non-super-root vertices have parents"), 0.5 / tree.env_value(v)?));
    for z in kids.iter() {
        out.push((z, 0.5 * tree.env_value(z)?));
    }
    Ok(out)
}

/// Continuous-time quenched `Z` from the root until `t_max` or `max_jumps`.
pub fn simulate_z_quenched<R: Rng + ?Sized>(
    tree: &mut EnvTree,
    t_max: f64,
    max_jumps: usize,
    rng: &mut R,
) -> Result<ContinuousPath<VertexId>> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::domain(format!("Z needs a positive finite horizon, got {t_max}")));
    }
    let mut v = VertexId::ROOT;
    let mut t = 0.0;
    let mut path = ContinuousPath { times: vec![0.0], nodes: vec![v], depths: vec![0], t_end: t_max, truncated: false };
    loop {
        let rates = match quenched_rates(tree, v) {
            Ok(r) => r,
            Err(Error::Capacity(_)) => {
                path.truncated = true;
                path.t_end = t;
                break;
            }
            Err(e) => return Err(e),
        };
        let total: f64 = rates.iter().map(|r| r.1).sum();
        let s = exponential(rng, total);
        if t + s >= t_max {
            break;
        }
        if path.jumps() >= max_jumps {
            path.truncated = true;
            path.t_end = t;
            break;
        }
        t += s;
        let mut u = rng.random::<f64>() * total;
        let mut next = rates.last().expect("every vertex has a neighbour").0;
        for &(z, r) in &rates {
            if u < r {
                next = z;
                break;
            }
            u -= r;
        }
        v = next;
        path.times.push(t);
        path.nodes.push(v);
        path.depths.push(tree.generation(v)?);
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedChainReport {
    pub v_y: MeanSe,
    pub v_z: MeanSe,
    /// `v_Y - 2 c v_Z`
    pub margin: f64,
    pub joint_se: f64,
    /// `margin >= -3 joint_se`
    pub holds: bool,
}

/// Compares speed estimates of `Y` and `Z` against `v_Y >= 2 c v_Z`.
pub fn speed_chain(v_y: MeanSe, v_z: MeanSe, c: f64) -> SpeedChainReport {
    let margin = v_y.mean - 2.0 * c * v_z.mean;
    let joint_se = (v_y.se.powi(2) + (2.0 * c * v_z.se).powi(2)).sqrt();
    SpeedChainReport { v_y, v_z, margin, joint_se, holds: margin >= -3.0 * joint_se }
}

/// Pools per-replica path speeds into one mean with its standard error.
pub fn pooled_speed<N: Copy>(paths: &[ContinuousPath<N>]) -> MeanSe {
    let speeds: Vec<f64> = paths.iter().map(|p| p.speed().mean).collect();
    MeanSe::from_slice(&speeds)
}
