//! Skeleton statistics comparing direct VRJP runs with the annealed mixture
//! of quenched jump processes on small fixed trees.

use super::Topology;
use crate::error::{Error, Result};
use crate::moments::{ig_sample_shape, IgParams};
use crate::rng::{combine, exponential, stream, Domain};
use crate::stats::{chi_squared_homogeneity, ChiSquaredTest};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub const MAX_SKELETON: usize = 8;
const MAX_VERTICES: usize = 20;
const MAX_DEPTH: usize = 4;
const BLOCK: usize = 4096;

/// A finite rooted tree given by parent pointers; vertex 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedTree {
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl FixedTree {
    /// `parents[0]` must be `None`; every other parent must precede its child.
    pub fn from_parents(parents: Vec<Option<usize>>) -> Result<Self> {
        if parents.first() != Some(&None) {
            return Err(Error::domain("vertex 0 must be the parentless root"));
        }
        let n = parents.len();
        let mut children = vec![Vec::new(); n];
        let mut depth = vec![0; n];
        for (v, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < v => {
                    children[*p].push(v);
                    depth[v] = depth[*p] + 1;
                }
                _ => return Err(Error::domain(format!("vertex {v} needs a parent with a smaller index"))),
            }
        }
        Ok(Self { parents, children, depth })
    }

    /// A path of `n` vertices hanging from the root.
    pub fn path(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("a path needs at least one vertex"));
        }
        Self::from_parents((0..n).map(|v| v.checked_sub(1)).collect())
    }

    /// A root with `k` leaves.
    pub fn star(k: usize) -> Result<Self> {
        Self::from_parents((0..=k).map(|v| (v > 0).then_some(0)).collect())
    }

    /// Complete binary tree of the given depth.
    pub fn binary(depth: usize) -> Result<Self> {
        let n = (1usize << (depth + 1)) - 1;
        Self::from_parents((0..n).map(|v| (v > 0).then(|| (v - 1) / 2)).collect())
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn parent_of(&self, v: usize) -> Option<usize> {
        self.parents[v]
    }

    pub fn children_of(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// SHA-256 of the parent list, hex encoded.
    pub fn description_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.parents {
            h.update(p.map_or(u64::MAX, |x| x as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[v].into_iter().chain(self.children[v].iter().copied())
    }
}

impl Topology for FixedTree {
    type Node = usize;

    fn root(&self) -> usize {
        0
    }

    fn parent(&self, v: usize) -> Result<Option<usize>> {
        self.parents.get(v).copied().ok_or_else(|| Error::domain(format!("no vertex {v}")))
    }

    fn children_into(&mut self, v: usize, out: &mut Vec<usize>) -> Result<()> {
        out.extend_from_slice(self.children.get(v).ok_or_else(|| Error::domain(format!("no vertex {v}")))?);
        Ok(())
    }

    fn depth(&self, v: usize) -> Result<i32> {
        Ok(self.depth[v] as i32)
    }
}

/// The law of the `A` values used for the mixture side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law", content = "value")]
pub enum MixingLaw {
    /// IG(1, c^2), as the representation requires.
    InverseGaussian,
    /// Every `A` fixed to a constant (a deliberately wrong mixture).
    Constant(f64),
}

fn encode(code: u64, v: usize, n: usize) -> u64 {
    code * (n as u64 + 1) + v as u64 + 1
}

/// First `k` jump targets of VRJP(c) from the root, encoded base `n + 1`.
/// The skeleton is unchanged by the time change to `Z`.
pub fn skeleton_y<R: Rng + ?Sized>(tree: &FixedTree, c: f64, k: usize, local: &mut Vec<f64>, rng: &mut R) -> u64 {
    let n = tree.len();
    local.clear();
    local.resize(n, c);
    let mut v = 0;
    let mut code = 0;
    for _ in 0..k {
        let total: f64 = tree.neighbours(v).map(|u| local[u]).sum();
        if total == 0.0 {
            break;
        }
        local[v] += exponential(rng, total);
        let mut x = rng.random::<f64>() * total;
        let mut next = v;
        for u in tree.neighbours(v) {
            next = u;
            if x < local[u] {
                break;
            }
            x -= local[u];
        }
        v = next;
        code = encode(code, v, n);
    }
    code
}

/// First `k` jump targets of the quenched process with environment `a`
/// (`a[0]` unused): rate `1/(2 a_v)` to the parent, `a_z / 2` to child `z`.
pub fn skeleton_z<R: Rng + ?Sized>(tree: &FixedTree, a: &[f64], k: usize, rng: &mut R) -> u64 {
    let n = tree.len();
    let rate = |v: usize, u: usize| if tree.parents[v] == Some(u) { 0.5 / a[v] } else { 0.5 * a[u] };
    let mut v = 0;
    let mut code = 0;
    for _ in 0..k {
        let total: f64 = tree.neighbours(v).map(|u| rate(v, u)).sum();
        if total == 0.0 {
            break;
        }
        let mut x = rng.random::<f64>() * total;
        let mut next = v;
        for u in tree.neighbours(v) {
            next = u;
            let r = rate(v, u);
            if x < r {
                break;
            }
            x -= r;
        }
        v = next;
        code = encode(code, v, n);
    }
    code
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub tree_hash: String,
    pub vertices: usize,
    pub c: f64,
    pub k: usize,
    pub replicas: usize,
    pub law: MixingLaw,
    pub distinct_direct: usize,
    pub distinct_mixture: usize,
    pub test: ChiSquaredTest,
}

fn merge(mut a: BTreeMap<u64, u64>, b: BTreeMap<u64, u64>) -> BTreeMap<u64, u64> {
    for (k, v) in b {
        *a.entry(k).or_default() += v;
    }
    a
}

fn count_skeletons<F>(replicas: usize, seed: u64, side: u64, f: F) -> BTreeMap<u64, u64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, &mut Vec<f64>) -> u64 + Sync,
{
    let blocks = replicas.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, Domain::Mixture, combine(side, b as u64));
            let mut scratch = Vec::new();
            let mut counts = BTreeMap::new();
            let len = BLOCK.min(replicas - b * BLOCK);
            for _ in 0..len {
                *counts.entry(f(&mut rng, &mut scratch)).or_default() += 1;
            }
            counts
        })
        .reduce(BTreeMap::new, merge)
}

/// Two-sample chi-squared comparison of `k`-step skeletons: direct VRJP(c)
/// runs against quenched runs in freshly drawn environments.
pub fn mixture_equivalence_test(
    tree: &FixedTree,
    c: f64,
    k: usize,
    replicas: usize,
    law: MixingLaw,
    seed: u64,
) -> Result<EquivalenceReport> {
    let params = IgParams::new(c)?;
    if tree.len() > MAX_VERTICES || tree.max_depth() > MAX_DEPTH {
        return Err(Error::domain(format!(
            "equivalence test trees are limited to {MAX_VERTICES} vertices and depth {MAX_DEPTH}"
        )));
    }
    if k == 0 || k > MAX_SKELETON {
        return Err(Error::domain(format!("skeleton length must be in 1..={MAX_SKELETON}, got {k}")));
    }
    if let MixingLaw::Constant(x) = law {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::domain(format!("constant mixing value must be positive, got {x}")));
        }
    }
    let direct = count_skeletons(replicas, seed, 0, |rng, local| skeleton_y(tree, c, k, local, rng));
    let shape = params.shape();
    let mixture = count_skeletons(replicas, seed, 1, |rng, a| {
        a.clear();
        a.push(1.0);
        for _ in 1..tree.len() {
            a.push(match law {
                MixingLaw::InverseGaussian => ig_sample_shape(shape, rng),
                MixingLaw::Constant(x) => x,
            });
        }
        skeleton_z(tree, a, k, rng)
    });
    let test = chi_squared_homogeneity(&direct, &mixture)?;
    Ok(EquivalenceReport {
        tree_hash: tree.description_hash(),
        vertices: tree.len(),
        c,
        k,
        replicas,
        law,
        distinct_direct: direct.len(),
        distinct_mixture: mixture.len(),
        test,
    })
}
