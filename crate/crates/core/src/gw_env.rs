//! Lazily grown Galton-Watson tree carrying i.i.d. environment values `A_x`.
//!
//! Vertices live in an arena. Each vertex has a 64-bit digest of its path
//! from the root, and every random draw for that vertex (its `A` value, then
//! its offspring count) comes from a ChaCha stream keyed by the master seed
//! and the digest, so exploration order never changes the realization.

use crate::error::{Error, Result};
use crate::moments::{ig_sample_shape, IgParams, MomentEngine};
use crate::numeric::LogSum;
use crate::rng::{combine, stream, Domain};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::Write;

/// Finite-support offspring distribution `(q_0, ..., q_kmax)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OffspringLaw {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TryFrom<Vec<f64>> for OffspringLaw {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        OffspringLaw::new(v)
    }
}

impl From<OffspringLaw> for Vec<f64> {
    fn from(l: OffspringLaw) -> Self {
        l.probs
    }
}

impl OffspringLaw {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("offspring law needs at least one probability"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::domain(format!("offspring probabilities must be finite and nonnegative: {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("offspring probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { probs, cumulative })
    }

    /// Every vertex has exactly `k` children.
    pub fn deterministic(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self::new(probs).expect("point mass is a valid law")
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn q(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn q0(&self) -> f64 {
        self.q(0)
    }

    pub fn q1(&self) -> f64 {
        self.q(1)
    }

    /// Mean offspring `b`.
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// Second moment `M = sum k^2 q_k`.
    pub fn second_moment(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum()
    }

    pub fn max_offspring(&self) -> usize {
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    pub fn is_supercritical(&self) -> bool {
        self.mean() > 1.0
    }

    pub fn require_supercritical(&self) -> Result<()> {
        if self.is_supercritical() {
            Ok(())
        } else {
            Err(Error::domain(format!("offspring mean {} is not > 1", self.mean())))
        }
    }

    /// Speed experiments need a tree without leaves.
    pub fn require_leafless(&self) -> Result<()> {
        if self.q0() > 0.0 {
            Err(Error::domain(format!("q0 = {} must be 0 for this experiment", self.q0())))
        } else {
            Ok(())
        }
    }

    /// Offspring count from a uniform variate in [0, 1).
    pub fn sample_from_uniform(&self, u: f64) -> u32 {
        let k = self.cumulative.partition_point(|&c| c <= u);
        k.min(self.max_offspring()) as u32
    }
}

/// Arena handle of a materialized vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(u32);

impl VertexId {
    /// The artificial parent of the root.
    pub const SUPER_ROOT: VertexId = VertexId(0);
    pub const ROOT: VertexId = VertexId(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Consecutive children of one vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Children {
    first: u32,
    len: u32,
}

impl Children {
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Option<VertexId> {
        (i < self.len as usize).then(|| VertexId(self.first + i as u32))
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> {
        (self.first..self.first + self.len).map(VertexId)
    }
}

const UNGROWN: u32 = u32::MAX;
const ROOT_KEY: u64 = 0x6a09_e667_f3bc_c908;
pub const DEFAULT_VERTEX_CAP: usize = 10_000_000;

#[derive(Debug, Clone)]
struct Node {
    parent: u32,
    first_child: u32,
    n_children: u32,
    generation: i32,
    a: f64,
    key: u64,
    child_weight: f64,
}

/// Normalised additive martingale at one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleW {
    pub generation: u32,
    /// `W_n / (b mu)^n`, mean one.
    pub value: f64,
    /// `W_n` without normalisation.
    pub raw: f64,
    pub population: usize,
    /// Population cap hit; both sums cover only the vertices reached.
    pub capped: bool,
}

/// A Galton-Watson tree with environment, grown on demand.
#[derive(Debug, Clone)]
pub struct EnvTree {
    law: OffspringLaw,
    params: IgParams,
    seed: u64,
    nodes: Vec<Node>,
    cap: usize,
}

impl EnvTree {
    pub fn new(law: OffspringLaw, params: IgParams, seed: u64) -> Self {
        let mut tree = Self { law, params, seed, nodes: Vec::new(), cap: DEFAULT_VERTEX_CAP };
        tree.nodes.push(Node {
            parent: UNGROWN,
            first_child: 1,
            n_children: 1,
            generation: -1,
            a: f64::NAN,
            key: 0,
            child_weight: 0.0,
        });
        let root = tree.draw_node(0, 0, ROOT_KEY);
        tree.nodes[0].child_weight = root.a;
        tree.nodes.push(root);
        tree
    }

    pub fn with_vertex_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(2);
        self
    }

    fn draw_node(&self, parent: u32, generation: i32, key: u64) -> Node {
        let mut rng = stream(self.seed, Domain::Tree, key);
        let a = ig_sample_shape(self.params.shape(), &mut rng);
        let n_children = self.law.sample_from_uniform(rng.random());
        Node { parent, first_child: UNGROWN, n_children, generation, a, key, child_weight: 0.0 }
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }

    pub fn params(&self) -> IgParams {
        self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of materialized vertices, super-root included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vertex_cap(&self) -> usize {
        self.cap
    }

    fn node(&self, v: VertexId) -> Result<&Node> {
        self.nodes.get(v.index()).ok_or_else(|| Error::usage(format!("vertex {} is not materialized", v.0)))
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.index() < self.nodes.len()
    }

    pub fn parent(&self, v: VertexId) -> Result<Option<VertexId>> {
        let n = self.node(v)?;
        Ok((n.parent != UNGROWN).then_some(VertexId(n.parent)))
    }

    /// `|v|`; the root has generation 0 and the super-root -1.
    pub fn generation(&self, v: VertexId) -> Result<i32> {
        Ok(self.node(v)?.generation)
    }

    /// Offspring count of `v` (known before its children are grown).
    pub fn offspring_count(&self, v: VertexId) -> Result<usize> {
        Ok(self.node(v)?.n_children as usize)
    }

    /// Path digest, stable across exploration orders.
    pub fn digest(&self, v: VertexId) -> Result<u64> {
        Ok(self.node(v)?.key)
    }

    /// Child indices from the root down to `v`.
    pub fn path(&self, v: VertexId) -> Result<Vec<u32>> {
        let mut n = self.node(v)?;
        if n.generation < 0 {
            return Err(Error::domain("the super-root has no path"));
        }
        let mut out = Vec::with_capacity(n.generation as usize);
        let mut cur = v.0;
        while n.generation > 0 {
            let p = &self.nodes[n.parent as usize];
            out.push(cur - p.first_child);
            cur = n.parent;
            n = p;
        }
        out.reverse();
        Ok(out)
    }

    /// Follows child indices from the root, growing the tree as needed.
    pub fn descend(&mut self, path: &[u32]) -> Result<VertexId> {
        let mut v = VertexId::ROOT;
        for &i in path {
            v = self
                .children(v)?
                .get(i as usize)
                .ok_or_else(|| Error::domain(format!("vertex has no child {i}")))?;
        }
        Ok(v)
    }

    fn grow(&mut self, v: VertexId) -> Result<()> {
        let idx = v.index();
        let (n, generation, key) = {
            let node = &self.nodes[idx];
            (node.n_children, node.generation, node.key)
        };
        if self.nodes.len() + n as usize > self.cap {
            return Err(Error::Capacity(format!("vertex cap {} reached", self.cap)));
        }
        let first = self.nodes.len() as u32;
        let mut weight = 0.0;
        for i in 0..n {
            let child = self.draw_node(idx as u32, generation + 1, combine(key, i as u64));
            weight += child.a;
            self.nodes.push(child);
        }
        let node = &mut self.nodes[idx];
        node.first_child = first;
        node.child_weight = weight;
        Ok(())
    }

    /// Children of `v`, drawn on first request. The super-root's only child
    /// is the root.
    pub fn children(&mut self, v: VertexId) -> Result<Children> {
        let node = self.node(v)?;
        if node.first_child == UNGROWN && node.n_children > 0 {
            self.grow(v)?;
        }
        let node = &self.nodes[v.index()];
        Ok(Children { first: if node.n_children == 0 { 0 } else { node.first_child }, len: node.n_children })
    }

    /// `A_v`.
    pub fn env_value(&self, v: VertexId) -> Result<f64> {
        if v == VertexId::SUPER_ROOT {
            return Err(Error::domain("the super-root carries no environment value"));
        }
        Ok(self.node(v)?.a)
    }

    /// Replaces `A_v` (for sensitivity experiments on a fixed tree).
    pub fn override_env_value(&mut self, v: VertexId, a: f64) -> Result<()> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::domain(format!("environment value must be positive, got {a}")));
        }
        let old = self.env_value(v)?;
        let parent = self.nodes[v.index()].parent as usize;
        self.nodes[v.index()].a = a;
        self.nodes[parent].child_weight += a - old;
        Ok(())
    }

    /// `sum A_z` over the children of `v` (grows them if needed).
    pub fn child_weight(&mut self, v: VertexId) -> Result<f64> {
        self.children(v)?;
        Ok(self.nodes[v.index()].child_weight)
    }

    /// `log C(v, parent v) = 2 sum_{interior u} log A_u + log A_v`.
    pub fn log_conductance(&self, v: VertexId) -> Result<f64> {
        let node = self.node(v)?;
        if node.generation < 1 {
            return Err(Error::domain("conductance is defined for vertices below the root"));
        }
        let mut acc = node.a.ln();
        let mut cur = &self.nodes[node.parent as usize];
        while cur.generation > 0 {
            acc += 2.0 * cur.a.ln();
            cur = &self.nodes[cur.parent as usize];
        }
        Ok(acc)
    }

    pub fn conductance(&self, v: VertexId) -> Result<f64> {
        Ok(self.log_conductance(v)?.exp())
    }

    /// `W_n = sum_{|x| = n} prod_{u in ]root, x]} sqrt(A_u)`, normalised by
    /// `(b mu(c))^n`. Grows full generations up to `n`.
    pub fn martingale_w(&mut self, n: u32, engine: &MomentEngine) -> Result<MartingaleW> {
        if n == 0 {
            return Err(Error::domain("martingale W_n needs n >= 1"));
        }
        let norm = n as f64 * (self.law.mean() * engine.mu()?).ln();
        let mut frontier: VecDeque<(VertexId, f64)> = VecDeque::from([(VertexId::ROOT, 0.0)]);
        let mut capped = false;
        for _ in 0..n {
            let mut next = VecDeque::new();
            for (v, log_w) in frontier.drain(..) {
                let kids = match self.children(v) {
                    Ok(k) => k,
                    Err(Error::Capacity(_)) => {
                        capped = true;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                for z in kids.iter() {
                    next.push_back((z, log_w + 0.5 * self.nodes[z.index()].a.ln()));
                }
            }
            frontier = next;
            if capped {
                break;
            }
        }
        let mut acc = LogSum::default();
        for &(_, lw) in &frontier {
            acc.push(lw);
        }
        let log_raw = acc.value();
        Ok(MartingaleW {
            generation: n,
            value: (log_raw - norm).exp(),
            raw: log_raw.exp(),
            population: frontier.len(),
            capped,
        })
    }

    /// Writes one line per materialized vertex: `id parent generation a`.
    /// The super-root is omitted; the root's parent is written as 0.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# id\tparent\tgeneration\ta")?;
        for (i, n) in self.nodes.iter().enumerate().skip(1) {
            writeln!(w, "{i}\t{}\t{}\t{:e}", n.parent, n.generation, n.a)?;
        }
        Ok(())
    }
}
