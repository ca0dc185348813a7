//! The discrete walk `eta` on the enlarged tree under the quenched law
//! `p(x, parent) ∝ 1/A_x`, `p(x, z) ∝ A_z`, `p(super-root, root) = 1`.

mod estimators;

pub use estimators::{
    detect_regenerations, estimate_beta, estimate_exponent, estimate_speed, estimate_speed_with_buffer, BetaEstimate, ExponentFit, Proportion,
    SpeedEstimate, SpeedMethod, SpeedReport,
};

use crate::error::{Error, Result};
use crate::gw_env::{EnvTree, VertexId};
use crate::rng::{stream, Domain};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub max_steps: u64,
    /// Tail of the trajectory excluded from regeneration acceptance.
    pub buffer: u64,
    pub seed: u64,
}

impl WalkConfig {
    /// Buffer defaults to the last 20% of the run.
    pub fn new(max_steps: u64, seed: u64) -> Result<Self> {
        let cfg = Self { max_steps, buffer: max_steps / 5, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::domain("walk needs at least one step"));
        }
        if self.buffer >= self.max_steps {
            return Err(Error::domain(format!(
                "regeneration buffer {} must be below max steps {}",
                self.buffer, self.max_steps
            )));
        }
        Ok(())
    }
}

/// Version of the text streams written by [`Trajectory::write_records`] and
/// [`write_regenerations`].
pub const TRAJECTORY_FORMAT: u32 = 1;

/// Regeneration times with the generation reached, one per line.
pub fn write_regenerations<W: Write>(tr: &Trajectory, times: &[usize], mut w: W) -> Result<()> {
    writeln!(w, "# vrjp regenerations {TRAJECTORY_FORMAT}")?;
    writeln!(w, "# step\tgeneration")?;
    for &k in times {
        writeln!(w, "{k}\t{}", tr.generations()[k])?;
    }
    Ok(())
}

/// Positions of the walk at times `0..=steps`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    vertices: Vec<VertexId>,
    generations: Vec<i32>,
    children: Vec<u32>,
    truncated: bool,
}

impl Trajectory {
    /// A synthetic trajectory given by generations and child counts; vertex
    /// ids are left as the root.
    pub fn from_generations(generations: Vec<i32>, children: Vec<u32>) -> Result<Self> {
        if generations.len() != children.len() || generations.is_empty() {
            return Err(Error::domain("generations and child counts must be nonempty and aligned"));
        }
        if generations.windows(2).any(|w| (w[1] - w[0]).abs() != 1) {
            return Err(Error::domain("consecutive generations must differ by one"));
        }
        Ok(Self { vertices: vec![VertexId::ROOT; generations.len()], generations, children, truncated: false })
    }

    /// Number of recorded positions (steps + 1).
    pub fn len(&self) -> usize {
        self.generations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn generations(&self) -> &[i32] {
        &self.generations
    }

    /// Child counts of the visited vertices (degree minus one).
    pub fn child_counts(&self) -> &[u32] {
        &self.children
    }

    /// Set when the walk stopped early because the tree hit its vertex cap.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// `tau_n` for `n = 0..=max generation`.
    pub fn hitting_times(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (k, &g) in self.generations.iter().enumerate() {
            if g >= 0 && g as usize == out.len() {
                out.push(k);
            }
        }
        out
    }

    pub fn max_generation(&self) -> i32 {
        self.generations.iter().copied().max().unwrap_or(0)
    }

    /// Visits to generation 0 after time 0.
    pub fn root_visits(&self) -> usize {
        self.generations.iter().skip(1).filter(|&&g| g == 0).count()
    }

    /// Text record stream `step vertex generation`, one line per step.
    pub fn write_records<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# vrjp trajectory {TRAJECTORY_FORMAT}")?;
        writeln!(w, "# step\tvertex\tgeneration")?;
        for (k, (v, g)) in self.vertices.iter().zip(&self.generations).enumerate() {
            writeln!(w, "{k}\t{}\t{g}", v.index())?;
        }
        Ok(())
    }
}

/// Quenched one-step law from `v`.
pub fn step_distribution(tree: &mut EnvTree, v: VertexId) -> Result<Vec<(VertexId, f64)>> {
    if v == VertexId::SUPER_ROOT {
        return Ok(vec![(VertexId::ROOT, 1.0)]);
    }
    let kids = tree.children(v)?;
    let parent = tree.parent(v)?.expect("non-super-root vertices have parents");
    let up = 1.0 / tree.env_value(v)?;
    let total = up + tree.child_weight(v)?;
    let mut out = Vec::with_capacity(kids.len() + 1);
    out.push((parent, up / total));
    for z in kids.iter() {
        out.push((z, tree.env_value(z)? / total));
    }
    Ok(out)
}

/// One quenched step from `v`.
#[inline]
pub fn step<R: Rng + ?Sized>(tree: &mut EnvTree, v: VertexId, rng: &mut R) -> Result<VertexId> {
    if v == VertexId::SUPER_ROOT {
        return Ok(VertexId::ROOT);
    }
    let kids = tree.children(v)?;
    let up = 1.0 / tree.env_value(v)?;
    let total = up + tree.child_weight(v)?;
    let mut u = rng.random::<f64>() * total;
    if u < up || kids.is_empty() {
        return Ok(tree.parent(v)?.expect("non-super-root vertices have parents"));
    }
    u -= up;
    let last = kids.len() - 1;
    for (i, z) in kids.iter().enumerate() {
        let a = tree.env_value(z)?;
        if u < a || i == last {
            return Ok(z);
        }
        u -= a;
    }
    unreachable!("children list is nonempty")
}

/// Runs `cfg.max_steps` steps from the root.
pub fn run_walk(tree: &mut EnvTree, cfg: &WalkConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, Domain::Walk, 0);
    run_walk_from(tree, VertexId::ROOT, cfg.max_steps, &mut rng)
}

/// Runs `steps` steps from `start` with the given stream. Hitting the tree's
/// vertex cap ends the run early with the truncation flag set.
pub fn run_walk_from<R: Rng + ?Sized>(tree: &mut EnvTree, start: VertexId, steps: u64, rng: &mut R) -> Result<Trajectory> {
    let cap = steps as usize + 1;
    let mut tr = Trajectory {
        vertices: Vec::with_capacity(cap),
        generations: Vec::with_capacity(cap),
        children: Vec::with_capacity(cap),
        truncated: false,
    };
    let mut v = start;
    let record = |tr: &mut Trajectory, tree: &EnvTree, v: VertexId| -> Result<()> {
        tr.vertices.push(v);
        tr.generations.push(tree.generation(v)?);
        tr.children.push(tree.offspring_count(v)? as u32);
        Ok(())
    };
    record(&mut tr, tree, v)?;
    for _ in 0..steps {
        match step(tree, v, rng) {
            Ok(next) => v = next,
            Err(Error::Capacity(_)) => {
                tr.truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
        record(&mut tr, tree, v)?;
    }
    Ok(tr)
}

/// Whether a walk from `v` avoids `parent(v)` for `horizon` steps.
pub fn escapes<R: Rng + ?Sized>(tree: &mut EnvTree, v: VertexId, horizon: u64, rng: &mut R) -> Result<bool> {
    let parent = tree.parent(v)?.ok_or_else(|| Error::domain("the super-root has no parent to escape"))?;
    let mut cur = v;
    for _ in 0..horizon {
        cur = step(tree, cur, rng)?;
        if cur == parent {
            return Ok(false);
        }
    }
    Ok(true)
}
