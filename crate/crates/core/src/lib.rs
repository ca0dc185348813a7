//! Vertex-reinforced jump process on Galton-Watson trees: inverse-Gaussian
//! moment numerics, lazily generated random environments, the associated
//! random walk, continuous-time VRJP simulation, half-line exit-time
//! machinery and an experiment runner.

pub mod error;
pub mod gw_env;
pub mod halfline;
pub mod lab;
pub mod moments;
pub mod numeric;
pub mod rng;
pub mod rwre;
pub mod stats;
pub mod vrjp;

pub use error::{Error, Result};
pub use gw_env::{EnvTree, OffspringLaw, VertexId};
pub use halfline::HalflineEnv;
pub use lab::{ExperimentKind, ExperimentSpec, PlotKind, Regime, ResultRecord};
pub use moments::{IgParams, MomentEngine};
pub use rwre::{Trajectory, WalkConfig};
pub use stats::MeanSe;
