//! Experiment orchestration: configs, replica execution, records and plot tables.

pub mod classify;
pub mod plot;
pub mod record;
pub mod spec;

pub use classify::{classify, classify_with, BoundaryKind, Classification, Regime, BOUNDARY_TOL};
pub use plot::{emit_plotdata, write_plotdata, PlotKind};
pub use record::{merge, replica_walk, run_experiment, run_replicas, Estimate, PointAggregate, ReplicaEntry, ReplicaSummary, ResultRecord};
pub use spec::{ExperimentKind, ExperimentSpec, SCHEMA_VERSION};
