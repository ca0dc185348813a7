//! `vrjp`: run experiments from TOML configs and turn records into plot tables.
//!
//! Exit status: 0 success, 2 usage error, 3 numeric failure, 4 some replicas failed.
//!
//! `vrjp trajectory` replays one walk replica and writes three text files into
//! `<output>/<hash16>/walk-<point>-<replica>/`:
//!
//! * `trajectory.tsv`: `# vrjp trajectory 1`, then `step vertex generation`
//!   per step (vertex 0 is the super-root, 1 the root);
//! * `regenerations.tsv`: `# vrjp regenerations 1`, then `step generation` per
//!   accepted regeneration time;
//! * `tree.tsv`: `id parent generation a` for every vertex the walk generated.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vrjp_core::lab::{emit_plotdata, replica_walk, run_experiment, write_plotdata, ReplicaSummary};
use vrjp_core::rwre::{detect_regenerations, write_regenerations};
use vrjp_core::{Error, ExperimentKind, ExperimentSpec, PlotKind, ResultRecord};

const DEFAULT_OUTPUT: &str = "results";
const WORKERS_ENV: &str = "VRJP_WORKERS";

#[derive(Parser)]
#[command(name = "vrjp", version, about = "VRJP and random walk in random environment experiments on Galton-Watson trees")]
#[command(after_help = "The worker count defaults to the number of CPUs; set VRJP_WORKERS to override it.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase classification of an offspring law at one or more values of c
    Classify(ClassifyArgs),
    /// Random walk speed or displacement exponent experiment (rwre-speed, exponent)
    Simulate(RunArgs),
    /// Mixture representation test on a small fixed tree (vrjp-equivalence)
    Equivalence(RunArgs),
    /// Half-line closed forms against direct solves (halfline-oracle)
    Oracle(RunArgs),
    /// Phase diagram scan over a c grid and optionally a q1 grid (phase-scan)
    Scan(RunArgs),
    /// Write a plot table from a saved record
    Plotdata(PlotArgs),
    /// Replay one walk replica and export its trajectory, regenerations and tree
    Trajectory(TrajectoryArgs),
}

#[derive(Args)]
struct TrajectoryArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Index into the config's c values
    #[arg(long, default_value_t = 0)]
    point: usize,
    /// Replica index
    #[arg(long, default_value_t = 0)]
    replica: u64,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML)
    #[arg(short, long)]
    config: PathBuf,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replica count
    #[arg(long)]
    replicas: Option<usize>,
    /// Override the number of walk steps
    #[arg(long)]
    steps: Option<u64>,
    /// Override the regeneration censoring buffer (steps)
    #[arg(long)]
    horizon: Option<u64>,
    /// Results directory (default: the config's `output`, else `results`)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Experiment config (TOML) of kind classify
    #[arg(short, long, conflicts_with_all = ["offspring", "c"])]
    config: Option<PathBuf>,
    /// Offspring probabilities q0,q1,... (comma separated)
    #[arg(long, value_delimiter = ',', requires = "c")]
    offspring: Option<Vec<f64>>,
    /// Initial local time c
    #[arg(long, requires = "offspring")]
    c: Option<f64>,
    /// Also save a record under this directory
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Saved record.json
    #[arg(short, long)]
    record: PathBuf,
    /// psi-curve, phase-diagram, speed or loglog
    #[arg(short, long)]
    kind: String,
    /// Output file; `-` for stdout (default: <kind>.tsv next to the record)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numeric(_) | Error::InsufficientData(_) | Error::Capacity(_) => 3,
        Error::Domain(_) | Error::Usage(_) | Error::Io(_) | Error::Serialization(_) => 2,
    }
}

fn configure_workers() -> Result<(), Error> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Usage(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Usage(format!("cannot start {n} workers: {e}")))
}

fn load_spec(args: &RunArgs, allowed: &[ExperimentKind]) -> Result<ExperimentSpec, Error> {
    let mut spec = ExperimentSpec::load(&args.config)?;
    if !allowed.contains(&spec.kind) {
        let names: Vec<&str> = allowed.iter().map(|k| k.as_str()).collect();
        return Err(Error::Usage(format!(
            "{} holds a {} experiment; this subcommand runs {}",
            args.config.display(),
            spec.kind.as_str(),
            names.join(" or ")
        )));
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if args.replicas.is_some() {
        spec.replicas = args.replicas;
    }
    if args.steps.is_some() {
        spec.steps = args.steps;
    }
    if args.horizon.is_some() {
        spec.horizon = args.horizon;
    }
    spec.validate()?;
    Ok(spec)
}

fn output_root(flag: Option<&Path>, spec: &ExperimentSpec) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| spec.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

fn print_summary(record: &ResultRecord) {
    for r in &record.classifications {
        let opt = |x: Option<f64>| x.map_or("inf".to_string(), |v| format!("{v:.6}"));
        println!(
            "c={} q1={} b*mu={:.6} q1*xi_half={:.6} t*={} Lambda={} regime={}{}",
            r.c,
            r.q1,
            r.b_mu,
            r.q1_xi_half,
            opt(r.t_star),
            opt(r.lambda),
            r.regime.as_str(),
            r.exponent.map_or(String::new(), |e| format!(" exponent={e:.6}"))
        );
    }
    for a in &record.aggregates {
        let metrics: Vec<String> =
            a.metrics.iter().map(|(k, e)| format!("{k}={:.6e}+-{:.2e}", e.mean, e.se)).collect();
        print!("c={} ok={} failed={} {}", a.c, a.ok, a.failed, metrics.join(" "));
        if let Some(p) = a.ks_uniform_p {
            print!(" ks-uniform-p={p:.4}");
        }
        println!();
    }
    if record.kind == ExperimentKind::VrjpEquivalence {
        for e in &record.replicas {
            if let Some(ReplicaSummary::Equivalence { p_value, statistic, dof, .. }) = &e.summary {
                println!("repetition {}: chi2={statistic:.3} dof={dof} p={p_value:.4}", e.index);
            }
        }
    }
    for e in record.replicas.iter().filter(|e| e.error.is_some()) {
        eprintln!("replica {} at c={} failed: {}", e.index, e.c, e.error.as_deref().unwrap_or(""));
    }
}

fn run_and_save(spec: &ExperimentSpec, root: &Path) -> Result<u8, Error> {
    let record = run_experiment(spec)?;
    let path = record.persist(root)?;
    print_summary(&record);
    println!("record: {}", path.display());
    Ok(if record.failed() > 0 { 4 } else { 0 })
}

fn export_walk(args: &TrajectoryArgs) -> Result<u8, Error> {
    let spec = load_spec(&args.run, &[ExperimentKind::RwreSpeed, ExperimentKind::Exponent])?;
    let cs = spec.c_values()?;
    let c = *cs
        .get(args.point)
        .ok_or_else(|| Error::Usage(format!("point {} out of range: the config has {} c values", args.point, cs.len())))?;
    let (tree, tr, buffer) = replica_walk(&spec, args.point, c, args.replica)?;
    let record = ResultRecord::empty(spec.clone())?;
    let dir = record
        .directory(output_root(args.run.output.as_deref(), &spec))
        .join(format!("walk-{}-{}", args.point, args.replica));
    std::fs::create_dir_all(&dir)?;
    let mut buf = Vec::new();
    tr.write_records(&mut buf)?;
    std::fs::write(dir.join("trajectory.tsv"), &buf)?;
    buf.clear();
    let regen = detect_regenerations(&tr, buffer as usize);
    write_regenerations(&tr, &regen, &mut buf)?;
    std::fs::write(dir.join("regenerations.tsv"), &buf)?;
    buf.clear();
    tree.write_snapshot(&mut buf)?;
    std::fs::write(dir.join("tree.tsv"), &buf)?;
    println!(
        "c={c} steps={} max_generation={} final_generation={} regenerations={} vertices={}{}",
        tr.steps(),
        tr.max_generation(),
        tr.generations()[tr.steps()],
        regen.len(),
        tree.len(),
        if tr.is_truncated() { " (truncated)" } else { "" }
    );
    println!("walk: {}", dir.display());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Error> {
    configure_workers()?;
    match cli.command {
        Command::Classify(args) => {
            let spec = match (&args.config, &args.offspring, args.c) {
                (Some(path), _, _) => {
                    let spec = ExperimentSpec::load(path)?;
                    if spec.kind != ExperimentKind::Classify {
                        return Err(Error::Usage(format!("{} is not a classify experiment", path.display())));
                    }
                    spec
                }
                (None, Some(q), Some(c)) => {
                    let mut spec = ExperimentSpec::new(ExperimentKind::Classify, 0);
                    spec.offspring = Some(q.clone());
                    spec.c = Some(c);
                    spec.validate()?;
                    spec
                }
                _ => return Err(Error::Usage("classify needs --config or both --offspring and --c".into())),
            };
            match &args.output {
                Some(root) => run_and_save(&spec, root),
                None => {
                    print_summary(&run_experiment(&spec)?);
                    Ok(0)
                }
            }
        }
        Command::Simulate(args) => {
            let spec = load_spec(&args, &[ExperimentKind::RwreSpeed, ExperimentKind::Exponent])?;
            run_and_save(&spec, &output_root(args.output.as_deref(), &spec))
        }
        Command::Equivalence(args) => {
            let spec = load_spec(&args, &[ExperimentKind::VrjpEquivalence])?;
            run_and_save(&spec, &output_root(args.output.as_deref(), &spec))
        }
        Command::Oracle(args) => {
            let spec = load_spec(&args, &[ExperimentKind::HalflineOracle])?;
            run_and_save(&spec, &output_root(args.output.as_deref(), &spec))
        }
        Command::Scan(args) => {
            let spec = load_spec(&args, &[ExperimentKind::PhaseScan])?;
            run_and_save(&spec, &output_root(args.output.as_deref(), &spec))
        }
        Command::Plotdata(args) => {
            let kind: PlotKind = args.kind.parse()?;
            let record = ResultRecord::load(&args.record)?;
            match args.output.as_deref() {
                Some(p) if p == Path::new("-") => emit_plotdata(&record, kind, std::io::stdout().lock())?,
                Some(p) => {
                    let mut buf = Vec::new();
                    emit_plotdata(&record, kind, &mut buf)?;
                    std::fs::write(p, buf)?;
                    println!("table: {}", p.display());
                }
                None => {
                    // the record sits in <root>/<hash16>/; write the table beside it
                    let dir = args.record.parent().unwrap_or(Path::new("."));
                    let root = dir.parent().unwrap_or(Path::new("."));
                    if dir.file_name().and_then(|n| n.to_str()) == Some(&record.spec_hash[..16]) {
                        println!("table: {}", write_plotdata(&record, kind, root)?.display());
                    } else {
                        let p = dir.join(format!("{}.tsv", kind.as_str()));
                        let mut buf = Vec::new();
                        emit_plotdata(&record, kind, &mut buf)?;
                        std::fs::write(&p, buf)?;
                        println!("table: {}", p.display());
                    }
                }
            }
            Ok(0)
        }
        Command::Trajectory(args) => export_walk(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Usage("x".into())), 2);
        assert_eq!(exit_code(&Error::Domain("x".into())), 2);
        assert_eq!(exit_code(&Error::Numeric("x".into())), 3);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
