//! Tab-separated plot tables. Column schemas are listed in `docs/FORMATS.md`.

use crate::error::{Error, Result};
use crate::lab::record::{ReplicaSummary, ResultRecord};
use crate::lab::spec::ExperimentKind;
use crate::moments::MomentEngine;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    PsiCurve,
    PhaseDiagram,
    Speed,
    Loglog,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::PsiCurve, PlotKind::PhaseDiagram, PlotKind::Speed, PlotKind::Loglog];

    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::PsiCurve => "psi-curve",
            PlotKind::PhaseDiagram => "phase-diagram",
            PlotKind::Speed => "speed",
            PlotKind::Loglog => "loglog",
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            PlotKind::PsiCurve => "t\tpsi\tmoment\tc",
            PlotKind::PhaseDiagram => "c\tq1\tb\tmu\tb_mu\tq1_xi_half\tt_star\tlambda\texponent\tregime",
            PlotKind::Speed => {
                "c\treplicas\tendpoint\tendpoint_se\tendpoint_ci_low\tendpoint_ci_high\t\
                 regeneration\tregeneration_se\tregeneration_ci_low\tregeneration_ci_high"
            }
            PlotKind::Loglog => "replica\tc\tn\tgeneration\tlog_n\tlog_generation",
        }
    }

    fn accepts(self, kind: ExperimentKind) -> bool {
        matches!(
            (self, kind),
            (PlotKind::PsiCurve, ExperimentKind::Classify | ExperimentKind::PhaseScan)
                | (PlotKind::PhaseDiagram, ExperimentKind::Classify | ExperimentKind::PhaseScan)
                | (PlotKind::Speed, ExperimentKind::RwreSpeed)
                | (PlotKind::Loglog, ExperimentKind::Exponent)
        )
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::usage(format!("unknown plot kind {s:?} (psi-curve, phase-diagram, speed, loglog)")))
    }
}

/// `t` grid of the psi curve: -2 to 3 in steps of 0.05.
pub fn psi_grid() -> impl Iterator<Item = f64> {
    (0..=100).map(|i| (i as f64 - 40.0) / 20.0)
}

fn opt(x: Option<f64>, missing: &str) -> String {
    x.map_or_else(|| missing.to_string(), |v| v.to_string())
}

/// Writes the table. An incompatible record kind is a usage error; a record
/// without rows gives a header-only table.
pub fn emit_plotdata<W: Write>(record: &ResultRecord, kind: PlotKind, mut w: W) -> Result<()> {
    if !kind.accepts(record.kind) {
        return Err(Error::usage(format!(
            "{} tables need a different experiment than {}",
            kind.as_str(),
            record.kind.as_str()
        )));
    }
    writeln!(w, "{}", kind.header())?;
    match kind {
        PlotKind::PsiCurve => {
            let mut cs: Vec<f64> = record.classifications.iter().map(|r| r.c).collect();
            cs.sort_by(f64::total_cmp);
            cs.dedup();
            for c in cs {
                let engine = MomentEngine::for_c(c)?;
                for t in psi_grid() {
                    let psi = engine.psi(t)?;
                    writeln!(w, "{t}\t{psi}\t{}\t{c}", psi.exp())?;
                }
            }
        }
        PlotKind::PhaseDiagram => {
            for r in &record.classifications {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.c,
                    r.q1,
                    r.b,
                    r.mu,
                    r.b_mu,
                    r.q1_xi_half,
                    opt(r.t_star, "inf"),
                    opt(r.lambda, "inf"),
                    opt(r.exponent, "nan"),
                    r.regime.as_str()
                )?;
            }
        }
        PlotKind::Speed => {
            for a in record.aggregates.iter().filter(|a| a.ok > 0) {
                let e = &a.metrics["endpoint-speed"];
                let r = a.metrics.get("regeneration-speed");
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    a.c,
                    a.ok,
                    e.mean,
                    e.se,
                    e.ci_low,
                    e.ci_high,
                    opt(r.map(|r| r.mean), "nan"),
                    opt(r.map(|r| r.se), "nan"),
                    opt(r.map(|r| r.ci_low), "nan"),
                    opt(r.map(|r| r.ci_high), "nan"),
                )?;
            }
        }
        PlotKind::Loglog => {
            for e in &record.replicas {
                if let Some(ReplicaSummary::Exponent { trace, .. }) = &e.summary {
                    for &(n, g) in trace.iter().filter(|p| p.1 > 0) {
                        writeln!(w, "{}\t{}\t{n}\t{g}\t{}\t{}", e.index, e.c, (n as f64).ln(), (g as f64).ln())?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Writes `<root>/<hash16>/<kind>.tsv`.
pub fn write_plotdata(record: &ResultRecord, kind: PlotKind, root: impl AsRef<Path>) -> Result<PathBuf> {
    let mut buf = Vec::new();
    emit_plotdata(record, kind, &mut buf)?;
    let dir = record.directory(root);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.tsv", kind.as_str()));
    std::fs::write(&path, buf)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::record::run_experiment;
    use crate::lab::spec::ExperimentSpec;

    fn table(record: &ResultRecord, kind: PlotKind) -> Vec<Vec<String>> {
        let mut buf = Vec::new();
        emit_plotdata(record, kind, &mut buf).unwrap();
        String::from_utf8(buf).unwrap().lines().map(|l| l.split('\t').map(String::from).collect()).collect()
    }

    #[test]
    fn psi_curve_minimal_at_half() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Classify, 0);
        spec.offspring = Some(vec![0.0, 0.0, 1.0]);
        spec.c = Some(1.0);
        let rows = table(&run_experiment(&spec).unwrap(), PlotKind::PsiCurve);
        assert_eq!(rows[0].join("\t"), PlotKind::PsiCurve.header());
        let body = &rows[1..];
        assert_eq!(body.len(), 101);
        let argmin = body
            .iter()
            .min_by(|a, b| a[1].parse::<f64>().unwrap().total_cmp(&b[1].parse::<f64>().unwrap()))
            .unwrap();
        assert_eq!(argmin[0], "0.5");
        assert_eq!(body[0][0], "-2");
        assert_eq!(body[100][0], "3");
    }

    #[test]
    fn incompatible_and_empty() {
        let mut spec = ExperimentSpec::new(ExperimentKind::HalflineOracle, 0);
        spec.c = Some(1.0);
        spec.replicas = Some(1);
        let rec = run_experiment(&spec).unwrap();
        for k in PlotKind::ALL {
            assert!(matches!(emit_plotdata(&rec, k, Vec::new()), Err(Error::Usage(_))));
        }
        let mut speed = ExperimentSpec::new(ExperimentKind::RwreSpeed, 0);
        speed.offspring = Some(vec![0.0, 0.2, 0.8]);
        speed.c = Some(1.0);
        speed.steps = Some(1000);
        speed.replicas = Some(0);
        let empty = ResultRecord::empty(speed).unwrap();
        for k in [PlotKind::Speed] {
            let rows = table(&empty, k);
            assert_eq!(rows.len(), 1);
        }
        assert_eq!(table(&run_experiment(&empty.spec).unwrap(), PlotKind::Speed).len(), 1);
    }

    #[test]
    fn plot_kind_names() {
        for k in PlotKind::ALL {
            assert_eq!(k.as_str().parse::<PlotKind>().unwrap(), k);
        }
        assert!("pie".parse::<PlotKind>().is_err());
    }
}
