//! Declarative experiment configuration.

use crate::error::{Error, Result};
use crate::gw_env::OffspringLaw;
use crate::lab::classify::{classify, Regime};
use crate::vrjp::{FixedTree, MixingLaw};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Classify,
    RwreSpeed,
    Exponent,
    VrjpEquivalence,
    HalflineOracle,
    PhaseScan,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Classify => "classify",
            ExperimentKind::RwreSpeed => "rwre-speed",
            ExperimentKind::Exponent => "exponent",
            ExperimentKind::VrjpEquivalence => "vrjp-equivalence",
            ExperimentKind::HalflineOracle => "halfline-oracle",
            ExperimentKind::PhaseScan => "phase-scan",
        }
    }
}

/// One experiment, as read from a TOML file. See `docs/FORMATS.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema: u32,
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offspring: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_grid: Option<Vec<f64>>,
    /// Scan family: mass `q1` on one child, the rest on `scan_kmax` children.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_kmax: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    /// Regeneration censoring buffer in steps (default: a fifth of the run).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    /// `path-N`, `star-N` or `binary-D`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<MixingLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

pub const DEFAULT_SKELETON: usize = 4;
pub const DEFAULT_SITES: usize = 50;
pub const DEFAULT_SCAN_KMAX: usize = 2;

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            kind,
            seed,
            offspring: None,
            c: None,
            c_grid: None,
            q1_grid: None,
            scan_kmax: None,
            steps: None,
            replicas: None,
            horizon: None,
            tree: None,
            skeleton: None,
            repetitions: None,
            mixing: None,
            sites: None,
            output: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| Error::usage(format!("invalid experiment config: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// SHA-256 of the canonical serialization, ignoring `output`.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output = None;
        let digest = Sha256::digest(canonical.to_toml_string()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn law(&self) -> Result<OffspringLaw> {
        let probs = self.offspring.clone().ok_or_else(|| self.missing("offspring"))?;
        OffspringLaw::new(probs)
    }

    /// Values of `c`, from `c` or `c_grid`.
    pub fn c_values(&self) -> Result<Vec<f64>> {
        let cs = match (&self.c, &self.c_grid) {
            (Some(c), None) => vec![*c],
            (None, Some(g)) if !g.is_empty() => g.clone(),
            (Some(_), Some(_)) => return Err(Error::usage("give either c or c_grid, not both")),
            _ => return Err(self.missing("c or c_grid")),
        };
        if let Some(bad) = cs.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
            return Err(Error::usage(format!("c must be positive and finite, got {bad}")));
        }
        Ok(cs)
    }

    /// `(c, law)` points of a phase scan, c-major.
    pub fn scan_points(&self) -> Result<Vec<(f64, OffspringLaw)>> {
        let cs = self.c_values()?;
        let laws = match &self.q1_grid {
            Some(q1s) => {
                if self.offspring.is_some() {
                    return Err(Error::usage("q1_grid replaces offspring; give one of them"));
                }
                let kmax = self.scan_kmax.unwrap_or(DEFAULT_SCAN_KMAX);
                if kmax < 2 {
                    return Err(Error::usage("scan_kmax must be at least 2"));
                }
                q1s.iter()
                    .map(|&q1| {
                        if !(0.0..1.0).contains(&q1) {
                            return Err(Error::usage(format!("q1 grid values must lie in [0, 1), got {q1}")));
                        }
                        let mut p = vec![0.0; kmax + 1];
                        p[1] = q1;
                        p[kmax] = 1.0 - q1;
                        OffspringLaw::new(p)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            None => vec![self.law()?],
        };
        Ok(cs.iter().flat_map(|&c| laws.iter().map(move |l| (c, l.clone()))).collect())
    }

    pub fn fixed_tree(&self) -> Result<FixedTree> {
        let name = self.tree.as_deref().ok_or_else(|| self.missing("tree"))?;
        let (shape, size) = name
            .rsplit_once('-')
            .ok_or_else(|| Error::usage(format!("tree must look like path-N, star-N or binary-D, got {name:?}")))?;
        let size: usize = size.parse().map_err(|_| Error::usage(format!("bad tree size in {name:?}")))?;
        match shape {
            "path" => FixedTree::path(size),
            "star" => FixedTree::star(size),
            "binary" => FixedTree::binary(size),
            _ => Err(Error::usage(format!("unknown tree shape {shape:?}"))),
        }
    }

    pub fn replicas(&self) -> Result<usize> {
        self.replicas.ok_or_else(|| self.missing("replicas"))
    }

    pub fn steps(&self) -> Result<u64> {
        self.steps.ok_or_else(|| self.missing("steps"))
    }

    fn missing(&self, field: &str) -> Error {
        Error::usage(format!("{} experiments need `{field}`", self.kind.as_str()))
    }

    fn forbid(&self, present: bool, field: &str) -> Result<()> {
        if present {
            return Err(Error::usage(format!("`{field}` does not apply to {} experiments", self.kind.as_str())));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::usage(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        let walk_fields = self.steps.is_some() || self.horizon.is_some();
        let equivalence_fields =
            self.tree.is_some() || self.skeleton.is_some() || self.repetitions.is_some() || self.mixing.is_some();
        let scan_fields = self.q1_grid.is_some() || self.scan_kmax.is_some();
        match self.kind {
            ExperimentKind::Classify | ExperimentKind::PhaseScan => {
                self.forbid(walk_fields || self.replicas.is_some(), "steps/horizon/replicas")?;
                self.forbid(equivalence_fields, "tree/skeleton/repetitions/mixing")?;
                self.forbid(self.sites.is_some(), "sites")?;
                if self.kind == ExperimentKind::Classify {
                    self.forbid(scan_fields, "q1_grid/scan_kmax")?;
                }
                for (c, law) in self.scan_points()? {
                    law.require_supercritical().map_err(|e| Error::usage(format!("at c = {c}: {e}")))?;
                }
            }
            ExperimentKind::RwreSpeed | ExperimentKind::Exponent => {
                self.forbid(equivalence_fields, "tree/skeleton/repetitions/mixing")?;
                self.forbid(scan_fields || self.sites.is_some(), "q1_grid/scan_kmax/sites")?;
                let law = self.law()?;
                law.require_supercritical()?;
                law.require_leafless()?;
                let cs = self.c_values()?;
                self.replicas()?;
                let steps = self.steps()?;
                let min_steps = if self.kind == ExperimentKind::RwreSpeed { 1000 } else { 100 };
                if steps < min_steps {
                    return Err(Error::usage(format!("{} needs at least {min_steps} steps", self.kind.as_str())));
                }
                if let Some(h) = self.horizon {
                    if h >= steps {
                        return Err(Error::usage(format!("horizon {h} must be below steps {steps}")));
                    }
                }
                if self.kind == ExperimentKind::Exponent {
                    for c in cs {
                        let r = classify(&law, c)?;
                        if r.regime != Regime::TransientNull {
                            return Err(Error::usage(format!(
                                "exponent experiments need a predicted sub-ballistic regime; c = {c} is {} \
                                 (b mu = {}, q1 xi_1/2 = {})",
                                r.regime.as_str(),
                                r.b_mu,
                                r.q1_xi_half
                            )));
                        }
                    }
                }
            }
            ExperimentKind::VrjpEquivalence => {
                self.forbid(walk_fields || scan_fields || self.sites.is_some(), "steps/horizon/q1_grid/sites")?;
                self.forbid(self.offspring.is_some() || self.c_grid.is_some(), "offspring/c_grid")?;
                self.fixed_tree()?;
                self.c_values()?;
                if self.replicas()? == 0 {
                    return Err(Error::usage("equivalence tests need at least one replica per side"));
                }
            }
            ExperimentKind::HalflineOracle => {
                self.forbid(walk_fields || scan_fields || equivalence_fields, "walk, scan and tree fields")?;
                self.forbid(self.offspring.is_some(), "offspring")?;
                self.c_values()?;
                self.replicas()?;
                if self.sites.unwrap_or(DEFAULT_SITES) < 3 {
                    return Err(Error::usage("halfline oracle needs at least 3 sites"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEED: &str = r#"
schema = 1
kind = "rwre-speed"
seed = 7
offspring = [0.0, 0.2, 0.8]
c = 1.0
steps = 10000
replicas = 4
"#;

    #[test]
    fn round_trip_is_byte_identical() {
        let spec = ExperimentSpec::from_toml_str(SPEED).unwrap();
        let once = spec.to_toml_string().unwrap();
        let back = ExperimentSpec::from_toml_str(&once).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_toml_string().unwrap(), once);
    }

    #[test]
    fn hash_ignores_output() {
        let mut spec = ExperimentSpec::from_toml_str(SPEED).unwrap();
        let h = spec.hash().unwrap();
        spec.output = Some("elsewhere".into());
        assert_eq!(spec.hash().unwrap(), h);
        spec.seed += 1;
        assert_ne!(spec.hash().unwrap(), h);
    }

    #[test]
    fn unknown_fields_and_versions_rejected() {
        assert!(matches!(ExperimentSpec::from_toml_str(&format!("{SPEED}bogus = 1\n")), Err(Error::Usage(_))));
        assert!(matches!(ExperimentSpec::from_toml_str(&SPEED.replace("schema = 1", "schema = 2")), Err(Error::Usage(_))));
    }

    #[test]
    fn exponent_needs_sub_ballistic_prediction() {
        let ballistic = SPEED.replace("rwre-speed", "exponent");
        assert!(ExperimentSpec::from_toml_str(&ballistic).is_err());
        let null = ballistic.replace("[0.0, 0.2, 0.8]", "[0.0, 0.95, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.05]");
        assert!(ExperimentSpec::from_toml_str(&null).is_ok());
        let leafy = null.replace("[0.0, 0.95", "[0.05, 0.9");
        assert!(ExperimentSpec::from_toml_str(&leafy).is_err());
    }

    #[test]
    fn equivalence_fields() {
        let s = "schema = 1\nkind = \"vrjp-equivalence\"\nseed = 1\nc = 1.0\nreplicas = 100\ntree = \"star-3\"\n\
                 mixing = { law = \"constant\", value = 1.0 }\n";
        let spec = ExperimentSpec::from_toml_str(s).unwrap();
        assert_eq!(spec.fixed_tree().unwrap().len(), 4);
        assert_eq!(spec.mixing, Some(MixingLaw::Constant(1.0)));
        assert!(ExperimentSpec::from_toml_str(&s.replace("star-3", "ring-3")).is_err());
    }

    #[test]
    fn scan_family() {
        let s = "schema = 1\nkind = \"phase-scan\"\nseed = 0\nc_grid = [0.5, 1.0]\nq1_grid = [0.1, 0.5, 0.9]\n";
        let pts = ExperimentSpec::from_toml_str(s).unwrap().scan_points().unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[4].0, 1.0);
        assert_eq!(pts[4].1.q1(), 0.5);
        assert_eq!(pts[4].1.q(2), 0.5);
    }
}
