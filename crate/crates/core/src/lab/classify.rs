//! Phase classification of a (law, c) pair.

use crate::error::{Error, Result};
use crate::gw_env::OffspringLaw;
use crate::moments::MomentEngine;
use serde::{Deserialize, Serialize};

/// Distance to a phase boundary below which no regime is asserted.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Recurrent,
    TransientBallistic,
    TransientNull,
    /// Transient, but the tree has leaves so the speed criterion does not apply.
    Transient,
    Boundary,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Recurrent => "recurrent",
            Regime::TransientBallistic => "transient-ballistic",
            Regime::TransientNull => "transient-null",
            Regime::Transient => "transient",
            Regime::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// `b mu(c) = 1`
    Recurrence,
    /// `q1 xi_{1/2} = 1`
    Speed,
}

/// Infinite `t*` and `Lambda` (when `q1 = 0`) are stored as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub c: f64,
    pub q1: f64,
    pub b: f64,
    pub mu: f64,
    pub b_mu: f64,
    pub xi_half: f64,
    pub q1_xi_half: f64,
    pub t_star: Option<f64>,
    pub lambda: Option<f64>,
    /// `t* - 1/2`, reported in the sub-ballistic regime only.
    pub exponent: Option<f64>,
    pub regime: Regime,
    pub boundary: Option<BoundaryKind>,
}

pub fn classify(law: &OffspringLaw, c: f64) -> Result<Classification> {
    classify_with(&MomentEngine::for_c(c)?, law)
}

pub fn classify_with(engine: &MomentEngine, law: &OffspringLaw) -> Result<Classification> {
    law.require_supercritical()?;
    let b = law.mean();
    let q1 = law.q1();
    let mu = engine.mu()?;
    let b_mu = b * mu;
    let xi_half = engine.xi(0.5)?;
    let q1_xi_half = q1 * xi_half;
    let (t_star, lambda) = if q1 > 0.0 {
        (Some(engine.t_star(q1)?), Some(engine.lambda_measure(q1)?))
    } else {
        (None, None)
    };

    // the two speed criteria are computed independently; they must agree away from the boundary
    if let Some(l) = lambda {
        if (q1_xi_half - 1.0).abs() > 1e-6 && (q1_xi_half < 1.0) != (l > 1.0) {
            return Err(Error::numeric(format!(
                "speed criteria disagree at c = {}: q1 xi_1/2 = {q1_xi_half}, Lambda = {l}",
                engine.c()
            )));
        }
    }

    let (regime, boundary) = if (b_mu - 1.0).abs() <= BOUNDARY_TOL {
        (Regime::Boundary, Some(BoundaryKind::Recurrence))
    } else if b_mu < 1.0 {
        (Regime::Recurrent, None)
    } else if law.q0() > 0.0 {
        (Regime::Transient, None)
    } else if (q1_xi_half - 1.0).abs() <= BOUNDARY_TOL {
        (Regime::Boundary, Some(BoundaryKind::Speed))
    } else if q1_xi_half < 1.0 {
        (Regime::TransientBallistic, None)
    } else {
        (Regime::TransientNull, None)
    };
    let exponent = match (regime, t_star) {
        (Regime::TransientNull, Some(t)) => Some(t - 0.5),
        _ => None,
    };
    Ok(Classification { c: engine.c(), q1, b, mu, b_mu, xi_half, q1_xi_half, t_star, lambda, exponent, regime, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::bisect;

    #[test]
    fn binary_critical_c_is_flagged() {
        let law = OffspringLaw::deterministic(2);
        let c_star = bisect(|c| Ok(2.0 * MomentEngine::for_c(c)?.mu()? - 1.0), 0.05, 1.0, 1e-15, 200).unwrap();
        let r = classify(&law, c_star).unwrap();
        assert_eq!(r.regime, Regime::Boundary);
        assert_eq!(r.boundary, Some(BoundaryKind::Recurrence));
        assert_eq!(classify(&law, 0.8 * c_star).unwrap().regime, Regime::Recurrent);
    }

    #[test]
    fn binary_large_c_is_ballistic() {
        let r = classify(&OffspringLaw::deterministic(2), 4.0).unwrap();
        assert!(r.b_mu > 1.0);
        assert_eq!(r.regime, Regime::TransientBallistic);
        assert_eq!(r.t_star, None);
        assert_eq!(r.lambda, None);
        assert_eq!(r.exponent, None);
    }

    #[test]
    fn two_speed_criteria_agree() {
        let law = OffspringLaw::new(vec![0.0, 0.8, 0.2]).unwrap();
        for c in [0.6, 1.0, 1.5, 2.5, 5.0] {
            let r = classify(&law, c).unwrap();
            if r.regime == Regime::Recurrent {
                continue;
            }
            let by_lambda = r.lambda.unwrap() > 1.0;
            assert_eq!(r.q1_xi_half < 1.0, by_lambda, "c = {c}");
            if r.regime == Regime::TransientNull {
                let e = r.exponent.unwrap();
                assert!(e > 0.0 && e < 1.0);
            }
        }
    }

    #[test]
    fn leaves_make_speed_unasserted() {
        let r = classify(&OffspringLaw::new(vec![0.1, 0.3, 0.6]).unwrap(), 3.0).unwrap();
        assert_eq!(r.regime, Regime::Transient);
    }

    #[test]
    fn subcritical_law_rejected() {
        assert!(classify(&OffspringLaw::new(vec![0.5, 0.5]).unwrap(), 1.0).is_err());
    }
}
