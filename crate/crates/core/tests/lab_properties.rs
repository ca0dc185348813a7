mod common;

use common::{fixture, fixture_path};
use proptest::prelude::*;
use vrjp_core::lab::{emit_plotdata, merge, run_experiment, run_replicas, Regime, ReplicaSummary};
use vrjp_core::{ExperimentKind, ExperimentSpec, PlotKind, ResultRecord};

const FIXTURES: [&str; 19] = [
    "ballistic.toml",
    "null.toml",
    "exponent.toml",
    "boundary-above.toml",
    "boundary-below.toml",
    "recurrent-binary.toml",
    "recurrent-mixed.toml",
    "ballistic-mixed.toml",
    "ballistic-binary.toml",
    "null-ten.toml",
    "null-five.toml",
    "equivalence-path-5.toml",
    "equivalence-star-3.toml",
    "equivalence-binary-2.toml",
    "equivalence-negative.toml",
    "halfline-oracle.toml",
    "phase-scan-binary.toml",
    "phase-scan-q1.toml",
    "psi-curve.toml",
];

#[test]
fn fixtures_parse_and_round_trip() {
    let dir: Vec<_> = std::fs::read_dir(fixture_path("")).unwrap().collect();
    assert_eq!(dir.len(), FIXTURES.len());
    for name in FIXTURES {
        let spec = fixture(name);
        let text = spec.to_toml_string().unwrap();
        let back = ExperimentSpec::from_toml_str(&text).unwrap();
        assert_eq!(back, spec, "{name}");
        assert_eq!(back.to_toml_string().unwrap(), text, "{name}");
    }
}

#[test]
fn binary_phase_scan_has_monotone_b_mu() {
    let rec = run_experiment(&fixture("phase-scan-binary.toml")).unwrap();
    assert_eq!(rec.classifications.len(), 20);
    assert!(rec.classifications.windows(2).all(|w| w[1].b_mu > w[0].b_mu));
    assert_eq!(rec.classifications[0].regime, Regime::Recurrent);
    assert_eq!(rec.classifications[19].regime, Regime::TransientBallistic);
    let mut buf = Vec::new();
    emit_plotdata(&rec, PlotKind::PhaseDiagram, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 21);
}

#[test]
fn q1_scan_covers_both_speed_phases() {
    let rec = run_experiment(&fixture("phase-scan-q1.toml")).unwrap();
    let regimes: Vec<Regime> = rec.classifications.iter().map(|r| r.regime).collect();
    for want in [Regime::Recurrent, Regime::TransientBallistic, Regime::TransientNull] {
        assert!(regimes.contains(&want), "{want:?} missing");
    }
    for r in &rec.classifications {
        if let Some(l) = r.lambda {
            if r.regime != Regime::Recurrent {
                assert_eq!(l > 1.0, r.q1_xi_half < 1.0);
            }
        }
    }
}

fn speeds(rec: &ResultRecord) -> Vec<f64> {
    rec.replicas
        .iter()
        .map(|e| match e.summary.as_ref().unwrap() {
            ReplicaSummary::Speed { endpoint, .. } => *endpoint,
            _ => unreachable!(),
        })
        .collect()
}

fn max_generations(rec: &ResultRecord) -> Vec<i32> {
    rec.replicas
        .iter()
        .map(|e| match e.summary.as_ref().unwrap() {
            ReplicaSummary::Speed { max_generation, .. } => *max_generation,
            _ => unreachable!(),
        })
        .collect()
}

#[test]
fn classification_matches_simulation_matrix() {
    for (name, want) in [
        ("recurrent-binary.toml", Regime::Recurrent),
        ("recurrent-mixed.toml", Regime::Recurrent),
        ("ballistic-mixed.toml", Regime::TransientBallistic),
        ("ballistic-binary.toml", Regime::TransientBallistic),
        ("null-ten.toml", Regime::TransientNull),
        ("null-five.toml", Regime::TransientNull),
    ] {
        let spec = fixture(name);
        let rec = run_experiment(&spec).unwrap();
        assert_eq!(rec.failed(), 0);
        assert_eq!(rec.classifications[0].regime, want, "{name}");
        let agg = rec.aggregate(0).unwrap();
        let endpoint = &agg.metrics["endpoint-speed"];
        match want {
            Regime::Recurrent => {
                let below = max_generations(&rec).iter().filter(|&&g| g < 100).count();
                assert!(below * 10 >= 9 * rec.replicas.len(), "{name}: {:?}", max_generations(&rec));
            }
            Regime::TransientBallistic => {
                assert!(endpoint.mean > 3.0 * endpoint.se && endpoint.mean > 0.02, "{name}: {endpoint:?}");
            }
            _ => {
                assert!(endpoint.mean < 0.02, "{name}: {endpoint:?}");
                let mut short = spec.clone();
                short.steps = Some(10_000);
                let early = run_experiment(&short).unwrap().aggregate(0).unwrap().metrics["endpoint-speed"].mean;
                assert!(endpoint.mean < early, "{name}: {} then {}", early, endpoint.mean);
            }
        }
        assert!(speeds(&rec).iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn record_round_trips_through_json() {
    let mut spec = fixture("halfline-oracle.toml");
    spec.replicas = Some(5);
    let rec = run_experiment(&spec).unwrap();
    let back = ResultRecord::from_json(&rec.to_json().unwrap()).unwrap();
    assert_eq!(back, rec);
    assert_eq!(back.to_json().unwrap(), rec.to_json().unwrap());
}

fn small_oracle() -> ExperimentSpec {
    let mut s = ExperimentSpec::new(ExperimentKind::HalflineOracle, 5);
    s.c = Some(0.8);
    s.replicas = Some(12);
    s.sites = Some(12);
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn merge_order_does_not_matter(cuts in prop::collection::btree_set(1u64..12, 0..5), order in Just(()).prop_perturb(|_, mut rng| rng.random::<u64>())) {
        let spec = small_oracle();
        let whole = run_experiment(&spec).unwrap();
        let mut bounds: Vec<u64> = std::iter::once(0).chain(cuts).chain(std::iter::once(12)).collect();
        bounds.dedup();
        let mut parts: Vec<ResultRecord> = bounds.windows(2).map(|w| run_replicas(&spec, w[0]..w[1]).unwrap()).collect();
        // deterministic shuffle driven by `order`
        let mut key = order;
        for i in (1..parts.len()).rev() {
            key = key.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            parts.swap(i, (key >> 33) as usize % (i + 1));
        }
        let left = parts.iter().skip(1).fold(parts[0].clone(), |acc, p| merge(&acc, p).unwrap());
        let right = parts.iter().rev().skip(1).fold(parts.last().unwrap().clone(), |acc, p| merge(p, &acc).unwrap());
        prop_assert_eq!(&left, &whole);
        prop_assert_eq!(&right, &whole);
        prop_assert_eq!(left.to_json().unwrap(), whole.to_json().unwrap());
    }
}
