use proptest::prelude::*;
use vrjp_core::MomentEngine;

/// IG(1, c^2) moment by trapezoid on a log grid; independent of the library quadrature.
fn moment_trapezoid(c: f64, t: f64) -> f64 {
    let density = |x: f64| c / (2.0 * std::f64::consts::PI * x.powi(3)).sqrt() * (-c * c * (x - 1.0).powi(2) / (2.0 * x)).exp();
    let (lo, hi, n) = (-60.0f64, 12.0f64, 200_000);
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|k| {
            let y = lo + k as f64 * h;
            let x = y.exp();
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * density(x) * x.powf(t) * x
        })
        .sum::<f64>()
        * h
}

#[test]
fn moments_match_log_grid_trapezoid() {
    for c in [0.4, 1.0, 2.5] {
        let e = MomentEngine::for_c(c).unwrap();
        for t in [-1.5, -0.5, 0.0, 0.5, 1.0, 2.0] {
            let q = moment_trapezoid(c, t);
            assert!(((e.moment(t).unwrap() - q) / q).abs() < 1e-8, "c = {c}, t = {t}");
        }
    }
}

#[test]
fn low_order_moments_in_closed_form() {
    for c in [0.5, 1.0, 2.0, 4.0] {
        let e = MomentEngine::for_c(c).unwrap();
        let l = c * c;
        assert!((e.moment(1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((e.moment(2.0).unwrap() - (1.0 + 1.0 / l)).abs() < 1e-9);
        assert!((e.xi(1.0).unwrap() - (1.0 + 1.0 / l)).abs() < 1e-9);
        assert!((e.xi(2.0).unwrap() - (1.0 + 3.0 / l + 3.0 / (l * l))).abs() < 1e-8 * e.xi(2.0).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psi_symmetric_about_half(c in 0.2f64..5.0, t in -4.0f64..5.0) {
        let e = MomentEngine::for_c(c).unwrap();
        let a = e.psi(t).unwrap();
        let b = e.psi(1.0 - t).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn psi_convex(c in 0.2f64..5.0, t in -3.0f64..4.0, h in 0.01f64..1.0) {
        let e = MomentEngine::for_c(c).unwrap();
        let mid = e.psi(t).unwrap();
        let chord = 0.5 * (e.psi(t - h).unwrap() + e.psi(t + h).unwrap());
        prop_assert!(chord >= mid - 1e-12 * (1.0 + mid.abs()));
        prop_assert!(e.psi_derivs(t).unwrap().d2 > 0.0);
    }

    #[test]
    fn rate_function_reflection(c in 0.3f64..4.0, x in 0.01f64..2.0) {
        let e = MomentEngine::for_c(c).unwrap();
        let lhs = e.rate_function(-x).unwrap();
        let rhs = e.rate_function(x).unwrap() - x;
        prop_assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        prop_assert!(lhs >= 0.0);
    }

    #[test]
    fn lambda_is_t_star_minus_half(c in 0.3f64..3.0, q1 in 0.05f64..0.95) {
        let e = MomentEngine::for_c(c).unwrap();
        let t = e.t_star(q1).unwrap();
        let l = e.lambda_measure(q1).unwrap();
        prop_assert!((l - (t - 0.5)).abs() < 1e-8);
        prop_assert!((q1 * e.moment(t).unwrap() - 1.0).abs() < 1e-8);
    }
}
