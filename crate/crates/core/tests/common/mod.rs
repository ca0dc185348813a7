#![allow(dead_code)]

use std::path::PathBuf;
use vrjp_core::ExperimentSpec;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> ExperimentSpec {
    ExperimentSpec::load(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Dense inverse of `I - Q` for the absorbing chain on the interior of
/// `(left, right)`, indexed from `left + 1`.
pub fn fundamental_matrix(env: &vrjp_core::HalflineEnv, left: i64, right: i64) -> nalgebra::DMatrix<f64> {
    let m = (right - left - 1) as usize;
    let mut a = nalgebra::DMatrix::<f64>::identity(m, m);
    for k in 0..m {
        let i = left + 1 + k as i64;
        if k + 1 < m {
            a[(k, k + 1)] -= env.p_up(i).unwrap();
        }
        if k > 0 {
            a[(k, k - 1)] -= env.p_down(i).unwrap();
        }
    }
    a.try_inverse().expect("I - Q is invertible for an absorbing chain")
}
