//! Globally adaptive Gauss-Kronrod (7/15) quadrature for small vector-valued
//! integrands on a finite interval.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Quadrature tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-12, max_subdivisions: 200 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub subdivisions: usize,
}

#[derive(Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
}

fn gk15<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, a: f64, b: f64) -> Segment<N> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let fc = f(center);
    for i in 0..N {
        kron[i] = fc[i] * WGK[7];
        gauss[i] = fc[i] * WG[3];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            kron[i] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for i in 0..N {
        value[i] = kron[i] * half;
        error[i] = ((kron[i] - gauss[i]) * half).abs();
    }
    Segment { a, b, value, error }
}

/// Integrates `f` over `[a, b]`, starting from `pieces` equal subintervals and
/// bisecting the worst one until every component meets
/// `err <= max(abs, rel * max(|I_i|, |I_0|))`.
pub fn integrate<const N: usize, F>(f: F, a: f64, b: f64, pieces: usize, tol: Tolerance) -> Result<Integral<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("quadrature interval [{a}, {b}] is invalid")));
    }
    let pieces = pieces.max(1);
    let width = (b - a) / pieces as f64;
    let mut segments: Vec<Segment<N>> = (0..pieces)
        .map(|k| {
            let lo = a + width * k as f64;
            let hi = if k + 1 == pieces { b } else { a + width * (k + 1) as f64 };
            gk15(&f, lo, hi)
        })
        .collect();

    loop {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        for s in &segments {
            for i in 0..N {
                value[i] += s.value[i];
                error[i] += s.error[i];
            }
        }
        let scale: [f64; N] = std::array::from_fn(|i| value[i].abs().max(value[0].abs()));
        let budget: [f64; N] = std::array::from_fn(|i| tol.abs.max(tol.rel * scale[i]));
        if (0..N).all(|i| error[i] <= budget[i]) {
            return Ok(Integral { value, error, subdivisions: segments.len() });
        }
        if segments.len() >= tol.max_subdivisions {
            return Err(Error::numeric(format!(
                "quadrature on [{a}, {b}] did not converge in {} subdivisions: value {:?}, error {:?}, budget {:?}",
                segments.len(),
                value,
                error,
                budget
            )));
        }
        let badness = |s: &Segment<N>| (0..N).map(|i| s.error[i] / budget[i]).fold(0.0, f64::max);
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| badness(x.1).total_cmp(&badness(y.1)))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        segments.push(gk15(&f, s.a, mid));
        segments.push(gk15(&f, mid, s.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| [x.powi(5) - 2.0 * x * x], -1.0, 2.0, 1, Tolerance::default()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - 2.0 * (8.0 + 1.0) / 3.0;
        assert!((r.value[0] - exact).abs() < 1e-13);
    }

    #[test]
    fn gaussian_and_its_moments() {
        let f = |x: f64| {
            let g = (-0.5 * x * x).exp();
            [g, x * g, x * x * g]
        };
        let r = integrate(f, -40.0, 40.0, 8, Tolerance::default()).unwrap();
        let root2pi = (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.value[0] - root2pi).abs() < 1e-12);
        assert!(r.value[1].abs() < 1e-12);
        assert!((r.value[2] - root2pi).abs() < 1e-11);
    }

    #[test]
    fn reports_non_convergence() {
        let tight = Tolerance { rel: 1e-15, abs: 0.0, max_subdivisions: 3 };
        let err = integrate(|x: f64| [x.abs().sqrt()], -1.0, 1.0, 1, tight).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }
}
