//! Exact analytics for the nearest-neighbour walk on `{-1, 0, 1, ..., n}` with
//! `p(i, i+1) = A_i A_{i+1} / (1 + A_i A_{i+1})` and `p(-1, 0) = 1`.
//!
//! Edge `(k-1, k)` has resistance `exp(S_k)` with `S_0 = 0` and
//! `S_k = S_{k-1} - log(A_{k-1} A_k)`. Every quantity below is assembled from
//! sums of `exp(S_k)` evaluated in log space.

use crate::error::{Error, Result};
use crate::moments::{ig_sample, MomentEngine};
use crate::numeric::log_sum_exp;
use crate::rng::{stream, Domain};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::BufRead;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalflineEnv {
    a: Vec<f64>,
    s: Vec<f64>,
}

impl HalflineEnv {
    /// Environment `A_0, ..., A_n`.
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::domain("a half-line environment needs A_0 and A_1 at least"));
        }
        if a.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::domain("environment values must be positive and finite"));
        }
        let mut s = Vec::with_capacity(a.len());
        s.push(0.0);
        for k in 1..a.len() {
            s.push(s[k - 1] - (a[k - 1] * a[k]).ln());
        }
        Ok(Self { a, s })
    }

    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![value; n + 1])
    }

    /// i.i.d. IG(1, c^2) values `A_0..A_n`.
    pub fn sample<R: Rng + ?Sized>(engine: &MomentEngine, n: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..=n).map(|_| ig_sample(engine.params(), rng)).collect())
    }

    /// Whitespace separated numbers; `#` starts a comment.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut a = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("");
            for tok in body.split_whitespace() {
                a.push(tok.parse::<f64>().map_err(|e| Error::usage(format!("bad environment value {tok:?}: {e}")))?);
            }
        }
        Self::new(a)
    }

    /// Largest site `n`.
    pub fn n(&self) -> usize {
        self.a.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.a
    }

    pub fn potential(&self) -> &[f64] {
        &self.s
    }

    /// `p(i, i+1)` for `0 <= i < n`; 1 at `i = -1`.
    pub fn p_up(&self, i: i64) -> Result<f64> {
        if i == -1 {
            return Ok(1.0);
        }
        self.check_site(i, 0, self.n() as i64 - 1)?;
        let x = self.a[i as usize] * self.a[i as usize + 1];
        Ok(x / (1.0 + x))
    }

    pub fn p_down(&self, i: i64) -> Result<f64> {
        if i == -1 {
            return Ok(0.0);
        }
        self.check_site(i, 0, self.n() as i64 - 1)?;
        Ok(1.0 / (1.0 + self.a[i as usize] * self.a[i as usize + 1]))
    }

    fn check_site(&self, i: i64, lo: i64, hi: i64) -> Result<()> {
        if i < lo || i > hi {
            return Err(Error::domain(format!("site {i} outside [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn check_interval(&self, left: i64, right: i64) -> Result<()> {
        if left < -1 || right > self.n() as i64 || left >= right {
            return Err(Error::domain(format!(
                "interval ({left}, {right}) must satisfy -1 <= left < right <= {}",
                self.n()
            )));
        }
        Ok(())
    }

    /// `log sum_{k=lo}^{hi} exp(S_k)`.
    fn log_resistance(&self, lo: i64, hi: i64) -> f64 {
        if lo > hi {
            return f64::NEG_INFINITY;
        }
        log_sum_exp(&self.s[lo as usize..=hi as usize])
    }

    /// `P_i(tau_right < tau_left)` for `left <= i <= right`.
    pub fn hit_prob_interval(&self, i: i64, left: i64, right: i64) -> Result<f64> {
        self.check_interval(left, right)?;
        self.check_site(i, left, right)?;
        Ok((self.log_resistance(left + 1, i) - self.log_resistance(left + 1, right)).exp())
    }

    /// `P_i(tau_n < tau_{-1})` for `0 <= i < n`.
    pub fn hit_prob(&self, i: i64, n: i64) -> Result<f64> {
        if i < 0 || i >= n {
            return Err(Error::domain(format!("hit_prob needs 0 <= i < n, got i = {i}, n = {n}")));
        }
        self.hit_prob_interval(i, -1, n)
    }

    /// Expected visits to `y` started from `y` before hitting `left` or
    /// `right` (both absorbing), counting time 0.
    pub fn green_function(&self, y: i64, left: i64, right: i64) -> Result<f64> {
        self.check_interval(left, right)?;
        if !(left < y && y < right) {
            return Err(Error::domain(format!("green function needs left < y < right, got {left} < {y} < {right}")));
        }
        // escape probability = p_- P_{y-1}(tau_left < tau_y) + p_+ P_{y+1}(tau_right < tau_y)
        let down = self.p_down(y)?.ln() + self.s[y as usize] - self.log_resistance(left + 1, y);
        let up = self.p_up(y)?.ln() + self.s[y as usize + 1] - self.log_resistance(y + 1, right);
        Ok((-log_sum_exp(&[down, up])).exp())
    }

    /// `P_i(tau_y < tau_left ∧ tau_right)` for `left < y < right`.
    fn reach_prob(&self, i: i64, y: i64, left: i64, right: i64) -> f64 {
        if i == y {
            1.0
        } else if i < y {
            (self.log_resistance(left + 1, i) - self.log_resistance(left + 1, y)).exp()
        } else {
            (self.log_resistance(i + 1, right) - self.log_resistance(y + 1, right)).exp()
        }
    }

    /// `E_start[tau_left ∧ tau_right]` as `sum_y P_start(tau_y < exit) G(y, y)`.
    pub fn expected_exit_time(&self, start: i64, left: i64, right: i64) -> Result<f64> {
        self.check_interval(left, right)?;
        if start < left || start >= right {
            return Err(Error::domain(format!("exit time needs left <= start < right, got {start}")));
        }
        if start == left {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for y in left + 1..right {
            total += self.reach_prob(start, y, left, right) * self.green_function(y, left, right)?;
        }
        Ok(total)
    }

    /// `1 + A_p A_{p+1} + A_p A_{p+1} E_{p+1}[tau_p ∧ tau_m] - E_p[tau_{p-1} ∧ tau_m]`.
    pub fn one_step_margin(&self, p: i64, m: i64) -> Result<f64> {
        if !(0 <= p && p < m) {
            return Err(Error::domain(format!("one-step bound needs 0 <= p < m, got p = {p}, m = {m}")));
        }
        let x = self.a[p as usize] * self.a[p as usize + 1];
        let ahead = if p + 1 < m { self.expected_exit_time(p + 1, p, m)? } else { 0.0 };
        Ok(1.0 + x + x * ahead - self.expected_exit_time(p, p - 1, m)?)
    }

    /// `S_{lambda, [Y1, Y2]}`.
    pub fn s_lambda(&self, lambda: f64, y1: usize, y2: usize) -> Result<f64> {
        if y1 >= y2 || y2 > self.n() {
            return Err(Error::domain(format!("S_lambda needs Y1 < Y2 <= n, got {y1}, {y2}")));
        }
        let a = &self.a;
        let base = a[y1].powf(lambda);
        let mut sum = 0.0;
        let mut interior = 1.0;
        for z in y1 + 1..=y2 {
            sum += interior * a[z].powf(lambda);
            interior *= a[z].powf(2.0 * lambda);
        }
        Ok(1.0 + 2.0 * base * sum + base * interior)
    }

    /// Evaluates the hitting/Green bound for every `y` in `(Y2, Y3)` and the
    /// `S_lambda` bound on the exit time from `Y1`, using exact values.
    pub fn s_lambda_bound_check(&self, lambda: f64, y1: usize, y2: usize, y3: usize) -> Result<SLambdaReport> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::domain(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        if !(y1 < y2 && y2 < y3 && y3 <= self.n()) {
            return Err(Error::domain(format!("need 0 <= Y1 < Y2 < Y3 <= n, got {y1}, {y2}, {y3}")));
        }
        let (i1, i2, i3) = (y1 as i64, y2 as i64, y3 as i64);
        let exit = self.expected_exit_time(i1, i1 - 1, i3)?;
        let mut green_margins = Vec::new();
        for y in i2 + 1..i3 {
            let reach = self.hit_prob_interval(i1, i1 - 1, y)?;
            let g = self.green_function(y, i1, i3)?;
            green_margins.push(exit - reach * g);
        }
        let s = self.s_lambda(lambda, y1, y2)?;
        let ahead = if y2 + 1 < y3 { self.expected_exit_time(i2 + 1, i2, i3)? } else { 0.0 };
        let rhs = s * (1.0 + self.a[y2 + 1].powf(lambda) * (1.0 + ahead.powf(lambda)));
        let lhs = exit.powf(lambda);
        let mut one_step_margins = Vec::new();
        for p in i1..i3 {
            one_step_margins.push(self.one_step_margin(p, i3)?);
        }
        Ok(SLambdaReport { s_lambda: s, exit_time: exit, green_margins, lhs, rhs, margin: rhs - lhs, one_step_margins })
    }

    /// Substochastic kernel on the interior sites `0..n-1` (exit at -1 or n).
    fn kernel(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 || n > self.n() {
            return Err(Error::domain(format!("survival needs 1 <= n <= {}", self.n())));
        }
        let mut q = vec![vec![0.0; n]; n];
        for i in 0..n {
            if i + 1 < n {
                q[i][i + 1] = self.p_up(i as i64)?;
            }
            if i > 0 {
                q[i][i - 1] = self.p_down(i as i64)?;
            }
        }
        Ok(q)
    }

    /// `log P_0(tau_n ∧ tau_{-1} > m)` by repeated squaring of the interior
    /// kernel, rescaled after every product so nothing underflows.
    pub fn log_survival(&self, n: usize, m: u64) -> Result<f64> {
        let q = self.kernel(n)?;
        let mut result = vec![1.0; n];
        let mut log_scale_result = 0.0;
        let mut power = q;
        let mut log_scale_power = 0.0;
        let mut e = m;
        while e > 0 {
            if e & 1 == 1 {
                result = mat_vec(&power, &result);
                log_scale_result += log_scale_power;
                let peak = result.iter().cloned().fold(0.0, f64::max);
                if peak == 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                result.iter_mut().for_each(|x| *x /= peak);
                log_scale_result += peak.ln();
            }
            e >>= 1;
            if e > 0 {
                power = mat_mul(&power, &power);
                log_scale_power *= 2.0;
                let peak = power.iter().flatten().cloned().fold(0.0, f64::max);
                if peak == 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                power.iter_mut().flatten().for_each(|x| *x /= peak);
                log_scale_power += peak.ln();
            }
        }
        Ok(result[0].ln() + log_scale_result)
    }

    /// Same quantity by applying the kernel `m` times.
    pub fn survival_stepwise(&self, n: usize, m: u64) -> Result<f64> {
        let q = self.kernel(n)?;
        let mut v = vec![1.0; n];
        for _ in 0..m {
            v = mat_vec(&q, &v);
        }
        Ok(v[0])
    }
}

/// Direct linear solves of the absorbing chain on `(left, right)`, used to
/// validate the closed forms.
pub mod oracle {
    use super::HalflineEnv;
    use crate::error::{Error, Result};

    /// Solves `x_i - lo_i x_{i-1} - up_i x_{i+1} = rhs_i` for the interior
    /// sites with zero boundary values plus `right_value` at the right end.
    fn solve(env: &HalflineEnv, left: i64, right: i64, rhs: impl Fn(i64) -> f64, right_value: f64) -> Result<Vec<f64>> {
        if left < -1 || right > env.n() as i64 || right - left < 2 {
            return Err(Error::domain(format!("oracle needs an interior in ({left}, {right})")));
        }
        let m = (right - left - 1) as usize;
        let mut diag = vec![1.0; m];
        let mut sup = vec![0.0; m];
        let mut sub = vec![0.0; m];
        let mut b = vec![0.0; m];
        for k in 0..m {
            let i = left + 1 + k as i64;
            let (down, up) = (env.p_down(i)?, env.p_up(i)?);
            sub[k] = -down;
            sup[k] = -up;
            b[k] = rhs(i);
            if k + 1 == m {
                b[k] += up * right_value;
            }
        }
        // Thomas algorithm. The pivot 1 - down_k up_{k-1} / d_{k-1} is kept as
        // up_k + s_k with s_k = down_k s_{k-1} / d_{k-1}, which avoids cancellation
        // when the walk is nearly deterministic.
        let mut s = -sub[0];
        for k in 1..m {
            let w = sub[k] / diag[k - 1];
            s = -sub[k] * s / diag[k - 1];
            diag[k] = -sup[k] + s;
            b[k] -= w * b[k - 1];
        }
        sup[m - 1] = 0.0;
        let mut x = vec![0.0; m];
        x[m - 1] = b[m - 1] / diag[m - 1];
        for k in (0..m - 1).rev() {
            x[k] = (b[k] - sup[k] * x[k + 1]) / diag[k];
        }
        Ok(x)
    }

    /// `P_i(tau_right < tau_left)` for `i` in `left+1..right`.
    pub fn hit_probabilities(env: &HalflineEnv, left: i64, right: i64) -> Result<Vec<f64>> {
        solve(env, left, right, |_| 0.0, 1.0)
    }

    /// `E_i[tau_left ∧ tau_right]` for `i` in `left+1..right`.
    pub fn exit_times(env: &HalflineEnv, left: i64, right: i64) -> Result<Vec<f64>> {
        solve(env, left, right, |_| 1.0, 0.0)
    }

    /// Expected visits to `y` from `y` before absorption.
    pub fn green(env: &HalflineEnv, y: i64, left: i64, right: i64) -> Result<f64> {
        let g = solve(env, left, right, |i| if i == y { 1.0 } else { 0.0 }, 0.0)?;
        Ok(g[(y - left - 1) as usize])
    }
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let x = a[i][k];
            if x == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += x * b[k][j];
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SLambdaReport {
    pub s_lambda: f64,
    /// `E_{Y1}[tau_{Y1-1} ∧ tau_{Y3}]`
    pub exit_time: f64,
    /// Exit time minus `P_{Y1}(tau_y < tau_{Y1-1}) G(y, y)` for each `y` in `(Y2, Y3)`.
    pub green_margins: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// One-step bound margins for `p` in `[Y1, Y3)` with `m = Y3`.
    pub one_step_margins: Vec<f64>,
}

impl SLambdaReport {
    pub fn min_margin(&self) -> f64 {
        self.green_margins.iter().chain(&self.one_step_margins).fold(self.margin, |a, &b| a.min(b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalReport {
    pub n: usize,
    pub m: u64,
    pub z: f64,
    pub z1: f64,
    pub replicas: usize,
    /// `log(mean_env P_0(tau_n ∧ tau_{-1} > m)) / n`
    pub annealed_log_survival_per_n: f64,
    /// `mean_env log P_0(...) / n`
    pub quenched_log_survival_per_n: f64,
    /// `-(z1 I(z/(2 z1)) + (1 - z1) I(-z/(2(1 - z1))))`
    pub bound: f64,
    /// `annealed - bound`; the bound holds up to subexponential factors.
    pub gap: f64,
    /// `(log q1 + annealed) / z`, the pipe-trap exponent per `log m`.
    pub trap_exponent: f64,
}

/// Largest `z n` for which `m = floor(exp(z n))` fits in 64 bits.
pub const MAX_LOG_M: f64 = 43.0;

/// Rate-function exponent `-(z1 I(z/(2 z1)) + (1 - z1) I(-z/(2(1 - z1))))`.
pub fn survival_bound(engine: &MomentEngine, z: f64, z1: f64) -> Result<f64> {
    if !(z > 0.0) || !(0.0 < z1 && z1 < 1.0) {
        return Err(Error::domain(format!("need z > 0 and 0 < z1 < 1, got z = {z}, z1 = {z1}")));
    }
    Ok(-(z1 * engine.rate_function(z / (2.0 * z1))? + (1.0 - z1) * engine.rate_function(-z / (2.0 * (1.0 - z1)))?))
}

/// Exact survival probabilities `P_0(tau_n ∧ tau_{-1} > m)`, `m = floor(e^{z n})`,
/// over `replicas` environments with `A_0` conditioned on `[a, 1/a]` (`a = 1/2`),
/// compared with the rate-function lower bound.
pub fn survival_probability_lower_bound_check(
    engine: &MomentEngine,
    q1: f64,
    z: f64,
    z1: f64,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<SurvivalReport> {
    if !(0.0 < q1 && q1 < 1.0) {
        return Err(Error::domain(format!("q1 must lie in (0, 1), got {q1}")));
    }
    if n == 0 || replicas == 0 {
        return Err(Error::domain("survival check needs n >= 1 and replicas >= 1"));
    }
    if z * n as f64 > MAX_LOG_M {
        return Err(Error::Capacity(format!("z n = {} exceeds {MAX_LOG_M}; reduce n", z * n as f64)));
    }
    let bound = survival_bound(engine, z, z1)?;
    let m = (z * n as f64).exp().floor() as u64;
    let a_lo = 0.5;
    let mut logs = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let mut rng = stream(seed, Domain::Halfline, r as u64);
        let env = loop {
            let env = HalflineEnv::sample(engine, n, &mut rng)?;
            if (a_lo..=1.0 / a_lo).contains(&env.values()[0]) {
                break env;
            }
        };
        logs.push(env.log_survival(n, m)?);
    }
    let nf = n as f64;
    let annealed = (log_sum_exp(&logs) - (replicas as f64).ln()) / nf;
    let quenched = logs.iter().sum::<f64>() / replicas as f64 / nf;
    Ok(SurvivalReport {
        n,
        m,
        z,
        z1,
        replicas,
        annealed_log_survival_per_n: annealed,
        quenched_log_survival_per_n: quenched,
        bound,
        gap: annealed - bound,
        trap_exponent: (q1.ln() + annealed) / z,
    })
}
