//! Finite-sample quantities for a piecewise-constant comparator.
//!
//! Positions follow the 1-based convention of the bounds: a jump at `t`
//! means `f_t != f_{t-1}`, so jump positions lie in `2..=n`. Segment `j`
//! (1-based) runs from `t_{j-1}` to `t_j - 1` with `t_0 = 1` and
//! `t_r = n + 1`, and has length `d_j = t_j - t_{j-1}`.
//!
//! Logarithms are natural except inside `log(3 + 2 log2 n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{curvature_factor, kappa as kappa_of, Signal};
use crate::tvprox::adjoint_diff_slice;

/// Jump locations, signs and segment classification of a piecewise-constant vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpStructure {
    n: usize,
    jumps: Vec<usize>,
    signs: Vec<i8>,
    segment_lengths: Vec<usize>,
    j_monotone: Vec<usize>,
    j_change: Vec<usize>,
}

impl JumpStructure {
    /// `jumps` are 1-based positions in `2..=n`, strictly increasing; `signs`
    /// holds the sign (+1/-1) of the jump at each of them.
    pub fn new(n: usize, jumps: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("n must be >= 2, got {n}")));
        }
        if jumps.len() != signs.len() {
            return Err(Error::InvalidInput(format!(
                "{} jumps but {} signs",
                jumps.len(),
                signs.len()
            )));
        }
        if let Some(&t) = jumps.iter().find(|&&t| t < 2 || t > n) {
            return Err(Error::InvalidInput(format!(
                "jump position {t} outside 2..={n}"
            )));
        }
        if jumps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "jump positions must be strictly increasing".into(),
            ));
        }
        if let Some(&q) = signs.iter().find(|&&q| q != 1 && q != -1) {
            return Err(Error::InvalidInput(format!("jump sign must be +1 or -1, got {q}")));
        }

        let s = jumps.len();
        let mut boundaries = Vec::with_capacity(s + 2);
        boundaries.push(1);
        boundaries.extend_from_slice(&jumps);
        boundaries.push(n + 1);
        let segment_lengths: Vec<usize> = boundaries.windows(2).map(|w| w[1] - w[0]).collect();

        let j_monotone: Vec<usize> = (2..=s).filter(|&j| signs[j - 2] == signs[j - 1]).collect();
        let j_change: Vec<usize> = (1..=s + 1).filter(|j| !j_monotone.contains(j)).collect();

        Ok(JumpStructure {
            n,
            jumps,
            signs,
            segment_lengths,
            j_monotone,
            j_change,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.jumps.len()
    }

    pub fn r(&self) -> usize {
        self.jumps.len() + 1
    }

    pub fn jumps(&self) -> &[usize] {
        &self.jumps
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `d_1, ..., d_r`.
    pub fn segment_lengths(&self) -> &[usize] {
        &self.segment_lengths
    }

    pub fn d_max(&self) -> usize {
        *self.segment_lengths.iter().max().expect("r >= 1")
    }

    /// Segments `j` in `2..=s` whose closing jump repeats the previous sign.
    pub fn j_monotone(&self) -> &[usize] {
        &self.j_monotone
    }

    pub fn j_change(&self) -> &[usize] {
        &self.j_change
    }

    /// `t_j` for `j` in `0..=r`.
    pub fn boundary(&self, j: usize) -> usize {
        match j {
            0 => 1,
            j if j <= self.s() => self.jumps[j - 1],
            j if j == self.r() => self.n + 1,
            _ => panic!("segment boundary index {j} out of range"),
        }
    }

    fn is_monotone(&self, j: usize) -> bool {
        self.j_monotone.binary_search(&j).is_ok()
    }
}

/// Jumps of `f` with `|f_k - f_{k-1}| > tol`, signed by the jump direction.
pub fn extract_jumps(f: &Signal, tol: f64) -> JumpStructure {
    let v = f.as_slice();
    let mut jumps = Vec::new();
    let mut signs = Vec::new();
    for k in 1..v.len() {
        let d = v[k] - v[k - 1];
        if d.abs() > tol {
            jumps.push(k + 1);
            signs.push(if d > 0.0 { 1 } else { -1 });
        }
    }
    JumpStructure::new(v.len(), jumps, signs).expect("positions come from a valid signal")
}

/// Weights on the difference coordinates `k = 2..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    values: Vec<f64>,
}

impl WeightVector {
    /// Weight at 1-based difference coordinate `k` in `2..=n`.
    pub fn get(&self, k: usize) -> f64 {
        self.values[k - 2]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sum_k 1 / w_k^2`.
    pub fn inverse_norm_sq(&self) -> f64 {
        self.values.iter().map(|w| 1.0 / (w * w)).sum()
    }

    /// Squared norm of consecutive differences of the stored weights.
    pub fn diff_norm_sq(&self) -> f64 {
        self.values.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum()
    }
}

/// `w_k^2 = ((k - t_{j-1}) / d_j) ((t_j - k) / n)` inside segment `j`, and
/// `1/n` at the jumps.
pub fn weights(js: &JumpStructure) -> WeightVector {
    let n = js.n();
    let nf = n as f64;
    let mut values = vec![0.0; n - 1];
    for j in 1..=js.r() {
        let lo = js.boundary(j - 1);
        let hi = js.boundary(j);
        let d = (hi - lo) as f64;
        for k in (lo + 1).max(2)..hi {
            let w_sq = ((k - lo) as f64 / d) * ((hi - k) as f64 / nf);
            values[k - 2] = w_sq.sqrt();
        }
        if j <= js.s() {
            values[hi - 2] = (1.0 / nf).sqrt();
        }
    }
    WeightVector { values }
}

fn log_sum_over_long_segments(js: &JumpStructure) -> f64 {
    js.segment_lengths()
        .iter()
        .filter(|&&d| d >= 2)
        .map(|&d| ((d - 1) as f64).ln() + 1.0)
        .sum()
}

/// `Delta_n^2 = 4 sum_{d_j >= 2} (log(d_j - 1) + 1) / n + s / n`.
pub fn delta_n_sq(js: &JumpStructure) -> f64 {
    let n = js.n() as f64;
    4.0 * log_sum_over_long_segments(js) / n + js.s() as f64 / n
}

/// The middle expression of the bound on `|w^{-1}|_2^2`:
/// `2 n sum_{d_j >= 2} (log(d_j - 1) + 1) + n s`.
pub fn inverse_weight_bound(js: &JumpStructure) -> f64 {
    let n = js.n() as f64;
    2.0 * n * log_sum_over_long_segments(js) + n * js.s() as f64
}

/// Confidence level, noise scaling, entropy constant, sup-norm budget and
/// tuning parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub t: f64,
    pub nu: f64,
    pub a0: f64,
    pub b: f64,
    pub lambda: f64,
}

impl TheoryParams {
    /// `nu = 1`, `A0 = 1`, `B = 1`; lambda must still be chosen.
    pub fn new(t: f64) -> Self {
        TheoryParams {
            t,
            nu: 1.0,
            a0: 1.0,
            b: 1.0,
            lambda: f64::NAN,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t", self.t), ("nu", self.nu), ("A0", self.a0), ("B", self.b)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        self.validate_lambda()
    }

    fn validate_lambda(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lambda must be finite and > 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

fn confidence_term(n: f64, t: f64) -> f64 {
    1.0 + t + (3.0 + 2.0 * n.log2()).ln()
}

/// `delta_n^2(t)`.
pub fn delta_sq_t(js: &JumpStructure, p: &TheoryParams) -> f64 {
    let n = js.n() as f64;
    let s = js.s() as f64;
    let delta = delta_n_sq(js).sqrt();
    let c = confidence_term(n, p.t);
    let first = 4.0 * p.nu * p.a0 * delta + 8.0 * (c / n).sqrt();
    let factor = 2.0 / p.nu + 4.0 * (p.a0 * delta / n).sqrt() + 4.0 * c.sqrt() / n;
    let second = delta + 2.0 * (s / n).sqrt();
    first * first + factor * second * second
}

/// `lambda_n(t)`, the noise level the penalty has to dominate.
pub fn lambda_n_t(js: &JumpStructure, p: &TheoryParams) -> f64 {
    let n = js.n() as f64;
    let delta = delta_n_sq(js).sqrt();
    let c = confidence_term(n, p.t);
    (4.0 / p.nu + 8.0 * (p.a0 * delta / n).sqrt() + 8.0 * c.sqrt() / n) / n.sqrt()
}

/// `lambda_n(t) sqrt(d_max / (2n))`.
pub fn lambda_min(js: &JumpStructure, p: &TheoryParams) -> f64 {
    lambda_n_t(js, p) * (js.d_max() as f64 / (2.0 * js.n() as f64)).sqrt()
}

/// The two parts of the effective-sparsity bound, before and after scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParts {
    /// `sum_{J_monotone} 8 (log d_j + 1)`, not yet multiplied by `lambda_n^2 / lambda^2`.
    pub monotone_sum: f64,
    /// `sum_{J_change} 8 n (log d_j + 2) / d_j`.
    pub change_sum: f64,
    /// `lambda_n(t)^2 / lambda^2`.
    pub scale: f64,
}

impl GammaParts {
    pub fn total(&self) -> f64 {
        self.scale * self.monotone_sum + self.change_sum
    }
}

pub fn gamma_parts(js: &JumpStructure, p: &TheoryParams) -> GammaParts {
    let n = js.n() as f64;
    let d = js.segment_lengths();
    let monotone_sum = js
        .j_monotone()
        .iter()
        .map(|&j| 8.0 * ((d[j - 1] as f64).ln() + 1.0))
        .sum();
    let change_sum = js
        .j_change()
        .iter()
        .map(|&j| {
            let dj = d[j - 1] as f64;
            8.0 * n * (dj.ln() + 2.0) / dj
        })
        .sum();
    let ratio = lambda_n_t(js, p) / p.lambda;
    GammaParts {
        monotone_sum,
        change_sum,
        scale: ratio * ratio,
    }
}

/// `Gamma_n^2(t)`, the closed-form bound on the effective sparsity.
///
/// Meaningful for `lambda >= lambda_min`; smaller values are still evaluated.
pub fn gamma_n_sq(js: &JumpStructure, p: &TheoryParams) -> f64 {
    gamma_parts(js, p).total()
}

/// `4 kappa delta^2 + lambda^2 Gamma^2 / 4`.
pub fn oracle_rhs(kappa: f64, delta_sq_t: f64, lambda: f64, gamma_n_sq: f64) -> f64 {
    4.0 * kappa * delta_sq_t + lambda * lambda * gamma_n_sq / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    pub n: usize,
    pub s: usize,
    pub d_max: usize,
    pub delta_n_sq_base: f64,
    pub delta_sq_t: f64,
    pub lambda_n_t: f64,
    pub lambda_min: f64,
    pub lambda: f64,
    pub lambda_below_min: bool,
    pub gamma_n_sq: f64,
    pub kappa: f64,
    pub oracle_rhs: f64,
}

pub fn compute_bounds(js: &JumpStructure, p: &TheoryParams) -> Result<TheoryBounds> {
    p.validate()?;
    let kappa = kappa_of(p.b)?;
    let delta_sq = delta_sq_t(js, p);
    let gamma = gamma_n_sq(js, p);
    let lmin = lambda_min(js, p);
    Ok(TheoryBounds {
        n: js.n(),
        s: js.s(),
        d_max: js.d_max(),
        delta_n_sq_base: delta_n_sq(js),
        delta_sq_t: delta_sq,
        lambda_n_t: lambda_n_t(js, p),
        lambda_min: lmin,
        lambda: p.lambda,
        lambda_below_min: p.lambda < lmin,
        gamma_n_sq: gamma,
        kappa,
        oracle_rhs: oracle_rhs(kappa, delta_sq, p.lambda, gamma),
    })
}

/// Dual certificate `q` in `R^n` used to bound the effective sparsity.
///
/// Inside segment `j` the profile is `sign * (1 - 2 omega_k)` with
/// `omega_k^2 = ((k - t_{j-1}) / d_j) ((t_j - k) / d_j)` on sign-changing
/// segments and `((k - t_{j-1}) / d_j) ((t_j - k) / n) lambda_n / lambda` on
/// monotone ones. Before the midpoint of a segment the sign of the jump that
/// opened it is used, from the midpoint on the sign of the jump that closes
/// it; the stretches before the first midpoint and after the last one are
/// zero. Jump coordinates carry the jump sign. With no jumps `q = 0`.
pub fn interpolating_vector(js: &JumpStructure, p: &TheoryParams) -> Result<Signal> {
    p.validate_lambda()?;
    let n = js.n();
    let mut q = vec![0.0; n];
    let s = js.s();
    if s == 0 {
        return Signal::new(q);
    }
    let ratio = lambda_n_t(js, p) / p.lambda;
    let r = js.r();
    let nf = n as f64;
    for j in 1..=r {
        let lo = js.boundary(j - 1);
        let hi = js.boundary(j);
        let d = (hi - lo) as f64;
        let midpoint = (lo + hi) as f64 / 2.0;
        let monotone = js.is_monotone(j);
        for k in lo + 1..hi {
            let left = (k - lo) as f64 / d;
            let omega_sq = if monotone {
                left * ((hi - k) as f64 / nf) * ratio
            } else {
                left * ((hi - k) as f64 / d)
            };
            let profile = 1.0 - 2.0 * omega_sq.sqrt();
            let before_mid = (k as f64) < midpoint;
            let sign = if j == 1 {
                if before_mid {
                    0.0
                } else {
                    js.signs()[0] as f64
                }
            } else if j == r {
                if before_mid {
                    js.signs()[s - 1] as f64
                } else {
                    0.0
                }
            } else if before_mid {
                js.signs()[j - 2] as f64
            } else {
                js.signs()[j - 1] as f64
            };
            q[k - 1] = sign * profile;
        }
    }
    for (&t, &sign) in js.jumps().iter().zip(js.signs()) {
        q[t - 1] = sign as f64;
    }
    Signal::new(q)
}

/// Per-coordinate weights `|1 - w_k lambda_n / lambda|` on `k = 2..=n`.
fn off_support_weights(js: &JumpStructure, p: &TheoryParams) -> Vec<f64> {
    let ratio = lambda_n_t(js, p) / p.lambda;
    weights(js)
        .values()
        .iter()
        .map(|w| (1.0 - w * ratio).abs())
        .collect()
}

/// `c(f) = q_S^T (Df)_S - |(1 - w lambda_n / lambda) (Df)_{-S}|_1`.
///
/// Positively homogeneous of degree one and concave.
pub fn sparsity_functional(js: &JumpStructure, p: &TheoryParams, f: &[f64]) -> Result<f64> {
    p.validate_lambda()?;
    if f.len() != js.n() {
        return Err(Error::Dimension {
            expected: js.n(),
            found: f.len(),
        });
    }
    let a = off_support_weights(js, p);
    Ok(functional_with(js, &a, f))
}

fn functional_with(js: &JumpStructure, a: &[f64], f: &[f64]) -> f64 {
    let mut on = vec![0.0; js.n() - 1];
    for (&t, &sign) in js.jumps().iter().zip(js.signs()) {
        on[t - 2] = sign as f64;
    }
    let mut value = 0.0;
    let mut jump_iter = js.jumps().iter().peekable();
    for k in 2..=js.n() {
        let d = f[k - 1] - f[k - 2];
        if jump_iter.peek() == Some(&&k) {
            jump_iter.next();
            value += on[k - 2] * d;
        } else {
            value -= a[k - 2] * d.abs();
        }
    }
    value
}

/// Numerical effective sparsity with its certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSparsity {
    /// Dual value `n min_v |D^T v|^2`; an upper bound on the effective sparsity.
    pub value: f64,
    /// Primal value `(c(f) / |f|_Qn)^2` at the recovered maximizer; a lower bound.
    pub lower: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest `n` accepted by [`effective_sparsity_oracle`].
pub const EFFECTIVE_SPARSITY_MAX_N: usize = 64;

/// Effective sparsity `max_{f != 0} (c(f) / |f|_Qn)^2` for small `n`.
///
/// Since `c(f) = min_{v in V} <v, Df>` over the box `V` (jump coordinates fixed
/// to the jump signs, others bounded by `|1 - w_k lambda_n / lambda|`),
/// the maximum over the `Q_n` unit ball equals `sqrt(n) min_{v in V} |D^T v|_2`.
/// The box QP is solved by accelerated projected gradient; every iterate `v`
/// yields the primal point `f = D^T v`, whose value is a lower bound. The
/// loop stops once the two bounds agree to a relative `1e-6`.
pub fn effective_sparsity_oracle(js: &JumpStructure, p: &TheoryParams) -> Result<EffectiveSparsity> {
    const MAX_ITER: usize = 2_000_000;
    const GAP: f64 = 1e-6;

    let n = js.n();
    if n > EFFECTIVE_SPARSITY_MAX_N {
        return Err(Error::TooLarge {
            n,
            limit: EFFECTIVE_SPARSITY_MAX_N,
        });
    }
    p.validate_lambda()?;
    if js.s() == 0 {
        return Ok(EffectiveSparsity {
            value: 0.0,
            lower: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let a = off_support_weights(js, p);
    let mut fixed: Vec<Option<f64>> = vec![None; n - 1];
    for (&t, &sign) in js.jumps().iter().zip(js.signs()) {
        fixed[t - 2] = Some(sign as f64);
    }
    let project = |v: &mut [f64]| {
        for k in 0..v.len() {
            v[k] = match fixed[k] {
                Some(sign) => sign,
                None => v[k].clamp(-a[k], a[k]),
            };
        }
    };

    let q = interpolating_vector(js, p)?;
    let mut v: Vec<f64> = q.as_slice()[1..].to_vec();
    project(&mut v);
    let mut v_prev = v.clone();
    let mut probe = v.clone();
    let mut momentum = 1.0_f64;
    let nf = n as f64;
    let mut upper = f64::INFINITY;
    let mut lower = 0.0_f64;

    let evaluate = |v: &[f64], upper: &mut f64, lower: &mut f64| {
        let dtv = adjoint_diff_slice(v);
        let norm_sq: f64 = dtv.iter().map(|x| x * x).sum();
        *upper = upper.min(nf * norm_sq);
        if norm_sq > 0.0 {
            let c = functional_with(js, &a, &dtv).max(0.0);
            // |f|_Qn = |f|_2 / sqrt(n)
            let ratio = c / (norm_sq / nf).sqrt();
            *lower = lower.max(ratio * ratio);
        }
    };

    evaluate(&v, &mut upper, &mut lower);
    let mut iterations = 0;
    while iterations < MAX_ITER && upper - lower > GAP * upper {
        iterations += 1;
        let dtv = adjoint_diff_slice(&probe);
        let old_obj: f64 = adjoint_diff_slice(&v).iter().map(|x| x * x).sum();
        v_prev.copy_from_slice(&v);
        // gradient of 0.5 |D^T v|^2 is D D^T v; |D D^T| <= 4
        for k in 0..n - 1 {
            v[k] = probe[k] - 0.25 * (dtv[k + 1] - dtv[k]);
        }
        project(&mut v);
        let new_obj: f64 = adjoint_diff_slice(&v).iter().map(|x| x * x).sum();
        if new_obj > old_obj {
            v.copy_from_slice(&v_prev);
            probe.copy_from_slice(&v);
            momentum = 1.0;
            continue;
        }
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next;
        for k in 0..n - 1 {
            probe[k] = v[k] + beta * (v[k] - v_prev[k]);
        }
        momentum = next;
        if iterations % 16 == 0 {
            evaluate(&v, &mut upper, &mut lower);
        }
    }
    evaluate(&v, &mut upper, &mut lower);

    Ok(EffectiveSparsity {
        value: upper,
        lower,
        iterations,
        converged: upper - lower <= GAP * upper,
    })
}

/// Tuning window and conclusions of the sup-norm boundedness result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Window {
    pub m0: f64,
    pub f0_inf: f64,
    pub n: usize,
    pub t: f64,
    pub a0: f64,
    /// `1 + 16 M0 + |f0|_inf`.
    pub exponent: f64,
    /// `(1 + e^x)^2 / e^x` at the exponent.
    pub k_sq: f64,
    /// `(16 (2K^2) M0)^{-1}`.
    pub lambda_hi: f64,
    /// `2^8 n^{-2/3} A0^{2/3} (2K^2)^{1/3}`.
    pub lambda_lo_entropy: f64,
    /// `2^8 (2K^2) (1 + t) / n`.
    pub lambda_lo_noise: f64,
    pub lambda_lo: f64,
    pub feasible: bool,
    /// Names the lower-bound condition(s) that exceed the upper bound.
    pub blocking: Option<String>,
    /// `4 lambda M0` when a lambda was supplied.
    pub risk_threshold: Option<f64>,
    /// `(1 + 8 M0) / 2`.
    pub sup_threshold: f64,
}

pub fn theorem2_window(
    m0: f64,
    f0_inf: f64,
    n: usize,
    t: f64,
    a0: f64,
    lambda: Option<f64>,
) -> Result<Theorem2Window> {
    if !(m0 >= 1.0) || !m0.is_finite() {
        return Err(Error::InvalidInput(format!("M0 must be >= 1, got {m0}")));
    }
    if !(f0_inf >= 0.0) || !f0_inf.is_finite() {
        return Err(Error::InvalidInput(format!("|f0|_inf must be >= 0, got {f0_inf}")));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("n must be >= 2, got {n}")));
    }
    for (name, v) in [("t", t), ("A0", a0)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be > 0, got {v}")));
        }
    }
    let exponent = 1.0 + 16.0 * m0 + f0_inf;
    let k_sq = curvature_factor(exponent);
    let two_k_sq = 2.0 * k_sq;
    let nf = n as f64;
    let lambda_hi = 1.0 / (16.0 * two_k_sq * m0);
    let lambda_lo_entropy = 256.0 * nf.powf(-2.0 / 3.0) * a0.powf(2.0 / 3.0) * two_k_sq.cbrt();
    let lambda_lo_noise = 256.0 * two_k_sq * (1.0 + t) / nf;
    let lambda_lo = lambda_lo_entropy.max(lambda_lo_noise);
    let feasible = lambda_lo <= lambda_hi;
    let blocking = if feasible {
        None
    } else {
        let mut names = Vec::new();
        if lambda_lo_entropy > lambda_hi {
            names.push("entropy lower bound 2^8 n^(-2/3) A0^(2/3) (2K^2)^(1/3)");
        }
        if lambda_lo_noise > lambda_hi {
            names.push("noise lower bound 2^8 (2K^2) (1+t)/n");
        }
        Some(format!("{} exceeds upper bound (16 (2K^2) M0)^(-1)", names.join(" and ")))
    };
    Ok(Theorem2Window {
        m0,
        f0_inf,
        n,
        t,
        a0,
        exponent,
        k_sq,
        lambda_hi,
        lambda_lo_entropy,
        lambda_lo_noise,
        lambda_lo,
        feasible,
        blocking,
        risk_threshold: lambda.map(|l| 4.0 * l * m0),
        sup_threshold: (1.0 + 8.0 * m0) / 2.0,
    })
}
