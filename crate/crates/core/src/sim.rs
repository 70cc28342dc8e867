//! Seeded Monte Carlo experiments.
//!
//! Every replicate draws its responses from a ChaCha8 stream selected by
//! `(seed, stream index)`; coordinates are consumed in order within a stream.
//! Results are collected in replicate order and reduced sequentially, so the
//! output does not depend on the number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{excess_risk, q_norm, sigmoid, sup_norm, Dataset, Signal};
use crate::solver::{fit, FitConfig};
use crate::theory::{
    compute_bounds, extract_jumps, lambda_min, theorem2_window, JumpStructure, TheoryBounds,
    TheoryParams, Theorem2Window,
};
use crate::tvprox::tv_slice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "levels")]
pub enum TruthKind {
    Constant,
    /// Level `base + j * magnitude` on segment `j = 0..=s`.
    MonotoneStaircase,
    /// Level `base + magnitude * (j mod 2)` on segment `j = 0..=s`.
    Alternating,
    /// One level per segment.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum LambdaRule {
    Explicit(f64),
    /// A multiple of the smallest lambda the oracle bound allows.
    MinMultiple(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub kind: TruthKind,
    pub s: usize,
    pub magnitude: f64,
    pub base: f64,
    /// Sup-norm bound; used as the fit constraint and as `B` in the bounds.
    pub b: f64,
    pub t: f64,
    pub nu: f64,
    pub a0: f64,
    pub lambda_rule: LambdaRule,
    /// Permit a lambda below the minimum of the oracle bound.
    pub allow_small_lambda: bool,
}

impl Scenario {
    /// Alternating levels `base, base + magnitude, ...` with `t = 2`, `nu = A0 = 1`
    /// and `lambda = lambda_min`.
    pub fn alternating(n: usize, s: usize, magnitude: f64, base: f64, b: f64) -> Self {
        Scenario {
            n,
            kind: TruthKind::Alternating,
            s,
            magnitude,
            base,
            b,
            t: 2.0,
            nu: 1.0,
            a0: 1.0,
            lambda_rule: LambdaRule::MinMultiple(1.0),
            allow_small_lambda: false,
        }
    }

    fn base_params(&self) -> TheoryParams {
        TheoryParams {
            t: self.t,
            nu: self.nu,
            a0: self.a0,
            b: self.b,
            lambda: f64::NAN,
        }
    }

    /// Theory parameters with lambda resolved against the jump structure.
    pub fn resolve(&self, js: &JumpStructure) -> Result<TheoryParams> {
        let mut p = self.base_params();
        let lmin = lambda_min(js, &p);
        p.lambda = match self.lambda_rule {
            LambdaRule::Explicit(l) => l,
            LambdaRule::MinMultiple(m) => {
                if !(m > 0.0) || !m.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "lambda multiplier must be > 0, got {m}"
                    )));
                }
                m * lmin
            }
        };
        p.validate()?;
        if p.lambda < lmin && !self.allow_small_lambda {
            return Err(Error::InvalidInput(format!(
                "lambda {} is below lambda_min {lmin}; the oracle bound does not apply",
                p.lambda
            )));
        }
        Ok(p)
    }

    fn with_n(&self, n: usize) -> Self {
        Scenario { n, ..self.clone() }
    }
}

/// Equidistant segment lengths: the first `n mod r` segments are one longer.
pub fn equidistant_lengths(n: usize, r: usize) -> Vec<usize> {
    let (q, rem) = (n / r, n % r);
    (0..r).map(|j| if j < rem { q + 1 } else { q }).collect()
}

/// Piecewise-constant truth with `s` equidistant jumps.
pub fn generate_scenario(spec: &Scenario) -> Result<(Signal, JumpStructure)> {
    let (n, s) = (spec.n, spec.s);
    if n < 2 || s >= n {
        return Err(Error::Infeasible(format!("need 2 <= n and s < n, got n = {n}, s = {s}")));
    }
    if !spec.base.is_finite() || !spec.magnitude.is_finite() {
        return Err(Error::InvalidInput("base and magnitude must be finite".into()));
    }
    let levels: Vec<f64> = match &spec.kind {
        TruthKind::Constant => {
            if s != 0 {
                return Err(Error::Infeasible(format!("a constant truth has no jumps, got s = {s}")));
            }
            vec![spec.base]
        }
        TruthKind::MonotoneStaircase | TruthKind::Alternating if s > 0 && spec.magnitude == 0.0 => {
            return Err(Error::Infeasible("jump magnitude must be nonzero".into()));
        }
        TruthKind::MonotoneStaircase => (0..=s).map(|j| spec.base + j as f64 * spec.magnitude).collect(),
        TruthKind::Alternating => (0..=s)
            .map(|j| spec.base + spec.magnitude * (j % 2) as f64)
            .collect(),
        TruthKind::Custom(levels) => {
            if levels.len() != s + 1 {
                return Err(Error::Infeasible(format!(
                    "{} custom levels for {} segments",
                    levels.len(),
                    s + 1
                )));
            }
            if levels.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Infeasible("consecutive custom levels must differ".into()));
            }
            levels.clone()
        }
    };
    let mut values = Vec::with_capacity(n);
    for (level, d) in levels.iter().zip(equidistant_lengths(n, s + 1)) {
        values.extend(std::iter::repeat(*level).take(d));
    }
    let truth = Signal::new(values)?;
    let js = extract_jumps(&truth, 0.0);
    debug_assert_eq!(js.s(), s);
    Ok((truth, js))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_from(truth: &Signal, rng: &mut ChaCha8Rng) -> Dataset {
    let y: Vec<f64> = truth
        .as_slice()
        .iter()
        .map(|&f| if rng.gen::<f64>() < sigmoid(f) { 1.0 } else { 0.0 })
        .collect();
    Dataset::new(y)
        .and_then(|d| d.with_truth(truth.clone()))
        .expect("binary responses of matching length")
}

/// Independent Bernoulli(sigmoid(f0_i)) responses.
pub fn draw_response(truth: &Signal, seed: u64) -> Dataset {
    draw_replicate(truth, seed, 0)
}

/// Responses for one replicate; streams are independent for distinct indices.
pub fn draw_replicate(truth: &Signal, seed: u64, replicate: u64) -> Dataset {
    draw_from(truth, &mut stream_rng(seed, replicate))
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::InvalidInput("workers must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub excess_risk: f64,
    pub oracle_rhs: f64,
    pub bound_violated: bool,
    pub sup_norm_ok: bool,
    pub tv_distance: f64,
    pub sup_distance: f64,
    pub kkt_residual: f64,
    /// Set when the fit failed outright (for example a degenerate sample
    /// without a box).
    pub error: Option<String>,
}

fn run_replicate(
    truth: &Signal,
    config: &FitConfig,
    oracle_rhs: f64,
    seed: u64,
    stream: u64,
) -> ReplicateRecord {
    let data = draw_replicate(truth, seed, stream);
    let mut record = ReplicateRecord {
        replicate: stream,
        seed,
        converged: false,
        iterations: 0,
        excess_risk: f64::NAN,
        oracle_rhs,
        bound_violated: false,
        sup_norm_ok: false,
        tv_distance: f64::NAN,
        sup_distance: f64::NAN,
        kkt_residual: f64::NAN,
        error: None,
    };
    let result = match fit(&data, config) {
        Ok(r) => r,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    let f = result.f_hat.as_slice();
    let diff: Vec<f64> = f.iter().zip(truth.as_slice()).map(|(a, b)| a - b).collect();
    let excess = excess_risk(&result.f_hat, truth).expect("lengths agree");
    debug_assert!(excess >= -1e-10, "negative excess risk {excess}");
    record.converged = result.converged;
    record.iterations = result.iterations;
    record.excess_risk = excess;
    record.bound_violated = excess > oracle_rhs;
    record.sup_norm_ok = match config.box_bound {
        Some(b) => sup_norm(f) <= b,
        None => true,
    };
    record.tv_distance = tv_slice(&diff);
    record.sup_distance = sup_norm(&diff);
    record.kkt_residual = result.kkt_residual;
    record
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub scenario: Scenario,
    pub reps: usize,
    pub seed: u64,
    pub bounds: TheoryBounds,
    /// Replicates whose fit failed or did not reach the KKT tolerance.
    pub excluded: usize,
    /// Certified replicates with `|f_hat|_inf > B`.
    pub sup_norm_exceeded: usize,
    /// Certified replicates with `|f_hat|_inf <= B` and excess risk above the bound.
    pub violations: usize,
    pub violation_fraction: f64,
    /// `exp(-t)`.
    pub tolerated_fraction: f64,
    pub passed: bool,
    pub mean_excess_risk: f64,
    pub max_excess_risk: f64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub records: Vec<ReplicateRecord>,
}

/// Constrained fits on `reps` replicates, compared with the oracle bound at
/// the truth.
pub fn run_oracle_experiment(spec: &Scenario, reps: usize, seed: u64, workers: usize) -> Result<OracleReport> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be positive".into()));
    }
    let (truth, js) = generate_scenario(spec)?;
    if truth.sup_norm() > spec.b {
        return Err(Error::Infeasible(format!(
            "truth has sup norm {} above B = {}",
            truth.sup_norm(),
            spec.b
        )));
    }
    let p = spec.resolve(&js)?;
    let bounds = compute_bounds(&js, &p)?;
    let mut warnings = Vec::new();
    if bounds.lambda_below_min {
        warnings.push(format!(
            "lambda {} is below lambda_min {}; the oracle bound is not guaranteed",
            bounds.lambda, bounds.lambda_min
        ));
    }
    let config = FitConfig::new(p.lambda).with_box(spec.b);
    let records: Vec<ReplicateRecord> = with_pool(workers, || {
        (0..reps as u64)
            .into_par_iter()
            .map(|i| run_replicate(&truth, &config, bounds.oracle_rhs, seed, i))
            .collect()
    })?;

    let certified: Vec<&ReplicateRecord> = records.iter().filter(|r| r.converged).collect();
    let excluded = reps - certified.len();
    let inside: Vec<&&ReplicateRecord> = certified.iter().filter(|r| r.sup_norm_ok).collect();
    let violations = inside.iter().filter(|r| r.bound_violated).count();
    let violation_fraction = if certified.is_empty() {
        f64::NAN
    } else {
        violations as f64 / certified.len() as f64
    };
    let tolerated_fraction = (-spec.t).exp();
    let mean_excess_risk = certified.iter().map(|r| r.excess_risk).sum::<f64>() / certified.len().max(1) as f64;
    let max_excess_risk = certified.iter().map(|r| r.excess_risk).fold(f64::NEG_INFINITY, f64::max);
    if excluded > 0 {
        warnings.push(format!("{excluded} replicate(s) excluded: fit not certified"));
    }
    Ok(OracleReport {
        scenario: spec.clone(),
        reps,
        seed,
        bounds,
        excluded,
        sup_norm_exceeded: certified.len() - inside.len(),
        violations,
        violation_fraction,
        tolerated_fraction,
        passed: !certified.is_empty() && violation_fraction <= tolerated_fraction,
        mean_excess_risk,
        max_excess_risk,
        warnings,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessRecord {
    pub replicate: u64,
    pub converged: bool,
    /// `|f_hat - f0|_Qn^2 / (2K^2) + lambda TV(f_hat - f0)`.
    pub risk_lhs: f64,
    pub risk_ok: bool,
    pub sup_distance: f64,
    pub sup_ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub scenario: Scenario,
    pub m0: f64,
    pub reps: usize,
    pub seed: u64,
    pub lambda: f64,
    pub window: Theorem2Window,
    pub excluded: usize,
    /// Fraction of certified replicates meeting `risk_lhs <= 4 lambda M0`.
    pub risk_frequency: f64,
    /// Fraction of certified replicates meeting `|f_hat - f0|_inf <= (1 + 8 M0) / 2`.
    pub sup_frequency: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub records: Vec<BoundednessRecord>,
}

/// Unconstrained fits checked against the two conclusions of the
/// sup-norm boundedness result.
pub fn run_boundedness_experiment(
    spec: &Scenario,
    m0: f64,
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<BoundednessReport> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be positive".into()));
    }
    let (truth, js) = generate_scenario(spec)?;
    let tv0 = tv_slice(truth.as_slice());
    if !(m0 >= tv0.max(1.0)) {
        return Err(Error::Infeasible(format!(
            "M0 = {m0} must be at least max(TV(f0), 1) = {}",
            tv0.max(1.0)
        )));
    }
    let p = spec.resolve(&js)?;
    let window = theorem2_window(m0, truth.sup_norm(), spec.n, spec.t, spec.a0, Some(p.lambda))?;
    let two_k_sq = 2.0 * window.k_sq;
    let risk_threshold = 4.0 * p.lambda * m0;
    let config = FitConfig::new(p.lambda);
    let records: Vec<BoundednessRecord> = with_pool(workers, || {
        (0..reps as u64)
            .into_par_iter()
            .map(|i| {
                let data = draw_replicate(&truth, seed, i);
                match fit(&data, &config) {
                    Ok(r) => {
                        let diff: Vec<f64> = r
                            .f_hat
                            .as_slice()
                            .iter()
                            .zip(truth.as_slice())
                            .map(|(a, b)| a - b)
                            .collect();
                        let risk_lhs = q_norm(&diff).powi(2) / two_k_sq + p.lambda * tv_slice(&diff);
                        let sup_distance = sup_norm(&diff);
                        BoundednessRecord {
                            replicate: i,
                            converged: r.converged,
                            risk_lhs,
                            risk_ok: risk_lhs <= risk_threshold,
                            sup_distance,
                            sup_ok: sup_distance <= window.sup_threshold,
                            error: None,
                        }
                    }
                    Err(e) => BoundednessRecord {
                        replicate: i,
                        converged: false,
                        risk_lhs: f64::NAN,
                        risk_ok: false,
                        sup_distance: f64::NAN,
                        sup_ok: false,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    })?;
    let certified: Vec<&BoundednessRecord> = records.iter().filter(|r| r.converged).collect();
    let count = certified.len() as f64;
    let frequency = |ok: fn(&BoundednessRecord) -> bool| {
        if certified.is_empty() {
            f64::NAN
        } else {
            certified.iter().filter(|r| ok(r)).count() as f64 / count
        }
    };
    Ok(BoundednessReport {
        scenario: spec.clone(),
        m0,
        reps,
        seed,
        lambda: p.lambda,
        excluded: reps - certified.len(),
        risk_frequency: frequency(|r| r.risk_ok),
        sup_frequency: frequency(|r| r.sup_ok),
        window,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub lambda: f64,
    pub mean_excess_risk: f64,
    pub sd_excess_risk: f64,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub scenario: Scenario,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `log(mean excess risk)` on `log n`; absent for a
    /// single grid point or a nonpositive mean.
    pub slope: Option<f64>,
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    slope.is_finite().then_some(slope)
}

/// Mean excess risk of the constrained fit over an increasing grid of `n`,
/// with the scenario's lambda rule resolved at each `n`. Replicate `i` at grid
/// position `g` uses stream `g * 2^32 + i`.
pub fn run_rate_experiment(
    spec: &Scenario,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<RateReport> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be positive".into()));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("n grid must be nonempty and strictly increasing".into()));
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n < 4 * (spec.s + 1)) {
        return Err(Error::Infeasible(format!(
            "n = {n} is below 4 (s + 1) = {}",
            4 * (spec.s + 1)
        )));
    }
    let mut points = Vec::with_capacity(n_grid.len());
    for (g, &n) in n_grid.iter().enumerate() {
        let scenario = spec.with_n(n);
        let (truth, js) = generate_scenario(&scenario)?;
        if truth.sup_norm() > spec.b {
            return Err(Error::Infeasible(format!(
                "truth has sup norm {} above B = {}",
                truth.sup_norm(),
                spec.b
            )));
        }
        let p = scenario.resolve(&js)?;
        let config = FitConfig::new(p.lambda).with_box(spec.b);
        let base = (g as u64) << 32;
        let records: Vec<ReplicateRecord> = with_pool(workers, || {
            (0..reps as u64)
                .into_par_iter()
                .map(|i| run_replicate(&truth, &config, f64::INFINITY, seed, base + i))
                .collect()
        })?;
        let risks: Vec<f64> = records.iter().filter(|r| r.converged).map(|r| r.excess_risk).collect();
        let k = risks.len() as f64;
        let mean = risks.iter().sum::<f64>() / k;
        let var = if risks.len() > 1 {
            risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        points.push(RatePoint {
            n,
            lambda: p.lambda,
            mean_excess_risk: mean,
            sd_excess_risk: var.sqrt(),
            excluded: reps - risks.len(),
        });
    }
    let slope = if points.iter().all(|p| p.mean_excess_risk > 0.0) {
        let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.mean_excess_risk.ln()).collect();
        least_squares_slope(&x, &y)
    } else {
        None
    };
    Ok(RateReport {
        scenario: spec.clone(),
        n_grid: n_grid.to_vec(),
        reps,
        seed,
        points,
        slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    /// `exp(-t)`.
    pub bound: f64,
    pub empirical: f64,
    /// Three binomial standard errors at the bound.
    pub slack: f64,
    /// Closed-form tail when `g` has a single nonzero entry.
    pub exact: Option<f64>,
    pub holds: bool,
}

/// Empirical frequency of `eps^T g >= |g|_2 sqrt(2t)` with `eps = y - theta0`.
pub fn hoeffding_tail_check(
    g: &[f64],
    theta0: &[f64],
    t_values: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<TailRow>> {
    if draws < 10_000 {
        return Err(Error::InvalidInput(format!("need at least 10^4 draws, got {draws}")));
    }
    crate::error::check_len(g.len(), theta0.len())?;
    if g.is_empty() || theta0.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidInput("theta0 must be probabilities and g nonempty".into()));
    }
    if t_values.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput("t values must be finite and >= 0".into()));
    }
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let products: Vec<f64> = (0..draws)
        .map(|_| {
            g.iter()
                .zip(theta0)
                .map(|(&gi, &p)| {
                    let y = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
                    gi * (y - p)
                })
                .sum()
        })
        .collect();
    let support: Vec<usize> = (0..g.len()).filter(|&i| g[i] != 0.0).collect();
    Ok(t_values
        .iter()
        .map(|&t| {
            let level = norm * (2.0 * t).sqrt();
            let hits = products.iter().filter(|&&v| v >= level).count();
            let empirical = hits as f64 / draws as f64;
            let bound = (-t).exp();
            let slack = 3.0 * (bound * (1.0 - bound) / draws as f64).sqrt();
            let exact = (support.len() == 1).then(|| {
                let i = support[0];
                let (gi, p) = (g[i], theta0[i]);
                // eps_i takes 1 - p with probability p and -p otherwise
                let mut tail = 0.0;
                if gi * (1.0 - p) >= level {
                    tail += p;
                }
                if -gi * p >= level {
                    tail += 1.0 - p;
                }
                tail
            });
            TailRow {
                t,
                bound,
                empirical,
                slack,
                exact,
                holds: empirical <= bound + slack,
            }
        })
        .collect())
}
