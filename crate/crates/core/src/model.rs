//! Logistic loss in the canonical (log-odds) parametrisation.
//!
//! For a log-odds vector `f` and responses `y` the empirical risk is
//! `(1/n) sum(-y_i f_i + log(1 + e^{f_i}))`. The theoretical risk replaces
//! `y_i` by `theta_i = sigmoid(f0_i)`; the excess risk is the gap to the truth,
//! which equals the average Bernoulli Kullback-Leibler divergence.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};

/// Above this argument `softplus` switches to `x + log1p(e^{-x})`.
const SOFTPLUS_SWITCH: f64 = 30.0;

/// A finite log-odds vector of length at least two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a signal needs at least 2 entries, got {}",
                values.len()
            )));
        }
        check_finite(&values, "signal")?;
        Ok(Signal(values))
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Signal::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.0)
    }
}

impl TryFrom<Vec<f64>> for Signal {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Signal::new(values)
    }
}

impl From<Signal> for Vec<f64> {
    fn from(s: Signal) -> Self {
        s.0
    }
}

impl AsRef<[f64]> for Signal {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Binary responses, optionally paired with the log-odds that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    truth: Option<Signal>,
}

impl Dataset {
    /// Builds a dataset from responses that must each be exactly 0 or 1.
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a dataset needs at least 2 observations, got {}",
                y.len()
            )));
        }
        if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidInput(format!(
                "response at index {i} is {}, expected 0 or 1",
                y[i]
            )));
        }
        Ok(Dataset { y, truth: None })
    }

    pub fn from_bools(y: &[bool]) -> Result<Self> {
        Dataset::new(y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }

    pub fn with_truth(mut self, truth: Signal) -> Result<Self> {
        check_len(self.y.len(), truth.len())?;
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn truth(&self) -> Option<&Signal> {
        self.truth.as_ref()
    }

    pub fn mean_response(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }

    /// True when every response belongs to the same class.
    pub fn is_degenerate(&self) -> bool {
        let first = self.y[0];
        self.y.iter().all(|&v| v == first)
    }
}

/// Curvature of the logistic risk on a sup-norm ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureConstants {
    /// Sup-norm budget.
    pub b: f64,
    /// `(1 + e^B)^2 / e^B`.
    pub kappa: f64,
    /// The same expression at `max(|f|_inf, |f0|_inf)`.
    pub k_f_sq: f64,
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > SOFTPLUS_SWITCH {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `(1 + e^m)^2 / e^m`, written as `2 + 2 cosh(m)`.
pub fn curvature_factor(m: f64) -> f64 {
    2.0 + 2.0 * m.cosh()
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `|v|_2 / sqrt(n)`.
pub fn q_norm(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Per-coordinate loss `softplus(f) - y f`, valid for any real `y`.
///
/// Written as `(1 - y) softplus(f) + y softplus(-f)` so that the `y = 1`
/// branch keeps full relative accuracy for large `f`.
#[inline]
pub(crate) fn pointwise_loss(f: f64, y: f64) -> f64 {
    let mut out = 0.0;
    if y != 1.0 {
        out += (1.0 - y) * softplus(f);
    }
    if y != 0.0 {
        out += y * softplus(-f);
    }
    out
}

/// Mean logistic loss for responses in `[0, 1]` (not necessarily binary).
pub fn mean_logistic_loss(f: &[f64], y: &[f64]) -> Result<f64> {
    check_len(f.len(), y.len())?;
    check_finite(f, "log-odds")?;
    Ok(mean_loss_unchecked(f, y))
}

pub(crate) fn mean_loss_unchecked(f: &[f64], y: &[f64]) -> f64 {
    let total: f64 = f.iter().zip(y).map(|(&fi, &yi)| pointwise_loss(fi, yi)).sum();
    total / f.len() as f64
}

/// Gradient of [`mean_logistic_loss`]: `(sigmoid(f_i) - y_i) / n`.
pub fn logistic_loss_gradient(f: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_len(f.len(), y.len())?;
    check_finite(f, "log-odds")?;
    let mut out = vec![0.0; f.len()];
    gradient_into(f, y, &mut out);
    Ok(out)
}

pub(crate) fn gradient_into(f: &[f64], y: &[f64], out: &mut [f64]) {
    let inv_n = 1.0 / f.len() as f64;
    for ((o, &fi), &yi) in out.iter_mut().zip(f).zip(y) {
        *o = (sigmoid(fi) - yi) * inv_n;
    }
}

pub fn empirical_risk(f: &Signal, data: &Dataset) -> Result<f64> {
    mean_logistic_loss(f.as_slice(), data.y())
}

pub fn gradient(f: &Signal, data: &Dataset) -> Result<Signal> {
    Signal::new(logistic_loss_gradient(f.as_slice(), data.y())?)
}

/// Expected empirical risk when `y_i ~ Bernoulli(sigmoid(truth_i))`.
pub fn theoretical_risk(f: &Signal, truth: &Signal) -> Result<f64> {
    check_len(truth.len(), f.len())?;
    let total: f64 = f
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(&fi, &f0)| pointwise_loss(fi, sigmoid(f0)))
        .sum();
    Ok(total / f.len() as f64)
}

/// `R(f) - R(f0)`, accumulated coordinatewise.
pub fn excess_risk(f: &Signal, truth: &Signal) -> Result<f64> {
    check_len(truth.len(), f.len())?;
    let total: f64 = f
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(&fi, &f0)| {
            let theta = sigmoid(f0);
            pointwise_loss(fi, theta) - pointwise_loss(f0, theta)
        })
        .sum();
    Ok(total / f.len() as f64)
}

pub fn kappa(b: f64) -> Result<f64> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sup-norm budget must be finite and >= 0, got {b}"
        )));
    }
    Ok(curvature_factor(b))
}

pub fn curvature(b: f64, f: &Signal, truth: &Signal) -> Result<CurvatureConstants> {
    check_len(truth.len(), f.len())?;
    let kappa = kappa(b)?;
    let m = f.sup_norm().max(truth.sup_norm());
    Ok(CurvatureConstants {
        b,
        kappa,
        k_f_sq: curvature_factor(m),
    })
}
