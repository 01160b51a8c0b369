//! Reflected Brownian motion on the half line: the heavy-traffic limit of
//! the workload process.
//!
//! Paths are produced by the Skorokhod reflection map applied to a Gaussian
//! random walk. Two evaluations of the running minimum are available:
//! [`Reflection::GridMin`] takes the minimum over grid points only, which
//! carries a known `O(sqrt(step))` downward boundary bias of about
//! `0.5826 * sigma * sqrt(step)`; [`Reflection::BridgeMin`] additionally
//! samples the minimum of the Brownian bridge inside each step, which makes
//! the reflected marginals exact in distribution. Distributional experiments
//! use the bridge scheme.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RbmError {
    #[error("invalid RBM parameter: {0}")]
    InvalidParameter(String),
    #[error("no steady state: drift parameter lambda = {0} is not positive")]
    NoSteadyState(f64),
}

/// Parameters of the limit workload process: drift `-lambda`, variance
/// `sigma2 = alpha a^2 + beta b^2`, start `w0 >= 0`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RbmParams {
    pub lambda: f64,
    pub sigma2: f64,
    pub w0: f64,
}

impl RbmParams {
    pub fn new(lambda: f64, sigma2: f64, w0: f64) -> Result<Self, RbmError> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(RbmError::InvalidParameter(format!(
                "variance must be positive, got {sigma2}"
            )));
        }
        if !(w0 >= 0.0) {
            return Err(RbmError::InvalidParameter(format!(
                "initial value must be nonnegative, got {w0}"
            )));
        }
        if !lambda.is_finite() {
            return Err(RbmError::InvalidParameter("drift must be finite".into()));
        }
        Ok(Self { lambda, sigma2, w0 })
    }
}

/// How the running minimum of the free walk is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reflection {
    /// Minimum over grid points (the plain discrete reflection map).
    GridMin,
    /// Grid walk augmented with sampled Brownian-bridge segment minima;
    /// reflected marginals are exact.
    BridgeMin,
}

/// A simulated reflected path on a uniform grid.
#[derive(Clone, Debug)]
pub struct RbmPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// The pushing (local time) term `max(0, max_j(-X_j))` at each grid time.
    pub pushing: Vec<f64>,
}

/// Simulate `W*(t) = X(t) + max(0, max_s(-X(s)))` for a Gaussian walk `X`
/// with increments of mean `-lambda step` and variance `sigma2 step`.
pub fn simulate<R: Rng + ?Sized>(
    params: &RbmParams,
    horizon: f64,
    step: f64,
    scheme: Reflection,
    rng: &mut R,
) -> RbmPath {
    assert!(step > 0.0 && horizon >= 0.0);
    let n = (horizon / step).round() as usize;
    let sd = (params.sigma2 * step).sqrt();
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut pushing = Vec::with_capacity(n + 1);

    let mut x = params.w0;
    let mut run_min = params.w0.min(0.0);
    times.push(0.0);
    values.push(x - run_min.min(0.0));
    pushing.push(-run_min.min(0.0));

    for k in 1..=n {
        let z: f64 = StandardNormal.sample(rng);
        let next = x - params.lambda * step + sd * z;
        match scheme {
            Reflection::GridMin => {
                run_min = run_min.min(next);
            }
            Reflection::BridgeMin => {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let d = next - x;
                let seg_min =
                    0.5 * (x + next - (d * d - 2.0 * params.sigma2 * step * u.ln()).sqrt());
                run_min = run_min.min(seg_min);
            }
        }
        x = next;
        times.push(k as f64 * step);
        let push = -run_min.min(0.0);
        values.push(x + push);
        pushing.push(push);
    }
    RbmPath {
        times,
        values,
        pushing,
    }
}

/// Steady-state cdf of the reflected motion, `1 - exp(-2 lambda x / sigma2)`;
/// requires positive drift toward the boundary.
pub fn steady_cdf(params: &RbmParams, x: f64) -> Result<f64, RbmError> {
    if !(params.lambda > 0.0) {
        return Err(RbmError::NoSteadyState(params.lambda));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(-(-2.0 * params.lambda * x / params.sigma2).exp_m1())
}

/// Steady-state cdf of the limiting queue length `Z* = C_nu W*`:
/// `1 - exp(-lambda (beta^-2 + b^2) (a^2 + b^2)^-1 x)`.
pub fn zstar_steady_cdf(x: f64, lambda: f64, beta: f64, a: f64, b: f64) -> Result<f64, RbmError> {
    if !(lambda > 0.0) {
        return Err(RbmError::NoSteadyState(lambda));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let rate = lambda * (beta.powi(-2) + b * b) / (a * a + b * b);
    Ok(-(-rate * x).exp_m1())
}

/// The queue-length-per-workload constant `C_nu = 2 beta (1 + beta^2 b^2)^-1`.
pub fn c_nu(beta: f64, b: f64) -> f64 {
    assert!(beta > 0.0 && b >= 0.0);
    2.0 * beta / (1.0 + beta * beta * b * b)
}
