//! Numerical solutions of the critical fluid model.
//!
//! A fluid model solution for data `(alpha, nu)` transports its initial
//! measure left at speed `1/Z(t)` with killing at the origin while fresh
//! `nu`-distributed mass flows in at rate `alpha`. Writing `S(t)` for the
//! cumulative transport, the total mass satisfies the closed system
//!
//! ```text
//! S'(t) = 1 / Z(t),
//! Z(t)  = xi((S(t), inf)) + alpha * int_0^t nubar(S(t) - S(s)) ds,
//! ```
//!
//! which is discretized with a Heun predictor-corrector step and a
//! trapezoid memory integral on a uniform grid. The measure at any time is
//! reconstructed as the transported initial condition plus a trapezoid sum
//! of shifted copies of `nu`; correctness is judged by the test-function
//! residual [`residual_4_2`], not by the derivation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::ServiceDistribution;
use crate::measure::{integrate, lift, shift_kill, C1Fn, FiniteMeasure, MeasureError};
use crate::quad::Integrand;

#[derive(Debug, Error)]
pub enum FluidError {
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("step {step} too large for horizon {horizon} (need step <= horizon / 100)")]
    StepTooLarge { step: f64, horizon: f64 },
    #[error("fluid mass fell below the numerical floor at t = {time}")]
    MassFloor { time: f64 },
    #[error("time {0} outside the solved horizon")]
    OutOfRange(f64),
    #[error("test function must satisfy g(0) = 0 and g'(0) = 0")]
    BoundaryCondition,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Solver knobs; the defaults match the documented accuracy model.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FluidOptions {
    /// Grid step; `None` chooses `1e-3 * horizon`.
    pub step: Option<f64>,
    /// Cap on the number of influx parts in reconstructed measures; the
    /// memory grid is subsampled beyond this.
    pub max_parts: usize,
    /// Hard error threshold for the total mass (positivity is guaranteed
    /// for nonzero initial data, so reaching the floor is a failure).
    pub mass_floor: f64,
}

impl Default for FluidOptions {
    fn default() -> Self {
        Self {
            step: None,
            max_parts: 400,
            mass_floor: 1e-12,
        }
    }
}

/// A solved fluid path: the cumulative-transport grid plus reconstruction
/// data.
#[derive(Clone, Debug)]
pub struct FluidPath {
    times: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    xi: FiniteMeasure,
    alpha: f64,
    nu: ServiceDistribution,
    step: f64,
    max_parts: usize,
}

impl FluidPath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty grid")
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn initial(&self) -> &FiniteMeasure {
        &self.xi
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn service(&self) -> &ServiceDistribution {
        &self.nu
    }

    pub fn is_zero(&self) -> bool {
        self.xi.is_zero()
    }

    /// `S(t)` with linear interpolation between grid points.
    pub fn s_at(&self, t: f64) -> Result<f64, FluidError> {
        let (i, frac) = self.locate(t)?;
        Ok(if frac == 0.0 {
            self.s[i]
        } else {
            self.s[i] + frac * (self.s[i + 1] - self.s[i])
        })
    }

    /// Interpolated total mass at `t`.
    pub fn z_at(&self, t: f64) -> Result<f64, FluidError> {
        let (i, frac) = self.locate(t)?;
        Ok(if frac == 0.0 {
            self.z[i]
        } else {
            self.z[i] + frac * (self.z[i + 1] - self.z[i])
        })
    }

    fn locate(&self, t: f64) -> Result<(usize, f64), FluidError> {
        let horizon = self.horizon();
        if !(0.0..=horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(FluidError::OutOfRange(t));
        }
        let t = t.min(horizon);
        let idx = (t / self.step).floor() as usize;
        let idx = idx.min(self.times.len() - 1);
        let frac = if idx + 1 < self.times.len() {
            ((t - self.times[idx]) / self.step).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Ok((idx, frac))
    }

    /// Reconstruct the state measure at `t`: the transported initial
    /// condition plus trapezoid-weighted shifted copies of `nu` on (at most
    /// `max_parts`) memory nodes.
    pub fn measure_at(&self, t: f64) -> Result<FiniteMeasure, FluidError> {
        self.measure_at_with_parts(t, self.max_parts)
    }

    fn measure_at_with_parts(&self, t: f64, max_parts: usize) -> Result<FiniteMeasure, FluidError> {
        let s_t = self.s_at(t)?;
        if self.is_zero() {
            return Ok(FiniteMeasure::zero());
        }
        let mut out = shift_kill(&self.xi, s_t);
        if self.alpha == 0.0 || t == 0.0 {
            return Ok(out);
        }
        // Memory nodes: the solve grid up to t (subsampled), then t itself.
        let k_t = (t / self.step).floor() as usize;
        let k_t = k_t.min(self.times.len() - 1);
        let stride = (k_t / max_parts.max(2)).max(1);
        let mut nodes: Vec<(f64, f64)> = (0..=k_t)
            .step_by(stride)
            .map(|j| (self.times[j], self.s[j]))
            .collect();
        if t > nodes.last().expect("nonempty").0 {
            nodes.push((t, s_t));
        }
        for i in 0..nodes.len() {
            let lo = if i == 0 { nodes[0].0 } else { nodes[i - 1].0 };
            let hi = if i + 1 < nodes.len() {
                nodes[i + 1].0
            } else {
                nodes[i].0
            };
            let weight = 0.5 * (hi - lo);
            if weight <= 0.0 {
                continue;
            }
            let shift = (s_t - nodes[i].1).max(0.0);
            out = out.with_part(self.nu.clone(), false, self.alpha * weight, shift)?;
        }
        Ok(out)
    }
}

fn mass_given_grid(
    xi: &FiniteMeasure,
    alpha: f64,
    nu: &ServiceDistribution,
    s_prefix: &[f64],
    step: f64,
    s_now: f64,
) -> f64 {
    let mut z = xi.tail_mass(s_now);
    if alpha > 0.0 {
        let k = s_prefix.len();
        let mut mem = 0.0;
        for (j, s_j) in s_prefix.iter().enumerate() {
            let w = if j == 0 { 0.5 } else { 1.0 };
            mem += w * nu.tail(s_now - s_j);
        }
        if k > 0 {
            mem += 0.5; // nubar(0) = 1: nu does not charge the origin
        }
        z += alpha * step * mem;
    }
    z
}

/// Solve the fluid model for initial measure `xi` and critical data
/// `(alpha, nu)` on `[0, horizon]`.
pub fn solve(
    xi: &FiniteMeasure,
    alpha: f64,
    nu: &ServiceDistribution,
    horizon: f64,
    opts: &FluidOptions,
) -> Result<FluidPath, FluidError> {
    if !(horizon > 0.0) {
        return Err(FluidError::BadHorizon(horizon));
    }
    let step = opts.step.unwrap_or(1e-3 * horizon);
    if step > 1e-2 * horizon * (1.0 + 1e-12) {
        return Err(FluidError::StepTooLarge { step, horizon });
    }
    let n = (horizon / step).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();

    if xi.is_zero() {
        // Zero initial data stays zero.
        return Ok(FluidPath {
            s: vec![0.0; n + 1],
            z: vec![0.0; n + 1],
            times,
            xi: xi.clone(),
            alpha,
            nu: nu.clone(),
            step,
            max_parts: opts.max_parts,
        });
    }

    let mut s = Vec::with_capacity(n + 1);
    let mut z = Vec::with_capacity(n + 1);
    s.push(0.0);
    for k in 0..n {
        let z_k = mass_given_grid(xi, alpha, nu, &s[..k], step, s[k]);
        if z_k < opts.mass_floor {
            return Err(FluidError::MassFloor { time: times[k] });
        }
        z.push(z_k);
        let predicted = s[k] + step / z_k;
        let z_pred = mass_given_grid(xi, alpha, nu, &s[..=k], step, predicted);
        if z_pred < opts.mass_floor {
            return Err(FluidError::MassFloor { time: times[k + 1] });
        }
        s.push(s[k] + 0.5 * step * (1.0 / z_k + 1.0 / z_pred));
    }
    let z_n = mass_given_grid(xi, alpha, nu, &s[..n], step, s[n]);
    if z_n < opts.mass_floor {
        return Err(FluidError::MassFloor { time: horizon });
    }
    z.push(z_n);

    Ok(FluidPath {
        times,
        s,
        z,
        xi: xi.clone(),
        alpha,
        nu: nu.clone(),
        step,
        max_parts: opts.max_parts,
    })
}

/// The long-time limit of any fluid model solution started from `xi`: the
/// lifted workload.
pub fn steady_state(
    xi: &FiniteMeasure,
    nu: &ServiceDistribution,
) -> Result<FiniteMeasure, MeasureError> {
    lift(xi.workload(), nu)
}

struct DerivOf<'a>(&'a dyn C1Fn);

impl Integrand for DerivOf<'_> {
    fn value(&self, x: f64) -> f64 {
        self.0.deriv(x)
    }

    fn knots(&self) -> Vec<f64> {
        self.0.knots()
    }
}

/// Residual of the fluid equation at time `t` for a C1 test function with
/// `g(0) = g'(0) = 0`:
///
/// ```text
/// | <g, z(t)> - <g, xi> + int_0^t <g', z(s)>/<1, z(s)> ds - alpha t <g, nu> |
/// ```
///
/// with trapezoid quadrature on the solve grid. Cost grows quadratically in
/// the number of grid points below `t`.
pub fn residual_4_2(path: &FluidPath, g: &dyn C1Fn, t: f64) -> Result<f64, FluidError> {
    if g.value(0.0).abs() > 1e-12 || g.deriv(0.0).abs() > 1e-12 {
        return Err(FluidError::BoundaryCondition);
    }
    if path.is_zero() {
        return Ok(0.0);
    }
    let gp = DerivOf(g);
    let k_t = ((t / path.step).floor() as usize).min(path.times.len() - 1);
    let mut nodes: Vec<f64> = path.times[..=k_t].to_vec();
    if t > nodes[nodes.len() - 1] + 1e-15 {
        nodes.push(t);
    }
    let mut drain = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &tau in &nodes {
        let zeta = path.measure_at_with_parts(tau, usize::MAX)?;
        let z = path.z_at(tau)?;
        let val = integrate(&gp, &zeta)? / z;
        if let Some((t_prev, v_prev)) = prev {
            drain += 0.5 * (tau - t_prev) * (val + v_prev);
        }
        prev = Some((tau, val));
    }
    let lhs = integrate(g, &path.measure_at_with_parts(t, usize::MAX)?)?;
    let init = integrate(g, path.initial())?;
    let inflow = path.alpha * t * nu_expectation(path.service(), g)?;
    Ok((lhs - init + drain - inflow).abs())
}

fn nu_expectation(
    nu: &ServiceDistribution,
    g: &dyn Integrand,
) -> Result<f64, MeasureError> {
    let one_nu = FiniteMeasure::zero().with_part(nu.clone(), false, 1.0, 0.0)?;
    integrate(g, &one_nu)
}
