//! Interarrival and service law catalog.
//!
//! Each law carries closed-form moments, cdf/tail, the equilibrium (excess)
//! distribution, and a sampler. [`HeavyTrafficFamily`] packages a critical
//! pair of laws with a drift parameter and produces the r-th system of the
//! sequence by thinning arrivals, so that `r (1 - rho_r) = lambda` holds by
//! construction.

use rand::Rng;
use rand_distr::Distribution as RandDistribution;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};
use thiserror::Error;

use crate::quad::{adaptive_simpson, Integrand, QuadError, DEFAULT_REL_TOL};

#[derive(Debug, Error)]
pub enum DistError {
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("moment of order {order} is not finite")]
    InfiniteMoment { order: f64 },
    #[error("family is not critical: interarrival and service rates differ")]
    NotCritical,
    #[error("r = {r} must exceed the drift lambda = {lambda}")]
    SubcriticalIndex { r: f64, lambda: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Serializable description of a law, as it appears in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawSpec {
    Exponential {
        rate: f64,
    },
    Deterministic {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Erlang {
        shape: u32,
        rate: f64,
    },
    #[serde(rename = "hyperexp")]
    Hyperexponential {
        probs: Vec<f64>,
        rates: Vec<f64>,
    },
    /// Pareto with optional upper truncation; `max: None` leaves the tail
    /// unbounded (useful for exercising moment checks, not for heavy-traffic
    /// runs unless the exponent keeps the needed moments finite).
    BoundedPareto {
        exponent: f64,
        min: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
    },
}

/// A validated law with cached first and second moments.
#[derive(Clone, Debug)]
pub struct Law {
    spec: LawSpec,
    mean: f64,
    m2: f64,
}

fn require(cond: bool, msg: &str) -> Result<(), DistError> {
    if cond {
        Ok(())
    } else {
        Err(DistError::InvalidParameter(msg.to_string()))
    }
}

impl LawSpec {
    pub fn build(&self) -> Result<Law, DistError> {
        match self {
            LawSpec::Exponential { rate } => {
                require(rate.is_finite() && *rate > 0.0, "exponential rate must be > 0")?
            }
            LawSpec::Deterministic { value } => {
                require(value.is_finite() && *value > 0.0, "deterministic value must be > 0")?
            }
            LawSpec::Uniform { lo, hi } => require(
                lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi > lo,
                "uniform needs 0 <= lo < hi",
            )?,
            LawSpec::Erlang { shape, rate } => require(
                *shape >= 1 && rate.is_finite() && *rate > 0.0,
                "erlang needs shape >= 1 and rate > 0",
            )?,
            LawSpec::Hyperexponential { probs, rates } => {
                require(
                    !probs.is_empty() && probs.len() == rates.len(),
                    "hyperexp needs matching nonempty probs and rates",
                )?;
                require(
                    probs.iter().all(|p| *p > 0.0) && rates.iter().all(|r| *r > 0.0),
                    "hyperexp probs and rates must be > 0",
                )?;
                let total: f64 = probs.iter().sum();
                require((total - 1.0).abs() <= 1e-9, "hyperexp probs must sum to 1")?;
            }
            LawSpec::BoundedPareto { exponent, min, max } => {
                require(
                    exponent.is_finite() && *exponent > 0.0 && min.is_finite() && *min > 0.0,
                    "bounded pareto needs exponent > 0 and min > 0",
                )?;
                if let Some(m) = max {
                    require(m.is_finite() && m > min, "bounded pareto needs max > min")?;
                }
            }
        }
        let mut law = Law {
            spec: self.clone(),
            mean: 0.0,
            m2: 0.0,
        };
        law.mean = law.raw_moment(1.0);
        law.m2 = law.raw_moment(2.0);
        Ok(law)
    }
}

impl Law {
    pub fn spec(&self) -> &LawSpec {
        &self.spec
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.m2
    }

    pub fn sd(&self) -> f64 {
        (self.m2 - self.mean * self.mean).max(0.0).sqrt()
    }

    /// p-th raw moment, `inf` if divergent.
    pub fn raw_moment(&self, p: f64) -> f64 {
        match &self.spec {
            LawSpec::Exponential { rate } => (ln_gamma(p + 1.0) - p * rate.ln()).exp(),
            LawSpec::Deterministic { value } => value.powf(p),
            LawSpec::Uniform { lo, hi } => {
                (hi.powf(p + 1.0) - lo.powf(p + 1.0)) / ((hi - lo) * (p + 1.0))
            }
            LawSpec::Erlang { shape, rate } => {
                let k = f64::from(*shape);
                (ln_gamma(k + p) - ln_gamma(k) - p * rate.ln()).exp()
            }
            LawSpec::Hyperexponential { probs, rates } => {
                let g = ln_gamma(p + 1.0).exp();
                probs
                    .iter()
                    .zip(rates)
                    .map(|(pi, ri)| pi * g / ri.powf(p))
                    .sum()
            }
            LawSpec::BoundedPareto { exponent, min, max } => {
                let g = *exponent;
                match max {
                    Some(mx) => {
                        let d = 1.0 - (min / mx).powf(g);
                        if (p - g).abs() < 1e-12 {
                            g * min.powf(g) * (mx / min).ln() / d
                        } else {
                            g * min.powf(g) * (mx.powf(p - g) - min.powf(p - g)) / ((p - g) * d)
                        }
                    }
                    None => {
                        if p < g {
                            g * min.powf(p) / (g - p)
                        } else {
                            f64::INFINITY
                        }
                    }
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match &self.spec {
            LawSpec::Exponential { rate } => -(-rate * x).exp_m1(),
            LawSpec::Deterministic { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            LawSpec::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            LawSpec::Erlang { shape, rate } => gamma_lr(f64::from(*shape), rate * x),
            LawSpec::Hyperexponential { probs, rates } => probs
                .iter()
                .zip(rates)
                .map(|(p, r)| p * (-(-r * x).exp_m1()))
                .sum(),
            LawSpec::BoundedPareto { exponent, min, max } => {
                if x < *min {
                    0.0
                } else {
                    match max {
                        Some(mx) if x >= *mx => 1.0,
                        Some(mx) => {
                            (1.0 - (min / x).powf(*exponent))
                                / (1.0 - (min / mx).powf(*exponent))
                        }
                        None => 1.0 - (min / x).powf(*exponent),
                    }
                }
            }
        }
    }

    pub fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match &self.spec {
            LawSpec::Exponential { rate } => (-rate * x).exp(),
            LawSpec::Erlang { shape, rate } => gamma_ur(f64::from(*shape), rate * x),
            LawSpec::Hyperexponential { probs, rates } => probs
                .iter()
                .zip(rates)
                .map(|(p, r)| p * (-r * x).exp())
                .sum(),
            _ => 1.0 - self.cdf(x),
        }
    }

    /// Density of the absolutely continuous part; zero for point masses.
    pub fn pdf(&self, x: f64) -> f64 {
        match &self.spec {
            LawSpec::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            LawSpec::Deterministic { .. } => 0.0,
            LawSpec::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            LawSpec::Erlang { shape, rate } => {
                if x <= 0.0 {
                    if *shape == 1 && x == 0.0 {
                        *rate
                    } else {
                        0.0
                    }
                } else {
                    let k = f64::from(*shape);
                    (k * rate.ln() + (k - 1.0) * x.ln() - rate * x - ln_gamma(k)).exp()
                }
            }
            LawSpec::Hyperexponential { probs, rates } => {
                if x < 0.0 {
                    0.0
                } else {
                    probs
                        .iter()
                        .zip(rates)
                        .map(|(p, r)| p * r * (-r * x).exp())
                        .sum()
                }
            }
            LawSpec::BoundedPareto { exponent, min, max } => {
                let inside = x >= *min && max.map_or(true, |mx| x <= mx);
                if !inside {
                    0.0
                } else {
                    let d = max.map_or(1.0, |mx| 1.0 - (min / mx).powf(*exponent));
                    exponent * min.powf(*exponent) * x.powf(-exponent - 1.0) / d
                }
            }
        }
    }

    /// The point mass, if the law is degenerate.
    pub fn atom(&self) -> Option<(f64, f64)> {
        match &self.spec {
            LawSpec::Deterministic { value } => Some((*value, 1.0)),
            _ => None,
        }
    }

    pub fn support_lower(&self) -> f64 {
        match &self.spec {
            LawSpec::Uniform { lo, .. } => *lo,
            LawSpec::BoundedPareto { min, .. } => *min,
            LawSpec::Deterministic { value } => *value,
            _ => 0.0,
        }
    }

    /// Upper end of the support, or a point beyond which the tail mass is
    /// below 1e-17 for laws with unbounded support.
    pub fn support_upper(&self) -> f64 {
        match &self.spec {
            LawSpec::Deterministic { value } => *value,
            LawSpec::Uniform { hi, .. } => *hi,
            LawSpec::BoundedPareto { exponent, min, max } => match max {
                Some(mx) => *mx,
                None => min * 10f64.powf(17.0 / exponent),
            },
            LawSpec::Exponential { rate } => 40.0 / rate,
            LawSpec::Hyperexponential { rates, .. } => {
                40.0 / rates.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            LawSpec::Erlang { shape, rate } => {
                let mut x = (f64::from(*shape) + 40.0) / rate;
                while self.tail(x) > 1e-17 {
                    x *= 1.5;
                }
                x
            }
        }
    }

    /// Points where the density is discontinuous.
    pub fn knots(&self) -> Vec<f64> {
        match &self.spec {
            LawSpec::Uniform { lo, hi } => vec![*lo, *hi],
            LawSpec::BoundedPareto { min, max, .. } => {
                let mut k = vec![*min];
                if let Some(mx) = max {
                    k.push(*mx);
                }
                k
            }
            LawSpec::Deterministic { value } => vec![*value],
            _ => Vec::new(),
        }
    }

    /// `\int_0^x tail(y) dy`, in closed form per law.
    pub fn integrated_tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match &self.spec {
            LawSpec::Exponential { rate } => -(-rate * x).exp_m1() / rate,
            LawSpec::Deterministic { value } => x.min(*value),
            LawSpec::Uniform { lo, hi } => {
                if x <= *lo {
                    x
                } else if x >= *hi {
                    self.mean
                } else {
                    lo + (hi * (x - lo) - 0.5 * (x * x - lo * lo)) / (hi - lo)
                }
            }
            LawSpec::Erlang { shape, rate } => {
                let mut acc = 0.0;
                for i in 1..=*shape {
                    acc += gamma_lr(f64::from(i), rate * x);
                }
                acc / rate
            }
            LawSpec::Hyperexponential { probs, rates } => probs
                .iter()
                .zip(rates)
                .map(|(p, r)| p * (-(-r * x).exp_m1()) / r)
                .sum(),
            LawSpec::BoundedPareto { exponent, min, max } => {
                let g = *exponent;
                let mx = match max {
                    Some(mx) => *mx,
                    None => f64::INFINITY,
                };
                if x <= *min {
                    return x;
                }
                if x >= mx {
                    return self.mean;
                }
                let d = if mx.is_finite() {
                    1.0 - (min / mx).powf(g)
                } else {
                    1.0
                };
                let floor = if mx.is_finite() { (min / mx).powf(g) } else { 0.0 };
                let body = if (g - 1.0).abs() < 1e-12 {
                    min * (x / min).ln()
                } else {
                    min.powf(g) * (x.powf(1.0 - g) - min.powf(1.0 - g)) / (1.0 - g)
                };
                min + (body - (x - min) * floor) / d
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&u));
        match &self.spec {
            LawSpec::Exponential { rate } => -(-u).ln_1p() / rate,
            LawSpec::Deterministic { value } => *value,
            LawSpec::Uniform { lo, hi } => lo + u * (hi - lo),
            LawSpec::BoundedPareto { exponent, min, max } => {
                let d = max.map_or(1.0, |mx| 1.0 - (min / mx).powf(*exponent));
                min * (1.0 - u * d).powf(-1.0 / exponent)
            }
            _ => bisect_quantile(|x| self.cdf(x), u, self.support_upper()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.spec {
            LawSpec::Exponential { rate } => {
                rand_distr::Exp::new(*rate).expect("validated rate").sample(rng)
            }
            LawSpec::Deterministic { value } => *value,
            LawSpec::Uniform { lo, hi } => rng.gen_range(*lo..*hi),
            LawSpec::Erlang { shape, rate } => rand_distr::Gamma::new(f64::from(*shape), 1.0 / rate)
                .expect("validated shape and rate")
                .sample(rng),
            LawSpec::Hyperexponential { probs, rates } => {
                let mut u: f64 = rng.gen();
                for (p, r) in probs.iter().zip(rates) {
                    if u < *p {
                        return rand_distr::Exp::new(*r).expect("validated rate").sample(rng);
                    }
                    u -= p;
                }
                rand_distr::Exp::new(*rates.last().expect("nonempty"))
                    .expect("validated rate")
                    .sample(rng)
            }
            LawSpec::BoundedPareto { .. } => self.quantile(rng.gen()),
        }
    }
}

fn bisect_quantile(cdf: impl Fn(f64) -> f64, u: f64, upper: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * upper.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Service law `nu`: strictly positive, finite mean and second moment.
#[derive(Clone, Debug)]
pub struct ServiceDistribution {
    law: Law,
}

impl ServiceDistribution {
    pub fn new(spec: LawSpec) -> Result<Self, DistError> {
        let law = spec.build()?;
        require(
            law.mean().is_finite() && law.mean() > 0.0,
            "service law needs a finite positive mean",
        )?;
        if !law.second_moment().is_finite() {
            return Err(DistError::InfiniteMoment { order: 2.0 });
        }
        require(law.cdf(0.0) == 0.0, "service law must not charge the origin")?;
        Ok(Self { law })
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    pub fn spec(&self) -> &LawSpec {
        self.law.spec()
    }

    pub fn mean(&self) -> f64 {
        self.law.mean()
    }

    /// Service rate `beta = 1/mean`.
    pub fn beta(&self) -> f64 {
        1.0 / self.law.mean()
    }

    /// Standard deviation `b`.
    pub fn sd(&self) -> f64 {
        self.law.sd()
    }

    pub fn moment(&self, p: f64) -> f64 {
        self.law.raw_moment(p)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.law.cdf(x)
    }

    pub fn tail(&self, x: f64) -> f64 {
        self.law.tail(x)
    }

    /// Excess (equilibrium) cdf: `beta * \int_0^x tail(y) dy`.
    pub fn excess_cdf(&self, x: f64) -> f64 {
        (self.law.integrated_tail(x) / self.law.mean()).clamp(0.0, 1.0)
    }

    /// Density of the excess distribution, `beta * tail(x)`.
    pub fn excess_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.law.tail(x) / self.law.mean()
        }
    }

    /// Mean of the excess distribution, `m2 / (2 m1)`.
    pub fn excess_mean(&self) -> f64 {
        self.law.second_moment() / (2.0 * self.law.mean())
    }

    pub fn excess_quantile(&self, u: f64) -> f64 {
        match self.law.spec() {
            LawSpec::Exponential { rate } => -(-u).ln_1p() / rate,
            LawSpec::Deterministic { value } => u * value,
            _ => bisect_quantile(|x| self.excess_cdf(x), u, self.law.support_upper()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.law.sample(rng)
    }

    pub fn sample_excess<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.excess_quantile(rng.gen())
    }
}

/// Integrate `g(y - shift)` over `y` in `(shift, inf)` against a law or its
/// excess distribution. This is the single entry point the measure layer
/// uses for parametric parts.
pub(crate) fn integrate_shifted(
    law: &Law,
    excess: bool,
    g: &dyn Integrand,
    shift: f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    if excess {
        let beta = 1.0 / law.mean();
        let lo = shift.max(0.0);
        let hi = law.support_upper();
        if hi <= lo {
            return Ok(0.0);
        }
        let f = |y: f64| g.value(y - shift) * beta * law.tail(y);
        let mut knots = law.knots();
        if let Some((a, _)) = law.atom() {
            knots.push(a);
        }
        knots.extend(g.knots().into_iter().map(|k| k + shift));
        adaptive_simpson(&f, lo, hi, &knots, rel_tol, 1e-16)
    } else if let Some((loc, w)) = law.atom() {
        let y = loc - shift;
        if y > 0.0 {
            let v = g.value(y);
            if v.is_finite() {
                Ok(w * v)
            } else {
                Err(QuadError::NonFinite(y))
            }
        } else {
            Ok(0.0)
        }
    } else {
        let lo = shift.max(law.support_lower());
        let hi = law.support_upper();
        if hi <= lo {
            return Ok(0.0);
        }
        let f = |y: f64| g.value(y - shift) * law.pdf(y);
        let mut knots = law.knots();
        knots.extend(g.knots().into_iter().map(|k| k + shift));
        adaptive_simpson(&f, lo, hi, &knots, rel_tol, 1e-16)
    }
}

/// `\int_(shift,inf) (y - shift) dLaw(y)`, used for workload evaluations.
pub(crate) fn partial_mean_above(law: &Law, excess: bool, shift: f64) -> f64 {
    if !excess {
        // \int_s^inf tail = mean - \int_0^s tail.
        return law.mean() - law.integrated_tail(shift);
    }
    if shift <= 0.0 {
        return law.second_moment() / (2.0 * law.mean());
    }
    let beta = 1.0 / law.mean();
    let hi = law.support_upper();
    if hi <= shift {
        return 0.0;
    }
    let f = |y: f64| (y - shift) * beta * law.tail(y);
    adaptive_simpson(&f, shift, hi, &law.knots(), DEFAULT_REL_TOL, 1e-16).unwrap_or(0.0)
}

/// Interarrival law: a base shape rescaled in time.
#[derive(Clone, Debug)]
pub struct InterarrivalDistribution {
    law: Law,
    scale: f64,
}

impl InterarrivalDistribution {
    pub fn new(spec: LawSpec, scale: f64) -> Result<Self, DistError> {
        let law = spec.build()?;
        require(
            law.mean().is_finite() && law.mean() > 0.0 && scale > 0.0,
            "interarrival law needs a finite positive mean and scale",
        )?;
        Ok(Self { law, scale })
    }

    /// Arrival rate `alpha = 1 / mean`.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    pub fn mean(&self) -> f64 {
        self.scale * self.law.mean()
    }

    pub fn sd(&self) -> f64 {
        self.scale * self.law.sd()
    }

    pub fn moment(&self, p: f64) -> f64 {
        self.scale.powf(p) * self.law.raw_moment(p)
    }

    /// Draw an ordinary interarrival gap; the first arrival uses the same
    /// law (the ordinary copy of the delayed renewal process).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * self.law.sample(rng)
    }
}

/// A critical pair of laws plus the heavy-traffic drift.
///
/// The interarrival shape is normalized so its rate equals the service rate
/// `beta` at the limit; the r-th system keeps the service law fixed and
/// thins arrivals to rate `beta (1 - lambda / r)`.
#[derive(Clone, Debug)]
pub struct HeavyTrafficFamily {
    base: Law,
    base_scale: f64,
    service: ServiceDistribution,
    lambda: f64,
    theta: f64,
}

impl HeavyTrafficFamily {
    pub fn new(
        interarrival: LawSpec,
        service: LawSpec,
        lambda: f64,
        theta: f64,
    ) -> Result<Self, DistError> {
        require(lambda.is_finite(), "lambda must be finite")?;
        require(theta.is_finite() && theta > 0.0, "theta must be > 0")?;
        let service = ServiceDistribution::new(service)?;
        let base = interarrival.build()?;
        require(
            base.mean().is_finite() && base.mean() > 0.0,
            "interarrival law needs a finite positive mean",
        )?;
        let base_scale = service.mean() / base.mean();
        Ok(Self {
            base,
            base_scale,
            service,
            lambda,
            theta,
        })
    }

    pub fn service(&self) -> &ServiceDistribution {
        &self.service
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Limit arrival rate; equals `beta` because the family is critical.
    pub fn alpha(&self) -> f64 {
        self.service.beta()
    }

    /// Limit interarrival standard deviation.
    pub fn a(&self) -> f64 {
        self.base_scale * self.base.sd()
    }

    pub fn beta(&self) -> f64 {
        self.service.beta()
    }

    pub fn b(&self) -> f64 {
        self.service.sd()
    }

    /// Traffic intensity of the r-th system: `1 - lambda / r`.
    pub fn rho_r(&self, r: f64) -> f64 {
        1.0 - self.lambda / r
    }

    /// Build the r-th system of the sequence.
    pub fn instantiate_r(
        &self,
        r: f64,
    ) -> Result<(InterarrivalDistribution, ServiceDistribution), DistError> {
        if !(r > self.lambda) {
            return Err(DistError::SubcriticalIndex {
                r,
                lambda: self.lambda,
            });
        }
        let inter = InterarrivalDistribution {
            law: self.base.clone(),
            scale: self.base_scale / self.rho_r(r),
        };
        Ok((inter, self.service.clone()))
    }

    /// Check the moment and criticality assumptions, reporting each.
    pub fn validate(&self) -> AssumptionReport {
        let mut checks = Vec::new();
        let mass_at_zero = self.service.cdf(0.0);
        checks.push(AssumptionCheck {
            name: "service law does not charge the origin".into(),
            value: mass_at_zero,
            passed: mass_at_zero == 0.0,
            detail: "nu({0}) = 0".into(),
        });
        let p_service = 4.0 + self.theta;
        let m_service = self.service.moment(p_service);
        checks.push(AssumptionCheck {
            name: format!("service moment of order {p_service} finite"),
            value: m_service,
            passed: m_service.is_finite(),
            detail: "<chi^(4+theta), nu> < inf".into(),
        });
        let p_inter = 2.0 + self.theta;
        let m_inter = self.base_scale.powf(p_inter) * self.base.raw_moment(p_inter);
        checks.push(AssumptionCheck {
            name: format!("interarrival moment of order {p_inter} finite"),
            value: m_inter,
            passed: m_inter.is_finite(),
            detail: "E[u^(2+theta)] < inf".into(),
        });
        let b = self.b();
        checks.push(AssumptionCheck {
            name: "service standard deviation finite".into(),
            value: b,
            passed: b.is_finite(),
            detail: "b < inf".into(),
        });
        let rho = self.alpha() * self.service.mean();
        checks.push(AssumptionCheck {
            name: "critical traffic intensity at the limit".into(),
            value: rho,
            passed: (rho - 1.0).abs() <= 1e-12,
            detail: "rho = alpha / beta = 1".into(),
        });
        let probe_r = self.lambda.abs().max(1.0) * 8.0;
        let drift = probe_r * (1.0 - self.rho_r(probe_r));
        checks.push(AssumptionCheck {
            name: "heavy-traffic drift identity at a probe index".into(),
            value: drift,
            passed: (drift - self.lambda).abs() <= 1e-9 * self.lambda.abs().max(1.0),
            detail: format!("r (1 - rho_r) = lambda at r = {probe_r}"),
        });
        AssumptionReport { checks }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub value: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {} = {:.6e} ({})",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.value,
                c.detail
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;
    use crate::streams::{substream, StreamRole};
    use approx::assert_relative_eq;

    fn hyperexp() -> ServiceDistribution {
        ServiceDistribution::new(LawSpec::Hyperexponential {
            probs: vec![0.5, 0.5],
            rates: vec![1.0, 2.0],
        })
        .unwrap()
    }

    /// Quadrature oracle for the excess cdf, straight from its definition.
    fn excess_cdf_oracle(law: &ServiceDistribution, x: f64) -> f64 {
        let beta = law.beta();
        let f = |y: f64| beta * law.tail(y);
        adaptive_simpson(&f, 0.0, x, &law.law().knots(), 1e-10, 1e-14).unwrap()
    }

    #[test]
    fn exponential_excess_is_itself() {
        let nu = ServiceDistribution::new(LawSpec::Exponential { rate: 1.0 }).unwrap();
        assert_relative_eq!(nu.excess_cdf(1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
        let mut sup = 0.0f64;
        for i in 0..200 {
            let x = 0.05 * f64::from(i);
            sup = sup.max((nu.excess_cdf(x) - nu.cdf(x)).abs());
        }
        assert!(sup <= 1e-12);
        assert_relative_eq!(nu.excess_mean(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_excess_is_uniform() {
        let nu = ServiceDistribution::new(LawSpec::Deterministic { value: 1.0 }).unwrap();
        assert_relative_eq!(nu.excess_cdf(0.5), 0.5, epsilon = 1e-14);
        assert_relative_eq!(nu.excess_mean(), 0.5, epsilon = 1e-14);
        assert_eq!(nu.excess_cdf(2.0), 1.0);
    }

    #[test]
    fn hyperexp_excess_matches_quadrature_oracle() {
        let nu = hyperexp();
        for x in [0.25, 0.5, 1.0, 2.0, 5.0] {
            let oracle = excess_cdf_oracle(&nu, x);
            assert_relative_eq!(nu.excess_cdf(x), oracle, epsilon = 1e-8);
        }
        // E[v] = 0.75, E[v^2] = 1.25, excess mean = 5/6.
        assert_relative_eq!(nu.excess_mean(), 5.0 / 6.0, epsilon = 1e-12);
        let chi_oracle = adaptive_simpson(
            &|y: f64| y * nu.excess_pdf(y),
            0.0,
            nu.law().support_upper(),
            &[],
            1e-10,
            1e-14,
        )
        .unwrap();
        assert_relative_eq!(nu.excess_mean(), chi_oracle, epsilon = 1e-8);
    }

    #[test]
    fn erlang_and_pareto_excess_match_quadrature() {
        let erl = ServiceDistribution::new(LawSpec::Erlang { shape: 3, rate: 2.0 }).unwrap();
        let bp = ServiceDistribution::new(LawSpec::BoundedPareto {
            exponent: 1.5,
            min: 0.5,
            max: Some(8.0),
        })
        .unwrap();
        for law in [&erl, &bp] {
            for x in [0.3, 0.9, 1.7, 4.0] {
                assert_relative_eq!(
                    law.excess_cdf(x),
                    excess_cdf_oracle(law, x),
                    epsilon = 1e-8
                );
            }
            assert_relative_eq!(
                law.excess_mean(),
                law.moment(2.0) / (2.0 * law.mean()),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn uniform_excess_closed_form() {
        let nu = ServiceDistribution::new(LawSpec::Uniform { lo: 0.5, hi: 1.5 }).unwrap();
        for x in [0.2, 0.7, 1.2, 2.0] {
            assert_relative_eq!(nu.excess_cdf(x), excess_cdf_oracle(&nu, x), epsilon = 1e-9);
        }
    }

    #[test]
    fn sample_means_match_cached_moments() {
        let laws = vec![
            LawSpec::Exponential { rate: 1.0 },
            LawSpec::Deterministic { value: 1.0 },
            LawSpec::Uniform { lo: 0.5, hi: 1.5 },
            LawSpec::Erlang { shape: 4, rate: 4.0 },
            LawSpec::Hyperexponential {
                probs: vec![0.5, 0.5],
                rates: vec![1.0, 2.0],
            },
            LawSpec::BoundedPareto {
                exponent: 2.5,
                min: 0.4,
                max: Some(20.0),
            },
        ];
        for (i, spec) in laws.into_iter().enumerate() {
            let law = spec.build().unwrap();
            let mut rng = substream(42, i as u64, 0, StreamRole::Services);
            let n = 1_000_000usize;
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..n {
                let v = law.sample(&mut rng);
                sum += v;
                sum2 += v * v;
            }
            let mean = sum / n as f64;
            let var = sum2 / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt().max(1e-12);
            assert!(
                (mean - law.mean()).abs() <= 5.0 * se,
                "{:?}: sample mean {mean} vs {}",
                law.spec(),
                law.mean()
            );
        }
    }

    #[test]
    fn bounded_pareto_draws_stay_in_range() {
        let law = LawSpec::BoundedPareto {
            exponent: 1.2,
            min: 0.5,
            max: Some(4.0),
        }
        .build()
        .unwrap();
        let mut rng = substream(1, 0, 0, StreamRole::Services);
        for _ in 0..10_000 {
            let v = law.sample(&mut rng);
            assert!((0.5..=4.0).contains(&v));
        }
    }

    #[test]
    fn excess_quantile_inverts_cdf() {
        for law in [
            hyperexp(),
            ServiceDistribution::new(LawSpec::Erlang { shape: 2, rate: 1.0 }).unwrap(),
            ServiceDistribution::new(LawSpec::Uniform { lo: 0.0, hi: 2.0 }).unwrap(),
        ] {
            for u in [0.01, 0.3, 0.5, 0.9, 0.99] {
                let x = law.excess_quantile(u);
                assert_relative_eq!(law.excess_cdf(x), u, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn family_thinning_is_exact() {
        let fam = HeavyTrafficFamily::new(
            LawSpec::Exponential { rate: 1.0 },
            LawSpec::Exponential { rate: 1.0 },
            1.0,
            0.5,
        )
        .unwrap();
        let (inter, _) = fam.instantiate_r(10.0).unwrap();
        assert_relative_eq!(inter.rate(), 0.9, epsilon = 1e-12);
        assert_relative_eq!(fam.rho_r(10.0), 0.9, epsilon = 0.0);
        assert_relative_eq!(fam.rho_r(40.0), 0.975, epsilon = 0.0);
        assert_eq!(40.0 * (1.0 - fam.rho_r(40.0)), 1.0);

        let zero_drift = HeavyTrafficFamily::new(
            LawSpec::Exponential { rate: 2.0 },
            LawSpec::Exponential { rate: 1.0 },
            0.0,
            0.5,
        )
        .unwrap();
        // Base shape is normalized, so alpha^r = beta for every r when lambda = 0.
        for r in [1.0, 10.0, 1000.0] {
            let (inter, service) = zero_drift.instantiate_r(r).unwrap();
            assert_relative_eq!(inter.rate(), service.beta(), epsilon = 1e-12);
        }
        assert!(fam.instantiate_r(0.5).is_err());
    }

    #[test]
    fn validation_flags_unbounded_pareto() {
        let fam = HeavyTrafficFamily::new(
            LawSpec::Exponential { rate: 1.0 },
            LawSpec::BoundedPareto {
                exponent: 3.0,
                min: 0.5,
                max: None,
            },
            1.0,
            0.5,
        )
        .unwrap();
        let report = fam.validate();
        assert!(!report.all_passed());
        let moment_check = report
            .checks
            .iter()
            .find(|c| c.name.contains("service moment"))
            .unwrap();
        assert!(!moment_check.passed);
        assert!(moment_check.value.is_infinite());

        let ok = HeavyTrafficFamily::new(
            LawSpec::Exponential { rate: 1.0 },
            LawSpec::Exponential { rate: 1.0 },
            1.0,
            0.5,
        )
        .unwrap();
        assert!(ok.validate().all_passed());
        let bounded = HeavyTrafficFamily::new(
            LawSpec::Exponential { rate: 1.0 },
            LawSpec::BoundedPareto {
                exponent: 1.1,
                min: 0.2,
                max: Some(50.0),
            },
            1.0,
            0.5,
        )
        .unwrap();
        assert!(bounded.validate().all_passed());
    }

    #[test]
    fn renewal_counting_inverts_partial_sums() {
        // E(t) = sup{i : U_i <= t} recounted by brute force on sampled paths.
        let fam = HeavyTrafficFamily::new(
            LawSpec::Uniform { lo: 0.1, hi: 1.9 },
            LawSpec::Exponential { rate: 1.0 },
            0.5,
            0.5,
        )
        .unwrap();
        let (inter, _) = fam.instantiate_r(5.0).unwrap();
        for path in 0..100u64 {
            let mut rng = substream(9, 0, path, StreamRole::Arrivals);
            let mut times = Vec::new();
            let mut t = 0.0;
            for _ in 0..50 {
                t += inter.sample(&mut rng);
                times.push(t);
            }
            let horizon = times[30] + 0.01;
            let count = times.iter().take_while(|u| **u <= horizon).count();
            let brute = times.iter().filter(|u| **u <= horizon).count();
            assert_eq!(count, brute);
            assert_eq!(brute, 31);
        }
    }
}
