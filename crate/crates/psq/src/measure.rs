//! Finite nonnegative measures on `[0, inf)` and the metric used to compare
//! them.
//!
//! A [`FiniteMeasure`] is a hybrid of point atoms and parametric parts, where
//! a part is a scaled copy of a catalog law (or of its excess distribution)
//! shifted left and restricted to `(0, inf)`. Empirical queue states are pure
//! atoms; images of the lifting map are single excess parts; fluid-model
//! reconstructions mix both. Keeping the parts parametric avoids ever
//! discretizing the excess distribution.
//!
//! Measures are compared with the series-plus-sup metric
//!
//! ```text
//! d[z1, z2] = sum_k 2^-k (|<g_k, z1> - <g_k, z2>| ∧ 1) + sup_k |<h_k, z1> - <h_k, z2>|
//! ```
//!
//! over a concrete family of dyadic smoothstep bumps `g_k` and unit ramps
//! `h_k`. Values of the metric are only comparable within one family.

use crate::dist::{integrate_shifted, partial_mean_above, ServiceDistribution};
use crate::quad::{adaptive_simpson, Integrand, QuadError, DEFAULT_REL_TOL};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("atom weight must be nonnegative, got {0}")]
    NegativeWeight(f64),
    #[error("part scale must be nonnegative, got {0}")]
    NegativeScale(f64),
    #[error("the lifting map needs a nonnegative workload, got {0}")]
    NegativeWorkload(f64),
    #[error("path diagnostics need at least two samples")]
    TooFewSamples,
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// A scaled, left-shifted copy of a catalog law restricted to `(0, inf)`.
#[derive(Clone, Debug)]
pub struct ParametricPart {
    law: ServiceDistribution,
    excess: bool,
    scale: f64,
    shift: f64,
}

impl ParametricPart {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn is_excess(&self) -> bool {
        self.excess
    }

    pub fn law(&self) -> &ServiceDistribution {
        &self.law
    }

    fn mass(&self) -> f64 {
        self.scale * self.tail_from(0.0)
    }

    /// Mass placed beyond `x >= 0`, i.e. `scale * Law((x + shift, inf))`.
    fn tail_from(&self, x: f64) -> f64 {
        let y = x + self.shift;
        if self.excess {
            1.0 - self.law.excess_cdf(y)
        } else {
            self.law.tail(y)
        }
    }

    fn workload(&self) -> f64 {
        self.scale * partial_mean_above(self.law.law(), self.excess, self.shift)
    }

    fn integrate(&self, g: &dyn Integrand, rel_tol: f64) -> Result<f64, QuadError> {
        Ok(self.scale * integrate_shifted(self.law.law(), self.excess, g, self.shift, rel_tol)?)
    }

    fn support_upper(&self) -> f64 {
        (self.law.law().support_upper() - self.shift).max(0.0)
    }
}

/// Finite nonnegative Borel measure on `[0, inf)` that never charges `{0}`.
#[derive(Clone, Debug, Default)]
pub struct FiniteMeasure {
    atoms: Vec<(f64, f64)>,
    parts: Vec<ParametricPart>,
}

impl FiniteMeasure {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Truncated Dirac measure: an atom at `x` if `x > 0`, otherwise zero.
    pub fn delta(x: f64) -> Self {
        let mut m = Self::zero();
        if x > 0.0 {
            m.atoms.push((x, 1.0));
        }
        m
    }

    /// Build from `(location, weight)` pairs; atoms at or left of the origin
    /// are dropped (the delta-plus truncation), zero weights are dropped.
    pub fn from_atoms<I>(atoms: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut m = Self::zero();
        for (x, w) in atoms {
            if w < 0.0 {
                return Err(MeasureError::NegativeWeight(w));
            }
            if x > 0.0 && w > 0.0 {
                m.atoms.push((x, w));
            }
        }
        Ok(m)
    }

    pub fn with_part(
        mut self,
        law: ServiceDistribution,
        excess: bool,
        scale: f64,
        shift: f64,
    ) -> Result<Self, MeasureError> {
        if scale < 0.0 {
            return Err(MeasureError::NegativeScale(scale));
        }
        if scale > 0.0 {
            self.parts.push(ParametricPart {
                law,
                excess,
                scale,
                shift: shift.max(0.0),
            });
        }
        Ok(self)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn parts(&self) -> &[ParametricPart] {
        &self.parts
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.parts.is_empty()
    }

    /// Total mass `<1, .>`.
    pub fn mass(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|(_, w)| w).sum();
        let p: f64 = self.parts.iter().map(ParametricPart::mass).sum();
        a + p
    }

    /// First moment `<chi, .>`.
    pub fn workload(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|(x, w)| x * w).sum();
        let p: f64 = self.parts.iter().map(ParametricPart::workload).sum();
        a + p
    }

    /// Mass strictly beyond `x`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        let a: f64 = self
            .atoms
            .iter()
            .filter(|(loc, _)| *loc > x)
            .map(|(_, w)| w)
            .sum();
        let p: f64 = self.parts.iter().map(|p| p.scale * p.tail_from(x)).sum();
        a + p
    }

    /// Essentially the largest point of the support; for parts with
    /// unbounded laws this is the point beyond which the remaining mass is
    /// negligible (tail below 1e-17 of the law).
    pub fn support_bound(&self) -> f64 {
        let a = self
            .atoms
            .iter()
            .map(|(x, _)| *x)
            .fold(0.0f64, f64::max);
        let p = self
            .parts
            .iter()
            .map(ParametricPart::support_upper)
            .fold(0.0f64, f64::max);
        a.max(p)
    }

    /// Multiply all mass by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self, MeasureError> {
        if c < 0.0 {
            return Err(MeasureError::NegativeScale(c));
        }
        if c == 0.0 {
            return Ok(Self::zero());
        }
        let mut out = self.clone();
        for (_, w) in &mut out.atoms {
            *w *= c;
        }
        for part in &mut out.parts {
            part.scale *= c;
        }
        Ok(out)
    }

    /// Sum of two measures.
    pub fn merged(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.atoms.extend_from_slice(&other.atoms);
        out.parts.extend_from_slice(&other.parts);
        out
    }
}

/// `<g, zeta>`, with parametric parts integrated by adaptive quadrature at
/// relative tolerance 1e-8 (closed forms where the law provides them).
pub fn integrate(g: &dyn Integrand, zeta: &FiniteMeasure) -> Result<f64, MeasureError> {
    let mut acc = 0.0;
    for (x, w) in &zeta.atoms {
        let v = g.value(*x);
        if !v.is_finite() {
            return Err(MeasureError::Quad(QuadError::NonFinite(*x)));
        }
        acc += w * v;
    }
    for part in &zeta.parts {
        acc += part.integrate(g, DEFAULT_REL_TOL)?;
    }
    Ok(acc)
}

/// Transport to the left by `s` and kill at the origin: atoms move from `x`
/// to `x - s` and vanish when `x - s <= 0`; parametric shifts accumulate.
pub fn shift_kill(zeta: &FiniteMeasure, s: f64) -> FiniteMeasure {
    debug_assert!(s >= 0.0);
    if s == 0.0 {
        return zeta.clone();
    }
    let mut out = FiniteMeasure::zero();
    for (x, w) in &zeta.atoms {
        if *x - s > 0.0 {
            out.atoms.push((*x - s, *w));
        }
    }
    for part in &zeta.parts {
        let mut p = part.clone();
        p.shift += s;
        if p.scale * p.tail_from(0.0) > 0.0 {
            out.parts.push(p);
        }
    }
    out
}

/// The lifting map: workload `w` to the manifold measure
/// `(w / <chi, nu_e>) nu_e`.
pub fn lift(w: f64, nu: &ServiceDistribution) -> Result<FiniteMeasure, MeasureError> {
    if w < 0.0 {
        return Err(MeasureError::NegativeWorkload(w));
    }
    if w == 0.0 {
        return Ok(FiniteMeasure::zero());
    }
    FiniteMeasure::zero().with_part(nu.clone(), true, w / nu.excess_mean(), 0.0)
}

fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * (3.0 - 2.0 * u)
    }
}

fn smoothstep_deriv(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        6.0 * u * (1.0 - u)
    }
}

/// A C1 function with an explicit derivative, for dynamic-equation and
/// fluid-model residuals.
pub trait C1Fn: Integrand {
    fn deriv(&self, x: f64) -> f64;
}

/// Smoothstep bump of height 1: rises from 0 at `center - width` to 1 at
/// `center` and back to 0 at `center + width`.
#[derive(Clone, Copy, Debug)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
}

impl Integrand for Bump {
    fn value(&self, x: f64) -> f64 {
        smoothstep(1.0 - (x - self.center).abs() / self.width)
    }

    fn knots(&self) -> Vec<f64> {
        vec![self.center - self.width, self.center, self.center + self.width]
    }
}

impl C1Fn for Bump {
    fn deriv(&self, x: f64) -> f64 {
        let u = 1.0 - (x - self.center).abs() / self.width;
        -smoothstep_deriv(u) * (x - self.center).signum() / self.width
    }
}

/// Ramp `h_k`: identically 0 on `[0, k-1]`, identically 1 on `[k, inf)`,
/// smoothstep in between (so the derivative is bounded by 1.5).
#[derive(Clone, Copy, Debug)]
pub struct Ramp {
    pub k: usize,
}

impl Integrand for Ramp {
    fn value(&self, x: f64) -> f64 {
        smoothstep(x - (self.k as f64 - 1.0))
    }

    fn knots(&self) -> Vec<f64> {
        vec![self.k as f64 - 1.0, self.k as f64]
    }
}

impl C1Fn for Ramp {
    fn deriv(&self, x: f64) -> f64 {
        smoothstep_deriv(x - (self.k as f64 - 1.0))
    }
}

/// The concrete test-function family behind the metric: bumps centered at
/// dyadic rationals `j 2^-q` in `[0, 1]` with widths `2^-q`, `q = 0..=5`,
/// ordered by `(q, j)` and truncated to `k_max` terms, plus the ramp family
/// indexed by all positive integers.
#[derive(Clone, Debug)]
pub struct TestFunctionFamily {
    bumps: Vec<Bump>,
}

impl Default for TestFunctionFamily {
    fn default() -> Self {
        Self::standard()
    }
}

impl TestFunctionFamily {
    /// The default family with 64 bump terms (the series tail beyond 64
    /// terms is below double precision).
    pub fn standard() -> Self {
        Self::with_k_max(64)
    }

    pub fn with_k_max(k_max: usize) -> Self {
        let mut bumps = Vec::with_capacity(k_max);
        'outer: for q in 0..=5u32 {
            let width = 0.5f64.powi(q as i32);
            for j in 0..=(1u32 << q) {
                bumps.push(Bump {
                    center: f64::from(j) * width,
                    width,
                });
                if bumps.len() == k_max {
                    break 'outer;
                }
            }
        }
        Self { bumps }
    }

    pub fn k_max(&self) -> usize {
        self.bumps.len()
    }

    /// `g_k`, 1-indexed.
    pub fn bump(&self, k: usize) -> Bump {
        self.bumps[k - 1]
    }

    /// `h_k`, 1-indexed.
    pub fn ramp(&self, k: usize) -> Ramp {
        Ramp { k }
    }

    /// Number of ramp terms needed so every later `<h_k, .>` vanishes (up to
    /// the negligible tail of parametric parts).
    pub fn ramps_needed(&self, zeta: &FiniteMeasure) -> usize {
        (zeta.support_bound().ceil() as usize + 1).max(1)
    }

    /// Evaluate all test functions against a measure. `h_len` fixes how many
    /// ramp terms are stored; terms beyond a measure's support are zero, so
    /// profiles can be padded and compared across measures.
    pub fn profile(
        &self,
        zeta: &FiniteMeasure,
        h_len: usize,
    ) -> Result<MeasureProfile, MeasureError> {
        let mut g = Vec::with_capacity(self.bumps.len());
        for bump in &self.bumps {
            g.push(bump_expectation(bump, zeta)?);
        }
        let mut h = Vec::with_capacity(h_len);
        for k in 1..=h_len {
            h.push(ramp_expectation(k, zeta)?);
        }
        Ok(MeasureProfile { g, h })
    }

    /// The metric `d[z1, z2]`.
    pub fn metric(
        &self,
        z1: &FiniteMeasure,
        z2: &FiniteMeasure,
    ) -> Result<f64, MeasureError> {
        let h_len = self.ramps_needed(z1).max(self.ramps_needed(z2));
        let p1 = self.profile(z1, h_len)?;
        let p2 = self.profile(z2, h_len)?;
        Ok(metric_from_profiles(&p1, &p2))
    }

    /// Grid modulus of continuity: the largest metric distance between path
    /// samples at most `delta` apart.
    pub fn modulus(
        &self,
        path: &[(f64, FiniteMeasure)],
        delta: f64,
    ) -> Result<f64, MeasureError> {
        if path.len() < 2 {
            return Err(MeasureError::TooFewSamples);
        }
        let h_len = path
            .iter()
            .map(|(_, m)| self.ramps_needed(m))
            .max()
            .unwrap_or(1);
        let profiles: Vec<MeasureProfile> = path
            .iter()
            .map(|(_, m)| self.profile(m, h_len))
            .collect::<Result<_, _>>()?;
        let slack = 1.0 + 1e-12;
        let mut sup = 0.0f64;
        for i in 0..path.len() {
            for j in (i + 1)..path.len() {
                if path[j].0 - path[i].0 > delta * slack {
                    break;
                }
                sup = sup.max(metric_from_profiles(&profiles[i], &profiles[j]));
            }
        }
        Ok(sup)
    }
}

/// Test-function evaluations of one measure: `g[i] = <g_{i+1}, .>` and
/// `h[i] = <h_{i+1}, .>`.
#[derive(Clone, Debug)]
pub struct MeasureProfile {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl MeasureProfile {
    /// Rescale all evaluations by `c`; test-function integrals are linear in
    /// the measure, so this is the profile of the scaled measure.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            g: self.g.iter().map(|v| v * c).collect(),
            h: self.h.iter().map(|v| v * c).collect(),
        }
    }
}

/// Combine two profiles into the metric value. Missing ramp entries are
/// treated as zero (they are beyond the corresponding support).
pub fn metric_from_profiles(p1: &MeasureProfile, p2: &MeasureProfile) -> f64 {
    let mut series = 0.0;
    let mut weight = 0.5;
    debug_assert_eq!(p1.g.len(), p2.g.len());
    for (a, b) in p1.g.iter().zip(&p2.g) {
        series += weight * (a - b).abs().min(1.0);
        weight *= 0.5;
    }
    let mut sup = 0.0f64;
    let n = p1.h.len().max(p2.h.len());
    for i in 0..n {
        let a = p1.h.get(i).copied().unwrap_or(0.0);
        let b = p2.h.get(i).copied().unwrap_or(0.0);
        sup = sup.max((a - b).abs());
    }
    series + sup
}

fn bump_expectation(bump: &Bump, zeta: &FiniteMeasure) -> Result<f64, MeasureError> {
    let mut acc = 0.0;
    for (x, w) in &zeta.atoms {
        acc += w * bump.value(*x);
    }
    let (blo, bhi) = (bump.center - bump.width, bump.center + bump.width);
    for part in &zeta.parts {
        if let (Some((loc, w)), false) = (part.law.law().atom(), part.excess) {
            let y = loc - part.shift;
            if y > 0.0 {
                acc += part.scale * w * bump.value(y);
            }
            continue;
        }
        // The integrand lives on [shift + blo, shift + bhi] only.
        let lo = (part.shift + blo).max(part.shift).max(if part.excess {
            0.0
        } else {
            part.law.law().support_lower()
        });
        let hi = (part.shift + bhi).min(part.law.law().support_upper());
        if hi <= lo {
            continue;
        }
        let s = part.shift;
        let dens = |y: f64| {
            if part.excess {
                part.law.excess_pdf(y)
            } else {
                part.law.law().pdf(y)
            }
        };
        let f = |y: f64| bump.value(y - s) * dens(y);
        let mut knots: Vec<f64> = bump.knots().iter().map(|k| k + s).collect();
        knots.extend(part.law.law().knots());
        acc += part.scale * adaptive_simpson(&f, lo, hi, &knots, DEFAULT_REL_TOL, 1e-16)?;
    }
    Ok(acc)
}

fn ramp_expectation(k: usize, zeta: &FiniteMeasure) -> Result<f64, MeasureError> {
    let ramp = Ramp { k };
    let mut acc = 0.0;
    for (x, w) in &zeta.atoms {
        acc += w * ramp.value(*x);
    }
    for part in &zeta.parts {
        if let (Some((loc, w)), false) = (part.law.law().atom(), part.excess) {
            let y = loc - part.shift;
            if y > 0.0 {
                acc += part.scale * w * ramp.value(y);
            }
            continue;
        }
        // Split at the ramp plateau: full law tail beyond shift + k, plus a
        // short quadrature across the rise on [shift + k - 1, shift + k].
        let rise_lo = part.shift + (k as f64 - 1.0);
        let rise_hi = part.shift + k as f64;
        acc += part.scale * part.tail_from(k as f64);
        let lo = rise_lo.max(if part.excess {
            0.0
        } else {
            part.law.law().support_lower()
        });
        let hi = rise_hi.min(part.law.law().support_upper());
        if hi <= lo {
            continue;
        }
        let s = part.shift;
        let dens = |y: f64| {
            if part.excess {
                part.law.excess_pdf(y)
            } else {
                part.law.law().pdf(y)
            }
        };
        let f = |y: f64| ramp.value(y - s) * dens(y);
        acc += part.scale
            * adaptive_simpson(&f, lo, hi, &part.law.law().knots(), DEFAULT_REL_TOL, 1e-16)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::LawSpec;
    use crate::quad::{Chi, One};
    use crate::streams::{substream, StreamRole};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn exp1() -> ServiceDistribution {
        ServiceDistribution::new(LawSpec::Exponential { rate: 1.0 }).unwrap()
    }

    fn det1() -> ServiceDistribution {
        ServiceDistribution::new(LawSpec::Deterministic { value: 1.0 }).unwrap()
    }

    #[test]
    fn counting_and_moment_examples() {
        let z = FiniteMeasure::delta(2.0).merged(&FiniteMeasure::delta(5.0));
        assert_relative_eq!(integrate(&One, &z).unwrap(), 2.0, epsilon = 1e-14);

        let three_nu_e = lift(3.0, &exp1()).unwrap();
        assert_relative_eq!(integrate(&Chi, &three_nu_e).unwrap(), 3.0, epsilon = 1e-10);

        let atoms = FiniteMeasure::from_atoms([(1.0, 1.0), (2.0, 0.5)]).unwrap();
        let sq = |x: f64| x * x;
        assert_relative_eq!(integrate(&sq, &atoms).unwrap(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn mass_matches_component_sums() {
        let m = FiniteMeasure::from_atoms([(0.5, 2.0), (3.0, 1.0)])
            .unwrap()
            .with_part(exp1(), true, 1.5, 0.3)
            .unwrap();
        let direct = m.mass();
        let quad = integrate(&One, &m).unwrap();
        assert_relative_eq!(direct, quad, max_relative = 1e-8);
        assert!((direct - 3.0 - 1.5 * (1.0 - exp1().excess_cdf(0.3))).abs() < 1e-12);
    }

    #[test]
    fn shift_kill_examples() {
        let d3 = FiniteMeasure::delta(3.0);
        let moved = shift_kill(&d3, 1.0);
        assert_eq!(moved.atoms(), &[(2.0, 1.0)]);

        let two = FiniteMeasure::from_atoms([(3.0, 1.0), (0.5, 1.0)]).unwrap();
        let moved = shift_kill(&two, 1.0);
        assert_eq!(moved.atoms(), &[(2.0, 1.0)]);

        // Excess law of deterministic(1) is uniform on [0,1]; shifting by
        // 0.25 leaves mass 0.75.
        let ue = lift(0.5, &det1()).unwrap(); // mass 1 of nu_e
        assert_relative_eq!(ue.mass(), 1.0, epsilon = 1e-12);
        let shifted = shift_kill(&ue, 0.25);
        assert_relative_eq!(shifted.mass(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn transport_consistency_on_random_atomic_measures() {
        let fam = TestFunctionFamily::standard();
        let mut rng = substream(11, 0, 0, StreamRole::Initial);
        for _ in 0..1000 {
            let n = rng.gen_range(1..8);
            let atoms: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.gen_range(0.0..6.0), rng.gen_range(0.1..2.0)))
                .collect();
            let z = FiniteMeasure::from_atoms(atoms).unwrap();
            let s: f64 = rng.gen_range(0.0..3.0);
            let k = rng.gen_range(1..=fam.k_max());
            let g = fam.bump(k);
            let lhs = integrate(&g, &shift_kill(&z, s)).unwrap();
            let shifted = |x: f64| if x - s > 0.0 { g.value(x - s) } else { 0.0 };
            let rhs = integrate(&shifted, &z).unwrap();
            assert!((lhs - rhs).abs() <= 1e-9, "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn transport_consistency_on_parametric_parts() {
        let fam = TestFunctionFamily::standard();
        let z = lift(1.3, &exp1()).unwrap().merged(
            &FiniteMeasure::zero()
                .with_part(det1(), false, 0.7, 0.1)
                .unwrap(),
        );
        for (k, s) in [(3usize, 0.4), (10, 0.15), (40, 1.1)] {
            let g = fam.bump(k);
            let lhs = integrate(&g, &shift_kill(&z, s)).unwrap();
            let shifted = move |x: f64| if x - s > 0.0 { g.value(x - s) } else { 0.0 };
            let rhs = integrate(&shifted, &z).unwrap();
            assert!((lhs - rhs).abs() <= 1e-7, "k={k} s={s}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn lift_examples() {
        assert!(lift(0.0, &exp1()).unwrap().is_zero());
        let one = lift(1.0, &exp1()).unwrap();
        assert_relative_eq!(one.mass(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(one.workload(), 1.0, epsilon = 1e-10);
        let det = lift(2.0, &det1()).unwrap();
        assert_relative_eq!(det.mass(), 4.0, epsilon = 1e-12);
        assert!(lift(-0.1, &exp1()).is_err());
    }

    #[test]
    fn family_shape_invariants() {
        let fam = TestFunctionFamily::standard();
        assert_eq!(fam.k_max(), 64);
        let grid: Vec<f64> = (0..=4000).map(|i| f64::from(i) * 0.01).collect();
        for k in 1..=fam.k_max() {
            let g = fam.bump(k);
            for &x in &grid {
                let v = g.value(x);
                assert!((0.0..=1.0).contains(&v));
            }
        }
        for k in [1usize, 2, 5, 17] {
            let h = Ramp { k };
            let mut prev = -1.0;
            let mut max_slope = 0.0f64;
            for w in grid.windows(2) {
                let (a, b) = (h.value(w[0]), h.value(w[1]));
                assert!((0.0..=1.0).contains(&b));
                assert!(b >= prev - 1e-15, "ramp must be nondecreasing");
                max_slope = max_slope.max((b - a).abs() / (w[1] - w[0]));
                prev = b;
            }
            assert!(max_slope <= 2.0);
            assert_eq!(h.value(k as f64 - 1.0), 0.0);
            assert_eq!(h.value(k as f64), 1.0);
        }
    }

    #[test]
    fn metric_basics() {
        let fam = TestFunctionFamily::standard();
        let z = FiniteMeasure::from_atoms([(0.7, 1.0), (2.4, 0.5)]).unwrap();
        assert_eq!(fam.metric(&z, &z).unwrap(), 0.0);

        let a = FiniteMeasure::delta(0.3);
        let b = FiniteMeasure::delta(1.9);
        assert_relative_eq!(
            fam.metric(&a, &b).unwrap(),
            fam.metric(&b, &a).unwrap(),
            epsilon = 1e-15
        );
        assert!(fam.metric(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn metric_against_straight_line_evaluation() {
        // d[0, delta_10] computed term by term from the definition.
        let fam = TestFunctionFamily::standard();
        let d10 = FiniteMeasure::delta(10.0);
        let computed = fam.metric(&FiniteMeasure::zero(), &d10).unwrap();

        let mut series = 0.0;
        for k in 1..=fam.k_max() {
            series += 0.5f64.powi(k as i32) * fam.bump(k).value(10.0).min(1.0);
        }
        let mut sup = 0.0f64;
        for k in 1..=12 {
            sup = sup.max(fam.ramp(k).value(10.0));
        }
        assert_relative_eq!(computed, series + sup, epsilon = 1e-12);
        assert_relative_eq!(computed, 1.0, epsilon = 1e-12);

        // Same straight-line check on a two-atom measure within bump range.
        let z = FiniteMeasure::from_atoms([(0.4, 0.8), (1.3, 0.2)]).unwrap();
        let direct = fam.metric(&FiniteMeasure::zero(), &z).unwrap();
        let mut series = 0.0;
        for k in 1..=fam.k_max() {
            let g = fam.bump(k);
            let v = 0.8 * g.value(0.4) + 0.2 * g.value(1.3);
            series += 0.5f64.powi(k as i32) * v.min(1.0);
        }
        let mut sup = 0.0f64;
        for k in 1..=3 {
            let h = fam.ramp(k);
            sup = sup.max(0.8 * h.value(0.4) + 0.2 * h.value(1.3));
        }
        assert_relative_eq!(direct, series + sup, epsilon = 1e-12);
    }

    #[test]
    fn profile_matches_generic_integration() {
        let fam = TestFunctionFamily::standard();
        let z = FiniteMeasure::from_atoms([(0.2, 0.5), (1.8, 1.0)])
            .unwrap()
            .merged(&lift(0.8, &exp1()).unwrap())
            .merged(
                &FiniteMeasure::zero()
                    .with_part(det1(), false, 0.4, 0.35)
                    .unwrap(),
            );
        let h_len = fam.ramps_needed(&z);
        let prof = fam.profile(&z, h_len).unwrap();
        for k in (1..=fam.k_max()).step_by(7) {
            let direct = integrate(&fam.bump(k), &z).unwrap();
            assert_relative_eq!(prof.g[k - 1], direct, epsilon = 1e-9, max_relative = 1e-7);
        }
        for k in 1..=h_len.min(6) {
            let direct = integrate(&fam.ramp(k), &z).unwrap();
            assert_relative_eq!(prof.h[k - 1], direct, epsilon = 1e-9, max_relative = 1e-7);
        }
    }

    #[test]
    fn lifting_mass_identity_across_catalog() {
        // <1, lift(w, nu)> = w * 2 beta / (1 + beta^2 b^2) for every catalog law.
        let laws = vec![
            exp1(),
            det1(),
            ServiceDistribution::new(LawSpec::Uniform { lo: 0.2, hi: 1.4 }).unwrap(),
            ServiceDistribution::new(LawSpec::Erlang { shape: 3, rate: 2.0 }).unwrap(),
            ServiceDistribution::new(LawSpec::Hyperexponential {
                probs: vec![0.5, 0.5],
                rates: vec![1.0, 2.0],
            })
            .unwrap(),
            ServiceDistribution::new(LawSpec::BoundedPareto {
                exponent: 2.2,
                min: 0.3,
                max: Some(9.0),
            })
            .unwrap(),
        ];
        for nu in laws {
            let beta = nu.beta();
            let b = nu.sd();
            let c_nu = 2.0 * beta / (1.0 + beta * beta * b * b);
            for w in [0.25, 1.0, 3.5] {
                let mass = lift(w, &nu).unwrap().mass();
                assert!(
                    (mass - c_nu * w).abs() <= 1e-9 * (1.0 + mass),
                    "{:?}: {mass} vs {}",
                    nu.spec(),
                    c_nu * w
                );
            }
        }
    }

    #[test]
    fn modulus_examples() {
        let fam = TestFunctionFamily::standard();
        let z = FiniteMeasure::delta(1.0);
        let path = vec![(0.0, z.clone()), (0.5, z.clone()), (1.0, z.clone())];
        assert_eq!(fam.modulus(&path, 0.6).unwrap(), 0.0);

        let jump = vec![(0.0, FiniteMeasure::zero()), (0.25, FiniteMeasure::delta(1.0))];
        let d = fam.metric(&FiniteMeasure::zero(), &FiniteMeasure::delta(1.0)).unwrap();
        assert_relative_eq!(fam.modulus(&jump, 0.25).unwrap(), d, epsilon = 1e-12);

        assert!(fam.modulus(&jump[..1], 0.1).is_err());
    }
}
