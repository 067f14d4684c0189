//! Steady states of the free system.
//!
//! The axial, pest-free and susceptible-free points have closed forms. The
//! coexistence point is reduced to a scalar problem in the awareness level
//! `A`: the susceptible equation fixes `X(A)`, the crop and awareness
//! equations then fix `S(A)` and `I(A)`, and the remaining infected-pest
//! equation gives a residual `h(A)` whose sign changes are bracketed on a
//! uniform grid and refined by bisection.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{attracting_region, Components, ModelParams, State};

/// Maximum residual accepted for a reported steady state.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Brackets used to scan the reduced residual.
pub const SCAN_BRACKETS: usize = 4096;

/// Smallest awareness level probed by the default coexistence scan.
pub const SCAN_FLOOR: f64 = 1e-8;

const ROOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquilibriumKind {
    /// `E0 = (0, 0, 0, gamma / eta)`
    Axial,
    /// `E1 = (K, 0, 0, gamma / eta)`
    PestFree,
    /// `E2 = (X, 0, I, A)`
    SusceptibleFree,
    /// `E* `, all populations present
    Coexistence,
}

impl fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Axial => "Axial",
            Self::PestFree => "PestFree",
            Self::SusceptibleFree => "SusceptibleFree",
            Self::Coexistence => "Coexistence",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub point: State,
    /// Max-norm of the vector field at `point`.
    pub residual_norm: f64,
}

impl Equilibrium {
    fn evaluate(kind: EquilibriumKind, point: State, params: &ModelParams) -> Self {
        Self {
            kind,
            point,
            residual_norm: params.rates(&point).max_abs(),
        }
    }
}

fn resting_awareness(params: &ModelParams) -> Result<f64> {
    if params.awareness_fading <= 0.0 {
        return Err(Error::Degenerate("awareness fading eta must be positive".into()));
    }
    Ok(params.global_awareness_rate / params.awareness_fading)
}

pub fn axial(params: &ModelParams) -> Result<Equilibrium> {
    let a = resting_awareness(params)?;
    Ok(Equilibrium::evaluate(
        EquilibriumKind::Axial,
        State::from_array([0.0, 0.0, 0.0, a]),
        params,
    ))
}

pub fn pest_free(params: &ModelParams) -> Result<Equilibrium> {
    let a = resting_awareness(params)?;
    Ok(Equilibrium::evaluate(
        EquilibriumKind::PestFree,
        State::from_array([params.carrying_capacity, 0.0, 0.0, a]),
        params,
    ))
}

/// Outcome of the susceptible-free search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SusceptibleFree {
    Exists(Equilibrium),
    /// The existence inequality `d + delta < m2 phi alpha K / (c + K)` fails.
    Nonexistent {
        /// `d + delta`
        infected_mortality: f64,
        /// `m2 phi alpha K / (c + K)`
        threshold: f64,
    },
}

impl SusceptibleFree {
    pub fn equilibrium(&self) -> Option<&Equilibrium> {
        match self {
            Self::Exists(e) => Some(e),
            Self::Nonexistent { .. } => None,
        }
    }

    pub fn reason(&self) -> Option<String> {
        match self {
            Self::Exists(_) => None,
            Self::Nonexistent {
                infected_mortality,
                threshold,
            } => Some(format!(
                "d+delta={infected_mortality} >= m2*phi*alpha*K/(c+K)={threshold}"
            )),
        }
    }
}

pub fn susceptible_free(params: &ModelParams) -> Result<SusceptibleFree> {
    let ModelParams {
        growth_rate: r,
        carrying_capacity: k,
        attack_rate: alpha,
        infected_attack_factor: phi,
        crop_half_saturation: c,
        ..
    } = *params;
    let mortality = params.pest_mortality + params.disease_mortality;
    let gain = params.infected_conversion * phi * alpha;
    let denominator = gain - mortality;
    if denominator.abs() < 1e-14 {
        return Err(Error::Degenerate(format!(
            "m2*phi*alpha - (d+delta) = {denominator:e} vanishes"
        )));
    }
    let threshold = gain * k / (c + k);
    if !(mortality < threshold) {
        return Ok(SusceptibleFree::Nonexistent {
            infected_mortality: mortality,
            threshold,
        });
    }
    let x = c * mortality / denominator;
    let i = r * (c + x) * (k - x) / (phi * alpha * k);
    let a = (params.global_awareness_rate + params.awareness_growth * i) / params.awareness_fading;
    Ok(SusceptibleFree::Exists(Equilibrium::evaluate(
        EquilibriumKind::SusceptibleFree,
        State::from_array([x, 0.0, i, a]),
        params,
    )))
}

/// Point on the reduced coexistence curve at awareness level `a`.
#[derive(Debug, Clone, Copy)]
struct ReducedPoint {
    /// Denominator of `X(A)`; the curve is only meaningful where it is positive.
    denominator: f64,
    state: State,
    residual: f64,
}

fn reduced_point(params: &ModelParams, a: f64) -> ReducedPoint {
    let ModelParams {
        growth_rate: r,
        carrying_capacity: k,
        attack_rate: alpha,
        infected_attack_factor: phi,
        crop_half_saturation: c,
        awareness_half_saturation: ah,
        activity_rate: lambda,
        pest_mortality: d,
        ..
    } = *params;
    let denominator = (params.susceptible_conversion * alpha - d) * (ah + a) - lambda * a;
    let x = c * (lambda * a + d * (ah + a)) / denominator;
    // alpha S + phi alpha I and S + I from the crop and awareness equations
    let weighted = r * (k - x) * (c + x) / k;
    let total = (params.awareness_fading * a - params.global_awareness_rate) / params.awareness_growth;
    let spread = alpha * (1.0 - phi);
    let s = (weighted - phi * alpha * total) / spread;
    let i = (alpha * total - weighted) / spread;
    let state = State::from_array([x, s, i, a]);
    ReducedPoint {
        denominator,
        state,
        residual: params.rates(&state).infected,
    }
}

fn admissible(p: &ReducedPoint) -> bool {
    p.denominator > 0.0 && p.state.to_array().iter().all(|v| *v >= 0.0)
}

/// Bisection on the reduced residual inside `[lo, hi]` with a sign change.
fn refine(params: &ModelParams, mut lo: f64, mut hi: f64, mut h_lo: f64) -> ReducedPoint {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let pm = reduced_point(params, mid);
        if pm.residual == 0.0 {
            return pm;
        }
        if (pm.residual < 0.0) == (h_lo < 0.0) {
            lo = mid;
            h_lo = pm.residual;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (reduced_point(params, lo), reduced_point(params, hi));
    if a.residual.abs() <= b.residual.abs() {
        a
    } else {
        b
    }
}

fn scan_bracket(
    params: &ModelParams,
    lo: ReducedPoint,
    hi: ReducedPoint,
    depth: u32,
    found: &mut Vec<ReducedPoint>,
) {
    let (a0, a1) = (lo.state.awareness, hi.state.awareness);
    if (lo.denominator > 0.0) != (hi.denominator > 0.0) {
        // X(A) has a pole or changes sign in here; split and retry
        if depth == 0 {
            return;
        }
        const PARTS: usize = 16;
        let mut prev = lo;
        for j in 1..=PARTS {
            let next = if j == PARTS {
                hi
            } else {
                reduced_point(params, a0 + (a1 - a0) * j as f64 / PARTS as f64)
            };
            scan_bracket(params, prev, next, depth - 1, found);
            prev = next;
        }
        return;
    }
    if lo.denominator <= 0.0 || !lo.residual.is_finite() || !hi.residual.is_finite() {
        return;
    }
    if lo.residual == 0.0 {
        found.push(lo);
    } else if (lo.residual < 0.0) != (hi.residual < 0.0) && hi.residual != 0.0 {
        found.push(refine(params, a0, a1, lo.residual));
    }
}

/// Coexistence points with awareness in `[lo, hi]`, sorted by awareness.
pub fn coexistence(params: &ModelParams, bounds: (f64, f64)) -> Result<Vec<Equilibrium>> {
    coexistence_with_brackets(params, bounds, SCAN_BRACKETS)
}

/// As [`coexistence`], with a custom number of scan brackets.
pub fn coexistence_with_brackets(
    params: &ModelParams,
    (lo, hi): (f64, f64),
    brackets: usize,
) -> Result<Vec<Equilibrium>> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(Error::Contract(format!("invalid awareness interval ({lo}, {hi}]")));
    }
    if brackets == 0 {
        return Err(Error::Contract("need at least one scan bracket".into()));
    }
    if params.attack_rate <= 0.0 {
        // pests starve
        return Ok(Vec::new());
    }
    if params.awareness_growth <= 0.0 || params.infected_attack_factor >= 1.0 {
        return Err(Error::Degenerate(
            "coexistence reduction needs sigma > 0 and phi < 1".into(),
        ));
    }
    let mut candidates = Vec::new();
    let mut prev = reduced_point(params, lo);
    for j in 1..=brackets {
        let a = if j == brackets {
            hi
        } else {
            lo + (hi - lo) * j as f64 / brackets as f64
        };
        let next = reduced_point(params, a);
        scan_bracket(params, prev, next, 3, &mut candidates);
        prev = next;
    }
    if prev.residual == 0.0 && prev.denominator > 0.0 {
        candidates.push(prev);
    }

    let mut out: Vec<Equilibrium> = Vec::new();
    for p in candidates {
        if p.residual.abs() >= ROOT_TOLERANCE || !admissible(&p) {
            continue;
        }
        let eq = Equilibrium::evaluate(EquilibriumKind::Coexistence, p.state, params);
        if eq.residual_norm >= RESIDUAL_TOLERANCE {
            continue;
        }
        if let Some(last) = out.last() {
            if (last.point.awareness - eq.point.awareness).abs() <= 1e-12 {
                continue;
            }
        }
        out.push(eq);
    }
    Ok(out)
}

/// Awareness interval `(1e-8, A_max]` from the attracting region with `X(0) = K`.
pub fn default_awareness_bounds(params: &ModelParams) -> Result<(f64, f64)> {
    let region = attracting_region(params, params.carrying_capacity)?;
    Ok((SCAN_FLOOR, region.awareness_max.max(2.0 * SCAN_FLOOR)))
}

/// Coexistence points over the default awareness interval.
pub fn coexistence_default(params: &ModelParams) -> Result<Vec<Equilibrium>> {
    coexistence(params, default_awareness_bounds(params)?)
}

/// Coefficients `D0..D4` of the published quartic in `A`, highest power first.
///
/// Kept for cross-checking only; the coexistence solver does not use them.
pub fn quartic_coefficients(params: &ModelParams) -> Result<[f64; 5]> {
    let ModelParams {
        growth_rate: r,
        carrying_capacity: k,
        attack_rate: alpha,
        infected_attack_factor: phi,
        crop_half_saturation: c,
        awareness_half_saturation: a,
        activity_rate: lambda,
        pest_mortality: d,
        disease_mortality: delta,
        susceptible_conversion: m1,
        infected_conversion: m2,
        global_awareness_rate: gamma,
        awareness_growth: sigma,
        awareness_fading: eta,
    } = *params;
    let gap = phi * m2 - m1;
    if gap.abs() < 1e-14 {
        return Err(Error::Degenerate(format!("phi*m2 - m1 = {gap:e} vanishes")));
    }
    for (name, v) in [("alpha", alpha), ("sigma", sigma), ("r", r), ("m1", m1)] {
        if v.abs() < 1e-300 {
            return Err(Error::Degenerate(format!("{name} = 0 appears in a denominator")));
        }
    }
    let d0 = m1 + (m1 * (d - delta) + lambda * m1 * delta - phi * m2 * (d + lambda)) / (alpha * gap);
    let d1 = (((k - 2.0 * c) * m2 * phi * alpha + (3.0 * c - k) * delta) * (d + lambda)
        + alpha * (2.0 * c - k) * (d + lambda + delta))
        / (alpha * alpha * m1 * gap);
    let common = sigma * m1 * alpha * gap;
    let source = alpha * alpha * m1 * k * gamma + sigma * r * (alpha * k * m1 - d);
    let mixed = (d + delta) * m1 - m2 * phi * d;
    let d2 = -m1 * lambda * gamma - (m1 * lambda - m2 * phi * lambda) * source / common
        + mixed * (sigma * r * lambda + alpha * alpha * m1 * k * eta) / common;
    let d3 = mixed * source / common;
    let d4 = (a * c * c * d * d * (phi - 1.0)
        + a * c * eta * eta * d * delta * (phi - 1.0)
        + c * c * d * sigma * r * delta * (d + lambda))
        / (sigma * r * m1 * gap);
    Ok([d0, d1, d2, d3, d4])
}

/// Published quartic evaluated at one coexistence root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCheck {
    pub awareness: f64,
    pub value: f64,
    /// Sum of the absolute terms, for judging `value` relative to cancellation.
    pub scale: f64,
    pub vanishes: bool,
}

/// Evaluates the published quartic at each coexistence root.
pub fn quartic_diagnostic(params: &ModelParams, roots: &[Equilibrium]) -> Result<Vec<QuarticCheck>> {
    let coeffs = quartic_coefficients(params)?;
    Ok(roots
        .iter()
        .map(|eq| {
            let a = eq.point.awareness;
            let terms: Vec<f64> = coeffs
                .iter()
                .enumerate()
                .map(|(i, d)| d * a.powi(4 - i as i32))
                .collect();
            let value: f64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            QuarticCheck {
                awareness: a,
                value,
                scale,
                vanishes: value.abs() <= 1e-8 * scale.max(f64::MIN_POSITIVE),
            }
        })
        .collect())
}

/// Every steady state of one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSet {
    pub axial: Equilibrium,
    pub pest_free: Equilibrium,
    pub susceptible_free: SusceptibleFree,
    pub coexistence: Vec<Equilibrium>,
}

impl EquilibriumSet {
    /// The equilibria that exist, in kind order.
    pub fn existing(&self) -> Vec<Equilibrium> {
        let mut out = vec![self.axial, self.pest_free];
        out.extend(self.susceptible_free.equilibrium().copied());
        out.extend(self.coexistence.iter().copied());
        out
    }
}

pub fn find_all(params: &ModelParams) -> Result<EquilibriumSet> {
    Ok(EquilibriumSet {
        axial: axial(params)?,
        pest_free: pest_free(params)?,
        susceptible_free: susceptible_free(params)?,
        coexistence: coexistence_default(params)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> ModelParams {
        ModelParams::reference()
    }

    #[test]
    fn axial_point() {
        let e = axial(&reference()).unwrap();
        assert_eq!(e.point.to_array(), [0.0, 0.0, 0.0, 0.003 / 0.015]);
        assert_relative_eq!(e.point.awareness, 0.2, max_relative = 1e-15);
        assert!(e.residual_norm < RESIDUAL_TOLERANCE);
        let silent = reference().with("gamma", 0.0).unwrap();
        assert_eq!(axial(&silent).unwrap().point.to_array(), [0.0; 4]);
    }

    #[test]
    fn pest_free_point() {
        let e = pest_free(&reference()).unwrap();
        assert_relative_eq!(e.point.crop, 1.0);
        assert_relative_eq!(e.point.awareness, 0.2, max_relative = 1e-15);
        assert!(e.residual_norm < RESIDUAL_TOLERANCE);
        let mut p = reference();
        p.carrying_capacity = 0.0;
        assert_eq!(pest_free(&p).unwrap().point, axial(&p).unwrap().point);
    }

    #[test]
    fn susceptible_free_absent_at_defaults() {
        match susceptible_free(&reference()).unwrap() {
            SusceptibleFree::Nonexistent {
                infected_mortality,
                threshold,
            } => {
                assert_relative_eq!(infected_mortality, 0.11, max_relative = 1e-14);
                assert_relative_eq!(threshold, 0.00225, max_relative = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn e2_params() -> ModelParams {
        ModelParams {
            infected_conversion: 0.6,
            infected_attack_factor: 0.9,
            attack_rate: 0.5,
            carrying_capacity: 1.0,
            crop_half_saturation: 1.0,
            growth_rate: 0.1,
            pest_mortality: 0.01,
            disease_mortality: 0.1,
            global_awareness_rate: 0.003,
            awareness_growth: 0.015,
            awareness_fading: 0.015,
            ..reference()
        }
    }

    #[test]
    fn susceptible_free_closed_form() {
        let p = e2_params();
        let e = *susceptible_free(&p).unwrap().equilibrium().unwrap();
        assert_relative_eq!(e.point.crop, 0.6875, max_relative = 1e-13);
        assert_eq!(e.point.susceptible, 0.0);
        assert_relative_eq!(e.point.infected, 0.1171875, max_relative = 1e-13);
        assert_relative_eq!(e.point.awareness, 0.3171875, max_relative = 1e-13);
        assert!(e.residual_norm < RESIDUAL_TOLERANCE);
    }

    #[test]
    fn infected_level_forms_agree() {
        // expanded form: (K alpha phi m2 - (K + c)(d + delta)) c r m2 / (K (alpha phi m2 - d - delta)^2)
        let p = e2_params();
        let (k, c, r): (f64, f64, f64) = (1.0, 1.0, 0.1);
        let (m2, phi, alpha, mort): (f64, f64, f64, f64) = (0.6, 0.9, 0.5, 0.11);
        let gain = alpha * phi * m2;
        let expanded = (k * gain - (k + c) * mort) * c * r * m2 / (k * (gain - mort).powi(2));
        let geometric = susceptible_free(&p).unwrap().equilibrium().unwrap().point.infected;
        assert_relative_eq!(expanded, geometric, max_relative = 1e-13);
    }

    #[test]
    fn susceptible_free_degenerate() {
        let mut p = e2_params();
        // m2 phi alpha = d + delta
        p.infected_conversion = 0.11 / (0.9 * 0.5);
        assert!(matches!(susceptible_free(&p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn no_admissible_coexistence_in_pest_free_regime() {
        let found = coexistence_default(&reference()).unwrap();
        assert!(found.is_empty(), "{found:?}");
    }

    #[test]
    fn single_coexistence_point_at_higher_attack_rate() {
        let p = reference().with("alpha", 0.06).unwrap();
        let found = coexistence_default(&p).unwrap();
        assert_eq!(found.len(), 1, "{found:?}");
        let e = found[0];
        assert!(e.residual_norm < RESIDUAL_TOLERANCE);
        assert!(e.point.to_array().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn coexistence_stable_under_scan_refinement() {
        for alpha in [0.06, 0.08, 0.1, 0.5, 1.0] {
            let p = reference().with("alpha", alpha).unwrap();
            let bounds = default_awareness_bounds(&p).unwrap();
            let coarse = coexistence_with_brackets(&p, bounds, SCAN_BRACKETS).unwrap();
            let fine = coexistence_with_brackets(&p, bounds, 2 * SCAN_BRACKETS).unwrap();
            assert_eq!(coarse.len(), fine.len());
            for (a, b) in coarse.iter().zip(&fine) {
                assert!((a.point.awareness - b.point.awareness).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn coexistence_rejects_bad_interval() {
        assert!(coexistence(&reference(), (0.0, 1.0)).is_err());
        assert!(coexistence(&reference(), (1.0, 0.5)).is_err());
    }

    #[test]
    fn quartic_needs_distinct_conversions() {
        let mut p = reference();
        p.infected_attack_factor = 1.0;
        p.infected_conversion = p.susceptible_conversion;
        assert!(matches!(quartic_coefficients(&p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn find_all_defaults() {
        let set = find_all(&reference()).unwrap();
        let existing = set.existing();
        assert_eq!(existing.len(), 2);
        assert!(existing.iter().all(|e| e.residual_norm < RESIDUAL_TOLERANCE));
    }
}
