//! Linear stability of the steady states and Hopf detection in `alpha`.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::equilibria::{coexistence_default, Equilibrium, EquilibriumKind};
use crate::error::{Error, Result};
use crate::model::{Matrix4, ModelParams, State};
use crate::roots::quartic_roots;

/// Half-width of the band around zero in which the leading real part is
/// treated as marginal.
pub const EIGEN_EPS: f64 = 1e-9;

/// Step in `alpha` for the finite-difference transversality slope.
pub const TRANSVERSALITY_STEP: f64 = 1e-4;

/// Smallest transversality slope magnitude accepted for a Hopf point.
pub const MIN_TRANSVERSALITY: f64 = 1e-8;

/// Monic characteristic polynomial `rho^4 + C1 rho^3 + C2 rho^2 + C3 rho + C4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharPoly4 {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl CharPoly4 {
    pub fn new(c1: f64, c2: f64, c3: f64, c4: f64) -> Self {
        Self { c1, c2, c3, c4 }
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.c1, self.c2, self.c3, self.c4]
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (((z + self.c1) * z + self.c2) * z + self.c3) * z + self.c4
    }

    pub fn roots(&self) -> [Complex64; 4] {
        quartic_roots(self.c1, self.c2, self.c3, self.c4)
    }

    /// `C1 C2 C3 - C3^2 - C4 C1^2`; vanishes when a root pair is purely imaginary.
    pub fn psi(&self) -> f64 {
        let Self { c1, c2, c3, c4 } = *self;
        c1 * c2 * c3 - c3 * c3 - c4 * c1 * c1
    }
}

fn mat_mul(a: &Matrix4, b: &Matrix4) -> Matrix4 {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn trace(a: &Matrix4) -> f64 {
    (0..4).map(|i| a[i][i]).sum()
}

/// Characteristic polynomial `det(rho I - J)` by the Faddeev-LeVerrier recursion.
pub fn char_poly(j: &Matrix4) -> CharPoly4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut coeffs = [0.0; 4];
    for k in 1..=4 {
        let am = mat_mul(j, &m);
        let c = -trace(&am) / k as f64;
        coeffs[k - 1] = c;
        m = am;
        for (i, row) in m.iter_mut().enumerate() {
            row[i] += c;
        }
    }
    CharPoly4::new(coeffs[0], coeffs[1], coeffs[2], coeffs[3])
}

/// Signed margins of the Routh-Hurwitz conditions for a monic quartic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouthHurwitz {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `C1 C2 - C3`
    pub second: f64,
    /// `(C1 C2 - C3) C3 - C1^2 C4`
    pub third: f64,
}

impl RouthHurwitz {
    pub fn margins(&self) -> [f64; 6] {
        [self.c1, self.c2, self.c3, self.c4, self.second, self.third]
    }

    /// All conditions hold strictly.
    pub fn is_stable(&self) -> bool {
        self.margins().iter().all(|m| *m > 0.0)
    }

    pub fn min_margin(&self) -> f64 {
        self.margins().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Stable if every margin exceeds `tol`, unstable if any is below `-tol`,
    /// marginal otherwise.
    pub fn verdict(&self, tol: f64) -> Verdict {
        let min = self.min_margin();
        if min > tol {
            Verdict::Stable
        } else if min < -tol {
            Verdict::Unstable
        } else {
            Verdict::Marginal
        }
    }
}

pub fn routh_hurwitz(cp: &CharPoly4) -> RouthHurwitz {
    let CharPoly4 { c1, c2, c3, c4 } = *cp;
    let second = c1 * c2 - c3;
    RouthHurwitz {
        c1,
        c2,
        c3,
        c4,
        second,
        third: second * c3 - c1 * c1 * c4,
    }
}

/// Threshold `R0 = alpha K / R` for the pest-free state.
pub fn r0(params: &ModelParams) -> Result<f64> {
    let ModelParams {
        carrying_capacity: k,
        crop_half_saturation: c,
        awareness_half_saturation: a,
        activity_rate: lambda,
        pest_mortality: d,
        disease_mortality: delta,
        susceptible_conversion: m1,
        infected_conversion: m2,
        infected_attack_factor: phi,
        global_awareness_rate: gamma,
        awareness_fading: eta,
        ..
    } = *params;
    let resting = a * eta + gamma;
    let den_s = m1 * resting;
    let den_i = m2 * phi;
    let mut bounds = Vec::with_capacity(2);
    if den_s > 0.0 {
        bounds.push((c + k) * (lambda * gamma + d * resting) / den_s);
    }
    if den_i > 0.0 {
        bounds.push((c + k) * (d + delta) / den_i);
    }
    let r = bounds.into_iter().fold(f64::INFINITY, f64::min);
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Degenerate("threshold R is not a positive number".into()));
    }
    Ok(params.attack_rate * k / r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl Verdict {
    fn from_leading_real(re: f64) -> Self {
        if re < -EIGEN_EPS {
            Self::Stable
        } else if re > EIGEN_EPS {
            Self::Unstable
        } else {
            Self::Marginal
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Stable => "Stable",
            Self::Unstable => "Unstable",
            Self::Marginal => "Marginal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSummary {
    /// Ordered by decreasing real part.
    pub eigenvalues: [Complex64; 4],
    pub max_real: f64,
    /// Some eigenvalue lies within the marginal band with nonzero imaginary part.
    pub pure_imaginary: bool,
}

impl EigenSummary {
    pub fn from_roots(eigenvalues: [Complex64; 4]) -> Self {
        let max_real = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let pure_imaginary = eigenvalues
            .iter()
            .any(|z| z.re.abs() <= EIGEN_EPS && z.im.abs() > EIGEN_EPS);
        Self {
            eigenvalues,
            max_real,
            pure_imaginary,
        }
    }

    /// Real part of the complex-conjugate pair with the largest real part.
    pub fn oscillatory_real(&self) -> Option<f64> {
        self.eigenvalues
            .iter()
            .filter(|z| z.im > 1e-12)
            .map(|z| z.re)
            .fold(None, |acc: Option<f64>, re| Some(acc.map_or(re, |m| m.max(re))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub equilibrium: Equilibrium,
    pub verdict: Verdict,
    pub eigen: EigenSummary,
    pub char_poly: CharPoly4,
    pub routh_hurwitz: RouthHurwitz,
    /// Eigenvalues from the triangular factorisation at the axial and
    /// pest-free points.
    pub closed_form: Option<[f64; 4]>,
    /// Largest distance from a closed-form eigenvalue to the nearest numeric one.
    pub closed_form_gap: Option<f64>,
}

fn closed_form_eigenvalues(params: &ModelParams, eq: &Equilibrium) -> Option<[f64; 4]> {
    let aw = eq.point.awareness;
    let infection = params.infection(aw);
    let d = params.pest_mortality;
    let delta = params.disease_mortality;
    let eta = params.awareness_fading;
    match eq.kind {
        EquilibriumKind::Axial => Some([params.growth_rate, -infection - d, -(d + delta), -eta]),
        EquilibriumKind::PestFree => {
            let f = params.feeding(eq.point.crop);
            Some([
                -params.growth_rate,
                params.susceptible_conversion * f - infection - d,
                params.infected_conversion * params.infected_attack_factor * f - d - delta,
                -eta,
            ])
        }
        _ => None,
    }
}

/// Linearised stability of one steady state.
pub fn classify(params: &ModelParams, eq: &Equilibrium) -> StabilityReport {
    let j = params.jacobian(&eq.point);
    let cp = char_poly(&j);
    let eigen = EigenSummary::from_roots(cp.roots());
    let closed_form = closed_form_eigenvalues(params, eq);
    let closed_form_gap = closed_form.map(|cf| {
        cf.iter()
            .map(|&lam| {
                eigen
                    .eigenvalues
                    .iter()
                    .map(|z| (z - lam).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    });
    StabilityReport {
        equilibrium: *eq,
        verdict: Verdict::from_leading_real(eigen.max_real),
        eigen,
        char_poly: cp,
        routh_hurwitz: routh_hurwitz(&cp),
        closed_form,
        closed_form_gap,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfCandidate {
    pub alpha_star: f64,
    /// Sample values of `alpha` bracketing the sign change.
    pub alpha_bracket: (f64, f64),
    /// `Psi` at the bracketing samples.
    pub psi_values: (f64, f64),
    /// Finite-difference `d Re(rho) / d alpha` of the oscillatory pair.
    pub transversality_slope: f64,
    /// `C2, C3, C4, C1 C2 - C3` at `alpha_star`.
    pub side_conditions: [f64; 4],
    /// Imaginary part of the critical pair, `sqrt(C3 / C1)`.
    pub frequency: f64,
    pub equilibrium: Equilibrium,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HopfScan {
    /// Every refined sign change of `Psi`; check `accepted`.
    pub candidates: Vec<HopfCandidate>,
    /// Samples of `alpha` where no coexistence point exists.
    pub skipped: Vec<f64>,
    /// `(alpha, Psi)` for samples with a coexistence point.
    pub samples: Vec<(f64, f64)>,
}

impl HopfScan {
    pub fn accepted(&self) -> impl Iterator<Item = &HopfCandidate> {
        self.candidates.iter().filter(|c| c.accepted)
    }
}

fn nearest(found: Vec<Equilibrium>, reference: Option<&State>) -> Option<Equilibrium> {
    let dist = |e: &Equilibrium| {
        reference.map_or(0.0, |r| {
            let (a, b) = (e.point, r);
            (a.crop - b.crop).powi(2)
                + (a.susceptible - b.susceptible).powi(2)
                + (a.infected - b.infected).powi(2)
                + (a.awareness - b.awareness).powi(2)
        })
    };
    found
        .into_iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
}

fn coexistence_at(params: &ModelParams, alpha: f64, reference: Option<&State>) -> Option<Equilibrium> {
    let p = params.with("alpha", alpha).ok()?;
    nearest(coexistence_default(&p).ok()?, reference)
}

fn char_poly_at(params: &ModelParams, alpha: f64, eq: &Equilibrium) -> CharPoly4 {
    let p = params.with("alpha", alpha).expect("alpha is a parameter");
    char_poly(&p.jacobian(&eq.point))
}

fn oscillatory_real_at(params: &ModelParams, alpha: f64, reference: &State) -> Option<f64> {
    let eq = coexistence_at(params, alpha, Some(reference))?;
    EigenSummary::from_roots(char_poly_at(params, alpha, &eq).roots()).oscillatory_real()
}

/// Scans `alpha` over `range` at `n_samples` points for sign changes of `Psi`
/// at the coexistence point, then refines and checks each one.
pub fn hopf_scan(params: &ModelParams, range: (f64, f64), n_samples: usize) -> Result<HopfScan> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(Error::Contract(format!("invalid alpha range ({lo}, {hi})")));
    }
    if n_samples < 2 {
        return Err(Error::Contract("need at least two alpha samples".into()));
    }
    let alphas: Vec<f64> = (0..n_samples)
        .map(|i| lo + (hi - lo) * i as f64 / (n_samples - 1) as f64)
        .collect();
    let found: Vec<Vec<Equilibrium>> = alphas
        .par_iter()
        .map(|&alpha| {
            params
                .with("alpha", alpha)
                .ok()
                .and_then(|p| coexistence_default(&p).ok())
                .unwrap_or_default()
        })
        .collect();

    let mut scan = HopfScan::default();
    let mut tracked: Vec<Option<(f64, Equilibrium, f64)>> = Vec::with_capacity(n_samples);
    let mut reference: Option<State> = None;
    for (&alpha, list) in alphas.iter().zip(found) {
        match nearest(list, reference.as_ref()) {
            Some(eq) => {
                let psi = char_poly_at(params, alpha, &eq).psi();
                scan.samples.push((alpha, psi));
                reference = Some(eq.point);
                tracked.push(Some((alpha, eq, psi)));
            }
            None => {
                scan.skipped.push(alpha);
                tracked.push(None);
            }
        }
    }

    for pair in tracked.windows(2) {
        let (Some((a0, e0, psi0)), Some((a1, _, psi1))) = (pair[0], pair[1]) else {
            continue;
        };
        if psi0 == 0.0 || (psi0 < 0.0) == (psi1 < 0.0) {
            continue;
        }
        if let Some(c) = refine_hopf(params, (a0, a1), (psi0, psi1), e0) {
            scan.candidates.push(c);
        }
    }
    Ok(scan)
}

fn refine_hopf(
    params: &ModelParams,
    bracket: (f64, f64),
    psi_values: (f64, f64),
    start: Equilibrium,
) -> Option<HopfCandidate> {
    let (mut lo, mut hi) = bracket;
    let mut psi_lo = psi_values.0;
    let mut eq = start;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
        let e = coexistence_at(params, mid, Some(&eq.point))?;
        let psi = char_poly_at(params, mid, &e).psi();
        eq = e;
        if psi == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (psi < 0.0) == (psi_lo < 0.0) {
            lo = mid;
            psi_lo = psi;
        } else {
            hi = mid;
        }
    }
    let alpha_star = 0.5 * (lo + hi);
    let eq = coexistence_at(params, alpha_star, Some(&eq.point))?;
    let cp = char_poly_at(params, alpha_star, &eq);
    let side_conditions = [cp.c2, cp.c3, cp.c4, cp.c1 * cp.c2 - cp.c3];
    let up = oscillatory_real_at(params, alpha_star + TRANSVERSALITY_STEP, &eq.point);
    let down = oscillatory_real_at(params, alpha_star - TRANSVERSALITY_STEP, &eq.point);
    let transversality_slope = match (up, down) {
        (Some(u), Some(d)) => (u - d) / (2.0 * TRANSVERSALITY_STEP),
        _ => f64::NAN,
    };
    let frequency = if cp.c1 != 0.0 && cp.c3 / cp.c1 > 0.0 {
        (cp.c3 / cp.c1).sqrt()
    } else {
        f64::NAN
    };
    let accepted = side_conditions.iter().all(|v| *v > 0.0)
        && transversality_slope.abs() > MIN_TRANSVERSALITY;
    Some(HopfCandidate {
        alpha_star,
        alpha_bracket: bracket,
        psi_values,
        transversality_slope,
        side_conditions,
        frequency,
        equilibrium: eq,
        accepted,
    })
}
