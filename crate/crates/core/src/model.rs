//! Crop, pest and awareness dynamics.
//!
//! | Index | State | Meaning |
//! |-------|-------|---------|
//! | 0 | `X` | crop biomass |
//! | 1 | `S` | susceptible pests |
//! | 2 | `I` | infected pests |
//! | 3 | `A` | awareness level |
//!
//! Crop is consumed through a Holling type-II response `alpha X / (c + X)`;
//! infected pests feed at the reduced rate `phi alpha`. Aware people infect
//! susceptible pests at rate `lambda A / (a + A)`, and awareness grows from a
//! global source `gamma` plus local observation `sigma (S + I)`.
//!
//! The controlled system scales the infection term by `u1` and the global
//! source by `u2`; with both controls at one it coincides with the free system.

use crate::error::{Error, Result};

/// Allowed negative drift of a state component along numerical trajectories.
pub const POSITIVITY_SLACK: f64 = 1e-9;

/// Row-major 4x4 matrix.
pub type Matrix4 = [[f64; 4]; 4];

/// Conversion to and from plain 4-vectors, used by the integrators.
pub trait Components: Copy {
    fn from_array(v: [f64; 4]) -> Self;
    fn to_array(self) -> [f64; 4];

    fn is_finite(self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    fn max_abs(self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// Rate constants of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// `r`, crop growth rate (1/day).
    pub growth_rate: f64,
    /// `K`, crop carrying capacity.
    pub carrying_capacity: f64,
    /// `alpha`, pest attack rate.
    pub attack_rate: f64,
    /// `phi`, attack reduction of infected pests (< 1).
    pub infected_attack_factor: f64,
    /// `c`, crop half-saturation constant.
    pub crop_half_saturation: f64,
    /// `a`, awareness half-saturation constant.
    pub awareness_half_saturation: f64,
    /// `lambda`, activity rate of aware people.
    pub activity_rate: f64,
    /// `d`, natural pest mortality.
    pub pest_mortality: f64,
    /// `delta`, extra mortality of infected pests.
    pub disease_mortality: f64,
    /// `m1`, conversion efficiency of susceptible pests.
    pub susceptible_conversion: f64,
    /// `m2`, conversion efficiency of infected pests.
    pub infected_conversion: f64,
    /// `gamma`, awareness from global sources.
    pub global_awareness_rate: f64,
    /// `sigma`, awareness growth from observed pests.
    pub awareness_growth: f64,
    /// `eta`, fading of awareness.
    pub awareness_fading: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl ModelParams {
    /// Parameter names as used in configuration files, in canonical order.
    pub const KEYS: [&'static str; 14] = [
        "r", "K", "alpha", "phi", "c", "a", "lambda", "d", "delta", "m1", "m2", "gamma", "sigma",
        "eta",
    ];

    /// Default attack reduction of infected pests.
    pub const DEFAULT_PHI: f64 = 0.3;

    /// Reference parameter set.
    pub fn reference() -> Self {
        Self {
            growth_rate: 0.1,
            carrying_capacity: 1.0,
            attack_rate: 0.025,
            infected_attack_factor: Self::DEFAULT_PHI,
            crop_half_saturation: 1.0,
            awareness_half_saturation: 0.5,
            activity_rate: 0.025,
            pest_mortality: 0.01,
            disease_mortality: 0.1,
            susceptible_conversion: 0.8,
            infected_conversion: 0.6,
            global_awareness_rate: 0.003,
            awareness_growth: 0.015,
            awareness_fading: 0.015,
        }
    }

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "r" => &mut self.growth_rate,
            "K" => &mut self.carrying_capacity,
            "alpha" => &mut self.attack_rate,
            "phi" => &mut self.infected_attack_factor,
            "c" => &mut self.crop_half_saturation,
            "a" => &mut self.awareness_half_saturation,
            "lambda" => &mut self.activity_rate,
            "d" => &mut self.pest_mortality,
            "delta" => &mut self.disease_mortality,
            "m1" => &mut self.susceptible_conversion,
            "m2" => &mut self.infected_conversion,
            "gamma" => &mut self.global_awareness_rate,
            "sigma" => &mut self.awareness_growth,
            "eta" => &mut self.awareness_fading,
            _ => return None,
        })
    }

    /// Value of the parameter named `key`.
    pub fn get(&self, key: &str) -> Option<f64> {
        let mut copy = *self;
        copy.slot(key).map(|v| *v)
    }

    /// Sets the parameter named `key`; returns `false` for unknown names.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        match self.slot(key) {
            Some(v) => {
                *v = value;
                true
            }
            None => false,
        }
    }

    /// Copy with one parameter replaced.
    pub fn with(mut self, key: &str, value: f64) -> Result<Self> {
        if !self.set(key, value) {
            return Err(Error::InvalidParameter {
                name: "<unknown>",
                reason: format!("no parameter named `{key}`"),
            });
        }
        Ok(self)
    }

    /// `(key, value)` pairs in canonical order.
    pub fn entries(&self) -> [(&'static str, f64); 14] {
        Self::KEYS.map(|k| (k, self.get(k).expect("canonical key")))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.entries() {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite".into(),
                });
            }
            if value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be non-negative, got {value}"),
                });
            }
        }
        for (name, value) in [
            ("K", self.carrying_capacity),
            ("c", self.crop_half_saturation),
            ("a", self.awareness_half_saturation),
            ("eta", self.awareness_fading),
        ] {
            if value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be strictly positive".into(),
                });
            }
        }
        if self.infected_attack_factor >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "phi",
                reason: format!("must be below 1, got {}", self.infected_attack_factor),
            });
        }
        if self.susceptible_conversion <= self.infected_conversion {
            return Err(Error::InvalidParameter {
                name: "m1",
                reason: format!(
                    "must exceed m2 ({} <= {})",
                    self.susceptible_conversion, self.infected_conversion
                ),
            });
        }
        Ok(())
    }

    /// Per-pest consumption `alpha X / (c + X)`.
    #[inline]
    pub fn feeding(&self, crop: f64) -> f64 {
        self.attack_rate * crop / (self.crop_half_saturation + crop)
    }

    #[inline]
    fn feeding_slope(&self, crop: f64) -> f64 {
        let c = self.crop_half_saturation;
        self.attack_rate * c / ((c + crop) * (c + crop))
    }

    /// Per-susceptible infection rate `lambda A / (a + A)`.
    #[inline]
    pub fn infection(&self, awareness: f64) -> f64 {
        self.activity_rate * awareness / (self.awareness_half_saturation + awareness)
    }

    #[inline]
    fn infection_slope(&self, awareness: f64) -> f64 {
        let a = self.awareness_half_saturation;
        self.activity_rate * a / ((a + awareness) * (a + awareness))
    }

    /// Right-hand side of the free system.
    pub fn rates(&self, s: &State) -> State {
        self.controlled_rates(s, &ControlValue::FULL)
    }

    /// Right-hand side of the controlled system.
    pub fn controlled_rates(&self, s: &State, u: &ControlValue) -> State {
        let &State {
            crop: x,
            susceptible: sp,
            infected: ip,
            awareness: aw,
        } = s;
        let phi = self.infected_attack_factor;
        let f = self.feeding(x);
        let infect = u.pesticide * self.infection(aw) * sp;
        let d = self.pest_mortality;
        State {
            crop: self.growth_rate * x * (1.0 - x / self.carrying_capacity) - f * sp - phi * f * ip,
            susceptible: self.susceptible_conversion * f * sp - infect - d * sp,
            infected: self.infected_conversion * phi * f * ip + infect
                - (d + self.disease_mortality) * ip,
            awareness: u.campaign * self.global_awareness_rate
                + self.awareness_growth * (sp + ip)
                - self.awareness_fading * aw,
        }
    }

    /// Jacobian of the free system, `J[i][j] = d f_i / d y_j`.
    pub fn jacobian(&self, s: &State) -> Matrix4 {
        let &State {
            crop: x,
            susceptible: sp,
            infected: ip,
            awareness: aw,
        } = s;
        let phi = self.infected_attack_factor;
        let (m1, m2) = (self.susceptible_conversion, self.infected_conversion);
        let d = self.pest_mortality;
        let f = self.feeding(x);
        let df = self.feeding_slope(x);
        let g = self.infection(aw);
        let dg = self.infection_slope(aw);
        let sigma = self.awareness_growth;
        [
            [
                self.growth_rate * (1.0 - 2.0 * x / self.carrying_capacity) - df * sp - phi * df * ip,
                -f,
                -phi * f,
                0.0,
            ],
            [m1 * df * sp, m1 * f - g - d, 0.0, -dg * sp],
            [
                m2 * phi * df * ip,
                g,
                m2 * phi * f - d - self.disease_mortality,
                dg * sp,
            ],
            [0.0, sigma, sigma, -self.awareness_fading],
        ]
    }

    /// Costate dynamics `dp/dt = -dH/dy` for the controlled problem.
    pub fn costate_rates(
        &self,
        s: &State,
        p: &Costate,
        u: &ControlValue,
        w: &ObjectiveWeights,
    ) -> Costate {
        let &State {
            crop: x,
            susceptible: sp,
            infected: ip,
            awareness: aw,
        } = s;
        let &Costate {
            crop: p1,
            susceptible: p2,
            infected: p3,
            awareness: p4,
        } = p;
        let phi = self.infected_attack_factor;
        let (m1, m2) = (self.susceptible_conversion, self.infected_conversion);
        let d = self.pest_mortality;
        let f = self.feeding(x);
        let df = self.feeding_slope(x);
        let g = u.pesticide * self.infection(aw);
        let dg = u.pesticide * self.infection_slope(aw) * sp;
        let sigma = self.awareness_growth;
        let logistic = self.growth_rate * (1.0 - 2.0 * x / self.carrying_capacity);
        Costate {
            crop: p1 * (df * sp + phi * df * ip - logistic) - p2 * m1 * df * sp
                - p3 * m2 * phi * df * ip,
            susceptible: -2.0 * w.pest_penalty * sp + p1 * f + p2 * (g - m1 * f + d)
                - p3 * g
                - p4 * sigma,
            infected: p1 * phi * f + p3 * (d + self.disease_mortality - m2 * phi * f)
                - p4 * sigma,
            awareness: 2.0 * w.awareness_reward * aw + (p2 - p3) * dg
                + p4 * self.awareness_fading,
        }
    }

    /// Hamiltonian `L(y, u) + p . f(y, u)`.
    pub fn hamiltonian(&self, s: &State, p: &Costate, u: &ControlValue, w: &ObjectiveWeights) -> f64 {
        let f = self.controlled_rates(s, u).to_array();
        let p = p.to_array();
        running_cost(s, u, w) + f.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Population densities at one instant. Also used for their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub crop: f64,
    pub susceptible: f64,
    pub infected: f64,
    pub awareness: f64,
}

impl State {
    pub const NAMES: [&'static str; 4] = ["X", "S", "I", "A"];

    /// Builds a state, rejecting non-finite or negative components.
    pub fn new(crop: f64, susceptible: f64, infected: f64, awareness: f64) -> Result<Self> {
        let s = Self {
            crop,
            susceptible,
            infected,
            awareness,
        };
        if !s.is_finite() {
            return Err(Error::NonFinite("state"));
        }
        s.check_nonnegative(0.0)?;
        Ok(s)
    }

    /// Initial condition used for the published simulations.
    pub fn reference_initial() -> Self {
        Self {
            crop: 0.2,
            susceptible: 0.07,
            infected: 0.05,
            awareness: 0.5,
        }
    }

    /// Fails if any component is below `-slack`.
    pub fn check_nonnegative(&self, slack: f64) -> Result<()> {
        for (name, value) in Self::NAMES.iter().zip(self.to_array()) {
            if value < -slack {
                return Err(Error::NegativeState { name, value });
            }
        }
        Ok(())
    }
}

impl Components for State {
    fn from_array([crop, susceptible, infected, awareness]: [f64; 4]) -> Self {
        Self {
            crop,
            susceptible,
            infected,
            awareness,
        }
    }

    fn to_array(self) -> [f64; 4] {
        [self.crop, self.susceptible, self.infected, self.awareness]
    }
}

/// Adjoint multipliers paired with `(X, S, I, A)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Costate {
    pub crop: f64,
    pub susceptible: f64,
    pub infected: f64,
    pub awareness: f64,
}

impl Costate {
    pub const ZERO: Costate = Costate {
        crop: 0.0,
        susceptible: 0.0,
        infected: 0.0,
        awareness: 0.0,
    };
}

impl Components for Costate {
    fn from_array([crop, susceptible, infected, awareness]: [f64; 4]) -> Self {
        Self {
            crop,
            susceptible,
            infected,
            awareness,
        }
    }

    fn to_array(self) -> [f64; 4] {
        [self.crop, self.susceptible, self.infected, self.awareness]
    }
}

/// Weights of the running cost `A1 S^2 - A2 A^2 + B1 u1^2 / 2 + B2 u2^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    /// `A1`
    pub pest_penalty: f64,
    /// `A2`
    pub awareness_reward: f64,
    /// `B1`
    pub pesticide_cost: f64,
    /// `B2`
    pub campaign_cost: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            pest_penalty: 1015.0,
            awareness_reward: 1010.0,
            pesticide_cost: 1.6,
            campaign_cost: 1.0,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("A1", self.pest_penalty),
            ("A2", self.awareness_reward),
            ("B1", self.pesticide_cost),
            ("B2", self.campaign_cost),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        if self.pesticide_cost <= 0.0 || self.campaign_cost <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "B1/B2",
                reason: "control weights must be strictly positive".into(),
            });
        }
        Ok(())
    }
}

/// Control pair: `u1` bio-pesticide efficiency, `u2` awareness-campaign effort.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlValue {
    pub pesticide: f64,
    pub campaign: f64,
}

impl ControlValue {
    /// Both controls at one; recovers the free system.
    pub const FULL: ControlValue = ControlValue {
        pesticide: 1.0,
        campaign: 1.0,
    };

    pub fn new(pesticide: f64, campaign: f64) -> Result<Self> {
        for v in [pesticide, campaign] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Contract(format!("control {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            pesticide,
            campaign,
        })
    }

    /// Projection onto the admissible box.
    pub fn clamped(pesticide: f64, campaign: f64) -> Self {
        Self {
            pesticide: pesticide.clamp(0.0, 1.0),
            campaign: campaign.clamp(0.0, 1.0),
        }
    }

    pub fn is_admissible(&self) -> bool {
        (0.0..=1.0).contains(&self.pesticide) && (0.0..=1.0).contains(&self.campaign)
    }
}

fn ensure_finite<C: Components>(v: C, what: &'static str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Free dynamics with a finiteness check on the state.
pub fn rhs_uncontrolled(params: &ModelParams, s: &State) -> Result<State> {
    ensure_finite(*s, "state")?;
    Ok(params.rates(s))
}

/// Controlled dynamics with finiteness and admissibility checks.
pub fn rhs_controlled(params: &ModelParams, s: &State, u: &ControlValue) -> Result<State> {
    ensure_finite(*s, "state")?;
    if !u.is_admissible() {
        return Err(Error::Contract(format!("control {u:?} outside [0, 1]^2")));
    }
    Ok(params.controlled_rates(s, u))
}

pub fn jacobian(params: &ModelParams, s: &State) -> Result<Matrix4> {
    ensure_finite(*s, "state")?;
    Ok(params.jacobian(s))
}

pub fn costate_rhs(
    params: &ModelParams,
    s: &State,
    p: &Costate,
    u: &ControlValue,
    w: &ObjectiveWeights,
) -> Result<Costate> {
    ensure_finite(*s, "state")?;
    ensure_finite(*p, "costate")?;
    if !(u.pesticide.is_finite() && u.campaign.is_finite()) {
        return Err(Error::NonFinite("control"));
    }
    Ok(params.costate_rates(s, p, u, w))
}

/// Integrand of the objective functional.
pub fn running_cost(s: &State, u: &ControlValue, w: &ObjectiveWeights) -> f64 {
    w.pest_penalty * s.susceptible * s.susceptible
        - w.awareness_reward * s.awareness * s.awareness
        + 0.5 * w.pesticide_cost * u.pesticide * u.pesticide
        + 0.5 * w.campaign_cost * u.campaign * u.campaign
}

/// A-priori box that absorbs every trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractingRegion {
    /// `M = max(X(0), K)`, bound on crop.
    pub crop_max: f64,
    /// Bound on `X + S + I`.
    pub total_max: f64,
    /// Bound on awareness.
    pub awareness_max: f64,
}

impl AttractingRegion {
    pub fn contains(&self, s: &State, slack: f64) -> bool {
        s.crop <= self.crop_max + slack
            && s.crop + s.susceptible + s.infected <= self.total_max + slack
            && s.awareness <= self.awareness_max + slack
    }
}

/// Bounds `M`, `(r + 4d) M / (4d)` and `(4 gamma d + sigma (r + 4d) M) / (4 eta d)`.
pub fn attracting_region(params: &ModelParams, x0: f64) -> Result<AttractingRegion> {
    if !(x0.is_finite() && x0 >= 0.0) {
        return Err(Error::Contract(format!("initial crop {x0} must be >= 0")));
    }
    let d = params.pest_mortality;
    let eta = params.awareness_fading;
    if d <= 0.0 {
        return Err(Error::UndefinedBound("pest mortality d is zero"));
    }
    if eta <= 0.0 {
        return Err(Error::UndefinedBound("awareness fading eta is zero"));
    }
    let r = params.growth_rate;
    let m = x0.max(params.carrying_capacity);
    Ok(AttractingRegion {
        crop_max: m,
        total_max: (r + 4.0 * d) * m / (4.0 * d),
        awareness_max: (4.0 * params.global_awareness_rate * d
            + params.awareness_growth * (r + 4.0 * d) * m)
            / (4.0 * eta * d),
    })
}
