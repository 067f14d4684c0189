//! Forward-backward sweep for the bio-pesticide / awareness-campaign
//! control problem.

use crate::error::{Error, Result};
use crate::integrate::{integrate_cost, rk4_backward, simulate_controlled, TimeGrid, Trajectory};
use crate::model::{ControlValue, Costate, ModelParams, ObjectiveWeights, State};

pub const DEFAULT_HORIZON: f64 = 100.0;
pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub max_iterations: usize,
    /// Relative threshold on the max-norm control change.
    pub tolerance: f64,
    /// Weight of the new candidate in the relaxed update, in `(0, 1]`.
    pub relaxation_theta: f64,
    pub grid: TimeGrid,
    /// One control per grid node.
    pub initial_controls: Vec<ControlValue>,
    /// Pin `u1` to zero.
    pub freeze_pesticide: bool,
    /// Pin `u2` to zero.
    pub freeze_campaign: bool,
}

impl SweepOptions {
    /// Defaults on `grid`, starting from `u = (0.5, 0.5)`.
    pub fn new(grid: TimeGrid) -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-6,
            relaxation_theta: 0.5,
            grid,
            initial_controls: vec![ControlValue::clamped(0.5, 0.5); grid.len()],
            freeze_pesticide: false,
            freeze_campaign: false,
        }
    }

    pub fn with_horizon(tf: f64, dt: f64) -> Result<Self> {
        Ok(Self::new(TimeGrid::with_step(0.0, tf, dt)?))
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Contract("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Contract(format!("tolerance {} must be positive", self.tolerance)));
        }
        if !(self.relaxation_theta > 0.0 && self.relaxation_theta <= 1.0) {
            return Err(Error::Contract(format!(
                "relaxation {} outside (0, 1]",
                self.relaxation_theta
            )));
        }
        if self.initial_controls.len() != self.grid.len() {
            return Err(Error::Contract(format!(
                "initial controls: expected {} nodes, got {}",
                self.grid.len(),
                self.initial_controls.len()
            )));
        }
        if self.initial_controls.iter().any(|u| !u.is_admissible()) {
            return Err(Error::Contract("initial controls outside [0, 1]^2".into()));
        }
        Ok(())
    }

    fn pin(&self, u: ControlValue) -> ControlValue {
        ControlValue {
            pesticide: if self.freeze_pesticide { 0.0 } else { u.pesticide },
            campaign: if self.freeze_campaign { 0.0 } else { u.campaign },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSolution {
    /// States under the final controls.
    pub states: Trajectory,
    /// Costates under the final controls; the last node is zero.
    pub costates: Vec<Costate>,
    pub controls: Vec<ControlValue>,
    /// Objective of the controls entering each iteration.
    pub objective_history: Vec<f64>,
    /// Max-norm control change produced by each iteration.
    pub change_history: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub stationarity_residual: f64,
    /// Objective of the final controls.
    pub objective: f64,
    pub freeze_pesticide: bool,
    pub freeze_campaign: bool,
}

/// Pointwise minimiser of the Hamiltonian over `[0, 1]^2`.
pub fn control_update(
    s: &State,
    p: &Costate,
    params: &ModelParams,
    w: &ObjectiveWeights,
) -> ControlValue {
    let pesticide = (p.susceptible - p.infected) * params.infection(s.awareness) * s.susceptible
        / w.pesticide_cost;
    let campaign = -p.awareness * params.global_awareness_rate / w.campaign_cost;
    ControlValue::clamped(pesticide, campaign)
}

/// `(dH/du1, dH/du2)` at one node.
pub fn control_gradient(
    s: &State,
    p: &Costate,
    u: &ControlValue,
    params: &ModelParams,
    w: &ObjectiveWeights,
) -> [f64; 2] {
    [
        w.pesticide_cost * u.pesticide
            - (p.susceptible - p.infected) * params.infection(s.awareness) * s.susceptible,
        w.campaign_cost * u.campaign + p.awareness * params.global_awareness_rate,
    ]
}

/// Violation of the projected first-order condition for one control with
/// quadratic cost weight `weight`: `weight * |u - clamp(u - grad / weight)|`.
/// Equals `|grad|` in the interior and vanishes at a bound when the gradient
/// points outward.
fn hinge(u: f64, grad: f64, weight: f64) -> f64 {
    weight * (u - (u - grad / weight).clamp(0.0, 1.0)).abs()
}

/// Max over nodes of the projected Hamiltonian gradient; frozen controls are skipped.
pub fn stationarity_residual(sol: &SweepSolution, params: &ModelParams, w: &ObjectiveWeights) -> f64 {
    sol.states
        .nodes
        .iter()
        .zip(&sol.costates)
        .zip(&sol.controls)
        .map(|((s, p), u)| {
            let [g1, g2] = control_gradient(s, p, u, params, w);
            let r1 = if sol.freeze_pesticide {
                0.0
            } else {
                hinge(u.pesticide, g1, w.pesticide_cost)
            };
            let r2 = if sol.freeze_campaign {
                0.0
            } else {
                hinge(u.campaign, g2, w.campaign_cost)
            };
            r1.max(r2)
        })
        .fold(0.0, f64::max)
}

fn forward_backward(
    params: &ModelParams,
    w: &ObjectiveWeights,
    y0: State,
    controls: &[ControlValue],
    grid: &TimeGrid,
) -> Result<(Trajectory, Vec<Costate>, f64)> {
    let states = simulate_controlled(params, y0, controls, grid)?;
    let objective = integrate_cost(&states, controls, w)?;
    let costates = rk4_backward(
        |s, p, u| params.costate_rates(s, p, u, w),
        Costate::ZERO,
        &states,
        controls,
    )?;
    Ok((states, costates, objective))
}

fn max_norm(controls: &[ControlValue]) -> f64 {
    controls
        .iter()
        .map(|u| u.pesticide.abs().max(u.campaign.abs()))
        .fold(0.0, f64::max)
}

/// Iterates forward state pass, backward costate pass and relaxed control
/// update until the control change is below the tolerance.
///
/// Running out of iterations is not an error: the last iterate is returned
/// with `converged = false`.
pub fn solve(
    params: &ModelParams,
    w: &ObjectiveWeights,
    y0: State,
    opts: &SweepOptions,
) -> Result<SweepSolution> {
    opts.validate()?;
    params.validate()?;
    w.validate()?;
    let theta = opts.relaxation_theta;
    let mut controls: Vec<ControlValue> =
        opts.initial_controls.iter().map(|u| opts.pin(*u)).collect();
    let mut objective_history = Vec::new();
    let mut change_history = Vec::new();
    let mut converged = false;

    for _ in 0..opts.max_iterations {
        let (states, costates, objective) =
            forward_backward(params, w, y0, &controls, &opts.grid)?;
        objective_history.push(objective);
        let mut change = 0.0_f64;
        for ((u, s), p) in controls.iter_mut().zip(&states.nodes).zip(&costates) {
            let cand = opts.pin(control_update(s, p, params, w));
            let next = ControlValue::clamped(
                theta * cand.pesticide + (1.0 - theta) * u.pesticide,
                theta * cand.campaign + (1.0 - theta) * u.campaign,
            );
            change = change
                .max((next.pesticide - u.pesticide).abs())
                .max((next.campaign - u.campaign).abs());
            *u = next;
        }
        change_history.push(change);
        if change <= opts.tolerance * max_norm(&controls).max(1.0) {
            converged = true;
            break;
        }
    }

    let (states, costates, objective) = forward_backward(params, w, y0, &controls, &opts.grid)?;
    let states = states.with_costates(costates.clone())?;
    let mut sol = SweepSolution {
        states,
        costates,
        controls,
        iterations_used: objective_history.len(),
        objective_history,
        change_history,
        converged,
        stationarity_residual: f64::NAN,
        objective,
        freeze_pesticide: opts.freeze_pesticide,
        freeze_campaign: opts.freeze_campaign,
    };
    sol.stationarity_residual = stationarity_residual(&sol, params, w);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn costate(p2: f64, p3: f64, p4: f64) -> Costate {
        Costate {
            crop: 0.0,
            susceptible: p2,
            infected: p3,
            awareness: p4,
        }
    }

    #[test]
    fn update_formula() {
        let p = ModelParams::reference();
        let w = ObjectiveWeights::default();
        let s = State::reference_initial();
        let u = control_update(&s, &costate(2.0, 2.0, 0.0), &p, &w);
        assert_eq!((u.pesticide, u.campaign), (0.0, 0.0));

        let u = control_update(&s, &costate(2.0, 0.0, 0.0), &p, &w);
        assert_relative_eq!(u.pesticide, 0.00109375, max_relative = 1e-12);

        let u = control_update(&s, &costate(0.0, 0.0, -400.0), &p, &w);
        assert_eq!(u.campaign, 1.0);
        assert_relative_eq!(-(-400.0) * 0.003 / 1.0, 1.2, max_relative = 1e-12);
    }

    #[test]
    fn hinge_is_one_sided() {
        assert_eq!(hinge(1.0, 1.6 * (1.0 - 1.2), 1.6), 0.0);
        assert_eq!(hinge(0.0, 0.3, 1.0), 0.0);
        assert_relative_eq!(hinge(0.0, -0.3, 1.0), 0.3);
        assert_relative_eq!(hinge(0.5, -0.3, 1.0), 0.3);
        assert_relative_eq!(hinge(0.5, 0.016, 1.6), 0.016);
        // close to a bound only the distance to the bound counts
        assert_relative_eq!(hinge(1.0 - 1e-7, -0.5, 1.0), 1e-7, max_relative = 1e-6);
    }

    #[test]
    fn zero_state_weights_give_zero_controls() {
        let p = ModelParams::reference();
        let w = ObjectiveWeights {
            pest_penalty: 0.0,
            awareness_reward: 0.0,
            ..ObjectiveWeights::default()
        };
        let mut opts = SweepOptions::with_horizon(10.0, 0.05).unwrap();
        opts.initial_controls = vec![ControlValue::default(); opts.grid.len()];
        let sol = solve(&p, &w, State::reference_initial(), &opts).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations_used, 1);
        assert!(sol.controls.iter().all(|u| *u == ControlValue::default()));
        assert!(sol.costates.iter().all(|c| *c == Costate::ZERO));
    }

    #[test]
    fn short_horizon_contracts() {
        let p = ModelParams::reference();
        let w = ObjectiveWeights::default();
        let opts = SweepOptions::with_horizon(20.0, 0.05).unwrap();
        let sol = solve(&p, &w, State::reference_initial(), &opts).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.objective_history.len(), sol.iterations_used);
        assert_eq!(*sol.costates.last().unwrap(), Costate::ZERO);
        assert!(sol.controls.iter().all(|u| u.is_admissible()));
        assert!(sol.stationarity_residual < 1e-4, "{}", sol.stationarity_residual);
        assert!(sol.objective <= sol.objective_history[0] + 1e-9);
    }

    #[test]
    fn frozen_control_stays_zero() {
        let p = ModelParams::reference();
        let w = ObjectiveWeights::default();
        let mut opts = SweepOptions::with_horizon(20.0, 0.05).unwrap();
        opts.freeze_pesticide = true;
        let sol = solve(&p, &w, State::reference_initial(), &opts).unwrap();
        assert!(sol.controls.iter().all(|u| u.pesticide == 0.0));
        assert!(sol.controls.iter().any(|u| u.campaign > 0.0));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let p = ModelParams::reference();
        let w = ObjectiveWeights::default();
        let mut opts = SweepOptions::with_horizon(20.0, 0.05).unwrap();
        opts.max_iterations = 2;
        let sol = solve(&p, &w, State::reference_initial(), &opts).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations_used, 2);
    }

    #[test]
    fn rejects_bad_options() {
        let p = ModelParams::reference();
        let w = ObjectiveWeights::default();
        let y0 = State::reference_initial();
        let mut opts = SweepOptions::with_horizon(1.0, 0.1).unwrap();
        opts.relaxation_theta = 0.0;
        assert!(solve(&p, &w, y0, &opts).is_err());
        let mut opts = SweepOptions::with_horizon(1.0, 0.1).unwrap();
        opts.initial_controls.pop();
        assert!(solve(&p, &w, y0, &opts).is_err());
    }
}
