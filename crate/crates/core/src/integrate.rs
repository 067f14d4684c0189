//! Fixed-step classical Runge-Kutta integration.
//!
//! States are integrated forward from their initial value, costates backward
//! from their terminal value. The backward pass needs states and controls at
//! RK4 half steps; both are linearly interpolated between stored nodes.

use crate::error::{Error, Result};
use crate::model::{
    running_cost, Components, ControlValue, Costate, ModelParams, ObjectiveWeights, State,
    POSITIVITY_SLACK,
};

/// Uniform time grid `t0 < t0 + h < ... < tf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite()) {
            return Err(Error::NonFinite("time grid bounds"));
        }
        if tf <= t0 {
            return Err(Error::Contract(format!("grid end {tf} must exceed start {t0}")));
        }
        if n_steps == 0 {
            return Err(Error::Contract("grid needs at least one step".into()));
        }
        Ok(Self { t0, tf, n_steps })
    }

    /// Grid whose step is `dt`, or slightly less when `dt` does not divide the span.
    pub fn with_step(t0: f64, tf: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Contract(format!("step {dt} must be positive")));
        }
        let span = tf - t0;
        let n = (span / dt - 1e-9).ceil().max(1.0);
        Self::new(t0, tf, n as usize)
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.tf
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.tf - self.t0) / self.n_steps as f64
    }

    /// Time of node `i`; the last node is exactly `tf`.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.tf
        } else {
            self.t0 + i as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }
}

/// States on a grid, optionally with the controls and costates that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub nodes: Vec<State>,
    pub controls: Option<Vec<ControlValue>>,
    pub costates: Option<Vec<Costate>>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, nodes: Vec<State>) -> Result<Self> {
        check_len("state nodes", nodes.len(), grid.len())?;
        Ok(Self {
            grid,
            nodes,
            controls: None,
            costates: None,
        })
    }

    pub fn with_controls(mut self, controls: Vec<ControlValue>) -> Result<Self> {
        check_len("controls", controls.len(), self.grid.len())?;
        self.controls = Some(controls);
        Ok(self)
    }

    pub fn with_costates(mut self, costates: Vec<Costate>) -> Result<Self> {
        check_len("costates", costates.len(), self.grid.len())?;
        self.costates = Some(costates);
        Ok(self)
    }

    pub fn last(&self) -> &State {
        self.nodes.last().expect("trajectory has at least two nodes")
    }

    /// Componentwise minimum over all nodes.
    pub fn component_min(&self) -> [f64; 4] {
        fold_nodes(&self.nodes, f64::INFINITY, f64::min)
    }

    /// Componentwise maximum over all nodes.
    pub fn component_max(&self) -> [f64; 4] {
        fold_nodes(&self.nodes, f64::NEG_INFINITY, f64::max)
    }
}

fn fold_nodes(nodes: &[State], init: f64, op: fn(f64, f64) -> f64) -> [f64; 4] {
    nodes.iter().fold([init; 4], |acc, s| {
        let v = s.to_array();
        [op(acc[0], v[0]), op(acc[1], v[1]), op(acc[2], v[2]), op(acc[3], v[3])]
    })
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what}: expected {want} nodes, got {got}")))
    }
}

#[inline]
fn axpy(y: [f64; 4], h: f64, k: [f64; 4]) -> [f64; 4] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]]
}

#[inline]
fn combine(y: [f64; 4], h: f64, k: [[f64; 4]; 4]) -> [f64; 4] {
    let mut out = y;
    for (j, o) in out.iter_mut().enumerate() {
        *o += h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
    }
    out
}

#[inline]
fn lerp<C: Components>(a: C, b: C) -> C {
    let (a, b) = (a.to_array(), b.to_array());
    C::from_array([
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
        0.5 * (a[3] + b[3]),
    ])
}

#[inline]
fn mid_control(a: &ControlValue, b: &ControlValue) -> ControlValue {
    ControlValue {
        pesticide: 0.5 * (a.pesticide + b.pesticide),
        campaign: 0.5 * (a.campaign + b.campaign),
    }
}

/// One classical RK4 step of size `h` (negative for backward steps).
/// `f(stage, y)` receives the stage index 0..4 (0: start, 1 and 2: midpoint, 3: end).
#[inline]
fn rk4_step<C, F>(y: C, h: f64, mut f: F) -> C
where
    C: Components,
    F: FnMut(usize, &C) -> C,
{
    let y0 = y.to_array();
    let k1 = f(0, &y).to_array();
    let k2 = f(1, &C::from_array(axpy(y0, 0.5 * h, k1))).to_array();
    let k3 = f(2, &C::from_array(axpy(y0, 0.5 * h, k2))).to_array();
    let k4 = f(3, &C::from_array(axpy(y0, h, k3))).to_array();
    C::from_array(combine(y0, h, [k1, k2, k3, k4]))
}

/// Forward RK4 of a generic 4-vector system `dy/dt = f(t, y)`.
pub fn rk4_forward_raw<C, F>(f: F, y0: C, grid: &TimeGrid) -> Result<Vec<C>>
where
    C: Components,
    F: Fn(f64, &C) -> C,
{
    if !y0.is_finite() {
        return Err(Error::NonFinite("initial value"));
    }
    let h = grid.step();
    let mut out = Vec::with_capacity(grid.len());
    out.push(y0);
    let mut y = y0;
    for i in 0..grid.n_steps() {
        let t = grid.time(i);
        y = rk4_step(y, h, |stage, v| {
            let ts = match stage {
                0 => t,
                3 => t + h,
                _ => t + 0.5 * h,
            };
            f(ts, v)
        });
        if !y.is_finite() {
            return Err(Error::BlowUp {
                time: grid.time(i + 1),
            });
        }
        out.push(y);
    }
    Ok(out)
}

/// Forward RK4 of `dy/dt = f(t, y)` from `y0` over `grid`.
pub fn rk4_forward<F>(f: F, y0: State, grid: &TimeGrid) -> Result<Trajectory>
where
    F: Fn(f64, &State) -> State,
{
    let nodes = rk4_forward_raw(f, y0, grid)?;
    Trajectory::new(*grid, nodes)
}

/// Forward RK4 of `dy/dt = f(y, u)` with controls given at the grid nodes;
/// half-step controls are the average of the adjacent nodes.
pub fn rk4_forward_controlled<F>(
    f: F,
    y0: State,
    controls: &[ControlValue],
    grid: &TimeGrid,
) -> Result<Trajectory>
where
    F: Fn(&State, &ControlValue) -> State,
{
    check_len("controls", controls.len(), grid.len())?;
    if !y0.is_finite() {
        return Err(Error::NonFinite("initial value"));
    }
    let h = grid.step();
    let mut nodes = Vec::with_capacity(grid.len());
    nodes.push(y0);
    let mut y = y0;
    for i in 0..grid.n_steps() {
        let (ua, ub) = (&controls[i], &controls[i + 1]);
        let um = mid_control(ua, ub);
        y = rk4_step(y, h, |stage, v| match stage {
            0 => f(v, ua),
            3 => f(v, ub),
            _ => f(v, &um),
        });
        if !y.is_finite() {
            return Err(Error::BlowUp {
                time: grid.time(i + 1),
            });
        }
        nodes.push(y);
    }
    Trajectory::new(*grid, nodes)?.with_controls(controls.to_vec())
}

/// Backward RK4 of `dp/dt = g(y, p, u)` from `p(tf) = p_terminal`.
///
/// The returned sequence is indexed like the grid; its last entry is
/// `p_terminal` itself.
pub fn rk4_backward<G>(
    g: G,
    p_terminal: Costate,
    states: &Trajectory,
    controls: &[ControlValue],
) -> Result<Vec<Costate>>
where
    G: Fn(&State, &Costate, &ControlValue) -> Costate,
{
    let grid = &states.grid;
    check_len("state nodes", states.nodes.len(), grid.len())?;
    check_len("controls", controls.len(), grid.len())?;
    if !p_terminal.is_finite() {
        return Err(Error::NonFinite("terminal costate"));
    }
    let h = grid.step();
    let mut out = vec![Costate::ZERO; grid.len()];
    let last = grid.n_steps();
    out[last] = p_terminal;
    let mut p = p_terminal;
    for i in (1..=last).rev() {
        let (ya, yb) = (&states.nodes[i], &states.nodes[i - 1]);
        let (ua, ub) = (&controls[i], &controls[i - 1]);
        let ym = lerp(*ya, *yb);
        let um = mid_control(ua, ub);
        p = rk4_step(p, -h, |stage, q| match stage {
            0 => g(ya, q, ua),
            3 => g(yb, q, ub),
            _ => g(&ym, q, &um),
        });
        if !p.is_finite() {
            return Err(Error::BlowUp {
                time: grid.time(i - 1),
            });
        }
        out[i - 1] = p;
    }
    Ok(out)
}

/// Free-system trajectory from `y0`; fails on invalid parameters, blow-up, or
/// a component dropping below `-POSITIVITY_SLACK`.
pub fn simulate(params: &ModelParams, y0: State, grid: &TimeGrid) -> Result<Trajectory> {
    params.validate()?;
    y0.check_nonnegative(0.0)?;
    let traj = rk4_forward(|_, y| params.rates(y), y0, grid)?;
    for node in &traj.nodes {
        node.check_nonnegative(POSITIVITY_SLACK)?;
    }
    Ok(traj)
}

/// Trajectory under fixed node controls, with the same checks as [`simulate`].
pub fn simulate_controlled(
    params: &ModelParams,
    y0: State,
    controls: &[ControlValue],
    grid: &TimeGrid,
) -> Result<Trajectory> {
    params.validate()?;
    y0.check_nonnegative(0.0)?;
    if let Some(u) = controls.iter().find(|u| !u.is_admissible()) {
        return Err(Error::InvalidParameter {
            name: "control",
            reason: format!("({}, {}) outside [0, 1]^2", u.pesticide, u.campaign),
        });
    }
    let traj = rk4_forward_controlled(|y, u| params.controlled_rates(y, u), y0, controls, grid)?;
    for node in &traj.nodes {
        node.check_nonnegative(POSITIVITY_SLACK)?;
    }
    Ok(traj)
}

/// Composite trapezoidal rule for samples spaced `h` apart.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => h * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Objective functional by the trapezoidal rule over the grid nodes.
pub fn integrate_cost(
    traj: &Trajectory,
    controls: &[ControlValue],
    w: &ObjectiveWeights,
) -> Result<f64> {
    check_len("state nodes", traj.nodes.len(), traj.grid.len())?;
    check_len("controls", controls.len(), traj.grid.len())?;
    let integrand: Vec<f64> = traj
        .nodes
        .iter()
        .zip(controls)
        .map(|(s, u)| running_cost(s, u, w))
        .collect();
    Ok(trapezoid(&integrand, traj.grid.step()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn decay(_t: f64, y: &State) -> State {
        State::from_array(y.to_array().map(|v| -v))
    }

    fn unit_exp_error(n: usize) -> f64 {
        let grid = TimeGrid::new(0.0, 1.0, n).unwrap();
        let y0 = State::from_array([1.0, 0.0, 0.0, 0.0]);
        let traj = rk4_forward(decay, y0, &grid).unwrap();
        (traj.last().crop - (-1.0_f64).exp()).abs()
    }

    #[test]
    fn grid_basics() {
        let g = TimeGrid::with_step(0.0, 2000.0, 0.05).unwrap();
        assert_eq!(g.n_steps(), 40000);
        assert_eq!(g.time(g.n_steps()), 2000.0);
        let g = TimeGrid::with_step(0.0, 100.0, 0.01).unwrap();
        assert_eq!(g.n_steps(), 10000);
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::with_step(0.0, 1.0, -0.1).is_err());
        assert_eq!(TimeGrid::with_step(0.0, 1.0, 0.3).unwrap().n_steps(), 4);
    }

    #[test]
    fn zero_field_is_constant() {
        let grid = TimeGrid::new(0.0, 5.0, 50).unwrap();
        let y0 = State::reference_initial();
        let traj = rk4_forward(|_, _| State::default(), y0, &grid).unwrap();
        assert!(traj.nodes.iter().all(|s| *s == y0));
    }

    /// RK4 amplification factor for `dy/dt = k y` over one step `h`.
    fn rk4_factor(kh: f64) -> f64 {
        1.0 + kh + kh * kh / 2.0 + kh.powi(3) / 6.0 + kh.powi(4) / 24.0
    }

    #[test]
    fn exponential_decay_accuracy() {
        let oracle = (rk4_factor(-0.1).powi(10) - (-1.0_f64).exp()).abs();
        assert_relative_eq!(unit_exp_error(10), oracle, max_relative = 1e-6);
        assert!(unit_exp_error(10) < 4e-7);
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let traj = rk4_forward(decay, State::from_array([1.0, 0.0, 0.0, 0.0]), &grid).unwrap();
        assert_relative_eq!(traj.last().crop, 0.36787944, epsilon = 1e-6);
        assert_eq!(traj.nodes[0].crop, 1.0);
    }

    #[test]
    fn fourth_order_convergence() {
        let ratio = unit_exp_error(10) / unit_exp_error(20);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
        let order = ratio.log2();
        assert!((3.5..=4.5).contains(&order));
    }

    #[test]
    fn blow_up_names_time() {
        let grid = TimeGrid::new(0.0, 2.0, 20).unwrap();
        let err = rk4_forward(
            |_, y| State::from_array(y.to_array().map(|v| v * v * 1e200)),
            State::from_array([1e100, 0.0, 0.0, 0.0]),
            &grid,
        )
        .unwrap_err();
        match err {
            Error::BlowUp { time } => assert!(time > 0.0 && time <= 2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn flat_states(grid: &TimeGrid) -> Trajectory {
        Trajectory::new(*grid, vec![State::default(); grid.len()]).unwrap()
    }

    #[test]
    fn backward_zero_field() {
        let grid = TimeGrid::new(0.0, 3.0, 30).unwrap();
        let states = flat_states(&grid);
        let u = vec![ControlValue::default(); grid.len()];
        let p = rk4_backward(|_, _, _| Costate::ZERO, Costate::ZERO, &states, &u).unwrap();
        assert!(p.iter().all(|q| *q == Costate::ZERO));
    }

    #[test]
    fn backward_time_reversal() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let states = flat_states(&grid);
        let u = vec![ControlValue::default(); grid.len()];
        let terminal = Costate::from_array([(-1.0_f64).exp(), 0.0, 0.0, 0.0]);
        let p = rk4_backward(
            |_, q, _| Costate::from_array(q.to_array().map(|v| -v)),
            terminal,
            &states,
            &u,
        )
        .unwrap();
        let oracle = (-1.0_f64).exp() * rk4_factor(0.1).powi(10);
        assert_relative_eq!(p[0].crop, oracle, max_relative = 1e-14);
        assert!((p[0].crop - 1.0).abs() < 1e-6);
        assert_eq!(p[grid.n_steps()], terminal);
    }

    #[test]
    fn backward_interpolates_state_linearly() {
        // dp/dt = X(t) with X(t) = t stored on the nodes; RK4 with linear
        // midpoints integrates it exactly: p(0) = p(1) - 1/2.
        let grid = TimeGrid::new(0.0, 1.0, 7).unwrap();
        let nodes = grid.times().map(|t| State::from_array([t, 0.0, 0.0, 0.0])).collect();
        let states = Trajectory::new(grid, nodes).unwrap();
        let u = vec![ControlValue::default(); grid.len()];
        let p = rk4_backward(
            |y, _, _| Costate::from_array([y.crop, 0.0, 0.0, 0.0]),
            Costate::ZERO,
            &states,
            &u,
        )
        .unwrap();
        assert_relative_eq!(p[0].crop, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn backward_rejects_grid_mismatch() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let states = flat_states(&grid);
        let short = vec![ControlValue::default(); 5];
        let err = rk4_backward(|_, _, _| Costate::ZERO, Costate::ZERO, &states, &short);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn cost_quadrature() {
        let w = ObjectiveWeights::default();
        let grid = TimeGrid::new(0.0, 4.0, 8).unwrap();
        let zero = flat_states(&grid);
        let none = vec![ControlValue::default(); grid.len()];
        assert_eq!(integrate_cost(&zero, &none, &w).unwrap(), 0.0);

        // constant integrand B1/2 + B2/2 = 1.3 over [0, 4]
        let full = vec![ControlValue::FULL; grid.len()];
        assert_relative_eq!(integrate_cost(&zero, &full, &w).unwrap(), 5.2, max_relative = 1e-14);

        // A1 S^2 = t on [0, 1] when S = sqrt(t)
        let unit = ObjectiveWeights {
            pest_penalty: 1.0,
            awareness_reward: 0.0,
            pesticide_cost: 1.0,
            campaign_cost: 1.0,
        };
        for n in [1, 3, 10] {
            let grid = TimeGrid::new(0.0, 1.0, n).unwrap();
            let nodes = grid.times().map(|t| State::from_array([0.0, t.sqrt(), 0.0, 0.0])).collect();
            let traj = Trajectory::new(grid, nodes).unwrap();
            let u = vec![ControlValue::default(); grid.len()];
            assert_relative_eq!(integrate_cost(&traj, &u, &unit).unwrap(), 0.5, epsilon = 1e-15);
        }
        assert!(integrate_cost(&zero, &none[..3], &w).is_err());
    }
}
