//! Long-horizon parameter sweeps recording the envelope of the attractor.

use rayon::prelude::*;

use crate::equilibria::{coexistence_default, pest_free};
use crate::error::{Error, Result};
use crate::integrate::{simulate, TimeGrid, Trajectory};
use crate::model::{Components, ModelParams, State};
use crate::stability::{classify, Verdict};

pub const DEFAULT_HORIZON: f64 = 2000.0;
pub const DEFAULT_STEP: f64 = 0.05;
pub const DEFAULT_TRANSIENT_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Key of the swept parameter, one of [`ModelParams::KEYS`].
    pub parameter: String,
    pub values: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    /// Leading share of the horizon discarded before taking extrema.
    pub transient_fraction: f64,
    pub initial_state: State,
}

impl SweepSpec {
    pub fn new(parameter: &str, values: Vec<f64>, initial_state: State) -> Self {
        Self {
            parameter: parameter.to_string(),
            values,
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_STEP,
            transient_fraction: DEFAULT_TRANSIENT_FRACTION,
            initial_state,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !ModelParams::KEYS.contains(&self.parameter.as_str()) {
            return Err(Error::Contract(format!("unknown parameter `{}`", self.parameter)));
        }
        if self.values.is_empty() {
            return Err(Error::Contract("sweep needs at least one value".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sweep value"));
        }
        if !(0.0..1.0).contains(&self.transient_fraction) {
            return Err(Error::Contract(format!(
                "transient fraction {} outside [0, 1)",
                self.transient_fraction
            )));
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::with_step(0.0, self.horizon, self.dt)
    }
}

/// Componentwise extrema over the retained part of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailExtrema {
    pub min: [f64; 4],
    pub max: [f64; 4],
}

impl TailExtrema {
    pub fn peak_to_peak(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.max[i] - self.min[i])
    }
}

/// Extrema over nodes at or after `transient_fraction * tf`.
pub fn tail_extrema(traj: &Trajectory, transient_fraction: f64) -> TailExtrema {
    let n = traj.grid.n_steps();
    let first = ((transient_fraction * n as f64).ceil() as usize).min(n);
    let mut min = [f64::INFINITY; 4];
    let mut max = [f64::NEG_INFINITY; 4];
    for node in &traj.nodes[first..] {
        for (i, v) in node.to_array().into_iter().enumerate() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    TailExtrema { min, max }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// `None` when the run failed; see `failure`.
    pub tail: Option<TailExtrema>,
    pub failure: Option<String>,
    pub pest_free: Option<Verdict>,
    pub coexistence: Vec<(State, Verdict)>,
}

fn sweep_row(params: &ModelParams, spec: &SweepSpec, grid: &TimeGrid, value: f64) -> SweepRow {
    let mut row = SweepRow {
        value,
        tail: None,
        failure: None,
        pest_free: None,
        coexistence: Vec::new(),
    };
    let p = match params
        .with(&spec.parameter, value)
        .and_then(|p| p.validate().map(|_| p))
    {
        Ok(p) => p,
        Err(e) => {
            row.failure = Some(e.to_string());
            return row;
        }
    };
    match simulate(&p, spec.initial_state, grid) {
        Ok(traj) => row.tail = Some(tail_extrema(&traj, spec.transient_fraction)),
        Err(e) => row.failure = Some(e.to_string()),
    }
    row.pest_free = pest_free(&p).ok().map(|e| classify(&p, &e).verdict);
    row.coexistence = coexistence_default(&p)
        .unwrap_or_default()
        .iter()
        .map(|e| (e.point, classify(&p, e).verdict))
        .collect();
    row
}

/// One row per value, in input order; a failing value is flagged and the
/// sweep carries on.
pub fn run_sweep(params: &ModelParams, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    params.validate()?;
    let grid = spec.grid()?;
    Ok(spec
        .values
        .par_iter()
        .map(|&v| sweep_row(params, spec, &grid, v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_spec(values: Vec<f64>) -> SweepSpec {
        let mut spec = SweepSpec::new("alpha", values, State::reference_initial());
        spec.horizon = 200.0;
        spec.dt = 0.1;
        spec
    }

    #[test]
    fn single_value_matches_direct_simulation() {
        let p = ModelParams::reference();
        let spec = short_spec(vec![p.attack_rate]);
        let rows = run_sweep(&p, &spec).unwrap();
        let traj = simulate(&p, spec.initial_state, &spec.grid().unwrap()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].tail, Some(tail_extrema(&traj, 0.7)));
        assert_eq!(rows[0].pest_free, Some(Verdict::Stable));
        assert!(rows[0].coexistence.is_empty());
    }

    #[test]
    fn rows_keep_input_order_and_flag_failures() {
        let p = ModelParams::reference();
        let spec = short_spec(vec![0.08, -1.0, 0.03]);
        let rows = run_sweep(&p, &spec).unwrap();
        let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
        assert_eq!(values, vec![0.08, -1.0, 0.03]);
        assert!(rows[1].failure.is_some() && rows[1].tail.is_none());
        assert!(rows[0].failure.is_none() && rows[2].failure.is_none());
        assert_eq!(rows[0].coexistence.len(), 1);
        for row in [&rows[0], &rows[2]] {
            let t = row.tail.unwrap();
            assert!((0..4).all(|i| t.min[i] <= t.max[i]));
        }
    }

    #[test]
    fn invalid_specs() {
        let p = ModelParams::reference();
        assert!(run_sweep(&p, &short_spec(vec![])).is_err());
        assert!(run_sweep(&p, &short_spec(vec![f64::NAN])).is_err());
        let mut spec = short_spec(vec![0.1]);
        spec.transient_fraction = 1.0;
        assert!(run_sweep(&p, &spec).is_err());
        spec.transient_fraction = 0.5;
        spec.parameter = "beta".into();
        assert!(run_sweep(&p, &spec).is_err());
    }

    #[test]
    fn tail_of_whole_trajectory() {
        let p = ModelParams::reference();
        let grid = TimeGrid::new(0.0, 10.0, 100).unwrap();
        let traj = simulate(&p, State::reference_initial(), &grid).unwrap();
        let t = tail_extrema(&traj, 0.0);
        assert_eq!(t.min, traj.component_min());
        assert_eq!(t.max, traj.component_max());
    }
}
