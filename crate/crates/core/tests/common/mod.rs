#![allow(dead_code)]

use pestaware::model::{Components, Costate, Matrix4};
use pestaware::{ControlValue, ModelParams, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A parameter set satisfying every validity constraint.
pub fn random_params<R: Rng>(rng: &mut R) -> ModelParams {
    let m1 = rng.random_range(0.3..1.0);
    ModelParams {
        growth_rate: rng.random_range(0.01..1.0),
        carrying_capacity: rng.random_range(0.2..5.0),
        attack_rate: rng.random_range(0.005..0.5),
        infected_attack_factor: rng.random_range(0.05..0.95),
        crop_half_saturation: rng.random_range(0.1..5.0),
        awareness_half_saturation: rng.random_range(0.05..2.0),
        activity_rate: rng.random_range(0.001..0.2),
        pest_mortality: rng.random_range(0.001..0.1),
        disease_mortality: rng.random_range(0.01..0.5),
        susceptible_conversion: m1,
        infected_conversion: rng.random_range(0.05..0.95) * m1,
        global_awareness_rate: rng.random_range(0.0005..0.05),
        awareness_growth: rng.random_range(0.001..0.1),
        awareness_fading: rng.random_range(0.005..0.1),
    }
}

pub fn random_state<R: Rng>(rng: &mut R) -> State {
    State::from_array([
        rng.random_range(0.01..2.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..3.0),
    ])
}

pub fn random_costate<R: Rng>(rng: &mut R) -> Costate {
    Costate::from_array(std::array::from_fn(|_| rng.random_range(-100.0..100.0)))
}

pub fn random_control<R: Rng>(rng: &mut R) -> ControlValue {
    ControlValue::clamped(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0))
}

fn step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Central-difference Jacobian of `f` at `y`.
pub fn fd_jacobian<F: Fn(&State) -> State>(f: F, y: &State) -> Matrix4 {
    let base = y.to_array();
    let mut out = [[0.0; 4]; 4];
    for j in 0..4 {
        let h = step(base[j]);
        let mut plus = base;
        let mut minus = base;
        plus[j] += h;
        minus[j] -= h;
        let fp = f(&State::from_array(plus)).to_array();
        let fm = f(&State::from_array(minus)).to_array();
        for i in 0..4 {
            out[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    out
}

/// Central-difference gradient of a scalar function of the state.
pub fn fd_gradient<F: Fn(&State) -> f64>(f: F, y: &State) -> [f64; 4] {
    let base = y.to_array();
    std::array::from_fn(|j| {
        let h = step(base[j]);
        let mut plus = base;
        let mut minus = base;
        plus[j] += h;
        minus[j] -= h;
        (f(&State::from_array(plus)) - f(&State::from_array(minus))) / (2.0 * h)
    })
}

pub fn max_abs(m: &Matrix4) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn max_abs_diff(a: &Matrix4, b: &Matrix4) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Determinant by cofactor expansion along the first row.
pub fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    (0..n)
        .map(|j| {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(k, _)| *k != j)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * det(&minor)
        })
        .sum()
}

/// Coefficients `(C1..C4)` of `det(rho I - J)` from cofactor determinants at
/// five sample points.
pub fn cofactor_char_poly(j: &Matrix4) -> [f64; 4] {
    let value = |rho: f64| {
        let m: Vec<Vec<f64>> = (0..4)
            .map(|r| (0..4).map(|c| if r == c { rho - j[r][c] } else { -j[r][c] }).collect())
            .collect();
        det(&m)
    };
    // p(rho) - rho^4 = C1 rho^3 + C2 rho^2 + C3 rho + C4; sample at rho = 0, +-1, +-2
    let p0 = value(0.0);
    let (p1, m1) = (value(1.0) - 1.0, value(-1.0) - 1.0);
    let (p2, m2) = (value(2.0) - 16.0, value(-2.0) - 16.0);
    let c4 = p0;
    // odd and even parts
    let odd1 = (p1 - m1) / 2.0; // C1 + C3
    let odd2 = (p2 - m2) / 2.0; // 8 C1 + 2 C3
    let even1 = (p1 + m1) / 2.0 - c4; // C2
    let c1 = (odd2 - 2.0 * odd1) / 6.0;
    let c3 = odd1 - c1;
    [c1, even1, c3, c4]
}
