//! Solver for the Lagrangian Temple system `η_t = F(v/η)_x`, `v_t = 0`.
//!
//! Written as `η_t + G_x = 0` with `G = -F(v/η)`, the non-degenerate wave
//! speed `∂G/∂η = F'(v/η)·v/η²` is positive whenever `F' > 0` and `v > 0`,
//! and the `v`-field is stationary. The interface flux is therefore `G` of
//! the left state and `v` is never touched.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::eulerian::{check_cfl, output_schedule};
use crate::flux::{VelocityLaw, RANGE_ENLARGEMENT};
use crate::grid::{Boundary, GridFunction};

/// Smallest admissible stretch before a run is aborted.
pub const ETA_MIN: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct TempleState {
    /// Stretch γ_x.
    pub eta: GridFunction,
    /// Initial density, shared by every time level.
    pub v: Arc<GridFunction>,
    pub vel: Arc<VelocityLaw>,
}

impl TempleState {
    /// Density along particle paths, `v/η` per cell.
    pub fn density(&self, i: usize) -> f64 {
        self.v.values[i] / self.eta.values[i]
    }

    /// Particle velocity `F(v/η)` per cell.
    pub fn velocity(&self, i: usize) -> f64 {
        self.vel.velocity(self.density(i))
    }

    /// Whether every `v/η` lies in the data range enlarged by 5 %.
    pub fn within_data_range(&self) -> bool {
        let r = self.vel.data_range;
        (0..self.eta.len()).all(|i| {
            let d = self.density(i);
            d >= r.lo / RANGE_ENLARGEMENT && d <= r.hi * RANGE_ENLARGEMENT
        })
    }
}

#[derive(Debug, Clone)]
pub struct TempleTrajectory {
    pub states: Vec<TempleState>,
    pub times: Vec<f64>,
    pub cfl: f64,
    /// Displacement of the left window edge at each stored time, integrated
    /// by the trapezoid rule over every solver step.
    pub anchor: Vec<f64>,
}

impl TempleTrajectory {
    pub fn last(&self) -> &TempleState {
        self.states.last().expect("trajectory has a t = 0 state")
    }
}

/// `η ≡ 1`, `v = ρ₀`.
pub fn init_temple(vel: Arc<VelocityLaw>, rho0: &GridFunction) -> Result<TempleState> {
    let r = vel.data_range;
    if rho0.min() < r.lo - 1e-12 || rho0.max() > r.hi + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "initial density [{}, {}] leaves the data range [{}, {}]",
            rho0.min(),
            rho0.max(),
            r.lo,
            r.hi
        )));
    }
    Ok(TempleState {
        eta: rho0.with_values(vec![1.0; rho0.len()]),
        v: Arc::new(rho0.clone()),
        vel,
    })
}

/// Particle velocity at the left window edge: `F(v/η)` of the upwind cell.
pub fn anchor_velocity(state: &TempleState) -> f64 {
    state.vel.velocity(state.v.at(-1) / state.eta.at(-1))
}

/// Upwind flux of `η_t + G_x = 0`: `G` evaluated on the left state.
pub fn eta_interface_flux(vel: &VelocityLaw, eta_l: f64, v_l: f64, _eta_r: f64, _v_r: f64) -> f64 {
    -vel.velocity(v_l / eta_l)
}

/// Non-degenerate characteristic speed `F'(v/η)·v/η²`.
pub fn eta_wave_speed(vel: &VelocityLaw, eta: f64, v: f64) -> f64 {
    let ratio = v / eta;
    vel.velocity_prime(ratio) * ratio / eta
}

fn stable_dt(state: &TempleState, cfl: f64) -> f64 {
    let speed = (0..state.eta.len())
        .map(|i| eta_wave_speed(&state.vel, state.eta.values[i], state.v.values[i]).abs())
        .fold(0.0, f64::max);
    if speed > 0.0 {
        cfl * state.eta.dx / speed
    } else {
        f64::INFINITY
    }
}

fn step(state: &TempleState, dt: f64, t_new: f64) -> Result<TempleState> {
    let eta = &state.eta;
    let v = &*state.v;
    let n = eta.len();
    let mut fluxes: Vec<f64> = (0..=n as isize)
        .map(|i| eta_interface_flux(&state.vel, eta.at(i - 1), v.at(i - 1), eta.at(i), v.at(i)))
        .collect();
    if eta.boundary == Boundary::Periodic {
        fluxes[n] = fluxes[0];
    }
    let r = dt / eta.dx;
    let mut values = Vec::with_capacity(n);
    for (i, (e, f)) in eta.values.iter().zip(fluxes.windows(2)).enumerate() {
        let next = e - r * (f[1] - f[0]);
        if !(next > ETA_MIN) {
            return Err(Error::PositivityLoss {
                cell: i,
                value: next,
                t: t_new,
            });
        }
        values.push(next);
    }
    Ok(TempleState {
        eta: eta.with_values(values),
        v: Arc::clone(&state.v),
        vel: Arc::clone(&state.vel),
    })
}

/// Conservative upwind update of `η`; `v` is shared unchanged across all levels.
pub fn solve_temple(state0: &TempleState, t_final: f64, cfl: f64, outputs: &[f64]) -> Result<TempleTrajectory> {
    check_cfl(cfl)?;
    if let Some(i) = state0.eta.values.iter().position(|&e| !(e > ETA_MIN)) {
        return Err(Error::PositivityLoss {
            cell: i,
            value: state0.eta.values[i],
            t: 0.0,
        });
    }
    let times = output_schedule(t_final, outputs)?;
    let mut state = state0.clone();
    let mut states = vec![state0.clone()];
    let mut anchor = vec![0.0];
    let (mut t, mut shift) = (0.0, 0.0);
    let mut speed = anchor_velocity(&state);
    for &target in &times[1..] {
        while t < target {
            let dt_max = stable_dt(&state, cfl);
            let (dt, next_t) = if t + dt_max >= target { (target - t, target) } else { (dt_max, t + dt_max) };
            state = step(&state, dt, next_t)?;
            let next_speed = anchor_velocity(&state);
            shift += 0.5 * dt * (speed + next_speed);
            speed = next_speed;
            t = next_t;
        }
        states.push(state.clone());
        anchor.push(shift);
    }
    Ok(TempleTrajectory {
        states,
        times,
        cfl,
        anchor,
    })
}
