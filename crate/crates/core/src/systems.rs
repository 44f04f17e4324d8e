//! Lagrangian first-order systems for isentropic gas dynamics and the 1-D
//! nonlinear wave equation, in the variables `η = γ_x`, `w = ρ₀γ_t`, `v = ρ₀`:
//!
//! * gas:  `η_t − (w/v)_x = 0`, `w_t + p(v/η)_x = 0`
//! * nlwe: `η_t − (w/v)_x = 0`, `w_t + (p(v/η) − w²/(ηv))_x = 0`
//!
//! with `v_t = 0` in both cases. Fluxes are local Lax–Friedrichs.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::eulerian::{check_cfl, output_schedule};
use crate::flow_map::FlowMap;
use crate::flux::QUADRATURE_TOL;
use crate::grid::{Boundary, GridFunction};
use crate::numerics::{adaptive_simpson, real_fn, RealFn};
use crate::temple::ETA_MIN;
use crate::variational::{discrete_action, SpacetimeMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    Gas,
    Nlwe,
}

/// Pressure `p`, its derivative, and `P` with `P' = p`, `P(1) = 0`.
#[derive(Clone)]
pub struct PressureLaw {
    pub name: String,
    p: RealFn,
    p_prime: RealFn,
    antiderivative: RealFn,
}

impl fmt::Debug for PressureLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PressureLaw").field("name", &self.name).finish()
    }
}

impl PressureLaw {
    pub fn new(name: impl Into<String>, p: RealFn, p_prime: RealFn, antiderivative: RealFn) -> Self {
        Self {
            name: name.into(),
            p,
            p_prime,
            antiderivative,
        }
    }

    /// `p(ρ) = κρ^α`.
    pub fn power(kappa: f64, alpha: f64) -> Self {
        let antiderivative = if alpha == -1.0 {
            real_fn(move |r: f64| kappa * r.ln())
        } else {
            real_fn(move |r: f64| kappa * (r.powf(alpha + 1.0) - 1.0) / (alpha + 1.0))
        };
        Self::new(
            format!("power(kappa={kappa}, alpha={alpha})"),
            real_fn(move |r: f64| kappa * r.powf(alpha)),
            real_fn(move |r: f64| kappa * alpha * r.powf(alpha - 1.0)),
            antiderivative,
        )
    }

    pub fn p(&self, rho: f64) -> f64 {
        (self.p)(rho)
    }

    pub fn p_prime(&self, rho: f64) -> f64 {
        (self.p_prime)(rho)
    }

    /// `P(ρ) = ∫₁^ρ p`.
    pub fn big_p(&self, rho: f64) -> f64 {
        (self.antiderivative)(rho)
    }
}

/// Cell values `(η, w, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub eta: f64,
    pub w: f64,
    pub v: f64,
}

#[derive(Debug, Clone)]
pub struct SystemState {
    pub eta: GridFunction,
    pub w: GridFunction,
    pub v: Arc<GridFunction>,
    pub kind: SystemKind,
}

impl SystemState {
    /// `η ≡ 1`, `v = ρ₀`, `w = ρ₀ u₀`.
    pub fn new(kind: SystemKind, rho0: &GridFunction, u0: &GridFunction) -> Result<Self> {
        if rho0.len() != u0.len() {
            return Err(Error::InvalidInput("density and velocity meshes differ".into()));
        }
        if let Some(i) = rho0.values.iter().position(|&r| !(r > 0.0)) {
            return Err(Error::InvalidInput(format!("density must be positive (cell {i})")));
        }
        Ok(Self {
            eta: rho0.with_values(vec![1.0; rho0.len()]),
            w: rho0.with_values(rho0.values.iter().zip(&u0.values).map(|(r, u)| r * u).collect()),
            v: Arc::new(rho0.clone()),
            kind,
        })
    }

    pub fn cell(&self, i: isize) -> CellState {
        CellState {
            eta: self.eta.at(i),
            w: self.w.at(i),
            v: self.v.at(i),
        }
    }

    /// Particle velocity `γ_t = w/v` per cell.
    pub fn velocity(&self, i: usize) -> f64 {
        self.w.values[i] / self.v.values[i]
    }
}

fn physical_flux(kind: SystemKind, s: CellState, p: &PressureLaw) -> [f64; 2] {
    let pressure = p.p(s.v / s.eta);
    match kind {
        SystemKind::Gas => [-s.w / s.v, pressure],
        SystemKind::Nlwe => [-s.w / s.v, pressure - s.w * s.w / (s.eta * s.v)],
    }
}

/// Bound on the characteristic speeds: `|w/(vη)| + √p'(v/η)/η`.
pub fn wave_speed(s: CellState, p: &PressureLaw) -> f64 {
    (s.w / (s.v * s.eta)).abs() + p.p_prime(s.v / s.eta).max(0.0).sqrt() / s.eta
}

/// Rusanov flux on `(η, w)`; `v` receives no flux.
pub fn system_flux(kind: SystemKind, left: CellState, right: CellState, p: &PressureLaw) -> [f64; 2] {
    let fl = physical_flux(kind, left, p);
    let fr = physical_flux(kind, right, p);
    let lambda = wave_speed(left, p).max(wave_speed(right, p));
    [
        0.5 * (fl[0] + fr[0]) - 0.5 * lambda * (right.eta - left.eta),
        0.5 * (fl[1] + fr[1]) - 0.5 * lambda * (right.w - left.w),
    ]
}

#[derive(Debug, Clone)]
pub struct SystemTrajectory {
    pub states: Vec<SystemState>,
    pub times: Vec<f64>,
    pub cfl: f64,
    /// Displacement of the left window edge at each stored time, integrated
    /// by the trapezoid rule over every solver step.
    pub anchor: Vec<f64>,
}

/// Velocity of the left window edge: mean of `w/v` over its two neighbouring cells.
pub fn anchor_velocity(state: &SystemState) -> f64 {
    let (a, b) = (state.cell(-1), state.cell(0));
    0.5 * (a.w / a.v + b.w / b.v)
}

fn stable_dt(state: &SystemState, p: &PressureLaw, cfl: f64) -> f64 {
    let speed = (0..state.eta.len() as isize)
        .map(|i| wave_speed(state.cell(i), p))
        .fold(0.0, f64::max);
    if speed > 0.0 {
        cfl * state.eta.dx / speed
    } else {
        f64::INFINITY
    }
}

fn step(state: &SystemState, p: &PressureLaw, dt: f64, t_new: f64) -> Result<SystemState> {
    let n = state.eta.len();
    let mut fluxes: Vec<[f64; 2]> = (0..=n as isize)
        .map(|i| system_flux(state.kind, state.cell(i - 1), state.cell(i), p))
        .collect();
    if state.eta.boundary == Boundary::Periodic {
        fluxes[n] = fluxes[0];
    }
    let r = dt / state.eta.dx;
    let mut eta = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let (fl, fr) = (fluxes[i], fluxes[i + 1]);
        let e = state.eta.values[i] - r * (fr[0] - fl[0]);
        if !(e > ETA_MIN) {
            return Err(Error::PositivityLoss { cell: i, value: e, t: t_new });
        }
        eta.push(e);
        w.push(state.w.values[i] - r * (fr[1] - fl[1]));
    }
    Ok(SystemState {
        eta: state.eta.with_values(eta),
        w: state.w.with_values(w),
        v: Arc::clone(&state.v),
        kind: state.kind,
    })
}

/// Conservative Rusanov integration of `(η, w)` with `v` shared unchanged.
pub fn solve_system(
    state0: &SystemState,
    t_final: f64,
    cfl: f64,
    p: &PressureLaw,
    outputs: &[f64],
) -> Result<SystemTrajectory> {
    check_cfl(cfl)?;
    let times = output_schedule(t_final, outputs)?;
    let mut state = state0.clone();
    let mut states = vec![state0.clone()];
    let mut anchor = vec![0.0];
    let (mut t, mut shift) = (0.0, 0.0);
    let mut speed = anchor_velocity(&state);
    for &target in &times[1..] {
        while t < target {
            let dt_max = stable_dt(&state, p, cfl);
            let (dt, next_t) = if t + dt_max >= target { (target - t, target) } else { (dt_max, t + dt_max) };
            state = step(&state, p, dt, next_t)?;
            let next_speed = anchor_velocity(&state);
            shift += 0.5 * dt * (speed + next_speed);
            speed = next_speed;
            t = next_t;
        }
        states.push(state.clone());
        anchor.push(shift);
    }
    Ok(SystemTrajectory {
        states,
        times,
        cfl,
        anchor,
    })
}

/// `AC − B²` of the principal part `Aγ_tt + 2Bγ_xt + Cγ_xx` of the nonlinear
/// wave equation in diffeomorphism form: `A = η`, `B = −γ_t`,
/// `C = −(p'(ρ₀/η) − γ_t²)/η`. Equals `−p'(ρ₀/η)`.
pub fn hyperbolicity_check(p: &PressureLaw, rho0: f64, eta: f64, gamma_t: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(format!("eta = {eta} must be positive")));
    }
    let a = eta;
    let b = -gamma_t;
    let c = -(p.p_prime(rho0 / eta) - gamma_t * gamma_t) / eta;
    let value = a * c - b * b;
    if value >= 0.0 || !value.is_finite() {
        return Err(Error::NonHyperbolic { value });
    }
    Ok(value)
}

/// Action density `b(r, s, q)` with `r = γ_t`, `s = γ_x`, `q = ρ₀`:
///
/// * gas:  `q r²/(2s) + (1/s) ∫₁^s p(q/σ) dσ`
/// * nlwe: `½ (r q/s)² − P(q/s)`
pub fn system_action_density(kind: SystemKind, r: f64, s: f64, q: f64, p: &PressureLaw) -> Result<f64> {
    if !(s > 0.0) || !(q > 0.0) {
        return Err(Error::InvalidInput(format!("action density needs s > 0, q > 0 (s = {s}, q = {q})")));
    }
    match kind {
        SystemKind::Gas => {
            let integral = adaptive_simpson(&|sigma| p.p(q / sigma), 1.0, s, QUADRATURE_TOL)?;
            Ok(q * r * r / (2.0 * s) + integral / s)
        }
        SystemKind::Nlwe => {
            let m = r * q / s;
            Ok(0.5 * m * m - p.big_p(q / s))
        }
    }
}

/// `∬ b(D_tγ, D_xγ, ρ₀)·D_xγ` with `ρ₀` given at the x-nodes.
pub fn system_action(kind: SystemKind, map: &SpacetimeMap, rho0_nodes: &[f64], p: &PressureLaw) -> Result<f64> {
    if rho0_nodes.len() != map.nx() {
        return Err(Error::InvalidInput("density nodes do not match the map".into()));
    }
    discrete_action(map, |_, j, gt, gx| Ok(system_action_density(kind, gt, gx, rho0_nodes[j], p)? * gx))
}

/// Central difference of [`system_action`] in ε along `ζ`.
pub fn system_first_variation(
    kind: SystemKind,
    map: &SpacetimeMap,
    rho0_nodes: &[f64],
    p: &PressureLaw,
    zeta: &crate::variational::PerturbationField,
    eps: f64,
) -> Result<f64> {
    crate::variational::first_variation_of(map, zeta, eps, |m| system_action(kind, m, rho0_nodes, p))
}

/// Flow maps `γ(·, t)` of a system trajectory: `γ_x = η` summed from the
/// left edge, which sits at the anchor position recorded by the solver.
pub fn reconstruct_system(traj: &SystemTrajectory) -> Result<Vec<FlowMap>> {
    let first = traj.states.first().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    if traj.anchor.len() != traj.states.len() {
        return Err(Error::InvalidInput("anchor history does not match the stored states".into()));
    }
    let mesh = &first.eta;
    let n = mesh.len();
    let period = (mesh.boundary == Boundary::Periodic).then(|| mesh.length());
    let edges: Vec<f64> = (0..=n).map(|i| mesh.edge(i)).collect();
    let mut maps = Vec::with_capacity(traj.states.len());
    for ((state, &t), &shift) in traj.states.iter().zip(&traj.times).zip(&traj.anchor) {
        let anchor = mesh.x0 + shift;
        let mut gamma = Vec::with_capacity(n + 1);
        let mut stretch = 0.0;
        gamma.push(anchor);
        for (i, &e) in state.eta.values.iter().enumerate() {
            stretch += (e - 1.0) * mesh.dx;
            gamma.push(anchor + (edges[i + 1] - mesh.x0) + stretch);
        }
        let map = FlowMap {
            x: edges.clone(),
            gamma,
            t,
            period,
        };
        map.check_monotone(mesh.dx)?;
        maps.push(map);
    }
    Ok(maps)
}

/// Density `(v/η)∘γ⁻¹` sampled at the cell centres of `mesh`.
pub fn recovered_system_density(mesh: &GridFunction, state: &SystemState, map: &FlowMap) -> Result<GridFunction> {
    let values = (0..mesh.len())
        .map(|i| {
            let (j, _) = map.locate(mesh.center(i))?;
            Ok(state.v.values[j] / state.eta.values[j])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mesh.with_values(values))
}

/// Residual of the second-order equation the first-order system encodes,
/// evaluated on cell centres at interior output times.
#[derive(Debug, Clone)]
pub struct ElResidual {
    /// `field[n][i]` for output times `1..nt-1` and the cells where the stencil fits.
    pub field: Vec<Vec<f64>>,
    pub max: f64,
}

/// Forms every term of the quasilinear equation from `γ_x = η`,
/// `γ_t = w/v` by centred differences:
///
/// * gas:  `ρ₀γ_tt − p'(ρ₀/γ_x)(ρ₀/γ_x²)γ_xx + p'(ρ₀/γ_x)ρ₀'/γ_x`
/// * nlwe: `γ_xγ_tt − 2γ_tγ_tx − (p' − γ_t²)γ_xx/γ_x + (ρ₀'/ρ₀)(p' − γ_t²)`
///
/// Requires uniformly spaced output times.
pub fn euler_lagrange_residual(traj: &SystemTrajectory, p: &PressureLaw) -> Result<ElResidual> {
    let nt = traj.times.len();
    if nt < 3 {
        return Err(Error::InvalidInput("need at least three output times".into()));
    }
    let dt = (traj.times[nt - 1] - traj.times[0]) / (nt - 1) as f64;
    if traj.times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(Error::InvalidInput("output times must be uniformly spaced".into()));
    }
    let first = &traj.states[0];
    let mesh = &first.eta;
    let n = mesh.len() as isize;
    let dx = mesh.dx;
    let cells: Vec<isize> = match mesh.boundary {
        Boundary::Periodic => (0..n).collect(),
        Boundary::ConstantExtension => (1..n - 1).collect(),
    };
    let vel = |s: &SystemState, i: isize| s.w.at(i) / s.v.at(i);
    let mut field = Vec::with_capacity(nt - 2);
    let mut worst: f64 = 0.0;
    for k in 1..nt - 1 {
        let (prev, cur, next) = (&traj.states[k - 1], &traj.states[k], &traj.states[k + 1]);
        let row: Vec<f64> = cells
            .iter()
            .map(|&i| {
                let q = cur.v.at(i);
                let dq = (cur.v.at(i + 1) - cur.v.at(i - 1)) / (2.0 * dx);
                let gx = cur.eta.at(i);
                let gt = vel(cur, i);
                let gtt = (vel(next, i) - vel(prev, i)) / (2.0 * dt);
                let gxx = (cur.eta.at(i + 1) - cur.eta.at(i - 1)) / (2.0 * dx);
                let gtx = (vel(cur, i + 1) - vel(cur, i - 1)) / (2.0 * dx);
                let pp = p.p_prime(q / gx);
                match cur.kind {
                    SystemKind::Gas => q * gtt - pp * q / (gx * gx) * gxx + pp * dq / gx,
                    SystemKind::Nlwe => {
                        gx * gtt - 2.0 * gt * gtx - (pp - gt * gt) * gxx / gx + dq / q * (pp - gt * gt)
                    }
                }
            })
            .collect();
        worst = row.iter().fold(worst, |a, r| a.max(r.abs()));
        field.push(row);
    }
    Ok(ElResidual { field, max: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn uniform(n: usize, value: f64) -> GridFunction {
        GridFunction::from_fn(n, 0.0, 1.0, Boundary::Periodic, |_| value).unwrap()
    }

    #[test]
    fn consistent_flux_at_equal_states() {
        let p = PressureLaw::power(1.0, 2.0);
        let s = CellState { eta: 1.0, w: 0.0, v: 1.0 };
        assert_eq!(system_flux(SystemKind::Gas, s, s, &p), [0.0, 1.0]);
        assert_eq!(system_flux(SystemKind::Nlwe, s, s, &p), [0.0, 1.0]);
        let moving = CellState { eta: 1.2, w: 0.3, v: 0.9 };
        let f = system_flux(SystemKind::Nlwe, moving, moving, &p);
        assert_relative_eq!(f[1], p.p(0.75) - 0.09 / (1.2 * 0.9), max_relative = 1e-14);
    }

    #[test]
    fn constant_state_is_stationary() {
        let p = PressureLaw::power(1.0, 2.0);
        for kind in [SystemKind::Gas, SystemKind::Nlwe] {
            let s0 = SystemState::new(kind, &uniform(32, 1.0), &uniform(32, 0.0)).unwrap();
            let traj = solve_system(&s0, 0.5, 0.45, &p, &[0.1]).unwrap();
            for s in &traj.states {
                assert_eq!(s.eta.values, s0.eta.values);
                assert_eq!(s.w.values, s0.w.values);
                assert!(Arc::ptr_eq(&s.v, &s0.v));
            }
        }
    }

    #[test]
    fn periodic_run_conserves_stretch_and_momentum() {
        let p = PressureLaw::power(1.0, 2.0);
        let rho0 = GridFunction::from_fn(128, 0.0, 1.0, Boundary::Periodic, |x| {
            1.0 + 0.2 * (2.0 * std::f64::consts::PI * x).sin()
        })
        .unwrap();
        let u0 = rho0.with_values(rho0.values.iter().map(|r| 0.1 * r.cos()).collect());
        for kind in [SystemKind::Gas, SystemKind::Nlwe] {
            let s0 = SystemState::new(kind, &rho0, &u0).unwrap();
            let traj = solve_system(&s0, 0.2, 0.45, &p, &[]).unwrap();
            let last = traj.states.last().unwrap();
            assert_relative_eq!(last.eta.integral(), s0.eta.integral(), max_relative = 1e-12);
            assert_relative_eq!(last.w.integral(), s0.w.integral(), max_relative = 1e-12);
            assert_eq!(last.v.values, rho0.values);
        }
    }

    #[test]
    fn hyperbolicity_examples() {
        let p2 = PressureLaw::power(1.0, 2.0);
        assert_eq!(hyperbolicity_check(&p2, 1.0, 1.0, 0.0).unwrap(), -2.0);
        assert_eq!(hyperbolicity_check(&p2, 1.0, 1.0, 5.0).unwrap(), -2.0);
        let p3 = PressureLaw::power(1.0, 3.0);
        assert_relative_eq!(hyperbolicity_check(&p3, 2.0, 2.0, 0.3).unwrap(), -3.0, max_relative = 1e-14);
        let falling = PressureLaw::power(-1.0, 2.0);
        assert!(matches!(
            hyperbolicity_check(&falling, 1.0, 1.0, 0.0),
            Err(Error::NonHyperbolic { .. })
        ));
    }

    proptest! {
        #[test]
        fn hyperbolicity_identity(kappa in 0.5f64..2.0, alpha in 1.0f64..3.0, rho0 in 0.5f64..2.0,
                                  eta in 0.5f64..2.0, gt in -3.0f64..3.0) {
            let p = PressureLaw::power(kappa, alpha);
            let v = hyperbolicity_check(&p, rho0, eta, gt).unwrap();
            let expect = -p.p_prime(rho0 / eta);
            prop_assert!(((v - expect) / expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn action_density_examples() {
        let p = PressureLaw::power(1.0, 2.0);
        assert_eq!(system_action_density(SystemKind::Gas, 0.0, 1.0, 1.0, &p).unwrap(), 0.0);
        assert_eq!(system_action_density(SystemKind::Nlwe, 0.0, 1.0, 1.0, &p).unwrap(), 0.0);
        assert_eq!(system_action_density(SystemKind::Nlwe, 2.0, 1.0, 1.0, &p).unwrap(), 2.0);
        // gas with p = ρ²: ∫₁^s q²/σ² dσ = q²(1 - 1/s)
        let (r, s, q) = (0.4, 1.5, 1.2);
        let expect = q * r * r / (2.0 * s) + q * q * (1.0 - 1.0 / s) / s;
        assert_relative_eq!(
            system_action_density(SystemKind::Gas, r, s, q, &p).unwrap(),
            expect,
            max_relative = 1e-10
        );
        assert!(system_action_density(SystemKind::Gas, 0.0, -1.0, 1.0, &p).is_err());
    }

    #[test]
    fn constant_state_has_no_el_residual() {
        let p = PressureLaw::power(1.0, 2.0);
        for kind in [SystemKind::Gas, SystemKind::Nlwe] {
            let s0 = SystemState::new(kind, &uniform(32, 1.0), &uniform(32, 0.0)).unwrap();
            let traj = solve_system(&s0, 0.2, 0.45, &p, &[0.05, 0.1, 0.15]).unwrap();
            assert!(euler_lagrange_residual(&traj, &p).unwrap().max <= 1e-12);
        }
    }
}
