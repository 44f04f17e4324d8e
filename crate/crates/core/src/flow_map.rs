//! Reconstruction of the flow map `γ` from a Temple trajectory, its inverse,
//! and recovery of the Eulerian density `ρ = (v/η)∘γ⁻¹`.

use crate::error::{Error, Result};
use crate::flux::VelocityLaw;
use crate::grid::{Boundary, GridFunction};
use crate::temple::{TempleState, TempleTrajectory, ETA_MIN};

/// Monotone, continuous, piecewise-linear map `x ↦ γ(x, t)` stored at cell edges.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    /// Cell edges of the label mesh, `N + 1` values.
    pub x: Vec<f64>,
    /// γ at the edges.
    pub gamma: Vec<f64>,
    pub t: f64,
    /// Window length for degree-one circle maps.
    pub period: Option<f64>,
}

/// Maps at each stored time with the discrete consistency diagnostic.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub maps: Vec<FlowMap>,
    /// max |D_t γ_x − D_x γ_t| over cells and time intervals.
    pub mixed_partial_residual: f64,
}

impl FlowMap {
    pub fn identity(x: Vec<f64>, period: Option<f64>) -> Self {
        Self {
            gamma: x.clone(),
            x,
            t: 0.0,
            period,
        }
    }

    pub fn cells(&self) -> usize {
        self.x.len() - 1
    }

    pub fn check_monotone(&self, dx: f64) -> Result<()> {
        for (i, w) in self.gamma.windows(2).enumerate() {
            let inc = w[1] - w[0];
            if !(inc >= ETA_MIN * dx) {
                return Err(Error::MonotonicityLoss { node: i, increment: inc });
            }
        }
        Ok(())
    }

    /// Forward evaluation by linear interpolation; circle maps extend by `γ(x + P) = γ(x) + P`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (x0, x1) = (self.x[0], self.x[self.x.len() - 1]);
        let (xs, shift) = match self.period {
            Some(p) => {
                let k = ((x - x0) / p).floor();
                (x - k * p, k * p)
            }
            None => {
                if x < x0 || x > x1 {
                    return Err(Error::OutOfRange { y: x, lo: x0, hi: x1 });
                }
                (x, 0.0)
            }
        };
        let i = self.x.partition_point(|&e| e <= xs).clamp(1, self.x.len() - 1) - 1;
        let s = (xs - self.x[i]) / (self.x[i + 1] - self.x[i]);
        Ok(self.gamma[i] + s * (self.gamma[i + 1] - self.gamma[i]) + shift)
    }

    /// Segment index and preimage of `y`. For circle maps the index is in `0..N`.
    pub fn locate(&self, y: f64) -> Result<(usize, f64)> {
        let n = self.gamma.len() - 1;
        let (g0, g1) = (self.gamma[0], self.gamma[n]);
        let (ys, shift) = match self.period {
            Some(p) => {
                let k = ((y - g0) / p).floor();
                (y - k * p, k * p)
            }
            None => {
                if y < g0 || y > g1 {
                    return Err(Error::OutOfRange { y, lo: g0, hi: g1 });
                }
                (y, 0.0)
            }
        };
        let i = self.gamma.partition_point(|&g| g <= ys).clamp(1, n) - 1;
        let s = (ys - self.gamma[i]) / (self.gamma[i + 1] - self.gamma[i]);
        Ok((i, self.x[i] + s * (self.x[i + 1] - self.x[i]) + shift))
    }
}

/// γ⁻¹(y) by binary search over the nodes and linear interpolation.
pub fn invert(map: &FlowMap, y: f64) -> Result<f64> {
    map.locate(y).map(|(_, x)| x)
}

/// Velocity of the left edge of cell `i`: `F(v/η)` of the upwind cell.
fn edge_velocity(state: &TempleState, i: isize) -> f64 {
    let eta = state.eta.at(i - 1);
    let v = state.v.at(i - 1);
    state.vel.velocity(v / eta)
}

/// Initial density on the label mesh for a Lagrangian run whose image must
/// cover the window of `rho0` up to `t_final`.
///
/// Particles drift right at speed at most `max F`, so a real-line window is
/// extended on the left by that many cells of the left state (plus two).
/// Circle windows are returned unchanged.
pub fn label_mesh(rho0: &GridFunction, vel: &VelocityLaw, t_final: f64) -> GridFunction {
    if rho0.boundary == Boundary::Periodic {
        return rho0.clone();
    }
    let r = vel.data_range;
    let speed = vel.velocity(r.lo).abs().max(vel.velocity(r.hi).abs());
    let cells = (speed * t_final / rho0.dx).ceil() as usize + 2;
    let mut values = vec![rho0.values[0]; cells];
    values.extend_from_slice(&rho0.values);
    GridFunction {
        values,
        dx: rho0.dx,
        x0: rho0.x0 - cells as f64 * rho0.dx,
        boundary: rho0.boundary,
    }
}

/// Builds γ at each stored time: `γ_x = η` by summation from the left edge,
/// which sits at the anchor position recorded by the solver.
pub fn reconstruct(traj: &TempleTrajectory) -> Result<Reconstruction> {
    let first = traj.states.first().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    let mesh = &first.eta;
    let n = mesh.len();
    let period = match mesh.boundary {
        Boundary::Periodic => Some(mesh.length()),
        Boundary::ConstantExtension => None,
    };
    let edges: Vec<f64> = (0..=n).map(|i| mesh.edge(i)).collect();
    if traj.anchor.len() != traj.states.len() {
        return Err(Error::InvalidInput("anchor history does not match the stored states".into()));
    }
    let mut maps = Vec::with_capacity(traj.states.len());
    for (k, (state, &t)) in traj.states.iter().zip(&traj.times).enumerate() {
        if mesh.boundary == Boundary::ConstantExtension {
            let drift = (state.eta.values[0] - first.eta.values[0]).abs();
            if drift > 1e-8 {
                return Err(Error::AnchorDrift { drift });
            }
        }
        let anchor = mesh.x0 + traj.anchor[k];
        // offsets from the identity, so γ(·, 0) = x holds to round-off
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
    Ok(Reconstruction {
        mixed_partial_residual: mixed_partial_residual(traj),
        maps,
    })
}

fn mixed_partial_residual(traj: &TempleTrajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 1..traj.states.len() {
        let (a, b) = (&traj.states[k - 1], &traj.states[k]);
        let dt = traj.times[k] - traj.times[k - 1];
        if dt <= 0.0 {
            continue;
        }
        let dx = a.eta.dx;
        for i in 0..a.eta.len() as isize {
            let u_left = 0.5 * (edge_velocity(a, i) + edge_velocity(b, i));
            let u_right = 0.5 * (edge_velocity(a, i + 1) + edge_velocity(b, i + 1));
            let d_t_eta = (b.eta.values[i as usize] - a.eta.values[i as usize]) / dt;
            worst = worst.max((d_t_eta - (u_right - u_left) / dx).abs());
        }
    }
    worst
}

/// `(v/η)(γ⁻¹(y))` with cell lookup of the piecewise-constant fields.
pub fn lagrangian_density(state: &TempleState, map: &FlowMap, y: f64) -> Result<f64> {
    let (i, _) = map.locate(y)?;
    Ok(state.density(i))
}

/// Normalised L¹ distance between an Eulerian density and the density
/// recovered from the flow map, sampled at the Eulerian cell centres.
pub fn correspondence_error(rho_eul: &GridFunction, state: &TempleState, map: &FlowMap) -> Result<f64> {
    let mut sum = 0.0;
    for (i, &r) in rho_eul.values.iter().enumerate() {
        sum += (r - lagrangian_density(state, map, rho_eul.center(i))?).abs();
    }
    Ok(sum * rho_eul.dx / rho_eul.length())
}

/// Density recovered from the flow map on the cell centres of `mesh`.
pub fn recovered_density(mesh: &GridFunction, state: &TempleState, map: &FlowMap) -> Result<GridFunction> {
    let values = (0..mesh.len())
        .map(|i| lagrangian_density(state, map, mesh.center(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(mesh.with_values(values))
}

/// Label mass `∫ v` to the left of `γ⁻¹(y)`, measured from the first label edge.
/// Circle maps add one full turn of mass per period.
fn mass_below(v: &GridFunction, cumulative: &[f64], map: &FlowMap, y: f64) -> Result<f64> {
    let (i, x) = map.locate(y)?;
    let turns = match map.period {
        Some(p) => ((y - map.gamma[0]) / p).floor(),
        None => 0.0,
    };
    let local = x - turns * map.period.unwrap_or(0.0) - map.x[i];
    Ok(turns * cumulative[v.len()] + cumulative[i] + v.values[i] * local)
}

/// Cell averages of `(v/η)∘γ⁻¹` over the cells of `mesh`: the label mass
/// carried into each cell, divided by its width.
pub fn averaged_density(mesh: &GridFunction, state: &TempleState, map: &FlowMap) -> Result<GridFunction> {
    let v = &*state.v;
    let mut cumulative = Vec::with_capacity(v.len() + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for &r in &v.values {
        acc += r * v.dx;
        cumulative.push(acc);
    }
    let mut below = mass_below(v, &cumulative, map, mesh.edge(0))?;
    let mut values = Vec::with_capacity(mesh.len());
    for i in 0..mesh.len() {
        let above = mass_below(v, &cumulative, map, mesh.edge(i + 1))?;
        values.push((above - below) / mesh.dx);
        below = above;
    }
    Ok(mesh.with_values(values))
}

/// L¹ distance between an Eulerian density and [`averaged_density`].
pub fn averaged_correspondence_error(rho_eul: &GridFunction, state: &TempleState, map: &FlowMap) -> Result<f64> {
    Ok(rho_eul.l1_distance(&averaged_density(rho_eul, state, map)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{normalize, velocity_law, Interval, RawFlux};
    use crate::temple::{init_temple, solve_temple};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn burgers(lo: f64, hi: f64) -> Arc<VelocityLaw> {
        let spec = normalize(RawFlux::burgers(), Interval::new(lo, hi).unwrap()).unwrap();
        Arc::new(velocity_law(&spec).unwrap())
    }

    fn edges(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }

    #[test]
    fn constant_state_translates_rigidly() {
        let vel = burgers(1.0, 3.0);
        let c = 2.5;
        let rho0 = GridFunction::from_fn(40, 0.0, 2.0, Boundary::ConstantExtension, |_| c).unwrap();
        let s0 = init_temple(vel.clone(), &rho0).unwrap();
        let traj = solve_temple(&s0, 0.8, 0.45, &[0.2, 0.4, 0.6]).unwrap();
        let rec = reconstruct(&traj).unwrap();
        for (g, x) in rec.maps[0].gamma.iter().zip(&rec.maps[0].x) {
            assert!((g - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0));
        }
        for m in &rec.maps {
            for (x, g) in m.x.iter().zip(&m.gamma) {
                assert_relative_eq!(*g, x + vel.velocity(c) * m.t, epsilon = 1e-13);
            }
            for y in [m.gamma[0], 0.77 + m.t, m.gamma[40]] {
                assert_relative_eq!(lagrangian_density(&traj.states[0], m, y).unwrap(), c);
            }
        }
        assert!(rec.mixed_partial_residual < 1e-12);
    }

    #[test]
    fn identity_and_translation_inverses() {
        let id = FlowMap::identity(edges(10, 0.0, 1.0), None);
        for y in [0.0, 0.31, 1.0] {
            assert_relative_eq!(invert(&id, y).unwrap(), y, epsilon = 1e-15);
        }
        assert!(matches!(invert(&id, 1.5), Err(Error::OutOfRange { .. })));
        let x = edges(10, 0.0, 1.0);
        let shifted = FlowMap {
            gamma: x.iter().map(|v| v + 0.37).collect(),
            x,
            t: 1.0,
            period: Some(1.0),
        };
        for y in [-0.2, 0.5, 3.1] {
            assert_relative_eq!(invert(&shifted, y).unwrap(), y - 0.37, epsilon = 1e-13);
        }
    }

    #[test]
    fn density_at_time_zero_is_initial_density() {
        let vel = burgers(1.0, 3.0);
        let rho0 = GridFunction::from_fn(50, 0.0, 1.0, Boundary::Periodic, |x| 2.0 + 0.5 * x).unwrap();
        let s0 = init_temple(vel, &rho0).unwrap();
        let traj = solve_temple(&s0, 0.0, 0.45, &[]).unwrap();
        let rec = reconstruct(&traj).unwrap();
        let back = recovered_density(&rho0, &traj.states[0], &rec.maps[0]).unwrap();
        assert_eq!(back.values, rho0.values);
        assert_eq!(correspondence_error(&rho0, &traj.states[0], &rec.maps[0]).unwrap(), 0.0);
    }

    #[test]
    fn riemann_shock_lands_at_rankine_hugoniot_position() {
        let vel = burgers(1.0, 2.0);
        let n = 400;
        let rho0 =
            GridFunction::from_fn(n, -1.0, 1.5, Boundary::ConstantExtension, |x| if x < 0.0 { 2.0 } else { 1.0 })
                .unwrap();
        let labels = label_mesh(&rho0, &vel, 0.5);
        let s0 = init_temple(vel, &labels).unwrap();
        let traj = solve_temple(&s0, 0.5, 0.45, &[]).unwrap();
        let rec = reconstruct(&traj).unwrap();
        let rho = recovered_density(&rho0, traj.last(), rec.maps.last().unwrap()).unwrap();
        let i = rho.values.iter().position(|&r| r < 1.5).unwrap();
        let x = rho.center(i) - 0.5 * rho.dx;
        assert!((x - 0.75).abs() <= 2.0 * rho0.dx, "jump at {x}");
        assert_eq!(rho.values[0], 2.0);
        assert_eq!(rho.values[n - 1], 1.0);
    }

    #[test]
    fn anchor_drift_is_detected() {
        let vel = burgers(1.0, 2.0);
        let rho0 = GridFunction::from_fn(20, 0.0, 1.0, Boundary::ConstantExtension, |x| if x < 0.3 { 1.0 } else { 2.0 })
            .unwrap();
        let s0 = init_temple(vel, &rho0).unwrap();
        let mut traj = solve_temple(&s0, 0.1, 0.45, &[]).unwrap();
        let last = traj.states.len() - 1;
        traj.states[last].eta.values[0] += 1e-6;
        assert!(matches!(reconstruct(&traj), Err(Error::AnchorDrift { .. })));
    }

    #[test]
    fn random_monotone_map_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = edges(100, 0.0, 1.0);
        let mut gamma = vec![-0.3];
        for _ in 0..100 {
            let g = gamma[gamma.len() - 1] + rng.gen_range(0.001..0.03);
            gamma.push(g);
        }
        let (lo, hi) = (gamma[0], gamma[100]);
        let map = FlowMap { x, gamma, t: 0.0, period: None };
        for _ in 0..1000 {
            let y = rng.gen_range(lo..=hi);
            let back = map.eval(invert(&map, y).unwrap()).unwrap();
            assert!((back - y).abs() <= 1e-12, "{y} -> {back}");
        }
    }

    proptest! {
        #[test]
        fn circle_map_inverse_composition(incs in prop::collection::vec(0.1f64..2.0, 8..40), y in -3.0f64..3.0) {
            let n = incs.len();
            let total: f64 = incs.iter().sum();
            let mut gamma = vec![0.2];
            for d in &incs {
                let g = gamma[gamma.len() - 1] + d / total;
                gamma.push(g);
            }
            gamma[n] = gamma[0] + 1.0;
            let map = FlowMap { x: edges(n, 0.0, 1.0), gamma, t: 0.0, period: Some(1.0) };
            let x = invert(&map, y).unwrap();
            prop_assert!((map.eval(x).unwrap() - y).abs() <= 1e-12);
        }
    }
}
