//! Godunov finite-volume solver for `ρ_t + f(ρ)_x = 0` and the exact
//! self-similar Riemann solution used as its oracle.

use crate::error::{Error, Result};
use crate::flux::FluxSpec;
use crate::grid::{Boundary, GridFunction};
use crate::numerics::linspace;

/// Largest admissible Courant number.
pub const MAX_CFL: f64 = 0.9;
pub const DEFAULT_CFL: f64 = 0.45;
const CRITICAL_POINT_SUBINTERVALS: usize = 64;
const HULL_SAMPLES: usize = 2048;

/// Snapshots of the density at increasing times.
#[derive(Debug, Clone)]
pub struct EulerianTrajectory {
    pub snapshots: Vec<GridFunction>,
    pub times: Vec<f64>,
    pub cfl: f64,
    pub hygiene: Hygiene,
}

/// Per-step diagnostics accumulated over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hygiene {
    pub steps: usize,
    /// Largest one-step increase of the total variation (≤ 0 for a TVD run).
    pub max_tv_increase: f64,
    pub min_value: f64,
    pub max_value: f64,
}

impl EulerianTrajectory {
    pub fn last(&self) -> &GridFunction {
        self.snapshots.last().expect("trajectory has a t = 0 snapshot")
    }

    /// Snapshot recorded at exactly `t`, if any.
    pub fn at_time(&self, t: f64) -> Option<&GridFunction> {
        self.times.iter().position(|&s| s == t).map(|i| &self.snapshots[i])
    }
}

/// Extremum of `f` over `[lo, hi]`: endpoints plus critical points located by
/// sign changes of `f'` on a uniform subdivision, refined by bisection.
fn flux_extremum(spec: &FluxSpec, lo: f64, hi: f64, want_max: bool) -> f64 {
    let pick = |a: f64, b: f64| if want_max { a.max(b) } else { a.min(b) };
    let mut best = pick(spec.flux(lo), spec.flux(hi));
    let fp = |r: f64| spec.flux_prime(r);
    let mut prev_x = lo;
    let mut prev_d = fp(lo);
    for x in linspace(lo, hi, CRITICAL_POINT_SUBINTERVALS).skip(1) {
        let d = fp(x);
        if prev_d == 0.0 {
            best = pick(best, spec.flux(prev_x));
        } else if prev_d.signum() != d.signum() && d != 0.0 {
            let (mut a, mut b, da) = (prev_x, x, prev_d);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if (fp(m) > 0.0) == (da > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            best = pick(best, spec.flux(0.5 * (a + b)));
        }
        prev_x = x;
        prev_d = d;
    }
    best
}

/// Godunov flux: `min f` over `[ρL, ρR]` when `ρL ≤ ρR`, otherwise `max f` over `[ρR, ρL]`.
pub fn godunov_interface_flux(spec: &FluxSpec, rho_l: f64, rho_r: f64) -> f64 {
    if rho_l == rho_r {
        spec.flux(rho_l)
    } else if rho_l < rho_r {
        flux_extremum(spec, rho_l, rho_r, false)
    } else {
        flux_extremum(spec, rho_r, rho_l, true)
    }
}

/// Largest stable time step `cfl·Δx / max|f'|` for the values in `state`.
pub fn stable_dt(spec: &FluxSpec, state: &GridFunction, cfl: f64) -> f64 {
    let speed = spec.max_speed(state.min(), state.max());
    if speed > 0.0 {
        cfl * state.dx / speed
    } else {
        f64::INFINITY
    }
}

/// One conservative Godunov update.
pub fn step(spec: &FluxSpec, state: &GridFunction, dt: f64) -> Result<GridFunction> {
    let bound = stable_dt(spec, state, MAX_CFL);
    if !(dt >= 0.0) || dt > bound {
        return Err(Error::CflViolation { dt, bound });
    }
    let n = state.len();
    let mut fluxes: Vec<f64> = (0..=n as isize)
        .map(|i| godunov_interface_flux(spec, state.at(i - 1), state.at(i)))
        .collect();
    if state.boundary == Boundary::Periodic {
        fluxes[n] = fluxes[0];
    }
    let r = dt / state.dx;
    let values = state
        .values
        .iter()
        .zip(fluxes.windows(2))
        .map(|(rho, f)| rho - r * (f[1] - f[0]))
        .collect();
    Ok(state.with_values(values))
}

/// Sorted output times strictly inside `(0, T)`, with 0 and `T` added.
pub(crate) fn output_schedule(t_final: f64, outputs: &[f64]) -> Result<Vec<f64>> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidInput(format!("bad final time {t_final}")));
    }
    if let Some(t) = outputs.iter().find(|t| !(**t >= 0.0 && **t <= t_final)) {
        return Err(Error::InvalidInput(format!("output time {t} outside [0, {t_final}]")));
    }
    let mut times: Vec<f64> = outputs.iter().copied().filter(|&t| t > 0.0 && t < t_final).collect();
    times.push(0.0);
    times.push(t_final);
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

pub(crate) fn check_cfl(cfl: f64) -> Result<()> {
    if cfl > 0.0 && cfl <= MAX_CFL {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("cfl {cfl} outside (0, {MAX_CFL}]")))
    }
}

/// Number of constant cells added on each side of a real-line window.
fn padding_cells(spec: &FluxSpec, rho0: &GridFunction, t_final: f64) -> usize {
    match rho0.boundary {
        Boundary::Periodic => 0,
        Boundary::ConstantExtension => {
            let speed = spec.max_speed(rho0.min(), rho0.max());
            (speed * t_final / rho0.dx).ceil() as usize + 2
        }
    }
}

fn pad(g: &GridFunction, cells: usize) -> GridFunction {
    if cells == 0 {
        return g.clone();
    }
    let n = g.len();
    let mut values = Vec::with_capacity(n + 2 * cells);
    values.extend(std::iter::repeat_n(g.values[0], cells));
    values.extend_from_slice(&g.values);
    values.extend(std::iter::repeat_n(g.values[n - 1], cells));
    GridFunction {
        values,
        dx: g.dx,
        x0: g.x0 - cells as f64 * g.dx,
        boundary: g.boundary,
    }
}

fn crop(g: &GridFunction, cells: usize, n: usize, x0: f64) -> GridFunction {
    GridFunction {
        values: g.values[cells..cells + n].to_vec(),
        dx: g.dx,
        x0,
        boundary: g.boundary,
    }
}

/// Integrates to `t_final`, recording snapshots at 0, each requested output
/// time (hit exactly by shortening the preceding step) and `t_final`.
///
/// Real-line windows are padded internally by `max|f'|·T/Δx` constant cells on
/// each side so the edge states are never polluted; snapshots are cropped back.
pub fn solve(
    spec: &FluxSpec,
    rho0: &GridFunction,
    t_final: f64,
    cfl: f64,
    outputs: &[f64],
) -> Result<EulerianTrajectory> {
    check_cfl(cfl)?;
    let times = output_schedule(t_final, outputs)?;
    let (lo, hi) = (spec.data_range.lo, spec.data_range.hi);
    if rho0.min() < lo - 1e-12 || rho0.max() > hi + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "initial density [{}, {}] leaves the data range [{lo}, {hi}]",
            rho0.min(),
            rho0.max()
        )));
    }
    let cells = padding_cells(spec, rho0, t_final);
    let n = rho0.len();
    let mut state = pad(rho0, cells);
    let mut hygiene = Hygiene {
        steps: 0,
        max_tv_increase: f64::NEG_INFINITY,
        min_value: rho0.min(),
        max_value: rho0.max(),
    };
    let mut tv = state.total_variation();
    let mut snapshots = vec![rho0.clone()];
    let mut t = 0.0;
    for &target in &times[1..] {
        while t < target {
            let dt_max = stable_dt(spec, &state, cfl);
            let (dt, next_t) = if t + dt_max >= target { (target - t, target) } else { (dt_max, t + dt_max) };
            state = step(spec, &state, dt)?;
            t = next_t;
            let new_tv = state.total_variation();
            hygiene.steps += 1;
            hygiene.max_tv_increase = hygiene.max_tv_increase.max(new_tv - tv);
            hygiene.min_value = hygiene.min_value.min(state.min());
            hygiene.max_value = hygiene.max_value.max(state.max());
            tv = new_tv;
        }
        snapshots.push(crop(&state, cells, n, rho0.x0));
    }
    if hygiene.steps == 0 {
        hygiene.max_tv_increase = 0.0;
    }
    Ok(EulerianTrajectory {
        snapshots,
        times,
        cfl,
        hygiene,
    })
}

/// Entropy solution of the Riemann problem `(ρL, ρR)` at `ξ = x/t`.
///
/// Uses the lower convex hull of `f` on `[ρL, ρR]` when `ρL < ρR` and the
/// upper concave hull when `ρL > ρR`; chords of the hull are shocks, the
/// parts where the hull touches `f` are rarefaction fans.
pub fn riemann_exact(spec: &FluxSpec, rho_l: f64, rho_r: f64, xi: f64) -> f64 {
    if rho_l == rho_r {
        return rho_l;
    }
    let pts: Vec<(f64, f64)> = linspace(rho_l, rho_r, HULL_SAMPLES)
        .map(|r| (r, spec.flux(r)))
        .collect();
    let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
    // indices into pts; slopes along the hull are non-decreasing in traversal order
    let mut hull: Vec<usize> = Vec::with_capacity(pts.len());
    for k in 0..pts.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if slope(pts[a], pts[b]) >= slope(pts[b], pts[k]) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let slopes: Vec<f64> = hull.windows(2).map(|w| slope(pts[w[0]], pts[w[1]])).collect();
    if xi < slopes[0] {
        return rho_l;
    }
    if xi >= slopes[slopes.len() - 1] {
        return rho_r;
    }
    // vertex j with slopes[j-1] <= xi < slopes[j]
    let j = slopes.partition_point(|&s| s <= xi);
    let vertex = hull[j];
    let lo_idx = if j > 0 && hull[j - 1] + 1 == vertex { hull[j - 1] } else { vertex };
    let hi_idx = if j + 1 < hull.len() && hull[j + 1] == vertex + 1 { hull[j + 1] } else { vertex };
    if lo_idx == hi_idx {
        return pts[vertex].0;
    }
    // inside a fan: solve f'(ρ) = ξ on the bracketing samples
    let (mut a, mut b) = (pts[lo_idx].0, pts[hi_idx].0);
    let ga = spec.flux_prime(a) - xi;
    let gb = spec.flux_prime(b) - xi;
    if ga.signum() == gb.signum() {
        return pts[vertex].0;
    }
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if (spec.flux_prime(m) - xi).signum() == ga.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
