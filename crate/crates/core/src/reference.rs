//! Closed-form and quadrature reference solutions used to check the solvers.
//!
//! Nothing here calls into the finite-volume code; these are independent
//! routes to the same answers.

use crate::flux::{FluxSpec, VelocityLaw};

/// Smooth solution by characteristics: `ρ(y, t) = ρ₀(ξ)` with `y = ξ + f'(ρ₀(ξ))·t`.
///
/// Valid before the breakdown time, when `ξ ↦ ξ + f'(ρ₀(ξ))t` is increasing.
pub fn characteristics_density(spec: &FluxSpec, rho0: &dyn Fn(f64) -> f64, y: f64, t: f64) -> f64 {
    if t == 0.0 {
        return rho0(y);
    }
    let (smin, smax) = (
        spec.flux_prime(spec.data_range.lo).min(spec.flux_prime(spec.data_range.hi)),
        spec.flux_prime(spec.data_range.lo).max(spec.flux_prime(spec.data_range.hi)),
    );
    let foot = |xi: f64| xi + spec.flux_prime(rho0(xi)) * t - y;
    let pad = 1e-9 + (smax - smin).abs() * t;
    let (mut a, mut b) = (y - smax * t - pad, y - smin * t + pad);
    let fa = foot(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (foot(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 * (1.0 + y.abs()) {
            break;
        }
    }
    rho0(0.5 * (a + b))
}

/// Particle path `γ(x, t)` from `γ̇ = F(ρ(γ, t))`, `γ(x, 0) = x`, integrated
/// by classical RK4 with `steps` steps and the characteristics density.
pub fn particle_path(
    spec: &FluxSpec,
    vel: &VelocityLaw,
    rho0: &dyn Fn(f64) -> f64,
    x: f64,
    t: f64,
    steps: usize,
) -> f64 {
    let u = |y: f64, s: f64| vel.velocity(characteristics_density(spec, rho0, y, s));
    let h = t / steps as f64;
    let mut y = x;
    for k in 0..steps {
        let s = k as f64 * h;
        let k1 = u(y, s);
        let k2 = u(y + 0.5 * h * k1, s + 0.5 * h);
        let k3 = u(y + 0.5 * h * k2, s + 0.5 * h);
        let k4 = u(y + h * k3, s + h);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// d'Alembert solution of `η_t = w_x`, `w_t = c² η_x` with `η(·,0) = 1` and
/// `w(·,0) = w0`, on a circle of length `period`. Returns `(η, w)`.
pub fn dalembert(w0: &dyn Fn(f64) -> f64, c: f64, period: f64, x: f64, t: f64) -> (f64, f64) {
    let wrap = |s: f64| w0(s.rem_euclid(period));
    let (plus, minus) = (wrap(x + c * t), wrap(x - c * t));
    (1.0 + (plus - minus) / (2.0 * c), 0.5 * (plus + minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{normalize, velocity_law, Interval, RawFlux};
    use approx::assert_relative_eq;

    #[test]
    fn characteristics_of_linear_profile() {
        // Burgers with ρ₀(x) = 1 + x/10 on a window: ρ(y,t) = (1 + y/10)/(1 + t/10)... solve
        // y = ξ + (1 + ξ/10)t  =>  ξ = (y - t)/(1 + t/10)
        let spec = normalize(RawFlux::burgers(), Interval::new(0.5, 3.0).unwrap()).unwrap();
        let rho0 = |x: f64| 1.0 + x / 10.0;
        let (y, t) = (3.0, 2.0);
        let xi = (y - t) / (1.0 + t / 10.0);
        assert_relative_eq!(characteristics_density(&spec, &rho0, y, t), rho0(xi), max_relative = 1e-13);
    }

    #[test]
    fn particle_path_for_constant_state() {
        let spec = normalize(RawFlux::burgers(), Interval::new(1.0, 3.0).unwrap()).unwrap();
        let vel = velocity_law(&spec).unwrap();
        let p = particle_path(&spec, &vel, &|_| 2.0, 0.3, 0.5, 10);
        assert_relative_eq!(p, 0.8, max_relative = 1e-14);
    }

    #[test]
    fn dalembert_satisfies_initial_data() {
        let w0 = |x: f64| (-(x - 0.5f64).powi(2) / 0.01).exp();
        let (eta, w) = dalembert(&w0, 1.0, 1.0, 0.4, 0.0);
        assert_eq!(eta, 1.0);
        assert_eq!(w, w0(0.4));
    }
}
