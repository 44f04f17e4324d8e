//! Scalar fluxes, their affine normalisation, and the passage between flux,
//! particle velocity `F(ρ) = f(ρ)/ρ`, its inverse `g`, and the action
//! potential `b` with `b' = g²`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::numerics::{
    adaptive_simpson, central_difference, invert_monotone, linspace, real_fn, RealFn, INVERSION_MAX_ITER,
    INVERSION_TOL,
};

/// Fallible real function (values computed by quadrature).
pub type FallibleFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// Default lower bound δ imposed on the shifted density range.
pub const DEFAULT_MARGIN: f64 = 0.5;
/// Number of samples used to estimate the feasible interval for `K`.
pub const K_SAMPLES: usize = 1024;
/// Relative enlargement of the density bracket used when inverting `F`.
pub const RANGE_ENLARGEMENT: f64 = 1.05;
pub const QUADRATURE_TOL: f64 = 1e-10;
const DERIVATIVE_CHECK_POINTS: usize = 33;
const DERIVATIVE_REL_TOL: f64 = 1e-4;

/// A flux `f` with its derivative, as supplied by the caller.
#[derive(Clone)]
pub struct RawFlux {
    pub name: String,
    pub f: RealFn,
    pub f_prime: RealFn,
}

impl fmt::Debug for RawFlux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RawFlux").field("name", &self.name).finish()
    }
}

impl RawFlux {
    pub fn new(name: impl Into<String>, f: RealFn, f_prime: RealFn) -> Self {
        Self {
            name: name.into(),
            f,
            f_prime,
        }
    }

    /// `f(ρ) = ρ²/2`.
    pub fn burgers() -> Self {
        Self::new("burgers", real_fn(|r| 0.5 * r * r), real_fn(|r| r))
    }

    /// `f(ρ) = ρ³`.
    pub fn cubic() -> Self {
        Self::new("cubic", real_fn(|r| r * r * r), real_fn(|r| 3.0 * r * r))
    }

    /// Traffic flux `f(ρ) = v_max·ρ(1 - ρ/ρ_max)`.
    pub fn lwr(v_max: f64, rho_max: f64) -> Self {
        Self::new(
            "lwr",
            real_fn(move |r| v_max * r * (1.0 - r / rho_max)),
            real_fn(move |r| v_max * (1.0 - 2.0 * r / rho_max)),
        )
    }

    /// `f(ρ) = Σ c_k ρ^k` with coefficients in increasing degree.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let c: Arc<[f64]> = coeffs.into();
        let d: Arc<[f64]> = c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect();
        Self::new(
            "polynomial",
            real_fn(move |r| horner(&c, r)),
            real_fn(move |r| horner(&d, r)),
        )
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * x + ck)
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn samples(&self, n: usize) -> impl Iterator<Item = f64> {
        linspace(self.lo, self.hi, n.saturating_sub(1).max(1))
    }
}

/// A flux after the shifts `ρ ↦ ρ + L`, `f ↦ f + K`.
///
/// All solvers work in the shifted variables: `flux(ρ) = f(ρ - L) + K` on
/// `data_range`, which is the raw range moved by `L`.
#[derive(Clone, Debug)]
pub struct FluxSpec {
    pub raw: RawFlux,
    pub data_range: Interval,
    pub shift_l: f64,
    pub shift_k: f64,
}

/// Overrides for [`normalize_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalizeOptions {
    pub margin: Option<f64>,
    pub shift_l: Option<f64>,
    pub shift_k: Option<f64>,
}

impl FluxSpec {
    pub fn flux(&self, rho: f64) -> f64 {
        (self.raw.f)(rho - self.shift_l) + self.shift_k
    }

    pub fn flux_prime(&self, rho: f64) -> f64 {
        (self.raw.f_prime)(rho - self.shift_l)
    }

    pub fn to_raw(&self, rho: f64) -> f64 {
        rho - self.shift_l
    }

    pub fn from_raw(&self, rho_raw: f64) -> f64 {
        rho_raw + self.shift_l
    }

    /// Largest |f'| over the samples of `[lo, hi]`, endpoints included.
    pub fn max_speed(&self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return self.flux_prime(lo).abs();
        }
        linspace(lo, hi, 64)
            .map(|r| self.flux_prime(r).abs())
            .fold(0.0, f64::max)
    }
}

/// Normalises `raw` on `raw_range` with the default margin.
pub fn normalize(raw: RawFlux, raw_range: Interval) -> Result<FluxSpec> {
    normalize_with(raw, raw_range, NormalizeOptions::default())
}

/// Chooses `L` so the shifted range starts at or above the margin, and `K`
/// as the midpoint of the sampled interval
/// `(-min f̃, min (a f̃'(a) - f̃(a)))` on which `(f̃ + K)/a` is positive and
/// increasing.
pub fn normalize_with(raw: RawFlux, raw_range: Interval, opts: NormalizeOptions) -> Result<FluxSpec> {
    validate_derivative(&raw.f, &raw.f_prime, raw_range)?;
    let margin = opts.margin.unwrap_or(DEFAULT_MARGIN);
    let shift_l = opts.shift_l.unwrap_or_else(|| (margin - raw_range.lo).max(0.0));
    let data_range = Interval::new(raw_range.lo + shift_l, raw_range.hi + shift_l)?;
    if data_range.lo <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "shifted density range starts at {} (must be positive)",
            data_range.lo
        )));
    }
    let shifted = |a: f64| (raw.f)(a - shift_l);
    let shifted_prime = |a: f64| (raw.f_prime)(a - shift_l);
    let (mut min_f, mut min_q) = (f64::INFINITY, f64::INFINITY);
    for a in data_range.samples(K_SAMPLES) {
        let fa = shifted(a);
        min_f = min_f.min(fa);
        min_q = min_q.min(a * shifted_prime(a) - fa);
    }
    let (k_min, k_max) = (-min_f, min_q);
    let infeasible = || Error::InfeasibleNormalization {
        lo: data_range.lo,
        hi: data_range.hi,
        k_min,
        k_max,
    };
    if !(k_min < k_max) {
        return Err(infeasible());
    }
    let shift_k = match opts.shift_k {
        Some(k) if k > k_min && k < k_max => k,
        Some(_) => return Err(infeasible()),
        None => 0.5 * (k_min + k_max),
    };
    Ok(FluxSpec {
        raw,
        data_range,
        shift_l,
        shift_k,
    })
}

/// Compares a supplied derivative with central differences at sampled points.
pub fn validate_derivative(f: &RealFn, f_prime: &RealFn, range: Interval) -> Result<()> {
    let scale = range.lo.abs().max(range.hi.abs()).max(range.width()).max(1e-3);
    let h = 1e-5 * scale;
    // zeros of f' are judged against the largest slope on the range
    let slope = range
        .samples(DERIVATIVE_CHECK_POINTS)
        .fold(0.0f64, |a, x| a.max(f_prime(x).abs()));
    for x in range.samples(DERIVATIVE_CHECK_POINTS) {
        let given = f_prime(x);
        let estimated = central_difference(&**f, x, h);
        let diff = (given - estimated).abs();
        let denom = given.abs().max(estimated.abs()).max(1e-3 * slope).max(1e-8);
        if !given.is_finite() || (diff > 1e-10 && diff / denom > DERIVATIVE_REL_TOL) {
            return Err(Error::DerivativeMismatch { at: x, given, estimated });
        }
    }
    Ok(())
}

/// Particle velocity `F(ρ) = f̂(ρ)/ρ` and its inverse `g`.
#[derive(Clone)]
pub struct VelocityLaw {
    velocity: RealFn,
    velocity_prime: RealFn,
    pub data_range: Interval,
    pub u_range: Interval,
}

impl fmt::Debug for VelocityLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VelocityLaw")
            .field("data_range", &self.data_range)
            .field("u_range", &self.u_range)
            .finish()
    }
}

impl VelocityLaw {
    /// Builds a law from `F` and `F'` on a density range where `F` increases.
    pub fn from_functions(velocity: RealFn, velocity_prime: RealFn, data_range: Interval) -> Result<Self> {
        let u_range = Interval::new(velocity(data_range.lo), velocity(data_range.hi))?;
        Ok(Self {
            velocity,
            velocity_prime,
            data_range,
            u_range,
        })
    }

    /// F(ρ)
    pub fn velocity(&self, rho: f64) -> f64 {
        (self.velocity)(rho)
    }

    /// F'(ρ)
    pub fn velocity_prime(&self, rho: f64) -> f64 {
        (self.velocity_prime)(rho)
    }

    /// g(u) = F⁻¹(u), bracketed by the density range. Targets outside
    /// `u_range` (perturbed paths probe them) are bracketed by successively
    /// enlarged density ranges, starting with the 5 % enlargement.
    pub fn density(&self, u: f64) -> Result<f64> {
        let invert = |lo: f64, hi: f64| {
            invert_monotone(
                &*self.velocity,
                &*self.velocity_prime,
                u,
                lo,
                hi,
                INVERSION_MAX_ITER,
                INVERSION_TOL,
            )
        };
        let r = self.data_range;
        if self.u_range.contains(u) {
            return invert(r.lo, r.hi);
        }
        let mut last = Err(Error::InversionFailure { target: u, residual: f64::INFINITY });
        for factor in [RANGE_ENLARGEMENT, 1.5, 3.0] {
            last = invert(r.lo / factor, r.hi * factor);
            if last.is_ok() {
                break;
            }
        }
        last
    }

    /// g'(u) = 1 / F'(g(u)).
    pub fn density_prime(&self, u: f64) -> Result<f64> {
        Ok(1.0 / self.velocity_prime(self.density(u)?))
    }
}

/// `F(ρ) = (f(ρ - L) + K)/ρ` for a normalised flux.
pub fn velocity_law(spec: &FluxSpec) -> Result<VelocityLaw> {
    let (s1, s2) = (spec.clone(), spec.clone());
    let law = VelocityLaw::from_functions(
        real_fn(move |r| s1.flux(r) / r),
        real_fn(move |r| (r * s2.flux_prime(r) - s2.flux(r)) / (r * r)),
        spec.data_range,
    )?;
    if !(law.u_range.lo > 0.0) || !(law.u_range.hi > law.u_range.lo || spec.data_range.width() == 0.0) {
        return Err(Error::InvalidInput(format!(
            "velocity range [{}, {}] is not positive and increasing; normalise the flux first",
            law.u_range.lo, law.u_range.hi
        )));
    }
    for u in [law.u_range.lo, law.u_range.hi] {
        law.density(u)?;
    }
    Ok(law)
}

/// The potential `b` of the action, with `b'`, `b''` and `B = (b')⁻¹`.
#[derive(Clone)]
pub struct ActionPotential {
    b: FallibleFn,
    b_prime: RealFn,
    b_second: RealFn,
    pub u_range: Interval,
    pub u_ref: f64,
}

impl fmt::Debug for ActionPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActionPotential")
            .field("u_range", &self.u_range)
            .field("u_ref", &self.u_ref)
            .finish()
    }
}

impl ActionPotential {
    /// Potential given in closed form on the working interval `u_range`.
    pub fn closed_form(b: RealFn, b_prime: RealFn, b_second: RealFn, u_range: Interval) -> Self {
        Self {
            b: Arc::new(move |u| Ok(b(u))),
            b_prime,
            b_second,
            u_range,
            u_ref: u_range.lo,
        }
    }

    /// `b(u) = u²/2`, the quadratic action.
    pub fn quadratic(u_range: Interval) -> Self {
        Self::closed_form(real_fn(|u| 0.5 * u * u), real_fn(|u| u), real_fn(|_| 1.0), u_range)
    }

    /// `b(u) = c·u³` family used for Burgers (`c = 4/3`).
    pub fn cubic(coeff: f64, u_range: Interval) -> Self {
        Self::closed_form(
            real_fn(move |u| coeff * u * u * u),
            real_fn(move |u| 3.0 * coeff * u * u),
            real_fn(move |u| 6.0 * coeff * u),
            u_range,
        )
    }

    pub fn b(&self, u: f64) -> Result<f64> {
        (self.b)(u)
    }

    pub fn b_prime(&self, u: f64) -> f64 {
        (self.b_prime)(u)
    }

    pub fn b_second(&self, u: f64) -> f64 {
        (self.b_second)(u)
    }

    /// B(ξ) = (b')⁻¹(ξ), by inversion over the working interval, padded by
    /// 5 % only when ξ lies outside `b'(u_range)`.
    pub fn inverse_derivative(&self, xi: f64) -> Result<f64> {
        let r = self.u_range;
        let inside = self.b_prime(r.lo) <= xi && xi <= self.b_prime(r.hi);
        let pad = if inside { 0.0 } else { 0.05 * r.width().max(r.hi.abs() * 1e-3) };
        invert_monotone(
            &*self.b_prime,
            &*self.b_second,
            xi,
            r.lo - pad,
            r.hi + pad,
            INVERSION_MAX_ITER,
            INVERSION_TOL,
        )
    }
}

/// `b(u) = ∫_{u_ref}^u g(s)² ds`, `b' = g²`, `b'' = 2 g g'`.
pub fn potential_from_flux(vel: &VelocityLaw, u_ref: f64) -> Result<ActionPotential> {
    if !vel.u_range.contains(u_ref) {
        return Err(Error::InvalidInput(format!(
            "u_ref = {u_ref} outside the velocity range [{}, {}]",
            vel.u_range.lo, vel.u_range.hi
        )));
    }
    let (v1, v2, v3) = (vel.clone(), vel.clone(), vel.clone());
    // g is only ever evaluated inside the density bracket, so a failure here is a
    // caller error (u far outside u_range); NaN propagates and is caught downstream.
    let g = move |v: &VelocityLaw, u: f64| v.density(u).unwrap_or(f64::NAN);
    let b: FallibleFn = Arc::new(move |u| {
        let integrand = |s: f64| {
            let r = g(&v1, s);
            r * r
        };
        adaptive_simpson(&integrand, u_ref, u, QUADRATURE_TOL)
    });
    let b_prime = real_fn(move |u| {
        let r = g(&v2, u);
        r * r
    });
    let b_second = real_fn(move |u| {
        let r = g(&v3, u);
        2.0 * r / v3.velocity_prime(r)
    });
    Ok(ActionPotential {
        b,
        b_prime,
        b_second,
        u_range: vel.u_range,
        u_ref,
    })
}

/// Recovers `F(ξ) = B(ξ²)` and the flux `f(ρ) = ρ F(ρ)` from a potential.
pub fn flux_from_potential(b: &ActionPotential) -> Result<(VelocityLaw, FluxSpec)> {
    let ur = b.u_range;
    let mut prev = f64::NEG_INFINITY;
    for u in ur.samples(65) {
        let d = b.b_prime(u);
        if !(d > 0.0) || !(d > prev) {
            return Err(Error::InvalidInput(format!(
                "b' must be positive and increasing on [{}, {}]; fails at u = {u}",
                ur.lo, ur.hi
            )));
        }
        prev = d;
    }
    let data_range = Interval::new(b.b_prime(ur.lo).sqrt(), b.b_prime(ur.hi).sqrt())?;
    let (p1, p2) = (b.clone(), b.clone());
    let velocity = real_fn(move |xi| p1.inverse_derivative(xi * xi).unwrap_or(f64::NAN));
    let velocity_prime = real_fn(move |xi| {
        let u = p2.inverse_derivative(xi * xi).unwrap_or(f64::NAN);
        2.0 * xi / p2.b_second(u)
    });
    for xi in [data_range.lo, data_range.hi] {
        b.inverse_derivative(xi * xi)?;
    }
    let law = VelocityLaw::from_functions(velocity.clone(), velocity_prime.clone(), data_range)?;
    let (v1, v2, d2) = (velocity.clone(), velocity, velocity_prime);
    let raw = RawFlux::new(
        "from_potential",
        real_fn(move |r| r * v1(r)),
        real_fn(move |r| v2(r) + r * d2(r)),
    );
    let spec = FluxSpec {
        raw,
        data_range,
        shift_l: 0.0,
        shift_k: 0.0,
    };
    Ok((law, spec))
}

/// Time at which characteristics first cross, `-1 / min D_x f'(ρ₀)`.
pub fn breakdown_time(spec: &FluxSpec, rho0: &GridFunction) -> f64 {
    let speed: Vec<f64> = rho0.values.iter().map(|&r| spec.flux_prime(r)).collect();
    let n = speed.len() as isize;
    let s = rho0.with_values(speed);
    let min_slope = (0..n)
        .map(|i| {
            let (l, r, w) = match rho0.boundary {
                crate::grid::Boundary::ConstantExtension if i == 0 => (s.at(0), s.at(1), 1.0),
                crate::grid::Boundary::ConstantExtension if i == n - 1 => (s.at(n - 2), s.at(n - 1), 1.0),
                _ => (s.at(i - 1), s.at(i + 1), 2.0),
            };
            (r - l) / (w * rho0.dx)
        })
        .fold(f64::INFINITY, f64::min);
    if n > 1 && min_slope < 0.0 {
        -1.0 / min_slope
    } else {
        f64::INFINITY
    }
}
